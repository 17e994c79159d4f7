use serde::{Deserialize, Serialize};

use crate::lang::{scalarize_g, Critic, Critique};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub action: usize,
    pub critique: Critique,
}

/// The actions shown to the refinement policy, in order, and what it
/// finally chose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementTranscript {
    pub state: usize,
    /// `a^1, …, a^j` with `j ≤ m`.
    pub attempts: Vec<Attempt>,
    pub refined: Attempt,
}

impl RefinementTranscript {
    pub fn initial_action(&self) -> usize {
        self.attempts[0].action
    }

    pub fn refined_action(&self) -> usize {
        self.refined.action
    }

    /// Scalarized critiques along the attempts and the refined action.
    pub fn scalars(&self) -> Vec<f64> {
        self.attempts
            .iter()
            .chain(std::iter::once(&self.refined))
            .map(|a| scalarize_g(&a.critique))
            .collect()
    }

    pub fn is_monotone(&self) -> bool {
        self.scalars().windows(2).all(|w| w[1] >= w[0])
    }
}

/// Up to `m` rounds of critique-guided revision starting from
/// `initial_action`. Each round scores at most `candidate_budget` untried
/// actions in index order, skipping any whose justification is identical to
/// an attempted action's, and adopts the best one if it scores no lower
/// than the incumbent. Rounds stop once the incumbent is judged optimal.
pub fn refine<C: Critic + ?Sized>(
    critic: &C,
    state: usize,
    initial_action: usize,
    m: usize,
    candidate_budget: usize,
) -> Result<RefinementTranscript> {
    if m == 0 {
        return Err(Error::Config("refinement needs m ≥ 1".into()));
    }
    let num_actions = critic.num_actions();
    if initial_action >= num_actions {
        return Err(Error::ActionOutOfRange(initial_action));
    }
    let mut tried = vec![false; num_actions];
    tried[initial_action] = true;
    let mut incumbent = Attempt {
        action: initial_action,
        critique: critic.critique(state, initial_action)?,
    };
    let mut attempts = vec![incumbent.clone()];
    let mut seen_keys = vec![incumbent.critique.justification_key()];

    for round in 0..m {
        if incumbent.critique.optimal {
            break;
        }
        let mut best: Option<Attempt> = None;
        let mut scored = 0;
        for action in 0..num_actions {
            if scored == candidate_budget {
                break;
            }
            if tried[action] {
                continue;
            }
            tried[action] = true;
            let critique = critic.critique(state, action)?;
            if seen_keys.contains(&critique.justification_key()) {
                continue;
            }
            scored += 1;
            let better = best
                .as_ref()
                .is_none_or(|b| scalarize_g(&critique) > scalarize_g(&b.critique));
            if better {
                best = Some(Attempt { action, critique });
            }
        }
        let Some(candidate) = best else { break };
        if scalarize_g(&candidate.critique) >= scalarize_g(&incumbent.critique) {
            seen_keys.push(candidate.critique.justification_key());
            incumbent = candidate;
        }
        if round + 1 < m && !incumbent.critique.optimal {
            attempts.push(incumbent.clone());
        }
    }
    Ok(RefinementTranscript {
        state,
        attempts,
        refined: incumbent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::RolloutDescription;

    /// Fixed sentiments; verdict against the best.
    struct Table(Vec<f64>);

    impl Critic for Table {
        fn num_actions(&self) -> usize {
            self.0.len()
        }

        fn critique(&self, _state: usize, action: usize) -> Result<Critique> {
            let best = self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(Critique {
                optimal: self.0[action] >= best,
                sentiment: self.0[action],
                justifications: vec![(RolloutDescription::empty(0.5), self.0[action])],
            })
        }
    }

    #[test]
    fn optimal_initial_action_kept() {
        let t = refine(&Table(vec![0.0, 1.0]), 0, 1, 3, 2).unwrap();
        assert_eq!(t.attempts.len(), 1);
        assert_eq!(t.refined_action(), 1);
    }

    #[test]
    fn single_round_finds_better() {
        let t = refine(&Table(vec![0.0, 1.0]), 0, 0, 1, 2).unwrap();
        assert_eq!(t.refined_action(), 1);
        assert_eq!(t.attempts.len(), 1);
        assert!(t.is_monotone());
    }

    #[test]
    fn budget_limits_search() {
        let critic = Table(vec![0.0, 0.5, 0.2, 1.0]);
        let t = refine(&critic, 0, 0, 1, 2).unwrap();
        assert_eq!(t.refined_action(), 1);
        let t = refine(&critic, 0, 0, 2, 2).unwrap();
        assert_eq!(t.refined_action(), 3);
        assert_eq!(t.attempts.len(), 2);
        assert!(t.is_monotone());
    }

    #[test]
    fn worse_candidates_rejected() {
        let t = refine(&Table(vec![0.5, 0.1, 0.2, 0.9]), 0, 0, 1, 2).unwrap();
        assert_eq!(t.refined_action(), 0);
    }

    #[test]
    fn identical_justifications_skipped() {
        // action 1 says exactly what action 0 says
        let t = refine(&Table(vec![0.3, 0.3, 0.4, 1.0]), 0, 0, 1, 1).unwrap();
        assert_eq!(t.refined_action(), 2);
    }
}
