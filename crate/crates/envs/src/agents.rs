//! Action sources for rollouts: scripted agents and an endpoint-backed policy.

use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use nlac_gateway::{ActionSchema, ChatContext, ComposedAction, Gateway, Site};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::env::EnvState;
use crate::error::{Error, Result};
use crate::twenty_q::ObjectTable;

/// What an agent sees before acting.
pub struct AgentView<'a> {
    pub context: &'a ChatContext,
    pub state: &'a EnvState,
    pub schema: &'a ActionSchema,
    pub site: Site,
}

pub trait Agent {
    fn act(&mut self, view: &AgentView<'_>) -> Result<ComposedAction>;
}

/// Samples actions from the policy prompt.
pub struct GatewayAgent {
    gateway: Arc<Gateway>,
}

impl GatewayAgent {
    pub fn new(gateway: Arc<Gateway>) -> Self {
        Self { gateway }
    }
}

impl Agent for GatewayAgent {
    fn act(&mut self, view: &AgentView<'_>) -> Result<ComposedAction> {
        Ok(self.gateway.generate_action(view.context, view.schema, view.site)?.value)
    }
}

/// Plays back a fixed action list.
pub struct ReplayAgent {
    actions: VecDeque<ComposedAction>,
}

impl ReplayAgent {
    pub fn new(actions: impl IntoIterator<Item = ComposedAction>) -> Self {
        Self { actions: actions.into_iter().collect() }
    }
}

impl Agent for ReplayAgent {
    fn act(&mut self, _: &AgentView<'_>) -> Result<ComposedAction> {
        self.actions.pop_front().ok_or_else(|| Error::Agent("replay agent ran out of actions".into()))
    }
}

fn ask(thought: &str, question: String) -> ComposedAction {
    ComposedAction::new(thought, "ask", json!({ "question": question }))
}

fn guess(thought: &str, object: &str) -> ComposedAction {
    ComposedAction::new(thought, "guess", json!({ "object": object }))
}

#[derive(Debug, Clone)]
enum Pending {
    Attribute(String),
    OneOf(BTreeSet<String>),
}

/// 20 Questions player that knows the attribute table (not the hidden
/// object) and halves its candidate set with every question.
pub struct BisectionAgent {
    table: Arc<ObjectTable>,
    candidates: BTreeSet<String>,
    pending: Option<Pending>,
}

impl BisectionAgent {
    pub fn new(table: Arc<ObjectTable>) -> Self {
        let candidates = table.objects().map(str::to_string).collect();
        Self { table, candidates, pending: None }
    }

    pub fn candidates(&self) -> usize {
        self.candidates.len()
    }

    fn absorb(&mut self, observation: &str) {
        let Some(p) = self.pending.take() else { return };
        let yes = observation.starts_with("Yes");
        let table = &self.table;
        self.candidates.retain(|c| {
            let holds = match &p {
                Pending::Attribute(a) => table.has(c, a),
                Pending::OneOf(set) => set.contains(c),
            };
            holds == yes
        });
    }
}

impl Agent for BisectionAgent {
    fn act(&mut self, view: &AgentView<'_>) -> Result<ComposedAction> {
        self.absorb(&view.state.observation);
        let n = self.candidates.len();
        match n {
            0 => return Err(Error::Agent("no candidate is consistent with the answers".into())),
            1 => {
                let only = self.candidates.iter().next().expect("one candidate");
                return Ok(guess("Only one object fits every answer.", only));
            }
            _ => {}
        }
        // most balanced attribute split; ties go to the first attribute
        let mut best: Option<(usize, &str)> = None;
        for (a, _) in self.table.attributes() {
            let yes = self.candidates.iter().filter(|c| self.table.has(c, a)).count();
            let balance = yes.min(n - yes);
            if best.is_none_or(|(b, _)| balance > b) {
                best = Some((balance, a));
            }
        }
        match best {
            Some((balance, a)) if 3 * balance >= n => {
                let question = self.table.question(a).expect("attribute has a question").to_string();
                self.pending = Some(Pending::Attribute(a.to_string()));
                Ok(ask("Split the remaining candidates roughly in half.", question))
            }
            _ => {
                let half: BTreeSet<String> = self.candidates.iter().take(n / 2).cloned().collect();
                let list: Vec<&str> = half.iter().map(String::as_str).collect();
                let question = format!("Is it one of: {}?", list.join(", "));
                self.pending = Some(Pending::OneOf(half));
                Ok(ask("No attribute splits the candidates well, so list half of them.", question))
            }
        }
    }
}

/// Asks uniformly random attribute questions, ignores the answers, and makes
/// one uniformly random guess on its last turn.
pub struct RandomGuesser {
    table: Arc<ObjectTable>,
    max_turns: u32,
    rng: ChaCha8Rng,
}

impl RandomGuesser {
    pub fn new(table: Arc<ObjectTable>, max_turns: u32, seed: u64) -> Self {
        Self { table, max_turns, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Agent for RandomGuesser {
    fn act(&mut self, view: &AgentView<'_>) -> Result<ComposedAction> {
        if view.state.turn + 1 >= self.max_turns {
            let objects: Vec<&str> = self.table.objects().collect();
            let pick = objects.choose(&mut self.rng).expect("table is not empty");
            return Ok(guess("Pick any object.", pick));
        }
        let questions: Vec<&str> = self.table.attributes().map(|(_, q)| q).collect();
        let q = questions.choose(&mut self.rng).expect("table has attributes");
        Ok(ask("Ask anything.", q.to_string()))
    }
}
