//! Prompt templates, stored as text files under `prompts/v1/`.

pub const TEMPLATE_VERSION: &str = "v1";

const CRITIC_EVAL: &str = include_str!("../prompts/v1/critic_eval.txt");
const CRITIC_MATH: &str = include_str!("../prompts/v1/critic_math.txt");
const BOOTSTRAP: &str = include_str!("../prompts/v1/bootstrap.txt");
const TARGET_EVAL: &str = include_str!("../prompts/v1/target_eval.txt");
const CORRECT_CRITIQUE_THINK: &str = include_str!("../prompts/v1/correct_critique_think.txt");
const REFINE: &str = include_str!("../prompts/v1/refine.txt");
const CORRECT_REFINE_THINK: &str = include_str!("../prompts/v1/correct_refine_think.txt");
const REACT_SYSTEM: &str = include_str!("../prompts/v1/react_system.txt");
const JUDGE: &str = include_str!("../prompts/v1/judge.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    CriticEval,
    CriticMath,
    Bootstrap,
    TargetEval,
    CorrectCritiqueThink,
    Refine,
    CorrectRefineThink,
    ReactSystem,
    Judge,
}

impl Template {
    pub const ALL: [Template; 9] = [
        Self::CriticEval,
        Self::CriticMath,
        Self::Bootstrap,
        Self::TargetEval,
        Self::CorrectCritiqueThink,
        Self::Refine,
        Self::CorrectRefineThink,
        Self::ReactSystem,
        Self::Judge,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            Self::CriticEval => "critic_eval.txt",
            Self::CriticMath => "critic_math.txt",
            Self::Bootstrap => "bootstrap.txt",
            Self::TargetEval => "target_eval.txt",
            Self::CorrectCritiqueThink => "correct_critique_think.txt",
            Self::Refine => "refine.txt",
            Self::CorrectRefineThink => "correct_refine_think.txt",
            Self::ReactSystem => "react_system.txt",
            Self::Judge => "judge.txt",
        }
    }

    /// Template text without the file's final newline.
    pub fn text(self) -> &'static str {
        let raw = match self {
            Self::CriticEval => CRITIC_EVAL,
            Self::CriticMath => CRITIC_MATH,
            Self::Bootstrap => BOOTSTRAP,
            Self::TargetEval => TARGET_EVAL,
            Self::CorrectCritiqueThink => CORRECT_CRITIQUE_THINK,
            Self::Refine => REFINE,
            Self::CorrectRefineThink => CORRECT_REFINE_THINK,
            Self::ReactSystem => REACT_SYSTEM,
            Self::Judge => JUDGE,
        };
        raw.strip_suffix('\n').unwrap_or(raw)
    }
}

/// Bootstrap prompt for an observed next observation.
pub fn render_bootstrap(next_observation: &str) -> String {
    Template::Bootstrap.text().replacen("{next observation}", next_observation, 1)
}

/// System prompt holding the task and the action list.
pub fn render_react_system(task: &str, actions: &str) -> String {
    // substitute in one pass so placeholder-like text in the task survives
    let text = Template::ReactSystem.text();
    let (head, rest) = text.split_once("{task}").expect("react template has {task}");
    let (mid, tail) = rest.split_once("{actions}").expect("react template has {actions}");
    format!("{head}{task}{mid}{actions}{tail}")
}

pub fn render_judge(guess: &str, hidden: &str) -> String {
    let text = Template::Judge.text();
    let (head, rest) = text.split_once("{guess}").expect("judge template has {guess}");
    let (mid, tail) = rest.split_once("{hidden}").expect("judge template has {hidden}");
    format!("{head}{guess}{mid}{hidden}{tail}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bootstrap_substitutes_once() {
        let p = render_bootstrap("order #W1 cancelled");
        assert!(p.contains("customer):\norder #W1 cancelled\nFrom this state"));
        assert!(!p.contains("{next observation}"));
    }

    #[test]
    fn react_placeholders_not_reexpanded() {
        let p = render_react_system("say {actions}", "- respond(content: string)");
        assert!(p.starts_with("say {actions}\n"));
        assert!(p.ends_with("- respond(content: string)"));
    }

    #[test]
    fn texts_have_no_trailing_newline() {
        for t in Template::ALL {
            assert!(!t.text().ends_with('\n'), "{}", t.file_name());
        }
    }
}
