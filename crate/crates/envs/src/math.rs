//! Single-step answer checking: the reply must put its answer in `\boxed{}`.

use nlac_gateway::{ActionSchema, ActionSpec, ParamKind, ParamSpec};

pub fn action_schema() -> ActionSchema {
    ActionSchema::new(vec![ActionSpec {
        name: "answer".into(),
        description: "Submit a worked solution ending in \\boxed{answer}.".into(),
        params: vec![ParamSpec { name: "solution".into(), kind: ParamKind::String, required: true }],
    }])
}

/// Contents of the last `\boxed{…}`, with nested braces balanced.
pub fn last_boxed(text: &str) -> Option<&str> {
    let start = text.rfind("\\boxed{")? + "\\boxed{".len();
    let mut depth = 1usize;
    for (i, c) in text[start..].char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i]);
                }
            }
            _ => {}
        }
    }
    None
}

fn canonical(answer: &str) -> String {
    let s: String = answer.chars().filter(|c| !c.is_whitespace()).collect();
    let s = s.trim_matches('$').trim_end_matches('.');
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => format!("{x}"),
        _ => s.to_string(),
    }
}

/// 1 iff the last boxed answer equals `gold` up to whitespace and number formatting.
pub fn score(solution: &str, gold: &str) -> f64 {
    match last_boxed(solution) {
        Some(ans) if canonical(ans) == canonical(gold) => 1.0,
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boxed_extraction() {
        assert_eq!(last_boxed(r"so \boxed{1} then \boxed{\frac{1}{2}}"), Some(r"\frac{1}{2}"));
        assert_eq!(last_boxed(r"\boxed{unclosed"), None);
        assert_eq!(last_boxed("42"), None);
    }

    #[test]
    fn scoring() {
        assert_eq!(score(r"6 \times 7 = \boxed{42}", "42"), 1.0);
        assert_eq!(score("42", "42"), 0.0);
        assert_eq!(score(r"\boxed{ 42.0 }", "42"), 1.0);
        assert_eq!(score(r"\boxed{41}", "42"), 0.0);
        assert_eq!(score(r"\boxed{\frac{1}{2}}", r"\frac{1}{2}"), 1.0);
    }
}
