//! Strict parsers for every reply format, and the canonical renderings
//! they invert.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::ParseError;

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: [&str; 2] = ["</think>", "<\\think>"];
const CORRECTED_OPEN: &str = "<corrected_think>";
const CORRECTED_CLOSE: [&str; 2] = ["</corrected_think>", "<\\corrected_think>"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvAction {
    pub name: String,
    pub arguments: Map<String, Value>,
}

/// A ReAct step: free-text thought plus an environment action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComposedAction {
    pub thought: String,
    pub env_action: EnvAction,
}

impl ComposedAction {
    pub fn new(thought: impl Into<String>, name: impl Into<String>, arguments: Value) -> Self {
        let arguments = match arguments {
            Value::Object(m) => m,
            Value::Null => Map::new(),
            other => panic!("action arguments must be an object, got {other}"),
        };
        Self {
            thought: thought.into(),
            env_action: EnvAction { name: name.into(), arguments },
        }
    }

    pub fn name(&self) -> &str {
        &self.env_action.name
    }

    pub fn arguments(&self) -> &Map<String, Value> {
        &self.env_action.arguments
    }

    pub fn render(&self) -> String {
        let json = serde_json::to_string(&self.env_action).expect("action serializes");
        format!("Thought:\n{}\nAction:\n{json}", self.thought)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimality {
    Yes,
    No,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedEvaluation {
    pub future: String,
    pub optimality: Optimality,
    pub explanation: Option<String>,
    pub corrected_thought: Option<String>,
}

impl ParsedEvaluation {
    pub fn is_optimal(&self) -> bool {
        self.optimality == Optimality::Yes
    }

    /// Canonical evaluation text without thinking.
    pub fn render(&self) -> String {
        let verdict = match (&self.optimality, &self.explanation) {
            (Optimality::Yes, _) => "Yes".to_string(),
            (Optimality::No, Some(e)) => format!("No. {e}"),
            (Optimality::No, None) => "No".to_string(),
        };
        format!("Future:\n{}\nOptimality:\n{verdict}", self.future)
    }

    /// Supervision text: corrected thinking (if any) followed by the evaluation.
    pub fn to_target_text(&self) -> String {
        render_with_thinking(self.corrected_thought.as_deref(), &self.render())
    }

    /// Inverse of [`to_target_text`](Self::to_target_text).
    pub fn parse_target(text: &str) -> Result<Self, ParseError> {
        let (thinking, body) = split_think(text)?;
        let mut eval = parse_evaluation(body)?;
        eval.corrected_thought = thinking;
        Ok(eval)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correctness {
    pub correct: bool,
    pub explanation: Option<String>,
}

/// A corrected chain of thought, plus any text the model wrote after it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectedThought {
    pub text: String,
    pub trailing: Option<String>,
}

pub fn render_with_thinking(thinking: Option<&str>, body: &str) -> String {
    match thinking {
        Some(t) => format!("{THINK_OPEN}\n{t}\n{}\n\n{body}", THINK_CLOSE[0]),
        None => body.to_string(),
    }
}

fn find_any(haystack: &str, needles: &[&str]) -> Option<(usize, usize)> {
    needles
        .iter()
        .filter_map(|n| haystack.find(n).map(|i| (i, n.len())))
        .min()
}

fn contains_think_tag(text: &str) -> bool {
    text.contains(THINK_OPEN) || THINK_CLOSE.iter().any(|c| text.contains(c))
}

/// Splits a leading thinking block off a reply. Servers that drop the
/// opening tag are handled: text before a lone closing tag is thinking.
pub fn split_think(content: &str) -> Result<(Option<String>, &str), ParseError> {
    let trimmed = content.trim_start();
    let (inner, rest) = if let Some(after) = trimmed.strip_prefix(THINK_OPEN) {
        let (i, len) = find_any(after, &THINK_CLOSE).ok_or(ParseError::UnterminatedThink)?;
        (&after[..i], &after[i + len..])
    } else if let Some((i, len)) = find_any(trimmed, &THINK_CLOSE) {
        (&trimmed[..i], &trimmed[i + len..])
    } else {
        return Ok((None, content.trim()));
    };
    if contains_think_tag(inner) || contains_think_tag(rest) {
        return Err(ParseError::NestedThink);
    }
    let inner = inner.trim();
    Ok(((!inner.is_empty()).then(|| inner.to_string()), rest.trim()))
}

/// Extracts the single `<corrected_think>` block of a correction reply.
pub fn extract_corrected_think(content: &str) -> Result<CorrectedThought, ParseError> {
    let (_, body) = split_think(content)?;
    let opens = body.matches(CORRECTED_OPEN).count();
    let closes: usize = CORRECTED_CLOSE.iter().map(|c| body.matches(c).count()).sum();
    if opens != 1 || closes > 1 {
        return Err(ParseError::CorrectedThinkCount(opens.max(closes)));
    }
    let start = body.find(CORRECTED_OPEN).expect("counted above");
    if !body[..start].trim().is_empty() {
        return Err(ParseError::Preamble("<corrected_think>"));
    }
    let after = &body[start + CORRECTED_OPEN.len()..];
    let (end, len) = find_any(after, &CORRECTED_CLOSE).ok_or(ParseError::UnterminatedCorrectedThink)?;
    let inner = &after[..end];
    if contains_think_tag(inner) {
        return Err(ParseError::NestedThink);
    }
    let text = inner.trim();
    if text.is_empty() {
        return Err(ParseError::EmptySection("<corrected_think>"));
    }
    let trailing = after[end + len..].trim();
    Ok(CorrectedThought {
        text: text.to_string(),
        trailing: (!trailing.is_empty()).then(|| trailing.to_string()),
    })
}

fn header_positions(body: &str, header: &str) -> Vec<usize> {
    body.match_indices(header)
        .map(|(i, _)| i)
        .filter(|&i| i == 0 || body.as_bytes()[i - 1] == b'\n')
        .collect()
}

/// Splits `body` into the given line-start headers, in order, the first at
/// the very start. Returns each section's trimmed content.
fn sections<'a>(body: &'a str, headers: &[&'static str]) -> Result<Vec<&'a str>, ParseError> {
    let body = body.trim();
    let mut starts = Vec::with_capacity(headers.len());
    for &h in headers {
        match header_positions(body, h).as_slice() {
            [] => return Err(ParseError::MissingSection(h)),
            [p] => starts.push(*p),
            _ => return Err(ParseError::DuplicateSection(h)),
        }
    }
    if starts[0] != 0 {
        return Err(ParseError::Preamble(headers[0]));
    }
    if let Some(i) = starts.windows(2).position(|w| w[1] <= w[0]) {
        return Err(ParseError::MissingSection(headers[i + 1]));
    }
    let mut out = Vec::with_capacity(headers.len());
    for (i, (&h, &s)) in headers.iter().zip(&starts).enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(body.len());
        let content = body[s + h.len()..end].trim();
        if content.is_empty() {
            return Err(ParseError::EmptySection(h));
        }
        out.push(content);
    }
    Ok(out)
}

fn starts_word<'a>(text: &'a str, word: &str) -> Option<&'a str> {
    let rest = text.strip_prefix(word)?;
    match rest.chars().next() {
        Some(c) if c.is_alphanumeric() => None,
        _ => Some(rest),
    }
}

/// `Yes` (optionally with a period) or `No` followed by an explanation.
fn parse_verdict(text: &str) -> Result<(bool, Option<String>), ParseError> {
    if let Some(rest) = starts_word(text, "Yes") {
        let rest = rest.trim_start_matches(['.', '!']).trim();
        return if rest.is_empty() { Ok((true, None)) } else { Err(ParseError::UnexpectedExplanation) };
    }
    if let Some(rest) = starts_word(text, "No") {
        let rest = rest.trim_start_matches(|c: char| ".,:;-–—".contains(c) || c.is_whitespace());
        if rest.is_empty() {
            return Err(ParseError::MissingExplanation);
        }
        if rest.contains("\n\n") {
            let tail = rest.split_once("\n\n").map(|x| x.1).unwrap_or_default();
            return Err(ParseError::TrailingText(tail.trim().to_string()));
        }
        return Ok((false, Some(rest.to_string())));
    }
    Err(ParseError::InvalidVerdict(text.lines().next().unwrap_or_default().to_string()))
}

/// `Future:` … `Optimality:` … with no thinking block.
pub fn parse_evaluation(body: &str) -> Result<ParsedEvaluation, ParseError> {
    let parts = sections(body, &["Future:", "Optimality:"])?;
    let (optimal, explanation) = parse_verdict(parts[1])?;
    Ok(ParsedEvaluation {
        future: parts[0].to_string(),
        optimality: if optimal { Optimality::Yes } else { Optimality::No },
        explanation,
        corrected_thought: None,
    })
}

pub fn parse_correctness(body: &str) -> Result<Correctness, ParseError> {
    let parts = sections(body, &["Correctness:"])?;
    let (correct, explanation) = parse_verdict(parts[0])?;
    Ok(Correctness { correct, explanation })
}

/// A one-word judgement.
pub fn parse_judgement(body: &str) -> Result<bool, ParseError> {
    match body.trim().trim_end_matches('.') {
        "Yes" | "yes" => Ok(true),
        "No" | "no" => Ok(false),
        other => Err(ParseError::InvalidJudgement(other.to_string())),
    }
}

/// Best-effort action name from JSON that failed to parse.
fn sniff_name(text: &str) -> Option<String> {
    let i = text.find("\"name\"")?;
    let rest = text[i + 6..].trim_start().strip_prefix(':')?.trim_start();
    let mut it = serde_json::Deserializer::from_str(rest).into_iter::<String>();
    it.next()?.ok()
}

fn parse_env_action(text: &str) -> Result<EnvAction, ParseError> {
    let mut stream = serde_json::Deserializer::from_str(text).into_iter::<Value>();
    let value = match stream.next() {
        Some(Ok(v)) => v,
        Some(Err(e)) => {
            return Err(match sniff_name(text) {
                Some(action) => ParseError::MalformedArguments { action, reason: e.to_string() },
                None => ParseError::MalformedAction(e.to_string()),
            })
        }
        None => return Err(ParseError::EmptySection("Action:")),
    };
    let trailing = text[stream.byte_offset()..].trim();
    if !trailing.is_empty() {
        return Err(ParseError::TrailingText(trailing.to_string()));
    }
    let Value::Object(mut obj) = value else {
        return Err(ParseError::MalformedAction(format!("expected an object, got {value}")));
    };
    let name = match obj.remove("name") {
        Some(Value::String(n)) if !n.trim().is_empty() => n,
        Some(other) => return Err(ParseError::MalformedAction(format!("name must be a string, got {other}"))),
        None => return Err(ParseError::MalformedAction("missing \"name\"".into())),
    };
    let arguments = match obj.remove("arguments") {
        Some(Value::Object(m)) => m,
        Some(other) => {
            return Err(ParseError::MalformedArguments {
                action: name,
                reason: format!("expected an object, got {other}"),
            })
        }
        None => {
            return Err(ParseError::MalformedArguments { action: name, reason: "missing \"arguments\"".into() })
        }
    };
    if let Some(extra) = obj.keys().next() {
        return Err(ParseError::MalformedAction(format!("unexpected key {extra:?}")));
    }
    Ok(EnvAction { name, arguments })
}

/// `Thought:` … `Action:` {json} with no thinking block.
pub fn parse_composed_action(body: &str) -> Result<ComposedAction, ParseError> {
    let parts = sections(body, &["Thought:", "Action:"])?;
    Ok(ComposedAction {
        thought: parts[0].to_string(),
        env_action: parse_env_action(parts[1])?,
    })
}

/// Parses a supervision text of the form produced by [`render_with_thinking`].
pub fn parse_action_target(text: &str) -> Result<(Option<String>, ComposedAction), ParseError> {
    let (thinking, body) = split_think(text)?;
    Ok((thinking, parse_composed_action(body)?))
}
