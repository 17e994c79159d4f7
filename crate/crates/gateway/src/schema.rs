use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ParseError;
use crate::parse::ComposedAction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    String,
    Integer,
    Number,
    Boolean,
    Array,
    Object,
}

impl ParamKind {
    fn accepts(self, v: &Value) -> bool {
        match self {
            Self::String => v.is_string(),
            Self::Integer => v.is_i64() || v.is_u64(),
            Self::Number => v.is_number(),
            Self::Boolean => v.is_boolean(),
            Self::Array => v.is_array(),
            Self::Object => v.is_object(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::String => "string",
            Self::Integer => "integer",
            Self::Number => "number",
            Self::Boolean => "boolean",
            Self::Array => "array",
            Self::Object => "object",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default = "yes")]
    pub required: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub params: Vec<ParamSpec>,
}

/// The environment actions a policy may emit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSchema {
    pub actions: Vec<ActionSpec>,
}

impl ActionSchema {
    pub fn new(actions: Vec<ActionSpec>) -> Self {
        Self { actions }
    }

    pub fn get(&self, name: &str) -> Option<&ActionSpec> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn validate(&self, action: &ComposedAction) -> Result<(), ParseError> {
        let name = action.name();
        let spec = self.get(name).ok_or_else(|| ParseError::UnknownAction(name.to_string()))?;
        let violation = |reason: String| ParseError::ArgumentSchema { action: name.to_string(), reason };
        for p in &spec.params {
            match action.arguments().get(&p.name) {
                None if p.required => return Err(violation(format!("missing argument {:?}", p.name))),
                None => {}
                Some(v) if !p.kind.accepts(v) => {
                    return Err(violation(format!("argument {:?} must be {}, got {v}", p.name, p.kind.name())))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = action.arguments().keys().find(|k| spec.params.iter().all(|p| &p.name != *k)) {
            return Err(violation(format!("unexpected argument {extra:?}")));
        }
        Ok(())
    }

    /// One line per action, for the system prompt.
    pub fn describe(&self) -> String {
        self.actions
            .iter()
            .map(|a| {
                let params: Vec<String> = a
                    .params
                    .iter()
                    .map(|p| format!("{}{}: {}", p.name, if p.required { "" } else { "?" }, p.kind.name()))
                    .collect();
                format!("- {}({}): {}", a.name, params.join(", "), a.description)
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}
