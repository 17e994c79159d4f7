use serde::{Deserialize, Serialize};

use crate::config::DEFAULT_MAX_PROMPT_TOKENS;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

/// Per-message overhead in the token estimate.
const MESSAGE_OVERHEAD_TOKENS: usize = 4;

/// Rough token count: four characters per token plus a fixed cost per message.
pub fn estimate_tokens(messages: &[Message]) -> usize {
    messages
        .iter()
        .map(|m| m.content.chars().count().div_ceil(4) + MESSAGE_OVERHEAD_TOKENS)
        .sum()
}

/// Roles must be an optional leading system message, then user and
/// assistant turns alternating from a user turn.
pub fn check_roles(messages: &[Message]) -> Result<()> {
    let body = match messages.first() {
        Some(m) if m.role == Role::System => &messages[1..],
        _ => messages,
    };
    for (i, m) in body.iter().enumerate() {
        let want = if i % 2 == 0 { Role::User } else { Role::Assistant };
        if m.role != want {
            return Err(Error::InvalidContext(format!(
                "message {} has role {:?}, expected {:?}",
                i + messages.len() - body.len(),
                m.role,
                want
            )));
        }
    }
    Ok(())
}

/// The interaction history `(q, a_1, o_1, …, o_t)` as chat messages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatContext {
    messages: Vec<Message>,
    max_prompt_tokens: usize,
}

impl ChatContext {
    /// A context opened by the task prompt and the first observation.
    pub fn new(system: impl Into<String>, first_observation: impl Into<String>) -> Self {
        Self {
            messages: vec![Message::system(system), Message::user(first_observation)],
            max_prompt_tokens: DEFAULT_MAX_PROMPT_TOKENS,
        }
    }

    pub fn from_messages(messages: Vec<Message>, max_prompt_tokens: usize) -> Result<Self> {
        check_roles(&messages)?;
        if messages.last().is_none_or(|m| m.role != Role::User) {
            return Err(Error::InvalidContext("context must end with an observation".into()));
        }
        let ctx = Self { messages, max_prompt_tokens };
        ctx.check_budget()?;
        Ok(ctx)
    }

    pub fn with_budget(mut self, max_prompt_tokens: usize) -> Self {
        self.max_prompt_tokens = max_prompt_tokens;
        self
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn max_prompt_tokens(&self) -> usize {
        self.max_prompt_tokens
    }

    pub fn estimated_tokens(&self) -> usize {
        estimate_tokens(&self.messages)
    }

    pub fn check_budget(&self) -> Result<()> {
        let tokens = self.estimated_tokens();
        if tokens > self.max_prompt_tokens {
            return Err(Error::ContextTooLong { tokens, budget: self.max_prompt_tokens });
        }
        Ok(())
    }

    /// Appends the agent's action text and the observation that followed.
    pub fn push_turn(&mut self, action_text: impl Into<String>, observation: impl Into<String>) {
        self.messages.push(Message::assistant(action_text));
        self.messages.push(Message::user(observation));
    }

    /// Number of actions taken so far.
    pub fn turns(&self) -> usize {
        self.messages.iter().filter(|m| m.role == Role::Assistant).count()
    }
}
