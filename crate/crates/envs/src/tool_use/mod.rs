//! A miniature customer-service world: a retail database, read and write
//! tools, a scripted customer, and machine-checked guideline rules.

mod db;

use std::path::Path;

use nlac_gateway::{ActionSchema, ActionSpec, EnvAction, ParamKind, ParamSpec};
use serde::{Deserialize, Serialize};

pub use db::{Database, Item, Order, OrderStatus, User, CANCEL_REASONS, MODIFYING_TOOLS};

use crate::error::{Error, Result};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;
pub const STOP_TOKEN: &str = "###STOP###";

pub const POLICY: &str = include_str!("../../data/tool_use/policy.txt");

const BUNDLED: [(&str, &str); 3] = [
    ("cancel_pending", include_str!("../../data/tool_use/cancel_pending.json")),
    ("modify_items", include_str!("../../data/tool_use/modify_items.json")),
    ("cancel_delivered", include_str!("../../data/tool_use/cancel_delivered.json")),
];

fn default_max_turns() -> u32 {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub id: String,
    pub first_message: String,
    /// Customer replies to successive `respond` calls.
    pub user_script: Vec<String>,
    /// Actions whose effect defines the ground-truth database.
    pub gold_actions: Vec<EnvAction>,
    #[serde(default = "default_max_turns")]
    pub max_turns: u32,
    pub db: Database,
}

impl Scenario {
    pub fn bundled_ids() -> impl Iterator<Item = &'static str> {
        BUNDLED.iter().map(|(id, _)| *id)
    }

    pub fn bundled(id: &str) -> Result<Self> {
        let (_, text) = BUNDLED
            .iter()
            .find(|(i, _)| *i == id)
            .ok_or_else(|| Error::UnknownSpec(format!("no bundled tool-use scenario {id:?}")))?;
        Self::parse(text)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        if s.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::InvalidData(format!("unsupported scenario schema_version {}", s.schema_version)));
        }
        if s.max_turns == 0 {
            return Err(Error::InvalidData("max_turns must be positive".into()));
        }
        Ok(s)
    }

    /// The database after applying the gold actions.
    pub fn ground_truth(&self) -> Result<Database> {
        let mut db = self.db.clone();
        for a in &self.gold_actions {
            if a.name == "respond" {
                continue;
            }
            db.execute(&a.name, &a.arguments)
                .map_err(|e| Error::InvalidData(format!("gold action {} fails: {e}", a.name)))?;
        }
        Ok(db)
    }
}

fn string(name: &str) -> ParamSpec {
    ParamSpec { name: name.into(), kind: ParamKind::String, required: true }
}

fn list(name: &str) -> ParamSpec {
    ParamSpec { name: name.into(), kind: ParamKind::Array, required: true }
}

pub fn action_schema() -> ActionSchema {
    let spec = |name: &str, description: &str, params: Vec<ParamSpec>| ActionSpec {
        name: name.into(),
        description: description.into(),
        params,
    };
    ActionSchema::new(vec![
        spec(
            "find_user_id_by_name_zip",
            "Find a user id from first name, last name and zip code.",
            vec![string("first_name"), string("last_name"), string("zip")],
        ),
        spec("get_user_details", "Get a user's profile and order ids.", vec![string("user_id")]),
        spec("get_order_details", "Get an order's status and items.", vec![string("order_id")]),
        spec(
            "cancel_pending_order",
            "Cancel a pending order. The reason is \"no longer needed\" or \"ordered by mistake\".",
            vec![string("order_id"), string("reason")],
        ),
        spec(
            "modify_pending_order_items",
            "Swap items of a pending order for other options of the same product.",
            vec![string("order_id"), list("item_ids"), list("new_item_ids")],
        ),
        spec("respond", "Send a message to the customer.", vec![string("content")]),
    ])
}

/// Result of one world step.
#[derive(Debug, Clone, PartialEq)]
pub struct ToolReply {
    pub observation: String,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolUseWorld {
    scenario: Scenario,
    db: Database,
    ground_truth: Database,
    authenticated: Option<String>,
    modifications: u32,
    violations: Vec<String>,
    script_pos: usize,
}

impl ToolUseWorld {
    pub fn new(scenario: Scenario) -> Result<Self> {
        let ground_truth = scenario.ground_truth()?;
        Ok(Self {
            db: scenario.db.clone(),
            scenario,
            ground_truth,
            authenticated: None,
            modifications: 0,
            violations: Vec::new(),
            script_pos: 0,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn database(&self) -> &Database {
        &self.db
    }

    pub fn ground_truth(&self) -> &Database {
        &self.ground_truth
    }

    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    pub fn violated(&self) -> bool {
        !self.violations.is_empty()
    }

    /// 1 iff the database deep-equals the ground truth and no rule was broken.
    pub fn reward(&self) -> f64 {
        if self.db == self.ground_truth && !self.violated() {
            1.0
        } else {
            0.0
        }
    }

    /// Guideline checks for a modifying call; returns the violations it commits.
    fn check_rules(&self, action: &EnvAction) -> Vec<String> {
        let mut out = Vec::new();
        let order_id = action.arguments.get("order_id").and_then(|v| v.as_str()).unwrap_or_default();
        match (&self.authenticated, self.db.owner(order_id)) {
            (None, _) => out.push(format!("{} before identity verification", action.name)),
            (Some(user), Some(owner)) if user != owner => {
                out.push(format!("{} on order {order_id} owned by another user", action.name))
            }
            _ => {}
        }
        if let Some(o) = self.db.orders.get(order_id) {
            if o.status != OrderStatus::Pending {
                out.push(format!("{} on non-pending order {order_id}", action.name));
            }
        }
        if self.modifications >= 1 {
            out.push(format!("{} after a modification was already made", action.name));
        }
        out
    }

    pub fn step(&mut self, action: &EnvAction) -> ToolReply {
        let reply = |observation: String| ToolReply { observation, done: false };
        if let Err(e) = action_schema().validate(&nlac_gateway::ComposedAction {
            thought: String::new(),
            env_action: action.clone(),
        }) {
            return reply(format!("Error: {e}"));
        }
        if action.name == "respond" {
            let utterance = match self.scenario.user_script.get(self.script_pos) {
                Some(u) => u.clone(),
                None => STOP_TOKEN.to_string(),
            };
            self.script_pos += 1;
            let done = utterance.contains(STOP_TOKEN);
            return ToolReply { observation: utterance, done };
        }
        let modifying = MODIFYING_TOOLS.contains(&action.name.as_str());
        if modifying {
            let broken = self.check_rules(action);
            self.violations.extend(broken);
        }
        match self.db.execute(&action.name, &action.arguments) {
            Ok(out) => {
                if action.name == "find_user_id_by_name_zip" {
                    self.authenticated = Some(out.clone());
                }
                if modifying {
                    self.modifications += 1;
                }
                reply(out)
            }
            Err(e) => reply(format!("Error: {e}")),
        }
    }
}
