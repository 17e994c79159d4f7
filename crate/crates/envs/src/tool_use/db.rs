use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderStatus {
    Pending,
    Processed,
    Delivered,
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct User {
    pub first_name: String,
    pub last_name: String,
    pub zip: String,
    pub email: String,
    pub orders: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Order {
    pub user_id: String,
    pub status: OrderStatus,
    pub items: Vec<String>,
    pub payment_method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cancel_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Item {
    pub product: String,
    pub options: BTreeMap<String, String>,
    pub price: f64,
    pub available: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Database {
    pub users: BTreeMap<String, User>,
    pub orders: BTreeMap<String, Order>,
    pub items: BTreeMap<String, Item>,
}

pub const CANCEL_REASONS: [&str; 2] = ["no longer needed", "ordered by mistake"];

/// Tools that change the database.
pub const MODIFYING_TOOLS: [&str; 2] = ["cancel_pending_order", "modify_pending_order_items"];

fn string_arg<'a>(args: &'a Map<String, Value>, key: &str) -> Result<&'a str, String> {
    args.get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| format!("argument {key:?} must be a string"))
}

fn string_list(args: &Map<String, Value>, key: &str) -> Result<Vec<String>, String> {
    let items = args
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| format!("argument {key:?} must be a list of strings"))?;
    items
        .iter()
        .map(|v| v.as_str().map(str::to_string).ok_or_else(|| format!("argument {key:?} must be a list of strings")))
        .collect()
}

impl Database {
    /// Owner of an order, if the order exists.
    pub fn owner(&self, order_id: &str) -> Option<&str> {
        self.orders.get(order_id).map(|o| o.user_id.as_str())
    }

    fn order_json(&self, order_id: &str) -> String {
        let mut v = serde_json::to_value(&self.orders[order_id]).expect("order serializes");
        v["order_id"] = Value::String(order_id.to_string());
        let items: Vec<Value> = self.orders[order_id]
            .items
            .iter()
            .map(|id| {
                let mut item = serde_json::to_value(&self.items[id]).expect("item serializes");
                item["item_id"] = Value::String(id.clone());
                item
            })
            .collect();
        v["items"] = Value::Array(items);
        v.to_string()
    }

    fn pending(&self, order_id: &str) -> Result<(), String> {
        match self.orders.get(order_id) {
            None => Err(format!("order {order_id} not found")),
            Some(o) if o.status != OrderStatus::Pending => Err(format!("order {order_id} is not pending")),
            Some(_) => Ok(()),
        }
    }

    /// Runs a tool. `Err` is a tool error shown to the agent; the database
    /// is unchanged in that case.
    pub fn execute(&mut self, tool: &str, args: &Map<String, Value>) -> Result<String, String> {
        match tool {
            "find_user_id_by_name_zip" => {
                let first = string_arg(args, "first_name")?.to_lowercase();
                let last = string_arg(args, "last_name")?.to_lowercase();
                let zip = string_arg(args, "zip")?;
                self.users
                    .iter()
                    .find(|(_, u)| u.first_name.to_lowercase() == first && u.last_name.to_lowercase() == last && u.zip == zip)
                    .map(|(id, _)| id.clone())
                    .ok_or_else(|| "user not found".to_string())
            }
            "get_user_details" => {
                let id = string_arg(args, "user_id")?;
                let user = self.users.get(id).ok_or_else(|| format!("user {id} not found"))?;
                Ok(serde_json::to_string(user).expect("user serializes"))
            }
            "get_order_details" => {
                let id = string_arg(args, "order_id")?;
                if !self.orders.contains_key(id) {
                    return Err(format!("order {id} not found"));
                }
                Ok(self.order_json(id))
            }
            "cancel_pending_order" => {
                let id = string_arg(args, "order_id")?;
                let reason = string_arg(args, "reason")?;
                self.pending(id)?;
                if !CANCEL_REASONS.contains(&reason) {
                    return Err(format!("reason must be one of {CANCEL_REASONS:?}"));
                }
                let order = self.orders.get_mut(id).expect("checked pending");
                order.status = OrderStatus::Cancelled;
                order.cancel_reason = Some(reason.to_string());
                Ok(self.order_json(id))
            }
            "modify_pending_order_items" => {
                let id = string_arg(args, "order_id")?;
                let old = string_list(args, "item_ids")?;
                let new = string_list(args, "new_item_ids")?;
                self.pending(id)?;
                if old.is_empty() || old.len() != new.len() {
                    return Err("item_ids and new_item_ids must be non-empty and of equal length".into());
                }
                let mut items = self.orders[id].items.clone();
                for (o, n) in old.iter().zip(&new) {
                    let pos = items.iter().position(|x| x == o).ok_or_else(|| format!("item {o} is not in order {id}"))?;
                    let replacement = self.items.get(n).ok_or_else(|| format!("item {n} not found"))?;
                    if replacement.product != self.items[o].product {
                        return Err(format!("item {n} is a different product from {o}"));
                    }
                    if !replacement.available || n == o {
                        return Err(format!("item {n} is not available as a replacement"));
                    }
                    items[pos] = n.clone();
                }
                self.orders.get_mut(id).expect("checked pending").items = items;
                Ok(self.order_json(id))
            }
            other => Err(format!("unknown tool {other:?}")),
        }
    }
}
