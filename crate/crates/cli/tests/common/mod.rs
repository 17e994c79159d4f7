#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nlac_envs::ObjectTable;
use nlac_gateway::templates::Template;
use nlac_gateway::{ChatRequest, ChatResponse, Role, Transport};

pub const BOOTSTRAP_HEAD: &str = "The response to your latest action is";

/// Objects the stub policy guesses, one per turn, in table order.
pub fn guess_order() -> Vec<String> {
    ObjectTable::bundled().objects().map(str::to_string).collect()
}

/// Deterministic endpoint stand-in. The policy guesses the `t`-th table
/// object at turn `t`; the other prompts get fixed well-formed replies.
pub struct Stub {
    guesses: Vec<String>,
}

impl Default for Stub {
    fn default() -> Self {
        Self { guesses: guess_order() }
    }
}

impl Transport for Stub {
    fn complete(&self, req: &ChatRequest) -> nlac_gateway::Result<ChatResponse> {
        let last = req.messages.last().map(|m| m.content.as_str()).unwrap_or_default();
        let text = if last == Template::CriticEval.text() {
            "Future:\nThe guess is wrong and I keep guessing down the list.\nOptimality:\nNo. A category question would rule out more objects.".to_string()
        } else if last.starts_with(BOOTSTRAP_HEAD) {
            "I keep guessing one object per turn and probably run out of turns.".to_string()
        } else if last == Template::TargetEval.text() {
            "Future:\nThe oracle said no and I keep guessing.\nOptimality:\nNo. Asking whether it is an animal removes more candidates.".to_string()
        } else if last == Template::CorrectCritiqueThink.text() || last == Template::CorrectRefineThink.text() {
            "<corrected_think>\nOnly the answers so far are known.\n</corrected_think>".to_string()
        } else if last == Template::Refine.text() {
            "Thought:\nA category question removes more candidates.\nAction:\n{\"name\": \"ask\", \"arguments\": {\"question\": \"Is it an animal?\"}}".to_string()
        } else {
            let turn = req.messages.iter().filter(|m| m.role == Role::Assistant).count();
            let object = &self.guesses[turn % self.guesses.len()];
            format!("Thought:\nWorking down the list.\nAction:\n{{\"name\": \"guess\", \"arguments\": {{\"object\": \"{object}\"}}}}")
        };
        Ok(ChatResponse::text(text))
    }
}

pub fn nlac(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlac")).current_dir(dir).args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}
