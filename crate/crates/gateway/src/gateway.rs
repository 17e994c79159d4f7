use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};

use crate::config::{request_seed, Behavior, EndpointConfig, Site};
use crate::context::{check_roles, estimate_tokens, ChatContext, Message, Role};
use crate::error::{Error, ParseError, Result};
use crate::parse::{
    extract_corrected_think, parse_composed_action, parse_correctness, parse_evaluation, parse_judgement,
    render_with_thinking, split_think, ComposedAction, CorrectedThought, Correctness, ParsedEvaluation,
};
use crate::schema::ActionSchema;
use crate::templates::{render_bootstrap, render_judge, Template};
use crate::transport::{ChatRequest, Transport};

/// A parsed reply with the thinking that preceded it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated<T> {
    pub value: T,
    pub thinking: Option<String>,
    /// Reply text after the thinking block.
    pub body: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextObservation {
    pub text: String,
    pub reward: f64,
    pub done: bool,
}

impl NextObservation {
    /// Text shown to the bootstrap prompt; terminal steps carry the score.
    pub fn prompt_text(&self) -> String {
        if self.done {
            format!("{}\nFinal score: {}", self.text, self.reward)
        } else {
            self.text.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellmanTarget {
    pub bootstrap_future: String,
    /// Target evaluation; `corrected_thought` is set when thinking was corrected.
    pub evaluation: ParsedEvaluation,
    pub original_thinking: Option<String>,
    pub correction: Option<CorrectedThought>,
}

impl BellmanTarget {
    pub fn target_text(&self) -> String {
        self.evaluation.to_target_text()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedAction {
    pub action: ComposedAction,
    /// The last critique was optimal and the action was copied without a call.
    pub copied: bool,
    /// The thought mentions the previous action, which the prompt forbids.
    pub references_previous: bool,
    pub original_thinking: Option<String>,
    pub correction: Option<CorrectedThought>,
}

impl RefinedAction {
    pub fn target_text(&self) -> String {
        render_with_thinking(self.correction.as_ref().map(|c| c.text.as_str()), &self.action.render())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectionKind {
    Critique,
    Refinement,
}

impl CorrectionKind {
    fn template(self) -> Template {
        match self {
            Self::Critique => Template::CorrectCritiqueThink,
            Self::Refinement => Template::CorrectRefineThink,
        }
    }

    fn sample(self) -> u32 {
        match self {
            Self::Critique => 0,
            Self::Refinement => 1,
        }
    }
}

const PREVIOUS_REFERENCES: [&str; 3] = ["previous action", "previous attempt", "earlier action"];

/// Counting semaphore bounding in-flight requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n), cv: Condvar::new() }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("slot lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("slot lock");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("slot lock") += 1;
        self.0.cv.notify_one();
    }
}

/// Critic prompt at `(s_t, a_t)`.
pub fn critic_messages(ctx: &ChatContext, action: &ComposedAction) -> Vec<Message> {
    let mut m = ctx.messages().to_vec();
    m.push(Message::assistant(action.render()));
    m.push(Message::user(Template::CriticEval.text()));
    m
}

/// Refinement prompt over a transcript of (action, critique) pairs.
pub fn refinement_messages(ctx: &ChatContext, transcript: &[(ComposedAction, ParsedEvaluation)]) -> Vec<Message> {
    let mut m = ctx.messages().to_vec();
    for (i, (action, eval)) in transcript.iter().enumerate() {
        if i > 0 {
            m.push(Message::user(Template::Refine.text()));
        }
        m.push(Message::assistant(action.render()));
        m.push(Message::user(Template::CriticEval.text()));
        m.push(Message::assistant(eval.render()));
    }
    m.push(Message::user(Template::Refine.text()));
    m
}

fn nonempty(body: &str) -> Result<String, ParseError> {
    if body.is_empty() {
        Err(ParseError::EmptySection("reply"))
    } else {
        Ok(body.to_string())
    }
}

pub struct Gateway {
    transport: Arc<dyn Transport>,
    config: EndpointConfig,
    run_seed: u64,
    slots: Slots,
}

impl Gateway {
    pub fn new(transport: Arc<dyn Transport>, config: EndpointConfig, run_seed: u64) -> Result<Self> {
        config.validate()?;
        let slots = Slots::new(config.max_in_flight);
        Ok(Self { transport, config, run_seed, slots })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    pub fn run_seed(&self) -> u64 {
        self.run_seed
    }

    pub fn request(&self, behavior: Behavior, site: Site, sample: u32, attempt: u32, messages: &[Message]) -> ChatRequest {
        ChatRequest {
            model: self.config.model_for(behavior).to_string(),
            messages: messages.to_vec(),
            temperature: self.config.temperature_for(behavior),
            max_tokens: self.config.max_response_tokens,
            seed: Some(request_seed(self.run_seed, site, behavior, sample, attempt)),
        }
    }

    /// Sends `messages` until a reply parses or the attempt budget runs out.
    pub fn call<T>(
        &self,
        behavior: Behavior,
        site: Site,
        sample: u32,
        messages: &[Message],
        parse: impl Fn(&str) -> Result<T, ParseError>,
    ) -> Result<Generated<T>> {
        check_roles(messages)?;
        if messages.last().is_none_or(|m| m.role != Role::User) {
            return Err(Error::InvalidContext("prompt must end with a user message".into()));
        }
        let tokens = estimate_tokens(messages);
        if tokens > self.config.max_prompt_tokens {
            return Err(Error::ContextTooLong { tokens, budget: self.config.max_prompt_tokens });
        }
        let policy = &self.config.retry_policy;
        let mut last: Option<(ParseError, String)> = None;
        for attempt in 0..policy.max_attempts {
            let request = self.request(behavior, site, sample, attempt, messages);
            let response = {
                let _slot = self.slots.acquire();
                self.transport.complete(&request)
            };
            let response = match response {
                Ok(r) => r,
                Err(e) if e.is_retryable() && attempt + 1 < policy.max_attempts => {
                    std::thread::sleep(policy.backoff(attempt));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let parsed = split_think(&response.content).and_then(|(inline, body)| {
                let thinking = match (response.reasoning.as_deref().map(str::trim), inline) {
                    (Some(r), Some(i)) if !r.is_empty() => Some(format!("{r}\n{i}")),
                    (Some(r), None) if !r.is_empty() => Some(r.to_string()),
                    (_, inline) => inline,
                };
                parse(body).map(|value| Generated { value, thinking, body: body.to_string(), attempts: attempt + 1 })
            });
            match parsed {
                Ok(g) => return Ok(g),
                Err(e) => last = Some((e, response.content)),
            }
        }
        let (error, raw) = last.expect("at least one attempt parsed or failed");
        Err(Error::Parse { behavior, attempts: policy.max_attempts, error, raw })
    }

    pub fn generate_action(&self, ctx: &ChatContext, schema: &ActionSchema, site: Site) -> Result<Generated<ComposedAction>> {
        self.call(Behavior::Policy, site, 0, ctx.messages(), |body| {
            let action = parse_composed_action(body)?;
            schema.validate(&action)?;
            Ok(action)
        })
    }

    /// `k` independent critiques of `action` at the context's state.
    pub fn generate_critique(
        &self,
        ctx: &ChatContext,
        action: &ComposedAction,
        k: u32,
        site: Site,
    ) -> Result<Vec<Generated<ParsedEvaluation>>> {
        if k == 0 {
            return Err(Error::Config("critique needs k ≥ 1".into()));
        }
        let messages = critic_messages(ctx, action);
        (0..k).map(|i| self.call(Behavior::Critic, site, i, &messages, parse_evaluation)).collect()
    }

    /// Single-step answer check for math-style tasks.
    pub fn evaluate_solution(&self, ctx: &ChatContext, solution: &str, site: Site) -> Result<Generated<Correctness>> {
        let mut messages = ctx.messages().to_vec();
        messages.push(Message::assistant(solution));
        messages.push(Message::user(Template::CriticMath.text()));
        self.call(Behavior::Critic, site, 0, &messages, parse_correctness)
    }

    /// Bootstrap a future from the observed next state, then ask for the
    /// combined target evaluation, then correct its thinking if it has any.
    pub fn generate_bellman_target(
        &self,
        ctx: &ChatContext,
        action: &ComposedAction,
        next: &NextObservation,
        site: Site,
    ) -> Result<BellmanTarget> {
        let mut messages = ctx.messages().to_vec();
        messages.push(Message::assistant(action.render()));
        messages.push(Message::user(render_bootstrap(&next.prompt_text())));
        let bootstrap = self.call(Behavior::Bootstrap, site, 0, &messages, nonempty)?;
        messages.push(Message::assistant(bootstrap.value.clone()));
        messages.push(Message::user(Template::TargetEval.text()));
        let target = self.call(Behavior::Target, site, 0, &messages, parse_evaluation)?;
        let mut evaluation = target.value;
        let correction = match &target.thinking {
            Some(thinking) => {
                let c = self.correct_chain_of_thought(&messages, thinking, &target.body, CorrectionKind::Critique, site)?;
                evaluation.corrected_thought = Some(c.text.clone());
                Some(c)
            }
            None => None,
        };
        Ok(BellmanTarget {
            bootstrap_future: bootstrap.value,
            evaluation,
            original_thinking: target.thinking,
            correction,
        })
    }

    /// Asks the model to rewrite `thinking` (which produced `body` in reply
    /// to `prompt`) without privileged information.
    pub fn correct_chain_of_thought(
        &self,
        prompt: &[Message],
        thinking: &str,
        body: &str,
        kind: CorrectionKind,
        site: Site,
    ) -> Result<CorrectedThought> {
        if thinking.trim().is_empty() {
            return Err(Error::InvalidContext("no thinking to correct".into()));
        }
        let mut messages = prompt.to_vec();
        messages.push(Message::assistant(render_with_thinking(Some(thinking), body)));
        messages.push(Message::user(kind.template().text()));
        Ok(self.call(Behavior::Correct, site, kind.sample(), &messages, extract_corrected_think)?.value)
    }

    pub fn generate_refined_action(
        &self,
        ctx: &ChatContext,
        transcript: &[(ComposedAction, ParsedEvaluation)],
        schema: &ActionSchema,
        site: Site,
    ) -> Result<RefinedAction> {
        let (latest, critique) = transcript
            .last()
            .ok_or_else(|| Error::InvalidContext("refinement needs at least one critiqued action".into()))?;
        if critique.is_optimal() {
            return Ok(RefinedAction {
                action: latest.clone(),
                copied: true,
                references_previous: false,
                original_thinking: None,
                correction: None,
            });
        }
        let messages = refinement_messages(ctx, transcript);
        let reply = self.call(Behavior::Refine, site, 0, &messages, |body| {
            let action = parse_composed_action(body)?;
            schema.validate(&action)?;
            Ok(action)
        })?;
        let lowered = reply.value.thought.to_lowercase();
        let references_previous = PREVIOUS_REFERENCES.iter().any(|p| lowered.contains(p));
        let correction = match &reply.thinking {
            Some(t) => Some(self.correct_chain_of_thought(&messages, t, &reply.body, CorrectionKind::Refinement, site)?),
            None => None,
        };
        Ok(RefinedAction {
            action: reply.value,
            copied: false,
            references_previous,
            original_thinking: reply.thinking,
            correction,
        })
    }

    /// Whether `guess` names `hidden`, as judged by the model.
    pub fn judge(&self, guess: &str, hidden: &str, site: Site) -> Result<bool> {
        let messages = [Message::user(render_judge(guess, hidden))];
        Ok(self.call(Behavior::Judge, site, 0, &messages, parse_judgement)?.value)
    }
}
