//! Scripted 20 Questions: a hidden object, an attribute table that answers
//! yes/no questions, and a guess judge.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use nlac_gateway::{ActionSchema, ActionSpec, EnvAction, Gateway, ParamKind, ParamSpec, Site};
use serde::Deserialize;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_TURNS: u32 = 20;
pub const TABLE_SCHEMA_VERSION: u32 = 1;

const OBJECTS_TOML: &str = include_str!("../data/twenty_q/objects.toml");
const SYNONYMS_TOML: &str = include_str!("../data/twenty_q/synonyms.toml");

pub const TASK: &str = "Let's play 20 Questions. I am thinking of an object. Ask yes/no questions to narrow it down, \
and guess the object once you are confident. You have 20 turns in total, and every question or guess uses one.";

pub const FIRST_OBSERVATION: &str = "I have an object in mind. Ask your first question.";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    schema_version: u32,
    attributes: BTreeMap<String, String>,
    objects: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SynonymFile {
    schema_version: u32,
    groups: Vec<Vec<String>>,
}

/// Object names, the yes/no attribute questions, and which attributes hold
/// for each object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectTable {
    attributes: BTreeMap<String, String>,
    objects: BTreeMap<String, BTreeSet<String>>,
    question_index: BTreeMap<String, String>,
    synonyms: BTreeMap<String, String>,
}

/// Lowercase, drop punctuation at the ends, collapse whitespace.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let trimmed = lowered.trim().trim_matches(|c: char| c.is_ascii_punctuation() && c != '-');
    trimmed.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn strip_article(text: &str) -> &str {
    ["a ", "an ", "the "]
        .iter()
        .find_map(|a| text.strip_prefix(a))
        .unwrap_or(text)
}

impl ObjectTable {
    pub fn bundled() -> Self {
        Self::parse(OBJECTS_TOML, SYNONYMS_TOML).expect("bundled 20 Questions table is valid")
    }

    pub fn parse(objects_toml: &str, synonyms_toml: &str) -> Result<Self> {
        let table: TableFile = toml::from_str(objects_toml)?;
        let syn: SynonymFile = toml::from_str(synonyms_toml)?;
        for v in [table.schema_version, syn.schema_version] {
            if v != TABLE_SCHEMA_VERSION {
                return Err(Error::InvalidData(format!("unsupported table schema_version {v}")));
            }
        }
        let mut objects = BTreeMap::new();
        let mut seen: BTreeMap<BTreeSet<String>, String> = BTreeMap::new();
        for (name, attrs) in table.objects {
            if name != normalize(&name) {
                return Err(Error::InvalidData(format!("object name {name:?} is not normalized")));
            }
            let set: BTreeSet<String> = attrs.into_iter().collect();
            if let Some(a) = set.iter().find(|a| !table.attributes.contains_key(*a)) {
                return Err(Error::InvalidData(format!("object {name:?} uses undeclared attribute {a:?}")));
            }
            if let Some(other) = seen.insert(set.clone(), name.clone()) {
                return Err(Error::InvalidData(format!("{name:?} and {other:?} have identical attributes")));
            }
            objects.insert(name, set);
        }
        let question_index = table.attributes.iter().map(|(id, q)| (normalize(q), id.clone())).collect();
        let mut synonyms = BTreeMap::new();
        for group in syn.groups {
            let canonical: Vec<&String> = group.iter().filter(|w| objects.contains_key(*w)).collect();
            let [canonical] = canonical.as_slice() else {
                return Err(Error::InvalidData(format!("synonym group {group:?} must name exactly one object")));
            };
            for w in &group {
                synonyms.insert(normalize(w), (*canonical).clone());
            }
        }
        Ok(Self { attributes: table.attributes, objects, question_index, synonyms })
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn objects(&self) -> impl Iterator<Item = &str> {
        self.objects.keys().map(String::as_str)
    }

    pub fn attributes(&self) -> impl Iterator<Item = (&str, &str)> {
        self.attributes.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn has(&self, object: &str, attribute: &str) -> bool {
        self.objects.get(object).is_some_and(|s| s.contains(attribute))
    }

    pub fn contains(&self, object: &str) -> bool {
        self.objects.contains_key(object)
    }

    pub fn question(&self, attribute: &str) -> Option<&str> {
        self.attributes.get(attribute).map(String::as_str)
    }

    /// Attribute asked about by a question, if it is one of the table's.
    pub fn attribute_for(&self, question: &str) -> Option<&str> {
        self.question_index.get(&normalize(question)).map(String::as_str)
    }

    /// Table object named by `word`, through the synonym table and a plural `s`.
    pub fn resolve(&self, word: &str) -> Option<&str> {
        let norm = normalize(word);
        let w = strip_article(&norm);
        let candidates = [Some(w), w.strip_suffix('s'), w.strip_suffix("es")];
        let found = candidates.into_iter().flatten().find_map(|c| -> Option<&'_ str> {
            match self.objects.get_key_value(c) {
                Some((k, _)) => Some(k.as_str()),
                None => self.synonyms.get(c).map(String::as_str),
            }
        });
        found
    }
}

/// Whether `guess` names `hidden`: normalized equality or a shared synonym group.
pub fn scripted_match(table: &ObjectTable, guess: &str, hidden: &str) -> bool {
    let g = normalize(guess);
    let h = normalize(hidden);
    if strip_article(&g) == strip_article(&h) {
        return true;
    }
    matches!((table.resolve(&g), table.resolve(&h)), (Some(a), Some(b)) if a == b)
}

#[derive(Clone, Default)]
pub enum Judge {
    #[default]
    Scripted,
    Llm { gateway: Arc<Gateway>, episode: u64 },
}

impl std::fmt::Debug for Judge {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Scripted => f.write_str("Scripted"),
            Self::Llm { episode, .. } => write!(f, "Llm {{ episode: {episode} }}"),
        }
    }
}

/// Decides whether a guess names the hidden object.
pub fn judge_guess(table: &ObjectTable, judge: &Judge, guess: &str, hidden: &str, turn: u32) -> Result<bool> {
    match judge {
        Judge::Scripted => Ok(scripted_match(table, guess, hidden)),
        Judge::Llm { gateway, episode } => Ok(gateway.judge(guess, hidden, Site::new(*episode, turn as u64))?),
    }
}

pub fn action_schema() -> ActionSchema {
    ActionSchema::new(vec![
        ActionSpec {
            name: "ask".into(),
            description: "Ask a yes/no question about the object.".into(),
            params: vec![ParamSpec { name: "question".into(), kind: ParamKind::String, required: true }],
        },
        ActionSpec {
            name: "guess".into(),
            description: "Guess the object.".into(),
            params: vec![ParamSpec { name: "object".into(), kind: ParamKind::String, required: true }],
        },
    ])
}

/// What a question asks, as understood by the scripted oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    Attribute(String),
    OneOf(Vec<String>),
    Guess(String),
    Unknown,
}

/// Interprets a question: a table attribute question, "Is it one of: …?",
/// or "Is it a <object>?".
pub fn interpret(table: &ObjectTable, question: &str) -> Query {
    if let Some(a) = table.attribute_for(question) {
        return Query::Attribute(a.to_string());
    }
    let q = normalize(question);
    if let Some(rest) = q.strip_prefix("is it one of") {
        let rest = rest.trim_start_matches(':').trim();
        let names = rest
            .split(',')
            .flat_map(|p| p.split(" or "))
            .map(|p| p.trim().trim_start_matches("or ").trim())
            .filter(|p| !p.is_empty())
            .map(|p| strip_article(p).to_string())
            .collect();
        return Query::OneOf(names);
    }
    if let Some(rest) = q.strip_prefix("is it ") {
        if let Some(obj) = table.resolve(rest) {
            return Query::Guess(obj.to_string());
        }
    }
    Query::Unknown
}

#[derive(Debug, Clone)]
pub struct TwentyQWorld {
    table: Arc<ObjectTable>,
    hidden: String,
    max_turns: u32,
    judge: Judge,
}

/// Result of one oracle turn.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub observation: String,
    pub solved: bool,
}

impl TwentyQWorld {
    pub fn new(table: Arc<ObjectTable>, hidden: &str, max_turns: u32, judge: Judge) -> Result<Self> {
        if !table.contains(hidden) {
            return Err(Error::UnknownSpec(format!("hidden object {hidden:?} is not in the table")));
        }
        if max_turns == 0 {
            return Err(Error::UnknownSpec("max_turns must be positive".into()));
        }
        Ok(Self { table, hidden: hidden.to_string(), max_turns, judge })
    }

    pub fn hidden(&self) -> &str {
        &self.hidden
    }

    pub fn max_turns(&self) -> u32 {
        self.max_turns
    }

    pub fn table(&self) -> &ObjectTable {
        &self.table
    }

    fn guess(&self, guess: &str, turn: u32) -> Result<Reply> {
        if judge_guess(&self.table, &self.judge, guess, &self.hidden, turn)? {
            Ok(Reply { observation: format!("Yes! It is {}.", self.hidden), solved: true })
        } else {
            Ok(Reply { observation: "No.".into(), solved: false })
        }
    }

    /// Answers one action taken at `turn` (1-based).
    pub fn respond(&self, action: &EnvAction, turn: u32) -> Result<Reply> {
        let arg = |key: &str| action.arguments.get(key).and_then(|v| v.as_str());
        let yes_no = |b: bool| Reply { observation: if b { "Yes." } else { "No." }.into(), solved: false };
        match (action.name.as_str(), arg("question"), arg("object")) {
            ("guess", _, Some(object)) => self.guess(object, turn),
            ("ask", Some(question), _) => match interpret(&self.table, question) {
                Query::Attribute(a) => Ok(yes_no(self.table.has(&self.hidden, &a))),
                Query::OneOf(names) => {
                    let mut hit = false;
                    for n in &names {
                        hit |= scripted_match(&self.table, n, &self.hidden);
                    }
                    Ok(yes_no(hit))
                }
                Query::Guess(object) => self.guess(&object, turn),
                Query::Unknown => Ok(Reply { observation: "I don't know.".into(), solved: false }),
            },
            _ => Ok(Reply {
                observation: format!("Error: {:?} is not a valid 20 Questions action.", action.name),
                solved: false,
            }),
        }
    }
}
