//! Concept to object to attribute inference.
//!
//! For each selected concept the oracle proposes five concrete objects that
//! can complete "{concept} is like a {object}", guided by related terms from
//! the knowledge base. Each object then gets five visible physical
//! attributes. Replies are checked locally on top of the prompt's own rules:
//! activities (gerunds), category words, abstract nouns and the concept
//! itself are rejected and the oracle is asked once more.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expression::Expression;
use crate::knowledge::{KnowledgeClient, KnowledgeError, RelatedTerm, DEFAULT_LIMIT};
use crate::oracle::extract::{extract_with_schema, ATTRIBUTES_PER_OBJECT, OBJECTS_PER_BATCH};
use crate::oracle::{
    bindings, CompletionOptions, ImageArtifact, Oracle, OracleError, OracleResult, ResultSchema, TemplateId,
};

/// Cap on the serialized related-terms binding.
pub const RELATED_CONCEPTS_MAX_CHARS: usize = 2000;
/// Knowledge-base hints fetched per object when asking for attributes.
pub const ATTRIBUTE_HINTS_PER_OBJECT: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("expression is empty")]
    EmptyExpression,
    #[error("'{0}' is not a selected concept")]
    ConceptNotSelected(String),
    #[error("no candidates given")]
    EmptyCandidates,
    #[error("only {} valid objects for '{concept}': {detail}", partial.len())]
    CandidateValidationFailed {
        concept: String,
        partial: Vec<ObjectCandidate>,
        detail: String,
    },
    #[error("attributes for '{object}' failed validation: {detail}")]
    AttributeValidationFailed { object: String, detail: String },
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Theme {
    pub sentence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThemeInference {
    pub theme: Theme,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectCandidate {
    pub name: String,
    pub concept: String,
    pub rationale: String,
    pub attributes: Vec<String>,
    pub iteration: u32,
    /// Artifact id of the preview image, once generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preview: Option<String>,
}

impl ObjectCandidate {
    pub fn has_attribute(&self, attribute: &str) -> bool {
        let a = attribute.to_lowercase();
        self.attributes.iter().any(|x| x.to_lowercase() == a)
    }

    pub fn is_named(&self, name: &str) -> bool {
        self.name.to_lowercase() == name.trim().to_lowercase()
    }
}

/// "a" or "an" by the leading letter.
pub fn indefinite_article(word: &str) -> &'static str {
    match word.trim().chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// The metaphor statement linking a concept to an object.
pub fn metaphor_statement(concept: &str, object: &str) -> String {
    let mut chars = concept.trim().chars();
    let concept = match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    };
    format!("{concept} is like {} {}.", indefinite_article(object), object.trim())
}

pub fn preview_prompt(object: &str) -> String {
    format!(
        "A photo of a single {} centered on a plain, solid-color background, no text.",
        object.trim()
    )
}

const CATEGORY_WORDS: &[&str] = &[
    "fruit",
    "fruits",
    "vegetable",
    "vegetables",
    "animal",
    "animals",
    "food",
    "foods",
    "furniture",
    "tool",
    "tools",
    "plant",
    "plants",
    "clothes",
    "clothing",
    "vehicle",
    "vehicles",
    "object",
    "objects",
    "thing",
    "things",
    "item",
    "items",
    "device",
    "devices",
    "equipment",
    "appliance",
    "appliances",
    "material",
    "materials",
    "product",
    "products",
    "stuff",
    "goods",
    "instrument",
    "instruments",
    "weather",
    "nature",
];
const ABSTRACT_WORDS: &[&str] = &[
    "exercise",
    "beauty",
    "love",
    "hope",
    "knowledge",
    "health",
    "happiness",
    "freedom",
    "time",
    "energy",
    "idea",
    "ideas",
    "life",
    "death",
    "peace",
    "truth",
    "wisdom",
    "strength",
    "success",
    "failure",
    "fear",
    "joy",
    "growth",
    "change",
    "power",
    "faith",
    "memory",
    "friendship",
    "justice",
    "warmth",
    "heat",
    "climate",
    "environment",
    "sustainability",
    "fitness",
    "wellness",
    "wellbeing",
    "well-being",
    "emotion",
    "feeling",
    "spirit",
    "motivation",
];
const CONCRETE_ING: &[&str] = &[
    "ring",
    "king",
    "string",
    "wing",
    "spring",
    "swing",
    "sling",
    "ceiling",
    "building",
    "painting",
    "earring",
    "pudding",
    "icing",
    "stuffing",
    "sibling",
    "wedding",
    "awning",
    "railing",
    "siding",
    "tubing",
    "wiring",
    "bedding",
    "frosting",
    "dumpling",
    "sapling",
    "seedling",
    "herring",
    "bowling",
    "stocking",
    "stockings",
    "sling",
    "lightning",
    "clothing",
    "ping",
    "thing",
];

/// Checks a proposed object name against the activity, category and
/// abstract-noun rules. Returns the reason on rejection.
pub fn validate_object_name(name: &str, concept: &str) -> Result<(), String> {
    let n = name.trim().to_lowercase();
    if n.is_empty() {
        return Err("empty name".into());
    }
    if n == concept.trim().to_lowercase() {
        return Err(format!("'{name}' repeats the concept"));
    }
    let last = n.split_whitespace().last().unwrap_or(&n);
    if n.split_whitespace().count() == 1 && last.len() > 4 && last.ends_with("ing") && !CONCRETE_ING.contains(&last) {
        return Err(format!("'{name}' looks like an activity"));
    }
    if CATEGORY_WORDS.contains(&n.as_str()) {
        return Err(format!("'{name}' is a category"));
    }
    if ABSTRACT_WORDS.contains(&n.as_str()) {
        return Err(format!("'{name}' is abstract"));
    }
    Ok(())
}

const GENERIC_ATTRIBUTES: &[&str] = &["size", "color", "colour", "shape"];

/// Cleans an attribute list: trims, drops generic class words and
/// case-insensitive duplicates.
pub fn clean_attributes(raw: &[String]) -> (Vec<String>, Vec<String>) {
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for a in raw {
        let t = a.trim();
        let key = t.to_lowercase();
        if t.is_empty() || GENERIC_ATTRIBUTES.contains(&key.as_str()) || !seen.insert(key) {
            dropped.push(t.to_string());
        } else {
            kept.push(t.to_string());
        }
    }
    (kept, dropped)
}

/// Joins terms with ", " without exceeding `max_chars`, cutting at a term
/// boundary.
pub fn join_capped<'a>(terms: impl IntoIterator<Item = &'a str>, max_chars: usize) -> String {
    let mut out = String::new();
    for t in terms {
        let extra = if out.is_empty() {
            t.chars().count()
        } else {
            t.chars().count() + 2
        };
        if out.chars().count() + extra > max_chars {
            break;
        }
        if !out.is_empty() {
            out.push_str(", ");
        }
        out.push_str(t);
    }
    out
}

/// Splits text into sentences at `.`, `!` or `?` followed by whitespace or
/// the end of the text.
pub fn sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.trim().chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if matches!(chars[i], '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j], '.' | '!' | '?' | '"' | '\'') {
                j += 1;
            }
            if j == chars.len() || chars[j].is_whitespace() {
                let s: String = chars[start..j].iter().collect();
                if !s.trim().is_empty() {
                    out.push(s.trim().to_string());
                }
                start = j;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    let tail: String = chars[start.min(chars.len())..].iter().collect();
    if !tail.trim().is_empty() {
        out.push(tail.trim().to_string());
    }
    out
}

fn terminate(sentence: &str) -> String {
    let s = sentence.trim();
    if s.ends_with(['.', '!', '?']) {
        s.to_string()
    } else {
        format!("{s}.")
    }
}

pub struct Mapper {
    knowledge: Arc<KnowledgeClient>,
    oracle: Arc<Oracle>,
    options: CompletionOptions,
    previews: Mutex<HashMap<String, ImageArtifact>>,
}

impl Mapper {
    pub fn new(knowledge: Arc<KnowledgeClient>, oracle: Arc<Oracle>) -> Self {
        let options = oracle.defaults();
        Mapper {
            knowledge,
            oracle,
            options,
            previews: Mutex::new(HashMap::new()),
        }
    }

    pub fn infer_theme(&self, expr: &Expression) -> Result<ThemeInference, MappingError> {
        if expr.raw.trim().is_empty() {
            return Err(MappingError::EmptyExpression);
        }
        let b = bindings([("Input", expr.raw.trim())]);
        let single = |r: &OracleResult| match r {
            OracleResult::Theme(s) if sentences(s).len() == 1 => Ok(()),
            _ => Err("theme is not a single sentence".to_string()),
        };
        match self
            .oracle
            .complete_checked(TemplateId::Theme, &b, self.options, ResultSchema::Theme, &single)
        {
            Ok(resp) => {
                let Some(OracleResult::Theme(s)) = resp.parsed else {
                    unreachable!("theme schema yields a theme")
                };
                Ok(ThemeInference {
                    theme: Theme {
                        sentence: terminate(&s),
                    },
                    warning: None,
                })
            }
            Err(OracleError::InvalidOracleResponse {
                last_raw,
                attempts,
                detail,
            }) => match extract_with_schema(&last_raw, ResultSchema::Theme) {
                Ok(OracleResult::Theme(s)) if !sentences(&s).is_empty() => {
                    let first = sentences(&s).remove(0);
                    Ok(ThemeInference {
                        theme: Theme {
                            sentence: terminate(&first),
                        },
                        warning: Some(format!(
                            "theme had {} sentences after {attempts} attempts; kept the first",
                            sentences(&s).len()
                        )),
                    })
                }
                _ => Err(OracleError::InvalidOracleResponse {
                    attempts,
                    detail,
                    last_raw,
                }
                .into()),
            },
            Err(e) => Err(e.into()),
        }
    }

    /// Asks for five new objects for `concept`. `previous` lists every name
    /// already returned for this concept; none of them comes back.
    pub fn suggest_objects(
        &self,
        concept: &str,
        expr: &Expression,
        iteration: u32,
        previous: &[String],
    ) -> Result<Vec<ObjectCandidate>, MappingError> {
        if !expr.is_selected(concept) {
            return Err(MappingError::ConceptNotSelected(concept.to_string()));
        }
        let related = self.knowledge.related_objects(concept, DEFAULT_LIMIT)?;
        let mut excluded: Vec<String> = previous.iter().map(|p| p.trim().to_string()).collect();
        let mut accepted: Vec<ObjectCandidate> = Vec::new();
        let mut rejections: Vec<String> = Vec::new();

        for _round in 0..2 {
            let b = bindings([
                ("INPUT", concept.to_string()),
                ("Related_Concepts", related_binding(&related, &excluded)),
            ]);
            let resp = self.oracle.complete(TemplateId::Objects, &b, self.options)?;
            let Some(OracleResult::Objects(rows)) = resp.parsed else {
                unreachable!("objects schema yields objects")
            };
            let mut rejected_now = Vec::new();
            for row in rows {
                let name = row.name.trim().to_string();
                let key = name.to_lowercase();
                let dup =
                    excluded.iter().any(|e| e.to_lowercase() == key) || accepted.iter().any(|c| c.is_named(&name));
                if dup {
                    rejected_now.push(name.clone());
                    rejections.push(format!("'{name}' was already suggested"));
                    continue;
                }
                if let Err(why) = validate_object_name(&name, concept) {
                    rejected_now.push(name.clone());
                    rejections.push(why);
                    continue;
                }
                if accepted.len() < OBJECTS_PER_BATCH {
                    accepted.push(ObjectCandidate {
                        name,
                        concept: concept.to_string(),
                        rationale: row.reason.trim().to_string(),
                        attributes: Vec::new(),
                        iteration,
                        preview: None,
                    });
                }
            }
            if accepted.len() == OBJECTS_PER_BATCH {
                return Ok(accepted);
            }
            log::info!("retrying objects for '{concept}': {}", rejections.join("; "));
            for r in rejected_now {
                if !excluded.iter().any(|e| e.eq_ignore_ascii_case(&r)) {
                    excluded.push(r);
                }
            }
        }
        Err(MappingError::CandidateValidationFailed {
            concept: concept.to_string(),
            partial: accepted,
            detail: rejections.join("; "),
        })
    }

    /// Fills in five visible attributes for each candidate.
    pub fn suggest_attributes(&self, candidates: Vec<ObjectCandidate>) -> Result<Vec<ObjectCandidate>, MappingError> {
        if candidates.is_empty() {
            return Err(MappingError::EmptyCandidates);
        }
        let mut hints: HashMap<String, Vec<RelatedTerm>> = HashMap::new();
        for c in &candidates {
            let key = c.name.to_lowercase();
            if let Entry::Vacant(slot) = hints.entry(key) {
                slot.insert(self.knowledge.related_attributes(&c.name, ATTRIBUTE_HINTS_PER_OBJECT)?);
            }
        }
        let mut out = candidates;
        let mut pending: Vec<usize> = (0..out.len()).collect();
        let mut last_failure = HashMap::new();
        for _round in 0..2 {
            let names: Vec<&str> = pending.iter().map(|&i| out[i].name.as_str()).collect();
            let hint_text = pending
                .iter()
                .map(|&i| {
                    let terms = &hints[&out[i].name.to_lowercase()];
                    format!(
                        "{}: {}",
                        out[i].name,
                        join_capped(terms.iter().map(|t| t.term.as_str()), RELATED_CONCEPTS_MAX_CHARS)
                    )
                })
                .collect::<Vec<_>>()
                .join("; ");
            let b = bindings([
                ("INPUT", names.join(", ")),
                (
                    "Related_Concepts",
                    truncate_chars(&hint_text, RELATED_CONCEPTS_MAX_CHARS),
                ),
            ]);
            let resp = self.oracle.complete_checked(
                TemplateId::Attributes,
                &b,
                self.options,
                ResultSchema::Attributes { rows: None },
                &|_| Ok(()),
            )?;
            let Some(OracleResult::Attributes(rows)) = resp.parsed else {
                unreachable!("attributes schema yields rows")
            };
            let mut still = Vec::new();
            for (pos, &i) in pending.iter().enumerate() {
                let row = rows
                    .iter()
                    .find(|r| out[i].is_named(&r.object))
                    .or_else(|| (rows.len() == pending.len()).then(|| &rows[pos]));
                let Some(row) = row else {
                    last_failure.insert(i, "no attribute row returned".to_string());
                    still.push(i);
                    continue;
                };
                let (kept, dropped) = clean_attributes(&row.attributes);
                if kept.len() == ATTRIBUTES_PER_OBJECT {
                    out[i].attributes = kept;
                } else {
                    last_failure.insert(i, format!("rejected {dropped:?}, {} usable", kept.len()));
                    still.push(i);
                }
            }
            pending = still;
            if pending.is_empty() {
                return Ok(out);
            }
        }
        let i = pending[0];
        Err(MappingError::AttributeValidationFailed {
            object: out[i].name.clone(),
            detail: last_failure.remove(&i).unwrap_or_default(),
        })
    }

    /// Builds a candidate for a user-chosen object: the rationale is the
    /// metaphor statement, attributes come from the oracle.
    pub fn candidate_for(&self, concept: &str, name: &str, iteration: u32) -> Result<ObjectCandidate, MappingError> {
        let candidate = ObjectCandidate {
            name: name.trim().to_string(),
            concept: concept.to_string(),
            rationale: metaphor_statement(concept, name),
            attributes: Vec::new(),
            iteration,
            preview: None,
        };
        Ok(self.suggest_attributes(vec![candidate])?.remove(0))
    }

    /// Single-object preview image, cached by name.
    pub fn preview_object(&self, candidate: &ObjectCandidate) -> Result<ImageArtifact, MappingError> {
        let key = candidate.name.trim().to_lowercase();
        if key.is_empty() {
            return Err(MappingError::EmptyCandidates);
        }
        if let Some(hit) = self.previews.lock().get(&key) {
            return Ok(hit.clone());
        }
        let artifact = self.oracle.generate_image(&preview_prompt(&candidate.name))?;
        self.previews.lock().insert(key, artifact.clone());
        Ok(artifact)
    }
}

fn truncate_chars(s: &str, max: usize) -> String {
    s.chars().take(max).collect()
}

/// Related terms minus exclusions, capped, plus the do-not-repeat note when
/// there is anything to exclude.
fn related_binding(related: &[RelatedTerm], excluded: &[String]) -> String {
    let lowered: HashSet<String> = excluded.iter().map(|e| e.to_lowercase()).collect();
    let list = join_capped(
        related
            .iter()
            .map(|t| t.term.as_str())
            .filter(|t| !lowered.contains(*t)),
        RELATED_CONCEPTS_MAX_CHARS,
    );
    if excluded.is_empty() {
        list
    } else {
        format!("{list}. Already suggested, do not repeat: {}", excluded.join(", "))
    }
}
