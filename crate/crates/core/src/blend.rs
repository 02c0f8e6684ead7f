//! Blending schemes, image prompts and multi-concept plans.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::{indefinite_article, ObjectCandidate, Theme};
use crate::oracle::{
    bindings, Bindings, CompletionOptions, Oracle, OracleError, OracleResult, ResultSchema, TemplateId,
};
use crate::scoring::AnalysisDiagram;

pub const DEFAULT_SCHEME_COUNT: usize = 3;
pub const MAX_SCHEME_COUNT: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlendError {
    #[error("invalid pair: {0}")]
    InvalidPair(String),
    #[error("scheme count {0} outside 1..=5")]
    InvalidSchemeCount(usize),
    #[error("scheme and reason must be non-empty")]
    EmptyScheme,
    #[error("multi-concept plans need at least 3 concepts, got {0}")]
    InsufficientConcepts(usize),
    #[error("concept '{0}' chosen twice")]
    DuplicateConcept(String),
    #[error("no score for the pair {0} / {1}")]
    PairNotScored(String, String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlendPair {
    pub object_a: String,
    pub attribute_a: String,
    pub object_b: String,
    pub attribute_b: String,
}

impl BlendPair {
    pub fn new(object_a: &str, attribute_a: &str, object_b: &str, attribute_b: &str) -> Self {
        BlendPair {
            object_a: object_a.trim().to_string(),
            attribute_a: attribute_a.trim().to_string(),
            object_b: object_b.trim().to_string(),
            attribute_b: attribute_b.trim().to_string(),
        }
    }

    /// Checks the pair against stored candidates: two different objects,
    /// each attribute taken from its own object's attribute set.
    pub fn validate<'a>(
        &self,
        candidates: impl IntoIterator<Item = &'a ObjectCandidate> + Clone,
    ) -> Result<(), BlendError> {
        if [&self.object_a, &self.attribute_a, &self.object_b, &self.attribute_b]
            .iter()
            .any(|s| s.trim().is_empty())
        {
            return Err(BlendError::InvalidPair("all four fields are required".into()));
        }
        if self.object_a.eq_ignore_ascii_case(&self.object_b) {
            return Err(BlendError::InvalidPair(format!(
                "'{}' is paired with itself",
                self.object_a
            )));
        }
        for (object, attribute) in [(&self.object_a, &self.attribute_a), (&self.object_b, &self.attribute_b)] {
            let found = candidates.clone().into_iter().find(|c| c.is_named(object));
            match found {
                None => return Err(BlendError::InvalidPair(format!("'{object}' is not a candidate"))),
                Some(c) if !c.has_attribute(attribute) => {
                    return Err(BlendError::InvalidPair(format!(
                        "'{attribute}' is not an attribute of '{object}'"
                    )))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.object_a.eq_ignore_ascii_case(name.trim()) || self.object_b.eq_ignore_ascii_case(name.trim())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlendScheme {
    pub scheme: String,
    pub reason: String,
}

impl BlendScheme {
    pub fn new(scheme: &str, reason: &str) -> Result<Self, BlendError> {
        if scheme.trim().is_empty() || reason.trim().is_empty() {
            return Err(BlendError::EmptyScheme);
        }
        Ok(BlendScheme {
            scheme: scheme.trim().to_string(),
            reason: reason.trim().to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SecondaryElement {
    pub concept: String,
    pub object: String,
    pub attribute: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImagePrompt {
    /// Derived from the text, so identical prompts share an id.
    pub id: String,
    pub text: String,
    pub pair: BlendPair,
    pub scheme: BlendScheme,
    pub theme: Theme,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub secondary: Vec<SecondaryElement>,
}

impl ImagePrompt {
    /// Whether the prompt involves `name`, as a pair member, a secondary
    /// element or anywhere in its text.
    pub fn references(&self, name: &str) -> bool {
        let needle = name.trim().to_lowercase();
        !needle.is_empty()
            && (self.pair.mentions(name)
                || self
                    .secondary
                    .iter()
                    .any(|s| s.object.eq_ignore_ascii_case(name.trim()))
                || self.text.to_lowercase().contains(&needle))
    }
}

pub fn prompt_id(text: &str) -> String {
    crate::sha256_hex(text.as_bytes())[..16].to_string()
}

/// Asks the oracle for `n` distinct schemes merging the pair.
pub fn generate_schemes(
    oracle: &Oracle,
    pair: &BlendPair,
    n: usize,
    options: CompletionOptions,
) -> Result<Vec<BlendScheme>, BlendError> {
    if !(1..=MAX_SCHEME_COUNT).contains(&n) {
        return Err(BlendError::InvalidSchemeCount(n));
    }
    let b = bindings([
        ("Object A", pair.object_a.as_str()),
        ("Attribute 1", pair.attribute_a.as_str()),
        ("Object B", pair.object_b.as_str()),
        ("Attribute 2", pair.attribute_b.as_str()),
        ("NUM", n.to_string().as_str()),
    ]);
    let distinct = |r: &OracleResult| {
        let OracleResult::Schemes(rows) = r else {
            return Err("not a scheme list".to_string());
        };
        let mut seen = HashSet::new();
        for row in rows {
            if row.name.trim().is_empty() || row.reason.trim().is_empty() {
                return Err("empty scheme or reason".to_string());
            }
            if !seen.insert(row.name.trim().to_lowercase()) {
                return Err(format!("duplicate scheme '{}'", row.name));
            }
        }
        Ok(())
    };
    let resp = oracle.complete_checked(
        TemplateId::Schemes,
        &b,
        options,
        ResultSchema::Schemes { count: Some(n) },
        &distinct,
    )?;
    let Some(OracleResult::Schemes(rows)) = resp.parsed else {
        unreachable!("schemes schema yields schemes")
    };
    rows.iter().map(|r| BlendScheme::new(&r.name, &r.reason)).collect()
}

/// The theme as bound into the prompt: one trailing terminal mark dropped,
/// since the template supplies its own period.
pub fn theme_binding(theme: &Theme) -> String {
    let s = theme.sentence.trim();
    s.strip_suffix(['.', '!', '?']).unwrap_or(s).to_string()
}

fn image_bindings(pair: &BlendPair, scheme: &BlendScheme, theme: &Theme) -> Bindings {
    bindings([
        ("Object A", pair.object_a.clone()),
        ("Attribute 1", pair.attribute_a.clone()),
        ("Object B", pair.object_b.clone()),
        ("Attribute 2", pair.attribute_b.clone()),
        ("selectedScheme", scheme.scheme.clone()),
        ("METAPHORICAL THEME", theme_binding(theme)),
    ])
}

/// Sentence introducing one secondary element.
pub fn secondary_sentence(element: &SecondaryElement) -> String {
    format!(
        "Include {} {} as a secondary element representing {}.",
        indefinite_article(&element.object),
        element.object,
        element.concept
    )
}

fn compose(
    pair: &BlendPair,
    scheme: &BlendScheme,
    theme: &Theme,
    secondary: &[SecondaryElement],
) -> Result<ImagePrompt, BlendError> {
    let parts = TemplateId::Image
        .template()
        .render_image_parts(&image_bindings(pair, scheme, theme))?;
    let (considerations, head) = parts.split_last().expect("image template has parts");
    let mut text: String = head.concat();
    for element in secondary {
        text.push_str(&secondary_sentence(element));
    }
    text.push_str(considerations);
    Ok(ImagePrompt {
        id: prompt_id(&text),
        text,
        pair: pair.clone(),
        scheme: scheme.clone(),
        theme: theme.clone(),
        secondary: secondary.to_vec(),
    })
}

/// Fills the image template: objects, attributes, scheme, considerations.
pub fn compose_image_prompt(pair: &BlendPair, scheme: &BlendScheme, theme: &Theme) -> Result<ImagePrompt, BlendError> {
    compose(pair, scheme, theme, &[])
}

/// One chosen object and attribute for a concept.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConceptChoice {
    pub concept: String,
    pub object: String,
    pub attribute: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlendPlan {
    /// Concepts behind `object_a` and `object_b`, in that order.
    pub primary_concepts: [String; 2],
    pub primary: BlendPair,
    pub secondary: Vec<SecondaryElement>,
}

/// Picks the primary pair and orders the remaining concepts.
///
/// The primary pair is the cross-concept pair with the highest normalized
/// similarity, then the higher normalized sentiment, then the smaller
/// object names. Its members are ordered by concept name. Every other
/// concept becomes a secondary element, most similar to the primary pair
/// first.
pub fn plan_multi_concept(choices: &[ConceptChoice], diagram: &AnalysisDiagram) -> Result<BlendPlan, BlendError> {
    let mut seen = HashSet::new();
    for c in choices {
        if !seen.insert(c.concept.trim().to_lowercase()) {
            return Err(BlendError::DuplicateConcept(c.concept.clone()));
        }
    }
    if choices.len() < 3 {
        return Err(BlendError::InsufficientConcepts(choices.len()));
    }
    let mut sorted: Vec<&ConceptChoice> = choices.iter().collect();
    sorted.sort_by(|a, b| {
        a.concept
            .to_lowercase()
            .cmp(&b.concept.to_lowercase())
            .then_with(|| a.concept.cmp(&b.concept))
    });

    let score = |a: &ConceptChoice, b: &ConceptChoice| {
        diagram
            .pair(&a.object, &b.object)
            .ok_or_else(|| BlendError::PairNotScored(a.object.clone(), b.object.clone()))
    };

    let mut best: Option<(usize, usize, f64, f64)> = None;
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            let s = score(sorted[i], sorted[j])?;
            let better = match best {
                None => true,
                Some((bi, bj, sim, sent)) => {
                    let names = |x: usize, y: usize| {
                        let (p, q) = (sorted[x].object.to_lowercase(), sorted[y].object.to_lowercase());
                        if p <= q {
                            (p, q)
                        } else {
                            (q, p)
                        }
                    };
                    s.norm_sim
                        .total_cmp(&sim)
                        .then_with(|| s.norm_sent.total_cmp(&sent))
                        .then_with(|| names(bi, bj).cmp(&names(i, j)))
                        .is_gt()
                }
            };
            if better {
                best = Some((i, j, s.norm_sim, s.norm_sent));
            }
        }
    }
    let (i, j, _, _) = best.expect("at least one pair");
    let (a, b) = (sorted[i], sorted[j]);

    let mut rest = Vec::new();
    for (k, c) in sorted.iter().enumerate() {
        if k == i || k == j {
            continue;
        }
        let closeness = score(c, a)?.norm_sim.max(score(c, b)?.norm_sim);
        rest.push((closeness, *c));
    }
    rest.sort_by(|x, y| {
        y.0.total_cmp(&x.0)
            .then_with(|| x.1.concept.to_lowercase().cmp(&y.1.concept.to_lowercase()))
    });

    Ok(BlendPlan {
        primary_concepts: [a.concept.clone(), b.concept.clone()],
        primary: BlendPair::new(&a.object, &a.attribute, &b.object, &b.attribute),
        secondary: rest
            .into_iter()
            .map(|(_, c)| SecondaryElement {
                concept: c.concept.clone(),
                object: c.object.clone(),
                attribute: c.attribute.clone(),
            })
            .collect(),
    })
}

/// The primary blend prompt with one sentence per secondary element placed
/// before the considerations clause.
pub fn compose_multi_prompt(plan: &BlendPlan, scheme: &BlendScheme, theme: &Theme) -> Result<ImagePrompt, BlendError> {
    compose(&plan.primary, scheme, theme, &plan.secondary)
}
