use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::StudioError;
use crate::blend::{BlendPair, BlendScheme, ImagePrompt};
use crate::expression::Expression;
use crate::mapping::{ObjectCandidate, Theme};
use crate::oracle::ImageArtifact;
use crate::scoring::{AnalysisDiagram, DiagramKind};

pub const SCHEMA_VERSION: u32 = 1;

/// A group of generated images for one prompt, placed at
/// (object similarity, attribute similarity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanvasItem {
    pub prompt_id: String,
    pub coords: [f64; 2],
    pub image_refs: Vec<String>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tombstone {
    pub prompt_id: String,
    pub coords: [f64; 2],
    pub image_refs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    ConceptsSelected {
        concepts: Vec<String>,
    },
    ThemeInferred {
        theme: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        warning: Option<String>,
    },
    ObjectsSuggested {
        concept: String,
        iteration: u32,
        names: Vec<String>,
    },
    AttributesAssigned {
        objects: Vec<String>,
    },
    DiagramBuilt {
        kind: DiagramKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subject: Option<[String; 2]>,
    },
    SchemesGenerated {
        pair: BlendPair,
        count: usize,
    },
    PromptComposed {
        prompt_id: String,
    },
    PreviewGenerated {
        object: String,
        artifact_id: String,
    },
    ImageGenerated {
        prompt_id: String,
        artifact_id: String,
    },
    ObjectReplaced {
        concept: String,
        old: String,
        new: String,
        tombstones: Vec<Tombstone>,
    },
}

impl EventKind {
    pub fn summary(&self) -> String {
        match self {
            EventKind::ConceptsSelected { concepts } => format!("selected concepts {}", concepts.join(", ")),
            EventKind::ThemeInferred { theme, .. } => format!("theme: {theme}"),
            EventKind::ObjectsSuggested {
                concept,
                iteration,
                names,
            } => {
                format!("objects for {concept} (iteration {iteration}): {}", names.join(", "))
            }
            EventKind::AttributesAssigned { objects } => format!("attributes for {}", objects.join(", ")),
            EventKind::DiagramBuilt { kind, subject: None } => format!("{kind:?} diagram built").to_lowercase(),
            EventKind::DiagramBuilt {
                kind,
                subject: Some([a, b]),
            } => format!("{kind:?} diagram built for {a} + {b}").to_lowercase(),
            EventKind::SchemesGenerated { pair, count } => {
                format!("{count} schemes for {} + {}", pair.object_a, pair.object_b)
            }
            EventKind::PromptComposed { prompt_id } => format!("prompt {prompt_id} composed"),
            EventKind::PreviewGenerated { object, artifact_id } => format!("preview {artifact_id} for {object}"),
            EventKind::ImageGenerated { prompt_id, artifact_id } => {
                format!("image {artifact_id} for prompt {prompt_id}")
            }
            EventKind::ObjectReplaced {
                concept,
                old,
                new,
                tombstones,
            } => {
                let refs: Vec<&str> = tombstones.iter().map(|t| t.prompt_id.as_str()).collect();
                format!("{concept}: replaced {old} with {new}; removed [{}]", refs.join(", "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub event: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub summary: String,
    pub event: EventKind,
}

/// Schemes generated for one pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeSet {
    pub pair: BlendPair,
    pub schemes: Vec<BlendScheme>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub schema_version: u32,
    pub id: String,
    pub created_at: DateTime<Utc>,
    pub expression: Expression,
    #[serde(default)]
    pub theme: Option<Theme>,
    /// Live candidates per concept.
    #[serde(default)]
    pub candidates: BTreeMap<String, Vec<ObjectCandidate>>,
    /// Every name ever suggested per concept, replaced ones included.
    #[serde(default)]
    pub suggested: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub objects_diagram: Option<AnalysisDiagram>,
    /// Keyed by [`pair_key`].
    #[serde(default)]
    pub attribute_diagrams: BTreeMap<String, AnalysisDiagram>,
    #[serde(default)]
    pub schemes: Vec<SchemeSet>,
    #[serde(default)]
    pub prompts: Vec<ImagePrompt>,
    #[serde(default)]
    pub artifacts: BTreeMap<String, ImageArtifact>,
    #[serde(default)]
    pub canvas: Vec<CanvasItem>,
    #[serde(default)]
    pub event_log: Vec<Event>,
}

/// Orientation-free key for an object pair.
pub fn pair_key(a: &str, b: &str) -> String {
    let (a, b) = (a.trim().to_lowercase(), b.trim().to_lowercase());
    if a <= b {
        format!("{a}+{b}")
    } else {
        format!("{b}+{a}")
    }
}

impl Session {
    pub fn new(id: impl Into<String>, expression: Expression, created_at: DateTime<Utc>) -> Self {
        Session {
            schema_version: SCHEMA_VERSION,
            id: id.into(),
            created_at,
            expression,
            theme: None,
            candidates: BTreeMap::new(),
            suggested: BTreeMap::new(),
            objects_diagram: None,
            attribute_diagrams: BTreeMap::new(),
            schemes: Vec::new(),
            prompts: Vec::new(),
            artifacts: BTreeMap::new(),
            canvas: Vec::new(),
            event_log: Vec::new(),
        }
    }

    /// Appends an event and returns its sequence number.
    pub fn log(&mut self, at: DateTime<Utc>, event: EventKind) -> u64 {
        let seq = self.event_log.last().map_or(1, |e| e.seq + 1);
        self.event_log.push(Event { seq, at, event });
        seq
    }

    pub fn candidate(&self, concept: &str, name: &str) -> Option<&ObjectCandidate> {
        self.candidates.get(concept)?.iter().find(|c| c.is_named(name))
    }

    /// First live candidate named `name` under any concept.
    pub fn find_candidate(&self, name: &str) -> Option<&ObjectCandidate> {
        self.candidates.values().flatten().find(|c| c.is_named(name))
    }

    pub fn all_candidates(&self) -> impl Iterator<Item = &ObjectCandidate> {
        self.candidates.values().flatten()
    }

    pub fn prompt(&self, id: &str) -> Option<&ImagePrompt> {
        self.prompts.iter().find(|p| p.id == id)
    }

    pub fn schemes_for(&self, pair: &BlendPair) -> Option<&[BlendScheme]> {
        self.schemes
            .iter()
            .find(|s| &s.pair == pair)
            .map(|s| s.schemes.as_slice())
    }

    pub fn attribute_diagram(&self, a: &str, b: &str) -> Option<&AnalysisDiagram> {
        self.attribute_diagrams.get(&pair_key(a, b))
    }

    /// Number of suggestion rounds so far for `concept`.
    pub fn iterations(&self, concept: &str) -> u32 {
        self.event_log
            .iter()
            .filter(|e| matches!(&e.event, EventKind::ObjectsSuggested { concept: c, .. } if c == concept))
            .count() as u32
    }

    /// Current (object, attribute) normalized similarities for a pair.
    pub fn coords_for(&self, pair: &BlendPair) -> Result<[f64; 2], StudioError> {
        let objects = self
            .objects_diagram
            .as_ref()
            .ok_or_else(|| StudioError::MissingDiagram("objects".into()))?;
        let x = objects
            .pair(&pair.object_a, &pair.object_b)
            .ok_or_else(|| {
                StudioError::MissingDiagram(format!("objects diagram has no {} / {}", pair.object_a, pair.object_b))
            })?
            .norm_sim;
        let attrs = self.attribute_diagram(&pair.object_a, &pair.object_b).ok_or_else(|| {
            StudioError::MissingDiagram(format!("attributes of {} + {}", pair.object_a, pair.object_b))
        })?;
        let y = attrs
            .pair(&pair.attribute_a, &pair.attribute_b)
            .ok_or_else(|| {
                StudioError::MissingDiagram(format!(
                    "attributes diagram has no {} / {}",
                    pair.attribute_a, pair.attribute_b
                ))
            })?
            .norm_sim;
        Ok([x, y])
    }

    /// Coordinates the item would get if placed now.
    pub fn current_coords(&self, item: &CanvasItem) -> Option<[f64; 2]> {
        self.coords_for(&self.prompt(&item.prompt_id)?.pair).ok()
    }

    /// Adds a generated image to its prompt's canvas group, creating the
    /// group at the current coordinates if needed. Existing groups keep
    /// their coordinates.
    pub fn place_result(
        &mut self,
        prompt_id: &str,
        artifact: ImageArtifact,
        at: DateTime<Utc>,
    ) -> Result<CanvasItem, StudioError> {
        let prompt = self
            .prompt(prompt_id)
            .ok_or_else(|| StudioError::UnknownPrompt(prompt_id.to_string()))?;
        let index = match self.canvas.iter().position(|c| c.prompt_id == prompt_id) {
            Some(i) => i,
            None => {
                let coords = self.coords_for(&prompt.pair)?;
                self.canvas.push(CanvasItem {
                    prompt_id: prompt_id.to_string(),
                    coords,
                    image_refs: Vec::new(),
                    count: 0,
                });
                self.canvas.len() - 1
            }
        };
        let item = &mut self.canvas[index];
        item.image_refs.push(artifact.id.clone());
        item.count = item.image_refs.len();
        let item = item.clone();
        self.log(
            at,
            EventKind::ImageGenerated {
                prompt_id: prompt_id.to_string(),
                artifact_id: artifact.id.clone(),
            },
        );
        self.artifacts.insert(artifact.id.clone(), artifact);
        Ok(item)
    }

    /// Swaps `old` for `new` under `concept` and removes every canvas item
    /// whose prompt involves `old`. Image files stay on disk; the removed
    /// items are returned as tombstones. Diagrams are left to the caller.
    pub fn swap_candidate(
        &mut self,
        concept: &str,
        old: &str,
        new: ObjectCandidate,
    ) -> Result<Vec<Tombstone>, StudioError> {
        let list = self
            .candidates
            .get_mut(concept)
            .ok_or_else(|| StudioError::UnknownConcept(concept.to_string()))?;
        let index = list
            .iter()
            .position(|c| c.is_named(old))
            .ok_or_else(|| StudioError::UnknownObject {
                concept: concept.to_string(),
                name: old.to_string(),
            })?;
        let old_name = list[index].name.clone();
        let suggested = self.suggested.entry(concept.to_string()).or_default();
        if !suggested.iter().any(|s| s.eq_ignore_ascii_case(&new.name)) {
            suggested.push(new.name.clone());
        }
        list[index] = new;

        let stale: Vec<String> = self
            .prompts
            .iter()
            .filter(|p| p.references(&old_name))
            .map(|p| p.id.clone())
            .collect();
        let mut tombstones = Vec::new();
        self.canvas.retain(|item| {
            if stale.contains(&item.prompt_id) {
                tombstones.push(Tombstone {
                    prompt_id: item.prompt_id.clone(),
                    coords: item.coords,
                    image_refs: item.image_refs.clone(),
                });
                false
            } else {
                true
            }
        });
        self.schemes.retain(|s| !s.pair.mentions(&old_name));
        self.attribute_diagrams.retain(|_, d| {
            d.subject
                .as_ref()
                .is_none_or(|[a, b]| !a.eq_ignore_ascii_case(&old_name) && !b.eq_ignore_ascii_case(&old_name))
        });
        Ok(tombstones)
    }

    /// Chronological event summaries, tombstones included.
    pub fn list_history(&self) -> Vec<HistoryEntry> {
        self.event_log
            .iter()
            .map(|e| HistoryEntry {
                seq: e.seq,
                at: e.at,
                summary: e.event.summary(),
                event: e.event.clone(),
            })
            .collect()
    }

    /// Structural checks that every saved or loaded session satisfies.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!("schema_version {}", self.schema_version));
        }
        if !self.expression.check_invariants() {
            return Err("expression tokens are inconsistent".into());
        }
        for item in &self.canvas {
            if self.prompt(&item.prompt_id).is_none() {
                return Err(format!("canvas item references unknown prompt {}", item.prompt_id));
            }
            if item.count == 0 || item.count != item.image_refs.len() {
                return Err(format!(
                    "canvas item {} has count {} for {} images",
                    item.prompt_id,
                    item.count,
                    item.image_refs.len()
                ));
            }
            if item.coords.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(format!("canvas item {} outside the unit square", item.prompt_id));
            }
        }
        if self.event_log.windows(2).any(|w| w[1].seq <= w[0].seq) {
            return Err("event log is not strictly ordered".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("session serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, StudioError> {
        let value: Value = serde_json::from_str(text).map_err(|e| StudioError::CorruptSessionFile(e.to_string()))?;
        let version = value
            .get("schema_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| StudioError::CorruptSessionFile("missing schema_version".into()))?;
        if version != SCHEMA_VERSION as u64 {
            return Err(StudioError::UnsupportedSchemaVersion(version));
        }
        let session: Session =
            serde_json::from_value(value).map_err(|e| StudioError::CorruptSessionFile(e.to_string()))?;
        session.check_invariants().map_err(StudioError::CorruptSessionFile)?;
        Ok(session)
    }

    pub fn save(&self, path: &Path) -> Result<(), StudioError> {
        self.check_invariants().map_err(StudioError::Inconsistent)?;
        crate::write_atomic(path, self.to_json().as_bytes())
            .map_err(|e| StudioError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, StudioError> {
        let text = std::fs::read_to_string(path).map_err(|e| StudioError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
