use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::session::{pair_key, CanvasItem, EventKind, SchemeSet, Session, Tombstone};
use super::StudioError;
use crate::blend::{self, BlendPair, BlendPlan, BlendScheme, ConceptChoice, ImagePrompt};
use crate::engine::Engine;
use crate::expression::{parse_expression, select_concepts};
use crate::mapping::{validate_object_name, ObjectCandidate, ThemeInference};
use crate::oracle::ImageArtifact;
use crate::scoring::{build_diagram, AnalysisDiagram, DiagramKind, PairScore};
use crate::Error;

/// Result of [`Studio::replace_object`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaceOutcome {
    pub candidate: ObjectCandidate,
    pub tombstones: Vec<Tombstone>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// What [`Studio::run_auto`] picked and produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoRun {
    pub pair: BlendPair,
    pub schemes: Vec<BlendScheme>,
    pub prompt_ids: Vec<String>,
    pub canvas: Vec<CanvasItem>,
}

/// The widest link between two different labels.
pub fn strongest_distinct_pair(diagram: &AnalysisDiagram) -> Option<PairScore> {
    diagram
        .pair_scores()
        .into_iter()
        .filter(|p| !p.a.eq_ignore_ascii_case(&p.b))
        .min_by(|x, y| {
            y.norm_sim
                .total_cmp(&x.norm_sim)
                .then_with(|| y.norm_sent.total_cmp(&x.norm_sent))
                .then_with(|| (x.a.as_str(), x.b.as_str()).cmp(&(y.a.as_str(), y.b.as_str())))
        })
}

/// Drives the pipeline against sessions. Every method that takes
/// `&mut Session` is a mutation; callers serialize those per session.
pub struct Studio {
    engine: Arc<Engine>,
}

impl Studio {
    pub fn new(engine: Arc<Engine>) -> Self {
        Studio { engine }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    fn now(&self) -> DateTime<Utc> {
        self.engine.clock.now()
    }

    pub fn create_session(&self, id: &str, text: &str) -> Result<Session, Error> {
        let expression = parse_expression(text, self.engine.tagger.as_ref())?;
        Ok(Session::new(id, expression, self.now()))
    }

    pub fn select_concepts(&self, s: &mut Session, picks: &[usize]) -> Result<Vec<String>, Error> {
        s.expression = select_concepts(&s.expression, picks)?;
        let concepts = s.expression.selected_concepts();
        s.log(
            self.now(),
            EventKind::ConceptsSelected {
                concepts: concepts.clone(),
            },
        );
        Ok(concepts)
    }

    pub fn infer_theme(&self, s: &mut Session) -> Result<ThemeInference, Error> {
        let inferred = self.engine.mapper.infer_theme(&s.expression)?;
        if let Some(w) = &inferred.warning {
            log::warn!("{w}");
        }
        s.theme = Some(inferred.theme.clone());
        s.expression.theme = Some(inferred.theme.sentence.clone());
        s.log(
            self.now(),
            EventKind::ThemeInferred {
                theme: inferred.theme.sentence.clone(),
                warning: inferred.warning.clone(),
            },
        );
        Ok(inferred)
    }

    /// Next round of five objects for `concept`, attributes included.
    pub fn suggest_objects(&self, s: &mut Session, concept: &str) -> Result<Vec<ObjectCandidate>, Error> {
        let iteration = s.iterations(concept) + 1;
        let previous = s.suggested.get(concept).cloned().unwrap_or_default();
        let mapper = &self.engine.mapper;
        let batch = mapper.suggest_objects(concept, &s.expression, iteration, &previous)?;
        let names: Vec<String> = batch.iter().map(|c| c.name.clone()).collect();
        let batch = mapper.suggest_attributes(batch)?;
        let now = self.now();
        s.suggested
            .entry(concept.to_string())
            .or_default()
            .extend(names.iter().cloned());
        s.candidates
            .entry(concept.to_string())
            .or_default()
            .extend(batch.iter().cloned());
        s.log(
            now,
            EventKind::ObjectsSuggested {
                concept: concept.to_string(),
                iteration,
                names: names.clone(),
            },
        );
        s.log(now, EventKind::AttributesAssigned { objects: names });
        if s.objects_diagram.is_some() {
            self.objects_diagram(s)?;
        }
        Ok(batch)
    }

    /// Candidates by name, fetching attributes for any that lack five.
    pub fn assign_attributes(&self, s: &mut Session, names: &[String]) -> Result<Vec<ObjectCandidate>, Error> {
        let mut found = Vec::new();
        for name in names {
            let (concept, c) = s
                .candidates
                .iter()
                .find_map(|(k, list)| list.iter().find(|c| c.is_named(name)).map(|c| (k.clone(), c.clone())))
                .ok_or_else(|| StudioError::UnknownObject {
                    concept: String::new(),
                    name: name.clone(),
                })?;
            found.push((concept, c));
        }
        let missing: Vec<ObjectCandidate> = found
            .iter()
            .filter(|(_, c)| c.attributes.len() != crate::oracle::extract::ATTRIBUTES_PER_OBJECT)
            .map(|(_, c)| c.clone())
            .collect();
        if !missing.is_empty() {
            let filled = self.engine.mapper.suggest_attributes(missing)?;
            for f in &filled {
                for list in s.candidates.values_mut() {
                    for c in list.iter_mut().filter(|c| c.is_named(&f.name)) {
                        c.attributes = f.attributes.clone();
                    }
                }
            }
            s.log(
                self.now(),
                EventKind::AttributesAssigned {
                    objects: filled.iter().map(|c| c.name.clone()).collect(),
                },
            );
        }
        Ok(found
            .iter()
            .filter_map(|(k, c)| s.candidate(k, &c.name).cloned())
            .collect())
    }

    /// Rebuilds and stores the objects diagram. The first selected concept
    /// with candidates is on the left, all others on the right; a single
    /// concept is compared with itself.
    pub fn objects_diagram(&self, s: &mut Session) -> Result<AnalysisDiagram, Error> {
        let concepts: Vec<String> = s
            .expression
            .selected_concepts()
            .into_iter()
            .filter(|c| s.candidates.get(c).is_some_and(|l| !l.is_empty()))
            .collect();
        let Some((first, rest)) = concepts.split_first() else {
            return Err(StudioError::NoCandidates.into());
        };
        let names = |c: &String| s.candidates[c].iter().map(|x| x.name.clone()).collect::<Vec<_>>();
        let left = names(first);
        let right: Vec<String> = if rest.is_empty() {
            left.clone()
        } else {
            rest.iter().flat_map(names).collect()
        };
        let diagram = build_diagram(
            DiagramKind::Objects,
            &left,
            &right,
            &self.engine.embedder,
            self.engine.sentiment.as_ref(),
        )?;
        s.objects_diagram = Some(diagram.clone());
        s.log(
            self.now(),
            EventKind::DiagramBuilt {
                kind: DiagramKind::Objects,
                subject: None,
            },
        );
        Ok(diagram)
    }

    /// Builds and stores the attributes diagram for two candidates.
    pub fn attributes_diagram(&self, s: &mut Session, a: &str, b: &str) -> Result<AnalysisDiagram, Error> {
        let unknown = |name: &str| StudioError::UnknownObject {
            concept: String::new(),
            name: name.to_string(),
        };
        let ca = s.find_candidate(a).ok_or_else(|| unknown(a))?.clone();
        let cb = s.find_candidate(b).ok_or_else(|| unknown(b))?.clone();
        if ca.is_named(&cb.name) {
            return Err(blend::BlendError::InvalidPair(format!("'{}' is paired with itself", ca.name)).into());
        }
        let mut diagram = build_diagram(
            DiagramKind::Attributes,
            &ca.attributes,
            &cb.attributes,
            &self.engine.embedder,
            self.engine.sentiment.as_ref(),
        )?;
        diagram.subject = Some([ca.name.clone(), cb.name.clone()]);
        s.attribute_diagrams
            .insert(pair_key(&ca.name, &cb.name), diagram.clone());
        s.log(
            self.now(),
            EventKind::DiagramBuilt {
                kind: DiagramKind::Attributes,
                subject: diagram.subject.clone(),
            },
        );
        Ok(diagram)
    }

    pub fn generate_schemes(&self, s: &mut Session, pair: &BlendPair, n: usize) -> Result<Vec<BlendScheme>, Error> {
        pair.validate(s.all_candidates().collect::<Vec<_>>())?;
        let oracle = &self.engine.oracle;
        let schemes = blend::generate_schemes(oracle, pair, n, oracle.defaults())?;
        s.schemes.retain(|set| &set.pair != pair);
        s.schemes.push(SchemeSet {
            pair: pair.clone(),
            schemes: schemes.clone(),
        });
        s.log(
            self.now(),
            EventKind::SchemesGenerated {
                pair: pair.clone(),
                count: n,
            },
        );
        Ok(schemes)
    }

    pub fn compose_prompt(&self, s: &mut Session, pair: &BlendPair, scheme_index: usize) -> Result<ImagePrompt, Error> {
        let theme = s.theme.clone().ok_or(StudioError::MissingTheme)?;
        let schemes = s
            .schemes_for(pair)
            .ok_or_else(|| StudioError::NoSchemes(format!("{} + {}", pair.object_a, pair.object_b)))?;
        let scheme = schemes.get(scheme_index).ok_or(StudioError::UnknownScheme {
            index: scheme_index,
            available: schemes.len(),
        })?;
        let prompt = blend::compose_image_prompt(pair, scheme, &theme)?;
        self.store_prompt(s, prompt.clone());
        Ok(prompt)
    }

    fn store_prompt(&self, s: &mut Session, prompt: ImagePrompt) {
        if s.prompt(&prompt.id).is_none() {
            let id = prompt.id.clone();
            s.prompts.push(prompt);
            s.log(self.now(), EventKind::PromptComposed { prompt_id: id });
        }
    }

    /// Checks that `prompt_id` can still be rendered and returns the prompt.
    pub fn prompt_for_image(&self, s: &Session, prompt_id: &str) -> Result<ImagePrompt, Error> {
        let prompt = s
            .prompt(prompt_id)
            .ok_or_else(|| StudioError::UnknownPrompt(prompt_id.to_string()))?;
        let live = |name: &str| s.find_candidate(name).is_some();
        if !live(&prompt.pair.object_a)
            || !live(&prompt.pair.object_b)
            || prompt.secondary.iter().any(|e| !live(&e.object))
        {
            return Err(StudioError::StalePrompt(prompt_id.to_string()).into());
        }
        Ok(prompt.clone())
    }

    /// Renders an image without touching any session.
    pub fn render_image(&self, prompt: &ImagePrompt) -> Result<ImageArtifact, Error> {
        Ok(self.engine.oracle.generate_image(&prompt.text)?)
    }

    pub fn place_image(&self, s: &mut Session, prompt_id: &str, artifact: ImageArtifact) -> Result<CanvasItem, Error> {
        self.prompt_for_image(s, prompt_id)?;
        Ok(s.place_result(prompt_id, artifact, self.now())?)
    }

    /// Generates one image for a stored prompt and places it on the canvas.
    pub fn generate_image(&self, s: &mut Session, prompt_id: &str) -> Result<CanvasItem, Error> {
        let prompt = self.prompt_for_image(s, prompt_id)?;
        let artifact = self.render_image(&prompt)?;
        self.place_image(s, prompt_id, artifact)
    }

    pub fn preview(&self, s: &mut Session, name: &str) -> Result<ImageArtifact, Error> {
        let candidate = s
            .find_candidate(name)
            .ok_or_else(|| StudioError::UnknownObject {
                concept: String::new(),
                name: name.to_string(),
            })?
            .clone();
        let artifact = self.engine.mapper.preview_object(&candidate)?;
        if candidate.preview.as_deref() != Some(artifact.id.as_str()) {
            for c in s.candidates.values_mut().flatten().filter(|c| c.is_named(name)) {
                c.preview = Some(artifact.id.clone());
            }
            s.artifacts.insert(artifact.id.clone(), artifact.clone());
            s.log(
                self.now(),
                EventKind::PreviewGenerated {
                    object: candidate.name.clone(),
                    artifact_id: artifact.id.clone(),
                },
            );
        }
        Ok(artifact)
    }

    /// Replaces `old` with a user-chosen object under `concept`, discarding
    /// every canvas item built on `old`.
    pub fn replace_object(
        &self,
        s: &mut Session,
        concept: &str,
        old: &str,
        new: &str,
    ) -> Result<ReplaceOutcome, Error> {
        let current = s
            .candidate(concept, old)
            .ok_or_else(|| StudioError::UnknownObject {
                concept: concept.to_string(),
                name: old.to_string(),
            })?
            .clone();
        if current.is_named(new) {
            let warning = format!("'{old}' replaced with itself; nothing changed");
            log::warn!("{warning}");
            return Ok(ReplaceOutcome {
                candidate: current,
                tombstones: Vec::new(),
                warning: Some(warning),
            });
        }
        if s.find_candidate(new).is_some() {
            return Err(StudioError::DuplicateObject(new.trim().to_string()).into());
        }
        validate_object_name(new, concept).map_err(StudioError::InvalidObjectName)?;
        let candidate = self.engine.mapper.candidate_for(concept, new, current.iteration)?;
        let had_objects_diagram = s.objects_diagram.is_some();
        let tombstones = s.swap_candidate(concept, &current.name, candidate.clone())?;
        s.log(
            self.now(),
            EventKind::ObjectReplaced {
                concept: concept.to_string(),
                old: current.name.clone(),
                new: candidate.name.clone(),
                tombstones: tombstones.clone(),
            },
        );
        if had_objects_diagram {
            self.objects_diagram(s)?;
        }
        Ok(ReplaceOutcome {
            candidate,
            tombstones,
            warning: None,
        })
    }

    /// Plans a blend over three or more concepts, scoring the chosen
    /// objects against each other.
    pub fn plan_multi(&self, s: &Session, choices: &[ConceptChoice]) -> Result<BlendPlan, Error> {
        for c in choices {
            let candidate = s
                .candidate(&c.concept, &c.object)
                .ok_or_else(|| StudioError::UnknownObject {
                    concept: c.concept.clone(),
                    name: c.object.clone(),
                })?;
            if !candidate.has_attribute(&c.attribute) {
                return Err(blend::BlendError::InvalidPair(format!(
                    "'{}' is not an attribute of '{}'",
                    c.attribute, c.object
                ))
                .into());
            }
        }
        let objects: Vec<String> = choices.iter().map(|c| c.object.clone()).collect();
        if objects.len() < 3 {
            return Err(blend::BlendError::InsufficientConcepts(objects.len()).into());
        }
        let diagram = build_diagram(
            DiagramKind::Objects,
            &objects,
            &objects,
            &self.engine.embedder,
            self.engine.sentiment.as_ref(),
        )?;
        Ok(blend::plan_multi_concept(choices, &diagram)?)
    }

    pub fn compose_multi(&self, s: &mut Session, plan: &BlendPlan, scheme: &BlendScheme) -> Result<ImagePrompt, Error> {
        let theme = s.theme.clone().ok_or(StudioError::MissingTheme)?;
        let prompt = blend::compose_multi_prompt(plan, scheme, &theme)?;
        self.store_prompt(s, prompt.clone());
        Ok(prompt)
    }

    /// The whole pipeline without a human: every concept selected, the
    /// widest object link and then the widest attribute link picked, `n`
    /// schemes, one prompt and one image per scheme.
    pub fn run_auto(&self, s: &mut Session, n: usize) -> Result<AutoRun, Error> {
        let all: Vec<usize> = (0..s.expression.tokens.len()).collect();
        if all.is_empty() {
            return Err(StudioError::NoConceptsSelected.into());
        }
        self.select_concepts(s, &all)?;
        self.infer_theme(s)?;
        let mut concepts = Vec::new();
        for c in s.expression.selected_concepts() {
            if !concepts.contains(&c) {
                concepts.push(c);
            }
        }
        for c in &concepts {
            self.suggest_objects(s, c)?;
        }
        let objects = self.objects_diagram(s)?;
        let top = strongest_distinct_pair(&objects).ok_or(StudioError::NoCandidates)?;
        let attributes = self.attributes_diagram(s, &top.a, &top.b)?;
        let top_attr = strongest_distinct_pair(&attributes).ok_or(StudioError::NoCandidates)?;
        let pair = BlendPair::new(&top.a, &top_attr.a, &top.b, &top_attr.b);
        let schemes = self.generate_schemes(s, &pair, n)?;
        let mut prompt_ids = Vec::new();
        for i in 0..schemes.len() {
            let prompt = self.compose_prompt(s, &pair, i)?;
            self.generate_image(s, &prompt.id)?;
            prompt_ids.push(prompt.id);
        }
        Ok(AutoRun {
            pair,
            schemes,
            prompt_ids,
            canvas: s.canvas.clone(),
        })
    }
}
