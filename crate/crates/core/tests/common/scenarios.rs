use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use metablend::blend::{compose_image_prompt, compose_multi_prompt, BlendPlan, BlendScheme, ConceptChoice};
use metablend::engine::Engine;
use metablend::mapping::validate_object_name;
use metablend::oracle::{
    bindings, ChatProvider, ChatRequest, CompletionOptions, FixtureChat, ImageStore, Oracle, OracleError, OracleResult,
    PlaceholderImages, ProviderError, TemplateId,
};
use metablend::studio::{EventKind, Session, Studio};
use metablend::Error;

use super::templates::MULTI_BOOKS;
use super::{ensure, fixtures, Check};

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

pub fn studio(fixture: &str, image_root: &Path) -> Result<Studio, String> {
    let engine = Engine::offline(&fixtures(fixture), image_root).map_err(err)?;
    Ok(Studio::new(Arc::new(engine)))
}

/// The automatic pipeline over the global warming fixtures.
pub fn global_warming_run(image_root: &Path) -> Result<(Studio, Session), String> {
    let studio = studio("global-warming", image_root)?;
    let mut s = studio.create_session("global-warming", "global warming").map_err(err)?;
    studio.run_auto(&mut s, 3).map_err(err)?;
    Ok((studio, s))
}

/// Attribute diagrams are normalized on their own: building, rebuilding or
/// dropping them never changes the stored objects diagram.
pub fn check_normalization_independence(image_root: &Path) -> Check {
    let (studio, mut s) = global_warming_run(image_root)?;
    let objects = s.objects_diagram.as_ref().ok_or("no objects diagram")?.to_json();
    let names: Vec<String> = s.all_candidates().map(|c| c.name.clone()).collect();
    let mut built = 0;
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            // Only some attributes have fixture vectors.
            if studio.attributes_diagram(&mut s, a, b).is_err() {
                continue;
            }
            // Rebuilding in the other orientation overwrites the stored one.
            studio.attributes_diagram(&mut s, b, a).map_err(err)?;
            built += 1;
            ensure(
                s.objects_diagram.as_ref().map(|d| d.to_json()) == Some(objects.clone()),
                || format!("objects diagram changed after attributes diagram {a} + {b}"),
            )?;
        }
    }
    for d in s.attribute_diagrams.values_mut() {
        for link in &mut d.links {
            link.width = 1.0 - link.width;
        }
    }
    ensure(built >= 1, || format!("only {built} attribute diagrams could be built"))?;
    let rebuilt = studio.objects_diagram(&mut s).map_err(err)?.to_json();
    ensure(rebuilt == objects, || {
        "rebuilding the objects diagram changed its bytes".into()
    })?;
    s.attribute_diagrams.clear();
    let rebuilt = studio.objects_diagram(&mut s).map_err(err)?.to_json();
    ensure(rebuilt == objects, || {
        "rebuilding without attribute diagrams changed its bytes".into()
    })?;
    Ok(format!("objects diagram unchanged across {built} attribute diagrams"))
}

/// Five candidates per batch, disjoint across iterations, five attributes
/// each, and the activity "running" kept out.
pub fn check_cardinality(image_root: &Path) -> Check {
    let studio = studio("global-warming", image_root)?;
    let mut s = studio.create_session("cardinality", "global warming").map_err(err)?;
    studio.select_concepts(&mut s, &[0, 1]).map_err(err)?;
    let first = studio.suggest_objects(&mut s, "global").map_err(err)?;
    let second = studio.suggest_objects(&mut s, "global").map_err(err)?;
    let warming = studio.suggest_objects(&mut s, "warming").map_err(err)?;
    for (label, batch) in [("global #1", &first), ("global #2", &second), ("warming #1", &warming)] {
        ensure(batch.len() == 5, || format!("{label}: {} candidates", batch.len()))?;
    }
    for c in &second {
        ensure(!first.iter().any(|f| f.is_named(&c.name)), || {
            format!("'{}' repeated in iteration 2", c.name)
        })?;
        ensure(c.iteration == 2, || {
            format!("'{}' has iteration {}", c.name, c.iteration)
        })?;
    }
    for c in s.all_candidates() {
        ensure(c.attributes.len() == 5, || {
            format!("'{}' has {} attributes", c.name, c.attributes.len())
        })?;
    }

    // The warming fixture offers "running" in its first reply.
    let raw = std::fs::read_to_string(fixtures("global-warming").join("oracle/objects-00a7b43d0b4898e3.json"))
        .map_err(err)?;
    ensure(raw.contains("\"name\": \"running\""), || {
        "fixture no longer offers 'running'".into()
    })?;
    ensure(!warming.iter().any(|c| c.is_named("running")), || {
        "'running' was accepted".into()
    })?;
    ensure(validate_object_name("running", "warming").is_err(), || {
        "'running' passes validation".into()
    })?;
    ensure(validate_object_name("fireplace", "warming").is_ok(), || {
        "'fireplace' fails validation".into()
    })?;
    Ok(format!(
        "{} candidates, 5 attributes each, 'running' rejected",
        s.all_candidates().count()
    ))
}

/// The automatic pipeline reaches the documented pair and places images at
/// frozen coordinates, with byte-identical session documents across runs.
pub fn check_offline_pipeline(dir: &Path) -> Check {
    let (_, s) = global_warming_run(&dir.join("a"))?;
    let (_, again) = global_warming_run(&dir.join("b"))?;
    ensure(s.to_json() == again.to_json(), || {
        "session bytes differ between runs".into()
    })?;
    let names: Vec<&str> = s.all_candidates().map(|c| c.name.as_str()).collect();
    ensure(names.contains(&"earth") && names.contains(&"fireplace"), || {
        format!("candidates {names:?}")
    })?;
    let prompt = s.prompts.first().ok_or("no prompt composed")?;
    let pair = &prompt.pair;
    ensure(
        (
            pair.object_a.as_str(),
            pair.attribute_a.as_str(),
            pair.object_b.as_str(),
            pair.attribute_b.as_str(),
        ) == ("earth", "round", "fireplace", "flames"),
        || format!("pair {pair:?}"),
    )?;
    let item = s.canvas.first().ok_or("empty canvas")?;
    let coords = s.coords_for(pair).map_err(err)?;
    ensure(item.coords == coords, || {
        format!("canvas at {:?}, pair scores {coords:?}", item.coords)
    })?;
    Ok(format!(
        "{} prompts, {} canvas items at {:?}",
        s.prompts.len(),
        s.canvas.len(),
        item.coords
    ))
}

/// Replacing fireplace with ice cream clears its canvas items and records
/// them as tombstones.
pub fn check_replacement(image_root: &Path) -> Check {
    let (studio, mut s) = global_warming_run(image_root)?;
    let doomed = s
        .canvas
        .iter()
        .filter(|item| s.prompt(&item.prompt_id).is_some_and(|p| p.references("fireplace")))
        .count();
    ensure(doomed > 0, || "no canvas item uses fireplace before replacement".into())?;
    let outcome = studio
        .replace_object(&mut s, "warming", "fireplace", "ice cream")
        .map_err(err)?;
    for item in &s.canvas {
        let prompt = s.prompt(&item.prompt_id).ok_or("canvas item without prompt")?;
        ensure(!prompt.references("fireplace"), || {
            format!("{} still uses fireplace", item.prompt_id)
        })?;
    }
    let logged = s.event_log.iter().rev().find_map(|e| match &e.event {
        EventKind::ObjectReplaced {
            old, new, tombstones, ..
        } if old == "fireplace" && new == "ice cream" => Some(tombstones.len()),
        _ => None,
    });
    ensure(logged == Some(doomed), || {
        format!("event log tombstones {logged:?}, expected {doomed}")
    })?;
    ensure(outcome.candidate.attributes.len() == 5, || {
        format!("ice cream has {:?}", outcome.candidate.attributes)
    })?;
    ensure(s.find_candidate("fireplace").is_none(), || {
        "fireplace is still a candidate".into()
    })?;
    s.check_invariants()?;
    Ok(format!("{doomed} items tombstoned, ice cream has 5 attributes"))
}

fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

pub fn books_choices() -> Vec<ConceptChoice> {
    [
        ("soul", "phoenix", "fiery wings"),
        ("Books", "open book", "pages"),
        ("mirror", "hand mirror", "reflective glass"),
    ]
    .into_iter()
    .map(|(concept, object, attribute)| ConceptChoice {
        concept: concept.into(),
        object: object.into(),
        attribute: attribute.into(),
    })
    .collect()
}

/// Three-concept plan over the books fixture, independent of input order,
/// and its prompt against the golden file.
pub fn check_multi_concept(image_root: &Path) -> Check {
    let studio = studio("books-mirror-soul", image_root)?;
    let mut s = studio
        .create_session("books", "Books are the mirror to the soul")
        .map_err(err)?;
    studio.select_concepts(&mut s, &[0, 1, 2]).map_err(err)?;
    studio.infer_theme(&mut s).map_err(err)?;
    for c in ["Books", "mirror", "soul"] {
        studio.suggest_objects(&mut s, c).map_err(err)?;
    }
    let choices = books_choices();
    let plan: BlendPlan = studio.plan_multi(&s, &choices).map_err(err)?;
    for order in permutations(&choices) {
        let other = studio.plan_multi(&s, &order).map_err(err)?;
        ensure(other == plan, || format!("plan depends on input order: {other:?}"))?;
    }
    let primary = [plan.primary.object_a.as_str(), plan.primary.object_b.as_str()];
    ensure(primary == ["open book", "hand mirror"], || {
        format!("primary {primary:?}")
    })?;
    ensure(
        plan.secondary.len() == 1 && plan.secondary[0].object == "phoenix" && plan.secondary[0].concept == "soul",
        || format!("secondary {:?}", plan.secondary),
    )?;

    let scheme = BlendScheme::new(
        "Frame the open book inside the hand mirror.",
        "Because reading reflects the reader.",
    )
    .map_err(err)?;
    let prompt = studio.compose_multi(&mut s, &plan, &scheme).map_err(err)?;
    ensure(prompt.text == MULTI_BOOKS, || {
        format!("multi prompt differs from golden: {:?}", prompt.text)
    })?;

    let theme = s.theme.clone().ok_or("no theme")?;
    let bare = BlendPlan {
        secondary: Vec::new(),
        ..plan.clone()
    };
    let reduced = compose_multi_prompt(&bare, &scheme, &theme).map_err(err)?;
    let single = compose_image_prompt(&plan.primary, &scheme, &theme).map_err(err)?;
    ensure(reduced == single, || {
        "plan without secondary elements differs from the pair prompt".into()
    })?;
    Ok("open book + hand mirror primary, phoenix secondary, prompt matches golden".into())
}

/// Counts calls on the way to the fixture player.
pub struct CountingChat {
    inner: FixtureChat,
    pub calls: AtomicU32,
}

impl ChatProvider for CountingChat {
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}

/// Fenced, prefixed and suffixed replies parse; a reply that never parses
/// fails after exactly `max_attempts` calls.
pub fn check_oracle_robustness(image_root: &Path) -> Check {
    let chat = Arc::new(CountingChat {
        inner: FixtureChat::open(fixtures("robustness").join("oracle")).map_err(err)?,
        calls: AtomicU32::new(0),
    });
    let oracle = Oracle::new(chat.clone(), Arc::new(PlaceholderImages), ImageStore::new(image_root));
    let options = CompletionOptions::default();
    for input in ["fenced", "prefixed", "suffixed"] {
        let resp = oracle
            .complete(TemplateId::Theme, &bindings([("Input", input)]), options)
            .map_err(|e| format!("{input}: {e}"))?;
        ensure(
            matches!(&resp.parsed, Some(OracleResult::Theme(t)) if t == "Small habits shape a long life."),
            || format!("{input}: parsed {:?}", resp.parsed),
        )?;
        ensure(resp.attempts == 1, || format!("{input}: {} attempts", resp.attempts))?;
    }
    for max_attempts in [3, 1, 5] {
        chat.calls.store(0, Ordering::SeqCst);
        let result = oracle.complete(
            TemplateId::Theme,
            &bindings([("Input", "malformed")]),
            CompletionOptions {
                max_attempts,
                ..options
            },
        );
        let calls = chat.calls.load(Ordering::SeqCst);
        match result {
            Err(e @ OracleError::InvalidOracleResponse { attempts, .. }) => {
                ensure(attempts == max_attempts && calls == max_attempts, || {
                    format!("max_attempts {max_attempts}: {calls} calls, reported {attempts}")
                })?;
                ensure(Error::from(e).code() == "InvalidOracleResponse", || {
                    "wrong error code".into()
                })?;
            }
            other => return Err(format!("malformed reply gave {other:?}")),
        }
    }
    Ok("3 wrapped replies parsed, malformed reply failed after exactly max_attempts calls".into())
}
