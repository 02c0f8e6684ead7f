use metablend::blend::{compose_image_prompt, BlendPair, BlendScheme};
use metablend::mapping::Theme;
use metablend::oracle::{bindings, render_template, Bindings, TemplateId};

use super::{ensure, Check};

pub const IMAGE_HEAD: &str = "Generate an image that creatively blends";
pub const IMAGE_TAIL: &str = "The image should have a plain, solid-color background and no text or words.";

/// Golden renderings, produced by a separate renderer from the original
/// prompt listings.
pub fn golden(id: TemplateId) -> &'static str {
    match id {
        TemplateId::Theme => include_str!("../golden/theme.txt"),
        TemplateId::Objects => include_str!("../golden/objects.txt"),
        TemplateId::Attributes => include_str!("../golden/attributes.txt"),
        TemplateId::Schemes => include_str!("../golden/schemes.txt"),
        TemplateId::Image => include_str!("../golden/image.txt"),
    }
}

pub const MULTI_BOOKS: &str = include_str!("../golden/multi_books.txt");

fn pair_bindings() -> [(&'static str, &'static str); 4] {
    [
        ("Object A", "earth"),
        ("Attribute 1", "round"),
        ("Object B", "fireplace"),
        ("Attribute 2", "flames"),
    ]
}

/// The bindings each golden file was rendered with.
pub fn golden_bindings(id: TemplateId) -> Bindings {
    match id {
        TemplateId::Theme => bindings([("Input", "Global warming is melting our home")]),
        TemplateId::Objects => bindings([
            ("INPUT", "warming"),
            ("Related_Concepts", "heat, sun, fire, climate change"),
        ]),
        TemplateId::Attributes => bindings([
            ("INPUT", "earth, fireplace"),
            ("Related_Concepts", "round, blue, flames, brick"),
        ]),
        TemplateId::Schemes => {
            let mut b = bindings(pair_bindings());
            b.insert("NUM".into(), "3".into());
            b
        }
        TemplateId::Image => {
            let mut b = bindings(pair_bindings());
            b.insert("selectedScheme".into(), "Wrap the globe in flickering flames.".into());
            b.insert("METAPHORICAL THEME".into(), "planet in danger".into());
            b
        }
    }
}

fn first_difference(a: &str, b: &str) -> String {
    let at = a
        .bytes()
        .zip(b.bytes())
        .position(|(x, y)| x != y)
        .unwrap_or(a.len().min(b.len()));
    let from = at.saturating_sub(20);
    format!(
        "differs at byte {at}: {:?} vs {:?}",
        a.get(from..(at + 20).min(a.len())).unwrap_or(""),
        b.get(from..(at + 20).min(b.len())).unwrap_or("")
    )
}

/// All five templates render to their golden bytes, and composed image
/// prompts open and close with the fixed sentences.
pub fn check_templates() -> Check {
    for id in TemplateId::ALL {
        let text = render_template(id, &golden_bindings(id)).map_err(|e| format!("{id}: {e}"))?;
        ensure(text == golden(id), || {
            format!("{id}: {}", first_difference(&text, golden(id)))
        })?;
    }

    let theme = Theme {
        sentence: "Planet in danger.".into(),
    };
    let pair = BlendPair::new("earth", "round", "fireplace", "flames");
    for scheme in ["Wrap the globe in flickering flames.", "Stack logs into a sphere", "x"] {
        let scheme = BlendScheme::new(scheme, "Because both glow.").map_err(|e| e.to_string())?;
        let prompt = compose_image_prompt(&pair, &scheme, &theme).map_err(|e| e.to_string())?;
        ensure(prompt.text.starts_with(IMAGE_HEAD), || {
            format!("image prompt opens with {:?}", &prompt.text[..40])
        })?;
        ensure(prompt.text.ends_with(IMAGE_TAIL), || {
            "image prompt does not end with the background sentence".into()
        })?;
    }
    Ok("5 templates match golden bytes".into())
}
