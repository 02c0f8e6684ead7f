//! The five prompt scripts and their renderer.
//!
//! The chat scripts are stored exactly as written, in Python f-string form:
//! `{Name}` is a placeholder, `{{` and `}}` are literal braces. The schemes
//! script also spells its count placeholder as `(NUM)`; only the `NUM` part
//! is replaced. The image script is a `+` concatenation of quoted strings and
//! a bare `{selectedScheme}`; it renders by concatenating the parts as-is.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::OracleError;

pub type Bindings = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateId {
    Theme,
    Objects,
    Attributes,
    Schemes,
    Image,
}

impl TemplateId {
    pub const ALL: [TemplateId; 5] = [
        TemplateId::Theme,
        TemplateId::Objects,
        TemplateId::Attributes,
        TemplateId::Schemes,
        TemplateId::Image,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateId::Theme => "theme",
            TemplateId::Objects => "objects",
            TemplateId::Attributes => "attributes",
            TemplateId::Schemes => "schemes",
            TemplateId::Image => "image",
        }
    }

    pub fn source(&self) -> &'static str {
        match self {
            TemplateId::Theme => include_str!("../../templates/theme.txt"),
            TemplateId::Objects => include_str!("../../templates/objects.txt"),
            TemplateId::Attributes => include_str!("../../templates/attributes.txt"),
            TemplateId::Schemes => include_str!("../../templates/schemes.txt"),
            TemplateId::Image => include_str!("../../templates/image.txt"),
        }
    }

    pub fn template(&self) -> PromptTemplate {
        PromptTemplate { id: *self }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| OracleError::UnknownTemplate(s.to_string()))
    }
}

pub const NUM_PLACEHOLDER: &str = "NUM";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionKind {
    SystemSetup,
    TaskDefinition,
    UserInput,
    PointsToNote,
    TaskExecution,
    ResultReturn,
}

impl SectionKind {
    fn from_label(label: &str) -> Option<Self> {
        Some(match label {
            "system_setup" => SectionKind::SystemSetup,
            "task_definition" => SectionKind::TaskDefinition,
            "user_input" => SectionKind::UserInput,
            "Points to Note" => SectionKind::PointsToNote,
            "task_execution" => SectionKind::TaskExecution,
            "result_return" => SectionKind::ResultReturn,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub kind: SectionKind,
    /// Text between the triple quotes, untouched.
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
}

enum Piece<'a> {
    Text(&'a str),
    LBrace,
    RBrace,
    Slot(&'a str),
    Num,
}

/// Tokenizes f-string text into literal runs, escaped braces and slots.
fn pieces<'a>(src: &'a str) -> Vec<Piece<'a>> {
    let mut out = Vec::new();
    let mut rest = src;
    let mut literal_start = 0usize;
    let mut pos = 0usize;
    let flush = |out: &mut Vec<Piece<'a>>, from: usize, to: usize| {
        if to > from {
            out.push(Piece::Text(&src[from..to]));
        }
    };
    while !rest.is_empty() {
        if rest.starts_with("{{") {
            flush(&mut out, literal_start, pos);
            out.push(Piece::LBrace);
            pos += 2;
            literal_start = pos;
        } else if rest.starts_with("}}") {
            flush(&mut out, literal_start, pos);
            out.push(Piece::RBrace);
            pos += 2;
            literal_start = pos;
        } else if rest.starts_with('{') {
            match rest.find('}') {
                Some(close) if !rest[1..close].contains('{') && close > 1 => {
                    flush(&mut out, literal_start, pos);
                    out.push(Piece::Slot(&rest[1..close]));
                    pos += close + 1;
                    literal_start = pos;
                }
                _ => pos += 1,
            }
        } else if rest.starts_with("(NUM)") {
            flush(&mut out, literal_start, pos + 1);
            out.push(Piece::Num);
            pos += 4;
            literal_start = pos;
        } else {
            pos += rest.chars().next().map(char::len_utf8).unwrap_or(1);
        }
        rest = &src[pos..];
    }
    flush(&mut out, literal_start, pos);
    out
}

fn render_fstring(src: &str, bindings: &Bindings) -> Result<String, OracleError> {
    let mut out = String::with_capacity(src.len() + 256);
    for piece in pieces(src) {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::LBrace => out.push('{'),
            Piece::RBrace => out.push('}'),
            Piece::Slot(name) => out.push_str(
                bindings
                    .get(name)
                    .ok_or_else(|| OracleError::MissingBinding(name.to_string()))?,
            ),
            Piece::Num => out.push_str(
                bindings
                    .get(NUM_PLACEHOLDER)
                    .ok_or_else(|| OracleError::MissingBinding(NUM_PLACEHOLDER.to_string()))?,
            ),
        }
    }
    Ok(out)
}

/// One operand of the image script's `+` chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImagePart {
    Quoted(String),
    Bare(String),
}

fn image_parts(src: &str) -> Vec<ImagePart> {
    let src = src.trim();
    let mut parts = Vec::new();
    let mut chars = src.char_indices();
    while let Some((i, c)) = chars.next() {
        match c {
            '"' => {
                let start = i + 1;
                let mut end = src.len();
                for (j, d) in chars.by_ref() {
                    if d == '"' {
                        end = j;
                        break;
                    }
                }
                parts.push(ImagePart::Quoted(src[start..end].to_string()));
            }
            '{' => {
                let start = i;
                let mut end = src.len();
                for (j, d) in chars.by_ref() {
                    if d == '}' {
                        end = j + 1;
                        break;
                    }
                }
                parts.push(ImagePart::Bare(src[start..end].to_string()));
            }
            _ => {}
        }
    }
    parts
}

impl PromptTemplate {
    pub fn source(&self) -> &'static str {
        self.id.source()
    }

    /// Placeholder names used by this template.
    pub fn placeholders(&self) -> BTreeSet<String> {
        pieces(self.source())
            .into_iter()
            .filter_map(|p| match p {
                Piece::Slot(name) => Some(name.to_string()),
                Piece::Num => Some(NUM_PLACEHOLDER.to_string()),
                _ => None,
            })
            .collect()
    }

    fn check_bindings(&self, bindings: &Bindings) -> Result<(), OracleError> {
        match self.placeholders().into_iter().find(|p| !bindings.contains_key(p)) {
            Some(missing) => Err(OracleError::MissingBinding(missing)),
            None => Ok(()),
        }
    }

    /// Labeled sections of a chat template, in order. Empty for the image
    /// template.
    pub fn sections(&self) -> Vec<Section> {
        if self.id == TemplateId::Image {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut lines = self.source().lines();
        while let Some(line) = lines.next() {
            let label = line.trim();
            let Some(kind) = label.strip_suffix(':').and_then(SectionKind::from_label) else {
                continue;
            };
            let mut body = Vec::new();
            let mut open = false;
            for l in lines.by_ref() {
                if l.trim() == "\"\"\"" {
                    if open {
                        break;
                    }
                    open = true;
                } else if l.trim_start().starts_with("\"\"\"") && !open {
                    open = true;
                } else if open {
                    body.push(l);
                }
            }
            out.push(Section {
                kind,
                body: body.join("\n"),
            });
        }
        out
    }

    /// Operands of the image script, in order.
    pub fn image_parts(&self) -> Vec<ImagePart> {
        if self.id == TemplateId::Image {
            image_parts(self.source())
        } else {
            Vec::new()
        }
    }

    /// Renders each image operand separately, preserving their order.
    pub fn render_image_parts(&self, bindings: &Bindings) -> Result<Vec<String>, OracleError> {
        self.check_bindings(bindings)?;
        self.image_parts()
            .iter()
            .map(|part| match part {
                ImagePart::Quoted(text) => render_fstring(text, bindings),
                ImagePart::Bare(slot) => render_fstring(slot, bindings),
            })
            .collect()
    }

    pub fn render(&self, bindings: &Bindings) -> Result<String, OracleError> {
        self.check_bindings(bindings)?;
        match self.id {
            TemplateId::Image => Ok(self.render_image_parts(bindings)?.concat()),
            _ => render_fstring(self.source(), bindings),
        }
    }
}

/// Renders template `id` with `bindings`. Every placeholder must be bound;
/// extra bindings are ignored.
pub fn render_template(id: TemplateId, bindings: &Bindings) -> Result<String, OracleError> {
    id.template().render(bindings)
}

/// Builds a [`Bindings`] map from pairs.
pub fn bindings<K: Into<String>, V: Into<String>>(pairs: impl IntoIterator<Item = (K, V)>) -> Bindings {
    pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}
