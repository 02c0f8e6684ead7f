//! Pulling the `{"result": ...}` payload out of a completion.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{OracleError, TemplateId};

/// Expected shape of a template's result block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultSchema {
    /// `{"result": "<sentence>"}`
    Theme,
    /// `{"result": [[object, reason] x5]}`
    Objects,
    /// `{"result": [[object, attr x5] xN]}`, N pinned when `rows` is set.
    Attributes { rows: Option<usize> },
    /// `{"result": [[scheme, reason] xN]}`, N pinned when `count` is set.
    Schemes { count: Option<usize> },
}

pub const OBJECTS_PER_BATCH: usize = 5;
pub const ATTRIBUTES_PER_OBJECT: usize = 5;

impl ResultSchema {
    pub fn for_template(id: TemplateId) -> Option<Self> {
        match id {
            TemplateId::Theme => Some(ResultSchema::Theme),
            TemplateId::Objects => Some(ResultSchema::Objects),
            TemplateId::Attributes => Some(ResultSchema::Attributes { rows: None }),
            TemplateId::Schemes => Some(ResultSchema::Schemes { count: None }),
            TemplateId::Image => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeRow {
    pub object: String,
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "result", rename_all = "lowercase")]
pub enum OracleResult {
    Theme(String),
    Objects(Vec<Suggestion>),
    Attributes(Vec<AttributeRow>),
    Schemes(Vec<Suggestion>),
}

/// Byte ranges of balanced `{...}` literals, scanning left to right and
/// skipping over string contents.
fn balanced_objects(text: &str) -> impl Iterator<Item = &str> + '_ {
    let bytes = text.as_bytes();
    let mut from = 0;
    std::iter::from_fn(move || {
        while from < bytes.len() {
            let start = from + text[from..].find('{')?;
            let mut depth = 0usize;
            let mut in_string = false;
            let mut escaped = false;
            let mut end = None;
            for (i, &b) in bytes.iter().enumerate().skip(start) {
                if in_string {
                    match b {
                        _ if escaped => escaped = false,
                        b'\\' => escaped = true,
                        b'"' => in_string = false,
                        _ => {}
                    }
                    continue;
                }
                match b {
                    b'"' => in_string = true,
                    b'{' => depth += 1,
                    b'}' => {
                        depth -= 1;
                        if depth == 0 {
                            end = Some(i + 1);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            match end {
                Some(end) => {
                    from = end;
                    return Some(&text[start..end]);
                }
                None => from = start + 1,
            }
        }
        None
    })
}

/// Finds the first balanced JSON object in `text` that parses.
pub fn find_json_object(text: &str) -> Result<Value, OracleError> {
    balanced_objects(text)
        .find_map(|candidate| match serde_json::from_str::<Value>(candidate) {
            Ok(v @ Value::Object(_)) => Some(v),
            _ => None,
        })
        .ok_or_else(|| OracleError::ParseFailure(format!("no JSON object found in {} bytes of output", text.len())))
}

/// Extracts and validates a template's result payload using the template's
/// default schema.
pub fn extract_json_result(text: &str, schema_id: TemplateId) -> Result<OracleResult, OracleError> {
    let schema = ResultSchema::for_template(schema_id)
        .ok_or_else(|| OracleError::SchemaMismatch(format!("template {schema_id} has no result block")))?;
    extract_with_schema(text, schema)
}

pub fn extract_with_schema(text: &str, schema: ResultSchema) -> Result<OracleResult, OracleError> {
    let value = find_json_object(text)?;
    validate(&value, schema)
}

fn mismatch(detail: impl Into<String>) -> OracleError {
    OracleError::SchemaMismatch(detail.into())
}

/// Trims and drops the `<...>` wrapper some completions copy from the
/// format demonstration.
fn clean(s: &str) -> String {
    let t = s.trim();
    let t = t.strip_prefix('<').and_then(|x| x.strip_suffix('>')).unwrap_or(t);
    t.trim().to_string()
}

fn string_row(row: &Value, width: usize, index: usize) -> Result<Vec<String>, OracleError> {
    let items = row
        .as_array()
        .ok_or_else(|| mismatch(format!("row {index} is not an array")))?;
    if items.len() != width {
        return Err(mismatch(format!(
            "row {index} has {} elements, expected {width}",
            items.len()
        )));
    }
    items
        .iter()
        .map(|v| match v.as_str().map(clean) {
            Some(s) if !s.is_empty() => Ok(s),
            _ => Err(mismatch(format!("row {index} holds a non-string or empty element"))),
        })
        .collect()
}

fn rows(value: &Value, width: usize, expected: Option<usize>) -> Result<Vec<Vec<String>>, OracleError> {
    let list = value.as_array().ok_or_else(|| mismatch("\"result\" is not an array"))?;
    if list.is_empty() {
        return Err(mismatch("\"result\" is empty"));
    }
    if let Some(n) = expected {
        if list.len() != n {
            return Err(mismatch(format!("expected {n} rows, got {}", list.len())));
        }
    }
    list.iter()
        .enumerate()
        .map(|(i, row)| string_row(row, width, i))
        .collect()
}

pub fn validate(value: &Value, schema: ResultSchema) -> Result<OracleResult, OracleError> {
    let result = value.get("result").ok_or_else(|| mismatch("missing \"result\" key"))?;
    let pairs = |rows: Vec<Vec<String>>| {
        rows.into_iter()
            .map(|mut r| Suggestion {
                reason: r.pop().unwrap_or_default(),
                name: r.pop().unwrap_or_default(),
            })
            .collect::<Vec<_>>()
    };
    Ok(match schema {
        ResultSchema::Theme => match result.as_str().map(clean) {
            Some(s) if !s.is_empty() => OracleResult::Theme(s),
            _ => return Err(mismatch("\"result\" is not a non-empty string")),
        },
        ResultSchema::Objects => OracleResult::Objects(pairs(rows(result, 2, Some(OBJECTS_PER_BATCH))?)),
        ResultSchema::Schemes { count } => OracleResult::Schemes(pairs(rows(result, 2, count)?)),
        ResultSchema::Attributes { rows: n } => OracleResult::Attributes(
            rows(result, 1 + ATTRIBUTES_PER_OBJECT, n)?
                .into_iter()
                .map(|mut r| {
                    let attributes = r.split_off(1);
                    AttributeRow {
                        object: r.pop().unwrap_or_default(),
                        attributes,
                    }
                })
                .collect(),
        ),
    })
}
