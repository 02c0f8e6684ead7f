use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::ScoringError;
use crate::expression::split_words;
use crate::http::Transport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Positive,
    Negative,
}

/// Classifier output mapped onto `[0, 1]`: a positive label scores its
/// confidence `C`, a negative label scores `1 - C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub label: SentimentLabel,
    pub confidence: f64,
    pub score: f64,
}

impl SentimentScore {
    pub fn from_label(label: SentimentLabel, confidence: f64) -> Result<Self, ScoringError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(ScoringError::InvalidConfidence(confidence));
        }
        let score = match label {
            SentimentLabel::Positive => confidence,
            SentimentLabel::Negative => 1.0 - confidence,
        };
        Ok(SentimentScore {
            label,
            confidence,
            score,
        })
    }
}

pub trait SentimentProvider: Send + Sync {
    fn classify(&self, text: &str) -> Result<(SentimentLabel, f64), ScoringError>;
}

/// Classifies `text` and maps the result to a [`SentimentScore`].
pub fn sentiment(provider: &dyn SentimentProvider, text: &str) -> Result<SentimentScore, ScoringError> {
    if text.trim().is_empty() {
        return Err(ScoringError::EmptyText);
    }
    let (label, confidence) = provider.classify(text)?;
    SentimentScore::from_label(label, confidence)
}

/// Mean of the two items' scores.
pub fn pair_sentiment(a: &SentimentScore, b: &SentimentScore) -> f64 {
    super::math::pair_mean(a.score, b.score)
}

/// Bundled valence lexicon. The mean valence `v` of known words (in
/// `[-1, 1]`) becomes label `positive` when `v >= 0`, with confidence
/// `0.5 + |v| / 2`. Text with no known words is neutral: `(positive, 0.5)`.
#[derive(Debug, Clone)]
pub struct LexiconSentiment {
    valences: HashMap<String, f64>,
}

impl Default for LexiconSentiment {
    fn default() -> Self {
        Self::bundled()
    }
}

impl LexiconSentiment {
    pub fn bundled() -> Self {
        Self::parse(include_str!("../../resources/valence.tsv"))
    }

    /// Parses `word<TAB>valence` lines; `#` starts a comment.
    pub fn parse(src: &str) -> Self {
        let valences = src
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .filter_map(|l| {
                let (w, v) = l.split_once('\t')?;
                Some((w.trim().to_lowercase(), v.trim().parse::<f64>().ok()?.clamp(-1.0, 1.0)))
            })
            .collect();
        LexiconSentiment { valences }
    }

    fn valence(&self, word: &str) -> Option<f64> {
        let w = word.to_lowercase();
        self.valences
            .get(&w)
            .or_else(|| w.strip_suffix('s').and_then(|s| self.valences.get(s)))
            .copied()
    }
}

impl SentimentProvider for LexiconSentiment {
    fn classify(&self, text: &str) -> Result<(SentimentLabel, f64), ScoringError> {
        let known: Vec<f64> = split_words(text).iter().filter_map(|(w, _)| self.valence(w)).collect();
        let v = if known.is_empty() {
            0.0
        } else {
            known.iter().sum::<f64>() / known.len() as f64
        };
        let label = if v >= 0.0 {
            SentimentLabel::Positive
        } else {
            SentimentLabel::Negative
        };
        Ok((label, 0.5 + v.abs() / 2.0))
    }
}

/// Hosted text-classification endpoint: `POST {url}` with `{"inputs": text}`
/// returning `[[{"label", "score"}, ...]]` or `[{"label", "score"}, ...]`.
pub struct HttpSentiment {
    transport: Arc<dyn Transport>,
    url: String,
    api_key: Option<String>,
}

impl HttpSentiment {
    pub fn new(transport: Arc<dyn Transport>, url: &str, api_key: Option<String>) -> Self {
        HttpSentiment {
            transport,
            url: url.to_string(),
            api_key,
        }
    }
}

impl SentimentProvider for HttpSentiment {
    fn classify(&self, text: &str) -> Result<(SentimentLabel, f64), ScoringError> {
        let auth = self.api_key.as_ref().map(|k| format!("Bearer {k}"));
        let headers: Vec<(&str, &str)> = auth.iter().map(|a| ("Authorization", a.as_str())).collect();
        let resp = self
            .transport
            .post_json(&self.url, &headers, &json!({"inputs": text}))
            .map_err(|e| ScoringError::SentimentUnavailable(e.to_string()))?;
        if !resp.is_success() {
            return Err(ScoringError::SentimentUnavailable(format!("HTTP {}", resp.status)));
        }
        let value: Value =
            serde_json::from_slice(&resp.body).map_err(|e| ScoringError::SentimentUnavailable(e.to_string()))?;
        let list = match value.pointer("/0/0") {
            Some(_) => value.get(0).cloned().unwrap_or(Value::Null),
            None => value,
        };
        let best = list
            .as_array()
            .into_iter()
            .flatten()
            .filter_map(|item| {
                Some((
                    item.get("label")?.as_str()?.to_uppercase(),
                    item.get("score")?.as_f64()?,
                ))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or_else(|| ScoringError::SentimentUnavailable("no label in response".into()))?;
        let label = match best.0.as_str() {
            "POSITIVE" | "POS" | "LABEL_1" => SentimentLabel::Positive,
            "NEGATIVE" | "NEG" | "LABEL_0" => SentimentLabel::Negative,
            other => return Err(ScoringError::SentimentUnavailable(format!("unexpected label {other}"))),
        };
        Ok((label, best.1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(SentimentLabel, f64);
    impl SentimentProvider for Fixed {
        fn classify(&self, _: &str) -> Result<(SentimentLabel, f64), ScoringError> {
            Ok((self.0, self.1))
        }
    }

    #[test]
    fn label_mapping() {
        assert_eq!(
            sentiment(&Fixed(SentimentLabel::Positive, 0.98), "x").unwrap().score,
            0.98
        );
        assert!((sentiment(&Fixed(SentimentLabel::Negative, 0.90), "x").unwrap().score - 0.10).abs() < 1e-12);
        assert_eq!(
            sentiment(&Fixed(SentimentLabel::Positive, 0.5), "x").unwrap().score,
            0.5
        );
        assert_eq!(
            sentiment(&Fixed(SentimentLabel::Negative, 0.5), "x").unwrap().score,
            0.5
        );
        assert_eq!(
            sentiment(&Fixed(SentimentLabel::Positive, 0.5), " "),
            Err(ScoringError::EmptyText)
        );
        assert_eq!(
            SentimentScore::from_label(SentimentLabel::Positive, 1.2),
            Err(ScoringError::InvalidConfidence(1.2))
        );
    }

    #[test]
    fn lexicon_polarity() {
        let lex = LexiconSentiment::bundled();
        let warm = sentiment(&lex, "warm cozy fireplace").unwrap();
        assert_eq!(warm.label, SentimentLabel::Positive);
        assert!(warm.score > 0.5);
        let death = sentiment(&lex, "death").unwrap();
        assert_eq!(death.label, SentimentLabel::Negative);
        assert!(death.score < 0.5);
        let neutral = sentiment(&lex, "qwzx").unwrap();
        assert_eq!(neutral.score, 0.5);
    }
}
