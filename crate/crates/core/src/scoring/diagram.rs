//! Sankey-style analysis diagrams.
//!
//! One diagram links every left item to every right item. Link width is the
//! min-max normalized cosine similarity of the two items; link color is the
//! quantile-normalized mean sentiment, interpolated between the palette's
//! negative and positive endpoints. Each diagram is normalized on its own.

use serde::{Deserialize, Serialize};

use super::embed::Embedder;
use super::math::{minmax_normalize, pair_mean, quantile_normalize};
use super::sentiment::{sentiment, SentimentProvider, SentimentScore};
use super::ScoringError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagramKind {
    Objects,
    Attributes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub negative: String,
    pub positive: String,
}

impl Palette {
    /// Purple to orange for objects, green to gold for attributes.
    pub fn for_kind(kind: DiagramKind) -> Self {
        let (negative, positive) = match kind {
            DiagramKind::Objects => ("#7B61C4", "#E8963C"),
            DiagramKind::Attributes => ("#4CAF7D", "#D9A521"),
        };
        Palette {
            negative: negative.into(),
            positive: positive.into(),
        }
    }

    /// Linear RGB interpolation at `t` in `[0, 1]`.
    pub fn color_at(&self, t: f64) -> String {
        let a = parse_hex(&self.negative);
        let b = parse_hex(&self.positive);
        let t = t.clamp(0.0, 1.0);
        let mix = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * t).round() as u8;
        format!("#{:02X}{:02X}{:02X}", mix(a[0], b[0]), mix(a[1], b[1]), mix(a[2], b[2]))
    }
}

fn parse_hex(s: &str) -> [u8; 3] {
    let h = s.trim_start_matches('#');
    let byte = |i: usize| u8::from_str_radix(h.get(i..i + 2).unwrap_or("00"), 16).unwrap_or(0);
    [byte(0), byte(2), byte(4)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub label: String,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub source: String,
    pub target: String,
    pub raw_sim: f64,
    /// Normalized similarity.
    pub width: f64,
    pub raw_sent: f64,
    pub norm_sent: f64,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub a: String,
    pub b: String,
    pub raw_sim: f64,
    pub norm_sim: f64,
    pub raw_sent: f64,
    pub norm_sent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisDiagram {
    pub kind: DiagramKind,
    /// For attribute diagrams, the object pair whose attributes are shown.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<[String; 2]>,
    pub palette: Palette,
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
}

impl AnalysisDiagram {
    fn labels(&self, side: Side) -> Vec<String> {
        self.nodes
            .iter()
            .filter(|n| n.side == side)
            .map(|n| n.label.clone())
            .collect()
    }

    pub fn left(&self) -> Vec<String> {
        self.labels(Side::Left)
    }

    pub fn right(&self) -> Vec<String> {
        self.labels(Side::Right)
    }

    fn label_of(&self, id: &str) -> &str {
        self.nodes
            .iter()
            .find(|n| n.id == id)
            .map(|n| n.label.as_str())
            .unwrap_or("")
    }

    pub fn pair_scores(&self) -> Vec<PairScore> {
        self.links
            .iter()
            .map(|l| PairScore {
                a: self.label_of(&l.source).to_string(),
                b: self.label_of(&l.target).to_string(),
                raw_sim: l.raw_sim,
                norm_sim: l.width,
                raw_sent: l.raw_sent,
                norm_sent: l.norm_sent,
            })
            .collect()
    }

    /// Score for the pair `(a, b)`, matched case-insensitively in either
    /// orientation.
    pub fn pair(&self, a: &str, b: &str) -> Option<PairScore> {
        let (a, b) = (a.to_lowercase(), b.to_lowercase());
        let scores = self.pair_scores();
        let forward = scores
            .iter()
            .position(|p| p.a.to_lowercase() == a && p.b.to_lowercase() == b);
        let index = forward.or_else(|| {
            scores
                .iter()
                .position(|p| p.a.to_lowercase() == b && p.b.to_lowercase() == a)
        })?;
        Some(scores[index].clone())
    }

    /// The widest link; ties go to the higher sentiment, then to the
    /// lexicographically smaller `(a, b)`.
    pub fn strongest_pair(&self) -> Option<PairScore> {
        self.pair_scores().into_iter().min_by(|x, y| {
            y.norm_sim
                .total_cmp(&x.norm_sim)
                .then_with(|| y.norm_sent.total_cmp(&x.norm_sent))
                .then_with(|| (x.a.as_str(), x.b.as_str()).cmp(&(y.a.as_str(), y.b.as_str())))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagram serializes")
    }
}

/// Assembles a diagram from raw inputs. `raw_sims` is row-major over
/// `left x right`.
pub fn assemble_diagram(
    kind: DiagramKind,
    left: &[String],
    right: &[String],
    raw_sims: &[f64],
    left_sent: &[SentimentScore],
    right_sent: &[SentimentScore],
) -> Result<AnalysisDiagram, ScoringError> {
    if left.is_empty() || right.is_empty() {
        return Err(ScoringError::EmptyItems);
    }
    assert_eq!(raw_sims.len(), left.len() * right.len(), "similarity matrix shape");
    assert_eq!(left_sent.len(), left.len());
    assert_eq!(right_sent.len(), right.len());

    let raw_sent: Vec<f64> = left_sent
        .iter()
        .flat_map(|l| right_sent.iter().map(move |r| pair_mean(l.score, r.score)))
        .collect();
    let widths = minmax_normalize(raw_sims);
    let colors = quantile_normalize(&raw_sent);
    let palette = Palette::for_kind(kind);

    let nodes = left
        .iter()
        .enumerate()
        .map(|(i, l)| Node {
            id: format!("L{i}"),
            label: l.clone(),
            side: Side::Left,
        })
        .chain(right.iter().enumerate().map(|(j, r)| Node {
            id: format!("R{j}"),
            label: r.clone(),
            side: Side::Right,
        }))
        .collect();
    let links = (0..left.len())
        .flat_map(|i| (0..right.len()).map(move |j| (i, j)))
        .enumerate()
        .map(|(k, (i, j))| Link {
            source: format!("L{i}"),
            target: format!("R{j}"),
            raw_sim: raw_sims[k],
            width: widths[k],
            raw_sent: raw_sent[k],
            norm_sent: colors[k],
            color: palette.color_at(colors[k]),
        })
        .collect();
    Ok(AnalysisDiagram {
        kind,
        subject: None,
        palette,
        nodes,
        links,
    })
}

/// Embeds and classifies every item, then assembles the diagram.
pub fn build_diagram(
    kind: DiagramKind,
    left: &[String],
    right: &[String],
    embedder: &Embedder,
    classifier: &dyn SentimentProvider,
) -> Result<AnalysisDiagram, ScoringError> {
    if left.is_empty() || right.is_empty() {
        return Err(ScoringError::EmptyItems);
    }
    let lv = left.iter().map(|t| embedder.embed(t)).collect::<Result<Vec<_>, _>>()?;
    let rv = right.iter().map(|t| embedder.embed(t)).collect::<Result<Vec<_>, _>>()?;
    let mut sims = Vec::with_capacity(left.len() * right.len());
    for l in &lv {
        for r in &rv {
            sims.push(super::embed::cosine_similarity(l, r)?);
        }
    }
    let ls = left
        .iter()
        .map(|t| sentiment(classifier, t))
        .collect::<Result<Vec<_>, _>>()?;
    let rs = right
        .iter()
        .map(|t| sentiment(classifier, t))
        .collect::<Result<Vec<_>, _>>()?;
    assemble_diagram(kind, left, right, &sims, &ls, &rs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::sentiment::SentimentLabel;

    fn pos(c: f64) -> SentimentScore {
        SentimentScore::from_label(SentimentLabel::Positive, c).unwrap()
    }

    fn items(n: usize, prefix: &str) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn five_by_five() {
        let left = items(5, "a");
        let right = items(5, "b");
        let sims: Vec<f64> = (0..25).map(|k| (k as f64 * 0.37).sin()).collect();
        let sent: Vec<SentimentScore> = (0..5).map(|i| pos(0.5 + i as f64 / 10.0)).collect();
        let d = assemble_diagram(DiagramKind::Objects, &left, &right, &sims, &sent, &sent).unwrap();
        assert_eq!(d.links.len(), 25);
        let widest = d.links.iter().map(|l| l.width).fold(f64::MIN, f64::max);
        assert_eq!(widest, 1.0);
        let best = d.strongest_pair().unwrap();
        assert_eq!(best.norm_sim, 1.0);
        let colors: std::collections::BTreeSet<_> = d.links.iter().map(|l| l.color.clone()).collect();
        assert!(colors.contains("#7B61C4") && colors.contains("#E8963C"));
    }

    #[test]
    fn palette_endpoints() {
        let p = Palette::for_kind(DiagramKind::Attributes);
        assert_eq!(p.color_at(0.0), "#4CAF7D");
        assert_eq!(p.color_at(1.0), "#D9A521");
    }

    #[test]
    fn pair_lookup_either_way() {
        let d = assemble_diagram(
            DiagramKind::Objects,
            &["Earth".to_string()],
            &["fireplace".to_string()],
            &[0.4],
            &[pos(0.6)],
            &[pos(0.8)],
        )
        .unwrap();
        assert!(d.pair("earth", "Fireplace").is_some());
        assert!(d.pair("fireplace", "earth").is_some());
        assert!(d.pair("earth", "moon").is_none());
        // single link: degenerate normalizations
        assert_eq!(d.links[0].width, 0.5);
        assert_eq!(d.links[0].norm_sent, 0.5);
    }

    #[test]
    fn empty_sides_rejected() {
        let r = assemble_diagram(DiagramKind::Objects, &[], &["x".into()], &[], &[], &[pos(0.5)]);
        assert_eq!(r, Err(ScoringError::EmptyItems));
    }
}
