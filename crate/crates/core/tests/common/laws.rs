use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use metablend::scoring::diagram::assemble_diagram;
use metablend::scoring::math::{cosine, minmax_normalize, pair_mean, quantile_normalize};
use metablend::scoring::{DiagramKind, SentimentLabel, SentimentScore};

use super::{ensure, Check};

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S>(
    name: &str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn nonzero_pair(max_dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..=max_dim)
        .prop_flat_map(|d| (vec(-100.0f64..100.0, d), vec(-100.0f64..100.0, d)))
        .prop_filter("zero vector", |(u, v)| {
            u.iter().any(|x| *x != 0.0) && v.iter().any(|x| *x != 0.0)
        })
}

pub fn cosine_laws(cases: u32) -> Result<(), String> {
    run("cosine", cases, (nonzero_pair(16), 0.01f64..100.0), |((u, v), k)| {
        let c = cosine(&u, &v).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c), "out of range: {c}");
        prop_assert_eq!(c, cosine(&v, &u).unwrap());
        let scaled: Vec<f64> = u.iter().map(|x| x * k).collect();
        let cs = cosine(&scaled, &v).unwrap();
        prop_assert!((c - cs).abs() <= 1e-9, "scale {k}: {c} vs {cs}");
        prop_assert!((cosine(&u, &u).unwrap() - 1.0).abs() <= 1e-12);
        Ok(())
    })
}

pub fn minmax_laws(cases: u32) -> Result<(), String> {
    // Draw from a small set as well so ties and constant inputs show up.
    let values = prop_oneof![
        vec(-1e6f64..1e6, 1..32),
        vec(prop::sample::select(vec![-1.0, 0.0, 0.25, 3.0]), 1..12)
    ];
    run("minmax", cases, values, |xs| {
        let out = minmax_normalize(&xs);
        prop_assert_eq!(out.len(), xs.len());
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if min == max {
            prop_assert!(out.iter().all(|y| *y == 0.5), "degenerate input gave {out:?}");
            return Ok(());
        }
        for i in 0..xs.len() {
            prop_assert!((0.0..=1.0).contains(&out[i]));
            if xs[i] == min {
                prop_assert_eq!(out[i], 0.0);
            }
            if xs[i] == max {
                prop_assert_eq!(out[i], 1.0);
            }
            for j in 0..xs.len() {
                if xs[i] < xs[j] {
                    prop_assert!(out[i] <= out[j], "order broken at {i},{j}");
                }
                if xs[i] == xs[j] {
                    prop_assert_eq!(out[i], out[j]);
                }
            }
        }
        Ok(())
    })
}

/// Quantile rank by counting: an element with `less` smaller values and
/// `equal` copies (itself included) sits on grid positions
/// `less ..= less + equal - 1`, and gets their mean over `n - 1`.
pub fn rank_oracle(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n == 1 {
        return vec![0.5];
    }
    xs.iter()
        .map(|x| {
            let less = xs.iter().filter(|y| *y < x).count() as f64;
            let equal = xs.iter().filter(|y| *y == x).count() as f64;
            (less + (equal - 1.0) / 2.0) / (n - 1) as f64
        })
        .collect()
}

fn agrees(xs: &[f64]) -> Result<(), String> {
    let got = quantile_normalize(xs);
    let want = rank_oracle(xs);
    ensure(
        got.len() == want.len() && got.iter().zip(&want).all(|(g, w)| (g - w).abs() <= 1e-12),
        || format!("quantile {xs:?}: got {got:?}, oracle {want:?}"),
    )
}

/// Calls `f` with every weak ordering of `n` items, as a level per item.
/// Each set partition (restricted growth string) is combined with every
/// ordering of its blocks.
pub fn for_each_tie_pattern(n: usize, f: &mut dyn FnMut(&[usize])) {
    fn partitions(i: usize, n: usize, blocks: usize, rgs: &mut Vec<usize>, f: &mut dyn FnMut(&[usize], usize)) {
        if i == n {
            f(rgs, blocks);
            return;
        }
        for b in 0..=blocks {
            rgs.push(b);
            partitions(i + 1, n, blocks.max(b + 1), rgs, f);
            rgs.pop();
        }
    }
    fn permutations(k: usize, perm: &mut Vec<usize>, used: &mut Vec<bool>, f: &mut dyn FnMut(&[usize])) {
        if perm.len() == k {
            f(perm);
            return;
        }
        for b in 0..k {
            if !used[b] {
                used[b] = true;
                perm.push(b);
                permutations(k, perm, used, f);
                perm.pop();
                used[b] = false;
            }
        }
    }
    partitions(0, n, 0, &mut Vec::new(), &mut |rgs, k| {
        permutations(k, &mut Vec::new(), &mut vec![false; k], &mut |order| {
            let levels: Vec<usize> = rgs.iter().map(|&b| order[b]).collect();
            f(&levels);
        });
    });
}

/// Number of weak orderings of `n` items.
pub fn fubini(n: usize) -> usize {
    // a(n) = sum_k C(n, k) a(n - k)
    let mut a = vec![1usize];
    for m in 1..=n {
        let mut c = 1usize;
        let mut total = 0;
        for k in 1..=m {
            c = c * (m - k + 1) / k;
            total += c * a[m - k];
        }
        a.push(total);
    }
    a[n]
}

/// Every tie pattern for `n <= max_n`, each mapped to spread-out values.
pub fn quantile_exhaustive(max_n: usize) -> Result<usize, String> {
    let mut count = 0;
    let mut failure = None;
    for n in 1..=max_n {
        let before = count;
        for_each_tie_pattern(n, &mut |levels| {
            if failure.is_some() {
                return;
            }
            count += 1;
            let xs: Vec<f64> = levels.iter().map(|&l| l as f64 * 0.37 - 1.1).collect();
            if let Err(e) = agrees(&xs) {
                failure = Some(e);
            }
        });
        if let Some(e) = failure.take() {
            return Err(e);
        }
        ensure(count - before == fubini(n), || {
            format!("n={n}: {} patterns, expected {}", count - before, fubini(n))
        })?;
    }
    Ok(count)
}

pub fn quantile_random(cases: u32) -> Result<(), String> {
    let values = prop_oneof![
        vec(-1e3f64..1e3, 1..40),
        vec(prop::sample::select(vec![0.1, 0.2, 0.3]), 1..40)
    ];
    run("quantile", cases, values, |xs| {
        agrees(&xs).map_err(TestCaseError::fail)?;
        let out = quantile_normalize(&xs);
        // Without ties the output is exactly the grid.
        let mut sorted = out.clone();
        sorted.sort_by(f64::total_cmp);
        let distinct = {
            let mut v = xs.clone();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v.len()
        };
        if distinct == xs.len() && xs.len() > 1 {
            for (i, y) in sorted.iter().enumerate() {
                prop_assert!((y - i as f64 / (xs.len() - 1) as f64).abs() <= 1e-12);
            }
        }
        Ok(())
    })
}

pub fn sentiment_laws(cases: u32) -> Result<(), String> {
    run(
        "sentiment",
        cases,
        prop_oneof![0.0f64..=1.0, Just(0.0), Just(1.0)],
        |c| {
            let pos = SentimentScore::from_label(SentimentLabel::Positive, c).unwrap();
            let neg = SentimentScore::from_label(SentimentLabel::Negative, c).unwrap();
            prop_assert_eq!(pos.score, c);
            prop_assert_eq!(neg.score, 1.0 - c);
            Ok(())
        },
    )?;
    for bad in [-0.01, 1.01, f64::NAN] {
        ensure(
            SentimentScore::from_label(SentimentLabel::Positive, bad).is_err(),
            || format!("confidence {bad} accepted"),
        )?;
    }
    Ok(())
}

fn label() -> impl Strategy<Value = SentimentLabel> {
    prop_oneof![Just(SentimentLabel::Positive), Just(SentimentLabel::Negative)]
}

/// Diagram assembly: one link per left-right pair, raw sentiment the mean
/// of the two item scores.
pub fn diagram_laws(cases: u32) -> Result<(), String> {
    let shape = (1usize..8, 1usize..8).prop_flat_map(|(a, b)| {
        (
            vec(-1.0f64..=1.0, a * b),
            vec((label(), 0.0f64..=1.0), a),
            vec((label(), 0.0f64..=1.0), b),
        )
    });
    run("diagram", cases, shape, |(sims, ls, rs)| {
        let left: Vec<String> = (0..ls.len()).map(|i| format!("a{i}")).collect();
        let right: Vec<String> = (0..rs.len()).map(|i| format!("b{i}")).collect();
        let score = |(l, c): &(SentimentLabel, f64)| SentimentScore::from_label(*l, *c).unwrap();
        let lsent: Vec<SentimentScore> = ls.iter().map(score).collect();
        let rsent: Vec<SentimentScore> = rs.iter().map(score).collect();
        let d = assemble_diagram(DiagramKind::Attributes, &left, &right, &sims, &lsent, &rsent).unwrap();
        prop_assert_eq!(d.links.len(), left.len() * right.len());
        prop_assert_eq!(d.nodes.len(), left.len() + right.len());
        for (k, link) in d.links.iter().enumerate() {
            let (i, j) = (k / right.len(), k % right.len());
            let mean = (lsent[i].score + rsent[j].score) / 2.0;
            prop_assert!((link.raw_sent - mean).abs() <= 1e-12);
            prop_assert!((pair_mean(lsent[i].score, rsent[j].score) - mean).abs() <= 1e-12);
            prop_assert_eq!(link.raw_sim, sims[k]);
        }
        Ok(())
    })
}

/// All scoring laws with `cases` random cases each, plus the exhaustive
/// quantile sweep for `n <= 8`.
pub fn check_scoring_laws(cases: u32) -> Check {
    cosine_laws(cases)?;
    minmax_laws(cases)?;
    quantile_random(cases)?;
    sentiment_laws(cases)?;
    let patterns = quantile_exhaustive(8)?;
    Ok(format!("{} random cases, {patterns} tie patterns", 4 * cases))
}
