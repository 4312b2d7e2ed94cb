use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conllu::Sentence;
use crate::error::{Error, Result};
use crate::eval::las::las;
use crate::parser::ParseResult;

pub const DEFAULT_ITERATIONS: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct SignificanceResult {
    pub p_value: f64,
    pub las_a: f64,
    pub las_b: f64,
    /// `las_a - las_b`.
    pub difference: f64,
    pub iterations: usize,
}

/// Two-sided paired sign-flip permutation test on per-sentence differences.
/// Returns `(count + 1) / (iterations + 1)` where `count` is the number of
/// permutations at least as extreme as the observed total.
pub fn paired_permutation(differences: &[i64], iterations: usize, seed: u64) -> f64 {
    let observed: i64 = differences.iter().sum::<i64>().abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = 0usize;
    for _ in 0..iterations {
        let permuted: i64 = differences
            .iter()
            .map(|&d| if rng.gen::<bool>() { d } else { -d })
            .sum();
        if permuted.abs() >= observed {
            count += 1;
        }
    }
    (count + 1) as f64 / (iterations + 1) as f64
}

fn counts(gold: &BTreeMap<&str, &Sentence>, system: &[Sentence], name: &str) -> Result<BTreeMap<String, (usize, usize)>> {
    let mut out = BTreeMap::new();
    for s in system {
        let g = gold
            .get(s.id.as_str())
            .ok_or_else(|| Error::SentenceMismatch(format!("{name}: sentence {} not in gold", s.id)))?;
        let heads = s
            .heads()
            .ok_or_else(|| Error::SentenceMismatch(format!("{name}: sentence {} has no predicted heads", s.id)))?;
        let deprels = s.tokens.iter().map(|t| t.deprel.clone().unwrap_or_default()).collect();
        out.insert(s.id.clone(), las(g, &ParseResult { heads, deprels })?);
    }
    if out.len() != gold.len() {
        return Err(Error::SentenceMismatch(format!(
            "{name}: {} sentences but gold has {}",
            out.len(),
            gold.len()
        )));
    }
    Ok(out)
}

/// Compares two systems' parses of the same gold sentences.
pub fn significance(
    gold: &[Sentence],
    pred_a: &[Sentence],
    pred_b: &[Sentence],
    iterations: usize,
    seed: u64,
) -> Result<SignificanceResult> {
    let gold_map: BTreeMap<&str, &Sentence> = gold.iter().map(|s| (s.id.as_str(), s)).collect();
    if gold_map.len() != gold.len() {
        return Err(Error::SentenceMismatch("duplicate sentence ids in gold".into()));
    }
    let a = counts(&gold_map, pred_a, "system a")?;
    let b = counts(&gold_map, pred_b, "system b")?;
    let differences: Vec<i64> = a
        .iter()
        .zip(&b)
        .map(|((_, &(ca, _)), (_, &(cb, _)))| ca as i64 - cb as i64)
        .collect();
    let total: usize = a.values().map(|&(_, t)| t).sum();
    let ratio = |m: &BTreeMap<String, (usize, usize)>| {
        let c: usize = m.values().map(|&(c, _)| c).sum();
        if total == 0 {
            0.0
        } else {
            c as f64 / total as f64
        }
    };
    let (las_a, las_b) = (ratio(&a), ratio(&b));
    Ok(SignificanceResult {
        p_value: paired_permutation(&differences, iterations, seed),
        las_a,
        las_b,
        difference: las_a - las_b,
        iterations,
    })
}
