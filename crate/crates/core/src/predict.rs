//! k-NN prediction of interpolation weights from per-sentence LAS evidence.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use num_integer::Integer;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sentsim::{cosine, Representation};
use crate::weights::{uniform, SampleSpace, WeightGrid, WeightVector};

/// Labelled attachment counts of one sentence parsed at one grid point.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LasRecord {
    pub sentence_key: String,
    pub point_id: usize,
    pub correct: usize,
    pub total: usize,
}

pub fn write_records<W: Write>(records: &[LasRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(reader: R) -> Result<Vec<LasRecord>> {
    let mut r = csv::Reader::from_reader(reader);
    let records = r.deserialize().collect::<std::result::Result<Vec<LasRecord>, _>>()?;
    if let Some(bad) = records.iter().find(|r| r.correct > r.total) {
        return Err(Error::MissingEvidence(format!(
            "sentence {} point {}: correct {} exceeds total {}",
            bad.sentence_key, bad.point_id, bad.correct, bad.total
        )));
    }
    Ok(records)
}

/// Correct-arc counts of one sentence (or an aggregate of sentences) at
/// every grid point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LasTable {
    pub key: String,
    pub total: usize,
    /// Indexed by point id.
    pub correct: Vec<usize>,
}

impl LasTable {
    pub fn records(&self) -> impl Iterator<Item = LasRecord> + '_ {
        self.correct.iter().enumerate().map(|(point_id, &correct)| LasRecord {
            sentence_key: self.key.clone(),
            point_id,
            correct,
            total: self.total,
        })
    }

    /// Sums several tables point by point.
    pub fn aggregate(key: &str, tables: &[&LasTable]) -> Result<LasTable> {
        let Some(first) = tables.first() else {
            return Err(Error::MissingEvidence(format!("no sentences for {key}")));
        };
        let mut correct = vec![0; first.correct.len()];
        let mut total = 0;
        for t in tables {
            if t.correct.len() != correct.len() {
                return Err(Error::MissingEvidence(format!("sentence {} covers a different grid", t.key)));
            }
            total += t.total;
            correct.iter_mut().zip(&t.correct).for_each(|(a, c)| *a += c);
        }
        Ok(LasTable {
            key: key.to_string(),
            total,
            correct,
        })
    }
}

/// Groups records into per-sentence tables (sorted by key), requiring every
/// point of a `grid_len`-point grid for every sentence.
pub fn tables_from_records(records: &[LasRecord], grid_len: usize) -> Result<Vec<LasTable>> {
    let mut by_key: BTreeMap<&str, (usize, Vec<Option<usize>>)> = BTreeMap::new();
    for r in records {
        if r.point_id >= grid_len {
            return Err(Error::MissingEvidence(format!(
                "sentence {}: point {} outside a grid of {grid_len} points",
                r.sentence_key, r.point_id
            )));
        }
        let entry = by_key
            .entry(&r.sentence_key)
            .or_insert_with(|| (r.total, vec![None; grid_len]));
        if entry.0 != r.total {
            return Err(Error::MissingEvidence(format!(
                "sentence {}: inconsistent totals {} and {}",
                r.sentence_key, entry.0, r.total
            )));
        }
        if entry.1[r.point_id].replace(r.correct).is_some() {
            return Err(Error::MissingEvidence(format!(
                "sentence {}: duplicate record for point {}",
                r.sentence_key, r.point_id
            )));
        }
    }
    by_key
        .into_iter()
        .map(|(key, (total, slots))| {
            let correct = slots
                .into_iter()
                .enumerate()
                .map(|(p, c)| c.ok_or_else(|| Error::MissingEvidence(format!("sentence {key}: no record for point {p}"))))
                .collect::<Result<Vec<_>>>()?;
            Ok(LasTable {
                key: key.to_string(),
                total,
                correct,
            })
        })
        .collect()
}

/// Lower median of a non-empty list.
pub fn lower_median<T: Ord + Copy>(values: &[T]) -> T {
    let mut v = values.to_vec();
    v.sort();
    v[(v.len() - 1) / 2]
}

/// Pointwise lower median of correct counts over seeds; every seed must
/// cover the same sentences.
pub fn median_tables(per_seed: &[Vec<LasTable>]) -> Result<Vec<LasTable>> {
    let Some(first) = per_seed.first() else {
        return Err(Error::MissingEvidence("no seed results".into()));
    };
    for other in &per_seed[1..] {
        if other.len() != first.len()
            || other
                .iter()
                .zip(first)
                .any(|(a, b)| a.key != b.key || a.total != b.total || a.correct.len() != b.correct.len())
        {
            return Err(Error::SentenceMismatch("seed results cover different sentences or grids".into()));
        }
    }
    Ok(first
        .iter()
        .enumerate()
        .map(|(i, t)| LasTable {
            key: t.key.clone(),
            total: t.total,
            correct: (0..t.correct.len())
                .map(|p| lower_median(&per_seed.iter().map(|s| s[i].correct[p]).collect::<Vec<_>>()))
                .collect(),
        })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    #[default]
    UniformClosest,
    NextNeighborRerank,
    KAverage,
}

impl TieBreak {
    pub fn name(self) -> &'static str {
        match self {
            TieBreak::UniformClosest => "uniform-closest",
            TieBreak::NextNeighborRerank => "next-neighbor-rerank",
            TieBreak::KAverage => "k-average",
        }
    }
}

impl fmt::Display for TieBreak {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TieBreak {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [TieBreak::UniformClosest, TieBreak::NextNeighborRerank, TieBreak::KAverage]
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown tie-break strategy {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// One weight vector per test sentence.
    #[default]
    SeSe,
    /// One weight vector for the whole test set.
    TrTr,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::SeSe => "se-se",
            Mode::TrTr => "tr-tr",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "se-se" => Ok(Mode::SeSe),
            "tr-tr" => Ok(Mode::TrTr),
            _ => Err(Error::Config(format!("unknown prediction mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RepresentationKind {
    #[default]
    Tfidf,
    Dense,
}

impl fmt::Display for RepresentationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepresentationKind::Tfidf => "tfidf",
            RepresentationKind::Dense => "dense",
        })
    }
}

impl FromStr for RepresentationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tfidf" => Ok(RepresentationKind::Tfidf),
            "dense" => Ok(RepresentationKind::Dense),
            _ => Err(Error::Config(format!("unknown representation {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PredictorConfig {
    pub k: usize,
    pub space: SampleSpace,
    pub tie_break: TieBreak,
    pub representation: RepresentationKind,
    pub mode: Mode,
    pub oracle: bool,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            k: 1,
            space: SampleSpace::Any,
            tie_break: TieBreak::UniformClosest,
            representation: RepresentationKind::Tfidf,
            mode: Mode::SeSe,
            oracle: false,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Retrieval entry: a representation and the LAS evidence of the same item.
#[derive(Clone, Debug)]
pub struct IndexEntry {
    pub rep: Representation,
    pub table: LasTable,
}

#[derive(Clone, Debug)]
pub struct RetrievalIndex {
    entries: Vec<IndexEntry>,
    grid_len: usize,
}

impl RetrievalIndex {
    pub fn new(entries: Vec<IndexEntry>) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(Error::MissingEvidence("retrieval index is empty".into()));
        };
        let grid_len = first.table.correct.len();
        for e in &entries {
            if e.rep.key != e.table.key {
                return Err(Error::SentenceMismatch(format!(
                    "representation {} paired with evidence for {}",
                    e.rep.key, e.table.key
                )));
            }
            if e.table.correct.len() != grid_len {
                return Err(Error::MissingEvidence(format!("sentence {} covers a different grid", e.rep.key)));
            }
        }
        Ok(RetrievalIndex { entries, grid_len })
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.entries.iter().any(|e| e.rep.key == key)
    }
}

/// Ranked neighbours as `(entry index, similarity)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Retrieved {
    pub neighbors: Vec<(usize, f64)>,
    /// `k` exceeded the index size and every entry was returned.
    pub truncated: bool,
}

/// Top-`k` entries by descending cosine similarity. Ties go to an entry with
/// the query's own key, then to ascending key.
pub fn retrieve(index: &RetrievalIndex, query: &Representation, k: usize) -> Result<Retrieved> {
    let mut scored = index
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| Ok((i, cosine(query, &e.rep)?)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|&(i, a), &(j, b)| {
        let (ki, kj) = (&index.entries[i].rep.key, &index.entries[j].rep.key);
        b.total_cmp(&a)
            .then_with(|| (kj == &query.key).cmp(&(ki == &query.key)))
            .then_with(|| ki.cmp(kj))
    });
    let truncated = k > scored.len();
    scored.truncate(k);
    Ok(Retrieved {
        neighbors: scored,
        truncated,
    })
}

/// Points of `space` where the table has the most correct arcs.
pub fn best_points(table: &LasTable, grid: &WeightGrid, space: SampleSpace) -> Vec<usize> {
    let points = grid.space_points(space);
    let best = points.iter().map(|&p| table.correct[p]).max().unwrap_or(0);
    points.into_iter().filter(|&p| table.correct[p] == best).collect()
}

fn uniform_closest(candidates: &[usize], grid: &WeightGrid) -> usize {
    *candidates
        .iter()
        .min_by_key(|&&p| (grid.uniform_distance_key(p), p))
        .expect("non-empty candidate set")
}

/// Resolves a candidate set to one point. `neighbors` are the retrieved
/// tables in rank order; the first one produced the candidates.
pub fn tie_break(candidates: &[usize], strategy: TieBreak, grid: &WeightGrid, neighbors: &[&LasTable]) -> usize {
    assert!(!candidates.is_empty(), "tie_break needs at least one candidate");
    if candidates.len() == 1 {
        return candidates[0];
    }
    match strategy {
        TieBreak::UniformClosest => uniform_closest(candidates, grid),
        TieBreak::NextNeighborRerank => {
            let mut remaining = candidates.to_vec();
            for nb in neighbors.iter().skip(1) {
                let best = remaining.iter().map(|&p| nb.correct[p]).max().expect("non-empty");
                remaining.retain(|&p| nb.correct[p] == best);
                if remaining.len() == 1 {
                    break;
                }
            }
            uniform_closest(&remaining, grid)
        }
        TieBreak::KAverage => {
            // Mean sentence LAS compared exactly over a common denominator.
            let lcm = neighbors
                .iter()
                .fold(1u128, |acc, t| acc.lcm(&(t.total.max(1) as u128)));
            let score = |p: usize| -> u128 {
                neighbors
                    .iter()
                    .map(|t| t.correct[p] as u128 * (lcm / t.total.max(1) as u128))
                    .sum()
            };
            let best = candidates.iter().map(|&p| score(p)).max().expect("non-empty");
            let top: Vec<usize> = candidates.iter().copied().filter(|&p| score(p) == best).collect();
            uniform_closest(&top, grid)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub point_id: usize,
    pub weights: WeightVector,
    pub neighbors: Vec<String>,
    pub truncated: bool,
}

/// Retrieves neighbours of `query`, takes the best points of the nearest one
/// within the configured space, and tie-breaks.
pub fn predict(config: &PredictorConfig, grid: &WeightGrid, index: &RetrievalIndex, query: &Representation) -> Result<Prediction> {
    config.validate()?;
    if index.grid_len != grid.len() {
        return Err(Error::MissingEvidence(format!(
            "evidence covers {} points but the grid has {}",
            index.grid_len,
            grid.len()
        )));
    }
    let retrieved = retrieve(index, query, config.k)?;
    let tables: Vec<&LasTable> = retrieved.neighbors.iter().map(|&(i, _)| &index.entries[i].table).collect();
    let candidates = best_points(tables[0], grid, config.space);
    if candidates.is_empty() {
        return Err(Error::InvalidGrid(format!("grid has no points in space {}", config.space)));
    }
    let point_id = tie_break(&candidates, config.tie_break, grid, &tables);
    Ok(Prediction {
        point_id,
        weights: grid.point(point_id).weights.clone(),
        neighbors: retrieved
            .neighbors
            .iter()
            .map(|&(i, _)| index.entries[i].rep.key.clone())
            .collect(),
        truncated: retrieved.truncated,
    })
}

/// Index over treebanks: each entry pairs a treebank centroid with the
/// summed evidence of that treebank's sentences.
pub fn treebank_index(treebanks: Vec<(Representation, Vec<&LasTable>)>) -> Result<RetrievalIndex> {
    let entries = treebanks
        .into_iter()
        .map(|(rep, tables)| {
            let table = LasTable::aggregate(&rep.key, &tables)?;
            Ok(IndexEntry { rep, table })
        })
        .collect::<Result<Vec<_>>>()?;
    RetrievalIndex::new(entries)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    ProxyBest,
    ProxyWorst,
    Equal,
    Random,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::ProxyBest => "proxy-best",
            Baseline::ProxyWorst => "proxy-worst",
            Baseline::Equal => "equal",
            Baseline::Random => "random",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Baseline::ProxyBest, Baseline::ProxyWorst, Baseline::Equal, Baseline::Random]
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown baseline {s:?}")))
    }
}

/// A baseline choice: a grid point when one exists, and its weights.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineChoice {
    pub point_id: Option<usize>,
    pub weights: WeightVector,
}

/// Proxy baselines need the test set's own evidence; the others ignore it.
pub fn baseline(
    kind: Baseline,
    grid: &WeightGrid,
    space: SampleSpace,
    test_evidence: Option<&[LasTable]>,
    seed: u64,
) -> Result<BaselineChoice> {
    let at = |p: usize| BaselineChoice {
        point_id: Some(p),
        weights: grid.point(p).weights.clone(),
    };
    match kind {
        Baseline::Equal => {
            let w = uniform(grid.m())?;
            Ok(BaselineChoice {
                point_id: grid.find(&w),
                weights: w,
            })
        }
        Baseline::Random => {
            let points = grid.space_points(space);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = *points
                .choose(&mut rng)
                .ok_or_else(|| Error::InvalidGrid(format!("grid has no points in space {space}")))?;
            Ok(at(p))
        }
        Baseline::ProxyBest | Baseline::ProxyWorst => {
            let tables = test_evidence
                .ok_or_else(|| Error::MissingEvidence("proxy baselines need test-set evidence".into()))?;
            let refs: Vec<&LasTable> = tables.iter().collect();
            let agg = LasTable::aggregate("test", &refs)?;
            let mut corners = (1..=grid.m()).map(|t| grid.corner_id(t)).collect::<Result<Vec<_>>>()?;
            corners.sort_unstable();
            // Ties go to the lowest point id.
            let chosen = match kind {
                Baseline::ProxyBest => corners.iter().copied().min_by_key(|&p| (std::cmp::Reverse(agg.correct[p]), p)),
                _ => corners.iter().copied().min_by_key(|&p| (agg.correct[p], p)),
            };
            Ok(at(chosen.expect("m >= 1")))
        }
    }
}

/// Prediction report row.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub sentence_key: String,
    pub point_id: Option<usize>,
    pub weights: WeightVector,
    pub strategy: String,
    pub k: usize,
    pub space: String,
}

pub fn write_report<W: Write>(rows: &[ReportRow], m: usize, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["sentence_key".to_string(), "point_id".to_string()];
    header.extend((1..=m).map(|t| format!("alpha_{t}")));
    header.extend(["strategy", "k", "space"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.sentence_key.clone(), r.point_id.map(|p| p.to_string()).unwrap_or_default()];
        rec.extend(r.weights.alphas().iter().map(|a| a.to_string()));
        rec.extend([r.strategy.clone(), r.k.to_string(), r.space.clone()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sentsim::Vector;
    use crate::weights::{corner, generate_grid};

    fn corners_grid() -> WeightGrid {
        generate_grid(3, 1.0, 0.0).unwrap()
    }

    fn table(key: &str, total: usize, correct: &[usize]) -> LasTable {
        LasTable {
            key: key.into(),
            total,
            correct: correct.to_vec(),
        }
    }

    fn dense(key: &str, v: &[f64]) -> Representation {
        Representation::new(key, Vector::Dense(v.to_vec()))
    }

    #[test]
    fn best_points_on_corner_grid() {
        let grid = corners_grid();
        let c1 = grid.corner_id(1).unwrap();
        let c2 = grid.corner_id(2).unwrap();
        let c3 = grid.corner_id(3).unwrap();
        let mut correct = vec![0; 3];
        correct[c1] = 9;
        correct[c2] = 9;
        correct[c3] = 5;
        let mut best = best_points(&table("s", 10, &correct), &grid, SampleSpace::Fixed);
        best.sort();
        let mut expected = vec![c1, c2];
        expected.sort();
        assert_eq!(best, expected);
        assert_eq!(best_points(&table("s", 10, &[4, 4, 4]), &grid, SampleSpace::Any).len(), 3);
    }

    #[test]
    fn uniform_closest_prefers_centre() {
        let grid = generate_grid(3, 1.0 / 3.0, 0.0).unwrap();
        let centre = grid.find(&uniform(3).unwrap()).unwrap();
        let c1 = grid.corner_id(1).unwrap();
        assert_eq!(tie_break(&[c1, centre], TieBreak::UniformClosest, &grid, &[]), centre);
        assert_eq!(tie_break(&[c1], TieBreak::KAverage, &grid, &[]), c1);
    }

    #[test]
    fn k_average_ties_fall_back_to_uniform_distance() {
        // Per-point means 0.8, 0.9, 0.9 over two neighbours.
        let grid = corners_grid();
        let ids: Vec<usize> = (1..=3).map(|t| grid.corner_id(t).unwrap()).collect();
        let mut a = vec![0; 3];
        let mut b = vec![0; 3];
        for (i, (x, y)) in [(8, 8), (9, 9), (10, 8)].into_iter().enumerate() {
            a[ids[i]] = x;
            b[ids[i]] = y;
        }
        let (ta, tb) = (table("a", 10, &a), table("b", 10, &b));
        let picked = tie_break(&ids, TieBreak::KAverage, &grid, &[&ta, &tb]);
        let expected = *[ids[1], ids[2]]
            .iter()
            .min_by_key(|&&p| (grid.uniform_distance_key(p), p))
            .unwrap();
        assert_eq!(picked, expected);
    }

    #[test]
    fn rerank_uses_second_neighbor() {
        let grid = corners_grid();
        let (c1, c2) = (grid.corner_id(1).unwrap(), grid.corner_id(2).unwrap());
        let mut second = vec![0; 3];
        second[c2] = 3;
        let first = table("a", 4, &[4, 4, 4]);
        let second = table("b", 4, &second);
        assert_eq!(tie_break(&[c1, c2], TieBreak::NextNeighborRerank, &grid, &[&first, &second]), c2);
    }

    #[test]
    fn retrieval_order_and_truncation() {
        let index = RetrievalIndex::new(vec![
            IndexEntry {
                rep: dense("b", &[1.0, 0.0]),
                table: table("b", 1, &[1, 1, 1]),
            },
            IndexEntry {
                rep: dense("a", &[1.0, 0.0]),
                table: table("a", 1, &[1, 1, 1]),
            },
            IndexEntry {
                rep: dense("c", &[0.0, 1.0]),
                table: table("c", 1, &[1, 1, 1]),
            },
        ])
        .unwrap();
        let q = dense("q", &[1.0, 0.0]);
        let r = retrieve(&index, &q, 5).unwrap();
        assert!(r.truncated);
        let keys: Vec<&str> = r.neighbors.iter().map(|&(i, _)| index.entries()[i].rep.key.as_str()).collect();
        assert_eq!(keys, ["a", "b", "c"]);
        let own = dense("b", &[1.0, 0.0]);
        let r = retrieve(&index, &own, 1).unwrap();
        assert_eq!(index.entries()[r.neighbors[0].0].rep.key, "b");
        assert_eq!(r.neighbors[0].1, 1.0);
    }

    #[test]
    fn evidence_favoring_one_corner_wins() {
        let grid = generate_grid(3, 0.5, 0.0).unwrap();
        let c2 = grid.corner_id(2).unwrap();
        let mut correct = vec![1; grid.len()];
        correct[c2] = 2;
        let index = RetrievalIndex::new(
            ["a", "b"]
                .iter()
                .enumerate()
                .map(|(i, k)| IndexEntry {
                    rep: dense(k, &[1.0, i as f64]),
                    table: table(k, 2, &correct),
                })
                .collect(),
        )
        .unwrap();
        for q in [dense("q", &[0.0, 1.0]), dense("r", &[1.0, 0.0])] {
            let p = predict(&PredictorConfig::default(), &grid, &index, &q).unwrap();
            assert_eq!(p.point_id, c2);
            assert_eq!(p.weights, corner(2, 3).unwrap());
        }
    }

    #[test]
    fn baselines() {
        let grid = corners_grid();
        let ids: Vec<usize> = (1..=3).map(|t| grid.corner_id(t).unwrap()).collect();
        let mut correct = vec![0; 3];
        for (i, c) in [827, 823, 825].into_iter().enumerate() {
            correct[ids[i]] = c;
        }
        let evidence = [table("s", 1000, &correct)];
        let best = baseline(Baseline::ProxyBest, &grid, SampleSpace::Fixed, Some(&evidence), 0).unwrap();
        assert_eq!(best.point_id, Some(ids[0]));
        let worst = baseline(Baseline::ProxyWorst, &grid, SampleSpace::Fixed, Some(&evidence), 0).unwrap();
        assert_eq!(worst.point_id, Some(ids[1]));
        let eq = baseline(Baseline::Equal, &grid, SampleSpace::Any, None, 0).unwrap();
        assert_eq!(eq.weights.alphas(), &[1.0 / 3.0; 3]);
        assert_eq!(eq.point_id, None);
        let r1 = baseline(Baseline::Random, &grid, SampleSpace::Any, None, 7).unwrap();
        let r2 = baseline(Baseline::Random, &grid, SampleSpace::Any, None, 7).unwrap();
        assert_eq!(r1, r2);
        assert!(baseline(Baseline::ProxyBest, &grid, SampleSpace::Fixed, None, 0).is_err());
    }

    #[test]
    fn records_round_trip_and_tables() {
        let recs = vec![
            LasRecord {
                sentence_key: "s".into(),
                point_id: 1,
                correct: 2,
                total: 3,
            },
            LasRecord {
                sentence_key: "s".into(),
                point_id: 0,
                correct: 3,
                total: 3,
            },
        ];
        let mut buf = Vec::new();
        write_records(&recs, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("sentence_key,point_id,correct,total\n"));
        assert_eq!(read_records(&buf[..]).unwrap(), recs);
        let tables = tables_from_records(&recs, 2).unwrap();
        assert_eq!(tables, vec![table("s", 3, &[3, 2])]);
        assert!(tables_from_records(&recs, 3).is_err());
    }

    #[test]
    fn median_is_lower_median() {
        let per_seed = vec![
            vec![table("s", 100, &[80])],
            vec![table("s", 100, &[82])],
            vec![table("s", 100, &[81])],
        ];
        assert_eq!(median_tables(&per_seed).unwrap()[0].correct, vec![81]);
        assert_eq!(median_tables(&per_seed[..2]).unwrap()[0].correct, vec![80]);
        assert_eq!(median_tables(&per_seed[..1]).unwrap()[0].correct, vec![80]);
    }
}
