use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::conllu::Sentence;
use crate::error::{Error, Result};
use crate::eval::las::las;
use crate::parser::ParserModel;
use crate::predict::{lower_median, LasRecord, LasTable};
use crate::weights::WeightGrid;

/// Per-sentence and per-set LAS of one model on one sentence set at every
/// grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub grid: WeightGrid,
    /// One table per sentence, in input order.
    pub tables: Vec<LasTable>,
    pub seed: Option<u64>,
    pub model_id: String,
    pub test_id: String,
}

/// Set-level counts at every grid point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregateLas {
    pub correct: Vec<usize>,
    pub total: usize,
}

impl AggregateLas {
    pub fn las(&self, point: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct[point] as f64 / self.total as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.correct.len()).map(|p| self.las(p)).collect()
    }

    /// Maximum minus minimum LAS over the grid.
    pub fn range(&self) -> f64 {
        let lo = self.correct.iter().min().copied().unwrap_or(0);
        let hi = self.correct.iter().max().copied().unwrap_or(0);
        if self.total == 0 {
            0.0
        } else {
            (hi - lo) as f64 / self.total as f64
        }
    }

    /// Points with the highest LAS, ascending.
    pub fn argmax(&self) -> Vec<usize> {
        let best = self.correct.iter().max().copied().unwrap_or(0);
        (0..self.correct.len()).filter(|&p| self.correct[p] == best).collect()
    }
}

impl SweepResult {
    /// Micro-averaged counts: Σ correct and Σ total over sentences.
    pub fn aggregate(&self) -> AggregateLas {
        let mut correct = vec![0; self.grid.len()];
        let mut total = 0;
        for t in &self.tables {
            total += t.total;
            correct.iter_mut().zip(&t.correct).for_each(|(a, c)| *a += c);
        }
        AggregateLas { correct, total }
    }

    pub fn records(&self) -> Vec<LasRecord> {
        self.tables.iter().flat_map(|t| t.records()).collect()
    }
}

/// Parses every sentence at every grid point with `jobs` worker threads.
/// Results do not depend on `jobs`.
pub fn sweep(model: &ParserModel, sentences: &[Sentence], grid: &WeightGrid, jobs: usize) -> Result<SweepResult> {
    if grid.m() != model.m() {
        return Err(Error::DimensionMismatch {
            expected: model.m(),
            found: grid.m(),
        });
    }
    let mut keys = BTreeSet::new();
    for s in sentences {
        if !s.is_annotated() {
            return Err(Error::SentenceMismatch(format!("sentence {} has no gold annotation", s.id)));
        }
        if !keys.insert(s.id.as_str()) {
            return Err(Error::SentenceMismatch(format!("duplicate sentence id {}", s.id)));
        }
    }
    let tbvecs = grid
        .points()
        .iter()
        .map(|p| model.interpolate_tbvec(&p.weights))
        .collect::<Result<Vec<_>>>()?;
    let run = || -> Result<Vec<LasTable>> {
        sentences
            .par_iter()
            .map(|s| {
                let prepared = model.prepare(s);
                let correct = tbvecs
                    .iter()
                    .map(|v| Ok(las(s, &model.parse_with_tbvec(&prepared, v)?)?.0))
                    .collect::<Result<Vec<_>>>()?;
                Ok(LasTable {
                    key: s.id.clone(),
                    total: s.len(),
                    correct,
                })
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let tables = pool.install(run)?;
    Ok(SweepResult {
        grid: grid.clone(),
        tables,
        seed: None,
        model_id: String::new(),
        test_id: String::new(),
    })
}

/// Pointwise lower median of set-level correct counts across seeds.
pub fn median_over_seeds(results: &[SweepResult]) -> Result<AggregateLas> {
    let aggregates: Vec<AggregateLas> = results.iter().map(SweepResult::aggregate).collect();
    let Some(first) = aggregates.first() else {
        return Err(Error::MissingEvidence("no seed results".into()));
    };
    if aggregates
        .iter()
        .any(|a| a.total != first.total || a.correct.len() != first.correct.len())
    {
        return Err(Error::SentenceMismatch("seed results cover different sets or grids".into()));
    }
    Ok(AggregateLas {
        correct: (0..first.correct.len())
            .map(|p| lower_median(&aggregates.iter().map(|a| a.correct[p]).collect::<Vec<_>>()))
            .collect(),
        total: first.total,
    })
}
