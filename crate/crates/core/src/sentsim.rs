//! Sentence and treebank vectors for nearest-neighbour retrieval.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::conllu::Sentence;
use crate::error::{Error, Result};

pub const DENSE_HEADER: &str = "#dense-vectors v1";

/// Inclusive range of character n-gram lengths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NgramRange {
    pub min: usize,
    pub max: usize,
}

impl Default for NgramRange {
    fn default() -> Self {
        NgramRange { min: 2, max: 5 }
    }
}

impl NgramRange {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        if min == 0 || min > max {
            return Err(Error::Config(format!("empty n-gram range {min}..={max}")));
        }
        Ok(NgramRange { min, max })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Vector {
    /// Features sorted by name, weights non-zero.
    Sparse(Vec<(String, f64)>),
    Dense(Vec<f64>),
}

impl Vector {
    fn kind(&self) -> &'static str {
        match self {
            Vector::Sparse(_) => "sparse",
            Vector::Dense(_) => "dense",
        }
    }

    fn squared_norm(&self) -> f64 {
        match self {
            Vector::Sparse(v) => v.iter().map(|(_, x)| x * x).sum(),
            Vector::Dense(v) => v.iter().map(|x| x * x).sum(),
        }
    }
}

/// A keyed vector with its cached L2 norm.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    pub key: String,
    pub vector: Vector,
    pub norm: f64,
}

pub type SentenceRepresentation = Representation;
pub type TreebankRepresentation = Representation;

impl Representation {
    pub fn new(key: impl Into<String>, vector: Vector) -> Self {
        let norm = vector.squared_norm().sqrt();
        Representation {
            key: key.into(),
            vector,
            norm,
        }
    }
}

fn dot(a: &Vector, b: &Vector) -> Result<f64> {
    match (a, b) {
        (Vector::Dense(x), Vector::Dense(y)) => {
            if x.len() != y.len() {
                return Err(Error::DimensionMismatch {
                    expected: x.len(),
                    found: y.len(),
                });
            }
            Ok(x.iter().zip(y).map(|(p, q)| p * q).sum())
        }
        (Vector::Sparse(x), Vector::Sparse(y)) => {
            let (mut i, mut j, mut acc) = (0, 0, 0.0);
            while i < x.len() && j < y.len() {
                match x[i].0.cmp(&y[j].0) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        acc += x[i].1 * y[j].1;
                        i += 1;
                        j += 1;
                    }
                }
            }
            Ok(acc)
        }
        _ => Err(Error::IncompatibleRepresentations(format!(
            "cannot compare {} and {} vectors",
            a.kind(),
            b.kind()
        ))),
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &Representation, b: &Representation) -> Result<f64> {
    let d = dot(&a.vector, &b.vector)?;
    let na = a.vector.squared_norm();
    let nb = b.vector.squared_norm();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((d / (na * nb).sqrt()).clamp(-1.0, 1.0))
}

/// Space-joined forms with boundary markers.
pub fn sentence_text(sentence: &Sentence) -> String {
    let mut text = String::from("^");
    for (i, form) in sentence.forms().enumerate() {
        if i > 0 {
            text.push(' ');
        }
        text.push_str(form);
    }
    text.push('$');
    text
}

/// Raw counts of all character n-grams in `text`.
pub fn char_ngrams(text: &str, range: NgramRange) -> BTreeMap<String, usize> {
    let chars: Vec<char> = text.chars().collect();
    let mut counts = BTreeMap::new();
    for n in range.min..=range.max {
        for window in chars.windows(n) {
            *counts.entry(window.iter().collect::<String>()).or_insert(0) += 1;
        }
    }
    counts
}

/// Tf-idf weighting with document frequencies frozen on a corpus.
#[derive(Clone, Debug)]
pub struct TfIdf {
    range: NgramRange,
    n_docs: usize,
    df: HashMap<String, usize>,
}

impl TfIdf {
    pub fn fit<'a>(corpus: impl IntoIterator<Item = &'a Sentence>, range: NgramRange) -> Result<Self> {
        let range = NgramRange::new(range.min, range.max)?;
        let mut df = HashMap::new();
        let mut n_docs = 0;
        for sentence in corpus {
            n_docs += 1;
            for gram in char_ngrams(&sentence_text(sentence), range).into_keys() {
                *df.entry(gram).or_insert(0) += 1;
            }
        }
        if n_docs == 0 {
            return Err(Error::Config("tf-idf corpus is empty".into()));
        }
        Ok(TfIdf { range, n_docs, df })
    }

    /// `ln((1 + N) / (1 + df)) + 1`; grams unseen in the corpus have df 0.
    pub fn idf(&self, gram: &str) -> f64 {
        let df = self.df.get(gram).copied().unwrap_or(0);
        ((1 + self.n_docs) as f64 / (1 + df) as f64).ln() + 1.0
    }

    pub fn transform(&self, sentence: &Sentence) -> SentenceRepresentation {
        let features = char_ngrams(&sentence_text(sentence), self.range)
            .into_iter()
            .map(|(gram, tf)| {
                let w = tf as f64 * self.idf(&gram);
                (gram, w)
            })
            .collect();
        Representation::new(sentence.id.clone(), Vector::Sparse(features))
    }
}

/// Fits tf-idf on `corpus` and returns the model with every corpus vector.
pub fn char_ngram_tfidf(corpus: &[Sentence], range: NgramRange) -> Result<(TfIdf, Vec<SentenceRepresentation>)> {
    let model = TfIdf::fit(corpus, range)?;
    let reps = corpus.iter().map(|s| model.transform(s)).collect();
    Ok((model, reps))
}

/// Parses a dense-vector file.
pub fn load_dense_vectors(text: &str) -> Result<Vec<SentenceRepresentation>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == DENSE_HEADER => {}
        _ => {
            return Err(Error::DenseVectors {
                row: 1,
                message: format!("missing header {DENSE_HEADER:?}"),
            })
        }
    }
    let mut out: Vec<SentenceRepresentation> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut dim = None;
    for (i, line) in lines {
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::DenseVectors { row, message };
        let mut fields = line.split('\t');
        let (Some(key), Some(d), Some(values), None) = (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(err("expected three tab-separated fields".into()));
        };
        let d: usize = d.trim().parse().map_err(|_| err(format!("invalid dimension {d:?}")))?;
        let values = values
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|_| err(format!("invalid number {v:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != d {
            return Err(err(format!("declared dimension {d} but found {} values", values.len())));
        }
        if let Some(expected) = dim {
            if d != expected {
                return Err(err(format!("dimension {d} differs from {expected} in earlier rows")));
            }
        }
        dim = Some(d);
        if values.iter().any(|v| !v.is_finite()) {
            return Err(err(format!("non-finite value in vector for {key}")));
        }
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key {key}")));
        }
        out.push(Representation::new(key, Vector::Dense(values)));
    }
    Ok(out)
}

pub fn load_dense_vectors_file(path: &Path) -> Result<Vec<SentenceRepresentation>> {
    load_dense_vectors(&std::fs::read_to_string(path)?)
}

pub fn write_dense_vectors(reps: &[SentenceRepresentation]) -> Result<String> {
    let mut out = format!("{DENSE_HEADER}\n");
    for rep in reps {
        let Vector::Dense(v) = &rep.vector else {
            return Err(Error::IncompatibleRepresentations("only dense vectors can be written".into()));
        };
        let values: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}\t{}\t{}", rep.key, v.len(), values.join(" ")).expect("write to string");
    }
    Ok(out)
}

/// Dense vectors keyed by sentence id.
#[derive(Clone, Debug, Default)]
pub struct DenseTable {
    rows: BTreeMap<String, SentenceRepresentation>,
}

impl DenseTable {
    pub fn new(reps: Vec<SentenceRepresentation>) -> Self {
        DenseTable {
            rows: reps.into_iter().map(|r| (r.key.clone(), r)).collect(),
        }
    }

    /// Fails on keys in the table that are not in `known`.
    pub fn check_known<'a>(&self, known: impl IntoIterator<Item = &'a str>) -> Result<()> {
        let known: BTreeSet<&str> = known.into_iter().collect();
        if let Some(key) = self.rows.keys().find(|k| !known.contains(k.as_str())) {
            return Err(Error::IncompatibleRepresentations(format!(
                "dense vector for unknown sentence {key}"
            )));
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<&SentenceRepresentation> {
        self.rows
            .get(key)
            .ok_or_else(|| Error::IncompatibleRepresentations(format!("no dense vector for sentence {key}")))
    }
}

/// Mean of the vectors, scaled to unit length.
pub fn treebank_centroid(key: &str, reps: &[SentenceRepresentation]) -> Result<TreebankRepresentation> {
    let Some(first) = reps.first() else {
        return Err(Error::DegenerateCentroid(format!("treebank {key} has no sentences")));
    };
    let n = reps.len() as f64;
    let mean = match &first.vector {
        Vector::Dense(v0) => {
            let mut acc = vec![0.0; v0.len()];
            for rep in reps {
                let Vector::Dense(v) = &rep.vector else {
                    return Err(Error::IncompatibleRepresentations("mixed sparse and dense vectors".into()));
                };
                if v.len() != acc.len() {
                    return Err(Error::DimensionMismatch {
                        expected: acc.len(),
                        found: v.len(),
                    });
                }
                acc.iter_mut().zip(v).for_each(|(a, x)| *a += x);
            }
            Vector::Dense(acc.into_iter().map(|a| a / n).collect())
        }
        Vector::Sparse(_) => {
            let mut acc: BTreeMap<&str, f64> = BTreeMap::new();
            for rep in reps {
                let Vector::Sparse(v) = &rep.vector else {
                    return Err(Error::IncompatibleRepresentations("mixed sparse and dense vectors".into()));
                };
                for (g, x) in v {
                    *acc.entry(g.as_str()).or_insert(0.0) += x;
                }
            }
            Vector::Sparse(acc.into_iter().map(|(g, a)| (g.to_string(), a / n)).collect())
        }
    };
    let norm = mean.squared_norm().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateCentroid(format!("treebank {key} has a zero mean vector")));
    }
    let unit = match mean {
        Vector::Dense(v) => Vector::Dense(v.into_iter().map(|x| x / norm).collect()),
        Vector::Sparse(v) => Vector::Sparse(
            v.into_iter()
                .filter(|(_, x)| *x != 0.0)
                .map(|(g, x)| (g, x / norm))
                .collect(),
        ),
    };
    Ok(Representation::new(key, unit))
}
