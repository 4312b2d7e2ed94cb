//! Interpolation weights over the training treebanks and the sampled
//! weight-space lattice.
//!
//! Grid points are stored as integer lattice units `u_t` with
//! `α_t = u_t / q`, where `q = 1 / step`. Membership, ordering and distances
//! are computed on the integers so that they are exact.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Tolerance on `Σα = 1`.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Barycentric weights `α_1..α_m` with `Σα = 1`. Entries may be negative.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector {
    alphas: Vec<f64>,
}

impl WeightVector {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        if let Some(a) = alphas.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidWeights(format!("non-finite weight {a}")));
        }
        let sum: f64 = alphas.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(WeightVector { alphas })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn m(&self) -> usize {
        self.alphas.len()
    }

    /// The 1-based treebank id if this is a corner vector.
    pub fn corner_index(&self) -> Option<usize> {
        let ones: Vec<usize> = (0..self.m()).filter(|&t| self.alphas[t] == 1.0).collect();
        let zeros = self.alphas.iter().filter(|&&a| a == 0.0).count();
        (ones.len() == 1 && zeros == self.m() - 1).then(|| ones[0] + 1)
    }

    pub fn classify(&self) -> SpaceFlags {
        SpaceFlags {
            fixed: self.corner_index().is_some(),
            nonneg: self.alphas.iter().all(|&a| a >= 0.0),
        }
    }
}

impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.alphas.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// The fixed treebank vector `e_3(t)` expressed as weights (1-based `t`).
pub fn corner(t: usize, m: usize) -> Result<WeightVector> {
    if t == 0 || t > m {
        return Err(Error::TreebankOutOfRange { index: t, m });
    }
    let mut alphas = vec![0.0; m];
    alphas[t - 1] = 1.0;
    WeightVector::new(alphas)
}

/// Equal weights `1/m`.
pub fn uniform(m: usize) -> Result<WeightVector> {
    if m == 0 {
        return Err(Error::InvalidWeights("uniform weights need m >= 1".into()));
    }
    let alphas = vec![1.0 / m as f64; m];
    // 1/m summed m times can miss 1 by an ulp or so; that stays within tolerance.
    WeightVector::new(alphas)
}

/// Candidate sets for predicted weights, nested as `Fixed ⊂ NonNeg ⊂ Any`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SampleSpace {
    Fixed,
    NonNeg,
    Any,
}

impl SampleSpace {
    pub const ALL: [SampleSpace; 3] = [SampleSpace::Fixed, SampleSpace::NonNeg, SampleSpace::Any];

    pub fn contains(self, w: &WeightVector) -> bool {
        w.classify().contains(self)
    }

    pub fn name(self) -> &'static str {
        match self {
            SampleSpace::Fixed => "fixed",
            SampleSpace::NonNeg => "nonneg",
            SampleSpace::Any => "any",
        }
    }
}

impl fmt::Display for SampleSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SampleSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(SampleSpace::Fixed),
            "nonneg" => Ok(SampleSpace::NonNeg),
            "any" => Ok(SampleSpace::Any),
            other => Err(Error::Config(format!("unknown sample space {other:?}"))),
        }
    }
}

/// Membership of a point in the three sample spaces (`any` always holds).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpaceFlags {
    pub fixed: bool,
    pub nonneg: bool,
}

impl SpaceFlags {
    pub fn contains(self, space: SampleSpace) -> bool {
        match space {
            SampleSpace::Fixed => self.fixed,
            SampleSpace::NonNeg => self.nonneg,
            SampleSpace::Any => true,
        }
    }

    pub fn spaces(self) -> Vec<SampleSpace> {
        SampleSpace::ALL
            .into_iter()
            .filter(|&s| self.contains(s))
            .collect()
    }
}

impl fmt::Display for SpaceFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.spaces().into_iter().map(SampleSpace::name).collect();
        f.write_str(&names.join("|"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPoint {
    pub id: usize,
    /// Lattice coordinates; `α_t = units[t] / denominator`.
    pub units: Vec<i64>,
    pub weights: WeightVector,
    pub flags: SpaceFlags,
}

/// A deterministic lattice over the weight plane `Σα = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightGrid {
    m: usize,
    step: f64,
    margin: f64,
    denominator: i64,
    points: Vec<GridPoint>,
}

/// Enumerates every `α` with `α_t ∈ step·ℤ ∩ [−margin, 1+margin]` and `Σα = 1`,
/// in lexicographic order. `1/step` must be an integer so that the corners
/// lie on the lattice.
pub fn generate_grid(m: usize, step: f64, margin: f64) -> Result<WeightGrid> {
    if m == 0 {
        return Err(Error::InvalidGrid("m must be at least 1".into()));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidGrid(format!("step must be positive, got {step}")));
    }
    if !(margin >= 0.0 && margin.is_finite()) {
        return Err(Error::InvalidGrid(format!("margin must be non-negative, got {margin}")));
    }
    let q = (1.0 / step).round();
    if q < 1.0 || (q * step - 1.0).abs() > SUM_TOLERANCE || q > 1e6 {
        return Err(Error::InvalidGrid(format!(
            "step {step} does not divide 1 into an integer number of steps"
        )));
    }
    let q = q as i64;
    let extra = (margin * q as f64 + SUM_TOLERANCE).floor() as i64;
    let (lo, hi) = (-extra, q + extra);

    let mut points = Vec::new();
    let mut units = vec![0i64; m];
    enumerate(&mut units, 0, q, lo, hi, &mut |u| {
        let alphas = u.iter().map(|&x| x as f64 / q as f64).collect();
        let weights = WeightVector::new(alphas).expect("lattice point sums to one");
        let flags = SpaceFlags {
            fixed: u.iter().filter(|&&x| x == q).count() == 1 && u.iter().filter(|&&x| x == 0).count() == m - 1,
            nonneg: u.iter().all(|&x| x >= 0),
        };
        points.push(GridPoint {
            id: points.len(),
            units: u.to_vec(),
            weights,
            flags,
        });
    });
    if points.is_empty() {
        return Err(Error::InvalidGrid("parameters yield an empty grid".into()));
    }
    Ok(WeightGrid {
        m,
        step,
        margin,
        denominator: q,
        points,
    })
}

fn enumerate(units: &mut [i64], pos: usize, remaining: i64, lo: i64, hi: i64, emit: &mut dyn FnMut(&[i64])) {
    let m = units.len();
    if pos == m - 1 {
        if (lo..=hi).contains(&remaining) {
            units[pos] = remaining;
            emit(units);
        }
        return;
    }
    let rest = (m - pos - 1) as i64;
    for u in lo..=hi {
        let left = remaining - u;
        // The remaining coordinates must be able to absorb `left`.
        if left < rest * lo || left > rest * hi {
            continue;
        }
        units[pos] = u;
        enumerate(units, pos + 1, left, lo, hi, emit);
    }
}

impl WeightGrid {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn denominator(&self) -> i64 {
        self.denominator
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn point(&self, id: usize) -> &GridPoint {
        &self.points[id]
    }

    /// Point ids belonging to `space`, in grid order.
    pub fn space_points(&self, space: SampleSpace) -> Vec<usize> {
        self.points
            .iter()
            .filter(|p| p.flags.contains(space))
            .map(|p| p.id)
            .collect()
    }

    /// Point id of the corner for 1-based treebank `t`.
    pub fn corner_id(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.m {
            return Err(Error::TreebankOutOfRange { index: t, m: self.m });
        }
        let q = self.denominator;
        Ok(self
            .points
            .iter()
            .position(|p| p.units.iter().enumerate().all(|(i, &u)| u == if i == t - 1 { q } else { 0 }))
            .expect("corners are always on the grid"))
    }

    /// Looks a weight vector up by its lattice coordinates.
    pub fn find(&self, w: &WeightVector) -> Option<usize> {
        if w.m() != self.m {
            return None;
        }
        let q = self.denominator as f64;
        let units: Option<Vec<i64>> = w
            .alphas()
            .iter()
            .map(|&a| {
                let u = (a * q).round();
                ((a * q - u).abs() < 1e-6).then_some(u as i64)
            })
            .collect();
        let units = units?;
        self.points.binary_search_by(|p| p.units.cmp(&units)).ok()
    }

    pub fn classify(&self, id: usize) -> SpaceFlags {
        self.points[id].flags
    }

    /// `m² · q² · ‖α − uniform(m)‖²`, an exact integer ordering key.
    pub fn uniform_distance_key(&self, id: usize) -> i64 {
        let m = self.m as i64;
        let q = self.denominator;
        self.points[id]
            .units
            .iter()
            .map(|&u| {
                let d = m * u - q;
                d * d
            })
            .sum()
    }

    /// Writes `point_id, alpha_1..alpha_m, space_flags`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["point_id".to_string()];
        header.extend((1..=self.m).map(|t| format!("alpha_{t}")));
        header.push("space_flags".into());
        w.write_record(&header)?;
        for p in &self.points {
            let mut row = vec![p.id.to_string()];
            row.extend(p.weights.alphas().iter().map(|a| a.to_string()));
            row.push(p.flags.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
