//! Sampled I/O logs, inverse-dynamics regressors, difference operators,
//! splitting and normalization.
//!
//! The inverse regressor for spec `(n_a, n_b, n_k)` with preview `n_pw` and
//! `n_us` removed input lags is
//!
//! ```text
//! φ(k) = [ y(k+n_k+1+n_pw), …, y(k+n_k−n_a+1), u(k−1), …, u(k−n_b+n_us+1) ]
//! ```
//!
//! and the target is `u(k)`. The names follow the *forward* model orders, so
//! there are `n_a+1+n_pw` output entries and `n_b−1−n_us` input entries.
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type RegressorVector = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressorSpec {
    pub n_a: usize,
    pub n_b: usize,
    pub n_k: usize,
    #[serde(default)]
    pub n_pw: usize,
    #[serde(default)]
    pub n_us: usize,
}

impl RegressorSpec {
    pub fn new(n_a: usize, n_b: usize, n_k: usize) -> Result<Self> {
        let s = Self { n_a, n_b, n_k, n_pw: 0, n_us: 0 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_b < 1 {
            return Err(Error::Invalid("n_b must be at least 1".into()));
        }
        if self.n_us > self.n_b - 1 {
            return Err(Error::Invalid(format!(
                "n_us = {} exceeds n_b - 1 = {}",
                self.n_us,
                self.n_b - 1
            )));
        }
        Ok(())
    }

    /// Number of output samples in φ.
    pub fn y_len(&self) -> usize {
        self.n_a + 1 + self.n_pw
    }

    /// Number of past inputs in φ.
    pub fn u_len(&self) -> usize {
        self.n_b - 1 - self.n_us
    }

    pub fn len(&self) -> usize {
        self.y_len() + self.u_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest output lead relative to k: φ[0] = y(k + lead()).
    pub fn lead(&self) -> usize {
        self.n_k + 1 + self.n_pw
    }

    /// Number of samples needed before k (output and input lags).
    pub fn back(&self) -> usize {
        let y_back = (self.n_a as isize - 1 - self.n_k as isize).max(0) as usize;
        y_back.max(self.u_len())
    }

    /// Position of y(k + j) inside φ, if present.
    pub fn y_index(&self, j: isize) -> Option<usize> {
        let idx = self.lead() as isize - j;
        (idx >= 0 && (idx as usize) < self.y_len()).then_some(idx as usize)
    }
}

/// Uniformly sampled input/output log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IoLog {
    pub ts: f64,
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LogRow {
    t: f64,
    u: f64,
    y: f64,
}

impl IoLog {
    pub fn new(ts: f64, u: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        crate::error::dim("log y length", u.len(), y.len())?;
        let t = (0..u.len()).map(|k| k as f64 * ts).collect();
        Ok(Self { ts, t, u, y })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn append(&mut self, other: &IoLog) {
        let off = self.t.last().map(|t| t + self.ts).unwrap_or(0.0);
        self.t.extend(other.t.iter().map(|t| t - other.t.first().copied().unwrap_or(0.0) + off));
        self.u.extend_from_slice(&other.u);
        self.y.extend_from_slice(&other.y);
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let (mut t, mut u, mut y) = (vec![], vec![], vec![]);
        for row in rdr.deserialize() {
            let r: LogRow = row?;
            t.push(r.t);
            u.push(r.u);
            y.push(r.y);
        }
        if t.len() < 2 {
            return Err(Error::TooShort { needed: 2, got: t.len() });
        }
        let ts = t[1] - t[0];
        for w in t.windows(2) {
            if ((w[1] - w[0]) - ts).abs() > 1e-6 * ts.abs().max(1e-12) {
                return Err(Error::Invalid("log is not uniformly sampled".into()));
            }
        }
        Ok(Self { ts, t, u, y })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for k in 0..self.len() {
            w.serialize(LogRow { t: self.t[k], u: self.u[k], y: self.y[k] })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Regressor/target pairs. Row `i` of `phi` is φ_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSet {
    pub spec: RegressorSpec,
    pub ts: f64,
    pub phi: DMatrix<f64>,
    pub u: DVector<f64>,
}

impl DataSet {
    pub fn new(spec: RegressorSpec, ts: f64, phi: DMatrix<f64>, u: DVector<f64>) -> Result<Self> {
        crate::error::dim("regressor width", spec.len(), phi.ncols())?;
        crate::error::dim("target count", phi.nrows(), u.len())?;
        if u.is_empty() {
            return Err(Error::Invalid("data set must have at least one sample".into()));
        }
        Ok(Self { spec, ts, phi, u })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn regressor(&self, i: usize) -> RegressorVector {
        self.phi.row(i).transpose()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let phi = self.phi.select_rows(idx);
        let u = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.u[i]));
        Self { spec: self.spec, ts: self.ts, phi, u }
    }

    pub fn concat(&self, other: &DataSet) -> Result<Self> {
        if self.spec != other.spec {
            return Err(Error::Invalid("cannot concatenate data sets with different specs".into()));
        }
        let (n1, n2, d) = (self.len(), other.len(), self.spec.len());
        let phi = DMatrix::from_fn(n1 + n2, d, |i, j| {
            if i < n1 {
                self.phi[(i, j)]
            } else {
                other.phi[(i - n1, j)]
            }
        });
        let u = DVector::from_fn(n1 + n2, |i, _| if i < n1 { self.u[i] } else { other.u[i - n1] });
        Ok(Self { spec: self.spec, ts: self.ts, phi, u })
    }

    /// Debug dump: one row per sample, columns `phi0..phi{d-1},u`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.spec.len()).map(|j| format!("phi{j}")).collect();
        header.push("u".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.phi.row(i).iter().map(|v| format!("{v:e}")).collect();
            rec.push(format!("{:e}", self.u[i]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Build the inverse-dynamics data set from a log. Samples lacking full
/// lead/lag context are dropped.
pub fn build_regressors(log: &IoLog, spec: &RegressorSpec) -> Result<DataSet> {
    spec.validate()?;
    let n = log.len();
    let (back, lead) = (spec.back(), spec.lead());
    let needed = back + lead + 1;
    if n < needed {
        return Err(Error::TooShort { needed, got: n });
    }
    let rows: Vec<usize> = (back..n - lead).collect();
    let yl = spec.y_len();
    let phi = DMatrix::from_fn(rows.len(), spec.len(), |i, j| {
        let k = rows[i];
        if j < yl {
            log.y[k + lead - j]
        } else {
            log.u[k - 1 - (j - yl)]
        }
    });
    let u = DVector::from_iterator(rows.len(), rows.iter().map(|&k| log.u[k]));
    DataSet::new(*spec, log.ts, phi, u)
}

/// Discrete operators δ = (q − q⁻¹)/(2T_s) and Δ = (q + 1)/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffOperators {
    pub ts: f64,
}

impl DiffOperators {
    pub fn new(ts: f64) -> Self {
        Self { ts }
    }

    /// Central difference of the given order. Output index i corresponds to
    /// input index i + order.
    pub fn delta(&self, x: &[f64], order: usize) -> Result<Vec<f64>> {
        let needed = 2 * order + 1;
        if x.len() < needed {
            return Err(Error::TooShort { needed, got: x.len() });
        }
        let mut cur = x.to_vec();
        for _ in 0..order {
            cur = cur.windows(3).map(|w| (w[2] - w[0]) / (2.0 * self.ts)).collect();
        }
        Ok(cur)
    }

    /// Two-sample average; output index i is (x[i+1] + x[i]) / 2.
    pub fn average(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() < 2 {
            return Err(Error::TooShort { needed: 2, got: x.len() });
        }
        Ok(x.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect())
    }
}

pub fn apply_delta(x: &[f64], ops: &DiffOperators, order: usize) -> Result<Vec<f64>> {
    if order == 0 || order > 2 {
        return Err(Error::Invalid(format!("delta order must be 1 or 2, got {order}")));
    }
    ops.delta(x, order)
}

pub fn apply_average(x: &[f64], ops: &DiffOperators) -> Result<Vec<f64>> {
    ops.average(x)
}

/// Random per-sample split; `fraction` goes to the first (training) set.
pub fn split_train_val(ds: &DataSet, fraction: f64, seed: u64) -> Result<(DataSet, DataSet)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Invalid(format!("split fraction {fraction} not in (0,1)")));
    }
    let n = ds.len();
    let n_train = (fraction * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Invalid(format!("split of {n} samples at {fraction} leaves an empty partition")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (a, b) = idx.split_at_mut(n_train);
    a.sort_unstable();
    b.sort_unstable();
    Ok((ds.subset(a), ds.subset(b)))
}

/// Per-coordinate affine map x ↦ (x − shift)/scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl NormalizationRecord {
    pub fn identity(n: usize) -> Self {
        Self { shift: vec![0.0; n], scale: vec![1.0; n] }
    }

    /// Population mean/std per column; a constant column gets scale 1.
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::TooShort { needed: 2, got: n });
        }
        let mut shift = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            shift.push(mean);
            scale.push(if sd > 0.0 && sd.is_finite() { sd } else { 1.0 });
        }
        Ok(Self { shift, scale })
    }

    pub fn len(&self) -> usize {
        self.shift.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shift.is_empty()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(x.len(), |i, _| (x[i] - self.shift[i]) / self.scale[i])
    }

    pub fn apply_rows(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - self.shift[j]) / self.scale[j])
    }

    pub fn invert_rows(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * self.scale[j] + self.shift[j])
    }
}

pub fn normalize_inputs(ds: &DataSet) -> Result<(DataSet, NormalizationRecord)> {
    let rec = NormalizationRecord::fit(&ds.phi)?;
    let mut out = ds.clone();
    out.phi = rec.apply_rows(&ds.phi);
    Ok((out, rec))
}

pub fn denormalize_inputs(ds: &DataSet, rec: &NormalizationRecord) -> DataSet {
    let mut out = ds.clone();
    out.phi = rec.invert_rows(&ds.phi);
    out
}
