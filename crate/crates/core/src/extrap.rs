//! Operating region and greedy farthest-point design of the extrapolation
//! set Z^E.
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::RegressorSpec;
use crate::error::{Error, Result};
use crate::model::InputTransform;

/// Feature an axis of the operating region measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisFeature {
    /// Δy(k)
    Position,
    /// Δδy(k)
    Velocity,
    /// Δδ²y(k)
    Acceleration,
}

impl AxisFeature {
    fn row(&self) -> usize {
        match self {
            AxisFeature::Position => 0,
            AxisFeature::Velocity => 1,
            AxisFeature::Acceleration => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    #[serde(default = "default_feature")]
    pub feature: AxisFeature,
    pub lo: f64,
    pub hi: f64,
    pub resolution: usize,
}

fn default_feature() -> AxisFeature {
    AxisFeature::Position
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingRegion {
    pub axes: Vec<Axis>,
    /// Measure distances in coordinates scaled by each axis half-width.
    #[serde(default = "yes")]
    pub normalize: bool,
}

impl OperatingRegion {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        let r = Self { axes, normalize: true };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::Invalid("operating region needs at least one axis".into()));
        }
        for a in &self.axes {
            if !(a.hi > a.lo) || a.resolution < 2 {
                return Err(Error::Invalid(format!("axis '{}' must have hi > lo and resolution >= 2", a.name)));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn grid_len(&self) -> usize {
        self.axes.iter().map(|a| a.resolution).product()
    }

    /// Grid point with lexicographic index `i` (first axis most significant).
    pub fn grid_point(&self, mut i: usize) -> DVector<f64> {
        let mut p = DVector::zeros(self.dim());
        for (d, a) in self.axes.iter().enumerate().rev() {
            let k = i % a.resolution;
            i /= a.resolution;
            p[d] = a.lo + (a.hi - a.lo) * k as f64 / (a.resolution - 1) as f64;
        }
        p
    }

    pub fn grid(&self) -> DMatrix<f64> {
        let n = self.grid_len();
        let mut g = DMatrix::zeros(n, self.dim());
        for i in 0..n {
            g.row_mut(i).copy_from(&self.grid_point(i).transpose());
        }
        g
    }

    /// Per-axis distance scale.
    pub fn scales(&self) -> Vec<f64> {
        self.axes
            .iter()
            .map(|a| if self.normalize { 0.5 * (a.hi - a.lo) } else { 1.0 })
            .collect()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(&self.axes).all(|(v, a)| *v >= a.lo - 1e-12 && *v <= a.hi + 1e-12)
    }

    /// Project regressors (rows) onto the region's axes.
    pub fn project(&self, phi: &DMatrix<f64>, spec: &RegressorSpec, ts: f64) -> Result<DMatrix<f64>> {
        let t = InputTransform::PhysicalFeatures.matrix(spec, ts)?;
        let rows: Vec<usize> = self.axes.iter().map(|a| a.feature.row()).collect();
        let sel = t.select_rows(&rows);
        Ok(phi * sel.transpose())
    }

    /// Lift region points to full regressors: y(k+j) follows a quadratic
    /// through the axis values (unmodeled coordinates and past inputs 0).
    pub fn lift(&self, pts: &DMatrix<f64>, spec: &RegressorSpec, ts: f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(pts.nrows(), spec.len());
        for i in 0..pts.nrows() {
            let (mut p, mut v, mut a) = (0.0, 0.0, 0.0);
            for (d, ax) in self.axes.iter().enumerate() {
                match ax.feature {
                    AxisFeature::Position => p = pts[(i, d)],
                    AxisFeature::Velocity => v = pts[(i, d)],
                    AxisFeature::Acceleration => a = pts[(i, d)],
                }
            }
            // Δ of the quadratic at k adds a·T_s²/8 to the position
            let p0 = p - a * ts * ts / 8.0;
            for j in 0..spec.y_len() {
                let t = (spec.lead() as f64 - j as f64 - 0.5) * ts;
                out[(i, j)] = p0 + v * t + 0.5 * a * t * t;
            }
        }
        out
    }
}

/// min over the pool of the squared (scaled) distance to ζ.
pub fn objective_c(zeta: &[f64], pool: &DMatrix<f64>, scales: &[f64]) -> Result<f64> {
    if pool.nrows() == 0 {
        return Err(Error::Invalid("objective needs a nonempty pool".into()));
    }
    Ok((0..pool.nrows()).map(|i| dist2(zeta, pool.row(i).iter(), scales)).fold(f64::INFINITY, f64::min))
}

fn dist2<'a>(a: &[f64], b: impl Iterator<Item = &'a f64>, s: &[f64]) -> f64 {
    a.iter().zip(b).zip(s).map(|((x, y), s)| ((x - y) / s).powi(2)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationSet {
    pub axes: Vec<String>,
    /// Selected points in region coordinates (one per row).
    pub points: DMatrix<f64>,
    /// Objective value at selection time.
    pub objective: Vec<f64>,
    /// Lexicographic grid index of each point.
    pub grid_index: Vec<usize>,
    pub normalized: bool,
}

impl ExtrapolationSet {
    pub fn len(&self) -> usize {
        self.objective.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objective.is_empty()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut h = self.axes.clone();
        h.push("objective".into());
        w.write_record(&h)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.points.row(i).iter().map(|v| format!("{v:e}")).collect();
            rec.push(format!("{:e}", self.objective[i]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Greedy farthest-point selection over the region grid. `z_n` holds the
/// training points already projected to the region axes.
pub fn generate_ze(region: &OperatingRegion, z_n: &DMatrix<f64>, e_max: usize, eps: f64) -> Result<ExtrapolationSet> {
    region.validate()?;
    if z_n.ncols() != region.dim() && z_n.nrows() > 0 {
        return Err(Error::Dim { what: "Z_N feature width", expected: region.dim(), got: z_n.ncols() });
    }
    let scales = region.scales();
    let grid = region.grid();
    let n = grid.nrows();
    let d = region.dim();
    let gp: Vec<Vec<f64>> = (0..n).map(|i| grid.row(i).iter().cloned().collect()).collect();
    let mut best = vec![f64::INFINITY; n];
    for j in 0..z_n.nrows() {
        let p: Vec<f64> = z_n.row(j).iter().cloned().collect();
        for (i, g) in gp.iter().enumerate() {
            let v = dist2(g, p.iter(), &scales);
            if v < best[i] {
                best[i] = v;
            }
        }
    }
    let mut idx = Vec::new();
    let mut obj = Vec::new();
    while idx.len() < e_max {
        let mut arg = None;
        let mut val = f64::NEG_INFINITY;
        for (i, v) in best.iter().enumerate() {
            if *v > val {
                val = *v;
                arg = Some(i);
            }
        }
        let Some(a) = arg else { break };
        if !(val > eps) {
            break;
        }
        idx.push(a);
        obj.push(val);
        let p = gp[a].clone();
        for (i, g) in gp.iter().enumerate() {
            let v = dist2(g, p.iter(), &scales);
            if v < best[i] {
                best[i] = v;
            }
        }
    }
    let points = DMatrix::from_fn(idx.len(), d, |i, j| gp[idx[i]][j]);
    Ok(ExtrapolationSet {
        axes: region.axes.iter().map(|a| a.name.clone()).collect(),
        points,
        objective: obj,
        grid_index: idx,
        normalized: region.normalize,
    })
}
