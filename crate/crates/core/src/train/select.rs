use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cost::{CostSpec, Objective};
use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::linalg::{equilibrated_cond, gram, lstsq};
use crate::model::{Basis, PgnnModel, PhysicsModel};

pub const DEFAULT_COND_LIMIT: f64 = 1e12;

/// Which parts of the linear-in-the-parameters block to select.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinearBlock {
    pub out_weights: bool,
    pub out_bias: bool,
    pub physics: bool,
}

impl LinearBlock {
    pub const ALL: Self = Self { out_weights: true, out_bias: true, physics: true };

    pub fn indices(&self, model: &PgnnModel) -> Vec<usize> {
        let np = model.n_phys();
        let mut idx = Vec::new();
        if self.physics {
            idx.extend(0..np);
        }
        if let Some(out) = model.nn.layers.last() {
            let off = np + model.nn.output_offset();
            if self.out_weights {
                idx.extend(off..off + out.w.len());
            }
            if self.out_bias {
                idx.push(off + out.w.len());
            }
        }
        idx
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Selection {
    /// Condition estimate of the (Jacobi-equilibrated) normal matrix M.
    pub cond: f64,
    pub cost: f64,
}

/// Exact minimizer of the cost over the parameters `idx`, all others fixed.
/// Valid because û is affine in the output layer and in LIP physics; the
/// regularization and compliance rows are affine too.
pub fn select_indices(
    model: &mut PgnnModel,
    ds: &DataSet,
    spec: &CostSpec,
    idx: &[usize],
    cond_limit: f64,
) -> Result<Selection> {
    if idx.is_empty() {
        let obj = Objective::new(model, ds, spec, Some(vec![]))?;
        return Ok(Selection { cond: 1.0, cost: obj.cost(model)? });
    }
    let obj = Objective::new(model, ds, spec, Some(idx.to_vec()))?;
    let mut p = model.params();
    for &i in idx {
        p[i] = 0.0;
    }
    let mut m0 = model.clone();
    m0.set_params(&p)?;
    let (r0, jac) = obj.residual_jacobian(&m0)?;
    let m = gram(&jac);
    let cond = equilibrated_cond(&m);
    if !(cond <= cond_limit) {
        return Err(Error::IllConditioned { cond, limit: cond_limit });
    }
    let (x, _) = lstsq(&jac, &(-r0))?;
    for (k, &i) in idx.iter().enumerate() {
        p[i] = x[k];
    }
    model.set_params(&p)?;
    Ok(Selection { cond, cost: obj.cost(model)? })
}

/// Optimized selection of θ_L = [col(W_{L+1}); B_{L+1}; θ_phy] for the
/// current hidden-layer parameters.
pub fn optimized_lip_selection(model: &mut PgnnModel, ds: &DataSet, spec: &CostSpec) -> Result<Selection> {
    let idx = LinearBlock::ALL.indices(model);
    select_indices(model, ds, spec, &idx, DEFAULT_COND_LIMIT)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysicsFit {
    pub theta: Vec<f64>,
    /// Standard errors from σ̂²(ΦᵀΦ)⁻¹.
    pub std_err: Vec<f64>,
    pub mse: f64,
    pub cond: f64,
}

/// Least-squares physics parameters (best linear approximation).
pub fn fit_physics(ds: &DataSet, basis: Basis, cond_limit: f64) -> Result<PhysicsFit> {
    basis.check(&ds.spec)?;
    let phi = basis.eval_rows(&ds.spec, ds.ts, &ds.phi);
    let p = phi.ncols();
    if p == 0 {
        return Err(Error::Invalid("physics basis is empty".into()));
    }
    let m = gram(&phi);
    let cond = equilibrated_cond(&m);
    if !(cond <= cond_limit) {
        return Err(Error::IllConditioned { cond, limit: cond_limit });
    }
    let (theta, _) = lstsq(&phi, &ds.u)?;
    let resid = &ds.u - &phi * &theta;
    let n = ds.len();
    let mse = resid.norm_squared() / n as f64;
    let std_err = if n > p {
        let s2 = resid.norm_squared() / (n - p) as f64;
        match scaled_inverse_diag(&m) {
            Some(d) => d.iter().map(|v| (s2 * v).sqrt()).collect(),
            None => vec![f64::NAN; p],
        }
    } else {
        vec![f64::NAN; p]
    };
    Ok(PhysicsFit { theta: theta.as_slice().to_vec(), std_err, mse, cond })
}

fn scaled_inverse_diag(m: &DMatrix<f64>) -> Option<Vec<f64>> {
    let n = m.nrows();
    let d = DVector::from_fn(n, |i, _| 1.0 / m[(i, i)].sqrt());
    let s = DMatrix::from_fn(n, n, |i, j| d[i] * m[(i, j)] * d[j]);
    let inv = s.try_inverse()?;
    Some((0..n).map(|i| inv[(i, i)] * d[i] * d[i]).collect())
}

pub fn physics_model(fit: &PhysicsFit, basis: Basis) -> PhysicsModel {
    PhysicsModel::new(basis, fit.theta.clone())
}
