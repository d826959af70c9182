use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::DataSet;
use crate::error::{dim, Error, Result};
use crate::model::{Features, PgnnModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostVariant {
    Mse,
    Pinn,
    PgnnReg,
    PgnnExtrap,
}

/// Diagonal weight: a scalar times identity or an explicit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weights {
    Scalar(f64),
    Diag(Vec<f64>),
}

impl Default for Weights {
    fn default() -> Self {
        Weights::Scalar(0.0)
    }
}

impl Weights {
    pub fn resolve(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            Weights::Scalar(s) => Ok(vec![*s; n]),
            Weights::Diag(d) => {
                dim("regularization diagonal", n, d.len())?;
                Ok(d.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub variant: CostVariant,
    #[serde(default)]
    pub lambda_nn: Weights,
    #[serde(default)]
    pub lambda_phy: Weights,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub theta_phy_star: Vec<f64>,
    /// Extrapolation regressors Z^E (one per row).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_e: Option<DMatrix<f64>>,
}

impl CostSpec {
    pub fn mse() -> Self {
        Self {
            variant: CostVariant::Mse,
            lambda_nn: Weights::Scalar(0.0),
            lambda_phy: Weights::Scalar(0.0),
            gamma: 0.0,
            c: 0.0,
            theta_phy_star: vec![],
            z_e: None,
        }
    }

    pub fn validate(&self, model: &PgnnModel) -> Result<()> {
        let has_reg = !matches!(self.variant, CostVariant::Mse);
        if has_reg || self.variant == CostVariant::Pinn {
            dim("theta_phy_star", model.n_phys(), self.theta_phy_star.len())?;
        }
        if let (CostVariant::Pinn, Some(z)) = (self.variant, &self.z_e) {
            dim("Z_E width", model.spec.len(), z.ncols())?;
        }
        if self.variant == CostVariant::PgnnExtrap {
            let ok = self.z_e.as_ref().map(|z| z.nrows() > 0).unwrap_or(false);
            if !ok || self.gamma <= 0.0 {
                return Err(Error::Invalid("extrapolation cost needs a nonempty Z_E and gamma > 0".into()));
            }
            dim("Z_E width", model.spec.len(), self.z_e.as_ref().unwrap().ncols())?;
        }
        if self.gamma < 0.0 || self.c < 0.0 {
            return Err(Error::Invalid("gamma and c must be nonnegative".into()));
        }
        Ok(())
    }

    fn uses_reg(&self) -> bool {
        !matches!(self.variant, CostVariant::Mse)
    }

    /// Z^E compliance is active (always for PGNN_EXTRAP; optional for PINN).
    fn uses_ze(&self) -> bool {
        match self.variant {
            CostVariant::PgnnExtrap => true,
            CostVariant::Pinn => self.gamma > 0.0 && self.z_e.as_ref().is_some_and(|z| z.nrows() > 0),
            _ => false,
        }
    }

    /// Full regularization diagonal in flat-parameter order, and θ̄.
    pub fn reg_diag(&self, model: &PgnnModel) -> Result<(Vec<f64>, Vec<f64>)> {
        let np = model.n_phys();
        let nn = model.nn.n_params();
        let mut lam = self.lambda_phy.resolve(np)?;
        lam.extend(self.lambda_nn.resolve(nn)?);
        let mut bar = if self.theta_phy_star.len() == np { self.theta_phy_star.clone() } else { vec![0.0; np] };
        bar.extend(std::iter::repeat_n(0.0, nn));
        Ok((lam, bar))
    }
}

pub fn cost_mse(model: &PgnnModel, ds: &DataSet) -> Result<f64> {
    let e = &ds.u - model.predict(&ds.phi)?;
    Ok(e.norm_squared() / ds.len() as f64)
}

/// ‖diag(Λ_phy, Λ_NN)(θ − θ̄)‖², θ̄ = [θ_phy*; 0].
pub fn cost_reg(model: &PgnnModel, spec: &CostSpec) -> Result<f64> {
    let (lam, bar) = spec.reg_diag(model)?;
    let th = model.params();
    Ok(th.iter().zip(&bar).zip(&lam).map(|((t, b), l)| (l * (t - b)).powi(2)).sum())
}

/// Mean squared gap between θ*-physics and the full model over `points`.
pub fn cost_phy_compliance(model: &PgnnModel, theta_phy_star: &[f64], points: &DMatrix<f64>) -> Result<f64> {
    if points.nrows() == 0 {
        return Err(Error::Invalid("compliance needs at least one point".into()));
    }
    dim("theta_phy_star", model.n_phys(), theta_phy_star.len())?;
    let f = model.features(points)?;
    let reference = physics_reference(&f, theta_phy_star);
    let d = reference - model.predict_features(&f)?;
    Ok(d.norm_squared() / points.nrows() as f64)
}

fn physics_reference(f: &Features, theta: &[f64]) -> DVector<f64> {
    if theta.is_empty() {
        DVector::zeros(f.len())
    } else {
        &f.phys * DVector::from_column_slice(theta)
    }
}

pub fn total_cost(model: &PgnnModel, ds: &DataSet, spec: &CostSpec) -> Result<f64> {
    spec.validate(model)?;
    let mut v = cost_mse(model, ds)?;
    if spec.uses_reg() {
        v += cost_reg(model, spec)?;
    }
    if spec.variant == CostVariant::Pinn && spec.c > 0.0 {
        v += spec.c * cost_phy_compliance(model, &spec.theta_phy_star, &ds.phi)?;
    }
    if spec.uses_ze() {
        v += spec.gamma * cost_phy_compliance(model, &spec.theta_phy_star, spec.z_e.as_ref().unwrap())?;
    }
    Ok(v)
}

struct Block {
    feats: Features,
    target: DVector<f64>,
    weight: f64,
}

/// The cost as a stacked residual ‖r(θ)‖²: data rows (û−u)/√N, compliance
/// rows √(w/P)(û − f_phy(θ*)), regularization rows Λ(θ − θ̄) over the free
/// parameters. Frozen parameters are held at the model's current values.
pub struct Objective {
    blocks: Vec<Block>,
    lam: Vec<f64>,
    bar: Vec<f64>,
    pub free: Vec<usize>,
}

impl Objective {
    pub fn new(model: &PgnnModel, ds: &DataSet, spec: &CostSpec, free: Option<Vec<usize>>) -> Result<Self> {
        spec.validate(model)?;
        let feats = model.features(&ds.phi)?;
        let n = ds.len() as f64;
        let mut blocks = vec![Block { feats: feats.clone(), target: ds.u.clone(), weight: 1.0 / n }];
        if spec.variant == CostVariant::Pinn && spec.c > 0.0 {
            let target = physics_reference(&feats, &spec.theta_phy_star);
            blocks.push(Block { feats, target, weight: spec.c / n });
        }
        if spec.uses_ze() {
            let z = spec.z_e.as_ref().unwrap();
            let f = model.features(z)?;
            let target = physics_reference(&f, &spec.theta_phy_star);
            blocks.push(Block { feats: f, target, weight: spec.gamma / z.nrows() as f64 });
        }
        let (mut lam, bar) = spec.reg_diag(model)?;
        if !spec.uses_reg() {
            lam.iter_mut().for_each(|l| *l = 0.0);
        }
        let free = free.unwrap_or_else(|| (0..model.n_params()).collect());
        Ok(Self { blocks, lam, bar, free })
    }

    fn n_reg(&self) -> usize {
        self.free.iter().filter(|&&i| self.lam[i] != 0.0).count()
    }

    pub fn n_rows(&self) -> usize {
        self.blocks.iter().map(|b| b.target.len()).sum::<usize>() + self.n_reg()
    }

    pub fn residual(&self, model: &PgnnModel) -> Result<DVector<f64>> {
        let mut r = DVector::zeros(self.n_rows());
        let mut off = 0;
        for b in &self.blocks {
            let y = model.predict_features(&b.feats)?;
            let s = b.weight.sqrt();
            let n = y.len();
            r.rows_mut(off, n).copy_from(&((y - &b.target) * s));
            off += n;
        }
        let th = model.params();
        for &i in &self.free {
            if self.lam[i] != 0.0 {
                r[off] = self.lam[i] * (th[i] - self.bar[i]);
                off += 1;
            }
        }
        Ok(r)
    }

    pub fn cost(&self, model: &PgnnModel) -> Result<f64> {
        Ok(self.residual(model)?.norm_squared() + self.frozen_reg(model))
    }

    /// Regularization contribution of frozen parameters (constant).
    fn frozen_reg(&self, model: &PgnnModel) -> f64 {
        let th = model.params();
        let mut is_free = vec![false; th.len()];
        self.free.iter().for_each(|&i| is_free[i] = true);
        (0..th.len()).filter(|&i| !is_free[i]).map(|i| (self.lam[i] * (th[i] - self.bar[i])).powi(2)).sum()
    }

    /// Residual and its Jacobian with respect to the free parameters.
    pub fn residual_jacobian(&self, model: &PgnnModel) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let rows = self.n_rows();
        let nf = self.free.len();
        let mut r = DVector::zeros(rows);
        let mut jac = DMatrix::zeros(rows, nf);
        let mut off = 0;
        for b in &self.blocks {
            let (y, j) = model.jacobian_features(&b.feats)?;
            let s = b.weight.sqrt();
            let n = y.len();
            r.rows_mut(off, n).copy_from(&((y - &b.target) * s));
            for (c, &i) in self.free.iter().enumerate() {
                let mut col = jac.view_mut((off, c), (n, 1));
                col.copy_from(&j.column(i));
                col.scale_mut(s);
            }
            off += n;
        }
        let th = model.params();
        for (c, &i) in self.free.iter().enumerate() {
            if self.lam[i] != 0.0 {
                r[off] = self.lam[i] * (th[i] - self.bar[i]);
                jac[(off, c)] = self.lam[i];
                off += 1;
            }
        }
        Ok((r, jac))
    }
}
