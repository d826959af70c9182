use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::RegressorSpec;
use crate::error::{Error, Result};
use crate::linalg::sign0;

/// Feature map T_phy(φ) of a linear-in-the-parameters physics model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// No physics layer.
    None,
    /// The regressor itself: θ_phyᵀφ, split as [θ_r; θ_uff].
    Linear,
    /// Mass + viscous + Coulomb friction, [Δδ²y, Δδy, Δ sign(δy)] at k.
    /// Needs y(k+3)…y(k−2) in φ.
    ClmMassFriction,
}

impl Basis {
    pub fn len(&self, spec: &RegressorSpec) -> usize {
        match self {
            Basis::None => 0,
            Basis::Linear => spec.len(),
            Basis::ClmMassFriction => 3,
        }
    }

    pub fn check(&self, spec: &RegressorSpec) -> Result<()> {
        if let Basis::ClmMassFriction = self {
            for j in -2..=3 {
                if spec.y_index(j).is_none() {
                    return Err(Error::Invalid(format!(
                        "mass-friction basis needs y(k{j:+}) in the regressor"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, spec: &RegressorSpec, ts: f64, phi: &[f64]) -> DVector<f64> {
        match self {
            Basis::None => DVector::zeros(0),
            Basis::Linear => DVector::from_column_slice(phi),
            Basis::ClmMassFriction => {
                let y = |j: isize| phi[spec.y_index(j).expect("basis checked against spec")];
                let acc1 = (y(3) - 2.0 * y(1) + y(-1)) / (4.0 * ts * ts);
                let acc0 = (y(2) - 2.0 * y(0) + y(-2)) / (4.0 * ts * ts);
                let vel1 = (y(2) - y(0)) / (2.0 * ts);
                let vel0 = (y(1) - y(-1)) / (2.0 * ts);
                DVector::from_vec(vec![
                    0.5 * (acc1 + acc0),
                    0.5 * (vel1 + vel0),
                    0.5 * (sign0(vel1) + sign0(vel0)),
                ])
            }
        }
    }

    pub fn eval_rows(&self, spec: &RegressorSpec, ts: f64, phi: &DMatrix<f64>) -> DMatrix<f64> {
        let p = self.len(spec);
        let mut out = DMatrix::zeros(phi.nrows(), p);
        if p == 0 {
            return out;
        }
        let mut row = vec![0.0; phi.ncols()];
        for i in 0..phi.nrows() {
            for (j, r) in row.iter_mut().enumerate() {
                *r = phi[(i, j)];
            }
            let f = self.eval(spec, ts, &row);
            for j in 0..p {
                out[(i, j)] = f[j];
            }
        }
        out
    }
}

/// f_phy(φ) = θ_phyᵀ T_phy(φ). All built-in bases are LIP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsModel {
    pub basis: Basis,
    pub theta: Vec<f64>,
}

impl PhysicsModel {
    pub fn new(basis: Basis, theta: Vec<f64>) -> Self {
        Self { basis, theta }
    }

    pub fn none() -> Self {
        Self { basis: Basis::None, theta: vec![] }
    }

    pub fn lip(&self) -> bool {
        true
    }

    pub fn eval(&self, spec: &RegressorSpec, ts: f64, phi: &[f64]) -> f64 {
        let f = self.basis.eval(spec, ts, phi);
        f.iter().zip(&self.theta).map(|(a, b)| a * b).sum()
    }

    /// ∂f_phy/∂θ_phy, which for a LIP model is the basis itself.
    pub fn jacobian_params(&self, spec: &RegressorSpec, ts: f64, phi: &[f64]) -> DVector<f64> {
        self.basis.eval(spec, ts, phi)
    }
}
