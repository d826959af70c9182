//! Physics, neural and physics-guided inverse-dynamics models.
//!
//! Flat parameter vector: θ_phy first, then for every layer col(W_l)
//! (column-major) followed by B_l.
mod nn;
mod physics;
mod transform;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use nn::{Activation, Layer, NeuralNet};
pub use physics::{Basis, PhysicsModel};
pub use transform::InputTransform;

use crate::data::{NormalizationRecord, RegressorSpec};
use crate::error::{dim, Result};

/// û(φ) = f_phy(φ) + f_NN(normalize(T φ)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgnnModel {
    pub spec: RegressorSpec,
    pub ts: f64,
    pub phys: PhysicsModel,
    pub nn: NeuralNet,
    pub transform: InputTransform,
    pub norm: NormalizationRecord,
}

/// Precomputed, parameter-independent features of a regressor set.
#[derive(Debug, Clone)]
pub struct Features {
    /// Physics basis rows (N × n_θphy).
    pub phys: DMatrix<f64>,
    /// Normalized NN inputs (N × n_0).
    pub nn: DMatrix<f64>,
}

impl Features {
    pub fn len(&self) -> usize {
        self.phys.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self { phys: self.phys.select_rows(idx), nn: self.nn.select_rows(idx) }
    }
}

impl PgnnModel {
    /// Model with the given physics and a zero-initialized net of `hidden`
    /// widths (empty slice and `with_nn = false` gives a physics-only model).
    pub fn new(
        spec: RegressorSpec,
        ts: f64,
        phys: PhysicsModel,
        transform: InputTransform,
        hidden: Option<&[usize]>,
    ) -> Result<Self> {
        spec.validate()?;
        phys.basis.check(&spec)?;
        dim("physics parameter count", phys.basis.len(&spec), phys.theta.len())?;
        let n0 = transform.width(&spec);
        transform.matrix(&spec, ts)?;
        let nn = match hidden {
            Some(h) => NeuralNet::zeros(n0, h),
            None => NeuralNet::empty(n0),
        };
        Ok(Self { spec, ts, phys, nn, transform, norm: NormalizationRecord::identity(n0) })
    }

    pub fn n_phys(&self) -> usize {
        self.phys.theta.len()
    }

    pub fn n_params(&self) -> usize {
        self.n_phys() + self.nn.n_params()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.phys.theta.clone();
        p.extend(self.nn.params());
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        dim("parameter count", self.n_params(), p.len())?;
        let np = self.n_phys();
        self.phys.theta.copy_from_slice(&p[..np]);
        self.nn.set_params(&p[np..])
    }

    pub fn transform_matrix(&self) -> DMatrix<f64> {
        self.transform.matrix(&self.spec, self.ts).expect("transform validated at construction")
    }

    /// Raw (unnormalized) transformed inputs T φ for each row.
    pub fn raw_nn_inputs(&self, phi: &DMatrix<f64>) -> DMatrix<f64> {
        phi * self.transform_matrix().transpose()
    }

    /// Fit the normalization record on the transformed training regressors.
    pub fn fit_normalization(&mut self, phi: &DMatrix<f64>) -> Result<()> {
        self.norm = NormalizationRecord::fit(&self.raw_nn_inputs(phi))?;
        Ok(())
    }

    pub fn features(&self, phi: &DMatrix<f64>) -> Result<Features> {
        dim("regressor width", self.spec.len(), phi.ncols())?;
        let phys = self.phys.basis.eval_rows(&self.spec, self.ts, phi);
        let nn = self.norm.apply_rows(&self.raw_nn_inputs(phi));
        Ok(Features { phys, nn })
    }

    pub fn nn_input(&self, phi: &DVector<f64>) -> DVector<f64> {
        self.norm.apply(&(self.transform_matrix() * phi))
    }

    pub fn eval_physics(&self, phi: &DVector<f64>) -> Result<f64> {
        dim("regressor width", self.spec.len(), phi.len())?;
        Ok(self.phys.eval(&self.spec, self.ts, phi.as_slice()))
    }

    pub fn eval(&self, phi: &DVector<f64>) -> Result<f64> {
        Ok(self.eval_physics(phi)? + self.nn.eval(&self.nn_input(phi))?)
    }

    pub fn predict_features(&self, f: &Features) -> Result<DVector<f64>> {
        let theta = DVector::from_column_slice(&self.phys.theta);
        let mut y = self.nn.eval_rows(&f.nn)?;
        if !theta.is_empty() {
            y += &f.phys * theta;
        }
        Ok(y)
    }

    pub fn predict(&self, phi: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.predict_features(&self.features(phi)?)
    }

    /// Predictions and parameter Jacobian (N × n_params).
    pub fn jacobian_features(&self, f: &Features) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (mut y, jn) = self.nn.jacobian_params_rows(&f.nn)?;
        let np = self.n_phys();
        let mut jac = DMatrix::zeros(f.len(), self.n_params());
        if np > 0 {
            y += &f.phys * DVector::from_column_slice(&self.phys.theta);
            jac.columns_mut(0, np).copy_from(&f.phys);
        }
        jac.columns_mut(np, jn.ncols()).copy_from(&jn);
        Ok((y, jac))
    }

    /// ∂û/∂θ at a single regressor.
    pub fn jacobian_params(&self, phi: &DVector<f64>) -> Result<DVector<f64>> {
        let m = DMatrix::from_row_slice(1, phi.len(), phi.as_slice());
        let (_, j) = self.jacobian_features(&self.features(&m)?)?;
        Ok(j.row(0).transpose())
    }

    /// Returns a copy of the network with normalization and the input
    /// transform folded into the first layer, so it acts on φ directly.
    pub fn nn_on_regressor(&self) -> NeuralNet {
        let mut nn = self.nn.clone();
        if nn.layers.is_empty() {
            nn.n_in = self.spec.len();
            return nn;
        }
        let t = self.transform_matrix();
        let inv = DVector::from_iterator(self.norm.len(), self.norm.scale.iter().map(|s| 1.0 / s));
        let shift = DVector::from_column_slice(&self.norm.shift);
        let l0 = &mut nn.layers[0];
        let w_scaled = &l0.w * DMatrix::from_diagonal(&inv);
        l0.b -= &w_scaled * shift;
        l0.w = w_scaled * t;
        nn.n_in = self.spec.len();
        nn
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.spec.validate()?;
        m.phys.basis.check(&m.spec)?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
