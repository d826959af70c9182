use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sign0;

/// Synthetic stand-in for a coreless linear motor:
/// m ẍ = u − f_v ẋ − f_c sign(ẋ) − A_p sin(2πx/l_p).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClmParams {
    pub m: f64,
    pub f_v: f64,
    pub f_c: f64,
    pub a_p: f64,
    pub l_p: f64,
}

impl Default for ClmParams {
    fn default() -> Self {
        Self { m: 20.0, f_v: 50.0, f_c: 10.0, a_p: 1.0, l_p: 0.05 }
    }
}

/// Translating mass with rotational compliance and cogging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotatingParams {
    pub m: f64,
    pub l_x: f64,
    pub l_y: f64,
    /// Moment of inertia m(l_x² + l_y²)/3.
    pub big_m: f64,
    pub f_v: f64,
    pub k: f64,
    pub d: f64,
    pub l_m: f64,
    pub c: f64,
}

impl RotatingParams {
    pub fn new(m: f64, l_x: f64, l_y: f64, f_v: f64, k: f64, d: f64, l_m: f64, c: f64) -> Self {
        let big_m = m * (l_x * l_x + l_y * l_y) / 3.0;
        Self { m, l_x, l_y, big_m, f_v, k, d, l_m, c }
    }

    /// Parameter set of the nonminimum-phase simulation study.
    pub fn reference() -> Self {
        Self::new(20.0, 1.0, 1.0, 50.0, 25e3 / 3.0, 575.0 / 3.0, 0.05, 1.0)
    }

    /// Linear part (c = 0) as ẋ = Ax + Bu, y = Cx with state [x, ẋ, θ, θ̇].
    pub fn linear(&self) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let p = self;
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 0.0,
                0.0, -p.f_v / p.m, 0.0, 0.0,
                0.0, 0.0, 0.0, 1.0,
                0.0, 0.0, -2.0 * p.l_x * p.k / p.big_m, -2.0 * p.l_x * p.d / p.big_m,
            ],
        );
        let b = DVector::from_vec(vec![0.0, 1.0 / p.m, 0.0, p.l_y / p.big_m]);
        let c = DVector::from_vec(vec![1.0, 0.0, -p.l_y, 0.0]);
        (a, b, c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PlantParams {
    ClmSynthetic(ClmParams),
    Rotating(RotatingParams),
}

/// Continuous plant under zero-order hold, integrated with fixed-step RK4.
#[derive(Debug, Clone)]
pub struct Plant {
    pub params: PlantParams,
    pub ts: f64,
    pub substeps: usize,
    /// Optional output quantization step (encoder resolution).
    pub quantization: Option<f64>,
    state: Vec<f64>,
}

impl Plant {
    pub fn new(params: PlantParams, ts: f64) -> Result<Self> {
        if let PlantParams::Rotating(p) = &params {
            let want = p.m * (p.l_x * p.l_x + p.l_y * p.l_y) / 3.0;
            if (p.big_m - want).abs() > 1e-12 * want.abs().max(1.0) {
                return Err(Error::Invalid(format!("inertia {} inconsistent with m(l_x²+l_y²)/3 = {want}", p.big_m)));
            }
        }
        let n = match params {
            PlantParams::ClmSynthetic(_) => 2,
            PlantParams::Rotating(_) => 4,
        };
        Ok(Self { params, ts, substeps: 10, quantization: None, state: vec![0.0; n] })
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn set_state(&mut self, s: &[f64]) {
        self.state.copy_from_slice(s);
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    fn position(&self, s: &[f64]) -> f64 {
        match &self.params {
            PlantParams::ClmSynthetic(_) => s[0],
            PlantParams::Rotating(p) => s[0] - p.l_y * s[2],
        }
    }

    fn deriv(&self, s: &[f64], u: f64, out: &mut [f64]) {
        match &self.params {
            PlantParams::ClmSynthetic(p) => {
                let f = p.f_v * s[1] + p.f_c * sign0(s[1]) + p.a_p * (2.0 * PI * s[0] / p.l_p).sin();
                out[0] = s[1];
                out[1] = (u - f) / p.m;
            }
            PlantParams::Rotating(p) => {
                let y = s[0] - p.l_y * s[2];
                let g = p.c * (2.0 * PI * y / p.l_m).sin();
                out[0] = s[1];
                out[1] = (u - p.f_v * s[1] - g) / p.m;
                out[2] = s[3];
                out[3] = (p.l_y * (u - g) - 2.0 * p.l_x * (p.d * s[3] + p.k * s[2])) / p.big_m;
            }
        }
    }

    /// Sampled output at the current state.
    pub fn output(&self) -> f64 {
        let y = self.position(&self.state);
        match self.quantization {
            Some(q) if q > 0.0 => (y / q).round() * q,
            _ => y,
        }
    }

    /// Hold `u` for one sampling interval; returns the next sampled output.
    pub fn step(&mut self, u: f64) -> Result<f64> {
        let n = self.state.len();
        let h = self.ts / self.substeps as f64;
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut tmp = vec![0.0; n];
        for _ in 0..self.substeps {
            let s = self.state.clone();
            self.deriv(&s, u, &mut k1);
            for i in 0..n {
                tmp[i] = s[i] + 0.5 * h * k1[i];
            }
            self.deriv(&tmp, u, &mut k2);
            for i in 0..n {
                tmp[i] = s[i] + 0.5 * h * k2[i];
            }
            self.deriv(&tmp, u, &mut k3);
            for i in 0..n {
                tmp[i] = s[i] + h * k3[i];
            }
            self.deriv(&tmp, u, &mut k4);
            for i in 0..n {
                self.state[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        if self.state.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("plant state".into()));
        }
        Ok(self.output())
    }
}
