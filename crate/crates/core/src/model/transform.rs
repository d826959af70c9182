use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::RegressorSpec;
use crate::error::{Error, Result};

/// Input transformation T(φ) feeding the neural layer. Every supported kind
/// is linear in φ, so it is represented as a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputTransform {
    Identity,
    /// Δ[y, δy, δ²y] at k.
    PhysicalFeatures,
    /// Δ[y(k+2), …, y(k−2)].
    DeltaWindow,
}

impl InputTransform {
    pub fn width(&self, spec: &RegressorSpec) -> usize {
        match self {
            InputTransform::Identity => spec.len(),
            InputTransform::PhysicalFeatures => 3,
            InputTransform::DeltaWindow => 5,
        }
    }

    /// Matrix T with T(φ) = T·φ.
    pub fn matrix(&self, spec: &RegressorSpec, ts: f64) -> Result<DMatrix<f64>> {
        let d = spec.len();
        let idx = |j: isize| {
            spec.y_index(j).ok_or_else(|| Error::Invalid(format!("transform needs y(k{j:+}) in the regressor")))
        };
        match self {
            InputTransform::Identity => Ok(DMatrix::identity(d, d)),
            InputTransform::PhysicalFeatures => {
                let mut t = DMatrix::zeros(3, d);
                t[(0, idx(1)?)] += 0.5;
                t[(0, idx(0)?)] += 0.5;
                // Δδy = ¼(y(k+2) − y(k) + y(k+1) − y(k−1)) / T_s
                let c1 = 0.25 / ts;
                t[(1, idx(2)?)] += c1;
                t[(1, idx(0)?)] -= c1;
                t[(1, idx(1)?)] += c1;
                t[(1, idx(-1)?)] -= c1;
                let c2 = 0.125 / (ts * ts);
                for (j, w) in [(3, 1.0), (1, -2.0), (-1, 1.0), (2, 1.0), (0, -2.0), (-2, 1.0)] {
                    t[(2, idx(j)?)] += c2 * w;
                }
                Ok(t)
            }
            InputTransform::DeltaWindow => {
                let mut t = DMatrix::zeros(5, d);
                for i in 0..5 {
                    let j = 2 - i as isize;
                    t[(i, idx(j + 1)?)] += 0.5;
                    t[(i, idx(j)?)] += 0.5;
                }
                Ok(t)
            }
        }
    }
}
