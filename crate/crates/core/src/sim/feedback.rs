use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Continuous transfer function, coefficients in descending powers of s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferFunction {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl TransferFunction {
    /// Lead-lag controller of the nonminimum-phase study, 5e3 (s+4π)/(s+20π).
    pub fn rotating_reference() -> Self {
        use std::f64::consts::PI;
        Self { num: vec![5e3, 5e3 * 4.0 * PI], den: vec![1.0, 20.0 * PI] }
    }

    /// Loop-shaped motor controller.
    pub fn clm_reference() -> Self {
        Self { num: vec![1.056e8, 2.282e9, 7.884e9], den: vec![1.0, 547.4, 7.643e4, -0.0001669] }
    }

    pub fn dc_gain(&self) -> f64 {
        self.num.last().copied().unwrap_or(0.0) / self.den.last().copied().unwrap_or(f64::NAN)
    }

    /// Controllable canonical realization (A, B, C, D).
    pub fn realize(&self) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>, f64)> {
        let den0 = *self.den.first().ok_or_else(|| Error::Invalid("empty denominator".into()))?;
        if den0 == 0.0 || self.num.len() > self.den.len() {
            return Err(Error::Invalid("transfer function must be proper".into()));
        }
        let n = self.den.len() - 1;
        let a: Vec<f64> = self.den.iter().map(|v| v / den0).collect();
        let mut b = vec![0.0; n + 1];
        let off = n + 1 - self.num.len();
        for (i, v) in self.num.iter().enumerate() {
            b[off + i] = v / den0;
        }
        let d = b[0];
        let mut am = DMatrix::zeros(n, n);
        for j in 0..n {
            am[(0, j)] = -a[j + 1];
        }
        for i in 1..n {
            am[(i, i - 1)] = 1.0;
        }
        let mut bm = DVector::zeros(n);
        if n > 0 {
            bm[0] = 1.0;
        }
        let cm = DVector::from_fn(n, |j, _| b[j + 1] - d * a[j + 1]);
        Ok((am, bm, cm, d))
    }
}

/// ZOH discretization (A_d, B_d) of ẋ = Ax + Bu via exp([[A, B], [0, 0]] T_s).
pub fn zoh(a: &DMatrix<f64>, b: &DVector<f64>, ts: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = a.nrows();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&(a * ts));
    m.view_mut((0, n), (n, 1)).copy_from(&(b * ts));
    let e = m.exp();
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, 1)).column(0).into_owned())
}

/// Discrete feedback controller u_fb(k) = C(q) e(k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackLaw {
    pub tf: TransferFunction,
    pub ts: f64,
    pub ad: DMatrix<f64>,
    pub bd: DVector<f64>,
    pub cd: DVector<f64>,
    pub dd: f64,
    x: DVector<f64>,
}

impl FeedbackLaw {
    pub fn new(tf: TransferFunction, ts: f64) -> Result<Self> {
        let (a, b, c, d) = tf.realize()?;
        let (ad, bd) = zoh(&a, &b, ts);
        let n = a.nrows();
        Ok(Self { tf, ts, ad, bd, cd: c, dd: d, x: DVector::zeros(n) })
    }

    pub fn reset(&mut self) {
        self.x.fill(0.0);
    }

    pub fn step(&mut self, e: f64) -> f64 {
        let u = self.cd.dot(&self.x) + self.dd * e;
        self.x = &self.ad * &self.x + &self.bd * e;
        u
    }

    /// DC gain of the discrete realization.
    pub fn dc_gain(&self) -> Option<f64> {
        let n = self.ad.nrows();
        let m = DMatrix::identity(n, n) - &self.ad;
        let x = m.lu().solve(&self.bd)?;
        Some(self.cd.dot(&x) + self.dd)
    }
}
