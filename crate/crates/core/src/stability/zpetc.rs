use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::data::RegressorSpec;
use crate::error::{dim, Error, Result};
use crate::linalg::{conv, poly_from_roots, poly_roots};

/// Moduli at or above this count as unstable.
pub const UNSTABLE_THRESHOLD: f64 = 1.0 - 1e-9;

/// y(k) = q^{−delay} · num(q⁻¹)/den(q⁻¹) · u(k), coefficients in powers of q⁻¹.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardModel {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    pub delay: usize,
}

impl ForwardModel {
    /// Forward model implied by a linear inverse model u(k) = θ_rᵀφ_y + θ_uffᵀφ_u
    /// on an unextended spec: den = θ_r, num = 1 − Σ θ_uff[i] q^{−i−1}.
    pub fn from_inverse_theta(spec: &RegressorSpec, theta: &[f64]) -> Result<Self> {
        if spec.n_pw != 0 || spec.n_us != 0 {
            return Err(Error::Invalid("forward model needs an unextended spec".into()));
        }
        dim("linear inverse parameters", spec.len(), theta.len())?;
        let (r, uff) = theta.split_at(spec.y_len());
        let mut num = vec![1.0];
        num.extend(uff.iter().map(|v| -v));
        Ok(Self { num, den: r.to_vec(), delay: spec.n_k + 1 })
    }

    /// Zeros of the numerator (roots in z).
    pub fn zeros(&self) -> Vec<Complex<f64>> {
        poly_roots(&self.num)
    }

    pub fn poles(&self) -> Vec<Complex<f64>> {
        poly_roots(&self.den)
    }

    pub fn unstable_zero_count(&self) -> usize {
        self.zeros().iter().filter(|z| z.norm() >= UNSTABLE_THRESHOLD).count()
    }

    /// Frequency response at z (including the delay).
    pub fn response(&self, z: Complex<f64>) -> Complex<f64> {
        use crate::linalg::eval_poly_qinv;
        eval_poly_qinv(&self.num, z) / eval_poly_qinv(&self.den, z) * z.powi(-(self.delay as i32))
    }
}

/// Stable (approximate) inverse u(k) = num(q⁻¹)/den(q⁻¹) · y(k + delay + preview).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZpetcFilter {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    pub delay: usize,
    pub preview: usize,
}

impl ZpetcFilter {
    pub fn response(&self, z: Complex<f64>) -> Complex<f64> {
        use crate::linalg::eval_poly_qinv;
        eval_poly_qinv(&self.num, z) / eval_poly_qinv(&self.den, z) * z.powi((self.delay + self.preview) as i32)
    }

    pub fn poles(&self) -> Vec<Complex<f64>> {
        poly_roots(&self.den)
    }

    pub fn spectral_radius(&self) -> f64 {
        self.poles().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Express the filter as a linear inverse model on the spec extended by
    /// n_pw = n_us = preview. `base` is the unextended spec it came from.
    pub fn to_theta(&self, base: &RegressorSpec) -> Result<(RegressorSpec, Vec<f64>)> {
        let mut spec = *base;
        spec.n_pw = self.preview;
        spec.n_us = self.preview;
        spec.validate()?;
        let mut theta = vec![0.0; spec.len()];
        let a0 = self.den[0];
        if self.num.len() > spec.y_len() || self.den.len() - 1 > spec.u_len() {
            return Err(Error::Invalid("stable inverse does not fit the extended spec".into()));
        }
        for (j, v) in self.num.iter().enumerate() {
            theta[j] = v / a0;
        }
        for (i, v) in self.den.iter().skip(1).enumerate() {
            theta[spec.y_len() + i] = -v / a0;
        }
        Ok((spec, theta))
    }
}

/// ZPETC: the unstable numerator factor B_u(q⁻¹) of `g` is replaced by
/// B_u(q)/B_u(1)², which needs `n_us` samples of extra preview.
/// Poles of `g` may lie on the unit circle (integrating plants).
pub fn zpetc_inverse(g: &ForwardModel) -> Result<ZpetcFilter> {
    if g.num.is_empty() || g.den.is_empty() {
        return Err(Error::Invalid("empty forward model".into()));
    }
    // poles of G become zeros of the inverse and do not affect its
    // stability; rigid-body modes put one at z = 1
    // leading zeros of num would be extra delay
    let lead = g.num.iter().position(|v| *v != 0.0).ok_or_else(|| Error::Invalid("zero numerator".into()))?;
    let num = &g.num[lead..];
    let delay = g.delay + lead;
    let zeros = poly_roots(num);
    if let Some(z) = zeros.iter().find(|z| (z.norm() - 1.0).abs() < 1e-9) {
        return Err(Error::UnitCircleZero((z.re, z.im)));
    }
    let (unstable, stable): (Vec<_>, Vec<_>) = zeros.iter().partition(|z| z.norm() >= UNSTABLE_THRESHOLD);
    let k = num[0];
    // B_s monic in q⁻¹: Π(1 − z q⁻¹) has the same coefficients as Π(z − z_i)
    let bs = poly_from_roots(&stable);
    let bu = poly_from_roots(&unstable);
    let bu1: f64 = bu.iter().sum();
    let mut bu_rev = bu.clone();
    bu_rev.reverse();
    let mut inv_num = conv(&g.den, &bu_rev);
    let scale = 1.0 / (k * bu1 * bu1);
    inv_num.iter_mut().for_each(|v| *v *= scale);
    Ok(ZpetcFilter { num: inv_num, den: bs, delay, preview: unstable.len() })
}
