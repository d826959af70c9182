use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::cost::Objective;
use crate::error::{Error, Result};
use crate::linalg::gram;
use crate::model::PgnnModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Damping {
    /// μ·(diag(JᵀJ) + floor): scale-invariant across parameter groups.
    Marquardt,
    /// μ·I.
    Identity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmOptions {
    pub mu_init: f64,
    pub mu_raise: f64,
    pub mu_lower: f64,
    pub max_epochs: usize,
    pub rel_tol: f64,
    pub grad_tol: f64,
    pub max_rejects: usize,
    pub damping: Damping,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            mu_init: 1e-3,
            mu_raise: 10.0,
            mu_lower: 0.5,
            max_epochs: 200,
            rel_tol: 1e-9,
            grad_tol: 1e-8,
            max_rejects: 30,
            damping: Damping::Marquardt,
        }
    }
}

impl LmOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_raise > 1.0) || !(self.mu_lower > 0.0 && self.mu_lower < 1.0) || !(self.mu_init > 0.0) {
            return Err(Error::Invalid("LM damping factors: need mu_init > 0, mu_raise > 1, 0 < mu_lower < 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    RelativeDecrease,
    Gradient,
    NoDescent,
    Hook,
}

fn gather(p: &[f64], free: &[usize]) -> DVector<f64> {
    DVector::from_iterator(free.len(), free.iter().map(|&i| p[i]))
}

/// Levenberg–Marquardt on the free parameters of `model`. `hook` runs after
/// every accepted step (epoch) and may modify the model (projection) or
/// request a stop. Returns the stop reason and number of epochs taken.
pub fn minimize(
    model: &mut PgnnModel,
    obj: &Objective,
    opts: &LmOptions,
    mut hook: impl FnMut(&mut PgnnModel, usize, f64) -> Result<Control>,
) -> Result<(StopReason, usize)> {
    opts.validate()?;
    let free = obj.free.clone();
    let mut mu = opts.mu_init;
    let mut cost = obj.cost(model)?;
    if !cost.is_finite() {
        return Err(Error::NonFinite("initial cost".into()));
    }
    for epoch in 1..=opts.max_epochs {
        let (r, jac) = obj.residual_jacobian(model)?;
        let g = jac.tr_mul(&r);
        if g.amax() < opts.grad_tol {
            return Ok((StopReason::Gradient, epoch - 1));
        }
        let h = gram(&jac);
        drop(jac);
        let n = h.nrows();
        let dmax = h.diagonal().max().max(0.0);
        let floor = 1e-12 * dmax + f64::MIN_POSITIVE;
        let base = model.params();
        let x0 = gather(&base, &free);
        let mut accepted = None;
        for _ in 0..opts.max_rejects {
            let mut a = h.clone();
            for i in 0..n {
                a[(i, i)] += match opts.damping {
                    Damping::Marquardt => mu * (h[(i, i)] + floor),
                    Damping::Identity => mu,
                };
            }
            let step = match a.cholesky() {
                Some(c) => -c.solve(&g),
                None => {
                    mu *= opts.mu_raise;
                    continue;
                }
            };
            let x = &x0 + step;
            let mut p = base.clone();
            for (k, &i) in free.iter().enumerate() {
                p[i] = x[k];
            }
            let mut cand = model.clone();
            cand.set_params(&p)?;
            let c = obj.cost(&cand)?;
            if c.is_finite() && c < cost {
                accepted = Some((cand, c));
                mu *= opts.mu_lower;
                break;
            }
            mu *= opts.mu_raise;
            if !mu.is_finite() {
                return Err(Error::NonFinite("LM damping diverged".into()));
            }
        }
        let Some((cand, c)) = accepted else {
            return Ok((StopReason::NoDescent, epoch - 1));
        };
        let rel = (cost - c) / cost.max(f64::MIN_POSITIVE);
        *model = cand;
        cost = c;
        if hook(model, epoch, cost)? == Control::Stop {
            return Ok((StopReason::Hook, epoch));
        }
        // the hook may have projected the iterate
        cost = obj.cost(model)?;
        if rel < opts.rel_tol {
            return Ok((StopReason::RelativeDecrease, epoch));
        }
    }
    Ok((StopReason::MaxEpochs, opts.max_epochs))
}
