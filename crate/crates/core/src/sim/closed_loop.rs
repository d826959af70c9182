use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::feedback::FeedbackLaw;
use super::plant::Plant;
use super::reference::ReferenceTrajectory;
use crate::data::{IoLog, RegressorSpec};
use crate::error::{Error, Result};
use crate::model::PgnnModel;
use crate::stability::FeedforwardStateSpace;

/// A feedforward filter driven by the previewed reference.
pub trait Feedforward {
    /// Largest reference lead needed: r(k + lead()).
    fn lead(&self) -> usize;
    /// Number of reference samples in the window ending at r(k + lead()).
    fn window(&self) -> usize;
    fn reset(&mut self);
    /// `r_win` = [r(k+lead), …, r(k+lead−window+1)].
    fn step(&mut self, r_win: &[f64]) -> Result<f64>;
}

/// Inverse model evaluated on the reference, fed back its own past outputs.
pub struct ModelFeedforward {
    pub model: PgnnModel,
    past: Vec<f64>,
    phi: DVector<f64>,
}

impl ModelFeedforward {
    pub fn new(model: PgnnModel) -> Self {
        let n = model.spec.u_len();
        let d = model.spec.len();
        Self { model, past: vec![0.0; n], phi: DVector::zeros(d) }
    }

    fn spec(&self) -> &RegressorSpec {
        &self.model.spec
    }
}

impl Feedforward for ModelFeedforward {
    fn lead(&self) -> usize {
        self.spec().lead()
    }

    fn window(&self) -> usize {
        self.spec().y_len()
    }

    fn reset(&mut self) {
        self.past.iter_mut().for_each(|v| *v = 0.0);
    }

    fn step(&mut self, r_win: &[f64]) -> Result<f64> {
        let yl = self.spec().y_len();
        for j in 0..yl {
            self.phi[j] = r_win[j];
        }
        for (i, v) in self.past.iter().enumerate() {
            self.phi[yl + i] = *v;
        }
        let u = self.model.eval(&self.phi)?;
        if !self.past.is_empty() {
            self.past.rotate_right(1);
            self.past[0] = u;
        }
        Ok(u)
    }
}

/// State-space feedforward filter (e.g. a ZPETC linear part with a network).
pub struct StateSpaceFeedforward {
    pub ss: FeedforwardStateSpace,
    x: DVector<f64>,
}

impl StateSpaceFeedforward {
    pub fn new(ss: FeedforwardStateSpace) -> Self {
        let n = ss.n_x();
        Self { ss, x: DVector::zeros(n) }
    }
}

impl Feedforward for StateSpaceFeedforward {
    fn lead(&self) -> usize {
        self.ss.lead
    }

    fn window(&self) -> usize {
        self.ss.n_r
    }

    fn reset(&mut self) {
        self.x.fill(0.0);
    }

    fn step(&mut self, r_win: &[f64]) -> Result<f64> {
        let phi_r = DVector::from_column_slice(r_win);
        let (u, xn) = self.ss.step(&self.x, &phi_r, 1.0)?;
        self.x = xn;
        Ok(u)
    }
}

/// White input dither on samples `[from, to)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dither {
    pub variance: f64,
    pub from: usize,
    pub to: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOptions {
    /// Abort if |u_ff| exceeds this.
    pub saturation_guard: f64,
    pub dither: Option<Dither>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { saturation_guard: 1e6, dither: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub ts: f64,
    pub r: Vec<f64>,
    pub u_ff: Vec<f64>,
    pub u_fb: Vec<f64>,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub e: Vec<f64>,
    pub mae: f64,
    pub mse: f64,
}

impl ScenarioResult {
    /// Closed-loop input/output log (u includes dither).
    pub fn log(&self) -> IoLog {
        IoLog::new(self.ts, self.u.clone(), self.y.clone()).expect("equal lengths")
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,r,u_ff,u_fb,u,y,e\n");
        for k in 0..self.r.len() {
            s.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                k as f64 * self.ts,
                self.r[k],
                self.u_ff[k],
                self.u_fb[k],
                self.u[k],
                self.y[k],
                self.e[k]
            ));
        }
        s
    }
}

/// (MAE, MSE) of a tracking-error trace.
pub fn metrics(e: &[f64]) -> Result<(f64, f64)> {
    if e.is_empty() {
        return Err(Error::Invalid("empty trace".into()));
    }
    let n = e.len() as f64;
    Ok((e.iter().map(|v| v.abs()).sum::<f64>() / n, e.iter().map(|v| v * v).sum::<f64>() / n))
}

/// Simulate u = u_fb + u_ff (+ dither) on the plant, starting at rest at
/// the initial setpoint.
pub fn run_closed_loop(
    plant: &mut Plant,
    fb: &mut FeedbackLaw,
    mut ff: Option<&mut dyn Feedforward>,
    reference: &ReferenceTrajectory,
    opts: &RunOptions,
) -> Result<ScenarioResult> {
    let n = reference.len();
    if n == 0 {
        return Err(Error::Invalid("empty reference".into()));
    }
    plant.reset();
    fb.reset();
    if let Some(f) = ff.as_deref_mut() {
        f.reset();
    }
    // start at the initial setpoint
    let r0 = reference.r[0];
    match plant.state().len() {
        2 => plant.set_state(&[r0, 0.0]),
        _ => plant.set_state(&[r0, 0.0, 0.0, 0.0]),
    }
    let mut noise = opts.dither.map(|d| {
        (d, ChaCha8Rng::seed_from_u64(d.seed), Normal::new(0.0, d.variance.sqrt()).expect("finite variance"))
    });
    let mut res = ScenarioResult {
        ts: reference.ts,
        r: Vec::with_capacity(n),
        u_ff: Vec::with_capacity(n),
        u_fb: Vec::with_capacity(n),
        w: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        e: Vec::with_capacity(n),
        mae: 0.0,
        mse: 0.0,
    };
    let mut win = Vec::new();
    let mut y = plant.output();
    for k in 0..n {
        let r = reference.r[k];
        let e = r - y;
        let u_fb = fb.step(e);
        let u_ff = match ff.as_deref_mut() {
            Some(f) => {
                let (lead, w) = (f.lead() as isize, f.window());
                win.clear();
                win.extend((0..w).map(|j| reference.at(k as isize + lead - j as isize)));
                let u = f.step(&win)?;
                if !(u.abs() <= opts.saturation_guard) {
                    return Err(Error::Diverged { step: k, value: u.abs() });
                }
                u
            }
            None => 0.0,
        };
        let w = match noise.as_mut() {
            Some((d, rng, dist)) if k >= d.from && k < d.to => dist.sample(rng),
            _ => 0.0,
        };
        let u = u_fb + u_ff + w;
        res.r.push(r);
        res.u_ff.push(u_ff);
        res.u_fb.push(u_fb);
        res.w.push(w);
        res.u.push(u);
        res.y.push(y);
        res.e.push(e);
        y = plant.step(u)?;
    }
    let (mae, mse) = metrics(&res.e)?;
    res.mae = mae;
    res.mse = mse;
    Ok(res)
}
