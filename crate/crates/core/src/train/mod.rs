//! Cost functionals, Levenberg–Marquardt training with restarts and early
//! stopping, optimized LIP parameter selection and hyperparameter helpers.
mod cost;
mod lm;
mod select;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use cost::{cost_mse, cost_phy_compliance, cost_reg, total_cost, CostSpec, CostVariant, Objective, Weights};
pub use lm::{minimize, Control, Damping, LmOptions, StopReason};
pub use select::{
    fit_physics, optimized_lip_selection, physics_model, select_indices, LinearBlock, PhysicsFit, Selection,
    DEFAULT_COND_LIMIT,
};

use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::model::PgnnModel;

/// Feasibility restoration applied after every accepted step.
pub trait Projection: Sync {
    /// Bring the model back into the admissible set.
    fn project(&self, model: &mut PgnnModel) -> Result<()>;
    /// Signed distance to the boundary; positive means admissible.
    fn margin(&self, model: &PgnnModel) -> Result<f64>;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub restarts: usize,
    pub patience: usize,
    pub seed: u64,
    /// Train θ_phy jointly (otherwise it stays at the model's value).
    pub train_phys: bool,
    /// Skip random init and optimized selection; continue from the model.
    pub warm_start: bool,
    /// Fit input normalization on the training regressors.
    pub normalize: bool,
    pub cond_limit: f64,
    pub lm: LmOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            patience: 20,
            seed: 0,
            train_phys: true,
            warm_start: false,
            normalize: true,
            cond_limit: DEFAULT_COND_LIMIT,
            lm: LmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartSummary {
    pub index: usize,
    pub best_val: Option<f64>,
    pub best_epoch: usize,
    pub epochs: usize,
    pub stop: Option<StopReason>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: PgnnModel,
    pub restart: usize,
    pub best_epoch: usize,
    pub train_trace: Vec<f64>,
    pub val_trace: Vec<f64>,
    /// Training cost after optimized initialization (epoch 0).
    pub epoch0_cost: f64,
    pub train_cost: f64,
    pub val_cost: f64,
    pub restarts: Vec<RestartSummary>,
    pub margin: Option<f64>,
    pub wall_time_s: f64,
}

impl TrainReport {
    /// Cost traces as CSV: `epoch,train,val`.
    pub fn traces_csv(&self) -> String {
        let mut s = String::from("epoch,train,val\n");
        for (i, (t, v)) in self.train_trace.iter().zip(&self.val_trace).enumerate() {
            s.push_str(&format!("{i},{t:e},{v:e}\n"));
        }
        s
    }
}

struct RunResult {
    model: PgnnModel,
    best_epoch: usize,
    train_trace: Vec<f64>,
    val_trace: Vec<f64>,
    epoch0: f64,
    stop: StopReason,
    epochs: usize,
}

fn free_indices(model: &PgnnModel, cfg: &TrainConfig) -> Vec<usize> {
    let start = if cfg.train_phys { 0 } else { model.n_phys() };
    (start..model.n_params()).collect()
}

fn linear_block(cfg: &TrainConfig, constrained: bool) -> LinearBlock {
    LinearBlock { out_weights: !constrained, out_bias: true, physics: cfg.train_phys }
}

fn run_once(
    mut model: PgnnModel,
    train: &DataSet,
    val: &DataSet,
    spec: &CostSpec,
    cfg: &TrainConfig,
    constraint: Option<&dyn Projection>,
    index: usize,
) -> Result<RunResult> {
    if !cfg.warm_start {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index as u64);
        model.nn.randomize_hidden(&mut rng);
        let idx = linear_block(cfg, false).indices(&model);
        select_indices(&mut model, train, spec, &idx, cfg.cond_limit)?;
    }
    let reselect = linear_block(cfg, true).indices(&model);
    if let Some(c) = constraint {
        c.project(&mut model)?;
        select_indices(&mut model, train, spec, &reselect, cfg.cond_limit)?;
    }
    let obj = Objective::new(&model, train, spec, Some(free_indices(&model, cfg)))?;
    let vobj = Objective::new(&model, val, spec, Some(vec![]))?;
    let epoch0 = obj.cost(&model)?;
    let mut train_trace = vec![epoch0];
    let mut val_trace = vec![vobj.cost(&model)?];
    let mut best = (val_trace[0], 0usize, model.clone());
    let mut since_best = 0usize;
    let (stop, epochs) = minimize(&mut model, &obj, &cfg.lm, |m, epoch, _| {
        if let Some(c) = constraint {
            c.project(m)?;
            select_indices(m, train, spec, &reselect, f64::INFINITY)?;
        }
        let t = obj.cost(m)?;
        let v = vobj.cost(m)?;
        train_trace.push(t);
        val_trace.push(v);
        if v < best.0 {
            best = (v, epoch, m.clone());
            since_best = 0;
        } else {
            since_best += 1;
        }
        Ok(if since_best >= cfg.patience { Control::Stop } else { Control::Continue })
    })?;
    Ok(RunResult {
        model: best.2,
        best_epoch: best.1,
        train_trace,
        val_trace,
        epoch0,
        stop,
        epochs,
    })
}

/// Train `model` from `cfg.restarts` random initializations and return the
/// epoch-best parameters of the restart with the lowest validation cost.
pub fn train(
    model: &PgnnModel,
    train: &DataSet,
    val: &DataSet,
    spec: &CostSpec,
    cfg: &TrainConfig,
    constraint: Option<&dyn Projection>,
) -> Result<TrainReport> {
    if cfg.restarts == 0 {
        return Err(Error::Invalid("restarts must be at least 1".into()));
    }
    cfg.lm.validate()?;
    spec.validate(model)?;
    if constraint.is_some() && cfg.train_phys {
        return Err(Error::Invalid("constrained training keeps the physics block fixed; set train_phys = false".into()));
    }
    let start = Instant::now();
    let mut base = model.clone();
    if cfg.normalize && !cfg.warm_start && !base.nn.layers.is_empty() {
        base.fit_normalization(&train.phi)?;
    }
    let restarts = if base.nn.layers.is_empty() || cfg.warm_start { 1 } else { cfg.restarts };
    let runs: Vec<Result<RunResult>> = (0..restarts)
        .into_par_iter()
        .map(|i| run_once(base.clone(), train, val, spec, cfg, constraint, i))
        .collect();
    let mut summaries = Vec::new();
    let mut best: Option<(usize, RunResult)> = None;
    for (i, r) in runs.into_iter().enumerate() {
        match r {
            Ok(r) => {
                let bv = r.val_trace[r.best_epoch];
                summaries.push(RestartSummary {
                    index: i,
                    best_val: Some(bv),
                    best_epoch: r.best_epoch,
                    epochs: r.epochs,
                    stop: Some(r.stop),
                    error: None,
                });
                let better = match &best {
                    None => true,
                    Some((_, b)) => bv < b.val_trace[b.best_epoch],
                };
                if better {
                    best = Some((i, r));
                }
            }
            Err(e) => summaries.push(RestartSummary {
                index: i,
                best_val: None,
                best_epoch: 0,
                epochs: 0,
                stop: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let Some((restart, r)) = best else {
        let msg = summaries.iter().filter_map(|s| s.error.clone()).next().unwrap_or_default();
        return Err(Error::NonFinite(format!("all restarts failed: {msg}")));
    };
    let margin = match constraint {
        Some(c) => Some(c.margin(&r.model)?),
        None => None,
    };
    Ok(TrainReport {
        train_cost: r.train_trace[r.best_epoch],
        val_cost: r.val_trace[r.best_epoch],
        model: r.model,
        restart,
        best_epoch: r.best_epoch,
        train_trace: r.train_trace,
        val_trace: r.val_trace,
        epoch0_cost: r.epoch0,
        restarts: summaries,
        margin,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LCurvePoint {
    pub lambda: f64,
    pub v_mse: f64,
    /// ‖θ_NN‖², the regularization cost with Λ_NN = I.
    pub v_reg: f64,
}

/// L-curve over a sorted λ grid for Λ_NN = λI, warm-starting each training
/// from the previous result.
pub fn sweep_lambda(
    model: &PgnnModel,
    train_ds: &DataSet,
    val_ds: &DataSet,
    base: &CostSpec,
    grid: &[f64],
    cfg: &TrainConfig,
) -> Result<Vec<LCurvePoint>> {
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Invalid("lambda grid must be sorted".into()));
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut current = model.clone();
    for (i, &lambda) in grid.iter().enumerate() {
        let mut spec = base.clone();
        spec.lambda_nn = Weights::Scalar(lambda);
        if spec.variant == CostVariant::Mse {
            spec.variant = CostVariant::PgnnReg;
        }
        let mut c = cfg.clone();
        c.warm_start = i > 0;
        let rep = train(&current, train_ds, val_ds, &spec, &c, None)?;
        current = rep.model;
        let v_reg = current.nn.params().iter().map(|v| v * v).sum();
        out.push(LCurvePoint { lambda, v_mse: cost_mse(&current, train_ds)?, v_reg });
    }
    Ok(out)
}

/// Λ_phy = ((1/(ε n_phy)) V_MSE(θ_phy*))^{1/2} diag(θ_phy*)⁻¹.
pub fn lambda_phy_rule(v_mse_star: f64, theta_phy_star: &[f64], eps: f64) -> Result<Vec<f64>> {
    if let Some(i) = theta_phy_star.iter().position(|t| *t == 0.0) {
        return Err(Error::Invalid(format!(
            "theta_phy_star[{i}] is zero; supply an explicit Lambda_phy entry for it"
        )));
    }
    if !(eps > 0.0) {
        return Err(Error::Invalid("epsilon must be positive".into()));
    }
    let n = theta_phy_star.len() as f64;
    let s = (v_mse_star / (eps * n)).sqrt();
    Ok(theta_phy_star.iter().map(|t| s / t).collect())
}
