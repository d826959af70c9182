//! End-to-end recipes: the coreless-linear-motor controllers (physics, NN,
//! PINN, PGNN with and without extrapolation regularization) on the
//! synthetic CLM plant, and the nonminimum-phase rotating–translating mass
//! controllers (ZPETC and preview variants).
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{build_regressors, split_train_val, DataSet, IoLog, RegressorSpec};
use crate::error::{Error, Result};
use crate::extrap::{generate_ze, Axis, AxisFeature, ExtrapolationSet, OperatingRegion};
use crate::model::{Basis, InputTransform, NeuralNet, PgnnModel, PhysicsModel};
use crate::sim::{
    make_reference, run_closed_loop, ExcitationSpec, FeedbackLaw, Feedforward, ModelFeedforward, MoveLimits, Plant,
    PlantParams, ReferenceParams, ReferenceTrajectory, RunOptions, ScenarioResult, StateSpaceFeedforward,
    TransferFunction,
};
use crate::stability::{
    certify_iss, extend_preview, to_state_space, zpetc_inverse, FeedforwardStateSpace, ForwardModel, IssCertificate,
    LinearInverse, ProjectionMode, ThetaConstraint,
};
use crate::train::{fit_physics, lambda_phy_rule, train, CostSpec, CostVariant, PhysicsFit, TrainConfig, TrainReport, Weights};

pub const TS: f64 = 1e-3;

// ---------------------------------------------------------------- CLM

/// y(k+3) … y(k−2), no past inputs.
pub fn clm_spec() -> RegressorSpec {
    RegressorSpec { n_a: 5, n_b: 1, n_k: 2, n_pw: 0, n_us: 0 }
}

pub const CLM_NOMINAL: MoveLimits = MoveLimits { v: 0.1, a: 1.0, j: 1000.0 };

/// −0.1 → `end` → −0.1 with the given limits.
pub fn clm_reference(ts: f64, end: f64, lim: MoveLimits) -> ReferenceParams {
    ReferenceParams::back_and_forth(ts, -0.1, end, lim, 0.5)
}

/// Training references: −0.1 ↔ 0.1 at v = n·0.025, n = 1…6.
pub fn clm_training_references(ts: f64) -> Vec<ReferenceParams> {
    (1..=6)
        .map(|n| clm_reference(ts, 0.1, MoveLimits { v: n as f64 * 0.025, ..CLM_NOMINAL }))
        .collect()
}

/// The training suite run twice, white dither (50 N²) on the second half.
pub fn clm_excitation(seed: u64) -> ExcitationSpec {
    ExcitationSpec {
        references: clm_training_references(TS),
        repetitions: 2,
        dither_variance: 50.0,
        dither_start: 0.5,
        seed,
    }
}

/// The 5 + 7 + 5 variations of the nominal reference (end position,
/// velocity, acceleration).
pub fn clm_sweep(ts: f64) -> Vec<(String, ReferenceParams)> {
    let mut out = Vec::new();
    for end in [-0.05, 0.0, 0.05, 0.1, 0.15] {
        out.push((format!("end={end}"), clm_reference(ts, end, CLM_NOMINAL)));
    }
    for v in [0.025, 0.05, 0.075, 0.1, 0.125, 0.15, 0.2] {
        out.push((format!("v={v}"), clm_reference(ts, 0.1, MoveLimits { v, ..CLM_NOMINAL })));
    }
    for a in [0.25, 0.5, 1.0, 2.0, 4.0] {
        out.push((format!("a={a}"), clm_reference(ts, 0.1, MoveLimits { a, ..CLM_NOMINAL })));
    }
    out
}

/// |y| ≤ 0.15 m, |δy| ≤ 0.2 m/s.
pub fn clm_region() -> OperatingRegion {
    OperatingRegion {
        axes: vec![
            Axis { name: "y".into(), feature: AxisFeature::Position, lo: -0.15, hi: 0.15, resolution: 31 },
            Axis { name: "dy".into(), feature: AxisFeature::Velocity, lo: -0.2, hi: 0.2, resolution: 41 },
        ],
        normalize: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClmController {
    Physics,
    Nn,
    Pinn,
    Pgnn,
    PgnnExtrap,
}

impl ClmController {
    pub const ALL: [ClmController; 5] = [Self::Physics, Self::Nn, Self::Pinn, Self::Pgnn, Self::PgnnExtrap];
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClmHyper {
    pub n1: usize,
    /// Λ_NN for the black-box network and the PINN.
    pub lambda_nn_black_box: f64,
    /// Λ_NN for the PGNNs.
    pub lambda_nn: f64,
    /// ε of the Λ_phy rule.
    pub eps: f64,
    pub c: f64,
    pub gamma: f64,
    pub e_max: usize,
    pub ze_eps: f64,
    /// Condition limit for optimized selection. Hidden features of nets on
    /// closely spaced position samples are nearly collinear; the selection
    /// solves by SVD, so the recipes do not reject on the estimate.
    pub cond_limit: f64,
}

impl Default for ClmHyper {
    fn default() -> Self {
        Self {
            n1: 24,
            lambda_nn_black_box: 3.2e-12,
            lambda_nn: 1e-5,
            eps: 1.0,
            c: 0.5,
            gamma: 0.1,
            e_max: 400,
            ze_eps: 1e-3,
            cond_limit: f64::INFINITY,
        }
    }
}

/// Closed-loop CLM experiment and its train/validation regressor sets.
pub struct ClmData {
    pub log: IoLog,
    pub train: DataSet,
    pub val: DataSet,
}

/// Simulate the data-generating experiment. `decimate` keeps every n-th
/// regressor (1 keeps all) to bound training cost.
pub fn clm_data(plant: &PlantParams, seed: u64, decimate: usize) -> Result<ClmData> {
    let mut p = Plant::new(plant.clone(), TS)?;
    let mut fb = FeedbackLaw::new(TransferFunction::clm_reference(), TS)?;
    let log = crate::sim::generate_training_experiment(&mut p, &mut fb, &clm_excitation(seed))?;
    let ds = build_regressors(&log, &clm_spec())?;
    let ds = thin(&ds, decimate);
    let (train, val) = split_train_val(&ds, 0.7, seed)?;
    Ok(ClmData { log, train, val })
}

fn thin(ds: &DataSet, every: usize) -> DataSet {
    if every <= 1 {
        return ds.clone();
    }
    let idx: Vec<usize> = (0..ds.len()).step_by(every).collect();
    ds.subset(&idx)
}

/// Z^E for the CLM region from the training regressors, lifted to full
/// regressor form.
pub fn clm_ze(train: &DataSet, hyper: &ClmHyper) -> Result<(ExtrapolationSet, DMatrix<f64>)> {
    let region = clm_region();
    let zn = region.project(&train.phi, &train.spec, train.ts)?;
    let set = generate_ze(&region, &zn, hyper.e_max, hyper.ze_eps)?;
    let lifted = region.lift(&set.points, &train.spec, train.ts);
    Ok((set, lifted))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedController {
    pub model: PgnnModel,
    pub report: Option<TrainReport>,
}

/// Train one CLM controller. `fit` is the MSE physics fit θ_phy*; `z_e` the
/// lifted extrapolation set (needed by PINN and PGNN_EXTRAP).
pub fn train_clm(
    kind: ClmController,
    data: &ClmData,
    fit: &PhysicsFit,
    z_e: Option<&DMatrix<f64>>,
    hyper: &ClmHyper,
    cfg: &TrainConfig,
) -> Result<TrainedController> {
    let spec = clm_spec();
    let theta = fit.theta.clone();
    let basis = Basis::ClmMassFriction;
    let hidden = [hyper.n1];
    let need_ze = || z_e.cloned().ok_or_else(|| Error::Invalid("controller needs an extrapolation set".into()));
    let mut cfg = cfg.clone();
    cfg.cond_limit = hyper.cond_limit;
    let (model, cost) = match kind {
        ClmController::Physics => {
            let model = PgnnModel::new(spec, TS, PhysicsModel::new(basis, theta), InputTransform::Identity, None)?;
            return Ok(TrainedController { model, report: None });
        }
        ClmController::Nn => {
            let model = PgnnModel::new(spec, TS, PhysicsModel::none(), InputTransform::DeltaWindow, Some(&hidden))?;
            let cost = CostSpec {
                variant: CostVariant::PgnnReg,
                lambda_nn: Weights::Scalar(hyper.lambda_nn_black_box),
                ..CostSpec::mse()
            };
            (model, cost)
        }
        ClmController::Pinn => {
            // black-box net; the physics layer is held at zero and only
            // supplies f_phy(θ*, ·) to the compliance terms
            let zero = PhysicsModel::new(basis, vec![0.0; theta.len()]);
            let model = PgnnModel::new(spec, TS, zero, InputTransform::DeltaWindow, Some(&hidden))?;
            cfg.train_phys = false;
            let cost = CostSpec {
                variant: CostVariant::Pinn,
                lambda_nn: Weights::Scalar(hyper.lambda_nn_black_box),
                lambda_phy: Weights::Scalar(0.0),
                gamma: hyper.gamma,
                c: hyper.c,
                theta_phy_star: theta.clone(),
                z_e: Some(need_ze()?),
            };
            (model, cost)
        }
        ClmController::Pgnn | ClmController::PgnnExtrap => {
            let phys = PhysicsModel::new(basis, theta.clone());
            let model = PgnnModel::new(spec, TS, phys, InputTransform::PhysicalFeatures, Some(&hidden))?;
            let lam_phy = lambda_phy_rule(fit.mse, &theta, hyper.eps)?;
            let mut cost = CostSpec {
                variant: CostVariant::PgnnReg,
                lambda_nn: Weights::Scalar(hyper.lambda_nn),
                lambda_phy: Weights::Diag(lam_phy),
                theta_phy_star: theta.clone(),
                ..CostSpec::mse()
            };
            if kind == ClmController::PgnnExtrap {
                cost.variant = CostVariant::PgnnExtrap;
                cost.gamma = hyper.gamma;
                cost.z_e = Some(need_ze()?);
            }
            (model, cost)
        }
    };
    let report = train(&model, &data.train, &data.val, &cost, &cfg, None)?;
    Ok(TrainedController { model: report.model.clone(), report: Some(report) })
}

/// MSE physics fit of the CLM mass–friction model.
pub fn clm_physics_fit(data: &ClmData, cond_limit: f64) -> Result<PhysicsFit> {
    fit_physics(&data.train, Basis::ClmMassFriction, cond_limit)
}

/// Closed-loop run of a static (n_b = 1) CLM controller; `None` runs
/// feedback only.
pub fn clm_run(plant: &PlantParams, model: Option<&PgnnModel>, reference: &ReferenceTrajectory) -> Result<ScenarioResult> {
    let mut p = Plant::new(plant.clone(), TS)?;
    let mut fb = FeedbackLaw::new(TransferFunction::clm_reference(), TS)?;
    let mut ff = model.map(|m| ModelFeedforward::new(m.clone()));
    run_closed_loop(&mut p, &mut fb, ff.as_mut().map(|f| f as &mut dyn Feedforward), reference, &RunOptions::default())
}

// ------------------------------------------------------- rotating mass

/// n_a = n_b = 4, n_k = 0.
pub fn rotating_spec() -> RegressorSpec {
    RegressorSpec { n_a: 4, n_b: 4, n_k: 0, n_pw: 0, n_us: 0 }
}

/// 0 → 0.1 m → 0 with v = 0.1 m/s, a = 1 m/s², j = 1000 m/s³ and 1 s dwells.
pub fn rotating_reference(ts: f64) -> ReferenceParams {
    ReferenceParams::back_and_forth(ts, 0.0, 0.1, MoveLimits { v: 0.1, a: 1.0, j: 1000.0 }, 1.0)
}

/// Five repetitions of the reference with white dither (50 N²) throughout.
pub fn rotating_excitation(seed: u64) -> ExcitationSpec {
    ExcitationSpec {
        references: vec![rotating_reference(TS)],
        repetitions: 5,
        dither_variance: 50.0,
        dither_start: 0.0,
        seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotatingController {
    NoFeedforward,
    PhysicsZpetc,
    PgnnZpetc,
    PhysicsPreview,
    PgnnPreview,
}

impl RotatingController {
    pub const ALL: [RotatingController; 5] =
        [Self::NoFeedforward, Self::PhysicsZpetc, Self::PgnnZpetc, Self::PhysicsPreview, Self::PgnnPreview];
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotatingHyper {
    pub n1: usize,
    pub n_pw: usize,
    pub eps: f64,
    /// Condition limit for the linear fits. The normal matrix of a 1 kHz
    /// ARX fit is far worse conditioned than the regressor itself; the
    /// solve uses an SVD of the regressor, so the default is relaxed.
    pub cond_limit: f64,
    pub mode: ProjectionMode,
}

impl Default for RotatingHyper {
    fn default() -> Self {
        Self { n1: 16, n_pw: 20, eps: 1.0, cond_limit: f64::INFINITY, mode: ProjectionMode::OutputLayer }
    }
}

pub fn rotating_log(seed: u64) -> Result<IoLog> {
    let mut p = Plant::new(PlantParams::Rotating(crate::sim::RotatingParams::reference()), TS)?;
    let mut fb = FeedbackLaw::new(TransferFunction::rotating_reference(), TS)?;
    crate::sim::generate_training_experiment(&mut p, &mut fb, &rotating_excitation(seed))
}

/// A deployable rotating-mass feedforward filter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RotatingDeployment {
    pub kind: RotatingController,
    pub filter: Option<FeedforwardStateSpace>,
    pub certificate: Option<IssCertificate>,
    pub model: Option<PgnnModel>,
    pub report: Option<TrainReport>,
    /// Linear physics θ_phy* and its spec.
    pub physics: Option<LinearInverse>,
}

fn linear_fit(log: &IoLog, spec: &RegressorSpec, hyper: &RotatingHyper) -> Result<(DataSet, PhysicsFit)> {
    let ds = build_regressors(log, spec)?;
    let fit = fit_physics(&ds, Basis::Linear, hyper.cond_limit)?;
    Ok((ds, fit))
}

/// ZPETC inverse of the forward model implied by the LS fit on the
/// unextended spec, as a linear inverse on the preview-extended spec.
pub fn zpetc_linear_part(theta_star: &[f64]) -> Result<LinearInverse> {
    let base = rotating_spec();
    let g = ForwardModel::from_inverse_theta(&base, theta_star)?;
    let f = zpetc_inverse(&g)?;
    let (spec, theta) = f.to_theta(&base)?;
    Ok(LinearInverse { spec, theta })
}

fn train_constrained(
    spec: RegressorSpec,
    ds: &DataSet,
    fit: &PhysicsFit,
    deployed: Option<LinearInverse>,
    hyper: &RotatingHyper,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainReport> {
    let phys = PhysicsModel::new(Basis::Linear, fit.theta.clone());
    let model = PgnnModel::new(spec, ds.ts, phys, InputTransform::Identity, Some(&[hyper.n1]))?;
    let cost = CostSpec {
        variant: CostVariant::PgnnReg,
        lambda_nn: Weights::Scalar(0.0),
        lambda_phy: Weights::Diag(lambda_phy_rule(fit.mse, &fit.theta, hyper.eps)?),
        theta_phy_star: fit.theta.clone(),
        ..CostSpec::mse()
    };
    let theta_set = ThetaConstraint::new(&model, deployed, None, hyper.mode)?;
    let (tr, va) = split_train_val(ds, 0.7, seed)?;
    let mut cfg = cfg.clone();
    cfg.train_phys = false;
    cfg.cond_limit = hyper.cond_limit;
    train(&model, &tr, &va, &cost, &cfg, Some(&theta_set))
}

/// Identify, train and assemble one rotating-mass feedforward controller.
pub fn train_rotating(
    kind: RotatingController,
    log: &IoLog,
    hyper: &RotatingHyper,
    cfg: &TrainConfig,
) -> Result<RotatingDeployment> {
    let base = rotating_spec();
    let mut out = RotatingDeployment { kind, filter: None, certificate: None, model: None, report: None, physics: None };
    match kind {
        RotatingController::NoFeedforward => return Ok(out),
        RotatingController::PhysicsZpetc | RotatingController::PgnnZpetc => {
            let (ds, fit) = linear_fit(log, &base, hyper)?;
            let lin = zpetc_linear_part(&fit.theta)?;
            out.physics = Some(LinearInverse { spec: base, theta: fit.theta.clone() });
            let ss = if kind == RotatingController::PhysicsZpetc {
                FeedforwardStateSpace::compose(&lin, &NeuralNet::empty(base.len()), &base)?
            } else {
                let rep = train_constrained(base, &ds, &fit, Some(lin.clone()), hyper, cfg, cfg.seed)?;
                let ss = FeedforwardStateSpace::compose(&lin, &rep.model.nn_on_regressor(), &base)?;
                out.model = Some(rep.model.clone());
                out.report = Some(rep);
                ss
            };
            out.certificate = Some(certify_iss(&ss, None)?);
            out.filter = Some(ss);
        }
        RotatingController::PhysicsPreview | RotatingController::PgnnPreview => {
            let spec = extend_preview(&base, hyper.n_pw, 1)?;
            let (ds, fit) = linear_fit(log, &spec, hyper)?;
            out.physics = Some(LinearInverse { spec, theta: fit.theta.clone() });
            let ss = if kind == RotatingController::PhysicsPreview {
                let model =
                    PgnnModel::new(spec, TS, PhysicsModel::new(Basis::Linear, fit.theta.clone()), InputTransform::Identity, None)?;
                let ss = to_state_space(&model)?;
                out.model = Some(model);
                ss
            } else {
                let rep = train_constrained(spec, &ds, &fit, None, hyper, cfg, cfg.seed)?;
                let ss = to_state_space(&rep.model)?;
                out.model = Some(rep.model.clone());
                out.report = Some(rep);
                ss
            };
            out.certificate = Some(certify_iss(&ss, None)?);
            out.filter = Some(ss);
        }
    }
    Ok(out)
}

/// Closed-loop run of a deployment on the rotating-mass plant.
pub fn rotating_run(dep: &RotatingDeployment, reference: &ReferenceTrajectory, guard: f64) -> Result<ScenarioResult> {
    let mut p = Plant::new(PlantParams::Rotating(crate::sim::RotatingParams::reference()), TS)?;
    let mut fb = FeedbackLaw::new(TransferFunction::rotating_reference(), TS)?;
    let mut ff = dep.filter.clone().map(StateSpaceFeedforward::new);
    let opts = RunOptions { saturation_guard: guard, dither: None };
    run_closed_loop(&mut p, &mut fb, ff.as_mut().map(|f| f as &mut dyn Feedforward), reference, &opts)
}

/// The rotating-mass evaluation reference (one pass, no dither).
pub fn rotating_eval_reference() -> Result<ReferenceTrajectory> {
    make_reference(&rotating_reference(TS))
}
