//! Subcommand implementations. Every command writes its artifacts under the
//! output directory and returns a manifest carrying the config hash.
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use pgnn_core::data::{build_regressors, split_train_val, DataSet, IoLog};
use pgnn_core::extrap::generate_ze;
use pgnn_core::model::{Basis, PgnnModel};
use pgnn_core::recipes::{
    clm_excitation, rotating_excitation, train_clm, train_rotating, ClmController, ClmData, RotatingController, RotatingDeployment, TS,
};
use pgnn_core::sim::{
    generate_training_experiment, make_reference, run_closed_loop, FeedbackLaw, Feedforward, ModelFeedforward, Plant,
    RunOptions, ScenarioResult, StateSpaceFeedforward, TransferFunction,
};
use pgnn_core::stability::{certify_iss, to_state_space, ForwardModel, IssCertificate};
use pgnn_core::train::{fit_physics, TrainReport};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Controller, PipelineConfig, PlantKind};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<String>,
    pub summary: Value,
}

/// A trained controller as stored on disk (no timing data, so files are
/// byte-identical across identical runs).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "plant", rename_all = "snake_case")]
pub enum ControllerArtifact {
    Clm { controller: String, model: Option<PgnnModel> },
    Rotating { controller: String, deployment: RotatingDeployment },
}

impl ControllerArtifact {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: not a controller file: {e}", path.display())))
    }
}

/// One row of the tracking-error table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub controller: String,
    pub reference: String,
    pub mae: f64,
    pub mse: f64,
}

pub struct Context {
    pub cfg: PipelineConfig,
    pub out: PathBuf,
    hash: String,
    files: Vec<String>,
}

impl Context {
    pub fn new(cfg: PipelineConfig, out: Option<PathBuf>) -> Result<Self> {
        let out = out.or_else(|| cfg.paths.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
        let hash = cfg.hash();
        Ok(Self { cfg, out, hash, files: Vec::new() })
    }

    fn models_dir(&self) -> PathBuf {
        self.cfg.paths.models.clone().unwrap_or_else(|| self.out.join("models"))
    }

    fn write(&mut self, rel: impl AsRef<Path>, contents: &str) -> Result<()> {
        let path = self.out.join(rel.as_ref());
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        }
        std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(rel.as_ref().to_string_lossy().into_owned());
        Ok(())
    }

    /// Pretty JSON with the config hash and seed attached at top level.
    fn write_json(&mut self, rel: impl AsRef<Path>, value: Value) -> Result<()> {
        let mut v = json!({ "config_hash": self.hash, "seed": self.cfg.seed });
        if let (Value::Object(m), Value::Object(extra)) = (&mut v, value) {
            m.extend(extra);
        }
        self.write(rel, &(serde_json::to_string_pretty(&v).expect("json") + "\n"))
    }

    fn finish(mut self, command: &str, summary: Value) -> Result<Manifest> {
        let m = Manifest {
            command: command.into(),
            config_hash: self.hash.clone(),
            seed: self.cfg.seed,
            files: self.files.clone(),
            summary,
        };
        self.write(format!("{command}.manifest.json"), &serde_json::to_string_pretty(&m).expect("json"))?;
        Ok(m)
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn feedback(kind: PlantKind) -> Result<FeedbackLaw> {
    let tf = match kind {
        PlantKind::Clm => TransferFunction::clm_reference(),
        PlantKind::Rotating => TransferFunction::rotating_reference(),
    };
    Ok(FeedbackLaw::new(tf, TS)?)
}

/// The configured data file, or the plant's data-generating experiment.
fn io_log(cfg: &PipelineConfig) -> Result<IoLog> {
    if let Some(p) = &cfg.paths.data {
        return Ok(IoLog::read_csv(p)?);
    }
    let ex = match cfg.plant {
        PlantKind::Clm => clm_excitation(cfg.seed),
        PlantKind::Rotating => rotating_excitation(cfg.seed),
    };
    let mut plant = Plant::new(cfg.plant_params(), TS)?;
    let mut fb = feedback(cfg.plant)?;
    Ok(generate_training_experiment(&mut plant, &mut fb, &ex)?)
}

/// Regressors on `spec`, thinned and split into training/validation sets.
fn regressor_sets(cfg: &PipelineConfig, log: &IoLog, spec: &pgnn_core::data::RegressorSpec) -> Result<(DataSet, DataSet)> {
    let ds = build_regressors(log, spec)?;
    let ds = if cfg.data.decimate > 1 {
        let idx: Vec<usize> = (0..ds.len()).step_by(cfg.data.decimate).collect();
        ds.subset(&idx)
    } else {
        ds
    };
    Ok(split_train_val(&ds, cfg.data.train_fraction, cfg.seed)?)
}

fn basis(kind: PlantKind) -> Basis {
    match kind {
        PlantKind::Clm => Basis::ClmMassFriction,
        PlantKind::Rotating => Basis::Linear,
    }
}

/// Keep file names portable: scenario names like `v=0.1` become `v_0.1`.
fn file_stem(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect()
}

pub fn gen_data(mut ctx: Context) -> Result<Manifest> {
    let log = io_log(&ctx.cfg)?;
    let path = ctx.out.join("data.csv");
    log.write_csv(&path)?;
    ctx.files.push("data.csv".into());
    let summary = json!({ "samples": log.len(), "ts": log.ts });
    ctx.finish("gen-data", summary)
}

pub fn identify(mut ctx: Context) -> Result<Manifest> {
    let cfg = &ctx.cfg;
    let spec = cfg.regressor.unwrap_or_else(|| cfg.recipe_spec());
    let log = io_log(cfg)?;
    let (train, val) = regressor_sets(cfg, &log, &spec)?;
    let cond_limit = match cfg.plant {
        PlantKind::Clm => cfg.train.cond_limit,
        PlantKind::Rotating => cfg.rotating.cond_limit,
    };
    let b = basis(cfg.plant);
    let fit = fit_physics(&train, b, cond_limit)?;
    let model = PgnnModel::new(spec, log.ts, pgnn_core::train::physics_model(&fit, b), pgnn_core::model::InputTransform::Identity, None);
    let val_mse = match &model {
        Ok(m) => Some(pgnn_core::train::cost_mse(m, &val)?),
        Err(_) => None,
    };
    // a linear inverse model implies a forward model; report its zeros
    let zeros = if b == Basis::Linear && spec.n_pw == 0 && spec.n_us == 0 {
        let g = ForwardModel::from_inverse_theta(&spec, &fit.theta)?;
        let z: Vec<[f64; 2]> = g.zeros().iter().map(|z| [z.re, z.im]).collect();
        Some(json!({ "zeros": z, "unstable": g.unstable_zero_count() }))
    } else {
        None
    };
    let report = json!({
        "spec": spec,
        "basis": b,
        "theta_phy": fit.theta,
        "std_err": fit.std_err,
        "train_mse": fit.mse,
        "val_mse": val_mse,
        "cond": fit.cond,
        "n_train": train.len(),
        "n_val": val.len(),
        "forward_model": zeros,
    });
    ctx.write_json("physics.json", report.clone())?;
    ctx.finish("identify", report)
}

pub fn gen_ze(mut ctx: Context) -> Result<Manifest> {
    let cfg = &ctx.cfg;
    let spec = cfg.recipe_spec();
    let log = io_log(cfg)?;
    let (train, _) = regressor_sets(cfg, &log, &spec)?;
    let region = cfg.region();
    let zn = region.project(&train.phi, &spec, log.ts)?;
    let set = generate_ze(&region, &zn, cfg.clm.e_max, cfg.clm.ze_eps)?;
    let path = ctx.out.join("ze.csv");
    set.write_csv(&path)?;
    ctx.files.push("ze.csv".into());
    ctx.write_json("ze.json", json!({ "region": region, "set": set }))?;
    let summary = json!({
        "points": set.len(),
        "grid": region.grid_len(),
        "first_objective": set.objective.first(),
        "last_objective": set.objective.last(),
    });
    ctx.finish("gen-ze", summary)
}

fn train_one(cfg: &PipelineConfig, c: Controller, log: &IoLog) -> Result<(ControllerArtifact, Option<TrainReport>)> {
    match c {
        Controller::ClmNone => Ok((ControllerArtifact::Clm { controller: c.name(), model: None }, None)),
        Controller::Clm(kind) => {
            let (train, val) = regressor_sets(cfg, log, &cfg.recipe_spec())?;
            let fit = fit_physics(&train, Basis::ClmMassFriction, cfg.train.cond_limit)?;
            let ze = if matches!(kind, ClmController::Pinn | ClmController::PgnnExtrap) {
                let region = cfg.region();
                let zn = region.project(&train.phi, &train.spec, train.ts)?;
                let set = generate_ze(&region, &zn, cfg.clm.e_max, cfg.clm.ze_eps)?;
                Some(region.lift(&set.points, &train.spec, train.ts))
            } else {
                None
            };
            let data = ClmData { log: log.clone(), train, val };
            let tc = train_clm(kind, &data, &fit, ze.as_ref(), &cfg.clm, &cfg.train)?;
            Ok((ControllerArtifact::Clm { controller: c.name(), model: Some(tc.model) }, tc.report))
        }
        Controller::Rotating(kind) => {
            let mut dep = train_rotating(kind, log, &cfg.rotating, &cfg.train)?;
            let report = dep.report.take();
            Ok((ControllerArtifact::Rotating { controller: c.name(), deployment: dep }, report))
        }
    }
}

fn train_all(ctx: &mut Context) -> Result<Value> {
    let log = io_log(&ctx.cfg)?;
    let models = ctx.models_dir();
    let mut summary = serde_json::Map::new();
    for c in ctx.cfg.controllers()? {
        let name = c.name();
        let (art, report) = train_one(&ctx.cfg, c, &log)?;
        let path = models.join(format!("{name}.json"));
        std::fs::create_dir_all(&models).map_err(|e| CliError::Io(format!("{}: {e}", models.display())))?;
        std::fs::write(&path, serde_json::to_string_pretty(&art).expect("json"))
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        ctx.files.push(path.strip_prefix(&ctx.out).unwrap_or(&path).to_string_lossy().into_owned());
        let mut s = json!({});
        if let Some(r) = &report {
            ctx.write_json(format!("reports/{name}.json"), to_value(r))?;
            ctx.write(format!("reports/{name}.traces.csv"), &r.traces_csv())?;
            s = json!({
                "epoch0_cost": r.epoch0_cost,
                "train_cost": r.train_cost,
                "val_cost": r.val_cost,
                "best_epoch": r.best_epoch,
                "restart": r.restart,
            });
        }
        if let ControllerArtifact::Rotating { deployment: d, .. } = &art {
            if let Some(cert) = &d.certificate {
                s["certificate"] = json!(cert.summary());
            }
        }
        summary.insert(name, s);
    }
    Ok(Value::Object(summary))
}

pub fn train(mut ctx: Context) -> Result<Manifest> {
    let summary = train_all(&mut ctx)?;
    ctx.finish("train", summary)
}

fn certify_artifact(cfg: &PipelineConfig, art: &ControllerArtifact) -> Result<Option<IssCertificate>> {
    let ss = match art {
        ControllerArtifact::Clm { model: Some(m), .. } => to_state_space(m)?,
        ControllerArtifact::Rotating { deployment: d, .. } => match &d.filter {
            Some(f) => f.clone(),
            None => return Ok(None),
        },
        ControllerArtifact::Clm { model: None, .. } => return Ok(None),
    };
    let n = ss.n_x();
    let q = DMatrix::identity(n, n) * cfg.stability.q_scale;
    Ok(Some(certify_iss(&ss, Some(&q))?))
}

/// Certify `models` (controller files or bare model JSON), or every
/// configured controller in the models directory.
pub fn certify(mut ctx: Context, models: &[PathBuf]) -> Result<Manifest> {
    let targets: Vec<(String, PathBuf)> = if models.is_empty() {
        let dir = ctx.models_dir();
        ctx.cfg.controllers()?.iter().map(|c| (c.name(), dir.join(format!("{}.json", c.name())))).collect()
    } else {
        models
            .iter()
            .map(|p| (p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(), p.clone()))
            .collect()
    };
    let mut summary = serde_json::Map::new();
    for (name, path) in targets {
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let art = match PgnnModel::from_json(&text) {
            Ok(m) => ControllerArtifact::Clm { controller: name.clone(), model: Some(m) },
            Err(_) => ControllerArtifact::load(&path)?,
        };
        // a filter without past-input taps has no state to stabilize
        if let ControllerArtifact::Clm { model: Some(m), .. } = &art {
            if m.spec.u_len() == 0 {
                let line = "static feedforward filter: trivially ISS";
                eprintln!("{name}: {line}");
                summary.insert(name, json!({ "certified": true, "summary": line }));
                continue;
            }
        }
        let verdict = match certify_artifact(&ctx.cfg, &art)? {
            Some(cert) => {
                let line = cert.summary();
                eprintln!("{name}: {line}");
                ctx.write_json(format!("certificates/{name}.json"), json!({ "certificate": cert }))?;
                json!({ "certified": cert.certified || cert.degenerate, "summary": line })
            }
            None => {
                eprintln!("{name}: no feedforward filter to certify");
                json!({ "certified": Value::Null, "summary": "no feedforward filter" })
            }
        };
        summary.insert(name, verdict);
    }
    ctx.finish("certify", Value::Object(summary))
}

fn run_scenario(cfg: &PipelineConfig, art: &ControllerArtifact, r: &pgnn_core::sim::ReferenceTrajectory) -> Result<ScenarioResult> {
    let mut plant = Plant::new(cfg.plant_params(), TS)?;
    let mut fb = feedback(cfg.plant)?;
    let mut model_ff;
    let mut ss_ff;
    let ff: Option<&mut dyn Feedforward> = match art {
        ControllerArtifact::Clm { model: Some(m), .. } => {
            model_ff = ModelFeedforward::new(m.clone());
            Some(&mut model_ff)
        }
        ControllerArtifact::Rotating { deployment: d, .. } if d.filter.is_some() => {
            ss_ff = StateSpaceFeedforward::new(d.filter.clone().expect("checked"));
            Some(&mut ss_ff)
        }
        _ => None,
    };
    Ok(run_closed_loop(&mut plant, &mut fb, ff, r, &RunOptions::default())?)
}

fn simulate_all(ctx: &mut Context) -> Result<Vec<TableRow>> {
    let refs = ctx.cfg.references();
    let controllers = ctx.cfg.controllers()?;
    let dir = ctx.models_dir();
    let mut rows = Vec::new();
    for c in controllers.iter().filter(|_| !refs.is_empty()) {
        let art = match c {
            Controller::ClmNone => ControllerArtifact::Clm { controller: c.name(), model: None },
            Controller::Rotating(RotatingController::NoFeedforward) => ControllerArtifact::Rotating {
                controller: c.name(),
                deployment: RotatingDeployment {
                    kind: RotatingController::NoFeedforward,
                    filter: None,
                    certificate: None,
                    model: None,
                    report: None,
                    physics: None,
                },
            },
            _ => ControllerArtifact::load(&dir.join(format!("{}.json", c.name())))?,
        };
        for (name, params) in &refs {
            let traj = make_reference(params)?;
            let res = run_scenario(&ctx.cfg, &art, &traj)?;
            ctx.write(format!("traces/{}__{}.csv", c.name(), file_stem(name)), &res.to_csv())?;
            rows.push(TableRow { controller: c.name(), reference: name.clone(), mae: res.mae, mse: res.mse });
        }
    }
    let mut csv = String::from("controller,reference,mae,mse\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{:e},{:e}\n", r.controller, r.reference, r.mae, r.mse));
    }
    ctx.write("table.csv", &csv)?;
    ctx.write_json("table.json", json!({ "rows": rows }))?;
    Ok(rows)
}

/// Mean MAE and MSE per controller, in configuration order.
fn per_controller(rows: &[TableRow]) -> Value {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.controller.as_str()) {
            order.push(&r.controller);
        }
    }
    let mut out = serde_json::Map::new();
    for c in order {
        let sel: Vec<&TableRow> = rows.iter().filter(|r| r.controller == c).collect();
        let n = sel.len() as f64;
        out.insert(
            c.into(),
            json!({
                "mean_mae": sel.iter().map(|r| r.mae).sum::<f64>() / n,
                "mean_mse": sel.iter().map(|r| r.mse).sum::<f64>() / n,
            }),
        );
    }
    Value::Object(out)
}

pub fn simulate(mut ctx: Context) -> Result<Manifest> {
    let rows = simulate_all(&mut ctx)?;
    let summary = json!({ "rows": rows.len(), "controllers": per_controller(&rows) });
    ctx.finish("simulate", summary)
}

/// Train every configured controller, then run the scenario list on each.
pub fn compare(mut ctx: Context) -> Result<Manifest> {
    let training = train_all(&mut ctx)?;
    let rows = simulate_all(&mut ctx)?;
    let mut ranking: Vec<(String, f64)> = match per_controller(&rows) {
        Value::Object(m) => m.into_iter().map(|(k, v)| (k, v["mean_mse"].as_f64().unwrap_or(f64::NAN))).collect(),
        _ => vec![],
    };
    ranking.sort_by(|a, b| a.1.total_cmp(&b.1));
    let summary = json!({
        "training": training,
        "rows": rows.len(),
        "controllers": per_controller(&rows),
        "ranking_by_mean_mse": ranking.iter().map(|r| r.0.clone()).collect::<Vec<_>>(),
    });
    ctx.finish("compare", summary)
}
