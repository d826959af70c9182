//! State-space form of a linear-physics PGNN feedforward filter, Lipschitz
//! bounds, Lyapunov pairs, ISS certificates, the training set Θ and stable
//! inverses for nonminimum-phase models.
mod zpetc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use zpetc::{zpetc_inverse, ForwardModel, ZpetcFilter, UNSTABLE_THRESHOLD};

use crate::data::RegressorSpec;
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, kron, spectral_radius};
use crate::model::{Basis, Layer, NeuralNet, PgnnModel};
use crate::train::Projection;

/// Preview-extended spec: n_pw future outputs added, n_us past inputs removed.
pub fn extend_preview(spec: &RegressorSpec, n_pw: usize, n_us: usize) -> Result<RegressorSpec> {
    if n_us > spec.n_b - 1 {
        return Err(Error::Invalid(format!("n_us = {n_us} exceeds n_b - 1 = {}", spec.n_b - 1)));
    }
    let mut s = *spec;
    s.n_pw = n_pw;
    s.n_us = n_us;
    Ok(s)
}

/// A linear inverse model on its own regressor window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearInverse {
    pub spec: RegressorSpec,
    pub theta: Vec<f64>,
}

/// φ_uff(k+1) = A φ_uff(k) + B (θ_rᵀφ_r(k) + f_NN([φ_r; φ_uff]) + offset),
/// u_ff(k) is the first entry of φ_uff(k+1).
///
/// The reference window φ_r = [r(k+lead), …, r(k+lead−n_r+1)].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedforwardStateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub theta_r: DVector<f64>,
    pub theta_uff: DVector<f64>,
    /// Network acting on [φ_r; φ_uff], shifted so f_NN(0) = 0.
    pub nn: NeuralNet,
    /// f_NN(0) moved out of the network (constant drive channel).
    pub offset: f64,
    pub lead: usize,
    pub n_r: usize,
}

/// Embed a network acting on `from`'s regressor into the common window
/// `(lead, n_r, n_x)` by zero-padding the first layer.
fn embed_nn(nn: &NeuralNet, from: &RegressorSpec, lead: usize, n_r: usize, n_x: usize) -> Result<NeuralNet> {
    let mut out = nn.clone();
    out.n_in = n_r + n_x;
    if nn.layers.is_empty() {
        return Ok(out);
    }
    let w = &nn.layers[0].w;
    let mut w2 = DMatrix::zeros(w.nrows(), n_r + n_x);
    for j in 0..from.y_len() {
        let col = lead - from.lead() + j;
        if col >= n_r {
            return Err(Error::Invalid("network window exceeds common window".into()));
        }
        w2.column_mut(col).copy_from(&w.column(j));
    }
    for i in 0..from.u_len() {
        w2.column_mut(n_r + i).copy_from(&w.column(from.y_len() + i));
    }
    out.layers[0] = Layer { w: w2, b: nn.layers[0].b.clone() };
    Ok(out)
}

impl FeedforwardStateSpace {
    /// Compose a linear inverse (possibly on a preview-extended window) with
    /// a network given on the regressor of `nn_spec` (normalization and
    /// transform already folded in, see [`PgnnModel::nn_on_regressor`]).
    pub fn compose(lin: &LinearInverse, nn: &NeuralNet, nn_spec: &RegressorSpec) -> Result<Self> {
        let ls = &lin.spec;
        if nn.layers.is_empty() || nn.n_in == 0 {
            // only the linear part matters
        } else if nn.n_in != nn_spec.len() {
            return Err(Error::Dim { what: "network input width", expected: nn_spec.len(), got: nn.n_in });
        }
        let lead = ls.lead().max(nn_spec.lead());
        let lag = |s: &RegressorSpec| s.y_len() as isize - s.lead() as isize; // y(k − lag + 1) is the oldest
        let oldest = lag(ls).max(lag(nn_spec));
        let n_r = (lead as isize + oldest) as usize;
        let n_x = ls.u_len().max(if nn.layers.is_empty() { 0 } else { nn_spec.u_len() });
        let (tr, tu) = lin.theta.split_at(ls.y_len());
        let mut theta_r = DVector::zeros(n_r);
        for (j, v) in tr.iter().enumerate() {
            theta_r[lead - ls.lead() + j] = *v;
        }
        let mut theta_uff = DVector::zeros(n_x);
        for (i, v) in tu.iter().enumerate() {
            theta_uff[i] = *v;
        }
        let mut a = DMatrix::zeros(n_x, n_x);
        if n_x > 0 {
            a.row_mut(0).copy_from(&theta_uff.transpose());
            for i in 1..n_x {
                a[(i, i - 1)] = 1.0;
            }
        }
        let mut b = DVector::zeros(n_x);
        if n_x > 0 {
            b[0] = 1.0;
        }
        let mut nn = embed_nn(nn, nn_spec, lead, n_r, n_x)?;
        let offset = nn.eval(&DVector::zeros(n_r + n_x))?;
        if let Some(out) = nn.layers.last_mut() {
            out.b[0] -= offset;
        }
        Ok(Self { a, b, theta_r, theta_uff, nn, offset, lead, n_r })
    }

    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_static(&self) -> bool {
        self.n_x() == 0
    }

    /// Output and next state for reference window `phi_r` and constant
    /// channel weight `s` (1 in normal operation).
    pub fn step(&self, x: &DVector<f64>, phi_r: &DVector<f64>, s: f64) -> Result<(f64, DVector<f64>)> {
        let mut z = DVector::zeros(self.n_r + self.n_x());
        z.rows_mut(0, self.n_r).copy_from(phi_r);
        z.rows_mut(self.n_r, self.n_x()).copy_from(x);
        let c1 = self.theta_r.dot(phi_r) + self.nn.eval(&z)? + s * self.offset;
        let u = self.theta_uff.dot(x) + c1;
        let xn = &self.a * x + &self.b * c1;
        Ok((u, xn))
    }
}

/// State-space form of a model whose physics is linear in φ.
pub fn to_state_space(model: &PgnnModel) -> Result<FeedforwardStateSpace> {
    let theta = match model.phys.basis {
        Basis::Linear => model.phys.theta.clone(),
        Basis::None => vec![0.0; model.spec.len()],
        Basis::ClmMassFriction => {
            return Err(Error::Unsupported(
                "ISS certification of nonlinear physics needs a quadratic Lyapunov function".into(),
            ))
        }
    };
    let lin = LinearInverse { spec: model.spec, theta };
    FeedforwardStateSpace::compose(&lin, &model.nn_on_regressor(), &model.spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBound {
    pub k: DVector<f64>,
    pub k_r: DVector<f64>,
    pub k_uff: DVector<f64>,
}

/// K = Π|W_l| (valid because max tanh' = 1), split at `n_r`.
pub fn lipschitz_bound(nn: &NeuralNet, n_r: usize) -> LipschitzBound {
    let k = nn.abs_weight_product();
    let n_r = n_r.min(k.len());
    LipschitzBound { k_r: k.rows(0, n_r).into_owned(), k_uff: k.rows(n_r, k.len() - n_r).into_owned(), k }
}

/// Solves AᵀPA − P + Q = 0 for P.
pub fn lyapunov_pair(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let rho = spectral_radius(a);
    if rho >= UNSTABLE_THRESHOLD {
        let mods = eigenvalues(a).iter().map(|z| z.norm()).filter(|m| *m >= UNSTABLE_THRESHOLD).collect();
        return Err(Error::NotSchur(mods));
    }
    let at = a.transpose();
    let p = if n <= 12 {
        // (I − Aᵀ⊗Aᵀ) vec(P) = vec(Q)
        let m = DMatrix::identity(n * n, n * n) - kron(&at, &at);
        let vq = DVector::from_column_slice(q.as_slice());
        let vp = m.lu().solve(&vq).ok_or_else(|| Error::Invalid("singular Lyapunov system".into()))?;
        DMatrix::from_column_slice(n, n, vp.as_slice())
    } else {
        // doubling iteration
        let mut p = q.clone();
        let mut ak = a.clone();
        for _ in 0..64 {
            let next = &p + ak.transpose() * &p * &ak;
            let done = (&next - &p).norm() <= 1e-16 * next.norm();
            p = next;
            ak = &ak * &ak;
            if done {
                break;
            }
        }
        p
    };
    let p = 0.5 * (&p + p.transpose());
    // one refinement step on the residual
    let r = &at * &p * a - &p + q;
    if r.norm() > 1e-12 * p.norm().max(1.0) && n <= 12 {
        let m = DMatrix::identity(n * n, n * n) - kron(&at, &at);
        if let Some(d) = m.lu().solve(&DVector::from_column_slice(r.as_slice())) {
            let d = DMatrix::from_column_slice(n, n, d.as_slice());
            let p2 = &p + 0.5 * (&d + d.transpose());
            return Ok(p2);
        }
    }
    Ok(p)
}

fn lambda_min(q: &DMatrix<f64>) -> f64 {
    q.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}


/// a = BᵀPB, b = BᵀPAAᵀPB.
fn ab(a: &DMatrix<f64>, b: &DVector<f64>, p: &DMatrix<f64>) -> (f64, f64) {
    let pb = p * b;
    let atpb = a.transpose() * &pb;
    (b.dot(&pb), atpb.norm_squared())
}

/// c_β = BᵀP(I + AAᵀP/(βλ_min(Q)))B.
pub fn c_beta(a: &DMatrix<f64>, b: &DVector<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>, beta: f64) -> f64 {
    let (x, y) = ab(a, b, p);
    x + y / (beta * lambda_min(q))
}

/// Right-hand side (1−β)λ_min(Q)/c_β of the ISS condition.
pub fn iss_rhs(a: &DMatrix<f64>, b: &DVector<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>, beta: f64) -> f64 {
    (1.0 - beta) * lambda_min(q) / c_beta(a, b, p, q, beta)
}

/// β maximizing the ISS right-hand side.
pub fn optimal_beta(a: &DMatrix<f64>, b: &DVector<f64>, p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    let lam = lambda_min(q);
    let (x, y) = ab(a, b, p);
    if !(lam > 0.0) || !(x > 0.0) {
        return Err(Error::Invalid("optimal beta needs lambda_min(Q) > 0 and BᵀPB > 0".into()));
    }
    Ok((-y + (y * y + lam * x * y).sqrt()) / (lam * x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssCertificate {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub beta: f64,
    pub c_beta: f64,
    pub k: LipschitzBound,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub certified: bool,
    /// No state: the filter is static.
    pub degenerate: bool,
    pub lyapunov_residual: f64,
}

impl IssCertificate {
    /// Human-readable verdict.
    pub fn summary(&self) -> String {
        if self.degenerate {
            return "static feedforward filter: trivially ISS".into();
        }
        format!(
            "{}: K_uffᵀK_uff = {:.6e} {} (1-β)λmin(Q)/c_β = {:.6e} (β = {:.6}, c_β = {:.6e}, margin {:.3e})",
            if self.certified { "ISS certified" } else { "NOT certified" },
            self.lhs,
            if self.certified { "<" } else { ">=" },
            self.rhs,
            self.beta,
            self.c_beta,
            self.margin
        )
    }

    /// κ and σ̂ with V(x⁺) − V(x) ≤ −κ‖x‖² + σ̂‖d‖² for the drive
    /// d = [φ_r; s] (s the constant channel weight).
    pub fn decrease_bound(&self, ss: &FeedforwardStateSpace) -> (f64, f64) {
        let lam = lambda_min(&self.q);
        let g = (1.0 - self.beta) * lam;
        let (b1, b2) = if self.lhs > 0.0 {
            let f = (self.rhs / self.lhs).powf(0.25);
            (f - 1.0, f - 1.0)
        } else {
            (1.0, 1.0)
        };
        let kappa = g - self.c_beta * (1.0 + b1) * (1.0 + b2) * self.lhs;
        let tr2 = ss.theta_r.norm_squared() + ss.offset * ss.offset;
        let sigma = self.c_beta * ((1.0 + b1) * (1.0 + 1.0 / b2) * self.k.k_r.norm_squared() + (1.0 + 1.0 / b1) * tr2);
        (kappa, sigma)
    }
}

/// Relative tolerance on the ISS margin.
pub const MARGIN_TOL: f64 = 1e-9;

pub fn certify_iss(ss: &FeedforwardStateSpace, q: Option<&DMatrix<f64>>) -> Result<IssCertificate> {
    let n = ss.n_x();
    let k = lipschitz_bound(&ss.nn, ss.n_r);
    if n == 0 {
        return Ok(IssCertificate {
            p: DMatrix::zeros(0, 0),
            q: DMatrix::zeros(0, 0),
            beta: 0.0,
            c_beta: 0.0,
            k,
            lhs: 0.0,
            rhs: f64::INFINITY,
            margin: f64::INFINITY,
            certified: true,
            degenerate: true,
            lyapunov_residual: 0.0,
        });
    }
    let q = q.cloned().unwrap_or_else(|| DMatrix::identity(n, n));
    let p = lyapunov_pair(&ss.a, &q)?;
    let residual = (ss.a.transpose() * &p * &ss.a - &p + &q).norm();
    let lam = lambda_min(&q);
    let (beta, cb, rhs) = if ss.a.iter().all(|v| *v == 0.0) {
        // β → 0 limit: the cross term vanishes
        let (x, _) = ab(&ss.a, &ss.b, &p);
        (0.0, x, lam / x)
    } else {
        let beta = optimal_beta(&ss.a, &ss.b, &p, &q)?;
        let cb = c_beta(&ss.a, &ss.b, &p, &q, beta);
        (beta, cb, (1.0 - beta) * lam / cb)
    };
    let lhs = k.k_uff.norm_squared();
    let margin = rhs - lhs;
    Ok(IssCertificate {
        p,
        q,
        beta,
        c_beta: cb,
        k,
        lhs,
        rhs,
        margin,
        certified: margin > MARGIN_TOL * rhs,
        degenerate: false,
        lyapunov_residual: residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMode {
    /// Scale W_{L+1}.
    OutputLayer,
    /// Scale the first-layer columns acting on past inputs (identity
    /// transform only).
    InputColumns,
}

/// The set Θ: physics fixed at θ_phy*, ‖K_uff‖² below the ISS bound of the
/// deployed linear part.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaConstraint {
    pub theta_phy_star: Vec<f64>,
    /// Deployed linear part that defines A, B, P.
    pub deployed: LinearInverse,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub beta: f64,
    pub c_beta: f64,
    pub rhs: f64,
    pub mode: ProjectionMode,
    /// Fraction of rhs targeted by the projection.
    pub target: f64,
}

impl ThetaConstraint {
    /// Build Θ for `model`'s network deployed next to the linear part
    /// `deployed` (by default the model's own physics).
    pub fn new(model: &PgnnModel, deployed: Option<LinearInverse>, q: Option<&DMatrix<f64>>, mode: ProjectionMode) -> Result<Self> {
        let deployed = match deployed {
            Some(d) => d,
            None => match model.phys.basis {
                Basis::Linear => LinearInverse { spec: model.spec, theta: model.phys.theta.clone() },
                _ => return Err(Error::Unsupported("Θ needs linear physics".into())),
            },
        };
        if mode == ProjectionMode::InputColumns && model.transform != crate::model::InputTransform::Identity {
            return Err(Error::Invalid("input-column projection needs the identity transform".into()));
        }
        let ss = FeedforwardStateSpace::compose(&deployed, &model.nn_on_regressor(), &model.spec)?;
        let n = ss.n_x();
        if n == 0 {
            return Err(Error::Invalid("static filter: no constraint needed".into()));
        }
        let q = q.cloned().unwrap_or_else(|| DMatrix::identity(n, n));
        let cert = certify_iss(&ss, Some(&q))?;
        if !(cert.rhs > 0.0) {
            return Err(Error::Invalid("infeasible skeleton: ISS bound is not positive".into()));
        }
        Ok(Self {
            theta_phy_star: model.phys.theta.clone(),
            deployed,
            p: cert.p,
            q,
            beta: cert.beta,
            c_beta: cert.c_beta,
            rhs: cert.rhs,
            mode,
            target: 0.99,
        })
    }

    pub fn state_space(&self, model: &PgnnModel) -> Result<FeedforwardStateSpace> {
        FeedforwardStateSpace::compose(&self.deployed, &model.nn_on_regressor(), &model.spec)
    }

    pub fn lhs(&self, model: &PgnnModel) -> Result<f64> {
        let ss = self.state_space(model)?;
        Ok(lipschitz_bound(&ss.nn, ss.n_r).k_uff.norm_squared())
    }

    pub fn contains(&self, model: &PgnnModel) -> Result<bool> {
        let phys_ok = model.phys.theta.iter().zip(&self.theta_phy_star).all(|(a, b)| a == b);
        Ok(phys_ok && self.margin(model)? > MARGIN_TOL * self.rhs)
    }
}

impl Projection for ThetaConstraint {
    fn project(&self, model: &mut PgnnModel) -> Result<()> {
        model.phys.theta.clone_from(&self.theta_phy_star);
        let lhs = self.lhs(model)?;
        let goal = self.target * self.rhs;
        if lhs <= goal {
            return Ok(());
        }
        let n_l = model.nn.layers.len();
        match self.mode {
            ProjectionMode::OutputLayer => {
                let s = (goal / lhs).sqrt();
                model.nn.layers[n_l - 1].w.scale_mut(s);
            }
            ProjectionMode::InputColumns => {
                // K_uff is linear in these columns
                let s = (goal / lhs).sqrt();
                let first = model.spec.y_len();
                let w = &mut model.nn.layers[0].w;
                for j in first..first + model.spec.u_len() {
                    w.column_mut(j).scale_mut(s);
                }
            }
        }
        Ok(())
    }

    fn margin(&self, model: &PgnnModel) -> Result<f64> {
        Ok(self.rhs - self.lhs(model)?)
    }
}
