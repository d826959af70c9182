mod common;

use common::{companion, poly_from_real_roots, random_net};
use nalgebra::{Complex, DMatrix, DVector};
use pgnn_core::data::RegressorSpec;
use pgnn_core::model::*;
use pgnn_core::stability::*;
use pgnn_core::train::Projection;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// First row of a companion matrix whose eigenvalues are `roots`.
fn companion_row(roots: &[f64]) -> Vec<f64> {
    poly_from_real_roots(roots)[1..].iter().map(|c| -c).collect()
}

fn linear_pgnn(spec: RegressorSpec, theta: Vec<f64>, nn: Option<NeuralNet>) -> PgnnModel {
    let hidden: Option<&[usize]> = if nn.is_some() { Some(&[4]) } else { None };
    let mut m = PgnnModel::new(spec, 1.0, PhysicsModel::new(Basis::Linear, theta), InputTransform::Identity, hidden).unwrap();
    if let Some(nn) = nn {
        m.nn = nn;
    }
    m
}

fn random_stable_theta(rng: &mut ChaCha8Rng, spec: &RegressorSpec, rmax: f64) -> Vec<f64> {
    let roots: Vec<f64> = (0..spec.u_len()).map(|_| rng.random_range(-rmax..rmax)).collect();
    let mut theta: Vec<f64> = (0..spec.y_len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    theta.extend(companion_row(&roots));
    theta
}

#[test]
fn scalar_companion() {
    let spec = RegressorSpec::new(1, 2, 0).unwrap();
    let ss = to_state_space(&linear_pgnn(spec, vec![2.0, -1.0, 0.5], None)).unwrap();
    assert_eq!(ss.a, DMatrix::from_element(1, 1, 0.5));
    assert_eq!(ss.b, DVector::from_element(1, 1.0));
    assert_eq!(ss.theta_r.as_slice(), &[2.0, -1.0]);
}

#[test]
fn companion_matches_hand_oracle() {
    let spec = RegressorSpec::new(2, 4, 1).unwrap();
    let theta = vec![1.0, 2.0, 3.0, 0.3, -0.2, 0.1];
    let ss = to_state_space(&linear_pgnn(spec, theta, None)).unwrap();
    assert_eq!(ss.a, companion(&[0.3, -0.2, 0.1]));
    assert_eq!(ss.b.as_slice(), &[1.0, 0.0, 0.0]);
}

#[test]
fn nonlinear_physics_is_unsupported() {
    let spec = RegressorSpec::new(5, 1, 2).unwrap();
    let m = PgnnModel::new(spec, 1e-3, PhysicsModel::new(Basis::ClmMassFriction, vec![0.0; 3]), InputTransform::Identity, None)
        .unwrap();
    assert!(matches!(to_state_space(&m), Err(pgnn_core::Error::Unsupported(_))));
}

#[test]
fn state_space_reproduces_the_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let spec = RegressorSpec::new(2, 3, 0).unwrap();
    let theta = random_stable_theta(&mut rng, &spec, 0.8);
    let m = linear_pgnn(spec, theta, Some(random_net(&mut rng, 5, &[4], 1.0)));
    let ss = to_state_space(&m).unwrap();
    assert!(ss.nn.eval(&DVector::zeros(5)).unwrap().abs() < 1e-15);
    let n = 200;
    let r: Vec<f64> = (0..n + 2).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut u = vec![0.0; n];
    let mut x = DVector::zeros(2);
    for k in 2..n {
        // φ(k) = [r(k+1), r(k), r(k−1), u(k−1), u(k−2)]
        let phi = DVector::from_vec(vec![r[k + 1], r[k], r[k - 1], u[k - 1], u[k - 2]]);
        let want = m.eval(&phi).unwrap();
        if k == 2 {
            x = DVector::from_vec(vec![u[1], u[0]]);
        }
        let (got, xn) = ss.step(&x, &phi.rows(0, 3).into_owned(), 1.0).unwrap();
        assert!((got - want).abs() < 1e-12, "k {k}: {got} vs {want}");
        u[k] = got;
        x = xn;
        assert_eq!(x[0], u[k]);
    }
}

#[test]
fn zero_reference_is_pure_companion() {
    // a net blind to past inputs contributes f_NN(0) = 0 once shifted
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = RegressorSpec::new(1, 4, 0).unwrap();
    let theta = random_stable_theta(&mut rng, &spec, 0.9);
    let mut nn = random_net(&mut rng, 5, &[4], 1.0);
    for j in 2..5 {
        nn.layers[0].w.column_mut(j).fill(0.0);
    }
    let ss = to_state_space(&linear_pgnn(spec, theta, Some(nn))).unwrap();
    let mut x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    for _ in 0..50 {
        let (_, xn) = ss.step(&x, &DVector::zeros(2), 0.0).unwrap();
        assert_eq!(xn, &ss.a * &x);
        x = xn;
    }
}

#[test]
fn lipschitz_examples() {
    let w = DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 0.5]);
    let nn = NeuralNet::from_layers(vec![Layer { w, b: DVector::zeros(1) }]).unwrap();
    assert_eq!(lipschitz_bound(&nn, 1).k.as_slice(), &[1.0, 2.0, 0.5]);

    let nn = NeuralNet::from_layers(vec![
        Layer { w: DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]), b: DVector::zeros(2) },
        Layer { w: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), b: DVector::zeros(1) },
    ])
    .unwrap();
    let k = lipschitz_bound(&nn, 1);
    assert_eq!(k.k.as_slice(), &[2.0, 3.0]);
    assert_eq!(k.k_r.as_slice(), &[2.0]);
    assert_eq!(k.k_uff.as_slice(), &[3.0]);
}

#[test]
fn lyapunov_examples() {
    let q = DMatrix::identity(3, 3);
    assert_eq!(lyapunov_pair(&DMatrix::zeros(3, 3), &q).unwrap(), q);
    let p = lyapunov_pair(&DMatrix::from_element(1, 1, 0.5), &DMatrix::from_element(1, 1, 1.0)).unwrap();
    assert!((p[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
    let err = lyapunov_pair(&companion(&[1.5, -0.2]), &DMatrix::identity(2, 2)).unwrap_err();
    match err {
        pgnn_core::Error::NotSchur(m) => assert!(m.iter().any(|v| *v > 1.0)),
        e => panic!("{e}"),
    }
}

fn check_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) {
    let p = lyapunov_pair(a, q).unwrap();
    let res = (a.transpose() * &p * a - &p + q).norm();
    assert!(res < 1e-10, "residual {res}");
    assert!((&p - p.transpose()).norm() < 1e-12);
    assert!(p.clone().cholesky().is_some());
}

#[test]
fn lyapunov_random_and_large() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = 3;
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let rho = pgnn_core::linalg::spectral_radius(&a);
        a *= 0.95 / rho.max(1e-3);
        check_lyapunov(&a, &DMatrix::identity(n, n));
    }
    // doubling path
    let roots: Vec<f64> = (0..16).map(|i| -0.8 + 0.1 * i as f64).collect();
    let a = companion(&companion_row(&roots));
    let p = lyapunov_pair(&a, &DMatrix::identity(16, 16)).unwrap();
    let res = (a.transpose() * &p * &a - &p + DMatrix::identity(16, 16)).norm();
    assert!(res < 1e-10 * p.norm(), "residual {res}");
}

/// Scalar form of the ISS right-hand side for B = e₁.
fn rhs_scalar(x: f64, y: f64, lam: f64, beta: f64) -> f64 {
    (1.0 - beta) * lam / (x + y / (beta * lam))
}

#[test]
fn beta_scalar_scan() {
    let a = DMatrix::from_element(1, 1, 0.5);
    let b = DVector::from_element(1, 1.0);
    let q = DMatrix::from_element(1, 1, 1.0);
    let p = lyapunov_pair(&a, &q).unwrap();
    let beta = optimal_beta(&a, &b, &p, &q).unwrap();
    assert!(beta > 0.0 && beta < 1.0);
    let (x, y) = (4.0 / 3.0, (0.5f64 * 4.0 / 3.0).powi(2));
    assert!((iss_rhs(&a, &b, &p, &q, 0.3) - rhs_scalar(x, y, 1.0, 0.3)).abs() < 1e-15);
    let (mut arg, mut best) = (0.0, f64::NEG_INFINITY);
    for i in 1..1_000_000 {
        let bt = i as f64 * 1e-6;
        let v = rhs_scalar(x, y, 1.0, bt);
        if v > best {
            best = v;
            arg = bt;
        }
    }
    assert!((beta - arg).abs() <= 1e-6, "{beta} vs {arg}");
    assert!(iss_rhs(&a, &b, &p, &q, beta) >= best);
}

#[test]
fn zero_net_certificates() {
    let spec = RegressorSpec::new(1, 3, 0).unwrap();
    let m = linear_pgnn(spec, vec![1.0, -1.0, 0.6, -0.08], Some(NeuralNet::zeros(4, &[4])));
    let cert = certify_iss(&to_state_space(&m).unwrap(), None).unwrap();
    assert!(cert.certified);
    assert_eq!(cert.lhs, 0.0);
    assert_eq!(cert.margin, cert.rhs);
    assert!(cert.lyapunov_residual < 1e-10);
    assert!(cert.beta > 0.0 && cert.beta < 1.0);
    assert!(cert.summary().starts_with("ISS certified"));

    // A = 0: β → 0 limit, rhs = λ_min(Q)/BᵀPB
    let m = linear_pgnn(RegressorSpec::new(1, 2, 0).unwrap(), vec![1.0, -1.0, 0.0], None);
    let cert = certify_iss(&to_state_space(&m).unwrap(), None).unwrap();
    assert_eq!(cert.beta, 0.0);
    assert!((cert.rhs - 1.0).abs() < 1e-15);

    // static filter
    let m = linear_pgnn(RegressorSpec::new(5, 1, 2).unwrap(), vec![1.0; 6], Some(NeuralNet::zeros(6, &[3])));
    let cert = certify_iss(&to_state_space(&m).unwrap(), None).unwrap();
    assert!(cert.degenerate && cert.certified);
}

#[test]
fn unstable_skeleton_is_reported() {
    let spec = RegressorSpec::new(1, 3, 0).unwrap();
    let m = linear_pgnn(spec, vec![1.0, -1.0, 2.5, -1.0], None);
    assert!(matches!(certify_iss(&to_state_space(&m).unwrap(), None), Err(pgnn_core::Error::NotSchur(_))));
    assert!(ThetaConstraint::new(&m, None, None, ProjectionMode::OutputLayer).is_err());
}

#[test]
fn verdict_flips_at_margin_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spec = RegressorSpec::new(1, 3, 0).unwrap();
    let theta = random_stable_theta(&mut rng, &spec, 0.7);
    let mut m = linear_pgnn(spec, theta, Some(random_net(&mut rng, 4, &[4], 1.0)));
    let base = m.nn.layers[1].w.clone();
    let cert_at = |m: &mut PgnnModel, s: f64| {
        m.nn.layers[1].w = &base * s;
        certify_iss(&to_state_space(m).unwrap(), None).unwrap()
    };
    let c1 = cert_at(&mut m, 1.0);
    let s_star = (c1.rhs / c1.lhs).sqrt();
    let (mut lo, mut hi) = (0.0, 4.0 * s_star);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if cert_at(&mut m, mid).certified {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - s_star).abs() < 1e-8 * s_star, "{lo} vs {s_star}");
    assert!(cert_at(&mut m, s_star * (1.0 - 1e-6)).margin > 0.0);
    assert!(cert_at(&mut m, s_star * (1.0 + 1e-6)).margin < 0.0);
}

#[test]
fn theta_membership_and_projection() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let spec = RegressorSpec::new(2, 3, 0).unwrap();
    let theta = random_stable_theta(&mut rng, &spec, 0.8);
    let zero = linear_pgnn(spec, theta.clone(), Some(NeuralNet::zeros(5, &[4])));
    let set = ThetaConstraint::new(&zero, None, None, ProjectionMode::OutputLayer).unwrap();
    assert!(set.contains(&zero).unwrap());
    assert_eq!(set.target, 0.99);

    let mut m = linear_pgnn(spec, theta.clone(), Some(random_net(&mut rng, 5, &[4], 2.0)));
    let base = m.nn.layers[1].w.clone();
    let mut was_member = true;
    for i in 0..200 {
        let s = 0.02 * i as f64;
        m.nn.layers[1].w = &base * s;
        let member = set.contains(&m).unwrap();
        assert!(was_member || !member, "membership not monotone at s = {s}");
        was_member = member;
    }
    assert!(!was_member);

    for mode in [ProjectionMode::OutputLayer, ProjectionMode::InputColumns] {
        let set = ThetaConstraint::new(&zero, None, None, mode).unwrap();
        let mut p = m.clone();
        p.phys.theta[0] += 0.5;
        set.project(&mut p).unwrap();
        assert!(set.contains(&p).unwrap());
        assert!((set.lhs(&p).unwrap() - 0.99 * set.rhs).abs() < 1e-9 * set.rhs);
        let cert = certify_iss(&set.state_space(&p).unwrap(), None).unwrap();
        assert!(cert.certified && cert.margin > 0.0);
    }
}

#[test]
fn preview_extension() {
    let spec = RegressorSpec::new(4, 4, 0).unwrap();
    assert_eq!(extend_preview(&spec, 0, 0).unwrap(), spec);
    let ext = extend_preview(&spec, 20, 1).unwrap();
    assert_eq!((ext.y_len(), ext.u_len()), (25, 2));
    assert!(extend_preview(&spec, 0, 4).is_err());
    for n_us in 0..4 {
        let ext = extend_preview(&spec, 3, n_us).unwrap();
        let theta = vec![0.1; ext.len()];
        let ss = to_state_space(&linear_pgnn(ext, theta, None)).unwrap();
        assert_eq!(ss.n_x(), 3 - n_us);
    }
}

fn unit(w: f64) -> Complex<f64> {
    Complex::from_polar(1.0, w)
}

#[test]
fn zpetc_minimum_phase_is_exact() {
    let g = ForwardModel { num: vec![1.0, -0.4, 0.03], den: vec![1.0, -1.2, 0.5], delay: 2 };
    let f = zpetc_inverse(&g).unwrap();
    assert_eq!(f.preview, 0);
    for i in 0..20 {
        let z = unit(0.15 * i as f64 + 0.01);
        assert!((g.response(z) * f.response(z) - 1.0).norm() < 1e-12);
    }
}

#[test]
fn zpetc_zero_phase_and_unit_dc() {
    // zero at z = −2 combined with a stable zero at 0.3
    let g = ForwardModel { num: vec![1.0, 1.7, -0.6], den: vec![1.0, -0.5], delay: 1 };
    assert_eq!(g.unstable_zero_count(), 1);
    let f = zpetc_inverse(&g).unwrap();
    assert_eq!(f.preview, 1);
    assert!((g.response(Complex::new(1.0, 0.0)) * f.response(Complex::new(1.0, 0.0)) - 1.0).norm() < 1e-9);
    for i in 1..=20 {
        let h = g.response(unit(0.15 * i as f64)) * f.response(unit(0.15 * i as f64));
        assert!(h.arg().abs() < 1e-6, "phase {}", h.arg());
        assert!(h.re > 0.0);
    }
    assert!(f.spectral_radius() < 1.0);
}

#[test]
fn zpetc_rejects_unit_circle_zero() {
    let g = ForwardModel { num: vec![1.0, 1.0], den: vec![1.0, -0.5], delay: 1 };
    assert!(matches!(zpetc_inverse(&g), Err(pgnn_core::Error::UnitCircleZero(_))));
}

#[test]
fn zpetc_as_linear_inverse() {
    let base = RegressorSpec::new(2, 3, 0).unwrap();
    let g = ForwardModel { num: vec![1.0, 1.7, -0.6], den: vec![1.0, -0.5, 0.06], delay: 1 };
    let f = zpetc_inverse(&g).unwrap();
    let (spec, theta) = f.to_theta(&base).unwrap();
    assert_eq!((spec.n_pw, spec.n_us), (1, 1));
    // u(k) = θ_yᵀ[y(k+2) … y(k−1)] + θ_u u(k−1) has the filter's response
    for i in 1..10 {
        let z = unit(0.3 * i as f64);
        let ny: Complex<f64> = (0..spec.y_len()).map(|j| theta[j] * z.powi(spec.lead() as i32 - j as i32)).sum();
        let du: Complex<f64> =
            Complex::new(1.0, 0.0) - (0..spec.u_len()).map(|j| theta[spec.y_len() + j] * z.powi(-(j as i32) - 1)).sum::<Complex<f64>>();
        assert!((ny / du - f.response(z)).norm() < 1e-10);
    }
}

/// Drive a certified random system with bounded references, then cut the
/// drive and watch the state decay.
fn soundness_run(seed: u64, steps: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = RegressorSpec::new(1, 4, 0).unwrap();
    let theta = random_stable_theta(&mut rng, &spec, 0.85);
    let mut m = linear_pgnn(spec, theta, Some(random_net(&mut rng, 5, &[4], 1.0)));
    let set = ThetaConstraint::new(&m, None, None, ProjectionMode::OutputLayer).unwrap();
    set.project(&mut m).unwrap();
    let ss = to_state_space(&m).unwrap();
    let cert = certify_iss(&ss, None).unwrap();
    assert!(cert.certified);
    let (kappa, sigma) = cert.decrease_bound(&ss);
    assert!(kappa > 0.0);
    let v = |x: &DVector<f64>| (x.transpose() * &cert.p * x)[(0, 0)];
    let mut x = DVector::zeros(3);
    let mut peak = 0.0f64;
    for k in 0..steps {
        let r = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let (_, xn) = ss.step(&x, &r, 1.0).unwrap();
        if k < 1000 {
            let d2 = r.norm_squared() + 1.0;
            assert!(v(&xn) - v(&x) <= -kappa * x.norm_squared() + sigma * d2 + 1e-9 * v(&x).max(1.0));
        }
        peak = peak.max(xn.amax());
        x = xn;
    }
    assert!(peak.is_finite() && peak < 1e6);
    let start = x.norm();
    for _ in 0..2000 {
        let (_, xn) = ss.step(&x, &DVector::zeros(2), 0.0).unwrap();
        // the f_NN(0) shift leaves ~1e-16 absolute roundoff
        assert!(v(&xn) <= v(&x) * (1.0 - kappa / cert.p.norm()) + 1e-28);
        x = xn;
    }
    assert!(x.norm() < 1e-6 * start.max(1.0));
}

#[test]
fn certified_systems_stay_bounded_and_decay() {
    for seed in 0..5 {
        soundness_run(seed, 10_000);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn sampled_jacobians_are_dominated(seed in any::<u64>(), n_in in 1usize..6, h1 in 1usize..6, h2 in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nn = random_net(&mut rng, n_in, &[h1, h2], 1.5);
        let k = lipschitz_bound(&nn, 0).k;
        for _ in 0..250 {
            let x = DVector::from_fn(n_in, |_, _| rng.random_range(-3.0..3.0));
            let j = nn.jacobian_input(&x).unwrap();
            for i in 0..n_in {
                prop_assert!(j[i].abs() <= k[i] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn lyapunov_residual(seed in any::<u64>(), n in 1usize..7, rho in 0.0f64..0.95) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        a *= rho / pgnn_core::linalg::spectral_radius(&a).max(1e-12);
        check_lyapunov(&a, &DMatrix::identity(n, n));
    }

    #[test]
    fn lyapunov_residual_companion(seed in any::<u64>(), n in 1usize..7) {
        // near-unit roots make ‖P‖ huge; the residual floor is ~eps·‖P‖
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let roots: Vec<f64> = (0..n).map(|_| rng.random_range(-0.95..0.95)).collect();
        let a = companion(&companion_row(&roots));
        let p = lyapunov_pair(&a, &DMatrix::identity(n, n)).unwrap();
        let res = (a.transpose() * &p * &a - &p + DMatrix::identity(n, n)).norm();
        prop_assert!(res < 1e-13 * p.norm().max(1.0), "{} {}", res, p.norm());
        prop_assert!(p.cholesky().is_some());
    }

    #[test]
    fn optimal_beta_beats_samples(seed in any::<u64>(), n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let roots: Vec<f64> = (0..n).map(|_| rng.random_range(-0.9..0.9)).collect();
        let a = companion(&companion_row(&roots));
        prop_assume!(a.iter().any(|v| *v != 0.0));
        let mut b = DVector::zeros(n);
        b[0] = 1.0;
        let q = DMatrix::identity(n, n);
        let p = lyapunov_pair(&a, &q).unwrap();
        let beta = optimal_beta(&a, &b, &p, &q).unwrap();
        prop_assert!(beta > 0.0 && beta < 1.0);
        let best = iss_rhs(&a, &b, &p, &q, beta);
        for _ in 0..100 {
            let s: f64 = rng.random_range(1e-6..1.0 - 1e-6);
            prop_assert!(iss_rhs(&a, &b, &p, &q, s) <= best * (1.0 + 1e-12));
        }
    }
}
