//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so a failing criterion is
//! reported rather than aborting the suite. The process exits nonzero on any
//! FAIL only when `TSCALE_ACCEPTANCE_STRICT=1` is set.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tscale::densemath::{jacobian_fd, DEFAULT_FD_SCALE};
use tscale::plants::{
    buck_closedloop, pmsm_fast_closedloop, pmsm_jacobians, BuckParams, BuckPlant, LinearPlant, PmsmParams,
    PmsmPlant,
};
use tscale::senscond::{closed_loop_asc, closed_loop_exact, error_bound_estimate};
use tscale::simkit::{epsilon_sweep, gain_sweep, metrics, simulate, ReferenceSchedule, RunSpec, TransientMetrics};
use tscale::sptheory::{eigen_report, match_spectra, qss_matrix, reduced_system};
use tscale::{BoundaryLayerSystem, PartitionedLinearSystem, RealMatrix, SensitivityMode, TwoTimescalePlant};

// Pinned tolerances and budgets.
const TABLE_REL_TOL: f64 = 0.01;
const TABLE_ABS_TOL: f64 = 1.0;
const TRACE_REL_TOL: f64 = 1e-6;
const SPECTRUM_TOL: f64 = 1e-6;
const BLOCK_ZERO_TOL: f64 = 1e-9;
const EQUILIBRIUM_TOL: f64 = 1e-9;
const ERROR_BOUND_ORACLE_TOL: f64 = 1e-12;
const EPS_RATIO_REL_TOL: f64 = 1e-6;
const DECOUPLING_REL_TOL: f64 = 1e-6;
const JACOBIAN_REL_TOL: f64 = 1e-4;

const BUDGET_GAIN_STUDY: Duration = Duration::from_secs(1);
const BUDGET_PROP2: Duration = Duration::from_secs(5);
const BUDGET_PROP345: Duration = Duration::from_secs(10);
const BUDGET_BUCK_STEP: Duration = Duration::from_secs(5);
const BUDGET_PMSM_STEP: Duration = Duration::from_secs(60);

/// Gains `(kp_v, ki_v, kp_i, ki_i)` and the reference eigenvalue pairs
/// (upper half-plane representatives) without and with conditioning.
type GainStudyRow = ([f64; 4], [(f64, f64); 2], [(f64, f64); 2]);

const GAIN_STUDY: [GainStudyRow; 3] = [
    (
        [0.94, 970.0, 2.0, 2000.0],
        [(-474.0, 2433.0), (-579.0, 532.0)],
        [(-1512.0, 2019.0), (-463.0, 618.0)],
    ),
    (
        [0.7, 574.0, 3.0, 4500.0],
        [(-1000.0, 2670.0), (-544.0, 570.0)],
        [(-1755.0, 2213.0), (-495.0, 624.0)],
    ),
    (
        [0.45, 255.0, 10.0, 5e4],
        [(-4572.0, 5639.0), (-481.0, 493.0)],
        [(-5021.0, 5211.0), (-480.0, 498.0)],
    ),
];

/// The externally reported error-estimate value for the reference buck converter.
const REPORTED_ERROR_ESTIMATE: f64 = 1.0 / 30.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Result<Outcome, String> {
    Ok(Outcome { pass, detail })
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RealMatrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    RealMatrix::new(rows, cols, data).unwrap()
}

fn random_system(rng: &mut ChaCha8Rng, n_x: usize, n_z: usize, m: usize) -> PartitionedLinearSystem {
    loop {
        let a22 = &random_matrix(rng, n_z, n_z) - &RealMatrix::identity(n_z).scale(3.0);
        let a21 = random_matrix(rng, n_z, n_x);
        if let Ok(sys) = PartitionedLinearSystem::new(
            random_matrix(rng, n_x, n_x),
            random_matrix(rng, n_x, n_z),
            a21,
            a22,
            random_matrix(rng, n_z, m),
        ) {
            return sys;
        }
    }
}

fn to_na(a: &RealMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

fn oracle_eigenvalues(a: &RealMatrix) -> Vec<Complex64> {
    to_na(a).complex_eigenvalues().iter().copied().collect()
}

fn conjugate_pairs(pairs: &[(f64, f64)]) -> Vec<Complex64> {
    pairs
        .iter()
        .flat_map(|&(re, im)| [Complex64::new(re, im), Complex64::new(re, -im)])
        .collect()
}

/// Largest component miss relative to `max(1 %·|λ|, 1 rad/s)`; ≤ 1 passes.
fn reference_miss(expected: &[Complex64], computed: &[Complex64]) -> f64 {
    match_spectra(expected, computed)
        .iter()
        .map(|(p, c)| {
            let tol = (TABLE_REL_TOL * p.norm()).max(TABLE_ABS_TOL);
            (p.re - c.re).abs().max((p.im - c.im).abs()) / tol
        })
        .fold(0.0, f64::max)
}

fn spectrum_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    match_spectra(a, b)
        .iter()
        .map(|(x, y)| (x - y).norm() / x.norm().max(1.0))
        .fold(0.0, f64::max)
}

fn criterion_1() -> Result<Outcome, String> {
    let mut worst = 0.0f64;
    let mut worst_trace = 0.0f64;
    let mut traces = Vec::new();
    for (gains, no_sc, with_sc) in GAIN_STUDY {
        let model = buck_closedloop(&BuckParams::reference().with_gains(gains)).map_err(|e| e.to_string())?;
        let report = eigen_report(&model.system).map_err(|e| e.to_string())?;
        worst = worst
            .max(reference_miss(&conjugate_pairs(&no_sc), &report.full_no_sc))
            .max(reference_miss(&conjugate_pairs(&with_sc), &report.full_with_sc));
        for (matrix, values) in [
            (model.system.full_matrix(), &report.full_no_sc),
            (closed_loop_asc(&model.system).map_err(|e| e.to_string())?, &report.full_with_sc),
        ] {
            let sum: f64 = values.iter().map(|v| v.re).sum();
            worst_trace = worst_trace.max((sum - matrix.trace()).abs() / matrix.trace().abs());
        }
        traces.push(closed_loop_asc(&model.system).map_err(|e| e.to_string())?.trace());
    }
    check(
        worst <= 1.0 && worst_trace <= TRACE_REL_TOL,
        format!(
            "worst component miss {worst:.3} of allowance; trace rel err {worst_trace:.1e}; \
             with-sc traces {:.1} / {:.1} / {:.1}",
            traces[0], traces[1], traces[2]
        ),
    )
}

fn criterion_2() -> Result<Outcome, String> {
    let mut rng = rng(2002);
    let (mut worst_spec, mut worst_block) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let n_x = rng.random_range(1..=4);
        let n_z = rng.random_range(1..=4);
        let sys = random_system(&mut rng, n_x, n_z, n_z);
        let closed = closed_loop_exact(&sys).map_err(|e| e.to_string())?;
        let (slow, fast) = reduced_system(&sys).map_err(|e| e.to_string())?;
        let mut union = oracle_eigenvalues(&slow);
        union.extend(oracle_eigenvalues(&fast));
        worst_spec = worst_spec.max(spectrum_gap(&union, &oracle_eigenvalues(&closed)));

        let t = BoundaryLayerSystem::transform(&sys).map_err(|e| e.to_string())?;
        let t_na = to_na(&t);
        // (x, z) = T (x, y), so the loop in boundary-layer coordinates is T⁻¹ A T.
        let similar = t_na.clone().try_inverse().ok_or("T not invertible")? * to_na(&closed) * &t_na;
        let lower_left = similar.view((n_x, 0), (n_z, n_x)).amax();
        worst_block = worst_block.max(lower_left);
    }
    check(
        worst_spec <= SPECTRUM_TOL && worst_block <= BLOCK_ZERO_TOL,
        format!("50 systems: spectrum gap {worst_spec:.1e}, lower-left block {worst_block:.1e}"),
    )
}

/// Equilibrium of the conditioned vector field of an affine plant, found
/// from its numerically assembled Jacobian rather than the plant's solver.
fn conditioned_equilibrium<P: TwoTimescalePlant>(
    plant: &P,
    mode: &SensitivityMode,
    w: &[f64],
) -> Result<Vec<f64>, String> {
    let dims = plant.dims();
    let field = |s: &[f64]| -> Vec<f64> {
        let (x, z) = s.split_at(dims.n_x);
        let v = tscale::simkit::injection_at(plant, mode, x, z, w).unwrap().v;
        let mut d = plant.slow(x, z, &v, w).unwrap();
        d.extend(plant.fast(x, z, &v, w).unwrap());
        d
    };
    let origin = vec![0.0; dims.n_x + dims.n_z];
    let jac = jacobian_fd(field, &origin, 1.0).map_err(|e| e.to_string())?;
    let f0: Vec<f64> = field(&origin).iter().map(|v| -v).collect();
    let sol = to_na(&jac)
        .lu()
        .solve(&nalgebra::DVector::from_column_slice(&f0))
        .ok_or("conditioned field is singular")?;
    Ok(sol.iter().copied().collect())
}

fn prop_345_on<P: TwoTimescalePlant>(
    plant: &P,
    w: &[f64],
    bound: f64,
    s0: &[f64],
    dt: f64,
    horizon: f64,
) -> Result<(f64, f64, f64), String> {
    let dims = plant.dims();
    let mode = SensitivityMode::Approximate;
    let (xe, ze) = plant.equilibrium(w).map_err(|e| e.to_string())?;
    let plain: Vec<f64> = xe.iter().chain(&ze).copied().collect();
    let conditioned = conditioned_equilibrium(plant, &mode, w)?;
    let eq_gap = plain
        .iter()
        .zip(&conditioned)
        .map(|(a, b)| (a - b).abs() / (1.0 + a.abs()))
        .fold(0.0, f64::max);
    let at_eq = tscale::simkit::injection_at(plant, &mode, &xe, &ze, w).map_err(|e| e.to_string())?;

    let (x0, z0) = s0.split_at(dims.n_x);
    let traj = simulate(plant, &RunSpec::new(mode, dt, horizon), x0, z0, w).map_err(|e| e.to_string())?;
    let violation = traj
        .residual_norms
        .iter()
        .zip(&traj.slow_deriv_norms)
        .map(|(r, f)| r - bound * f * (1.0 + 1e-9))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((eq_gap, at_eq.residual_norm, violation))
}

fn criterion_3() -> Result<Outcome, String> {
    let (mut eq_gap, mut eq_residual, mut violation) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    let mut absorb = |r: (f64, f64, f64)| {
        eq_gap = eq_gap.max(r.0);
        eq_residual = eq_residual.max(r.1);
        violation = violation.max(r.2);
    };

    let buck = BuckPlant::new(BuckParams::reference()).map_err(|e| e.to_string())?;
    let bound = error_bound_estimate(&buck_closedloop(&BuckParams::reference()).unwrap().system)
        .map_err(|e| e.to_string())?;
    absorb(prop_345_on(&buck, &[75.0], bound, &[50.0, 0.0, 2.0, 0.0], 5e-6, 0.05)?);

    let mut rng = rng(3003);
    for _ in 0..20 {
        let n_x = rng.random_range(1..=3);
        let n_z = rng.random_range(2..=4);
        let m = rng.random_range(1..n_z);
        let sys = random_system(&mut rng, n_x, n_z, m);
        let bound = error_bound_estimate(&sys).map_err(|e| e.to_string())?;
        let plant = LinearPlant::new(sys)
            .with_exogenous(
                random_matrix(&mut rng, n_x, 1),
                random_matrix(&mut rng, n_z, 1),
                vec!["w".into()],
                vec![1.0],
            )
            .map_err(|e| e.to_string())?;
        let s0: Vec<f64> = (0..n_x + n_z).map(|_| rng.random_range(-1.0..1.0)).collect();
        absorb(prop_345_on(&plant, &[1.0], bound, &s0, 1e-3, 1.0)?);
    }
    check(
        eq_gap <= EQUILIBRIUM_TOL && eq_residual <= EQUILIBRIUM_TOL && violation <= 0.0,
        format!(
            "equilibrium gap {eq_gap:.1e}, residual at equilibrium {eq_residual:.1e}, \
             worst ‖e‖ − bound·‖ẋ‖ = {violation:.2e}"
        ),
    )
}

fn criterion_4() -> Result<Outcome, String> {
    let sys = buck_closedloop(&BuckParams::reference()).map_err(|e| e.to_string())?.system;
    let svd_path = error_bound_estimate(&sys).map_err(|e| e.to_string())?;

    // B spans the first axis, so (I − P)M is the second row of A22⁻¹A21.
    let (a21, a22) = (sys.a21(), sys.a22());
    let (a, b, c) = (a22[(0, 0)], a22[(0, 1)], a22[(1, 0)]);
    let det = -b * c;
    let row = [
        (-c * a21[(0, 0)] + a * a21[(1, 0)]) / det,
        (-c * a21[(0, 1)] + a * a21[(1, 1)]) / det,
    ];
    let oracle = row[0].hypot(row[1]);
    check(
        (svd_path - oracle).abs() <= ERROR_BOUND_ORACLE_TOL,
        format!(
            "SVD {svd_path:.12e}, closed form {oracle:.12e}; reported {REPORTED_ERROR_ESTIMATE:.6} \
             (ratio {:.2}, agreement not required)",
            REPORTED_ERROR_ESTIMATE / svd_path
        ),
    )
}

fn criterion_5() -> Result<Outcome, String> {
    let rows: Vec<_> = gain_sweep(&BuckParams::reference(), &GAIN_STUDY.map(|r| r.0))
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.report.gap_ratio).collect();
    let disp: Vec<f64> = rows.iter().map(|r| r.displacement()).collect();
    let trend = gaps.windows(2).all(|w| w[1] > w[0]) && disp.windows(2).all(|w| w[1] < w[0]);

    let sys = buck_closedloop(&BuckParams::reference()).map_err(|e| e.to_string())?.system;
    let sweep = epsilon_sweep(&sys, &[1.0, 0.1, 0.01], &[40.0, 0.1], &[1.5, 0.05]).map_err(|e| e.to_string())?;
    let ratio_err = sweep
        .windows(2)
        .map(|w| ((w[0].1 / w[1].1) - 10.0).abs() / 10.0)
        .fold(0.0, f64::max);
    check(
        trend && ratio_err <= EPS_RATIO_REL_TOL,
        format!(
            "gap ratio {:.3} < {:.3} < {:.3}; displacement {:.1} > {:.1} > {:.1}; \
             ε-decade ratio err {ratio_err:.1e}",
            gaps[0], gaps[1], gaps[2], disp[0], disp[1], disp[2]
        ),
    )
}

fn criterion_6() -> Result<Outcome, String> {
    let mut rng = rng(6006);
    let sys = random_system(&mut rng, 2, 2, 2);
    let h = qss_matrix(&sys).map_err(|e| e.to_string())?;
    let a22 = sys.a22();
    let slowest_fast = oracle_eigenvalues(&a22).iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
    let horizon = 5.0 / slowest_fast;
    let dt = horizon / 5000.0;

    let plant = LinearPlant::new(sys);
    let (x0, z0) = ([0.8, -0.3], [0.5, 0.9]);
    let spec = RunSpec::new(SensitivityMode::ExactSquare, dt, horizon);
    let traj = simulate(&plant, &spec, &x0, &z0, &[]).map_err(|e| e.to_string())?;

    let boundary = |s: &[f64]| -> nalgebra::DVector<f64> {
        let hx = h.mul_vec(&s[..2]).unwrap();
        nalgebra::DVector::from_iterator(2, s[2..].iter().zip(hx).map(|(z, v)| z - v))
    };
    let y0 = boundary(&traj.states[0]);
    let a22_na = to_na(&a22);
    let mut worst = 0.0f64;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let expected = (&a22_na * *t).exp() * &y0;
        let got = boundary(s);
        worst = worst.max((got - &expected).norm() / y0.norm());
    }
    check(
        worst <= DECOUPLING_REL_TOL,
        format!("max ‖y − e^(A22 t) y0‖/‖y0‖ = {worst:.1e} over {horizon:.3} s (5 fast time constants)"),
    )
}

fn fmt_metrics(m: &TransientMetrics) -> String {
    format!(
        "ISE {:.5}, settling {}",
        m.ise,
        m.settling_time.map_or("unsettled".into(), |t| format!("{:.3} ms", t * 1e3))
    )
}

fn criterion_7() -> Result<Outcome, String> {
    let plant = BuckPlant::new(BuckParams::reference()).map_err(|e| e.to_string())?;
    let (x0, z0) = plant.equilibrium(&[50.0]).map_err(|e| e.to_string())?;
    let reference = ReferenceSchedule::step(50.0, 0.05, 75.0);
    let run = |mode| -> Result<TransientMetrics, String> {
        let spec = RunSpec::new(mode, 5e-6, 0.1).with_event(0.05, "v-ref", 75.0);
        let traj = simulate(&plant, &spec, &x0, &z0, &[50.0]).map_err(|e| e.to_string())?;
        Ok(metrics(&traj, 0, &reference))
    };
    let none = run(SensitivityMode::None)?;
    let approx = run(SensitivityMode::Approximate)?;
    let settles_faster = matches!(
        (approx.settling_time, none.settling_time),
        (Some(a), Some(n)) if a < n
    );
    check(
        approx.ise < none.ise && settles_faster,
        format!("none: {}; approx: {}", fmt_metrics(&none), fmt_metrics(&approx)),
    )
}

fn criterion_8() -> Result<Outcome, String> {
    let params = PmsmParams::reference();
    let plant = PmsmPlant::new(params).map_err(|e| e.to_string())?;
    let w0 = plant.default_exogenous();
    let (x0, z0) = plant.equilibrium(&w0).map_err(|e| e.to_string())?;
    let reference = ReferenceSchedule::constant(w0[0]);
    let run = |mode| -> Result<f64, String> {
        let mut spec = RunSpec::new(mode, 1e-6, 0.1).with_event(0.05, "p-load", 18_900.0);
        spec.sample_every = 10;
        let traj = simulate(&plant, &spec, &x0, &z0, &w0).map_err(|e| e.to_string())?;
        Ok(metrics(&traj, 0, &reference).ise)
    };
    let none = run(SensitivityMode::None)?;
    let approx = run(SensitivityMode::Approximate)?;

    let mut rng = rng(8008);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = [rng.random_range(400.0..700.0), rng.random_range(-1.0..1.0)];
        let z: Vec<f64> = (0..4)
            .map(|i| if i % 2 == 0 { rng.random_range(-200.0..200.0) } else { rng.random_range(-1.0..1.0) })
            .collect();
        let w = [540.0, rng.random_range(0.0..60.0)];
        let (gx, gz) = pmsm_jacobians(&params, &x, &z).map_err(|e| e.to_string())?;
        let g = |xx: &[f64], zz: &[f64]| pmsm_fast_closedloop(&params, xx, zz, &[0.0, 0.0], &w).unwrap();
        let fx = jacobian_fd(|xx| g(xx, &z), &x, DEFAULT_FD_SCALE).map_err(|e| e.to_string())?;
        let fz = jacobian_fd(|zz| g(&x, zz), &z, DEFAULT_FD_SCALE).map_err(|e| e.to_string())?;
        for (a, b) in [(&gx, &fx), (&gz, &fz)] {
            worst = worst.max((a - b).max_abs() / a.max_abs().max(1.0));
        }
    }
    check(
        approx < none && worst <= JACOBIAN_REL_TOL,
        format!("v_dc ISE none {none:.5}, approx {approx:.5}; Jacobian rel err {worst:.1e} over 100 points"),
    )
}

fn main() {
    // `cargo test` passes filter arguments; this report always runs in full.
    let strict = std::env::var("TSCALE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    type Criterion = (u32, &'static str, fn() -> Result<Outcome, String>, Option<Duration>);
    let criteria: [Criterion; 8] = [
        (1, "gain-study eigenvalues", criterion_1, Some(BUDGET_GAIN_STUDY)),
        (2, "exact-conditioning spectrum split", criterion_2, Some(BUDGET_PROP2)),
        (3, "equilibria and residual bound", criterion_3, Some(BUDGET_PROP345)),
        (4, "error estimate, SVD vs closed form", criterion_4, None),
        (5, "timescale trend and ε scaling", criterion_5, None),
        (6, "exact-conditioning decoupling in time", criterion_6, None),
        (7, "buck 50→75 V step, approx vs none", criterion_7, Some(BUDGET_BUCK_STEP)),
        (8, "PMSM load step, approx vs none", criterion_8, Some(BUDGET_PMSM_STEP)),
    ];

    let mut failures = 0;
    for (id, name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let in_budget = budget.is_none_or(|b| elapsed <= b);
        let (pass, detail) = match outcome {
            Ok(o) => (o.pass && in_budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget_note = budget.map_or(String::new(), |b| format!(" / budget {:.0} s", b.as_secs_f64()));
        println!(
            "{} [{id}] {name}: {detail} ({:.2} s{budget_note})",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        if !pass {
            failures += 1;
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if strict && failures > 0 {
        std::process::exit(1);
    }
}
