//! Acceptance criteria, one test per criterion.
//!
//! Every test prints a single line `ACCEPT <id> <PASS|FAIL> <what> | <measured>`.
//! Tests take a shared lock so timings never overlap. Full-scale variants
//! are `#[ignore]`d and run with `--ignored`.

use std::f64::consts::PI;
use std::sync::Mutex;
use std::time::Instant;

use kzk_core::analysis::{
    compare_solvers, convergence_study, cost_scaling_study, Problem, ScalingOptions, SolverKind, StudyOptions,
};
use kzk_core::exprk::{linear_symbol, ExpIntegrator, Precision, Scheme};
use kzk_core::grid::{build_axes, relative_error, DomainConfig, Field2D, GridSet, RhoBoundary};
use kzk_core::run::RunOptions;
use kzk_core::spectral::Real;
use kzk_core::splitting::{step_burgers_godunov, DiffractionSum};
use kzk_core::turbulence::{sample_modes, TurbulenceParams, TurbulenceSpec, VelocityFields, VelocityRow};
use kzk_core::weno::weno5_b;
use num_complex::Complex64;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Writes to the raw stdout handle, which the harness does not capture, so
/// the line shows up in plain `cargo test` output as well.
fn report(id: &str, pass: bool, what: &str, measured: impl std::fmt::Display) {
    use std::io::Write;
    let line = format!("ACCEPT {id:<4} {} {what} | {measured}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn medium() -> TurbulenceSpec {
    sample_modes(&TurbulenceParams::default()).unwrap()
}

// Tolerances and windows.
const C1_DESK_BETA: (f64, f64) = (1.8, 2.7);
const C1_REFERENCE_BETAS: [f64; 5] = [2.15, 2.18, 2.20, 2.26, 2.47];
const C1_REFERENCE_TOL: f64 = 0.3;
const C2_FIRST_ORDER: (f64, f64) = (0.8, 1.3);
const C3_TOL: f64 = 1e-12;
const C4_MIN_ORDER: f64 = 4.5;
const C4_EQUILIBRIUM_TOL: f64 = 1e-12;
const C5_TOL: f64 = 1e-13;
const C7_SPLIT_GROWTH: (f64, f64) = (8.0 * 0.7, 8.0 * 1.3);
const C7_EXP_GROWTH_MAX: f64 = 5.5;
const C7_SET2_RATIO_MAX: f64 = 1.5;
const C9_SPEED_MAX: f64 = 0.06;
const C9_SEED_FRACTION: f64 = 0.95;
const C10_BOUND: f64 = 5.0;

fn desk_convergence_base() -> DomainConfig {
    DomainConfig {
        sigma_max: 30.0,
        n_rho: 1250,
        n_theta: 7 * 64,
        ..DomainConfig::default()
    }
}

const DESK_N_LIST: [usize; 4] = [100, 150, 200, 300];
const DESK_N_REF: usize = 1200;

fn in_range(x: f64, (lo, hi): (f64, f64)) -> bool {
    (lo..=hi).contains(&x)
}

#[test]
fn c1_exprk22_second_order_desk() {
    let _g = serial();
    let study = convergence_study(
        &desk_convergence_base(),
        &medium(),
        &DESK_N_LIST,
        DESK_N_REF,
        SolverKind::EXPRK22,
        &StudyOptions::default(),
    )
    .unwrap();
    let betas = study.betas();
    let pass = betas.len() == DESK_N_LIST.len() - 1 && betas.iter().all(|&b| in_range(b, C1_DESK_BETA));
    let errs: Vec<String> = study.rows.iter().map(|r| format!("{}:{:.3e}", r.n_sigma, r.err.unwrap_or(f64::NAN))).collect();
    report(
        "C1",
        pass,
        "ExpRK22 desk convergence, beta per pair in [1.8, 2.7]",
        format!("beta={betas:.3?} err=[{}]", errs.join(", ")),
    );
    assert!(pass);
}

#[test]
#[ignore = "full-scale grid: several hours on one core"]
fn c1_exprk22_second_order_full_scale() {
    let _g = serial();
    let base = DomainConfig {
        sigma_max: 30.0,
        n_rho: 5000,
        n_theta: 7 * 256,
        ..DomainConfig::default()
    };
    let study = convergence_study(
        &base,
        &medium(),
        &[200, 300, 400, 600, 800, 1200],
        2400,
        SolverKind::EXPRK22,
        &StudyOptions::default(),
    )
    .unwrap();
    let betas = study.betas();
    let pass = betas.len() == C1_REFERENCE_BETAS.len()
        && betas.iter().zip(C1_REFERENCE_BETAS).all(|(b, p)| (b - p).abs() <= C1_REFERENCE_TOL);
    let errs: Vec<String> = study.rows.iter().map(|r| format!("{}:{:.3e}", r.n_sigma, r.err.unwrap_or(f64::NAN))).collect();
    report(
        "C1F",
        pass,
        "ExpRK22 full-scale convergence, beta within 0.3 of the reference table",
        format!("beta={betas:.3?} err=[{}]", errs.join(", ")),
    );
    assert!(pass);
}

#[test]
fn c2_first_order_schemes() {
    let _g = serial();
    let spec = medium();
    let euler = convergence_study(
        &desk_convergence_base(),
        &spec,
        &DESK_N_LIST,
        DESK_N_REF,
        SolverKind::EXP_EULER,
        &StudyOptions::default(),
    )
    .unwrap();
    let split = convergence_study(
        &desk_convergence_base(),
        &spec,
        &DESK_N_LIST,
        DESK_N_REF,
        SolverKind::Splitting(DiffractionSum::Running),
        &StudyOptions::default(),
    )
    .unwrap();
    let ok = |b: &[f64]| b.len() == DESK_N_LIST.len() - 1 && b.iter().all(|&x| in_range(x, C2_FIRST_ORDER));
    let (be, bs) = (euler.betas(), split.betas());
    let pass = ok(&be) && ok(&bs);
    report(
        "C2",
        pass,
        "first-order rates in [0.8, 1.3] (exp-Euler, splitting)",
        format!("exp-euler={be:.3?} splitting={bs:.3?}"),
    );
    assert!(pass);
}

#[test]
fn c3_linear_flow_is_spectrally_exact() {
    let _g = serial();
    let cfg = DomainConfig {
        nonlinearity: 0.0,
        ..DomainConfig::default()
    };
    let (j, k) = (7isize, 11isize);
    let axes = build_axes(&cfg, RhoBoundary::Periodic).unwrap();
    let (lr, lt) = (cfg.rho.len(), cfg.theta.len());
    let phase = |r: f64, t: f64| 2.0 * PI * (j as f64 * (r - cfg.rho.lo) / lr + k as f64 * (t - cfg.theta.lo) / lt);
    let v0 = Field2D::from_fn(cfg.n_rho, cfg.n_theta, |a, b| phase(axes.rho[a], axes.theta[b]).cos());
    let mut ex = ExpIntegrator::<f64>::new(&cfg, Scheme::ExpRk22).unwrap();
    ex.set_state(&v0, 0).unwrap();
    ex.step(&VelocityFields::zeros(2, cfg.n_rho)).unwrap();
    let g = linear_symbol(&cfg, j, k, <f64 as Real>::UNIT_ROUNDOFF).exp();
    let exact = Field2D::from_fn(cfg.n_rho, cfg.n_theta, |a, b| {
        (g * Complex64::from_polar(1.0, phase(axes.rho[a], axes.theta[b]))).re
    });
    let err = relative_error(&exact, &ex.field(), cfg.d_rho(), cfg.d_theta()).unwrap();
    let pass = err <= C3_TOL;
    report("C3", pass, "one ExpRK22 step on a single mode, relative error <= 1e-12", format!("{err:.3e}"));
    assert!(pass);
}

fn sci(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn fitted_order(errs: &[f64; 3]) -> f64 {
    (errs[0] / errs[2]).ln() / 4f64.ln()
}

fn max_err(got: &Field2D, exact: impl Fn(usize, usize) -> f64) -> f64 {
    let mut m = 0.0_f64;
    for j in 0..got.n_rho() {
        for k in 0..got.n_theta() {
            m = m.max((got.get(j, k) - exact(j, k)).abs());
        }
    }
    m
}

#[test]
fn c4_weno5_order() {
    let _g = serial();
    let span_t = 28.0 * PI;
    let span_r = 400.0;
    let b = 0.05;
    let (w_t, w_r) = (2.0 * PI / span_t, 2.0 * PI / span_r);
    let sizes = [64usize, 128, 256];

    // U = 0: b = (B/2) d_theta V^2.
    let burgers: [f64; 3] = sizes.map(|nt| {
        let dt = span_t / nt as f64;
        let z = vec![0.0; 4];
        let row = VelocityRow { u_par: &z, u_perp: &z, du_perp_dsigma: &z, du_perp_drho: &z };
        let v = Field2D::from_fn(4, nt, |_, k| (w_t * k as f64 * dt).sin());
        let got = weno5_b(&v, row, b, 1.0, dt);
        max_err(&got, |_, k| {
            let x = w_t * k as f64 * dt;
            b * x.sin() * w_t * x.cos()
        })
    });

    // B = 0, U_par = 0, U_perp = c: b = -c d_rho V.
    let c = 0.04;
    let transport: [f64; 3] = sizes.map(|nr| {
        let dr = span_r / nr as f64;
        let (z, u) = (vec![0.0; nr], vec![c; nr]);
        let row = VelocityRow { u_par: &z, u_perp: &u, du_perp_dsigma: &z, du_perp_drho: &z };
        let v = Field2D::from_fn(nr, 4, |j, _| (w_r * j as f64 * dr).sin());
        let got = weno5_b(&v, row, 0.0, dr, 1.0);
        max_err(&got, |j, _| -c * w_r * (w_r * j as f64 * dr).cos())
    });

    // V = const with U_perp independent of rho: b = 0.
    let nr = 64;
    let u_par: Vec<f64> = (0..nr).map(|j| 0.03 * (w_r * j as f64).sin()).collect();
    let u_perp = vec![c; nr];
    let z = vec![0.0; nr];
    let row = VelocityRow { u_par: &u_par, u_perp: &u_perp, du_perp_dsigma: &z, du_perp_drho: &z };
    let level = 0.7;
    let residual = weno5_b(&Field2D::from_fn(nr, 64, |_, _| level), row, b, 1.0, 0.5).max_abs() / level;

    let (ob, ot) = (fitted_order(&burgers), fitted_order(&transport));
    let pass = ob >= C4_MIN_ORDER && ot >= C4_MIN_ORDER && residual <= C4_EQUILIBRIUM_TOL;
    report(
        "C4",
        pass,
        "WENO5 fitted order >= 4.5 (theta Burgers, rho transport), constant equilibrium <= 1e-12",
        format!("order_theta={ob:.2} order_rho={ot:.2} equilibrium={residual:.1e} errs_theta={} errs_rho={}", sci(&burgers), sci(&transport)),
    );
    assert!(pass);
}

#[test]
fn c5_godunov_conserves_row_sums() {
    let _g = serial();
    let cfg = DomainConfig::default();
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut v = Field2D::from_fn(cfg.n_rho + 1, cfg.n_theta, |_, _| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    });
    let before: Vec<(f64, f64)> = (0..v.n_rho())
        .map(|j| (v.row(j).iter().sum(), v.row(j).iter().map(|x| x.abs()).sum()))
        .collect();
    for _ in 0..100 {
        step_burgers_godunov(&mut v, cfg.nonlinearity, cfg.d_sigma(), cfg.d_theta());
    }
    let worst = before
        .iter()
        .enumerate()
        .map(|(j, (s, a))| (v.row(j).iter().sum::<f64>() - s).abs() / a)
        .fold(0.0, f64::max);
    let pass = worst <= C5_TOL;
    report("C5", pass, "Godunov theta-row sums over 100 steps, relative drift <= 1e-13", format!("{worst:.2e}"));
    assert!(pass);
}

fn oscillation_check(id: &str, cfg: DomainConfig) {
    let spec = medium();
    let pair = [SolverKind::Splitting(DiffractionSum::Running), SolverKind::EXPRK22];
    let cmp = compare_solvers(&cfg, &spec, pair, &[115.0], 144.0).unwrap();
    let c = &cmp.checkpoints[0];
    let pass = c.overshoot_a > c.overshoot_b;
    report(
        id,
        pass,
        "overshoot at (sigma, rho) = (115, 144), A = 7e-6: splitting > ExpRK22",
        format!(
            "splitting={:.4e} exprk22={:.4e} sigma={:.1} roi_rel_diff={:.3e}",
            c.overshoot_a, c.overshoot_b, c.sigma, c.relative_difference
        ),
    );
    assert!(pass);
}

#[test]
fn c6_oscillations_half_resolution() {
    let _g = serial();
    oscillation_check(
        "C6",
        DomainConfig {
            n_sigma: 600,
            n_rho: 1250,
            n_theta: 7 * 256,
            absorption: 7e-6,
            ..DomainConfig::default()
        },
    );
}

#[test]
#[ignore = "full desk resolution: about an hour on one core"]
fn c6_oscillations_full_resolution() {
    let _g = serial();
    oscillation_check(
        "C6F",
        DomainConfig {
            n_sigma: 1200,
            n_rho: 2500,
            n_theta: 7 * 512,
            absorption: 7e-6,
            ..DomainConfig::default()
        },
    );
}

#[test]
fn c7_cost_asymptotics() {
    let _g = serial();
    let spec = medium();
    let sets = [GridSet::Set1, GridSet::Set2, GridSet::Set3];
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let opts = ScalingOptions::default();
    let base = DomainConfig::default();
    let (split, exp) = pool.install(|| {
        (
            cost_scaling_study(&base, &spec, &sets, SolverKind::SPLITTING, &opts).unwrap(),
            cost_scaling_study(&base, &spec, &sets, SolverKind::EXPRK22, &opts).unwrap(),
        )
    });
    let gs = split.growth()[0].0;
    let ge = exp.growth()[0].0;
    let total = |r: &kzk_core::analysis::ScalingReport, i: usize| r.entries[i].projected_total_s;
    let set2_ratio = total(&exp, 1) / total(&split, 1);
    let set3_faster = total(&exp, 2) < total(&split, 2);
    let pass = in_range(gs, C7_SPLIT_GROWTH) && ge <= C7_EXP_GROWTH_MAX && set2_ratio <= C7_SET2_RATIO_MAX && set3_faster;
    let per_step = |r: &kzk_core::analysis::ScalingReport| {
        r.entries.iter().map(|e| format!("{:.3}s", e.per_step.total_s)).collect::<Vec<_>>().join("/")
    };
    report(
        "C7",
        pass,
        "growth Set1->2: splitting 8x +-30%, ExpRK22 <= 5.5x; Set2 ExpRK22 <= 1.5x splitting; Set3 ExpRK22 faster",
        format!(
            "growth_split={gs:.2} growth_exp={ge:.2} set2_ratio={set2_ratio:.2} set3 exp={:.0}s split={:.0}s per_step split={} exp={} noisy={}",
            total(&exp, 2),
            total(&split, 2),
            per_step(&split),
            per_step(&exp),
            split.entries.iter().chain(&exp.entries).any(|e| e.noisy)
        ),
    );
    assert!(pass);
}

#[test]
fn c8_parallel_determinism_and_speedup() {
    let _g = serial();
    let cfg = DomainConfig::default().with_set(GridSet::Set2);
    let steps = 3;
    let problem = Problem::with_levels(&cfg, SolverKind::EXPRK22, &medium(), steps + 2).unwrap();
    let opts = RunOptions { n_steps: Some(steps), ..RunOptions::default() };
    let timed = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let t = Instant::now();
            let out = problem.run(Precision::Double, &opts).unwrap();
            (t.elapsed().as_secs_f64(), out.final_field)
        })
    };
    let (t1, f1) = timed(1);
    let (t4, f4) = timed(4);
    let identical = f1 == f4;
    let hardware = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let faster = t4 < t1;
    report(
        "C8",
        identical && faster,
        "Set 2 ExpRK22: 4 threads faster than 1, bitwise-identical output",
        format!("t1={t1:.3}s t4={t4:.3}s identical={identical} hardware_threads={hardware}"),
    );
    assert!(identical, "outputs differ across thread counts");
    // A speedup needs at least four hardware threads; with fewer the line
    // above reports FAIL and the shortfall is recorded, not asserted.
    if hardware >= 4 {
        assert!(faster, "no parallel speedup: t1={t1} t4={t4}");
    }
}

#[test]
fn c9_turbulence_statistics() {
    let _g = serial();
    let cfg = DomainConfig::default();
    let axes = build_axes(&cfg, RhoBoundary::Periodic).unwrap();
    let seeds = 20;
    let mut worst_div = 0.0_f64;
    let mut speeds = Vec::with_capacity(seeds);
    for seed in 0..seeds as u64 {
        let spec = sample_modes(&TurbulenceParams { seed, ..TurbulenceParams::default() }).unwrap();
        for m in &spec.modes {
            let [kx, ky] = m.wave_vector();
            let [ax, ay] = m.amplitude;
            let scale = m.wavenumber * ax.hypot(ay);
            if scale > 0.0 {
                worst_div = worst_div.max((kx * ax + ky * ay).abs() / scale);
            }
        }
        speeds.push(spec.max_speed(&axes.sigma, &axes.rho));
    }
    let within = speeds.iter().filter(|&&s| s <= C9_SPEED_MAX).count();
    let pass = worst_div <= 4.0 * f64::EPSILON && within as f64 >= C9_SEED_FRACTION * seeds as f64;
    let max_speed = speeds.iter().copied().fold(0.0, f64::max);
    report(
        "C9",
        pass,
        "20 seeds: per-mode K.U = 0 to roundoff, max|U| <= 0.06 in >= 95% of seeds",
        format!("max_rel_divergence={worst_div:.1e} seeds_within={within}/{seeds} largest_max_speed={max_speed:.4}"),
    );
    assert!(pass);
}

#[test]
fn c10_set1_stability_bound() {
    let _g = serial();
    let cfg = DomainConfig::default();
    let problem = Problem::new(&cfg, SolverKind::EXPRK22, &medium()).unwrap();
    let out = problem.run(Precision::Double, &RunOptions::default()).unwrap();
    let pass = out.final_step == cfg.n_sigma && out.final_field.is_finite() && out.max_abs <= C10_BOUND;
    report(
        "C10",
        pass,
        "Set 1 ExpRK22 to sigma = 120 with A = 3.4e-4, max_n ||V^n||_inf <= 5",
        format!("max={:.4} steps={} time={:.1}s", out.max_abs, out.final_step, out.total_s),
    );
    assert!(pass);
}
