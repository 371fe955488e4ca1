//! Initial data, convergence studies, solver comparison and cost scaling.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exprk::{run_exponential, Precision, Scheme};
use crate::grid::{build_axes, extract_region, l2_norm, relative_error, DomainConfig, Field2D, GridSet, RhoBoundary};
use crate::run::{RunOptions, RunOutput, StepTiming};
use crate::splitting::{DiffractionSum, SplittingSolver};
use crate::turbulence::{evaluate_fields, TurbulenceSpec, VelocityFields};

/// N-wave pulse
/// `V0 = (theta - 3 pi)/(2 pi) * (tanh(s (theta - 4 pi)) - tanh(s (theta - 2 pi)))`,
/// `s = B / (4 A)`, identical on every rho row.
pub fn initial_nwave(n_rows: usize, theta_nodes: &[f64], absorption: f64, nonlinearity: f64) -> Result<Field2D> {
    if absorption.is_nan() || absorption <= 0.0 {
        return Err(Error::config("A", "the N-wave pulse needs a positive absorption"));
    }
    let s = nonlinearity / (4.0 * absorption);
    let row: Vec<f64> = theta_nodes
        .iter()
        .map(|&t| (t - 3.0 * PI) / (2.0 * PI) * ((s * (t - 4.0 * PI)).tanh() - (s * (t - 2.0 * PI)).tanh()))
        .collect();
    Ok(Field2D::from_fn(n_rows, theta_nodes.len(), |_, k| row[k]))
}

/// `beta = ln(err1/err2) / ln(n2/n1)`.
pub fn convergence_rate(err1: f64, err2: f64, n1: f64, n2: f64) -> Result<f64> {
    if !(err1 > 0.0 && err2 > 0.0) {
        return Err(Error::InvalidArgument("errors must be positive".into()));
    }
    if !(n1 > 0.0 && n2 > n1) {
        return Err(Error::InvalidArgument("need 0 < n1 < n2".into()));
    }
    Ok((err1 / err2).ln() / (n2 / n1).ln())
}

/// Which marching scheme to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Exponential(Scheme),
    Splitting(DiffractionSum),
}

impl SolverKind {
    pub const EXPRK22: SolverKind = SolverKind::Exponential(Scheme::ExpRk22);
    pub const EXP_EULER: SolverKind = SolverKind::Exponential(Scheme::ExpEuler);
    pub const SPLITTING: SolverKind = SolverKind::Splitting(DiffractionSum::Direct);

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Exponential(s) => s.name(),
            SolverKind::Splitting(_) => "splitting",
        }
    }

    pub fn rho_boundary(self) -> RhoBoundary {
        match self {
            SolverKind::Exponential(_) => RhoBoundary::Periodic,
            SolverKind::Splitting(_) => RhoBoundary::Neumann,
        }
    }
}

/// Run `kind` from `v0`; `fields` must be sampled on the solver's rho nodes.
pub fn run_solver(
    kind: SolverKind,
    precision: Precision,
    config: &DomainConfig,
    v0: &Field2D,
    fields: &VelocityFields,
    opts: &RunOptions,
) -> Result<RunOutput> {
    match kind {
        SolverKind::Exponential(scheme) => run_exponential(config, scheme, precision, v0, fields, opts),
        SolverKind::Splitting(sum) => {
            if precision != Precision::Double {
                return Err(Error::InvalidArgument("the splitting solver runs in double precision only".into()));
            }
            SplittingSolver::new(config, sum)?.run(v0.clone(), fields, opts)
        }
    }
}

/// Grid nodes, N-wave data and velocity samples for one solver on one grid.
pub struct Problem {
    pub config: DomainConfig,
    pub kind: SolverKind,
    pub rho_nodes: Vec<f64>,
    pub theta_nodes: Vec<f64>,
    pub v0: Field2D,
    pub fields: VelocityFields,
}

impl Problem {
    /// Sample `spec` on every sigma level of `config`.
    pub fn new(config: &DomainConfig, kind: SolverKind, spec: &TurbulenceSpec) -> Result<Self> {
        Self::with_levels(config, kind, spec, config.n_sigma + 1)
    }

    /// Sample only the first `levels` sigma levels (enough for short runs).
    pub fn with_levels(config: &DomainConfig, kind: SolverKind, spec: &TurbulenceSpec, levels: usize) -> Result<Self> {
        let axes = build_axes(config, kind.rho_boundary())?;
        let levels = levels.min(axes.sigma.len());
        let fields = evaluate_fields(spec, &axes.sigma[..levels], &axes.rho);
        let v0 = initial_nwave(axes.rho.len(), &axes.theta, config.absorption, config.nonlinearity)?;
        Ok(Problem {
            config: config.clone(),
            kind,
            rho_nodes: axes.rho,
            theta_nodes: axes.theta,
            v0,
            fields,
        })
    }

    pub fn run(&self, precision: Precision, opts: &RunOptions) -> Result<RunOutput> {
        run_solver(self.kind, precision, &self.config, &self.v0, &self.fields, opts)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n_sigma: usize,
    /// Relative error against the reference; `None` if the run failed.
    pub err: Option<f64>,
    /// Rate against the previous row.
    pub beta: Option<f64>,
    /// Failure description for a flagged row.
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub solver: SolverKind,
    pub n_ref: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceStudy {
    pub fn betas(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.beta).collect()
    }
}

#[derive(Debug, Clone)]
pub struct StudyOptions {
    pub precision: Precision,
    /// Measure errors on the region of interest instead of the full grid.
    pub roi_only: bool,
    /// Extra snapshots to record (they do not affect the result).
    pub snapshot_steps: Vec<usize>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            precision: Precision::Double,
            roi_only: false,
            snapshot_steps: Vec::new(),
        }
    }
}

/// Self-convergence in `N_sigma` against a run at `n_ref`.
///
/// Velocity data are evaluated once on the reference sigma grid and
/// subsampled, so every run sees bitwise-identical coefficients. Each
/// `n` in `n_list` must divide `n_ref`. A failing run is recorded in its
/// row and the study continues.
pub fn convergence_study(
    base: &DomainConfig,
    spec: &TurbulenceSpec,
    n_list: &[usize],
    n_ref: usize,
    solver: SolverKind,
    opts: &StudyOptions,
) -> Result<ConvergenceStudy> {
    let mut n_sorted = n_list.to_vec();
    n_sorted.sort_unstable();
    n_sorted.dedup();
    if n_sorted.is_empty() {
        return Err(Error::InvalidArgument("empty N_sigma list".into()));
    }
    if let Some(bad) = n_sorted.iter().find(|&&n| n == 0 || !n_ref.is_multiple_of(n) || n >= n_ref) {
        return Err(Error::InvalidArgument(format!("N_sigma = {bad} must be a proper divisor of N_ref = {n_ref}")));
    }
    let ref_cfg = DomainConfig { n_sigma: n_ref, ..base.clone() };
    let problem = Problem::new(&ref_cfg, solver, spec)?;
    let run_opts = |snapshots: &[usize]| RunOptions {
        snapshot_steps: snapshots.to_vec(),
        ..RunOptions::default()
    };
    let reference = problem.run(opts.precision, &run_opts(&[]))?.final_field;
    let measure = |f: &Field2D| -> Result<(Field2D, Field2D)> {
        if !opts.roi_only {
            return Ok((reference.clone(), f.clone()));
        }
        let r = extract_region(&reference, &problem.rho_nodes, &problem.theta_nodes, base.roi_rho, base.roi_theta)?;
        let n = extract_region(f, &problem.rho_nodes, &problem.theta_nodes, base.roi_rho, base.roi_theta)?;
        Ok((r.field, n.field))
    };

    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &n in &n_sorted {
        let cfg = DomainConfig { n_sigma: n, ..base.clone() };
        let outcome = problem
            .fields
            .downsample(n_ref / n, 1)
            .and_then(|fields| run_solver(solver, opts.precision, &cfg, &problem.v0, &fields, &run_opts(&opts.snapshot_steps)))
            .and_then(|out| {
                let (r, f) = measure(&out.final_field)?;
                relative_error(&r, &f, base.d_rho(), base.d_theta())
            });
        let row = match outcome {
            Ok(err) => {
                let beta = match rows.last() {
                    Some(ConvergenceRow { n_sigma, err: Some(prev), .. }) if err > 0.0 => {
                        Some(convergence_rate(*prev, err, *n_sigma as f64, n as f64)?)
                    }
                    _ => None,
                };
                ConvergenceRow { n_sigma: n, err: Some(err), beta, failure: None }
            }
            Err(e) => ConvergenceRow { n_sigma: n, err: None, beta: None, failure: Some(e.to_string()) },
        };
        rows.push(row);
    }
    Ok(ConvergenceStudy { solver, n_ref, rows })
}

/// Largest deviation of a trace from its running median over
/// `2 * half_width + 1` points, shrunk symmetrically at the ends.
///
/// The median filter leaves monotone data and clean jumps unchanged, so the
/// result measures spurious oscillations only.
pub fn max_overshoot(trace: &[f64], half_width: usize) -> f64 {
    let n = trace.len();
    let mut window = Vec::with_capacity(2 * half_width + 1);
    let mut worst = 0.0_f64;
    for i in 0..n {
        let h = half_width.min(i).min(n - 1 - i);
        window.clear();
        window.extend_from_slice(&trace[i - h..=i + h]);
        window.sort_unstable_by(f64::total_cmp);
        let median = window[h];
        worst = worst.max((trace[i] - median).abs());
    }
    worst
}

/// Window half-width used by [`compare_solvers`].
pub const OVERSHOOT_HALF_WIDTH: usize = 3;

/// Side-by-side metrics of two fields at one sigma level.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointComparison {
    pub sigma: f64,
    /// `||a - b|| / max(||a||, ||b||)` on the region of interest.
    pub relative_difference: f64,
    /// Mean of `a - b` over the region of interest.
    pub mean_difference: f64,
    /// `max|a| / max|b|` on the region of interest.
    pub amplitude_ratio: f64,
    pub overshoot_a: f64,
    pub overshoot_b: f64,
    /// theta-traces at the probe row, restricted to the roi theta range.
    pub trace_a: Vec<f64>,
    pub trace_b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub probe_rho: f64,
    pub probe_row: usize,
    pub theta_nodes: Vec<f64>,
    pub checkpoints: Vec<CheckpointComparison>,
}

/// Compare two fields on the rows they share (`rho_nodes.len()` rows).
pub fn compare_fields(
    a: &Field2D,
    b: &Field2D,
    config: &DomainConfig,
    rho_nodes: &[f64],
    theta_nodes: &[f64],
    probe_row: usize,
    sigma: f64,
) -> Result<CheckpointComparison> {
    let rows = rho_nodes.len();
    if a.n_rho() < rows || b.n_rho() < rows || a.n_theta() != b.n_theta() {
        return Err(Error::ShapeMismatch("compared fields".into()));
    }
    let a = a.slice(0..rows, 0..a.n_theta());
    let b = b.slice(0..rows, 0..b.n_theta());
    let ra = extract_region(&a, rho_nodes, theta_nodes, config.roi_rho, config.roi_theta)?;
    let rb = extract_region(&b, rho_nodes, theta_nodes, config.roi_rho, config.roi_theta)?;
    let (dr, dt) = (config.d_rho(), config.d_theta());
    let diff = Field2D::from_vec(
        ra.field.n_rho(),
        ra.field.n_theta(),
        ra.field.values().iter().zip(rb.field.values()).map(|(x, y)| x - y).collect(),
    )?;
    let scale = l2_norm(&ra.field, dr, dt)?.max(l2_norm(&rb.field, dr, dt)?);
    let relative_difference = if scale > 0.0 { l2_norm(&diff, dr, dt)? / scale } else { 0.0 };
    let mean_difference = diff.values().iter().sum::<f64>() / diff.values().len() as f64;
    let cols = ra.theta_range.clone();
    let trace_a = a.row(probe_row)[cols.clone()].to_vec();
    let trace_b = b.row(probe_row)[cols].to_vec();
    Ok(CheckpointComparison {
        sigma,
        relative_difference,
        mean_difference,
        amplitude_ratio: ra.field.max_abs() / rb.field.max_abs(),
        overshoot_a: max_overshoot(&trace_a, OVERSHOOT_HALF_WIDTH),
        overshoot_b: max_overshoot(&trace_b, OVERSHOOT_HALF_WIDTH),
        trace_a,
        trace_b,
    })
}

/// Run two solvers from the same N-wave and medium and compare them at
/// the given sigma checkpoints and probe position.
pub fn compare_solvers(
    config: &DomainConfig,
    spec: &TurbulenceSpec,
    solvers: [SolverKind; 2],
    checkpoints: &[f64],
    probe_rho: f64,
) -> Result<Comparison> {
    let steps: Vec<usize> = checkpoints.iter().map(|&s| config.nearest_step(s)).collect();
    let last = steps.iter().copied().max().unwrap_or(0);
    let opts = RunOptions {
        n_steps: Some(last),
        snapshot_steps: steps.clone(),
        ..RunOptions::default()
    };
    let mut outputs = Vec::with_capacity(2);
    let mut axes = None;
    for kind in solvers {
        let p = Problem::with_levels(config, kind, spec, last + 2)?;
        outputs.push(p.run(Precision::Double, &opts)?);
        if kind.rho_boundary() == RhoBoundary::Periodic || axes.is_none() {
            axes = Some((p.rho_nodes, p.theta_nodes));
        }
    }
    // Compare on the periodic node set, which the Neumann set contains.
    let (mut rho_nodes, theta_nodes) = axes.expect("two solvers ran");
    rho_nodes.truncate(config.n_rho);
    let probe_row = nearest(&rho_nodes, probe_rho)
        .ok_or_else(|| Error::InvalidArgument(format!("probe rho {probe_rho} outside the domain")))?;
    let mut out = Vec::with_capacity(steps.len());
    for &step in &steps {
        let (a, b) = (outputs[0].snapshot_at(step), outputs[1].snapshot_at(step));
        let (Some(a), Some(b)) = (a, b) else {
            return Err(Error::InvalidArgument(format!("no snapshot at step {step}")));
        };
        out.push(compare_fields(&a.field, &b.field, config, &rho_nodes, &theta_nodes, probe_row, a.sigma)?);
    }
    let cols = crate::grid::node_range(&theta_nodes, config.roi_theta).unwrap_or(0..theta_nodes.len());
    Ok(Comparison {
        probe_rho,
        probe_row,
        theta_nodes: theta_nodes[cols].to_vec(),
        checkpoints: out,
    })
}

fn nearest(nodes: &[f64], x: f64) -> Option<usize> {
    let (lo, hi) = (*nodes.first()?, *nodes.last()?);
    if !(lo..=hi).contains(&x) {
        return None;
    }
    nodes
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|(i, _)| i)
}

/// Per-step cost of one solver on one grid set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingEntry {
    pub set: GridSet,
    pub n_sigma: usize,
    pub n_rho: usize,
    pub n_theta: usize,
    /// Median over repetitions of the mean per-step timings.
    pub per_step: StepTiming,
    /// Relative spread `(max - min) / median` of the per-step totals.
    pub spread: f64,
    /// Spread above 20 %.
    pub noisy: bool,
    /// `per_step.total_s * n_sigma`.
    pub projected_total_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub solver: SolverKind,
    pub threads: usize,
    pub precision: Precision,
    pub entries: Vec<ScalingEntry>,
}

impl ScalingReport {
    /// Measured and predicted per-step growth between consecutive sets.
    pub fn growth(&self) -> Vec<(f64, f64)> {
        self.entries
            .windows(2)
            .map(|w| {
                let measured = w[1].per_step.total_s / w[0].per_step.total_s;
                (measured, predicted_growth(self.solver, &w[0], &w[1]))
            })
            .collect()
    }
}

/// Operation-count ratio between two grids: `N_rho N_theta^2` for the
/// splitting scheme, `N_rho N_theta log(N_rho N_theta)` for the spectral one.
fn predicted_growth(solver: SolverKind, a: &ScalingEntry, b: &ScalingEntry) -> f64 {
    let (ra, ta, rb, tb) = (a.n_rho as f64, a.n_theta as f64, b.n_rho as f64, b.n_theta as f64);
    match solver {
        SolverKind::Splitting(DiffractionSum::Direct) => (rb * tb * tb) / (ra * ta * ta),
        SolverKind::Splitting(DiffractionSum::Running) => (rb * tb) / (ra * ta),
        SolverKind::Exponential(_) => (rb * tb * (rb * tb).ln()) / (ra * ta * (ra * ta).ln()),
    }
}

#[derive(Debug, Clone)]
pub struct ScalingOptions {
    pub precision: Precision,
    /// Steps timed per repetition.
    pub steps: usize,
    pub repetitions: usize,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        ScalingOptions {
            precision: Precision::Double,
            steps: 3,
            repetitions: 3,
        }
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_unstable_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) }
}

/// Time a few steps of `solver` on each set, one run at a time.
pub fn cost_scaling_study(
    base: &DomainConfig,
    spec: &TurbulenceSpec,
    sets: &[GridSet],
    solver: SolverKind,
    opts: &ScalingOptions,
) -> Result<ScalingReport> {
    if opts.steps == 0 || opts.repetitions == 0 {
        return Err(Error::InvalidArgument("need at least one step and one repetition".into()));
    }
    let mut entries = Vec::with_capacity(sets.len());
    for &set in sets {
        let config = base.clone().with_set(set);
        let problem = Problem::with_levels(&config, solver, spec, opts.steps + 2)?;
        let run_opts = RunOptions { n_steps: Some(opts.steps), ..RunOptions::default() };
        let mut reps = Vec::with_capacity(opts.repetitions);
        for _ in 0..opts.repetitions {
            reps.push(problem.run(opts.precision, &run_opts)?.mean_step());
        }
        let mut totals: Vec<f64> = reps.iter().map(|s| s.total_s).collect();
        let med = median(&mut totals);
        let spread = (totals[totals.len() - 1] - totals[0]) / med;
        let per_step = StepTiming {
            total_s: med,
            nonlinear_s: median(&mut reps.iter().map(|s| s.nonlinear_s).collect::<Vec<_>>()),
            linear_s: median(&mut reps.iter().map(|s| s.linear_s).collect::<Vec<_>>()),
        };
        entries.push(ScalingEntry {
            set,
            n_sigma: config.n_sigma,
            n_rho: config.n_rho,
            n_theta: config.n_theta,
            per_step,
            spread,
            noisy: spread > 0.2,
            projected_total_s: med * config.n_sigma as f64,
        });
    }
    Ok(ScalingReport {
        solver,
        threads: rayon::current_num_threads(),
        precision: opts.precision,
        entries,
    })
}
