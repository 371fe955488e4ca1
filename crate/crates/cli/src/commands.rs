//! Subcommand bodies. Each writes only through its [`RunDir`].

use std::fs::File;
use std::io::{BufWriter, Write};

use kzk_core::analysis::{
    compare_solvers, convergence_study, cost_scaling_study, Problem, ScalingOptions, SolverKind,
    StudyOptions,
};
use kzk_core::grid::build_axes;
use kzk_core::io::{save_snapshot, write_field_csv, write_traces_csv, SnapshotRecord};
use kzk_core::run::default_snapshot_steps;
use kzk_core::splitting::check_cfl_splitting;
use kzk_core::turbulence::{evaluate_fields, sample_modes, TurbulenceSpec};
use kzk_core::{DomainConfig, Field2D, GridSet};
use serde_json::json;

use crate::error::CliError;
use crate::manifest::RunDir;
use crate::settings::{SolverChoice, Settings};

fn create(dir: &mut RunDir, name: &str) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(dir.file(name))?))
}

fn medium(settings: &Settings) -> Result<TurbulenceSpec, CliError> {
    Ok(sample_modes(&settings.turbulence()?)?)
}

fn nearest_index(nodes: &[f64], x: f64) -> Result<usize, CliError> {
    let (lo, hi) = match (nodes.first(), nodes.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Err(CliError::Config("empty rho axis".into())),
    };
    if !(lo..=hi).contains(&x) {
        return Err(CliError::Config(format!("`probe_rho`: {x} lies outside [{lo}, {hi}]")));
    }
    Ok(nodes
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|(i, _)| i)
        .expect("nonempty"))
}

/// Modes as text and the sampled velocity data as four grid files whose
/// rows are sigma levels and columns rho nodes.
pub fn generate_field(settings: &Settings, dir: &mut RunDir) -> Result<serde_json::Value, CliError> {
    let config = settings.domain()?;
    let spec = medium(settings)?;
    let axes = build_axes(&config, settings.solver.kind().rho_boundary())?;

    let mut w = create(dir, "modes.txt")?;
    writeln!(w, "# lambda = {:e} m, c0 = {:e} m/s", spec.lambda, spec.c0)?;
    writeln!(w, "# n |K_n| theta_n phi_n U_par U_perp")?;
    for (n, m) in spec.modes.iter().enumerate() {
        writeln!(
            w,
            "{n} {:e} {:e} {:e} {:e} {:e}",
            m.wavenumber, m.angle, m.phase, m.amplitude[0], m.amplitude[1]
        )?;
    }
    w.flush()?;

    let fields = evaluate_fields(&spec, &axes.sigma, &axes.rho);
    let (ns, nr) = (axes.sigma.len(), axes.rho.len());
    for (name, values) in [
        ("u_par", &fields.u_par),
        ("u_perp", &fields.u_perp),
        ("du_perp_dsigma", &fields.du_perp_dsigma),
        ("du_perp_drho", &fields.du_perp_drho),
    ] {
        let record = SnapshotRecord {
            sigma: 0.0,
            d_rho: config.d_sigma(),
            d_theta: config.d_rho(),
            field: Field2D::from_vec(ns, nr, values.clone())?,
        };
        save_snapshot(&dir.file(&format!("{name}.kzk")), &record)?;
    }
    let max_speed = fields.max_abs_velocity();
    println!("{} modes, {ns} x {nr} samples, max |U| component {max_speed:.4}", spec.modes.len());
    Ok(json!({ "sigma_levels": ns, "rho_nodes": nr, "max_abs_velocity": max_speed }))
}

pub struct RunArgs {
    pub csv: bool,
}

pub fn run(settings: &Settings, args: &RunArgs, dir: &mut RunDir) -> Result<serde_json::Value, CliError> {
    let config = settings.domain()?;
    let spec = medium(settings)?;
    let mut opts = settings.run_options();
    let steps = opts.steps(&config);
    opts.snapshot_steps = match &settings.snapshots {
        Some(sigmas) => {
            let mut s: Vec<usize> = sigmas
                .iter()
                .map(|&x| config.nearest_step(x))
                .filter(|&n| n <= steps)
                .collect();
            s.sort_unstable();
            s.dedup();
            s
        }
        None => default_snapshot_steps(&config, steps),
    };
    let problem = Problem::with_levels(&config, settings.solver.kind(), &spec, steps + 2)?;
    let cfl = check_cfl_splitting(&config, opts.cfl_v_max, problem.fields.max_abs_u_perp());
    eprintln!("CFL: {cfl}");
    eprintln!(
        "{}: {} steps on {} x {} (precision {})",
        settings.solver,
        steps,
        problem.rho_nodes.len(),
        problem.theta_nodes.len(),
        settings.precision.precision().name()
    );

    let out = problem.run(settings.precision.precision(), &opts)?;

    for snap in &out.snapshots {
        let stem = format!("snap_{:05}", snap.step);
        let record = SnapshotRecord {
            sigma: snap.sigma,
            d_rho: config.d_rho(),
            d_theta: config.d_theta(),
            field: snap.field.clone(),
        };
        save_snapshot(&dir.file(&format!("{stem}.kzk")), &record)?;
        if args.csv {
            let mut w = create(dir, &format!("{stem}.csv"))?;
            write_field_csv(&mut w, &snap.field, &problem.rho_nodes, &problem.theta_nodes)?;
        }
    }

    let probe = nearest_index(&problem.rho_nodes, settings.probe_rho)?;
    let traces: Vec<(String, Vec<f64>)> = out
        .snapshots
        .iter()
        .map(|s| (format!("sigma_{}", s.sigma), s.field.theta_trace(probe)))
        .collect();
    write_traces_csv(create(dir, "traces.csv")?, &problem.theta_nodes, &traces)?;

    let mut w = create(dir, "timing.csv")?;
    writeln!(w, "step,sigma,t_nonlinear,t_linear,t_total")?;
    for (n, t) in out.steps.iter().enumerate() {
        writeln!(
            w,
            "{},{},{:e},{:e},{:e}",
            n + 1,
            config.sigma_at(n + 1),
            t.nonlinear_s,
            t.linear_s,
            t.total_s
        )?;
    }
    w.flush()?;

    let mean = out.mean_step();
    println!(
        "reached sigma = {} after {} steps in {:.3} s (mean step {:.4e} s, nonlinear {:.4e} s, linear {:.4e} s); max |V| = {:.4}",
        out.final_sigma, out.final_step, out.total_s, mean.total_s, mean.nonlinear_s, mean.linear_s, out.max_abs
    );
    Ok(json!({
        "steps": out.final_step,
        "final_sigma": out.final_sigma,
        "snapshot_steps": opts.snapshot_steps,
        "csv": args.csv,
        "probe_row": probe,
        "max_abs": out.max_abs,
        "wall_s": out.total_s,
        "cfl_passed": cfl.passed(),
    }))
}

pub struct ConvergeArgs {
    pub n_ref: usize,
    pub n_list: Vec<usize>,
    pub roi_only: bool,
}

pub fn converge(settings: &Settings, args: &ConvergeArgs, dir: &mut RunDir) -> Result<serde_json::Value, CliError> {
    let config = settings.domain()?;
    let spec = medium(settings)?;
    let opts = StudyOptions {
        precision: settings.precision.precision(),
        roi_only: args.roi_only,
        snapshot_steps: Vec::new(),
    };
    let study = convergence_study(&config, &spec, &args.n_list, args.n_ref, settings.solver.kind(), &opts)?;
    let mut w = create(dir, "converge.csv")?;
    writeln!(w, "solver,n_ref,n_sigma,rel_error,beta,failure")?;
    let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
    for row in &study.rows {
        let failure = row.failure.as_deref().unwrap_or("").replace(['"', ','], ";");
        writeln!(
            w,
            "{},{},{},{},{},{}",
            settings.solver,
            study.n_ref,
            row.n_sigma,
            opt(row.err),
            opt(row.beta),
            failure
        )?;
        println!(
            "N_sigma = {:5}  error = {:>11}  beta = {:>6}{}",
            row.n_sigma,
            row.err.map(|e| format!("{e:.4e}")).unwrap_or_else(|| "-".into()),
            row.beta.map(|b| format!("{b:.2}")).unwrap_or_else(|| "-".into()),
            row.failure.as_ref().map(|f| format!("  ({f})")).unwrap_or_default()
        );
    }
    w.flush()?;
    Ok(json!({ "n_ref": args.n_ref, "n_list": args.n_list, "roi_only": args.roi_only, "betas": study.betas() }))
}

pub struct BenchArgs {
    pub sets: Vec<GridSet>,
    pub solvers: Vec<SolverChoice>,
    pub steps: usize,
    pub repetitions: usize,
}

pub fn bench(settings: &Settings, args: &BenchArgs, dir: &mut RunDir) -> Result<serde_json::Value, CliError> {
    let config = settings.domain()?;
    let spec = medium(settings)?;
    let opts = ScalingOptions {
        precision: settings.precision.precision(),
        steps: args.steps,
        repetitions: args.repetitions,
    };
    let mut w = create(dir, "bench.csv")?;
    writeln!(
        w,
        "solver,set,n_sigma,n_rho,n_theta,threads,precision,t_step,t_nonlinear,t_linear,spread,noisy,projected_total_s,growth_measured,growth_predicted"
    )?;
    for &solver in &args.solvers {
        let report = cost_scaling_study(&config, &spec, &args.sets, solver.kind(), &opts)?;
        let growth = report.growth();
        for (i, e) in report.entries.iter().enumerate() {
            let (gm, gp) = match i.checked_sub(1).and_then(|p| growth.get(p)) {
                Some(&(m, p)) => (format!("{m:.4}"), format!("{p:.4}")),
                None => (String::new(), String::new()),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{:e},{:e},{:e},{:.4},{},{:e},{},{}",
                solver,
                e.set.index(),
                e.n_sigma,
                e.n_rho,
                e.n_theta,
                report.threads,
                report.precision.name(),
                e.per_step.total_s,
                e.per_step.nonlinear_s,
                e.per_step.linear_s,
                e.spread,
                e.noisy,
                e.projected_total_s,
                gm,
                gp
            )?;
            println!(
                "{solver:>17} set {} : {:.4e} s/step (nonlinear {:.3e}, linear {:.3e}), projected {:.1} s{}",
                e.set.index(),
                e.per_step.total_s,
                e.per_step.nonlinear_s,
                e.per_step.linear_s,
                e.projected_total_s,
                if e.noisy { "  [noisy]" } else { "" }
            );
        }
    }
    w.flush()?;
    Ok(json!({
        "sets": args.sets.iter().map(|s| s.index()).collect::<Vec<_>>(),
        "solvers": args.solvers.iter().map(|s| s.name()).collect::<Vec<_>>(),
        "steps": args.steps,
        "repetitions": args.repetitions,
    }))
}

pub struct CompareArgs {
    pub solvers: [SolverChoice; 2],
    pub checkpoints: Vec<f64>,
}

pub fn compare(settings: &Settings, args: &CompareArgs, dir: &mut RunDir) -> Result<serde_json::Value, CliError> {
    let config: DomainConfig = settings.domain()?;
    let spec = medium(settings)?;
    let kinds: [SolverKind; 2] = [args.solvers[0].kind(), args.solvers[1].kind()];
    let cmp = compare_solvers(&config, &spec, kinds, &args.checkpoints, settings.probe_rho)?;
    let (a, b) = (args.solvers[0].name(), args.solvers[1].name());
    let mut w = create(dir, "compare.csv")?;
    writeln!(w, "sigma,relative_difference,mean_difference,amplitude_ratio,overshoot_a,overshoot_b")?;
    for c in &cmp.checkpoints {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e}",
            c.sigma, c.relative_difference, c.mean_difference, c.amplitude_ratio, c.overshoot_a, c.overshoot_b
        )?;
        let traces = vec![(a.to_string(), c.trace_a.clone()), (b.to_string(), c.trace_b.clone())];
        let name = format!("traces_sigma_{}.csv", c.sigma);
        write_traces_csv(create(dir, &name)?, &cmp.theta_nodes, &traces)?;
        println!(
            "sigma = {:7.3}: relative difference {:.4e}, amplitude ratio {:.4}, overshoot {a} {:.3e} / {b} {:.3e}",
            c.sigma, c.relative_difference, c.amplitude_ratio, c.overshoot_a, c.overshoot_b
        );
    }
    w.flush()?;
    Ok(json!({
        "solvers": [a, b],
        "checkpoints": args.checkpoints,
        "probe_rho": cmp.probe_rho,
        "probe_row": cmp.probe_row,
    }))
}
