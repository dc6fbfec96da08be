use std::path::{Path, PathBuf};

use fspde_core::chaos::xi_h;
use fspde_core::covariance::{s_n_from_norms, trace_q};
use fspde_core::estimators::{
    alpha_bar_discrete, alpha_check_discrete, alpha_hat_continuous, alpha_tilde_continuous, asymptotic_constants, qww1,
    trace_q1,
};
use fspde_core::harness::{run_experiment, SchemeSpec};
use fspde_core::io::{
    format_f64, read_trajectory_csv_file, write_trajectory_cache, write_trajectory_csv, TrajectoryTable,
};
use fspde_core::simulate::{attach_projection, integrate_path};
use fspde_core::spectral_model::check_validity;
use fspde_core::{
    AsymptoticConstants, EmbeddingPolicy, EstimateReport, EstimatorKind, ExperimentKind, ExperimentSpec, LagTable,
    ModelSpec, Scheme, SimulationOptions, TrajectoryGrid,
};
use serde::Serialize;

use crate::configs::{load, EstimateConfig, SimulateConfig, TheoryConfig};
use crate::manifest::Manifest;
use crate::{Cli, Command, Failure, Format};

pub fn run(cli: &Cli) -> Result<u8, Failure> {
    match &cli.command {
        Command::Theory => theory(cli),
        Command::Simulate => simulate(cli),
        Command::Estimate { input } => estimate(cli, input.as_deref()),
        Command::Experiment { kind } => experiment(cli, (*kind).into()),
    }
}

fn out_dir(cli: &Cli) -> Result<&Path, Failure> {
    std::fs::create_dir_all(&cli.out).map_err(|e| Failure::new("io", format!("{}: {e}", cli.out.display())))?;
    Ok(&cli.out)
}

fn json_text<T: Serialize>(value: &T) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// A number with its truncation-tail indicator.
#[derive(Serialize)]
struct Quantity {
    value: f64,
    tail: f64,
}

#[derive(Serialize)]
struct TableRow {
    n: usize,
    value: f64,
}

#[derive(Serialize)]
struct TheoryReport {
    model: ModelSpec,
    alpha: f64,
    hurst: f64,
    dt: f64,
    modes: usize,
    /// `Tr Q_∞` at drift one; tail is the last mode's share.
    trace_q_infinity: Quantity,
    trace_q_alpha: Quantity,
    projection: Option<String>,
    qww_infinity: Option<Quantity>,
    qww_alpha: Option<Quantity>,
    constants: Option<AsymptoticConstants>,
    s_n: Vec<TableRow>,
    xi_h: Vec<TableRow>,
    validity: Option<fspde_core::spectral_model::ValidityReport>,
    notes: Vec<String>,
}

fn theory(cli: &Cli) -> Result<u8, Failure> {
    let cfg = load::<TheoryConfig>(cli.config.as_deref())?;
    let c = &cfg.value;
    let model = c.model.build()?;
    let scale = model.alpha.powf(-2.0 * model.hurst);
    let mut notes = Vec::new();
    let tq = trace_q1(&model);
    let w = match &c.projection {
        Some(p) => Some(p.build(model.modes())?),
        None => None,
    };
    let qw = match &w {
        Some(w) => Some(qww1(&model, w)?),
        None => None,
    };
    let constants = match asymptotic_constants(&model, w.as_ref(), c.dt) {
        Ok(k) => Some(k),
        Err(e) => {
            notes.push(format!("asymptotic constants unavailable: {e}"));
            None
        }
    };
    let mut sizes = c.table_sizes.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let mut s_n = Vec::new();
    if let Some(&n_max) = sizes.last() {
        if sizes[0] == 0 {
            return Err(Failure::new("config", "table sizes must be positive"));
        }
        let table = LagTable::build(&model, c.dt, n_max)?;
        let norms = table.hs_norms();
        s_n = sizes
            .iter()
            .map(|&n| TableRow {
                n,
                value: s_n_from_norms(&norms, n),
            })
            .collect();
    }
    let xi: Vec<TableRow> = sizes
        .iter()
        .filter_map(|&n| xi_h(model.hurst, n as f64).ok().map(|value| TableRow { n, value }))
        .collect();
    if xi.is_empty() && !sizes.is_empty() {
        notes.push("no Berry–Esseen rate for H ≥ 3/4".into());
    }
    let validity = match &c.model {
        ModelSpec::Distributed { d, m, .. } => Some(check_validity(model.hurst, *d, *m)),
        _ => None,
    };
    let report = TheoryReport {
        model: c.model.clone(),
        alpha: model.alpha,
        hurst: model.hurst,
        dt: c.dt,
        modes: model.modes(),
        trace_q_infinity: Quantity {
            value: tq.value,
            tail: tq.tail_ratio,
        },
        trace_q_alpha: Quantity {
            value: trace_q(&model),
            tail: tq.tail_ratio,
        },
        projection: w.as_ref().map(|w| w.descriptor.clone()),
        qww_infinity: qw.map(|q| Quantity {
            value: q.value,
            tail: q.tail_ratio,
        }),
        qww_alpha: qw.map(|q| Quantity {
            value: q.value * scale,
            tail: q.tail_ratio,
        }),
        constants,
        s_n,
        xi_h: xi,
        validity,
        notes,
    };
    let dir = out_dir(cli)?;
    let json = json_text(&report)?;
    let csv = theory_csv(&report);
    std::fs::write(dir.join("theory.json"), &json)?;
    std::fs::write(dir.join("theory.csv"), &csv)?;
    Manifest::new(
        "theory",
        &cfg.raw,
        None,
        vec!["theory.json".into(), "theory.csv".into()],
    )
    .write(dir)?;
    print!("{}", if cli.format == Format::Json { json } else { csv });
    Ok(0)
}

fn theory_csv(r: &TheoryReport) -> String {
    let mut out = String::from("quantity,argument,value,tail\n");
    let mut line = |q: &str, arg: String, v: f64, tail: Option<f64>| {
        let tail = tail.map(format_f64).unwrap_or_default();
        out.push_str(&format!("{q},{arg},{},{tail}\n", format_f64(v)));
    };
    line(
        "trace_q_infinity",
        String::new(),
        r.trace_q_infinity.value,
        Some(r.trace_q_infinity.tail),
    );
    line(
        "trace_q_alpha",
        String::new(),
        r.trace_q_alpha.value,
        Some(r.trace_q_alpha.tail),
    );
    if let (Some(a), Some(b)) = (&r.qww_infinity, &r.qww_alpha) {
        line("qww_infinity", String::new(), a.value, Some(a.tail));
        line("qww_alpha", String::new(), b.value, Some(b.tail));
    }
    if let Some(k) = &r.constants {
        line(
            "s_infty_star",
            String::new(),
            k.s_infty_star.value,
            Some(k.s_infty_star.tail),
        );
        line(
            "u_infty_star",
            String::new(),
            k.u_infty_star.value,
            Some(k.u_infty_star.tail),
        );
        line("gamma", String::new(), k.gamma, None);
        line("sigma1", String::new(), k.sigma1, Some(k.s_infty_star.tail));
        line("sigma2", String::new(), k.sigma2, Some(k.u_infty_star.tail));
        if let (Some(d), Some(s3), Some(s4), Some(rs), Some(ri)) =
            (k.delta, k.sigma3, k.sigma4, k.r_z_sum, k.r_z_integral)
        {
            line("delta", String::new(), d, None);
            line("sigma3", String::new(), s3, Some(rs.tail));
            line("sigma4", String::new(), s4, Some(ri.tail));
        }
    }
    for row in &r.s_n {
        line("s_n", row.n.to_string(), row.value, Some(0.0));
    }
    for row in &r.xi_h {
        line("xi_h", row.n.to_string(), row.value, Some(0.0));
    }
    out
}

#[derive(Serialize)]
struct SimulateSummary {
    points: usize,
    dt: f64,
    burn_in_steps: usize,
    init: String,
    files: Vec<String>,
}

fn simulate(cli: &Cli) -> Result<u8, Failure> {
    let cfg = load::<SimulateConfig>(cli.config.as_deref())?;
    let c = &cfg.value;
    let model = c.model.build()?;
    let seed = cli.seed.unwrap_or(c.seed);
    let burn = c
        .burn_in_steps
        .unwrap_or_else(|| TrajectoryGrid::default_burn_in(&model, c.dt));
    let grid = TrajectoryGrid::new(c.dt, c.n_steps)?.with_burn_in(burn);
    let options = SimulationOptions {
        scheme: match c.scheme {
            SchemeSpec::Exact => Scheme::Exact,
            SchemeSpec::ExponentialEuler => Scheme::ExponentialEuler { substeps: c.substeps },
        },
        keep_modes: true,
        policy: EmbeddingPolicy::default(),
    };
    let mut traj = integrate_path(&model, &grid, &c.init, &options, seed, c.replication)?;
    if let Some(p) = &c.projection {
        traj = attach_projection(&traj, &p.build(model.modes())?)?;
    }
    let table = TrajectoryTable::from_trajectory(&traj);
    let dir = out_dir(cli)?;
    let mut csv = Vec::new();
    write_trajectory_csv(&table, &mut csv)?;
    std::fs::write(dir.join("trajectory.csv"), csv)?;
    let mut bin = Vec::new();
    write_trajectory_cache(&table, &mut bin)?;
    std::fs::write(dir.join("trajectory.bin"), bin)?;
    let files = vec!["trajectory.csv".to_string(), "trajectory.bin".to_string()];
    Manifest::new("simulate", &cfg.raw, Some(seed), files.clone()).write(dir)?;
    let summary = SimulateSummary {
        points: table.len(),
        dt: c.dt,
        burn_in_steps: if matches!(c.init, fspde_core::InitKind::BurnIn) {
            burn
        } else {
            0
        },
        init: c.init.name().into(),
        files,
    };
    match cli.format {
        Format::Json => print!("{}", json_text(&summary)?),
        Format::Csv => print!(
            "points,dt,burn_in_steps,init\n{},{},{},{}\n",
            summary.points, summary.dt, summary.burn_in_steps, summary.init
        ),
    }
    Ok(0)
}

#[derive(Serialize)]
struct EstimateOutput {
    input: String,
    rows: usize,
    dt: f64,
    estimates: Vec<EstimateReport>,
    notes: Vec<String>,
}

fn estimate(cli: &Cli, input: Option<&Path>) -> Result<u8, Failure> {
    let cfg = load::<EstimateConfig>(cli.config.as_deref())?;
    let c = &cfg.value;
    let path: PathBuf = match (input, &c.input) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) if p.is_relative() => cfg.base.as_deref().map(|b| b.join(p)).unwrap_or_else(|| p.clone()),
        (None, Some(p)) => p.clone(),
        (None, None) => {
            return Err(Failure::new(
                "usage",
                "no trajectory given: use --input or the 'input' key",
            ))
        }
    };
    let table =
        read_trajectory_csv_file(&path).map_err(|e| Failure::new(e.category(), format!("{}: {e}", path.display())))?;
    let dt = table.dt()?;
    let model = c.model.build()?;
    let w = match &c.projection {
        Some(p) => Some(p.build(model.modes())?),
        None => None,
    };
    let kinds: Vec<EstimatorKind> = if c.estimators.is_empty() {
        let mut k = vec![EstimatorKind::DiscreteNorm, EstimatorKind::ContinuousNorm];
        if w.is_some() {
            k.extend([EstimatorKind::DiscreteProj, EstimatorKind::ContinuousProj]);
        }
        k
    } else {
        c.estimators.clone()
    };
    let needs_projection = kinds.iter().any(|k| k.is_projection());
    if needs_projection && w.is_none() {
        return Err(Failure::new("config", "projection estimators need a 'projection'"));
    }
    if needs_projection && table.projections.is_none() {
        return Err(Failure::new(
            "format",
            "projection estimators need a 'projection' column",
        ));
    }
    let tq = trace_q1(&model);
    let qw = match &w {
        Some(w) => Some(qww1(&model, w)?),
        None => None,
    };
    let mut notes = vec!["discrete estimators average the rows after the first".to_string()];
    let constants = match c.true_alpha {
        Some(a) => match model
            .with_alpha(a)
            .and_then(|m| asymptotic_constants(&m, w.as_ref(), dt))
        {
            Ok(k) => Some(k),
            Err(e) => {
                notes.push(format!("not standardized: {e}"));
                None
            }
        },
        None => None,
    };
    let mut estimates = Vec::new();
    for &k in &kinds {
        let sq = &table.sq_norms;
        let r = match k {
            EstimatorKind::DiscreteNorm => alpha_check_discrete(&sq[1..], &tq, model.hurst)?,
            EstimatorKind::ContinuousNorm => alpha_hat_continuous(sq, dt, &tq, model.hurst)?,
            EstimatorKind::DiscreteProj => alpha_bar_discrete(
                &table.projections.as_ref().unwrap()[1..],
                qw.as_ref().unwrap(),
                model.hurst,
            )?,
            EstimatorKind::ContinuousProj => alpha_tilde_continuous(
                table.projections.as_ref().unwrap(),
                dt,
                qw.as_ref().unwrap(),
                model.hurst,
            )?,
        };
        let r = match (&constants, c.true_alpha) {
            (Some(kc), Some(a)) => match kc.sigma(k) {
                Some(s) => r.with_sigma(s).with_truth(a)?,
                None => r,
            },
            _ => r,
        };
        estimates.push(r);
    }
    let output = EstimateOutput {
        input: path.display().to_string(),
        rows: table.len(),
        dt,
        estimates,
        notes,
    };
    let dir = out_dir(cli)?;
    let json = json_text(&output)?;
    std::fs::write(dir.join("estimate.json"), &json)?;
    Manifest::new("estimate", &cfg.raw, None, vec!["estimate.json".into()]).write(dir)?;
    match cli.format {
        Format::Json => print!("{json}"),
        Format::Csv => {
            println!("estimator,alpha_hat,sample_size,moment,normalizer,sigma,standardized_error");
            for e in &output.estimates {
                let opt = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
                println!(
                    "{},{},{},{},{},{},{}",
                    serde_json::to_value(e.kind)?.as_str().unwrap_or(""),
                    format_f64(e.alpha_hat),
                    format_f64(e.sample_size),
                    format_f64(e.moment),
                    format_f64(e.normalizer),
                    opt(e.sigma_asymptotic),
                    opt(e.standardized_error)
                );
            }
        }
    }
    Ok(0)
}

fn experiment(cli: &Cli, kind: ExperimentKind) -> Result<u8, Failure> {
    let cfg = load::<ExperimentSpec>(cli.config.as_deref())?;
    let mut spec = cfg.value;
    if spec.kind != kind {
        return Err(Failure::new(
            "config",
            format!(
                "config describes a '{}' experiment, not '{}'",
                spec.kind.name(),
                kind.name()
            ),
        ));
    }
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    let report = run_experiment(&spec)?;
    let dir = out_dir(cli)?;
    report.write_files(dir, "report")?;
    Manifest::new(
        kind.name(),
        &cfg.raw,
        Some(spec.seed),
        vec!["report.csv".into(), "report.json".into()],
    )
    .write(dir)?;
    match cli.format {
        Format::Json => print!("{}", report.to_json()?),
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            print!("{}", String::from_utf8_lossy(&buf));
        }
    }
    let failed: Vec<_> = report.checks.iter().filter(|c| !c.passed).collect();
    for c in &failed {
        eprintln!(
            "check failed: {} = {} (required {} {})",
            c.name, c.value, c.comparison, c.threshold
        );
    }
    Ok(if failed.is_empty() { 0 } else { 2 })
}
