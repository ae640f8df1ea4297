use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use poisson_disorder::bounds::{boundary_polyline, classify_case, region_report, RegionReport};
use poisson_disorder::model::{init_statistic, ModelParams, Statistic3};
use poisson_disorder::policies::{build_eps_optimal, Policy};
use poisson_disorder::sim::{
    estimate_risk, estimate_risk_with_log, predicted_risk, replication_rng, sample_scenario,
    simulate_trajectory, statistic_path, RiskEstimate, Scenario,
};
use poisson_disorder::solver::{self, extract_region, ResolvedConfig, SolveOutput, ValueFunction};
use serde::{Deserialize, Serialize};

use crate::artifacts::*;
use crate::config::{PolicyKind, RunConfig};
use crate::error::CliError;

#[derive(Serialize)]
struct Diagnostics<'a> {
    provenance: Provenance,
    case: String,
    kappa: f64,
    rho: f64,
    config: &'a ResolvedConfig,
    iterations: usize,
    converged: bool,
    sup_history: &'a [f64],
    contraction_ratios: Vec<(usize, f64)>,
    contraction_bound: f64,
    stop_counts: Vec<usize>,
    nodes: usize,
    value_at_init: f64,
    predicted_risk: f64,
}

#[derive(Serialize)]
struct Timings {
    provenance: Provenance,
    solve_seconds: f64,
}

pub fn solve(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let p = cfg.params()?;
    let out = prepare_out(out)?;
    let prov = Provenance::of(cfg);
    let run = solver::solve(&p, &cfg.solver)?;
    let v = &run.value;
    let grid = v.grid().clone();

    write_csv(&out.join("value.csv"), &prov, |w| {
        w.write_record(["i", "j", "k", "phi_x", "phi_p", "phi_1", "value"])?;
        for idx in 0..grid.len() {
            let (i, j, k) = grid.unindex(idx);
            let s = grid.node_at(idx);
            w.serialize((i, j, k, s.phi_x, s.phi_p, s.phi_1, v.values()[idx]))?;
        }
        Ok(())
    })?;

    let region = extract_region(v, run.config.eps_stop);
    write_csv(&out.join("regions.csv"), &prov, |w| {
        w.write_record(["phi_x", "phi_p", "phi_1", "stop"])?;
        for idx in 0..grid.len() {
            let s = grid.node_at(idx);
            if s.phi_1 <= s.phi_p {
                w.serialize((s.phi_x, s.phi_p, s.phi_1, u8::from(region.stop[idx])))?;
            }
        }
        Ok(())
    })?;

    let init = init_statistic(p.pi1(), p.pi2())?;
    let diag = Diagnostics {
        provenance: prov.clone(),
        case: classify_case(&p).label().to_string(),
        kappa: p.kappa(),
        rho: p.rho(),
        config: &run.config,
        iterations: run.iterations(),
        converged: run.converged,
        sup_history: &run.sup_history,
        contraction_ratios: run.contraction_ratios(),
        contraction_bound: 2.0 * p.beta() / (2.0 * p.beta() + p.rho()),
        stop_counts: run.regions.iter().map(|r| r.stop_count()).collect(),
        nodes: grid.len(),
        value_at_init: v.eval(&init),
        predicted_risk: predicted_risk(v, p.pi1(), p.pi2(), &p)?,
    };
    write_json(&out.join("diagnostics.json"), &diag)?;
    write_json(
        &out.join("timings.json"),
        &Timings {
            provenance: prov.clone(),
            solve_seconds: run.elapsed.as_secs_f64(),
        },
    )?;
    write_json(&out.join(VALUE_FUNCTION_FILE), &artifact(&run, prov))?;
    log::info!(
        "{}: {} iterations, v(Υ₀) = {:.6}, artifacts in {}",
        classify_case(&p),
        run.iterations(),
        diag.value_at_init,
        out.display()
    );
    if !run.converged {
        return Err(CliError::NonConvergence(format!(
            "sup change {:e} after {} iterations exceeds eps_conv = {:e}",
            run.sup_history.last().copied().unwrap_or(f64::NAN),
            run.iterations(),
            run.config.eps_conv
        )));
    }
    Ok(())
}

fn artifact(run: &SolveOutput, provenance: Provenance) -> ValueFunctionArtifact {
    ValueFunctionArtifact {
        provenance,
        eps_stop: run.config.eps_stop,
        dt: run.config.dt,
        t_max: run.config.t_max,
        grid: (**run.value.grid()).clone(),
        stages: run.stages.iter().map(|v| v.values().to_vec()).collect(),
    }
}

#[derive(Serialize)]
struct BoundsReport {
    provenance: Provenance,
    report: RegionReport,
}

pub fn bounds(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let p = cfg.params()?;
    let out = prepare_out(out)?;
    let prov = Provenance::of(cfg);
    let report = region_report(&p);
    log::info!("{}: κ = {}, sum bound {}", report.case, report.kappa, report.bounding_box.sum_bound);
    write_json(
        &out.join("region_report.json"),
        &BoundsReport {
            provenance: prov.clone(),
            report,
        },
    )?;
    write_csv(&out.join("boundary.csv"), &prov, |w| {
        w.write_record(["phi_x", "phi_p"])?;
        for pt in boundary_polyline(&p, 201) {
            w.serialize(pt)?;
        }
        Ok(())
    })?;
    Ok(())
}

#[derive(Serialize)]
struct SampleSummary {
    rep: u64,
    scenario: Scenario,
    jumps_one: usize,
    jumps_two: usize,
    terminal: Statistic3,
}

#[derive(Serialize)]
struct SimulationReport {
    provenance: Provenance,
    horizon: f64,
    samples: Vec<SampleSummary>,
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    use poisson_disorder::model::Channel;
    let p = cfg.params()?;
    let out = prepare_out(out)?;
    let prov = Provenance::of(cfg);
    let horizon = cfg.horizon(&p);
    let mut samples = Vec::new();
    let mut rows = Vec::new();
    for rep in 0..cfg.simulation.trajectories as u64 {
        let mut rng = replication_rng(cfg.seed, rep);
        let sc = sample_scenario(&p, &mut rng);
        let traj = simulate_trajectory(&sc, &p, horizon, &mut rng)?;
        let path = statistic_path(&traj, &p)?;
        for (j, s) in traj.jumps().iter().zip(&path.states[1..]) {
            rows.push((rep, j.time, j.channel.index() + 1, s.phi_x, s.phi_p, s.phi_1));
        }
        samples.push(SampleSummary {
            rep,
            scenario: sc,
            jumps_one: traj.count(Channel::One),
            jumps_two: traj.count(Channel::Two),
            terminal: path.terminal(&p),
        });
    }
    write_csv(&out.join("jumps.csv"), &prov, |w| {
        w.write_record(["rep", "time", "channel", "phi_x", "phi_p", "phi_1"])?;
        for r in &rows {
            w.serialize(r)?;
        }
        Ok(())
    })?;
    write_json(
        &out.join("simulation.json"),
        &SimulationReport {
            provenance: prov,
            horizon,
            samples,
        },
    )?;
    Ok(())
}

/// Loads the stored stages and checks they were solved for this model.
fn load_stages(cfg: &RunConfig, out: &Path) -> Result<(ValueFunctionArtifact, Vec<ValueFunction>), CliError> {
    let art = ValueFunctionArtifact::load(&out.join(VALUE_FUNCTION_FILE))?;
    if art.provenance.model != cfg.model {
        return Err(CliError::MissingArtifact(format!(
            "{} was solved for {:?}, not {:?}",
            VALUE_FUNCTION_FILE, art.provenance.model, cfg.model
        )));
    }
    let stages = art.value_functions()?;
    if stages.is_empty() {
        return Err(CliError::MissingArtifact(format!("{VALUE_FUNCTION_FILE} holds no stages")));
    }
    Ok((art, stages))
}

fn bind_policy(
    cfg: &RunConfig,
    p: &ModelParams,
    stored: Option<&(ValueFunctionArtifact, Vec<ValueFunction>)>,
) -> Result<Policy, CliError> {
    let spec = &cfg.policy;
    Ok(match spec.kind {
        PolicyKind::ThresholdSum => Policy::ThresholdSum {
            threshold: spec.threshold.unwrap_or_else(|| p.kappa()),
        },
        PolicyKind::PerChannelMin => Policy::PerChannelMin {
            threshold: spec.threshold.unwrap_or_else(|| p.lambda() / p.c()),
        },
        PolicyKind::ValueRegion => {
            let (art, stages) = stored.expect("caller loads the artifact for value-based rules");
            Policy::ValueRegion {
                value: Arc::new(stages.last().expect("nonempty").clone()),
                eps_stop: art.eps_stop,
                dt: art.dt,
            }
        }
        PolicyKind::EpsOptimal => {
            let (art, stages) = stored.expect("caller loads the artifact for value-based rules");
            let n = spec.stages.unwrap_or(stages.len());
            if n == 0 || n > stages.len() {
                return Err(CliError::Config(format!(
                    "policy.stages = {n} but the artifact holds {} stages",
                    stages.len()
                )));
            }
            let resolved = ResolvedConfig {
                eps_stop: art.eps_stop,
                dt: art.dt,
                t_max: art.t_max,
                ..cfg.solver.resolve(p)?
            };
            build_eps_optimal(stages[..n].to_vec(), spec.eps.unwrap_or(0.01 / p.c()), &resolved)?
        }
    })
}

#[derive(Serialize)]
struct RiskReport {
    provenance: Provenance,
    policy: String,
    horizon: f64,
    estimate: RiskEstimate,
    /// `(1 − π)(1 + c·v(Υ₀))` from the stored value function, when present.
    predicted_risk: Option<f64>,
    /// `|R̂ − predicted| / SE`.
    standardized_gap: Option<f64>,
}

pub fn evaluate(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let p = cfg.params()?;
    let stored = if cfg.policy.kind.needs_value_function() {
        Some(load_stages(cfg, out)?)
    } else {
        match load_stages(cfg, out) {
            Ok(s) => Some(s),
            Err(CliError::MissingArtifact(_)) => None,
            Err(e) => return Err(e),
        }
    };
    let policy = bind_policy(cfg, &p, stored.as_ref())?;
    let out = prepare_out(out)?;
    let prov = Provenance::of(cfg);
    let horizon = cfg.horizon(&p);
    let (estimate, log) = estimate_risk_with_log(&policy, &p, cfg.simulation.reps, horizon, cfg.seed)?;
    let predicted = match &stored {
        Some((_, stages)) => Some(predicted_risk(stages.last().expect("nonempty"), p.pi1(), p.pi2(), &p)?),
        None => None,
    };
    log::info!(
        "{}: R̂ = {:.5} ± {:.5}{}",
        policy.name(),
        estimate.risk,
        estimate.std_error,
        predicted.map(|r| format!(", predicted {r:.5}")).unwrap_or_default()
    );
    write_csv(&out.join("replications.csv"), &prov, |w| {
        w.write_record(["rep", "theta", "tau", "fired", "false_alarm", "delay", "loss"])?;
        for (rep, r) in log.iter().enumerate() {
            w.serialize((rep, r.theta, r.tau, u8::from(r.fired), u8::from(r.false_alarm), r.delay, r.loss))?;
        }
        Ok(())
    })?;
    write_json(
        &out.join("risk.json"),
        &RiskReport {
            provenance: prov,
            policy: policy.name().to_string(),
            horizon,
            standardized_gap: predicted.map(|r| (estimate.risk - r).abs() / estimate.std_error),
            estimate,
            predicted_risk: predicted,
        },
    )?;
    Ok(())
}

/// One row of the sweep table; numeric fields are empty when the row failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SweepRow {
    param: String,
    value: f64,
    config_sha256: String,
    case: Option<String>,
    kappa: Option<f64>,
    iterations: Option<usize>,
    converged: Option<bool>,
    predicted_risk: Option<f64>,
    value_region_risk: Option<f64>,
    value_region_se: Option<f64>,
    threshold_sum_risk: Option<f64>,
    threshold_sum_se: Option<f64>,
    per_channel_risk: Option<f64>,
    per_channel_se: Option<f64>,
    status: String,
}

fn sweep_point(point: &RunConfig, row: &mut SweepRow) -> Result<(), CliError> {
    let p = point.params()?;
    row.case = Some(classify_case(&p).label().to_string());
    row.kappa = Some(p.kappa());
    let run = solver::solve(&p, &point.solver)?;
    row.iterations = Some(run.iterations());
    row.converged = Some(run.converged);
    row.predicted_risk = Some(predicted_risk(&run.value, p.pi1(), p.pi2(), &p)?);
    let horizon = point.horizon(&p);
    let reps = point.simulation.reps;
    let risk = |policy: &Policy| estimate_risk(policy, &p, reps, horizon, point.seed);
    let vr = risk(&Policy::value_region(Arc::new(run.value.clone()), &run.config))?;
    let ts = risk(&Policy::threshold_sum(&p))?;
    let pc = risk(&Policy::per_channel_min(&p))?;
    row.value_region_risk = Some(vr.risk);
    row.value_region_se = Some(vr.std_error);
    row.threshold_sum_risk = Some(ts.risk);
    row.threshold_sum_se = Some(ts.std_error);
    row.per_channel_risk = Some(pc.risk);
    row.per_channel_se = Some(pc.std_error);
    Ok(())
}

fn read_table(path: &Path) -> HashMap<String, SweepRow> {
    let Ok(text) = fs::read_to_string(path) else {
        return HashMap::new();
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    rdr.deserialize::<SweepRow>()
        .filter_map(|r| r.ok())
        .filter(|r| r.status == "ok")
        .map(|r| (r.config_sha256.clone(), r))
        .collect()
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let Some(spec) = &cfg.sweep else {
        return Err(CliError::Config("missing [sweep] table".into()));
    };
    if spec.values.is_empty() {
        return Err(CliError::Config("sweep.values is empty".into()));
    }
    let out = prepare_out(out)?;
    let prov = Provenance::of(cfg);
    let table = out.join("table.csv");
    let done = read_table(&table);
    let mut rows: Vec<SweepRow> = Vec::new();
    for &value in &spec.values {
        let mut point = cfg.clone();
        point.sweep = None;
        spec.param.set(&mut point.model, value);
        let hash = point.content_hash();
        let row = match done.get(&hash) {
            Some(r) => {
                log::info!("{} = {value}: already in the table", spec.param.name());
                r.clone()
            }
            None => {
                let mut row = SweepRow {
                    param: spec.param.name().to_string(),
                    value,
                    config_sha256: hash,
                    case: None,
                    kappa: None,
                    iterations: None,
                    converged: None,
                    predicted_risk: None,
                    value_region_risk: None,
                    value_region_se: None,
                    threshold_sum_risk: None,
                    threshold_sum_se: None,
                    per_channel_risk: None,
                    per_channel_se: None,
                    status: "ok".into(),
                };
                if let Err(e) = sweep_point(&point, &mut row) {
                    log::warn!("{} = {value} failed: {e}", spec.param.name());
                    row.status = e.to_string();
                }
                row
            }
        };
        rows.push(row);
        // Rewritten after every row so an interrupted sweep resumes from here.
        write_csv(&table, &prov, |w| {
            for r in &rows {
                w.serialize(r)?;
            }
            Ok(())
        })?;
    }
    Ok(())
}
