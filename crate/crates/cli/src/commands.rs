use std::path::PathBuf;

use fraclyap::lyapunov::{margin_scan, CandidateKind, ScanItem, Verdict, VerifyOptions};
use fraclyap::operators::{Family, FractionalOrder};
use fraclyap::seir::{
    equilibria, r0, seed_from_env, seeded_initial_states, simulate, verify_stability, Attractor, EquilibriumReport,
    SeirParams, StabilityOptions, StabilityReport,
};
use fraclyap::solvers::{solve, FdeProblem};
use fraclyap::trajectory::SampledTrajectory;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind, Signal, SweepAxis, TrajectoryConfig};
use crate::error::CliError;
use crate::format::sig15;

/// Shared command-line options.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub refine: usize,
    pub swap_sides: bool,
}

/// Bytes produced by a command and where they go.
pub struct Output {
    pub path: Option<PathBuf>,
    pub bytes: Vec<u8>,
}

impl Output {
    fn new(cfg: &ExperimentConfig, opts: &RunOptions, bytes: Vec<u8>) -> Self {
        Self { path: opts.out.clone().or_else(|| cfg.output.clone()), bytes }
    }

    pub fn write(&self) -> Result<(), CliError> {
        use std::io::Write;
        match &self.path {
            Some(p) => std::fs::write(p, &self.bytes).map_err(|e| CliError::io(p, e)),
            None => std::io::stdout().write_all(&self.bytes).map_err(|e| CliError::io(std::path::Path::new("<stdout>"), e)),
        }
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(|e| CliError::config(format!("CSV buffer: {e}")))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::config(format!("CSV encoding: {e}"))
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::config(format!("JSON encoding: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn refined_dt(dt: f64, refine: usize) -> f64 {
    dt / refine as f64
}

pub fn simulate_cmd(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Output, CliError> {
    cfg.check_kind(ExperimentKind::Simulate)?;
    let params = cfg.params()?;
    let inc = cfg.incidence()?;
    let order = cfg.order()?;
    let (t_end, dt) = cfg.horizon()?;
    let y0 = cfg.initial_state.ok_or_else(|| CliError::missing("initial_state"))?;
    let sim = simulate(&params, &inc, y0, order, t_end, refined_dt(dt, opts.refine), &cfg.kernel()?)?;
    if let Some(w) = sim.positivity {
        eprintln!("warning: state component {} reached {:e} at step {}", w.component, w.value, w.step);
    }
    let mut w = csv_writer();
    w.write_record(["t", "S", "E", "I", "R"]).map_err(csv_err)?;
    for (k, s) in sim.trajectory.states().iter().enumerate() {
        let t = sim.trajectory.time(k);
        w.write_record([sig15(t), sig15(s[0]), sig15(s[1]), sig15(s[2]), sig15(s[3])]).map_err(csv_err)?;
    }
    Ok(Output::new(cfg, opts, finish_csv(w)?))
}

fn build_trajectory(tc: &TrajectoryConfig, refine: usize) -> Result<SampledTrajectory, CliError> {
    if !(tc.t_end.is_finite() && tc.t_end > 0.0) || tc.intervals < 2 {
        return Err(CliError::config(format!("trajectory {}: needs t_end > 0 and at least 2 intervals", tc.name)));
    }
    let intervals = tc.intervals * refine;
    let dt = tc.t_end / intervals as f64;
    let sampled = |f: &dyn Fn(f64) -> f64| SampledTrajectory::from_fn(0.0, dt, intervals, f);
    let traj = match &tc.signal {
        Signal::Linear { offset, slope } => sampled(&|t| offset + slope * t),
        Signal::Sine { offset, amplitude, frequency, phase } => sampled(&|t| offset + amplitude * (frequency * t + phase).sin()),
        Signal::Exponential { offset, amplitude, rate } => sampled(&|t| offset + amplitude * (-rate * t).exp()),
        Signal::Power { offset, coefficient, exponent } => sampled(&|t| offset + coefficient * t.powf(*exponent)),
        Signal::Relaxation { family, alpha, initial, target } => {
            let order = FractionalOrder::new(*alpha, *family)?;
            let target = *target;
            let p = FdeProblem::new(move |_, y, out| out[0] = target - y[0], vec![*initial], order, (0.0, tc.t_end), dt)?;
            return solve(&p)?.component(0).map_err(|e| CliError::config(e.to_string()));
        }
        Signal::Samples { values } => {
            if refine != 1 {
                return Err(CliError::config(format!("trajectory {}: explicit samples cannot be refined", tc.name)));
            }
            if values.len() != tc.intervals + 1 {
                return Err(CliError::config(format!(
                    "trajectory {}: {} samples given, expected {}",
                    tc.name,
                    values.len(),
                    tc.intervals + 1
                )));
            }
            SampledTrajectory::new(0.0, dt, values.clone())
        }
    };
    traj.map_err(|e| CliError::config(format!("trajectory {}: {e}", tc.name)))
}

#[derive(Debug, Serialize)]
struct VerifyRecord {
    trajectory: String,
    family: Family,
    alpha: f64,
    candidate: CandidateKind,
    max_violation: Option<f64>,
    tolerance: Option<f64>,
    verdict: Option<Verdict>,
    worst_time: Option<f64>,
    error: Option<String>,
}

pub fn verify_cmd(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Output, CliError> {
    cfg.check_kind(ExperimentKind::Verify)?;
    let kernel = cfg.kernel()?;
    let verify = cfg.verify.clone().unwrap_or(crate::config::VerifyConfig { tolerance_factor: 10.0, items: Vec::new() });
    if !(verify.tolerance_factor.is_finite() && verify.tolerance_factor >= 0.0) {
        return Err(CliError::config("tolerance_factor must be finite and non-negative"));
    }
    let mut items = Vec::new();
    let mut labels = Vec::new();
    for item in &verify.items {
        let u = build_trajectory(&item.trajectory, opts.refine)?;
        for &family in &item.families {
            let order = FractionalOrder::new(item.alpha, family)?;
            for c in &item.candidates {
                items.push(ScanItem { u: u.clone(), order, candidate: c.build()? });
                labels.push((item.trajectory.name.clone(), family, item.alpha, c.kind));
            }
        }
    }
    let scan = margin_scan(&items, &kernel, &VerifyOptions { tolerance_factor: verify.tolerance_factor, swap_sides: opts.swap_sides });
    let records: Vec<VerifyRecord> = scan
        .results
        .iter()
        .zip(labels)
        .zip(&items)
        .map(|((r, (trajectory, family, alpha, candidate)), it)| match r {
            Ok(rep) => VerifyRecord {
                trajectory,
                family,
                alpha,
                candidate,
                max_violation: Some(rep.max_violation),
                tolerance: Some(rep.tolerance_used),
                verdict: Some(rep.verdict),
                worst_time: Some(it.u.time(rep.worst_index)),
                error: None,
            },
            Err(e) => VerifyRecord {
                trajectory,
                family,
                alpha,
                candidate,
                max_violation: None,
                tolerance: None,
                verdict: None,
                worst_time: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    for r in &records {
        if let Some(e) = &r.error {
            eprintln!("warning: {} / {} / {}: {e}", r.trajectory, r.family, r.candidate);
        }
    }
    let output = Output::new(cfg, opts, json(&records)?);
    let violated = records.iter().filter(|r| r.verdict == Some(Verdict::Violated)).count();
    if violated > 0 {
        output.write()?;
        return Err(CliError::Violated(violated));
    }
    Ok(output)
}

pub fn equilibria_cmd(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Output, CliError> {
    cfg.check_kind(ExperimentKind::Equilibria)?;
    let report: EquilibriumReport = equilibria(&cfg.params()?, &cfg.incidence()?)?;
    Ok(Output::new(cfg, opts, json(&report)?))
}

struct StabilitySetup {
    options: StabilityOptions,
    explicit: Option<Vec<[f64; 4]>>,
    count: usize,
}

fn stability_setup(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<StabilitySetup, CliError> {
    let (t_end, dt) = cfg.horizon()?;
    let st = cfg.stability.as_ref().ok_or_else(|| CliError::missing("stability"))?;
    if !(st.epsilon.is_finite() && st.epsilon > 0.0) {
        return Err(CliError::config("stability.epsilon must be positive"));
    }
    let options = StabilityOptions { t_max: t_end, dt: refined_dt(dt, opts.refine), epsilon: st.epsilon, kernel: cfg.kernel()? };
    Ok(StabilitySetup { options, explicit: st.initial_states.clone(), count: st.count })
}

#[derive(Serialize)]
struct StabilityOutput {
    seed: Option<u64>,
    #[serde(flatten)]
    report: StabilityReport,
}

pub fn stability_cmd(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Output, CliError> {
    cfg.check_kind(ExperimentKind::Stability)?;
    let params = cfg.params()?;
    let StabilitySetup { options, explicit, count } = stability_setup(cfg, opts)?;
    let (corpus, seed) = match explicit {
        Some(states) => (states, None),
        None => {
            let seed = seed_from_env();
            (seeded_initial_states(params.rates().s0(), count, seed), Some(seed))
        }
    };
    let report = verify_stability(&params, &cfg.incidence()?, cfg.order()?, &corpus, &options)?;
    Ok(Output::new(cfg, opts, json(&StabilityOutput { seed, report })?))
}

fn with_axis(params: &SeirParams, axis: SweepAxis, value: f64) -> SeirParams {
    let mut p = *params;
    match axis {
        SweepAxis::Lambda => p.lambda = value,
        SweepAxis::D => p.d = value,
        SweepAxis::Beta => p.beta = value,
        SweepAxis::Sigma => p.sigma = value,
        SweepAxis::Gamma => p.gamma = value,
    }
    p
}

struct SweepRow {
    value: f64,
    r0: Option<f64>,
    attractor: Option<Attractor>,
    distance: Option<f64>,
    status: String,
}

pub fn sweep_cmd(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Output, CliError> {
    cfg.check_kind(ExperimentKind::Sweep)?;
    let base = cfg.params()?;
    let inc = cfg.incidence()?;
    let order = cfg.order()?;
    let sweep = cfg.sweep.as_ref().ok_or_else(|| CliError::missing("sweep"))?;
    let values = sweep.values()?;
    let StabilitySetup { options, explicit, count } = stability_setup(cfg, opts)?;
    let seed = seed_from_env();

    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&value| {
            let mut row = SweepRow { value, r0: None, attractor: None, distance: None, status: String::new() };
            let params = with_axis(&base, sweep.axis, value);
            if let Err(e) = params.validate() {
                row.status = format!("error: {e}");
                return row;
            }
            row.r0 = r0(&params, &inc).ok();
            let corpus = explicit.clone().unwrap_or_else(|| seeded_initial_states(params.rates().s0(), count, seed));
            match verify_stability(&params, &inc, order, &corpus, &options) {
                Ok(report) => {
                    row.attractor = Some(report.attractor);
                    row.distance = Some(report.worst_distance());
                    row.status = match report.entries.iter().find_map(|e| e.error.clone()) {
                        Some(e) => format!("error: {e}"),
                        None if report.all_converged() => "converged".to_string(),
                        None => "not_converged".to_string(),
                    };
                }
                Err(e) => row.status = format!("error: {e}"),
            }
            row
        })
        .collect();

    let mut w = csv_writer();
    w.write_record(["value", "r0", "attractor", "distance", "status"]).map_err(csv_err)?;
    let opt = |x: Option<f64>| x.map(sig15).unwrap_or_default();
    for r in rows {
        let attractor = r.attractor.map(|a| a.to_string()).unwrap_or_default();
        w.write_record([sig15(r.value), opt(r.r0), attractor, opt(r.distance), r.status]).map_err(csv_err)?;
    }
    Ok(Output::new(cfg, opts, finish_csv(w)?))
}
