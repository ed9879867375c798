//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use fraclyap::lyapunov::{margin_scan, Candidate, Generator, ScanItem, Verdict, VerifyOptions};
use fraclyap::mittag_leffler::{mittag_leffler, ml, ml_derivative, MlParams};
use fraclyap::operators::{abc_deriv, caputo_deriv, cf_deriv, Family, FractionalOrder, KernelConfig};
use fraclyap::quadrature::{integrate, AdaptiveOptions};
use fraclyap::seir::{
    check_hypotheses, equilibria, seed_from_env, seeded_initial_states, v1_dissipation, verify_stability, Hypothesis,
    IncidenceSpec, RateConvention, SeirParams, StabilityOptions, StabilityReport,
};
use fraclyap::solvers::{rk4_oracle, solve, solve_caputo, FdeProblem};
use fraclyap::special::gamma;
use fraclyap::trajectory::SampledTrajectory;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| a + (b - a) * k as f64 / (n - 1) as f64)
}

fn max_err(got: &[f64], want: &[f64]) -> f64 {
    got.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let p = MlParams::new(1.0, 1.0).map_err(|e| e.to_string())?;
    let mut worst_exp: f64 = 0.0;
    for z in linspace(-5.0, 5.0, 101) {
        let v = ml(&p, z).map_err(|e| e.to_string())?;
        worst_exp = worst_exp.max((v - z.exp()).abs());
    }
    let mut worst_cosh: f64 = 0.0;
    for z in linspace(0.0, 9.0, 91) {
        let v = mittag_leffler(2.0, 1.0, z).map_err(|e| e.to_string())?;
        worst_cosh = worst_cosh.max((v - z.sqrt().cosh()).abs());
    }
    ensure(worst_exp <= 1e-12, || format!("|E11 - exp| = {worst_exp:e}"))?;
    ensure(worst_cosh <= 1e-10, || format!("|E21 - cosh sqrt| = {worst_cosh:e}"))?;
    Ok(format!("exp err {worst_exp:.1e}, cosh err {worst_cosh:.1e}"))
}

fn criterion_2() -> Outcome {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for alpha in [0.3, 0.5, 0.8] {
        for beta in [0.5, 1.0] {
            let p = MlParams::new(alpha, beta).map_err(|e| e.to_string())?;
            for z in linspace(-3.0, 0.0, 31) {
                let d = ml_derivative(&p, z).map_err(|e| e.to_string())?;
                let fd = (mittag_leffler(alpha, beta, z + h).map_err(|e| e.to_string())?
                    - mittag_leffler(alpha, beta, z - h).map_err(|e| e.to_string())?)
                    / (2.0 * h);
                let rel = (d - fd).abs() / fd.abs();
                ensure(rel <= 1e-5, || format!("alpha={alpha} beta={beta} z={z}: rel {rel:e}"))?;
                worst = worst.max(rel);
            }
        }
    }
    Ok(format!("worst relative deviation {worst:.1e}"))
}

/// B/(1−α) ∫_0^t u'(x) E_α(−λ(t−x)^α) dx by adaptive quadrature.
fn abc_oracle(alpha: f64, t: f64, du: impl Fn(f64) -> f64) -> Result<f64, String> {
    let p = MlParams::new(alpha, 1.0).map_err(|e| e.to_string())?;
    let rate = alpha / (1.0 - alpha);
    if t == 0.0 {
        return Ok(0.0);
    }
    let r = integrate(
        |x| du(x) * ml(&p, -rate * (t - x).powf(alpha)).unwrap_or(f64::NAN),
        0.0,
        t,
        &AdaptiveOptions::with_tolerance(1e-13),
    )
    .map_err(|e| e.to_string())?;
    Ok(r.value / (1.0 - alpha))
}

fn criterion_3() -> Outcome {
    let cfg = KernelConfig::default();
    let mut notes = Vec::new();
    // Caputo and CF of u = t
    let dt = 1.0 / 1024.0;
    let u = SampledTrajectory::from_fn(0.0, dt, 1024, |t| t).map_err(|e| e.to_string())?;
    for alpha in [0.3, 0.5, 0.8] {
        let d = caputo_deriv(&u, alpha).map_err(|e| e.to_string())?;
        let want: Vec<f64> = u.times().map(|t| t.powf(1.0 - alpha) / gamma(2.0 - alpha)).collect();
        let err = max_err(d.values(), &want);
        ensure(err <= 2e-3, || format!("Caputo alpha={alpha}: {err:e}"))?;
        let rate = alpha / (1.0 - alpha);
        let d = cf_deriv(&u, alpha, &cfg).map_err(|e| e.to_string())?;
        let want: Vec<f64> = u.times().map(|t| (2.0 - alpha) / (2.0 * alpha) * (1.0 - (-rate * t).exp())).collect();
        let err = max_err(d.values(), &want);
        ensure(err <= 1e-6, || format!("CF alpha={alpha}: {err:e}"))?;
    }
    // ABC of u = t against the quadrature oracle, spot-checked against
    // 400-digit values of 2t E_{1/2,2}(−√t)
    let d = abc_deriv(&u, 0.5, &cfg).map_err(|e| e.to_string())?;
    let mut abc_err: f64 = 0.0;
    for k in (0..u.len()).step_by(16) {
        let want = abc_oracle(0.5, u.time(k), |_| 1.0)?;
        abc_err = abc_err.max((d.values()[k] - want).abs());
    }
    for (k, frozen) in [(256, 0.359_759_855_481_364_3), (512, 0.642_082_289_066_224_2), (1024, 1.111_925_486_502_639_2)] {
        abc_err = abc_err.max((d.values()[k] - frozen).abs());
    }
    ensure(abc_err <= 1e-5, || format!("ABC alpha=0.5: {abc_err:e}"))?;
    notes.push(format!("ABC err {abc_err:.1e}"));

    // self-convergence on u = t² (α = 0.5)
    let alpha = 0.5;
    let rate = alpha / (1.0 - alpha);
    let pref = (2.0 - alpha) / (2.0 * (1.0 - alpha));
    let levels = [32usize, 64, 128];
    let mut errs = [[0.0; 3]; 3];
    for (li, &n) in levels.iter().enumerate() {
        let u = SampledTrajectory::from_fn(0.0, 1.0 / n as f64, n, |t| t * t).map_err(|e| e.to_string())?;
        let c = caputo_deriv(&u, alpha).map_err(|e| e.to_string())?;
        let want: Vec<f64> = u.times().map(|t| 2.0 * t.powf(2.0 - alpha) / gamma(3.0 - alpha)).collect();
        errs[0][li] = max_err(c.values(), &want);
        let c = cf_deriv(&u, alpha, &cfg).map_err(|e| e.to_string())?;
        let want: Vec<f64> = u
            .times()
            .map(|t| pref * 2.0 * (t / rate - (1.0 - (-rate * t).exp()) / (rate * rate)))
            .collect();
        errs[1][li] = max_err(c.values(), &want);
        let c = abc_deriv(&u, alpha, &cfg).map_err(|e| e.to_string())?;
        let want = u.times().map(|t| abc_oracle(alpha, t, |x| 2.0 * x)).collect::<Result<Vec<_>, _>>()?;
        errs[2][li] = max_err(c.values(), &want);
    }
    for (name, e) in ["Caputo", "CF", "ABC"].iter().zip(errs) {
        let r1 = e[0] / e[1];
        let r2 = e[1] / e[2];
        ensure(r1 >= 1.8 && r2 >= 1.8, || format!("{name} refinement ratios {r1:.2}, {r2:.2} (errors {e:?})"))?;
        notes.push(format!("{name} ratios {r1:.2}/{r2:.2}"));
    }
    Ok(notes.join(", "))
}

fn criterion_4() -> Outcome {
    let mut notes = Vec::new();
    for alpha in [0.5, 0.8] {
        let order = FractionalOrder::caputo(alpha).map_err(|e| e.to_string())?;
        let p = FdeProblem::new(|_, y, out| out[0] = -y[0], vec![1.0], order, (0.0, 5.0), 5.0 / 4096.0).map_err(|e| e.to_string())?;
        let sol = solve_caputo(&p).map_err(|e| e.to_string())?;
        let mut err: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for k in 0..sol.len() {
            let exact = mittag_leffler(alpha, 1.0, -sol.time(k).powf(alpha)).map_err(|e| e.to_string())?;
            err = err.max((sol.state(k)[0] - exact).abs());
            scale = scale.max(exact.abs());
        }
        let rel = err / scale;
        ensure(rel <= 1e-3, || format!("alpha={alpha}: relative max-norm error {rel:e}"))?;
        notes.push(format!("alpha={alpha} rel {rel:.1e}"));
    }
    let reference = {
        let p = FdeProblem::new(|_, y, out| out[0] = -y[0], vec![1.0], FractionalOrder::caputo(1.0).unwrap(), (0.0, 5.0), 1e-3)
            .map_err(|e| e.to_string())?;
        rk4_oracle(&p).map_err(|e| e.to_string())?
    };
    for family in [Family::Caputo, Family::CaputoFabrizio, Family::Abc] {
        let order = FractionalOrder::new(1.0, family).map_err(|e| e.to_string())?;
        let p = FdeProblem::new(|_, y, out| out[0] = -y[0], vec![1.0], order, (0.0, 5.0), 1e-3).map_err(|e| e.to_string())?;
        let sol = solve(&p).map_err(|e| e.to_string())?;
        let err = sol.states().iter().zip(reference.states()).map(|(a, b)| (a[0] - b[0]).abs()).fold(0.0, f64::max);
        ensure(err <= 1e-3, || format!("{family} at alpha=1 vs RK4: {err:e}"))?;
        notes.push(format!("{family} vs RK4 {err:.1e}"));
    }
    Ok(notes.join(", "))
}

/// Positive trajectories on [0, 5] sampled with `intervals` steps.
fn inequality_corpus(intervals: usize) -> Result<Vec<(String, SampledTrajectory)>, String> {
    let t_end = 5.0;
    let dt = t_end / intervals as f64;
    let analytic: Vec<(&str, fn(f64) -> f64)> = vec![
        ("linear", |t| 1.0 + t),
        ("sine", |t| 2.0 + t.sin()),
        ("quadratic", |t| 1.0 + t * t),
        ("decay", |t| 0.5 + (-t).exp()),
        ("saturation", |t| 3.0 - 2.0 * (-t).exp()),
        ("fast_cosine", |t| 2.0 + (3.0 * t).cos()),
        ("drifting_wave", |t| 1.0 + 0.5 * (2.0 * t).sin() + 0.3 * t),
        ("hyperbolic", |t| 1.0 + 1.0 / (1.0 + t)),
    ];
    let mut out = Vec::new();
    for (name, f) in analytic {
        out.push((name.to_string(), SampledTrajectory::from_fn(0.0, dt, intervals, f).map_err(|e| e.to_string())?));
    }
    // solver-generated trajectories, first component
    let solved: Vec<(&str, Family, f64, f64, f64)> = vec![
        ("caputo_relaxation", Family::Caputo, 0.5, 2.0, 1.0),
        ("caputo_decay", Family::Caputo, 0.8, 1.0, 0.0),
        ("cf_relaxation", Family::CaputoFabrizio, 0.6, 0.5, 1.5),
        ("abc_relaxation", Family::Abc, 0.7, 3.0, 1.0),
    ];
    for (name, family, alpha, y0, target) in solved {
        let order = FractionalOrder::new(alpha, family).map_err(|e| e.to_string())?;
        let p = FdeProblem::new(move |_, y, o| o[0] = target + 0.2 - y[0], vec![y0], order, (0.0, t_end), dt)
            .map_err(|e| e.to_string())?;
        let sol = solve(&p).map_err(|e| e.to_string())?;
        out.push((name.to_string(), sol.component(0).map_err(|e| e.to_string())?));
    }
    Ok(out)
}

fn inequality_scan(intervals: usize) -> Result<(usize, Option<Verdict>, f64, f64), String> {
    let corpus = inequality_corpus(intervals)?;
    let mut items = Vec::new();
    for (idx, (_, u)) in corpus.iter().enumerate() {
        let mean = u.values().iter().sum::<f64>() / u.len() as f64;
        let alpha = [0.5, 0.7, 0.9][idx % 3];
        for family in [Family::Caputo, Family::CaputoFabrizio, Family::Abc] {
            let order = FractionalOrder::new(alpha, family).map_err(|e| e.to_string())?;
            let candidates = [
                Candidate::Quadratic,
                Candidate::volterra(mean).map_err(|e| e.to_string())?,
                Candidate::general(mean, Generator::named("square").map_err(|e| e.to_string())?).map_err(|e| e.to_string())?,
            ];
            for candidate in candidates {
                items.push(ScanItem { u: u.clone(), order, candidate });
            }
        }
    }
    let scan = margin_scan(&items, &KernelConfig::default(), &VerifyOptions::default());
    if let Some((i, e)) = scan.errors().next() {
        return Err(format!("item {i}: {e}"));
    }
    let worst_norm = scan.reports().map(|r| r.max_violation / r.tolerance_used).fold(f64::NEG_INFINITY, f64::max);
    Ok((scan.results.len(), scan.worst_verdict(), scan.worst_margin().unwrap_or(0.0), worst_norm))
}

fn criterion_5() -> Outcome {
    let (n, verdict, coarse, coarse_norm) = inequality_scan(512)?;
    let (_, verdict_fine, fine, fine_norm) = inequality_scan(1024)?;
    ensure(n >= 12 * 9, || format!("only {n} reports"))?;
    for v in [verdict, verdict_fine] {
        ensure(v.is_some_and(|v| v <= Verdict::HoldsWithinTolerance), || format!("worst verdict {v:?}"))?;
    }
    ensure(fine.abs() * 1.5 <= coarse.abs(), || format!("worst margin {coarse:e} -> {fine:e} under refinement"))?;
    ensure(fine_norm <= coarse_norm.max(0.0) || fine_norm <= 0.0, || {
        format!("normalised violation grew {coarse_norm:e} -> {fine_norm:e}")
    })?;
    Ok(format!("{n} reports, worst margin {coarse:.2e} -> {fine:.2e}"))
}

struct StabilityRun {
    label: String,
    coarse: StabilityReport,
    fine: StabilityReport,
    epsilon: f64,
}

fn stability_runs() -> Result<Vec<StabilityRun>, String> {
    let seed = seed_from_env();
    let inc = IncidenceSpec::bilinear();
    let mut runs = Vec::new();
    for (alpha, t_max, dt, epsilon) in [(1.0, 400.0, 0.1, 1e-3), (0.8, 2000.0, 0.25, 1e-2)] {
        for beta in [0.01, 0.03] {
            let params = SeirParams::new(2.0, 0.1, beta, 0.2, 0.1, alpha)
                .map_err(|e| e.to_string())?
                .with_convention(RateConvention::Powered);
            let order = FractionalOrder::caputo(alpha).map_err(|e| e.to_string())?;
            let corpus = seeded_initial_states(params.rates().s0(), 5, seed);
            let opts = StabilityOptions { t_max, dt, epsilon, kernel: KernelConfig::default() };
            let coarse = verify_stability(&params, &inc, order, &corpus, &opts).map_err(|e| e.to_string())?;
            let fine_opts = StabilityOptions { dt: dt / 2.0, ..opts };
            let fine = verify_stability(&params, &inc, order, &corpus, &fine_opts).map_err(|e| e.to_string())?;
            runs.push(StabilityRun { label: format!("alpha={alpha} beta={beta}"), coarse, fine, epsilon });
        }
    }
    Ok(runs)
}

fn criterion_6(runs: &[StabilityRun]) -> Outcome {
    let mut notes = Vec::new();
    for run in runs {
        let r = &run.coarse;
        if let Some(e) = r.entries.iter().find_map(|e| e.error.clone()) {
            return Err(format!("{}: {e}", run.label));
        }
        let expected = if r.equilibria.r0 > 1.0 { [10.0, 10.0 / 3.0, 10.0 / 3.0] } else { [20.0, 0.0, 0.0] };
        let target = r.equilibria.attractor_state();
        ensure(max_err(&target[..3], &expected) <= 1e-10, || format!("{}: attractor {target:?}", run.label))?;
        ensure(r.all_converged(), || format!("{}: worst distance {:e} > {:e}", run.label, r.worst_distance(), run.epsilon))?;
        notes.push(format!("{} -> {} {:.1e}", run.label, r.attractor, r.worst_distance()));
    }
    Ok(notes.join(", "))
}

fn criterion_7(runs: &[StabilityRun]) -> Outcome {
    let noise_floor = 1e-10;
    let mut notes = Vec::new();
    for run in runs {
        let coarse = run.coarse.worst_lyapunov_increase();
        let fine = run.fine.worst_lyapunov_increase();
        ensure(coarse <= 10.0 * run.coarse.dt, || format!("{}: V increase {coarse:e}", run.label))?;
        ensure(fine <= 10.0 * run.fine.dt, || format!("{}: refined V increase {fine:e}", run.label))?;
        let (c, f) = (coarse.max(0.0), fine.max(0.0));
        ensure(f <= noise_floor || f * 1.5 <= c, || format!("{}: positive increase {c:e} -> {f:e}", run.label))?;
        notes.push(format!("{} {c:.1e}->{f:.1e}", run.label));
    }
    Ok(notes.join(", "))
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    let incidences = [
        IncidenceSpec::bilinear(),
        IncidenceSpec::beddington_deangelis(0.01, 0.01, 0.01).unwrap(),
        IncidenceSpec::beddington_deangelis(0.1, 0.1, 0.1).unwrap(),
    ];
    for inc in &incidences {
        for alpha in [1.0, 0.8] {
            for beta in [0.01, 0.03, 0.05] {
                for convention in [RateConvention::Base, RateConvention::Powered] {
                    let p = SeirParams::new(2.0, 0.1, beta, 0.2, 0.1, alpha).unwrap().with_convention(convention);
                    let eq = equilibria(&p, inc).map_err(|e| e.to_string())?;
                    ensure(eq.residual_norm <= 1e-10, || format!("{} beta={beta} alpha={alpha}: residual {:e}", inc.name(), eq.residual_norm))?;
                    worst = worst.max(eq.residual_norm);
                }
            }
        }
    }
    Ok(format!("worst residual {worst:.1e}"))
}

fn criterion_9() -> Outcome {
    let mut specs = vec![IncidenceSpec::bilinear()];
    for a in [0.0, 0.1] {
        specs.push(IncidenceSpec::beddington_deangelis(a, a, a).unwrap());
    }
    for inc in &specs {
        let r = check_hypotheses(inc, 100.0, 100.0, 51).map_err(|e| e.to_string())?;
        ensure(r.passed, || format!("{} rejected: {:?}", inc.name(), r.first_violation()))?;
    }
    let r = check_hypotheses(&IncidenceSpec::si_squared(), 100.0, 100.0, 51).map_err(|e| e.to_string())?;
    ensure(!r.passed, || "S I^2 accepted".to_string())?;
    let v = r
        .violation_of(Hypothesis::F1NonIncreasingInI)
        .ok_or_else(|| "S I^2: no violation of dF1/dI <= 0 reported".to_string())?;
    Ok(format!("S I^2 rejected at (S, I) = ({}, {}) with dF1/dI = {}", v.s, v.i, v.value))
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_from_env());
    let mut worst: f64 = 0.0;
    let p = SeirParams::new(2.0, 0.1, 0.03, 0.2, 0.1, 1.0).unwrap();
    for inc in [IncidenceSpec::bilinear(), IncidenceSpec::beddington_deangelis(0.01, 0.01, 0.01).unwrap()] {
        let e = equilibria(&p, &inc).map_err(|e| e.to_string())?.endemic.ok_or("no endemic state")?;
        for _ in 0..500 {
            let state = [
                e[0] * rng.gen_range(0.2..3.0),
                e[1] * rng.gen_range(0.2..3.0),
                e[2] * rng.gen_range(0.2..3.0),
            ];
            let d = v1_dissipation(&p, &inc, [e[0], e[1], e[2]], state).map_err(|e| e.to_string())?;
            let diff = (d.bracket - d.g_terms).abs();
            ensure(diff <= 1e-10, || format!("{} at {state:?}: {diff:e}", inc.name()))?;
            worst = worst.max(diff);
        }
    }
    Ok(format!("1000 states, worst deviation {worst:.1e}"))
}

fn report(id: usize, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let outcome = match outcome {
        Ok(msg) if elapsed > budget => Err(format!("{msg}; took {elapsed:.2?}, budget {budget:?}")),
        other => other,
    };
    match outcome {
        Ok(msg) => {
            println!("criterion {id:>2}: PASS ({elapsed:.2?}) {msg}");
            true
        }
        Err(msg) => {
            println!("criterion {id:>2}: FAIL ({elapsed:.2?}) {msg}");
            false
        }
    }
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut ok = true;
    ok &= report(1, secs(1), criterion_1);
    ok &= report(2, secs(1), criterion_2);
    ok &= report(3, secs(10), criterion_3);
    ok &= report(4, secs(30), criterion_4);
    ok &= report(5, secs(120), criterion_5);

    let start = Instant::now();
    let runs = stability_runs();
    let sim_time = start.elapsed();
    match runs {
        Ok(runs) => {
            ok &= report(6, secs(120).saturating_sub(sim_time), || criterion_6(&runs));
            ok &= report(7, secs(120).saturating_sub(sim_time), || criterion_7(&runs));
        }
        Err(e) => {
            println!("criterion  6: FAIL {e}");
            println!("criterion  7: FAIL {e}");
            ok = false;
        }
    }
    println!("(criteria 6 and 7 share {sim_time:.2?} of simulation)");

    ok &= report(8, secs(1), criterion_8);
    ok &= report(9, secs(1), criterion_9);
    ok &= report(10, secs(1), criterion_10);
    if ok {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
