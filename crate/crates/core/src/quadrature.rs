//! Gauss–Legendre rules and a globally adaptive Gauss–Kronrod (7/15)
//! integrator.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("adaptive quadrature did not reach tolerance {tolerance:e} (estimate {value}, error {error:e})")]
    NotConverged { value: f64, error: f64, tolerance: f64 },
    #[error("invalid integration limits [{a}, {b}]")]
    InvalidLimits { a: f64, b: f64 },
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fixed-order Gauss–Legendre integral of `f` over [a, b].
pub fn gauss_legendre_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    floor: f64,
}

impl Segment {
    fn refinable(&self) -> bool {
        self.error > self.floor && (self.b - self.a).abs() > 1e3 * f64::EPSILON * self.a.abs().max(self.b.abs()).max(f64::MIN_POSITIVE)
    }
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Result<Segment, QuadratureError> {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let dhalf = half.abs();
    let mut eval = |x: f64| -> Result<f64, QuadratureError> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadratureError::NonFinite { x })
        }
    };
    let fc = eval(centre)?;
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(centre - dx)?;
        let f2 = eval(centre + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * half;
    resabs *= dhalf;
    resasc *= dhalf;
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * resabs;
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(floor);
    }
    Ok(Segment { a, b, value, error, floor })
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Adaptive quadrature settings.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-10, max_segments: 2000 }
    }
}

impl AdaptiveOptions {
    pub fn with_tolerance(tol: f64) -> Self {
        Self { abs_tol: tol, rel_tol: tol, ..Self::default() }
    }
}

/// Integrates `f` over the pieces delimited by `points` (sorted, at least
/// two entries). Segments whose error estimate has reached the round-off
/// floor are not split further; if only such segments remain the result is
/// returned as converged.
pub fn integrate_adaptive(
    mut f: impl FnMut(f64) -> f64,
    points: &[f64],
    opts: &AdaptiveOptions,
) -> Result<Integral, QuadratureError> {
    if points.len() < 2 {
        return Err(QuadratureError::InvalidLimits { a: f64::NAN, b: f64::NAN });
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(QuadratureError::InvalidLimits { a: points[0], b: points[points.len() - 1] });
    }
    let mut active = BinaryHeap::new();
    let mut settled_value = 0.0;
    let mut settled_error = 0.0;
    for w in points.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let seg = kronrod15(&mut f, w[0], w[1])?;
        active.push(seg);
    }
    let mut segments = active.len();
    loop {
        let (value, error) = active
            .iter()
            .fold((settled_value, settled_error), |(v, e), s: &Segment| (v + s.value, e + s.error));
        let tolerance = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= tolerance {
            return Ok(Integral { value, error });
        }
        let Some(worst) = active.pop() else {
            return Ok(Integral { value, error });
        };
        if !worst.refinable() {
            // every remaining segment is at its round-off floor
            settled_value += worst.value;
            settled_error += worst.error;
            let mut rest_refinable = false;
            let mut keep = BinaryHeap::new();
            for s in active.drain() {
                if s.refinable() {
                    rest_refinable = true;
                    keep.push(s);
                } else {
                    settled_value += s.value;
                    settled_error += s.error;
                }
            }
            active = keep;
            if !rest_refinable {
                return Ok(Integral { value: settled_value, error: settled_error });
            }
            continue;
        }
        if segments >= opts.max_segments {
            return Err(QuadratureError::NotConverged { value, error, tolerance });
        }
        let mid = 0.5 * (worst.a + worst.b);
        active.push(kronrod15(&mut f, worst.a, mid)?);
        active.push(kronrod15(&mut f, mid, worst.b)?);
        segments += 1;
    }
}

/// Adaptive integral over [a, b]; reversed limits flip the sign.
pub fn integrate(f: impl FnMut(f64) -> f64, a: f64, b: f64, opts: &AdaptiveOptions) -> Result<Integral, QuadratureError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(QuadratureError::InvalidLimits { a, b });
    }
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0 });
    }
    if a < b {
        integrate_adaptive(f, &[a, b], opts)
    } else {
        let r = integrate_adaptive(f, &[b, a], opts)?;
        Ok(Integral { value: -r.value, error: r.error })
    }
}
