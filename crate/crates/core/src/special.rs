//! Gamma-function helpers and stable power differences used by the
//! quadrature weights.

/// Γ(x) from the platform math library port.
#[inline]
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// ln |Γ(x)|.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Γ(a) / Γ(b) for positive arguments, switching to log space before the
/// direct quotient overflows.
pub fn gamma_ratio(a: f64, b: f64) -> f64 {
    if a < 160.0 && b < 160.0 {
        gamma(a) / gamma(b)
    } else {
        (ln_gamma(a) - ln_gamma(b)).exp()
    }
}

/// (k+1)^p − k^p without cancellation for large k.
pub fn forward_power_diff(k: f64, p: f64) -> f64 {
    if k == 0.0 {
        return 1.0;
    }
    k.powf(p) * (p * (1.0 / k).ln_1p()).exp_m1()
}

/// (k+1)^p − 2k^p + (k−1)^p for k ≥ 1.
pub fn central_power_second_diff(k: f64, p: f64) -> f64 {
    debug_assert!(k >= 1.0);
    if k == 1.0 {
        return 2f64.powf(p) - 2.0;
    }
    let up = (p * (1.0 / k).ln_1p()).exp_m1();
    let down = (p * (-1.0 / k).ln_1p()).exp_m1();
    k.powf(p) * (up + down)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}
