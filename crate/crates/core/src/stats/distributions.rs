//! Tail probabilities of the F and studentized range distributions.

use std::f64::consts::LN_2;

use super::quadrature::integrate;
use super::special::{ln_gamma, norm_interval, norm_pdf, reg_inc_beta};
use super::StatsError;

/// Degrees of freedom above which the pooled standard deviation is treated
/// as known exactly.
pub const DF_INFINITE_THRESHOLD: f64 = 1e5;

/// Upper tail `P(F > f)` of the F distribution with `(df1, df2)` degrees of
/// freedom.
pub fn f_distribution_sf(f: f64, df1: f64, df2: f64) -> Result<f64, StatsError> {
    if !(df1 >= 1.0 && df2 >= 1.0 && df1.is_finite() && df2.is_finite()) {
        return Err(StatsError::InvalidParameter(format!(
            "F degrees of freedom must be >= 1, got ({df1}, {df2})"
        )));
    }
    if f.is_nan() || f < 0.0 {
        return Err(StatsError::InvalidParameter(format!("F statistic must be >= 0, got {f}")));
    }
    if f == 0.0 {
        return Ok(1.0);
    }
    if f.is_infinite() {
        return Ok(0.0);
    }
    Ok(reg_inc_beta(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f)))
}

fn validate_range_args(k: usize, df: f64) -> Result<(), StatsError> {
    if k < 2 {
        return Err(StatsError::InvalidParameter(format!("studentized range needs k >= 2, got {k}")));
    }
    if df.is_nan() || df < 1.0 {
        return Err(StatsError::InvalidParameter(format!("degrees of freedom must be >= 1, got {df}")));
    }
    Ok(())
}

/// `P(range of k standard normals > w)`.
fn range_sf_known_sigma(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 1.0;
    }
    let km1 = (k - 1) as i32;
    let integrand = |z: f64| norm_pdf(z) * norm_interval(z - w, z).powi(km1);
    // phi(z) < 1e-22 beyond |z| = 10, which bounds the integrand
    let cdf = k as f64 * integrate(&integrand, -10.0, 10.0, 1e-14);
    (1.0 - cdf).clamp(0.0, 1.0)
}

/// Log density of `s = sqrt(χ²_df / df)`.
fn ln_scaled_chi_pdf(s: f64, df: f64) -> f64 {
    let h = 0.5 * df;
    h * df.ln() - ln_gamma(h) - (h - 1.0) * LN_2 + (df - 1.0) * s.ln() - h * s * s
}

/// Upper tail `P(Q_{k,df} > q)` of the studentized range distribution.
/// `df` may be `f64::INFINITY`.
pub fn studentized_range_sf(q: f64, k: usize, df: f64) -> Result<f64, StatsError> {
    validate_range_args(k, df)?;
    if q.is_nan() || q < 0.0 {
        return Err(StatsError::InvalidParameter(format!("q must be >= 0, got {q}")));
    }
    if q == 0.0 {
        return Ok(1.0);
    }
    if q.is_infinite() {
        return Ok(0.0);
    }
    if df > DF_INFINITE_THRESHOLD {
        return Ok(range_sf_known_sigma(q, k));
    }
    let spread = 8.0 / (2.0 * df).sqrt();
    let lo = (1.0 - spread).max(0.0);
    let hi = 1.0 + spread;
    let integrand = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        ln_scaled_chi_pdf(s, df).exp() * range_sf_known_sigma(q * s, k)
    };
    Ok(integrate(&integrand, lo, hi, 1e-11).clamp(0.0, 1.0))
}

/// Critical value `q` with `P(Q_{k,df} > q) = alpha`.
pub fn studentized_range_quantile(alpha: f64, k: usize, df: f64) -> Result<f64, StatsError> {
    validate_range_args(k, df)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidParameter(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let g = |q: f64| studentized_range_sf(q, k, df).map(|p| p - alpha);
    let (mut a, mut ga) = (0.0, 1.0 - alpha);
    let mut b = 1.0;
    let mut gb = g(b)?;
    while gb > 0.0 {
        a = b;
        ga = gb;
        b *= 2.0;
        if b > 1e3 {
            return Err(StatsError::Convergence(format!(
                "no bracket for studentized range quantile (alpha={alpha}, k={k}, df={df})"
            )));
        }
        gb = g(b)?;
    }
    // Illinois variant of regula falsi: keeps a bracket, converges superlinearly
    let mut side = 0i8;
    for _ in 0..200 {
        if b - a < 1e-10 || gb == 0.0 {
            return Ok(b);
        }
        let mut c = b - gb * (b - a) / (gb - ga);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let gc = g(c)?;
        if gc > 0.0 {
            a = c;
            ga = gc;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            gb = gc;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    Err(StatsError::Convergence(format!(
        "studentized range quantile did not converge (alpha={alpha}, k={k}, df={df})"
    )))
}
