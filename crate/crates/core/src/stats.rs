//! Small statistics toolbox: Wilson confidence intervals, the regularized
//! incomplete gamma function and a chi-square goodness-of-fit test with
//! small-cell pooling.

use crate::entmath::log_gamma;
use crate::error::{Error, Result};

/// Two-sided 99% normal quantile.
pub const Z_CI_99: f64 = 2.575_829_303_548_900_4;

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    assert!(trials > 0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Half-width of a symmetric interval around the raw estimate that covers the
/// Wilson interval (the Wilson interval is not centered on p-hat).
pub fn wilson_halfwidth(successes: u64, trials: u64, z: f64) -> f64 {
    let p = successes as f64 / trials as f64;
    let (lo, hi) = wilson_interval(successes, trials, z);
    (p - lo).max(hi - p)
}

/// Binomial standard error with a 1/n floor so zero-count cells still carry
/// uncertainty.
pub fn binomial_std_err(p_hat: f64, trials: u64) -> f64 {
    let n = trials as f64;
    (p_hat * (1.0 - p_hat) / n).sqrt().max(1.0 / n)
}

/// Regularized lower incomplete gamma P(a, x).
pub fn reg_gamma_lower(a: f64, x: f64) -> Result<f64> {
    if a <= 0.0 || x < 0.0 {
        return Err(Error::Domain(format!(
            "reg_gamma_lower requires a > 0, x >= 0 (got a={a}, x={x})"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < a + 1.0 {
        Ok(lower_series(a, x))
    } else {
        Ok(1.0 - upper_cf(a, x))
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn reg_gamma_upper(a: f64, x: f64) -> Result<f64> {
    if a <= 0.0 || x < 0.0 {
        return Err(Error::Domain(format!(
            "reg_gamma_upper requires a > 0, x >= 0 (got a={a}, x={x})"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        Ok(1.0 - lower_series(a, x))
    } else {
        Ok(upper_cf(a, x))
    }
}

fn lower_series(a: f64, x: f64) -> f64 {
    let lg = log_gamma(a).expect("a > 0");
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..500 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    (sum * (-x + a * x.ln() - lg).exp()).clamp(0.0, 1.0)
}

fn upper_cf(a: f64, x: f64) -> f64 {
    // Lentz continued fraction for Q(a, x).
    let lg = log_gamma(a).expect("a > 0");
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    ((-x + a * x.ln() - lg).exp() * h).clamp(0.0, 1.0)
}

/// Survival function of the chi-square distribution.
pub fn chi_square_sf(stat: f64, dof: f64) -> Result<f64> {
    if dof <= 0.0 || stat < 0.0 {
        return Err(Error::Domain(format!(
            "chi_square_sf requires dof > 0, stat >= 0 (got dof={dof}, stat={stat})"
        )));
    }
    reg_gamma_upper(dof / 2.0, stat / 2.0)
}

/// Chi-square goodness-of-fit result.
#[derive(Debug, Clone)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Cells with expected count below the pooling threshold, merged into one.
    pub pooled_cells: usize,
}

/// Goodness-of-fit test of observed counts against expected counts.
/// Cells with expected count < 5 are pooled into a single cell (Cochran).
pub fn chi_square_gof(observed: &[u64], expected: &[f64]) -> Result<ChiSquareTest> {
    if observed.len() != expected.len() {
        return Err(Error::LengthMismatch {
            expected: expected.len(),
            got: observed.len(),
        });
    }
    if expected.iter().any(|&e| e < 0.0 || !e.is_finite()) {
        return Err(Error::InvalidDistribution(
            "expected counts must be finite and nonnegative".into(),
        ));
    }
    let mut stat = 0.0;
    let mut kept = 0usize;
    let mut pooled_obs = 0u64;
    let mut pooled_exp = 0.0f64;
    let mut pooled_cells = 0usize;
    for (&o, &e) in observed.iter().zip(expected) {
        if e >= 5.0 {
            stat += (o as f64 - e).powi(2) / e;
            kept += 1;
        } else {
            pooled_obs += o;
            pooled_exp += e;
            pooled_cells += 1;
        }
    }
    if pooled_cells > 0 {
        if pooled_exp > 0.0 {
            stat += (pooled_obs as f64 - pooled_exp).powi(2) / pooled_exp;
            kept += 1;
        } else if pooled_obs > 0 {
            // Mass observed on events the model declares impossible.
            return Ok(ChiSquareTest {
                statistic: f64::INFINITY,
                dof: kept.max(1),
                p_value: 0.0,
                pooled_cells,
            });
        }
    }
    if kept < 2 {
        return Err(Error::Domain(
            "chi-square needs at least two cells after pooling".into(),
        ));
    }
    let dof = kept - 1;
    let p_value = chi_square_sf(stat, dof as f64)?;
    Ok(ChiSquareTest {
        statistic: stat,
        dof,
        p_value,
        pooled_cells,
    })
}
