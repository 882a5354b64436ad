//! Scalar special functions and string/entropy utilities used everywhere else:
//! relative Hamming weight, the d-ary and extended d-ary entropy functions,
//! and log-domain gamma/binomial evaluation.

use crate::error::{Error, Result};

/// Alphabet sizes are capped so `u32` symbols and `f64` logs stay unambiguous.
pub const MAX_ALPHABET: u32 = 1 << 20;
/// Strings are capped at 2^32 symbols.
pub const MAX_STRING_LEN: u64 = 1 << 32;

/// A string over the alphabet `{0, .., d-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DString {
    symbols: Vec<u32>,
    d: u32,
}

impl DString {
    pub fn new(symbols: Vec<u32>, d: u32) -> Result<Self> {
        check_alphabet(d)?;
        if symbols.len() as u64 > MAX_STRING_LEN {
            return Err(Error::Domain(format!(
                "string length {} exceeds cap {MAX_STRING_LEN}",
                symbols.len()
            )));
        }
        if let Some(&s) = symbols.iter().find(|&&s| s >= d) {
            return Err(Error::Domain(format!(
                "symbol {s} outside alphabet of size {d}"
            )));
        }
        Ok(Self { symbols, d })
    }

    /// Canonical string of a given Hamming weight: `weight` ones followed by
    /// zeros. By permutation symmetry of uniform subset sampling this
    /// represents its whole weight class.
    pub fn from_weight(len: usize, weight: usize, d: u32) -> Result<Self> {
        if weight > len {
            return Err(Error::Domain(format!(
                "weight {weight} exceeds length {len}"
            )));
        }
        let mut symbols = vec![1u32; weight];
        symbols.resize(len, 0);
        Self::new(symbols, d)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn alphabet_size(&self) -> u32 {
        self.d
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    /// Number of non-zero symbols.
    pub fn hamming_weight(&self) -> u64 {
        self.symbols.iter().filter(|&&s| s != 0).count() as u64
    }
}

fn check_alphabet(d: u32) -> Result<()> {
    if !(2..=MAX_ALPHABET).contains(&d) {
        return Err(Error::Domain(format!(
            "alphabet size {d} outside [2, {MAX_ALPHABET}]"
        )));
    }
    Ok(())
}

/// Relative Hamming weight: fraction of non-zero symbols.
pub fn relative_weight(q: &DString) -> Result<f64> {
    if q.is_empty() {
        return Err(Error::Domain(
            "relative weight of the empty string is undefined".into(),
        ));
    }
    Ok(q.hamming_weight() as f64 / q.len() as f64)
}

/// d-ary entropy `h_d(x) = x log_d(d-1) - x log_d x - (1-x) log_d(1-x)`
/// on `[0, 1]`, with the limit convention `0 log 0 = 0`.
pub fn dary_entropy(x: f64, d: u32) -> Result<f64> {
    check_alphabet(d)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("h_d argument {x} outside [0, 1]")));
    }
    let ln_d = (d as f64).ln();
    let mut h = x * (d as f64 - 1.0).ln() / ln_d;
    if x > 0.0 {
        h -= x * x.ln() / ln_d;
    }
    if x < 1.0 {
        h -= (1.0 - x) * (1.0 - x).ln() / ln_d;
    }
    Ok(h)
}

/// Extended d-ary entropy: 0 below 0, `h_d` on `[0, 1-1/d]`, 1 above.
pub fn extended_dary_entropy(x: f64, d: u32) -> f64 {
    assert!((2..=MAX_ALPHABET).contains(&d), "alphabet size {d} invalid");
    if x <= 0.0 {
        0.0
    } else if x <= 1.0 - 1.0 / d as f64 {
        dary_entropy(x, d).expect("x within [0,1] by branch condition")
    } else {
        1.0
    }
}

/// ln Γ(x) for x > 0.
///
/// Upward recurrence into x >= 10, then the Stirling series with six
/// Bernoulli terms; series truncation is below 1e-14 absolute there.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(log_gamma_raw(x))
}

fn log_gamma_raw(x: f64) -> f64 {
    const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_8;
    let mut shift = 0.0;
    let mut y = x;
    while y < 10.0 {
        shift -= y.ln();
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2
                        * (1.0 / 1260.0
                            + inv2
                                * (-1.0 / 1680.0
                                    + inv2 * (1.0 / 1188.0 + inv2 * (-691.0 / 360_360.0))))));
    (y - 0.5) * y.ln() - y + HALF_LN_TWO_PI + series + shift
}

/// Base for [`log_binomial`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBase {
    Two,
    Natural,
}

/// log C(n, k).
///
/// The lgamma difference loses ~|lgamma(n)| * eps absolutely, which ruins the
/// relative error when C(n, k) is small; when the short side is modest the
/// compensated sum of log((n-k+i)/i) is used instead.
pub fn log_binomial(n: u64, k: i64, base: LogBase) -> Result<f64> {
    if k < 0 || k as u64 > n {
        return Err(Error::Domain(format!("binomial index k={k} outside [0, {n}]")));
    }
    let k = k as u64;
    let small = k.min(n - k);
    let ln_c = if small <= 1_000_000 {
        // Kahan-compensated sum; exact at small=0 (empty product).
        let mut sum = 0.0f64;
        let mut c = 0.0f64;
        for i in 1..=small {
            let term = ((n - small + i) as f64 / i as f64).ln();
            let y = term - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        sum
    } else {
        log_gamma_raw(n as f64 + 1.0)
            - log_gamma_raw(k as f64 + 1.0)
            - log_gamma_raw((n - k) as f64 + 1.0)
    };
    Ok(match base {
        LogBase::Natural => ln_c,
        LogBase::Two => ln_c / std::f64::consts::LN_2,
    })
}
