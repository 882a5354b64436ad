//! Closed-form key-length formulas for the sampling-based protocol
//! (`ell_ours`) and the two published baselines it is compared against
//! (`ell_1`: Bayesian max-entropy estimator, `ell_2`: gamma-function
//! max-entropy bound), the basis-overlap parameter, depolarizing-noise
//! observables and the rate sweep behind the comparison curves.
//!
//! All logs are base 2: the outputs are bits after privacy amplification.

use crate::entmath::{extended_dary_entropy, log_gamma};
use crate::error::{Error, Result};
use crate::exec;
use crate::qsim::Basis;
use crate::sampling::{delta_from_epsilon, SamplingParams};

/// Protocol-level parameters; `m = round(sample_fraction * N)` (half-up,
/// minimum 1) and `n = N - m` are derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    d: u32,
    total_signals: u64,
    sample_fraction: f64,
    epsilon: f64,
    beta: f64,
    eps_prime_ell2: f64,
}

impl ProtocolParams {
    pub fn new(
        d: u32,
        total_signals: u64,
        sample_fraction: f64,
        epsilon: f64,
        beta: f64,
        eps_prime_ell2: f64,
    ) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("dimension {d} must be >= 2")));
        }
        if !(sample_fraction > 0.0 && sample_fraction < 0.5) {
            return Err(Error::Domain(format!(
                "sample_fraction {sample_fraction} outside (0, 1/2)"
            )));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Domain(format!("epsilon {epsilon} outside (0, 1)")));
        }
        if !(beta > 0.0 && beta < 0.5) {
            return Err(Error::Domain(format!("beta {beta} outside (0, 1/2)")));
        }
        if !(eps_prime_ell2 > 0.0 && eps_prime_ell2 < 1.0) {
            return Err(Error::Domain(format!(
                "eps_prime_ell2 {eps_prime_ell2} outside (0, 1)"
            )));
        }
        let p = Self {
            d,
            total_signals,
            sample_fraction,
            epsilon,
            beta,
            eps_prime_ell2,
        };
        let m = p.sample_size();
        if m >= total_signals || total_signals - m <= m {
            return Err(Error::Domain(format!(
                "N={total_signals} with fraction {sample_fraction} leaves m={m} >= n"
            )));
        }
        Ok(p)
    }

    /// Rounds half-up and never returns 0.
    pub fn sample_size(&self) -> u64 {
        ((self.sample_fraction * self.total_signals as f64) + 0.5).floor().max(1.0) as u64
    }

    pub fn remainder_size(&self) -> u64 {
        self.total_signals - self.sample_size()
    }

    pub fn total_signals(&self) -> u64 {
        self.total_signals
    }

    pub fn dimension(&self) -> u32 {
        self.d
    }

    pub fn sample_fraction(&self) -> f64 {
        self.sample_fraction
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eps_prime_ell2(&self) -> f64 {
        self.eps_prime_ell2
    }

    pub fn with_total_signals(&self, total_signals: u64) -> Result<Self> {
        Self::new(
            self.d,
            total_signals,
            self.sample_fraction,
            self.epsilon,
            self.beta,
            self.eps_prime_ell2,
        )
    }

    pub fn sampling_params(&self) -> Result<SamplingParams> {
        SamplingParams::new(
            self.d,
            self.sample_size(),
            self.remainder_size(),
            self.epsilon,
            self.beta,
        )
    }
}

/// Observed statistics feeding the three formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseObservables {
    /// Relative weight of the test outcome string (for `ell_ours`).
    pub w_obs: f64,
    /// Per-symbol test counts c_0..c_{d-1} summing to m (for `ell_1`).
    pub counts: Vec<f64>,
    /// Mean outcome deviation (for `ell_2`).
    pub d0: f64,
}

impl NoiseObservables {
    pub fn validate(&self, d: u32, m: u64) -> Result<()> {
        if !(0.0..=1.0).contains(&self.w_obs) {
            return Err(Error::Domain(format!("w_obs {} outside [0, 1]", self.w_obs)));
        }
        if self.counts.len() != d as usize {
            return Err(Error::LengthMismatch {
                expected: d as usize,
                got: self.counts.len(),
            });
        }
        if self.counts.iter().any(|&c| c < 0.0) {
            return Err(Error::Domain("counts must be nonnegative".into()));
        }
        let sum: f64 = self.counts.iter().sum();
        if (sum - m as f64).abs() > 1e-9 * (m as f64).max(1.0) {
            return Err(Error::Domain(format!(
                "counts sum to {sum}, expected m = {m}"
            )));
        }
        if !(0.0..=(d as f64 - 1.0)).contains(&self.d0) {
            return Err(Error::Domain(format!("d0 {} outside [0, d-1]", self.d0)));
        }
        Ok(())
    }
}

/// Depolarizing-channel conventions: `w_obs = x`, `c_0 = m(1-x)`,
/// `c_{i>0} = m x/(d-1)` (real-valued, not rounded), `d0 = x`.
pub fn depolarizing_observables(x: f64, d: u32, m: u64) -> Result<NoiseObservables> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("noise {x} outside [0, 1]")));
    }
    if d < 2 {
        return Err(Error::Domain(format!("dimension {d} must be >= 2")));
    }
    let m = m as f64;
    let mut counts = vec![m * x / (d as f64 - 1.0); d as usize];
    counts[0] = m * (1.0 - x);
    Ok(NoiseObservables {
        w_obs: x,
        counts,
        d0: x,
    })
}

/// Overlap parameter of two bases: `-log2 max_{a,b} |<z_a|x_b>|^2`.
/// Equals log2 d for the computational/Fourier pair.
pub fn gamma_overlap(z: &Basis, x: &Basis) -> Result<f64> {
    if z.dim() != x.dim() {
        return Err(Error::DimensionMismatch(format!(
            "basis dimensions differ: {} vs {}",
            z.dim(),
            x.dim()
        )));
    }
    let d = z.dim();
    let mut max_sq = 0.0f64;
    for a in 0..d {
        let za = z.column(a);
        for b in 0..d {
            let xb = x.column(b);
            let ip: num_complex::Complex64 =
                za.iter().zip(xb).map(|(u, v)| u.conj() * v).sum();
            max_sq = max_sq.max(ip.norm_sqr());
        }
    }
    Ok(-max_sq.log2())
}

/// A key length before and after clamping at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyLength {
    pub raw: f64,
    pub clamped: f64,
}

impl KeyLength {
    fn from_raw(raw: f64) -> Self {
        Self {
            raw,
            clamped: raw.max(0.0),
        }
    }

    pub fn was_clamped(&self) -> bool {
        self.raw < 0.0
    }
}

/// Sampling-based key length:
/// `n log2(d) (1 - Hbar_d(w_obs + delta)) - 2 log2(1/eps)`,
/// with delta derived from (m, n, eps) as in [`delta_from_epsilon`].
pub fn ell_ours(p: &ProtocolParams, w_obs: f64) -> Result<KeyLength> {
    let sp = p.sampling_params()?;
    let delta = delta_from_epsilon(&sp);
    let n = p.remainder_size() as f64;
    let log2_d = (p.d as f64).log2();
    // Hbar/log_d(2) = Hbar * log2(d): base conversion.
    let penalty = extended_dary_entropy(w_obs + delta, p.d) * log2_d;
    let leak = -2.0 * p.epsilon.log2();
    Ok(KeyLength::from_raw(n * (log2_d - penalty) - leak))
}

/// The Gamma-ratio bracket of [`ell_one`]:
/// `B = Gamma(m+d)/Gamma(m+d+1/2) * sum_i Gamma(c_i+3/2)/Gamma(c_i+1)`,
/// every ratio evaluated in the log domain (direct Gamma overflows long
/// before m ~ 1e6).
pub fn ell_one_bracket(p: &ProtocolParams, counts: &[f64]) -> Result<f64> {
    if counts.len() != p.d as usize {
        return Err(Error::LengthMismatch {
            expected: p.d as usize,
            got: counts.len(),
        });
    }
    if counts.iter().any(|&c| c < 0.0 || !c.is_finite()) {
        return Err(Error::Domain("counts must be finite and nonnegative".into()));
    }
    let m = p.sample_size() as f64;
    let d = p.d as f64;
    let log_prefix = log_gamma(m + d)? - log_gamma(m + d + 0.5)?;
    let mut sum = 0.0f64;
    for &c in counts {
        sum += (log_gamma(c + 1.5)? - log_gamma(c + 1.0)?).exp();
    }
    Ok((log_prefix + sum.ln()).exp())
}

/// Bayesian-estimator key length: `n (log2 d - 2 log2 B)` with the bracket
/// `B` of [`ell_one_bracket`].
pub fn ell_one(p: &ProtocolParams, counts: &[f64]) -> Result<KeyLength> {
    let n = p.remainder_size() as f64;
    let d = p.d as f64;
    let log2_b = ell_one_bracket(p, counts)?.log2();
    Ok(KeyLength::from_raw(n * (d.log2() - 2.0 * log2_b)))
}

/// The max-entropy envelope function
/// `gamma(x) = (x + sqrt(1+x^2)) * (x / (sqrt(1+x^2) - 1))^x`, with
/// `gamma(0) = 1` by continuity.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Domain(format!("gamma_fn requires x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let s = (1.0 + x * x).sqrt();
    // sqrt(1+x^2) - 1 cancels catastrophically near 0; x/(s-1) = (s+1)/x.
    let base = (s + 1.0) / x;
    Ok((x + s) * (x * base.ln()).exp())
}

/// Max-entropy-bound key length:
/// `n (log2 d - log2 gamma(d0 + delta'))` with
/// `delta' = d sqrt(N^2/(n^2 m) ln(4/eps'))`.
///
/// The gamma penalty is charged per signal (scaled by n); the unscaled
/// reading yields full rate at every N and no crossover between the three
/// curves exists under it.
pub fn ell_two(p: &ProtocolParams, d0: f64) -> Result<KeyLength> {
    if !d0.is_finite() || d0 < 0.0 {
        return Err(Error::Domain(format!("d0 {d0} must be >= 0")));
    }
    let eps = p.eps_prime_ell2;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps_prime_ell2 {eps} outside (0, 1)")));
    }
    let total = p.total_signals as f64;
    let n = p.remainder_size() as f64;
    let m = p.sample_size() as f64;
    let delta_prime =
        p.d as f64 * (total * total / (n * n * m) * (4.0 / eps).ln()).sqrt();
    let penalty = gamma_fn(d0 + delta_prime)?.log2();
    Ok(KeyLength::from_raw(n * ((p.d as f64).log2() - penalty)))
}

/// The delta' deviation used inside [`ell_two`], exposed for reporting.
pub fn ell_two_delta_prime(p: &ProtocolParams) -> f64 {
    let total = p.total_signals as f64;
    let n = p.remainder_size() as f64;
    let m = p.sample_size() as f64;
    p.d as f64 * (total * total / (n * n * m) * (4.0 / p.eps_prime_ell2).ln()).sqrt()
}

/// One evaluated point of the comparison sweep.
#[derive(Debug, Clone)]
pub struct RatePoint {
    pub total_signals: u64,
    pub sample_size: u64,
    pub remainder_size: u64,
    pub delta: f64,
    pub ell_ours: KeyLength,
    pub ell_one: KeyLength,
    pub ell_two: KeyLength,
    /// Bits per signal, from the clamped key lengths.
    pub rate_ours: f64,
    pub rate_one: f64,
    pub rate_two: f64,
    /// False when the derived split violates m < n; such points are flagged,
    /// not dropped.
    pub valid: bool,
}

impl RatePoint {
    fn invalid(total_signals: u64) -> Self {
        let zero = KeyLength::from_raw(0.0);
        Self {
            total_signals,
            sample_size: 0,
            remainder_size: 0,
            delta: 0.0,
            ell_ours: zero,
            ell_one: zero,
            ell_two: zero,
            rate_ours: 0.0,
            rate_one: 0.0,
            rate_two: 0.0,
            valid: false,
        }
    }
}

/// Evaluates all three formulas under the depolarizing conventions at one N.
pub fn rate_point(template: &ProtocolParams, noise: f64, total_signals: u64) -> Result<RatePoint> {
    let p = match template.with_total_signals(total_signals) {
        Ok(p) => p,
        Err(_) => return Ok(RatePoint::invalid(total_signals)),
    };
    let obs = depolarizing_observables(noise, p.d, p.sample_size())?;
    let ours = ell_ours(&p, obs.w_obs)?;
    let one = ell_one(&p, &obs.counts)?;
    let two = ell_two(&p, obs.d0)?;
    let n = total_signals as f64;
    Ok(RatePoint {
        total_signals,
        sample_size: p.sample_size(),
        remainder_size: p.remainder_size(),
        delta: delta_from_epsilon(&p.sampling_params()?),
        rate_ours: ours.clamped / n,
        rate_one: one.clamped / n,
        rate_two: two.clamped / n,
        ell_ours: ours,
        ell_one: one,
        ell_two: two,
        valid: true,
    })
}

/// Evaluates [`rate_point`] over a list of N values; points run in parallel
/// and are collected in input order.
pub fn sweep(template: &ProtocolParams, noise: f64, n_list: &[u64]) -> Result<Vec<RatePoint>> {
    if n_list.is_empty() {
        return Err(Error::Domain("sweep needs at least one N".into()));
    }
    let results = exec::map_collect(n_list, |&n| rate_point(template, noise, n));
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: u32, total: u64) -> ProtocolParams {
        ProtocolParams::new(d, total, 0.07, 1e-36, 1.0 / 3.0, 4e-12).unwrap()
    }

    fn rel_err(got: f64, want: f64) -> f64 {
        ((got - want) / want).abs()
    }

    #[test]
    fn sample_size_rounding() {
        // ties round half-up, minimum 1
        let p = ProtocolParams::new(4, 50, 0.07, 1e-6, 0.3, 1e-6).unwrap();
        assert_eq!(p.sample_size(), 4); // 3.5 -> 4
        let p = ProtocolParams::new(4, 10, 0.07, 1e-6, 0.3, 1e-6).unwrap();
        assert_eq!(p.sample_size(), 1); // 0.7 -> 1
        assert!(ProtocolParams::new(4, 2, 0.07, 1e-6, 0.3, 1e-6).is_err());
        assert!(ProtocolParams::new(4, 100, 0.6, 1e-6, 0.3, 1e-6).is_err());
        assert!(ProtocolParams::new(4, 100, 0.07, 1e-6, 0.3, 0.0).is_err());
        assert!(ProtocolParams::new(4, 100, 0.07, 1e-6, 0.3, 1.0).is_err());
    }

    #[test]
    fn gamma_overlap_cases() {
        let z = Basis::computational(4);
        assert!(gamma_overlap(&z, &z).unwrap().abs() < 1e-12);
        for d in [2usize, 3, 4, 8, 32] {
            let z = Basis::computational(d);
            let f = Basis::fourier(d);
            let got = gamma_overlap(&z, &f).unwrap();
            assert!(
                (got - (d as f64).log2()).abs() < 1e-9,
                "gamma for Fourier pair at d={d}: {got}"
            );
        }
        let z2 = Basis::computational(2);
        assert!(gamma_overlap(&z, &z2).is_err());
    }

    #[test]
    fn gamma_overlap_matches_exhaustive_pair_scan() {
        // Random pair of d=3 bases via Gram-Schmidt; oracle scans all 9 pairs.
        use num_complex::Complex64;
        use rand::Rng;
        let mut rng = crate::exec::chunk_rng(14, 0);
        let mut random_basis = || -> Basis {
            loop {
                let mut cols: Vec<Vec<Complex64>> = (0..3)
                    .map(|_| {
                        (0..3)
                            .map(|_| {
                                Complex64::new(
                                    rng.random::<f64>() - 0.5,
                                    rng.random::<f64>() - 0.5,
                                )
                            })
                            .collect()
                    })
                    .collect();
                for i in 0..3 {
                    for j in 0..i {
                        let ip: Complex64 = cols[j]
                            .iter()
                            .zip(&cols[i])
                            .map(|(a, b)| a.conj() * b)
                            .sum();
                        let proj: Vec<Complex64> = cols[j].iter().map(|a| a * ip).collect();
                        for (x, p) in cols[i].iter_mut().zip(proj) {
                            *x -= p;
                        }
                    }
                    let norm: f64 = cols[i].iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                    if norm < 1e-6 {
                        continue;
                    }
                    for x in cols[i].iter_mut() {
                        *x /= norm;
                    }
                }
                let flat: Vec<Complex64> = cols.into_iter().flatten().collect();
                if let Ok(b) = Basis::new(3, flat) {
                    return b;
                }
            }
        };
        for _ in 0..20 {
            let z = random_basis();
            let x = random_basis();
            let mut max_sq = 0.0f64;
            for a in 0..3 {
                for b in 0..3 {
                    let ip: Complex64 = z
                        .column(a)
                        .iter()
                        .zip(x.column(b))
                        .map(|(u, v)| u.conj() * v)
                        .sum();
                    max_sq = max_sq.max(ip.norm_sqr());
                }
            }
            assert!((gamma_overlap(&z, &x).unwrap() - (-max_sq.log2())).abs() < 1e-12);
        }
    }

    #[test]
    fn ell_ours_reference_value() {
        // mpmath: 16023348.065544263582 at d=4, N=1e7, f=0.07, eps=1e-36, w=0.02
        let p = params(4, 10_000_000);
        let got = ell_ours(&p, 0.02).unwrap();
        assert!(rel_err(got.clamped, 16_023_348.065_544_264) < 1e-9);
        let rate = got.clamped / 1e7;
        assert!((rate - 1.60).abs() < 0.02);
    }

    #[test]
    fn ell_ours_limits() {
        // w + delta beyond 1 - 1/d saturates the entropy, clamping to zero.
        let p = params(4, 10_000_000);
        let got = ell_ours(&p, 0.9).unwrap();
        assert_eq!(got.clamped, 0.0);
        assert!(got.was_clamped());
        // noiseless, delta -> 0: approaches n log2 d - 2 log2(1/eps)
        let p = params(4, 1_000_000_000_000);
        let got = ell_ours(&p, 0.0).unwrap();
        let n = p.remainder_size() as f64;
        let ideal = n * 2.0 - 2.0 * (1e36f64).log2();
        assert!(rel_err(got.clamped, ideal) < 1e-3);
    }

    #[test]
    fn ell_one_reference_small_m() {
        // mpmath direct-Gamma: 32.688718326465374079 at d=2, N=143, m=10, c=(9,1)
        let p = ProtocolParams::new(2, 143, 0.07, 1e-36, 1.0 / 3.0, 4e-12).unwrap();
        assert_eq!(p.sample_size(), 10);
        let got = ell_one(&p, &[9.0, 1.0]).unwrap();
        assert!(rel_err(got.clamped, 32.688_718_326_465_37) < 1e-9);
    }

    #[test]
    fn ell_one_log_domain_survives_large_m() {
        // m = 1e6 overflows direct Gamma; log-domain value stays finite and
        // approaches n log2 d in the noiseless limit.
        // mpmath: 26469701.673656494379 at d=4, N=14285714 (m=1e6).
        let p = ProtocolParams::new(4, 14_285_714, 0.07, 1e-36, 1.0 / 3.0, 4e-12).unwrap();
        assert_eq!(p.sample_size(), 1_000_000);
        let mut counts = vec![0.0; 4];
        counts[0] = 1e6;
        let got = ell_one(&p, &counts).unwrap();
        assert!(got.clamped.is_finite());
        // the value itself is a difference of ~1.3e7 lgammas, so ~1e-8
        // relative is the inherent double-precision limit here
        assert!(rel_err(got.clamped, 26_469_701.673_656_494) < 1e-6);
        let ratio = got.clamped / (p.remainder_size() as f64 * 2.0);
        assert!(rel_err(ratio, 0.996_171_589_786_461_4) < 1e-6);
        // the bracket keeps improving toward n log2 d as m grows
        let p8 = ProtocolParams::new(4, 1_428_571_429, 0.07, 1e-36, 1.0 / 3.0, 4e-12).unwrap();
        let mut c8 = vec![0.0; 4];
        c8[0] = p8.sample_size() as f64;
        let bigger = ell_one(&p8, &c8).unwrap();
        assert!(bigger.clamped / (p8.remainder_size() as f64 * 2.0) > ratio);
    }

    #[test]
    fn ell_one_uniform_counts_kill_the_rate() {
        // All c_i equal: the bracket reaches ~sqrt(d) and 2 log2 B eats the
        // whole log2 d. The finite-m correction keeps the raw value slightly
        // above zero (B <= sqrt(d (m + 5d/8)/(m + d - 1/4)) < sqrt(d) by
        // Cauchy-Schwarz), so the rate collapses without actual clamping.
        // Direct-evaluation oracle value: 14.2937218 at (d=4, N=1e4, m=700).
        let p = ProtocolParams::new(4, 10_000, 0.07, 1e-36, 1.0 / 3.0, 4e-12).unwrap();
        let m = p.sample_size() as f64;
        let counts = vec![m / 4.0; 4];
        let got = ell_one(&p, &counts).unwrap();
        assert!((got.raw - 14.293_721_796_711).abs() < 1e-3);
        assert!(got.clamped / (p.remainder_size() as f64 * 2.0) < 2e-3);
        assert!(ell_one(&p, &[-1.0, m + 1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn gamma_fn_values() {
        assert_eq!(gamma_fn(0.0).unwrap(), 1.0);
        // (1 + sqrt 2)^2
        assert!(rel_err(gamma_fn(1.0).unwrap(), 5.828_427_124_746_19) < 1e-12);
        // mpmath: 1.4913121558482105022
        assert!(rel_err(gamma_fn(0.1).unwrap(), 1.491_312_155_848_210_5) < 1e-12);
        assert!(gamma_fn(-0.1).is_err());
        // monotone increasing on x >= 0
        let mut prev = 1.0;
        for i in 1..100 {
            let v = gamma_fn(i as f64 * 0.05).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn ell_two_reference_value() {
        // mpmath: 15602913.040598132511 at d=4, N=1e7, d0=0.02, eps'=4e-12
        let p = params(4, 10_000_000);
        let got = ell_two(&p, 0.02).unwrap();
        assert!(rel_err(got.clamped, 15_602_913.040_598_133) < 1e-9);
        assert!(rel_err(ell_two_delta_prime(&p), 0.027_022_560_020_656_1) < 1e-9);
    }

    #[test]
    fn ell_two_limits_and_monotonicity() {
        let p = params(4, 10_000_000);
        // d0 = 0 and delta' -> 0 would give n log2 d; at finite N it is below.
        let got = ell_two(&p, 0.0).unwrap();
        assert!(got.clamped < p.remainder_size() as f64 * 2.0);
        // monotone nonincreasing in d0 at fixed params
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let v = ell_two(&p, i as f64 * 0.02).unwrap().clamped;
            assert!(v <= prev + 1e-9);
            prev = v;
        }
    }

    #[test]
    fn depolarizing_conventions() {
        let obs = depolarizing_observables(0.0, 4, 700).unwrap();
        assert_eq!(obs.w_obs, 0.0);
        assert_eq!(obs.counts, vec![700.0, 0.0, 0.0, 0.0]);
        assert_eq!(obs.d0, 0.0);
        let obs = depolarizing_observables(0.02, 4, 700).unwrap();
        assert!((obs.counts[0] - 686.0).abs() < 1e-12);
        for i in 1..4 {
            assert!((obs.counts[i] - 14.0 / 3.0).abs() < 1e-12);
        }
        obs.validate(4, 700).unwrap();
        // conservation at arbitrary x
        for x in [0.0, 0.1, 0.5, 1.0] {
            let obs = depolarizing_observables(x, 5, 123).unwrap();
            let sum: f64 = obs.counts.iter().sum();
            assert!((sum - 123.0).abs() < 1e-9);
        }
        assert!(depolarizing_observables(1.5, 4, 10).is_err());
    }

    #[test]
    fn rate_bounds_and_sweep_consistency() {
        let template = params(4, 1000);
        let ns = [1_000u64, 31_623, 1_000_000, 31_622_777, 1_000_000_000];
        let points = sweep(&template, 0.02, &ns).unwrap();
        assert_eq!(points.len(), ns.len());
        for (pt, &n) in points.iter().zip(&ns) {
            assert!(pt.valid);
            assert_eq!(pt.total_signals, n);
            let cap = pt.remainder_size as f64 * 2.0;
            for l in [pt.ell_ours, pt.ell_one, pt.ell_two] {
                assert!(l.clamped >= 0.0 && l.clamped <= cap + 1e-6);
            }
            for r in [pt.rate_ours, pt.rate_one, pt.rate_two] {
                assert!((0.0..=2.0 + 1e-12).contains(&r));
            }
            // single-point sweep equals direct calls
            let direct = rate_point(&template, 0.02, n).unwrap();
            assert_eq!(direct.ell_ours, pt.ell_ours);
            assert_eq!(direct.ell_one, pt.ell_one);
            assert_eq!(direct.ell_two, pt.ell_two);
        }
        // noiseless large-N rate tends to 0.93 log2 d
        let pt = rate_point(&template, 0.0, 10_000_000_000).unwrap();
        assert!((pt.rate_ours - 0.93 * 2.0).abs() < 0.01);
    }

    #[test]
    fn invalid_points_flagged_not_dropped() {
        let template = params(4, 1000);
        let points = sweep(&template, 0.02, &[2, 1000]).unwrap();
        assert_eq!(points.len(), 2);
        assert!(!points[0].valid);
        assert!(points[1].valid);
    }

    #[test]
    fn ell_ours_monotonicity_properties() {
        let p = params(4, 10_000_000);
        // nonincreasing in w_obs
        let mut prev = f64::INFINITY;
        for i in 0..=40 {
            let v = ell_ours(&p, i as f64 * 0.025).unwrap().clamped;
            assert!(v <= prev + 1e-9);
            prev = v;
        }
        // nondecreasing in N once positive (delta shrinks with N)
        let mut prev = -1.0;
        for exp in 14..30 {
            let n = 2u64.pow(exp);
            let pt = rate_point(&p, 0.02, n).unwrap();
            if prev >= 0.0 && pt.ell_ours.clamped > 0.0 {
                assert!(pt.ell_ours.clamped >= prev - 1e-6);
            }
            prev = pt.ell_ours.clamped;
        }
    }

    #[test]
    fn base_conversion_identity() {
        // Hbar/log_d(2) == Hbar * log2(d)
        for d in [2u32, 4, 32, 1024] {
            for i in 0..50 {
                let x = i as f64 * 0.02;
                let h = extended_dary_entropy(x, d);
                let via_div = h / (2.0f64).log(d as f64);
                let via_mul = h * (d as f64).log2();
                assert!((via_div - via_mul).abs() < 1e-12);
            }
        }
    }
}
