//! The classical sampling strategy: uniform m-subsets, the closeness set
//! membership test, Monte Carlo and exhaustive estimates of the strategy's
//! failure probability, the analytic tail bound, and the derived constants
//! (delta, eps', eps'') used by the min-entropy bound and the rate formulas.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::entmath::{relative_weight, DString};
use crate::error::{Error, Result};
use crate::exec;
use crate::stats::{self, Z_CI_99};

/// Parameter bundle for the sampling strategy and the min-entropy bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingParams {
    d: u32,
    m: u64,
    n: u64,
    epsilon: f64,
    beta: f64,
}

impl SamplingParams {
    pub fn new(d: u32, m: u64, n: u64, epsilon: f64, beta: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("alphabet size {d} must be >= 2")));
        }
        if m == 0 {
            return Err(Error::Domain("sample size m must be >= 1".into()));
        }
        if m >= n {
            return Err(Error::Domain(format!(
                "sample size m={m} must be smaller than remainder n={n}"
            )));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Domain(format!("epsilon {epsilon} outside (0, 1)")));
        }
        if !(beta > 0.0 && beta < 0.5) {
            return Err(Error::Domain(format!("beta {beta} outside (0, 1/2)")));
        }
        Ok(Self {
            d,
            m,
            n,
            epsilon,
            beta,
        })
    }

    pub fn alphabet_size(&self) -> u32 {
        self.d
    }

    pub fn sample_size(&self) -> u64 {
        self.m
    }

    pub fn remainder_size(&self) -> u64 {
        self.n
    }

    pub fn total(&self) -> u64 {
        self.m + self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// A sorted set of m distinct positions out of `{0, .., total-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetIndex {
    indices: Vec<u64>,
    total: u64,
}

impl SubsetIndex {
    pub fn new(mut indices: Vec<u64>, total: u64) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("subset contains duplicate indices".into()));
        }
        if indices.last().is_some_and(|&i| i >= total) {
            return Err(Error::Domain(format!(
                "subset index out of range for total length {total}"
            )));
        }
        if indices.is_empty() || indices.len() as u64 >= total {
            return Err(Error::Domain(format!(
                "subset size {} must satisfy 1 <= m < {total}",
                indices.len()
            )));
        }
        Ok(Self { indices, total })
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn size(&self) -> u64 {
        self.indices.len() as u64
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}

/// The deviation delta at which [`sampling_tail_bound`] equals epsilon^2:
/// `sqrt((m+n+2) ln(2/eps^2) / (m (m+n)))`.
pub fn delta_from_epsilon(p: &SamplingParams) -> f64 {
    let m = p.m as f64;
    let n = p.n as f64;
    // ln(2/eps^2) written as ln 2 - 2 ln eps so eps^2 cannot underflow.
    let log_term = std::f64::consts::LN_2 - 2.0 * p.epsilon.ln();
    ((m + n + 2.0) * log_term / (m * (m + n))).sqrt()
}

/// Analytic tail bound on the sampling failure probability:
/// `min(1, 2 exp(-delta^2 m (n+m) / (m+n+2)))`.
pub fn sampling_tail_bound(delta: f64, m: u64, n: u64) -> Result<f64> {
    if !delta.is_finite() || delta <= 0.0 {
        return Err(Error::Domain(format!("delta {delta} must be positive")));
    }
    if m >= n {
        return Err(Error::Domain(format!("requires m < n (got m={m}, n={n})")));
    }
    let m = m as f64;
    let n = n as f64;
    let bound = 2.0 * (-delta * delta * m * (n + m) / (m + n + 2.0)).exp();
    Ok(bound.min(1.0))
}

/// The smoothing and failure parameters of the min-entropy bound:
/// `eps' = 4 eps + 2 eps^beta` and `eps'' = 2 eps^(1-2 beta)`.
pub fn bound_epsilons(epsilon: f64, beta: f64) -> Result<(f64, f64)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon {epsilon} outside (0, 1)")));
    }
    if !(beta > 0.0 && beta < 0.5) {
        return Err(Error::Domain(format!("beta {beta} outside (0, 1/2)")));
    }
    let eps_prime = 4.0 * epsilon + 2.0 * epsilon.powf(beta);
    let eps_dprime = 2.0 * epsilon.powf(1.0 - 2.0 * beta);
    Ok((eps_prime, eps_dprime))
}

/// Privacy-amplification distance parameter `eps_PA = 9 eps + 4 eps^beta`.
///
/// Equals `2^{-(1/2) * 2 log(1/eps)} + 2 eps'` = eps + 2(4 eps + 2 eps^beta):
/// the trace-distance bound evaluated at key length `H - 2 log(1/eps)`.
pub fn pa_epsilon(epsilon: f64, beta: f64) -> Result<f64> {
    let _ = bound_epsilons(epsilon, beta)?;
    Ok(9.0 * epsilon + 4.0 * epsilon.powf(beta))
}

/// Draws a uniformly random m-subset of `{0, .., total-1}` by partial
/// Fisher-Yates; deterministic under a fixed RNG state.
pub fn sample_subset(total: u64, m: u64, rng: &mut impl Rng) -> Result<SubsetIndex> {
    if m == 0 || m >= total {
        return Err(Error::Domain(format!(
            "subset size m={m} must satisfy 1 <= m < total={total}"
        )));
    }
    let total_us = usize::try_from(total)
        .map_err(|_| Error::Domain(format!("total {total} too large to index")))?;
    let mut pool: Vec<u64> = (0..total).collect();
    for i in 0..m as usize {
        let j = rng.random_range(i..total_us);
        pool.swap(i, j);
    }
    pool.truncate(m as usize);
    SubsetIndex::new(pool, total)
}

fn weight_gap(sample_ones: u64, total_ones: u64, m: u64, n: u64) -> f64 {
    let w_t = sample_ones as f64 / m as f64;
    let w_rest = (total_ones - sample_ones) as f64 / n as f64;
    (w_t - w_rest).abs()
}

/// Membership in the closeness set: true iff the sampled and unsampled
/// relative weights differ by at most delta.
pub fn in_b_set(q: &DString, t: &SubsetIndex, delta: f64) -> Result<bool> {
    if q.len() as u64 != t.total() {
        return Err(Error::LengthMismatch {
            expected: t.total() as usize,
            got: q.len(),
        });
    }
    let q_t: Vec<u32> = t.indices().iter().map(|&i| q.symbols()[i as usize]).collect();
    let sample_ones = q_t.iter().filter(|&&s| s != 0).count() as u64;
    let m = t.size();
    let n = t.total() - m;
    let _ = relative_weight(q)?; // guards the empty string
    Ok(weight_gap(sample_ones, q.hamming_weight(), m, n) <= delta)
}

/// A Monte Carlo estimate with its 99% confidence half-width.
#[derive(Debug, Clone, Copy)]
pub struct ErrorEstimate {
    pub estimate: f64,
    pub ci_halfwidth: f64,
    pub trials: u64,
}

/// The count of ones drawn into a uniform m-subset is hypergeometric; one
/// uniform draw against the precomputed CDF samples it exactly, so a trial
/// costs O(log m) instead of the O(m) of materializing the subset.
struct HypergeomSampler {
    k_min: u64,
    cdf: Vec<f64>,
}

impl HypergeomSampler {
    fn new(total: u64, ones: u64, sample: u64) -> Self {
        let k_min = sample.saturating_sub(total - ones);
        let k_max = sample.min(ones);
        // log pmf up to a constant, then exp-normalize around the peak
        let mut logs = Vec::with_capacity((k_max - k_min + 1) as usize);
        let mut cur = 0.0f64;
        logs.push(cur);
        let zeros = (total - ones) as f64;
        for k in k_min..k_max {
            let kf = k as f64;
            // pmf(k+1)/pmf(k) for Hypergeom(total, ones, sample)
            cur += ((ones as f64 - kf) * (sample as f64 - kf)).ln()
                - ((kf + 1.0) * (zeros - sample as f64 + kf + 1.0)).ln();
            logs.push(cur);
        }
        let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut cdf: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
        let mut acc = 0.0;
        for v in cdf.iter_mut() {
            acc += *v;
            *v = acc;
        }
        let norm = acc;
        for v in cdf.iter_mut() {
            *v /= norm;
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Self { k_min, cdf }
    }

    fn draw(&self, rng: &mut impl Rng) -> u64 {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u);
        self.k_min + idx.min(self.cdf.len() - 1) as u64
    }
}

fn failure_count(
    rng: &mut ChaCha12Rng,
    trials: u64,
    sampler: &HypergeomSampler,
    ones: u64,
    m: u64,
    n: u64,
    delta: f64,
) -> u64 {
    let mut failures = 0u64;
    for _ in 0..trials {
        let k = sampler.draw(rng);
        if weight_gap(k, ones, m, n) > delta {
            failures += 1;
        }
    }
    failures
}

fn estimate_for_weight(
    total: u64,
    ones: u64,
    m: u64,
    delta: f64,
    trials: u64,
    seed: u64,
) -> ErrorEstimate {
    let sampler = HypergeomSampler::new(total, ones, m);
    let n = total - m;
    let failures = exec::count_over_trials(seed, trials, |rng, t| {
        failure_count(rng, t, &sampler, ones, m, n, delta)
    });
    ErrorEstimate {
        estimate: failures as f64 / trials as f64,
        ci_halfwidth: stats::wilson_halfwidth(failures, trials, Z_CI_99),
        trials,
    }
}

/// Monte Carlo frequency of subset draws falling outside the closeness set
/// for a fixed string `q`, with a 99% confidence half-width.
///
/// The failure event depends on `q` only through its total Hamming weight
/// (the sampled count is hypergeometric), which is what each trial draws.
pub fn estimate_error_probability(
    q: &DString,
    delta: f64,
    m: u64,
    trials: u64,
    seed: u64,
) -> Result<ErrorEstimate> {
    if trials < 1000 {
        return Err(Error::Domain(format!(
            "need at least 1000 trials, got {trials}"
        )));
    }
    let total = q.len() as u64;
    if m == 0 || m >= total {
        return Err(Error::Domain(format!(
            "sample size m={m} must satisfy 1 <= m < {total}"
        )));
    }
    if delta < 0.0 {
        return Err(Error::Domain(format!("delta {delta} must be >= 0")));
    }
    Ok(estimate_for_weight(
        total,
        q.hamming_weight(),
        m,
        delta,
        trials,
        seed,
    ))
}

/// Largest subset-count for which exhaustive enumeration is attempted.
pub const EXACT_ENUMERATION_CAP: f64 = 1e7;

/// Exact failure probability by enumerating every m-subset (Gosper's hack).
/// Limited to strings of at most 63 symbols and C(N, m) <= 1e7 masks.
pub fn exact_error_probability(q: &DString, delta: f64, m: u64) -> Result<f64> {
    let total = q.len() as u64;
    if m == 0 || m >= total {
        return Err(Error::Domain(format!(
            "sample size m={m} must satisfy 1 <= m < {total}"
        )));
    }
    if total > 63 {
        return Err(Error::Domain(format!(
            "exhaustive enumeration limited to 63 symbols, got {total}"
        )));
    }
    let n_subsets = crate::entmath::log_binomial(total, m as i64, crate::entmath::LogBase::Natural)?
        .exp()
        .round();
    if n_subsets > EXACT_ENUMERATION_CAP {
        return Err(Error::Domain(format!(
            "C({total}, {m}) ~ {n_subsets:.3e} exceeds the enumeration cap"
        )));
    }
    let ones_mask: u64 = q
        .symbols()
        .iter()
        .enumerate()
        .filter(|(_, &s)| s != 0)
        .fold(0u64, |acc, (i, _)| acc | (1u64 << i));
    let ones = q.hamming_weight();
    let n = total - m;
    let mut failures = 0u64;
    let mut count = 0u64;
    let mut mask = (1u64 << m) - 1;
    let limit = if total == 63 {
        u64::MAX
    } else {
        1u64 << total
    };
    while mask < limit {
        let k = (mask & ones_mask).count_ones() as u64;
        if weight_gap(k, ones, m, n) > delta {
            failures += 1;
        }
        count += 1;
        // Gosper's hack: next mask with the same popcount.
        let c = mask & mask.wrapping_neg();
        let r = mask + c;
        if r == 0 {
            break;
        }
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    Ok(failures as f64 / count as f64)
}

/// How an error-probability figure was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    Exact,
    MonteCarlo,
}

/// Exhaustive enumeration when C(N, m) <= 1e6, Monte Carlo otherwise.
pub fn error_probability_auto(
    q: &DString,
    delta: f64,
    m: u64,
    trials: u64,
    seed: u64,
) -> Result<(ErrorEstimate, EstimateMethod)> {
    let total = q.len() as u64;
    let feasible = total <= 63
        && crate::entmath::log_binomial(total, m as i64, crate::entmath::LogBase::Natural)?
            .exp()
            <= 1e6;
    if feasible {
        let exact = exact_error_probability(q, delta, m)?;
        Ok((
            ErrorEstimate {
                estimate: exact,
                ci_halfwidth: 0.0,
                trials: 0,
            },
            EstimateMethod::Exact,
        ))
    } else {
        Ok((
            estimate_error_probability(q, delta, m, trials, seed)?,
            EstimateMethod::MonteCarlo,
        ))
    }
}

/// Result of the worst-weight scan.
#[derive(Debug, Clone, Copy)]
pub struct WorstCaseEstimate {
    /// Hamming weight class attaining the largest estimated failure
    /// probability.
    pub weight: u64,
    pub estimate: f64,
    pub ci_halfwidth: f64,
    pub trials: u64,
}

/// Scans Hamming-weight classes for the worst-case failure probability.
///
/// For uniformly random subsets the failure probability depends on `q` only
/// through its weight, so scanning the N+1 weight classes covers the max over
/// all strings. Above 200 symbols a coarse scan (every ceil(N/50)-th weight)
/// is refined around its maximum.
pub fn worst_case_error_estimate(
    _d: u32,
    m: u64,
    n: u64,
    delta: f64,
    trials: u64,
    seed: u64,
) -> Result<WorstCaseEstimate> {
    if m == 0 || m >= n {
        return Err(Error::Domain(format!(
            "requires 1 <= m < n (got m={m}, n={n})"
        )));
    }
    if trials < 1000 {
        return Err(Error::Domain(format!(
            "need at least 1000 trials, got {trials}"
        )));
    }
    let total = m + n;
    let scan = |weights: &[u64]| -> Vec<(u64, ErrorEstimate)> {
        exec::map_collect(weights, |&w| {
            (
                w,
                estimate_for_weight(total, w, m, delta, trials, exec::derive_seed(seed, w)),
            )
        })
    };
    let best_of = |results: &[(u64, ErrorEstimate)]| -> (u64, ErrorEstimate) {
        let mut best = results[0];
        for &(w, est) in &results[1..] {
            if est.estimate > best.1.estimate {
                best = (w, est);
            }
        }
        best
    };

    let results = if total <= 200 {
        scan(&(0..=total).collect::<Vec<_>>())
    } else {
        let step = total.div_ceil(50);
        let coarse: Vec<u64> = (0..=total).step_by(step as usize).collect();
        let coarse_results = scan(&coarse);
        let (anchor, _) = best_of(&coarse_results);
        let lo = anchor.saturating_sub(step - 1);
        let hi = (anchor + step - 1).min(total);
        let fine: Vec<u64> = (lo..=hi).filter(|w| w % step != 0).collect();
        let mut all = coarse_results;
        all.extend(scan(&fine));
        all
    };
    let (weight, est) = best_of(&results);
    Ok(WorstCaseEstimate {
        weight,
        estimate: est.estimate,
        ci_halfwidth: est.ci_halfwidth,
        trials,
    })
}
