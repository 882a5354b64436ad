//! Cross-module invariant suites. Each check returns a named pass/fail row;
//! the CLI `verify` subcommand runs them all and exits nonzero on the first
//! failure.

use num_complex::Complex64;
use rand::Rng;

use crate::entmath::{dary_entropy, extended_dary_entropy, log_gamma};
use crate::error::Result;
use crate::exec;
use crate::extractor::{toeplitz_hash, BitVector, ToeplitzSeed};
use crate::qsim::{self, Basis, PureState};
use crate::rates::{self, ProtocolParams};
use crate::sampling::{self, SamplingParams};
use crate::stats;

/// Outcome of one named invariant check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn pass(name: &str, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: true,
            detail,
        }
    }

    fn fail(name: &str, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: false,
            detail,
        }
    }

    fn from_flag(name: &str, passed: bool, detail: String) -> Self {
        if passed {
            Self::pass(name, detail)
        } else {
            Self::fail(name, detail)
        }
    }
}

/// One cell of the sampling soundness grid.
#[derive(Debug, Clone)]
pub struct SoundnessCell {
    pub d: u32,
    pub total: u64,
    pub m: u64,
    pub delta: f64,
    pub worst_weight: u64,
    pub estimate: f64,
    pub ci_halfwidth: f64,
    pub bound: f64,
    pub passed: bool,
}

/// The verification grid: d in {2,4,16}, N in {100,1000}, m/N in
/// {0.07, 0.25, 0.5(1-1/N)}, delta in {0.05, 0.1, 0.2}.
pub fn soundness_grid(trials: u64, seed: u64) -> Result<Vec<SoundnessCell>> {
    let mut cells = Vec::new();
    let mut salt = 0u64;
    for d in [2u32, 4, 16] {
        for total in [100u64, 1000] {
            let fracs = [
                0.07,
                0.25,
                0.5 * (1.0 - 1.0 / total as f64),
            ];
            for frac in fracs {
                // floor keeps the half-split entry strictly below n
                let m = ((frac * total as f64).floor() as u64).max(1);
                let n = total - m;
                for delta in [0.05, 0.1, 0.2] {
                    salt += 1;
                    let worst = sampling::worst_case_error_estimate(
                        d,
                        m,
                        n,
                        delta,
                        trials,
                        exec::derive_seed(seed, salt),
                    )?;
                    let bound = sampling::sampling_tail_bound(delta, m, n)?;
                    let sigma = stats::binomial_std_err(worst.estimate, worst.trials);
                    let passed = worst.estimate <= bound + 5.0 * sigma;
                    cells.push(SoundnessCell {
                        d,
                        total,
                        m,
                        delta,
                        worst_weight: worst.weight,
                        estimate: worst.estimate,
                        ci_halfwidth: worst.ci_halfwidth,
                        bound,
                        passed,
                    });
                }
            }
        }
    }
    Ok(cells)
}

pub fn entmath_checks(seed: u64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut rng = exec::chunk_rng(seed, 0);

    let mut ok = true;
    let mut worst = 0.0f64;
    for d in [2u32, 3, 4, 16, 1024] {
        for _ in 0..300 {
            let x: f64 = rng.random();
            let y: f64 = rng.random();
            let lam: f64 = rng.random();
            let mid = dary_entropy(lam * x + (1.0 - lam) * y, d).unwrap();
            let chord = lam * dary_entropy(x, d).unwrap() + (1.0 - lam) * dary_entropy(y, d).unwrap();
            worst = worst.max(chord - mid);
            ok &= mid >= chord - 1e-12;
        }
    }
    out.push(CheckOutcome::from_flag(
        "entmath/h_d_concave",
        ok,
        format!("worst chord excess {worst:.2e}"),
    ));

    let mut ok = true;
    for d in [2u32, 4, 100] {
        let peak = 1.0 - 1.0 / d as f64;
        let mut xs: Vec<f64> = (0..300).map(|_| rng.random_range(-0.5..1.5)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in xs.windows(2) {
            ok &= extended_dary_entropy(w[1], d) >= extended_dary_entropy(w[0], d) - 1e-12;
        }
        ok &= extended_dary_entropy(1e-14, d).abs() <= 1e-12;
        ok &= (extended_dary_entropy(peak - 1e-13, d) - 1.0).abs() <= 1e-12;
        ok &= extended_dary_entropy(peak + 1e-12, d) == 1.0;
    }
    out.push(CheckOutcome::from_flag(
        "entmath/extended_monotone_continuous",
        ok,
        "grid d in {2,4,100}".into(),
    ));

    let mut ok = true;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x: f64 = rng.random_range(0.5..100.0);
        let lhs = log_gamma(x + 1.0).unwrap().exp();
        let rhs = x * log_gamma(x).unwrap().exp();
        let rel = ((lhs - rhs) / rhs).abs();
        worst = worst.max(rel);
        ok &= rel <= 1e-10;
    }
    out.push(CheckOutcome::from_flag(
        "entmath/log_gamma_recurrence",
        ok,
        format!("worst relative deviation {worst:.2e}"),
    ));
    out
}

pub fn sampling_checks(trials: u64, seed: u64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();

    // Permutation symmetry of the estimator across equal-weight strings.
    let mut ok = true;
    let a = crate::entmath::DString::from_weight(120, 40, 2).unwrap();
    let b = crate::entmath::DString::new(
        (0..120).map(|i| u32::from(i % 3 == 0)).collect::<Vec<_>>(),
        2,
    )
    .unwrap();
    for (delta, m) in [(0.05, 20u64), (0.15, 30)] {
        let ea = sampling::estimate_error_probability(&a, delta, m, trials.max(10_000), exec::derive_seed(seed, 1)).unwrap();
        let eb = sampling::estimate_error_probability(&b, delta, m, trials.max(10_000), exec::derive_seed(seed, 2)).unwrap();
        ok &= (ea.estimate - eb.estimate).abs() <= ea.ci_halfwidth + eb.ci_halfwidth;
    }
    out.push(CheckOutcome::from_flag(
        "sampling/weight_class_symmetry",
        ok,
        "equal-weight strings agree within CIs".into(),
    ));

    // Monte Carlo worst case never exceeds the analytic bound.
    match soundness_grid(trials, exec::derive_seed(seed, 3)) {
        Ok(cells) => {
            let failed: Vec<String> = cells
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("(d={}, N={}, m={}, delta={})", c.d, c.total, c.m, c.delta))
                .collect();
            out.push(CheckOutcome::from_flag(
                "sampling/soundness_grid",
                failed.is_empty(),
                if failed.is_empty() {
                    format!("{} cells within bound + 5 sigma", cells.len())
                } else {
                    format!("violations at {}", failed.join(", "))
                },
            ));
        }
        Err(e) => out.push(CheckOutcome::fail("sampling/soundness_grid", e.to_string())),
    }

    // delta_from_epsilon / sampling_tail_bound round-trip.
    let mut ok = true;
    let mut worst = 0.0f64;
    for (m, n, eps) in [
        (7u64, 93u64, 1e-3f64),
        (100, 900, 1e-9),
        (700, 9300, 1e-36),
        (499, 501, 0.1),
    ] {
        let p = SamplingParams::new(2, m, n, eps, 0.25).unwrap();
        let b = sampling::sampling_tail_bound(sampling::delta_from_epsilon(&p), m, n).unwrap();
        let rel = ((b - eps * eps) / (eps * eps)).abs();
        worst = worst.max(rel);
        ok &= rel <= 1e-12;
    }
    out.push(CheckOutcome::from_flag(
        "sampling/bound_delta_roundtrip",
        ok,
        format!("worst relative deviation {worst:.2e}"),
    ));
    out
}

pub fn rates_checks(seed: u64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut rng = exec::chunk_rng(seed, 0);

    let mut ok = true;
    for _ in 0..200 {
        let d = *[2u32, 4, 32, 1024].get(rng.random_range(0..4usize)).unwrap();
        let total = rng.random_range(1_000u64..1_000_000_000);
        let noise: f64 = rng.random_range(0.0..0.5);
        let Ok(p) = ProtocolParams::new(d, total, 0.07, 1e-36, 1.0 / 3.0, 4e-12) else {
            continue;
        };
        let pt = rates::rate_point(&p, noise, total).unwrap();
        let cap = pt.remainder_size as f64 * (d as f64).log2();
        for l in [pt.ell_ours, pt.ell_one, pt.ell_two] {
            ok &= l.clamped >= 0.0 && l.clamped <= cap + 1e-6;
        }
    }
    out.push(CheckOutcome::from_flag(
        "rates/key_lengths_within_bounds",
        ok,
        "0 <= ell <= n log2 d over random grid".into(),
    ));

    let p = ProtocolParams::new(4, 10_000_000, 0.07, 1e-36, 1.0 / 3.0, 4e-12).unwrap();
    let mut ok = true;
    let mut prev = f64::INFINITY;
    for i in 0..=50 {
        let v = rates::ell_ours(&p, i as f64 * 0.02).unwrap().clamped;
        ok &= v <= prev + 1e-9;
        prev = v;
    }
    let mut prev = f64::INFINITY;
    for i in 0..=50 {
        let v = rates::ell_two(&p, i as f64 * 0.05).unwrap().clamped;
        ok &= v <= prev + 1e-9;
        prev = v;
    }
    out.push(CheckOutcome::from_flag(
        "rates/monotone_in_observed_noise",
        ok,
        "ell_ours in w_obs, ell_two in d0".into(),
    ));

    let mut ok = true;
    let mut prev = -1.0f64;
    for exp in 12..36 {
        let total = 2u64.pow(exp);
        let pt = rates::rate_point(&p, 0.02, total).unwrap();
        if prev > 0.0 && pt.ell_ours.clamped > 0.0 {
            ok &= pt.ell_ours.clamped >= prev - 1e-6;
        }
        if pt.ell_ours.clamped > 0.0 {
            prev = pt.ell_ours.clamped;
        }
    }
    out.push(CheckOutcome::from_flag(
        "rates/ell_ours_nondecreasing_in_n",
        ok,
        "above the positivity threshold".into(),
    ));

    let mut ok = true;
    let mut worst = 0.0f64;
    for d in [2u32, 4, 32, 1024] {
        for i in 0..50 {
            let x = i as f64 * 0.02;
            let h = extended_dary_entropy(x, d);
            let dev = (h / (2.0f64).log(d as f64) - h * (d as f64).log2()).abs();
            worst = worst.max(dev);
            ok &= dev <= 1e-12;
        }
    }
    out.push(CheckOutcome::from_flag(
        "rates/base_conversion_identity",
        ok,
        format!("worst deviation {worst:.2e}"),
    ));

    let mut ok = true;
    for d in [2usize, 3, 4, 16] {
        let g = rates::gamma_overlap(&Basis::computational(d), &Basis::fourier(d)).unwrap();
        ok &= (g - (d as f64).log2()).abs() <= 1e-9;
    }
    out.push(CheckOutcome::from_flag(
        "rates/fourier_overlap_is_log2_d",
        ok,
        "computational vs Fourier".into(),
    ));
    out
}

pub fn qsim_checks(seed: u64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut rng = exec::chunk_rng(seed, 0);

    // Unitarity guard (and its negative control).
    let fourier_ok = Basis::fourier(5).unitarity_deviation() < 1e-12;
    let mut perturbed: Vec<Complex64> = (0..9)
        .map(|i| Basis::fourier(3).entry(i % 3, i / 3))
        .collect();
    perturbed[0] += Complex64::new(1e-5, 0.0);
    let rejected = Basis::new(3, perturbed).is_err();
    out.push(CheckOutcome::from_flag(
        "qsim/unitarity_guard",
        fourier_ok && rejected,
        "Fourier passes, perturbed Fourier rejected".into(),
    ));

    // Norm preservation through measurement and removal.
    let mut ok = true;
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let state = PureState::random(2, 6, &mut rng).unwrap();
        let outcome = qsim::run_experiment(&state, 3, &Basis::fourier(2), &mut rng).unwrap();
        let dev = (outcome.post_state.norm() - 1.0).abs();
        worst = worst.max(dev);
        ok &= dev <= 1e-9;
    }
    out.push(CheckOutcome::from_flag(
        "qsim/norm_preserved",
        ok,
        format!("worst |norm-1| = {worst:.2e}"),
    ));

    // Exhaustive path probabilities sum to one; measurement order immaterial.
    let mut ok = true;
    let mut order_ok = true;
    for (d, sites, m) in [(2usize, 4usize, 2u64), (3, 3, 1)] {
        let state = PureState::random(d, sites, &mut rng).unwrap();
        let basis = Basis::fourier(d);
        let fwd = qsim::enumerate_outcome_distribution(&state, m, &basis).unwrap();
        let total: f64 = fwd.iter().map(|(_, p)| p).sum();
        ok &= (total - 1.0).abs() <= 1e-9;
        let rev = qsim::enumerate_outcome_distribution_reversed(&state, m, &basis).unwrap();
        order_ok &= fwd.len() == rev.len()
            && fwd
                .iter()
                .zip(&rev)
                .all(|((ka, pa), (kb, pb))| ka == kb && (pa - pb).abs() <= 1e-9);
    }
    out.push(CheckOutcome::from_flag(
        "qsim/path_probabilities_sum_to_one",
        ok,
        "exhaustive enumeration on small instances".into(),
    ));
    out.push(CheckOutcome::from_flag(
        "qsim/measurement_order_invariant",
        order_ok,
        "ascending vs descending site order".into(),
    ));

    // Product inputs leave a product remainder.
    let mut ok = true;
    for _ in 0..10 {
        let d = 3usize;
        let sites: Vec<Vec<Complex64>> = (0..4)
            .map(|_| {
                let mut v: Vec<Complex64> = (0..d)
                    .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                    .collect();
                let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
                v.iter_mut().for_each(|a| *a /= norm);
                v
            })
            .collect();
        let state = PureState::product_of(d, &sites).unwrap();
        let outcome = qsim::run_experiment(&state, 2, &Basis::fourier(d), &mut rng).unwrap();
        let kept: Vec<Vec<Complex64>> = (0..4u64)
            .filter(|i| !outcome.subset.indices().contains(i))
            .map(|i| sites[i as usize].clone())
            .collect();
        let want = PureState::product_of(d, &kept).unwrap();
        ok &= outcome.post_state.fidelity(&want).unwrap() >= 1.0 - 1e-9;
    }
    out.push(CheckOutcome::from_flag(
        "qsim/product_state_factorizes",
        ok,
        "fidelity >= 1 - 1e-9 against the analytic product".into(),
    ));

    // Empirical min-entropy bound satisfaction with trivial side information.
    let mut ok = true;
    let mut freq = 1.0f64;
    for (d, state) in [
        (2usize, PureState::honest(2, 6).unwrap()),
        (2, PureState::random(2, 6, &mut rng).unwrap()),
        (3, PureState::basis_product(&Basis::computational(3), 0, 5).unwrap()),
    ] {
        let params = SamplingParams::new(d as u32, 2, state.sites() as u64 - 2, 1e-6, 1.0 / 3.0).unwrap();
        let report = qsim::check_min_entropy_bound(
            &state,
            &params,
            &Basis::computational(d),
            &Basis::fourier(d),
            96,
            exec::derive_seed(seed, d as u64),
        )
        .unwrap();
        freq = freq.min(report.satisfaction_frequency);
        ok &= report.satisfaction_frequency >= 1.0 - report.eps_dprime - 1e-12;
    }
    out.push(CheckOutcome::from_flag(
        "qsim/min_entropy_bound_satisfied",
        ok,
        format!("lowest satisfaction frequency {freq}"),
    ));

    // Classical conditioning inequality on random joints.
    let mut ok = true;
    for _ in 0..200 {
        let joint: Vec<(f64, Vec<f64>)> = {
            let mut ps: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 1e-3).collect();
            let z: f64 = ps.iter().sum();
            ps.iter_mut().for_each(|p| *p /= z);
            ps.into_iter()
                .map(|p| {
                    let mut ds: Vec<f64> = (0..5).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let z: f64 = ds.iter().sum();
                    ds.iter_mut().for_each(|q| *q /= z);
                    (p, ds)
                })
                .collect()
        };
        let (lhs, rhs) = qsim::cl_ent_check(&joint).unwrap();
        ok &= lhs >= rhs - 1e-9;
    }
    out.push(CheckOutcome::from_flag(
        "qsim/classical_conditioning_inequality",
        ok,
        "200 random classical joints".into(),
    ));
    out
}

pub fn extractor_checks(seed: u64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut rng = exec::chunk_rng(seed, 0);

    let seed_t = ToeplitzSeed::random(128, 32, &mut rng).unwrap();
    let mut ok = true;
    for _ in 0..2000 {
        let x = BitVector::random(128, &mut rng);
        let y = BitVector::random(128, &mut rng);
        let hx = toeplitz_hash(&x, &seed_t).unwrap();
        let hy = toeplitz_hash(&y, &seed_t).unwrap();
        let hxy = toeplitz_hash(&x.xor(&y).unwrap(), &seed_t).unwrap();
        ok &= hxy == hx.xor(&hy).unwrap();
    }
    out.push(CheckOutcome::from_flag(
        "extractor/linearity",
        ok,
        "hash(x^y) == hash(x)^hash(y) on 2000 random pairs".into(),
    ));

    // Exhaustive two-universality at (n_in=8, ell=3) via nonzero differences;
    // by linearity collisions of (x, y) are zeros of hash(x^y).
    let n_in = 8usize;
    let ell = 3usize;
    let seeds = 1u64 << (n_in + ell - 1);
    let mut worst = 0u64;
    for z in 1u32..(1 << n_in) {
        let bits: Vec<u8> = (0..n_in).map(|k| ((z >> k) & 1) as u8).collect();
        let zvec = BitVector::from_bits(&bits);
        let mut coll = 0u64;
        for s in 0..seeds {
            let ts = ToeplitzSeed::from_index(s, n_in, ell).unwrap();
            let h = toeplitz_hash(&zvec, &ts).unwrap();
            if (0..ell).all(|j| !h.get(j)) {
                coll += 1;
            }
        }
        worst = worst.max(coll);
    }
    out.push(CheckOutcome::from_flag(
        "extractor/two_universal_8_3",
        worst <= seeds >> ell,
        format!("worst collision fraction {}/{}", worst, seeds),
    ));

    let mut ok = true;
    let mut prev = 1.0f64;
    for h in [10.0f64, 20.0, 40.0, 80.0] {
        let b = crate::extractor::pa_distance_bound(h, 10, 0.0).unwrap();
        ok &= b <= prev + 1e-15;
        prev = b;
    }
    ok &= crate::extractor::pa_distance_bound(40.0, 10, 1e-3).unwrap()
        > crate::extractor::pa_distance_bound(40.0, 10, 0.0).unwrap();
    out.push(CheckOutcome::from_flag(
        "extractor/pa_bound_monotone",
        ok,
        "decreasing in h_min, increasing in epsilon".into(),
    ));
    out
}

/// Runs every suite. `trials` scales the Monte Carlo grids.
pub fn run_all(trials: u64, seed: u64) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    out.extend(entmath_checks(exec::derive_seed(seed, 101)));
    out.extend(sampling_checks(trials, exec::derive_seed(seed, 102)));
    out.extend(rates_checks(exec::derive_seed(seed, 103)));
    out.extend(qsim_checks(exec::derive_seed(seed, 104)));
    out.extend(extractor_checks(exec::derive_seed(seed, 105)));
    out
}
