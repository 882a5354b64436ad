use std::fmt::Write as _;

use minent_core::entmath::{extended_dary_entropy, DString};
use minent_core::exec;
use minent_core::extractor::{extract, pa_distance_bound};
use minent_core::qsim::{measure_all, run_experiment, Basis, PureState, MAX_AMPLITUDES};
use minent_core::rates::{ell_ours, ProtocolParams};
use minent_core::sampling::{
    delta_from_epsilon, pa_epsilon, sample_subset, bound_epsilons,
};
use rand::Rng;

use crate::config::{fmt_sig12, CommonOpts, RunConfig};
use crate::CliError;

enum Mode {
    Statevector,
    FastPath,
}

fn statevector_feasible(d: u32, sites: u64) -> bool {
    let mut total: u128 = 1;
    for _ in 0..sites {
        total *= d as u128;
        if total > MAX_AMPLITUDES as u128 {
            return false;
        }
    }
    true
}

fn subset_summary(indices: &[u64]) -> String {
    if indices.len() <= 64 {
        indices
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    } else {
        let head: Vec<String> = indices[..16].iter().map(|i| i.to_string()).collect();
        format!("{} ... ({} indices)", head.join(" "), indices.len())
    }
}

pub fn run(opts: &CommonOpts) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(opts)?;
    let total = cfg
        .n_list
        .as_ref()
        .and_then(|l| l.first().copied())
        .unwrap_or(cfg.n_start);
    let params = ProtocolParams::new(
        cfg.d,
        total,
        cfg.fraction,
        cfg.epsilon,
        cfg.beta,
        cfg.eps_prime_l2,
    )
    .map_err(|e| CliError::Config(format!("config field `n-start`: {e}")))?;
    let m = params.sample_size();
    let n = params.remainder_size();
    let d = cfg.d;

    let mode = if statevector_feasible(d, total) {
        Mode::Statevector
    } else {
        Mode::FastPath
    };
    let mut rng = exec::chunk_rng(cfg.seed, 0);

    // Both modes report the observed test weight: the noise convention keeps
    // the expected observed weight equal to the configured noise level.
    let (subset, q_bits, r) = match mode {
        Mode::FastPath => {
            // Site-wise classical sampling: each test site fails with
            // probability `noise`; the readout register is uniform either way
            // (the honest vector and the replaced one both measure flat).
            let subset = sample_subset(total, m, &mut rng)?;
            let q_bits: Vec<u8> = (0..m)
                .map(|_| u8::from(rng.random::<f64>() < cfg.noise))
                .collect();
            let symbols: Vec<u32> = (0..n).map(|_| rng.random_range(0..d)).collect();
            (subset, q_bits, DString::new(symbols, d)?)
        }
        Mode::Statevector => {
            // Depolarizing unraveling matched to the observed-weight
            // convention: a site is replaced by a random computational basis
            // vector with probability noise * d/(d-1), so the test failure
            // probability is exactly `noise` (capped at the uniform channel).
            let replace_p = (cfg.noise * d as f64 / (d as f64 - 1.0)).min(1.0);
            let fourier = Basis::fourier(d as usize);
            let z = Basis::computational(d as usize);
            let mut sites = Vec::with_capacity(total as usize);
            for _ in 0..total {
                if rng.random::<f64>() < replace_p {
                    let j = rng.random_range(0..d as usize);
                    sites.push(z.column(j).to_vec());
                } else {
                    sites.push(fourier.column(0).to_vec());
                }
            }
            let state = PureState::product_of(d as usize, &sites)?;
            let outcome = run_experiment(&state, m, &fourier, &mut rng)?;
            let r_digits = measure_all(&outcome.post_state, &z, &mut rng)?;
            (
                outcome.subset,
                outcome.outcomes,
                DString::new(r_digits, d)?,
            )
        }
    };

    let w_obs = q_bits.iter().filter(|&&b| b != 0).count() as f64 / m as f64;
    let sp = params.sampling_params()?;
    let delta = delta_from_epsilon(&sp);
    let key = ell_ours(&params, w_obs)?;
    let ell_bits = key.clamped.floor().max(0.0) as u64;
    // Entropy bound before subtracting the leakage term.
    let h_bound =
        n as f64 * (d as f64).log2() * (1.0 - extended_dary_entropy(w_obs + delta, d));
    let (eps_prime, eps_dprime) = bound_epsilons(cfg.epsilon, cfg.beta)?;
    let eps_pa = pa_epsilon(cfg.epsilon, cfg.beta)?;
    let pa_bound = pa_distance_bound(h_bound, ell_bits, eps_prime)?;

    let extracted = extract(&r, ell_bits as usize, &mut rng)?;

    let mut report = cfg.echo("simulate");
    let _ = writeln!(
        report,
        "mode={}",
        match mode {
            Mode::Statevector => "statevector",
            Mode::FastPath => "fast-path",
        }
    );
    let _ = writeln!(report, "N={total} m={m} n={n} d={d}");
    let _ = writeln!(report, "t={}", subset_summary(subset.indices()));
    let _ = writeln!(report, "w_obs={}", fmt_sig12(w_obs));
    let _ = writeln!(report, "delta={}", fmt_sig12(delta));
    let _ = writeln!(report, "ell_ours_raw={}", fmt_sig12(key.raw));
    let _ = writeln!(report, "ell_ours={}", fmt_sig12(key.clamped));
    let _ = writeln!(report, "extracted_bits={ell_bits}");
    let _ = writeln!(
        report,
        "h_min_bound={} (analytic smoothed-min-entropy bound at eps_prime)",
        fmt_sig12(h_bound)
    );
    let _ = writeln!(report, "eps_prime={}", fmt_sig12(eps_prime));
    let _ = writeln!(report, "eps_dprime={}", fmt_sig12(eps_dprime));
    let _ = writeln!(report, "eps_pa={}", fmt_sig12(eps_pa));
    let _ = writeln!(report, "pa_distance_bound={}", fmt_sig12(pa_bound));

    if let Some(out) = &cfg.out {
        std::fs::write(out, extracted.bits.to_bytes()).map_err(|e| {
            CliError::Config(format!("config field `out`: cannot write {out:?}: {e}"))
        })?;
        let seed_path = out.with_extension("seed.hex");
        let seed_hex = if ell_bits > 0 {
            extracted.seed.bits().to_hex()
        } else {
            String::new()
        };
        std::fs::write(&seed_path, seed_hex + "\n").map_err(|e| {
            CliError::Config(format!("config field `out`: cannot write {seed_path:?}: {e}"))
        })?;
        let _ = writeln!(report, "bits_file={}", out.display());
        let _ = writeln!(report, "seed_file={}", seed_path.display());
    }
    print!("{report}");
    Ok(())
}
