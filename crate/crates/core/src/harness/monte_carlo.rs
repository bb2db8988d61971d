//! Seeded Monte Carlo sweeps over channel and noise realizations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::link::run_single_link;
use crate::harness::{ExperimentConfig, FrameMetrics, RandomizationSpec};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// One step of the empirical MSE distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub mse_db: f64,
    pub probability: f64,
}

/// Outcome of a full sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    /// One entry per realization, in realization order.
    pub metrics: Vec<FrameMetrics>,
    /// Empirical CDF of the per-realization MSE, nondecreasing from 1/K to 1.
    pub cdf: Vec<CdfPoint>,
    /// Bit errors over payload bits, pooled across realizations.
    pub aggregate_ber: f64,
    pub master_seed: u64,
}

// per-realization channel perturbations drawn from the realization seed
fn randomize(config: &mut ExperimentConfig, spec: &RandomizationSpec, rng: &mut ChaCha8Rng) {
    for p in config.channel.paths.iter_mut() {
        if spec.gain_jitter_db > 0.0 {
            let db = rng.gen_range(-spec.gain_jitter_db..=spec.gain_jitter_db);
            p.gain *= 10f64.powf(db / 20.0);
        }
        if spec.delay_jitter_s > 0.0 {
            let dt = rng.gen_range(-spec.delay_jitter_s..=spec.delay_jitter_s);
            p.delay_s = (p.delay_s + dt).max(0.0);
        }
        if spec.slope_jitter > 0.0 {
            p.drift.slope += rng.gen_range(-spec.slope_jitter..=spec.slope_jitter);
        }
        if spec.random_drift_phase {
            if let Some(sine) = p.drift.sine.as_mut() {
                sine.phase_rad = rng.gen_range(0.0..TWO_PI);
            }
        }
    }
}

fn realization_config(config: &ExperimentConfig, seed: u64) -> ExperimentConfig {
    let mut c = config.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if let Some(spec) = c.randomization {
        randomize(&mut c, &spec, &mut rng);
    }
    // fresh noise and payload every realization
    c.channel.seed = rng.gen();
    c
}

/// Runs `config.protocol.realizations` independent links with per-realization
/// seeds derived from `master_seed`.
///
/// Realizations run in parallel but are reported in realization order, so the
/// result is a pure function of the config and the master seed. A diverged
/// equalizer marks its realization `converged = false` without aborting the
/// sweep.
pub fn run_monte_carlo(config: &ExperimentConfig, master_seed: u64) -> Result<MonteCarloResult> {
    config.validate()?;
    let k = config.protocol.realizations;
    let mut seeder = ChaCha8Rng::seed_from_u64(master_seed);
    let seeds: Vec<u64> = (0..k).map(|_| seeder.gen()).collect();

    let metrics: Vec<FrameMetrics> = seeds
        .par_iter()
        .map(|&seed| {
            let c = realization_config(config, seed);
            run_single_link(&c).map(|run| run.metrics)
        })
        .collect::<Result<_>>()?;

    let mut sorted: Vec<f64> = metrics.iter().map(|m| m.mse_db).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("floored MSEs are finite"));
    let cdf = sorted
        .iter()
        .enumerate()
        .map(|(i, &mse_db)| CdfPoint { mse_db, probability: (i + 1) as f64 / k as f64 })
        .collect();

    let bits = config.protocol.modulation.bits_per_symbol() as f64;
    let payload_symbols = (config.protocol.n_d - config.protocol.n_t) as f64
        * config.protocol.frames as f64
        * k as f64;
    let errors: usize = metrics.iter().map(|m| m.bit_errors).sum();
    Ok(MonteCarloResult {
        metrics,
        cdf,
        aggregate_ber: errors as f64 / (payload_symbols * bits),
        master_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(k: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::space();
        c.protocol.n_d = 400;
        c.protocol.realizations = k;
        c.randomization = Some(RandomizationSpec {
            gain_jitter_db: 2.0,
            delay_jitter_s: 2e-4,
            slope_jitter: 0.0,
            random_drift_phase: false,
        });
        c
    }

    #[test]
    fn single_realization_yields_a_unit_step() {
        let c = tiny_config(1);
        let r = run_monte_carlo(&c, 42).unwrap();
        assert_eq!(r.metrics.len(), 1);
        assert_eq!(r.cdf.len(), 1);
        assert_eq!(r.cdf[0].probability, 1.0);
        assert_eq!(r.cdf[0].mse_db, r.metrics[0].mse_db);
    }

    #[test]
    fn same_master_seed_reproduces_bit_identical_results() {
        let c = tiny_config(4);
        let a = run_monte_carlo(&c, 9).unwrap();
        let b = run_monte_carlo(&c, 9).unwrap();
        assert_eq!(a, b);
        let other = run_monte_carlo(&c, 10).unwrap();
        assert!(a.metrics != other.metrics);
    }

    #[test]
    fn cdf_is_monotone_and_normalized() {
        let c = tiny_config(8);
        let r = run_monte_carlo(&c, 3).unwrap();
        assert_eq!(r.cdf.len(), 8);
        for w in r.cdf.windows(2) {
            assert!(w[1].probability > w[0].probability);
            assert!(w[1].mse_db >= w[0].mse_db);
        }
        assert_eq!(r.cdf[0].probability, 0.125);
        assert_eq!(r.cdf.last().unwrap().probability, 1.0);
        // perturbed channels spread the distribution
        assert!(r.cdf.last().unwrap().mse_db > r.cdf[0].mse_db);
    }

    #[test]
    fn clean_realizations_count_no_errors() {
        let c = tiny_config(3);
        let r = run_monte_carlo(&c, 11).unwrap();
        assert_eq!(r.aggregate_ber, 0.0);
        assert!(r.metrics.iter().all(|m| m.converged));
    }
}
