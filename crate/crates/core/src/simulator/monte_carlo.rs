//! Parallel repetitions of one trial template.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{run_trial, Outcome, SimError, Trace, TrialConfig};
use crate::analysis::final_errors;

/// Result of one Monte-Carlo trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialSummary {
    pub index: usize,
    pub seed: u64,
    pub outcome: Outcome,
    /// Formation-frame rotation error at the end, if defined.
    pub final_rotation_error: Option<f64>,
    pub final_translation_error: f64,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McSummary {
    pub trials: usize,
    pub successes: usize,
    pub rate: f64,
    pub diverged: usize,
    pub left_chart: usize,
    pub results: Vec<TrialSummary>,
}

/// Per-trial seeds derived from a master seed.
pub fn trial_seeds(master: u64, trials: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..trials).map(|_| rng.random()).collect()
}

/// Runs `trials` copies of `template` with derived seeds and counts the
/// trials accepted by `success`. Only the first and last snapshot of each
/// trial are kept. `threads = None` uses the global pool.
pub fn monte_carlo<F>(
    template: &TrialConfig,
    trials: usize,
    threads: Option<usize>,
    success: F,
) -> Result<McSummary, SimError>
where
    F: Fn(&Trace) -> bool + Sync,
{
    if trials == 0 {
        return Err(SimError::ConfigInvalid(
            "`trials`: must be at least 1".into(),
        ));
    }
    template.validate()?;
    let seeds = trial_seeds(template.seed, trials);
    let run_one = |(index, seed): (usize, u64)| -> Result<TrialSummary, SimError> {
        let mut cfg = template.clone();
        cfg.seed = seed;
        cfg.record_stride = usize::MAX;
        let trace = run_trial(&cfg)?;
        let (rot, trans) = final_errors(&trace);
        Ok(TrialSummary {
            index,
            seed,
            success: success(&trace),
            outcome: trace.outcome,
            final_rotation_error: rot,
            final_translation_error: trans,
        })
    };
    let jobs: Vec<(usize, u64)> = seeds.into_iter().enumerate().collect();
    let results: Result<Vec<TrialSummary>, SimError> = match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| SimError::ConfigInvalid(format!("`threads`: {e}")))?;
            pool.install(|| jobs.into_par_iter().map(run_one).collect())
        }
        None => jobs.into_par_iter().map(run_one).collect(),
    };
    let results = results?;
    let successes = results.iter().filter(|r| r.success).count();
    Ok(McSummary {
        trials,
        successes,
        rate: successes as f64 / trials as f64,
        diverged: results.iter().filter(|r| r.outcome.is_diverged()).count(),
        left_chart: results
            .iter()
            .filter(|r| matches!(r.outcome, Outcome::LeftChart { .. }))
            .count(),
        results,
    })
}
