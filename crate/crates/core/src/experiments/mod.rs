//! Scenario runner: configuration, CSV output and the property suite.

pub mod config;
pub mod output;
pub mod scenarios;
pub mod suite;

use rayon::prelude::*;

pub use config::Config;
pub use output::{format_float, Table};
pub use scenarios::{default_config_text, resolve_config, run_scenario, scenario, ScenarioInfo, ScenarioOutput, SCENARIOS};
pub use suite::{run_chain_checks, run_property_suite, run_short_time_checks, CheckKind, PropertyResult, SuiteReport};

use crate::error::{Error, Result};

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "OBSENTROPY_THREADS";

/// Thread count from [`THREADS_ENV`]; one when unset.
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::Config {
                path: THREADS_ENV.into(),
                msg: format!("expected a positive integer, got `{v}`"),
            }),
        },
    }
}

/// Ordered map over `items`, fanned out over `threads` workers when above one.
pub fn par_map<T, R, F>(items: &[T], threads: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    if threads <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Numeric(e.to_string()))?;
    pool.install(|| items.par_iter().map(f).collect())
}

pub const PHASE_CONVENTION: &str =
    "exp(-iEt) with hbar=1; eigenvectors signed so the first component above 1e-10 in magnitude is positive";

/// Metadata common to every output table.
pub fn provenance(t: &mut Table, id: &str, cfg: &Config, threads: usize) {
    t.meta("scenario", id);
    t.meta("code_version", env!("CARGO_PKG_VERSION"));
    t.meta("config_hash", cfg.hash());
    t.meta("phase_convention", PHASE_CONVENTION);
    t.meta("eigenstate_order", "ascending energy");
    t.meta("threads", threads.to_string());
    for k in cfg.keys() {
        if let Some(v) = cfg.get(k) {
            t.meta(format!("config.{k}"), v.to_string());
        }
    }
}
