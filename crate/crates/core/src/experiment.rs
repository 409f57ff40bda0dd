//! Method runner and size sweeps used by the CLI and the acceptance suite.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{mbi_reconstruct, rbf_reconstruct, RbfConfig};
use crate::error::{Error, Result};
use crate::estimators::{build_estimator, EstimatorConfig, Method};
use crate::fill::{reconstruct, FillReport};
use crate::grid::{init_region_state, ObstacleMap, RadioMap, Rect, Transmitter};
use crate::metrics::{evaluate, MetricReport};
use crate::priority::{PriorityConfig, PriorityMode};
use crate::scenegen::random_rect;

/// Every reconstruction method that can be compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BenchMethod {
    /// Exemplar copy, full priority.
    Epc,
    /// Dictionary coding, full priority.
    Epd,
    /// Exemplar copy, texture-and-block priority.
    Ebc,
    Rbf,
    Mbi,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 5] = [
        BenchMethod::Epc,
        BenchMethod::Epd,
        BenchMethod::Ebc,
        BenchMethod::Rbf,
        BenchMethod::Mbi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchMethod::Epc => "epc",
            BenchMethod::Epd => "epd",
            BenchMethod::Ebc => "ebc",
            BenchMethod::Rbf => "rbf",
            BenchMethod::Mbi => "mbi",
        }
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BenchMethod::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub priority: PriorityConfig,
    pub estimator: EstimatorConfig,
    pub rbf: RbfConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub estimate: RadioMap,
    pub metrics: MetricReport,
    pub fill: Option<FillReport>,
    pub runtime_ms: u128,
}

/// Hides `rect` in `truth`, reconstructs it with `method` and scores the
/// result over `rect`.
pub fn run_method(
    method: BenchMethod,
    truth: &RadioMap,
    obstacles: &ObstacleMap,
    txs: &[Transmitter],
    rect: Rect,
    cfg: &RunConfig,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let mut state = init_region_state(truth, rect)?;
    let (estimate, fill) = match method {
        BenchMethod::Epc | BenchMethod::Epd | BenchMethod::Ebc => {
            let mut priority = cfg.priority.clone();
            priority.mode = if method == BenchMethod::Ebc {
                PriorityMode::TextureOnly
            } else {
                PriorityMode::Full
            };
            let mut est_cfg = cfg.estimator.clone();
            est_cfg.method = if method == BenchMethod::Epd { Method::Epd } else { Method::Epc };
            let estimator = build_estimator(&est_cfg, truth, &state, priority.patch_size, None)?;
            let (map, report) = reconstruct(truth, &mut state, obstacles, txs, &priority, estimator.as_ref())?;
            (map, Some(report))
        }
        BenchMethod::Rbf => (rbf_reconstruct(truth, &state, &cfg.rbf)?, None),
        BenchMethod::Mbi => {
            let tx = txs.first().ok_or(Error::NoTransmitters)?;
            (mbi_reconstruct(truth, &state, tx)?.0, None)
        }
    };
    let metrics = evaluate(&truth.values, &estimate.values, &rect)?;
    Ok(RunOutcome {
        estimate,
        metrics,
        fill,
        runtime_ms: start.elapsed().as_millis(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub method: BenchMethod,
    pub scenario: String,
    pub mask_h: usize,
    pub mask_w: usize,
    pub seed: u64,
    pub mse: f64,
    pub ne: f64,
    pub runtime_ms: u128,
}

pub const RESULTS_HEADER: &str = "method,scenario,mask_h,mask_w,seed,mse,ne,runtime_ms";

impl TrialResult {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.method, self.scenario, self.mask_h, self.mask_w, self.seed, self.mse, self.ne, self.runtime_ms
        )
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub methods: Vec<BenchMethod>,
    /// Square mask edge lengths.
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Minimum distance between a mask and the grid edge.
    pub margin: usize,
    pub scenario: String,
}

/// Runs every method on `trials` random square masks per size. Trial `t`
/// draws one location from seed `seed + t`; the masks of every size in that
/// trial are centred on it, so they are nested and shared by all methods.
/// Trials run in parallel; the output order is sizes, then trials, then
/// methods.
pub fn sweep(
    truth: &RadioMap,
    obstacles: &ObstacleMap,
    txs: &[Transmitter],
    sweep: &SweepConfig,
    cfg: &RunConfig,
) -> Result<Vec<TrialResult>> {
    let (rows, cols) = truth.shape();
    let largest = sweep.sizes.iter().copied().max().unwrap_or(0);
    let jobs: Vec<(usize, u64)> = sweep
        .sizes
        .iter()
        .flat_map(|&size| (0..sweep.trials).map(move |t| (size, sweep.seed + t as u64)))
        .collect();
    let per_job: Vec<Vec<TrialResult>> = jobs
        .into_par_iter()
        .map(|(size, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let outer = random_rect(rows, cols, largest, largest, sweep.margin, &mut rng)?;
            let shift = (largest - size) / 2;
            let rect = Rect::new(outer.top + shift, outer.left + shift, size, size);
            let mut run_cfg = cfg.clone();
            run_cfg.estimator.rng_seed = seed;
            sweep
                .methods
                .iter()
                .map(|&method| {
                    let outcome = run_method(method, truth, obstacles, txs, rect, &run_cfg)?;
                    Ok(TrialResult {
                        method,
                        scenario: sweep.scenario.clone(),
                        mask_h: size,
                        mask_w: size,
                        seed,
                        mse: outcome.metrics.mse,
                        ne: outcome.metrics.ne,
                        runtime_ms: outcome.runtime_ms,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub method: BenchMethod,
    pub mask_size: usize,
    pub trials: usize,
    pub mean_mse: f64,
    pub mean_ne: f64,
}

pub const SUMMARY_HEADER: &str = "method,mask_size,trials,mean_mse,mean_ne";

impl SweepSummary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.method, self.mask_size, self.trials, self.mean_mse, self.mean_ne
        )
    }
}

/// Mean MSE and NE per (method, mask size), in first-seen order.
pub fn summarize(results: &[TrialResult]) -> Vec<SweepSummary> {
    let mut out: Vec<SweepSummary> = Vec::new();
    for r in results {
        match out.iter_mut().find(|s| s.method == r.method && s.mask_size == r.mask_h) {
            Some(s) => {
                s.trials += 1;
                s.mean_mse += r.mse;
                s.mean_ne += r.ne;
            }
            None => out.push(SweepSummary {
                method: r.method,
                mask_size: r.mask_h,
                trials: 1,
                mean_mse: r.mse,
                mean_ne: r.ne,
            }),
        }
    }
    for s in &mut out {
        s.mean_mse /= s.trials as f64;
        s.mean_ne /= s.trials as f64;
    }
    out
}
