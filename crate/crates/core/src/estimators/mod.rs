//! Patch estimators: exemplar copy and sparse dictionary coding.

mod epc;
mod epd;
mod ksvd;
mod sparse;

pub use epc::{epc_fill, epc_search, ExemplarCopy, ExemplarMatch};
pub use epd::{epd_fill, sample_training_patches, DictionaryEstimator};
pub use ksvd::{omp_sparsity, train_dictionary, Dictionary, KsvdConfig, TrainingMeta};
pub use sparse::{lasso_objective, sparse_code, SparseCode};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fill::PatchEstimator;
use crate::grid::{RadioMap, RegionState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Copy from the best-matching observed window.
    Epc,
    /// Sparse-code against a learned dictionary.
    Epd,
}

/// Where exemplar windows may come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SearchSource {
    OriginalObservedOnly,
    IncludeFilled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub method: Method,
    /// Weight of the l1 penalty in sparse coding.
    pub lambda: f64,
    pub dict_size: usize,
    pub train_patches: usize,
    pub ksvd_iters: usize,
    pub sparse_max_iters: usize,
    pub sparse_tol: f64,
    pub search_source: SearchSource,
    pub clamp_output: bool,
    pub rng_seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            method: Method::Epc,
            lambda: 0.01,
            dict_size: 500,
            train_patches: 2000,
            ksvd_iters: 15,
            sparse_max_iters: 200,
            sparse_tol: 1e-6,
            search_source: SearchSource::OriginalObservedOnly,
            clamp_output: true,
            rng_seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidConfig("lambda must be non-negative".into()));
        }
        if self.dict_size == 0 || self.train_patches == 0 || self.ksvd_iters == 0 || self.sparse_max_iters == 0 {
            return Err(Error::InvalidConfig(
                "dictionary size, training patches and iteration counts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Samples `train_patches` windows from the observed area and trains a
/// `dict_size`-atom dictionary on them, seeded by `rng_seed`.
pub fn train_from_map(cfg: &EstimatorConfig, map: &RadioMap, state: &RegionState, patch_size: usize) -> Result<Dictionary> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let samples = sample_training_patches(map, state, cfg.train_patches, patch_size, &mut rng)?;
    let ksvd = KsvdConfig {
        atoms: cfg.dict_size,
        iterations: cfg.ksvd_iters,
        sparsity: omp_sparsity(cfg.dict_size),
    };
    train_dictionary(&samples, patch_size, &ksvd, &mut rng)
}

/// Builds the configured estimator. For EPD this samples training patches
/// and trains the dictionary once, unless one is supplied.
pub fn build_estimator(
    cfg: &EstimatorConfig,
    map: &RadioMap,
    state: &RegionState,
    patch_size: usize,
    dictionary: Option<Dictionary>,
) -> Result<Box<dyn PatchEstimator>> {
    cfg.validate()?;
    match cfg.method {
        Method::Epc => Ok(Box::new(ExemplarCopy::new(cfg.search_source))),
        Method::Epd => {
            let dict = match dictionary {
                Some(d) => {
                    if d.patch_size != patch_size {
                        return Err(Error::DictionaryMismatch {
                            dictionary: d.patch_size,
                            patch: patch_size,
                        });
                    }
                    d
                }
                None => train_from_map(cfg, map, state, patch_size)?,
            };
            Ok(Box::new(DictionaryEstimator::new(dict, cfg)))
        }
    }
}
