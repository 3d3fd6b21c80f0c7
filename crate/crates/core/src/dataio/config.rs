//! Run configuration: one flat JSON document with defaults for every field.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibration::CalibrationConfig;
use crate::error::{Error, Result};
use crate::objective::ObjectiveParams;
use crate::policy::{EmaParams, ObjectiveMode, ReferenceMode, TrainConfig};
use crate::reward::{RewardParams, SemanticWeights};
use crate::stats::DependenceMode;
use crate::topology::TopologyWeights;
use crate::uncertainty::{PairWeightParams, UncertaintyParams};

/// Synthetic judge-noise world and its sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub prompts: usize,
    pub candidates: usize,
    pub eps_grid: Vec<f64>,
    pub seeds: usize,
    pub mode: DependenceMode,
    /// Utility gap at which a candidate counts as hard; smaller is sharper.
    pub difficulty_scale: f64,
    /// Slope of the verifier signals in the latent utility.
    pub semantic_signal: f64,
    /// Standard deviation of the verifier-signal noise.
    pub semantic_noise: f64,
    /// Trainer settings for the simulated runs; they override `lr` and `steps`.
    pub train_lr: f64,
    pub train_steps: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            prompts: 50,
            candidates: 4,
            eps_grid: vec![0.0, 0.1, 0.2, 0.3],
            seeds: 20,
            mode: DependenceMode::UncertaintyCorrelated,
            difficulty_scale: 0.5,
            semantic_signal: 0.0,
            semantic_noise: 0.5,
            train_lr: 20.0,
            train_steps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // objective
    pub beta: f64,
    pub gamma: f64,
    // reward
    pub a: f64,
    pub lambda: f64,
    pub sem_beta1: f64,
    pub sem_beta2: f64,
    pub sem_beta3: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    // uncertainty and weights
    pub tau_w: f64,
    pub w_min: f64,
    pub k: usize,
    pub tau: f64,
    pub lambda_epi: f64,
    pub lambda_ale: f64,
    // reference
    pub rho: f64,
    pub reference: ReferenceMode,
    // calibration metrics
    pub num_bins: usize,
    pub bin_edges: Option<Vec<f64>>,
    // training
    pub lr: f64,
    pub steps: usize,
    pub seed: u64,
    pub mode: ObjectiveMode,
    pub batch_size: Option<usize>,
    pub clip_norm: Option<f64>,
    pub calibrator_lr: f64,
    pub update_calibrators: bool,
    pub simulation: SimulationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::<f64>::default();
        Self {
            beta: 2.0,
            gamma: 1.0,
            a: 0.6,
            lambda: 0.5,
            sem_beta1: 1.0,
            sem_beta2: 1.0,
            sem_beta3: 1.0,
            alpha1: 1.0,
            alpha2: 0.5,
            alpha3: 0.5,
            alpha4: 1.0,
            tau_w: 1.2,
            w_min: 0.05,
            k: 3,
            tau: 0.05,
            lambda_epi: 1.0,
            lambda_ale: 1.0,
            rho: 0.995,
            reference: ReferenceMode::Fixed,
            num_bins: 10,
            bin_edges: None,
            lr: t.lr,
            steps: t.steps,
            seed: t.seed,
            mode: t.mode,
            batch_size: t.batch_size,
            clip_norm: t.clip_norm,
            calibrator_lr: t.calibrator_lr,
            update_calibrators: t.update_calibrators,
            simulation: SimulationConfig::default(),
        }
    }
}

/// Typical ranges; values outside only warn.
const TYPICAL_RANGES: [(&str, f64, f64); 5] = [
    ("beta", 1.0, 4.0),
    ("gamma", 0.5, 2.0),
    ("a", 0.4, 0.7),
    ("lambda", 0.1, 1.0),
    ("tau_w", 0.5, 2.0),
];

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        for w in cfg.warnings() {
            log::warn!("{w}");
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn topology(&self) -> TopologyWeights<f64> {
        TopologyWeights {
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            alpha3: self.alpha3,
            alpha4: self.alpha4,
        }
    }

    pub fn semantic(&self) -> SemanticWeights<f64> {
        SemanticWeights {
            beta1: self.sem_beta1,
            beta2: self.sem_beta2,
            beta3: self.sem_beta3,
        }
    }

    pub fn uncertainty(&self) -> UncertaintyParams<f64> {
        UncertaintyParams {
            lambda_epi: self.lambda_epi,
            lambda_ale: self.lambda_ale,
            tau_smooth: self.tau,
            k: self.k,
        }
    }

    pub fn pair_weight(&self) -> PairWeightParams<f64> {
        PairWeightParams {
            tau_w: self.tau_w,
            w_min: self.w_min,
        }
    }

    pub fn reward(&self) -> RewardParams<f64> {
        RewardParams {
            a: self.a,
            lambda_u: self.lambda,
        }
    }

    pub fn objective(&self) -> ObjectiveParams<f64> {
        ObjectiveParams {
            beta_temp: self.beta,
            gamma_mix: self.gamma,
        }
    }

    pub fn ema(&self) -> EmaParams<f64> {
        EmaParams {
            rho: self.rho,
            mode: self.reference,
        }
    }

    pub fn calibration(&self) -> Result<CalibrationConfig<f64>> {
        match &self.bin_edges {
            Some(edges) => CalibrationConfig::with_edges(edges.clone()),
            None => CalibrationConfig::equal_width(self.num_bins),
        }
    }

    pub fn train(&self) -> TrainConfig<f64> {
        TrainConfig {
            lr: self.lr,
            steps: self.steps,
            seed: self.seed,
            mode: self.mode,
            objective: self.objective(),
            ema: self.ema(),
            batch_size: self.batch_size,
            clip_norm: self.clip_norm,
            calibrator_lr: self.calibrator_lr,
            update_calibrators: self.update_calibrators,
            pair_weight: self.pair_weight(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.topology().validate()?;
        self.semantic().validate()?;
        self.uncertainty().validate()?;
        self.reward().validate()?;
        self.train().validate()?;
        self.calibration()?;
        let s = &self.simulation;
        if s.prompts == 0 || s.candidates < 2 {
            return Err(Error::Config("simulation needs >= 1 prompt and >= 2 candidates".into()));
        }
        if !(s.difficulty_scale > 0.0) || !(s.semantic_noise >= 0.0) || !s.semantic_signal.is_finite() {
            return Err(Error::Config("simulation difficulty scale must be > 0 and noise >= 0".into()));
        }
        if !(s.train_lr > 0.0) || s.train_steps == 0 {
            return Err(Error::Config("simulation trainer needs lr > 0 and steps >= 1".into()));
        }
        crate::stats::NoiseSimConfig {
            eps_grid: s.eps_grid.clone(),
            seeds: s.seeds,
            base_seed: self.seed,
            mode: s.mode,
        }
        .validate()
    }

    /// Values outside the usual operating ranges.
    pub fn warnings(&self) -> Vec<String> {
        let values = [self.beta, self.gamma, self.a, self.lambda, self.tau_w];
        TYPICAL_RANGES
            .iter()
            .zip(values)
            .filter(|((_, lo, hi), v)| !(lo..=hi).contains(&v))
            .map(|((name, lo, hi), v)| format!("{name} = {v} is outside the typical range [{lo}, {hi}]"))
            .collect()
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let canonical = super::json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
