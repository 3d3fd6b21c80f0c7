use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{json, parse_dataset, PairRecord, RunConfig};
use crate::error::Result;
use crate::policy::{train, PreparedPair, TabularPolicy, TrainOutcome};
use crate::reward::CalibratorParams;

use super::score::score_records;

/// Prompt-level response sets and the prepared training pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub pairs: Vec<PreparedPair<f64>>,
    /// Response ids per prompt, in order of first appearance; logits share this order.
    pub response_ids: BTreeMap<String, Vec<String>>,
}

impl TrainingData {
    pub fn initial_policy(&self) -> TabularPolicy<f64> {
        TabularPolicy::uniform(self.response_ids.iter().map(|(p, ids)| (p.as_str(), ids.len())))
    }
}

pub fn prepare_training(records: &[PairRecord], cfg: &RunConfig) -> Result<TrainingData> {
    let scored = score_records(records, cfg)?;
    let mut response_ids: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut index = |prompt: &str, id: &str| {
        let ids = response_ids.entry(prompt.to_string()).or_default();
        match ids.iter().position(|x| x == id) {
            Some(i) => i,
            None => {
                ids.push(id.to_string());
                ids.len() - 1
            }
        }
    };
    let pairs = scored
        .iter()
        .map(|s| PreparedPair {
            prompt: s.prompt_id.clone(),
            winner: index(&s.prompt_id, &s.winner.response_id),
            loser: index(&s.prompt_id, &s.loser.response_id),
            winner_signals: s.winner.bundle(),
            loser_signals: s.loser.bundle(),
            weight: s.weight,
        })
        .collect();
    Ok(TrainingData { pairs, response_ids })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub policy: TabularPolicy<f64>,
    pub response_ids: BTreeMap<String, Vec<String>>,
    pub phi: CalibratorParams<f64>,
    pub step: usize,
    pub config_hash: String,
}

pub fn run_training(records: &[PairRecord], cfg: &RunConfig) -> Result<(Checkpoint, TrainOutcome<f64>)> {
    let data = prepare_training(records, cfg)?;
    let outcome = train(
        &data.pairs,
        &data.initial_policy(),
        &cfg.reward(),
        &CalibratorParams::default(),
        &cfg.train(),
    )?;
    let checkpoint = Checkpoint {
        policy: outcome.policy.clone(),
        response_ids: data.response_ids,
        phi: outcome.phi,
        step: outcome.trace.len(),
        config_hash: cfg.hash(),
    };
    Ok((checkpoint, outcome))
}

/// Trains on a dataset file, writing the checkpoint and the per-step metrics trace.
pub fn cmd_train(input: &Path, cfg: &RunConfig, checkpoint: &Path, trace: &Path) -> Result<Checkpoint> {
    let records = parse_dataset(input, cfg.k)?;
    let (ckpt, outcome) = run_training(&records, cfg)?;
    std::fs::write(checkpoint, json::to_string(&ckpt)?)?;
    std::fs::write(trace, json::to_jsonl(&outcome.trace)?)?;
    if let Some(last) = outcome.trace.last() {
        log::info!("trained {} steps, final loss {:.6}", ckpt.step, last.loss);
    }
    Ok(ckpt)
}
