use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataio::{json, parse_dataset, Candidate, PairRecord, RunConfig};
use crate::error::Result;
use crate::reward::{semantic_score, shaped_reward, CalibratorParams, SignalBundle};
use crate::topology::score_graph;
use crate::uncertainty::{pair_weight, response_uncertainty};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub response_id: String,
    pub s_sem: f64,
    pub s_topo: f64,
    pub u_epi: f64,
    pub u_ale: f64,
    pub u: f64,
}

impl CandidateScore {
    pub fn bundle(&self) -> SignalBundle<f64> {
        SignalBundle {
            s_sem: self.s_sem,
            s_topo: self.s_topo,
            u: self.u,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub prompt_id: String,
    pub winner: CandidateScore,
    pub loser: CandidateScore,
    pub weight: f64,
    /// Winner-minus-loser shaped reward under identity calibrators.
    pub delta_reward: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_confidence: Option<f64>,
}

/// Scores one candidate. The first graph sample supplies the topology score.
pub fn score_candidate(c: &Candidate, cfg: &RunConfig) -> Result<CandidateScore> {
    let u = response_uncertainty(&c.graphs, &cfg.topology(), &cfg.uncertainty())?;
    Ok(CandidateScore {
        response_id: c.response_id.clone(),
        s_sem: semantic_score(&c.signals, &cfg.semantic())?,
        s_topo: score_graph(&c.graphs[0], &cfg.topology())?,
        u_epi: u.epistemic,
        u_ale: u.aleatoric,
        u: u.total,
    })
}

pub fn score_pair(r: &PairRecord, cfg: &RunConfig) -> Result<ScoredPair> {
    let winner = score_candidate(&r.winner, cfg)?;
    let loser = score_candidate(&r.loser, cfg)?;
    let phi = CalibratorParams::default();
    let reward = cfg.reward();
    Ok(ScoredPair {
        prompt_id: r.prompt_id.clone(),
        weight: pair_weight(winner.u, loser.u, &cfg.pair_weight()),
        delta_reward: shaped_reward(&winner.bundle(), &phi, &reward) - shaped_reward(&loser.bundle(), &phi, &reward),
        winner,
        loser,
        judge_confidence: r.judge_confidence,
    })
}

pub fn score_records(records: &[PairRecord], cfg: &RunConfig) -> Result<Vec<ScoredPair>> {
    records.iter().map(|r| score_pair(r, cfg)).collect()
}

/// Scores a dataset file and writes one JSON line per pair.
pub fn cmd_score(input: &Path, cfg: &RunConfig, output: &Path) -> Result<Vec<ScoredPair>> {
    let records = parse_dataset(input, cfg.k)?;
    let scored = score_records(&records, cfg)?;
    std::fs::write(output, json::to_jsonl(&scored)?)?;
    log::info!("scored {} pairs into {}", scored.len(), output.display());
    Ok(scored)
}
