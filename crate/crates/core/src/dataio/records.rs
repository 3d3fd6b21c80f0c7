//! Preference-pair records in JSON Lines.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::SemanticSignals;
use crate::topology::{extract_features, ReasoningGraph};

/// One response with its verifier signals and re-elicited graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub response_id: String,
    pub signals: SemanticSignals<f64>,
    pub graphs: Vec<ReasoningGraph<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub prompt_id: String,
    pub winner: Candidate,
    pub loser: Candidate,
    /// Optional judge confidence in `[0, 1]`, carried through for stratified analysis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub judge_confidence: Option<f64>,
}

impl Candidate {
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.response_id.is_empty() {
            return Err(Error::validation("response_id", "empty"));
        }
        self.signals.validate().map_err(|e| e.within("signals"))?;
        if self.graphs.len() != k {
            return Err(Error::validation(
                "graphs",
                format!("expected {k} graph samples, found {}", self.graphs.len()),
            ));
        }
        for (i, g) in self.graphs.iter().enumerate() {
            let at = format!("graphs[{i}]");
            g.validate().map_err(|e| e.within(&at))?;
            g.validate_size().map_err(|e| e.within(&at))?;
            extract_features(g).map_err(|e| match e {
                Error::Validation { .. } => e.within(&at),
                other => Error::validation(at.clone(), other.to_string()),
            })?;
        }
        Ok(())
    }
}

impl PairRecord {
    pub fn validate(&self, k: usize) -> Result<()> {
        if self.prompt_id.is_empty() {
            return Err(Error::validation("prompt_id", "empty"));
        }
        self.winner.validate(k).map_err(|e| e.within("winner"))?;
        self.loser.validate(k).map_err(|e| e.within("loser"))?;
        if self.winner.response_id == self.loser.response_id {
            return Err(Error::validation(
                "loser.response_id",
                format!("winner and loser are the same response {:?}", self.winner.response_id),
            ));
        }
        if let Some(c) = self.judge_confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::validation("judge_confidence", format!("{c} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Parses and validates JSON Lines text. Blank lines are skipped.
pub fn parse_dataset_str(text: &str, k: usize) -> Result<Vec<PairRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PairRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: n,
            message: e.to_string(),
        })?;
        rec.validate(k).map_err(|e| e.at_line(n))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn parse_dataset(path: &Path, k: usize) -> Result<Vec<PairRecord>> {
    parse_dataset_str(&std::fs::read_to_string(path)?, k)
}

pub fn serialize_dataset(records: &[PairRecord]) -> Result<String> {
    super::json::to_jsonl(records)
}
