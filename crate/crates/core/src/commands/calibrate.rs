use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{brier, ece, fit_temperature, nll, reliability_bins, ReliabilityBin};
use crate::dataio::{json, RunConfig};
use crate::error::{Error, Result};

/// One binary prediction given either as a logit or as a probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prob: Option<f64>,
    pub label: bool,
}

impl Prediction {
    fn resolve(&self) -> Result<(f64, f64)> {
        match (self.logit, self.prob) {
            (Some(l), None) if l.is_finite() => Ok((l, crate::scalar::sigmoid(l))),
            (None, Some(p)) if (0.0..=1.0).contains(&p) => Ok((p.ln() - (-p).ln_1p(), p)),
            (Some(_), Some(_)) | (None, None) => Err(Error::validation("", "give exactly one of logit or prob")),
            (Some(l), None) => Err(Error::validation("logit", format!("{l} is not finite"))),
            (None, Some(p)) => Err(Error::validation("prob", format!("{p} outside [0, 1]"))),
        }
    }
}

pub fn parse_predictions(text: &str) -> Result<Vec<Prediction>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        p.resolve().map_err(|e| e.at_line(i + 1))?;
        out.push(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateReport {
    pub count: usize,
    pub ece: f64,
    pub brier: f64,
    pub bins: Vec<ReliabilityBin<f64>>,
    /// Absent when the fit is impossible: one label class, or saturated probabilities.
    pub temperature: Option<f64>,
    pub nll_before: Option<f64>,
    pub nll_after: Option<f64>,
}

pub fn calibrate_predictions(preds: &[Prediction], cfg: &RunConfig) -> Result<CalibrateReport> {
    let bins_cfg = cfg.calibration()?;
    let resolved: Vec<(f64, f64)> = preds.iter().map(Prediction::resolve).collect::<Result<_>>()?;
    let logits: Vec<f64> = resolved.iter().map(|r| r.0).collect();
    let probs: Vec<f64> = resolved.iter().map(|r| r.1).collect();
    let labels: Vec<bool> = preds.iter().map(|p| p.label).collect();
    let (temperature, nll_before, nll_after) = if logits.iter().all(|l| l.is_finite()) {
        match fit_temperature(&logits, &labels) {
            Ok(s) => (
                Some(s.temperature),
                Some(nll(&logits, &labels, 1.0)),
                Some(nll(&logits, &labels, s.temperature)),
            ),
            Err(Error::DegenerateFit(msg)) => {
                log::warn!("skipping temperature fit: {msg}");
                (None, None, None)
            }
            Err(e) => return Err(e),
        }
    } else {
        log::warn!("skipping temperature fit: saturated probabilities have infinite logits");
        (None, None, None)
    };
    Ok(CalibrateReport {
        count: preds.len(),
        ece: ece(&probs, &labels, &bins_cfg)?,
        brier: brier(&probs, &labels)?,
        bins: reliability_bins(&probs, &labels, &bins_cfg)?,
        temperature,
        nll_before,
        nll_after,
    })
}

pub fn cmd_calibrate(input: &Path, cfg: &RunConfig, output: &Path) -> Result<CalibrateReport> {
    let preds = parse_predictions(&std::fs::read_to_string(input)?)?;
    let report = calibrate_predictions(&preds, cfg)?;
    std::fs::write(output, json::to_string(&report)?)?;
    Ok(report)
}
