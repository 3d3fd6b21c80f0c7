//! Toy training loop over a tabular policy.
//!
//! Each step runs the batch pipeline in order: take the batch's precomputed
//! signals and weights, update the calibrators with a weighted Bradley-Terry
//! step, take a gradient step on the policy logits with the updated
//! calibrators, then move the reference by EMA when enabled.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{
    listwise_grad, listwise_loss, pairwise_grad, pairwise_loss, ListwiseInstance, ObjectiveParams, WeightedPair,
};
use crate::reward::{
    calibrator_gradient, calibrator_step, shaped_reward, CalibratorPair, CalibratorParams, RewardParams, SignalBundle,
};
use crate::scalar::{softmax, Scalar};
use crate::uncertainty::{pair_weight, PairWeightParams};

use super::tabular::{ema_update, log_prob, EmaParams, TabularPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveMode {
    #[default]
    Pairwise,
    Listwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<F> {
    pub lr: F,
    pub steps: usize,
    pub seed: u64,
    pub mode: ObjectiveMode,
    pub objective: ObjectiveParams<F>,
    pub ema: EmaParams<F>,
    /// Units (pairs, or prompts in listwise mode) per step; `None` is full batch.
    pub batch_size: Option<usize>,
    /// Global L2 clip on the logit gradient.
    pub clip_norm: Option<F>,
    pub calibrator_lr: F,
    pub update_calibrators: bool,
    /// Used for the listwise top-two weight when that pair is not in the data.
    pub pair_weight: PairWeightParams<F>,
}

impl<F: Scalar> Default for TrainConfig<F> {
    fn default() -> Self {
        Self {
            lr: F::lit(0.1),
            steps: 200,
            seed: 0,
            mode: ObjectiveMode::Pairwise,
            objective: ObjectiveParams::default(),
            ema: EmaParams::default(),
            batch_size: None,
            clip_norm: Some(F::lit(10.0)),
            calibrator_lr: F::lit(1e-2),
            update_calibrators: true,
            pair_weight: PairWeightParams::default(),
        }
    }
}

impl<F: Scalar> TrainConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= F::zero()) || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate {} must be finite and >= 0", self.lr)));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if let Some(c) = self.clip_norm {
            if !(c > F::zero()) {
                return Err(Error::Config(format!("clip_norm {c} must be > 0")));
            }
        }
        if !(self.calibrator_lr >= F::zero()) {
            return Err(Error::Config("calibrator_lr must be >= 0".into()));
        }
        self.objective.validate()?;
        self.ema.validate()?;
        self.pair_weight.validate()
    }
}

/// A preference pair with its signals and weight already computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedPair<F> {
    pub prompt: String,
    pub winner: usize,
    pub loser: usize,
    pub winner_signals: SignalBundle<F>,
    pub loser_signals: SignalBundle<F>,
    pub weight: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub loss: f64,
    pub mean_weight: f64,
    pub mean_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<F> {
    pub policy: TabularPolicy<F>,
    pub reference: TabularPolicy<F>,
    pub phi: CalibratorParams<F>,
    pub trace: Vec<StepMetrics>,
}

/// Candidates of one prompt assembled from its pairs.
#[derive(Debug, Clone)]
struct ListGroup<F> {
    prompt: String,
    candidates: Vec<usize>,
    signals: Vec<SignalBundle<F>>,
    preferred: Vec<usize>,
    weight: F,
    pairs: Vec<usize>,
}

/// Groups pairs by prompt. The preferred set is the candidates that never
/// lose (or the best net-win candidate when every one loses somewhere); the
/// weight comes from the two best candidates by net wins.
fn build_groups<F: Scalar>(pairs: &[PreparedPair<F>], wp: &PairWeightParams<F>) -> Vec<ListGroup<F>> {
    let mut order: Vec<String> = Vec::new();
    let mut by_prompt: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in pairs.iter().enumerate() {
        by_prompt
            .entry(p.prompt.as_str())
            .or_insert_with(|| {
                order.push(p.prompt.clone());
                Vec::new()
            })
            .push(i);
    }
    order
        .into_iter()
        .map(|prompt| {
            let members = by_prompt[prompt.as_str()].clone();
            let mut signals: BTreeMap<usize, SignalBundle<F>> = BTreeMap::new();
            let mut net: BTreeMap<usize, i64> = BTreeMap::new();
            let mut lost: BTreeMap<usize, bool> = BTreeMap::new();
            for &i in &members {
                let p = &pairs[i];
                signals.entry(p.winner).or_insert(p.winner_signals);
                signals.entry(p.loser).or_insert(p.loser_signals);
                *net.entry(p.winner).or_default() += 1;
                *net.entry(p.loser).or_default() -= 1;
                lost.entry(p.winner).or_insert(false);
                lost.insert(p.loser, true);
            }
            let candidates: Vec<usize> = signals.keys().copied().collect();
            let mut ranked: Vec<usize> = (0..candidates.len()).collect();
            ranked.sort_by_key(|&k| (-net[&candidates[k]], k));
            let mut preferred: Vec<usize> = (0..candidates.len()).filter(|&k| !lost[&candidates[k]]).collect();
            if preferred.is_empty() {
                preferred.push(ranked[0]);
            }
            let (top, second) = (candidates[ranked[0]], candidates[ranked[1]]);
            let weight = members
                .iter()
                .map(|&i| &pairs[i])
                .find(|p| (p.winner == top && p.loser == second) || (p.winner == second && p.loser == top))
                .map(|p| p.weight)
                .unwrap_or_else(|| pair_weight(signals[&top].u, signals[&second].u, wp));
            ListGroup {
                prompt,
                signals: candidates.iter().map(|c| signals[c]).collect(),
                candidates,
                preferred,
                weight,
                pairs: members,
            }
        })
        .collect()
}

fn validate_pairs<F: Scalar>(pairs: &[PreparedPair<F>], policy: &TabularPolicy<F>) -> Result<()> {
    for (i, p) in pairs.iter().enumerate() {
        let n = policy.prompt_logits(&p.prompt)?.len();
        if p.winner >= n || p.loser >= n {
            return Err(Error::Lookup(format!("pair {i}: response index out of range for prompt {:?}", p.prompt)));
        }
        if p.winner == p.loser {
            return Err(Error::validation(format!("pairs[{i}]"), "winner equals loser"));
        }
        if !(p.weight > F::zero() && p.weight <= F::one()) {
            return Err(Error::validation(format!("pairs[{i}].weight"), format!("{} outside (0, 1]", p.weight)));
        }
    }
    Ok(())
}

fn state_dump<F: Scalar>(policy: &TabularPolicy<F>, reference: &TabularPolicy<F>, phi: &CalibratorParams<F>) -> String {
    serde_json::json!({ "policy": policy, "reference": reference, "phi": phi }).to_string()
}

fn calibrator_batch<F: Scalar>(
    pairs: &[PreparedPair<F>],
    idx: &[usize],
    policy: &TabularPolicy<F>,
    reference: &TabularPolicy<F>,
) -> Result<Vec<CalibratorPair<F>>> {
    idx.iter()
        .map(|&i| {
            let p = &pairs[i];
            let dp = log_prob(policy, &p.prompt, p.winner)? - log_prob(policy, &p.prompt, p.loser)?;
            let dr = log_prob(reference, &p.prompt, p.winner)? - log_prob(reference, &p.prompt, p.loser)?;
            Ok(CalibratorPair::from_bundles(&p.winner_signals, &p.loser_signals, dp, dr, p.weight))
        })
        .collect()
}

fn weighted_pair<F: Scalar>(
    p: &PreparedPair<F>,
    policy: &TabularPolicy<F>,
    reference: &TabularPolicy<F>,
    phi: &CalibratorParams<F>,
    rp: &RewardParams<F>,
) -> Result<WeightedPair<F>> {
    Ok(WeightedPair {
        d_logp_policy: log_prob(policy, &p.prompt, p.winner)? - log_prob(policy, &p.prompt, p.loser)?,
        d_logp_ref: log_prob(reference, &p.prompt, p.winner)? - log_prob(reference, &p.prompt, p.loser)?,
        d_reward: shaped_reward(&p.winner_signals, phi, rp) - shaped_reward(&p.loser_signals, phi, rp),
        weight: p.weight,
    })
}

/// Trains `init` on `pairs`. The initial policy also serves as the initial reference.
pub fn train<F: Scalar>(
    pairs: &[PreparedPair<F>],
    init: &TabularPolicy<F>,
    reward: &RewardParams<F>,
    phi0: &CalibratorParams<F>,
    cfg: &TrainConfig<F>,
) -> Result<TrainOutcome<F>> {
    cfg.validate()?;
    reward.validate()?;
    validate_pairs(pairs, init)?;

    let mut policy = init.clone();
    let mut reference = init.clone();
    let mut phi = *phi0;
    let mut trace = Vec::with_capacity(cfg.steps);
    let o = &cfg.objective;

    let groups = match cfg.mode {
        ObjectiveMode::Pairwise => Vec::new(),
        ObjectiveMode::Listwise => build_groups(pairs, &cfg.pair_weight),
    };
    let units = match cfg.mode {
        ObjectiveMode::Pairwise => pairs.len(),
        ObjectiveMode::Listwise => groups.len(),
    };
    if units == 0 {
        return Ok(TrainOutcome {
            policy,
            reference,
            phi,
            trace,
        });
    }
    let batch = cfg.batch_size.unwrap_or(units).min(units);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..units).collect();
    let mut cursor = units;

    for step in 0..cfg.steps {
        // full-batch runs keep dataset order; otherwise reshuffle each epoch
        if cursor >= units {
            if batch < units {
                order.shuffle(&mut rng);
            }
            cursor = 0;
        }
        let end = (cursor + batch).min(units);
        let unit_idx = order[cursor..end].to_vec();
        cursor = end;

        let pair_idx: Vec<usize> = match cfg.mode {
            ObjectiveMode::Pairwise => unit_idx.clone(),
            ObjectiveMode::Listwise => unit_idx.iter().flat_map(|&g| groups[g].pairs.iter().copied()).collect(),
        };

        if cfg.update_calibrators {
            let cal = calibrator_batch(pairs, &pair_idx, &policy, &reference)?;
            let grad = calibrator_gradient(&cal, &phi, reward, o)?;
            phi = calibrator_step(&phi, &grad, cfg.calibrator_lr).map_err(|e| match e {
                Error::Numerical { message, .. } => Error::Numerical {
                    step,
                    message,
                    state: state_dump(&policy, &reference, &phi),
                },
                other => other,
            })?;
        }

        let mut grad: BTreeMap<String, Vec<F>> = BTreeMap::new();
        let scale = F::one() / F::from_usize_lossy(unit_idx.len());
        let mut loss = F::zero();
        let mut weight_sum = F::zero();

        let mut margin_sum = F::zero();
        for &i in &pair_idx {
            let wp = weighted_pair(&pairs[i], &policy, &reference, &phi, reward)?;
            margin_sum += o.beta_temp * (wp.d_logp_policy - wp.d_logp_ref) + o.gamma_mix * wp.d_reward;
        }

        match cfg.mode {
            ObjectiveMode::Pairwise => {
                for &i in &unit_idx {
                    let p = &pairs[i];
                    let wp = weighted_pair(p, &policy, &reference, &phi, reward)?;
                    loss += pairwise_loss(&wp, o)?;
                    weight_sum += p.weight;
                    // d(logπ(w) − logπ(l))/d logit_j = [j = w] − [j = l]
                    let g = pairwise_grad(&wp, o)?.d_logp_policy * scale;
                    let n = policy.logits[&p.prompt].len();
                    let slot = grad.entry(p.prompt.clone()).or_insert_with(|| vec![F::zero(); n]);
                    slot[p.winner] += g;
                    slot[p.loser] -= g;
                }
            }
            ObjectiveMode::Listwise => {
                for &gi in &unit_idx {
                    let group = &groups[gi];
                    let lp_all = policy.log_probabilities(&group.prompt)?;
                    let lr_all = reference.log_probabilities(&group.prompt)?;
                    let inst = ListwiseInstance {
                        logp_policy: group.candidates.iter().map(|&c| lp_all[c]).collect(),
                        logp_ref: group.candidates.iter().map(|&c| lr_all[c]).collect(),
                        rewards: group.signals.iter().map(|s| shaped_reward(s, &phi, reward)).collect(),
                        preferred: group.preferred.clone(),
                        weight: group.weight,
                    };
                    loss += listwise_loss(&inst, o)?;
                    weight_sum += group.weight;
                    let gz = listwise_grad(&inst, o)?;
                    // d log π(c_i)/d logit_j = [j = c_i] − π_j
                    let probs = softmax(policy.prompt_logits(&group.prompt)?);
                    let n = probs.len();
                    let slot = grad.entry(group.prompt.clone()).or_insert_with(|| vec![F::zero(); n]);
                    let total: F = gz.iter().copied().sum();
                    for (k, &c) in group.candidates.iter().enumerate() {
                        slot[c] += gz[k] * o.beta_temp * scale;
                    }
                    for (j, &pj) in probs.iter().enumerate() {
                        slot[j] -= total * o.beta_temp * pj * scale;
                    }
                }
            }
        }
        loss *= scale;

        if !loss.is_finite() {
            return Err(Error::Numerical {
                step,
                message: format!("non-finite loss {loss}"),
                state: state_dump(&policy, &reference, &phi),
            });
        }

        let norm = grad.values().flatten().map(|&g| g * g).sum::<F>().sqrt();
        if !norm.is_finite() {
            return Err(Error::Numerical {
                step,
                message: format!("non-finite gradient norm {norm}"),
                state: state_dump(&policy, &reference, &phi),
            });
        }
        let shrink = match cfg.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => F::one(),
        };
        for (prompt, g) in &grad {
            let logits = policy.logits.get_mut(prompt).expect("prompt validated");
            for (l, &gj) in logits.iter_mut().zip(g) {
                *l -= cfg.lr * shrink * gj;
            }
        }
        if !policy.all_finite() {
            return Err(Error::Numerical {
                step,
                message: "non-finite policy logits after update".into(),
                state: state_dump(&policy, &reference, &phi),
            });
        }

        reference = ema_update(&reference, &policy, &cfg.ema)?;

        trace.push(StepMetrics {
            step,
            loss: loss.to_f64_lossy(),
            mean_weight: (weight_sum * scale).to_f64_lossy(),
            mean_margin: if pair_idx.is_empty() {
                0.0
            } else {
                (margin_sum / F::from_usize_lossy(pair_idx.len())).to_f64_lossy()
            },
        });
    }

    Ok(TrainOutcome {
        policy,
        reference,
        phi,
        trace,
    })
}
