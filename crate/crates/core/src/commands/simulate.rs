//! Judge-noise robustness on a synthetic Bradley-Terry world.
//!
//! Each prompt has candidates with standard-normal latent utilities. A
//! candidate close in utility to a rival is hard: its generated graphs are
//! fragile (dropped supports, cycles, contradictions, hesitant node
//! probabilities), so its measured uncertainty is high. Clean labels follow the
//! utility order; corrupted labels flip with probability driven by the pair's
//! measured uncertainty. Plain DPO (γ = 0, w ≡ 1) and the weighted, shaped
//! objective are trained per flip rate and compared by win-rate retention.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataio::{json, Candidate, RunConfig};
use crate::error::Result;
use crate::objective::ObjectiveParams;
use crate::policy::{train, EmaParams, PreparedPair, ReferenceMode, TabularPolicy, TrainConfig};
use crate::reward::{CalibratorParams, SemanticSignals};
use crate::scalar::sigmoid;
use crate::stats::flip_probabilities;
use crate::topology::{Edge, Node, NodeKind, ReasoningGraph, Relation};
use crate::uncertainty::pair_weight;

use super::score::{score_candidate, CandidateScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    TurDpo,
    Dpo,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::TurDpo => "tur-dpo",
            Method::Dpo => "dpo",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionRow {
    pub eps: f64,
    pub method: Method,
    pub mean_win_rate: f64,
    pub mean_retention: f64,
    pub std_error: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionReport {
    pub prompts: usize,
    pub candidates: usize,
    pub rows: Vec<RetentionRow>,
}

impl RetentionReport {
    pub fn row(&self, method: Method, eps: f64) -> Option<&RetentionRow> {
        self.rows.iter().find(|r| r.method == method && r.eps == eps)
    }
}

fn node(id: &str, text: &str, kind: NodeKind, p_v: f64) -> Node<f64> {
    Node {
        id: id.into(),
        text: text.into(),
        kind,
        p_v,
    }
}

fn edge(src: &str, dst: &str, relation: Relation, signal: f64) -> Edge<f64> {
    Edge {
        src: src.into(),
        dst: dst.into(),
        relation,
        contradiction_signal: signal,
    }
}

/// One elicited graph for a candidate of difficulty `h ∈ (0, 1]`.
pub fn synthetic_graph(h: f64, rng: &mut impl Rng) -> ReasoningGraph<f64> {
    let mut p = || {
        let jitter: f64 = StandardNormal.sample(rng);
        (1.0 - 0.5 * h + 0.15 * h * jitter).clamp(0.01, 0.99)
    };
    let nodes = vec![
        node("p1", "first premise", NodeKind::Premise, p()),
        node("p2", "second premise", NodeKind::Premise, p()),
        node("m", "intermediate step", NodeKind::Intermediate, p()),
        node("c", "final answer", NodeKind::Conclusion, p()),
    ];
    let mut edges = vec![edge("p1", "m", Relation::Support, 0.0)];
    if !rng.random_bool(0.8 * h) {
        edges.push(edge("p2", "m", Relation::Support, 0.0));
    }
    edges.push(edge("m", "c", Relation::Support, 0.0));
    if rng.random_bool(0.8 * h) {
        edges.push(edge("c", "m", Relation::Support, 0.0));
    }
    if rng.random_bool(0.8 * h) {
        edges.push(edge("p2", "c", Relation::Contradict, h * rng.random_range(0.5..=1.0)));
    }
    ReasoningGraph::new(nodes, edges)
}

/// Sampled world for one seed: utilities and scored candidates per prompt.
struct World {
    utilities: Vec<Vec<f64>>,
    scores: Vec<Vec<CandidateScore>>,
    /// `(prompt, winner, loser)` under the clean utility order.
    pairs: Vec<(usize, usize, usize)>,
    /// Per-pair uniform variates shared by every flip rate.
    flip_draws: Vec<f64>,
}

fn sample_world(cfg: &RunConfig, seed: u64) -> Result<World> {
    let s = &cfg.simulation;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut utilities = Vec::with_capacity(s.prompts);
    let mut scores = Vec::with_capacity(s.prompts);
    let mut pairs = Vec::new();
    for p in 0..s.prompts {
        let u: Vec<f64> = (0..s.candidates).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut row = Vec::with_capacity(s.candidates);
        for (c, &uc) in u.iter().enumerate() {
            let nearest = u
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != c)
                .map(|(_, &uj)| (uc - uj).abs())
                .fold(f64::INFINITY, f64::min);
            let h = 2.0 * sigmoid(-nearest / s.difficulty_scale);
            let mut signal = |offset: f64| {
                let n: f64 = StandardNormal.sample(&mut rng);
                sigmoid(offset + s.semantic_signal * uc + s.semantic_noise * n)
            };
            let signals = SemanticSignals {
                q_fact: signal(0.0),
                q_task: signal(0.0),
                q_hall: 1.0 - signal(1.0),
            };
            let graphs = (0..cfg.k).map(|_| synthetic_graph(h, &mut rng)).collect();
            let candidate = Candidate {
                response_id: format!("r{c}"),
                signals,
                graphs,
            };
            row.push(score_candidate(&candidate, cfg)?);
        }
        for i in 0..s.candidates {
            for j in i + 1..s.candidates {
                let (w, l) = if u[i] >= u[j] { (i, j) } else { (j, i) };
                pairs.push((p, w, l));
            }
        }
        utilities.push(u);
        scores.push(row);
    }
    let flip_draws = (0..pairs.len()).map(|_| rng.random()).collect();
    Ok(World {
        utilities,
        scores,
        pairs,
        flip_draws,
    })
}

/// `E_{y~π, y'~π_ref}[1(u_y > u_y') + ½·1(y = y')]`, averaged over prompts.
pub fn win_rate(policy: &TabularPolicy<f64>, reference: &TabularPolicy<f64>, utilities: &[Vec<f64>]) -> Result<f64> {
    let mut total = 0.0;
    for (p, u) in utilities.iter().enumerate() {
        let key = prompt_key(p);
        let pi = policy.probabilities(&key)?;
        let pr = reference.probabilities(&key)?;
        for (y, &py) in pi.iter().enumerate() {
            for (z, &pz) in pr.iter().enumerate() {
                let s = if y == z {
                    0.5
                } else if u[y] > u[z] {
                    1.0
                } else {
                    0.0
                };
                total += py * pz * s;
            }
        }
    }
    Ok(total / utilities.len() as f64)
}

fn prompt_key(p: usize) -> String {
    format!("p{p:03}")
}

fn trained_win_rate(
    world: &World,
    flips: &[bool],
    method: Method,
    cfg: &RunConfig,
    init: &TabularPolicy<f64>,
) -> Result<f64> {
    let pw = cfg.pair_weight();
    let pairs: Vec<PreparedPair<f64>> = world
        .pairs
        .iter()
        .zip(flips)
        .map(|(&(p, w, l), &flip)| {
            let (w, l) = if flip { (l, w) } else { (w, l) };
            let (sw, sl) = (&world.scores[p][w], &world.scores[p][l]);
            PreparedPair {
                prompt: prompt_key(p),
                winner: w,
                loser: l,
                winner_signals: sw.bundle(),
                loser_signals: sl.bundle(),
                weight: match method {
                    Method::TurDpo => pair_weight(sw.u, sl.u, &pw),
                    Method::Dpo => 1.0,
                },
            }
        })
        .collect();
    let base = cfg.train();
    let tc = match method {
        Method::TurDpo => TrainConfig {
            lr: cfg.simulation.train_lr,
            steps: cfg.simulation.train_steps,
            ..base
        },
        Method::Dpo => TrainConfig {
            lr: cfg.simulation.train_lr,
            steps: cfg.simulation.train_steps,
            objective: ObjectiveParams {
                gamma_mix: 0.0,
                ..base.objective
            },
            ema: EmaParams {
                mode: ReferenceMode::Fixed,
                ..base.ema
            },
            update_calibrators: false,
            ..base
        },
    };
    let out = train(&pairs, init, &cfg.reward(), &CalibratorParams::default(), &tc)?;
    win_rate(&out.policy, init, &world.utilities)
}

/// Sweeps the configured flip rates and seeds. Flip rate 0 is always run as the baseline.
pub fn simulate_noise(cfg: &RunConfig) -> Result<RetentionReport> {
    cfg.validate()?;
    let s = &cfg.simulation;
    let mut grid = s.eps_grid.clone();
    if !grid.contains(&0.0) {
        grid.insert(0, 0.0);
    }
    let methods = [Method::TurDpo, Method::Dpo];
    let keys: Vec<String> = (0..s.prompts).map(prompt_key).collect();
    let init = TabularPolicy::uniform(keys.iter().map(|k| (k.as_str(), s.candidates)));
    // [method][eps][seed]
    let mut wr = vec![vec![Vec::with_capacity(s.seeds); grid.len()]; methods.len()];
    for seed in 0..s.seeds {
        let world = sample_world(cfg, cfg.seed.wrapping_add(seed as u64))?;
        let pair_u: Vec<f64> = world
            .pairs
            .iter()
            .map(|&(p, w, l)| 0.5 * (world.scores[p][w].u + world.scores[p][l].u))
            .collect();
        for (ei, &eps) in grid.iter().enumerate() {
            let probs = flip_probabilities(eps, &pair_u, s.mode);
            let flips: Vec<bool> = world.flip_draws.iter().zip(&probs).map(|(&v, &q)| v < q).collect();
            for (mi, &m) in methods.iter().enumerate() {
                wr[mi][ei].push(trained_win_rate(&world, &flips, m, cfg, &init)?);
            }
        }
        log::debug!("simulate-noise seed {seed} done");
    }
    let base = grid.iter().position(|&e| e == 0.0).expect("baseline present");
    let mut rows = Vec::new();
    for (ei, &eps) in grid.iter().enumerate() {
        for (mi, &method) in methods.iter().enumerate() {
            let ret: Vec<f64> = wr[mi][ei].iter().zip(&wr[mi][base]).map(|(a, b)| a / b).collect();
            let n = ret.len() as f64;
            let mean = ret.iter().sum::<f64>() / n;
            let var = if ret.len() > 1 { ret.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            rows.push(RetentionRow {
                eps,
                method,
                mean_win_rate: wr[mi][ei].iter().sum::<f64>() / n,
                mean_retention: mean,
                std_error: (var / n).sqrt(),
                seeds: ret.len(),
            });
        }
    }
    Ok(RetentionReport {
        prompts: s.prompts,
        candidates: s.candidates,
        rows,
    })
}

pub fn cmd_simulate_noise(cfg: &RunConfig, output: &std::path::Path) -> Result<RetentionReport> {
    let report = simulate_noise(cfg)?;
    std::fs::write(output, json::to_string(&report)?)?;
    Ok(report)
}
