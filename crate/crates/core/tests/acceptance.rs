//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use turdpo::calibration::{
    brier, ece, ece_from_bins, fit_temperature, reliability_bins, CalibrationConfig,
};
use turdpo::commands::{prepare_training, run_gradcheck, simulate_noise, GradcheckOptions, Method};
use turdpo::dataio::{parse_dataset, RunConfig};
use turdpo::objective::{
    listwise_loss, pairwise_loss, ListwiseInstance, ObjectiveParams, WeightedPair,
};
use turdpo::policy::{
    gibbs_policy, total_variation, train, EmaParams, PreparedPair, ReferenceMode, TabularPolicy,
    TrainConfig,
};
use turdpo::reward::{
    calibrator_gradient, calibrator_step, shaped_reward, CalibratorPair, CalibratorParams,
    RewardParams, SignalBundle,
};
use turdpo::stats::{
    benjamini_hochberg, bias_bound_experiment, paired_bootstrap, BiasWorld, BootstrapConfig,
    DependenceMode, NoiseSimConfig,
};
use turdpo::topology::{
    is_acyclic, sanitize_graph, sanitize_graph_with_report, Edge, Node, NodeKind, ReasoningGraph,
    Relation,
};
use turdpo::uncertainty::{
    aleatoric_uncertainty, epistemic_uncertainty, pair_weight, PairWeightParams,
};

const GRADCHECK_TOL: f64 = 1e-6;
const GRADCHECK_INSTANCES: usize = 1000;
const GRADCHECK_BUDGET: Duration = Duration::from_secs(10);
const GIBBS_TV: f64 = 1e-3;
const GIBBS_STEPS: usize = 5000;
const GIBBS_BUDGET: Duration = Duration::from_secs(30);
const DPO_TOL: f64 = 1e-10;
const LISTWISE_TOL: f64 = 1e-12;
const LISTWISE_INSTANCES: usize = 10_000;
const LN2_TOL: f64 = 1e-12;
const BIN_TOL: f64 = 1e-12;
const TEMPERATURE_TOL: f64 = 0.05;
const TEMPERATURE_SAMPLES: usize = 10_000;
const NOISE_SEEDS: usize = 20;
const NOISE_BUDGET: Duration = Duration::from_secs(300);
const BIAS_SEEDS: usize = 200;
const BIAS_BUDGET: Duration = Duration::from_secs(120);
const BH_Q: f64 = 0.05;
const KS_DATASETS: usize = 500;
const KS_ITEMS: usize = 2000;
const KS_REPLICATES: usize = 1000;
const KS_MAX: f64 = 0.05;
const PROBES: usize = 10_000;
const ADVERSARIAL_STEPS: usize = 10_000;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn bundle(s_sem: f64, s_topo: f64, u: f64) -> SignalBundle<f64> {
    SignalBundle { s_sem, s_topo, u }
}

fn random_bundle(rng: &mut impl Rng) -> SignalBundle<f64> {
    bundle(rng.random_range(0.0..3.0), rng.random_range(-2.0..1.0), rng.random_range(0.0..2.0))
}

fn gradient_fidelity() -> Outcome {
    let start = Instant::now();
    let opts = GradcheckOptions { instances: GRADCHECK_INSTANCES, ..GradcheckOptions::default() };
    let report = match run_gradcheck(&RunConfig::default(), &opts) {
        Ok(r) => r,
        Err(e) => return check(false, format!("gradcheck errored: {e}")),
    };
    let elapsed = start.elapsed();
    let enough = report.checks.iter().all(|c| c.instances >= GRADCHECK_INSTANCES);
    let ops: Vec<String> = report
        .checks
        .iter()
        .map(|c| format!("{} {:.2e}", c.operation, c.max_rel_error))
        .collect();
    check(
        enough && report.max_rel_error <= GRADCHECK_TOL && elapsed <= GRADCHECK_BUDGET,
        format!(
            "max rel err {:.3e} <= {GRADCHECK_TOL:e} [{}], {} instances each, {:.2?}",
            report.max_rel_error,
            ops.join(", "),
            GRADCHECK_INSTANCES,
            elapsed
        ),
    )
}

/// Fits every ordered pair of responses with the Bradley-Terry label
/// probability that the tilted optimum would assign, so the weighted loss is
/// minimized exactly at the Gibbs policy.
fn gibbs_convergence() -> Outcome {
    let start = Instant::now();
    let o = ObjectiveParams::<f64>::default();
    let rp = RewardParams::default();
    let phi = CalibratorParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pairs = Vec::new();
    let mut rewards = BTreeMap::new();
    let shape = [("x", 5usize)];
    for (prompt, n) in shape {
        let sig: Vec<_> = (0..n).map(|_| random_bundle(&mut rng)).collect();
        let r: Vec<f64> = sig.iter().map(|s| shaped_reward(s, &phi, &rp)).collect();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let d = r[i] - r[j];
                    let target = o.beta_temp * o.beta_temp * o.gamma_mix * d + o.gamma_mix * d;
                    pairs.push(PreparedPair {
                        prompt: prompt.into(),
                        winner: i,
                        loser: j,
                        winner_signals: sig[i],
                        loser_signals: sig[j],
                        weight: 1.0 / (1.0 + (-target).exp()),
                    });
                }
            }
        }
        rewards.insert(prompt.to_string(), r);
    }
    let init = TabularPolicy::uniform(shape);
    let cfg = TrainConfig {
        steps: GIBBS_STEPS,
        lr: 1.0,
        update_calibrators: false,
        ema: EmaParams { rho: 0.995, mode: ReferenceMode::Fixed },
        ..TrainConfig::default()
    };
    let result = train(&pairs, &init, &rp, &phi, &cfg)
        .and_then(|out| Ok((out, gibbs_policy(&init, &rewards, &o)?)))
        .and_then(|(out, star)| total_variation(&out.policy, &star));
    let elapsed = start.elapsed();
    match result {
        Ok(tv) => check(
            tv <= GIBBS_TV && elapsed <= GIBBS_BUDGET,
            format!("max TV {tv:.3e} <= {GIBBS_TV:e} after {GIBBS_STEPS} steps, {elapsed:.2?}"),
        ),
        Err(e) => check(false, format!("training errored: {e}")),
    }
}

/// Plain DPO on tabular logits written out directly: full-batch mean loss,
/// hand-derived gradient, global-norm clipping, fixed reference.
fn vanilla_dpo(pairs: &[(String, usize, usize)], init: &TabularPolicy<f64>, beta: f64, lr: f64, steps: usize, clip: Option<f64>) -> (Vec<f64>, BTreeMap<String, Vec<f64>>) {
    let reference = init.logits.clone();
    let mut theta = init.logits.clone();
    let n = pairs.len() as f64;
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut grad: BTreeMap<String, Vec<f64>> =
            theta.iter().map(|(k, v)| (k.clone(), vec![0.0; v.len()])).collect();
        let mut loss = 0.0;
        for (prompt, w, l) in pairs {
            let t = &theta[prompt];
            let r = &reference[prompt];
            // log-softmax differences reduce to logit differences
            let x = beta * ((t[*w] - t[*l]) - (r[*w] - r[*l]));
            loss += (1.0 + (-x).exp()).ln();
            let g = -beta / (1.0 + x.exp()) / n;
            let slot = grad.get_mut(prompt).unwrap();
            slot[*w] += g;
            slot[*l] -= g;
        }
        losses.push(loss / n);
        let norm = grad.values().flatten().map(|g| g * g).sum::<f64>().sqrt();
        let shrink = match clip {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        for (prompt, g) in &grad {
            for (t, gj) in theta.get_mut(prompt).unwrap().iter_mut().zip(g) {
                *t -= lr * shrink * gj;
            }
        }
    }
    (losses, theta)
}

fn dpo_reduction() -> Outcome {
    let cfg = RunConfig {
        gamma: 0.0,
        w_min: 1.0,
        reference: ReferenceMode::Fixed,
        lr: 0.5,
        steps: 100,
        ..RunConfig::default()
    };
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    let mut run = |pairs: &[PreparedPair<f64>], init: &TabularPolicy<f64>, tc: &TrainConfig<f64>| -> Result<(), String> {
        if pairs.iter().any(|p| p.weight != 1.0) {
            return Err("pair weights differ from 1".into());
        }
        let out = train(pairs, init, &cfg.reward(), &CalibratorParams::default(), tc).map_err(|e| e.to_string())?;
        let triples: Vec<_> = pairs.iter().map(|p| (p.prompt.clone(), p.winner, p.loser)).collect();
        let (losses, theta) = vanilla_dpo(&triples, init, tc.objective.beta_temp, tc.lr, tc.steps, tc.clip_norm);
        for (m, l) in out.trace.iter().zip(&losses) {
            worst = worst.max((m.loss - l).abs());
            compared += 1;
        }
        for (prompt, t) in &theta {
            for (a, b) in out.policy.logits[prompt].iter().zip(t) {
                worst = worst.max((a - b).abs());
            }
        }
        Ok(())
    };

    let records = match parse_dataset(&fixture("pairs3.jsonl"), cfg.k) {
        Ok(r) => r,
        Err(e) => return check(false, format!("fixture: {e}")),
    };
    let data = match prepare_training(&records, &cfg) {
        Ok(d) => d,
        Err(e) => return check(false, format!("prepare: {e}")),
    };
    if let Err(e) = run(&data.pairs, &data.initial_policy(), &cfg.train()) {
        return check(false, e);
    }

    // random tabular problem with a non-uniform start and active clipping
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut init = TabularPolicy::uniform([("a", 4usize), ("b", 3), ("c", 6)]);
    for v in init.logits.values_mut() {
        for x in v.iter_mut() {
            *x = rng.random_range(-1.0..1.0);
        }
    }
    let mut pairs = Vec::new();
    for _ in 0..60 {
        let (prompt, n) = [("a", 4usize), ("b", 3), ("c", 6)][rng.random_range(0..3)];
        let w = rng.random_range(0..n);
        let l = (w + rng.random_range(1..n)) % n;
        pairs.push(PreparedPair {
            prompt: prompt.into(),
            winner: w,
            loser: l,
            winner_signals: random_bundle(&mut rng),
            loser_signals: random_bundle(&mut rng),
            weight: 1.0,
        });
    }
    let tc = TrainConfig { lr: 3.0, steps: 300, clip_norm: Some(0.5), ..cfg.train() };
    if let Err(e) = run(&pairs, &init, &tc) {
        return check(false, e);
    }
    check(
        worst <= DPO_TOL && compared > 0,
        format!("max |loss or logit diff| {worst:.3e} <= {DPO_TOL:e} over {compared} step losses"),
    )
}

fn listwise_pairwise_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..LISTWISE_INSTANCES {
        let o = ObjectiveParams {
            beta_temp: rng.random_range(0.5..4.0),
            gamma_mix: rng.random_range(0.0..2.0),
        };
        let lp: [f64; 2] = [rng.random_range(-5.0..0.0), rng.random_range(-5.0..0.0)];
        let lr: [f64; 2] = [rng.random_range(-5.0..0.0), rng.random_range(-5.0..0.0)];
        let r: [f64; 2] = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let weight = rng.random_range(0.05..1.0);
        let inst = ListwiseInstance {
            logp_policy: lp.to_vec(),
            logp_ref: lr.to_vec(),
            rewards: r.to_vec(),
            preferred: vec![0],
            weight,
        };
        let pair = WeightedPair {
            d_logp_policy: lp[0] - lp[1],
            d_logp_ref: lr[0] - lr[1],
            d_reward: r[0] - r[1],
            weight,
        };
        match (listwise_loss(&inst, &o), pairwise_loss(&pair, &o)) {
            (Ok(a), Ok(b)) => worst = worst.max((a - b).abs()),
            _ => return check(false, "loss evaluation errored"),
        }
    }
    check(
        worst <= LISTWISE_TOL,
        format!("max |listwise - pairwise| {worst:.3e} <= {LISTWISE_TOL:e} over {LISTWISE_INSTANCES} instances"),
    )
}

fn weight_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations = 0usize;
    for _ in 0..PROBES {
        let p = PairWeightParams { tau_w: rng.random_range(0.5..2.0), w_min: rng.random_range(0.0..1.0) };
        let mut u: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..50.0)).collect();
        u.push(0.0);
        u.push(1e12);
        u.sort_by(f64::total_cmp);
        let w: Vec<f64> = u.iter().map(|&x| pair_weight(x, x, &p)).collect();
        if w.iter().any(|&x| !(x >= p.w_min && x <= 1.0)) || w.windows(2).any(|ab| ab[1] > ab[0]) {
            violations += 1;
        }
    }
    let w1 = pair_weight(1.0, 1.0, &PairWeightParams { tau_w: 1.2, w_min: 0.05 });
    check(
        violations == 0 && w1 == 0.6,
        format!("{violations} range/monotonicity violations in {PROBES} sweeps; w(u=1) = {w1}"),
    )
}

fn node(id: &str, kind: NodeKind, p_v: f64) -> Node<f64> {
    Node { id: id.into(), text: format!("claim {id}"), kind, p_v }
}

fn support(src: &str, dst: &str) -> Edge<f64> {
    Edge { src: src.into(), dst: dst.into(), relation: Relation::Support, contradiction_signal: 0.0 }
}

fn uncertainty_degeneracies() -> Outcome {
    let topo = RunConfig::default().topology();
    let g = ReasoningGraph::new(
        vec![node("a", NodeKind::Premise, 0.8), node("b", NodeKind::Intermediate, 0.6), node("c", NodeKind::Conclusion, 0.7)],
        vec![support("a", "b"), support("b", "c"), support("a", "c")],
    );
    let u_epi = epistemic_uncertainty(&[g.clone(), g.clone(), g.clone()], &topo);
    let det = ReasoningGraph::new(
        vec![node("a", NodeKind::Premise, 1.0), node("b", NodeKind::Intermediate, 0.0), node("c", NodeKind::Conclusion, 1.0)],
        vec![support("a", "b"), support("b", "c")],
    );
    let u_det = aleatoric_uncertainty(&det, 0.0);
    let half = ReasoningGraph::new(vec![node("x", NodeKind::Conclusion, 0.5)], vec![]);
    let u_half = aleatoric_uncertainty(&half, 0.05);
    match (u_epi, u_det, u_half) {
        (Ok(e), Ok(d), Ok(h)) => check(
            e == 0.0 && d == 0.0 && (h - std::f64::consts::LN_2).abs() <= LN2_TOL,
            format!("u_epi(identical) = {e}, u_ale(deterministic, tau 0) = {d}, u_ale(p = 1/2) - ln 2 = {:.1e}", h - std::f64::consts::LN_2),
        ),
        _ => check(false, "uncertainty evaluation errored"),
    }
}

/// Minimum number of non-loop edges whose removal leaves a DAG, by trying
/// every vertex ordering and counting backward edges.
fn brute_force_fas(n: usize, edges: &[(usize, usize)]) -> usize {
    fn permutations(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permutations(items, k + 1, out);
            items.swap(k, i);
        }
    }
    let mut perms = Vec::new();
    permutations(&mut (0..n).collect(), 0, &mut perms);
    perms
        .iter()
        .map(|order| {
            let mut pos = vec![0; n];
            for (i, &v) in order.iter().enumerate() {
                pos[v] = i;
            }
            edges.iter().filter(|&&(a, b)| a != b && pos[a] > pos[b]).count()
        })
        .min()
        .unwrap_or(0)
}

fn graph_from_edges(n: usize, edges: &[(usize, usize)]) -> ReasoningGraph<f64> {
    let nodes = (0..n).map(|i| node(&format!("v{i}"), NodeKind::Intermediate, 0.5)).collect();
    let edges = edges.iter().map(|&(a, b)| support(&format!("v{a}"), &format!("v{b}"))).collect();
    ReasoningGraph::new(nodes, edges)
}

fn sanitizer_optimality() -> Outcome {
    let mut cases: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
    // every labeled digraph with self-loops allowed on up to three nodes,
    // every loop-free labeled digraph on four
    for n in 1..=4usize {
        let slots: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| n <= 3 || a != b)
            .collect();
        for mask in 0u32..(1 << slots.len()) {
            cases.push((n, slots.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e).collect()));
        }
    }
    let exhaustive = cases.len();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..PROBES {
        let density = rng.random_range(0.1..0.9);
        let edges = (0..5).flat_map(|a| (0..5).map(move |b| (a, b))).filter(|_| rng.random_bool(density)).collect();
        cases.push((5, edges));
    }
    let mut failures = Vec::new();
    for (n, edges) in &cases {
        let g = graph_from_edges(*n, edges);
        let outcome = sanitize_graph_with_report(&g).and_then(|(s, report)| {
            let again = sanitize_graph(&s)?;
            Ok((is_acyclic(&s)?, report.cut_edges.len(), again == s))
        });
        match outcome {
            Ok((acyclic, cut, idempotent)) => {
                let best = brute_force_fas(*n, edges);
                if !acyclic || cut != best || !idempotent {
                    failures.push(format!("n={n} edges={edges:?}: cut {cut} vs {best}, acyclic {acyclic}, idempotent {idempotent}"));
                }
            }
            Err(e) => failures.push(format!("n={n} edges={edges:?}: {e}")),
        }
    }
    check(
        failures.is_empty(),
        match failures.first() {
            None => format!("{exhaustive} exhaustive + {PROBES} random graphs: minimum cut, acyclic, idempotent"),
            Some(f) => format!("{} failures, first: {f}", failures.len()),
        },
    )
}

fn calibration_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut notes = Vec::new();
    let mut ok = true;

    let cfg = CalibrationConfig::equal_width(10).unwrap();
    let det_labels: Vec<bool> = (0..100).map(|_| rng.random_bool(0.5)).collect();
    let det_probs: Vec<f64> = det_labels.iter().map(|&y| if y { 1.0 } else { 0.0 }).collect();
    match ece(&det_probs, &det_labels, &cfg) {
        Ok(e) => {
            ok &= e == 0.0;
            notes.push(format!("deterministic ECE {e}"));
        }
        Err(e) => return check(false, format!("ece errored: {e}")),
    }

    // calibrated predictions: within each bin the label rate equals the confidence
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for b in 0..10 {
        let p = (b as f64 + 0.5) / 10.0;
        for i in 0..20 {
            probs.push(p);
            labels.push((i as f64) < p * 20.0);
        }
    }
    match ece(&probs, &labels, &cfg) {
        Ok(e) => {
            ok &= e.abs() <= BIN_TOL;
            notes.push(format!("perfect ECE {e:.1e}"));
        }
        Err(e) => return check(false, format!("ece errored: {e}")),
    }

    let mut worst_bins = 0.0f64;
    for trial in 0..200 {
        let m = 2 + trial % 15;
        let cfg = CalibrationConfig::equal_width(m).unwrap();
        let n = rng.random_range(1..300);
        let p: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let y: Vec<bool> = p.iter().map(|&pi| rng.random::<f64>() < pi.powf(1.5)).collect();
        let (Ok(direct), Ok(bins), Ok(_)) = (ece(&p, &y, &cfg), reliability_bins(&p, &y, &cfg), brier(&p, &y)) else {
            return check(false, "metric evaluation errored");
        };
        worst_bins = worst_bins.max((direct - ece_from_bins(&bins)).abs());
        if bins.iter().map(|b| b.count).sum::<usize>() != n {
            ok = false;
        }
    }
    ok &= worst_bins <= BIN_TOL;
    notes.push(format!("bin aggregation {worst_bins:.1e}"));

    for t_star in [1.0, 2.0] {
        let z: Vec<f64> = (0..TEMPERATURE_SAMPLES).map(|_| rng.random_range(-4.0..4.0)).collect();
        let y: Vec<bool> = z.iter().map(|&zi| rng.random::<f64>() < 1.0 / (1.0 + (-zi / t_star).exp())).collect();
        match fit_temperature(&z, &y) {
            Ok(s) => {
                ok &= (s.temperature - t_star).abs() <= TEMPERATURE_TOL;
                notes.push(format!("T*={t_star} -> {:.4}", s.temperature));
            }
            Err(e) => return check(false, format!("temperature fit errored: {e}")),
        }
    }
    check(ok, notes.join(", "))
}

fn noise_robustness() -> Outcome {
    let start = Instant::now();
    let mut cfg = RunConfig::default();
    cfg.simulation.eps_grid = vec![0.1, 0.2, 0.3];
    cfg.simulation.seeds = NOISE_SEEDS;
    let report = match simulate_noise(&cfg) {
        Ok(r) => r,
        Err(e) => return check(false, format!("simulation errored: {e}")),
    };
    let elapsed = start.elapsed();
    let grid = [0.0, 0.1, 0.2, 0.3];
    let series = |m: Method| -> Option<Vec<f64>> { grid.iter().map(|&e| report.row(m, e).map(|r| r.mean_retention)).collect() };
    let (Some(tur), Some(dpo)) = (series(Method::TurDpo), series(Method::Dpo)) else {
        return check(false, "missing rows in retention report");
    };
    let dominates = tur.iter().zip(&dpo).skip(1).all(|(t, d)| t >= d);
    let decreasing = |s: &[f64]| s.windows(2).all(|w| w[1] < w[0]);
    let fmt = |s: &[f64]| s.iter().skip(1).map(|x| format!("{x:.4}")).collect::<Vec<_>>().join("/");
    check(
        dominates && decreasing(&tur) && decreasing(&dpo) && elapsed <= NOISE_BUDGET,
        format!(
            "retention at eps 0.1/0.2/0.3: TUR-DPO {} vs DPO {} ({NOISE_SEEDS} seeds, {elapsed:.2?})",
            fmt(&tur),
            fmt(&dpo)
        ),
    )
}

fn bias_trend() -> Outcome {
    let start = Instant::now();
    let eps = [0.0, 0.1, 0.2];
    let w_mins = [0.05, 0.5, 1.0];
    let cfg = NoiseSimConfig {
        eps_grid: eps.to_vec(),
        seeds: BIAS_SEEDS,
        base_seed: 0,
        mode: DependenceMode::UncertaintyCorrelated,
    };
    let report = match bias_bound_experiment(&cfg, &w_mins, 1.2, &BiasWorld::default()) {
        Ok(r) => r,
        Err(e) => return check(false, format!("experiment errored: {e}")),
    };
    let elapsed = start.elapsed();
    let gap = |e: f64, w: f64| report.point(e, w).map(|p| p.gap).unwrap_or(f64::NAN);
    let mut ok = elapsed <= BIAS_BUDGET;
    for &w in &w_mins {
        ok &= eps.windows(2).all(|e| gap(e[1], w) >= gap(e[0], w));
    }
    for &e in &eps {
        ok &= w_mins.windows(2).all(|w| gap(e, w[1]) <= gap(e, w[0]));
    }
    ok &= eps.iter().all(|&e| gap(e, 1.0) == 0.0);
    let clean_ratio = w_mins
        .iter()
        .filter_map(|&w| report.point(0.0, w))
        .filter(|p| p.gap > 0.0)
        .map(|p| p.gap / p.std_error)
        .fold(0.0, f64::max);
    ok &= clean_ratio <= 3.0;
    let table: Vec<String> = eps
        .iter()
        .map(|&e| format!("eps {e}: {}", w_mins.iter().map(|&w| format!("{:.4}", gap(e, w))).collect::<Vec<_>>().join("/")))
        .collect();
    check(
        ok,
        format!(
            "gap by w_min 0.05/0.5/1 [{}], eps-0 gap {clean_ratio:.2} SE, C = {:.3}, {BIAS_SEEDS} seeds, {elapsed:.2?}",
            table.join("; "),
            report.fitted_c
        ),
    )
}

fn ks_uniform(mut p: Vec<f64>) -> f64 {
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

fn significance_tools() -> Outcome {
    let start = Instant::now();
    let bh = benjamini_hochberg(&[0.01, 0.02, 0.03, 0.04], BH_Q);
    let bh_ok = matches!(&bh, Ok(r) if r.iter().all(|&x| x));

    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let cfg = BootstrapConfig { replicates: KS_REPLICATES, seed: 0, two_sided: true };
    let mut pvals = Vec::with_capacity(KS_DATASETS);
    for d in 0..KS_DATASETS {
        let a: Vec<bool> = (0..KS_ITEMS).map(|_| rng.random_bool(0.5)).collect();
        let b: Vec<bool> = (0..KS_ITEMS).map(|_| rng.random_bool(0.5)).collect();
        match paired_bootstrap(&a, &b, &BootstrapConfig { seed: cfg.seed.wrapping_add(d as u64), ..cfg }) {
            Ok(p) => pvals.push(p),
            Err(e) => return check(false, format!("bootstrap errored: {e}")),
        }
    }
    let ks = ks_uniform(pvals);
    check(
        bh_ok && ks <= KS_MAX,
        format!(
            "BH rejects all of 0.01..0.04 at q={BH_Q}: {bh_ok}; null p-value KS {ks:.4} <= {KS_MAX} ({KS_DATASETS} datasets, {:.2?})",
            start.elapsed()
        ),
    )
}

fn reward_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let rp = RewardParams::default();
    let mut violations = 0usize;
    for _ in 0..PROBES {
        let phi = CalibratorParams {
            gamma_sem: rng.random_range(0.0..3.0),
            b_sem: rng.random_range(-1.0..1.0),
            gamma_topo: rng.random_range(0.0..3.0),
            b_topo: rng.random_range(-1.0..1.0),
        };
        let b = random_bundle(&mut rng);
        let r = shaped_reward(&b, &phi, &rp);
        let step = rng.random_range(0.0..1.0);
        let up_sem = shaped_reward(&bundle(b.s_sem + step, b.s_topo, b.u), &phi, &rp);
        let up_topo = shaped_reward(&bundle(b.s_sem, b.s_topo + step, b.u), &phi, &rp);
        let up_u = shaped_reward(&bundle(b.s_sem, b.s_topo, b.u + step), &phi, &rp);
        if up_sem < r || up_topo < r || up_u > r {
            violations += 1;
        }
    }

    // every pair prefers the response with lower signals, pushing both slopes negative
    let o = ObjectiveParams::default();
    let mut phi = CalibratorParams::default();
    let mut min_slope = f64::INFINITY;
    for _ in 0..ADVERSARIAL_STEPS {
        let batch: Vec<CalibratorPair<f64>> = (0..8)
            .map(|_| CalibratorPair {
                d_sem: -rng.random_range(0.5..3.0),
                d_topo: -rng.random_range(0.5..3.0),
                d_u: rng.random_range(-1.0..1.0),
                d_logp_policy: rng.random_range(-1.0..1.0),
                d_logp_ref: 0.0,
                weight: 1.0,
            })
            .collect();
        let next = calibrator_gradient(&batch, &phi, &rp, &o).and_then(|g| calibrator_step(&phi, &g, 5.0));
        match next {
            Ok(p) => phi = p,
            Err(e) => return check(false, format!("calibrator step errored: {e}")),
        }
        min_slope = min_slope.min(phi.gamma_sem).min(phi.gamma_topo);
    }
    check(
        violations == 0 && min_slope >= 0.0,
        format!("{violations} monotonicity violations in {PROBES} probes; min slope {min_slope} after {ADVERSARIAL_STEPS} adversarial steps"),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("gradient fidelity", gradient_fidelity),
        ("Gibbs convergence", gibbs_convergence),
        ("DPO reduction", dpo_reduction),
        ("listwise k=2 equals pairwise", listwise_pairwise_agreement),
        ("weight contract", weight_contract),
        ("uncertainty degeneracies", uncertainty_degeneracies),
        ("sanitizer optimality", sanitizer_optimality),
        ("calibration identities", calibration_identities),
        ("noise robustness trend", noise_robustness),
        ("bias bound trend", bias_trend),
        ("significance tools", significance_tools),
        ("reward monotonicity", reward_monotonicity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let out = run();
        if !out.passed {
            failed += 1;
        }
        println!("{} [{:>2}] {name}: {}", if out.passed { "PASS" } else { "FAIL" }, i + 1, out.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
