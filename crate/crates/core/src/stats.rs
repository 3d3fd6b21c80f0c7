//! Significance testing and the weighted-estimator bias experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};
use crate::uncertainty::{pair_weight, PairWeightParams};

pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub two_sided: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 10_000,
            seed: 0,
            two_sided: true,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < MIN_REPLICATES {
            return Err(Error::Config(format!(
                "bootstrap replicates {} below minimum {MIN_REPLICATES}",
                self.replicates
            )));
        }
        Ok(())
    }
}

/// Paired bootstrap p-value for the mean of `a − b`.
///
/// Each replicate draws item indices with replacement against the original
/// item order, so the result depends on the order only through the seed.
/// The recentred replicate means `d̄* − d̄` stand in for the null
/// distribution; the p-value is `(1 + #extreme) / (R + 1)`. One-sided tests
/// the alternative `mean(a) > mean(b)`.
pub fn paired_bootstrap(a: &[bool], b: &[bool], cfg: &BootstrapConfig) -> Result<f64> {
    cfg.validate()?;
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} paired outcomes", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::RejectedInput("paired bootstrap needs at least one item".into()));
    }
    let diffs: Vec<i32> = a.iter().zip(b).map(|(&x, &y)| i32::from(x) - i32::from(y)).collect();
    let n = diffs.len();
    let total: i64 = diffs.iter().map(|&d| i64::from(d)).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut extreme = 0usize;
    for _ in 0..cfg.replicates {
        let s: i64 = (0..n).map(|_| i64::from(diffs[rng.random_range(0..n)])).sum();
        // compare in integer units of 1/n to keep ties exact
        let centred = s - total;
        let hit = if cfg.two_sided { centred.abs() >= total.abs() } else { centred >= total };
        extreme += usize::from(hit);
    }
    Ok((1 + extreme) as f64 / (cfg.replicates + 1) as f64)
}

/// Standardized mean difference with the pooled unbiased variance.
pub fn cohens_d<F: Scalar>(x: &[F], y: &[F]) -> Result<F> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::RejectedInput("cohens_d needs at least two values per sample".into()));
    }
    let stats = |v: &[F]| {
        let n = F::from_usize_lossy(v.len());
        let m = v.iter().copied().sum::<F>() / n;
        let ss = v.iter().map(|&t| (t - m) * (t - m)).sum::<F>();
        (m, ss)
    };
    let (mx, ssx) = stats(x);
    let (my, ssy) = stats(y);
    let dof = F::from_usize_lossy(x.len() + y.len() - 2);
    let pooled = ((ssx + ssy) / dof).sqrt();
    if !(pooled > F::zero()) {
        return Err(Error::UndefinedEffect);
    }
    Ok((mx - my) / pooled)
}

/// Step-up false-discovery control. Flags come back in input order.
pub fn benjamini_hochberg<F: Scalar>(pvals: &[F], q: F) -> Result<Vec<bool>> {
    if !(q > F::zero() && q < F::one()) {
        return Err(Error::Config(format!("FDR level {q} outside (0, 1)")));
    }
    if let Some(i) = pvals.iter().position(|&p| !(p >= F::zero() && p <= F::one())) {
        return Err(Error::validation(format!("pvals[{i}]"), format!("{} outside [0, 1]", pvals[i])));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| pvals[i].partial_cmp(&pvals[j]).expect("validated finite").then(i.cmp(&j)));
    let mf = F::from_usize_lossy(m);
    let cutoff = (0..m)
        .rev()
        .find(|&k| pvals[order[k]] <= q * F::from_usize_lossy(k + 1) / mf)
        .map_or(0, |k| k + 1);
    let mut flags = vec![false; m];
    for &i in &order[..cutoff] {
        flags[i] = true;
    }
    Ok(flags)
}

/// How label flips relate to pair uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DependenceMode {
    Independent,
    #[default]
    UncertaintyCorrelated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSimConfig {
    pub eps_grid: Vec<f64>,
    pub seeds: usize,
    pub base_seed: u64,
    pub mode: DependenceMode,
}

impl Default for NoiseSimConfig {
    fn default() -> Self {
        Self {
            eps_grid: vec![0.0, 0.1, 0.2, 0.3],
            seeds: 20,
            base_seed: 0,
            mode: DependenceMode::UncertaintyCorrelated,
        }
    }
}

impl NoiseSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eps_grid.is_empty() {
            return Err(Error::Config("eps grid is empty".into()));
        }
        if let Some(e) = self.eps_grid.iter().find(|e| !(**e >= 0.0 && **e < 0.5)) {
            return Err(Error::Config(format!("flip rate {e} outside [0, 0.5)")));
        }
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be >= 1".into()));
        }
        Ok(())
    }
}

/// Flip probability per item: `ε` when independent, `ε·u/mean(u)` (capped at 1) when correlated.
pub fn flip_probabilities(eps: f64, uncertainty: &[f64], mode: DependenceMode) -> Vec<f64> {
    match mode {
        DependenceMode::Independent => vec![eps; uncertainty.len()],
        DependenceMode::UncertaintyCorrelated => {
            let m = uncertainty.iter().sum::<f64>() / uncertainty.len().max(1) as f64;
            uncertainty
                .iter()
                .map(|&u| if m > 0.0 { (eps * u / m).min(1.0) } else { eps })
                .collect()
        }
    }
}

/// Synthetic Bradley-Terry world for the bias experiment.
///
/// Pair features are `x ~ N(0, 1)` with preference probability `σ(θ·x)`.
/// Pair uncertainty is `u_scale · 2σ(−|x| / difficulty_scale)`, largest for
/// near-ties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasWorld {
    pub pairs: usize,
    pub theta: f64,
    pub difficulty_scale: f64,
    pub u_scale: f64,
}

impl Default for BiasWorld {
    fn default() -> Self {
        Self {
            pairs: 2000,
            theta: 1.0,
            difficulty_scale: 0.5,
            u_scale: 20.0,
        }
    }
}

impl BiasWorld {
    pub fn uncertainty(&self, x: f64) -> f64 {
        self.u_scale * 2.0 * sigmoid(-x.abs() / self.difficulty_scale)
    }
}

/// One-dimensional weighted logistic fit through the origin by Newton's method.
pub fn fit_logistic_slope(x: &[f64], y: &[bool], w: &[f64]) -> Result<f64> {
    let mut theta = 0.0;
    for _ in 0..200 {
        let (mut g, mut h) = (0.0, 0.0);
        for ((&xi, &yi), &wi) in x.iter().zip(y).zip(w) {
            let p = sigmoid(theta * xi);
            g += wi * xi * (f64::from(u8::from(yi)) - p);
            h += wi * xi * xi * p * (1.0 - p);
        }
        if !(h > 0.0) {
            return Err(Error::DegenerateFit("flat logistic likelihood".into()));
        }
        let step = g / h;
        theta += step;
        if !theta.is_finite() {
            return Err(Error::DegenerateFit("logistic slope diverged (separable data)".into()));
        }
        if step.abs() <= 1e-13 * theta.abs().max(1.0) {
            return Ok(theta);
        }
    }
    Ok(theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub eps: f64,
    pub w_min: f64,
    /// `|mean over seeds of (θ̂_w − θ̂)|`.
    pub gap: f64,
    /// Monte-Carlo standard error of the mean difference.
    pub std_error: f64,
    /// `gap / ((1 − w_min)·ε)`; NaN where the denominator vanishes.
    pub fitted_c: f64,
    pub seed_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub points: Vec<BiasPoint>,
    /// Smallest C with `gap ≤ C·(1 − w_min)·ε` at every grid point with a positive bound.
    pub fitted_c: f64,
}

impl BiasReport {
    pub fn point(&self, eps: f64, w_min: f64) -> Option<&BiasPoint> {
        self.points.iter().find(|p| p.eps == eps && p.w_min == w_min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,w_min,gap,fitted_C,seed_count\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{:.17e},{:.17e},{}\n", p.eps, p.w_min, p.gap, p.fitted_c, p.seed_count));
        }
        out
    }
}

/// Runs the bias experiment over `cfg.eps_grid × w_min_grid`.
///
/// Every seed draws one world sample (features, labels, uniform flip
/// variates) shared by all grid points, so the flipped sets are nested in ε.
pub fn bias_bound_experiment(
    cfg: &NoiseSimConfig,
    w_min_grid: &[f64],
    tau_w: f64,
    world: &BiasWorld,
) -> Result<BiasReport> {
    cfg.validate()?;
    for &w_min in w_min_grid {
        PairWeightParams { tau_w, w_min }.validate()?;
    }
    if world.pairs < 2 {
        return Err(Error::Config("bias world needs at least two pairs".into()));
    }
    let cells = cfg.eps_grid.len() * w_min_grid.len();
    let mut diffs = vec![Vec::with_capacity(cfg.seeds); cells];
    for s in 0..cfg.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.base_seed.wrapping_add(s as u64));
        let x: Vec<f64> = (0..world.pairs).map(|_| StandardNormal.sample(&mut rng)).collect();
        let clean: Vec<bool> = x.iter().map(|&xi| rng.random::<f64>() < sigmoid(world.theta * xi)).collect();
        let flip_u: Vec<f64> = (0..world.pairs).map(|_| rng.random()).collect();
        let u: Vec<f64> = x.iter().map(|&xi| world.uncertainty(xi)).collect();
        for (ei, &eps) in cfg.eps_grid.iter().enumerate() {
            let probs = flip_probabilities(eps, &u, cfg.mode);
            let y: Vec<bool> = clean.iter().zip(&flip_u).zip(&probs).map(|((&c, &v), &p)| c ^ (v < p)).collect();
            let ones = vec![1.0; world.pairs];
            let plain = fit_logistic_slope(&x, &y, &ones)?;
            for (wi, &w_min) in w_min_grid.iter().enumerate() {
                let wp = PairWeightParams { tau_w, w_min };
                let w: Vec<f64> = u.iter().map(|&ui| pair_weight(ui, ui, &wp)).collect();
                let weighted = fit_logistic_slope(&x, &y, &w)?;
                diffs[ei * w_min_grid.len() + wi].push(weighted - plain);
            }
        }
    }
    let mut points = Vec::with_capacity(cells);
    for (ei, &eps) in cfg.eps_grid.iter().enumerate() {
        for (wi, &w_min) in w_min_grid.iter().enumerate() {
            let d = &diffs[ei * w_min_grid.len() + wi];
            let n = d.len() as f64;
            let m = d.iter().sum::<f64>() / n;
            let var = if d.len() > 1 { d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            let bound = (1.0 - w_min) * eps;
            points.push(BiasPoint {
                eps,
                w_min,
                gap: m.abs(),
                std_error: (var / n).sqrt(),
                fitted_c: if bound > 0.0 { m.abs() / bound } else { f64::NAN },
                seed_count: d.len(),
            });
        }
    }
    let fitted_c = points.iter().map(|p| p.fitted_c).filter(|c| c.is_finite()).fold(0.0, f64::max);
    Ok(BiasReport { points, fitted_c })
}
