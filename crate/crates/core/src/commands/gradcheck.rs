use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::RunConfig;
use crate::error::Result;
use crate::objective::{
    listwise_grad, listwise_loss, pairwise_grad, pairwise_loss, ListwiseInstance, ObjectiveParams, WeightedPair,
};
use crate::reward::{calibrator_gradient, calibrator_loss, CalibratorPair, CalibratorParams, RewardParams};

pub const GRADCHECK_TOLERANCE: f64 = 1e-6;
/// Magnitude below which errors are measured absolutely rather than relatively.
pub const RELATIVE_FLOOR: f64 = 1e-2;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Central difference of `f` along coordinate `i` of `x`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize) -> f64 {
    let h = 1e-5 * x[i].abs().max(1.0);
    let mut up = x.to_vec();
    let mut dn = x.to_vec();
    up[i] += h;
    dn[i] -= h;
    (f(&up) - f(&dn)) / (up[i] - dn[i])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub operation: String,
    pub instances: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub passed: bool,
    pub checks: Vec<GradCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckOptions {
    pub instances: usize,
    pub seed: u64,
    /// Scales every analytic gradient by `1 + corrupt`; nonzero only to prove the check can fail.
    pub corrupt: f64,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        Self {
            instances: 1000,
            seed: 0,
            corrupt: 0.0,
        }
    }
}

struct Tally {
    operation: &'static str,
    instances: usize,
    coordinates: usize,
    worst: f64,
}

impl Tally {
    fn new(operation: &'static str) -> Self {
        Self {
            operation,
            instances: 0,
            coordinates: 0,
            worst: 0.0,
        }
    }

    fn record(&mut self, analytic: f64, numeric: f64) {
        self.coordinates += 1;
        self.worst = self.worst.max(relative_error(analytic, numeric));
    }

    fn finish(self) -> GradCheck {
        GradCheck {
            operation: self.operation.into(),
            instances: self.instances,
            coordinates: self.coordinates,
            max_rel_error: self.worst,
            passed: self.worst <= GRADCHECK_TOLERANCE,
        }
    }
}

fn check_pairwise(rng: &mut impl Rng, o: &ObjectiveParams<f64>, opts: &GradcheckOptions) -> Result<GradCheck> {
    let mut t = Tally::new("pairwise_loss");
    let k = 1.0 + opts.corrupt;
    for _ in 0..opts.instances {
        let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let weight = rng.random_range(0.05..=1.0);
        let pair = |x: &[f64]| WeightedPair {
            d_logp_policy: x[0],
            d_logp_ref: x[1],
            d_reward: x[2],
            weight,
        };
        let loss = |x: &[f64]| pairwise_loss(&pair(x), o).expect("finite inputs");
        let g = pairwise_grad(&pair(&x), o)?;
        // the reference log-ratio enters with the opposite sign of the policy one
        let analytic = [g.d_logp_policy, -g.d_logp_policy, g.d_reward];
        for (i, a) in analytic.iter().enumerate() {
            t.record(k * a, central_difference(loss, &x, i));
        }
        t.instances += 1;
    }
    Ok(t.finish())
}

fn check_listwise(rng: &mut impl Rng, o: &ObjectiveParams<f64>, opts: &GradcheckOptions) -> Result<GradCheck> {
    let mut t = Tally::new("listwise_loss");
    let k = 1.0 + opts.corrupt;
    for _ in 0..opts.instances {
        let n = rng.random_range(2..=6);
        let x: Vec<f64> = (0..3 * n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut preferred: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
        if preferred.is_empty() {
            preferred.push(rng.random_range(0..n));
        }
        let weight = rng.random_range(0.05..=1.0);
        let inst = |x: &[f64]| ListwiseInstance {
            logp_policy: x[..n].to_vec(),
            logp_ref: x[n..2 * n].to_vec(),
            rewards: x[2 * n..].to_vec(),
            preferred: preferred.clone(),
            weight,
        };
        let loss = |x: &[f64]| listwise_loss(&inst(x), o).expect("valid instance");
        let gz = listwise_grad(&inst(&x), o)?;
        for (i, &g) in gz.iter().enumerate() {
            t.record(k * o.beta_temp * g, central_difference(loss, &x, i));
            t.record(-k * o.beta_temp * g, central_difference(loss, &x, n + i));
            t.record(k * o.gamma_mix * g, central_difference(loss, &x, 2 * n + i));
        }
        t.instances += 1;
    }
    Ok(t.finish())
}

fn check_calibrator(
    rng: &mut impl Rng,
    o: &ObjectiveParams<f64>,
    r: &RewardParams<f64>,
    opts: &GradcheckOptions,
) -> Result<GradCheck> {
    let mut t = Tally::new("calibrator_loss");
    let k = 1.0 + opts.corrupt;
    for _ in 0..opts.instances {
        let batch: Vec<CalibratorPair<f64>> = (0..rng.random_range(1..=8))
            .map(|_| CalibratorPair {
                d_sem: rng.random_range(-2.0..2.0),
                d_topo: rng.random_range(-2.0..2.0),
                d_u: rng.random_range(-2.0..2.0),
                d_logp_policy: rng.random_range(-2.0..2.0),
                d_logp_ref: rng.random_range(-2.0..2.0),
                weight: rng.random_range(0.05..=1.0),
            })
            .collect();
        let phi = [
            rng.random_range(0.0..2.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.0..2.0),
            rng.random_range(-1.0..1.0),
        ];
        let loss = |x: &[f64]| calibrator_loss(&batch, &CalibratorParams::from_array([x[0], x[1], x[2], x[3]]), r, o);
        let g = calibrator_gradient(&batch, &CalibratorParams::from_array(phi), r, o)?.as_array();
        for (i, a) in g.iter().enumerate() {
            t.record(k * a, central_difference(loss, &phi, i));
        }
        t.instances += 1;
    }
    Ok(t.finish())
}

/// Finite-difference checks of every analytic gradient at the configured hyperparameters.
pub fn run_gradcheck(cfg: &RunConfig, opts: &GradcheckOptions) -> Result<GradcheckReport> {
    cfg.validate()?;
    let o = cfg.objective();
    let r = cfg.reward();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let checks = vec![
        check_pairwise(&mut rng, &o, opts)?,
        check_listwise(&mut rng, &o, opts)?,
        check_calibrator(&mut rng, &o, &r, opts)?,
    ];
    let max_rel_error = checks.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    Ok(GradcheckReport {
        tolerance: GRADCHECK_TOLERANCE,
        max_rel_error,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
