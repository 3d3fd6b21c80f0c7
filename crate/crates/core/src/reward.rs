//! Semantic score, linear calibrators, the shaped reward, and the weighted
//! Bradley-Terry update of the calibrator parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::ObjectiveParams;
use crate::scalar::{sigmoid, softplus, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticWeights<F> {
    pub beta1: F,
    pub beta2: F,
    pub beta3: F,
}

impl<F: Scalar> Default for SemanticWeights<F> {
    fn default() -> Self {
        Self {
            beta1: F::one(),
            beta2: F::one(),
            beta3: F::one(),
        }
    }
}

impl<F: Scalar> SemanticWeights<F> {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2), ("beta3", self.beta3)] {
            if !(b >= F::zero()) || !b.is_finite() {
                return Err(Error::Config(format!("semantic weight {name} = {b} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Verifier and task signals of one response, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticSignals<F> {
    pub q_fact: F,
    pub q_task: F,
    pub q_hall: F,
}

impl<F: Scalar> SemanticSignals<F> {
    pub fn validate(&self) -> Result<()> {
        for (name, q) in [("q_fact", self.q_fact), ("q_task", self.q_task), ("q_hall", self.q_hall)] {
            if !(q >= F::zero() && q <= F::one()) {
                return Err(Error::validation(name, format!("{q} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Linear calibrator parameters φ. Slopes are kept nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratorParams<F> {
    pub gamma_sem: F,
    pub b_sem: F,
    pub gamma_topo: F,
    pub b_topo: F,
}

impl<F: Scalar> Default for CalibratorParams<F> {
    /// Identity calibrators.
    fn default() -> Self {
        Self {
            gamma_sem: F::one(),
            b_sem: F::zero(),
            gamma_topo: F::one(),
            b_topo: F::zero(),
        }
    }
}

impl<F: Scalar> CalibratorParams<F> {
    pub fn calibrate_sem(&self, s: F) -> F {
        self.gamma_sem * s + self.b_sem
    }

    pub fn calibrate_topo(&self, s: F) -> F {
        self.gamma_topo * s + self.b_topo
    }

    pub fn as_array(&self) -> [F; 4] {
        [self.gamma_sem, self.b_sem, self.gamma_topo, self.b_topo]
    }

    pub fn from_array(a: [F; 4]) -> Self {
        Self {
            gamma_sem: a[0],
            b_sem: a[1],
            gamma_topo: a[2],
            b_topo: a[3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardParams<F> {
    /// Semantic/topology mixing weight in `[0, 1]`.
    pub a: F,
    /// Uncertainty penalty.
    pub lambda_u: F,
}

impl<F: Scalar> Default for RewardParams<F> {
    fn default() -> Self {
        Self {
            a: F::lit(0.6),
            lambda_u: F::lit(0.5),
        }
    }
}

impl<F: Scalar> RewardParams<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.a >= F::zero() && self.a <= F::one()) {
            return Err(Error::Config(format!("mixing weight a = {} outside [0, 1]", self.a)));
        }
        if !(self.lambda_u >= F::zero()) {
            return Err(Error::Config(format!("lambda_u = {} must be >= 0", self.lambda_u)));
        }
        Ok(())
    }
}

/// Per-response scalars feeding the shaped reward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SignalBundle<F> {
    pub s_sem: F,
    pub s_topo: F,
    pub u: F,
}

/// `β₁·q_fact + β₂·q_task − β₃·q_hall`
pub fn semantic_score<F: Scalar>(sig: &SemanticSignals<F>, w: &SemanticWeights<F>) -> Result<F> {
    sig.validate()?;
    w.validate()?;
    Ok(w.beta1 * sig.q_fact + w.beta2 * sig.q_task - w.beta3 * sig.q_hall)
}

/// `a·f_sem(s_sem) + (1 − a)·f_topo(s_topo) − λ·u`
pub fn shaped_reward<F: Scalar>(b: &SignalBundle<F>, phi: &CalibratorParams<F>, p: &RewardParams<F>) -> F {
    p.a * phi.calibrate_sem(b.s_sem) + (F::one() - p.a) * phi.calibrate_topo(b.s_topo) - p.lambda_u * b.u
}

/// One preference pair as seen by the calibrator update: winner-minus-loser
/// signal differences plus the policy terms of the margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratorPair<F> {
    pub d_sem: F,
    pub d_topo: F,
    pub d_u: F,
    pub d_logp_policy: F,
    pub d_logp_ref: F,
    pub weight: F,
}

impl<F: Scalar> CalibratorPair<F> {
    pub fn from_bundles(
        winner: &SignalBundle<F>,
        loser: &SignalBundle<F>,
        d_logp_policy: F,
        d_logp_ref: F,
        weight: F,
    ) -> Self {
        Self {
            d_sem: winner.s_sem - loser.s_sem,
            d_topo: winner.s_topo - loser.s_topo,
            d_u: winner.u - loser.u,
            d_logp_policy,
            d_logp_ref,
            weight,
        }
    }

    /// Shaped reward difference under `phi`. The biases cancel.
    pub fn reward_delta(&self, phi: &CalibratorParams<F>, p: &RewardParams<F>) -> F {
        p.a * phi.gamma_sem * self.d_sem + (F::one() - p.a) * phi.gamma_topo * self.d_topo - p.lambda_u * self.d_u
    }

    pub fn margin(&self, phi: &CalibratorParams<F>, p: &RewardParams<F>, o: &ObjectiveParams<F>) -> F {
        o.beta_temp * (self.d_logp_policy - self.d_logp_ref) + o.gamma_mix * self.reward_delta(phi, p)
    }
}

/// `Σ w·softplus(−m)` over the batch.
pub fn calibrator_loss<F: Scalar>(
    pairs: &[CalibratorPair<F>],
    phi: &CalibratorParams<F>,
    p: &RewardParams<F>,
    o: &ObjectiveParams<F>,
) -> F {
    pairs
        .iter()
        .map(|pair| pair.weight * softplus(-pair.margin(phi, p, o)))
        .sum()
}

/// Gradient of [`calibrator_loss`] with respect to `(γ_sem, b_sem, γ_topo, b_topo)`.
///
/// The bias components are identically zero: a pairwise difference of
/// rewards does not depend on the calibrator offsets.
pub fn calibrator_gradient<F: Scalar>(
    pairs: &[CalibratorPair<F>],
    phi: &CalibratorParams<F>,
    p: &RewardParams<F>,
    o: &ObjectiveParams<F>,
) -> Result<CalibratorParams<F>> {
    if pairs.is_empty() {
        return Err(Error::RejectedInput("calibrator gradient needs a non-empty batch".into()));
    }
    let mut g_sem = F::zero();
    let mut g_topo = F::zero();
    for pair in pairs {
        // dL/dm = -w σ(-m)
        let dl_dm = -pair.weight * sigmoid(-pair.margin(phi, p, o));
        g_sem += dl_dm * o.gamma_mix * p.a * pair.d_sem;
        g_topo += dl_dm * o.gamma_mix * (F::one() - p.a) * pair.d_topo;
    }
    Ok(CalibratorParams {
        gamma_sem: g_sem,
        b_sem: F::zero(),
        gamma_topo: g_topo,
        b_topo: F::zero(),
    })
}

/// Gradient-descent step on φ followed by projection of the slopes onto `[0, ∞)`.
pub fn calibrator_step<F: Scalar>(
    phi: &CalibratorParams<F>,
    grad: &CalibratorParams<F>,
    lr: F,
) -> Result<CalibratorParams<F>> {
    if grad.as_array().iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical {
            step: 0,
            message: "non-finite calibrator gradient".into(),
            state: format!("{grad:?}"),
        });
    }
    if !(lr >= F::zero()) {
        return Err(Error::Config(format!("calibrator learning rate {lr} must be >= 0")));
    }
    let a = phi.as_array();
    let g = grad.as_array();
    let mut next = CalibratorParams::from_array([
        a[0] - lr * g[0],
        a[1] - lr * g[1],
        a[2] - lr * g[2],
        a[3] - lr * g[3],
    ]);
    next.gamma_sem = next.gamma_sem.max(F::zero());
    next.gamma_topo = next.gamma_topo.max(F::zero());
    Ok(next)
}
