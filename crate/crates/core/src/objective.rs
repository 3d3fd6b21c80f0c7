//! Shaped preference margin, the weighted pairwise logistic loss, the
//! Plackett-Luce listwise loss, and their analytic gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, sigmoid, softmax, softplus, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParams<F> {
    /// Sharpness β of the policy log-ratio term.
    pub beta_temp: F,
    /// Strength γ of the shaped reward in the margin.
    pub gamma_mix: F,
}

impl<F: Scalar> Default for ObjectiveParams<F> {
    fn default() -> Self {
        Self {
            beta_temp: F::lit(2.0),
            gamma_mix: F::one(),
        }
    }
}

impl<F: Scalar> ObjectiveParams<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_temp > F::zero()) || !self.beta_temp.is_finite() {
            return Err(Error::Config(format!("beta = {} must be finite and > 0", self.beta_temp)));
        }
        if !(self.gamma_mix >= F::zero()) || !self.gamma_mix.is_finite() {
            return Err(Error::Config(format!("gamma = {} must be finite and >= 0", self.gamma_mix)));
        }
        Ok(())
    }
}

/// One weighted preference comparison, winner minus loser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedPair<F> {
    pub d_logp_policy: F,
    pub d_logp_ref: F,
    pub d_reward: F,
    pub weight: F,
}

/// `∂L/∂Δlogπ_θ` and `∂L/∂Δr_φ` of the pairwise loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGradient<F> {
    pub d_logp_policy: F,
    pub d_reward: F,
}

/// `β(Δlogπ_θ − Δlogπ_ref) + γΔr_φ`
pub fn margin<F: Scalar>(p: &WeightedPair<F>, o: &ObjectiveParams<F>) -> Result<F> {
    if !(p.d_logp_policy.is_finite() && p.d_logp_ref.is_finite() && p.d_reward.is_finite() && p.weight.is_finite()) {
        return Err(Error::Numerical {
            step: 0,
            message: "non-finite pair field".into(),
            state: format!("{p:?}"),
        });
    }
    Ok(o.beta_temp * (p.d_logp_policy - p.d_logp_ref) + o.gamma_mix * p.d_reward)
}

/// `−w·log σ(m) = w·softplus(−m)`
pub fn pairwise_loss<F: Scalar>(p: &WeightedPair<F>, o: &ObjectiveParams<F>) -> Result<F> {
    Ok(p.weight * softplus(-margin(p, o)?))
}

pub fn pairwise_grad<F: Scalar>(p: &WeightedPair<F>, o: &ObjectiveParams<F>) -> Result<PairGradient<F>> {
    let s = sigmoid(-margin(p, o)?);
    Ok(PairGradient {
        d_logp_policy: -p.weight * o.beta_temp * s,
        d_reward: -p.weight * o.gamma_mix * s,
    })
}

/// Candidates of one prompt for the listwise objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListwiseInstance<F> {
    pub logp_policy: Vec<F>,
    pub logp_ref: Vec<F>,
    pub rewards: Vec<F>,
    /// Indices of the preferred candidates.
    pub preferred: Vec<usize>,
    /// Pair weight of the top two candidates.
    pub weight: F,
}

impl<F: Scalar> ListwiseInstance<F> {
    pub fn validate(&self) -> Result<()> {
        let k = self.logp_policy.len();
        if k < 2 {
            return Err(Error::RejectedInput(format!("listwise instance needs >= 2 candidates, got {k}")));
        }
        if self.logp_ref.len() != k || self.rewards.len() != k {
            return Err(Error::ShapeMismatch(format!(
                "listwise candidate vectors have lengths {}, {}, {}",
                k,
                self.logp_ref.len(),
                self.rewards.len()
            )));
        }
        if self.preferred.is_empty() {
            return Err(Error::RejectedInput("listwise preferred set is empty".into()));
        }
        if let Some(&bad) = self.preferred.iter().find(|&&i| i >= k) {
            return Err(Error::RejectedInput(format!("preferred index {bad} out of range for {k} candidates")));
        }
        Ok(())
    }

    /// `z_i = β(log π_θ(y_i) − log π_ref(y_i)) + γ r_i`
    pub fn utilities(&self, o: &ObjectiveParams<F>) -> Vec<F> {
        self.logp_policy
            .iter()
            .zip(&self.logp_ref)
            .zip(&self.rewards)
            .map(|((&lp, &lr), &r)| o.beta_temp * (lp - lr) + o.gamma_mix * r)
            .collect()
    }
}

/// Listwise loss as a function of the utilities directly.
pub fn listwise_loss_from_utilities<F: Scalar>(z: &[F], preferred: &[usize], weight: F) -> F {
    let lse = log_sum_exp(z);
    weight * preferred.iter().map(|&i| lse - z[i]).sum::<F>()
}

/// `−w Σ_{i∈𝒫} log softmax(z)_i`
pub fn listwise_loss<F: Scalar>(inst: &ListwiseInstance<F>, o: &ObjectiveParams<F>) -> Result<F> {
    inst.validate()?;
    Ok(listwise_loss_from_utilities(&inst.utilities(o), &inst.preferred, inst.weight))
}

/// `∂L/∂z_i = w(|𝒫|·softmax(z)_i − [i ∈ 𝒫])`
pub fn listwise_grad<F: Scalar>(inst: &ListwiseInstance<F>, o: &ObjectiveParams<F>) -> Result<Vec<F>> {
    inst.validate()?;
    let probs = softmax(&inst.utilities(o));
    let count = F::from_usize_lossy(inst.preferred.len());
    let mut grad: Vec<F> = probs.iter().map(|&p| inst.weight * count * p).collect();
    for &i in &inst.preferred {
        grad[i] -= inst.weight;
    }
    Ok(grad)
}

/// Mean pairwise loss over a batch, reduced left to right.
pub fn batch_pairwise_loss<F: Scalar>(pairs: &[WeightedPair<F>], o: &ObjectiveParams<F>) -> Result<F> {
    if pairs.is_empty() {
        return Ok(F::zero());
    }
    let mut total = F::zero();
    for p in pairs {
        total += pairwise_loss(p, o)?;
    }
    Ok(total / F::from_usize_lossy(pairs.len()))
}
