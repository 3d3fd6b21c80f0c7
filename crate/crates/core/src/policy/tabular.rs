use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::ObjectiveParams;
use crate::scalar::{log_sum_exp, softmax, Scalar};

/// Categorical policy over a finite response set per prompt, given by logits.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TabularPolicy<F> {
    pub logits: BTreeMap<String, Vec<F>>,
}

/// Per-prompt rewards, aligned with the policy's response order.
pub type PromptRewards<F> = BTreeMap<String, Vec<F>>;

impl<F: Scalar> TabularPolicy<F> {
    /// All-zero logits, i.e. uniform distributions.
    pub fn uniform<'a>(shape: impl IntoIterator<Item = (&'a str, usize)>) -> Self {
        Self {
            logits: shape
                .into_iter()
                .map(|(p, n)| (p.to_string(), vec![F::zero(); n]))
                .collect(),
        }
    }

    pub fn prompt_logits(&self, prompt: &str) -> Result<&[F]> {
        self.logits
            .get(prompt)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Lookup(format!("unknown prompt id {prompt:?}")))
    }

    pub fn probabilities(&self, prompt: &str) -> Result<Vec<F>> {
        Ok(softmax(self.prompt_logits(prompt)?))
    }

    pub fn log_probabilities(&self, prompt: &str) -> Result<Vec<F>> {
        let l = self.prompt_logits(prompt)?;
        let lse = log_sum_exp(l);
        Ok(l.iter().map(|&x| x - lse).collect())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.logits.len() == other.logits.len()
            && self
                .logits
                .iter()
                .zip(&other.logits)
                .all(|((pa, la), (pb, lb))| pa == pb && la.len() == lb.len())
    }

    pub fn all_finite(&self) -> bool {
        self.logits.values().flatten().all(|x| x.is_finite())
    }
}

/// `log softmax(logits[prompt])[response]`
pub fn log_prob<F: Scalar>(policy: &TabularPolicy<F>, prompt: &str, response: usize) -> Result<F> {
    let l = policy.prompt_logits(prompt)?;
    let x = *l
        .get(response)
        .ok_or_else(|| Error::Lookup(format!("response {response} out of range for prompt {prompt:?}")))?;
    Ok(x - log_sum_exp(l))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceMode {
    #[default]
    Fixed,
    Ema,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmaParams<F> {
    pub rho: F,
    pub mode: ReferenceMode,
}

/// Accepted EMA decay range.
pub const EMA_RHO_RANGE: (f64, f64) = (0.99, 0.997);

impl<F: Scalar> Default for EmaParams<F> {
    fn default() -> Self {
        Self {
            rho: F::lit(0.995),
            mode: ReferenceMode::Fixed,
        }
    }
}

impl<F: Scalar> EmaParams<F> {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = EMA_RHO_RANGE;
        if self.mode == ReferenceMode::Ema && !(self.rho >= F::lit(lo) && self.rho <= F::lit(hi)) {
            return Err(Error::Config(format!("EMA decay rho = {} outside [{lo}, {hi}]", self.rho)));
        }
        Ok(())
    }
}

/// `ref ← ρ·ref + (1 − ρ)·policy` in logit space; a fixed reference is returned unchanged.
pub fn ema_update<F: Scalar>(
    reference: &TabularPolicy<F>,
    policy: &TabularPolicy<F>,
    p: &EmaParams<F>,
) -> Result<TabularPolicy<F>> {
    if !reference.same_shape(policy) {
        return Err(Error::ShapeMismatch("reference and policy differ in prompts or response counts".into()));
    }
    if p.mode == ReferenceMode::Fixed {
        return Ok(reference.clone());
    }
    let keep = p.rho;
    let take = F::one() - p.rho;
    let logits = reference
        .logits
        .iter()
        .zip(policy.logits.values())
        .map(|((prompt, r), q)| {
            (
                prompt.clone(),
                r.iter().zip(q).map(|(&a, &b)| keep * a + take * b).collect(),
            )
        })
        .collect();
    Ok(TabularPolicy { logits })
}

/// `π*(y|x) ∝ π_ref(y|x)·exp(β·γ·r(x, y))`, returned as normalized log-probabilities.
pub fn gibbs_policy<F: Scalar>(
    reference: &TabularPolicy<F>,
    rewards: &PromptRewards<F>,
    o: &ObjectiveParams<F>,
) -> Result<TabularPolicy<F>> {
    let scale = o.beta_temp * o.gamma_mix;
    let mut logits = BTreeMap::new();
    for prompt in reference.logits.keys() {
        let base = reference.log_probabilities(prompt)?;
        let r = rewards
            .get(prompt)
            .ok_or_else(|| Error::Lookup(format!("no rewards for prompt {prompt:?}")))?;
        if r.len() != base.len() {
            return Err(Error::ShapeMismatch(format!(
                "prompt {prompt:?}: {} rewards for {} responses",
                r.len(),
                base.len()
            )));
        }
        if let Some(bad) = r.iter().find(|x| !x.is_finite()) {
            return Err(Error::RejectedInput(format!("non-finite reward {bad} for prompt {prompt:?}")));
        }
        let tilted: Vec<F> = base.iter().zip(r).map(|(&b, &ri)| b + scale * ri).collect();
        let lse = log_sum_exp(&tilted);
        logits.insert(prompt.clone(), tilted.iter().map(|&t| t - lse).collect());
    }
    Ok(TabularPolicy { logits })
}

/// `E_x[E_{y~π}[γ r] − (1/β)·KL(π ‖ π_ref)]`, averaged over the policy's prompts.
pub fn kl_objective<F: Scalar>(
    policy: &TabularPolicy<F>,
    reference: &TabularPolicy<F>,
    rewards: &PromptRewards<F>,
    o: &ObjectiveParams<F>,
) -> Result<F> {
    if !policy.same_shape(reference) {
        return Err(Error::ShapeMismatch("policy and reference differ in shape".into()));
    }
    let mut total = F::zero();
    for prompt in policy.logits.keys() {
        let lp = policy.log_probabilities(prompt)?;
        let lr = reference.log_probabilities(prompt)?;
        let r = rewards
            .get(prompt)
            .ok_or_else(|| Error::Lookup(format!("no rewards for prompt {prompt:?}")))?;
        if r.len() != lp.len() {
            return Err(Error::ShapeMismatch(format!("prompt {prompt:?}: reward length mismatch")));
        }
        let mut value = F::zero();
        let mut kl = F::zero();
        for i in 0..lp.len() {
            let p = lp[i].exp();
            value += p * o.gamma_mix * r[i];
            if p > F::zero() {
                kl += p * (lp[i] - lr[i]);
            }
        }
        total += value - kl / o.beta_temp;
    }
    Ok(total / F::from_usize_lossy(policy.logits.len().max(1)))
}

/// Total-variation distance between the two policies, maximized over prompts.
pub fn total_variation<F: Scalar>(a: &TabularPolicy<F>, b: &TabularPolicy<F>) -> Result<F> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch("policies differ in shape".into()));
    }
    let mut worst = F::zero();
    for prompt in a.logits.keys() {
        let pa = a.probabilities(prompt)?;
        let pb = b.probabilities(prompt)?;
        let tv = pa.iter().zip(&pb).map(|(&x, &y)| (x - y).abs()).sum::<F>() / F::lit(2.0);
        worst = worst.max(tv);
    }
    Ok(worst)
}
