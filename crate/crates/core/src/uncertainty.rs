//! Epistemic and aleatoric uncertainty of reasoning graphs, and the clipped
//! pair weight derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{binary_entropy, mean, population_variance, xlogx_neg, Scalar};
use crate::topology::{
    path_distribution, sanitize_graph, score_graph, PathDistribution, ReasoningGraph, TopologyWeights,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyParams<F> {
    pub lambda_epi: F,
    pub lambda_ale: F,
    /// Smoothing prior pulling node probabilities toward 1/2.
    pub tau_smooth: F,
    /// Re-elicited graphs per candidate.
    pub k: usize,
}

impl<F: Scalar> Default for UncertaintyParams<F> {
    fn default() -> Self {
        Self {
            lambda_epi: F::one(),
            lambda_ale: F::one(),
            tau_smooth: F::lit(0.05),
            k: 3,
        }
    }
}

impl<F: Scalar> UncertaintyParams<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_epi >= F::zero() && self.lambda_ale >= F::zero()) {
            return Err(Error::Config("lambda_epi and lambda_ale must be >= 0".into()));
        }
        if !(self.tau_smooth >= F::zero() && self.tau_smooth < F::lit(0.5)) {
            return Err(Error::Config(format!("tau_smooth = {} outside [0, 0.5)", self.tau_smooth)));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairWeightParams<F> {
    pub tau_w: F,
    pub w_min: F,
}

impl<F: Scalar> Default for PairWeightParams<F> {
    fn default() -> Self {
        Self {
            tau_w: F::lit(1.2),
            w_min: F::lit(0.05),
        }
    }
}

impl<F: Scalar> PairWeightParams<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_w > F::zero()) {
            return Err(Error::Config(format!("tau_w = {} must be > 0", self.tau_w)));
        }
        if !(self.w_min > F::zero() && self.w_min <= F::one()) {
            return Err(Error::Config(format!("w_min = {} outside (0, 1]", self.w_min)));
        }
        Ok(())
    }
}

/// Shannon entropy (nats) of a distribution given by its probabilities.
fn entropy<F: Scalar>(probs: impl IntoIterator<Item = F>) -> F {
    probs.into_iter().map(xlogx_neg).sum()
}

/// Generalized Jensen-Shannon divergence `H(mean) − mean(H)` over the union
/// support of the distributions. Zero for fewer than two distributions.
pub fn generalized_jsd<F: Scalar>(dists: &[PathDistribution<F>]) -> F {
    if dists.len() < 2 {
        return F::zero();
    }
    let k = F::from_usize_lossy(dists.len());
    let mut mixture = PathDistribution::new();
    for d in dists {
        for (key, &p) in d {
            *mixture.entry(key.clone()).or_insert(F::zero()) += p / k;
        }
    }
    let mean_entropy = dists.iter().map(|d| entropy(d.values().copied())).sum::<F>() / k;
    (entropy(mixture.values().copied()) - mean_entropy).max(F::zero())
}

/// Dispersion of already-computed sample scores and path distributions:
/// population variance of the scores plus their generalized JSD.
pub fn dispersion<F: Scalar>(scores: &[F], dists: &[PathDistribution<F>]) -> F {
    population_variance(scores) + generalized_jsd(dists)
}

/// Epistemic uncertainty across `K` re-elicited graphs of one response.
///
/// Each sample is scored from its raw form (cycles included) and its path
/// distribution is taken after sanitization.
pub fn epistemic_uncertainty<F: Scalar>(samples: &[ReasoningGraph<F>], w: &TopologyWeights<F>) -> Result<F> {
    if samples.is_empty() {
        return Err(Error::RejectedInput("epistemic uncertainty needs at least one graph sample".into()));
    }
    let mut scores = Vec::with_capacity(samples.len());
    let mut dists = Vec::with_capacity(samples.len());
    for g in samples {
        scores.push(score_graph(g, w)?);
        dists.push(path_distribution(&sanitize_graph(g)?)?);
    }
    Ok(dispersion(&scores, &dists))
}

/// `(p + τ) / (1 + 2τ)`
#[inline]
pub fn smooth_probability<F: Scalar>(p: F, tau: F) -> F {
    (p + tau) / (F::one() + F::lit(2.0) * tau)
}

/// Mean binary entropy of the smoothed node probabilities.
pub fn aleatoric_uncertainty<F: Scalar>(g: &ReasoningGraph<F>, tau: F) -> Result<F> {
    if g.nodes.is_empty() {
        return Err(Error::RejectedInput("aleatoric uncertainty needs at least one node".into()));
    }
    let entropies: Vec<F> = g
        .nodes
        .iter()
        .map(|n| binary_entropy(smooth_probability(n.p_v, tau)))
        .collect();
    Ok(mean(&entropies))
}

/// `λ_epi·u_epi + λ_ale·u_ale`
pub fn total_uncertainty<F: Scalar>(u_epi: F, u_ale: F, p: &UncertaintyParams<F>) -> Result<F> {
    if !(u_epi >= F::zero()) || !(u_ale >= F::zero()) {
        return Err(Error::RejectedInput(format!(
            "uncertainties must be >= 0 (u_epi = {u_epi}, u_ale = {u_ale})"
        )));
    }
    Ok(p.lambda_epi * u_epi + p.lambda_ale * u_ale)
}

/// `clip(τ_w / (1 + ū), w_min, 1)` with `ū` the mean of the two uncertainties.
pub fn pair_weight<F: Scalar>(u_plus: F, u_minus: F, p: &PairWeightParams<F>) -> F {
    let u_bar = (u_plus + u_minus) / F::lit(2.0);
    (p.tau_w / (F::one() + u_bar)).max(p.w_min).min(F::one())
}

/// Per-response uncertainty breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBreakdown<F> {
    pub epistemic: F,
    pub aleatoric: F,
    pub total: F,
}

/// Full uncertainty of one response from its `K` graph samples. The first
/// sample is the primary elicitation and supplies the aleatoric term.
pub fn response_uncertainty<F: Scalar>(
    samples: &[ReasoningGraph<F>],
    topo: &TopologyWeights<F>,
    p: &UncertaintyParams<F>,
) -> Result<UncertaintyBreakdown<F>> {
    let epistemic = epistemic_uncertainty(samples, topo)?;
    let primary = sanitize_graph(&samples[0])?;
    let aleatoric = aleatoric_uncertainty(&primary, p.tau_smooth)?;
    Ok(UncertaintyBreakdown {
        epistemic,
        aleatoric,
        total: total_uncertainty(epistemic, aleatoric, p)?,
    })
}
