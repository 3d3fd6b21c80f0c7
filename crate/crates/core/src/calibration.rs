//! Binary calibration metrics and temperature scaling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{log_sigmoid, Scalar};

pub const DEFAULT_BINS: usize = 10;

/// Bin edges over [0, 1]. Bins are half-open except the last, which includes 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig<F> {
    edges: Vec<F>,
}

impl<F: Scalar> Default for CalibrationConfig<F> {
    fn default() -> Self {
        Self::equal_width(DEFAULT_BINS).expect("default bin count is valid")
    }
}

impl<F: Scalar> CalibrationConfig<F> {
    pub fn equal_width(num_bins: usize) -> Result<Self> {
        if num_bins < 2 {
            return Err(Error::Config(format!("num_bins {num_bins} must be >= 2")));
        }
        let m = F::from_usize_lossy(num_bins);
        let edges = (0..=num_bins).map(|i| F::from_usize_lossy(i) / m).collect();
        Ok(Self { edges })
    }

    /// Custom edges; must start at 0, end at 1, and increase strictly.
    pub fn with_edges(edges: Vec<F>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::Config("need at least two bin edges".into()));
        }
        if edges[0] != F::zero() || *edges.last().unwrap() != F::one() {
            return Err(Error::Config("bin edges must start at 0 and end at 1".into()));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("bin edges must be strictly increasing".into()));
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[F] {
        &self.edges
    }

    pub fn num_bins(&self) -> usize {
        self.edges.len() - 1
    }

    /// Index of the bin holding `p`, with 1.0 landing in the last bin.
    pub fn bin_of(&self, p: F) -> usize {
        let last = self.num_bins() - 1;
        self.edges[1..self.edges.len() - 1].iter().take_while(|&&e| p >= e).count().min(last)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin<F> {
    pub lower: F,
    pub upper: F,
    pub count: usize,
    pub mean_confidence: F,
    pub accuracy: F,
    pub gap: F,
}

fn check_inputs<F: Scalar>(probs: &[F], labels: &[bool]) -> Result<()> {
    if probs.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} probabilities vs {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if let Some(i) = probs.iter().position(|&p| !(p >= F::zero() && p <= F::one())) {
        return Err(Error::validation(format!("probs[{i}]"), format!("{} outside [0, 1]", probs[i])));
    }
    Ok(())
}

fn label<F: Scalar>(y: bool) -> F {
    if y {
        F::one()
    } else {
        F::zero()
    }
}

pub fn ece<F: Scalar>(probs: &[F], labels: &[bool], cfg: &CalibrationConfig<F>) -> Result<F> {
    check_inputs(probs, labels)?;
    if probs.is_empty() {
        return Err(Error::RejectedInput("ece needs at least one prediction".into()));
    }
    let m = cfg.num_bins();
    let mut conf = vec![F::zero(); m];
    let mut hits = vec![F::zero(); m];
    let mut count = vec![0usize; m];
    for (&p, &y) in probs.iter().zip(labels) {
        let b = cfg.bin_of(p);
        conf[b] += p;
        hits[b] += label(y);
        count[b] += 1;
    }
    let n = F::from_usize_lossy(probs.len());
    // |B|/N · |conf/|B| − hits/|B|| = |conf − hits| / N
    Ok((0..m).map(|b| (conf[b] - hits[b]).abs()).sum::<F>() / n)
}

pub fn brier<F: Scalar>(probs: &[F], labels: &[bool]) -> Result<F> {
    check_inputs(probs, labels)?;
    if probs.is_empty() {
        return Err(Error::RejectedInput("brier needs at least one prediction".into()));
    }
    let sum: F = probs.iter().zip(labels).map(|(&p, &y)| (p - label::<F>(y)).powi(2)).sum();
    Ok(sum / F::from_usize_lossy(probs.len()))
}

pub fn reliability_bins<F: Scalar>(
    probs: &[F],
    labels: &[bool],
    cfg: &CalibrationConfig<F>,
) -> Result<Vec<ReliabilityBin<F>>> {
    check_inputs(probs, labels)?;
    let mut bins: Vec<(Vec<F>, usize)> = vec![(Vec::new(), 0); cfg.num_bins()];
    for (&p, &y) in probs.iter().zip(labels) {
        let slot = &mut bins[cfg.bin_of(p)];
        slot.0.push(p);
        slot.1 += usize::from(y);
    }
    Ok(bins
        .into_iter()
        .enumerate()
        .map(|(b, (ps, correct))| {
            let count = ps.len();
            let (mean_confidence, accuracy) = if count == 0 {
                (F::zero(), F::zero())
            } else {
                let c = F::from_usize_lossy(count);
                (ps.iter().copied().sum::<F>() / c, F::from_usize_lossy(correct) / c)
            };
            ReliabilityBin {
                lower: cfg.edges[b],
                upper: cfg.edges[b + 1],
                count,
                mean_confidence,
                accuracy,
                gap: if count == 0 { F::zero() } else { (mean_confidence - accuracy).abs() },
            }
        })
        .collect())
}

/// Count-weighted mean gap of a reliability table.
pub fn ece_from_bins<F: Scalar>(bins: &[ReliabilityBin<F>]) -> F {
    let n: usize = bins.iter().map(|b| b.count).sum();
    if n == 0 {
        return F::zero();
    }
    bins.iter().map(|b| F::from_usize_lossy(b.count) * b.gap).sum::<F>() / F::from_usize_lossy(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureScaler<F> {
    pub temperature: F,
}

impl<F: Scalar> TemperatureScaler<F> {
    pub fn new(temperature: F) -> Result<Self> {
        if !(temperature > F::zero()) || !temperature.is_finite() {
            return Err(Error::Config(format!("temperature {temperature} must be finite and > 0")));
        }
        Ok(Self { temperature })
    }

    pub fn calibrate(&self, logit: F) -> F {
        crate::scalar::sigmoid(logit / self.temperature)
    }
}

/// Summed binary negative log-likelihood of `labels` under σ(logit / T).
pub fn nll<F: Scalar>(logits: &[F], labels: &[bool], temperature: F) -> F {
    logits
        .iter()
        .zip(labels)
        .map(|(&l, &y)| {
            let z = l / temperature;
            -if y { log_sigmoid(z) } else { log_sigmoid(-z) }
        })
        .sum()
}

pub const LOG_T_BOUNDS: (f64, f64) = (-4.0, 4.0);
pub const LOG_T_TOLERANCE: f64 = 1e-6;

/// Golden-section search for T on log T ∈ [−4, 4].
pub fn fit_temperature<F: Scalar>(logits: &[F], labels: &[bool]) -> Result<TemperatureScaler<F>> {
    if logits.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} logits vs {} labels", logits.len(), labels.len())));
    }
    if let Some(i) = logits.iter().position(|l| !l.is_finite()) {
        return Err(Error::validation(format!("logits[{i}]"), "not finite"));
    }
    let positives = labels.iter().filter(|&&y| y).count();
    if logits.len() < 2 || positives == 0 || positives == labels.len() {
        return Err(Error::DegenerateFit("temperature fit needs both label classes".into()));
    }
    let f = |log_t: F| nll(logits, labels, log_t.exp());
    let inv_phi = (F::lit(5.0).sqrt() - F::one()) / F::lit(2.0);
    let (mut a, mut b) = (F::lit(LOG_T_BOUNDS.0), F::lit(LOG_T_BOUNDS.1));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > F::lit(LOG_T_TOLERANCE) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = (a + b) / F::lit(2.0);
    // never return something worse than the incumbent T = 1
    let best = if f(mid) <= f(F::zero()) { mid } else { F::zero() };
    TemperatureScaler::new(best.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport<F> {
    pub ece: F,
    pub brier: F,
    pub bins: Vec<ReliabilityBin<F>>,
    pub temperature: F,
    pub nll_before: F,
    pub nll_after: F,
}

/// Metrics on σ(logits) plus a fitted temperature.
pub fn calibration_report<F: Scalar>(
    logits: &[F],
    labels: &[bool],
    cfg: &CalibrationConfig<F>,
) -> Result<CalibrationReport<F>> {
    let probs: Vec<F> = logits.iter().map(|&l| crate::scalar::sigmoid(l)).collect();
    let scaler = fit_temperature(logits, labels)?;
    Ok(CalibrationReport {
        ece: ece(&probs, labels, cfg)?,
        brier: brier(&probs, labels)?,
        bins: reliability_bins(&probs, labels, cfg)?,
        temperature: scaler.temperature,
        nll_before: nll(logits, labels, F::one()),
        nll_after: nll(logits, labels, scaler.temperature),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::sigmoid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> CalibrationConfig<f64> {
        CalibrationConfig::default()
    }

    #[test]
    fn ece_examples() {
        assert_eq!(ece(&[0.0, 1.0, 1.0], &[false, true, true], &cfg()).unwrap(), 0.0);
        assert!((ece(&[0.8], &[true], &cfg()).unwrap() - 0.2).abs() < 1e-15);
        assert!((ece(&[0.8, 0.8], &[true, false], &cfg()).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(ece(&[0.8], &[true, false], &cfg()), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn bin_boundaries() {
        let c = cfg();
        assert_eq!(c.bin_of(0.0), 0);
        assert_eq!(c.bin_of(0.1), 1);
        assert_eq!(c.bin_of(0.0999), 0);
        assert_eq!(c.bin_of(0.9), 9);
        assert_eq!(c.bin_of(1.0), 9);
    }

    #[test]
    fn brier_examples() {
        assert_eq!(brier(&[1.0f64], &[true]).unwrap(), 0.0);
        assert!((brier(&[0.7f64], &[true]).unwrap() - 0.09).abs() < 1e-15);
        assert_eq!(brier(&[0.5, 0.5, 0.5], &[true, false, false]).unwrap(), 0.25);
    }

    #[test]
    fn custom_edges_and_empty_bins() {
        let c = CalibrationConfig::with_edges(vec![0.0, 0.5, 0.7, 0.9, 1.0]).unwrap();
        let bins = reliability_bins(&[0.55, 0.95, 1.0], &[true, true, false], &c).unwrap();
        assert_eq!(bins.len(), 4);
        assert_eq!(bins[0].count, 0);
        assert_eq!(bins[0].gap, 0.0);
        assert_eq!(bins[1].count, 1);
        assert_eq!(bins[3].count, 2);
        let single = CalibrationConfig::with_edges(vec![0.0, 1.0]).unwrap();
        let b = reliability_bins(&[0.2, 0.6], &[true, false], &single).unwrap();
        assert!((b[0].gap - (0.4f64 - 0.5).abs()).abs() < 1e-15);
        assert!(CalibrationConfig::<f64>::with_edges(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(CalibrationConfig::<f64>::equal_width(1).is_err());
    }

    #[test]
    fn temperature_recovers_generative_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t_star in [1.0, 2.0] {
            let mut logits = Vec::new();
            let mut labels = Vec::new();
            for _ in 0..10_000 {
                let z: f64 = rng.random_range(-4.0..4.0);
                labels.push(rng.random::<f64>() < sigmoid(z));
                logits.push(z * t_star);
            }
            let t = fit_temperature(&logits, &labels).unwrap().temperature;
            assert!((t - t_star).abs() <= 0.05, "T* {t_star}: got {t}");
            assert!(nll(&logits, &labels, t) <= nll(&logits, &labels, 1.0));
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        assert!(matches!(fit_temperature(&[1.0, 2.0], &[true, true]), Err(Error::DegenerateFit(_))));
    }

    proptest! {
        #[test]
        fn bins_aggregate_to_ece(
            data in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..200),
            m in 2usize..15,
        ) {
            let (p, y): (Vec<f64>, Vec<bool>) = data.into_iter().unzip();
            let c = CalibrationConfig::equal_width(m).unwrap();
            let e = ece(&p, &y, &c).unwrap();
            let agg = ece_from_bins(&reliability_bins(&p, &y, &c).unwrap());
            prop_assert!((e - agg).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&e));
            let b = brier(&p, &y).unwrap();
            prop_assert!((0.0..=1.0).contains(&b));
        }

        #[test]
        fn fitted_temperature_never_worse(
            data in prop::collection::vec((-6.0f64..6.0, any::<bool>()), 2..80),
        ) {
            let (l, y): (Vec<f64>, Vec<bool>) = data.into_iter().unzip();
            prop_assume!(y.iter().any(|&v| v) && y.iter().any(|&v| !v));
            let t = fit_temperature(&l, &y).unwrap().temperature;
            prop_assert!(nll(&l, &y, t) <= nll(&l, &y, 1.0));
        }
    }
}
