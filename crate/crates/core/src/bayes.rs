//! Monte-Carlo marginal likelihood and Bayes-factor comparison of three
//! daily-return models on a log-price window:
//!
//! * `BS` — constant drift: `r_i ~ N(mu, 1/tau)`.
//! * `PL` — power-law trajectory with mean-reverting residuals (the
//!   oscillation-free special case `C = 0`).
//! * `LPPL` — the full trajectory with mean-reverting residuals:
//!   `r_i ~ N(dH_i - alpha (q_{i-1} - H_{i-1}), 1/tau)`.
//!
//! The marginal likelihood `ln integral p(theta) p(Q|theta) dtheta` is
//! estimated by plain prior sampling: draw `mc_samples` parameter vectors
//! per repetition, average the likelihoods through a stable log-sum-exp,
//! and report the spread over repetitions. The likelihood conditions on the
//! first observation (products run over returns), and every time step is
//! one trading day.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lppl::LpplParams;
use crate::rng::{derive_seed, seeded, SeededRng};
use crate::timeseries::PriceSeries;

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Error)]
pub enum BayesError {
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("mc_samples must be >= 100, got {0}")]
    TooFewSamples(usize),
    #[error("repetitions must be >= 2, got {0}")]
    TooFewRepetitions(usize),
    #[error("critical time tc = {tc} must lie beyond the last index {last_index}")]
    TcInsideSeries { tc: f64, last_index: usize },
    #[error("all {samples} sampled likelihoods underflowed to -inf; the priors do not cover the data scale")]
    AllSamplesUnderflow { samples: usize },
    #[error("non-finite likelihood input: {0}")]
    NonFinite(String),
    #[error("evidence computed on different series: {a} vs {b}")]
    SeriesMismatch { a: String, b: String },
}

/// One-dimensional prior descriptor. Gamma uses the shape/scale
/// parametrization (`E[X] = shape * scale`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum PriorDist {
    Normal { mean: f64, sd: f64 },
    Gamma { shape: f64, scale: f64 },
    Beta { alpha: f64, beta: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl PriorDist {
    fn validate(&self, name: &str) -> Result<(), BayesError> {
        let ok = match self {
            PriorDist::Normal { mean, sd } => mean.is_finite() && *sd > 0.0,
            PriorDist::Gamma { shape, scale } => *shape > 0.0 && *scale > 0.0,
            PriorDist::Beta { alpha, beta } => *alpha > 0.0 && *beta > 0.0,
            PriorDist::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
        };
        if ok {
            Ok(())
        } else {
            Err(BayesError::InvalidPrior(format!("{name}: {self:?}")))
        }
    }

    fn sample(&self, rng: &mut SeededRng) -> f64 {
        match *self {
            PriorDist::Normal { mean, sd } => Normal::new(mean, sd).unwrap().sample(rng),
            PriorDist::Gamma { shape, scale } => Gamma::new(shape, scale).unwrap().sample(rng),
            PriorDist::Beta { alpha, beta } => Beta::new(alpha, beta).unwrap().sample(rng),
            PriorDist::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

/// Priors for every sampled parameter, defaulting to values tuned for
/// roughly thousand-day daily windows with final log-price near 6.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    pub mu: PriorDist,
    /// Precision `tau = 1/sigma^2` of the daily return innovation.
    pub tau: PriorDist,
    pub alpha: PriorDist,
    pub a: PriorDist,
    pub b: PriorDist,
    pub c: PriorDist,
    pub beta: PriorDist,
    pub omega: PriorDist,
    pub phi: PriorDist,
    /// Prior on `tc - t_N`, the gap between the critical time and the last
    /// observation.
    pub tc_minus_last: PriorDist,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            mu: PriorDist::Normal {
                mean: 0.0003,
                sd: 0.01,
            },
            tau: PriorDist::Gamma {
                shape: 1.0,
                scale: 1e5,
            },
            alpha: PriorDist::Gamma {
                shape: 1.0,
                scale: 0.05,
            },
            // E[A] = 6, Var[A] = 0.05 read as a variance; see
            // `with_literal_a_sd` for the alternative reading.
            a: PriorDist::Normal {
                mean: 6.0,
                sd: 0.05f64.sqrt(),
            },
            b: PriorDist::Gamma {
                shape: 1.0,
                scale: 0.01,
            },
            c: PriorDist::Uniform { lo: 0.0, hi: 1.0 },
            beta: PriorDist::Beta {
                alpha: 40.0,
                beta: 30.0,
            },
            omega: PriorDist::Gamma {
                shape: 16.0,
                scale: 0.4,
            },
            phi: PriorDist::Uniform {
                lo: 0.0,
                hi: 2.0 * std::f64::consts::PI,
            },
            tc_minus_last: PriorDist::Gamma {
                shape: 1.0,
                scale: 30.0,
            },
        }
    }
}

impl PriorSpec {
    /// Alternative reading of the `A` prior where 0.05 is the standard
    /// deviation rather than the variance.
    pub fn with_literal_a_sd(mut self) -> Self {
        self.a = PriorDist::Normal {
            mean: 6.0,
            sd: 0.05,
        };
        self
    }

    fn validate(&self) -> Result<(), BayesError> {
        self.mu.validate("mu")?;
        self.tau.validate("tau")?;
        self.alpha.validate("alpha")?;
        self.a.validate("a")?;
        self.b.validate("b")?;
        self.c.validate("c")?;
        self.beta.validate("beta")?;
        self.omega.validate("omega")?;
        self.phi.validate("phi")?;
        self.tc_minus_last.validate("tc_minus_last")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
pub enum ModelKind {
    #[serde(rename = "BS")]
    Bs,
    #[serde(rename = "PL")]
    Pl,
    #[serde(rename = "LPPL")]
    Lppl,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Bs => "BS",
            ModelKind::Pl => "PL",
            ModelKind::Lppl => "LPPL",
        }
    }
}

/// Constant-drift parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BsTheta {
    pub mu: f64,
    pub tau: f64,
}

/// Power-law (C = 0) parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlTheta {
    pub tau: f64,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub beta: f64,
    pub tc: f64,
}

/// Full trajectory parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpplTheta {
    pub tau: f64,
    pub alpha: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub beta: f64,
    pub omega: f64,
    pub phi: f64,
    pub tc: f64,
}

/// A model with its parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelTheta {
    Bs(BsTheta),
    Pl(PlTheta),
    Lppl(LpplTheta),
}

/// Returns with the mean-reversion drift removed:
/// `r_t + alpha (q_{t-1} - H(t-1))`, leaving `dH_t + u_t`.
pub fn adjusted_returns(
    series: &PriceSeries,
    params: &LpplParams,
    alpha: f64,
) -> Result<Vec<f64>, BayesError> {
    let last = series.last_index();
    if params.tc <= last as f64 {
        return Err(BayesError::TcInsideSeries {
            tc: params.tc,
            last_index: last,
        });
    }
    let q = series.log_prices();
    Ok((1..=last)
        .map(|t| {
            let h_prev = params.a - params.power_term((t - 1) as f64);
            (q[t] - q[t - 1]) + alpha * (q[t - 1] - h_prev)
        })
        .collect())
}

/// Log likelihood of the return series under the given model, conditioning
/// on the first observation.
pub fn log_likelihood(theta: &ModelTheta, series: &PriceSeries) -> Result<f64, BayesError> {
    match theta {
        ModelTheta::Bs(t) => bs_log_likelihood(t, series),
        ModelTheta::Pl(t) => pl_log_likelihood(t, series),
        ModelTheta::Lppl(t) => lppl_log_likelihood(t, series),
    }
}

fn check_tau(tau: f64) -> Result<(), BayesError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(BayesError::NonFinite(format!("tau = {tau}")));
    }
    Ok(())
}

fn bs_log_likelihood(theta: &BsTheta, series: &PriceSeries) -> Result<f64, BayesError> {
    check_tau(theta.tau)?;
    if !theta.mu.is_finite() {
        return Err(BayesError::NonFinite(format!("mu = {}", theta.mu)));
    }
    let q = series.log_prices();
    let n = (q.len() - 1) as f64;
    let ss: f64 = q
        .windows(2)
        .map(|w| {
            let e = (w[1] - w[0]) - theta.mu;
            e * e
        })
        .sum();
    Ok(0.5 * n * (theta.tau.ln() - LN_2PI) - 0.5 * theta.tau * ss)
}

fn pl_log_likelihood(theta: &PlTheta, series: &PriceSeries) -> Result<f64, BayesError> {
    check_tau(theta.tau)?;
    let last = series.last_index();
    if theta.tc <= last as f64 {
        return Err(BayesError::TcInsideSeries {
            tc: theta.tc,
            last_index: last,
        });
    }
    let q = series.log_prices();
    let mut ss = 0.0;
    // Power term B (tc - t)^beta without any oscillation.
    let mut prev_term = theta.b * (theta.beta * theta.tc.ln()).exp();
    let mut prev_h = theta.a - prev_term;
    for (i, w) in q.windows(2).enumerate() {
        let t_next = (i + 1) as f64;
        let term = theta.b * (theta.beta * (theta.tc - t_next).ln()).exp();
        let delta_h = prev_term - term;
        let mean = delta_h - theta.alpha * (w[0] - prev_h);
        let e = (w[1] - w[0]) - mean;
        ss += e * e;
        prev_term = term;
        prev_h = theta.a - term;
    }
    if !ss.is_finite() {
        return Err(BayesError::NonFinite("power-law residual sum".into()));
    }
    let n = (q.len() - 1) as f64;
    Ok(0.5 * n * (theta.tau.ln() - LN_2PI) - 0.5 * theta.tau * ss)
}

fn lppl_log_likelihood(theta: &LpplTheta, series: &PriceSeries) -> Result<f64, BayesError> {
    check_tau(theta.tau)?;
    let last = series.last_index();
    if theta.tc <= last as f64 {
        return Err(BayesError::TcInsideSeries {
            tc: theta.tc,
            last_index: last,
        });
    }
    let q = series.log_prices();
    let damping = 1.0 / (1.0 + (theta.omega / theta.beta).powi(2)).sqrt();
    let power_term = |t: f64| -> f64 {
        let ln_dt = (theta.tc - t).ln();
        let amplitude = theta.b * (theta.beta * ln_dt).exp();
        amplitude * (1.0 + damping * theta.c * (theta.omega * ln_dt + theta.phi).cos())
    };
    let mut ss = 0.0;
    let mut prev_term = power_term(0.0);
    for (i, w) in q.windows(2).enumerate() {
        let term = power_term((i + 1) as f64);
        let delta_h = prev_term - term;
        let mean = delta_h - theta.alpha * (w[0] - (theta.a - prev_term));
        let e = (w[1] - w[0]) - mean;
        ss += e * e;
        prev_term = term;
    }
    if !ss.is_finite() {
        return Err(BayesError::NonFinite("trajectory residual sum".into()));
    }
    let n = (q.len() - 1) as f64;
    Ok(0.5 * n * (theta.tau.ln() - LN_2PI) - 0.5 * theta.tau * ss)
}

/// Draw a parameter vector for `model` from the priors.
pub fn sample_theta(
    model: ModelKind,
    priors: &PriorSpec,
    last_index: usize,
    rng: &mut SeededRng,
) -> ModelTheta {
    match model {
        ModelKind::Bs => ModelTheta::Bs(BsTheta {
            mu: priors.mu.sample(rng),
            tau: priors.tau.sample(rng),
        }),
        ModelKind::Pl => ModelTheta::Pl(PlTheta {
            tau: priors.tau.sample(rng),
            alpha: priors.alpha.sample(rng),
            a: priors.a.sample(rng),
            b: priors.b.sample(rng),
            beta: priors.beta.sample(rng),
            tc: last_index as f64 + priors.tc_minus_last.sample(rng),
        }),
        ModelKind::Lppl => ModelTheta::Lppl(LpplTheta {
            tau: priors.tau.sample(rng),
            alpha: priors.alpha.sample(rng),
            a: priors.a.sample(rng),
            b: priors.b.sample(rng),
            c: priors.c.sample(rng),
            beta: priors.beta.sample(rng),
            omega: priors.omega.sample(rng),
            phi: priors.phi.sample(rng),
            tc: last_index as f64 + priors.tc_minus_last.sample(rng),
        }),
    }
}

/// `ln(mean(exp(x_i)))` via the usual max-shift; `-inf` for an empty or
/// fully underflowed input.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + (sum / values.len() as f64).ln()
}

/// Monte-Carlo marginal likelihood evidence for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvidence {
    pub model: ModelKind,
    /// One log marginal likelihood estimate per repetition.
    pub log_ml_estimates: Vec<f64>,
    pub quantile_2_5: f64,
    pub quantile_97_5: f64,
    pub mc_samples_per_rep: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub series_fingerprint: String,
}

impl ModelEvidence {
    pub fn mean_log_ml(&self) -> f64 {
        self.log_ml_estimates.iter().sum::<f64>() / self.log_ml_estimates.len() as f64
    }
}

/// Estimate the log marginal likelihood by prior sampling.
///
/// Each repetition draws `mc_samples` parameter vectors from a generator
/// seeded with `derive_seed(seed, repetition)`, so the result is
/// bit-identical for a fixed `(seed, mc_samples, repetitions)` regardless
/// of how the repetitions are scheduled.
pub fn log_marginal_likelihood(
    model: ModelKind,
    series: &PriceSeries,
    priors: &PriorSpec,
    mc_samples: usize,
    repetitions: usize,
    seed: u64,
) -> Result<ModelEvidence, BayesError> {
    priors.validate()?;
    if mc_samples < 100 {
        return Err(BayesError::TooFewSamples(mc_samples));
    }
    if repetitions < 2 {
        return Err(BayesError::TooFewRepetitions(repetitions));
    }

    let last_index = series.last_index();
    let estimates: Vec<f64> = (0..repetitions as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = seeded(derive_seed(seed, rep));
            let mut lls = Vec::with_capacity(mc_samples);
            for _ in 0..mc_samples {
                let theta = sample_theta(model, priors, last_index, &mut rng);
                // Sampled support respects the likelihood preconditions
                // (tc > t_N under the Gamma prior), so errors here are bugs.
                let ll = log_likelihood(&theta, series)
                    .expect("prior samples satisfy likelihood preconditions");
                lls.push(ll);
            }
            log_mean_exp(&lls)
        })
        .collect();

    if estimates.iter().any(|e| e.is_infinite() && *e < 0.0) {
        return Err(BayesError::AllSamplesUnderflow {
            samples: mc_samples,
        });
    }

    let mut sorted = estimates.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(ModelEvidence {
        model,
        quantile_2_5: quantile(&sorted, 0.025),
        quantile_97_5: quantile(&sorted, 0.975),
        log_ml_estimates: estimates,
        mc_samples_per_rep: mc_samples,
        repetitions,
        seed,
        series_fingerprint: series.fingerprint(),
    })
}

/// Bayes factor `exp(mean log-ML a - mean log-ML b)`; both sides must refer
/// to the same series.
pub fn bayes_factor(a: &ModelEvidence, b: &ModelEvidence) -> Result<f64, BayesError> {
    if a.series_fingerprint != b.series_fingerprint {
        return Err(BayesError::SeriesMismatch {
            a: a.series_fingerprint.clone(),
            b: b.series_fingerprint.clone(),
        });
    }
    Ok((a.mean_log_ml() - b.mean_log_ml()).exp())
}

/// Linear-interpolation quantile of an ascending slice.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
