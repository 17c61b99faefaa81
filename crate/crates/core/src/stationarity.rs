//! Unit-root and autoregression diagnostics on calibration residuals.
//!
//! The fitted residuals have mean zero by construction, so every regression
//! here is the no-constant, no-trend form matching the residual model
//! `nu_{t+1} - nu_t = -alpha nu_t + u_t`: Dickey-Fuller is the t-ratio of
//! the slope of `d nu_t` on `nu_t`, Phillips-Perron corrects the same
//! statistic with a Newey-West (Bartlett kernel) long-run variance, and the
//! AR(1) estimate is the sign-flipped slope of that regression.
//!
//! Critical values for the no-constant statistic: 1% and 5% are the
//! standard asymptotic values (-2.567, -1.941). The 0.1% threshold used by
//! the rejection flags is -3.588, the value the residual qualification
//! protocol in this toolkit standardizes on; our own simulation of the null
//! (1e6 seeded random walks, n = 1000) puts the 0.1% quantile near
//! [`DF_CRITICAL_0_001_SIMULATED`] instead, and both numbers are exposed so
//! downstream consumers can pick either.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatError {
    #[error("series of length {len} is shorter than the minimum {min}")]
    TooShort { len: usize, min: usize },
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("max_lag {max_lag} too large for series of length {len} (need max_lag < len/4)")]
    MaxLagTooLarge { max_lag: usize, len: usize },
    #[error("max_order {max_order} too large for series of length {len} (need len > 10*max_order)")]
    MaxOrderTooLarge { max_order: usize, len: usize },
    #[error("max_order must be >= 1")]
    MaxOrderZero,
    #[error("regression failed: {0}")]
    Regression(String),
}

/// Significance levels used throughout the unit-root reports.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash,
)]
pub enum SignificanceLevel {
    #[serde(rename = "0.001")]
    OnePerMille,
    #[serde(rename = "0.01")]
    OnePercent,
    #[serde(rename = "0.05")]
    FivePercent,
}

impl SignificanceLevel {
    pub const ALL: [SignificanceLevel; 3] = [
        SignificanceLevel::OnePerMille,
        SignificanceLevel::OnePercent,
        SignificanceLevel::FivePercent,
    ];

    pub fn value(self) -> f64 {
        match self {
            SignificanceLevel::OnePerMille => 0.001,
            SignificanceLevel::OnePercent => 0.01,
            SignificanceLevel::FivePercent => 0.05,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SignificanceLevel::OnePerMille => "0.001",
            SignificanceLevel::OnePercent => "0.01",
            SignificanceLevel::FivePercent => "0.05",
        }
    }
}

/// No-constant Dickey-Fuller / Phillips-Perron critical values adopted by
/// the rejection flags.
pub fn critical_values() -> BTreeMap<SignificanceLevel, f64> {
    BTreeMap::from([
        (SignificanceLevel::OnePerMille, -3.588),
        (SignificanceLevel::OnePercent, -2.567),
        (SignificanceLevel::FivePercent, -1.941),
    ])
}

/// 0.1% quantile of the no-constant Dickey-Fuller null distribution
/// estimated by simulation (1e6 seeded random walks of length 1000); kept
/// alongside the adopted -3.588 because the two differ. The acceptance
/// tests validate this constant by re-simulation.
pub const DF_CRITICAL_0_001_SIMULATED: f64 = -3.29;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitRootTest {
    DickeyFuller,
    PhillipsPerron,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressionSpec {
    NoConstant,
}

/// Outcome of a unit-root test; `reject[level]` iff
/// `statistic < critical_values[level]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRootReport {
    pub test: UnitRootTest,
    /// The t-ratio form of the statistic.
    pub statistic: f64,
    pub critical_values: BTreeMap<SignificanceLevel, f64>,
    pub reject: BTreeMap<SignificanceLevel, bool>,
    pub regression_spec: RegressionSpec,
    /// Augmentation lags for Dickey-Fuller, Newey-West bandwidth for
    /// Phillips-Perron.
    pub bandwidth_or_lags: usize,
}

impl UnitRootReport {
    fn from_statistic(test: UnitRootTest, statistic: f64, bandwidth_or_lags: usize) -> Self {
        let critical_values = critical_values();
        let reject = critical_values
            .iter()
            .map(|(&level, &cv)| (level, statistic < cv))
            .collect();
        Self {
            test,
            statistic,
            critical_values,
            reject,
            regression_spec: RegressionSpec::NoConstant,
            bandwidth_or_lags,
        }
    }

    pub fn rejects_at(&self, level: SignificanceLevel) -> bool {
        self.reject[&level]
    }
}

/// AR(1) estimate from the residual model `d nu_t = -alpha nu_t + u_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Report {
    /// Estimated mean-reversion rate (positive when reverting).
    pub alpha_hat: f64,
    pub std_error: f64,
    /// `-alpha_hat / std_error`; negative values signal mean reversion.
    pub t_statistic: f64,
    pub innovation_variance: f64,
}

/// Criterion values and minimizers of the autoregression order search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArOrderReport {
    pub order_sic: usize,
    pub order_hq: usize,
    /// Rows `(order, sic, hq)` for orders `0..=max_order`.
    pub criterion_values: Vec<(usize, f64, f64)>,
    /// The minimizer under the criterion the caller asked for.
    pub selected: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum InfoCriterion {
    Sic,
    Hq,
}

struct DfRegression {
    slope: f64,
    std_error: f64,
    t_statistic: f64,
    /// OLS residuals of the difference regression.
    residuals: Vec<f64>,
    /// Regression sample size (number of differences).
    sample: usize,
    /// `RSS / (sample - k)`.
    sigma_sq: f64,
}

/// OLS of `d nu_t` on `nu_t` (and `lags` lagged differences), no constant.
fn df_regression(resid: &[f64], lags: usize) -> Result<DfRegression, StatError> {
    let n = resid.len();
    let diffs: Vec<f64> = resid.windows(2).map(|w| w[1] - w[0]).collect();
    let k = 1 + lags;
    if diffs.len() < lags + k + 2 {
        return Err(StatError::TooShort {
            len: n,
            min: 2 * lags + 4,
        });
    }
    let m = diffs.len() - lags; // usable observations

    if lags == 0 {
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for t in 0..m {
            sxx += resid[t] * resid[t];
            sxy += resid[t] * diffs[t];
        }
        if sxx <= 0.0 {
            return Err(StatError::ZeroVariance);
        }
        let slope = sxy / sxx;
        let residuals: Vec<f64> = (0..m).map(|t| diffs[t] - slope * resid[t]).collect();
        let rss: f64 = residuals.iter().map(|e| e * e).sum();
        let sigma_sq = rss / (m - 1) as f64;
        if sigma_sq <= 0.0 {
            return Err(StatError::ZeroVariance);
        }
        let std_error = (sigma_sq / sxx).sqrt();
        return Ok(DfRegression {
            slope,
            std_error,
            t_statistic: slope / std_error,
            residuals,
            sample: m,
            sigma_sq,
        });
    }

    // Augmented form via the general least-squares path.
    let mut design = DMatrix::zeros(m, k);
    let mut target = DVector::zeros(m);
    for row in 0..m {
        let t = row + lags; // index into diffs; level index matches diffs[t]
        design[(row, 0)] = resid[t];
        for j in 1..=lags {
            design[(row, j)] = diffs[t - j];
        }
        target[row] = diffs[t];
    }
    let qr = design.clone().qr();
    let r = qr.r();
    let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if diag_max == 0.0 || (0..k).any(|i| r[(i, i)].abs() < 1e-12 * diag_max) {
        return Err(StatError::ZeroVariance);
    }
    let coeffs = r
        .solve_upper_triangular(&(qr.q().transpose() * &target))
        .ok_or_else(|| StatError::Regression("singular design".into()))?;
    let fitted = design * &coeffs;
    let residuals: Vec<f64> = (0..m).map(|i| target[i] - fitted[i]).collect();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let sigma_sq = rss / (m - k) as f64;
    if sigma_sq <= 0.0 {
        return Err(StatError::ZeroVariance);
    }
    // Standard error of the level coefficient from (X'X)^{-1}.
    let xtx = {
        let mut design2 = DMatrix::zeros(m, k);
        for row in 0..m {
            let t = row + lags;
            design2[(row, 0)] = resid[t];
            for j in 1..=lags {
                design2[(row, j)] = diffs[t - j];
            }
        }
        design2.transpose() * design2
    };
    let xtx_inv = xtx
        .try_inverse()
        .ok_or_else(|| StatError::Regression("X'X not invertible".into()))?;
    let std_error = (sigma_sq * xtx_inv[(0, 0)]).sqrt();
    let slope = coeffs[0];
    Ok(DfRegression {
        slope,
        std_error,
        t_statistic: slope / std_error,
        residuals,
        sample: m,
        sigma_sq,
    })
}

/// Unaugmented (0-lag) Dickey-Fuller test, no constant, no trend.
pub fn dickey_fuller(resid: &[f64]) -> Result<UnitRootReport, StatError> {
    dickey_fuller_with_lags(resid, 0)
}

/// Dickey-Fuller with `lags` augmentation terms.
pub fn dickey_fuller_with_lags(resid: &[f64], lags: usize) -> Result<UnitRootReport, StatError> {
    if resid.len() < 25 {
        return Err(StatError::TooShort {
            len: resid.len(),
            min: 25,
        });
    }
    let reg = df_regression(resid, lags)?;
    Ok(UnitRootReport::from_statistic(
        UnitRootTest::DickeyFuller,
        reg.t_statistic,
        lags,
    ))
}

/// Bartlett-kernel long-run variance
/// `gamma_0 + 2 sum_{l<=L} (1 - l/(L+1)) gamma_l` with `gamma_l`
/// normalized by the full sample size.
pub fn newey_west_long_run_variance(u: &[f64], bandwidth: usize) -> f64 {
    let m = u.len() as f64;
    let gamma = |lag: usize| -> f64 {
        u.iter()
            .skip(lag)
            .zip(u.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / m
    };
    let mut lrv = gamma(0);
    for lag in 1..=bandwidth.min(u.len().saturating_sub(1)) {
        let weight = 1.0 - lag as f64 / (bandwidth as f64 + 1.0);
        lrv += 2.0 * weight * gamma(lag);
    }
    lrv
}

/// Automatic Newey-West bandwidth, `floor(4 (n/100)^{2/9})`.
pub fn default_bandwidth(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Phillips-Perron Z_t test with the automatic bandwidth.
pub fn phillips_perron(resid: &[f64]) -> Result<UnitRootReport, StatError> {
    phillips_perron_with_bandwidth(resid, default_bandwidth(resid.len()))
}

/// Phillips-Perron Z_t with an explicit Newey-West bandwidth; bandwidth 0
/// reproduces the Dickey-Fuller statistic exactly.
pub fn phillips_perron_with_bandwidth(
    resid: &[f64],
    bandwidth: usize,
) -> Result<UnitRootReport, StatError> {
    if resid.len() < 25 {
        return Err(StatError::TooShort {
            len: resid.len(),
            min: 25,
        });
    }
    let reg = df_regression(resid, 0)?;
    let m = reg.sample as f64;
    let gamma0 = reg.residuals.iter().map(|e| e * e).sum::<f64>() / m;
    let lambda_sq = newey_west_long_run_variance(&reg.residuals, bandwidth).max(1e-300);
    let lambda = lambda_sq.sqrt();
    let s = reg.sigma_sq.sqrt();

    let statistic = (gamma0 / lambda_sq).sqrt() * reg.t_statistic
        - (lambda_sq - gamma0) * m * reg.std_error / (2.0 * lambda * s);
    Ok(UnitRootReport::from_statistic(
        UnitRootTest::PhillipsPerron,
        statistic,
        bandwidth,
    ))
}

/// Estimate the mean-reversion rate from `d nu_t = -alpha nu_t + u_t`.
pub fn estimate_ar1(resid: &[f64]) -> Result<Ar1Report, StatError> {
    if resid.len() < 10 {
        return Err(StatError::TooShort {
            len: resid.len(),
            min: 10,
        });
    }
    let reg = df_regression(resid, 0)?;
    Ok(Ar1Report {
        alpha_hat: -reg.slope,
        std_error: reg.std_error,
        t_statistic: reg.t_statistic,
        innovation_variance: reg.sigma_sq,
    })
}

/// Partial autocorrelations for lags `1..=max_lag` plus the white-noise
/// two-standard-error band `2/sqrt(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacfReport {
    pub values: Vec<f64>,
    pub two_se_band: f64,
}

/// PACF via the Durbin-Levinson recursion on the sample autocorrelations.
pub fn pacf(series: &[f64], max_lag: usize) -> Result<PacfReport, StatError> {
    let n = series.len();
    if max_lag == 0 || 4 * max_lag >= n {
        return Err(StatError::MaxLagTooLarge { max_lag, len: n });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0 = series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return Err(StatError::ZeroVariance);
    }
    let rho: Vec<f64> = (1..=max_lag)
        .map(|lag| {
            series
                .iter()
                .skip(lag)
                .zip(series.iter())
                .map(|(a, b)| (a - mean) * (b - mean))
                .sum::<f64>()
                / n as f64
                / c0
        })
        .collect();

    let mut pacf = Vec::with_capacity(max_lag);
    let mut phi_prev: Vec<f64> = Vec::new();
    for k in 1..=max_lag {
        let phi_kk = if k == 1 {
            rho[0]
        } else {
            let num = rho[k - 1]
                - (1..k).map(|j| phi_prev[j - 1] * rho[k - 1 - j]).sum::<f64>();
            let den = 1.0 - (1..k).map(|j| phi_prev[j - 1] * rho[j - 1]).sum::<f64>();
            if den.abs() < 1e-300 {
                0.0
            } else {
                num / den
            }
        };
        let mut phi_next = vec![0.0; k];
        for j in 1..k {
            phi_next[j - 1] = phi_prev[j - 1] - phi_kk * phi_prev[k - 1 - j];
        }
        phi_next[k - 1] = phi_kk;
        pacf.push(phi_kk);
        phi_prev = phi_next;
    }

    Ok(PacfReport {
        values: pacf,
        two_se_band: 2.0 / (n as f64).sqrt(),
    })
}

/// Select the autoregression order on a common effective sample.
///
/// AR(k) is fitted without intercept for k = 0..=max_order; the first
/// `max_order` observations are dropped for every k so the criteria are
/// comparable. Criterion values are `ln(sigma_k^2) + k * penalty(n_eff)`
/// with penalty `ln(n)/n` (SIC) and `2 ln(ln n)/n` (HQ).
pub fn select_ar_order(
    resid: &[f64],
    max_order: usize,
    criterion: InfoCriterion,
) -> Result<ArOrderReport, StatError> {
    if max_order < 1 {
        return Err(StatError::MaxOrderZero);
    }
    let n = resid.len();
    if n <= 10 * max_order {
        return Err(StatError::MaxOrderTooLarge { max_order, len: n });
    }
    let n_eff = n - max_order;
    let ln_n = (n_eff as f64).ln();
    let sic_penalty = ln_n / n_eff as f64;
    let hq_penalty = 2.0 * ln_n.ln() / n_eff as f64;

    let mut rows = Vec::with_capacity(max_order + 1);
    for k in 0..=max_order {
        let rss = if k == 0 {
            resid[max_order..].iter().map(|x| x * x).sum::<f64>()
        } else {
            let mut design = DMatrix::zeros(n_eff, k);
            let mut target = DVector::zeros(n_eff);
            for row in 0..n_eff {
                let t = row + max_order;
                for j in 1..=k {
                    design[(row, j - 1)] = resid[t - j];
                }
                target[row] = resid[t];
            }
            let qr = design.clone().qr();
            let r = qr.r();
            let diag_max = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
            if diag_max == 0.0 {
                return Err(StatError::ZeroVariance);
            }
            let coeffs = r
                .solve_upper_triangular(&(qr.q().transpose() * &target))
                .ok_or_else(|| StatError::Regression("singular AR design".into()))?;
            let fitted = design * coeffs;
            (0..n_eff).map(|i| (target[i] - fitted[i]).powi(2)).sum()
        };
        let sigma_sq = rss / n_eff as f64;
        if sigma_sq <= 0.0 {
            return Err(StatError::ZeroVariance);
        }
        let ln_sigma = sigma_sq.ln();
        rows.push((
            k,
            ln_sigma + k as f64 * sic_penalty,
            ln_sigma + k as f64 * hq_penalty,
        ));
    }

    let order_sic = rows
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|r| r.0)
        .unwrap();
    let order_hq = rows
        .iter()
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .map(|r| r.0)
        .unwrap();
    let selected = match criterion {
        InfoCriterion::Sic => order_sic,
        InfoCriterion::Hq => order_hq,
    };
    Ok(ArOrderReport {
        order_sic,
        order_hq,
        criterion_values: rows,
        selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_seed, seeded};
    use rand_distr::{Distribution, Normal};

    fn ar1_series(alpha: f64, sigma: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = seeded(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut x = vec![0.0];
        for _ in 1..n {
            let prev = *x.last().unwrap();
            x.push((1.0 - alpha) * prev + noise.sample(&mut rng));
        }
        x
    }

    fn random_walk(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = seeded(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = vec![0.0];
        for _ in 1..n {
            x.push(x.last().unwrap() + noise.sample(&mut rng));
        }
        x
    }

    #[test]
    fn df_statistic_on_mean_reverting_series() {
        // Deterministic strongly mean-reverting series: nu_t = (-0.5)^t.
        let series: Vec<f64> = (0..60).map(|t| (-0.5f64).powi(t)).collect();
        let report = dickey_fuller(&series).unwrap();
        assert!(report.statistic < -10.0, "statistic {}", report.statistic);
        for level in SignificanceLevel::ALL {
            assert!(report.rejects_at(level));
        }
    }

    #[test]
    fn df_size_on_random_walks() {
        let reps = 400;
        let mut rejections = 0;
        for i in 0..reps {
            let x = random_walk(500, derive_seed(1000, i));
            let report = dickey_fuller(&x).unwrap();
            if report.rejects_at(SignificanceLevel::FivePercent) {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / reps as f64;
        assert!(
            (rate - 0.05).abs() < 0.03,
            "5% test rejected {rate} of random walks"
        );
    }

    #[test]
    fn df_detects_ar1_alternative() {
        let x = ar1_series(0.03, 0.0084, 946, 7);
        let report = dickey_fuller(&x).unwrap();
        assert!(
            report.rejects_at(SignificanceLevel::OnePercent),
            "statistic {}",
            report.statistic
        );
        // The statistic concentrates near -alpha/se ~ -3.8 at this scale.
        assert!(report.statistic < -2.5 && report.statistic > -6.0);
    }

    #[test]
    fn pp_close_to_df_for_iid_innovations() {
        let x = ar1_series(0.05, 0.01, 800, 11);
        let df = dickey_fuller(&x).unwrap();
        let pp = phillips_perron(&x).unwrap();
        assert!(
            (df.statistic - pp.statistic).abs() < 0.3,
            "df {} vs pp {}",
            df.statistic,
            pp.statistic
        );
    }

    #[test]
    fn pp_equals_df_at_zero_bandwidth() {
        let x = ar1_series(0.04, 0.01, 300, 13);
        let df = dickey_fuller(&x).unwrap();
        let pp = phillips_perron_with_bandwidth(&x, 0).unwrap();
        assert_eq!(df.statistic, pp.statistic);
    }

    #[test]
    fn pp_corrects_ma1_increments_where_df_over_rejects() {
        // Random walk whose increments are MA(1) with positive theta: the
        // unaugmented DF over-rejects, PP stays near nominal size.
        let reps = 300;
        let theta = 0.5;
        let mut df_rejects = 0;
        let mut pp_rejects = 0;
        for i in 0..reps {
            let mut rng = seeded(derive_seed(2000, i));
            let noise = Normal::new(0.0, 1.0).unwrap();
            let mut prev_eps = noise.sample(&mut rng);
            let mut x = vec![0.0];
            for _ in 1..600 {
                let eps: f64 = noise.sample(&mut rng);
                x.push(x.last().unwrap() + eps + theta * prev_eps);
                prev_eps = eps;
            }
            if dickey_fuller(&x)
                .unwrap()
                .rejects_at(SignificanceLevel::FivePercent)
            {
                df_rejects += 1;
            }
            if phillips_perron(&x)
                .unwrap()
                .rejects_at(SignificanceLevel::FivePercent)
            {
                pp_rejects += 1;
            }
        }
        let df_rate = df_rejects as f64 / reps as f64;
        let pp_rate = pp_rejects as f64 / reps as f64;
        assert!(
            (pp_rate - 0.05).abs() < 0.03,
            "PP size {pp_rate} outside 5% +- 3%"
        );
        assert!(
            df_rate > pp_rate,
            "DF ({df_rate}) should over-reject relative to PP ({pp_rate})"
        );
    }

    #[test]
    fn ar1_estimate_recovers_alpha() {
        let alpha = 0.05;
        let x = ar1_series(alpha, 0.01, 5000, 3);
        let report = estimate_ar1(&x).unwrap();
        assert!(
            (report.alpha_hat - alpha).abs() < 3.0 * report.std_error,
            "alpha_hat {} se {}",
            report.alpha_hat,
            report.std_error
        );
        assert!(report.innovation_variance > 0.0);
    }

    #[test]
    fn ar1_on_white_noise_gives_unit_alpha() {
        let mut rng = seeded(17);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..3000).map(|_| noise.sample(&mut rng)).collect();
        let report = estimate_ar1(&x).unwrap();
        assert!(
            (report.alpha_hat - 1.0).abs() < 0.06,
            "alpha_hat {}",
            report.alpha_hat
        );
    }

    #[test]
    fn ar1_t_statistic_is_df_statistic() {
        let x = ar1_series(0.03, 0.008, 400, 23);
        let ar = estimate_ar1(&x).unwrap();
        let df = dickey_fuller(&x).unwrap();
        assert!((ar.t_statistic - df.statistic).abs() < 1e-9);
        assert!((ar.t_statistic + ar.alpha_hat / ar.std_error).abs() < 1e-12);
    }

    #[test]
    fn pacf_white_noise_stays_in_band() {
        let mut rng = seeded(5);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..1000).map(|_| noise.sample(&mut rng)).collect();
        let report = pacf(&x, 20).unwrap();
        let inside = report
            .values
            .iter()
            .filter(|v| v.abs() <= report.two_se_band)
            .count();
        assert!(inside >= 18, "only {inside}/20 lags inside the band");
    }

    #[test]
    fn pacf_of_ar1_spikes_at_lag_one() {
        let x = ar1_series(0.03, 0.01, 4000, 29); // AR coefficient 0.97
        let report = pacf(&x, 20).unwrap();
        assert!(
            (report.values[0] - 0.97).abs() < 0.02,
            "lag-1 pacf {}",
            report.values[0]
        );
        let outside = report.values[1..]
            .iter()
            .filter(|v| v.abs() > report.two_se_band)
            .count();
        assert!(outside <= 3, "{outside} higher lags outside the band");
    }

    #[test]
    fn pacf_lag_one_equals_autocorrelation() {
        let x = ar1_series(0.1, 0.02, 600, 31);
        let report = pacf(&x, 5).unwrap();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let c1: f64 = x
            .iter()
            .skip(1)
            .zip(x.iter())
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum();
        assert!((report.values[0] - c1 / c0).abs() < 1e-9);
    }

    #[test]
    fn order_selection_prefers_ar1_for_ar1_data() {
        let mut hits_sic = 0;
        let mut hits_hq = 0;
        let seeds = 20;
        for i in 0..seeds {
            let x = ar1_series(0.05, 0.01, 900, derive_seed(3000, i));
            let report = select_ar_order(&x, 5, InfoCriterion::Sic).unwrap();
            if report.order_sic == 1 {
                hits_sic += 1;
            }
            if report.order_hq == 1 {
                hits_hq += 1;
            }
        }
        assert!(hits_sic >= 18, "SIC picked order 1 only {hits_sic}/{seeds}");
        assert!(hits_hq >= 18, "HQ picked order 1 only {hits_hq}/{seeds}");
    }

    #[test]
    fn order_selection_white_noise_gives_zero() {
        let mut rng = seeded(41);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..1500).map(|_| noise.sample(&mut rng)).collect();
        let report = select_ar_order(&x, 5, InfoCriterion::Sic).unwrap();
        assert_eq!(report.order_sic, 0);
        assert_eq!(report.selected, 0);
    }

    #[test]
    fn order_selection_finds_ar3() {
        let coeffs = [0.5, -0.3, 0.2];
        let mut hq_hits = 0;
        let seeds = 15;
        for i in 0..seeds {
            let mut rng = seeded(derive_seed(4000, i));
            let noise = Normal::new(0.0, 1.0).unwrap();
            let mut x = vec![0.0, 0.0, 0.0];
            for _ in 3..2000 {
                let n = x.len();
                let value = coeffs[0] * x[n - 1] + coeffs[1] * x[n - 2] + coeffs[2] * x[n - 3]
                    + noise.sample(&mut rng);
                x.push(value);
            }
            let report = select_ar_order(&x, 6, InfoCriterion::Hq).unwrap();
            if report.order_hq == 3 {
                hq_hits += 1;
            }
        }
        assert!(hq_hits > seeds / 2, "HQ picked 3 only {hq_hits}/{seeds}");
    }

    #[test]
    fn scale_invariance() {
        let x = ar1_series(0.04, 0.008, 500, 53);
        let scaled: Vec<f64> = x.iter().map(|v| v * 1000.0).collect();

        let df_a = dickey_fuller(&x).unwrap().statistic;
        let df_b = dickey_fuller(&scaled).unwrap().statistic;
        assert!((df_a - df_b).abs() < 1e-9);

        let pp_a = phillips_perron(&x).unwrap().statistic;
        let pp_b = phillips_perron(&scaled).unwrap().statistic;
        assert!((pp_a - pp_b).abs() < 1e-9);

        let pacf_a = pacf(&x, 10).unwrap();
        let pacf_b = pacf(&scaled, 10).unwrap();
        for (a, b) in pacf_a.values.iter().zip(&pacf_b.values) {
            assert!((a - b).abs() < 1e-9);
        }

        let ord_a = select_ar_order(&x, 5, InfoCriterion::Sic).unwrap();
        let ord_b = select_ar_order(&scaled, 5, InfoCriterion::Sic).unwrap();
        assert_eq!(ord_a.order_sic, ord_b.order_sic);
        assert_eq!(ord_a.order_hq, ord_b.order_hq);
    }

    #[test]
    fn zero_variance_and_short_inputs_error() {
        let constant = vec![1.0; 100];
        assert!(matches!(
            dickey_fuller(&constant),
            Err(StatError::ZeroVariance)
        ));
        assert!(matches!(
            dickey_fuller(&[1.0, 2.0, 3.0]),
            Err(StatError::TooShort { .. })
        ));
        assert!(matches!(
            pacf(&constant, 10),
            Err(StatError::ZeroVariance)
        ));
        assert!(matches!(pacf(&[1.0; 20], 5), Err(StatError::MaxLagTooLarge { .. })));
    }

    #[test]
    fn reject_flags_match_critical_values() {
        let x = ar1_series(0.03, 0.0084, 946, 61);
        let report = dickey_fuller(&x).unwrap();
        for level in SignificanceLevel::ALL {
            assert_eq!(
                report.rejects_at(level),
                report.statistic < report.critical_values[&level]
            );
        }
    }
}
