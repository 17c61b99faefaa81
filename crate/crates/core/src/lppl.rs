//! The log-periodic power law trajectory and the synthetic generators.
//!
//! The deterministic trajectory is
//!
//! ```text
//! H(t) = A - B (tc - t)^beta [ 1 + C / sqrt(1 + (omega/beta)^2)
//!                                  * cos(omega ln(tc - t) + phi) ]
//! ```
//!
//! For `B > 0` and `0 < beta < 1` the slope of `H` diverges as `t -> tc`:
//! faster-than-exponential growth with accelerating oscillations. Synthetic
//! bubble paths confine the log-price to `H` with an AR(1) (discretized
//! Ornstein-Uhlenbeck) residual:
//!
//! ```text
//! ln I_{t+1} = ln I_t + dH_t - alpha (ln I_t - H_t) + u_t ,
//! u_t ~ iid N(0, sigma_u^2)
//! ```
//!
//! The GARCH(1,1) generator provides the non-bubble benchmark:
//! `r_t = mu0 + sigma_t z_t`, `sigma_t^2 = sigma0^2 + arch (r_{t-1} - mu0)^2
//! + garch sigma_{t-1}^2`, with Student-t innovations standardized to unit
//! variance so `sigma_t^2` is the true conditional variance.

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, Normal, StudentT};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::seeded;
use crate::timeseries::{PriceSeries, TimeSeriesError};

/// Start date for synthetic series; only the trading-day index is meaningful.
pub const SYNTHETIC_START: NaiveDate = match NaiveDate::from_ymd_opt(2000, 1, 3) {
    Some(d) => d,
    None => panic!("valid date"),
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter {name} = {value} is invalid: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("trajectory evaluated at t = {t} but tc = {tc}; need t < tc")]
    TcNotBeyond { t: f64, tc: f64 },
    #[error("critical time tc = {tc} lies inside the simulated range of {length} steps")]
    TcInsideRange { tc: f64, length: usize },
    #[error("simulation length must be at least 2, got {length}")]
    LengthTooShort { length: usize },
    #[error(transparent)]
    Series(#[from] TimeSeriesError),
}

/// The seven trajectory parameters `(A, B, C, beta, omega, phi, tc)`.
///
/// `tc` is in trading-day units on the same index as the series the params
/// refer to. Construction only requires finite fields; the qualification
/// ranges (`B > 0`, `beta` in [0.1, 0.9], ...) are conditions checked by the
/// calibration filter, not type constraints — fits must be able to land
/// outside them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpplParams {
    /// Log-price level the trajectory reaches at the critical time.
    pub a: f64,
    /// Power-law amplitude; positive for a growing bubble.
    pub b: f64,
    /// Relative amplitude of the log-periodic oscillation.
    pub c: f64,
    /// Power-law exponent, nominally in (0, 1).
    pub beta: f64,
    /// Angular log-frequency of the oscillation.
    pub omega: f64,
    /// Oscillation phase, wrapped to [0, 2*pi) by the calibrator.
    pub phi: f64,
    /// Critical time in trading days; must exceed every evaluated index.
    pub tc: f64,
}

impl LpplParams {
    pub fn new(
        a: f64,
        b: f64,
        c: f64,
        beta: f64,
        omega: f64,
        phi: f64,
        tc: f64,
    ) -> Result<Self, ModelError> {
        let params = Self {
            a,
            b,
            c,
            beta,
            omega,
            phi,
            tc,
        };
        for (name, value) in [
            ("a", a),
            ("b", b),
            ("c", c),
            ("beta", beta),
            ("omega", omega),
            ("phi", phi),
            ("tc", tc),
        ] {
            if !value.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    constraint: "must be finite",
                });
            }
        }
        Ok(params)
    }

    /// Damping applied to the oscillation amplitude, `1/sqrt(1+(omega/beta)^2)`.
    pub fn damping(&self) -> f64 {
        1.0 / (1.0 + (self.omega / self.beta).powi(2)).sqrt()
    }

    /// Trajectory value `H(t)`; `t` must lie strictly before `tc`.
    pub fn h(&self, t: f64) -> Result<f64, ModelError> {
        if t >= self.tc {
            return Err(ModelError::TcNotBeyond { t, tc: self.tc });
        }
        Ok(self.a - self.power_term(t))
    }

    /// One-day increment `H(t+1) - H(t)` computed in the A-free form, so the
    /// level parameter cancels analytically rather than in floating point.
    pub fn delta_h(&self, t: f64) -> Result<f64, ModelError> {
        if t + 1.0 >= self.tc {
            return Err(ModelError::TcNotBeyond {
                t: t + 1.0,
                tc: self.tc,
            });
        }
        Ok(self.power_term(t) - self.power_term(t + 1.0))
    }

    /// `B (tc-t)^beta [1 + damping * C * cos(omega ln(tc-t) + phi)]`,
    /// i.e. `A - H(t)`. Caller guarantees `t < tc`.
    pub(crate) fn power_term(&self, t: f64) -> f64 {
        let dt = self.tc - t;
        let ln_dt = dt.ln();
        let amplitude = self.b * (self.beta * ln_dt).exp();
        let oscillation = self.damping() * self.c * (self.omega * ln_dt + self.phi).cos();
        amplitude * (1.0 + oscillation)
    }
}

/// Mean-reversion rate and innovation scale of the AR(1) residual
/// `nu_{t+1} - nu_t = -alpha nu_t + u_t`.
///
/// `sigma_u = 0` is accepted as the noiseless degenerate case (the path then
/// follows the deterministic recursion exactly).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuResidualParams {
    pub alpha: f64,
    pub sigma_u: f64,
}

impl OuResidualParams {
    pub fn new(alpha: f64, sigma_u: f64) -> Result<Self, ModelError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ModelError::InvalidParameter {
                name: "alpha",
                value: alpha,
                constraint: "must lie in (0, 1)",
            });
        }
        if !(sigma_u >= 0.0 && sigma_u.is_finite()) {
            return Err(ModelError::InvalidParameter {
                name: "sigma_u",
                value: sigma_u,
                constraint: "must be finite and >= 0",
            });
        }
        Ok(Self { alpha, sigma_u })
    }
}

/// GARCH(1,1) parameters with Student-t innovations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    /// Conditional mean of the daily return.
    pub mu0: f64,
    /// Variance intercept `sigma_0^2`.
    pub sigma0_sq: f64,
    /// ARCH coefficient on the squared demeaned return.
    pub arch: f64,
    /// GARCH coefficient on the lagged conditional variance.
    pub garch: f64,
    /// Degrees of freedom of the Student-t innovation, >= 3.
    pub student_df: u32,
}

impl GarchParams {
    pub fn new(
        mu0: f64,
        sigma0_sq: f64,
        arch: f64,
        garch: f64,
        student_df: u32,
    ) -> Result<Self, ModelError> {
        if !(sigma0_sq > 0.0 && sigma0_sq.is_finite()) {
            return Err(ModelError::InvalidParameter {
                name: "sigma0_sq",
                value: sigma0_sq,
                constraint: "must be finite and > 0",
            });
        }
        if !(arch >= 0.0 && arch.is_finite()) {
            return Err(ModelError::InvalidParameter {
                name: "arch",
                value: arch,
                constraint: "must be finite and >= 0",
            });
        }
        if !(garch >= 0.0 && garch.is_finite()) {
            return Err(ModelError::InvalidParameter {
                name: "garch",
                value: garch,
                constraint: "must be finite and >= 0",
            });
        }
        if arch + garch >= 1.0 {
            return Err(ModelError::InvalidParameter {
                name: "arch + garch",
                value: arch + garch,
                constraint: "must be < 1 (covariance stationarity)",
            });
        }
        if student_df < 3 {
            return Err(ModelError::InvalidParameter {
                name: "student_df",
                value: student_df as f64,
                constraint: "must be >= 3",
            });
        }
        if !mu0.is_finite() {
            return Err(ModelError::InvalidParameter {
                name: "mu0",
                value: mu0,
                constraint: "must be finite",
            });
        }
        Ok(Self {
            mu0,
            sigma0_sq,
            arch,
            garch,
            student_df,
        })
    }

    /// Benchmark parameters estimated on daily S&P500 closes (1950-2008):
    /// `mu0 = 5.4e-4`, `sigma0^2 = 5.1e-7`, `arch = 0.07`, `garch = 0.926`,
    /// 7 degrees of freedom.
    pub fn sp500_benchmark() -> Self {
        Self {
            mu0: 5.4e-4,
            sigma0_sq: 5.1e-7,
            arch: 0.07,
            garch: 0.926,
            student_df: 7,
        }
    }

    /// Unconditional variance of the daily return,
    /// `sigma_0^2 / (1 - arch - garch)`.
    pub fn unconditional_variance(&self) -> f64 {
        self.sigma0_sq / (1.0 - self.arch - self.garch)
    }
}

/// A simulated bubble path together with the residual and innovation series
/// that produced it; lets tests replay the recursion bit-for-bit.
#[derive(Debug, Clone)]
pub struct BubblePath {
    pub series: PriceSeries,
    /// `nu_t = ln I_t - H(t)`, length equal to the series.
    pub residuals: Vec<f64>,
    /// The drawn `u_t`, length `len - 1`.
    pub innovations: Vec<f64>,
}

/// Simulate the volatility-confined recursion
/// `ln I_{t+1} = ln I_t + dH_t - alpha (ln I_t - H_t) + u_t`.
///
/// Deterministic for a fixed seed. The residual `nu_t = ln I_t - H(t)` is
/// advanced exactly as `nu_{t+1} = (1 - alpha) nu_t + u_t` and the log-price
/// assembled as `H(t) + nu_t`, which is the same recursion rearranged.
pub fn simulate_bubble(
    params: &LpplParams,
    resid: &OuResidualParams,
    length: usize,
    ln_i0: f64,
    seed: u64,
) -> Result<PriceSeries, ModelError> {
    simulate_bubble_path(params, resid, length, ln_i0, seed).map(|p| p.series)
}

/// As [`simulate_bubble`], additionally returning residuals and innovations.
pub fn simulate_bubble_path(
    params: &LpplParams,
    resid: &OuResidualParams,
    length: usize,
    ln_i0: f64,
    seed: u64,
) -> Result<BubblePath, ModelError> {
    if length < 2 {
        return Err(ModelError::LengthTooShort { length });
    }
    if (length as f64) + 1.0 >= params.tc {
        return Err(ModelError::TcInsideRange {
            tc: params.tc,
            length,
        });
    }
    let mut rng = seeded(seed);
    let noise = Normal::new(0.0, resid.sigma_u).map_err(|_| ModelError::InvalidParameter {
        name: "sigma_u",
        value: resid.sigma_u,
        constraint: "not a valid normal scale",
    })?;

    let mut log_prices = Vec::with_capacity(length);
    let mut residuals = Vec::with_capacity(length);
    let mut innovations = Vec::with_capacity(length - 1);

    let mut nu = ln_i0 - params.h(0.0)?;
    log_prices.push(ln_i0);
    residuals.push(nu);
    for t in 1..length {
        let u = noise.sample(&mut rng);
        nu = (1.0 - resid.alpha) * nu + u;
        innovations.push(u);
        residuals.push(nu);
        log_prices.push(params.h(t as f64)? + nu);
    }

    Ok(BubblePath {
        series: PriceSeries::from_log_prices(SYNTHETIC_START, log_prices)?,
        residuals,
        innovations,
    })
}

/// Simulate GARCH(1,1) log-prices with standardized Student-t innovations.
///
/// `sigma_1^2` starts at the unconditional variance and the presample return
/// is the conditional mean, so there is no warm-up bias. Deterministic for a
/// fixed seed.
pub fn simulate_garch(
    params: &GarchParams,
    length: usize,
    ln_i0: f64,
    seed: u64,
) -> Result<PriceSeries, ModelError> {
    if length < 2 {
        return Err(ModelError::LengthTooShort { length });
    }
    let mut rng = seeded(seed);
    let df = params.student_df as f64;
    let student = StudentT::new(df).map_err(|_| ModelError::InvalidParameter {
        name: "student_df",
        value: df,
        constraint: "not a valid Student-t parameter",
    })?;
    // E[z^2] = 1 after dividing by sqrt(df / (df - 2)).
    let standardize = (df / (df - 2.0)).sqrt();

    let mut log_prices = Vec::with_capacity(length);
    log_prices.push(ln_i0);
    let mut sigma_sq = params.unconditional_variance();
    let mut prev_eps = 0.0; // presample return equals mu0
    for _ in 1..length {
        sigma_sq = params.sigma0_sq + params.arch * prev_eps * prev_eps + params.garch * sigma_sq;
        let z = student.sample(&mut rng) / standardize;
        let ret = params.mu0 + sigma_sq.sqrt() * z;
        log_prices.push(log_prices.last().unwrap() + ret);
        prev_eps = ret - params.mu0;
    }

    Ok(PriceSeries::from_log_prices(SYNTHETIC_START, log_prices)?)
}

/// Draw a path length for ensemble members: `lo..=hi` uniformly.
pub fn draw_length(rng: &mut impl Rng, lo: usize, hi: usize) -> usize {
    rng.random_range(lo..=hi)
}
