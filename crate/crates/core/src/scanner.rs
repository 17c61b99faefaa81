//! Window experiments: sliding windows over a long series, shrinking
//! windows toward a fixed end date, and GARCH false-positive ensembles.
//!
//! Every window (or synthetic path) is fitted once, the qualification filter
//! applied, and the residual unit-root tests run whether or not the window
//! qualified — the unconditional non-rejection percentages need them all,
//! while `p_stationary_given_lppl` conditions on the qualified subset. Fit
//! failures are recorded as unqualified verdicts, never dropped, so the
//! qualification rate is not biased upward.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::calibration::{fit_lppl, FitConfig};
use crate::lppl::{draw_length, simulate_garch, GarchParams, LpplParams, ModelError};
use crate::rng::{derive_seed, seeded};
use crate::stationarity::{
    dickey_fuller, estimate_ar1, phillips_perron, SignificanceLevel, UnitRootReport,
};
use crate::timeseries::{PriceSeries, TimeSeriesError, Window};

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("series of length {len} is shorter than the window length {window}")]
    SeriesShorterThanWindow { len: usize, window: usize },
    #[error("step must be >= 1")]
    ZeroStep,
    #[error("ensemble count must be >= 1")]
    ZeroCount,
    #[error("ensemble path lengths must be >= {min}, got {got}")]
    LengthBelowMinimum { min: usize, got: usize },
    #[error("end index {end_index} out of bounds for series of length {len}")]
    EndIndexOutOfBounds { end_index: usize, len: usize },
    #[error("no window of at least {min_length} days ends at index {end_index}")]
    NoWindowFits {
        min_length: usize,
        end_index: usize,
    },
    #[error(transparent)]
    Series(#[from] TimeSeriesError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Minimum ensemble path length; whole-path fits below this are not part of
/// the benchmark protocol.
pub const MIN_ENSEMBLE_LENGTH: usize = 750;

/// Fitted-parameter summary carried per window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub params: LpplParams,
    pub sse: f64,
}

/// Outcome for one window or ensemble path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowVerdict {
    pub window: Window,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub qualified: bool,
    pub fit: Option<FitSummary>,
    /// Present when the fit (or a residual test) failed; such windows count
    /// as unqualified.
    pub fit_error: Option<String>,
    pub df_statistic: Option<f64>,
    pub pp_statistic: Option<f64>,
    pub df_reject: Option<BTreeMap<SignificanceLevel, bool>>,
    pub pp_reject: Option<BTreeMap<SignificanceLevel, bool>>,
    pub alpha_hat: Option<f64>,
}

impl WindowVerdict {
    fn failed(window: Window, start_date: NaiveDate, end_date: NaiveDate, error: String) -> Self {
        Self {
            window,
            start_date,
            end_date,
            qualified: false,
            fit: None,
            fit_error: Some(error),
            df_statistic: None,
            pp_statistic: None,
            df_reject: None,
            pp_reject: None,
            alpha_hat: None,
        }
    }
}

/// What produced a [`ScanReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ScanSettings {
    Sliding {
        window_length: usize,
        step: usize,
    },
    Shrinking {
        end_index: usize,
        start_step: usize,
        min_length: usize,
    },
    GarchEnsemble {
        count: usize,
        length_spec: LengthSpec,
        seed: u64,
        garch: GarchParams,
    },
}

/// Path-length rule for ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LengthSpec {
    Fixed { n: usize },
    Uniform { lo: usize, hi: usize },
}

/// Aggregated scan outcome. All aggregates are recomputable from the
/// verdict list; `assemble` checks that identity on every construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub settings: ScanSettings,
    pub fit_config: FitConfig,
    /// Levels the aggregates are reported for (the strictest drives
    /// `p_stationary_given_lppl`).
    pub levels: Vec<SignificanceLevel>,
    pub verdicts: Vec<WindowVerdict>,
    /// Fraction of windows satisfying the qualification conditions.
    pub p_lppl: f64,
    /// Fraction of qualified windows whose residuals reject the unit-root
    /// null under both tests at the strictest configured level; absent when
    /// nothing qualified.
    pub p_stationary_given_lppl: Option<f64>,
    /// Per level: fraction of fitted windows NOT rejecting the
    /// Dickey-Fuller null.
    pub not_rejecting_df: BTreeMap<SignificanceLevel, f64>,
    /// Per level: fraction of fitted windows NOT rejecting the
    /// Phillips-Perron null.
    pub not_rejecting_pp: BTreeMap<SignificanceLevel, f64>,
}

/// Default report levels mirroring the benchmark tables.
pub fn default_levels() -> Vec<SignificanceLevel> {
    vec![
        SignificanceLevel::OnePerMille,
        SignificanceLevel::OnePercent,
    ]
}

#[derive(Debug, Clone, PartialEq)]
struct Aggregates {
    p_lppl: f64,
    p_stationary_given_lppl: Option<f64>,
    not_rejecting_df: BTreeMap<SignificanceLevel, f64>,
    not_rejecting_pp: BTreeMap<SignificanceLevel, f64>,
}

fn compute_aggregates(verdicts: &[WindowVerdict], levels: &[SignificanceLevel]) -> Aggregates {
    let total = verdicts.len().max(1);
    let qualified: Vec<&WindowVerdict> = verdicts.iter().filter(|v| v.qualified).collect();
    let p_lppl = qualified.len() as f64 / total as f64;

    let strictest = levels
        .iter()
        .copied()
        .min_by(|a, b| a.value().total_cmp(&b.value()));
    let p_stationary_given_lppl = strictest.filter(|_| !qualified.is_empty()).map(|level| {
        let both = qualified
            .iter()
            .filter(|v| {
                v.df_reject.as_ref().is_some_and(|m| m[&level])
                    && v.pp_reject.as_ref().is_some_and(|m| m[&level])
            })
            .count();
        both as f64 / qualified.len() as f64
    });

    let fitted: Vec<&WindowVerdict> = verdicts.iter().filter(|v| v.df_reject.is_some()).collect();
    let mut not_rejecting_df = BTreeMap::new();
    let mut not_rejecting_pp = BTreeMap::new();
    for &level in levels {
        let df = fitted
            .iter()
            .filter(|v| !v.df_reject.as_ref().unwrap()[&level])
            .count();
        let pp = fitted
            .iter()
            .filter(|v| !v.pp_reject.as_ref().unwrap()[&level])
            .count();
        let denom = fitted.len().max(1) as f64;
        not_rejecting_df.insert(level, df as f64 / denom);
        not_rejecting_pp.insert(level, pp as f64 / denom);
    }

    Aggregates {
        p_lppl,
        p_stationary_given_lppl,
        not_rejecting_df,
        not_rejecting_pp,
    }
}

impl ScanReport {
    fn assemble(
        settings: ScanSettings,
        fit_config: FitConfig,
        levels: Vec<SignificanceLevel>,
        verdicts: Vec<WindowVerdict>,
    ) -> Self {
        let aggregates = compute_aggregates(&verdicts, &levels);
        let report = Self {
            settings,
            fit_config,
            levels,
            verdicts,
            p_lppl: aggregates.p_lppl,
            p_stationary_given_lppl: aggregates.p_stationary_given_lppl,
            not_rejecting_df: aggregates.not_rejecting_df,
            not_rejecting_pp: aggregates.not_rejecting_pp,
        };
        assert!(report.aggregates_consistent());
        report
    }

    /// Recompute every aggregate from the verdict list and compare.
    pub fn aggregates_consistent(&self) -> bool {
        let fresh = compute_aggregates(&self.verdicts, &self.levels);
        fresh.p_lppl == self.p_lppl
            && fresh.p_stationary_given_lppl == self.p_stationary_given_lppl
            && fresh.not_rejecting_df == self.not_rejecting_df
            && fresh.not_rejecting_pp == self.not_rejecting_pp
    }

    pub fn qualified_count(&self) -> usize {
        self.verdicts.iter().filter(|v| v.qualified).count()
    }
}

/// Number of sliding windows: `floor((n - window_length)/step) + 1`.
pub fn sliding_window_count(series_len: usize, window_length: usize, step: usize) -> usize {
    (series_len - window_length) / step + 1
}

fn reject_map(
    report: &UnitRootReport,
) -> BTreeMap<SignificanceLevel, bool> {
    report.reject.clone()
}

fn verdict_for(series: &PriceSeries, window: Window, fit_config: &FitConfig) -> WindowVerdict {
    let start_date = series.date(window.start_index);
    let end_date = series.date(window.end_index());
    let sub = match series.slice(window) {
        Ok(sub) => sub,
        Err(e) => return WindowVerdict::failed(window, start_date, end_date, e.to_string()),
    };
    let fit = match fit_lppl(&sub, fit_config) {
        Ok(fit) => fit,
        Err(e) => return WindowVerdict::failed(window, start_date, end_date, e.to_string()),
    };
    let df = dickey_fuller(&fit.residuals);
    let pp = phillips_perron(&fit.residuals);
    let ar1 = estimate_ar1(&fit.residuals);
    match (df, pp, ar1) {
        (Ok(df), Ok(pp), Ok(ar1)) => WindowVerdict {
            window,
            start_date,
            end_date,
            qualified: fit.qualified,
            fit: Some(FitSummary {
                params: fit.params,
                sse: fit.sse,
            }),
            fit_error: None,
            df_statistic: Some(df.statistic),
            pp_statistic: Some(pp.statistic),
            df_reject: Some(reject_map(&df)),
            pp_reject: Some(reject_map(&pp)),
            alpha_hat: Some(ar1.alpha_hat),
        },
        (df, pp, ar1) => {
            let msg = [
                df.err().map(|e| e.to_string()),
                pp.err().map(|e| e.to_string()),
                ar1.err().map(|e| e.to_string()),
            ]
            .into_iter()
            .flatten()
            .collect::<Vec<_>>()
            .join("; ");
            WindowVerdict::failed(window, start_date, end_date, msg)
        }
    }
}

/// Fit and test windows of fixed length at starts `0, step, 2*step, ...`.
pub fn sliding_scan(
    series: &PriceSeries,
    window_length: usize,
    step: usize,
    fit_config: &FitConfig,
    levels: &[SignificanceLevel],
) -> Result<ScanReport, ScanError> {
    if step == 0 {
        return Err(ScanError::ZeroStep);
    }
    if series.len() < window_length {
        return Err(ScanError::SeriesShorterThanWindow {
            len: series.len(),
            window: window_length,
        });
    }
    let starts: Vec<usize> = (0..=series.len() - window_length).step_by(step).collect();
    let verdicts: Vec<WindowVerdict> = starts
        .par_iter()
        .map(|&start| {
            let window = Window {
                start_index: start,
                length: window_length,
            };
            verdict_for(series, window, fit_config)
        })
        .collect();
    Ok(ScanReport::assemble(
        ScanSettings::Sliding {
            window_length,
            step,
        },
        *fit_config,
        levels.to_vec(),
        verdicts,
    ))
}

/// Fit and test windows `[s, end_index]` for `s = 0, start_step, ...` while
/// the window keeps at least `min_length` days.
pub fn shrinking_scan(
    series: &PriceSeries,
    end_index: usize,
    start_step: usize,
    min_length: usize,
    fit_config: &FitConfig,
    levels: &[SignificanceLevel],
) -> Result<ScanReport, ScanError> {
    if start_step == 0 {
        return Err(ScanError::ZeroStep);
    }
    if end_index >= series.len() {
        return Err(ScanError::EndIndexOutOfBounds {
            end_index,
            len: series.len(),
        });
    }
    if end_index + 1 < min_length {
        return Err(ScanError::NoWindowFits {
            min_length,
            end_index,
        });
    }
    let last_start = end_index + 1 - min_length;
    let starts: Vec<usize> = (0..=last_start).step_by(start_step).collect();
    let verdicts: Vec<WindowVerdict> = starts
        .par_iter()
        .map(|&start| {
            let window = Window {
                start_index: start,
                length: end_index - start + 1,
            };
            verdict_for(series, window, fit_config)
        })
        .collect();
    Ok(ScanReport::assemble(
        ScanSettings::Shrinking {
            end_index,
            start_step,
            min_length,
        },
        *fit_config,
        levels.to_vec(),
        verdicts,
    ))
}

/// Generate `count` seeded GARCH paths, fit each whole path once, and
/// aggregate qualification and residual-test rates.
///
/// Path `i` uses `derive_seed(seed, i)`; its length (for the uniform spec)
/// comes from a generator seeded with `derive_seed(path_seed, 0)` and the
/// simulation itself from `derive_seed(path_seed, 1)`, so the ensemble is
/// bit-reproducible including per-path seeds.
pub fn garch_ensemble(
    params: &GarchParams,
    count: usize,
    length_spec: LengthSpec,
    fit_config: &FitConfig,
    levels: &[SignificanceLevel],
    seed: u64,
) -> Result<ScanReport, ScanError> {
    if count == 0 {
        return Err(ScanError::ZeroCount);
    }
    match length_spec {
        LengthSpec::Fixed { n } if n < MIN_ENSEMBLE_LENGTH => {
            return Err(ScanError::LengthBelowMinimum {
                min: MIN_ENSEMBLE_LENGTH,
                got: n,
            });
        }
        LengthSpec::Uniform { lo, hi } if lo < MIN_ENSEMBLE_LENGTH || hi < lo => {
            return Err(ScanError::LengthBelowMinimum {
                min: MIN_ENSEMBLE_LENGTH,
                got: lo.min(hi),
            });
        }
        _ => {}
    }

    let verdicts: Vec<WindowVerdict> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let path_seed = derive_seed(seed, i);
            let length = match length_spec {
                LengthSpec::Fixed { n } => n,
                LengthSpec::Uniform { lo, hi } => {
                    let mut rng = seeded(derive_seed(path_seed, 0));
                    draw_length(&mut rng, lo, hi)
                }
            };
            let sim_seed = derive_seed(path_seed, 1);
            let window = Window {
                start_index: 0,
                length,
            };
            match simulate_garch(params, length, 0.0, sim_seed) {
                Ok(path) => verdict_for(&path, window, fit_config),
                Err(e) => {
                    let d = crate::lppl::SYNTHETIC_START;
                    WindowVerdict::failed(window, d, d, e.to_string())
                }
            }
        })
        .collect();

    Ok(ScanReport::assemble(
        ScanSettings::GarchEnsemble {
            count,
            length_spec,
            seed,
            garch: *params,
        },
        *fit_config,
        levels.to_vec(),
        verdicts,
    ))
}

/// Tail group of a shrinking scan: all windows starting on or after a date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartGroup {
    pub from_start_date: NaiveDate,
    pub windows: usize,
    pub qualified: usize,
    pub p_lppl: f64,
    pub p_stationary_given_lppl: Option<f64>,
}

/// Aggregate a report into tail groups keyed by window start date, one row
/// per requested break date.
pub fn group_by_start(report: &ScanReport, breaks: &[NaiveDate]) -> Vec<StartGroup> {
    breaks
        .iter()
        .map(|&from| {
            let members: Vec<&WindowVerdict> = report
                .verdicts
                .iter()
                .filter(|v| v.start_date >= from)
                .collect();
            let qualified: Vec<&&WindowVerdict> =
                members.iter().filter(|v| v.qualified).collect();
            let strictest = report
                .levels
                .iter()
                .copied()
                .min_by(|a, b| a.value().total_cmp(&b.value()));
            let p_stat = strictest.filter(|_| !qualified.is_empty()).map(|level| {
                let both = qualified
                    .iter()
                    .filter(|v| {
                        v.df_reject.as_ref().is_some_and(|m| m[&level])
                            && v.pp_reject.as_ref().is_some_and(|m| m[&level])
                    })
                    .count();
                both as f64 / qualified.len() as f64
            });
            StartGroup {
                from_start_date: from,
                windows: members.len(),
                qualified: qualified.len(),
                p_lppl: if members.is_empty() {
                    0.0
                } else {
                    qualified.len() as f64 / members.len() as f64
                },
                p_stationary_given_lppl: p_stat,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lppl::{simulate_bubble, OuResidualParams};

    fn quick_fit_config() -> FitConfig {
        FitConfig {
            multistart_grid: crate::calibration::GridCounts {
                tc: 5,
                beta: 5,
                omega: 5,
                phi: 2,
            },
            refine_starts: 6,
            max_iterations: 400,
            ..FitConfig::default()
        }
    }

    #[test]
    fn window_count_formula() {
        assert_eq!(sliding_window_count(760, 750, 25), 1);
        assert_eq!(sliding_window_count(800, 750, 25), 3);
        assert_eq!(sliding_window_count(750, 750, 25), 1);
    }

    #[test]
    fn sliding_scan_on_short_series_gives_one_window() {
        let params = GarchParams::sp500_benchmark();
        let series = simulate_garch(&params, 760, 0.0, 9).unwrap();
        let report = sliding_scan(
            &series,
            750,
            25,
            &quick_fit_config(),
            &default_levels(),
        )
        .unwrap();
        assert_eq!(report.verdicts.len(), 1);
        assert!(report.aggregates_consistent());
    }

    #[test]
    fn sliding_scan_rejects_too_short_series() {
        let params = GarchParams::sp500_benchmark();
        let series = simulate_garch(&params, 700, 0.0, 9).unwrap();
        assert!(matches!(
            sliding_scan(&series, 750, 25, &quick_fit_config(), &default_levels()),
            Err(ScanError::SeriesShorterThanWindow { .. })
        ));
    }

    #[test]
    fn ensemble_single_path_has_binary_aggregates() {
        let params = GarchParams::sp500_benchmark();
        let report = garch_ensemble(
            &params,
            1,
            LengthSpec::Fixed { n: 750 },
            &quick_fit_config(),
            &default_levels(),
            3,
        )
        .unwrap();
        assert_eq!(report.verdicts.len(), 1);
        assert!(report.p_lppl == 0.0 || report.p_lppl == 1.0);
    }

    #[test]
    fn ensemble_is_bit_reproducible() {
        let params = GarchParams::sp500_benchmark();
        let run = || {
            garch_ensemble(
                &params,
                4,
                LengthSpec::Uniform { lo: 750, hi: 800 },
                &quick_fit_config(),
                &default_levels(),
                42,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        // Path lengths vary across the ensemble.
        let lengths: std::collections::BTreeSet<usize> =
            a.verdicts.iter().map(|v| v.window.length).collect();
        assert!(lengths.len() > 1);
    }

    #[test]
    fn ensemble_enforces_minimum_length() {
        let params = GarchParams::sp500_benchmark();
        assert!(matches!(
            garch_ensemble(
                &params,
                1,
                LengthSpec::Fixed { n: 300 },
                &quick_fit_config(),
                &default_levels(),
                1,
            ),
            Err(ScanError::LengthBelowMinimum { .. })
        ));
    }

    #[test]
    fn shrinking_scan_on_synthetic_bubble_trends_upward() {
        // Bubble whose critical time sits just past the series end: windows
        // starting later (shorter, closer to tc) should qualify at least as
        // often as early ones.
        let truth = LpplParams::new(6.0, 0.25, 0.6, 0.45, 7.2, 2.0, 1065.0).unwrap();
        let resid = OuResidualParams::new(0.04, 0.004).unwrap();
        let series =
            simulate_bubble(&truth, &resid, 1060, truth.h(0.0).unwrap(), 15).unwrap();

        let report = shrinking_scan(
            &series,
            1059,
            60,
            750,
            &quick_fit_config(),
            &default_levels(),
        )
        .unwrap();
        assert!(report.verdicts.len() >= 3);
        assert!(report.aggregates_consistent());

        let groups = group_by_start(
            &report,
            &[
                series.date(0),
                series.date(100),
                series.date(240),
            ],
        );
        assert_eq!(groups.len(), 3);
        assert!(
            groups[2].p_lppl >= groups[0].p_lppl,
            "qualification should not decline toward the end: {:?}",
            groups.iter().map(|g| g.p_lppl).collect::<Vec<_>>()
        );
    }

    #[test]
    fn shrinking_scan_validates_bounds() {
        let params = GarchParams::sp500_benchmark();
        let series = simulate_garch(&params, 800, 0.0, 9).unwrap();
        assert!(matches!(
            shrinking_scan(&series, 900, 5, 750, &quick_fit_config(), &default_levels()),
            Err(ScanError::EndIndexOutOfBounds { .. })
        ));
        assert!(matches!(
            shrinking_scan(&series, 600, 5, 750, &quick_fit_config(), &default_levels()),
            Err(ScanError::NoWindowFits { .. })
        ));
    }
}
