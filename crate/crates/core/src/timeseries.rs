//! Daily log-price series: CSV ingestion, trading-day indexing, windows.
//!
//! Time is measured in integer trading days (positions 0..n-1 in date
//! order); weekends and holidays are collapsed. Prices are stored as
//! log-price only — every model downstream works in `ln I_t`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TimeSeriesError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("CSV parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("column {name:?} not found in header")]
    MissingColumn { name: String },
    #[error("malformed row at line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("non-positive price {value} at line {line} cannot be log-transformed")]
    NonPositivePrice { line: usize, value: f64 },
    #[error("duplicate date {date}")]
    DuplicateDate { date: NaiveDate },
    #[error("dates must be strictly increasing (violated at index {index})")]
    DatesNotIncreasing { index: usize },
    #[error("log-price at index {index} is not finite")]
    NonFiniteLogPrice { index: usize },
    #[error("series needs at least 2 observations, got {len}")]
    TooShort { len: usize },
    #[error(
        "window (start {start}, length {length}) out of bounds for series of length {series_len}"
    )]
    WindowOutOfBounds {
        start: usize,
        length: usize,
        series_len: usize,
    },
    #[error("window length must be at least 2, got {length}")]
    WindowTooShort { length: usize },
}

/// Contiguous span of trading days within a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start_index: usize,
    pub length: usize,
}

impl Window {
    pub fn new(start_index: usize, length: usize) -> Result<Self, TimeSeriesError> {
        if length < 2 {
            return Err(TimeSeriesError::WindowTooShort { length });
        }
        Ok(Self {
            start_index,
            length,
        })
    }

    pub fn end_index(&self) -> usize {
        self.start_index + self.length - 1
    }
}

/// Whether the price column holds raw prices (take the log on ingest) or
/// values that are already log-prices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    Log,
    AsIs,
}

/// Ordered daily observations of the log of an index level.
///
/// Invariants, enforced at construction: strictly increasing dates, finite
/// log-prices, length >= 2. Trading-day index `t` of an observation is its
/// position. Immutable after construction; freely shareable across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    log_prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, log_prices: Vec<f64>) -> Result<Self, TimeSeriesError> {
        if dates.len() != log_prices.len() || dates.len() < 2 {
            return Err(TimeSeriesError::TooShort {
                len: dates.len().min(log_prices.len()),
            });
        }
        for (i, w) in dates.windows(2).enumerate() {
            if w[1] <= w[0] {
                if w[1] == w[0] {
                    return Err(TimeSeriesError::DuplicateDate { date: w[0] });
                }
                return Err(TimeSeriesError::DatesNotIncreasing { index: i + 1 });
            }
        }
        if let Some(i) = log_prices.iter().position(|v| !v.is_finite()) {
            return Err(TimeSeriesError::NonFiniteLogPrice { index: i });
        }
        Ok(Self { dates, log_prices })
    }

    /// Series with consecutive calendar dates starting at `start_date`;
    /// used for synthetic paths where only the trading-day index matters.
    pub fn from_log_prices(
        start_date: NaiveDate,
        log_prices: Vec<f64>,
    ) -> Result<Self, TimeSeriesError> {
        let dates = (0..log_prices.len())
            .map(|i| start_date + chrono::Days::new(i as u64))
            .collect();
        Self::new(dates, log_prices)
    }

    pub fn len(&self) -> usize {
        self.log_prices.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 2 by construction
    }

    /// Largest trading-day index, `len() - 1`.
    pub fn last_index(&self) -> usize {
        self.len() - 1
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn log_prices(&self) -> &[f64] {
        &self.log_prices
    }

    pub fn date(&self, index: usize) -> NaiveDate {
        self.dates[index]
    }

    pub fn log_price(&self, index: usize) -> f64 {
        self.log_prices[index]
    }

    /// Daily log returns `ln I_{t+1} - ln I_t`, length `len() - 1`.
    pub fn returns(&self) -> Vec<f64> {
        self.log_prices.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Sub-series re-indexed from 0; dates preserved.
    pub fn slice(&self, window: Window) -> Result<PriceSeries, TimeSeriesError> {
        let end = window
            .start_index
            .checked_add(window.length)
            .ok_or(TimeSeriesError::WindowOutOfBounds {
                start: window.start_index,
                length: window.length,
                series_len: self.len(),
            })?;
        if end > self.len() {
            return Err(TimeSeriesError::WindowOutOfBounds {
                start: window.start_index,
                length: window.length,
                series_len: self.len(),
            });
        }
        Ok(PriceSeries {
            dates: self.dates[window.start_index..end].to_vec(),
            log_prices: self.log_prices[window.start_index..end].to_vec(),
        })
    }

    /// Sub-series restricted to dates in `[from, to]` (either bound optional).
    pub fn between(
        &self,
        from: Option<NaiveDate>,
        to: Option<NaiveDate>,
    ) -> Result<PriceSeries, TimeSeriesError> {
        let start = match from {
            Some(d) => self.dates.partition_point(|x| *x < d),
            None => 0,
        };
        let end = match to {
            Some(d) => self.dates.partition_point(|x| *x <= d),
            None => self.len(),
        };
        if end <= start || end - start < 2 {
            return Err(TimeSeriesError::TooShort {
                len: end.saturating_sub(start),
            });
        }
        PriceSeries::new(
            self.dates[start..end].to_vec(),
            self.log_prices[start..end].to_vec(),
        )
    }

    /// SHA-256 over the canonical `date,log-price-bits` encoding; identifies
    /// the exact observations independent of the file they came from.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        let mut line = String::new();
        for (d, lp) in self.dates.iter().zip(&self.log_prices) {
            line.clear();
            let _ = write!(line, "{d},{:016x}\n", lp.to_bits());
            hasher.update(line.as_bytes());
        }
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            let _ = write!(hex, "{byte:02x}");
        }
        hex
    }

    /// Write the `date,close` CSV schema; `close` is `exp(log_price)`,
    /// formatted with shortest round-trip precision.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), TimeSeriesError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "close"])?;
        for (d, lp) in self.dates.iter().zip(&self.log_prices) {
            w.write_record([d.to_string(), format!("{}", lp.exp())])?;
        }
        w.flush().map_err(|source| TimeSeriesError::Io {
            path: "<writer>".to_string(),
            source,
        })?;
        Ok(())
    }
}

/// Read a daily price series from a headered CSV file.
///
/// Rows are sorted by date before index assignment; a duplicate date is an
/// error, as is a non-positive price under the log transform. Line numbers
/// in errors are 1-based file lines (the header is line 1).
pub fn ingest_csv(
    path: &Path,
    date_column: &str,
    price_column: &str,
    transform: Transform,
) -> Result<PriceSeries, TimeSeriesError> {
    let file = std::fs::File::open(path).map_err(|source| TimeSeriesError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ingest_csv_reader(file, date_column, price_column, transform)
}

/// As [`ingest_csv`], from any reader.
pub fn ingest_csv_reader<R: std::io::Read>(
    reader: R,
    date_column: &str,
    price_column: &str,
    transform: Transform,
) -> Result<PriceSeries, TimeSeriesError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers = rdr.headers()?.clone();
    let date_idx = headers
        .iter()
        .position(|h| h == date_column)
        .ok_or_else(|| TimeSeriesError::MissingColumn {
            name: date_column.to_string(),
        })?;
    let price_idx = headers
        .iter()
        .position(|h| h == price_column)
        .ok_or_else(|| TimeSeriesError::MissingColumn {
            name: price_column.to_string(),
        })?;

    let mut rows: Vec<(NaiveDate, f64)> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2; // header occupies line 1
        let record = record?;
        let date_str = record
            .get(date_idx)
            .ok_or_else(|| TimeSeriesError::MalformedRow {
                line,
                message: format!("missing field {date_column:?}"),
            })?;
        let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d").map_err(|e| {
            TimeSeriesError::MalformedRow {
                line,
                message: format!("bad date {date_str:?}: {e}"),
            }
        })?;
        let price_str = record
            .get(price_idx)
            .ok_or_else(|| TimeSeriesError::MalformedRow {
                line,
                message: format!("missing field {price_column:?}"),
            })?;
        let value: f64 = price_str
            .parse()
            .map_err(|e| TimeSeriesError::MalformedRow {
                line,
                message: format!("bad price {price_str:?}: {e}"),
            })?;
        let log_price = match transform {
            Transform::Log => {
                if value <= 0.0 {
                    return Err(TimeSeriesError::NonPositivePrice { line, value });
                }
                value.ln()
            }
            Transform::AsIs => value,
        };
        if !log_price.is_finite() {
            return Err(TimeSeriesError::MalformedRow {
                line,
                message: format!("non-finite value {value}"),
            });
        }
        rows.push((date, log_price));
    }

    let mut seen = BTreeSet::new();
    for (date, _) in &rows {
        if !seen.insert(*date) {
            return Err(TimeSeriesError::DuplicateDate { date: *date });
        }
    }
    rows.sort_by_key(|(d, _)| *d);

    let (dates, log_prices) = rows.into_iter().unzip();
    PriceSeries::new(dates, log_prices)
}
