//! Return panels, rolling-window schedules and mixture partitions.
//!
//! A [`ReturnsPanel`] is the empirical distribution every model consumes: a
//! dated `S x N` matrix of simple daily returns. Panels are immutable once
//! built; slicing produces new panels that share nothing with the parent.

use std::fmt;
use std::ops::Range;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header must name a date column followed by at least one asset column")]
    BadHeader,
    #[error("row {row}: expected {expected} cells, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}: cannot parse date {value:?}")]
    BadDate { row: usize, value: String },
    #[error("row {row}, column {column}: empty cell")]
    EmptyCell { row: usize, column: String },
    #[error("row {row}, column {column}: cannot parse {value:?} as a decimal return")]
    BadNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column {column}: non-finite return")]
    NonFinite { row: usize, column: String },
    #[error("row {row}: date {date} does not follow {previous} (dates must be strictly increasing)")]
    NonIncreasingDates {
        row: usize,
        date: NaiveDate,
        previous: NaiveDate,
    },
    #[error("panel needs at least {min_rows} rows and one asset, got {rows}x{assets}")]
    TooSmall {
        rows: usize,
        assets: usize,
        min_rows: usize,
    },
    #[error("insufficient history: {rows} rows cannot hold a {horizon}-day window plus a {hold}-day holding period")]
    InsufficientHistory {
        rows: usize,
        horizon: usize,
        hold: usize,
    },
    #[error("cannot split {rows} rows into {parts} non-empty parts")]
    BadPartition { rows: usize, parts: usize },
    #[error("row range {start}..{end} is outside the panel (0..{rows})")]
    OutOfRange { start: usize, end: usize, rows: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Dated `S x N` matrix of simple returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnsPanel {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    values: DMatrix<f64>,
}

impl ReturnsPanel {
    /// Builds a panel, enforcing strictly increasing dates and finite cells.
    ///
    /// Sub-panels produced by [`ReturnsPanel::slice`] may hold a single row;
    /// freshly constructed panels must hold at least one.
    pub fn new(
        dates: Vec<NaiveDate>,
        assets: Vec<String>,
        values: DMatrix<f64>,
    ) -> Result<Self, DataError> {
        let (rows, cols) = values.shape();
        if rows == 0 || cols == 0 || assets.len() != cols || dates.len() != rows {
            return Err(DataError::TooSmall {
                rows,
                assets: cols,
                min_rows: 1,
            });
        }
        for (r, pair) in dates.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(DataError::NonIncreasingDates {
                    row: r + 2,
                    date: pair[1],
                    previous: pair[0],
                });
            }
        }
        for r in 0..rows {
            for c in 0..cols {
                if !values[(r, c)].is_finite() {
                    return Err(DataError::NonFinite {
                        row: r + 1,
                        column: assets[c].clone(),
                    });
                }
            }
        }
        Ok(Self {
            dates,
            assets,
            values,
        })
    }

    /// Number of observations `S`.
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Number of assets `N`.
    pub fn n_assets(&self) -> usize {
        self.values.ncols()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Copies rows `range` into a new panel.
    pub fn slice(&self, range: Range<usize>) -> Result<Self, DataError> {
        if range.start >= range.end || range.end > self.len() {
            return Err(DataError::OutOfRange {
                start: range.start,
                end: range.end,
                rows: self.len(),
            });
        }
        let n = range.end - range.start;
        Ok(Self {
            dates: self.dates[range.clone()].to_vec(),
            assets: self.assets.clone(),
            values: self.values.rows(range.start, n).into_owned(),
        })
    }

    /// Portfolio return series `Y w`.
    pub fn portfolio_returns(&self, weights: &[f64]) -> Vec<f64> {
        assert_eq!(weights.len(), self.n_assets(), "weight dimension mismatch");
        (0..self.len())
            .map(|r| {
                self.values
                    .row(r)
                    .iter()
                    .zip(weights)
                    .map(|(y, w)| y * w)
                    .sum()
            })
            .collect()
    }

    /// Writes the panel as a wide CSV (`date,<asset1>,...`).
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), DataError> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string()];
        header.extend(self.assets.iter().cloned());
        wtr.write_record(&header)?;
        for (r, date) in self.dates.iter().enumerate() {
            let mut rec = vec![date.format("%Y-%m-%d").to_string()];
            rec.extend(self.values.row(r).iter().map(|v| format!("{v}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| DataError::Io {
            path: "<writer>".into(),
            source: e,
        })?;
        Ok(())
    }
}

/// Reads a wide CSV file. Row numbers in errors count data rows from 1.
pub fn load_returns(path: impl AsRef<Path>) -> Result<ReturnsPanel, DataError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| DataError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_returns_csv(&bytes)
}

/// Parses wide-CSV bytes; LF and CRLF line endings are both accepted.
pub fn parse_returns_csv(bytes: &[u8]) -> Result<ReturnsPanel, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(DataError::BadHeader);
    }
    let assets: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = assets.len();

    let mut dates = Vec::new();
    let mut cells = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec?;
        if rec.len() != n + 1 {
            return Err(DataError::RaggedRow {
                row,
                expected: n + 1,
                found: rec.len(),
            });
        }
        let raw_date = &rec[0];
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|_| {
            DataError::BadDate {
                row,
                value: raw_date.to_string(),
            }
        })?;
        if let Some(&prev) = dates.last() {
            if date <= prev {
                return Err(DataError::NonIncreasingDates {
                    row,
                    date,
                    previous: prev,
                });
            }
        }
        dates.push(date);
        for (c, cell) in rec.iter().skip(1).enumerate() {
            if cell.is_empty() {
                return Err(DataError::EmptyCell {
                    row,
                    column: assets[c].clone(),
                });
            }
            let v: f64 = cell.parse().map_err(|_| DataError::BadNumber {
                row,
                column: assets[c].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    row,
                    column: assets[c].clone(),
                });
            }
            cells.push(v);
        }
    }
    let s = dates.len();
    if s < 2 {
        return Err(DataError::TooSmall {
            rows: s,
            assets: n,
            min_rows: 2,
        });
    }
    let values = DMatrix::from_row_slice(s, n, &cells);
    ReturnsPanel::new(dates, assets, values)
}

/// One estimate-then-hold cycle of the rolling backtest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub in_sample: Range<usize>,
    pub out_sample: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSchedule {
    pub horizon: usize,
    pub hold: usize,
    pub periods: Vec<Period>,
}

impl WindowSchedule {
    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }
}

/// Rolling schedule over `rows` observations: estimate on `horizon` rows,
/// hold for `hold` rows, step forward by `hold`. A trailing partial holding
/// window is dropped.
pub fn schedule_for_len(rows: usize, horizon: usize, hold: usize) -> Result<WindowSchedule, DataError> {
    if horizon == 0 || hold == 0 {
        return Err(DataError::Invalid(
            "window horizon and holding period must be positive".into(),
        ));
    }
    if rows < horizon + hold {
        return Err(DataError::InsufficientHistory {
            rows,
            horizon,
            hold,
        });
    }
    let count = (rows - horizon) / hold;
    let periods = (0..count)
        .map(|k| {
            let start = horizon + k * hold;
            Period {
                in_sample: start - horizon..start,
                out_sample: start..start + hold,
            }
        })
        .collect();
    Ok(WindowSchedule {
        horizon,
        hold,
        periods,
    })
}

pub fn make_schedule(
    panel: &ReturnsPanel,
    horizon: usize,
    hold: usize,
) -> Result<WindowSchedule, DataError> {
    schedule_for_len(panel.len(), horizon, hold)
}

/// Row ranges of `parts` contiguous blocks covering `0..rows`; the remainder
/// goes to the earliest blocks (250 rows in 4 parts gives 63, 63, 62, 62).
pub fn partition_ranges(rows: usize, parts: usize) -> Result<Vec<Range<usize>>, DataError> {
    if parts == 0 || parts > rows {
        return Err(DataError::BadPartition { rows, parts });
    }
    let base = rows / parts;
    let extra = rows % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for k in 0..parts {
        let len = base + usize::from(k < extra);
        out.push(start..start + len);
        start += len;
    }
    Ok(out)
}

/// Splits a window into `parts` contiguous sub-panels (mixture components).
pub fn partition_mixture(
    window: &ReturnsPanel,
    parts: usize,
) -> Result<Vec<ReturnsPanel>, DataError> {
    partition_ranges(window.len(), parts)?
        .into_iter()
        .map(|r| window.slice(r))
        .collect()
}

/// Distribution used by [`synth_panel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthSpec {
    /// Every cell equals `value`.
    Constant { value: f64 },
    /// One-factor Gaussian returns: `r = mean_i + vol_i (sqrt(rho) f + sqrt(1-rho) e_i)`.
    /// Means and vols are spread linearly across assets between the given bounds.
    Gaussian {
        mean_low: f64,
        mean_high: f64,
        vol_low: f64,
        vol_high: f64,
        correlation: f64,
    },
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec::Gaussian {
            mean_low: 0.0002,
            mean_high: 0.0008,
            vol_low: 0.008,
            vol_high: 0.02,
            correlation: 0.3,
        }
    }
}

fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d += Duration::days(1);
    }
    out
}

/// Deterministic synthetic panel of `rows x assets` returns on consecutive
/// business days starting 2005-01-03.
pub fn synth_panel(seed: u64, rows: usize, assets: usize, spec: &SynthSpec) -> ReturnsPanel {
    assert!(rows >= 1 && assets >= 1, "synthetic panel needs at least one row and asset");
    let dates = business_days(NaiveDate::from_ymd_opt(2005, 1, 3).unwrap(), rows);
    let names = (0..assets).map(|i| format!("A{}", i + 1)).collect();
    let values = match *spec {
        SynthSpec::Constant { value } => DMatrix::from_element(rows, assets, value),
        SynthSpec::Gaussian {
            mean_low,
            mean_high,
            vol_low,
            vol_high,
            correlation,
        } => {
            let rho = correlation.clamp(0.0, 1.0);
            let lerp = |lo: f64, hi: f64, i: usize| {
                if assets == 1 {
                    lo
                } else {
                    lo + (hi - lo) * i as f64 / (assets - 1) as f64
                }
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let std_normal = Normal::new(0.0, 1.0).unwrap();
            let mut m = DMatrix::zeros(rows, assets);
            for r in 0..rows {
                let factor: f64 = std_normal.sample(&mut rng);
                for c in 0..assets {
                    let idio: f64 = std_normal.sample(&mut rng);
                    let shock = rho.sqrt() * factor + (1.0 - rho).sqrt() * idio;
                    m[(r, c)] = lerp(mean_low, mean_high, c) + lerp(vol_low, vol_high, c) * shock;
                }
            }
            m
        }
    };
    ReturnsPanel::new(dates, names, values).expect("synthetic panel satisfies invariants")
}

impl fmt::Display for ReturnsPanel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} rows x {} assets ({} .. {})",
            self.len(),
            self.n_assets(),
            self.dates.first().map(|d| d.to_string()).unwrap_or_default(),
            self.dates.last().map(|d| d.to_string()).unwrap_or_default()
        )
    }
}
