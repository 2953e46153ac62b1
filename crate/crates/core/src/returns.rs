//! Daily returns, sign partition and α-rescaled fluctuations.

use chrono::NaiveDate;
use serde::Serialize;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Positive => "positive",
            Sign::Negative => "negative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricePoint {
    pub date: NaiveDate,
    pub close: f64,
}

/// Dated closes in strictly increasing date order.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    entries: Vec<PricePoint>,
}

impl PriceSeries {
    pub fn new(entries: Vec<PricePoint>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::InsufficientData(format!("need at least 2 prices, got {}", entries.len())));
        }
        for (i, p) in entries.iter().enumerate() {
            if !(p.close > 0.0 && p.close.is_finite()) {
                return Err(Error::InvalidParameter(format!("close #{i} ({}) is not positive", p.close)));
            }
        }
        if let Some(w) = entries.windows(2).find(|w| w[1].date <= w[0].date) {
            return Err(Error::InvalidParameter(format!(
                "dates not strictly increasing: {} then {}",
                w[0].date, w[1].date
            )));
        }
        Ok(Self { entries })
    }

    /// Reads a CSV with a header row containing `date` and `close` columns.
    /// Other columns are ignored. Errors name the offending file line.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Input { line: 1, message: e.to_string() })?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim().eq_ignore_ascii_case(name))
                .ok_or_else(|| Error::Input { line: 1, message: format!("missing `{name}` column") })
        };
        let (date_col, close_col) = (column("date")?, column("close")?);

        let mut entries: Vec<PricePoint> = Vec::new();
        for record in rdr.records() {
            let record = record
                .map_err(|e| Error::Input { line: e.position().map_or(0, |p| p.line()), message: e.to_string() })?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |col: usize, name: &str| {
                record
                    .get(col)
                    .map(str::trim)
                    .ok_or_else(|| Error::Input { line, message: format!("missing {name} field") })
            };
            let date_str = field(date_col, "date")?;
            let date = NaiveDate::parse_from_str(date_str, "%Y-%m-%d")
                .map_err(|e| Error::Input { line, message: format!("bad date {date_str:?}: {e}") })?;
            let close_str = field(close_col, "close")?;
            let close: f64 =
                close_str.parse().map_err(|_| Error::Input { line, message: format!("bad close {close_str:?}") })?;
            if !(close > 0.0 && close.is_finite()) {
                return Err(Error::Input { line, message: format!("close {close} is not positive") });
            }
            if let Some(prev) = entries.last() {
                if date <= prev.date {
                    return Err(Error::Input {
                        line,
                        message: format!("date {date} does not follow {} (rows must be ascending)", prev.date),
                    });
                }
            }
            entries.push(PricePoint { date, close });
        }
        Self::new(entries)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn entries(&self) -> &[PricePoint] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyReturn {
    pub date: NaiveDate,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    entries: Vec<DailyReturn>,
}

impl ReturnSeries {
    pub fn entries(&self) -> &[DailyReturn] {
        &self.entries
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.r)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `r = (Y(t) - Y(t-1)) / Y(t-1)`, dated at the later day.
pub fn compute_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 prices".into()));
    }
    let entries = prices
        .entries
        .windows(2)
        .map(|w| DailyReturn { date: w[1].date, r: (w[1].close - w[0].close) / w[0].close })
        .collect();
    Ok(ReturnSeries { entries })
}

/// Return magnitudes split by sign. Zero returns belong to neither side.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Partition {
    pub positives: Vec<f64>,
    /// `-r` for every negative return.
    pub negatives: Vec<f64>,
    pub zeros: usize,
}

impl Partition {
    pub fn magnitudes(&self, sign: Sign) -> &[f64] {
        match sign {
            Sign::Positive => &self.positives,
            Sign::Negative => &self.negatives,
        }
    }
}

pub fn partition(returns: &ReturnSeries) -> Partition {
    let mut out = Partition::default();
    for r in returns.values() {
        if r > 0.0 {
            out.positives.push(r);
        } else if r < 0.0 {
            out.negatives.push(-r);
        } else {
            out.zeros += 1;
        }
    }
    out
}

/// Mean and population standard deviation of `v^alpha`.
///
/// The variance is accumulated about the mean, which equals
/// `(1/m) sum v^(2 alpha) - mu^2` exactly but does not cancel catastrophically.
pub fn rescale_stats(magnitudes: &[f64], alpha: f64) -> Result<(f64, f64)> {
    if magnitudes.is_empty() {
        return Err(Error::InsufficientData("no magnitudes to rescale".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if let Some(v) = magnitudes.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParameter(format!("magnitude {v} is not positive")));
    }
    // summed in sorted order so the result does not depend on input order
    let mut powers: Vec<f64> = magnitudes.iter().map(|v| v.powf(alpha)).collect();
    powers.sort_by(f64::total_cmp);
    let m = powers.len() as f64;
    let mu = powers.iter().sum::<f64>() / m;
    let var = powers.iter().map(|p| (p - mu).powi(2)).sum::<f64>() / m;
    let sigma = var.sqrt();
    if !(sigma > 1e-12 * mu) {
        return Err(Error::DegenerateData(format!(
            "rescaled magnitudes have zero spread (mu = {mu}, sigma = {sigma})"
        )));
    }
    Ok((mu, sigma))
}

/// Standardized α-rescaled magnitudes of one sign.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationSet {
    pub sign: Sign,
    pub alpha: f64,
    #[serde(skip)]
    pub values: Vec<f64>,
    pub count: usize,
    pub mu_alpha: f64,
    pub sigma_alpha: f64,
    pub l_min: f64,
    pub r_max: f64,
}

pub fn fluctuations(magnitudes: &[f64], alpha: f64, sign: Sign) -> Result<FluctuationSet> {
    let (mu, sigma) = rescale_stats(magnitudes, alpha)?;
    let values: Vec<f64> = magnitudes.iter().map(|v| (v.powf(alpha) - mu) / sigma).collect();
    let l_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(FluctuationSet { sign, alpha, count: values.len(), values, mu_alpha: mu, sigma_alpha: sigma, l_min, r_max })
}
