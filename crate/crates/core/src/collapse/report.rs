//! The JSON report written by the `analyze` and `scan` commands.
//!
//! Field order is fixed by the struct definitions and floats are printed in
//! shortest round-trip form, so equal inputs give byte-identical documents.

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{histogram, overlay, return_collapse, transformed_pdf, CollapseRecord, HistogramSpec, TransformedPdf};
use crate::alpha_scan::{evaluate_alpha, ScanConfig, ScanResult};
use crate::bhp::{BhpParams, BhpTable};
use crate::error::Result;
use crate::ks::{distance_curve, KsResult, PValueConvention};
use crate::returns::{Partition, Sign};

pub const DISTANCE_CURVE_POINTS: usize = 401;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct BhpMeta {
    #[serde(flatten)]
    pub params: BhpParams,
    pub normalization_factor: f64,
}

impl BhpMeta {
    pub fn of(table: &BhpTable) -> Self {
        Self { params: table.params().clone(), normalization_factor: table.normalization_factor() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub input_sha256: String,
    pub sign: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_width: Option<f64>,
    pub bins: usize,
    pub pvalue_convention: PValueConvention,
    pub min_ks_sample: usize,
    pub bhp: BhpMeta,
}

/// Sample sizes. The positive/negative fractions are given both per trading
/// day (price rows) and per return, since the two conventions differ by one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Counts {
    pub days: usize,
    pub returns: usize,
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
    pub positive_per_day: f64,
    pub negative_per_day: f64,
    pub positive_per_return: f64,
    pub negative_per_return: f64,
}

impl Counts {
    pub fn new(days: usize, partition: &Partition) -> Self {
        let positive = partition.positives.len();
        let negative = partition.negatives.len();
        let returns = positive + negative + partition.zeros;
        Self {
            days,
            returns,
            positive,
            negative,
            zero: partition.zeros,
            positive_per_day: positive as f64 / days as f64,
            negative_per_day: negative as f64 / days as f64,
            positive_per_return: positive as f64 / returns as f64,
            negative_per_return: negative as f64 / returns as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub alpha: f64,
    pub count: usize,
    pub mu: f64,
    pub sigma: f64,
    pub l_min: f64,
    pub r_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Transformed<'a> {
    #[serde(flatten)]
    pub pdf: TransformedPdf<'a>,
    /// Numerical integral of the density over its support.
    pub integral: f64,
    /// Same integral with `paper_coef_a` in place of `coef_a`.
    pub paper_integral: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Histograms {
    pub fluctuations: CollapseRecord,
    pub returns: CollapseRecord,
}

/// `|F_n(x) - F(x)|` on a uniform grid over `[l_min, r_max]`.
#[derive(Debug, Clone, Serialize)]
pub struct DistanceCurve {
    pub x: Vec<f64>,
    pub d: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SignReport<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanResult>,
    pub ks: KsResult,
    pub stats: Stats,
    pub transformed: Transformed<'a>,
    pub histograms: Histograms,
    pub distance_curve: DistanceCurve,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<'a> {
    pub meta: Meta,
    pub counts: Counts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positive: Option<SignReport<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative: Option<SignReport<'a>>,
}

impl Report<'_> {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is always serializable");
        s.push('\n');
        s
    }

    pub fn section(&self, sign: Sign) -> Option<&SignReport<'_>> {
        match sign {
            Sign::Positive => self.positive.as_ref(),
            Sign::Negative => self.negative.as_ref(),
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + i as f64 * h }).collect()
}

/// Full analysis of one sign at `alpha`: KS test, fluctuation statistics,
/// the transformed density, both collapse histograms and the distance curve.
/// `scan` is attached verbatim when the exponent came from a scan.
pub fn analyze_sign<'a>(
    magnitudes: &[f64],
    sign: Sign,
    alpha: f64,
    table: &'a BhpTable,
    bins: usize,
    convention: PValueConvention,
    scan: Option<ScanResult>,
) -> Result<SignReport<'a>> {
    let (ks, set) = evaluate_alpha(magnitudes, alpha, sign, table, convention)?;
    let trunc = table.truncate(set.l_min, set.r_max)?;
    let tp = transformed_pdf(&set, &trunc)?;

    let fl_hist = histogram(&set.values, &HistogramSpec::spanning(&set.values, bins)?)?;
    let fluctuations = overlay(&fl_hist, &trunc);
    let returns = return_collapse(magnitudes, &tp, &HistogramSpec::spanning(magnitudes, bins)?)?;

    let x = linspace(set.l_min, set.r_max, DISTANCE_CURVE_POINTS);
    let d = distance_curve(&set.values, |u| trunc.cdf(u), &x)?.into_iter().map(|(_, d)| d).collect();

    let integral = tp.integral();
    Ok(SignReport {
        scan,
        ks,
        stats: Stats {
            alpha,
            count: set.count,
            mu: set.mu_alpha,
            sigma: set.sigma_alpha,
            l_min: set.l_min,
            r_max: set.r_max,
        },
        transformed: Transformed { pdf: tp, integral, paper_integral: integral * tp.paper_coef_a / tp.coef_a },
        histograms: Histograms { fluctuations, returns },
        distance_curve: DistanceCurve { x, d },
    })
}
