//! Data-collapse artifacts: density histograms with model overlays, and the
//! density of raw return magnitudes induced by the α-rescaling.

pub mod report;

use serde::Serialize;
use std::io::Write;

use crate::bhp::{BhpTable, TruncatedBhp};
use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::returns::{FluctuationSet, Sign};

pub const DEFAULT_BINS: usize = 30;
pub const MIN_BINS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramSpec {
    pub bin_count: usize,
    pub lo: f64,
    pub hi: f64,
}

impl HistogramSpec {
    pub fn new(bin_count: usize, lo: f64, hi: f64) -> Result<Self> {
        let spec = Self { bin_count, lo, hi };
        spec.validate()?;
        Ok(spec)
    }

    /// `bin_count` bins over `[min, max]` of `values`.
    pub fn spanning(values: &[f64], bin_count: usize) -> Result<Self> {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(bin_count, lo, hi)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi && self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::InvalidParameter(format!("degenerate histogram range [{}, {}]", self.lo, self.hi)));
        }
        if self.bin_count < MIN_BINS {
            return Err(Error::InvalidParameter(format!("at least {MIN_BINS} bins required, got {}", self.bin_count)));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bin_count as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub spec: HistogramSpec,
    pub counts: Vec<usize>,
    /// `count / (in_range * width)`, so heights times width sum to one.
    pub densities: Vec<f64>,
    pub below_range: usize,
    pub above_range: usize,
}

impl Histogram {
    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.counts.len()).map(|i| self.spec.center(i))
    }

    pub fn mass(&self) -> f64 {
        self.densities.iter().sum::<f64>() * self.spec.width()
    }
}

/// Density-normalized histogram. Values outside the range are counted
/// separately and excluded from the normalization.
pub fn histogram(values: &[f64], spec: &HistogramSpec) -> Result<Histogram> {
    spec.validate()?;
    if values.is_empty() {
        return Err(Error::InsufficientData("histogram of an empty sample".into()));
    }
    let width = spec.width();
    let mut counts = vec![0usize; spec.bin_count];
    let (mut below, mut above) = (0, 0);
    for &v in values {
        if v < spec.lo {
            below += 1;
        } else if v > spec.hi {
            above += 1;
        } else {
            let i = (((v - spec.lo) / width) as usize).min(spec.bin_count - 1);
            counts[i] += 1;
        }
    }
    let inside: usize = counts.iter().sum();
    if inside == 0 {
        return Err(Error::InsufficientData("no values inside the histogram range".into()));
    }
    let norm = inside as f64 * width;
    let densities = counts.iter().map(|&c| c as f64 / norm).collect();
    Ok(Histogram { spec: *spec, counts, densities, below_range: below, above_range: above })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollapseRow {
    pub center: f64,
    pub count: usize,
    pub hist_density: f64,
    pub model_density: f64,
    /// `None` for an empty bin (or zero model density).
    pub log10_hist: Option<f64>,
    pub log10_model: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollapseRecord {
    pub bin_width: f64,
    pub below_range: usize,
    pub above_range: usize,
    pub rows: Vec<CollapseRow>,
}

fn log10_or_none(v: f64) -> Option<f64> {
    (v > 0.0).then(|| v.log10())
}

fn overlay_with<F: Fn(f64) -> f64>(hist: &Histogram, model: F) -> CollapseRecord {
    let rows = hist
        .centers()
        .zip(hist.counts.iter().zip(&hist.densities))
        .map(|(center, (&count, &hist_density))| {
            let model_density = model(center);
            CollapseRow {
                center,
                count,
                hist_density,
                model_density,
                log10_hist: log10_or_none(hist_density),
                log10_model: log10_or_none(model_density),
            }
        })
        .collect();
    CollapseRecord { bin_width: hist.spec.width(), below_range: hist.below_range, above_range: hist.above_range, rows }
}

/// Pairs each bin with the truncated BHP density at its center.
pub fn overlay(hist: &Histogram, trunc: &TruncatedBhp<'_>) -> CollapseRecord {
    overlay_with(hist, |x| trunc.pdf(x))
}

impl CollapseRecord {
    /// `center<TAB>hist_density<TAB>model_density`, with a header line.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "center\thist_density\tmodel_density")?;
        for row in &self.rows {
            writeln!(out, "{}\t{}\t{}", row.center, row.hist_density, row.model_density)?;
        }
        Ok(())
    }

    /// Mean of `|hist - model| / model` over bins with at least `min_count`
    /// observations.
    pub fn mean_relative_deviation(&self, min_count: usize) -> Option<f64> {
        let devs: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.count >= min_count && r.model_density > 0.0)
            .map(|r| (r.hist_density - r.model_density).abs() / r.model_density)
            .collect();
        (!devs.is_empty()).then(|| devs.iter().sum::<f64>() / devs.len() as f64)
    }
}

/// Density of raw magnitudes `x` implied by truncated-BHP fluctuations:
///
/// ```text
/// g(x) = coef_a x^(alpha - 1) f_BHP(coef_b x^alpha - coef_c),
/// coef_a = alpha / (sigma dF), coef_b = 1 / sigma, coef_c = mu / sigma
/// ```
///
/// on `[(sigma L + mu)^(1/alpha), (sigma R + mu)^(1/alpha)]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransformedPdf<'a> {
    pub sign: Sign,
    pub alpha: f64,
    pub mu: f64,
    pub sigma: f64,
    pub mass: f64,
    pub coef_a: f64,
    pub coef_b: f64,
    pub coef_c: f64,
    /// `alpha / mu`, the convention behind the published prefactors.
    pub paper_coef_a: f64,
    /// `true` when `paper_coef_a` and `coef_a` differ by more than 1 %.
    pub prefactor_discrepancy: bool,
    pub support_lo: f64,
    pub support_hi: f64,
    #[serde(skip)]
    trunc: TruncatedBhp<'a>,
}

pub fn transformed_pdf<'a>(set: &FluctuationSet, trunc: &TruncatedBhp<'a>) -> Result<TransformedPdf<'a>> {
    let mass = trunc.mass();
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter("truncation mass is zero".into()));
    }
    let (alpha, mu, sigma) = (set.alpha, set.mu_alpha, set.sigma_alpha);
    let coef_a = alpha / (sigma * mass);
    let paper_coef_a = alpha / mu;
    let image = |u: f64| (sigma * u + mu).max(0.0).powf(1.0 / alpha);
    Ok(TransformedPdf {
        sign: set.sign,
        alpha,
        mu,
        sigma,
        mass,
        coef_a,
        coef_b: 1.0 / sigma,
        coef_c: mu / sigma,
        paper_coef_a,
        prefactor_discrepancy: ((paper_coef_a - coef_a) / coef_a).abs() > 0.01,
        support_lo: image(trunc.lower()),
        support_hi: image(trunc.upper()),
        trunc: *trunc,
    })
}

impl<'a> TransformedPdf<'a> {
    pub fn table(&self) -> &'a BhpTable {
        self.trunc.table()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) || x < self.support_lo || x > self.support_hi {
            return 0.0;
        }
        let u = self.coef_b * x.powf(self.alpha) - self.coef_c;
        self.coef_a * x.powf(self.alpha - 1.0) * self.table().pdf(u)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.support_lo {
            return 0.0;
        }
        if x >= self.support_hi {
            return 1.0;
        }
        self.trunc.cdf((x.powf(self.alpha) - self.mu) / self.sigma)
    }

    /// Numerical integral of [`pdf`](Self::pdf) over the support, taken in
    /// `s = x^alpha` so the `x^(alpha - 1)` factor near zero stays bounded.
    pub fn integral(&self) -> f64 {
        let inv = 1.0 / self.alpha;
        let s_lo = self.support_lo.powf(self.alpha);
        let s_hi = self.support_hi.powf(self.alpha);
        let integrand = |s: f64| {
            if s <= 0.0 {
                return 0.0;
            }
            let x = s.powf(inv).clamp(self.support_lo, self.support_hi);
            self.pdf(x) * inv * x / s
        };
        adaptive_simpson(integrand, s_lo, s_hi, 1e-9, 24).value
    }
}

/// Histogram of raw magnitudes with the transformed density at bin centers.
pub fn return_collapse(magnitudes: &[f64], tp: &TransformedPdf<'_>, spec: &HistogramSpec) -> Result<CollapseRecord> {
    let hist = histogram(magnitudes, spec)?;
    Ok(overlay_with(&hist, |x| tp.pdf(x)))
}
