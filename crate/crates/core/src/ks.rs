//! One-sample Kolmogorov-Smirnov test against a continuous model cdf.

use serde::Serialize;

use crate::error::{Error, Result};

/// Asymptotic P-value convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PValueConvention {
    /// `lambda = (sqrt(n) + 0.12 + 0.11 / sqrt(n)) D`.
    #[default]
    Stephens,
    /// `lambda = sqrt(n) D`.
    Asymptotic,
}

impl PValueConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            PValueConvention::Stephens => "stephens",
            PValueConvention::Asymptotic => "asymptotic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub d_stat: f64,
    pub n: usize,
    pub p_value: f64,
    /// Sample point at which the supremum is attained.
    pub d_location: f64,
    /// Number of sorted neighbours that are exactly equal.
    pub ties: usize,
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::InsufficientData("empirical cdf of an empty sample".into()));
        }
        if sample.iter().any(|x| x.is_nan()) {
            return Err(Error::InvalidParameter("sample contains NaN".into()));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    /// Fraction of sample points `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn ties(&self) -> usize {
        self.sorted.windows(2).filter(|w| w[0] == w[1]).count()
    }
}

fn checked<F: Fn(f64) -> f64>(model_cdf: &F, x: f64) -> Result<f64> {
    let f = model_cdf(x);
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::Model(format!("model cdf returned {f} at {x}")))
    }
}

/// `D = max_i max(|i/n - F(x_(i))|, |(i-1)/n - F(x_(i))|)` and the order
/// statistic attaining it (first one on ties).
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], model_cdf: F) -> Result<(f64, f64)> {
    let ecdf = EmpiricalCdf::new(sample)?;
    statistic_sorted(ecdf.sorted(), &model_cdf)
}

fn statistic_sorted<F: Fn(f64) -> f64>(sorted: &[f64], model_cdf: &F) -> Result<(f64, f64)> {
    let n = sorted.len() as f64;
    let mut best = (-1.0, sorted[0]);
    for (i, &x) in sorted.iter().enumerate() {
        let f = checked(model_cdf, x)?;
        let above = ((i + 1) as f64 / n - f).abs();
        let below = (i as f64 / n - f).abs();
        let d = above.max(below);
        if d > best.0 {
            best = (d, x);
        }
    }
    Ok(best)
}

/// `Q(lambda) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lambda^2)`, summed until a
/// term drops below 1e-12 and clamped to `[0, 1]`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100_000u32 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    sum.clamp(0.0, 1.0)
}

pub fn ks_pvalue(d_stat: f64, n: usize) -> f64 {
    ks_pvalue_with(d_stat, n, PValueConvention::Stephens)
}

pub fn ks_pvalue_with(d_stat: f64, n: usize, convention: PValueConvention) -> f64 {
    if d_stat <= 0.0 {
        return 1.0;
    }
    let sn = (n as f64).sqrt();
    let lambda = match convention {
        PValueConvention::Stephens => (sn + 0.12 + 0.11 / sn) * d_stat,
        PValueConvention::Asymptotic => sn * d_stat,
    };
    kolmogorov_q(lambda)
}

pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], model_cdf: F, convention: PValueConvention) -> Result<KsResult> {
    let ecdf = EmpiricalCdf::new(sample)?;
    let (d_stat, d_location) = statistic_sorted(ecdf.sorted(), &model_cdf)?;
    Ok(KsResult {
        d_stat,
        n: ecdf.len(),
        p_value: ks_pvalue_with(d_stat, ecdf.len(), convention),
        d_location,
        ties: ecdf.ties(),
    })
}

/// `|F_emp(x) - F_model(x)|` at every grid point.
pub fn distance_curve<F: Fn(f64) -> f64>(sample: &[f64], model_cdf: F, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("distance curve needs a nonempty grid".into()));
    }
    let ecdf = EmpiricalCdf::new(sample)?;
    grid.iter().map(|&x| Ok((x, (ecdf.eval(x) - checked(&model_cdf, x)?).abs()))).collect()
}

/// `grid` plus every order statistic and the float just below it, sorted and
/// deduplicated. The maximum of the distance curve over this grid is `D`.
pub fn refined_grid(sample: &[f64], grid: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = grid.to_vec();
    for &x in sample {
        out.push(x);
        out.push(x.next_down());
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}
