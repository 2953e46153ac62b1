//! Search for the rescaling exponent α that maximizes the KS P value of the
//! fluctuations against the BHP distribution truncated to their range.

use rayon::prelude::*;
use serde::Serialize;

use crate::bhp::BhpTable;
use crate::error::{Error, Result};
use crate::ks::{ks_test, KsResult, PValueConvention};
use crate::returns::{fluctuations, FluctuationSet, Sign};

/// Below this the asymptotic P value is not trusted.
pub const MIN_KS_SAMPLE: usize = 20;

pub const DEFAULT_ALPHA_MIN: f64 = 0.45;
pub const DEFAULT_ALPHA_MAX: f64 = 0.65;
pub const DEFAULT_ALPHA_STEP: f64 = 0.005;
pub const DEFAULT_REFINE_WIDTH: f64 = 0.001;

/// KS test of the α-fluctuations of `magnitudes` against the BHP table
/// truncated to `[l_min, r_max]` of those fluctuations.
pub fn evaluate_alpha(
    magnitudes: &[f64],
    alpha: f64,
    sign: Sign,
    table: &BhpTable,
    convention: PValueConvention,
) -> Result<(KsResult, FluctuationSet)> {
    if magnitudes.len() < MIN_KS_SAMPLE {
        return Err(Error::InsufficientData(format!(
            "KS test needs at least {MIN_KS_SAMPLE} values, got {}",
            magnitudes.len()
        )));
    }
    let set = fluctuations(magnitudes, alpha, sign)?;
    let truncated = table.truncate(set.l_min, set.r_max)?;
    let ks = ks_test(&set.values, |x| truncated.cdf(x), convention)?;
    Ok((ks, set))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub sign: Sign,
    pub alphas: Vec<f64>,
    pub p_values: Vec<f64>,
    pub d_stats: Vec<f64>,
    pub alpha_star: f64,
    pub p_star: f64,
    /// Spacing of the finest grid level evaluated so far.
    pub step: f64,
    /// Grid points whose evaluation failed, with the cause.
    pub failures: Vec<(f64, String)>,
    #[serde(skip)]
    pub best_set: FluctuationSet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    alpha: f64,
    p_value: f64,
    d_stat: f64,
}

/// Grid `alpha_min + i * step`. When `alpha_min` is a whole multiple of
/// `step` the points are computed as `k * step`, so overlapping scans share
/// bit-identical abscissae.
pub fn alpha_grid(alpha_min: f64, alpha_max: f64, step: f64) -> Result<Vec<f64>> {
    if !(alpha_min > 0.0 && alpha_min < alpha_max && alpha_max.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "alpha range must satisfy 0 < min < max, got [{alpha_min}, {alpha_max}]"
        )));
    }
    if !(step > 0.0 && step <= (alpha_max - alpha_min) / 4.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "alpha step {step} must be positive and at most a quarter of the range"
        )));
    }
    let count = ((alpha_max - alpha_min) / step + 1e-9).floor() as usize + 1;
    let k0 = alpha_min / step;
    let aligned = (k0 - k0.round()).abs() < 1e-6;
    Ok((0..count).map(|i| if aligned { (k0.round() + i as f64) * step } else { alpha_min + i as f64 * step }).collect())
}

/// Evaluates every α in parallel on the current rayon pool. Failures are kept
/// per point; the order of the output follows `alphas`.
fn evaluate_points<E>(alphas: &[f64], eval: &E) -> (Vec<Point>, Vec<(f64, String)>)
where
    E: Fn(f64) -> Result<(f64, f64)> + Sync,
{
    let outcomes: Vec<(f64, Result<(f64, f64)>)> = alphas.par_iter().map(|&a| (a, eval(a))).collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (alpha, outcome) in outcomes {
        match outcome {
            Ok((p_value, d_stat)) => points.push(Point { alpha, p_value, d_stat }),
            Err(e) => failures.push((alpha, e.to_string())),
        }
    }
    (points, failures)
}

/// Largest P value; the smallest α wins ties.
fn argmax(points: &[Point]) -> Option<Point> {
    points.iter().copied().fold(None, |best, p| match best {
        Some(b) if b.p_value > p.p_value || (b.p_value == p.p_value && b.alpha <= p.alpha) => Some(b),
        _ => Some(p),
    })
}

struct Curve {
    points: Vec<Point>,
    failures: Vec<(f64, String)>,
    step: f64,
}

impl Curve {
    fn best(&self) -> Point {
        argmax(&self.points).expect("curve has points")
    }
}

fn scan_curve<E>(alphas: &[f64], step: f64, eval: &E) -> Result<Curve>
where
    E: Fn(f64) -> Result<(f64, f64)> + Sync,
{
    let (points, failures) = evaluate_points(alphas, eval);
    if points.is_empty() {
        return Err(Error::ScanFailed(failures));
    }
    Ok(Curve { points, failures, step })
}

/// Halves the step around the current best α until it is at most
/// `target_width`, merging every evaluated point.
fn refine_curve<E>(mut curve: Curve, target_width: f64, eval: &E) -> Curve
where
    E: Fn(f64) -> Result<(f64, f64)> + Sync,
{
    // stay inside the coarse range
    let lo =
        curve.points.iter().map(|p| p.alpha).chain(curve.failures.iter().map(|f| f.0)).fold(f64::INFINITY, f64::min);
    let hi = curve
        .points
        .iter()
        .map(|p| p.alpha)
        .chain(curve.failures.iter().map(|f| f.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut step = curve.step;
    while step > target_width * (1.0 + 1e-9) {
        step /= 2.0;
        let center = curve.best().alpha;
        let fresh: Vec<f64> = [center - step, center + step]
            .into_iter()
            .filter(|&a| a >= lo && a <= hi && !curve.points.iter().any(|p| p.alpha == a))
            .collect();
        let (points, failures) = evaluate_points(&fresh, eval);
        curve.points.extend(points);
        curve.failures.extend(failures);
        curve.points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    }
    curve.step = step;
    curve
}

fn into_result(
    curve: Curve,
    magnitudes: &[f64],
    sign: Sign,
    table: &BhpTable,
    convention: PValueConvention,
) -> Result<ScanResult> {
    let best = curve.best();
    let (_, best_set) = evaluate_alpha(magnitudes, best.alpha, sign, table, convention)?;
    let mut failures = curve.failures;
    failures.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(ScanResult {
        sign,
        alphas: curve.points.iter().map(|p| p.alpha).collect(),
        p_values: curve.points.iter().map(|p| p.p_value).collect(),
        d_stats: curve.points.iter().map(|p| p.d_stat).collect(),
        alpha_star: best.alpha,
        p_star: best.p_value,
        step: curve.step,
        failures,
        best_set,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanConfig {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub step: f64,
    pub convention: PValueConvention,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            alpha_min: DEFAULT_ALPHA_MIN,
            alpha_max: DEFAULT_ALPHA_MAX,
            step: DEFAULT_ALPHA_STEP,
            convention: PValueConvention::default(),
        }
    }
}

fn evaluator<'a>(
    magnitudes: &'a [f64],
    sign: Sign,
    table: &'a BhpTable,
    convention: PValueConvention,
) -> impl Fn(f64) -> Result<(f64, f64)> + Sync + 'a {
    move |alpha| evaluate_alpha(magnitudes, alpha, sign, table, convention).map(|(ks, _)| (ks.p_value, ks.d_stat))
}

pub fn scan(magnitudes: &[f64], sign: Sign, config: &ScanConfig, table: &BhpTable) -> Result<ScanResult> {
    let alphas = alpha_grid(config.alpha_min, config.alpha_max, config.step)?;
    let eval = evaluator(magnitudes, sign, table, config.convention);
    let curve = scan_curve(&alphas, config.step, &eval)?;
    into_result(curve, magnitudes, sign, table, config.convention)
}

/// Local bisection around `coarse.alpha_star` down to `target_width`.
/// A target no finer than the coarse step returns `coarse` unchanged.
pub fn refine(
    magnitudes: &[f64],
    coarse: &ScanResult,
    table: &BhpTable,
    target_width: f64,
    convention: PValueConvention,
) -> Result<ScanResult> {
    if !(target_width > 0.0) {
        return Err(Error::InvalidParameter(format!("refinement width {target_width} must be positive")));
    }
    if target_width >= coarse.step * (1.0 - 1e-9) {
        return Ok(coarse.clone());
    }
    let curve = Curve {
        points: coarse
            .alphas
            .iter()
            .zip(&coarse.p_values)
            .zip(&coarse.d_stats)
            .map(|((&alpha, &p_value), &d_stat)| Point { alpha, p_value, d_stat })
            .collect(),
        failures: coarse.failures.clone(),
        step: coarse.step,
    };
    let eval = evaluator(magnitudes, coarse.sign, table, convention);
    let curve = refine_curve(curve, target_width, &eval);
    into_result(curve, magnitudes, coarse.sign, table, convention)
}
