//! Adaptive Simpson quadrature on a dyadic node lattice.
//!
//! Every abscissa the recursion can visit is `a + k * (b - a) / 2^max_depth`
//! for an integer `k`, so callers can precompute (or memoize) expensive
//! integrand factors by node index. The float-valued entry point
//! [`adaptive_simpson`] is a thin wrapper that maps indices back to `x`.

/// Outcome of one adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Sum of the Richardson error estimates `|S2 - S1| / 15` over all
    /// accepted panels.
    pub error_estimate: f64,
    pub evaluations: usize,
    /// Panels accepted only because the lattice could not be refined further.
    pub forced_panels: usize,
}

impl Quadrature {
    pub fn converged(&self, abs_tol: f64) -> bool {
        self.error_estimate <= abs_tol
    }
}

/// Initial uniform split before adaptation starts. Keeps an oscillatory
/// integrand from being accepted on a lucky five-point sample.
pub const MIN_DEPTH: u32 = 6;

/// Integrates `f(k)` over node indices `0..=2^max_depth`, where `node_width`
/// is the spacing between adjacent indices in the integration variable.
///
/// `max_depth` must be at least `MIN_DEPTH + 2`.
pub fn adaptive_simpson_indexed<F>(f: F, node_width: f64, abs_tol: f64, max_depth: u32) -> Quadrature
where
    F: Fn(u64) -> f64,
{
    assert!((MIN_DEPTH + 2..63).contains(&max_depth));
    let total: u64 = 1 << max_depth;
    let panels: u64 = 1 << MIN_DEPTH;
    let panel_width = total / panels;
    let eps = abs_tol / panels as f64;

    let mut acc = Accumulator::default();
    let mut f_lo = f(0);
    acc.evaluations += 1;
    for p in 0..panels {
        let lo = p * panel_width;
        let hi = lo + panel_width;
        let mid = lo + panel_width / 2;
        let f_mid = f(mid);
        let f_hi = f(hi);
        acc.evaluations += 2;
        let whole = simpson(panel_width as f64 * node_width, f_lo, f_mid, f_hi);
        let panel = Panel { lo, hi, f_lo, f_mid, f_hi, whole };
        refine(&f, panel, eps, node_width, &mut acc);
        f_lo = f_hi;
    }

    Quadrature { value: acc.value, error_estimate: acc.error, evaluations: acc.evaluations, forced_panels: acc.forced }
}

/// Adaptive Simpson over `[a, b]` with nodes restricted to a `2^max_depth`
/// lattice.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, abs_tol: f64, max_depth: u32) -> Quadrature
where
    F: Fn(f64) -> f64,
{
    let node_width = (b - a) / (1u64 << max_depth) as f64;
    adaptive_simpson_indexed(|k| f(a + k as f64 * node_width), node_width, abs_tol, max_depth)
}

#[derive(Default)]
struct Accumulator {
    value: f64,
    error: f64,
    evaluations: usize,
    forced: usize,
}

struct Panel {
    lo: u64,
    hi: u64,
    f_lo: f64,
    f_mid: f64,
    f_hi: f64,
    whole: f64,
}

fn simpson(width: f64, f_lo: f64, f_mid: f64, f_hi: f64) -> f64 {
    width / 6.0 * (f_lo + 4.0 * f_mid + f_hi)
}

fn refine<F>(f: &F, panel: Panel, eps: f64, node_width: f64, acc: &mut Accumulator)
where
    F: Fn(u64) -> f64,
{
    let Panel { lo, hi, f_lo, f_mid, f_hi, whole } = panel;
    let width = hi - lo;
    let mid = lo + width / 2;
    let q1 = lo + width / 4;
    let q3 = mid + width / 4;
    let f_q1 = f(q1);
    let f_q3 = f(q3);
    acc.evaluations += 2;

    let half = (width / 2) as f64 * node_width;
    let left = simpson(half, f_lo, f_q1, f_mid);
    let right = simpson(half, f_mid, f_q3, f_hi);
    let delta = left + right - whole;

    // width 4 is the finest panel whose halves still have integer quarter points
    if delta.abs() <= 15.0 * eps || width <= 4 {
        if delta.abs() > 15.0 * eps {
            acc.forced += 1;
        }
        acc.value += left + right + delta / 15.0;
        acc.error += delta.abs() / 15.0;
        return;
    }

    refine(f, Panel { lo, hi: mid, f_lo, f_mid: f_q1, f_hi: f_mid, whole: left }, eps / 2.0, node_width, acc);
    refine(f, Panel { lo: mid, hi, f_lo: f_mid, f_mid: f_q3, f_hi, whole: right }, eps / 2.0, node_width, acc);
}
