//! The BHP probability density and distribution function.
//!
//! The density is the Fourier inversion of the characteristic function of a
//! weighted sum of independent centred `chi^2_1 / 2` variables, one per
//! nonzero spin-wave mode of an `L x L` periodic lattice with `N = L^2`
//! sites:
//!
//! ```text
//! f(mu) = s / (2 pi) \int dx exp(i x mu s) prod_k exp(-i t_k / 2) (1 - i t_k)^(-1/2),
//! t_k = x / (N lambda_k),   s^2 = sum_k 1 / (2 N^2 lambda_k^2)
//! ```
//!
//! The integrand is Hermitian in `x`, so the density is evaluated as
//! `(s / pi) \int_0^x_max A(x) cos(x mu s + phi(x)) dx` with amplitude
//! `A(x) = prod_k (1 + t_k^2)^(-1/4)` and phase
//! `phi(x) = sum_k (atan(t_k) - t_k) / 2`.
//!
//! Evaluating this per query is far too slow for KS work, so the density is
//! tabulated once ([`build_table`]) and queried through monotone cubic
//! interpolation.

mod cache;

pub use cache::{default_cache_path, load_or_build, read_table, write_table, CACHE_DIR_ENV, FORMAT_VERSION};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::quadrature::{adaptive_simpson, adaptive_simpson_indexed, Quadrature};

pub const DEFAULT_LATTICE_SIDE: usize = 10;
pub const MAX_LATTICE_SIDE: usize = 32;
pub const DEFAULT_GRID_MIN: f64 = -10.0;
pub const DEFAULT_GRID_MAX: f64 = 15.0;
pub const DEFAULT_GRID_STEP: f64 = 1e-3;
pub const MAX_GRID_STEP: f64 = 0.05;
pub const DEFAULT_ABS_TOL: f64 = 1e-10;
/// Default quadrature lattice spacing target in `x`; the node depth is the
/// smallest power of two reaching it over `[0, x_max]`.
pub const TARGET_NODE_WIDTH: f64 = 0.0075;
pub const MIN_DEPTH: u32 = 16;
pub const MAX_DEPTH: u32 = 26;
/// Deeper lattices are evaluated directly instead of through a node cache.
const MAX_CACHED_DEPTH: u32 = 22;
/// `x_max` is the smallest integer at which the integrand modulus bound
/// drops below this value.
pub const DECAY_BOUND: f64 = 1e-14;

/// Which way round the density is laid out on the `mu` axis.
///
/// `Standard` is the inversion integral as written: exponential tail below
/// the mean, fast (finite-lattice: bounded) decay above it. `Mirrored`
/// reflects `mu -> -mu`, putting the exponential tail on the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Standard,
    Mirrored,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Standard => "standard",
            Orientation::Mirrored => "mirrored",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Orientation::Standard),
            "mirrored" => Ok(Orientation::Mirrored),
            other => Err(Error::InvalidParameter(format!("unknown orientation {other:?}"))),
        }
    }
}

/// Spin-wave spectrum of the `L x L` periodic lattice Laplacian with the
/// zero mode removed, in row-major `(n1, n2)` order.
pub fn lattice_eigenvalues(lattice_side: usize) -> Result<Vec<f64>> {
    if lattice_side < 2 {
        return Err(Error::InvalidParameter(format!("lattice side must be at least 2, got {lattice_side}")));
    }
    let l = lattice_side as f64;
    let mut out = Vec::with_capacity(lattice_side * lattice_side - 1);
    for n1 in 0..lattice_side {
        for n2 in 0..lattice_side {
            if n1 == 0 && n2 == 0 {
                continue;
            }
            let c1 = (2.0 * PI * n1 as f64 / l).cos();
            let c2 = (2.0 * PI * n2 as f64 / l).cos();
            out.push(4.0 - 2.0 * c1 - 2.0 * c2);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BhpParams {
    pub lattice_side: usize,
    pub n_sites: usize,
    #[serde(skip)]
    pub eigenvalues: Vec<f64>,
    pub orientation: Orientation,
    pub x_max: f64,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_step: f64,
    pub quadrature_abs_tol: f64,
    pub quadrature_max_depth: u32,
}

impl BhpParams {
    /// Default quadrature and grid settings for an `L x L` lattice; `x_max`
    /// is derived from the integrand decay bound.
    pub fn new(lattice_side: usize) -> Result<Self> {
        if lattice_side > MAX_LATTICE_SIDE {
            return Err(Error::InvalidParameter(format!(
                "lattice side {lattice_side} exceeds supported maximum {MAX_LATTICE_SIDE}"
            )));
        }
        let eigenvalues = lattice_eigenvalues(lattice_side)?;
        let n_sites = lattice_side * lattice_side;
        let x_max = Spectrum::new(&eigenvalues, n_sites).decay_cutoff(DECAY_BOUND);
        let quadrature_max_depth = ((x_max / TARGET_NODE_WIDTH).log2().ceil() as u32).clamp(MIN_DEPTH, MAX_DEPTH);
        Ok(Self {
            lattice_side,
            n_sites,
            eigenvalues,
            orientation: Orientation::Standard,
            x_max,
            grid_min: DEFAULT_GRID_MIN,
            grid_max: DEFAULT_GRID_MAX,
            grid_step: DEFAULT_GRID_STEP,
            quadrature_abs_tol: DEFAULT_ABS_TOL,
            quadrature_max_depth,
        })
    }

    pub fn with_grid(mut self, grid_min: f64, grid_max: f64, grid_step: f64) -> Self {
        self.grid_min = grid_min;
        self.grid_max = grid_max;
        self.grid_step = grid_step;
        self
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.lattice_side < 2 || self.lattice_side > MAX_LATTICE_SIDE {
            return bad(format!("lattice side {} outside [2, {MAX_LATTICE_SIDE}]", self.lattice_side));
        }
        if self.n_sites != self.lattice_side * self.lattice_side {
            return bad(format!("N = {} is not L^2 for L = {}", self.n_sites, self.lattice_side));
        }
        if self.eigenvalues.len() != self.n_sites - 1 {
            return bad(format!("expected {} eigenvalues, got {}", self.n_sites - 1, self.eigenvalues.len()));
        }
        if self.eigenvalues.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return bad("eigenvalues must be strictly positive".into());
        }
        if !(self.grid_min < 0.0 && 0.0 < self.grid_max) {
            return bad(format!("grid [{}, {}] must straddle 0", self.grid_min, self.grid_max));
        }
        if !(self.grid_step > 0.0) {
            return bad("grid step must be positive".into());
        }
        if self.grid_step > MAX_GRID_STEP {
            return bad(format!("grid step {} coarser than {MAX_GRID_STEP}", self.grid_step));
        }
        let cells = (self.grid_max - self.grid_min) / self.grid_step;
        if (cells - cells.round()).abs() > 1e-6 {
            return bad("grid range is not a whole number of steps".into());
        }
        if !(self.x_max > 0.0 && self.x_max.is_finite()) {
            return bad("x_max must be positive".into());
        }
        if !(self.quadrature_abs_tol > 0.0) {
            return bad("quadrature tolerance must be positive".into());
        }
        if !(8..=MAX_DEPTH).contains(&self.quadrature_max_depth) {
            return bad(format!("quadrature depth {} outside [8, {MAX_DEPTH}]", self.quadrature_max_depth));
        }
        Ok(())
    }

    pub fn grid_len(&self) -> usize {
        ((self.grid_max - self.grid_min) / self.grid_step).round() as usize + 1
    }

    pub fn grid_point(&self, i: usize) -> f64 {
        self.grid_min + i as f64 * self.grid_step
    }

    fn spectrum(&self) -> Spectrum {
        Spectrum::new(&self.eigenvalues, self.n_sites)
    }

    fn node_width(&self) -> f64 {
        self.x_max / (1u64 << self.quadrature_max_depth) as f64
    }
}

impl Default for BhpParams {
    fn default() -> Self {
        Self::new(DEFAULT_LATTICE_SIDE).expect("default lattice side is valid")
    }
}

/// Distinct `N * lambda` values with their multiplicities, plus the
/// standard-deviation scale `s`.
#[derive(Debug, Clone)]
struct Spectrum {
    modes: Vec<(f64, f64)>,
    scale: f64,
}

impl Spectrum {
    fn new(eigenvalues: &[f64], n_sites: usize) -> Self {
        let n = n_sites as f64;
        let mut sorted = eigenvalues.to_vec();
        sorted.sort_by(f64::total_cmp);
        // symmetric modes agree only up to rounding in cos
        let mut modes: Vec<(f64, f64)> = Vec::new();
        for lambda in sorted {
            match modes.last_mut() {
                Some((nl, mult)) if (lambda * n - *nl).abs() <= 1e-12 * *nl => *mult += 1.0,
                _ => modes.push((lambda * n, 1.0)),
            }
        }
        let sum_inv_sq: f64 = eigenvalues.iter().map(|l| 1.0 / (l * l)).sum();
        let scale = (sum_inv_sq / (2.0 * n * n)).sqrt();
        Self { modes, scale }
    }

    /// `(A(x), phi(x))`.
    fn amplitude_phase(&self, x: f64) -> (f64, f64) {
        let mut log_amp = 0.0;
        let mut phase = 0.0;
        for &(nl, mult) in &self.modes {
            let t = x / nl;
            log_amp -= 0.25 * mult * (t * t).ln_1p();
            phase += 0.5 * mult * (t.atan() - t);
        }
        (log_amp.exp(), phase)
    }

    fn decay_cutoff(&self, bound: f64) -> f64 {
        let amp = |x: f64| self.amplitude_phase(x).0;
        let mut hi = 1.0;
        while amp(hi) >= bound {
            hi *= 2.0;
        }
        let mut lo = hi / 2.0;
        while hi - lo > 1e-6 * hi {
            let mid = 0.5 * (lo + hi);
            if amp(mid) >= bound {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi.ceil()
    }
}

/// Finite end of the BHP support for these parameters (`+edge` in the
/// standard orientation, `-edge` mirrored). The density is exactly zero
/// beyond it; in practice it is below double-precision noise well before.
pub fn support_edge(params: &BhpParams) -> f64 {
    let n = params.n_sites as f64;
    let edge = params.eigenvalues.iter().map(|l| 1.0 / (2.0 * n * l)).sum::<f64>() / params.spectrum().scale;
    match params.orientation {
        Orientation::Standard => edge,
        Orientation::Mirrored => -edge,
    }
}

/// Integrand values keyed by quadrature node index. All nodes share the
/// `mu`-independent amplitude and phase, so tabulation precomputes them once.
struct NodeCache {
    amp_phase: Vec<(f64, f64)>,
}

impl NodeCache {
    fn new(spectrum: &Spectrum, node_width: f64, max_depth: u32) -> Self {
        let count = (1usize << max_depth) + 1;
        let amp_phase = (0..count).into_par_iter().map(|k| spectrum.amplitude_phase(k as f64 * node_width)).collect();
        Self { amp_phase }
    }
}

fn oriented(mu: f64, orientation: Orientation) -> f64 {
    match orientation {
        Orientation::Standard => mu,
        Orientation::Mirrored => -mu,
    }
}

fn integrate_raw<F>(mu: f64, params: &BhpParams, scale: f64, amp_phase: F) -> Result<f64>
where
    F: Fn(u64) -> (f64, f64),
{
    let node_width = params.node_width();
    let freq = oriented(mu, params.orientation) * scale;
    let q = adaptive_simpson_indexed(
        |k| {
            let (amp, phase) = amp_phase(k);
            amp * (k as f64 * node_width * freq + phase).cos()
        },
        node_width,
        // integral is multiplied by s / pi afterwards
        params.quadrature_abs_tol * PI / scale,
        params.quadrature_max_depth,
    );
    finish(mu, params, scale, q)
}

fn finish(mu: f64, params: &BhpParams, scale: f64, q: Quadrature) -> Result<f64> {
    let estimate = q.error_estimate * scale / PI;
    if estimate > params.quadrature_abs_tol {
        return Err(Error::Convergence { mu, estimate, tolerance: params.quadrature_abs_tol });
    }
    Ok(q.value * scale / PI)
}

/// Unnormalized density from a single adaptive quadrature. Tiny negative
/// values from cancellation in the far tails are returned as computed.
pub fn bhp_pdf_raw(mu: f64, params: &BhpParams) -> Result<f64> {
    params.validate()?;
    let spectrum = params.spectrum();
    let node_width = params.node_width();
    integrate_raw(mu, params, spectrum.scale, |k| spectrum.amplitude_phase(k as f64 * node_width))
}

/// Real and imaginary parts of the inversion integral over `[-x_max, x_max]`
/// without the Hermitian symmetrization. The imaginary part is a residual
/// diagnostic.
pub fn bhp_pdf_complex(mu: f64, params: &BhpParams) -> Result<(f64, f64)> {
    params.validate()?;
    let spectrum = params.spectrum();
    let scale = spectrum.scale;
    let freq = oriented(mu, params.orientation) * scale;
    let theta = |x: f64| {
        let (amp, phase) = spectrum.amplitude_phase(x.abs());
        (amp, x * freq + if x < 0.0 { -phase } else { phase })
    };
    let tol = params.quadrature_abs_tol * 2.0 * PI / scale;
    let depth = params.quadrature_max_depth + 1;
    let re = adaptive_simpson(
        |x| {
            let (a, t) = theta(x);
            a * t.cos()
        },
        -params.x_max,
        params.x_max,
        tol,
        depth,
    );
    let im = adaptive_simpson(
        |x| {
            let (a, t) = theta(x);
            a * t.sin()
        },
        -params.x_max,
        params.x_max,
        tol,
        depth,
    );
    let norm = scale / (2.0 * PI);
    if re.error_estimate * norm > params.quadrature_abs_tol {
        return Err(Error::Convergence {
            mu,
            estimate: re.error_estimate * norm,
            tolerance: params.quadrature_abs_tol,
        });
    }
    Ok((re.value * norm, im.value * norm))
}

/// Tabulated, normalized BHP density with its distribution function.
#[derive(Debug, Clone)]
pub struct BhpTable {
    params: BhpParams,
    pdf: MonotoneCubic,
    cdf: MonotoneCubic,
    normalization_factor: f64,
}

/// Builds the table: per-node quadrature (in parallel on the current rayon
/// pool), normalization by the Simpson integral of the raw column, and a
/// cumulative Simpson distribution function.
pub fn build_table(params: &BhpParams) -> Result<BhpTable> {
    params.validate()?;
    let spectrum = params.spectrum();
    let n = params.grid_len();
    let raw: Vec<f64> = if params.quadrature_max_depth <= MAX_CACHED_DEPTH {
        let cache = NodeCache::new(&spectrum, params.node_width(), params.quadrature_max_depth);
        (0..n)
            .into_par_iter()
            .map(|i| integrate_raw(params.grid_point(i), params, spectrum.scale, |k| cache.amp_phase[k as usize]))
            .collect::<Result<_>>()?
    } else {
        let node_width = params.node_width();
        (0..n)
            .into_par_iter()
            .map(|i| {
                integrate_raw(params.grid_point(i), params, spectrum.scale, |k| {
                    spectrum.amplitude_phase(k as f64 * node_width)
                })
            })
            .collect::<Result<_>>()?
    };
    let raw: Vec<f64> = raw.into_iter().map(|v| v.max(0.0)).collect();

    let normalization_factor = *cumulative_simpson(&raw, params.grid_step).last().expect("grid has nodes");
    if !(normalization_factor > 0.0) {
        return Err(Error::InvalidParameter("density integrates to zero on the grid".into()));
    }
    let pdf: Vec<f64> = raw.iter().map(|v| v / normalization_factor).collect();
    let mut running = 0.0_f64;
    let cdf: Vec<f64> = cumulative_simpson(&pdf, params.grid_step)
        .into_iter()
        .map(|c| {
            // tail panels can come out slightly negative
            running = running.max(c.clamp(0.0, 1.0));
            running
        })
        .collect();
    BhpTable::from_columns(params.clone(), pdf, cdf, normalization_factor)
}

/// Running integral at every node. Paired intervals use the two halves of
/// Simpson's rule, so every even node carries the composite Simpson value.
fn cumulative_simpson(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            out[1] = 0.5 * h * (f[0] + f[1]);
        }
        return out;
    }
    let mut acc = 0.0;
    for i in 0..n - 1 {
        let forward = i % 2 == 0 && i + 2 < n;
        let piece = if forward {
            h / 12.0 * (5.0 * f[i] + 8.0 * f[i + 1] - f[i + 2])
        } else {
            h / 12.0 * (-f[i - 1] + 8.0 * f[i] + 5.0 * f[i + 1])
        };
        acc += piece;
        out[i + 1] = acc;
    }
    out
}

impl BhpTable {
    /// Assembles a table from stored columns, checking the grid invariants.
    pub fn from_columns(params: BhpParams, pdf: Vec<f64>, cdf: Vec<f64>, normalization_factor: f64) -> Result<Self> {
        params.validate()?;
        let n = params.grid_len();
        if pdf.len() != n || cdf.len() != n {
            return Err(Error::Cache(format!("expected {n} rows, got pdf {} / cdf {}", pdf.len(), cdf.len())));
        }
        if pdf.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::Cache("pdf column must be finite and nonnegative".into()));
        }
        if cdf.windows(2).any(|w| w[1] < w[0]) || cdf.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(Error::Cache("cdf column must be non-decreasing within [0, 1]".into()));
        }
        let pdf = MonotoneCubic::new(params.grid_min, params.grid_step, pdf);
        let cdf = MonotoneCubic::new(params.grid_min, params.grid_step, cdf);
        Ok(Self { params, pdf, cdf, normalization_factor })
    }

    pub fn params(&self) -> &BhpParams {
        &self.params
    }

    pub fn normalization_factor(&self) -> f64 {
        self.normalization_factor
    }

    pub fn len(&self) -> usize {
        self.pdf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pdf.is_empty()
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|i| self.pdf.node(i))
    }

    pub fn pdf_column(&self) -> &[f64] {
        self.pdf.values()
    }

    pub fn cdf_column(&self) -> &[f64] {
        self.cdf.values()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.pdf.eval(x).map_or(0.0, |v| v.max(0.0))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.cdf.eval(x) {
            Some(v) => v.clamp(0.0, 1.0),
            None if x < self.pdf.x_min() => 0.0,
            None if x.is_nan() => f64::NAN,
            None => 1.0,
        }
    }

    /// `sum_i mu_i^k pdf_i h` about the origin.
    pub fn raw_moment(&self, k: i32) -> f64 {
        self.grid().zip(self.pdf_column()).map(|(mu, p)| mu.powi(k) * p).sum::<f64>() * self.params.grid_step
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        (self.raw_moment(2) - m * m).sqrt()
    }

    pub fn central_moment(&self, k: i32) -> f64 {
        let m = self.mean();
        self.grid().zip(self.pdf_column()).map(|(mu, p)| (mu - m).powi(k) * p).sum::<f64>() * self.params.grid_step
    }

    /// BHP distribution conditioned on `[lower, upper]`.
    pub fn truncate(&self, lower: f64, upper: f64) -> Result<TruncatedBhp<'_>> {
        if !(lower < upper) {
            return Err(Error::InvalidParameter(format!("truncation bounds [{lower}, {upper}] are not ordered")));
        }
        let cdf_lower = self.cdf(lower);
        let mass = self.cdf(upper) - cdf_lower;
        if !(mass > 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "truncation interval [{lower}, {upper}] carries no BHP mass ({mass:e})"
            )));
        }
        Ok(TruncatedBhp { table: self, lower, upper, cdf_lower, mass })
    }

    pub fn full_range(&self) -> TruncatedBhp<'_> {
        self.truncate(self.params.grid_min, self.params.grid_max).expect("full grid carries all mass")
    }
}

/// BHP distribution restricted to `[lower, upper]` and renormalized:
/// `(F(x) - F(lower)) / (F(upper) - F(lower))`.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedBhp<'a> {
    table: &'a BhpTable,
    lower: f64,
    upper: f64,
    cdf_lower: f64,
    mass: f64,
}

impl<'a> TruncatedBhp<'a> {
    pub fn table(&self) -> &'a BhpTable {
        self.table
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower {
            0.0
        } else if x >= self.upper {
            1.0
        } else {
            ((self.table.cdf(x) - self.cdf_lower) / self.mass).clamp(0.0, 1.0)
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.lower || x > self.upper {
            0.0
        } else {
            self.table.pdf(x) / self.mass
        }
    }

    /// One inverse-CDF draw.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let target = self.cdf_lower + u * self.mass;
        self.table.cdf.inverse(target).clamp(self.lower, self.upper)
    }

    /// `count` inverse-CDF draws from a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.draw(&mut rng)).collect()
    }
}
