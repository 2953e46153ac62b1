//! Shape-preserving (Fritsch-Carlson / PCHIP) cubic interpolation on a
//! uniform grid.

#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x0: f64,
    step: f64,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// Panics if fewer than two values are given or `step` is not positive.
    pub fn new(x0: f64, step: f64, ys: Vec<f64>) -> Self {
        assert!(ys.len() >= 2, "need at least two nodes");
        assert!(step > 0.0, "step must be positive");
        let slopes = pchip_slopes(&ys, step);
        Self { x0, step, ys, slopes }
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.step
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.node(self.ys.len() - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.ys
    }

    /// Interpolated value, or `None` outside `[x_min, x_max]`.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let i = self.cell(x)?;
        if x == self.node(i + 1) {
            return Some(self.ys[i + 1]);
        }
        Some(self.eval_in_cell(i, (x - self.node(i)) / self.step))
    }

    /// Index `i` with `node(i) <= x < node(i + 1)`; the last cell is closed.
    fn cell(&self, x: f64) -> Option<usize> {
        if !(x >= self.x0 && x <= self.x_max()) {
            return None;
        }
        let last = self.ys.len() - 2;
        let mut i = (((x - self.x0) / self.step).floor() as usize).min(last);
        // floor of a rounded quotient can land one cell off
        if i < last && x >= self.node(i + 1) {
            i += 1;
        } else if i > 0 && x < self.node(i) {
            i -= 1;
        }
        Some(i)
    }

    fn eval_in_cell(&self, i: usize, t: f64) -> f64 {
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.step, self.slopes[i + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        y0 * h00 + m0 * h10 + y1 * h01 + m1 * h11
    }

    /// Smallest `x` with `eval(x) >= target` for non-decreasing data.
    ///
    /// Returns `x_min` below the first value and `x_max` above the last.
    pub fn inverse(&self, target: f64) -> f64 {
        let n = self.ys.len();
        if target <= self.ys[0] {
            return self.x0;
        }
        if target >= self.ys[n - 1] {
            return self.x_max();
        }
        // first node with ys[j] >= target; j >= 1 here
        let j = self.ys.partition_point(|&y| y < target);
        let i = j - 1;
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval_in_cell(i, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.node(i) + hi * self.step
    }
}

fn pchip_slopes(ys: &[f64], step: f64) -> Vec<f64> {
    let n = ys.len();
    let secants: Vec<f64> = ys.windows(2).map(|w| (w[1] - w[0]) / step).collect();
    let mut slopes = vec![0.0; n];
    slopes[0] = secants[0];
    slopes[n - 1] = secants[n - 2];
    for k in 1..n - 1 {
        let (d0, d1) = (secants[k - 1], secants[k]);
        slopes[k] = if d0 * d1 <= 0.0 {
            0.0
        } else {
            // harmonic mean, the uniform-spacing form of the Fritsch-Butland weights
            2.0 / (1.0 / d0 + 1.0 / d1)
        };
    }
    slopes
}
