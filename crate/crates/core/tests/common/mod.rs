#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unifluct::bhp::{load_or_build, BhpParams, BhpTable, Orientation};

/// Cache shared by all integration test binaries of this crate.
pub fn cache_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("unifluct-cache")
}

fn load(orientation: Orientation, file: &str) -> BhpTable {
    let params = BhpParams::default().with_orientation(orientation);
    load_or_build(&params, &cache_dir().join(file)).expect("default table").0
}

/// Default L = 10 table, built once and cached on disk.
pub fn table() -> &'static BhpTable {
    static TABLE: OnceLock<BhpTable> = OnceLock::new();
    TABLE.get_or_init(|| load(Orientation::Standard, "bhp_L10.tsv"))
}

pub fn mirrored_table() -> &'static BhpTable {
    static TABLE: OnceLock<BhpTable> = OnceLock::new();
    TABLE.get_or_init(|| load(Orientation::Mirrored, "bhp_L10_mirrored.tsv"))
}

/// `count` magnitudes `(sigma0 u + mu0)^(1 / alpha0)` with `u` drawn from the
/// table restricted to `u > -mu0 / sigma0`.
pub fn synthetic_magnitudes(table: &BhpTable, count: usize, mu0: f64, sigma0: f64, alpha0: f64, seed: u64) -> Vec<f64> {
    let cut = -mu0 / sigma0;
    let trunc = table.truncate(cut, table.params().grid_max).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let u = trunc.draw(&mut rng);
            if u > cut {
                break (sigma0 * u + mu0).powf(1.0 / alpha0);
            }
        })
        .collect()
}

/// Log-density on `[lo, hi]` in steps of `h`.
pub fn log_pdf_grid(table: &BhpTable, lo: f64, hi: f64, h: f64) -> Vec<(f64, f64)> {
    let n = ((hi - lo) / h).round() as usize;
    (0..=n)
        .map(|i| {
            let x = lo + i as f64 * h;
            (x, table.pdf(x).ln())
        })
        .collect()
}
