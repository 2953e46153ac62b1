//! Acceptance suite. Each criterion prints one PASS / FAIL / SKIPPED line
//! (with indented details); the process exits nonzero if any criterion fails.
//!
//! Criterion 4 needs the FTSE100 daily close series (April 1984 to September
//! 2009) as a `date,close` CSV named by `FTSE100_CSV`; it is skipped otherwise.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use unifluct::bhp::{build_table, BhpParams, BhpTable};
use unifluct::cli::{
    analyze_report, scan_report, simulate_csv, AnalyzeArgs, Cli, Command as Sub, ScanArgs, SimulateArgs,
};
use unifluct::ks::{kolmogorov_q, ks_pvalue, ks_statistic};
use unifluct::quadrature::adaptive_simpson;
use unifluct::returns::{compute_returns, partition, PriceSeries, Sign};

enum Verdict {
    Pass,
    Fail,
    Skipped,
}

/// Named sub-checks of one criterion.
#[derive(Default)]
struct Report {
    lines: Vec<String>,
    failed: bool,
}

impl Report {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        self.lines.push(format!("{} {what}", if ok { "ok  " } else { "FAIL" }));
        self.failed |= !ok;
    }

    fn note(&mut self, what: impl Into<String>) {
        self.lines.push(format!("     {}", what.into()));
    }

    fn verdict(&self) -> Verdict {
        if self.failed {
            Verdict::Fail
        } else {
            Verdict::Pass
        }
    }
}

fn parse_scan(extra: &[&str]) -> ScanArgs {
    let mut args = vec!["unifluct", "scan", "--input", "-"];
    args.extend_from_slice(extra);
    match Cli::parse_from(args).command {
        Sub::Scan(a) => a,
        _ => unreachable!(),
    }
}

fn parse_analyze(extra: &[&str]) -> AnalyzeArgs {
    let mut args = vec!["unifluct", "analyze", "--input", "-"];
    args.extend_from_slice(extra);
    match Cli::parse_from(args).command {
        Sub::Analyze(a) => a,
        _ => unreachable!(),
    }
}

fn parse_simulate(extra: &[&str]) -> SimulateArgs {
    let mut args = vec!["unifluct", "simulate"];
    args.extend_from_slice(extra);
    match Cli::parse_from(args).command {
        Sub::Simulate(a) => a,
        _ => unreachable!(),
    }
}

// 1 -------------------------------------------------------------------------

fn table_validity(r: &mut Report) -> Verdict {
    let params = BhpParams::default();
    r.check(
        params.lattice_side == 10 && params.n_sites == 100,
        format!("L = {}, N = {}", params.lattice_side, params.n_sites),
    );

    let start = Instant::now();
    let table = build_table(&params).expect("table build");
    let secs = start.elapsed().as_secs_f64();
    r.check(secs < 120.0, format!("fresh build at step 1e-3 took {secs:.1} s (< 120 s)"));

    let h = params.grid_step;
    let pdf = table.pdf_column();
    let trapezoid = h * (pdf.iter().sum::<f64>() - 0.5 * (pdf[0] + pdf[pdf.len() - 1]));
    r.check((trapezoid - 1.0).abs() < 1e-6, format!("trapezoidal integral {trapezoid:.10} (1 +- 1e-6)"));
    r.check(pdf.iter().all(|&p| p >= 0.0), "pdf >= 0 on the grid");
    let cdf = table.cdf_column();
    r.check(cdf.windows(2).all(|w| w[1] >= w[0]), "cdf non-decreasing");
    r.check(
        cdf[0] < 1e-6 && cdf[cdf.len() - 1] > 1.0 - 1e-6,
        format!("cdf(grid_min) = {:.2e}, 1 - cdf(grid_max) = {:.2e}", cdf[0], 1.0 - cdf[cdf.len() - 1]),
    );
    let factor = table.normalization_factor();
    r.check((factor - 1.0).abs() < 1e-2, format!("raw integral (normalization factor) {factor:.10}"));

    let (mean, sd, m3) = (table.mean(), table.std_dev(), table.central_moment(3));
    r.check(mean.abs() <= 1e-3, format!("mean {mean:.3e} (|.| <= 1e-3)"));
    r.check((sd - 1.0).abs() <= 2e-3, format!("sd {sd:.7} (1 +- 2e-3)"));
    r.check(m3 < 0.0, format!("third central moment {m3:.4} (< 0)"));

    let left = common::log_pdf_grid(&table, -6.0, -2.5, 0.25);
    let worst = left
        .windows(3)
        .map(|w| (w[1].0, (w[2].1 - 2.0 * w[1].1 + w[0].1).abs()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    r.check(
        worst.1 < 0.05,
        format!("left tail [-6, -2.5]: max |second difference of ln pdf| = {:.4} at {} (< 0.05)", worst.1, worst.0),
    );

    let right = common::log_pdf_grid(&table, 2.5, 7.0, 0.25);
    let slopes: Vec<(f64, f64)> = right.windows(2).map(|w| (w[0].0, w[1].1 - w[0].1)).collect();
    let first_bad = slopes
        .iter()
        .enumerate()
        .find(|&(i, &(_, s))| s.is_nan() || s >= 0.0 || (i > 0 && s >= slopes[i - 1].1))
        .map(|(_, &(x, s))| (x, s));
    match first_bad {
        None => r.check(true, "right tail [2.5, 7]: ln pdf differences negative and strictly decreasing"),
        Some((x, s)) => {
            r.check(false, format!("right tail [2.5, 7]: ln pdf difference {s} at {x} breaks the pattern"));
            let edge = unifluct::bhp::support_edge(&params);
            r.note(format!(
                "the L = 10 density has a finite support edge at {edge:.5}; pdf(3.5) = {:.2e}, pdf(4.0) = {:.2e}, pdf(4.5) = {:.2e}",
                table.pdf(3.5),
                table.pdf(4.0),
                table.pdf(4.5)
            ));
        }
    }
    r.verdict()
}

// 2 -------------------------------------------------------------------------

fn q_bruteforce(lambda: f64) -> f64 {
    (1..=1000)
        .map(|k| {
            let k = k as f64;
            let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
            sign * 2.0 * (-2.0 * k * k * lambda * lambda).exp()
        })
        .sum()
}

fn sup_bruteforce(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sample.len() as f64;
    let mut d: f64 = 0.0;
    for &x in sample {
        let le = sample.iter().filter(|&&y| y <= x).count() as f64 / n;
        let lt = sample.iter().filter(|&&y| y < x).count() as f64 / n;
        let f = cdf(x);
        d = d.max((le - f).abs()).max((lt - f).abs());
    }
    d
}

fn ks_equivalence(r: &mut Report) -> Verdict {
    let mut worst_q: f64 = 0.0;
    for i in 0..=27 {
        let lambda = 0.3 + 0.1 * i as f64;
        for n in [10usize, 100, 3000] {
            let sn = (n as f64).sqrt();
            let d = lambda / (sn + 0.12 + 0.11 / sn);
            worst_q = worst_q.max((ks_pvalue(d, n) - q_bruteforce(lambda)).abs());
        }
        worst_q = worst_q.max((kolmogorov_q(lambda) - q_bruteforce(lambda)).abs());
    }
    r.check(worst_q < 1e-10, format!("P value vs 1000-term series on lambda in [0.3, 3.0]: max error {worst_q:.2e}"));

    let logistic = |x: f64| 1.0 / (1.0 + (-x).exp());
    let table = common::table();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_d: f64 = 0.0;
    for i in 0..100 {
        let n = rng.random_range(1..=50);
        let mut sample: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        if i % 4 == 0 {
            sample.iter_mut().for_each(|x| *x = (*x * 2.0).round() / 2.0); // ties
        }
        let (d, _) = ks_statistic(&sample, logistic).unwrap();
        worst_d = worst_d.max((d - sup_bruteforce(&sample, logistic)).abs());
        let (d, _) = ks_statistic(&sample, |x| table.cdf(x)).unwrap();
        worst_d = worst_d.max((d - sup_bruteforce(&sample, |x| table.cdf(x))).abs());
    }
    r.check(worst_d < 1e-12, format!("D vs O(n^2) brute-force supremum, 100 samples n <= 50: max error {worst_d:.2e}"));
    r.verdict()
}

// 3 -------------------------------------------------------------------------

fn recovery_counts(table: &BhpTable, runs: u64) -> (usize, usize, Vec<f64>) {
    let scan_args = parse_scan(&["--sign", "positive"]);
    let (mut recovered, mut high_p) = (0, 0);
    let mut stars = Vec::new();
    for seed in 0..runs {
        let sim = parse_simulate(&[
            "--seed",
            &seed.to_string(),
            "--count",
            "3000",
            "--alpha0",
            "0.55",
            "--mu0",
            "0.063",
            "--sigma0",
            "0.032",
            "--positive-fraction",
            "1",
        ]);
        let csv = simulate_csv(table, &sim).expect("simulate");
        let report = scan_report(csv.as_bytes(), table, &scan_args).expect("scan");
        let scan = report.positive.as_ref().unwrap().scan.as_ref().unwrap();
        recovered += usize::from((scan.alpha_star - 0.55).abs() <= 0.02);
        high_p += usize::from(scan.p_star > 0.10);
        stars.push(scan.alpha_star);
    }
    (recovered, high_p, stars)
}

fn synthetic_recovery(r: &mut Report) -> Verdict {
    let start = Instant::now();
    let (recovered, high_p, stars) = recovery_counts(common::table(), 100);
    let secs = start.elapsed().as_secs_f64();
    let mean = stars.iter().sum::<f64>() / stars.len() as f64;
    r.check(recovered >= 95, format!("alpha* within 0.55 +- 0.02 in {recovered}/100 runs (>= 95)"));
    r.check(high_p >= 90, format!("p* > 0.10 in {high_p}/100 runs (>= 90)"));
    r.check(secs < 300.0, format!("runtime {secs:.1} s (< 300 s)"));
    r.note(format!(
        "mean alpha* {mean:.4}, range [{:.4}, {:.4}]",
        stars.iter().copied().fold(f64::INFINITY, f64::min),
        stars.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    ));
    if r.failed {
        let (rec, hp, stars) = recovery_counts(common::mirrored_table(), 100);
        let mean = stars.iter().sum::<f64>() / stars.len() as f64;
        r.note(format!(
            "same runs with the mirrored density: alpha* recovered {rec}/100, p* > 0.10 {hp}/100, mean alpha* {mean:.4}"
        ));
        let cut = common::table().cdf(-0.063 / 0.032);
        r.note(format!(
            "mass of the standard density below -mu0/sigma0 = -1.969 removed by the positivity cut: {cut:.4}"
        ));
    }
    r.verdict()
}

// 4 -------------------------------------------------------------------------

fn close(r: &mut Report, what: &str, got: f64, want: f64, tol: f64) {
    r.check((got - want).abs() <= tol, format!("{what} = {got:.5} (target {want} +- {tol})"));
}

fn paper_regression(r: &mut Report) -> Verdict {
    let Some(path) = std::env::var_os("FTSE100_CSV") else {
        r.note("FTSE100_CSV not set; the FTSE100 1984-2009 daily close series is not bundled");
        return Verdict::Skipped;
    };
    let path = Path::new(&path);
    if !path.is_file() {
        r.note(format!("FTSE100_CSV points to {} which does not exist", path.display()));
        return Verdict::Skipped;
    }
    let input = std::fs::read(path).expect("read FTSE100_CSV");
    let table = common::table();

    let prices = PriceSeries::from_csv(&input[..]).expect("parse FTSE100 CSV");
    let parts = partition(&compute_returns(&prices).unwrap());
    r.check(parts.positives.len() == 3367, format!("n+ = {} (3367)", parts.positives.len()));
    r.check(parts.negatives.len() == 3074, format!("n- = {} (3074)", parts.negatives.len()));
    r.note(format!("{} price rows, {} zero returns", prices.len(), parts.zeros));

    for convention in ["stephens", "asymptotic"] {
        let fixed = analyze_report(&input, table, &parse_analyze(&["--alpha", "0.55", "--pvalue", convention]))
            .expect("analyze");
        let scanned = scan_report(&input, table, &parse_scan(&["--pvalue", convention])).expect("scan");
        let mut sub = Report::default();
        let targets = [
            (Sign::Positive, 0.032, -1.88, 6.68, 0.19, 30.87, 1.95),
            (Sign::Negative, 0.035, -1.74, 7.27, 0.14, 28.88, 1.82),
        ];
        for (sign, sigma, l, rr, p, b, c) in targets {
            let s = sign.as_str();
            let a = fixed.section(sign).unwrap();
            close(&mut sub, &format!("mu {s}"), a.stats.mu, 0.063, 0.001);
            close(&mut sub, &format!("sigma {s}"), a.stats.sigma, sigma, 0.001);
            close(&mut sub, &format!("L {s}"), a.stats.l_min, l, 0.01);
            close(&mut sub, &format!("R {s}"), a.stats.r_max, rr, 0.01);
            close(&mut sub, &format!("P {s} at 0.55"), a.ks.p_value, p, 0.05);
            close(&mut sub, &format!("coef_b {s}"), a.transformed.pdf.coef_b, b, 0.15);
            close(&mut sub, &format!("coef_c {s}"), a.transformed.pdf.coef_c, c, 0.02);
            let star = scanned.section(sign).unwrap().scan.as_ref().unwrap().alpha_star;
            close(&mut sub, &format!("alpha* {s}"), star, 0.55, 0.005);
        }
        r.note(format!("P-value convention {convention}:"));
        r.lines.extend(sub.lines.iter().map(|l| format!("  {l}")));
        if !sub.failed {
            return Verdict::Pass;
        }
    }
    r.failed = true;
    Verdict::Fail
}

// 5 -------------------------------------------------------------------------

fn transformed_normalization(r: &mut Report) -> Verdict {
    let table = common::table();
    let csv = simulate_csv(table, &parse_simulate(&["--seed", "2024", "--count", "6441"])).unwrap();
    let report = analyze_report(csv.as_bytes(), table, &parse_analyze(&["--alpha", "0.55"])).unwrap();
    let doc: Value = serde_json::from_str(&report.to_json()).unwrap();
    for sign in [Sign::Positive, Sign::Negative] {
        let s = sign.as_str();
        let tp = &report.section(sign).unwrap().transformed;
        let direct = adaptive_simpson(|x| tp.pdf.pdf(x), tp.pdf.support_lo, tp.pdf.support_hi, 1e-10, 30).value;
        r.check((direct - 1.0).abs() < 1e-4, format!("{s}: x-space integral of the transformed pdf {direct:.8}"));
        r.check((tp.integral - 1.0).abs() < 1e-4, format!("{s}: reported integral {:.8}", tp.integral));
        let t = &doc[s]["transformed"];
        let flagged = t["prefactor_discrepancy"] == Value::Bool(true);
        let mu = doc[s]["stats"]["mu"].as_f64().unwrap();
        let paper_a = t["paper_coef_a"].as_f64().unwrap();
        r.check(
            flagged && paper_a == 0.55 / mu,
            format!(
                "{s}: report flags discrepancy, paper_coef_a = alpha/mu = {paper_a:.4}, coef_a = {:.4}, paper_integral = {:.4}",
                t["coef_a"].as_f64().unwrap(),
                t["paper_integral"].as_f64().unwrap()
            ),
        );
    }
    // the published constants: 8.73 / 8.74 against both candidate prefactors
    for (s, sigma, l, rr, printed) in [("positive", 0.0324, -1.88, 6.68, 8.73), ("negative", 0.0346, -1.74, 7.27, 8.74)]
    {
        let mass = table.truncate(l, rr).unwrap().mass();
        let alpha_over_mu: f64 = 0.55 / 0.063;
        let formula = 0.55 / (sigma * mass);
        r.check(
            (alpha_over_mu - printed).abs() < 0.02 && (formula - printed).abs() > 1.0,
            format!(
                "{s}: printed {printed} matches alpha/mu = {alpha_over_mu:.3}, not alpha/(sigma dF) = {formula:.2}"
            ),
        );
    }
    r.verdict()
}

// 6 -------------------------------------------------------------------------

fn run_bin(args: &[&str], cache: &Path) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_unifluct"))
        .args(args)
        .env("UNIFLUCT_CACHE_DIR", cache)
        .output()
        .expect("spawn unifluct");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn determinism(r: &mut Report) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let caches: Vec<_> = ["w1", "w8", "w1b"].iter().map(|n| d.join(n)).collect();
    for (cache, workers) in caches.iter().zip(["1", "8", "1"]) {
        run_bin(&["bhp-table", "--workers", workers], cache);
    }
    let file = |c: &Path| std::fs::read(c.join("bhp_L10.tsv")).unwrap();
    let tables: Vec<_> = caches.iter().map(|c| file(c)).collect();
    r.check(tables[0] == tables[2], "cache file identical across two runs");
    r.check(tables[0] == tables[1], "cache file identical for 1 and 8 workers");

    let csv = d.join("sim.csv");
    let csv2 = d.join("sim2.csv");
    let csv_s = csv.to_str().unwrap();
    run_bin(&["simulate", "--seed", "77", "--output", csv_s], &caches[0]);
    run_bin(&["simulate", "--seed", "77", "--output", csv2.to_str().unwrap()], &caches[1]);
    r.check(std::fs::read(&csv).unwrap() == std::fs::read(&csv2).unwrap(), "simulated CSV identical across runs");

    for cmd in [&["scan"][..], &["analyze", "--alpha", "0.55"][..]] {
        let mut reports = Vec::new();
        for (cache, workers) in [(&caches[0], "1"), (&caches[1], "8"), (&caches[2], "1"), (&caches[0], "8")] {
            let mut args = cmd.to_vec();
            args.extend(["--input", csv_s, "--workers", workers]);
            reports.push(run_bin(&args, cache));
        }
        r.check(
            reports.windows(2).all(|w| w[0] == w[1]),
            format!("{} report identical across 4 runs (workers 1, 8)", cmd[0]),
        );
    }
    r.verdict()
}

fn main() {
    type Criterion = (u32, &'static str, fn(&mut Report) -> Verdict);
    let criteria: [Criterion; 6] = [
        (1, "BHP table validity", table_validity),
        (2, "KS engine equivalence", ks_equivalence),
        (3, "synthetic recovery", synthetic_recovery),
        (4, "FTSE100 regression", paper_regression),
        (5, "transformed-pdf normalization", transformed_normalization),
        (6, "determinism", determinism),
    ];
    let (mut pass, mut fail, mut skip) = (0, 0, 0);
    for (id, name, run) in criteria {
        let start = Instant::now();
        let mut report = Report::default();
        let verdict = match catch_unwind(AssertUnwindSafe(|| run(&mut report))) {
            Ok(v) => v,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                report.note(format!("panicked: {msg}"));
                Verdict::Fail
            }
        };
        let label = match verdict {
            Verdict::Pass => {
                pass += 1;
                "PASS"
            }
            Verdict::Fail => {
                fail += 1;
                "FAIL"
            }
            Verdict::Skipped => {
                skip += 1;
                "SKIPPED"
            }
        };
        println!("acceptance criterion {id} ({name}): {label} [{:.1} s]", start.elapsed().as_secs_f64());
        for line in &report.lines {
            println!("    {line}");
        }
    }
    println!("acceptance summary: {pass} passed, {fail} failed, {skip} skipped");
    if fail > 0 {
        std::process::exit(1);
    }
}
