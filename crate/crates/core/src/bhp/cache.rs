//! Tab-separated BHP table cache.
//!
//! ```text
//! # unifluct bhp table
//! # format_version<TAB>1
//! # lattice_side<TAB>10
//! # ...
//! mu<TAB>pdf<TAB>cdf        (17 significant digits)
//! ```

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{build_table, BhpParams, BhpTable, Orientation};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const CACHE_DIR_ENV: &str = "UNIFLUCT_CACHE_DIR";
const MAGIC: &str = "# unifluct bhp table";

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn header_fields(params: &BhpParams, normalization_factor: Option<f64>) -> Vec<(&'static str, String)> {
    let mut fields = vec![
        ("format_version", FORMAT_VERSION.to_string()),
        ("lattice_side", params.lattice_side.to_string()),
        ("n_sites", params.n_sites.to_string()),
        ("orientation", params.orientation.as_str().to_string()),
        ("x_max", fmt17(params.x_max)),
        ("grid_min", fmt17(params.grid_min)),
        ("grid_max", fmt17(params.grid_max)),
        ("grid_step", fmt17(params.grid_step)),
        ("quadrature_abs_tol", fmt17(params.quadrature_abs_tol)),
        ("quadrature_max_depth", params.quadrature_max_depth.to_string()),
    ];
    if let Some(f) = normalization_factor {
        fields.push(("normalization_factor", fmt17(f)));
    }
    fields
}

pub fn write_table<W: Write>(table: &BhpTable, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{MAGIC}")?;
    for (key, value) in header_fields(table.params(), Some(table.normalization_factor())) {
        writeln!(out, "# {key}\t{value}")?;
    }
    writeln!(out, "# columns\tmu\tpdf\tcdf")?;
    for ((mu, p), c) in table.grid().zip(table.pdf_column()).zip(table.cdf_column()) {
        writeln!(out, "{}\t{}\t{}", fmt17(mu), fmt17(*p), fmt17(*c))?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a cache file. `Ok(None)` means the header describes different
/// parameters than `expected`.
pub fn read_table<R: BufRead>(input: R, expected: &BhpParams) -> Result<Option<BhpTable>> {
    let mut lines = input.lines();
    let first = lines.next().transpose()?;
    if first.as_deref() != Some(MAGIC) {
        return Err(Error::Cache("missing table header".into()));
    }
    let mut header = Vec::new();
    let mut normalization_factor = None;
    let mut pdf = Vec::new();
    let mut cdf = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if let Some(rest) = line.strip_prefix("# ") {
            let (key, value) =
                rest.split_once('\t').ok_or_else(|| Error::Cache(format!("line {lineno}: malformed header")))?;
            match key {
                "columns" => {}
                "normalization_factor" => normalization_factor = Some(parse_f64(value, lineno)?),
                _ => header.push((key.to_string(), value.to_string())),
            }
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(_mu), Some(p), Some(c), None) = (cols.next(), cols.next(), cols.next(), cols.next()) else {
            return Err(Error::Cache(format!("line {lineno}: expected three columns")));
        };
        pdf.push(parse_f64(p, lineno)?);
        cdf.push(parse_f64(c, lineno)?);
    }

    let wanted: Vec<(String, String)> =
        header_fields(expected, None).into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    if header != wanted {
        return Ok(None);
    }
    let factor = normalization_factor.ok_or_else(|| Error::Cache("missing normalization_factor".into()))?;
    BhpTable::from_columns(expected.clone(), pdf, cdf, factor).map(Some)
}

fn parse_f64(s: &str, lineno: usize) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Cache(format!("line {lineno}: cannot parse {s:?} as a number")))
}

/// Default cache file for `params` under `$UNIFLUCT_CACHE_DIR`, falling
/// back to the system temp directory.
pub fn default_cache_path(params: &BhpParams) -> PathBuf {
    let dir =
        std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("unifluct"));
    let suffix = match params.orientation {
        Orientation::Standard => "",
        Orientation::Mirrored => "_mirrored",
    };
    dir.join(format!("bhp_L{}{suffix}.tsv", params.lattice_side))
}

/// Loads the table at `path` if its header matches `params`; otherwise builds
/// it and (re)writes the file. Returns the table and whether it was rebuilt.
pub fn load_or_build(params: &BhpParams, path: &Path) -> Result<(BhpTable, bool)> {
    if path.exists() {
        let file = fs::File::open(path)?;
        // unreadable or stale caches are rebuilt, not fatal
        if let Ok(Some(table)) = read_table(BufReader::new(file), params) {
            return Ok((table, false));
        }
    }
    let table = build_table(params)?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tsv.partial");
    write_table(&table, fs::File::create(&tmp)?)?;
    fs::rename(&tmp, path)?;
    Ok((table, true))
}
