//! File outputs: rate tables, run manifests and atomic writes.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_energy::{BackoffVector, Method, ThroughputVector};

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = name.to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_secs: f64,
    /// Total divided by the number of links.
    pub per_node_secs: f64,
    pub repeats: usize,
}

/// JSON form of a computed rate vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesReport {
    pub method: Method,
    pub k_max: Option<usize>,
    pub n: usize,
    pub phi: Vec<f64>,
    pub nu: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl RatesReport {
    pub fn new(phi: &ThroughputVector, nu: &BackoffVector, timing: Option<Timing>) -> Self {
        Self {
            method: nu.method,
            k_max: nu.k_max,
            n: nu.len(),
            phi: phi.as_slice().to_vec(),
            nu: nu.nu.clone(),
            warning: nu.warning.clone(),
            timing,
        }
    }

    pub fn backoff(&self) -> Result<BackoffVector> {
        let mut b = BackoffVector::new(self.nu.clone(), self.method, self.k_max)?;
        b.warning.clone_from(&self.warning);
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RateRow {
    node_id: usize,
    phi: f64,
    nu: f64,
    method: String,
    k_max: Option<usize>,
}

/// Rows `node_id,phi,nu,method,k_max` (empty `k_max` when not applicable).
pub fn write_rates_csv<W: io::Write>(w: W, reports: &[RatesReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in reports {
        for (i, (&phi, &nu)) in r.phi.iter().zip(&r.nu).enumerate() {
            out.serialize(RateRow {
                node_id: i,
                phi,
                nu,
                method: r.method.to_string(),
                k_max: r.k_max,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a rates CSV back; every row must carry the same method.
pub fn read_rates_csv<R: io::Read>(r: R) -> Result<RatesReport> {
    let mut rows: Vec<RateRow> = csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<_, _>>()?;
    rows.sort_by_key(|row| row.node_id);
    let first = rows
        .first()
        .ok_or_else(|| Error::InvalidArgument("rates file has no rows".into()))?;
    let method: Method = first.method.parse()?;
    let k_max = first.k_max;
    if rows.iter().any(|row| row.method != first.method) {
        return Err(Error::InvalidArgument("rates file mixes several methods".into()));
    }
    if rows.iter().enumerate().any(|(i, row)| row.node_id != i) {
        return Err(Error::InvalidArgument("rates file must list node ids 0..n-1 once".into()));
    }
    Ok(RatesReport {
        method,
        k_max,
        n: rows.len(),
        phi: rows.iter().map(|row| row.phi).collect(),
        nu: rows.iter().map(|row| row.nu).collect(),
        warning: None,
        timing: None,
    })
}

/// Loads rates from `.csv` or JSON by extension.
pub fn load_rates(path: impl AsRef<Path>) -> Result<RatesReport> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_rates_csv(fs::File::open(path)?)
    } else {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Enough to rerun a command: tool version, command line and every seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<serde_json::Value>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            seeds: Vec::new(),
            spec: None,
            outputs: Vec::new(),
        }
    }
}
