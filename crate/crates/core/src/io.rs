//! Instance files and run reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{AuditReport, Ratio};
use crate::error::{Error, Result};
use crate::lottery::Lottery;
use crate::model::{Instance, Matrix};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

/// Parse JSON from `path`, reporting line and column on failure.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn save_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

pub fn load_instance(path: &Path) -> Result<Instance> {
    load_json(path)
}

pub fn save_instance(path: &Path, inst: &Instance) -> Result<()> {
    save_json(path, inst)
}

/// SHA-256 of the compact JSON form, in hex.
pub fn instance_hash(inst: &Instance) -> String {
    let bytes = serde_json::to_vec(inst).expect("instances serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub instance_hash: String,
    pub seed: u64,
    pub tol: f64,
    pub version: String,
    pub n_agents: usize,
    pub n_items: usize,
    /// Free-form notes, e.g. PA degeneracy flags.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

impl ReportMetadata {
    pub fn new(inst: &Instance, seed: u64, tol: f64) -> Self {
        ReportMetadata {
            instance_hash: instance_hash(inst),
            seed,
            tol,
            version: VERSION.to_string(),
            n_agents: inst.n_agents(),
            n_items: inst.n_items(),
            notes: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MechanismReport {
    pub mechanism: String,
    pub seed: u64,
    pub probs: Matrix,
    pub utilities: Vec<f64>,
    pub benchmark_utilities: Vec<f64>,
    pub ratios: Vec<Ratio>,
    pub metadata: ReportMetadata,
    /// Standard errors when utilities are Monte-Carlo means.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility_stderr: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lottery: Option<Lottery>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditReport>,
}

pub fn save_report(path: &Path, report: &MechanismReport) -> Result<()> {
    save_json(path, report)
}

pub fn load_report(path: &Path) -> Result<MechanismReport> {
    load_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.json");
        let inst = Instance::new(vec![vec![0.1 + 0.2, 1e-300], vec![std::f64::consts::PI, 0.0]]).unwrap();
        save_instance(&p, &inst).unwrap();
        assert_eq!(load_instance(&p).unwrap(), inst);
    }

    #[test]
    fn missing_values_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.json");
        fs::write(&p, "{\n  \"supplies\": [1]\n}").unwrap();
        match load_instance(&p) {
            Err(Error::Parse { line, message, .. }) => {
                assert!(line >= 1);
                assert!(message.contains("values"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(load_instance(&dir.path().join("none.json")), Err(Error::Io { .. })));
    }

    #[test]
    fn hash_is_stable() {
        let a = Instance::new(vec![vec![1.0]]).unwrap();
        assert_eq!(instance_hash(&a), instance_hash(&a.clone()));
        assert_eq!(instance_hash(&a).len(), 64);
    }
}
