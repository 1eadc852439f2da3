//! On-disk records shared by the subcommands and `report`.

use moncon::{CertKind, Certificate, LyapunovForm, NormKind, Status};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::run::RunDir;

pub const KINDS: [CertKind; 2] = [CertKind::SumL1, CertKind::MaxLinf];

pub fn cert_file(kind: CertKind) -> String {
    format!("cert_{}.json", kind.to_string().to_lowercase())
}

pub fn limit_file(kind: CertKind) -> String {
    format!("cert_{}_limit.json", kind.to_string().to_lowercase())
}

pub fn refinement_file(kind: CertKind) -> String {
    format!("refinement_{}.json", kind.to_string().to_lowercase())
}

#[derive(Clone, Debug)]
pub struct NamedCert {
    pub file: String,
    pub cert: Certificate,
}

impl NamedCert {
    /// `sum_l1`, `max_linf_limit`, ...
    pub fn label(&self) -> &str {
        self.file.trim_start_matches("cert_").trim_end_matches(".json")
    }
}

/// The two base certificates followed by any refinement limits.
#[derive(Clone, Debug)]
pub struct CertSet {
    pub entries: Vec<NamedCert>,
}

impl CertSet {
    pub fn base(&self, kind: CertKind) -> &NamedCert {
        self.entries.iter().find(|e| e.cert.kind == kind && !e.cert.limit_of_valid_sequence).expect("both base certificates present")
    }

    /// Reads a previous `certify` from the run directory, if there was one.
    pub fn load(dir: &RunDir) -> Result<Option<Self>> {
        let mut entries = Vec::new();
        for kind in KINDS {
            let file = cert_file(kind);
            let Some(text) = dir.read(&file)? else { return Ok(None) };
            entries.push(NamedCert { cert: parse_cert(&file, &text)?, file });
        }
        for kind in KINDS {
            let file = limit_file(kind);
            if let Some(text) = dir.read(&file)? {
                entries.push(NamedCert { cert: parse_cert(&file, &text)?, file });
            }
        }
        Ok(Some(Self { entries }))
    }

    /// Exit-code-2 condition: every requested weight search came back FAILED.
    pub fn all_failed(&self, norm: Option<NormKind>) -> bool {
        KINDS.iter().filter(|k| norm.is_none_or(|n| n == k.norm_kind())).all(|&k| self.base(k).cert.status == Status::Failed)
    }
}

fn parse_cert(file: &str, text: &str) -> Result<Certificate> {
    Certificate::from_json(text).map_err(|e| CliError::Config(format!("{file}: {e}")))
}

pub fn load_json<T: DeserializeOwned>(dir: &RunDir, file: &str) -> Result<Option<T>> {
    dir.read(file)?.map(|text| serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{file}: {e}")))).transpose()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefinementRecord {
    pub kind: CertKind,
    pub family: String,
    pub limit: Vec<f64>,
    pub epsilons: Vec<Vec<f64>>,
    #[serde(default)]
    pub sequence: Vec<Certificate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyapunovCheck {
    pub certificate: String,
    pub form: LyapunovForm,
    pub start: Vec<f64>,
    pub initial: f64,
    pub last: f64,
    pub max_upward_jump: f64,
    pub excursions: usize,
    pub passed: bool,
    /// `V(t) ≤ e^{ct} V(0)` with `c` the certificate's envelope rate.
    pub envelope_rate: f64,
    pub envelope_holds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LyapunovArtifact {
    pub horizon: f64,
    pub step: f64,
    pub checks: Vec<LyapunovCheck>,
    #[serde(default)]
    pub skipped: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SuiteResult {
    /// `monotonicity`, `pair_contraction` or `flow_decay`.
    pub suite: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    pub cases: usize,
    pub passed: usize,
    /// Largest order gap for monotonicity, largest envelope ratio otherwise.
    pub worst: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateArtifact {
    pub horizon: f64,
    pub step: f64,
    pub suites: Vec<SuiteResult>,
    pub trajectory_csv: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntrainRun {
    pub start: Vec<f64>,
    pub final_distance: f64,
    pub contraction_factor: f64,
    pub fixed_point: Vec<f64>,
    pub fixed_point_residual: f64,
    pub nonincreasing: bool,
    pub structure_holds: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EntrainArtifact {
    pub certificate: String,
    pub period: f64,
    pub periods: usize,
    pub runs: Vec<EntrainRun>,
    /// Largest distance between the fixed points found from different starts.
    pub fixed_point_spread: f64,
}
