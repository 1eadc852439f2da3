use std::fs;
use std::path::{Path, PathBuf};

use moncon::{Model, ModelSpec, NormKind};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::Opts;

/// Everything that determines a run's artifacts. The subcommand is left out so
/// that `certify`, `lyapunov` and `report` on the same inputs share a directory.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub samples: usize,
    pub seed: u64,
    pub margin: f64,
    pub step: f64,
    pub horizon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormKind>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(CliError::Config(format!("--{name} must be positive and finite, got {x}")))
            }
        };
        if self.samples == 0 {
            return Err(CliError::Config("--samples must be at least 1".into()));
        }
        positive("margin", self.margin)?;
        positive("step", self.step)?;
        positive("horizon", self.horizon)?;
        if self.step > self.horizon {
            return Err(CliError::Config(format!("--step {} exceeds --horizon {}", self.step, self.horizon)));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }
}

pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.file(name);
        fs::write(&path, contents).map_err(CliError::io(&path))?;
        Ok(path)
    }

    pub fn write_json<S: Serialize>(&self, name: &str, value: &S) -> Result<PathBuf> {
        let text = serde_json::to_string_pretty(value).expect("artifact serializes");
        self.write(name, &(text + "\n"))
    }

    pub fn read(&self, name: &str) -> Result<Option<String>> {
        let path = self.file(name);
        match fs::read_to_string(&path) {
            Ok(s) => Ok(Some(s)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(CliError::io(&path)(e)),
        }
    }
}

pub struct Context {
    pub config: RunConfig,
    pub model: Model,
    pub dir: RunDir,
}

impl Context {
    /// Parses and validates the inputs, then creates `out/<digest>/` with a copy
    /// of the resolved config.
    pub fn open(opts: &Opts) -> Result<Self> {
        let text = fs::read_to_string(&opts.model).map_err(CliError::io(&opts.model))?;
        let spec = ModelSpec::from_json(&text)?;
        let config =
            RunConfig { model: spec, samples: opts.samples, seed: opts.seed, margin: opts.margin, step: opts.step, horizon: opts.horizon, norm: opts.norm };
        config.validate()?;
        let model = config.model.build()?;
        let path = opts.out.join(config.digest());
        fs::create_dir_all(&path).map_err(CliError::io(&path))?;
        let dir = RunDir { path };
        dir.write_json("config.json", &config)?;
        // a stale error from an earlier command in this directory no longer applies
        let stale = dir.file("error.json");
        if stale.exists() {
            fs::remove_file(&stale).map_err(CliError::io(&stale))?;
        }
        Ok(Self { config, model, dir })
    }

    pub fn wants(&self, kind: NormKind) -> bool {
        self.config.norm.is_none_or(|k| k == kind)
    }
}
