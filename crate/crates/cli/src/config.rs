//! Sweep and cluster configuration: a TOML file, overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nlqnd::optimize::OptimizerOptions;
use nlqnd::protocols::{Case, Scheme};

use crate::table::Format;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Optimized ξ, E_N and ratio over scheme × η × T.
    #[default]
    Grid,
    /// GP efficiency threshold η_GP(T).
    Threshold,
    /// GP with finite offline gain G₁ and thermal mediator n̄.
    Offline,
}

/// Optimizer fields that a config may override.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerOverrides {
    pub starts: Option<usize>,
    pub max_doublings: Option<usize>,
    pub agreement: Option<f64>,
    pub diameter_tol: Option<f64>,
    pub max_iterations: Option<usize>,
}

impl OptimizerOverrides {
    pub fn apply(&self) -> OptimizerOptions {
        let mut o = OptimizerOptions::default();
        if let Some(v) = self.starts {
            o.starts = v;
        }
        if let Some(v) = self.max_doublings {
            o.max_doublings = v;
        }
        if let Some(v) = self.agreement {
            o.agreement = v;
        }
        if let Some(v) = self.diameter_tol {
            o.diameter_tol = v;
        }
        if let Some(v) = self.max_iterations {
            o.max_iterations = v;
        }
        o
    }
}

/// Everything a config file may hold. Every field is optional; the
/// resolved form is [`Resolved`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub kind: Option<SweepKind>,
    pub schemes: Option<Vec<Scheme>>,
    pub case: Option<Case>,
    pub g: Option<f64>,
    pub loss_db: Option<Vec<f64>>,
    pub transmissivity: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
    /// Cluster input squeezing values `S`.
    pub squeezing: Option<Vec<f64>>,
    /// Offline GP gains `G₁`.
    pub g1: Option<Vec<f64>>,
    pub nbar: Option<Vec<f64>>,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub optimizer: OptimizerOverrides,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Fields set in `flags` win over `self`.
    pub fn overridden_by(self, flags: FileConfig) -> FileConfig {
        FileConfig {
            kind: flags.kind.or(self.kind),
            schemes: flags.schemes.or(self.schemes),
            case: flags.case.or(self.case),
            g: flags.g.or(self.g),
            loss_db: flags.loss_db.or(self.loss_db),
            transmissivity: flags.transmissivity.or(self.transmissivity),
            eta: flags.eta.or(self.eta),
            squeezing: flags.squeezing.or(self.squeezing),
            g1: flags.g1.or(self.g1),
            nbar: flags.nbar.or(self.nbar),
            format: flags.format.or(self.format),
            output: flags.output.or(self.output),
            optimizer: OptimizerOverrides {
                starts: flags.optimizer.starts.or(self.optimizer.starts),
                max_doublings: flags.optimizer.max_doublings.or(self.optimizer.max_doublings),
                agreement: flags.optimizer.agreement.or(self.optimizer.agreement),
                diameter_tol: flags.optimizer.diameter_tol.or(self.optimizer.diameter_tol),
                max_iterations: flags.optimizer.max_iterations.or(self.optimizer.max_iterations),
            },
        }
    }

    pub fn resolve(self) -> Result<Resolved, CliError> {
        let transmissivity = match (&self.loss_db, &self.transmissivity) {
            (Some(_), Some(_)) => return usage("give either loss_db or transmissivity, not both"),
            (Some(db), None) => db.iter().map(|d| 10f64.powf(-d / 10.0)).collect(),
            (None, Some(t)) => t.clone(),
            (None, None) => return usage("a loss grid is required (loss_db or transmissivity)"),
        };
        nonempty("loss grid", &transmissivity)?;
        if let Some(t) = transmissivity.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return usage(format!("transmissivity {t} outside (0, 1]"));
        }
        let eta = self.eta.clone().unwrap_or_else(|| vec![1.0]);
        nonempty("eta", &eta)?;
        let g = self.g.unwrap_or(1.0);
        if !(g > 0.0 && g.is_finite()) {
            return usage(format!("g must be positive, got {g}"));
        }
        let schemes = self.schemes.clone().unwrap_or_else(|| Scheme::ALL.to_vec());
        if schemes.is_empty() {
            return usage("scheme list is empty");
        }
        Ok(Resolved {
            kind: self.kind.unwrap_or_default(),
            schemes,
            case: self.case.unwrap_or(Case::Ideal),
            g,
            transmissivity,
            eta,
            squeezing: self.squeezing.clone().unwrap_or_else(|| vec![1.0]),
            g1: self.g1.clone().unwrap_or_default(),
            nbar: self.nbar.clone().unwrap_or_else(|| vec![0.0]),
            format: self.format.unwrap_or_default(),
            output: self.output.clone(),
            optimizer: self.optimizer.apply(),
        })
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

fn nonempty(name: &str, v: &[f64]) -> Result<(), CliError> {
    if v.is_empty() {
        usage(format!("{name} grid is empty"))
    } else {
        Ok(())
    }
}

/// A complete configuration, echoed into JSON metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub kind: SweepKind,
    pub schemes: Vec<Scheme>,
    pub case: Case,
    pub g: f64,
    pub transmissivity: Vec<f64>,
    pub eta: Vec<f64>,
    pub squeezing: Vec<f64>,
    pub g1: Vec<f64>,
    pub nbar: Vec<f64>,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub optimizer: OptimizerOptions,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str(
            "g = 2.0\nloss_db = [0.0, 10.0]\neta = [0.9]\n[optimizer]\nstarts = 4\n",
        )
        .unwrap();
        let flags = FileConfig {
            g: Some(0.5),
            ..Default::default()
        };
        let r = file.overridden_by(flags).resolve().unwrap();
        assert_eq!(r.g, 0.5);
        assert_eq!(r.eta, vec![0.9]);
        assert_eq!(r.optimizer.starts, 4);
        assert!((r.transmissivity[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn grid_errors() {
        let both = FileConfig {
            loss_db: Some(vec![1.0]),
            transmissivity: Some(vec![0.5]),
            ..Default::default()
        };
        assert!(matches!(both.resolve(), Err(CliError::Usage(_))));
        assert!(matches!(FileConfig::default().resolve(), Err(CliError::Usage(_))));
        let empty = FileConfig {
            transmissivity: Some(vec![]),
            ..Default::default()
        };
        assert!(empty.resolve().is_err());
        assert!(toml::from_str::<FileConfig>("bogus = 1").is_err());
    }
}
