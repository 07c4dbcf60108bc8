use std::path::{Path, PathBuf};

use bethe_tau::bethe::{SolveOptions, Strategy};
use bethe_tau::hirota::SamplerConfig;
use bethe_tau::master::Truncation;
use bethe_tau::spinchain::ChainSpec;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Environment variable overriding `output.directory`.
pub const OUT_ENV: &str = "BETHE_TAU_OUT";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub chain: ChainConfig,
    pub solver: SolverConfig,
    pub master: MasterConfig,
    pub rs: RsConfig,
    pub sampling: SamplingConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "J")]
    pub j: f64,
    /// Real inhomogeneities; empty means homogeneous.
    pub theta: Vec<f64>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            l: 4,
            j: 1.0,
            theta: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StrategyName {
    Seeds,
    Homotopy,
    Combined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub strategy: StrategyName,
    /// Continuation steps for the homotopy strategies.
    pub grid: usize,
    pub restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            strategy: StrategyName::Combined,
            grid: 40,
            restarts: d.restarts,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MasterConfig {
    /// Fixed truncation order; absent means adaptive.
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub delta_candidates: Vec<C64>,
    /// `|t_k|` bound for random times.
    pub t_radius: f64,
    /// Spectral point at `t_0 = 0`.
    pub u_base: f64,
}

impl Default for MasterConfig {
    fn default() -> Self {
        Self {
            k: None,
            delta_candidates: vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, 2.0)],
            t_radius: 0.05,
            u_base: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RsConfig {
    pub h: f64,
    pub t1_range: [f64; 2],
    pub eta_candidates: Vec<C64>,
    /// Step of the finite-difference velocities.
    pub fd_step: f64,
}

impl Default for RsConfig {
    fn default() -> Self {
        Self {
            h: 5e-4,
            t1_range: [-0.005, 0.005],
            eta_candidates: bethe_tau::rsflow::ETA_CANDIDATES.to_vec(),
            fd_step: bethe_tau::rsflow::FD_VELOCITY_STEP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub count: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { count: 200, seed: 7 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("bethe-tau-out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

fn invalid(path: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Recursively overwrite `base` with the entries of `over`.
pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl RunConfig {
    /// Flag values, then the config file on top, then the output directory
    /// from the environment.
    pub fn resolve(flags: Value, file: Option<&Path>, env_out: Option<String>) -> Result<Self, CliError> {
        let mut value = serde_json::to_value(RunConfig::default()).expect("default config serializes");
        merge(&mut value, flags);
        if let Some(path) = file {
            let text =
                std::fs::read_to_string(path).map_err(|e| invalid("--config", format!("{}: {e}", path.display())))?;
            let over: Value =
                serde_json::from_str(&text).map_err(|e| invalid("--config", format!("{}: {e}", path.display())))?;
            merge(&mut value, over);
        }
        let mut cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            invalid(&path, e.into_inner().to_string())
        })?;
        if let Some(dir) = env_out.filter(|s| !s.is_empty()) {
            cfg.output.directory = PathBuf::from(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let c = &self.chain;
        if !(2..=12).contains(&c.l) {
            return Err(invalid("chain.L", format!("{} not in 2..=12", c.l)));
        }
        if !c.j.is_finite() || c.j == 0.0 {
            return Err(invalid("chain.J", "must be finite and nonzero"));
        }
        if !c.theta.is_empty() && c.theta.len() != c.l {
            return Err(invalid(
                "chain.theta",
                format!("{} values for L = {}", c.theta.len(), c.l),
            ));
        }
        if let Some(k) = c.theta.iter().position(|x| !x.is_finite()) {
            return Err(invalid(&format!("chain.theta[{k}]"), "not finite"));
        }
        let s = &self.solver;
        if !(s.tol > 0.0 && s.tol < 1.0) {
            return Err(invalid("solver.tol", "must lie in (0, 1)"));
        }
        if s.max_iter == 0 {
            return Err(invalid("solver.max_iter", "must be positive"));
        }
        if s.grid == 0 {
            return Err(invalid("solver.grid", "must be positive"));
        }
        let m = &self.master;
        if m.delta_candidates.is_empty() {
            return Err(invalid("master.delta_candidates", "empty"));
        }
        if !(m.t_radius > 0.0 && m.t_radius.is_finite()) {
            return Err(invalid("master.t_radius", "must be positive"));
        }
        if !m.u_base.is_finite() {
            return Err(invalid("master.u_base", "not finite"));
        }
        let r = &self.rs;
        if !(r.h > 0.0 && r.h.is_finite()) {
            return Err(invalid("rs.h", "must be positive"));
        }
        let [a, b] = r.t1_range;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(invalid("rs.t1_range", "needs start < end"));
        }
        let steps = (b - a) / r.h;
        if (steps - steps.round()).abs() > 1e-6 || steps.round() < 8.0 {
            return Err(invalid(
                "rs.t1_range",
                format!("must span a whole number (>= 8) of steps rs.h, got {steps}"),
            ));
        }
        if r.eta_candidates.is_empty() {
            return Err(invalid("rs.eta_candidates", "empty"));
        }
        if !(r.fd_step > 0.0 && r.fd_step.is_finite()) {
            return Err(invalid("rs.fd_step", "must be positive"));
        }
        if self.sampling.count == 0 {
            return Err(invalid("sampling.count", "must be positive"));
        }
        if !self.output.formats.contains(&Format::Json) {
            return Err(invalid(
                "output.formats",
                "must include json, the format read by downstream commands",
            ));
        }
        Ok(())
    }

    pub fn spec(&self) -> ChainSpec {
        if self.chain.theta.is_empty() {
            ChainSpec::homogeneous(self.chain.l, self.chain.j)
        } else {
            ChainSpec::inhomogeneous(
                self.chain.j,
                self.chain.theta.iter().map(|&x| C64::new(x, 0.0)).collect(),
            )
        }
    }

    /// Fails unless the inhomogeneities are pairwise distinct.
    pub fn require_distinct_theta(&self, command: &str) -> Result<(), CliError> {
        if self.chain.theta.is_empty() || self.spec().min_theta_separation() < 1e-6 {
            return Err(invalid(
                "chain.theta",
                format!("{command} needs pairwise distinct inhomogeneities"),
            ));
        }
        Ok(())
    }

    pub fn solve_options(&self) -> SolveOptions {
        let s = &self.solver;
        SolveOptions {
            strategy: match s.strategy {
                StrategyName::Seeds => Strategy::Seeds,
                StrategyName::Homotopy => Strategy::Homotopy { grid: s.grid },
                StrategyName::Combined => Strategy::Combined { grid: s.grid },
            },
            tol: s.tol,
            max_iter: s.max_iter,
            restarts: s.restarts,
            seed: self.sampling.seed,
            ..SolveOptions::default()
        }
    }

    pub fn truncation(&self) -> Truncation {
        self.master.k.map_or_else(Truncation::default, Truncation::Fixed)
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            n_samples: self.sampling.count,
            seed: self.sampling.seed,
            t_radius: self.master.t_radius,
            ..SamplerConfig::default()
        }
    }

    pub fn steps(&self) -> usize {
        ((self.rs.t1_range[1] - self.rs.t1_range[0]) / self.rs.h).round() as usize
    }

    pub fn wants_csv(&self) -> bool {
        self.output.formats.contains(&Format::Csv)
    }

    /// SHA-256 of the configuration without the output directory, so the
    /// same run in two places hashes alike.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.directory = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn file_overrides_flags_and_env_overrides_directory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"chain": {"L": 3}, "output": {"directory": "x"}}"#).unwrap();
        let flags = json!({"chain": {"L": 5, "J": 2.0}});
        let cfg = RunConfig::resolve(flags, Some(&path), Some("y".into())).unwrap();
        assert_eq!(cfg.chain.l, 3);
        assert_eq!(cfg.chain.j, 2.0);
        assert_eq!(cfg.output.directory, PathBuf::from("y"));
    }

    #[test]
    fn errors_carry_field_paths() {
        let err = RunConfig::resolve(json!({"rs": {"h": "big"}}), None, None).unwrap_err();
        assert!(err.to_string().contains("rs.h"), "{err}");
        let err = RunConfig::resolve(json!({"chain": {"L": 3, "theta": [0.1]}}), None, None).unwrap_err();
        assert!(err.to_string().contains("chain.theta"), "{err}");
        let err = RunConfig::resolve(json!({"master": {"bogus": 1}}), None, None).unwrap_err();
        assert!(err.to_string().contains("master"), "{err}");
    }

    #[test]
    fn hash_ignores_output_directory() {
        let mut a = RunConfig::default();
        let h = a.hash();
        a.output.directory = PathBuf::from("/elsewhere");
        assert_eq!(a.hash(), h);
        a.sampling.seed += 1;
        assert_ne!(a.hash(), h);
    }
}
