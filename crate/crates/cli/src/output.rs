use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Seventeen significant digits, enough for any `f64` to round-trip.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Pretty JSON with every float at seventeen significant digits.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        if value.is_finite() {
            w.write_all(num(value).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("artifact serializes");
    buf.push(b'\n');
    buf
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    Above,
}

/// One pass/fail measurement. `value` is absent when not finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub criterion: Option<u8>,
    pub value: Option<f64>,
    pub relation: Relation,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, criterion: Option<u8>, value: f64, threshold: f64) -> Self {
        Self::new(name, criterion, value, Relation::AtMost, threshold)
    }

    pub fn above(name: &str, criterion: Option<u8>, value: f64, threshold: f64) -> Self {
        Self::new(name, criterion, value, Relation::Above, threshold)
    }

    /// A yes/no outcome recorded as 1 or 0.
    pub fn holds(name: &str, criterion: Option<u8>, ok: bool) -> Self {
        Self::new(name, criterion, if ok { 1.0 } else { 0.0 }, Relation::Above, 0.5)
    }

    fn new(name: &str, criterion: Option<u8>, value: f64, relation: Relation, threshold: f64) -> Self {
        let passed = match relation {
            Relation::AtMost => value <= threshold,
            Relation::Above => value > threshold,
        };
        Self {
            name: name.to_string(),
            criterion,
            value: value.is_finite().then_some(value),
            relation,
            threshold,
            passed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub bethe_tau: String,
    pub bethe_tau_cli: String,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            bethe_tau: bethe_tau::VERSION.to_string(),
            bethe_tau_cli: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Written by every command next to its artifacts. Wall-clock timings go
/// to a separate file so that this one is reproducible byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub versions: Versions,
    pub artifacts: Vec<ArtifactRecord>,
    pub checks: Vec<Check>,
}

impl Manifest {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn file_name(command: &str) -> String {
        format!("{command}.manifest.json")
    }
}

#[derive(Serialize)]
struct Timing<'a> {
    command: &'a str,
    seconds: f64,
}

pub struct Workspace {
    dir: PathBuf,
    csv: bool,
    written: Vec<ArtifactRecord>,
}

impl Workspace {
    pub fn new(dir: &Path, csv: bool) -> Self {
        Self {
            dir: dir.to_path_buf(),
            csv,
            written: Vec::new(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        let io = |source| CliError::Io {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(&self.dir).map_err(io)?;
        std::fs::write(&path, bytes).map_err(io)?;
        self.written.push(ArtifactRecord {
            file: name.to_string(),
            sha256: Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write_bytes(name, &to_json(value))
    }

    /// Skipped unless CSV output is enabled.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        if !self.csv {
            return Ok(());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Compute(format!("{name}: {e}"));
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Compute(format!("{name}: {e}")))?;
        self.write_bytes(name, &bytes)
    }

    /// Missing files are dependency errors naming `producer`.
    pub fn read_json<T: DeserializeOwned>(&self, name: &str, producer: &'static str) -> Result<T, CliError> {
        let path = self.path(name);
        let bytes = std::fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CliError::Dependency {
                artifact: path.display().to_string(),
                producer,
            },
            _ => CliError::Io {
                path: path.display().to_string(),
                source: e,
            },
        })?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Artifact {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn read_manifest(&self, command: &'static str) -> Result<Manifest, CliError> {
        self.read_json(&Manifest::file_name(command), command)
    }

    pub fn finish(
        mut self,
        command: &str,
        config_hash: String,
        checks: Vec<Check>,
        seconds: f64,
    ) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            command: command.to_string(),
            config_hash,
            versions: Versions::default(),
            artifacts: std::mem::take(&mut self.written),
            checks,
        };
        self.write_json(&Manifest::file_name(command), &manifest)?;
        self.write_json(&format!("{command}.timings.json"), &Timing { command, seconds })?;
        Ok(manifest)
    }
}
