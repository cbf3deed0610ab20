//! JSON documents read and written by the command-line tool.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use delaycert::stability::Margins;
use delaycert::synthesis::{GainKind, GainResult};
use delaycert::{ControlledSystem, DelaySystem, EpsilonProfile, Mat, SlackMode, SolverSettings, StabilityCertificate};
use serde::{Deserialize, Serialize};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable naming a JSON file with default solver settings.
pub const SETTINGS_ENV: &str = "DELAYCERT_SOLVER_SETTINGS";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    n: usize,
    #[serde(rename = "A")]
    a: Mat,
    #[serde(rename = "Ad", default, skip_serializing_if = "Option::is_none")]
    a_d: Option<Mat>,
    #[serde(rename = "AD", default, skip_serializing_if = "Option::is_none")]
    a_dist: Option<Mat>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    b: Option<Mat>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    c: Option<Mat>,
    h: f64,
}

/// A system description: either the analysis form `{n, A, Ad, AD, h}` or
/// the controlled form `{n, A, B, C, h}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystem", into = "RawSystem")]
pub enum SystemFile {
    Analysis(DelaySystem),
    Controlled(ControlledSystem),
}

impl TryFrom<RawSystem> for SystemFile {
    type Error = anyhow::Error;

    fn try_from(raw: RawSystem) -> Result<Self> {
        if raw.a.rows() != raw.n {
            bail!("\"n\" is {} but \"A\" has {} rows", raw.n, raw.a.rows());
        }
        let sys = match (raw.a_d, raw.a_dist, raw.b, raw.c) {
            (Some(a_d), Some(a_dist), None, None) => SystemFile::Analysis(DelaySystem::new(raw.a, a_d, a_dist, raw.h)?),
            (None, None, Some(b), Some(c)) => SystemFile::Controlled(ControlledSystem::new(raw.a, b, c, raw.h)?),
            _ => bail!("a system needs either \"Ad\" and \"AD\" (analysis form) or \"B\" and \"C\" (controlled form)"),
        };
        Ok(sys)
    }
}

impl From<SystemFile> for RawSystem {
    fn from(s: SystemFile) -> Self {
        match s {
            SystemFile::Analysis(d) => RawSystem {
                n: d.n(),
                a: d.a,
                a_d: Some(d.a_d),
                a_dist: Some(d.a_dist),
                b: None,
                c: None,
                h: d.h,
            },
            SystemFile::Controlled(c) => RawSystem {
                n: c.n(),
                a: c.a,
                a_d: None,
                a_dist: None,
                b: Some(c.b),
                c: Some(c.c),
                h: c.h,
            },
        }
    }
}

impl SystemFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing system file {}", path.display()))
    }

    pub fn h(&self) -> f64 {
        match self {
            SystemFile::Analysis(s) => s.h,
            SystemFile::Controlled(s) => s.h,
        }
    }

    pub fn with_delay(&self, h: f64) -> Result<Self> {
        Ok(match self {
            SystemFile::Analysis(s) => SystemFile::Analysis(s.with_delay(h)?),
            SystemFile::Controlled(s) => SystemFile::Controlled(s.with_delay(h)?),
        })
    }

    pub fn analysis(&self) -> Result<&DelaySystem> {
        match self {
            SystemFile::Analysis(s) => Ok(s),
            SystemFile::Controlled(_) => bail!("expected an analysis-form system (A, Ad, AD), got a controlled one"),
        }
    }

    pub fn controlled(&self) -> Result<&ControlledSystem> {
        match self {
            SystemFile::Controlled(s) => Ok(s),
            SystemFile::Analysis(_) => bail!("expected a controlled-form system (A, B, C), got an analysis one"),
        }
    }
}

/// A stability certificate together with the system it certifies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub tool_version: String,
    pub system: SystemFile,
    pub mode: SlackMode,
    pub alpha: f64,
    pub h: f64,
    #[serde(rename = "P")]
    pub p: Mat,
    #[serde(rename = "S")]
    pub s: Mat,
    #[serde(rename = "R")]
    pub r: Mat,
    pub slack: Option<Mat>,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub margins: Margins,
}

impl CertificateFile {
    pub fn new(system: &DelaySystem, cert: &StabilityCertificate) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            system: SystemFile::Analysis(system.clone()),
            mode: cert.mode,
            alpha: cert.alpha,
            h: cert.h,
            p: cert.p.clone(),
            s: cert.s.clone(),
            r: cert.r.clone(),
            slack: cert.slack.clone(),
            beta1: cert.beta1,
            beta2: cert.beta2,
            gamma: cert.gamma,
            margins: cert.margins.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing certificate file {}", path.display()))
    }

    pub fn certificate(&self) -> StabilityCertificate {
        StabilityCertificate {
            mode: self.mode,
            alpha: self.alpha,
            h: self.h,
            p: self.p.clone(),
            s: self.s.clone(),
            r: self.r.clone(),
            slack: self.slack.clone(),
            beta1: self.beta1,
            beta2: self.beta2,
            gamma: self.gamma,
            margins: self.margins.clone(),
        }
    }

    /// Re-checks the stored matrices against the stored system.
    pub fn verify(&self) -> Result<bool> {
        Ok(self.certificate().verify(self.system.analysis()?, 0.0)?)
    }
}

/// A synthesized controller or observer gain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainFile {
    pub tool_version: String,
    pub kind: GainKind,
    pub system: SystemFile,
    pub profile: EpsilonProfile,
    pub alpha: f64,
    pub h: f64,
    pub gain: Mat,
    pub congruence: Mat,
    pub transformed_gain: Mat,
    pub condition_number: f64,
}

impl GainFile {
    pub fn new(system: &ControlledSystem, res: &GainResult) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            kind: res.kind,
            system: SystemFile::Controlled(system.clone()),
            profile: res.profile,
            alpha: res.alpha,
            h: res.h,
            gain: res.gain.clone(),
            congruence: res.congruence.clone(),
            transformed_gain: res.transformed_gain.clone(),
            condition_number: res.condition_number,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing gain file {}", path.display()))
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Solver settings from `path`, or the defaults.
pub fn load_settings(path: Option<&Path>) -> Result<SolverSettings> {
    match path {
        None => Ok(SolverSettings::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading solver settings {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing solver settings {}", p.display()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SYSTEM1: &str = r#"{"n": 2, "A": [[0.2, 0], [0.2, 0.1]], "Ad": [[0, 0], [0, 0]],
        "AD": [[-1, 0], [-1, -1]], "h": 1.0}"#;

    #[test]
    fn parses_both_forms() {
        let s = SystemFile::parse(SYSTEM1).unwrap();
        assert_eq!(s.analysis().unwrap().a_dist.row(1), &[-1.0, -1.0]);
        let c = SystemFile::parse(r#"{"n":1,"A":[[1]],"B":[[1]],"C":[[1]],"h":0.5}"#).unwrap();
        assert!(c.controlled().is_ok());
        assert!(c.analysis().is_err());
    }

    #[test]
    fn round_trips() {
        let s = SystemFile::parse(SYSTEM1).unwrap();
        let back = SystemFile::parse(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn rejects_bad_documents() {
        for bad in [
            r#"{"n":1,"A":[[1]],"Ad":[[0]],"AD":[[0]],"h":1,"extra":0}"#,
            r#"{"n":1,"A":[[1]],"Ad":[[0]],"h":1}"#,
            r#"{"n":1,"A":[[1]],"Ad":[[0]],"AD":[[0]],"B":[[1]],"C":[[1]],"h":1}"#,
            r#"{"n":2,"A":[[1]],"Ad":[[0]],"AD":[[0]],"h":1}"#,
            r#"{"n":1,"A":[[1]],"Ad":[[0]],"AD":[[0]],"h":-1}"#,
            r#"{"n":1,"A":[[1]],"Ad":[[0]],"AD":[[0, 1]],"h":1}"#,
            "{",
        ] {
            assert!(SystemFile::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
