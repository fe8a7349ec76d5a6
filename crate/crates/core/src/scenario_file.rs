//! Flat `key = value` scenario files.
//!
//! ```text
//! # e00: the measured cluster
//! name = e00
//! eta = 8
//! n_new = 80
//! phi = 76
//! dop1 = 10
//! dop2 = 2
//! dop3 = 2
//! algorithm = gb
//! seed = 1
//! replications = 100
//! ```
//!
//! `preset = <name>` starts from a built-in scenario; later keys override it.
//! Step timings default to the measured values and can be overridden with
//! `mu<i>`, `sigma<i>`, `lo<i>`, `hi<i>`. Blank lines and `#` comments are
//! ignored. Unknown keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{Algorithm, Millis, Mode, Scenario, Violation};

#[derive(Debug, Error)]
pub enum ScenarioFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid scenario: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// A scenario plus run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub replications: usize,
    pub out_dir: Option<PathBuf>,
    pub overhead: Millis,
    /// Real milliseconds per simulated millisecond in scaled mode.
    pub time_scale: f64,
}

impl ScenarioFile {
    pub fn from_scenario(scenario: Scenario) -> Self {
        ScenarioFile {
            scenario,
            replications: 1,
            out_dir: None,
            overhead: 0,
            time_scale: crate::engine::realtime::DEFAULT_TIME_SCALE,
        }
    }

    /// Parse and validate.
    pub fn parse(text: &str) -> Result<Self, ScenarioFileError> {
        let mut file: Option<ScenarioFile> = None;
        let mut seen = [false; 3];
        let blank = || {
            ScenarioFile::from_scenario(Scenario::new(
                "scenario",
                0,
                0,
                0,
                [1, 1, 1],
                Algorithm::GenerationBased,
            ))
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ScenarioFileError::Syntax {
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            if key == "preset" {
                let s = Scenario::preset(value)
                    .ok_or_else(|| err(format!("unknown preset `{value}`")))?;
                file = Some(ScenarioFile::from_scenario(s));
                seen = [true; 3];
                continue;
            }
            let f = file.get_or_insert_with(blank);
            let s = &mut f.scenario;
            fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
                v.parse().map_err(|_| format!("bad value `{v}` for `{key}`"))
            }
            let step_key = |prefix: &str| -> Option<usize> {
                key.strip_prefix(prefix)
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|n| (1..=3).contains(n))
                    .map(|n| n - 1)
            };
            let r: Result<(), String> = (|| {
                match key {
                    "name" => s.name = value.to_owned(),
                    "eta" => {
                        s.eta = parse(key, value)?;
                        seen[0] = true;
                    }
                    "n_new" | "N" => {
                        s.n_new = parse(key, value)?;
                        seen[1] = true;
                    }
                    "phi" => {
                        s.phi = parse(key, value)?;
                        seen[2] = true;
                    }
                    "algorithm" => s.algorithm = value.parse()?,
                    "mode" => s.mode = value.parse()?,
                    "seed" => s.seed = parse(key, value)?,
                    "replications" | "reps" => f.replications = parse(key, value)?,
                    "out" => f.out_dir = Some(PathBuf::from(value)),
                    "overhead" => f.overhead = parse(key, value)?,
                    "time_scale" => f.time_scale = parse(key, value)?,
                    _ => {
                        if let Some(j) = step_key("dop") {
                            s.steps[j].dop = parse(key, value)?;
                        } else if let Some(j) = step_key("mu") {
                            s.steps[j].mu = parse(key, value)?;
                        } else if let Some(j) = step_key("sigma") {
                            s.steps[j].sigma = parse(key, value)?;
                        } else if let Some(j) = step_key("lo") {
                            s.steps[j].range_lo = parse(key, value)?;
                        } else if let Some(j) = step_key("hi") {
                            s.steps[j].range_hi = parse(key, value)?;
                        } else {
                            return Err(format!("unknown key `{key}`"));
                        }
                    }
                }
                Ok(())
            })();
            r.map_err(err)?;
        }
        let file = file.ok_or(ScenarioFileError::Missing("eta"))?;
        for (ok, name) in seen.iter().zip(["eta", "n_new", "phi"]) {
            if !ok {
                return Err(ScenarioFileError::Missing(name));
            }
        }
        if file.replications == 0 {
            return Err(ScenarioFileError::Syntax {
                line: 0,
                message: "replications must be at least 1".into(),
            });
        }
        file.scenario.validate().map_err(ScenarioFileError::Invalid)?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioFileError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Serialize in the same format; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let s = &self.scenario;
        let mut out = String::new();
        let algorithm = match s.algorithm {
            Algorithm::GenerationBased => "gb",
            Algorithm::SteadyState => "st",
        };
        let mode = match s.mode {
            Mode::VirtualTime => "virtual",
            Mode::ScaledRealTime => "scaled",
        };
        writeln!(out, "name = {}", s.name).unwrap();
        writeln!(out, "eta = {}", s.eta).unwrap();
        writeln!(out, "n_new = {}", s.n_new).unwrap();
        writeln!(out, "phi = {}", s.phi).unwrap();
        for (i, st) in s.steps.iter().enumerate() {
            writeln!(out, "dop{} = {}", i + 1, st.dop).unwrap();
        }
        for (i, st) in s.steps.iter().enumerate() {
            let n = i + 1;
            writeln!(out, "mu{n} = {}", st.mu).unwrap();
            writeln!(out, "sigma{n} = {}", st.sigma).unwrap();
            writeln!(out, "lo{n} = {}", st.range_lo).unwrap();
            writeln!(out, "hi{n} = {}", st.range_hi).unwrap();
        }
        writeln!(out, "algorithm = {algorithm}").unwrap();
        writeln!(out, "mode = {mode}").unwrap();
        writeln!(out, "seed = {}", s.seed).unwrap();
        writeln!(out, "replications = {}", self.replications).unwrap();
        if let Some(dir) = &self.out_dir {
            writeln!(out, "out = {}", dir.display()).unwrap();
        }
        writeln!(out, "overhead = {}", self.overhead).unwrap();
        writeln!(out, "time_scale = {}", self.time_scale).unwrap();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const E00: &str = "\
# measured cluster
name = e00
eta = 8
n_new = 80
phi = 76
dop1 = 10
dop2 = 2   # dominant step
dop3 = 2
algorithm = st
seed = 7
replications = 100
";

    #[test]
    fn parses_flat_file() {
        let f = ScenarioFile::parse(E00).unwrap();
        let mut want = Scenario::preset("e00").unwrap().with_algorithm(Algorithm::SteadyState);
        want.seed = 7;
        assert_eq!(f.scenario, want);
        assert_eq!(f.replications, 100);
        assert_eq!(f.overhead, 0);
    }

    #[test]
    fn preset_with_overrides() {
        let f = ScenarioFile::parse("preset = e14\nalgorithm = st\nsigma2 = 1000\n").unwrap();
        assert_eq!(f.scenario.phi, 128);
        assert_eq!(f.scenario.dops(), [10, 10, 2]);
        assert_eq!(f.scenario.steps[1].sigma, 1000.0);
    }

    #[test]
    fn round_trip() {
        let mut f = ScenarioFile::parse(E00).unwrap();
        f.out_dir = Some("runs/e00".into());
        f.scenario.steps[0].sigma = 1e-9;
        assert_eq!(ScenarioFile::parse(&f.to_text()).unwrap(), f);
    }

    #[test]
    fn eta_above_phi_fails_validation() {
        let e = ScenarioFile::parse("eta = 10\nn_new = 100\nphi = 5\n").unwrap_err();
        assert!(matches!(e, ScenarioFileError::Invalid(ref v) if v.contains(&Violation::EtaExceedsProcessors { eta: 10, phi: 5 })));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let e = ScenarioFile::parse("eta = 8\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, ScenarioFileError::Syntax { line: 2, .. }), "{e}");
        let e = ScenarioFile::parse("eta = 8\nphi 76\n").unwrap_err();
        assert!(matches!(e, ScenarioFileError::Syntax { line: 2, .. }));
        let e = ScenarioFile::parse("eta = eight\n").unwrap_err();
        assert!(matches!(e, ScenarioFileError::Syntax { line: 1, .. }));
        let e = ScenarioFile::parse("eta = 8\nphi = 9\n").unwrap_err();
        assert!(matches!(e, ScenarioFileError::Missing("n_new")));
    }
}
