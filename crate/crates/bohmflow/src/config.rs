//! Strict key/value experiment configuration.
//!
//! Each experiment declares the keys it accepts together with their defaults;
//! any other key is rejected. Files use `key = value` lines with `#` comments,
//! and list values are separated by spaces or commas.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use bohmflow_core::flow::IntegratorSettings;
use bohmflow_core::linalg::Vec3;
use sha2::{Digest, Sha256};

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    NodalTrajectory,
    NodalKinematics,
    ComplexPortrait,
    HopfTransition,
    TrajectoryVsNode,
    TrajectoryFamilies,
    Scattering,
    Foliation,
    PerturbedDiffusion,
    PowerLaw,
}

impl Experiment {
    pub const ALL: [Experiment; 10] = [
        Experiment::NodalTrajectory,
        Experiment::NodalKinematics,
        Experiment::ComplexPortrait,
        Experiment::HopfTransition,
        Experiment::TrajectoryVsNode,
        Experiment::TrajectoryFamilies,
        Experiment::Scattering,
        Experiment::Foliation,
        Experiment::PerturbedDiffusion,
        Experiment::PowerLaw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::NodalTrajectory => "nodal-trajectory",
            Experiment::NodalKinematics => "nodal-kinematics",
            Experiment::ComplexPortrait => "complex-portrait",
            Experiment::HopfTransition => "hopf-transition",
            Experiment::TrajectoryVsNode => "trajectory-vs-node",
            Experiment::TrajectoryFamilies => "trajectory-families",
            Experiment::Scattering => "scattering",
            Experiment::Foliation => "foliation",
            Experiment::PerturbedDiffusion => "perturbed-diffusion",
            Experiment::PowerLaw => "power-law",
        }
    }

    /// What the experiment computes.
    pub fn description(self) -> &'static str {
        match self {
            Experiment::NodalTrajectory => "path of the nodal point on the sphere R = 4.23, t in [1, 250]",
            Experiment::NodalKinematics => "speed and acceleration of the nodal point, spike near t = 8.5",
            Experiment::ComplexPortrait => "nodal point / X-point complex and its asymptotic curves at t = 4",
            Experiment::HopfTransition => "stable-to-unstable change of the complex at x3' = 5 near t = 9.5586",
            Experiment::TrajectoryVsNode => "trajectory started next to the nodal point, and an ordered trajectory",
            Experiment::TrajectoryFamilies => "trajectory families by sphere radius and by offset from the node",
            Experiment::Scattering => "stretching numbers, LCN and the scattering event near t = 2",
            Experiment::Foliation => "layered nodal point / X-point structure around the nodal line at t = 4",
            Experiment::PerturbedDiffusion => "perturbed-state trajectory, R(t) and stretching numbers (a4 = 0.05)",
            Experiment::PowerLaw => "maximum radial jump versus a4 with a log-log power-law fit",
        }
    }

    pub fn from_name(name: &str) -> Result<Self, RunError> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == name)
            .ok_or_else(|| RunError::UnknownExperiment(name.to_string()))
    }

    /// Accepted keys with their default values.
    pub fn schema(self) -> Vec<(&'static str, &'static str)> {
        let mut keys: Vec<(&str, &str)> = match self {
            Experiment::NodalTrajectory => vec![("radius", "4.23"), ("t_start", "1"), ("t_end", "250"), ("dt", "0.01")],
            Experiment::NodalKinematics => vec![
                ("radius", "4.23"),
                ("t_start", "1"),
                ("t_end", "10"),
                ("dt", "0.001"),
                ("spike_start", "8"),
                ("spike_end", "9"),
            ],
            Experiment::ComplexPortrait => {
                let mut k = vec![("t", "4"), ("radius", "4.23"), ("field_points", "41")];
                k.extend(MANIFOLD_KEYS);
                k
            }
            Experiment::HopfTransition => {
                let mut k = vec![
                    ("radius", "5"),
                    ("t_start", "9.4"),
                    ("t_end", "9.7"),
                    ("dt", "0.02"),
                    ("tolerance", "1e-4"),
                    ("portrait_times", "9.52 9.6"),
                ];
                k.extend(MANIFOLD_KEYS);
                k
            }
            Experiment::TrajectoryVsNode => {
                let mut k = vec![
                    ("state", "base"),
                    ("radius", "4.23"),
                    ("t_start", "1"),
                    ("t_end", "100"),
                    ("offset", "0.1"),
                    ("offset_sign", "1"),
                    ("sample_interval", "0.01"),
                    ("ordered_x0", "1.341 2.868 0.231"),
                    ("ordered_dx0", "0 0 1"),
                    ("tau", "0.01"),
                    ("fit_start", "10"),
                    ("fit_end", "100"),
                ];
                k.extend(DETECTOR_KEYS);
                k.extend(INTEGRATOR_KEYS);
                k
            }
            Experiment::TrajectoryFamilies => {
                let mut k = vec![
                    ("state", "base"),
                    ("radii", "0.2 1.2 2.2 3.2 4.2"),
                    ("offset", "0.1"),
                    ("offset_sign", "1"),
                    ("family_radius", "4.23"),
                    ("offsets", "0.1 0.25 0.3"),
                    ("t_start", "1"),
                    ("t_end", "10"),
                    ("sample_interval", "0.01"),
                ];
                k.extend(INTEGRATOR_KEYS);
                k
            }
            Experiment::Scattering => {
                let mut k = vec![
                    ("state", "base"),
                    ("x0", "-1.5 2 -2"),
                    ("dx0", "0 0 1"),
                    ("t_start", "0"),
                    ("t_end", "100"),
                    ("tau", "0.01"),
                    ("event_window_end", "10"),
                ];
                k.extend(DETECTOR_KEYS);
                k.extend(INTEGRATOR_KEYS);
                k
            }
            Experiment::Foliation => {
                let mut k = vec![
                    ("t", "4"),
                    ("r_grid", "1 1.25 1.5 1.75 2 2.25 2.5 2.75 3 3.25 3.5 3.75 4 4.25 4.5 4.75 5"),
                    ("manifolds", "false"),
                ];
                k.extend(MANIFOLD_KEYS);
                k
            }
            Experiment::PerturbedDiffusion => {
                let mut k = vec![
                    ("a4", "0.05"),
                    ("x0", "2.2194 -0.4062 2.3109"),
                    ("dx0", "0 0 1"),
                    ("t_start", "4"),
                    ("t_end", "100"),
                    ("tau", "0.01"),
                    ("structure_t", "4"),
                    ("r_grid", "1 1.5 2 2.5 3 3.5 4 4.5 5"),
                ];
                k.extend(INTEGRATOR_KEYS);
                k
            }
            Experiment::PowerLaw => {
                let mut k = vec![
                    ("a4_grid", "0.025 0.05 0.1 0.15 0.2"),
                    ("x0", "2.2194 -0.4062 2.3109"),
                    ("t_start", "4"),
                    ("t_end", "100"),
                    ("sample_interval", "0.01"),
                ];
                k.extend(INTEGRATOR_KEYS);
                k
            }
        };
        keys.sort_by_key(|(k, _)| *k);
        keys
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const INTEGRATOR_KEYS: [(&str, &str); 8] = [
    ("rel_tol", "1e-10"),
    ("abs_tol", "1e-10"),
    ("max_step", "0.1"),
    ("min_step", "1e-14"),
    ("node_guard", "1e-12"),
    ("renorm_threshold", "1e8"),
    ("step_factor", "0.1"),
    ("max_steps", "50000000"),
];

const DETECTOR_KEYS: [(&str, &str); 4] = [
    ("window", "1"),
    ("jump_factor", "10"),
    ("guard_fraction", "0.5"),
    ("floor_rate", "0.3"),
];

const MANIFOLD_KEYS: [(&str, &str); 5] = [
    ("seed", "1e-5"),
    ("box_factor", "2"),
    ("arc_factor", "40"),
    ("max_turns", "40"),
    ("node_fraction", "1e-4"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    entries: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            entries: BTreeMap::new(),
        }
    }

    /// Parses a config file for `experiment`. A leading `experiment = name`
    /// line is allowed but must agree.
    pub fn parse(experiment: Experiment, text: &str) -> Result<Self, RunError> {
        let mut cfg = Self::new(experiment);
        for (i, raw) in text.lines().enumerate() {
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| RunError::ConfigSyntax {
                line: i + 1,
                message: "expected `key = value`".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "experiment" {
                if value != experiment.name() {
                    return Err(RunError::InvalidValue {
                        key: key.into(),
                        value: value.into(),
                        reason: format!("config is for another experiment than `{experiment}`"),
                    });
                }
                continue;
            }
            if cfg.entries.contains_key(key) {
                return Err(RunError::ConfigSyntax {
                    line: i + 1,
                    message: format!("key `{key}` given twice"),
                });
            }
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn load(experiment: Experiment, path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(experiment, &text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), RunError> {
        if !self.experiment.schema().iter().any(|(k, _)| *k == key) {
            return Err(RunError::UnknownKey {
                experiment: self.experiment.name().into(),
                key: key.into(),
            });
        }
        self.entries.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), RunError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| RunError::InvalidValue {
            key: pair.into(),
            value: String::new(),
            reason: "overrides take the form key=value".into(),
        })?;
        self.set(k.trim(), v)
    }

    fn raw(&self, key: &str) -> &str {
        if let Some(v) = self.entries.get(key) {
            return v;
        }
        self.experiment
            .schema()
            .into_iter()
            .find(|(k, _)| *k == key)
            .map(|(_, d)| d)
            .unwrap_or_else(|| panic!("`{key}` is not in the schema of {}", self.experiment))
    }

    fn invalid(&self, key: &str, reason: &str) -> RunError {
        RunError::InvalidValue {
            key: key.into(),
            value: self.raw(key).into(),
            reason: reason.into(),
        }
    }

    pub fn string(&self, key: &str) -> String {
        self.raw(key).to_string()
    }

    pub fn f64(&self, key: &str) -> Result<f64, RunError> {
        self.raw(key)
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.invalid(key, "expected a finite number"))
    }

    pub fn positive(&self, key: &str) -> Result<f64, RunError> {
        let v = self.f64(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.invalid(key, "must be positive"))
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, RunError> {
        self.raw(key)
            .parse()
            .map_err(|_| self.invalid(key, "expected a non-negative integer"))
    }

    pub fn bool(&self, key: &str) -> Result<bool, RunError> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(self.invalid(key, "expected true or false")),
        }
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, RunError> {
        let items: Result<Vec<f64>, _> = self
            .raw(key)
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect();
        match items {
            Ok(v) if !v.is_empty() && v.iter().all(|x| x.is_finite()) => Ok(v),
            _ => Err(self.invalid(key, "expected a list of numbers")),
        }
    }

    pub fn vec3(&self, key: &str) -> Result<Vec3, RunError> {
        let v = self.list(key)?;
        if v.len() != 3 {
            return Err(self.invalid(key, "expected three numbers"));
        }
        Ok([v[0], v[1], v[2]])
    }

    /// `(t_start, t_end)` with `t_end >= t_start`.
    pub fn span(&self) -> Result<(f64, f64), RunError> {
        let (a, b) = (self.f64("t_start")?, self.f64("t_end")?);
        if b < a {
            return Err(self.invalid("t_end", "must not precede t_start"));
        }
        Ok((a, b))
    }

    pub fn integrator(&self) -> Result<IntegratorSettings, RunError> {
        let d = IntegratorSettings::default();
        let has = |k: &str| self.experiment.schema().iter().any(|(s, _)| *s == k);
        let get = |k: &str, fallback: f64| if has(k) { self.f64(k) } else { Ok(fallback) };
        let s = IntegratorSettings {
            rel_tol: get("rel_tol", d.rel_tol)?,
            abs_tol: get("abs_tol", d.abs_tol)?,
            max_step: get("max_step", d.max_step)?,
            min_step: get("min_step", d.min_step)?,
            node_guard: get("node_guard", d.node_guard)?,
            deviation_renorm_threshold: get("renorm_threshold", d.deviation_renorm_threshold)?,
            node_step_factor: get("step_factor", d.node_step_factor)?,
            sample_interval: if has("sample_interval") {
                self.positive("sample_interval")?
            } else {
                d.sample_interval
            },
            max_steps: if has("max_steps") { self.usize("max_steps")? } else { d.max_steps },
        };
        s.validate().map_err(|e| RunError::InvalidValue {
            key: "integrator".into(),
            value: String::new(),
            reason: e.to_string(),
        })?;
        Ok(s)
    }

    /// Every accepted key with its effective value, one `key = value` per line.
    pub fn canonical(&self) -> String {
        let mut out = format!("experiment = {}\n", self.experiment);
        for (k, _) in self.experiment.schema() {
            out.push_str(&format!("{k} = {}\n", self.raw(k)));
        }
        out
    }

    pub fn digest(&self) -> String {
        hex(&Sha256::digest(self.canonical().as_bytes()))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(Experiment::from_name(e.name()).unwrap(), e);
        }
        assert!(matches!(
            Experiment::from_name("frobnicate"),
            Err(RunError::UnknownExperiment(n)) if n == "frobnicate"
        ));
    }

    #[test]
    fn unknown_keys_rejected() {
        let e = ExperimentConfig::parse(Experiment::Scattering, "tau = 0.01\nbogus = 3\n").unwrap_err();
        assert!(matches!(e, RunError::UnknownKey { key, .. } if key == "bogus"));
        let mut c = ExperimentConfig::new(Experiment::NodalTrajectory);
        assert!(c.set("tau", "1").is_err());
    }

    #[test]
    fn defaults_and_overrides() {
        let mut c = ExperimentConfig::parse(Experiment::Scattering, "# scattering run\nt_end = 20 # shorter\n").unwrap();
        assert_eq!(c.f64("t_end").unwrap(), 20.0);
        assert_eq!(c.vec3("x0").unwrap(), [-1.5, 2.0, -2.0]);
        c.set_pair("x0=1,2,3").unwrap();
        assert_eq!(c.vec3("x0").unwrap(), [1.0, 2.0, 3.0]);
        assert_eq!(c.integrator().unwrap(), IntegratorSettings::default());
    }

    #[test]
    fn digest_depends_on_effective_values_only() {
        let a = ExperimentConfig::parse(Experiment::Scattering, "tau = 0.01\n").unwrap();
        let b = ExperimentConfig::new(Experiment::Scattering);
        assert_eq!(a.digest(), b.digest());
        let c = ExperimentConfig::parse(Experiment::Scattering, "tau = 0.02\n").unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn bad_values_reported() {
        let c = ExperimentConfig::parse(Experiment::Scattering, "x0 = 1 2\n").unwrap();
        assert!(matches!(c.vec3("x0"), Err(RunError::InvalidValue { .. })));
        let c = ExperimentConfig::parse(Experiment::Scattering, "t_end = -1\n").unwrap();
        assert!(c.span().is_err());
        assert!(ExperimentConfig::parse(Experiment::Scattering, "experiment = foliation\n").is_err());
    }
}
