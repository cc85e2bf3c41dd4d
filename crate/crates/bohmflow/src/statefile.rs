//! Plain-text state specification.
//!
//! ```text
//! # comment
//! mass  = 1 1 1
//! omega = 1 1.4142135623730951 1.7320508075688772
//! hbar  = 1
//! term  = 1 0 0 0.57735026918962573 0
//! ```
//!
//! Each `term` row is `n1 n2 n3 re im`. Decimal literals are kept verbatim so
//! that parse followed by serialize reproduces them exactly.

use std::fmt;
use std::str::FromStr;

use bohmflow_core::oscillator::{Mode, OscillatorConfig, Superposition, WavefunctionError};
use num_complex::Complex64;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StateFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}` given twice (line {line})")]
    Duplicate { key: String, line: usize },
    #[error(transparent)]
    Invalid(#[from] WavefunctionError),
}

/// A real number together with the literal it was read from.
#[derive(Debug, Clone, PartialEq)]
pub struct Decimal {
    text: String,
    value: f64,
}

impl Decimal {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    /// Shortest literal that reads back to `value`.
    pub fn from_f64(value: f64) -> Self {
        Self {
            text: format!("{value:?}"),
            value,
        }
    }
}

impl FromStr for Decimal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let value: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
        if !value.is_finite() {
            return Err(format!("`{s}` is not finite"));
        }
        Ok(Self {
            text: s.to_string(),
            value,
        })
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermSpec {
    pub mode: [u32; 3],
    pub re: Decimal,
    pub im: Decimal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpec {
    pub mass: [Decimal; 3],
    pub omega: [Decimal; 3],
    pub hbar: Decimal,
    pub terms: Vec<TermSpec>,
}

fn triple(line: usize, fields: &[&str]) -> Result<[Decimal; 3], StateFileError> {
    if fields.len() != 3 {
        return Err(StateFileError::Syntax {
            line,
            message: format!("expected 3 numbers, found {}", fields.len()),
        });
    }
    let parse = |s: &str| s.parse::<Decimal>().map_err(|message| StateFileError::Syntax { line, message });
    Ok([parse(fields[0])?, parse(fields[1])?, parse(fields[2])?])
}

impl StateSpec {
    pub fn parse(text: &str) -> Result<Self, StateFileError> {
        let mut mass = None;
        let mut omega = None;
        let mut hbar = None;
        let mut terms = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| StateFileError::Syntax {
                line,
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let fields: Vec<&str> = value.split_whitespace().collect();
            let dup = |slot_filled: bool| {
                if slot_filled {
                    Err(StateFileError::Duplicate {
                        key: key.to_string(),
                        line,
                    })
                } else {
                    Ok(())
                }
            };
            match key {
                "mass" => {
                    dup(mass.is_some())?;
                    mass = Some(triple(line, &fields)?);
                }
                "omega" => {
                    dup(omega.is_some())?;
                    omega = Some(triple(line, &fields)?);
                }
                "hbar" => {
                    dup(hbar.is_some())?;
                    if fields.len() != 1 {
                        return Err(StateFileError::Syntax {
                            line,
                            message: "expected one number".into(),
                        });
                    }
                    hbar = Some(
                        fields[0]
                            .parse::<Decimal>()
                            .map_err(|message| StateFileError::Syntax { line, message })?,
                    );
                }
                "term" => {
                    if fields.len() != 5 {
                        return Err(StateFileError::Syntax {
                            line,
                            message: "term rows are `n1 n2 n3 re im`".into(),
                        });
                    }
                    let mut mode = [0u32; 3];
                    for k in 0..3 {
                        mode[k] = fields[k].parse().map_err(|_| StateFileError::Syntax {
                            line,
                            message: format!("`{}` is not a quantum number", fields[k]),
                        })?;
                    }
                    let num = |s: &str| s.parse::<Decimal>().map_err(|message| StateFileError::Syntax { line, message });
                    terms.push(TermSpec {
                        mode,
                        re: num(fields[3])?,
                        im: num(fields[4])?,
                    });
                }
                other => {
                    return Err(StateFileError::Syntax {
                        line,
                        message: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        Ok(Self {
            mass: mass.ok_or(StateFileError::Missing("mass"))?,
            omega: omega.ok_or(StateFileError::Missing("omega"))?,
            hbar: hbar.ok_or(StateFileError::Missing("hbar"))?,
            terms,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let [m1, m2, m3] = &self.mass;
        let [w1, w2, w3] = &self.omega;
        out.push_str(&format!("mass = {m1} {m2} {m3}\n"));
        out.push_str(&format!("omega = {w1} {w2} {w3}\n"));
        out.push_str(&format!("hbar = {}\n", self.hbar));
        for t in &self.terms {
            let [a, b, c] = t.mode;
            out.push_str(&format!("term = {a} {b} {c} {} {}\n", t.re, t.im));
        }
        out
    }

    pub fn config(&self) -> Result<OscillatorConfig, StateFileError> {
        let v = |d: &[Decimal; 3]| [d[0].value, d[1].value, d[2].value];
        Ok(OscillatorConfig::new(v(&self.mass), v(&self.omega), self.hbar.value)?)
    }

    pub fn superposition(&self) -> Result<Superposition, StateFileError> {
        let cfg = self.config()?;
        let terms = self.terms.iter().map(|t| {
            (
                Mode::new(t.mode[0], t.mode[1], t.mode[2]),
                Complex64::new(t.re.value, t.im.value),
            )
        });
        Ok(Superposition::new(cfg, terms)?)
    }

    /// Spec for an existing state, with shortest round-trip literals.
    pub fn from_superposition(state: &Superposition) -> Self {
        let cfg = state.config();
        let d3 = |v: [f64; 3]| v.map(Decimal::from_f64);
        Self {
            mass: d3(cfg.masses()),
            omega: d3(cfg.omegas()),
            hbar: Decimal::from_f64(cfg.hbar()),
            terms: state
                .terms()
                .iter()
                .map(|t| TermSpec {
                    mode: t.mode.quantum_numbers(),
                    re: Decimal::from_f64(t.coefficient.re),
                    im: Decimal::from_f64(t.coefficient.im),
                })
                .collect(),
        }
    }
}

/// Bundled state files.
pub const BASE_STATE: &str = include_str!("../states/base.state");
pub const PERTURBED_STATE: &str = include_str!("../states/perturbed.state");

/// Resolves `base`, `perturbed` or `perturbed:<a4>` to a state; anything else
/// is treated as a path to a state file.
pub fn load_state(name: &str) -> Result<Superposition, crate::RunError> {
    let text = match name {
        "base" => BASE_STATE.to_string(),
        "perturbed" => PERTURBED_STATE.to_string(),
        other => {
            if let Some(a4) = other.strip_prefix("perturbed:") {
                let a4: f64 = a4.parse().map_err(|_| crate::RunError::InvalidValue {
                    key: "state".into(),
                    value: other.into(),
                    reason: "perturbation amplitude is not a number".into(),
                })?;
                return Superposition::perturbed(a4).map_err(|e| crate::RunError::State {
                    source: e.into(),
                    path: other.into(),
                });
            }
            std::fs::read_to_string(other).map_err(|e| crate::RunError::Io {
                path: other.into(),
                source: e,
            })?
        }
    };
    StateSpec::parse(&text)
        .and_then(|s| s.superposition())
        .map_err(|source| crate::RunError::State {
            source,
            path: name.into(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_states_parse() {
        let base = StateSpec::parse(BASE_STATE).unwrap().superposition().unwrap();
        assert_eq!(base.terms().len(), 3);
        let p = StateSpec::parse(PERTURBED_STATE).unwrap().superposition().unwrap();
        assert_eq!(p.terms().len(), 4);
    }

    #[test]
    fn literals_round_trip() {
        let text = "mass = 1 1.0 1e0\nomega = 1 1.4142135623730951 1.7320508075688772\nhbar = 1.000\nterm = 1 0 0 0.57735026918962573 0\nterm = 0 1 0 0.57735026918962573 -0.0\nterm = 0 0 1 0.5773502691896257 0\n";
        let spec = StateSpec::parse(text).unwrap();
        assert_eq!(spec.to_text(), text);
        assert_eq!(StateSpec::parse(&spec.to_text()).unwrap(), spec);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = StateSpec::parse("mass = 1 1\n").unwrap_err();
        assert!(matches!(e, StateFileError::Syntax { line: 1, .. }));
        let e = StateSpec::parse("mass = 1 1 1\nmass = 1 1 1\n").unwrap_err();
        assert!(matches!(e, StateFileError::Duplicate { line: 2, .. }));
        let e = StateSpec::parse("mass = 1 1 1\nomega = 1 1 1\n").unwrap_err();
        assert_eq!(e, StateFileError::Missing("hbar"));
        let e = StateSpec::parse("mass = 1 1 1\nomega = 1 1 1\nhbar = 1\nterm = 0 0 0 0.5 0\n")
            .unwrap()
            .superposition()
            .unwrap_err();
        assert!(matches!(e, StateFileError::Invalid(WavefunctionError::NotNormalized { .. })));
    }

    #[test]
    fn superposition_round_trip() {
        let s = Superposition::perturbed(0.1).unwrap();
        let spec = StateSpec::from_superposition(&s);
        let back = StateSpec::parse(&spec.to_text()).unwrap().superposition().unwrap();
        assert_eq!(back.terms(), s.terms());
    }
}
