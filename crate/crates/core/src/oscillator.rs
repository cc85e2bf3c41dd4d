//! Eigenstates of the 3-d anisotropic harmonic oscillator and their finite
//! superpositions.
//!
//! Every eigenfunction factorises as `E(x) * Q(x)` where
//! `E(x) = exp(-sum_k alpha_k x_k^2 / 2)` is a real Gaussian envelope and
//! `Q` is a polynomial. The guidance velocity and its Jacobian only see
//! `Im(grad Q / Q)`, so the flow code works with the envelope-free part and
//! never underflows far from the origin.

use alloc::vec::Vec;
use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::Vec3;
use crate::math;

/// Largest quantum number accepted per axis. `2^n n!` stays far inside the
/// `f64` range up to here and the upward Hermite recurrence is accurate.
pub const MAX_QUANTUM_NUMBER: u32 = 30;

/// Tolerance on `sum |a_i|^2 - 1` when building a [`Superposition`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WavefunctionError {
    #[error("oscillator parameters must be finite and strictly positive ({0})")]
    InvalidConfig(&'static str),
    #[error("quantum number {n} exceeds the supported maximum {max}")]
    QuantumNumberTooLarge { n: u32, max: u32 },
    #[error("superposition has no terms")]
    Empty,
    #[error("mode ({0}, {1}, {2}) appears more than once")]
    DuplicateMode(u32, u32, u32),
    #[error("sum of |a_i|^2 is {norm}, expected 1 within {NORMALIZATION_TOLERANCE:e}")]
    NotNormalized { norm: f64 },
    #[error("coefficient is not finite")]
    NonFiniteCoefficient,
    #[error("perturbation amplitude {a4} leaves no real weight for the (0,0,1) mode")]
    PerturbationTooLarge { a4: f64 },
}

/// Masses, angular frequencies and reduced Planck constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorConfig {
    masses: [f64; 3],
    omegas: [f64; 3],
    hbar: f64,
}

impl Default for OscillatorConfig {
    /// `m_k = hbar = 1`, `omega = (1, sqrt 2, sqrt 3)`.
    fn default() -> Self {
        Self {
            masses: [1.0; 3],
            omegas: [1.0, math::sqrt(2.0), math::sqrt(3.0)],
            hbar: 1.0,
        }
    }
}

impl OscillatorConfig {
    pub fn new(masses: [f64; 3], omegas: [f64; 3], hbar: f64) -> Result<Self, WavefunctionError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !masses.iter().copied().all(ok) {
            return Err(WavefunctionError::InvalidConfig("mass"));
        }
        if !omegas.iter().copied().all(ok) {
            return Err(WavefunctionError::InvalidConfig("frequency"));
        }
        if !ok(hbar) {
            return Err(WavefunctionError::InvalidConfig("hbar"));
        }
        Ok(Self {
            masses,
            omegas,
            hbar,
        })
    }

    pub fn masses(&self) -> [f64; 3] {
        self.masses
    }

    pub fn omegas(&self) -> [f64; 3] {
        self.omegas
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `m_k omega_k / hbar`, the inverse squared oscillator length on axis `k`.
    pub fn alpha(&self, k: usize) -> f64 {
        self.masses[k] * self.omegas[k] / self.hbar
    }

    /// True for the unit system the closed-form base flow assumes.
    pub fn has_unit_masses(&self) -> bool {
        self.masses == [1.0; 3] && self.hbar == 1.0
    }
}

/// Quantum numbers `(n1, n2, n3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mode(pub [u32; 3]);

impl Mode {
    pub const fn new(n1: u32, n2: u32, n3: u32) -> Self {
        Self([n1, n2, n3])
    }

    pub fn quantum_numbers(&self) -> [u32; 3] {
        self.0
    }

    fn check_capacity(&self) -> Result<(), WavefunctionError> {
        match self.0.iter().find(|&&n| n > MAX_QUANTUM_NUMBER) {
            Some(&n) => Err(WavefunctionError::QuantumNumberTooLarge {
                n,
                max: MAX_QUANTUM_NUMBER,
            }),
            None => Ok(()),
        }
    }
}

/// Physicists' Hermite polynomial by upward recurrence
/// `H_{n+1} = 2x H_n - 2n H_{n-1}`.
pub fn hermite_eval(n: u32, x: f64) -> f64 {
    hermite_triple(n, x)[0]
}

/// Returns `[H_n, H_{n-1}, H_{n-2}]`, with zeros for negative orders.
fn hermite_triple(n: u32, x: f64) -> [f64; 3] {
    let mut h_prev2 = 0.0;
    let mut h_prev = 0.0;
    let mut h = 1.0;
    for k in 0..n {
        let next = 2.0 * x * h - 2.0 * f64::from(k) * h_prev;
        h_prev2 = h_prev;
        h_prev = h;
        h = next;
    }
    [h, h_prev, h_prev2]
}

/// `(alpha/pi)^(1/4) / sqrt(2^n n!)`
fn axis_normalization(alpha: f64, n: u32) -> f64 {
    let mut fact = 1.0;
    for k in 1..=n {
        fact *= 2.0 * f64::from(k);
    }
    math::powf(alpha / math::PI, 0.25) / math::sqrt(fact)
}

pub fn mode_energy(config: &OscillatorConfig, mode: Mode) -> f64 {
    (0..3)
        .map(|k| (f64::from(mode.0[k]) + 0.5) * config.hbar * config.omegas[k])
        .sum()
}

/// Real product eigenfunction, Gaussian envelope and normalisation included.
pub fn eigenstate_amplitude(
    config: &OscillatorConfig,
    mode: Mode,
    x: &Vec3,
) -> Result<f64, WavefunctionError> {
    mode.check_capacity()?;
    let mut value = 1.0;
    for k in 0..3 {
        let alpha = config.alpha(k);
        let n = mode.0[k];
        let y = math::sqrt(alpha) * x[k];
        value *= axis_normalization(alpha, n) * math::exp(-0.5 * alpha * x[k] * x[k]) * hermite_eval(n, y);
    }
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperpositionTerm {
    pub coefficient: Complex64,
    pub mode: Mode,
    pub energy: f64,
}

/// Value and gradient of a complex amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexAmplitude {
    pub value: Complex64,
    pub gradient: [Complex64; 3],
}

/// Envelope-free polynomial part of the wavefunction with first and second
/// derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialJet {
    pub value: Complex64,
    pub gradient: [Complex64; 3],
    pub hessian: [[Complex64; 3]; 3],
}

/// One axis factor `N H_n(sqrt(alpha) x)` and its first two derivatives.
#[derive(Clone, Copy)]
struct AxisFactor {
    f: f64,
    df: f64,
    d2f: f64,
}

fn axis_factor(alpha: f64, norm: f64, n: u32, x: f64) -> AxisFactor {
    let sa = math::sqrt(alpha);
    let [h, h1, h2] = hermite_triple(n, sa * x);
    let nf = f64::from(n);
    AxisFactor {
        f: norm * h,
        df: norm * sa * 2.0 * nf * h1,
        d2f: norm * alpha * 4.0 * nf * (nf - 1.0) * h2,
    }
}

/// A normalised finite superposition `sum a_i exp(-i E_i t / hbar) Psi_i(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Superposition {
    terms: Vec<SuperpositionTerm>,
    norms: Vec<[f64; 3]>,
    config: OscillatorConfig,
}

impl Superposition {
    pub fn new(
        config: OscillatorConfig,
        components: impl IntoIterator<Item = (Mode, Complex64)>,
    ) -> Result<Self, WavefunctionError> {
        let mut terms: Vec<SuperpositionTerm> = Vec::new();
        for (mode, coefficient) in components {
            mode.check_capacity()?;
            if !(coefficient.re.is_finite() && coefficient.im.is_finite()) {
                return Err(WavefunctionError::NonFiniteCoefficient);
            }
            if terms.iter().any(|t| t.mode == mode) {
                let [a, b, c] = mode.0;
                return Err(WavefunctionError::DuplicateMode(a, b, c));
            }
            terms.push(SuperpositionTerm {
                coefficient,
                mode,
                energy: mode_energy(&config, mode),
            });
        }
        if terms.is_empty() {
            return Err(WavefunctionError::Empty);
        }
        let norm: f64 = terms.iter().map(|t| t.coefficient.norm_sqr()).sum();
        if !(math::abs(norm - 1.0) <= NORMALIZATION_TOLERANCE) {
            return Err(WavefunctionError::NotNormalized { norm });
        }
        let norms = terms
            .iter()
            .map(|t| {
                let mut n = [0.0; 3];
                for (k, nk) in n.iter_mut().enumerate() {
                    *nk = axis_normalization(config.alpha(k), t.mode.0[k]);
                }
                n
            })
            .collect();
        Ok(Self {
            terms,
            norms,
            config,
        })
    }

    /// `(Psi_100 + Psi_010 + Psi_001) / sqrt 3` in the default unit system.
    pub fn base() -> Self {
        Self::base_with(OscillatorConfig::default())
    }

    pub fn base_with(config: OscillatorConfig) -> Self {
        let a = Complex64::new(1.0 / math::sqrt(3.0), 0.0);
        Self::new(
            config,
            [
                (Mode::new(1, 0, 0), a),
                (Mode::new(0, 1, 0), a),
                (Mode::new(0, 0, 1), a),
            ],
        )
        .expect("base state is normalised")
    }

    /// Base state plus `a4 Psi_002`, with `a1 = a2 = 1/sqrt 3` and
    /// `a3 = sqrt(1 - a1^2 - a2^2 - a4^2)`.
    pub fn perturbed(a4: f64) -> Result<Self, WavefunctionError> {
        let a12 = 1.0 / math::sqrt(3.0);
        let rest = 1.0 - 2.0 * a12 * a12 - a4 * a4;
        if !a4.is_finite() || rest < 0.0 {
            return Err(WavefunctionError::PerturbationTooLarge { a4 });
        }
        let c = |v: f64| Complex64::new(v, 0.0);
        Self::new(
            OscillatorConfig::default(),
            [
                (Mode::new(1, 0, 0), c(a12)),
                (Mode::new(0, 1, 0), c(a12)),
                (Mode::new(0, 0, 1), c(math::sqrt(rest))),
                (Mode::new(0, 0, 2), c(a4)),
            ],
        )
    }

    pub fn config(&self) -> &OscillatorConfig {
        &self.config
    }

    pub fn terms(&self) -> &[SuperpositionTerm] {
        &self.terms
    }

    fn phases(&self, t: f64) -> impl Iterator<Item = (Complex64, &SuperpositionTerm, &[f64; 3])> + '_ {
        let hbar = self.config.hbar;
        self.terms.iter().zip(self.norms.iter()).map(move |(term, norm)| {
            let phase = -term.energy * t / hbar;
            let rot = Complex64::new(math::cos(phase), math::sin(phase));
            (term.coefficient * rot, term, norm)
        })
    }

    /// Gaussian envelope `exp(-sum alpha_k x_k^2 / 2)`.
    pub fn envelope(&self, x: &Vec3) -> f64 {
        let s: f64 = (0..3).map(|k| self.config.alpha(k) * x[k] * x[k]).sum();
        math::exp(-0.5 * s)
    }

    /// Envelope-free part `Q` with gradient only.
    pub fn polynomial(&self, x: &Vec3, t: f64) -> ComplexAmplitude {
        let mut value = Complex64::new(0.0, 0.0);
        let mut gradient = [Complex64::new(0.0, 0.0); 3];
        for (c, term, norm) in self.phases(t) {
            let f: [AxisFactor; 3] =
                core::array::from_fn(|k| axis_factor(self.config.alpha(k), norm[k], term.mode.0[k], x[k]));
            value += c * (f[0].f * f[1].f * f[2].f);
            gradient[0] += c * (f[0].df * f[1].f * f[2].f);
            gradient[1] += c * (f[0].f * f[1].df * f[2].f);
            gradient[2] += c * (f[0].f * f[1].f * f[2].df);
        }
        ComplexAmplitude { value, gradient }
    }

    /// Envelope-free part `Q` with gradient and Hessian.
    pub fn polynomial_jet(&self, x: &Vec3, t: f64) -> PolynomialJet {
        let zero = Complex64::new(0.0, 0.0);
        let mut jet = PolynomialJet {
            value: zero,
            gradient: [zero; 3],
            hessian: [[zero; 3]; 3],
        };
        for (c, term, norm) in self.phases(t) {
            let f: [AxisFactor; 3] =
                core::array::from_fn(|k| axis_factor(self.config.alpha(k), norm[k], term.mode.0[k], x[k]));
            jet.value += c * (f[0].f * f[1].f * f[2].f);
            for i in 0..3 {
                let mut g = 1.0;
                for (k, fk) in f.iter().enumerate() {
                    g *= if k == i { fk.df } else { fk.f };
                }
                jet.gradient[i] += c * g;
                for j in 0..3 {
                    let mut h = 1.0;
                    for (k, fk) in f.iter().enumerate() {
                        h *= match (k == i, k == j) {
                            (true, true) => fk.d2f,
                            (true, false) | (false, true) => fk.df,
                            (false, false) => fk.f,
                        };
                    }
                    jet.hessian[i][j] += c * h;
                }
            }
        }
        jet
    }

    /// Full wavefunction `Psi(x, t)` with its analytic gradient.
    pub fn psi(&self, x: &Vec3, t: f64) -> ComplexAmplitude {
        let q = self.polynomial(x, t);
        let env = self.envelope(x);
        let gradient = core::array::from_fn(|k| (q.gradient[k] - q.value * (self.config.alpha(k) * x[k])) * env);
        ComplexAmplitude {
            value: q.value * env,
            gradient,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_low_orders() {
        assert_eq!(hermite_eval(0, 0.7), 1.0);
        assert_eq!(hermite_eval(1, 0.5), 1.0);
        assert_eq!(hermite_eval(3, 1.0), -4.0);
        let x = 0.37;
        assert_relative_eq!(hermite_eval(4, x), 16.0 * x.powi(4) - 48.0 * x * x + 12.0, epsilon = 1e-12);
    }

    #[test]
    fn ground_state_at_origin() {
        let cfg = OscillatorConfig::default();
        let v = eigenstate_amplitude(&cfg, Mode::new(0, 0, 0), &[0.0; 3]).unwrap();
        let expected = (6.0f64.sqrt() / core::f64::consts::PI.powi(3)).powf(0.25);
        assert_relative_eq!(v, expected, epsilon = 1e-15);
        assert_relative_eq!(v, 0.5302, epsilon = 1e-4);
    }

    #[test]
    fn odd_mode_vanishes_on_its_plane() {
        let cfg = OscillatorConfig::default();
        let v = eigenstate_amplitude(&cfg, Mode::new(1, 0, 0), &[0.0, 0.3, -1.0]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn parity_follows_quantum_number() {
        let cfg = OscillatorConfig::default();
        let x = [0.4, -0.9, 1.3];
        for n in [[1, 0, 0], [2, 1, 0], [0, 3, 2], [5, 4, 1]] {
            let mode = Mode(n);
            let v = eigenstate_amplitude(&cfg, mode, &x).unwrap();
            for k in 0..3 {
                let mut y = x;
                y[k] = -y[k];
                let w = eigenstate_amplitude(&cfg, mode, &y).unwrap();
                let sign = if n[k] % 2 == 1 { -1.0 } else { 1.0 };
                assert_eq!(w, sign * v);
            }
        }
    }

    #[test]
    fn energies() {
        let cfg = OscillatorConfig::default();
        let s2 = 2.0f64.sqrt();
        let s3 = 3.0f64.sqrt();
        let e0 = mode_energy(&cfg, Mode::new(0, 0, 0));
        assert_relative_eq!(e0, (1.0 + s2 + s3) / 2.0, epsilon = 1e-15);
        assert_relative_eq!(e0, 2.0731, epsilon = 1e-4);
        assert_relative_eq!(mode_energy(&cfg, Mode::new(1, 0, 0)), e0 + 1.0, epsilon = 1e-15);
        assert_relative_eq!(
            mode_energy(&cfg, Mode::new(0, 0, 2)),
            (1.0 + s2) / 2.0 + 2.5 * s3,
            epsilon = 1e-15
        );
    }

    #[test]
    fn capacity_is_enforced() {
        let cfg = OscillatorConfig::default();
        let err = eigenstate_amplitude(&cfg, Mode::new(0, 31, 0), &[0.0; 3]).unwrap_err();
        assert_eq!(err, WavefunctionError::QuantumNumberTooLarge { n: 31, max: 30 });
        assert!(eigenstate_amplitude(&cfg, Mode::new(30, 0, 0), &[0.1; 3]).unwrap().is_finite());
    }

    #[test]
    fn construction_rejects_bad_input() {
        let cfg = OscillatorConfig::default();
        let one = Complex64::new(1.0, 0.0);
        let half = Complex64::new(0.5, 0.0);
        assert!(matches!(
            Superposition::new(cfg, [(Mode::new(0, 0, 0), half)]),
            Err(WavefunctionError::NotNormalized { .. })
        ));
        assert!(matches!(
            Superposition::new(cfg, [(Mode::new(1, 0, 0), one * 0.6), (Mode::new(1, 0, 0), one * 0.8)]),
            Err(WavefunctionError::DuplicateMode(1, 0, 0))
        ));
        assert_eq!(Superposition::new(cfg, []), Err(WavefunctionError::Empty));
        assert!(Superposition::new(cfg, [(Mode::new(0, 0, 0), Complex64::new(0.6, 0.8))]).is_ok());
        assert!(OscillatorConfig::new([1.0, 0.0, 1.0], [1.0; 3], 1.0).is_err());
        assert!(matches!(
            Superposition::perturbed(0.6),
            Err(WavefunctionError::PerturbationTooLarge { .. })
        ));
    }

    #[test]
    fn normalization_boundary() {
        let cfg = OscillatorConfig::default();
        let a = 1.0 + 0.4e-12;
        assert!(Superposition::new(cfg, [(Mode::new(0, 0, 0), Complex64::new(a, 0.0))]).is_ok());
        let a = 1.0 + 1e-11;
        assert!(Superposition::new(cfg, [(Mode::new(0, 0, 0), Complex64::new(a, 0.0))]).is_err());
    }

    #[test]
    fn base_state_vanishes_at_origin() {
        let s = Superposition::base();
        for t in [0.0, 1.3, 7.0] {
            let amp = s.psi(&[0.0; 3], t);
            assert_eq!(amp.value, Complex64::new(0.0, 0.0));
            assert!(amp.gradient.iter().any(|g| g.norm() > 0.1));
        }
    }

    #[test]
    fn psi_matches_eigenstate_sum() {
        let s = Superposition::perturbed(0.1).unwrap();
        let x = [0.3, -0.7, 1.1];
        let t = 2.5;
        let amp = s.psi(&x, t);
        let mut direct = Complex64::new(0.0, 0.0);
        for term in s.terms() {
            let phase = Complex64::new(0.0, -term.energy * t).exp();
            direct += term.coefficient * phase * eigenstate_amplitude(s.config(), term.mode, &x).unwrap();
        }
        assert_relative_eq!(amp.value.re, direct.re, epsilon = 1e-14);
        assert_relative_eq!(amp.value.im, direct.im, epsilon = 1e-14);
    }

    #[test]
    fn single_eigenstate_is_stationary() {
        let s = Superposition::new(OscillatorConfig::default(), [(Mode::new(2, 1, 0), Complex64::new(0.6, 0.8))]).unwrap();
        let x = [0.5, 0.2, -0.4];
        let m0 = s.psi(&x, 0.0).value.norm();
        for t in [0.5, 3.0, 17.0] {
            assert!((s.psi(&x, t).value.norm() - m0).abs() < 1e-12);
        }
    }

    #[test]
    fn hessian_is_symmetric() {
        let s = Superposition::perturbed(0.05).unwrap();
        let jet = s.polynomial_jet(&[0.4, 1.2, -0.3], 1.7);
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(jet.hessian[i][j].re, jet.hessian[j][i].re, epsilon = 1e-14);
                assert_relative_eq!(jet.hessian[i][j].im, jet.hessian[j][i].im, epsilon = 1e-14);
            }
        }
    }
}
