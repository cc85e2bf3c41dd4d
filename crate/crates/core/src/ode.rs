//! Dormand–Prince 5(4) with PI step-size control and 4th-order dense output.
//!
//! Works on fixed-size states `[f64; N]`. The right-hand side may refuse to
//! evaluate (e.g. too close to a node); such stages are treated as rejected
//! steps and the step is shrunk.

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OdeError<E> {
    /// The right-hand side kept failing until the step fell below `min_step`.
    Rhs { t: f64, source: E },
    /// Error control asked for a step below `min_step`.
    StepUnderflow { t: f64, h: f64 },
    TooManySteps { t: f64 },
    NonFinite { t: f64 },
}

/// Autonomous or non-autonomous system `dy/dt = f(t, y)`.
pub trait OdeSystem<const N: usize> {
    type Error: Clone;

    fn rhs(&self, t: f64, y: &[f64; N]) -> Result<[f64; N], Self::Error>;

    /// Upper bound on the next step, given the state and its derivative.
    fn step_cap(&self, _t: f64, _y: &[f64; N], _dy: &[f64; N]) -> f64 {
        f64::INFINITY
    }

    /// Per-component error scale `sc_i`; the step is accepted when the RMS of
    /// `err_i / sc_i` is at most one.
    fn error_scale(&self, y_old: &[f64; N], y_new: &[f64; N], ctl: &StepControl) -> [f64; N] {
        core::array::from_fn(|i| ctl.abs_tol + ctl.rel_tol * math::abs(y_old[i]).max(math::abs(y_new[i])))
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const RHS_FAILURE_SHRINK: f64 = 0.25;

/// Interpolant over one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<const N: usize> {
    pub t_old: f64,
    pub t_new: f64,
    pub y_new: [f64; N],
    coeffs: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn eval(&self, t: f64) -> [f64; N] {
        if t == self.t_new {
            return self.y_new;
        }
        let h = self.t_new - self.t_old;
        let theta = (t - self.t_old) / h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        core::array::from_fn(|i| r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i]))))
    }
}

/// Stateful stepper. Drive it with [`Dopri5::step`] up to a time limit.
pub struct Dopri5<'a, S: OdeSystem<N>, const N: usize> {
    sys: &'a S,
    ctl: StepControl,
    t: f64,
    y: [f64; N],
    dy: [f64; N],
    h: f64,
    fac_old: f64,
    steps: usize,
    direction: f64,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    core::array::from_fn(|i| y[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

impl<'a, S: OdeSystem<N>, const N: usize> Dopri5<'a, S, N> {
    /// Starts at `(t0, y0)`; `direction` is `+1` or `-1`.
    pub fn new(sys: &'a S, ctl: StepControl, t0: f64, y0: [f64; N], direction: f64) -> Result<Self, OdeError<S::Error>> {
        let dy = sys.rhs(t0, &y0).map_err(|source| OdeError::Rhs { t: t0, source })?;
        let mut me = Self {
            sys,
            ctl,
            t: t0,
            y: y0,
            dy,
            h: 0.0,
            fac_old: 1e-4,
            steps: 0,
            direction: if direction < 0.0 { -1.0 } else { 1.0 },
        };
        me.h = me.initial_step();
        Ok(me)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    /// Applies an in-place transformation to the current state and its
    /// derivative, e.g. an exact power-of-two rescaling of a linear block.
    pub fn rescale(&mut self, f: impl FnOnce(&mut [f64; N], &mut [f64; N])) {
        f(&mut self.y, &mut self.dy);
    }

    fn weighted_rms(&self, v: &[f64; N], sc: &[f64; N]) -> f64 {
        let s: f64 = (0..N).map(|i| (v[i] / sc[i]) * (v[i] / sc[i])).sum();
        math::sqrt(s / N as f64)
    }

    fn initial_step(&self) -> f64 {
        let sc = self.sys.error_scale(&self.y, &self.y, &self.ctl);
        let d0 = self.weighted_rms(&self.y, &sc);
        let d1 = self.weighted_rms(&self.dy, &sc);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h = h.min(self.ctl.max_step).max(self.ctl.min_step);
        let cap = self.sys.step_cap(self.t, &self.y, &self.dy);
        h.min(cap.max(self.ctl.min_step))
    }

    /// Advances one accepted step without passing `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<DenseStep<N>, OdeError<S::Error>> {
        let ctl = self.ctl;
        let dir = self.direction;
        let mut last_rhs_error: Option<S::Error> = None;
        loop {
            if self.steps >= ctl.max_steps {
                return Err(OdeError::TooManySteps { t: self.t });
            }
            self.steps += 1;
            let remaining = (t_limit - self.t) * dir;
            let cap = self.sys.step_cap(self.t, &self.y, &self.dy);
            let mut h = self.h.min(ctl.max_step).min(cap);
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            if h < ctl.min_step && !last {
                return Err(match last_rhs_error {
                    Some(source) => OdeError::Rhs { t: self.t, source },
                    None => OdeError::StepUnderflow { t: self.t, h },
                });
            }
            let hs = h * dir;
            match self.attempt(hs) {
                Ok((y_new, dy_new, k, err)) => {
                    if !err.is_finite() {
                        self.h = h * RHS_FAILURE_SHRINK;
                        continue;
                    }
                    let expo = 0.2 - BETA * 0.75;
                    let fac11 = math::powf(err.max(1e-300), expo);
                    if err <= 1.0 {
                        let fac = (fac11 / math::powf(self.fac_old, BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                        self.fac_old = err.max(1e-4);
                        let t_old = self.t;
                        let t_new = if last { t_limit } else { self.t + hs };
                        let coeffs = self.dense_coeffs(hs, &y_new, &dy_new, &k);
                        self.t = t_new;
                        self.y = y_new;
                        self.dy = dy_new;
                        self.h = h / fac;
                        if y_new.iter().any(|v| !v.is_finite()) {
                            return Err(OdeError::NonFinite { t: t_new });
                        }
                        return Ok(DenseStep {
                            t_old,
                            t_new,
                            y_new,
                            coeffs,
                        });
                    }
                    self.h = h / (fac11 / SAFETY).min(1.0 / FAC_MIN);
                }
                Err(e) => {
                    last_rhs_error = Some(e);
                    self.h = h * RHS_FAILURE_SHRINK;
                }
            }
        }
    }

    #[allow(clippy::type_complexity)]
    fn attempt(&self, h: f64) -> Result<([f64; N], [f64; N], [[f64; N]; 6], f64), S::Error> {
        let (t, y, k1) = (self.t, &self.y, &self.dy);
        let f = |tt: f64, yy: &[f64; N]| self.sys.rhs(tt, yy);
        let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]))?;
        let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]))?;
        let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
        let k5 = f(t + C5 * h, &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]))?;
        let k6 = f(t + h, &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]))?;
        let y_new = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + h, &y_new)?;
        let err_vec: [f64; N] = core::array::from_fn(|i| {
            h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        });
        let sc = self.sys.error_scale(y, &y_new, &self.ctl);
        let err = self.weighted_rms(&err_vec, &sc);
        Ok((y_new, k7, [*k1, k2, k3, k4, k5, k6], err))
    }

    fn dense_coeffs(&self, h: f64, y_new: &[f64; N], k7: &[f64; N], k: &[[f64; N]; 6]) -> [[f64; N]; 5] {
        let y = &self.y;
        let [k1, _k2, k3, k4, k5, k6] = k;
        let r1 = *y;
        let r2: [f64; N] = core::array::from_fn(|i| y_new[i] - y[i]);
        let r3: [f64; N] = core::array::from_fn(|i| h * k1[i] - r2[i]);
        let r4: [f64; N] = core::array::from_fn(|i| r2[i] - h * k7[i] - r3[i]);
        let r5: [f64; N] = core::array::from_fn(|i| {
            h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
        });
        [r1, r2, r3, r4, r5]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;
    impl OdeSystem<2> for Oscillator {
        type Error = ();
        fn rhs(&self, _t: f64, y: &[f64; 2]) -> Result<[f64; 2], ()> {
            Ok([y[1], -y[0]])
        }
    }

    fn ctl(tol: f64) -> StepControl {
        StepControl {
            rel_tol: tol,
            abs_tol: tol,
            max_step: 1.0,
            min_step: 1e-14,
            max_steps: 1_000_000,
        }
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let mut s = Dopri5::new(&Oscillator, ctl(1e-10), 0.0, [1.0, 0.0], 1.0).unwrap();
        while s.t() < 20.0 {
            s.step(20.0).unwrap();
        }
        assert_eq!(s.t(), 20.0);
        assert!((s.y()[0] - 20f64.cos()).abs() < 1e-8);
        assert!((s.y()[1] + 20f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn dense_output_is_accurate_inside_steps() {
        let mut s = Dopri5::new(&Oscillator, ctl(1e-10), 0.0, [1.0, 0.0], 1.0).unwrap();
        let mut worst: f64 = 0.0;
        while s.t() < 10.0 {
            let d = s.step(10.0).unwrap();
            for j in 1..8 {
                let t = d.t_old + (d.t_new - d.t_old) * j as f64 / 8.0;
                worst = worst.max((d.eval(t)[0] - t.cos()).abs());
            }
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn backward_integration() {
        let mut s = Dopri5::new(&Oscillator, ctl(1e-10), 0.0, [1.0, 0.0], -1.0).unwrap();
        while s.t() > -3.0 {
            s.step(-3.0).unwrap();
        }
        assert!((s.y()[0] - 3f64.cos()).abs() < 1e-8);
        assert!((s.y()[1] - 3f64.sin()).abs() < 1e-8);
    }

    struct Wall;
    impl OdeSystem<1> for Wall {
        type Error = &'static str;
        fn rhs(&self, t: f64, _y: &[f64; 1]) -> Result<[f64; 1], &'static str> {
            if t > 1.0 {
                Err("wall")
            } else {
                Ok([1.0])
            }
        }
    }

    #[test]
    fn persistent_rhs_failure_surfaces() {
        let mut s = Dopri5::new(&Wall, ctl(1e-8), 0.0, [0.0], 1.0).unwrap();
        let err = loop {
            match s.step(5.0) {
                Ok(_) => continue,
                Err(e) => break e,
            }
        };
        match err {
            OdeError::Rhs { t, source } => {
                assert_eq!(source, "wall");
                assert!(t <= 1.0 && t > 0.99);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
