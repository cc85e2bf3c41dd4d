//! Bohmian guidance velocity, its Jacobian, and trajectory integration with
//! linearized deviation vectors.

use alloc::vec::Vec;

use crate::linalg::{self, Mat3, Vec3};
use crate::math;
use crate::ode::{DenseStep, Dopri5, OdeError, OdeSystem, StepControl};
use crate::oscillator::Superposition;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error("point is within the node guard at t = {t} (density {density:e})")]
    NearNode { t: f64, density: f64 },
    #[error("step control could not keep the trajectory away from the node at t = {t}, x = {x:?}")]
    NodeCollision { t: f64, x: Vec3 },
    #[error("required step {h:e} fell below the minimum step at t = {t}")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget exhausted at t = {t}")]
    TooManySteps { t: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("invalid integrator settings: {0}")]
    InvalidSettings(&'static str),
    #[error("invalid time interval [{t0}, {t1}]")]
    InvalidInterval { t0: f64, t1: f64 },
    #[error("initial deviation vector must be nonzero and finite")]
    ZeroDeviation,
    #[error("sampling interval must be positive and finite")]
    InvalidSamplingInterval,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub x: Vec3,
    pub t: f64,
}

impl PhasePoint {
    pub fn new(x: Vec3, t: f64) -> Self {
        Self { x, t }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
    /// Reject threshold on `G` (closed form) or the reduced density `|Q|^2`.
    pub node_guard: f64,
    pub deviation_renorm_threshold: f64,
    /// Geometric cap factor `c` in `h <= c * node_distance / speed`.
    pub node_step_factor: f64,
    /// Output spacing for [`integrate`].
    pub sample_interval: f64,
    pub max_steps: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-10,
            max_step: 0.1,
            min_step: 1e-14,
            node_guard: 1e-12,
            deviation_renorm_threshold: 1e8,
            node_step_factor: 0.1,
            sample_interval: 0.01,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<(), FlowError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.rel_tol) || !pos(self.abs_tol) {
            return Err(FlowError::InvalidSettings("tolerances must be positive"));
        }
        if !pos(self.min_step) || !pos(self.max_step) || self.min_step >= self.max_step {
            return Err(FlowError::InvalidSettings("need 0 < min_step < max_step"));
        }
        if !(self.node_guard >= 0.0) || !self.node_guard.is_finite() {
            return Err(FlowError::InvalidSettings("node_guard must be non-negative"));
        }
        if !pos(self.deviation_renorm_threshold) || self.deviation_renorm_threshold <= 1.0 {
            return Err(FlowError::InvalidSettings("deviation_renorm_threshold must exceed 1"));
        }
        if !pos(self.node_step_factor) {
            return Err(FlowError::InvalidSettings("node_step_factor must be positive"));
        }
        if !pos(self.sample_interval) {
            return Err(FlowError::InvalidSamplingInterval);
        }
        if self.max_steps == 0 {
            return Err(FlowError::InvalidSettings("max_steps must be positive"));
        }
        Ok(())
    }

    fn step_control(&self) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            min_step: self.min_step,
            max_steps: self.max_steps,
        }
    }
}

/// Reduced density `|Q|^2` where `Psi = envelope * Q`. The Gaussian envelope
/// never vanishes, so this carries the node geometry without underflowing
/// at large radii.
pub fn reduced_density(state: &Superposition, p: &PhasePoint) -> f64 {
    state.polynomial(&p.x, p.t).value.norm_sqr()
}

/// `(hbar / m_k) Im(d_k Psi / Psi)` per axis.
pub fn bohmian_velocity(state: &Superposition, p: &PhasePoint, node_guard: f64) -> Result<Vec3, FlowError> {
    let q = state.polynomial(&p.x, p.t);
    let density = q.value.norm_sqr();
    if !(density >= node_guard) || density == 0.0 {
        return Err(FlowError::NearNode { t: p.t, density });
    }
    let cfg = state.config();
    let (hbar, m) = (cfg.hbar(), cfg.masses());
    Ok(core::array::from_fn(|k| hbar / m[k] * (q.gradient[k] * q.value.conj()).im / density))
}

/// Spatial Jacobian `dv_i/dx_j` from the analytic Hessian of `Q`.
pub fn velocity_jacobian(state: &Superposition, p: &PhasePoint, node_guard: f64) -> Result<Mat3, FlowError> {
    let jet = state.polynomial_jet(&p.x, p.t);
    let density = jet.value.norm_sqr();
    if !(density >= node_guard) || density == 0.0 {
        return Err(FlowError::NearNode { t: p.t, density });
    }
    let cfg = state.config();
    let (hbar, m) = (cfg.hbar(), cfg.masses());
    let inv = jet.value.inv();
    let g: [_; 3] = core::array::from_fn(|k| jet.gradient[k] * inv);
    Ok(core::array::from_fn(|i| {
        core::array::from_fn(|j| hbar / m[i] * (jet.hessian[i][j] * inv - g[i] * g[j]).im)
    }))
}

/// Closed-form flow of the equal-weight base state `(Psi_100 + Psi_010 + Psi_001)/sqrt 3`
/// in units with unit masses and `hbar = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseModel {
    omega: [f64; 3],
}

impl Default for BaseModel {
    fn default() -> Self {
        Self {
            omega: [1.0, math::sqrt(2.0), math::sqrt(3.0)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseFlowCoefficients {
    /// `A_ij = sqrt(w_i w_j) sin((w_j - w_i) t)`.
    pub a: Mat3,
    /// `G = |sum_k sqrt(w_k) x_k e^{-i w_k t}|^2`.
    pub g: f64,
}

impl BaseModel {
    pub fn new(omega: [f64; 3]) -> Self {
        Self { omega }
    }

    pub fn omega(&self) -> [f64; 3] {
        self.omega
    }

    pub fn a_matrix(&self, t: f64) -> Mat3 {
        let w = self.omega;
        core::array::from_fn(|i| core::array::from_fn(|j| math::sqrt(w[i] * w[j]) * math::sin((w[j] - w[i]) * t)))
    }

    /// Symmetric `M_ij = sqrt(w_i w_j) cos((w_i - w_j) t)`; `G = x^T M x`.
    pub fn g_matrix(&self, t: f64) -> Mat3 {
        let w = self.omega;
        core::array::from_fn(|i| core::array::from_fn(|j| math::sqrt(w[i] * w[j]) * math::cos((w[i] - w[j]) * t)))
    }

    pub fn g(&self, x: &Vec3, t: f64) -> f64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for k in 0..3 {
            let s = math::sqrt(self.omega[k]) * x[k];
            re += s * math::cos(self.omega[k] * t);
            im -= s * math::sin(self.omega[k] * t);
        }
        re * re + im * im
    }

    pub fn coefficients(&self, p: &PhasePoint) -> BaseFlowCoefficients {
        BaseFlowCoefficients {
            a: self.a_matrix(p.t),
            g: self.g(&p.x, p.t),
        }
    }
}

/// `x_i' = (1/G) sum_j sqrt(w_j w_i) sin(w_ji t) x_j`.
pub fn closed_form_velocity(model: &BaseModel, p: &PhasePoint, node_guard: f64) -> Result<Vec3, FlowError> {
    let c = model.coefficients(p);
    if !(c.g >= node_guard) || c.g == 0.0 {
        return Err(FlowError::NearNode { t: p.t, density: c.g });
    }
    Ok(linalg::scale(&linalg::mat_vec(&c.a, &p.x), 1.0 / c.g))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    samples: Vec<(f64, Vec3)>,
    radius_series: Vec<f64>,
}

impl Trajectory {
    pub fn from_samples(samples: Vec<(f64, Vec3)>) -> Self {
        let radius_series = samples.iter().map(|(_, x)| linalg::norm(x)).collect();
        Self { samples, radius_series }
    }

    fn push(&mut self, t: f64, x: Vec3) {
        self.samples.push((t, x));
        self.radius_series.push(linalg::norm(&x));
    }

    pub fn samples(&self) -> &[(f64, Vec3)] {
        &self.samples
    }

    pub fn radius_series(&self) -> &[f64] {
        &self.radius_series
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn last(&self) -> Option<&(f64, Vec3)> {
        self.samples.last()
    }
}

/// Deviation-vector history on a uniform grid `t0 + k tau`.
///
/// The integrated vector is kept in range by power-of-two rescalings, so the
/// true norm is `raw_norm * 2^exponent` and every derived ratio is exact.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeviationLog {
    pub tau: f64,
    pub t0: f64,
    raw_norms: Vec<f64>,
    exponents: Vec<i32>,
    renorm_events: Vec<(f64, f64)>,
}

impl DeviationLog {
    pub fn raw_norms(&self) -> &[f64] {
        &self.raw_norms
    }

    pub fn exponents(&self) -> &[i32] {
        &self.exponents
    }

    /// `(t, factor)` for each rescaling; the factor multiplied the vector.
    pub fn renorm_events(&self) -> &[(f64, f64)] {
        &self.renorm_events
    }

    pub fn len(&self) -> usize {
        self.raw_norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw_norms.is_empty()
    }

    /// Reconstructed norms `xi_k`; may overflow for extreme growth.
    pub fn norms(&self) -> Vec<f64> {
        self.raw_norms
            .iter()
            .zip(&self.exponents)
            .map(|(&r, &e)| math::ldexp(r, e))
            .collect()
    }

    pub fn log_norms(&self) -> Vec<f64> {
        self.raw_norms
            .iter()
            .zip(&self.exponents)
            .map(|(&r, &e)| math::ln(r) + e as f64 * core::f64::consts::LN_2)
            .collect()
    }

    /// `ln(xi_{k+1} / xi_k)` computed without reconstructing the norms.
    pub fn log_ratios(&self) -> Vec<f64> {
        (1..self.raw_norms.len())
            .map(|k| {
                let q = self.raw_norms[k] / self.raw_norms[k - 1];
                math::ln(math::ldexp(q, self.exponents[k] - self.exponents[k - 1]))
            })
            .collect()
    }
}

fn map_ode_error(e: OdeError<FlowError>, y_at: impl FnOnce() -> Vec3) -> FlowError {
    match e {
        OdeError::Rhs { t, source } => match source {
            FlowError::NearNode { .. } => FlowError::NodeCollision { t, x: y_at() },
            other => other,
        },
        OdeError::StepUnderflow { t, h } => FlowError::StepUnderflow { t, h },
        OdeError::TooManySteps { t } => FlowError::TooManySteps { t },
        OdeError::NonFinite { t } => FlowError::NonFinite { t },
    }
}

/// Caps the step by `c * (|Q| / |grad Q|) / |v|`, a first-order estimate of
/// the time to reach the node.
fn node_step_cap(state: &Superposition, t: f64, x: &Vec3, v: &Vec3, c: f64) -> f64 {
    let q = state.polynomial(x, t);
    let grad = math::sqrt(q.gradient.iter().map(|g| g.norm_sqr()).sum());
    let speed = linalg::norm(v);
    if grad == 0.0 || speed == 0.0 {
        return f64::INFINITY;
    }
    c * (q.value.norm() / grad) / speed
}

struct TrajectorySystem<'a> {
    state: &'a Superposition,
    guard: f64,
    c: f64,
}

impl OdeSystem<3> for TrajectorySystem<'_> {
    type Error = FlowError;

    fn rhs(&self, t: f64, y: &[f64; 3]) -> Result<[f64; 3], FlowError> {
        bohmian_velocity(self.state, &PhasePoint::new(*y, t), self.guard)
    }

    fn step_cap(&self, t: f64, y: &[f64; 3], dy: &[f64; 3]) -> f64 {
        node_step_cap(self.state, t, y, dy, self.c)
    }
}

struct DeviationSystem<'a> {
    state: &'a Superposition,
    guard: f64,
    c: f64,
}

fn split6(y: &[f64; 6]) -> (Vec3, Vec3) {
    ([y[0], y[1], y[2]], [y[3], y[4], y[5]])
}

impl OdeSystem<6> for DeviationSystem<'_> {
    type Error = FlowError;

    fn rhs(&self, t: f64, y: &[f64; 6]) -> Result<[f64; 6], FlowError> {
        let (x, d) = split6(y);
        let p = PhasePoint::new(x, t);
        let v = bohmian_velocity(self.state, &p, self.guard)?;
        let j = velocity_jacobian(self.state, &p, self.guard)?;
        let jd = linalg::mat_vec(&j, &d);
        Ok([v[0], v[1], v[2], jd[0], jd[1], jd[2]])
    }

    fn step_cap(&self, t: f64, y: &[f64; 6], dy: &[f64; 6]) -> f64 {
        let (x, _) = split6(y);
        let (v, _) = split6(dy);
        node_step_cap(self.state, t, &x, &v, self.c)
    }

    /// Position components use the usual mixed scale. Deviation components
    /// are measured relative to the deviation's own size, which keeps step
    /// selection invariant under rescaling of the deviation.
    fn error_scale(&self, y_old: &[f64; 6], y_new: &[f64; 6], ctl: &StepControl) -> [f64; 6] {
        let dmax = y_old[3..].iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
        core::array::from_fn(|i| {
            let mag = math::abs(y_old[i]).max(math::abs(y_new[i]));
            if i < 3 {
                ctl.abs_tol + ctl.rel_tol * mag
            } else {
                ctl.abs_tol * dmax + ctl.rel_tol * mag
            }
        })
    }
}

/// Uniform output grid `t0 + k dt` that always ends exactly at `t1`.
pub(crate) fn sample_grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let span = t1 - t0;
    let ratio = span / dt;
    let n = libm::round(ratio);
    let mut grid = Vec::new();
    if (ratio - n).abs() <= 1e-9 * ratio.max(1.0) {
        let n = n as usize;
        grid.extend((0..n).map(|k| t0 + k as f64 * dt));
        grid.push(t1);
    } else {
        let n = libm::floor(ratio) as usize;
        grid.extend((0..=n).map(|k| t0 + k as f64 * dt));
        grid.push(t1);
    }
    grid
}

fn check_interval(t0: f64, t1: f64) -> Result<(), FlowError> {
    if !t0.is_finite() || !t1.is_finite() || t1 < t0 {
        return Err(FlowError::InvalidInterval { t0, t1 });
    }
    Ok(())
}

fn guard_sample(state: &Superposition, t: f64, x: &Vec3, guard: f64) -> Result<(), FlowError> {
    let density = reduced_density(state, &PhasePoint::new(*x, t));
    if density >= guard && density > 0.0 {
        Ok(())
    } else {
        Err(FlowError::NodeCollision { t, x: *x })
    }
}

/// Walks the output grid through one dense step, emitting samples in `(t_old, t_new]`.
fn emit<const N: usize>(
    grid: &[f64],
    next: &mut usize,
    step: &DenseStep<N>,
    mut f: impl FnMut(f64, [f64; N]) -> Result<(), FlowError>,
) -> Result<(), FlowError> {
    while *next < grid.len() && grid[*next] <= step.t_new {
        let t = grid[*next];
        f(t, step.eval(t))?;
        *next += 1;
    }
    Ok(())
}

/// Integrates a Bohmian trajectory from `(x0, t0)` to `t1`, sampled every
/// `settings.sample_interval`.
pub fn integrate(
    state: &Superposition,
    x0: Vec3,
    t0: f64,
    t1: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory, FlowError> {
    settings.validate()?;
    check_interval(t0, t1)?;
    guard_sample(state, t0, &x0, settings.node_guard).map_err(|_| FlowError::NearNode {
        t: t0,
        density: reduced_density(state, &PhasePoint::new(x0, t0)),
    })?;
    let mut traj = Trajectory::default();
    traj.push(t0, x0);
    if t1 == t0 {
        return Ok(traj);
    }
    let grid = sample_grid(t0, t1, settings.sample_interval);
    let sys = TrajectorySystem {
        state,
        guard: settings.node_guard,
        c: settings.node_step_factor,
    };
    let mut stepper =
        Dopri5::new(&sys, settings.step_control(), t0, x0, 1.0).map_err(|e| map_ode_error(e, || x0))?;
    let mut next = 1;
    while stepper.t() < t1 {
        let step = stepper.step(t1).map_err(|e| {
            let y = *stepper.y();
            map_ode_error(e, || y)
        })?;
        emit(&grid, &mut next, &step, |t, x| {
            guard_sample(state, t, &x, settings.node_guard)?;
            traj.push(t, x);
            Ok(())
        })?;
    }
    Ok(traj)
}

/// Co-integrates the trajectory and the variational equation `d' = J d`,
/// recording `|d|` at `t0 + k tau`.
pub fn integrate_with_deviation(
    state: &Superposition,
    x0: Vec3,
    dx0: Vec3,
    t0: f64,
    t1: f64,
    tau: f64,
    settings: &IntegratorSettings,
) -> Result<(Trajectory, DeviationLog), FlowError> {
    settings.validate()?;
    check_interval(t0, t1)?;
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(FlowError::InvalidSamplingInterval);
    }
    let n0 = linalg::norm(&dx0);
    if !(n0 > 0.0) || !n0.is_finite() {
        return Err(FlowError::ZeroDeviation);
    }
    guard_sample(state, t0, &x0, settings.node_guard).map_err(|_| FlowError::NearNode {
        t: t0,
        density: reduced_density(state, &PhasePoint::new(x0, t0)),
    })?;
    let mut traj = Trajectory::default();
    let mut log = DeviationLog {
        tau,
        t0,
        ..Default::default()
    };
    traj.push(t0, x0);
    log.raw_norms.push(n0);
    log.exponents.push(0);
    if t1 == t0 {
        return Ok((traj, log));
    }
    let grid = sample_grid(t0, t1, tau);
    let sys = DeviationSystem {
        state,
        guard: settings.node_guard,
        c: settings.node_step_factor,
    };
    let y0 = [x0[0], x0[1], x0[2], dx0[0], dx0[1], dx0[2]];
    let mut stepper =
        Dopri5::new(&sys, settings.step_control(), t0, y0, 1.0).map_err(|e| map_ode_error(e, || x0))?;
    let threshold = settings.deviation_renorm_threshold;
    let mut exponent: i32 = 0;
    let mut next = 1;
    while stepper.t() < t1 {
        let step = stepper.step(t1).map_err(|e| {
            let (x, _) = split6(stepper.y());
            map_ode_error(e, || x)
        })?;
        emit(&grid, &mut next, &step, |t, y| {
            let (x, d) = split6(&y);
            guard_sample(state, t, &x, settings.node_guard)?;
            traj.push(t, x);
            log.raw_norms.push(linalg::norm(&d));
            log.exponents.push(exponent);
            Ok(())
        })?;
        let (_, d) = split6(stepper.y());
        let dn = linalg::norm(&d);
        if dn > threshold || dn < 1.0 / threshold {
            let (_, e) = math::frexp(dn);
            stepper.rescale(|y, dy| {
                for i in 3..6 {
                    y[i] = math::ldexp(y[i], -e);
                    dy[i] = math::ldexp(dy[i], -e);
                }
            });
            exponent += e;
            log.renorm_events.push((stepper.t(), math::ldexp(1.0, -e)));
        }
    }
    Ok((traj, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_velocity_at_t0() {
        let s = Superposition::base();
        let v = bohmian_velocity(&s, &PhasePoint::new([0.3, -1.2, 2.0], 0.0), 1e-12).unwrap();
        assert!(v.iter().all(|c| c.abs() < 1e-15));
        let v = closed_form_velocity(&BaseModel::default(), &PhasePoint::new([0.3, -1.2, 2.0], 0.0), 1e-12).unwrap();
        assert!(v.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn closed_form_matches_generic_at_reference_point() {
        let p = PhasePoint::new([3.0, 2.0, 1.0], 1.0);
        let a = bohmian_velocity(&Superposition::base(), &p, 1e-12).unwrap();
        let b = closed_form_velocity(&BaseModel::default(), &p, 1e-12).unwrap();
        for k in 0..3 {
            assert_relative_eq!(a[k], b[k], epsilon = 1e-10);
        }
    }

    #[test]
    fn closed_form_is_tangent_to_sphere() {
        let p = PhasePoint::new([1.0, 1.0, 1.0], 2.0);
        let v = closed_form_velocity(&BaseModel::default(), &p, 1e-12).unwrap();
        assert!(linalg::dot(&v, &p.x).abs() < 1e-14);
    }

    #[test]
    fn a_matrix_is_antisymmetric() {
        let a = BaseModel::default().a_matrix(3.7);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a[i][j], -a[j][i]);
            }
        }
    }

    #[test]
    fn origin_is_near_node() {
        let err = bohmian_velocity(&Superposition::base(), &PhasePoint::new([0.0; 3], 1.0), 1e-12).unwrap_err();
        assert!(matches!(err, FlowError::NearNode { .. }));
    }

    #[test]
    fn jacobian_zero_at_t0() {
        let j = velocity_jacobian(&Superposition::base(), &PhasePoint::new([1.0, 2.0, -0.5], 0.0), 1e-12).unwrap();
        assert!(j.iter().flatten().all(|c| c.abs() < 1e-14));
    }

    #[test]
    fn sample_grid_ends_on_t1() {
        let g = sample_grid(1.0, 2.0, 0.01);
        assert_eq!(g.len(), 101);
        assert_eq!(*g.last().unwrap(), 2.0);
        assert_eq!(g[37], 1.0 + 37.0 * 0.01);
        let g = sample_grid(0.0, 1.005, 0.01);
        assert_eq!(g.len(), 102);
        assert_eq!(*g.last().unwrap(), 1.005);
    }

    #[test]
    fn degenerate_interval_yields_single_sample() {
        let tr = integrate(&Superposition::base(), [3.0, 2.0, 1.0], 1.0, 1.0, &IntegratorSettings::default()).unwrap();
        assert_eq!(tr.samples(), &[(1.0, [3.0, 2.0, 1.0])]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = Superposition::base();
        let set = IntegratorSettings::default();
        assert!(matches!(
            integrate(&s, [1.0, 1.0, 1.0], 2.0, 1.0, &set),
            Err(FlowError::InvalidInterval { .. })
        ));
        assert_eq!(
            integrate_with_deviation(&s, [1.0, 1.0, 1.0], [0.0; 3], 0.0, 1.0, 0.01, &set).unwrap_err(),
            FlowError::ZeroDeviation
        );
        let bad = IntegratorSettings {
            min_step: 1.0,
            max_step: 0.5,
            ..set
        };
        assert!(matches!(bad.validate(), Err(FlowError::InvalidSettings(_))));
    }
}
