//! Nodal lines of the base state, the comoving frame attached to a nodal
//! point, the reduced planar flow around it, X-points and their invariant
//! manifolds, and the layered nodal/X-point structure.

use alloc::vec::Vec;

use crate::flow::{BaseModel, PhasePoint};
use crate::linalg::{self, Mat3, Vec3};
use crate::math;
use crate::ode::{DenseStep, Dopri5, OdeError, OdeSystem, StepControl};
use crate::oscillator::Superposition;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum NodalError {
    #[error("nodal direction is undefined at t = {t}")]
    DegenerateTime { t: f64 },
    #[error("radius must be positive and finite, got {r}")]
    InvalidRadius { r: f64 },
    #[error("Newton iteration did not converge (residual {residual:e} after {iterations} iterations)")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("X-point is degenerate at t = {t}, R = {r}")]
    DegenerateXPoint { t: f64, r: f64 },
    #[error("point ({u}, {v}) is at the node")]
    NearNode { u: f64, v: f64 },
    #[error("invalid scan interval")]
    InvalidInterval,
}

/// Below this norm of the raw direction vector the nodal line is undefined.
pub const DEGENERATE_DIRECTION: f64 = 1e-12;

/// Reject threshold on the planar quadratic form `G(u, v)`.
pub const PLANAR_NODE_GUARD: f64 = 1e-24;

/// Unnormalized direction `d(t)` and its first two time derivatives.
fn direction_jet(model: &BaseModel, t: f64) -> [Vec3; 3] {
    let w = model.omega();
    let pairs = [(2, 1), (0, 2), (1, 0)];
    let mut d = [[0.0; 3]; 3];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let f = w[i] - w[j];
        let inv = 1.0 / math::sqrt(w[k]);
        let (s, c) = (math::sin(f * t), math::cos(f * t));
        d[0][k] = s * inv;
        d[1][k] = f * c * inv;
        d[2][k] = -f * f * s * inv;
    }
    d
}

/// Unit vector along the nodal line. The raw direction never vanishes away
/// from degenerate times, so the returned vector is continuous in `t`.
pub fn nodal_direction(model: &BaseModel, t: f64) -> Result<Vec3, NodalError> {
    let [d, _, _] = direction_jet(model, t);
    let s = linalg::norm(&d);
    if !(s > DEGENERATE_DIRECTION) {
        return Err(NodalError::DegenerateTime { t });
    }
    Ok(linalg::scale(&d, 1.0 / s))
}

/// `(n, n', n'')` for the unit direction.
fn unit_direction_jet(model: &BaseModel, t: f64) -> Result<([Vec3; 3], f64), NodalError> {
    let [d, d1, d2] = direction_jet(model, t);
    let s = linalg::norm(&d);
    if !(s > DEGENERATE_DIRECTION) {
        return Err(NodalError::DegenerateTime { t });
    }
    let n = linalg::scale(&d, 1.0 / s);
    let s1 = linalg::dot(&n, &d1);
    let n1: Vec3 = core::array::from_fn(|k| (d1[k] - n[k] * s1) / s);
    let s2 = linalg::dot(&n1, &d1) + linalg::dot(&n, &d2);
    let n2: Vec3 = core::array::from_fn(|k| (d2[k] - 2.0 * n1[k] * s1 - n[k] * s2) / s);
    Ok(([n, n1, n2], s))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodalPoint {
    pub t: f64,
    pub position: Vec3,
    /// Common ratio `x_k / d_k` of the line equations.
    pub c: f64,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

fn check_radius(r: f64) -> Result<(), NodalError> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(NodalError::InvalidRadius { r })
    }
}

pub fn nodal_point(model: &BaseModel, t: f64, r: f64) -> Result<NodalPoint, NodalError> {
    check_radius(r)?;
    let ([n, n1, n2], s) = unit_direction_jet(model, t)?;
    Ok(NodalPoint {
        t,
        position: linalg::scale(&n, r),
        c: r / s,
        velocity: linalg::scale(&n1, r),
        acceleration: linalg::scale(&n2, r),
    })
}

/// Velocity and acceleration of the nodal point on the sphere of radius `r`.
pub fn nodal_kinematics(model: &BaseModel, t: f64, r: f64) -> Result<(Vec3, Vec3), NodalError> {
    let p = nodal_point(model, t, r)?;
    Ok((p.velocity, p.acceleration))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonSettings {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        Self {
            max_iterations: 60,
            tolerance: 1e-13,
        }
    }
}

fn spherical(r: f64, th: f64, ph: f64) -> Vec3 {
    let (st, ct) = (math::sin(th), math::cos(th));
    let (sp, cp) = (math::sin(ph), math::cos(ph));
    [r * st * cp, r * st * sp, r * ct]
}

/// Damped Newton for `Re Q = Im Q = 0` on the sphere `|x| = |guess|`,
/// in spherical angles. `Q` is the envelope-free factor of `Psi`, so the
/// residual bounds `|Psi|` from above.
pub fn nodal_point_numeric(
    state: &Superposition,
    t: f64,
    guess: Vec3,
    settings: &NewtonSettings,
) -> Result<Vec3, NodalError> {
    let r = linalg::norm(&guess);
    check_radius(r)?;
    let mut th = math::acos((guess[2] / r).clamp(-1.0, 1.0));
    let mut ph = math::atan2(guess[1], guess[0]);
    let residual = |th: f64, ph: f64| state.polynomial(&spherical(r, th, ph), t).value.norm();
    let mut res = residual(th, ph);
    for it in 0..settings.max_iterations {
        if res < settings.tolerance {
            return Ok(spherical(r, th, ph));
        }
        let x = spherical(r, th, ph);
        let q = state.polynomial(&x, t);
        let (st, ct) = (math::sin(th), math::cos(th));
        let (sp, cp) = (math::sin(ph), math::cos(ph));
        let dth = [r * ct * cp, r * ct * sp, -r * st];
        let dph = [-r * st * sp, r * st * cp, 0.0];
        let qt = (0..3).fold(q.value * 0.0, |acc, k| acc + q.gradient[k] * dth[k]);
        let qp = (0..3).fold(q.value * 0.0, |acc, k| acc + q.gradient[k] * dph[k]);
        let det = qt.re * qp.im - qp.re * qt.im;
        if !(det.abs() > 1e-300) {
            return Err(NodalError::NoConvergence {
                iterations: it,
                residual: res,
            });
        }
        let step_th = -(qp.im * q.value.re - qp.re * q.value.im) / det;
        let step_ph = -(-qt.im * q.value.re + qt.re * q.value.im) / det;
        let mut lambda = 1.0;
        loop {
            let (nt, np) = (th + lambda * step_th, ph + lambda * step_ph);
            let nr = residual(nt, np);
            if nr < res || lambda < 1e-6 {
                th = nt;
                ph = np;
                res = nr;
                break;
            }
            lambda *= 0.5;
        }
    }
    if res < settings.tolerance {
        return Ok(spherical(r, th, ph));
    }
    Err(NodalError::NoConvergence {
        iterations: settings.max_iterations,
        residual: res,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComovingFrame {
    pub theta: f64,
    pub phi: f64,
    /// Rows are the primed axes expressed in lab coordinates.
    pub s: Mat3,
}

impl ComovingFrame {
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = (math::sin(theta), math::cos(theta));
        let (sp, cp) = (math::sin(phi), math::cos(phi));
        Self {
            theta,
            phi,
            s: [[sp, -cp, 0.0], [ct * cp, ct * sp, -st], [st * cp, st * sp, ct]],
        }
    }

    /// Lab vector to primed components.
    pub fn to_frame(&self, x: &Vec3) -> Vec3 {
        linalg::mat_vec(&self.s, x)
    }

    /// Primed components to lab vector.
    pub fn to_lab(&self, u: &Vec3) -> Vec3 {
        linalg::mat_t_vec(&self.s, u)
    }
}

/// Frame whose third axis is the nodal direction. At the poles `phi` is
/// taken from `previous_phi` (or 0).
pub fn comoving_frame_carry(model: &BaseModel, t: f64, previous_phi: Option<f64>) -> Result<ComovingFrame, NodalError> {
    let n = nodal_direction(model, t)?;
    let theta = math::acos(n[2].clamp(-1.0, 1.0));
    let sin_theta = math::hypot(n[0], n[1]);
    let phi = if sin_theta < 1e-14 {
        previous_phi.unwrap_or(0.0)
    } else {
        let p = math::atan2(n[1], n[0]);
        if p < 0.0 {
            p + math::TAU
        } else {
            p
        }
    };
    Ok(ComovingFrame::from_angles(theta, phi))
}

pub fn comoving_frame(model: &BaseModel, t: f64) -> Result<ComovingFrame, NodalError> {
    comoving_frame_carry(model, t, None)
}

/// Coefficients of the reduced flow
/// `u' = (B/G) v - V_u`, `v' = -(B/G) u - V_v`, `G = Phi1 u^2 + Phi2 u v + Phi3 v^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarFlow {
    pub t: f64,
    pub r: f64,
    pub b: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
    pub vu: f64,
    pub vv: f64,
}

impl PlanarFlow {
    pub fn g(&self, u: f64, v: f64) -> f64 {
        self.phi1 * u * u + self.phi2 * u * v + self.phi3 * v * v
    }

    /// Same flow with the nodal drift removed.
    pub fn without_drift(&self) -> Self {
        Self {
            vu: 0.0,
            vv: 0.0,
            ..*self
        }
    }
}

pub fn planar_flow(model: &BaseModel, t: f64, r: f64) -> Result<PlanarFlow, NodalError> {
    let frame = comoving_frame(model, t)?;
    planar_flow_in(model, t, r, &frame)
}

/// Builds the planar flow in a given frame (used for continuation).
pub fn planar_flow_in(model: &BaseModel, t: f64, r: f64, frame: &ComovingFrame) -> Result<PlanarFlow, NodalError> {
    let node = nodal_point(model, t, r)?;
    let [w1, w2, w3] = model.omega();
    let (th, ph) = (frame.theta, frame.phi);
    let (st, ct, s2t) = (math::sin(th), math::cos(th), math::sin(2.0 * th));
    let (sp, cp, s2p) = (math::sin(ph), math::cos(ph), math::sin(2.0 * ph));
    let (r12, r13, r23) = (math::sqrt(w1 * w2), math::sqrt(w1 * w3), math::sqrt(w2 * w3));
    let (c12, c13, c23) = (math::cos((w1 - w2) * t), math::cos((w1 - w3) * t), math::cos((w2 - w3) * t));
    let (s12, s13, s23) = (math::sin((w1 - w2) * t), math::sin((w1 - w3) * t), math::sin((w2 - w3) * t));

    let phi1 = -r12 * c12 * s2p + w1 * sp * sp + w2 * cp * cp;
    let phi2 = 2.0 * r23 * c23 * cp * st - 2.0 * r13 * c13 * sp * st
        + 2.0 * r12 * c12 * (-ct * cp * cp + ct * sp * sp)
        + ct * s2p * (w1 - w2);
    let phi3 = -r23 * c23 * s2t * sp - r13 * c13 * s2t * cp
        + r12 * c12 * ct * ct * s2p
        + w1 * ct * ct * cp * cp
        + w2 * ct * ct * sp * sp
        + w3 * st * st;
    let b = -ct * r12 * s12 + st * sp * r13 * s13 - st * cp * r23 * s23;
    let xd = node.velocity;
    let vu = sp * xd[0] - cp * xd[1];
    let vv = ct * cp * xd[0] + ct * sp * xd[1] - st * xd[2];
    Ok(PlanarFlow {
        t,
        r,
        b,
        phi1,
        phi2,
        phi3,
        vu,
        vv,
    })
}

/// `(F1, F2)` of the reduced flow at `(u, v)`.
pub fn planar_velocity(pf: &PlanarFlow, u: f64, v: f64) -> Result<(f64, f64), NodalError> {
    let g = pf.g(u, v);
    if !(g > PLANAR_NODE_GUARD) {
        return Err(NodalError::NearNode { u, v });
    }
    let k = pf.b / g;
    Ok((k * v - pf.vu, -k * u - pf.vv))
}

/// Full comoving-frame field `(1/G) S A S^T u' - S x_nod'` at primed point `u`,
/// without the frame-rotation terms dropped by the reduction.
pub fn frame_field(model: &BaseModel, t: f64, r: f64, u: &Vec3) -> Result<Vec3, NodalError> {
    let frame = comoving_frame(model, t)?;
    let node = nodal_point(model, t, r)?;
    let x = linalg::add(&node.position, &frame.to_lab(u));
    let g = model.g(&x, t);
    if !(g > PLANAR_NODE_GUARD) {
        return Err(NodalError::NearNode { u: u[0], v: u[1] });
    }
    let ax = linalg::mat_vec(&model.a_matrix(t), &x);
    let rot = frame.to_frame(&linalg::scale(&ax, 1.0 / g));
    let drift = frame.to_frame(&node.velocity);
    Ok(linalg::sub(&rot, &drift))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XPoint {
    pub u: f64,
    pub v: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// `lambda1 > 0 > lambda2` for a saddle.
    pub lambda1: f64,
    pub lambda2: f64,
    /// Eigenvector slopes `dv/du` for `lambda1`, `lambda2`.
    pub slopes: [f64; 2],
}

impl XPoint {
    pub fn is_saddle(&self) -> bool {
        self.lambda1 * self.lambda2 < 0.0
    }

    /// Unit eigenvector for `lambda1` (index 0) or `lambda2` (index 1),
    /// oriented with nonnegative `u` component.
    pub fn eigenvector(&self, index: usize) -> [f64; 2] {
        let lambda = if index == 0 { self.lambda1 } else { self.lambda2 };
        let (du, dv) = if self.b.abs() >= (lambda - self.d).abs() {
            (self.b, lambda - self.a)
        } else {
            (lambda - self.d, self.c)
        };
        let n = math::hypot(du, dv);
        let (du, dv) = (du / n, dv / n);
        if du < 0.0 || (du == 0.0 && dv < 0.0) {
            [-du, -dv]
        } else {
            [du, dv]
        }
    }
}

/// X-point from the closed-form elimination, with the alternate elimination
/// through `V_u` when `|V_u| > |V_v|`.
pub fn xpoint_of(pf: &PlanarFlow) -> Result<XPoint, NodalError> {
    let degenerate = NodalError::DegenerateXPoint { t: pf.t, r: pf.r };
    let scale = pf.vu.abs().max(pf.vv.abs());
    if !(scale > 1e-14 * pf.r.max(1.0)) || pf.b == 0.0 {
        return Err(degenerate);
    }
    let (u, v) = if pf.vv.abs() >= pf.vu.abs() {
        let r = pf.vu / pf.vv;
        let q = pf.phi1 - r * pf.phi2 + r * r * pf.phi3;
        if !(q.abs() > 1e-300) {
            return Err(degenerate);
        }
        let u = -pf.b / (pf.vv * q);
        (u, -r * u)
    } else {
        let r = pf.vv / pf.vu;
        let q = pf.phi1 * r * r - pf.phi2 * r + pf.phi3;
        if !(q.abs() > 1e-300) {
            return Err(degenerate);
        }
        let v = pf.b / (pf.vu * q);
        (-r * v, v)
    };
    let g = pf.g(u, v);
    if !(g > PLANAR_NODE_GUARD) || !u.is_finite() || !v.is_finite() {
        return Err(degenerate);
    }
    let gu = 2.0 * pf.phi1 * u + pf.phi2 * v;
    let gv = pf.phi2 * u + 2.0 * pf.phi3 * v;
    let (b_, g2) = (pf.b, g * g);
    let a = -b_ * v * gu / g2;
    let b = b_ / g - b_ * v * gv / g2;
    let c = -b_ / g + b_ * u * gu / g2;
    let d = b_ * u * gv / g2;
    let tr = a + d;
    let det = a * d - b * c;
    let disc = tr * tr - 4.0 * det;
    if !(disc >= 0.0) {
        return Err(degenerate);
    }
    let sq = math::sqrt(disc);
    let lambda1 = 0.5 * (tr + sq);
    let lambda2 = 0.5 * (tr - sq);
    let slope = |l: f64| {
        if b.abs() > 1e-300 {
            (l - a) / b
        } else {
            c / (l - d)
        }
    };
    Ok(XPoint {
        u,
        v,
        a,
        b,
        c,
        d,
        lambda1,
        lambda2,
        slopes: [slope(lambda1), slope(lambda2)],
    })
}

pub fn xpoint(model: &BaseModel, t: f64, r: f64) -> Result<XPoint, NodalError> {
    xpoint_of(&planar_flow(model, t, r)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    StablePlus,
    StableMinus,
    UnstablePlus,
    UnstableMinus,
}

impl Branch {
    pub const ALL: [Branch; 4] = [Branch::StablePlus, Branch::StableMinus, Branch::UnstablePlus, Branch::UnstableMinus];

    pub fn is_stable(self) -> bool {
        matches!(self, Branch::StablePlus | Branch::StableMinus)
    }

    pub fn sign(self) -> f64 {
        match self {
            Branch::StablePlus | Branch::UnstablePlus => 1.0,
            _ => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::StablePlus => "stable+",
            Branch::StableMinus => "stable-",
            Branch::UnstablePlus => "unstable+",
            Branch::UnstableMinus => "unstable-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Left the box `|u|, |v| <= box_factor * R`.
    LeftDomain,
    ArcLength,
    TurnLimit,
    /// Came within the node exclusion radius.
    NearNode,
    StepLimit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldSettings {
    pub seed: f64,
    pub box_factor: f64,
    /// Arc-length cap as a multiple of `R`.
    pub arc_factor: f64,
    pub max_turns: f64,
    /// Exclusion radius around the node as a fraction of the X-point distance.
    pub node_fraction: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Dense points recorded per accepted step.
    pub points_per_step: usize,
}

impl Default for ManifoldSettings {
    fn default() -> Self {
        Self {
            seed: 1e-5,
            box_factor: 2.0,
            arc_factor: 40.0,
            max_turns: 40.0,
            node_fraction: 1e-4,
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            max_steps: 200_000,
            points_per_step: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldCurve {
    pub branch: Branch,
    pub frozen_t: f64,
    /// `(s, u, v)`; `s` is the fictitious time of the frozen flow.
    pub points: Vec<(f64, f64, f64)>,
    /// `(s, distance to node)` at successive crossings of the ray from the
    /// node pointing away from the X-point.
    pub crossings: Vec<(f64, f64)>,
    /// Net winding around the node, in turns.
    pub turns: f64,
    pub termination: Termination,
}

impl ManifoldCurve {
    /// True when the curve winds into the node: at least two ray crossings
    /// with strictly decreasing node distance.
    pub fn spirals_into_node(&self) -> bool {
        self.crossings.len() >= 2 && self.crossings.windows(2).all(|w| w[1].1 < w[0].1)
    }

    pub fn arc_length(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| math::hypot(w[1].1 - w[0].1, w[1].2 - w[0].2))
            .sum()
    }
}

/// Frozen flow multiplied through by `G`, with `s` carried as a third
/// component: `(u, v, s)' = dir * (B v - V_u G, -B u - V_v G, G)`.
/// Nonsingular at the node and orientation-preserving elsewhere.
struct FrozenFlow {
    pf: PlanarFlow,
    dir: f64,
}

impl OdeSystem<3> for FrozenFlow {
    type Error = ();

    fn rhs(&self, _t: f64, y: &[f64; 3]) -> Result<[f64; 3], ()> {
        let (u, v) = (y[0], y[1]);
        let g = self.pf.g(u, v);
        Ok([
            self.dir * (self.pf.b * v - self.pf.vu * g),
            self.dir * (-self.pf.b * u - self.pf.vv * g),
            self.dir * g,
        ])
    }
}

fn cross2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Traces one branch of the frozen flow from a seed displacement along its
/// eigenvector. Unstable branches run forward in `s`, stable branches backward.
pub fn manifold_trace_of(
    pf: &PlanarFlow,
    xp: &XPoint,
    branch: Branch,
    settings: &ManifoldSettings,
) -> ManifoldCurve {
    let e = xp.eigenvector(if branch.is_stable() { 1 } else { 0 });
    let dir = if branch.is_stable() { -1.0 } else { 1.0 };
    let start = [xp.u + branch.sign() * settings.seed * e[0], xp.v + branch.sign() * settings.seed * e[1]];
    let mut curve = trace_frozen(pf, xp, start, dir, settings);
    curve.branch = branch;
    curve
}

/// Integrates the frozen flow from `start` in direction `dir` (sign of `ds`).
pub fn trace_frozen(pf: &PlanarFlow, xp: &XPoint, start: [f64; 2], dir: f64, settings: &ManifoldSettings) -> ManifoldCurve {
    let sys = FrozenFlow { pf: *pf, dir };
    let xdist = math::hypot(xp.u, xp.v);
    let period = math::TAU / pf.b.abs();
    let ctl = StepControl {
        rel_tol: settings.rel_tol,
        abs_tol: settings.abs_tol * xdist.max(1e-300),
        max_step: 0.02 * period,
        min_step: 1e-18 * period,
        max_steps: settings.max_steps,
    };
    let ray = [-xp.u / xdist, -xp.v / xdist];
    let bound = settings.box_factor * pf.r;
    let arc_cap = settings.arc_factor * pf.r;
    let node_radius = settings.node_fraction * xdist;
    let mut curve = ManifoldCurve {
        branch: Branch::UnstablePlus,
        frozen_t: pf.t,
        points: Vec::new(),
        crossings: Vec::new(),
        turns: 0.0,
        termination: Termination::StepLimit,
    };
    curve.points.push((0.0, start[0], start[1]));
    let y0 = [start[0], start[1], 0.0];
    let mut stepper = match Dopri5::new(&sys, ctl, 0.0, y0, 1.0) {
        Ok(s) => s,
        Err(_) => return curve,
    };
    let mut angle = math::atan2(start[1], start[0]);
    let mut winding = 0.0;
    let mut arc = 0.0;
    let mut last = [start[0], start[1]];
    loop {
        let step: DenseStep<3> = match stepper.step(f64::INFINITY) {
            Ok(s) => s,
            Err(OdeError::TooManySteps { .. }) => {
                curve.termination = Termination::StepLimit;
                return curve;
            }
            Err(_) => {
                curve.termination = Termination::StepLimit;
                return curve;
            }
        };
        let m = settings.points_per_step.max(1);
        let mut prev_sigma = step.t_old;
        let mut prev = step.eval(step.t_old);
        for j in 1..=m {
            let sigma = step.t_old + (step.t_new - step.t_old) * j as f64 / m as f64;
            let y = step.eval(sigma);
            let p = [y[0], y[1]];
            // ray crossing: side of the ray changes while in front of the node
            let c0 = cross2(ray, [prev[0], prev[1]]);
            let c1 = cross2(ray, p);
            if c0 * c1 < 0.0 && ray[0] * (p[0] + prev[0]) + ray[1] * (p[1] + prev[1]) > 0.0 {
                let (mut lo, mut hi) = (prev_sigma, sigma);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    let ym = step.eval(mid);
                    if cross2(ray, [ym[0], ym[1]]) * c0 > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let yc = step.eval(0.5 * (lo + hi));
                curve.crossings.push((yc[2], math::hypot(yc[0], yc[1])));
            }
            let a = math::atan2(p[1], p[0]);
            let mut da = a - angle;
            if da > math::PI {
                da -= math::TAU;
            } else if da < -math::PI {
                da += math::TAU;
            }
            winding += da;
            angle = a;
            arc += math::hypot(p[0] - last[0], p[1] - last[1]);
            last = p;
            curve.points.push((y[2], p[0], p[1]));
            prev = y;
            prev_sigma = sigma;

            curve.turns = math::abs(winding) / math::TAU;
            let termination = if p[0].abs() > bound || p[1].abs() > bound {
                Some(Termination::LeftDomain)
            } else if math::hypot(p[0], p[1]) < node_radius {
                Some(Termination::NearNode)
            } else if arc > arc_cap {
                Some(Termination::ArcLength)
            } else if curve.turns > settings.max_turns {
                Some(Termination::TurnLimit)
            } else {
                None
            };
            if let Some(t) = termination {
                curve.termination = t;
                return curve;
            }
        }
    }
}

pub fn manifold_trace(
    model: &BaseModel,
    t: f64,
    r: f64,
    branch: Branch,
    settings: &ManifoldSettings,
) -> Result<ManifoldCurve, NodalError> {
    let pf = planar_flow(model, t, r)?;
    let xp = xpoint_of(&pf)?;
    Ok(manifold_trace_of(&pf, &xp, branch, settings))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopfLabel {
    /// A stable branch winds into the node (the node repels).
    Stable,
    /// An unstable branch winds into the node (the node attracts).
    Unstable,
    Ambiguous,
}

impl HopfLabel {
    pub fn name(self) -> &'static str {
        match self {
            HopfLabel::Stable => "stable",
            HopfLabel::Unstable => "unstable",
            HopfLabel::Ambiguous => "ambiguous",
        }
    }
}

/// Labels the complex at `(t, r)` by which kind of manifold branch spirals
/// into the node.
pub fn classify_complex(model: &BaseModel, t: f64, r: f64, settings: &ManifoldSettings) -> HopfLabel {
    let Ok(pf) = planar_flow(model, t, r) else {
        return HopfLabel::Ambiguous;
    };
    let Ok(xp) = xpoint_of(&pf) else {
        return HopfLabel::Ambiguous;
    };
    let mut stable = false;
    let mut unstable = false;
    for b in Branch::ALL {
        if manifold_trace_of(&pf, &xp, b, settings).spirals_into_node() {
            if b.is_stable() {
                stable = true;
            } else {
                unstable = true;
            }
        }
    }
    match (stable, unstable) {
        (true, false) => HopfLabel::Stable,
        (false, true) => HopfLabel::Unstable,
        _ => HopfLabel::Ambiguous,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopfTransition {
    pub t_star: f64,
    pub before: HopfLabel,
    pub after: HopfLabel,
}

/// Samples the label every `dt` over `[t0, t1]` and bisects each change of
/// unambiguous label down to `tolerance`.
pub fn hopf_scan(
    model: &BaseModel,
    r: f64,
    t0: f64,
    t1: f64,
    dt: f64,
    tolerance: f64,
    settings: &ManifoldSettings,
) -> Result<Vec<HopfTransition>, NodalError> {
    check_radius(r)?;
    if !(t1 > t0) || !(dt > 0.0) || !(tolerance > 0.0) {
        return Err(NodalError::InvalidInterval);
    }
    let n = libm::ceil((t1 - t0) / dt - 1e-9) as usize;
    let samples: Vec<(f64, HopfLabel)> = (0..=n)
        .map(|k| {
            let t = if k == n { t1 } else { t0 + k as f64 * dt };
            (t, classify_complex(model, t, r, settings))
        })
        .filter(|(_, l)| *l != HopfLabel::Ambiguous)
        .collect();
    let mut out = Vec::new();
    for w in samples.windows(2) {
        let ((mut lo, before), (mut hi, after)) = (w[0], w[1]);
        if before == after {
            continue;
        }
        while hi - lo > tolerance {
            let mid = 0.5 * (lo + hi);
            let probes = [mid, mid - 0.25 * (hi - lo), mid + 0.25 * (hi - lo)];
            let found = probes
                .iter()
                .map(|&tp| (tp, classify_complex(model, tp, r, settings)))
                .find(|(_, l)| *l != HopfLabel::Ambiguous);
            match found {
                Some((tp, l)) if l == before => lo = tp,
                Some((tp, _)) => hi = tp,
                None => break,
            }
        }
        out.push(HopfTransition {
            t_star: 0.5 * (lo + hi),
            before,
            after,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureLayer {
    pub r: f64,
    pub node: NodalPoint,
    pub frame: ComovingFrame,
    pub planar: PlanarFlow,
    pub xpoint: Result<XPoint, NodalError>,
    pub manifolds: Vec<ManifoldCurve>,
}

impl StructureLayer {
    /// Lab position of the X-point, `x_nod + S^T (u_X, v_X, 0)`.
    pub fn xpoint_lab(&self) -> Option<Vec3> {
        self.xpoint
            .as_ref()
            .ok()
            .map(|x| linalg::add(&self.node.position, &self.frame.to_lab(&[x.u, x.v, 0.0])))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodalXStructure {
    pub t: f64,
    pub layers: Vec<StructureLayer>,
}

impl NodalXStructure {
    /// X-points of all non-degenerate layers in lab coordinates.
    pub fn x_line(&self) -> Vec<(f64, Vec3)> {
        self.layers.iter().filter_map(|l| l.xpoint_lab().map(|x| (l.r, x))).collect()
    }
}

fn layer(model: &BaseModel, t: f64, r: f64, frame: &ComovingFrame) -> Result<StructureLayer, NodalError> {
    let node = nodal_point(model, t, r)?;
    let planar = planar_flow_in(model, t, r, frame)?;
    Ok(StructureLayer {
        r,
        node,
        frame: *frame,
        planar,
        xpoint: xpoint_of(&planar),
        manifolds: Vec::new(),
    })
}

/// Nodal point and X-point on every sphere of `r_grid` at time `t`.
/// Degenerate X-points are kept per layer.
pub fn foliation(model: &BaseModel, t: f64, r_grid: &[f64]) -> Result<NodalXStructure, NodalError> {
    let frame = comoving_frame(model, t)?;
    let layers = r_grid
        .iter()
        .map(|&r| layer(model, t, r, &frame))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(NodalXStructure { t, layers })
}

/// Like [`foliation`], also tracing the four manifold branches per layer.
pub fn foliation_with_manifolds(
    model: &BaseModel,
    t: f64,
    r_grid: &[f64],
    settings: &ManifoldSettings,
) -> Result<NodalXStructure, NodalError> {
    let mut s = foliation(model, t, r_grid)?;
    for l in &mut s.layers {
        if let Ok(xp) = l.xpoint {
            l.manifolds = Branch::ALL
                .iter()
                .map(|&b| manifold_trace_of(&l.planar, &xp, b, settings))
                .collect();
        }
    }
    Ok(s)
}

/// The flow is odd under `x -> -x`, so the complex on the opposite half of
/// the nodal line is the point reflection of this one.
fn nearest_of_pair(x: &Vec3, xl: &Vec3) -> f64 {
    linalg::distance(x, xl).min(linalg::distance(x, &linalg::scale(xl, -1.0)))
}

/// Minimum distance from `x` to the X-points of the layers in `r_grid`,
/// over both halves of the nodal line.
pub fn distance_to_structure(model: &BaseModel, x: &Vec3, t: f64, r_grid: &[f64]) -> Result<f64, NodalError> {
    let s = foliation(model, t, r_grid)?;
    Ok(s
        .x_line()
        .iter()
        .map(|(_, xl)| nearest_of_pair(x, xl))
        .fold(f64::INFINITY, f64::min))
}

/// Distance from `x` to the X-point on its own sphere `R = |x|`.
pub fn distance_to_layer(model: &BaseModel, x: &Vec3, t: f64) -> Result<f64, NodalError> {
    let r = linalg::norm(x);
    let frame = comoving_frame(model, t)?;
    let l = layer(model, t, r, &frame)?;
    match l.xpoint_lab() {
        Some(xl) => Ok(nearest_of_pair(x, &xl)),
        None => Err(NodalError::DegenerateXPoint { t, r }),
    }
}

/// Distance from `x` to the nearer of the two nodal points on its sphere.
pub fn distance_to_node(model: &BaseModel, x: &Vec3, t: f64) -> Result<f64, NodalError> {
    let p = nodal_point(model, t, linalg::norm(x))?;
    Ok(nearest_of_pair(x, &p.position))
}

/// Lab point to comoving coordinates relative to the node at radius `r`.
pub fn to_comoving(model: &BaseModel, p: &PhasePoint, r: f64) -> Result<Vec3, NodalError> {
    let frame = comoving_frame(model, p.t)?;
    let node = nodal_point(model, p.t, r)?;
    Ok(frame.to_frame(&linalg::sub(&p.x, &node.position)))
}
