//! Log-log power-law fits and radial excursion of trajectories.

use crate::flow::Trajectory;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("point {0} has a non-positive or non-finite coordinate")]
    NonPositive(usize),
    #[error("all abscissae are equal")]
    DegenerateFit,
}

/// `y = c x^p` fitted by least squares on `(ln x, ln y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub prefactor: f64,
    /// Sum of squared residuals in log space.
    pub residual: f64,
}

impl PowerLawFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.prefactor * math::powf(x, self.exponent)
    }
}

pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit, FitError> {
    if points.len() < 2 {
        return Err(FitError::TooFewPoints(points.len()));
    }
    if let Some(i) = points
        .iter()
        .position(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(FitError::NonPositive(i));
    }
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + math::ln(*x), b + math::ln(*y)));
    let (mx, my) = (mx / n, my / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in points {
        let (dx, dy) = (math::ln(*x) - mx, math::ln(*y) - my);
        sxx += dx * dx;
        sxy += dx * dy;
    }
    if !(sxx > 1e-300) {
        return Err(FitError::DegenerateFit);
    }
    let p = sxy / sxx;
    let intercept = my - p * mx;
    let residual = points
        .iter()
        .map(|(x, y)| {
            let r = math::ln(*y) - (intercept + p * math::ln(*x));
            r * r
        })
        .sum();
    Ok(PowerLawFit {
        exponent: p,
        prefactor: math::exp(intercept),
        residual,
    })
}

/// `max R - min R` over the samples with `t` in `[t_from, t_to]`; 0 when none.
pub fn delta_r_max_window(traj: &Trajectory, t_from: f64, t_to: f64) -> f64 {
    let (lo, hi) = traj
        .times()
        .zip(traj.radius_series())
        .filter(|(t, _)| *t >= t_from && *t <= t_to)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, r)| (lo.min(*r), hi.max(*r)));
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// `max R - min R` over the whole trajectory.
pub fn delta_r_max(traj: &Trajectory) -> f64 {
    delta_r_max_window(traj, f64::NEG_INFINITY, f64::INFINITY)
}
