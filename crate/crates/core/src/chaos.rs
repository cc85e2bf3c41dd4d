//! Stretching numbers, finite-time Lyapunov numbers and scattering events.

use alloc::vec::Vec;

use crate::flow::DeviationLog;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ChaosError {
    #[error("deviation norm at index {index} is not positive")]
    NonPositiveDeviation { index: usize },
    #[error("sampling interval must be positive and finite")]
    InvalidInterval,
    #[error("series of length {series} and distance of length {distance} are not aligned")]
    LengthMismatch { series: usize, distance: usize },
    #[error("invalid detector settings: {0}")]
    InvalidSettings(&'static str),
}

/// `a_k = ln(xi_k / xi_{k-1})` for `k = 1..=K`, stored at index `k - 1` and
/// stamped at `t0 + k tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct StretchingSeries {
    pub tau: f64,
    pub t0: f64,
    pub values: Vec<f64>,
}

impl StretchingSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time stamp of `values[i]`.
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + (i + 1) as f64 * self.tau
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.time(i)).collect()
    }
}

fn check_tau(tau: f64) -> Result<(), ChaosError> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(ChaosError::InvalidInterval)
    }
}

pub fn stretching_series(xi: &[f64], tau: f64, t0: f64) -> Result<StretchingSeries, ChaosError> {
    check_tau(tau)?;
    if let Some(index) = xi.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(ChaosError::NonPositiveDeviation { index });
    }
    Ok(StretchingSeries {
        tau,
        t0,
        values: xi.windows(2).map(|w| math::ln(w[1] / w[0])).collect(),
    })
}

/// Stretching numbers straight from a renormalized deviation log.
pub fn stretching_from_log(log: &DeviationLog) -> Result<StretchingSeries, ChaosError> {
    check_tau(log.tau)?;
    if let Some(index) = log.raw_norms().iter().position(|v| !(*v > 0.0)) {
        return Err(ChaosError::NonPositiveDeviation { index });
    }
    Ok(StretchingSeries {
        tau: log.tau,
        t0: log.t0,
        values: log.log_ratios(),
    })
}

pub fn cumulative_stretching(s: &StretchingSeries) -> Vec<f64> {
    s.values
        .iter()
        .scan(0.0, |acc, a| {
            *acc += a;
            Some(*acc)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcnSeries {
    pub times: Vec<f64>,
    pub chi: Vec<f64>,
}

impl LcnSeries {
    pub fn last(&self) -> Option<f64> {
        self.chi.last().copied()
    }
}

/// `chi_k = (a_1 + ... + a_k) / (k tau)`.
pub fn finite_time_lcn(s: &StretchingSeries) -> LcnSeries {
    let cum = cumulative_stretching(s);
    LcnSeries {
        times: s.times(),
        chi: cum
            .iter()
            .enumerate()
            .map(|(i, c)| c / ((i + 1) as f64 * s.tau))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringSettings {
    /// Length of the trailing background window, in time units.
    pub background_window: f64,
    pub jump_factor: f64,
    /// Gap between the window and the tested sample, as a fraction of the window.
    pub guard_fraction: f64,
    /// Lower bound on the background, as a rate per unit time.
    pub floor_rate: f64,
}

impl Default for ScatteringSettings {
    fn default() -> Self {
        Self {
            background_window: 1.0,
            jump_factor: 10.0,
            guard_fraction: 0.5,
            floor_rate: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringEvent {
    pub t_start: f64,
    pub t_end: f64,
    pub t_jump: f64,
    pub peak_a: f64,
    /// Background level the peak was compared against.
    pub background: f64,
    pub min_distance: f64,
    pub t_min_distance: f64,
    pub alignment: f64,
}

fn median(buf: &mut [f64]) -> f64 {
    buf.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = buf.len();
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        0.5 * (buf[n / 2 - 1] + buf[n / 2])
    }
}

/// Flags samples where `a_k` exceeds `jump_factor` times the median `|a|` of
/// a trailing window (separated from `k` by a guard gap), merges runs of
/// flagged samples into events, and attaches the distance minimum within one
/// window of each event. `distance[i]` must be sampled at `s.time(i)`.
pub fn detect_scattering(
    s: &StretchingSeries,
    distance: &[f64],
    settings: &ScatteringSettings,
) -> Result<Vec<ScatteringEvent>, ChaosError> {
    if distance.len() != s.len() {
        return Err(ChaosError::LengthMismatch {
            series: s.len(),
            distance: distance.len(),
        });
    }
    if !(settings.background_window > 0.0) || !(settings.jump_factor > 0.0) {
        return Err(ChaosError::InvalidSettings("window and factor must be positive"));
    }
    if !(settings.guard_fraction >= 0.0) || !(settings.floor_rate >= 0.0) {
        return Err(ChaosError::InvalidSettings("guard and floor must be non-negative"));
    }
    let w = (libm::round(settings.background_window / s.tau) as usize).max(1);
    let guard = libm::round(settings.guard_fraction * w as f64) as usize;
    let floor = settings.floor_rate * s.tau;
    let n = s.len();
    let mut flags: Vec<Option<f64>> = Vec::with_capacity(n);
    let mut buf = Vec::with_capacity(w);
    for k in 0..n {
        let a = s.values[k];
        let end = k.saturating_sub(guard);
        let start = end.saturating_sub(w);
        if end == start || !(a > 0.0) {
            flags.push(None);
            continue;
        }
        buf.clear();
        buf.extend(s.values[start..end].iter().map(|v| math::abs(*v)));
        let background = median(&mut buf).max(floor);
        flags.push((a > settings.jump_factor * background).then_some(background));
    }
    let mut events = Vec::new();
    let mut k = 0;
    while k < n {
        if flags[k].is_none() {
            k += 1;
            continue;
        }
        let first = k;
        while k < n && flags[k].is_some() {
            k += 1;
        }
        let last = k - 1;
        let peak = (first..=last)
            .max_by(|&i, &j| s.values[i].total_cmp(&s.values[j]).then(j.cmp(&i)))
            .unwrap_or(first);
        let lo = first.saturating_sub(w);
        let hi = (last + w).min(n - 1);
        let (imin, dmin) = (lo..=hi)
            .map(|i| (i, distance[i]))
            .fold((lo, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        let t_jump = s.time(peak);
        let t_min = s.time(imin);
        events.push(ScatteringEvent {
            t_start: s.time(first),
            t_end: s.time(last),
            t_jump,
            peak_a: s.values[peak],
            background: flags[peak].unwrap_or(floor),
            min_distance: dmin,
            t_min_distance: t_min,
            alignment: math::abs(t_jump - t_min),
        });
    }
    Ok(events)
}

/// Events whose jump time lies in `[t_from, t_to]`.
pub fn events_in(events: &[ScatteringEvent], t_from: f64, t_to: f64) -> Vec<ScatteringEvent> {
    events
        .iter()
        .filter(|e| e.t_jump >= t_from && e.t_jump <= t_to)
        .copied()
        .collect()
}
