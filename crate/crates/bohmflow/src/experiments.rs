//! The ten pipelines behind `bohmflow run`.
//!
//! Independent trajectories and layers run on the rayon pool; results are
//! collected in input order before anything is written.

use bohmflow_core::chaos::{
    cumulative_stretching, detect_scattering, events_in, finite_time_lcn, stretching_from_log, LcnSeries,
    ScatteringEvent, ScatteringSettings, StretchingSeries,
};
use bohmflow_core::flow::{integrate, integrate_with_deviation, DeviationLog, IntegratorSettings};
use bohmflow_core::linalg::{self, Vec3};
use bohmflow_core::nodal::{
    comoving_frame, distance_to_layer, distance_to_node, foliation, hopf_scan, manifold_trace_of,
    nodal_point, nodal_point_numeric, planar_flow, planar_velocity, xpoint_of, Branch, HopfLabel,
    ManifoldCurve, ManifoldSettings, NewtonSettings, NodalXStructure, XPoint,
};
use bohmflow_core::nodal::classify_complex;
use bohmflow_core::powerlaw::{delta_r_max, fit_power_law};
use bohmflow_core::{BaseModel, Superposition, Trajectory};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig};
use crate::output::{json_num, num, Csv, OutputDir};
use crate::statefile::load_state;
use crate::svg::Plot;
use crate::RunError;

pub(crate) fn dispatch(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), RunError> {
    match cfg.experiment {
        Experiment::NodalTrajectory => nodal_trajectory(cfg, out),
        Experiment::NodalKinematics => nodal_kinematics(cfg, out),
        Experiment::ComplexPortrait => complex_portrait(cfg, out),
        Experiment::HopfTransition => hopf_transition(cfg, out),
        Experiment::TrajectoryVsNode => trajectory_vs_node(cfg, out),
        Experiment::TrajectoryFamilies => trajectory_families(cfg, out),
        Experiment::Scattering => scattering(cfg, out),
        Experiment::Foliation => foliation_run(cfg, out),
        Experiment::PerturbedDiffusion => perturbed_diffusion(cfg, out),
        Experiment::PowerLaw => power_law(cfg, out),
    }
}

/// `t0, t0 + dt, ...` ending exactly at `t1`.
pub fn time_grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let n = ((t1 - t0) / dt - 1e-9).ceil().max(0.0) as usize;
    (0..=n).map(|k| if k == n { t1 } else { t0 + k as f64 * dt }).collect()
}

fn manifold_settings(cfg: &ExperimentConfig) -> Result<ManifoldSettings, RunError> {
    Ok(ManifoldSettings {
        seed: cfg.positive("seed")?,
        box_factor: cfg.positive("box_factor")?,
        arc_factor: cfg.positive("arc_factor")?,
        max_turns: cfg.positive("max_turns")?,
        node_fraction: cfg.positive("node_fraction")?,
        ..ManifoldSettings::default()
    })
}

fn detector(cfg: &ExperimentConfig) -> Result<ScatteringSettings, RunError> {
    Ok(ScatteringSettings {
        background_window: cfg.positive("window")?,
        jump_factor: cfg.positive("jump_factor")?,
        guard_fraction: cfg.f64("guard_fraction")?,
        floor_rate: cfg.f64("floor_rate")?,
    })
}

fn model_of(state: &Superposition) -> BaseModel {
    BaseModel::new(state.config().omegas())
}

fn xyz(v: &Vec3) -> Value {
    json!([json_num(v[0]), json_num(v[1]), json_num(v[2])])
}

fn file_stem(branch: Branch) -> &'static str {
    match branch {
        Branch::StablePlus => "stable_plus",
        Branch::StableMinus => "stable_minus",
        Branch::UnstablePlus => "unstable_plus",
        Branch::UnstableMinus => "unstable_minus",
    }
}

fn trajectory_csv(traj: &Trajectory) -> Csv {
    let mut csv = Csv::new(&["t", "x1", "x2", "x3", "R"]);
    for ((t, x), r) in traj.samples().iter().zip(traj.radius_series()) {
        csv.row(&[*t, x[0], x[1], x[2], *r]);
    }
    csv
}

/// Point on the sphere `|x| = r` at chord distance `offset` from the nodal
/// point at time `t`. The offset runs along the tangent direction normal to
/// the node velocity, oriented toward `+u'` and then multiplied by `sign`.
pub fn offset_from_node(model: &BaseModel, t: f64, r: f64, offset: f64, sign: f64) -> Result<Vec3, RunError> {
    if !(offset > 0.0 && offset < 2.0 * r) {
        return Err(RunError::InvalidValue {
            key: "offset".into(),
            value: offset.to_string(),
            reason: format!("must lie in (0, 2R) with R = {r}"),
        });
    }
    let ctx = || format!("nodal point at t = {t}, R = {r}");
    let node = nodal_point(model, t, r).map_err(|e| RunError::numeric(ctx(), e))?;
    let frame = comoving_frame(model, t).map_err(|e| RunError::numeric(ctx(), e))?;
    let n = linalg::scale(&node.position, 1.0 / r);
    let speed = linalg::norm(&node.velocity);
    if !(speed > 0.0) {
        return Err(RunError::numeric(ctx(), "node is at rest, offset direction undefined"));
    }
    let mut p = linalg::cross(&n, &linalg::scale(&node.velocity, 1.0 / speed));
    p = linalg::scale(&p, 1.0 / linalg::norm(&p));
    if linalg::dot(&p, &frame.s[0]) < 0.0 {
        p = linalg::scale(&p, -1.0);
    }
    if sign < 0.0 {
        p = linalg::scale(&p, -1.0);
    }
    let alpha = 2.0 * (offset / (2.0 * r)).asin();
    Ok(linalg::add(&linalg::scale(&n, r * alpha.cos()), &linalg::scale(&p, r * alpha.sin())))
}

const OFFSET_CONVENTION: &str =
    "chord offset on the sphere along the tangent direction normal to the node velocity, oriented toward +u' times offset_sign";

fn offset_sign(cfg: &ExperimentConfig) -> Result<f64, RunError> {
    match cfg.f64("offset_sign")? {
        s if s == 1.0 || s == -1.0 => Ok(s),
        _ => Err(RunError::InvalidValue {
            key: "offset_sign".into(),
            value: cfg.string("offset_sign"),
            reason: "must be 1 or -1".into(),
        }),
    }
}

fn nodal_trajectory(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), RunError> {
    let model = BaseModel::default();
    let r = cfg.positive("radius")?;
    let (t0, t1) = cfg.span()?;
    let grid = time_grid(t0, t1, cfg.positive("dt")?);
    let points = grid
        .par_iter()
        .map(|&t| nodal_point(&model, t, r).map_err(|e| RunError::numeric(format!("nodal point at t = {t}"), e)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = Csv::new(&["t", "x1", "x2", "x3", "c"]);
    for p in &points {
        csv.row(&[p.t, p.position[0], p.position[1], p.position[2], p.c]);
    }
    out.csv("node_path.csv", &csv)?;
    let mut plot = Plot::new("nodal point on the sphere", "x1", "x2");
    plot.line(points.iter().map(|p| (p.position[0], p.position[1])));
    out.write("node_path.svg", &plot.render())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn argmax_in(times: &[f64], values: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= lo && **t <= hi)
        .fold((f64::NAN, f64::NEG_INFINITY), |best, (t, v)| if *v > best.1 { (*t, *v) } else { best })
}

fn nodal_kinematics(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), RunError> {
    let model = BaseModel::default();
    let r = cfg.positive("radius")?;
    let (t0, t1) = cfg.span()?;
    let (s0, s1) = (cfg.f64("spike_start")?, cfg.f64("spike_end")?);
    let grid = time_grid(t0, t1, cfg.positive("dt")?);
    let points = grid
        .par_iter()
        .map(|&t| nodal_point(&model, t, r).map_err(|e| RunError::numeric(format!("nodal point at t = {t}"), e)))
        .collect::<Result<Vec<_>, _>>()?;
    let speed: Vec<f64> = points.iter().map(|p| linalg::norm(&p.velocity)).collect();
    let accel: Vec<f64> = points.iter().map(|p| linalg::norm(&p.acceleration)).collect();
    let mut csv = Csv::new(&["t", "speed", "acceleration", "v1", "v2", "v3", "a1", "a2", "a3"]);
    for (i, p) in points.iter().enumerate() {
        let (v, a) = (p.velocity, p.acceleration);
        csv.row(&[p.t, speed[i], accel[i], v[0], v[1], v[2], a[0], a[1], a[2]]);
    }
    out.csv("kinematics.csv", &csv)?;
    let summary = |values: &[f64]| {
        let med = median(values);
        let (t_max, max) = argmax_in(&grid, values, s0, s1);
        json!({
            "median": json_num(med),
            "window_max": json_num(max),
            "argmax": json_num(t_max),
            "ratio": json_num(max / med),
        })
    };
    out.json(
        "summary.json",
        &json!({
            "radius": r,
            "median_span": [t0, t1],
            "spike_window": [s0, s1],
            "speed": summary(&speed),
            "acceleration": summary(&accel),
        }),
    )?;
    let mut plot = Plot::new("nodal point speed and acceleration", "t", "|v|, |a|");
    plot.line(grid.iter().copied().zip(speed.iter().copied()));
    plot.line(grid.iter().copied().zip(accel.iter().copied()));
    out.write("kinematics.svg", &plot.render())
}

fn xpoint_json(xp: &XPoint) -> Value {
    json!({
        "u": xp.u,
        "v": xp.v,
        "jacobian": [[xp.a, xp.b], [xp.c, xp.d]],
        "eigenvalues": [xp.lambda1, xp.lambda2],
        "slopes": [json_num(xp.slopes[0]), json_num(xp.slopes[1])],
    })
}

fn curve_json(c: &ManifoldCurve) -> Value {
    json!({
        "branch": c.branch.name(),
        "termination": format!("{:?}", c.termination),
        "turns": c.turns,
        "arc_length": c.arc_length(),
        "spirals_into_node": c.spirals_into_node(),
        "crossings": c.crossings.iter().map(|(s, d)| json!([s, d])).collect::<Vec<_>>(),
    })
}

fn curve_csv(c: &ManifoldCurve) -> Csv {
    let mut csv = Csv::new(&["s", "u", "v"]);
    for (s, u, v) in &c.points {
        csv.row(&[*s, *u, *v]);
    }
    csv
}

fn trace_all(pf: &bohmflow_core::nodal::PlanarFlow, xp: &XPoint, set: &ManifoldSettings) -> Vec<ManifoldCurve> {
    Branch::ALL
        .par_iter()
        .map(|&b| manifold_trace_of(pf, xp, b, set))
        .collect()
}

fn portrait_plot(title: &str, xp: &XPoint, curves: &[ManifoldCurve]) -> String {
    let mut plot = Plot::new(title, "u'", "v'");
    for c in curves {
        plot.line(c.points.iter().map(|(_, u, v)| (*u, *v)));
    }
    plot.marker(0.0, 0.0, 5);
    plot.marker(xp.u, xp.v, 1);
    plot.render()
}

fn complex_portrait(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), RunError> {
    let model = BaseModel::default();
    let (t, r) = (cfg.f64("t")?, cfg.positive("radius")?);
    let set = manifold_settings(cfg)?;
    let ctx = || format!("complex at t = {t}, R = {r}");
    let pf = planar_flow(&model, t, r).map_err(|e| RunError::numeric(ctx(), e))?;
    let xp = xpoint_of(&pf).map_err(|e| RunError::numeric(ctx(), e))?;
    let node = nodal_point(&model, t, r).map_err(|e| RunError::numeric(ctx(), e))?;
    let frame = comoving_frame(&model, t).map_err(|e| RunError::numeric(ctx(), e))?;
    let curves = trace_all(&pf, &xp, &set);
    for c in &curves {
        out.csv(&format!("manifold_{}.csv", file_stem(c.branch)), &curve_csv(c))?;
    }

    let n = cfg.usize("field_points")?.max(2);
    let half = 2.0 * xp.u.hypot(xp.v);
    let mut field = Csv::new(&["u", "v", "du", "dv"]);
    for i in 0..n {
        for j in 0..n {
            let u = -half + 2.0 * half * i as f64 / (n - 1) as f64;
            let v = -half + 2.0 * half * j as f64 / (n - 1) as f64;
            let (du, dv) = planar_velocity(&pf, u, v).unwrap_or((f64::NAN, f64::NAN));
            field.row(&[u, v, du, dv]);
        }
    }
    out.csv("field.csv", &field)?;
    out.json(
        "structure.json",
        &json!({
            "t": t,
            "R": r,
            "node_xyz": xyz(&node.position),
            "frame": {"theta": frame.theta, "phi": frame.phi},
            "planar": {
                "B": pf.b, "phi1": pf.phi1, "phi2": pf.phi2, "phi3": pf.phi3,
                "V_u": pf.vu, "V_v": pf.vv,
            },
            "xpoint": xpoint_json(&xp),
            "branches": curves.iter().map(curve_json).collect::<Vec<_>>(),
        }),
    )?;
    out.write("portrait.svg", &portrait_plot(&format!("complex at t = {t}, R = {r}"), &xp, &curves))
}

fn hopf_transition(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), RunError> {
    let model = BaseModel::default();
    let r = cfg.positive("radius")?;
    let (t0, t1) = cfg.span()?;
    let dt = cfg.positive("dt")?;
    let tol = cfg.positive("tolerance")?;
    let set = manifold_settings(cfg)?;
    let grid = time_grid(t0, t1, dt);
    let labels: Vec<HopfLabel> = grid.par_iter().map(|&t| classify_complex(&model, t, r, &set)).collect();
    let mut csv = Csv::new(&["t", "label"]);
    for (t, l) in grid.iter().zip(&labels) {
        csv.row_cells(&[num(*t), l.name().to_string()]);
    }
    out.csv("labels.csv", &csv)?;
    let transitions = hopf_scan(&model, r, t0, t1, dt, tol, &set)
        .map_err(|e| RunError::numeric(format!("hopf scan at R = {r}"), e))?;

    let times = cfg.list("portrait_times")?;
    let portraits = times
        .par_iter()
        .map(|&t| {
            let ctx = || format!("complex at t = {t}, R = {r}");
            let pf = planar_flow(&model, t, r).map_err(|e| RunError::numeric(ctx(), e))?;
            let xp = xpoint_of(&pf).map_err(|e| RunError::numeric(ctx(), e))?;
            Ok((t, xp, trace_all(&pf, &xp, &set)))
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let mut portrait_json = Vec::new();
    for (k, (t, xp, curves)) in portraits.iter().enumerate() {
        for c in curves {
            out.csv(&format!("portrait_{k}_{}.csv", file_stem(c.branch)), &curve_csv(c))?;
        }
        out.write(
            &format!("portrait_{k}.svg"),
            &portrait_plot(&format!("complex at t = {t}, R = {r}"), xp, curves),
        )?;
        portrait_json.push(json!({
            "index": k,
            "t": t,
            "label": classify_complex(&model, *t, r, &set).name(),
            "xpoint": xpoint_json(xp),
            "branches": curves.iter().map(curve_json).collect::<Vec<_>>(),
        }));
    }
    out.json(
        "transitions.json",
        &json!({
            "R": r,
            "span": [t0, t1],
            "dt": dt,
            "tolerance": tol,
            "transitions": transitions.iter().map(|h| json!({
                "t_star": h.t_star,
                "before": h.before.name(),
                "after": h.after.name(),
            })).collect::<Vec<_>>(),
            "portraits": portrait_json,
        }),
    )
}

/// Distance to the nearer nodal point on the sample's own sphere.
fn node_distances(model: &BaseModel, traj: &Trajectory) -> Vec<f64> {
    traj.samples()
        .par_iter()
        .map(|(t, x)| distance_to_node(model, x, *t).unwrap_or(f64::NAN))
        .collect()
}

/// Distance to the X-point on the sample's own sphere; NaN where the layer
/// has no X-point.
fn layer_distances(model: &BaseModel, samples: &[(f64, Vec3)]) -> Vec<f64> {
    samples
        .par_iter()
        .map(|(t, x)| distance_to_layer(model, x, *t).unwrap_or(f64::NAN))
        .collect()
}

fn first_exceeding(times: impl Iterator<Item = f64>, values: &[f64], level: f64) -> Option<f64> {
    times.zip(values).find(|(_, d)| **d > level).map(|(t, _)| t)
}

struct DeviationRun {
    traj: Trajectory,
    log: DeviationLog,
    stretching: StretchingSeries,
    cumulative: Vec<f64>,
    lcn: LcnSeries,
}

fn deviation_run(
    state: &Superposition,
    x0: Vec3,
    dx0: Vec3,
    t0: f64,
    t1: f64,
    tau: f64,
    set: &IntegratorSettings,
    what: &str,
) -> Result<DeviationRun, RunError> {
    let ctx = || format!("{what} from x0 = {x0:?} at t = {t0}");
    let (traj, log) = integrate_with_deviation(state, x0, dx0, t0, t1, tau, set).map_err(|e| RunError::numeric(ctx(), e))?;
    let stretching = stretching_from_log(&log).map_err(|e| RunError::numeric(ctx(), e))?;
    let cumulative = cumulative_stretching(&stretching);
    let lcn = finite_time_lcn(&stretching);
    Ok(DeviationRun {
        traj,
        log,
        stretching,
        cumulative,
        lcn,
    })
}

fn event_json(e: &ScatteringEvent) -> Value {
    json!({
        "t_start": e.t_start,
        "t_end": e.t_end,
        "t_jump": e.t_jump,
        "peak_a": e.peak_a,
        "background": e.background,
        "min_distance": json_num(e.min_distance),
        "t_min_distance": e.t_min_distance,
        "alignment": e.alignment,
    })
}

/// `t, a, cumulative, chi, distance` with one row per stretching number.
fn metrics_csv(run: &DeviationRun, distance: &[f64]) -> Csv {
    let mut csv = Csv::new(&["t", "a", "cumulative", "chi", "distance"]);
    for i in 0..run.stretching.len() {
        csv.row(&[
            run.stretching.time(i),
            run.stretching.values[i],
            run.cumulative[i],
            run.lcn.chi[i],
            distance[i],
        ]);
    }
    csv
}

/// `t, xi, log_xi, stretching_raw`; the first row has no stretching number.
fn deviation_csv(run: &DeviationRun) -> Csv {
    let mut csv = Csv::new(&["t", "xi", "log_xi", "stretching_raw"]);
    let norms = run.log.norms();
    let logs = run.log.log_norms();
    for (k, (t, _)) in run.traj.samples().iter().enumerate() {
        let a = if k == 0 { String::new() } else { num(run.stretching.values[k - 1]) };
        csv.row_cells(&[num(*t), num(norms[k]), num(logs[k]), a]);
    }
    csv
}

fn trajectory_vs_node(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), RunError> {
    let state = load_state(&cfg.string("state"))?;
    let model = model_of(&state);
    let set = cfg.integrator()?;
    let (t0, t1) = cfg.span()?;
    let r = cfg.positive("radius")?;
    let offset = cfg.positive("offset")?;
    let sign = offset_sign(cfg)?;
    out.convention("offset_direction", OFFSET_CONVENTION);

    let x0 = offset_from_node(&model, t0, r, offset, sign)?;
    let ordered_x0 = cfg.vec3("ordered_x0")?;
    let ordered_dx0 = cfg.vec3("ordered_dx0")?;
    let tau = cfg.positive("tau")?;
    let (chaotic, ordered) = rayon::join(
        || {
            integrate(&state, x0, t0, t1, &set)
                .map_err(|e| RunError::numeric(format!("trajectory from the node offset {offset} on R = {r}"), e))
        },
        || deviation_run(&state, ordered_x0, ordered_dx0, t0, t1, tau, &set, "ordered trajectory"),
    );
    let (chaotic, ordered) = (chaotic?, ordered?);

    let d_node = node_distances(&model, &chaotic);
    let mut csv = Csv::new(&["t", "x1", "x2", "x3", "R", "distance_node"]);
    for (i, ((t, x), rr)) in chaotic.samples().iter().zip(chaotic.radius_series()).enumerate() {
        csv.row(&[*t, x[0], x[1], x[2], *rr, d_node[i]]);
    }
    out.csv("chaotic.csv", &csv)?;
    let t_dep = first_exceeding(chaotic.times(), &d_node, 1.0);
    let t_exceed2 = first_exceeding(chaotic.times(), &d_node, 2.0);

    let d_layer = layer_distances(&model, &ordered.traj.samples()[1..]);
    let events = detect_scattering(&ordered.stretching, &d_layer, &detector(cfg)?)
        .map_err(|e| RunError::numeric("ordered trajectory events", e))?;
    out.csv("ordered_metrics.csv", &metrics_csv(&ordered, &d_layer))?;
    out.csv("ordered_trajectory.csv", &trajectory_csv(&ordered.traj))?;

    let (f0, f1) = (cfg.f64("fit_start")?, cfg.f64("fit_end")?);
    let points: Vec<(f64, f64)> = ordered
        .lcn
        .times
        .iter()
        .zip(&ordered.lcn.chi)
        .map(|(t, c)| (t - t0, *c))
        .filter(|(e, _)| *e >= f0 && *e <= f1)
        .collect();
    let fit = fit_power_law(&points);
    let chi_fit = match &fit {
        Ok(f) => json!({"exponent": f.exponent, "prefactor": f.prefactor, "residual": f.residual}),
        Err(e) => json!({"error": e.to_string()}),
    };

    out.json(
        "summary.json",
        &json!({
            "chaotic": {
                "x0": xyz(&x0),
                "t0": t0,
                "radius": r,
                "offset": offset,
                "offset_sign": sign,
                "initial_distance": d_node.first().copied().and_then(json_num),
                "t_dep": t_dep,
                "t_exceed2": t_exceed2,
            },
            "ordered": {
                "x0": xyz(&ordered_x0),
                "t0": t0,
                "final_chi": ordered.lcn.last().and_then(json_num),
                "max_a": json_num(ordered.stretching.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                "chi_fit_elapsed_span": [f0, f1],
                "chi_fit": chi_fit,
                "events": events.iter().map(event_json).collect::<Vec<_>>(),
            },
        }),
    )?;
    let mut plot = Plot::new("distance from the nodal point", "t", "d");
    plot.line(chaotic.times().zip(d_node.iter().copied()));
    out.write("distance.svg", &plot.render())?;
    let mut plot = Plot::new("finite-time LCN of the ordered trajectory", "t - t0", "chi").log_log();
    plot.line(ordered.lcn.times.iter().map(|t| t - t0).zip(ordered.lcn.chi.iter().copied()));
    out.write("ordered_chi.svg", &plot.render())
}

fn trajectory_families(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), RunError> {
    let state = load_state(&cfg.string("state"))?;
    let model = model_of(&state);
    let set = cfg.integrator()?;
    let (t0, t1) = cfg.span()?;
    let sign = offset_sign(cfg)?;
    out.convention("offset_direction", OFFSET_CONVENTION);
    let offset = cfg.positive("offset")?;
    let family_r = cfg.positive("family_radius")?;
    let mut jobs: Vec<(&str, f64, f64, f64)> = Vec::new();
    for r in cfg.list("radii")? {
        jobs.push(("radius", r, r, offset));
    }
    for d in cfg.list("offsets")? {
        jobs.push(("offset", d, family_r, d));
    }
    let runs = jobs
        .par_iter()
        .map(|&(family, param, r, d)| {
            let x0 = offset_from_node(&model, t0, r, d, sign)?;
            let traj = integrate(&state, x0, t0, t1, &set)
                .map_err(|e| RunError::numeric(format!("{family} family member {param} (R = {r}, d = {d})"), e))?;
            let dist = node_distances(&model, &traj);
            Ok((traj, dist))
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let mut csv = Csv::new(&["family", "parameter", "t", "x1", "x2", "x3", "R", "distance_node"]);
    let mut members = Vec::new();
    let mut plot = Plot::new("distance from the nodal point", "t", "d");
    for ((family, param, r, d), (traj, dist)) in jobs.iter().zip(&runs) {
        for (i, ((t, x), rr)) in traj.samples().iter().zip(traj.radius_series()).enumerate() {
            csv.row_cells(&[
                family.to_string(),
                num(*param),
                num(*t),
                num(x[0]),
                num(x[1]),
                num(x[2]),
                num(*rr),
                num(dist[i]),
            ]);
        }
        plot.line(traj.times().zip(dist.iter().copied()));
        members.push(json!({
            "family": family,
            "parameter": param,
            "radius": r,
            "offset": d,
            "max_distance": json_num(dist.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        }));
    }
    out.csv("families.csv", &csv)?;
    out.json("families.json", &json!({ "t0": t0, "t1": t1, "members": members }))?;
    out.write("families.svg", &plot.render())
}

fn scattering(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), RunError> {
    let state = load_state(&cfg.string("state"))?;
    let model = model_of(&state);
    let set = cfg.integrator()?;
    let (t0, t1) = cfg.span()?;
    let tau = cfg.positive("tau")?;
    let (x0, dx0) = (cfg.vec3("x0")?, cfg.vec3("dx0")?);
    let run = deviation_run(&state, x0, dx0, t0, t1, tau, &set, "scattering trajectory")?;
    let distance = layer_distances(&model, &run.traj.samples()[1..]);
    let events = detect_scattering(&run.stretching, &distance, &detector(cfg)?)
        .map_err(|e| RunError::numeric("scattering detection", e))?;
    let window_end = cfg.f64("event_window_end")?;
    let early = events_in(&events, t0, window_end);

    out.csv("metrics.csv", &metrics_csv(&run, &distance))?;
    out.csv("deviation.csv", &deviation_csv(&run))?;
    out.csv("trajectory.csv", &trajectory_csv(&run.traj))?;
    out.json("events.json", &events.iter().map(event_json).collect::<Vec<_>>())?;
    out.json(
        "summary.json",
        &json!({
            "x0": xyz(&x0),
            "dx0": xyz(&dx0),
            "span": [t0, t1],
            "tau": tau,
            "renormalizations": run.log.renorm_events().len(),
            "event_window": [t0, window_end],
            "events_in_window": early.iter().map(event_json).collect::<Vec<_>>(),
            "total_events": events.len(),
            "final_cumulative": run.cumulative.last().copied().and_then(json_num),
            "final_lcn": run.lcn.last().and_then(json_num),
        }),
    )?;
    let times = run.stretching.times();
    let mut plot = Plot::new("stretching number, cumulative stretching and X-point distance", "t", "");
    plot.line(times.iter().copied().zip(run.stretching.values.iter().map(|a| a / tau)));
    plot.line(times.iter().copied().zip(run.cumulative.iter().copied()));
    plot.line(times.iter().copied().zip(distance.iter().copied()));
    for e in &events {
        plot.marker(e.t_jump, e.peak_a / tau, 1);
    }
    out.write("metrics.svg", &plot.render())
}

fn structure_json(s: &NodalXStructure) -> Value {
    let layers: Vec<Value> = s
        .layers
        .iter()
        .map(|l| {
            let (xp, err) = match &l.xpoint {
                Ok(x) => (Some(x), None),
                Err(e) => (None, Some(e.to_string())),
            };
            json!({
                "R": l.r,
                "node_xyz": xyz(&l.node.position),
                "node_velocity": xyz(&l.node.velocity),
                "xpoint_uv": xp.map(|x| json!([x.u, x.v])),
                "xpoint_xyz": l.xpoint_lab().map(|x| xyz(&x)),
                "eigenvalues": xp.map(|x| json!([x.lambda1, x.lambda2])),
                "slopes": xp.map(|x| json!([json_num(x.slopes[0]), json_num(x.slopes[1])])),
                "degenerate": err,
            })
        })
        .collect();
    json!({
        "t": s.t,
        "frame": {"theta": s.layers.first().map(|l| l.frame.theta), "phi": s.layers.first().map(|l| l.frame.phi)},
        "layers": layers,
    })
}

fn foliation_run(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), RunError> {
    let model = BaseModel::default();
    let t = cfg.f64("t")?;
    let grid = cfg.list("r_grid")?;
    let mut s = foliation(&model, t, &grid).map_err(|e| RunError::numeric(format!("foliation at t = {t}"), e))?;
    if cfg.bool("manifolds")? {
        let set = manifold_settings(cfg)?;
        let traced: Vec<Vec<ManifoldCurve>> = s
            .layers
            .par_iter()
            .map(|l| match &l.xpoint {
                Ok(xp) => Branch::ALL.iter().map(|&b| manifold_trace_of(&l.planar, xp, b, &set)).collect(),
                Err(_) => Vec::new(),
            })
            .collect();
        for (l, m) in s.layers.iter_mut().zip(traced) {
            l.manifolds = m;
        }
        let mut csv = Csv::new(&["R", "branch", "s", "u", "v", "x1", "x2", "x3"]);
        for l in &s.layers {
            for c in &l.manifolds {
                for (ss, u, v) in &c.points {
                    let x = linalg::add(&l.node.position, &l.frame.to_lab(&[*u, *v, 0.0]));
                    csv.row_cells(&[
                        num(l.r),
                        c.branch.name().to_string(),
                        num(*ss),
                        num(*u),
                        num(*v),
                        num(x[0]),
                        num(x[1]),
                        num(x[2]),
                    ]);
                }
            }
        }
        out.csv("manifolds.csv", &csv)?;
    }
    let mut x_line = Csv::new(&["R", "x1", "x2", "x3"]);
    for (r, x) in s.x_line() {
        x_line.row(&[r, x[0], x[1], x[2]]);
    }
    out.csv("x_line.csv", &x_line)?;
    let mut node_line = Csv::new(&["R", "x1", "x2", "x3"]);
    for l in &s.layers {
        let p = l.node.position;
        node_line.row(&[l.r, p[0], p[1], p[2]]);
    }
    out.csv("node_line.csv", &node_line)?;
    out.json("structure.json", &structure_json(&s))?;
    let mut plot = Plot::new("nodal line and X-line (comoving u', v')", "u'", "v'");
    let uv: Vec<(f64, f64)> = s
        .layers
        .iter()
        .filter_map(|l| l.xpoint.as_ref().ok().map(|x| (x.u, x.v)))
        .collect();
    plot.line(uv.iter().copied());
    plot.marker(0.0, 0.0, 5);
    out.write("foliation.svg", &plot.render())
}

fn perturbed_diffusion(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), RunError> {
    let a4 = cfg.f64("a4")?;
    let state = Superposition::perturbed(a4).map_err(|e| RunError::InvalidValue {
        key: "a4".into(),
        value: cfg.string("a4"),
        reason: e.to_string(),
    })?;
    let model = model_of(&state);
    let set = cfg.integrator()?;
    let (t0, t1) = cfg.span()?;
    let tau = cfg.positive("tau")?;
    let (x0, dx0) = (cfg.vec3("x0")?, cfg.vec3("dx0")?);
    let run = deviation_run(&state, x0, dx0, t0, t1, tau, &set, "perturbed trajectory")?;
    out.csv("trajectory.csv", &trajectory_csv(&run.traj))?;
    let mut csv = Csv::new(&["t", "a", "cumulative", "chi"]);
    for i in 0..run.stretching.len() {
        csv.row(&[run.stretching.time(i), run.stretching.values[i], run.cumulative[i], run.lcn.chi[i]]);
    }
    out.csv("stretching.csv", &csv)?;

    // nodal points of the perturbed state, continued from the unperturbed ones
    let ts = cfg.f64("structure_t")?;
    let grid = cfg.list("r_grid")?;
    let base = foliation(&model, ts, &grid).map_err(|e| RunError::numeric(format!("structure at t = {ts}"), e))?;
    let newton = NewtonSettings::default();
    let mut structure = Csv::new(&[
        "R", "base_node_x1", "base_node_x2", "base_node_x3", "node_x1", "node_x2", "node_x3", "xpoint_x1", "xpoint_x2",
        "xpoint_x3",
    ]);
    let perturbed_nodes: Vec<Vec3> = base
        .layers
        .par_iter()
        .map(|l| nodal_point_numeric(&state, ts, l.node.position, &newton).unwrap_or([f64::NAN; 3]))
        .collect();
    for (l, p) in base.layers.iter().zip(&perturbed_nodes) {
        let b = l.node.position;
        let x = l.xpoint_lab().unwrap_or([f64::NAN; 3]);
        structure.row(&[l.r, b[0], b[1], b[2], p[0], p[1], p[2], x[0], x[1], x[2]]);
    }
    out.csv("structure.csv", &structure)?;
    let radii = run.traj.radius_series();
    out.json(
        "summary.json",
        &json!({
            "a4": a4,
            "x0": xyz(&x0),
            "span": [t0, t1],
            "delta_r_max": delta_r_max(&run.traj),
            "r_min": radii.iter().copied().fold(f64::INFINITY, f64::min),
            "r_max": radii.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            "final_lcn": run.lcn.last().and_then(json_num),
            "structure_t": ts,
        }),
    )?;
    let mut plot = Plot::new("distance from the origin", "t", "R");
    plot.line(run.traj.times().zip(radii.iter().copied()));
    out.write("radius.svg", &plot.render())
}

fn power_law(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), RunError> {
    let set = cfg.integrator()?;
    let (t0, t1) = cfg.span()?;
    let x0 = cfg.vec3("x0")?;
    let grid = cfg.list("a4_grid")?;
    let mut jobs: Vec<Option<f64>> = grid.iter().copied().map(Some).collect();
    jobs.push(None);
    let runs = jobs
        .par_iter()
        .map(|a4| {
            let state = match a4 {
                Some(a) => Superposition::perturbed(*a).map_err(|e| RunError::InvalidValue {
                    key: "a4_grid".into(),
                    value: a.to_string(),
                    reason: e.to_string(),
                })?,
                None => Superposition::base(),
            };
            let traj = integrate(&state, x0, t0, t1, &set)
                .map_err(|e| RunError::numeric(format!("trajectory for a4 = {}", a4.unwrap_or(0.0)), e))?;
            let radii = traj.radius_series();
            Ok((
                delta_r_max(&traj),
                radii.iter().copied().fold(f64::INFINITY, f64::min),
                radii.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ))
        })
        .collect::<Result<Vec<_>, RunError>>()?;
    let (sweep, control) = runs.split_at(grid.len());
    let mut csv = Csv::new(&["a4", "delta_r_max", "r_min", "r_max"]);
    for (a, (d, lo, hi)) in grid.iter().zip(sweep) {
        csv.row(&[*a, *d, *lo, *hi]);
    }
    out.csv("delta_r.csv", &csv)?;
    let points: Vec<(f64, f64)> = grid.iter().copied().zip(sweep.iter().map(|r| r.0)).collect();
    let strictly_increasing = points.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 > w[0].1);
    let fit = match fit_power_law(&points) {
        Ok(f) => json!({"exponent": f.exponent, "prefactor": f.prefactor, "residual": f.residual}),
        Err(e) => json!({"error": e.to_string()}),
    };
    out.json(
        "fit.json",
        &json!({
            "x0": xyz(&x0),
            "span": [t0, t1],
            "points": points.iter().map(|(a, d)| json!([a, d])).collect::<Vec<_>>(),
            "fit": fit,
            "strictly_increasing": strictly_increasing,
            "base_control_delta_r_max": control[0].0,
        }),
    )?;
    let mut plot = Plot::new("maximum radial jump", "a4", "delta R max").log_log();
    plot.line(points.iter().copied());
    for (a, d) in &points {
        plot.marker(*a, *d, 1);
    }
    out.write("delta_r.svg", &plot.render())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_ends_on_endpoint() {
        let g = time_grid(1.0, 2.0, 0.3);
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 2.0);
        assert_eq!(time_grid(0.0, 1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(time_grid(3.0, 3.0, 0.1), vec![3.0]);
    }

    #[test]
    fn offset_start_lies_on_sphere_at_chord_distance() {
        let model = BaseModel::default();
        for (r, d) in [(4.23, 0.1), (0.2, 0.1), (3.0, 0.3)] {
            let x = offset_from_node(&model, 1.0, r, d, 1.0).unwrap();
            assert!((linalg::norm(&x) - r).abs() < 1e-12);
            let node = nodal_point(&model, 1.0, r).unwrap();
            assert!((linalg::distance(&x, &node.position) - d).abs() < 1e-12);
            // tangent offset is normal to the node velocity
            let step = linalg::sub(&x, &node.position);
            assert!(linalg::dot(&step, &node.velocity).abs() < 1e-12 * linalg::norm(&node.velocity));
            let frame = comoving_frame(&model, 1.0).unwrap();
            assert!(linalg::dot(&step, &frame.s[0]) > 0.0);
            let y = offset_from_node(&model, 1.0, r, d, -1.0).unwrap();
            assert!(linalg::dot(&linalg::sub(&y, &node.position), &frame.s[0]) < 0.0);
        }
        assert!(offset_from_node(&model, 1.0, 1.0, 2.5, 1.0).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
