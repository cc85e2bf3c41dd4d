use approx::assert_relative_eq;
use bohmflow_core::flow::{closed_form_velocity, BaseModel, PhasePoint};
use bohmflow_core::linalg::{self, Vec3};
use bohmflow_core::nodal::*;
use bohmflow_core::Superposition;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model() -> BaseModel {
    BaseModel::default()
}

#[test]
fn nodal_line_zeroes_the_wavefunction() {
    let s = Superposition::base();
    let n = nodal_direction(&model(), 1.0).unwrap();
    assert!(s.psi(&n, 1.0).value.norm() < 1e-12);
    let p = nodal_point(&model(), 1.0, 4.23).unwrap();
    assert!(s.psi(&p.position, 1.0).value.norm() < 1e-10);
    let anti = linalg::scale(&p.position, -1.0);
    assert!(s.psi(&anti, 1.0).value.norm() < 1e-10);
}

#[test]
fn direction_has_unit_norm_and_c_matches_line_equations() {
    let m = model();
    let w = m.omega();
    for t in [0.3, 1.0, 5.5, 17.2] {
        let n = nodal_direction(&m, t).unwrap();
        assert!((linalg::norm(&n) - 1.0).abs() < 1e-14);
        let p = nodal_point(&m, t, 2.0).unwrap();
        let x1 = p.c * ((w[2] - w[1]) * t).sin() / w[0].sqrt();
        let x2 = p.c * ((w[0] - w[2]) * t).sin() / w[1].sqrt();
        assert_relative_eq!(x1, p.position[0], epsilon = 1e-12);
        assert_relative_eq!(x2, p.position[1], epsilon = 1e-12);
    }
}

#[test]
fn kinematics_match_finite_differences() {
    let m = model();
    let r = 4.23;
    let h = 1e-3;
    for t in [1.0, 3.3, 8.5, 12.0] {
        let (v, a) = nodal_kinematics(&m, t, r).unwrap();
        let pos = |dt: f64| nodal_point(&m, t + dt, r).unwrap().position;
        let (pm2, pm1, p0, p1, p2) = (pos(-2.0 * h), pos(-h), pos(0.0), pos(h), pos(2.0 * h));
        for k in 0..3 {
            let fd1 = (pm2[k] - 8.0 * pm1[k] + 8.0 * p1[k] - p2[k]) / (12.0 * h);
            let fd2 = (-pm2[k] + 16.0 * pm1[k] - 30.0 * p0[k] + 16.0 * p1[k] - p2[k]) / (12.0 * h * h);
            assert!((fd1 - v[k]).abs() < 1e-6 * linalg::norm(&v).max(1.0), "t={t} v");
            assert!((fd2 - a[k]).abs() < 1e-5 * linalg::norm(&a).max(1.0), "t={t} a {fd2} {}", a[k]);
        }
        let n = nodal_direction(&m, t).unwrap();
        assert!(linalg::dot(&v, &n).abs() < 1e-10 * linalg::norm(&v));
    }
}

#[test]
fn direction_is_continuous() {
    let m = model();
    let dt = 1e-3;
    let mut prev = nodal_direction(&m, 0.01).unwrap();
    let mut t = 0.01;
    while t < 50.0 {
        t += dt;
        let n = nodal_direction(&m, t).unwrap();
        let (v, _) = nodal_kinematics(&m, t, 1.0).unwrap();
        let step = linalg::distance(&n, &prev);
        assert!(step < 10.0 * dt * linalg::norm(&v).max(1e-3), "t={t}");
        prev = n;
    }
}

#[test]
fn frames_are_exact_rotations() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = model();
    for _ in 0..1000 {
        let t = rng.gen_range(0.05..50.0);
        let f = comoving_frame(&m, t).unwrap();
        let n = nodal_direction(&m, t).unwrap();
        let sst = linalg::mat_mul(&f.s, &linalg::transpose(&f.s));
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((sst[i][j] - id).abs() < 1e-12);
            }
        }
        assert!((linalg::det(&f.s) - 1.0).abs() < 1e-12);
        let e3 = f.to_frame(&n);
        assert!(e3[0].abs() < 1e-12 && e3[1].abs() < 1e-12 && (e3[2] - 1.0).abs() < 1e-12);
        assert!((0.0..=std::f64::consts::PI).contains(&f.theta));
        assert!((0.0..std::f64::consts::TAU).contains(&f.phi));
    }
}

#[test]
fn planar_form_reconstructs_lab_g() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let m = model();
    for _ in 0..200 {
        let t = rng.gen_range(0.2..20.0);
        let r = rng.gen_range(0.2..5.0);
        let pf = planar_flow(&m, t, r).unwrap();
        let f = comoving_frame(&m, t).unwrap();
        let node = nodal_point(&m, t, r).unwrap();
        let (u, v) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let x = linalg::add(&node.position, &f.to_lab(&[u, v, 0.0]));
        let g_lab = m.g(&x, t);
        assert!((pf.g(u, v) - g_lab).abs() < 1e-10 * g_lab.max(1.0));
        let vn = f.to_frame(&node.velocity);
        assert!((vn[0] - pf.vu).abs() < 1e-12 && (vn[1] - pf.vv).abs() < 1e-12);
    }
}

#[test]
fn reduction_agrees_with_full_frame_field() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let m = model();
    for _ in 0..200 {
        let t = rng.gen_range(0.2..20.0);
        let r = rng.gen_range(0.5..5.0);
        let (u, v) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let pf = planar_flow(&m, t, r).unwrap();
        let (f1, f2) = planar_velocity(&pf, u, v).unwrap();
        let full = frame_field(&m, t, r, &[u, v, 0.0]).unwrap();
        let scale = f1.abs().max(f2.abs()).max(1.0);
        assert!((full[0] - f1).abs() < 1e-10 * scale);
        assert!((full[1] - f2).abs() < 1e-10 * scale);
        assert!(full[2].abs() < 1e-10 * scale);
    }
}

#[test]
fn xpoints_are_saddles_on_grid() {
    let m = model();
    for t in 1..=10 {
        for r in 1..=5 {
            let pf = planar_flow(&m, t as f64, r as f64).unwrap();
            let x = xpoint_of(&pf).unwrap();
            assert!(x.is_saddle());
            let (f1, f2) = planar_velocity(&pf, x.u, x.v).unwrap();
            assert!(f1.abs() < 1e-10 && f2.abs() < 1e-10, "t={t} r={r}: {f1} {f2}");
            for (k, l) in [x.lambda1, x.lambda2].into_iter().enumerate() {
                let e = x.eigenvector(k);
                let je = [x.a * e[0] + x.b * e[1], x.c * e[0] + x.d * e[1]];
                assert!((je[0] - l * e[0]).abs() < 1e-9 * l.abs().max(1.0));
                assert!((je[1] - l * e[1]).abs() < 1e-9 * l.abs().max(1.0));
                assert_relative_eq!(x.slopes[k], (l - x.a) / x.b, max_relative = 1e-12);
            }
        }
    }
}

#[test]
fn jacobian_matches_finite_differences_of_planar_field() {
    let pf = planar_flow(&model(), 4.0, 4.23).unwrap();
    let x = xpoint_of(&pf).unwrap();
    let h = 1e-6 * x.u.hypot(x.v);
    let f = |u: f64, v: f64| planar_velocity(&pf, u, v).unwrap();
    let (a, c) = {
        let (p, m) = (f(x.u + h, x.v), f(x.u - h, x.v));
        ((p.0 - m.0) / (2.0 * h), (p.1 - m.1) / (2.0 * h))
    };
    let (b, d) = {
        let (p, m) = (f(x.u, x.v + h), f(x.u, x.v - h));
        ((p.0 - m.0) / (2.0 * h), (p.1 - m.1) / (2.0 * h))
    };
    let s = x.a.abs().max(x.b.abs()).max(x.c.abs()).max(x.d.abs());
    for (fd, an) in [(a, x.a), (b, x.b), (c, x.c), (d, x.d)] {
        assert!((fd - an).abs() < 1e-6 * s, "{fd} {an}");
    }
}

#[test]
fn alternate_elimination_gives_same_point() {
    let mut pf = planar_flow(&model(), 2.0, 3.0).unwrap();
    let x = xpoint_of(&pf).unwrap();
    // swap roles by exchanging axes: u <-> v flips the sign of B
    pf = PlanarFlow {
        b: -pf.b,
        phi1: pf.phi3,
        phi3: pf.phi1,
        vu: pf.vv,
        vv: pf.vu,
        ..pf
    };
    let y = xpoint_of(&pf).unwrap();
    assert_relative_eq!(y.u, x.v, max_relative = 1e-12);
    assert_relative_eq!(y.v, x.u, max_relative = 1e-12);
}

#[test]
fn degenerate_xpoint_reported() {
    let pf = planar_flow(&model(), 2.0, 3.0).unwrap().without_drift();
    assert!(matches!(xpoint_of(&pf), Err(NodalError::DegenerateXPoint { .. })));
}

#[test]
fn manifold_seed_lies_on_eigenvector() {
    let m = model();
    let pf = planar_flow(&m, 4.0, 4.23).unwrap();
    let x = xpoint_of(&pf).unwrap();
    let set = ManifoldSettings::default();
    for b in Branch::ALL {
        let c = manifold_trace(&m, 4.0, 4.23, b, &set).unwrap();
        let (_, u, v) = c.points[0];
        let (du, dv) = (u - x.u, v - x.v);
        assert_relative_eq!(du.hypot(dv), set.seed, max_relative = 1e-6);
        let slope = x.slopes[if b.is_stable() { 1 } else { 0 }];
        assert_relative_eq!(dv / du, slope, max_relative = 1e-6);
        assert_eq!(c.branch, b);
        assert_eq!(c.frozen_t, 4.0);
    }
}

#[test]
fn reversing_ds_swaps_branch_behaviour() {
    let pf = planar_flow(&model(), 4.0, 4.23).unwrap();
    let x = xpoint_of(&pf).unwrap();
    let set = ManifoldSettings {
        max_turns: 0.05,
        ..Default::default()
    };
    let e = x.eigenvector(1);
    let start = [x.u + set.seed * e[0], x.v + set.seed * e[1]];
    let d = |c: &ManifoldCurve| {
        let (_, u, v) = c.points[1];
        (u - x.u).hypot(v - x.v)
    };
    // Along the stable direction: forward in s approaches the X-point, backward departs.
    let fwd = trace_frozen(&pf, &x, start, 1.0, &set);
    let bwd = trace_frozen(&pf, &x, start, -1.0, &set);
    assert!(d(&fwd) < set.seed);
    assert!(d(&bwd) > set.seed);
    assert!(bwd.points[1].0 < 0.0 && fwd.points[1].0 > 0.0);
}

#[test]
fn unstable_branch_spirals_into_node_at_t4() {
    let m = model();
    let set = ManifoldSettings::default();
    let curves: Vec<_> = Branch::ALL
        .iter()
        .map(|&b| manifold_trace(&m, 4.0, 4.23, b, &set).unwrap())
        .collect();
    let into: Vec<_> = curves.iter().filter(|c| c.spirals_into_node()).map(|c| c.branch).collect();
    assert_eq!(into.len(), 1, "{into:?}");
    assert!(!into[0].is_stable());
    let c = curves.iter().find(|c| c.branch == into[0]).unwrap();
    assert!(c.crossings.len() >= 3);
    for other in curves.iter().filter(|c| c.branch != into[0]) {
        assert!(!other.spirals_into_node());
    }
    assert_eq!(classify_complex(&m, 4.0, 4.23, &set), HopfLabel::Unstable);
}

#[test]
fn hopf_transition_near_9_5586() {
    let m = model();
    let set = ManifoldSettings::default();
    assert_eq!(classify_complex(&m, 9.52, 5.0, &set), HopfLabel::Stable);
    assert_eq!(classify_complex(&m, 9.6, 5.0, &set), HopfLabel::Unstable);
    let tr = hopf_scan(&m, 5.0, 9.4, 9.7, 0.05, 1e-4, &set).unwrap();
    assert_eq!(tr.len(), 1, "{tr:?}");
    assert!((tr[0].t_star - 9.5586).abs() < 0.01, "{tr:?}");
    assert_eq!(tr[0].before, HopfLabel::Stable);
    assert_eq!(tr[0].after, HopfLabel::Unstable);
}

#[test]
fn constant_label_interval_has_no_transition() {
    let tr = hopf_scan(&model(), 5.0, 9.6, 9.7, 0.05, 1e-3, &ManifoldSettings::default()).unwrap();
    assert!(tr.is_empty());
}

#[test]
fn numeric_nodes_match_analytic() {
    let m = model();
    let s = Superposition::base();
    let p = nodal_point(&m, 2.0, 3.0).unwrap();
    let guess = linalg::add(&p.position, &[0.05, -0.03, 0.02]);
    let x = nodal_point_numeric(&s, 2.0, guess, &NewtonSettings::default()).unwrap();
    // guess lies on a slightly different sphere; compare on that sphere
    let q = nodal_point(&m, 2.0, linalg::norm(&guess)).unwrap();
    assert!(linalg::distance(&x, &q.position) < 1e-10);
    assert!(s.psi(&x, 2.0).value.norm() < 1e-12);
}

#[test]
fn numeric_nodes_of_perturbed_state() {
    let s = Superposition::perturbed(0.05).unwrap();
    let p = nodal_point(&model(), 4.0, 2.0).unwrap();
    let x = nodal_point_numeric(&s, 4.0, p.position, &NewtonSettings::default()).unwrap();
    assert!(s.psi(&x, 4.0).value.norm() < 1e-12);
}

#[test]
fn numeric_nodes_fail_without_nodes() {
    let s = Superposition::new(Default::default(), [(bohmflow_core::Mode::new(0, 0, 0), 1.0.into())]).unwrap();
    assert!(matches!(
        nodal_point_numeric(&s, 1.0, [1.0, 2.0, 0.5], &NewtonSettings::default()),
        Err(NodalError::NoConvergence { .. })
    ));
}

#[test]
fn foliation_is_collinear_and_saddle() {
    let m = model();
    let grid: Vec<f64> = (0..9).map(|k| 1.0 + 0.5 * k as f64).collect();
    let s = foliation(&m, 4.0, &grid).unwrap();
    let n = nodal_direction(&m, 4.0).unwrap();
    for l in &s.layers {
        let c = linalg::cross(&l.node.position, &n);
        assert!(linalg::norm(&c) < 1e-12);
        assert!(l.xpoint.unwrap().is_saddle());
    }
    assert_eq!(s.x_line().len(), grid.len());
}

#[test]
fn distance_zero_at_mapped_xpoint() {
    let m = model();
    let grid = [1.0, 2.0, 3.0];
    let s = foliation(&m, 4.0, &grid).unwrap();
    let (_, x) = s.x_line()[1];
    assert_eq!(distance_to_structure(&m, &x, 4.0, &grid).unwrap(), 0.0);
    let minus: Vec3 = linalg::scale(&x, -1.0);
    assert_eq!(distance_to_structure(&m, &minus, 4.0, &grid).unwrap(), 0.0);
}

#[test]
fn xpoint_is_stagnation_point_of_lab_flow_in_frame() {
    // at the X-point the lab velocity equals the nodal velocity up to the
    // component along the line
    let m = model();
    let s = foliation(&m, 4.0, &[3.0]).unwrap();
    let l = &s.layers[0];
    let x = l.xpoint_lab().unwrap();
    let v = closed_form_velocity(&m, &PhasePoint::new(x, 4.0), 1e-12).unwrap();
    let rel = l.frame.to_frame(&linalg::sub(&v, &l.node.velocity));
    assert!(rel[0].abs() < 1e-10 && rel[1].abs() < 1e-10);
}
