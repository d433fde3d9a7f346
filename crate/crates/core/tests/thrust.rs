use periprop::auxstokes::resistance;
use periprop::config::SimConfig;
use periprop::fem::{Discretization, ElementMode, Regime};
use periprop::forcing::{ForceKind, ForcingProfile};
use periprop::geometry::{BodyShape, DomainSpec};
use periprop::meshgen::{generate_mesh, reflect_mesh};
use periprop::thrust::*;
use periprop::timeloop::seek_periodic;

fn mesh_disc(shape: &BodyShape) -> Discretization {
    let mesh = generate_mesh(shape, &DomainSpec::new(4.0), 0.5, 0.1).unwrap();
    Discretization::new(mesh, ElementMode::TaylorHood).unwrap()
}

fn config(force: ForceKind, h: f64, n: usize) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.problem.force = force;
    cfg.problem.h = h;
    cfg.time.n_steps = n;
    cfg.time.periodic_tol = 1e-10;
    cfg
}

#[test]
fn reflected_mesh_negates_the_thrust() {
    let mesh = generate_mesh(&BodyShape::drop(), &DomainSpec::new(4.0), 0.5, 0.1).unwrap();
    let a = Discretization::new(mesh.clone(), ElementMode::TaylorHood).unwrap();
    let b = Discretization::new(reflect_mesh(&mesh), ElementMode::TaylorHood).unwrap();
    for force in [ForceKind::Y1, ForceKind::Y2] {
        let cfg = config(force, 3.0, 40);
        let (ta, _, _) = linear_thrust(&a, &cfg).unwrap();
        let (tb, _, _) = linear_thrust(&b, &cfg).unwrap();
        assert!(ta.g_z != 0.0);
        assert!((ta.g_z + tb.g_z).abs() <= 1e-8 * ta.g_z.abs(), "{} vs {}", ta.g_z, tb.g_z);
        assert!((ta.k - tb.k).abs() <= 1e-10 * ta.k);
    }
}

#[test]
fn symmetric_body_has_no_thrust() {
    let drop = mesh_disc(&BodyShape::drop());
    let ellipsoid = mesh_disc(&BodyShape::ellipsoid());
    for force in [ForceKind::Y1, ForceKind::Y2, ForceKind::Y3] {
        let cfg = config(force, 3.0, 40);
        let (td, _, _) = linear_thrust(&drop, &cfg).unwrap();
        let (te, _, _) = linear_thrust(&ellipsoid, &cfg).unwrap();
        assert!(te.g_z.abs() <= 1e-6 * td.g_z.abs(), "{force:?}: {} vs {}", te.g_z, td.g_z);
    }
}

#[test]
fn thrust_is_quadratic_in_the_forcing_amplitude() {
    let disc = mesh_disc(&BodyShape::drop());
    let cfg = config(ForceKind::Y2, 3.0, 40);
    let aux = resistance(&disc).unwrap();
    let base = ForcingProfile::new(ForceKind::Y2, 40);
    let g = |scale: f64| {
        let sol = seek_periodic(&disc, &cfg, &base.scaled(scale), Regime::Linear).unwrap();
        compute_thrust(&disc, &sol, &aux, 3.0).unwrap().g_z
    };
    let (g1, g2, gm) = (g(1.0), g(2.0), g(-1.0));
    assert!((g2 - 4.0 * g1).abs() <= 1e-8 * g2.abs(), "{g1} {g2}");
    assert!((gm - g1).abs() <= 1e-8 * g1.abs(), "{g1} {gm}");
}

#[test]
fn result_is_consistent_and_time_converged() {
    let disc = mesh_disc(&BodyShape::drop());
    let (a, sol, aux) = linear_thrust(&disc, &config(ForceKind::Y1, 3.0, 200)).unwrap();
    let (b, _, _) = linear_thrust(&disc, &config(ForceKind::Y1, 3.0, 400)).unwrap();
    assert_eq!(a.gamma0_bar * a.k, a.g_z);
    assert_eq!(a.gamma0_bar.signum(), a.g_z.signum());
    assert_eq!(a.k, aux.k);
    assert!((a.g_z - b.g_z).abs() <= 0.01 * a.g_z.abs(), "{} vs {}", a.g_z, b.g_z);
    assert!(sol.converged);
}

#[test]
fn mismatched_meshes_are_rejected() {
    let a = mesh_disc(&BodyShape::drop());
    let b = mesh_disc(&BodyShape::ellipsoid());
    let cfg = config(ForceKind::Y1, 3.0, 20);
    let sol = seek_periodic(&a, &cfg, &ForcingProfile::new(ForceKind::Y1, 20), Regime::Linear).unwrap();
    let aux = resistance(&b).unwrap();
    assert!(matches!(compute_thrust(&a, &sol, &aux, 3.0), Err(ThrustError::MeshMismatch)));
}

#[test]
fn sweep_isolates_each_stokes_number() {
    let disc = mesh_disc(&BodyShape::flipped_drop());
    let mut cfg = config(ForceKind::Y2, 1.0, 40);
    cfg.time.periodic_tol = 1e-8;
    let sweep = sweep_h(&disc, &cfg, &[1.0, 2.0]);
    assert_eq!(sweep.len(), 2);
    for (r, h) in sweep.iter().zip([1.0, 2.0]) {
        let r = r.as_ref().unwrap();
        let mut single = cfg.clone();
        single.problem.h = h;
        let (t, _, _) = linear_thrust(&disc, &single).unwrap();
        assert_eq!(r.h, h);
        assert!((r.g_z - t.g_z).abs() <= 1e-12 * t.g_z.abs());
    }
}

#[test]
fn json_uses_the_documented_field_names() {
    let t = ThrustResult::new(8.0, -0.5, 2.0);
    let v: serde_json::Value = serde_json::to_value(t).unwrap();
    for key in ["h", "G_z", "K", "gamma0_bar"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert_eq!(v["gamma0_bar"], -0.25);
}
