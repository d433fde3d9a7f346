use periprop::forcing::ForceKind;
use periprop::pipeline::{Display, LinearSummary, NonlinearSummary, RunParams, RunSummary};
use periprop::report::*;
use proptest::prelude::*;

fn params(shape: &str, force: ForceKind, h: f64) -> RunParams {
    RunParams {
        shape: shape.into(),
        force,
        h,
        radius: 8.0,
        size_body: 0.05,
        size_far: 0.5,
        n_steps: 200,
        dofs: 1000,
    }
}

fn linear(shape: &str, force: ForceKind, h: f64, g_z: f64) -> RunSummary {
    let k = 20.0;
    RunSummary::Linear(LinearSummary {
        kind: "linear".into(),
        params: params(shape, force, h),
        g_z,
        k,
        gamma0_bar: g_z / k,
        cycles: 5,
        periodic_residual: 1e-7,
        display: Display::default(),
    })
}

fn nonlinear(shape: &str, force: ForceKind, h: f64, mean_gamma: f64) -> RunSummary {
    RunSummary::Nonlinear(NonlinearSummary {
        kind: "nonlinear".into(),
        params: params(shape, force, h),
        mean_gamma,
        cycles_run: 6,
        cycle_residual: 1e-7,
        final_state_change: 1e-6,
        converged: true,
        display: Display::default(),
    })
}

const SHAPES: [&str; 3] = ["ellipsoid", "drop", "flipped-drop"];

#[test]
fn complete_table3_has_nine_rows_and_an_absolute_zero_check() {
    let targets = ReferenceTargets::builtin();
    let mut runs = Vec::new();
    for shape in SHAPES {
        for force in ForceKind::ALL {
            let cell = targets.table3.cells.iter().find(|c| c.shape.as_deref() == Some(shape) && c.force == Some(force)).unwrap();
            let v = cell.value.unwrap();
            runs.push(nonlinear(shape, force, 3.0, if v == 0.0 { 3e-4 } else { 1.1 * v }));
        }
    }
    let t = build_table(&runs, &targets, Target::Table3, false);
    assert_eq!(t.rows.len(), 9);
    assert_eq!(t.missing(), 0);
    let zero = t.rows.iter().find(|r| r.shape == "ellipsoid" && r.force == ForceKind::Y1).unwrap();
    assert_eq!(zero.reference, Some(0.0));
    assert_eq!(zero.tolerance, 5e-4);
    assert_eq!(zero.status, Status::Pass);
    assert!(t.rows.iter().all(|r| r.status == Status::Pass));
}

#[test]
fn partial_table1_marks_missing_rows() {
    let targets = ReferenceTargets::builtin();
    let runs: Vec<RunSummary> = ForceKind::ALL.iter().map(|&f| linear("drop", f, 8.0, -0.02)).collect();
    let t = build_table(&runs, &targets, Target::Table1, false);
    assert_eq!(t.rows.len(), 9);
    assert_eq!(t.missing(), 6);
    assert_eq!(t.rows.iter().filter(|r| r.computed.is_some()).count(), 3);
    assert!(to_markdown(&t).contains("6 run(s) missing"));
    assert!(t.pairs.is_empty());
}

#[test]
fn table1_normalization_and_pair_check() {
    let targets = ReferenceTargets::builtin();
    let scale = 2.0 * std::f64::consts::PI;
    let mut runs = Vec::new();
    for cell in &targets.table1.cells {
        let shape = cell.shape.as_deref().unwrap();
        runs.push(linear(shape, cell.force.unwrap(), 8.0, scale * cell.value.unwrap()));
    }
    let raw = build_table(&runs, &targets, Target::Table1, false);
    assert!(raw.rows.iter().any(|r| r.status == Status::Fail));
    let t = build_table(&runs, &targets, Target::Table1, true);
    assert!((t.normalization.unwrap() - scale).abs() < 1e-12);
    assert!(t.rows.iter().all(|r| r.status == Status::Pass), "{:?}", t.rows);
    assert_eq!(t.pairs.len(), 3);
    assert!(t.pairs.iter().all(|p| p.pass));

    let far: Vec<RunSummary> = targets
        .table1
        .cells
        .iter()
        .map(|c| linear(c.shape.as_deref().unwrap(), c.force.unwrap(), 8.0, 20.0 * c.value.unwrap()))
        .collect();
    let t = build_table(&far, &targets, Target::Table1, true);
    assert_eq!(t.normalization, None);
    assert!((t.fitted_constant.unwrap() - 20.0).abs() < 1e-9);
}

#[test]
fn table2_ratio_column() {
    let targets = ReferenceTargets::builtin();
    let runs: Vec<RunSummary> = [1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|&h| linear("flipped-drop", ForceKind::Y2, h, 20.0 * 1e-4 * h * h))
        .collect();
    let t = build_table(&runs, &targets, Target::Table2, false);
    let row = |h: f64| t.rows.iter().find(|r| r.h == h).unwrap();
    assert!((row(1.0).ratio.unwrap() - 4.0).abs() < 1e-12);
    assert!((row(4.0).ratio.unwrap() - 4.0).abs() < 1e-12);
    assert_eq!(row(8.0).ratio, None);
    assert!((row(64.0).reference_ratio.unwrap() - 177.80 / 42.62).abs() < 1e-12);
    assert_eq!(t.missing(), 5);
}

#[test]
fn rebuilding_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    for (i, force) in ForceKind::ALL.iter().enumerate() {
        for shape in SHAPES {
            let sub = dir.path().join(format!("{shape}_{i}"));
            std::fs::create_dir(&sub).unwrap();
            let RunSummary::Linear(s) = linear(shape, *force, 8.0, 0.01 * (i as f64 + 1.0)) else { unreachable!() };
            std::fs::write(sub.join("summary.json"), serde_json::to_string(&s).unwrap()).unwrap();
        }
    }
    let targets = ReferenceTargets::builtin();
    let render = || {
        let runs = load_runs(dir.path()).unwrap();
        assert_eq!(runs.len(), 9);
        let t = build_table(&runs, &targets, Target::Table1, true);
        (to_markdown(&t), to_csv(&t))
    };
    assert_eq!(render(), render());
}

#[test]
fn unconverged_nonlinear_runs_do_not_count() {
    let targets = ReferenceTargets::builtin();
    let RunSummary::Nonlinear(mut s) = nonlinear("drop", ForceKind::Y2, 3.0, 0.04) else { unreachable!() };
    s.converged = false;
    let t = build_table(&[RunSummary::Nonlinear(s)], &targets, Target::Table3, false);
    assert_eq!(t.missing(), 9);
}

proptest! {
    #[test]
    fn deviation_is_scale_free_and_passes_consistently(c in -1e3f64..1e3, p in -1e3f64..1e3, tol in 0.0f64..1.0) {
        prop_assume!(p.abs() > 1e-3);
        let d = deviation(c, p);
        prop_assert!((d - deviation(7.0 * c, 7.0 * p)).abs() <= 1e-12 * d.max(1.0));
        let (dev, used, pass) = compare(c, p, tol, 1e-4);
        prop_assert_eq!(dev, d);
        prop_assert_eq!(used, tol);
        prop_assert_eq!(pass, d <= tol);
    }

    #[test]
    fn fitted_constant_is_exact_for_proportional_data(c in 0.1f64..10.0, v in proptest::collection::vec(-1.0f64..1.0, 1..9)) {
        prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
        let pairs: Vec<(f64, f64)> = v.iter().map(|&p| (c * p, p)).collect();
        prop_assert!((fit_constant(&pairs).unwrap() - c).abs() <= 1e-12 * c);
    }
}
