use periprop::auxstokes::solve_auxiliary;
use periprop::fem::*;
use periprop::geometry::{BodyShape, DomainSpec};
use periprop::linsolve::{CsrMatrix, LuFactor};
use periprop::meshgen::{generate_mesh, refine_uniform, AxiMesh, BoundaryTag};

fn coarse(shape: BodyShape, radius: f64) -> AxiMesh {
    generate_mesh(&shape, &DomainSpec::new(radius), 0.5, 0.15).unwrap()
}

fn exact_velocity(r: f64, z: f64) -> [f64; 2] {
    [-r * z.cos() * r.cos(), z.sin() * (2.0 * r.cos() - r * r.sin())]
}

fn exact_pressure(r: f64, z: f64) -> f64 {
    r.cos() * z.sin()
}

fn volume_force(r: f64, z: f64) -> [f64; 2] {
    let (sr, cr, sz, cz) = (r.sin(), r.cos(), z.sin(), z.cos());
    [
        -2.0 * r * cr * cz - sr * sz - 3.0 * sr * cz,
        -2.0 * r * sr * sz + 7.0 * sz * cr + cr * cz + 3.0 * sr * sz / r,
    ]
}

/// Stokes problem with exact Dirichlet data on the whole boundary.
fn manufactured_error(mesh: AxiMesh) -> f64 {
    let cache = QuadCache::new(&mesh);
    let dm = build_spaces(&mesh, ElementMode::TaylorHood);
    let ops = assemble_operators(&cache, &dm);
    let k = ops.combine(&[(1.0, &ops.viscous), (1.0, &ops.divergence)]);
    let load = assemble_body_force(&cache, &dm, volume_force);
    let mut x = vec![0.0; dm.n_dofs()];
    let mut fixed = vec![false; dm.n_dofs()];
    for n in 0..dm.n_nodes {
        let tagged = BoundaryTag::ALL.iter().any(|&t| t != BoundaryTag::Axis && dm.node_has(n, t));
        let [r, z] = dm.node_coords[n];
        if tagged {
            let u = exact_velocity(r, z);
            x[dm.ur(n)] = u[0];
            x[dm.uz(n)] = u[1];
            fixed[dm.ur(n)] = true;
            fixed[dm.uz(n)] = true;
        } else if dm.node_has(n, BoundaryTag::Axis) {
            fixed[dm.ur(n)] = true;
        }
    }
    let [pr, pz] = dm.pressure_coords(0);
    x[dm.p(0)] = exact_pressure(pr, pz);
    fixed[dm.p(0)] = true;
    let (index, n_free) = free_index(&fixed);
    let (kff, _) = k.restrict(&index, n_free);
    let mut r = k.matvec(&x);
    r.iter_mut().zip(&load).for_each(|(ri, fi)| *ri -= fi);
    let rhs: Vec<f64> = restrict(&index, n_free, &r).iter().map(|v| -v).collect();
    let delta = LuFactor::new(&kff).unwrap().solve(&rhs).unwrap();
    for (i, &k) in index.iter().enumerate() {
        if k != usize::MAX {
            x[i] += delta[k];
        }
    }
    let field = FieldVP::from_values(&dm, x, 0.0);
    velocity_l2_error(&cache, &dm, &field, exact_velocity)
}

fn free_index(fixed: &[bool]) -> (Vec<usize>, usize) {
    let mut index = vec![usize::MAX; fixed.len()];
    let mut n = 0;
    for (i, f) in fixed.iter().enumerate() {
        if !f {
            index[i] = n;
            n += 1;
        }
    }
    (index, n)
}

fn restrict(index: &[usize], n: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, &k) in index.iter().enumerate() {
        if k != usize::MAX {
            out[k] = v[i];
        }
    }
    out
}

#[test]
fn manufactured_solution_converges_at_third_order() {
    let mut mesh = generate_mesh(&BodyShape::ellipsoid(), &DomainSpec::new(2.4), 0.6, 0.4).unwrap();
    let mut errors = vec![manufactured_error(mesh.clone())];
    for _ in 0..3 {
        mesh = refine_uniform(&mesh);
        errors.push(manufactured_error(mesh.clone()));
    }
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let overall = (errors[0] / errors[3]).log2() / 3.0;
    eprintln!("velocity L2 errors {errors:?}, orders {orders:?}");
    assert!(overall >= 2.5, "errors {errors:?}, orders {orders:?}");
    assert!(orders[2] >= 2.5, "errors {errors:?}, orders {orders:?}");
}

#[test]
fn dof_count_matches_element_combinatorics() {
    let mesh = coarse(BodyShape::drop(), 4.0);
    let mut edges = std::collections::BTreeSet::new();
    for c in &mesh.cells {
        for k in 0..3 {
            let (a, b) = (c[k], c[(k + 1) % 3]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let nv = mesh.num_vertices();
    let th = build_spaces(&mesh, ElementMode::TaylorHood);
    assert_eq!(th.n_dofs(), 2 * (nv + edges.len()) + nv);
    let lps = build_spaces(&mesh, ElementMode::EqualOrderLps);
    assert_eq!(lps.n_pressure, nv + edges.len());
    let cons = Constraints::new(&th, Regime::Linear).unwrap();
    assert_eq!(cons.n_free, th.n_dofs() - cons.body_uz.len() - cons.zero.len());
    for c in 0..th.n_cells() {
        let mut d = th.cell_dofs(c);
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), 12 + 3);
    }
}

#[test]
fn stokes_solution_is_discretely_divergence_free() {
    for mode in [ElementMode::TaylorHood, ElementMode::EqualOrderLps] {
        let disc = Discretization::new(coarse(BodyShape::drop(), 4.0), mode).unwrap();
        let h3 = solve_auxiliary(&disc).unwrap();
        let bu = disc.ops.divergence.matvec(&{
            let mut v = h3.values.clone();
            let nv = disc.dofs.n_velocity();
            v[nv..].iter_mut().for_each(|p| *p = 0.0);
            v
        });
        let sp = disc.ops.stabilization.matvec(&h3.values);
        let unorm = velocity_l2_norm(&disc.ops, &h3.values);
        let nv = disc.dofs.n_velocity();
        // (q, div u) for every pressure basis function q, against its own norm
        for k in 0..disc.dofs.n_pressure {
            let row = nv + k;
            let qnorm = pressure_basis_norm(&disc, k);
            let defect = (bu[row] - sp[row]).abs();
            assert!(defect <= 1e-9 * unorm * qnorm, "{mode:?} row {k}: {defect:e}");
        }
    }
}

fn pressure_basis_norm(disc: &Discretization, k: usize) -> f64 {
    let mut s = 0.0;
    for (c, cd) in disc.cache.cells.iter().enumerate() {
        for l in 0..disc.dofs.local_pressure() {
            if disc.dofs.cell_pressure(c, l) != k {
                continue;
            }
            for q in &cd.qp {
                let v = match disc.dofs.mode {
                    ElementMode::TaylorHood => q.lambda[l],
                    ElementMode::EqualOrderLps => q.phi[l],
                };
                s += q.w * v * v;
            }
        }
    }
    s.sqrt()
}

#[test]
fn lift_field_takes_its_boundary_values() {
    let disc = Discretization::new(coarse(BodyShape::ellipsoid(), 4.0), ElementMode::TaylorHood).unwrap();
    let dm = &disc.dofs;
    let z = &disc.lift.field;
    let mut interior_nonzero = 0;
    for n in 0..dm.n_nodes {
        assert_eq!(z.ur()[n], 0.0);
        if dm.node_has(n, BoundaryTag::Body) {
            assert_eq!(z.uz()[n], 1.0);
        } else if [BoundaryTag::Lateral, BoundaryTag::OutflowTop, BoundaryTag::OutflowBottom]
            .iter()
            .any(|&t| dm.node_has(n, t))
        {
            assert_eq!(z.uz()[n], 0.0);
        } else if z.uz()[n] != 0.0 {
            interior_nonzero += 1;
        }
    }
    assert!(interior_nonzero > 0);
    // support is confined to a band around the body
    let far = (0..dm.n_nodes).filter(|&n| {
        let [r, zc] = dm.node_coords[n];
        r * r + zc * zc > 9.0
    });
    for n in far {
        assert_eq!(z.uz()[n], 0.0);
    }
}

#[test]
fn dirichlet_values_hold_exactly() {
    let disc = Discretization::new(coarse(BodyShape::drop(), 4.0), ElementMode::TaylorHood).unwrap();
    let h3 = solve_auxiliary(&disc).unwrap();
    let dm = &disc.dofs;
    for n in 0..dm.n_nodes {
        if dm.node_has(n, BoundaryTag::Body) {
            assert_eq!(h3.uz()[n], 1.0);
            assert_eq!(h3.ur()[n], 0.0);
        }
        if dm.node_has(n, BoundaryTag::Axis) {
            assert_eq!(h3.ur()[n], 0.0);
        }
        if dm.node_has(n, BoundaryTag::Lateral) {
            assert_eq!(h3.uz()[n], 0.0);
        }
    }
}

#[test]
fn pressure_shift_leaves_the_velocity_equations_unchanged() {
    let disc = Discretization::new(coarse(BodyShape::drop(), 4.0), ElementMode::TaylorHood).unwrap();
    let h3 = solve_auxiliary(&disc).unwrap();
    let cons = Constraints::new(&disc.dofs, Regime::Closed).unwrap();
    let mut shifted = h3.values.clone();
    let nv = disc.dofs.n_velocity();
    shifted[nv..].iter_mut().for_each(|p| *p += 2.5);
    let a = cons.restrict(&disc.stokes_action(&h3.values));
    let b = cons.restrict(&disc.stokes_action(&shifted));
    let scale = disc.stokes_action(&h3.values).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-10 * scale);
    }
}

#[test]
fn translating_body_carries_the_nearby_fluid() {
    let mesh = generate_mesh(&BodyShape::sphere(1.0), &DomainSpec::new(16.0), 1.0, 0.1).unwrap();
    let disc = Discretization::new(mesh, ElementMode::TaylorHood).unwrap();
    let h3 = solve_auxiliary(&disc).unwrap();
    for theta in [0.3f64, 0.9, 1.5, 2.2, 2.9] {
        let d = 1.02;
        let p = [d * theta.sin(), d * theta.cos()];
        let u = evaluate_velocity(&disc.mesh, &disc.dofs, &h3, p).unwrap();
        assert!((u[1] - 1.0).abs() < 0.05 && u[0].abs() < 0.05, "{theta}: {u:?}");
    }
}

fn permuted(mesh: &AxiMesh, seed: u64) -> AxiMesh {
    let n = mesh.num_vertices();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut s = seed;
    for i in (1..n).rev() {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        perm.swap(i, (s >> 33) as usize % (i + 1));
    }
    let mut vertices = vec![[0.0; 2]; n];
    for (old, &new) in perm.iter().enumerate() {
        vertices[new] = mesh.vertices[old];
    }
    let cells = mesh.cells.iter().rev().map(|c| [perm[c[1]], perm[c[2]], perm[c[0]]]).collect();
    let edges = mesh
        .boundary_edges
        .iter()
        .map(|e| periprop::meshgen::BoundaryEdge {
            a: perm[e.a],
            b: perm[e.b],
            tag: e.tag,
        })
        .collect();
    AxiMesh::new(vertices, cells, edges)
}

fn interpolate(dm: &DofMap, f: impl Fn(f64, f64) -> [f64; 3]) -> Vec<f64> {
    let mut v = vec![0.0; dm.n_dofs()];
    for n in 0..dm.n_nodes {
        let [r, z] = dm.node_coords[n];
        let u = f(r, z);
        v[dm.ur(n)] = u[0];
        v[dm.uz(n)] = u[1];
    }
    for k in 0..dm.n_pressure {
        let [r, z] = dm.pressure_coords(k);
        v[dm.p(k)] = f(r, z)[2];
    }
    v
}

#[test]
fn assembly_is_independent_of_vertex_numbering() {
    let mesh = coarse(BodyShape::drop(), 4.0);
    let other = permuted(&mesh, 7);
    other.validate().unwrap();
    let smooth = |r: f64, z: f64| [r * (0.3 * z).sin(), (r + z).cos(), r * r - z];
    let mut values = Vec::new();
    for m in [&mesh, &other] {
        let cache = QuadCache::new(m);
        let dm = build_spaces(m, ElementMode::TaylorHood);
        let ops = assemble_operators(&cache, &dm);
        let x = interpolate(&dm, smooth);
        let forms: Vec<f64> = [&ops.mass, &ops.viscous, &ops.divergence]
            .iter()
            .map(|a: &&CsrMatrix| a.bilinear(&x, &x))
            .collect();
        let disc = Discretization::new(m.clone(), ElementMode::TaylorHood).unwrap();
        let k = periprop::auxstokes::resistance(&disc).unwrap().k;
        values.push((forms, k));
    }
    let (a, b) = (&values[0], &values[1]);
    for (x, y) in a.0.iter().zip(&b.0) {
        assert!((x - y).abs() <= 1e-13 * x.abs().max(1.0), "{x} vs {y}");
    }
    assert!((a.1 - b.1).abs() <= 1e-10 * a.1);
}
