//! Graded constrained Delaunay meshing of the meridian domain.

use super::{AxiMesh, BoundaryEdge, BoundaryTag, MeshError};
use crate::geometry::{BodyKind, BodyShape, DomainSpec};
use spade::handles::{FixedFaceHandle, InnerTag};
use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters,
    Triangulation,
};
use std::collections::{BTreeMap, HashSet};
use std::f64::consts::PI;

const POLYLINE_SEGMENTS: usize = 512;
const ARC_SAMPLES: usize = 8192;

/// Target edge length as a function of the distance to the body:
/// `σ(d) = size_body + (size_far − size_body) · min(1, d / grade_length)`.
#[derive(Debug, Clone)]
pub struct SizeField {
    pub size_body: f64,
    pub size_far: f64,
    pub grade_length: f64,
    polyline: Vec<[f64; 2]>,
}

impl SizeField {
    pub fn new(shape: &BodyShape, outer_radius: f64, size_body: f64, size_far: f64) -> Self {
        let polyline = (0..=POLYLINE_SEGMENTS)
            .map(|i| curve_point_exact(shape, PI * i as f64 / POLYLINE_SEGMENTS as f64))
            .collect();
        Self {
            size_body,
            size_far,
            grade_length: 0.5 * outer_radius,
            polyline,
        }
    }

    pub fn body_distance(&self, p: [f64; 2]) -> f64 {
        self.polyline
            .windows(2)
            .map(|w| segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn size_at_distance(&self, d: f64) -> f64 {
        self.size_body + (self.size_far - self.size_body) * (d.max(0.0) / self.grade_length).min(1.0)
    }

    pub fn size_at(&self, p: [f64; 2]) -> f64 {
        self.size_at_distance(self.body_distance(p))
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let d = [ap[0] - t * ab[0], ap[1] - t * ab[1]];
    (d[0] * d[0] + d[1] * d[1]).sqrt()
}

/// Curve point with the poles placed exactly on the axis.
fn curve_point_exact(shape: &BodyShape, theta: f64) -> [f64; 2] {
    if theta <= 0.0 {
        [0.0, shape.half_length()]
    } else if theta >= PI {
        [0.0, -shape.half_length()]
    } else if theta == 0.5 * PI {
        [1.0 / shape.c_r.sqrt(), 0.0]
    } else {
        shape.curve_point(theta)
    }
}

/// Body vertices at equal arc length between `theta0` and `theta1`
/// (both ends included).
fn body_points(shape: &BodyShape, theta0: f64, theta1: f64, size: f64) -> Vec<[f64; 2]> {
    let mut cumulative = Vec::with_capacity(ARC_SAMPLES + 1);
    cumulative.push(0.0);
    let mut prev = curve_point_exact(shape, theta0);
    for i in 1..=ARC_SAMPLES {
        let t = theta0 + (theta1 - theta0) * i as f64 / ARC_SAMPLES as f64;
        let p = curve_point_exact(shape, t);
        let last = *cumulative.last().unwrap();
        cumulative.push(last + ((p[0] - prev[0]).powi(2) + (p[1] - prev[1]).powi(2)).sqrt());
        prev = p;
    }
    let total = *cumulative.last().unwrap();
    let n = (total / size).ceil().max(2.0) as usize;
    let mut out = Vec::with_capacity(n + 1);
    out.push(curve_point_exact(shape, theta0));
    let mut j = 0;
    for k in 1..n {
        let s = total * k as f64 / n as f64;
        while cumulative[j + 1] < s {
            j += 1;
        }
        let frac = (s - cumulative[j]) / (cumulative[j + 1] - cumulative[j]);
        let t = theta0 + (theta1 - theta0) * (j as f64 + frac) / ARC_SAMPLES as f64;
        out.push(curve_point_exact(shape, t));
    }
    out.push(curve_point_exact(shape, theta1));
    out
}

/// Points on the straight segment `a → b` spaced by the size field
/// (both ends included).
fn graded_segment(a: [f64; 2], b: [f64; 2], field: &SizeField) -> Vec<[f64; 2]> {
    const SAMPLES: usize = 2048;
    let lerp = |t: f64| -> [f64; 2] {
        if t >= 1.0 {
            return b;
        }
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    };
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    let mut cumulative = vec![0.0];
    for i in 1..=SAMPLES {
        let tm = (i as f64 - 0.5) / SAMPLES as f64;
        let last = *cumulative.last().unwrap();
        cumulative.push(last + len / SAMPLES as f64 / field.size_at(lerp(tm)));
    }
    let total = *cumulative.last().unwrap();
    let n = total.ceil().max(1.0) as usize;
    let mut out = vec![a];
    let mut j = 0;
    for k in 1..n {
        let s = total * k as f64 / n as f64;
        while cumulative[j + 1] < s {
            j += 1;
        }
        let frac = (s - cumulative[j]) / (cumulative[j + 1] - cumulative[j]);
        let p = lerp((j as f64 + frac) / SAMPLES as f64);
        // keep coordinates that are constant along the segment exact
        out.push([
            if a[0] == b[0] { a[0] } else { p[0] },
            if a[1] == b[1] { a[1] } else { p[1] },
        ]);
    }
    out.push(b);
    out
}

/// Triangulates the meridian domain around `shape`.
///
/// Mirror-symmetric bodies are meshed on the upper half and reflected so that
/// the mesh is exactly symmetric; the flipped drop reuses the reflected drop
/// mesh.
pub fn generate_mesh(
    shape: &BodyShape,
    domain: &DomainSpec,
    size_far: f64,
    size_body: f64,
) -> Result<AxiMesh, MeshError> {
    if !(size_body > 0.0 && size_far > 0.0 && size_body.is_finite() && size_far.is_finite()) {
        return Err(MeshError::InvalidSizes(format!(
            "sizes must be positive, got size_body={size_body}, size_far={size_far}"
        )));
    }
    if size_body > size_far {
        return Err(MeshError::InvalidSizes(format!(
            "size_body={size_body} exceeds size_far={size_far}"
        )));
    }
    domain.validate(shape)?;
    if size_far > 0.25 * domain.outer_radius {
        return Err(MeshError::InvalidSizes(format!(
            "size_far={size_far} too coarse for R={}",
            domain.outer_radius
        )));
    }
    if shape.taper < 0.0 && shape.kind == BodyKind::FlippedDrop {
        let mesh = generate_mesh(&shape.mirrored(), domain, size_far, size_body)?;
        return Ok(mesh.reflect());
    }
    let field = SizeField::new(shape, domain.outer_radius, size_body, size_far);
    let mesh = if shape.is_mirror_symmetric() {
        mirror_half(&mesh_region(shape, domain, &field, true)?)
    } else {
        mesh_region(shape, domain, &field, false)?
    };
    mesh.validate()?;
    Ok(mesh)
}

struct Loop {
    points: Vec<[f64; 2]>,
    edges: Vec<[usize; 2]>,
}

impl Loop {
    fn push_chain(&mut self, chain: &[[f64; 2]]) {
        // chain[0] coincides with the last pushed point
        for p in &chain[1..] {
            let i = self.points.len();
            self.points.push(*p);
            self.edges.push([i - 1, i]);
        }
    }
}

fn boundary_loop(shape: &BodyShape, domain: &DomainSpec, field: &SizeField, half: bool) -> Loop {
    let r_out = domain.outer_radius;
    let pole = shape.half_length();
    let (theta_end, z_bottom) = if half { (0.5 * PI, 0.0) } else { (PI, -r_out) };
    let body = body_points(shape, 0.0, theta_end, field.size_body);
    let body_end = *body.last().unwrap();
    let mut lp = Loop {
        points: vec![[0.0, r_out]],
        edges: Vec::new(),
    };
    lp.push_chain(&graded_segment([0.0, r_out], [0.0, pole], field));
    lp.push_chain(&body);
    if half {
        lp.push_chain(&graded_segment(body_end, [r_out, 0.0], field));
    } else {
        lp.push_chain(&graded_segment(body_end, [0.0, z_bottom], field));
        lp.push_chain(&graded_segment([0.0, z_bottom], [r_out, z_bottom], field));
    }
    lp.push_chain(&graded_segment([r_out, z_bottom], [r_out, r_out], field));
    let top = graded_segment([r_out, r_out], [0.0, r_out], field);
    lp.push_chain(&top[..top.len() - 1]);
    let n = lp.points.len();
    lp.edges.push([n - 1, 0]);
    lp
}

/// Interior seed points from a quadtree refined to the size field.
fn interior_points(
    shape: &BodyShape,
    domain: &DomainSpec,
    field: &SizeField,
    half: bool,
) -> Vec<[f64; 2]> {
    let r_out = domain.outer_radius;
    let z_bottom = if half { 0.0 } else { -r_out };
    let mut stack: Vec<([f64; 2], f64)> = if half {
        vec![([0.0, 0.0], r_out)]
    } else {
        vec![([0.0, 0.0], r_out), ([0.0, -r_out], r_out)]
    };
    let mut out = Vec::new();
    while let Some((corner, side)) = stack.pop() {
        let c = [corner[0] + 0.5 * side, corner[1] + 0.5 * side];
        let d = field.body_distance(c);
        let reach = std::f64::consts::FRAC_1_SQRT_2 * side;
        if side > field.size_at_distance(d - reach) {
            let h = 0.5 * side;
            for (dx, dz) in [(1.0, 1.0), (0.0, 1.0), (1.0, 0.0), (0.0, 0.0)] {
                stack.push(([corner[0] + dx * h, corner[1] + dz * h], h));
            }
            continue;
        }
        let margin = 0.55 * side;
        let inside_box = c[0] >= margin
            && r_out - c[0] >= margin
            && r_out - c[1] >= margin
            && c[1] - z_bottom >= margin;
        if !inside_box || d < margin {
            continue;
        }
        match shape.level_value(c[0], c[1]) {
            Ok(v) if v > 0.0 => out.push(c),
            _ => {}
        }
    }
    out.sort_by(|a, b| a[1].total_cmp(&b[1]).then(a[0].total_cmp(&b[0])));
    out
}

fn mesh_region(
    shape: &BodyShape,
    domain: &DomainSpec,
    field: &SizeField,
    half: bool,
) -> Result<AxiMesh, MeshError> {
    let r_out = domain.outer_radius;
    let z_bottom = if half { 0.0 } else { -r_out };
    let lp = boundary_loop(shape, domain, field, half);
    let n_boundary = lp.points.len();
    let mut points: Vec<Point2<f64>> = lp.points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    points.extend(
        interior_points(shape, domain, field, half)
            .into_iter()
            .map(|p| Point2::new(p[0], p[1])),
    );
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(points, lp.edges)
        .map_err(|e| MeshError::MeshingFailed {
            r: 0.0,
            z: 0.0,
            reason: format!("triangulation failed: {e:?}"),
        })?;
    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(25.0))
        .exclude_outer_faces(true)
        .with_max_additional_vertices(4 * n_boundary + 1000);
    let result = cdt.refine(params);
    if !result.refinement_complete {
        return Err(MeshError::MeshingFailed {
            r: 0.0,
            z: 0.0,
            reason: "quality refinement did not finish".into(),
        });
    }
    let excluded: HashSet<FixedFaceHandle<InnerTag>> = result.excluded_faces.into_iter().collect();

    let mut index_of: BTreeMap<usize, usize> = BTreeMap::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        for v in face.vertices() {
            index_of.insert(v.fix().index(), 0);
        }
    }
    let mut vertices = Vec::with_capacity(index_of.len());
    for (k, (handle, slot)) in index_of.iter_mut().enumerate() {
        *slot = k;
        let p = cdt.vertex(spade::handles::FixedVertexHandle::from_index(*handle)).position();
        vertices.push([p.x, p.y]);
    }
    let mut cells = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        let [a, b, c] = face.vertices().map(|v| index_of[&v.fix().index()]);
        cells.push([a, b, c]);
    }
    let mut boundary_edges = Vec::new();
    let mut snap = Vec::new();
    for edge in cdt.undirected_edges() {
        if !cdt.is_constraint_edge(edge.fix()) {
            continue;
        }
        let [va, vb] = edge.vertices().map(|v| v.fix().index());
        let (Some(&a), Some(&b)) = (index_of.get(&va), index_of.get(&vb)) else {
            continue;
        };
        let (p, q) = (vertices[a], vertices[b]);
        let tag = if p[0] == 0.0 && q[0] == 0.0 {
            BoundaryTag::Axis
        } else if p[0] == r_out && q[0] == r_out {
            BoundaryTag::Lateral
        } else if p[1] == r_out && q[1] == r_out {
            BoundaryTag::OutflowTop
        } else if p[1] == z_bottom && q[1] == z_bottom {
            if half {
                // symmetry line, interior after mirroring
                boundary_edges.push(BoundaryEdge { a, b, tag: BoundaryTag::OutflowBottom });
                continue;
            }
            BoundaryTag::OutflowBottom
        } else {
            if va >= n_boundary {
                snap.push(a);
            }
            if vb >= n_boundary {
                snap.push(b);
            }
            BoundaryTag::Body
        };
        boundary_edges.push(BoundaryEdge { a, b, tag });
    }
    snap.sort_unstable();
    snap.dedup();
    for v in snap {
        vertices[v] = project_to_body(shape, vertices[v]);
    }
    boundary_edges.sort_by_key(|e| (e.tag, e.a.min(e.b), e.a.max(e.b)));
    Ok(AxiMesh::new(vertices, cells, boundary_edges))
}

/// Newton projection along the level-set gradient.
fn project_to_body(shape: &BodyShape, mut p: [f64; 2]) -> [f64; 2] {
    for _ in 0..20 {
        let [r, z] = p;
        let s = 1.0 + shape.taper * z;
        let lam = shape.c_r * r * r / (s * s) + shape.c_z * z * z - 1.0;
        let gr = 2.0 * shape.c_r * r / (s * s);
        let gz = -2.0 * shape.c_r * r * r * shape.taper / (s * s * s) + 2.0 * shape.c_z * z;
        let g2 = gr * gr + gz * gz;
        if g2 == 0.0 || lam.abs() < 1e-15 {
            break;
        }
        p = [(r - lam * gr / g2).max(0.0), z - lam * gz / g2];
    }
    p
}

/// Glues the upper-half mesh to its mirror image along `z = 0`.
fn mirror_half(upper: &AxiMesh) -> AxiMesh {
    let n = upper.num_vertices();
    let mut vertices = upper.vertices.clone();
    let mut image = vec![0usize; n];
    for (i, v) in upper.vertices.iter().enumerate() {
        if v[1] == 0.0 {
            image[i] = i;
        } else {
            image[i] = vertices.len();
            vertices.push([v[0], -v[1]]);
        }
    }
    let mut cells = upper.cells.clone();
    cells.extend(upper.cells.iter().map(|&[a, b, c]| [image[a], image[c], image[b]]));
    let mut boundary_edges = Vec::new();
    for e in &upper.boundary_edges {
        if e.tag == BoundaryTag::OutflowBottom {
            continue;
        }
        boundary_edges.push(*e);
    }
    let mirrored: Vec<BoundaryEdge> = boundary_edges
        .iter()
        .map(|e| BoundaryEdge {
            a: image[e.b],
            b: image[e.a],
            tag: e.tag.mirrored(),
        })
        .collect();
    boundary_edges.extend(mirrored);
    AxiMesh::new(vertices, cells, boundary_edges)
}
