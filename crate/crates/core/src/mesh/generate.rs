//! Benchmark mesh generators.
//!
//! The disk is a structured ring mesh; the square-with-interface and the
//! channel are constrained Delaunay triangulations of a hexagonal point
//! lattice whose boundary and interface segments are enforced as constraints.

use std::f64::consts::PI;

use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use super::{Point, TriMesh};
use crate::{Error, Result};

/// Quasi-uniform ring mesh of a disk; the boundary is tagged `outer`.
///
/// Ring `k` of `n` carries `m * k` nodes, so the mesh has `1 + m n (n + 1) / 2`
/// nodes and `m n^2` triangles. With `m = 6` and `n = 50` this is the classic
/// 7651-node, 15000-triangle disk.
pub fn generate_disk(center: Point, radius: f64, target_elems: usize) -> Result<TriMesh> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidInput(format!("disk radius must be positive, got {radius}")));
    }
    if target_elems < 4 {
        return Err(Error::InvalidInput("a disk needs at least 4 triangles".into()));
    }
    let (rings, first) = if target_elems < 24 {
        (1usize, target_elems)
    } else {
        let n = ((target_elems as f64 / 6.0).sqrt().round() as usize).max(1);
        let m = ((target_elems as f64 / (n * n) as f64).round() as usize).max(4);
        (n, m)
    };

    let mut coords = vec![center];
    let mut ring_start = vec![0usize];
    for k in 1..=rings {
        ring_start.push(coords.len());
        let count = first * k;
        let r = radius * k as f64 / rings as f64;
        for j in 0..count {
            let theta = 2.0 * PI * j as f64 / count as f64;
            coords.push([center[0] + r * theta.cos(), center[1] + r * theta.sin()]);
        }
    }

    let mut triangles = Vec::with_capacity(first * rings * rings);
    for k in 1..=rings {
        let outer = first * k;
        let inner = first * (k - 1);
        let o = |q: usize| ring_start[k] + q % outer;
        if k == 1 {
            for q in 0..outer {
                triangles.push([0, o(q), o(q + 1)]);
            }
            continue;
        }
        let i = |p: usize| ring_start[k - 1] + p % inner;
        let (mut p, mut q) = (0usize, 0usize);
        while p < inner || q < outer {
            // advance along whichever ring has the next node at the smaller angle
            let next_outer = (q + 1) as f64 / outer as f64;
            let next_inner = (p + 1) as f64 / inner as f64;
            if q < outer && (p == inner || next_outer <= next_inner) {
                triangles.push([i(p), o(q), o(q + 1)]);
                q += 1;
            } else {
                triangles.push([i(p), o(q), i(p + 1)]);
                p += 1;
            }
        }
    }

    let start = ring_start[rings];
    let count = first * rings;
    let facets = (0..count).map(|q| ([start + q, start + (q + 1) % count], "outer".to_string())).collect();
    TriMesh::new(coords, triangles, facets)
}

/// Structured `nx x ny` rectangle mesh with alternating diagonals; sides are
/// tagged `bottom`, `right`, `top` and `left`.
pub fn generate_rectangle(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<TriMesh> {
    if !(x1 > x0 && y1 > y0) || nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("empty rectangle".into()));
    }
    let node = |i: usize, j: usize| j * (nx + 1) + i;
    let mut coords = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx { x1 } else { x0 + (x1 - x0) * i as f64 / nx as f64 };
            let y = if j == ny { y1 } else { y0 + (y1 - y0) * j as f64 / ny as f64 };
            coords.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    let mut facets = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        facets.push(([node(i, 0), node(i + 1, 0)], "bottom".to_string()));
        facets.push(([node(i + 1, ny), node(i, ny)], "top".to_string()));
    }
    for j in 0..ny {
        facets.push(([node(nx, j), node(nx, j + 1)], "right".to_string()));
        facets.push(([node(0, j + 1), node(0, j)], "left".to_string()));
    }
    TriMesh::new(coords, triangles, facets)
}

/// Inclusion shape for [`generate_square_with_interface`].
#[derive(Debug, Clone, PartialEq)]
pub enum InnerShape {
    /// Axis-aligned square given by center and edge length.
    Square {
        center: Point,
        edge: f64,
    },
    /// Counterclockwise simple polygon.
    Polygon(Vec<Point>),
    Circle {
        center: Point,
        radius: f64,
    },
}

/// Unit square `(0,1)^2` with a conforming inclusion.
///
/// Outer sides are tagged `bottom`, `right`, `top`, `left`; the inclusion
/// boundary is tagged `interface`; triangles carry the regions `in` and `out`.
pub fn generate_square_with_interface(inner: &InnerShape, target_elems: usize) -> Result<TriMesh> {
    if target_elems < 8 {
        return Err(Error::InvalidInput("target element count too small".into()));
    }
    if let InnerShape::Polygon(p) = inner {
        if p.len() < 3 {
            return Err(Error::InvalidInput("inclusion polygon needs three vertices".into()));
        }
    }
    let (lo, hi) = inner_bounds(inner);
    if !(lo[0] > 0.0 && lo[1] > 0.0 && hi[0] < 1.0 && hi[1] < 1.0) {
        return Err(Error::InvalidInput("inclusion must lie strictly inside the unit square".into()));
    }
    // a hexagonal lattice of spacing h yields about 4 A / (sqrt(3) h^2) triangles
    let mut h = (4.0 / (3f64.sqrt() * target_elems as f64)).sqrt();
    fit_to_target(target_elems, &mut h, |h| build_square_with_interface(inner, h))
}

fn inner_bounds(inner: &InnerShape) -> (Point, Point) {
    match inner {
        InnerShape::Square { center, edge } => {
            ([center[0] - edge / 2.0, center[1] - edge / 2.0], [center[0] + edge / 2.0, center[1] + edge / 2.0])
        }
        InnerShape::Circle { center, radius } => {
            ([center[0] - radius, center[1] - radius], [center[0] + radius, center[1] + radius])
        }
        InnerShape::Polygon(p) => p.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), q| {
            ([lo[0].min(q[0]), lo[1].min(q[1])], [hi[0].max(q[0]), hi[1].max(q[1])])
        }),
    }
}

fn build_square_with_interface(inner: &InnerShape, h: f64) -> Result<TriMesh> {
    let mut pslg = Pslg::default();
    let corners = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let sides = ["bottom", "right", "top", "left"];
    let outer = pslg.add_polyline_loop(&corners, &sides, h);
    let vertices: Vec<Point> = match inner {
        InnerShape::Square { center, edge } => {
            let (a, b) = (edge / 2.0, edge / 2.0);
            vec![
                [center[0] - a, center[1] - b],
                [center[0] + a, center[1] - b],
                [center[0] + a, center[1] + b],
                [center[0] - a, center[1] + b],
            ]
        }
        InnerShape::Polygon(p) => p.clone(),
        InnerShape::Circle { center, radius } => circle_points(*center, *radius, h),
    };
    let tags = vec!["interface"; vertices.len()];
    let spacing = if matches!(inner, InnerShape::Circle { .. }) { f64::INFINITY } else { h };
    let inclusion = pslg.add_polyline_loop(&vertices, &tags, spacing);
    let inclusion_poly: Vec<Point> = inclusion.iter().map(|&i| pslg.points[i]).collect();
    let outer_poly: Vec<Point> = outer.iter().map(|&i| pslg.points[i]).collect();

    // An interior vertex inside every convex corner of the inclusion, so no
    // triangle has all three vertices on the interface.
    let steiner: Vec<Point> = if spacing.is_finite() { corner_points(&vertices, h) } else { Vec::new() };
    let lattice = hex_lattice([0.0, 0.0], [1.0, 1.0], h);
    let mut interior: Vec<Point> = lattice
        .into_iter()
        .filter(|&p| pslg.distance_to_segments(p) > 0.55 * h)
        .filter(|&p| steiner.iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) > 0.7 * h))
        .filter(|&p| point_in_polygon(p, &outer_poly))
        .collect();
    interior.extend(steiner);
    pslg.triangulate(interior, |c| {
        if !point_in_polygon(c, &outer_poly) {
            None
        } else if point_in_polygon(c, &inclusion_poly) {
            Some("in".to_string())
        } else {
            Some("out".to_string())
        }
    })
}

/// Geometry of the obstacle benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub lower: Point,
    pub upper: Point,
    pub center: Point,
    pub radius: f64,
    /// Ratio of far-field to obstacle mesh spacing.
    pub refinement: f64,
    /// Growth rate of the spacing with distance from the obstacle.
    pub grading: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self { lower: [-3.0, -2.0], upper: [6.0, 2.0], center: [0.0, 0.0], radius: 0.5, refinement: 3.0, grading: 0.25 }
    }
}

/// Channel with a circular hole; tags `inlet` (left), `outlet` (right),
/// `wall` (top and bottom) and `obstacle`.
pub fn generate_channel_with_obstacle(spec: &ChannelSpec, target_elems: usize) -> Result<TriMesh> {
    let ChannelSpec { lower, upper, center, radius, refinement, grading } = spec.clone();
    if !(radius > 0.0) || !(refinement >= 1.0) || !(grading > 0.0) {
        return Err(Error::InvalidInput("invalid channel parameters".into()));
    }
    if center[0] - radius <= lower[0]
        || center[0] + radius >= upper[0]
        || center[1] - radius <= lower[1]
        || center[1] + radius >= upper[1]
    {
        return Err(Error::InvalidInput("obstacle must lie strictly inside the channel".into()));
    }
    if target_elems < 50 {
        return Err(Error::InvalidInput("target element count too small".into()));
    }
    let area = (upper[0] - lower[0]) * (upper[1] - lower[1]) - PI * radius * radius;
    let mut h = (4.0 * area / (3f64.sqrt() * target_elems as f64)).sqrt();
    fit_to_target(target_elems, &mut h, |h| build_channel(spec, h))
}

fn build_channel(spec: &ChannelSpec, h_max: f64) -> Result<TriMesh> {
    let ChannelSpec { lower, upper, center, radius, refinement, grading } = spec.clone();
    let h_min = h_max / refinement;
    let spacing = |r: f64| (h_min + grading * (r - radius)).min(h_max);

    let mut pslg = Pslg::default();
    let corners = [lower, [upper[0], lower[1]], upper, [lower[0], upper[1]]];
    let outer = pslg.add_polyline_loop(&corners, &["wall", "outlet", "wall", "inlet"], h_max);
    // an even count puts vertices on both stagnation points
    let n_obstacle = 2 * ((PI * radius / h_min).round() as usize).max(4);
    let obstacle_pts = circle_points_n(center, radius, n_obstacle);
    // clockwise around the hole keeps the flow domain on the left
    let obstacle_cw: Vec<Point> = obstacle_pts.iter().rev().copied().collect();
    let hole = pslg.add_polyline_loop(&obstacle_cw, &vec!["obstacle"; obstacle_cw.len()], f64::INFINITY);
    let hole_poly: Vec<Point> = hole.iter().map(|&i| pslg.points[i]).collect();
    let outer_poly: Vec<Point> = outer.iter().map(|&i| pslg.points[i]).collect();

    let inside_box = |p: Point, margin: f64| {
        p[0] > lower[0] + margin && p[0] < upper[0] - margin && p[1] > lower[1] + margin && p[1] < upper[1] - margin
    };

    // graded rings around the obstacle
    let mut interior = Vec::new();
    let mut r = radius + spacing(radius) * 3f64.sqrt() / 2.0;
    let mut layer = 1usize;
    while spacing(r) < h_max {
        let h = spacing(r);
        let count = ((2.0 * PI * r / h).round() as usize).max(6);
        let shift = if layer % 2 == 1 { 0.5 } else { 0.0 };
        for j in 0..count {
            let theta = 2.0 * PI * (j as f64 + shift) / count as f64;
            let p = [center[0] + r * theta.cos(), center[1] + r * theta.sin()];
            if inside_box(p, 0.55 * h) {
                interior.push(p);
            }
        }
        r += h * 3f64.sqrt() / 2.0;
        layer += 1;
    }
    let r_far = r;
    for p in hex_lattice(lower, upper, h_max) {
        let d = (p[0] - center[0]).hypot(p[1] - center[1]);
        if d >= r_far && inside_box(p, 0.55 * h_max) {
            interior.push(p);
        }
    }
    pslg.triangulate(interior, |c| {
        (point_in_polygon(c, &outer_poly) && !point_in_polygon(c, &hole_poly)).then(|| "domain".to_string())
    })
    .map(|mesh| {
        // one region only: drop the explicit name table
        let regions = None;
        let facets =
            mesh.facets().iter().enumerate().map(|(f, &nodes)| (nodes, mesh.facet_tag(f).to_string())).collect();
        TriMesh::from_parts(mesh.coords().to_vec(), mesh.triangles().to_vec(), regions, facets)
    })?
}

/// Rescales the lattice spacing until the element count is within 2% of the
/// target (or the iteration budget is exhausted).
fn fit_to_target(target: usize, h: &mut f64, build: impl Fn(f64) -> Result<TriMesh>) -> Result<TriMesh> {
    let mut best: Option<TriMesh> = None;
    for _ in 0..8 {
        let mesh = build(*h)?;
        let count = mesh.n_triangles() as f64;
        let err = (count - target as f64).abs() / target as f64;
        let better = best.as_ref().is_none_or(|b| err < (b.n_triangles() as f64 - target as f64).abs() / target as f64);
        *h *= (count / target as f64).sqrt();
        if better {
            best = Some(mesh);
        }
        if err < 0.02 {
            break;
        }
    }
    Ok(best.expect("at least one build"))
}

/// Points at distance `h` along the inner bisector of each convex vertex of a
/// counterclockwise polygon.
fn corner_points(poly: &[Point], h: f64) -> Vec<Point> {
    let n = poly.len();
    let unit = |a: Point, b: Point| {
        let l = (b[0] - a[0]).hypot(b[1] - a[1]);
        [(b[0] - a[0]) / l, (b[1] - a[1]) / l]
    };
    (0..n)
        .filter_map(|k| {
            let v = poly[k];
            let e1 = unit(v, poly[(k + n - 1) % n]);
            let e2 = unit(v, poly[(k + 1) % n]);
            let cross = e2[0] * e1[1] - e2[1] * e1[0];
            let cos = e1[0] * e2[0] + e1[1] * e2[1];
            // convex and sharper than 150 degrees
            (cross > 0.0 && cos > -0.866).then(|| {
                let b = [e1[0] + e2[0], e1[1] + e2[1]];
                let l = b[0].hypot(b[1]);
                [v[0] + h * b[0] / l, v[1] + h * b[1] / l]
            })
        })
        .collect()
}

fn circle_points(center: Point, radius: f64, h: f64) -> Vec<Point> {
    circle_points_n(center, radius, ((2.0 * PI * radius / h).round() as usize).max(8))
}

fn circle_points_n(center: Point, radius: f64, n: usize) -> Vec<Point> {
    (0..n)
        .map(|j| {
            let theta = 2.0 * PI * j as f64 / n as f64;
            [center[0] + radius * theta.cos(), center[1] + radius * theta.sin()]
        })
        .collect()
}

fn hex_lattice(lower: Point, upper: Point, h: f64) -> Vec<Point> {
    let dy = h * 3f64.sqrt() / 2.0;
    let rows = ((upper[1] - lower[1]) / dy).ceil() as usize + 1;
    let cols = ((upper[0] - lower[0]) / h).ceil() as usize + 1;
    let mut pts = Vec::with_capacity(rows * cols);
    for j in 0..rows {
        let shift = if j % 2 == 1 { 0.5 * h } else { 0.0 };
        for i in 0..cols {
            pts.push([lower[0] + i as f64 * h + shift, lower[1] + j as f64 * dy]);
        }
    }
    pts
}

fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let t = ((ap[0] * ab[0] + ap[1] * ab[1]) / (ab[0] * ab[0] + ab[1] * ab[1])).clamp(0.0, 1.0);
    (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1])
}

/// Planar straight-line graph: constrained points and tagged segments.
#[derive(Default)]
struct Pslg {
    points: Vec<Point>,
    segments: Vec<([usize; 2], String)>,
}

impl Pslg {
    /// Adds a closed polyline; side `k` joins vertex `k` and `k + 1` and is
    /// subdivided into pieces of length about `spacing`. Returns the loop's
    /// point indices in order.
    fn add_polyline_loop(&mut self, vertices: &[Point], tags: &[&str], spacing: f64) -> Vec<usize> {
        let mut ids = Vec::new();
        let mut sides = Vec::new();
        let n = vertices.len();
        for k in 0..n {
            let (a, b) = (vertices[k], vertices[(k + 1) % n]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            let pieces = if spacing.is_finite() { ((len / spacing).round() as usize).max(1) } else { 1 };
            for s in 0..pieces {
                let t = s as f64 / pieces as f64;
                ids.push(self.points.len());
                sides.push(k);
                self.points.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        let total = ids.len();
        for s in 0..total {
            self.segments.push(([ids[s], ids[(s + 1) % total]], tags[sides[s]].to_string()));
        }
        ids
    }

    fn distance_to_segments(&self, p: Point) -> f64 {
        self.segments
            .iter()
            .map(|([a, b], _)| segment_distance(p, self.points[*a], self.points[*b]))
            .fold(f64::INFINITY, f64::min)
    }

    fn triangulate(self, interior: Vec<Point>, region: impl Fn(Point) -> Option<String>) -> Result<TriMesh> {
        let mut all = self.points.clone();
        all.extend(interior);
        let vertices: Vec<Point2<f64>> = all.iter().map(|p| Point2::new(p[0], p[1])).collect();
        let edges: Vec<[usize; 2]> = self.segments.iter().map(|(s, _)| *s).collect();
        let cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(vertices, edges)
            .map_err(|e| Error::InvalidMesh(format!("triangulation failed: {e:?}")))?;
        if cdt.num_vertices() != all.len() {
            return Err(Error::InvalidMesh("duplicate points in mesh generation".into()));
        }
        let mut triangles = Vec::new();
        let mut regions = Vec::new();
        for face in cdt.inner_faces() {
            let v = face.vertices().map(|v| v.fix().index());
            let c = [
                (all[v[0]][0] + all[v[1]][0] + all[v[2]][0]) / 3.0,
                (all[v[0]][1] + all[v[1]][1] + all[v[2]][1]) / 3.0,
            ];
            if let Some(name) = region(c) {
                triangles.push(v);
                regions.push(name);
            }
        }
        // compact away nodes not referenced by any kept triangle
        let mut map = vec![usize::MAX; all.len()];
        let mut coords = Vec::new();
        for tri in &mut triangles {
            for v in tri.iter_mut() {
                if map[*v] == usize::MAX {
                    map[*v] = coords.len();
                    coords.push(all[*v]);
                }
                *v = map[*v];
            }
        }
        let facets = self
            .segments
            .into_iter()
            .map(|([a, b], tag)| {
                if map[a] == usize::MAX || map[b] == usize::MAX {
                    Err(Error::InvalidMesh("segment outside the meshed region".into()))
                } else {
                    Ok(([map[a], map[b]], tag))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        TriMesh::from_parts(coords, triangles, Some(regions), facets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_at_benchmark_resolution_matches_node_and_cell_counts() {
        let mesh = generate_disk([0.0, 0.0], 1.0, 15000).unwrap();
        assert_eq!(mesh.n_triangles(), 15000);
        assert_eq!(mesh.n_nodes(), 7651);
        assert!(mesh.signed_areas().iter().all(|&a| a > 0.0));
    }

    #[test]
    fn minimal_disk() {
        let mesh = generate_disk([0.0, 0.0], 1.0, 4).unwrap();
        assert_eq!(mesh.n_triangles(), 4);
        assert!(mesh.signed_areas().iter().all(|&a| a > 0.0));
        assert!(generate_disk([0.0, 0.0], 1.0, 3).is_err());
        assert!(generate_disk([0.0, 0.0], 0.0, 100).is_err());
    }

    #[test]
    fn disk_counts_track_target() {
        for target in [24, 37, 100, 1000, 2500, 7000] {
            let mesh = generate_disk([0.5, -1.0], 2.0, target).unwrap();
            let rel = (mesh.n_triangles() as f64 - target as f64).abs() / target as f64;
            assert!(rel <= 0.2, "target {target}: got {}", mesh.n_triangles());
        }
    }

    #[test]
    fn disk_area_converges() {
        let mesh = generate_disk([0.0, 0.0], 1.0, 1000).unwrap();
        assert!((mesh.total_area() - PI).abs() / PI < 0.01);
    }

    #[test]
    fn square_inclusion_area_is_exact() {
        let inner = InnerShape::Square { center: [0.5, 0.5], edge: 0.4 };
        let mesh = generate_square_with_interface(&inner, 3000).unwrap();
        assert!((mesh.region_area("in") - 0.16).abs() < 1e-12);
        assert!((mesh.total_area() - 1.0).abs() < 1e-12);
        assert!(mesh.min_angle_deg() > 20.0);
        let rel = (mesh.n_triangles() as f64 - 3000.0).abs() / 3000.0;
        assert!(rel < 0.2);
        let on_interface = mesh.nodes_on_tags(&["interface"]);
        assert!(mesh.triangles().iter().all(|t| !t.iter().all(|&i| on_interface[i])));
    }

    #[test]
    fn circle_inclusion_area() {
        let inner = InnerShape::Circle { center: [0.5, 0.5], radius: 0.2 };
        let mesh = generate_square_with_interface(&inner, 4000).unwrap();
        let exact = PI * 0.04;
        assert!((mesh.region_area("in") - exact).abs() / exact < 0.01);
    }

    #[test]
    fn inclusion_touching_boundary_is_rejected() {
        let inner = InnerShape::Square { center: [0.2, 0.5], edge: 0.4 };
        assert!(generate_square_with_interface(&inner, 1000).is_err());
    }

    #[test]
    fn channel_area_and_obstacle_nodes() {
        let mesh = generate_channel_with_obstacle(&ChannelSpec::default(), 2500).unwrap();
        let exact = 36.0 - PI * 0.25;
        assert!((mesh.total_area() - exact).abs() / exact < 0.01);
        for [a, b] in mesh.facets_with_tag("obstacle") {
            for n in [a, b] {
                let p = mesh.coords()[n];
                assert!((p[0].hypot(p[1]) - 0.5).abs() < 1e-12);
            }
        }
        for tag in ["inlet", "outlet", "wall", "obstacle"] {
            assert!(mesh.has_tag(tag));
        }
        assert!(mesh.min_angle_deg() > 15.0);
    }

    #[test]
    fn rectangle_tags_and_area() {
        let mesh = generate_rectangle(0.0, 2.0, -1.0, 1.0, 4, 3).unwrap();
        assert_eq!(mesh.n_triangles(), 24);
        assert!((mesh.total_area() - 4.0).abs() < 1e-14);
        assert_eq!(mesh.facets_with_tag("left").count(), 3);
    }
}
