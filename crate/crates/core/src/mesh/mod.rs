//! Triangle meshes, the additive retraction and the nodal vector transport.
//!
//! A [`TriMesh`] is a coordinate array plus a shared, immutable [`Topology`].
//! Deforming a mesh produces a new coordinate array (and a new mesh id) but
//! keeps the topology `Arc`, so every iterate of an optimization run shares
//! connectivity, tags, dof maps and sparsity patterns with the initial mesh.

mod generate;
mod io;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::{Error, Result};

pub use generate::{
    generate_channel_with_obstacle, generate_disk, generate_rectangle, generate_square_with_interface, ChannelSpec,
    InnerShape,
};
pub use io::{read_gmsh2, read_native, write_atomic, write_native, write_vtk, VtkField};

pub type Point = [f64; 2];

/// Default lower bound on the deformed/original area ratio of any element.
pub const DEFAULT_AREA_FLOOR: f64 = 0.1;

/// Name of the single region of meshes without subdomains.
pub const DEFAULT_REGION: &str = "domain";

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed)
}

/// Connectivity and tags; shared by a mesh and all of its deformations.
#[derive(Debug, PartialEq)]
pub struct Topology {
    n_nodes: usize,
    triangles: Vec<[usize; 3]>,
    regions: Vec<u32>,
    region_names: Vec<String>,
    facets: Vec<[usize; 2]>,
    facet_tags: Vec<u32>,
    tag_names: Vec<String>,
    /// Unique edges as sorted node pairs.
    edges: Vec<[usize; 2]>,
    /// Local edge `k` of a cell joins local vertices `k` and `(k + 1) % 3`.
    cell_edges: Vec<[usize; 3]>,
    boundary_nodes: Vec<bool>,
}

impl Topology {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn cell_edges(&self) -> &[[usize; 3]] {
        &self.cell_edges
    }
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    id: u64,
    coords: Vec<Point>,
    topo: Arc<Topology>,
}

fn signed_area_of(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn intern(names: &mut Vec<String>, name: &str) -> u32 {
    match names.iter().position(|n| n == name) {
        Some(i) => i as u32,
        None => {
            names.push(name.to_string());
            (names.len() - 1) as u32
        }
    }
}

impl TriMesh {
    /// Builds a single-region mesh.
    pub fn new(coords: Vec<Point>, triangles: Vec<[usize; 3]>, facets: Vec<([usize; 2], String)>) -> Result<Self> {
        Self::from_parts(coords, triangles, None, facets)
    }

    /// Builds a mesh, validating it and making every triangle counterclockwise.
    ///
    /// Boundary facets are reoriented so that the domain lies to their left.
    /// Facets may also be interior edges (material interfaces).
    pub fn from_parts(
        coords: Vec<Point>,
        mut triangles: Vec<[usize; 3]>,
        cell_regions: Option<Vec<String>>,
        facets: Vec<([usize; 2], String)>,
    ) -> Result<Self> {
        let n_nodes = coords.len();
        if coords.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidMesh("non-finite node coordinate".into()));
        }
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        for (t, tri) in triangles.iter_mut().enumerate() {
            if tri.iter().any(|&i| i >= n_nodes) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing node")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a node")));
            }
            let area = signed_area_of(coords[tri[0]], coords[tri[1]], coords[tri[2]]);
            if area == 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }

        let mut region_names = Vec::new();
        let regions = match cell_regions {
            Some(names) => {
                if names.len() != triangles.len() {
                    return Err(Error::InvalidMesh("one region name per triangle required".into()));
                }
                names.iter().map(|n| intern(&mut region_names, n)).collect()
            }
            None => {
                region_names.push(DEFAULT_REGION.to_string());
                vec![0; triangles.len()]
            }
        };

        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        // (count, cell, local edge) per edge
        let mut edge_cells: Vec<(u8, usize, usize)> = Vec::new();
        let mut cell_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut ce = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_cells.push((0, t, k));
                    edges.len() - 1
                });
                edge_cells[e].0 += 1;
                if edge_cells[e].0 > 2 {
                    return Err(Error::InvalidMesh(format!("edge {key:?} shared by more than two triangles")));
                }
                ce[k] = e;
            }
            cell_edges.push(ce);
        }

        let mut tag_names = Vec::new();
        let mut oriented = Vec::with_capacity(facets.len());
        let mut facet_tags = Vec::with_capacity(facets.len());
        let mut seen = vec![false; edges.len()];
        let mut degree = vec![0usize; n_nodes];
        for ([a, b], tag) in facets {
            let key = [a.min(b), a.max(b)];
            let e =
                *edge_index.get(&key).ok_or_else(|| Error::InvalidMesh(format!("facet {key:?} is not a mesh edge")))?;
            if std::mem::replace(&mut seen[e], true) {
                return Err(Error::InvalidMesh(format!("facet {key:?} tagged more than once")));
            }
            let (count, cell, k) = edge_cells[e];
            let facet = if count == 1 {
                let tri = triangles[cell];
                [tri[k], tri[(k + 1) % 3]]
            } else {
                [a, b]
            };
            degree[a] += 1;
            degree[b] += 1;
            oriented.push(facet);
            facet_tags.push(intern(&mut tag_names, &tag));
        }
        if let Some(e) = (0..edges.len()).find(|&e| edge_cells[e].0 == 1 && !seen[e]) {
            return Err(Error::InvalidMesh(format!("boundary edge {:?} has no tag", edges[e])));
        }
        if let Some(n) = degree.iter().position(|d| d % 2 == 1) {
            return Err(Error::InvalidMesh(format!("facets do not form closed loops at node {n}")));
        }
        let mut boundary_nodes = vec![false; n_nodes];
        for (e, edge) in edges.iter().enumerate() {
            if edge_cells[e].0 == 1 {
                boundary_nodes[edge[0]] = true;
                boundary_nodes[edge[1]] = true;
            }
        }

        let topo = Topology {
            n_nodes,
            triangles,
            regions,
            region_names,
            facets: oriented,
            facet_tags,
            tag_names,
            edges,
            cell_edges,
            boundary_nodes,
        };
        Ok(Self { id: fresh_id(), coords, topo: Arc::new(topo) })
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topo
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.topo.triangles.len()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.topo.triangles
    }

    pub fn triangle_coords(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.topo.triangles[t];
        [self.coords[a], self.coords[b], self.coords[c]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        signed_area_of(a, b, c)
    }

    pub fn signed_areas(&self) -> Vec<f64> {
        (0..self.n_triangles()).map(|t| self.signed_area(t)).collect()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.signed_area(t)).sum()
    }

    /// Area of the triangles carrying the given region name.
    pub fn region_area(&self, region: &str) -> f64 {
        (0..self.n_triangles()).filter(|&t| self.region_name(t) == region).map(|t| self.signed_area(t)).sum()
    }

    pub fn region_name(&self, t: usize) -> &str {
        &self.topo.region_names[self.topo.regions[t] as usize]
    }

    pub fn region_names(&self) -> &[String] {
        &self.topo.region_names
    }

    pub fn facets(&self) -> &[[usize; 2]] {
        &self.topo.facets
    }

    pub fn facet_tag(&self, f: usize) -> &str {
        &self.topo.tag_names[self.topo.facet_tags[f] as usize]
    }

    pub fn tag_names(&self) -> &[String] {
        &self.topo.tag_names
    }

    pub fn has_tag(&self, tag: &str) -> bool {
        self.topo.tag_names.iter().any(|t| t == tag)
    }

    /// Facets carrying `tag`, oriented with the domain on their left when
    /// they lie on the boundary.
    pub fn facets_with_tag<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = [usize; 2]> + 'a {
        let id = self.topo.tag_names.iter().position(|t| t == tag);
        self.topo
            .facets
            .iter()
            .zip(&self.topo.facet_tags)
            .filter(move |(_, &ft)| Some(ft as usize) == id)
            .map(|(f, _)| *f)
    }

    /// Per-node mask of nodes touching a facet with one of `tags`.
    pub fn nodes_on_tags<S: AsRef<str>>(&self, tags: &[S]) -> Vec<bool> {
        let mut mask = vec![false; self.n_nodes()];
        for tag in tags {
            for [a, b] in self.facets_with_tag(tag.as_ref()) {
                mask[a] = true;
                mask[b] = true;
            }
        }
        mask
    }

    pub fn require_tags<S: AsRef<str>>(&self, tags: &[S]) -> Result<()> {
        match tags.iter().find(|t| !self.has_tag(t.as_ref())) {
            Some(t) => Err(Error::MissingTag(t.as_ref().to_string())),
            None => Ok(()),
        }
    }

    pub fn boundary_nodes(&self) -> &[bool] {
        &self.topo.boundary_nodes
    }

    pub fn same_connectivity(&self, other: &TriMesh) -> bool {
        Arc::ptr_eq(&self.topo, &other.topo) || *self.topo == *other.topo
    }

    /// A copy with replaced coordinates and a fresh identity.
    pub fn with_coords(&self, coords: Vec<Point>) -> Result<Self> {
        if coords.len() != self.n_nodes() {
            return Err(Error::InvalidInput("coordinate count differs from node count".into()));
        }
        Ok(Self { id: fresh_id(), coords, topo: Arc::clone(&self.topo) })
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut worst = f64::INFINITY;
        for t in 0..self.n_triangles() {
            let p = self.triangle_coords(t);
            for k in 0..3 {
                let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - a[0], c[1] - a[1]];
                let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
                worst = worst.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        worst
    }
}

/// Nodal coefficients of a scalar or vector P1 field on one specific mesh.
///
/// Vector fields are stored node-major: component `c` of node `i` lives at
/// index `components * i + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    values: Vec<f64>,
    components: usize,
    mesh_id: u64,
}

impl NodalField {
    pub fn zeros(mesh: &TriMesh, components: usize) -> Self {
        Self { values: vec![0.0; components * mesh.n_nodes()], components, mesh_id: mesh.id() }
    }

    pub fn from_values(mesh: &TriMesh, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 || values.len() != components * mesh.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "field of length {} does not match {} nodes x {} components",
                values.len(),
                mesh.n_nodes(),
                components
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("field has non-finite entries".into()));
        }
        Ok(Self { values, components, mesh_id: mesh.id() })
    }

    /// Interpolates a vector-valued function at the nodes.
    pub fn from_vector_fn(mesh: &TriMesh, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let values = mesh.coords().iter().flat_map(|&p| f(p)).collect();
        Self { values, components: 2, mesh_id: mesh.id() }
    }

    /// Interpolates a scalar function at the nodes.
    pub fn from_scalar_fn(mesh: &TriMesh, f: impl Fn(Point) -> f64) -> Self {
        let values = mesh.coords().iter().map(|&p| f(p)).collect();
        Self { values, components: 1, mesh_id: mesh.id() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn vector_at(&self, node: usize) -> [f64; 2] {
        debug_assert_eq!(self.components, 2);
        [self.values[2 * node], self.values[2 * node + 1]]
    }

    pub fn check_mesh(&self, mesh: &TriMesh) -> Result<()> {
        if self.mesh_id != mesh.id() {
            return Err(Error::MeshMismatch { expected: mesh.id(), found: self.mesh_id });
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            components: self.components,
            mesh_id: self.mesh_id,
        }
    }
}

/// Element-quality summary of a deformed mesh relative to its original.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub min_signed_area: f64,
    pub min_area_ratio: f64,
    pub admissible: bool,
}

/// The additive retraction: node `i` moves to `x_i + V_i`.
pub fn deform(mesh: &TriMesh, field: &NodalField) -> Result<TriMesh> {
    field.check_mesh(mesh)?;
    if field.components() != 2 {
        return Err(Error::InvalidInput("deformation field must be vector-valued".into()));
    }
    let coords = mesh
        .coords()
        .iter()
        .enumerate()
        .map(|(i, p)| [p[0] + field.values[2 * i], p[1] + field.values[2 * i + 1]])
        .collect();
    mesh.with_coords(coords)
}

/// Signed-area admissibility of `deformed` against `original`.
pub fn admissibility(original: &TriMesh, deformed: &TriMesh, area_floor: f64) -> Result<QualityReport> {
    if !original.same_connectivity(deformed) {
        return Err(Error::ConnectivityMismatch);
    }
    let mut min_signed_area = f64::INFINITY;
    let mut min_area_ratio = f64::INFINITY;
    for t in 0..original.n_triangles() {
        let a0 = original.signed_area(t);
        let a1 = deformed.signed_area(t);
        min_signed_area = min_signed_area.min(a1);
        min_area_ratio = min_area_ratio.min(a1 / a0);
    }
    let admissible = min_signed_area > 0.0 && min_area_ratio >= area_floor;
    Ok(QualityReport { min_signed_area, min_area_ratio, admissible })
}

/// Vector transport between a mesh and one of its deformations: the nodal
/// coefficients are kept verbatim, only the owning mesh changes.
pub fn transport(field: &NodalField, from: &TriMesh, to: &TriMesh) -> Result<NodalField> {
    field.check_mesh(from)?;
    if !from.same_connectivity(to) {
        return Err(Error::ConnectivityMismatch);
    }
    Ok(NodalField { values: field.values.clone(), components: field.components, mesh_id: to.id() })
}
