//! Lagrange function spaces and their dof maps.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use super::sparse::SparsityPattern;
use crate::mesh::{Topology, TriMesh};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    /// Scalar P1: dof = node.
    P1,
    /// Vector P1: dof = 2 node + component (node-major, like [`crate::NodalField`]).
    P1Vec,
    /// Vector P2: dof = 2 p + component, with P2 node `p` = mesh node or
    /// `n_nodes + edge`.
    P2Vec,
    /// P2 velocity followed by P1 pressure (offset `2 (n_nodes + n_edges)`).
    TaylorHood,
}

/// A function space on a mesh topology; valid for every deformation of the
/// mesh it was built on.
#[derive(Debug)]
pub struct FunctionSpace {
    kind: SpaceKind,
    topo: Arc<Topology>,
    n_dofs: usize,
    dofs_per_cell: usize,
    cell_dofs: Vec<usize>,
    pattern: OnceLock<Arc<SparsityPattern>>,
}

impl FunctionSpace {
    pub fn new(mesh: &TriMesh, kind: SpaceKind) -> Self {
        let topo = Arc::clone(mesh.topology());
        let n = topo.n_nodes();
        let n_p2 = n + topo.edges().len();
        let (n_dofs, per) = match kind {
            SpaceKind::P1 => (n, 3),
            SpaceKind::P1Vec => (2 * n, 6),
            SpaceKind::P2Vec => (2 * n_p2, 12),
            SpaceKind::TaylorHood => (2 * n_p2 + n, 15),
        };
        let mut cell_dofs = Vec::with_capacity(per * topo.triangles().len());
        for (tri, edges) in topo.triangles().iter().zip(topo.cell_edges()) {
            match kind {
                SpaceKind::P1 => cell_dofs.extend_from_slice(tri),
                SpaceKind::P1Vec => {
                    for &v in tri {
                        cell_dofs.extend([2 * v, 2 * v + 1]);
                    }
                }
                SpaceKind::P2Vec | SpaceKind::TaylorHood => {
                    let p2 = [tri[0], tri[1], tri[2], n + edges[0], n + edges[1], n + edges[2]];
                    for p in p2 {
                        cell_dofs.extend([2 * p, 2 * p + 1]);
                    }
                    if kind == SpaceKind::TaylorHood {
                        cell_dofs.extend(tri.iter().map(|&v| 2 * n_p2 + v));
                    }
                }
            }
        }
        Self { kind, topo, n_dofs, dofs_per_cell: per, cell_dofs, pattern: OnceLock::new() }
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    /// Number of P2 nodes (vertices plus edges).
    pub fn n_p2_nodes(&self) -> usize {
        self.topo.n_nodes() + self.topo.edges().len()
    }

    /// First pressure dof of a Taylor-Hood space.
    pub fn pressure_offset(&self) -> usize {
        2 * self.n_p2_nodes()
    }

    /// Global dofs of cell `t`, in local order (vertex-major, then edges,
    /// then pressure).
    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        &self.cell_dofs[t * self.dofs_per_cell..(t + 1) * self.dofs_per_cell]
    }

    pub fn pattern(&self) -> Arc<SparsityPattern> {
        Arc::clone(self.pattern.get_or_init(|| {
            Arc::new(SparsityPattern::from_cells(self.n_dofs, self.cell_dofs.chunks(self.dofs_per_cell)))
        }))
    }

    pub fn check_mesh(&self, mesh: &TriMesh) -> Result<()> {
        if Arc::ptr_eq(&self.topo, mesh.topology()) {
            Ok(())
        } else {
            Err(Error::ConnectivityMismatch)
        }
    }

    pub fn require(&self, kind: SpaceKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("expected a {kind:?} space, got {:?}", self.kind)))
        }
    }

    /// Coordinates of every P2 node of `mesh` (vertices, then edge midpoints).
    pub fn p2_node_coords(&self, mesh: &TriMesh) -> Vec<[f64; 2]> {
        let mut pts = mesh.coords().to_vec();
        for [a, b] in self.topo.edges() {
            let (pa, pb) = (mesh.coords()[*a], mesh.coords()[*b]);
            pts.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
        }
        pts
    }

    /// P2 node indices lying on facets with one of `tags`.
    pub fn p2_nodes_on_tags<S: AsRef<str>>(&self, mesh: &TriMesh, tags: &[S]) -> Vec<usize> {
        let n = self.topo.n_nodes();
        let mut mask = vec![false; self.n_p2_nodes()];
        let index: HashMap<[usize; 2], usize> =
            self.topo.edges().iter().enumerate().map(|(e, key)| (*key, e)).collect();
        for tag in tags {
            for [a, b] in mesh.facets_with_tag(tag.as_ref()) {
                mask[a] = true;
                mask[b] = true;
                let key = [a.min(b), a.max(b)];
                mask[n + index[&key]] = true;
            }
        }
        (0..mask.len()).filter(|&i| mask[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_rectangle;

    #[test]
    fn dof_counts() {
        let mesh = generate_rectangle(0.0, 1.0, 0.0, 1.0, 3, 2).unwrap();
        let (n, e) = (12, 3 * 3 + 4 * 2 + 3 * 2);
        assert_eq!(FunctionSpace::new(&mesh, SpaceKind::P1).n_dofs(), n);
        assert_eq!(FunctionSpace::new(&mesh, SpaceKind::P1Vec).n_dofs(), 2 * n);
        assert_eq!(FunctionSpace::new(&mesh, SpaceKind::P2Vec).n_dofs(), 2 * (n + e));
        assert_eq!(FunctionSpace::new(&mesh, SpaceKind::TaylorHood).n_dofs(), 2 * (n + e) + n);
    }

    #[test]
    fn edge_dofs_are_shared_consistently() {
        let mesh = generate_rectangle(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap();
        let space = FunctionSpace::new(&mesh, SpaceKind::P2Vec);
        let mid = space.p2_node_coords(&mesh);
        for t in 0..mesh.n_triangles() {
            let dofs = space.cell_dofs(t);
            let p = mesh.triangle_coords(t);
            for k in 0..3 {
                let q = mid[dofs[2 * (3 + k)] / 2];
                let expect = [0.5 * (p[k][0] + p[(k + 1) % 3][0]), 0.5 * (p[k][1] + p[(k + 1) % 3][1])];
                assert_eq!(q, expect);
            }
        }
    }

    #[test]
    fn space_rejects_other_topologies() {
        let a = generate_rectangle(0.0, 1.0, 0.0, 1.0, 2, 2).unwrap();
        let b = generate_rectangle(0.0, 1.0, 0.0, 1.0, 2, 2).unwrap();
        let space = FunctionSpace::new(&a, SpaceKind::P1);
        assert!(space.check_mesh(&a).is_ok());
        assert!(space.check_mesh(&a.with_coords(a.coords().to_vec()).unwrap()).is_ok());
        assert!(space.check_mesh(&b).is_err());
    }
}
