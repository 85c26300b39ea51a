//! Native text meshes, Gmsh v2 import and legacy VTK output.
//!
//! Native format:
//!
//! ```text
//! trimesh 2
//! nodes N
//! x y            (N lines)
//! cells M
//! i j k [region] (M lines, region optional)
//! facets K
//! i j tag        (K lines)
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{NodalField, Point, TriMesh, DEFAULT_REGION};
use crate::{Error, Result};

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = path.as_ref();
    let name = path.file_name().ok_or_else(|| Error::InvalidInput(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn write_native(path: impl AsRef<Path>, mesh: &TriMesh) -> Result<()> {
    let mut out = String::new();
    let with_regions = mesh.region_names().len() > 1 || mesh.region_names()[0] != DEFAULT_REGION;
    writeln!(out, "trimesh 2").unwrap();
    writeln!(out, "nodes {}", mesh.n_nodes()).unwrap();
    for p in mesh.coords() {
        // `{:?}` prints the shortest representation that round-trips exactly
        writeln!(out, "{:?} {:?}", p[0], p[1]).unwrap();
    }
    writeln!(out, "cells {}", mesh.n_triangles()).unwrap();
    for (t, [a, b, c]) in mesh.triangles().iter().enumerate() {
        if with_regions {
            writeln!(out, "{a} {b} {c} {}", mesh.region_name(t)).unwrap();
        } else {
            writeln!(out, "{a} {b} {c}").unwrap();
        }
    }
    writeln!(out, "facets {}", mesh.facets().len()).unwrap();
    for (f, [a, b]) in mesh.facets().iter().enumerate() {
        writeln!(out, "{a} {b} {}", mesh.facet_tag(f)).unwrap();
    }
    write_atomic(path, out)
}

struct Lines<'a> {
    path: PathBuf,
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &Path, text: &'a str) -> Self {
        Self { path: path.to_path_buf(), iter: text.lines().enumerate(), line: 0 }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { path: self.path.clone(), line: self.line, msg: msg.into() }
    }

    /// Next non-empty line, split on whitespace.
    fn next_tokens(&mut self) -> Result<Vec<&'a str>> {
        for (i, l) in self.iter.by_ref() {
            self.line = i + 1;
            let toks: Vec<&str> = l.split_whitespace().collect();
            if !toks.is_empty() {
                return Ok(toks);
            }
        }
        Err(self.err("unexpected end of file"))
    }

    fn header(&mut self, key: &str) -> Result<usize> {
        let toks = self.next_tokens()?;
        match toks.as_slice() {
            [k, n] if *k == key => n.parse().map_err(|_| self.err(format!("bad count `{n}`"))),
            _ => Err(self.err(format!("expected `{key} <count>`"))),
        }
    }

    fn count(&mut self) -> Result<usize> {
        let tok = self.next_tokens()?[0];
        self.parse(tok)
    }

    fn parse<T: std::str::FromStr>(&self, tok: &str) -> Result<T> {
        tok.parse().map_err(|_| self.err(format!("cannot parse `{tok}`")))
    }
}

pub fn read_native(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = Lines::new(path, &text);
    if lines.next_tokens()? != ["trimesh", "2"] {
        return Err(lines.err("expected header `trimesh 2`"));
    }
    let n = lines.header("nodes")?;
    let mut coords = Vec::with_capacity(n);
    for _ in 0..n {
        let toks = lines.next_tokens()?;
        if toks.len() != 2 {
            return Err(lines.err("node line needs `x y`"));
        }
        coords.push([lines.parse(toks[0])?, lines.parse(toks[1])?]);
    }
    let m = lines.header("cells")?;
    let mut triangles = Vec::with_capacity(m);
    let mut regions = Vec::with_capacity(m);
    for _ in 0..m {
        let toks = lines.next_tokens()?;
        if toks.len() != 3 && toks.len() != 4 {
            return Err(lines.err("cell line needs `i j k [region]`"));
        }
        triangles.push([lines.parse(toks[0])?, lines.parse(toks[1])?, lines.parse(toks[2])?]);
        regions.push(toks.get(3).copied().unwrap_or(DEFAULT_REGION).to_string());
    }
    let k = lines.header("facets")?;
    let mut facets = Vec::with_capacity(k);
    for _ in 0..k {
        let toks = lines.next_tokens()?;
        if toks.len() != 3 {
            return Err(lines.err("facet line needs `i j tag`"));
        }
        facets.push(([lines.parse(toks[0])?, lines.parse(toks[1])?], toks[2].to_string()));
    }
    TriMesh::from_parts(coords, triangles, Some(regions), facets)
}

/// Reads a Gmsh 2.x ASCII mesh. Triangles (type 2) become cells, lines
/// (type 1) become facets; physical names are used as region and facet tags
/// when present, otherwise the numeric physical id is used.
pub fn read_gmsh2(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = Lines::new(path, &text);
    let mut names: HashMap<(u32, i64), String> = HashMap::new();
    let mut node_index: HashMap<i64, usize> = HashMap::new();
    let mut coords: Vec<Point> = Vec::new();
    let mut triangles = Vec::new();
    let mut regions = Vec::new();
    let mut raw_facets: Vec<([i64; 2], i64)> = Vec::new();
    let mut raw_cells: Vec<([i64; 3], i64)> = Vec::new();
    let mut saw_format = false;

    loop {
        let toks = match lines.next_tokens() {
            Ok(t) => t,
            Err(_) if saw_format => break,
            Err(e) => return Err(e),
        };
        match toks[0] {
            "$MeshFormat" => {
                let v = lines.next_tokens()?;
                if !v[0].starts_with('2') || v.get(1) != Some(&"0") {
                    return Err(lines.err("only ASCII Gmsh 2.x is supported"));
                }
                saw_format = true;
                lines.next_tokens()?;
            }
            "$PhysicalNames" => {
                let n: usize = lines.count()?;
                for _ in 0..n {
                    let t = lines.next_tokens()?;
                    if t.len() < 3 {
                        return Err(lines.err("physical name needs `dim id \"name\"`"));
                    }
                    let name = t[2..].join(" ").trim_matches('"').to_string();
                    names.insert((lines.parse(t[0])?, lines.parse(t[1])?), name);
                }
                lines.next_tokens()?;
            }
            "$Nodes" => {
                let n: usize = lines.count()?;
                for _ in 0..n {
                    let t = lines.next_tokens()?;
                    if t.len() < 3 {
                        return Err(lines.err("node line needs `id x y [z]`"));
                    }
                    let id: i64 = lines.parse(t[0])?;
                    node_index.insert(id, coords.len());
                    coords.push([lines.parse(t[1])?, lines.parse(t[2])?]);
                }
                lines.next_tokens()?;
            }
            "$Elements" => {
                let n: usize = lines.count()?;
                for _ in 0..n {
                    let t = lines.next_tokens()?;
                    let nums: Vec<i64> = t.iter().map(|s| lines.parse(s)).collect::<Result<_>>()?;
                    if nums.len() < 3 {
                        return Err(lines.err("element line too short"));
                    }
                    let ntags = nums[2] as usize;
                    let physical = if ntags > 0 { nums[3] } else { 0 };
                    let nodes = &nums[3 + ntags..];
                    match nums[1] {
                        1 if nodes.len() == 2 => raw_facets.push(([nodes[0], nodes[1]], physical)),
                        2 if nodes.len() == 3 => raw_cells.push(([nodes[0], nodes[1], nodes[2]], physical)),
                        1 | 2 => return Err(lines.err("wrong node count for element")),
                        15 => {}
                        other => return Err(lines.err(format!("unsupported element type {other}"))),
                    }
                }
                lines.next_tokens()?;
            }
            _ => {}
        }
    }
    if !saw_format {
        return Err(lines.err("missing $MeshFormat"));
    }
    let lookup = |id: i64| {
        node_index.get(&id).copied().ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("unknown node {id}"),
        })
    };
    let label = |dim: u32, physical: i64, fallback: &str| {
        names.get(&(dim, physical)).cloned().unwrap_or_else(|| {
            if physical == 0 {
                fallback.to_string()
            } else {
                physical.to_string()
            }
        })
    };
    for (nodes, physical) in raw_cells {
        triangles.push([lookup(nodes[0])?, lookup(nodes[1])?, lookup(nodes[2])?]);
        regions.push(label(2, physical, DEFAULT_REGION));
    }
    let facets = raw_facets
        .into_iter()
        .map(|(n, physical)| Ok(([lookup(n[0])?, lookup(n[1])?], label(1, physical, "boundary"))))
        .collect::<Result<Vec<_>>>()?;

    // drop geometry-only nodes not used by any triangle
    let mut map = vec![usize::MAX; coords.len()];
    let mut used = Vec::new();
    for tri in &mut triangles {
        for v in tri.iter_mut() {
            if map[*v] == usize::MAX {
                map[*v] = used.len();
                used.push(coords[*v]);
            }
            *v = map[*v];
        }
    }
    let facets = facets
        .into_iter()
        .map(|([a, b], tag)| {
            if map[a] == usize::MAX || map[b] == usize::MAX {
                Err(Error::InvalidMesh("facet references a node outside all triangles".into()))
            } else {
                Ok(([map[a], map[b]], tag))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    TriMesh::from_parts(used, triangles, Some(regions), facets)
}

/// A named field for VTK output.
pub enum VtkField<'a> {
    /// Nodal scalar or 2-vector field.
    Point(&'a str, &'a NodalField),
    /// One scalar per triangle.
    Cell(&'a str, &'a [f64]),
}

/// Legacy ASCII VTK 2.0 unstructured grid.
pub fn write_vtk(path: impl AsRef<Path>, mesh: &TriMesh, fields: &[VtkField<'_>]) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "# vtk DataFile Version 2.0").unwrap();
    writeln!(out, "shapeopt mesh").unwrap();
    writeln!(out, "ASCII").unwrap();
    writeln!(out, "DATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(out, "POINTS {} double", mesh.n_nodes()).unwrap();
    for p in mesh.coords() {
        writeln!(out, "{:?} {:?} 0", p[0], p[1]).unwrap();
    }
    let m = mesh.n_triangles();
    writeln!(out, "CELLS {} {}", m, 4 * m).unwrap();
    for [a, b, c] in mesh.triangles() {
        writeln!(out, "3 {a} {b} {c}").unwrap();
    }
    writeln!(out, "CELL_TYPES {m}").unwrap();
    for _ in 0..m {
        writeln!(out, "5").unwrap();
    }

    let (point, cell): (Vec<_>, Vec<_>) = fields.iter().partition(|f| matches!(f, VtkField::Point(..)));
    if !point.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.n_nodes()).unwrap();
        for f in point {
            let VtkField::Point(name, field) = f else { unreachable!() };
            field.check_mesh(mesh)?;
            match field.components() {
                1 => {
                    writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
                    for v in field.values() {
                        writeln!(out, "{v:?}").unwrap();
                    }
                }
                2 => {
                    writeln!(out, "VECTORS {name} double").unwrap();
                    for v in field.values().chunks(2) {
                        writeln!(out, "{:?} {:?} 0", v[0], v[1]).unwrap();
                    }
                }
                c => return Err(Error::InvalidInput(format!("cannot write {c}-component field {name}"))),
            }
        }
    }
    if !cell.is_empty() {
        writeln!(out, "CELL_DATA {m}").unwrap();
        for f in cell {
            let VtkField::Cell(name, values) = f else { unreachable!() };
            if values.len() != m {
                return Err(Error::InvalidInput(format!("cell field {name} has {} entries", values.len())));
            }
            writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default").unwrap();
            for v in values.iter() {
                writeln!(out, "{v:?}").unwrap();
            }
        }
    }
    write_atomic(path, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_square_with_interface, InnerShape};

    fn single() -> TriMesh {
        let coords = vec![[0.0, 0.0], [1.0, 0.0], [0.25, 0.75]];
        let facets = vec![([0, 1], "a".into()), ([1, 2], "b".into()), ([2, 0], "a".into())];
        TriMesh::new(coords, vec![[0, 1, 2]], facets).unwrap()
    }

    #[test]
    fn native_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = generate_square_with_interface(&InnerShape::Square { center: [0.5, 0.5], edge: 0.4 }, 400).unwrap();
        let path = dir.path().join("m.mesh");
        write_native(&path, &mesh).unwrap();
        let back = read_native(&path).unwrap();
        assert_eq!(back.coords(), mesh.coords());
        assert_eq!(back.triangles(), mesh.triangles());
        assert_eq!(back.facets(), mesh.facets());
        assert_eq!(back.region_area("in"), mesh.region_area("in"));
    }

    #[test]
    fn native_parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mesh");
        fs::write(&path, "trimesh 2\nnodes 1\n0 zero\n").unwrap();
        match read_native(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gmsh_import() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sq.msh");
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$PhysicalNames\n2\n1 7 \"outer\"\n2 3 \"domain\"\n$EndPhysicalNames\n\
$Nodes\n5\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n9 0.5 0.5 0\n$EndNodes\n$Elements\n9\n\
1 15 2 0 1 1\n2 1 2 7 1 1 2\n3 1 2 7 1 2 3\n4 1 2 7 1 3 4\n5 1 2 7 1 4 1\n\
6 2 2 3 1 1 2 9\n7 2 2 3 1 2 3 9\n8 2 2 3 1 3 4 9\n9 2 2 3 1 4 1 9\n$EndElements\n";
        fs::write(&path, text).unwrap();
        let mesh = read_gmsh2(&path).unwrap();
        assert_eq!(mesh.n_nodes(), 5);
        assert_eq!(mesh.n_triangles(), 4);
        assert_eq!(mesh.facets_with_tag("outer").count(), 4);
        assert!((mesh.total_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vtk_output_lists_points_and_fields_once() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = single();
        let path = dir.path().join("m.vtk");
        let v = NodalField::from_vector_fn(&mesh, |p| [p[1], -p[0]]);
        let s = NodalField::from_scalar_fn(&mesh, |p| p[0] + 1.0 / 3.0);
        write_vtk(
            &path,
            &mesh,
            &[VtkField::Point("velocity", &v), VtkField::Point("u", &s), VtkField::Cell("area", &[0.375])],
        )
        .unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("POINTS 3 double"));
        assert_eq!(text.matches("velocity").count(), 1);
        assert_eq!(text.matches(" u ").count(), 1);
        // read the coordinates back
        let lines: Vec<&str> = text.lines().collect();
        let start = lines.iter().position(|l| l.starts_with("POINTS")).unwrap() + 1;
        for (i, p) in mesh.coords().iter().enumerate() {
            let xy: Vec<f64> = lines[start + i].split_whitespace().map(|t| t.parse().unwrap()).collect();
            assert_eq!([xy[0], xy[1]], *p);
        }
    }

    #[test]
    fn atomic_write_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        write_atomic(&path, "a\n").unwrap();
        write_atomic(&path, "b\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "b\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
