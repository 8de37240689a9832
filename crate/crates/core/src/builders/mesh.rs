//! Closed triangulated surfaces and their simplicial cochain complexes.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{real_matrix, CMatrix, LinearOp};
use crate::quasicomplex::QuasiComplex;

/// A closed, consistently oriented triangle mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceMesh {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_index: BTreeMap<[usize; 2], usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Json,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("off") => Ok(MeshFormat::Off),
            Some("json") => Ok(MeshFormat::Json),
            _ => Err(Error::Parse(format!("cannot infer mesh format of {}", path.display()))),
        }
    }
}

fn sorted(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn face_edges(f: &[usize; 3]) -> [(usize, usize); 3] {
    [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])]
}

impl SurfaceMesh {
    /// Validates closedness and orientability. Faces are reoriented
    /// coherently per connected component, keeping the first face's order.
    pub fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        if vertices.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Parse("non-finite vertex coordinate".into()));
        }
        for (k, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= nv) {
                return Err(Error::Parse(format!("face {k} references a vertex outside 0..{nv}")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Parse(format!("face {k} is degenerate")));
            }
        }

        let mut incidence: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
        for (k, f) in faces.iter().enumerate() {
            for (a, b) in face_edges(f) {
                incidence.entry(sorted(a, b)).or_default().push(k);
            }
        }
        if let Some((e, fs)) = incidence.iter().find(|(_, fs)| fs.len() != 2) {
            return Err(Error::NotClosedSurface(format!(
                "edge ({}, {}) lies on {} face(s)",
                e[0],
                e[1],
                fs.len()
            )));
        }
        if faces.is_empty() {
            return Err(Error::NotClosedSurface("mesh has no faces".into()));
        }
        let mut used = vec![false; nv];
        faces.iter().flatten().for_each(|&v| used[v] = true);
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::NotClosedSurface(format!("vertex {v} is isolated")));
        }

        let faces = orient(faces, &incidence)?;
        let edges: Vec<[usize; 2]> = incidence.keys().copied().collect();
        let edge_index = edges.iter().enumerate().map(|(i, e)| (*e, i)).collect();
        Ok(SurfaceMesh { vertices, faces, edges, edge_index })
    }

    pub fn vertices(&self) -> &[[f64; 3]] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// Edges `(lo, hi)` in lexicographic order.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&sorted(a, b)).copied()
    }

    /// Integer coboundaries `(d⁰, d¹)` as row-major entry lists.
    pub fn coboundaries(&self) -> (Vec<i64>, Vec<i64>) {
        let (nv, ne, nf) = (self.vertices.len(), self.edges.len(), self.faces.len());
        let mut d0 = vec![0i64; ne * nv];
        for (e, [a, b]) in self.edges.iter().enumerate() {
            d0[e * nv + a] = -1;
            d0[e * nv + b] = 1;
        }
        let mut d1 = vec![0i64; nf * ne];
        for (k, f) in self.faces.iter().enumerate() {
            for (a, b) in face_edges(f) {
                let e = self.edge_index[&sorted(a, b)];
                d1[k * ne + e] = if a < b { 1 } else { -1 };
            }
        }
        (d0, d1)
    }
}

fn orient(mut faces: Vec<[usize; 3]>, incidence: &BTreeMap<[usize; 2], Vec<usize>>) -> Result<Vec<[usize; 3]>> {
    let traverses = |f: &[usize; 3], a: usize, b: usize| face_edges(f).contains(&(a, b));
    let mut fixed = vec![false; faces.len()];
    for start in 0..faces.len() {
        if fixed[start] {
            continue;
        }
        fixed[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(k) = queue.pop_front() {
            for (a, b) in face_edges(&faces[k]) {
                let other = incidence[&sorted(a, b)].iter().copied().find(|&o| o != k).expect("two faces per edge");
                // A coherent neighbour walks the shared edge as (b, a).
                let coherent = traverses(&faces[other], b, a);
                if fixed[other] {
                    if !coherent {
                        return Err(Error::NotOrientable);
                    }
                } else {
                    if !coherent {
                        faces[other].swap(1, 2);
                    }
                    fixed[other] = true;
                    queue.push_back(other);
                }
            }
        }
    }
    Ok(faces)
}

/// Simplicial de Rham complex `C⁰ → C¹ → C²` with identity metrics.
pub fn derham_complex(mesh: &SurfaceMesh) -> QuasiComplex {
    let (nv, ne, nf) = (mesh.vertices.len(), mesh.edges.len(), mesh.faces.len());
    let (d0, d1) = mesh.coboundaries();
    for k in 0..nf {
        for v in 0..nv {
            let s: i64 = (0..ne).map(|e| d1[k * ne + e] * d0[e * nv + v]).sum();
            assert_eq!(s, 0, "integer coboundaries must compose to zero");
        }
    }
    let to_f = |d: &[i64]| d.iter().map(|&x| x as f64).collect::<Vec<_>>();
    QuasiComplex::new(
        vec![LinearOp::euclidean(real_matrix(ne, nv, &to_f(&d0))), LinearOp::euclidean(real_matrix(nf, ne, &to_f(&d1)))],
        None,
    )
    .expect("coboundary shapes chain")
}

/// Cochain pullbacks `(E⁰, E¹, E²)` of the vertex map `v ↦ perm[v]`.
pub fn simplicial_endomorphism(mesh: &SurfaceMesh, perm: &[usize]) -> Result<Vec<LinearOp>> {
    let nv = mesh.vertices.len();
    if perm.len() != nv || perm.iter().any(|&p| p >= nv) {
        return Err(Error::InvalidArgument(format!("vertex map must send 0..{nv} into 0..{nv}")));
    }
    let ne = mesh.edges.len();
    let nf = mesh.faces.len();
    let mut e0 = CMatrix::zeros(nv, nv);
    for v in 0..nv {
        e0[(v, perm[v])] = 1.0.into();
    }
    let mut e1 = CMatrix::zeros(ne, ne);
    for (e, [a, b]) in mesh.edges.iter().enumerate() {
        let (pa, pb) = (perm[*a], perm[*b]);
        let target = mesh
            .edge_id(pa, pb)
            .filter(|_| pa != pb)
            .ok_or_else(|| Error::InvalidArgument(format!("edge ({a}, {b}) is not mapped to an edge")))?;
        e1[(e, target)] = if pa < pb { 1.0 } else { -1.0 }.into();
    }
    let mut face_index: BTreeMap<[usize; 3], (usize, f64)> = BTreeMap::new();
    for (k, f) in mesh.faces.iter().enumerate() {
        for (rot, sign) in [([f[0], f[1], f[2]], 1.0), ([f[1], f[2], f[0]], 1.0), ([f[2], f[0], f[1]], 1.0)] {
            face_index.insert(rot, (k, sign));
            face_index.insert([rot[0], rot[2], rot[1]], (k, -sign));
        }
    }
    let mut e2 = CMatrix::zeros(nf, nf);
    for (k, f) in mesh.faces.iter().enumerate() {
        let image = [perm[f[0]], perm[f[1]], perm[f[2]]];
        let (target, sign) = *face_index
            .get(&image)
            .ok_or_else(|| Error::InvalidArgument(format!("face {k} is not mapped to a face")))?;
        e2[(k, target)] = sign.into();
    }
    Ok(vec![LinearOp::euclidean(e0), LinearOp::euclidean(e1), LinearOp::euclidean(e2)])
}

pub fn tetrahedron() -> SurfaceMesh {
    SurfaceMesh::new(
        vec![[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]],
        vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
    )
    .expect("tetrahedron is a closed surface")
}

/// Diagonally split `n × n` periodic grid embedded as a torus of revolution.
pub fn torus_grid(n: usize) -> Result<SurfaceMesh> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("torus grid needs n >= 3, got {n}")));
    }
    let id = |i: usize, j: usize| (i % n) * n + (j % n);
    let mut vertices = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (u, v) = (TAU * i as f64 / n as f64, TAU * j as f64 / n as f64);
            let r = 2.0 + v.cos();
            vertices.push([r * u.cos(), r * u.sin(), v.sin()]);
        }
    }
    let mut faces = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([v00, v10, v11]);
            faces.push([v00, v11, v01]);
        }
    }
    SurfaceMesh::new(vertices, faces)
}

#[derive(Debug, Deserialize, Serialize)]
struct MeshJson {
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
}

pub fn parse_mesh_json(text: &str) -> Result<SurfaceMesh> {
    let m: MeshJson = serde_json::from_str(text)?;
    SurfaceMesh::new(m.vertices, m.faces)
}

pub fn mesh_to_json(mesh: &SurfaceMesh) -> serde_json::Value {
    serde_json::to_value(MeshJson { vertices: mesh.vertices.clone(), faces: mesh.faces.clone() })
        .expect("mesh serializes")
}

struct Tokens<'a>(std::vec::IntoIter<&'a str>);

impl Tokens<'_> {
    fn next<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let t = self.0.next().ok_or_else(|| Error::Parse(format!("unexpected end of file reading {what}")))?;
        t.parse().map_err(|_| Error::Parse(format!("invalid {what}: {t:?}")))
    }
}

/// ASCII OFF with triangular faces; `#` starts a comment.
pub fn parse_off(text: &str) -> Result<SurfaceMesh> {
    let words: Vec<&str> = text.lines().flat_map(|l| l.split('#').next().unwrap_or("").split_whitespace()).collect();
    let mut tokens = Tokens(words.into_iter());
    let header: String = tokens.next("header")?;
    if header != "OFF" {
        return Err(Error::Parse(format!("expected OFF header, found {header:?}")));
    }
    let nv: usize = tokens.next("vertex count")?;
    let nf: usize = tokens.next("face count")?;
    let _edges: usize = tokens.next("edge count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        vertices.push([tokens.next("coordinate")?, tokens.next("coordinate")?, tokens.next("coordinate")?]);
    }
    let mut faces = Vec::with_capacity(nf);
    for k in 0..nf {
        let arity: usize = tokens.next("face arity")?;
        if arity != 3 {
            return Err(Error::Parse(format!("face {k} has {arity} vertices; only triangles are supported")));
        }
        faces.push([tokens.next("face index")?, tokens.next("face index")?, tokens.next("face index")?]);
    }
    SurfaceMesh::new(vertices, faces)
}

pub fn parse_mesh(text: &str, format: MeshFormat) -> Result<SurfaceMesh> {
    match format {
        MeshFormat::Off => parse_off(text),
        MeshFormat::Json => parse_mesh_json(text),
    }
}

pub fn load_mesh(path: &Path) -> Result<SurfaceMesh> {
    let format = MeshFormat::from_path(path)?;
    parse_mesh(&std::fs::read_to_string(path)?, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohomology::{betti, BettiRoute};
    use crate::linop::DEFAULT_RANK_TOL;

    fn fixture(name: &str) -> std::path::PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
    }

    #[test]
    fn tetrahedron_fixture_matches_builtin_counts() {
        let m = load_mesh(&fixture("tetrahedron.off")).unwrap();
        assert_eq!((m.vertices().len(), m.edges().len(), m.faces().len()), (4, 6, 4));
        assert_eq!(m.edges(), &[[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]);
        let b = betti(&derham_complex(&m), BettiRoute::RankNullity, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(b.betti, vec![1, 0, 1]);
    }

    #[test]
    fn shipped_meshes_have_expected_euler_numbers() {
        assert_eq!(load_mesh(&fixture("icosahedron.off")).unwrap().euler_characteristic(), 2);
        let g2 = load_mesh(&fixture("genus2.off")).unwrap();
        assert_eq!(g2.euler_characteristic(), -2);
        assert_eq!(derham_complex(&g2).dimension_euler(), -2);
    }

    #[test]
    fn torus_grid_counts_and_betti() {
        let t = torus_grid(3).unwrap();
        assert_eq!((t.vertices().len(), t.edges().len(), t.faces().len()), (9, 27, 18));
        let b = betti(&derham_complex(&t), BettiRoute::RankNullity, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(b.betti, vec![1, 2, 1]);
        assert!(matches!(torus_grid(2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn boundary_is_rejected() {
        let text = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        assert!(matches!(parse_off(text), Err(Error::NotClosedSurface(_))));
    }

    #[test]
    fn inconsistent_orientation_is_repaired() {
        let mut faces = tetrahedron().faces().to_vec();
        faces[2].swap(0, 1);
        let m = SurfaceMesh::new(tetrahedron().vertices().to_vec(), faces).unwrap();
        assert!(derham_complex(&m).is_exact());
    }

    #[test]
    fn projective_plane_is_not_orientable() {
        // Six-vertex minimal triangulation of RP².
        let faces = vec![
            [0, 1, 2],
            [0, 2, 3],
            [0, 3, 4],
            [0, 4, 5],
            [0, 5, 1],
            [1, 2, 4],
            [2, 3, 5],
            [3, 4, 1],
            [4, 5, 2],
            [5, 1, 3],
        ];
        assert!(matches!(SurfaceMesh::new(vec![[0.0; 3]; 6], faces), Err(Error::NotOrientable)));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_off("PLY\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_off("OFF\n4 4 6\n0 0 0\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_mesh_json("{\"vertices\": 3}"), Err(Error::Parse(_))));
    }

    #[test]
    fn json_round_trip() {
        let t = tetrahedron();
        let back = parse_mesh_json(&mesh_to_json(&t).to_string()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rotation_pullback_commutes() {
        let m = tetrahedron();
        let c = derham_complex(&m);
        let e = simplicial_endomorphism(&m, &[0, 2, 3, 1]).unwrap();
        for i in 0..2 {
            let lhs = c.diff(i).matrix() * e[i].matrix();
            let rhs = e[i + 1].matrix() * c.diff(i).matrix();
            assert_eq!(lhs, rhs);
        }
        assert!(simplicial_endomorphism(&m, &[0, 0, 1, 2]).is_err());
    }
}
