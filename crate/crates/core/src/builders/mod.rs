//! Corpus construction: surface meshes, Koszul symbols and perturbations.

mod koszul;
mod mesh;
mod perturb;

pub use koszul::{koszul_symbol, wedge_matrix, KoszulGenerator};
pub use mesh::{
    derham_complex, load_mesh, mesh_to_json, parse_mesh, parse_mesh_json, parse_off, simplicial_endomorphism,
    tetrahedron, torus_grid, MeshFormat, SurfaceMesh,
};
pub use perturb::{perturb, PerturbationSpec, RNG_NAME};
