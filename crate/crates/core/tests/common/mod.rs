#![allow(dead_code)]

use std::path::{Path, PathBuf};

use fredholm::builders::{derham_complex, load_mesh, tetrahedron, torus_grid};
use fredholm::linop::{CMatrix, InnerProductSpace, LinearOp};
use fredholm::QuasiComplex;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Exact complexes with known topology: (name, complex, expected betti).
pub fn exact_corpus() -> Vec<(String, QuasiComplex, Vec<usize>)> {
    let mut out = vec![
        ("tetrahedron".to_string(), derham_complex(&tetrahedron()), vec![1, 0, 1]),
        (
            "icosahedron.off".to_string(),
            derham_complex(&load_mesh(&fixture("icosahedron.off")).unwrap()),
            vec![1, 0, 1],
        ),
        ("genus2.off".to_string(), derham_complex(&load_mesh(&fixture("genus2.off")).unwrap()), vec![1, 4, 1]),
        ("torus_grid(3)".to_string(), derham_complex(&torus_grid(3).unwrap()), vec![1, 2, 1]),
        ("torus_grid(4)".to_string(), derham_complex(&torus_grid(4).unwrap()), vec![1, 2, 1]),
    ];
    out.push(("weighted tetrahedron".to_string(), weighted(&out[0].1), vec![1, 0, 1]));
    out
}

/// Same differentials on spaces with non-trivial diagonal metrics.
pub fn weighted(qc: &QuasiComplex) -> QuasiComplex {
    let spaces: Vec<InnerProductSpace> = qc
        .dims()
        .iter()
        .map(|&d| InnerProductSpace::diagonal(&(0..d).map(|k| 1.0 + 0.25 * k as f64).collect::<Vec<_>>()).unwrap())
        .collect();
    let diffs = qc
        .diffs()
        .iter()
        .enumerate()
        .map(|(i, a)| LinearOp::new(spaces[i].clone(), spaces[i + 1].clone(), a.matrix().clone()).unwrap())
        .collect();
    QuasiComplex::from_parts(spaces, diffs, None).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Random operator of the given shape and rank at most `rank`.
pub fn low_rank(rng: &mut impl Rng, rows: usize, cols: usize, rank: usize) -> CMatrix {
    gaussian(rng, rows, rank) * gaussian(rng, rank, cols)
}

/// Random positive definite metric with condition number of order 10.
pub fn random_space(rng: &mut impl Rng, dim: usize) -> InnerProductSpace {
    let b = gaussian(rng, dim, dim) * Complex64::new(0.3, 0.0);
    InnerProductSpace::with_gram(CMatrix::identity(dim, dim) + &b * b.adjoint()).unwrap()
}
