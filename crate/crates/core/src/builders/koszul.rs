//! Exterior multiplication `ξ∧·` on `Λ^·(ℝⁿ)`: the de Rham symbol complex.

use rand_distr::StandardNormal;
use rand::Rng;

use crate::builders::perturb::rng_for;
use crate::error::{Error, Result};
use crate::linop::CMatrix;
use crate::symbolcx::{SampleGenerator, SymbolComplexSample};

/// k-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..n {
            cur.push(j);
            go(j + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Matrix of `ξ∧· : Λ^k → Λ^{k+1}`, using `e_j ∧ e_J = (−1)^{#{l ∈ J : l < j}} e_{J∪j}`.
pub fn wedge_matrix(xi: &[f64], k: usize) -> CMatrix {
    let n = xi.len();
    let dom = subsets(n, k);
    let cod = subsets(n, k + 1);
    let mut m = CMatrix::zeros(cod.len(), dom.len());
    for (c, subset) in dom.iter().enumerate() {
        for (j, &x) in xi.iter().enumerate() {
            if subset.contains(&j) {
                continue;
            }
            let before = subset.iter().filter(|&&l| l < j).count();
            let mut target = subset.clone();
            target.insert(before, j);
            let r = cod.binary_search(&target).expect("subset present");
            let sign = if before % 2 == 0 { 1.0 } else { -1.0 };
            m[(r, c)] = (sign * x).into();
        }
    }
    m
}

fn check_dim(n: usize) -> Result<()> {
    if (2..=4).contains(&n) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

/// Koszul symbol sample at covector `xi`, orders all 1.
pub fn koszul_symbol(xi: &[f64], point_id: impl Into<String>) -> Result<SymbolComplexSample> {
    check_dim(xi.len())?;
    let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mats = (0..xi.len()).map(|k| wedge_matrix(xi, k)).collect();
    SymbolComplexSample::new(point_id, norm, mats, Some(vec![1.0; xi.len()]))
}

/// Seeded unit covectors, one ChaCha stream per sample index.
#[derive(Clone, Debug)]
pub struct KoszulGenerator {
    n: usize,
    scale: f64,
}

impl KoszulGenerator {
    pub fn new(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(KoszulGenerator { n, scale: 1.0 })
    }

    /// Covectors of norm `t` instead of 1.
    pub fn with_scale(mut self, t: f64) -> Self {
        self.scale = t;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn covector(&self, seed: u64, index: usize) -> Vec<f64> {
        let mut rng = rng_for(seed, index as u64);
        loop {
            let v: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                return v.into_iter().map(|x| self.scale * x / norm).collect();
            }
        }
    }
}

impl SampleGenerator for KoszulGenerator {
    fn name(&self) -> String {
        format!("koszul(n={})", self.n)
    }

    fn sample(&self, seed: u64, index: usize) -> Result<SymbolComplexSample> {
        koszul_symbol(&self.covector(seed, index), format!("koszul-n{}-s{seed}-{index}", self.n))
    }
}
