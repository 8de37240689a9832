//! Finite sequences of operators `V⁰ → V¹ → … → Vᴺ` whose consecutive
//! compositions need only be small.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{CMatrix, InnerProductSpace, LinearOp, MatrixJson};

/// Relative tolerance below which a curvature entry counts as zero.
pub const DEFAULT_EXACTNESS_TOL: f64 = 1e-10;
/// Absolute floor applied to every curvature comparison.
pub const CURVATURE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct QuasiComplex {
    spaces: Vec<InnerProductSpace>,
    diffs: Vec<LinearOp>,
    orders: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureReport {
    /// `‖A^{i+1} A^i‖` for `i = 0..N-1`.
    pub absolute: Vec<f64>,
    /// `absolute[i] / max(floor, ‖A^{i+1}‖·‖A^i‖)`.
    pub relative: Vec<f64>,
    /// `‖A^{i+1}‖·‖A^i‖`.
    pub scales: Vec<f64>,
    pub is_exact: bool,
    pub exactness_tol: f64,
}

impl CurvatureReport {
    pub fn max_absolute(&self) -> f64 {
        self.absolute.iter().fold(0.0, |a, b| a.max(*b))
    }

    pub fn max_relative(&self) -> f64 {
        self.relative.iter().fold(0.0, |a, b| a.max(*b))
    }

    /// First step whose curvature exceeds the tolerance.
    pub fn first_violation(&self) -> Option<usize> {
        (0..self.absolute.len()).find(|&i| !within_tolerance(self.absolute[i], self.scales[i], self.exactness_tol))
    }
}

/// `abs ≤ max(tol·scale, floor)`.
pub fn within_tolerance(abs: f64, scale: f64, tol: f64) -> bool {
    abs <= (tol * scale).max(CURVATURE_FLOOR)
}

/// Curvature of a chained pair, absolute and relative.
pub fn pair_curvature(first: &LinearOp, second: &LinearOp) -> (f64, f64, f64) {
    let abs = second.then(first).norm();
    let scale = second.norm() * first.norm();
    (abs, abs / scale.max(CURVATURE_FLOOR), scale)
}

impl QuasiComplex {
    /// Builds a sequence from its differentials; spaces are read off the operators.
    pub fn new(diffs: Vec<LinearOp>, orders: Option<Vec<f64>>) -> Result<Self> {
        if diffs.is_empty() {
            return Err(Error::ShapeMismatch(
                "at least one differential is required to infer the spaces".into(),
            ));
        }
        let mut spaces = Vec::with_capacity(diffs.len() + 1);
        spaces.push(diffs[0].domain().clone());
        for d in &diffs {
            spaces.push(d.codomain().clone());
        }
        Self::from_parts(spaces, diffs, orders)
    }

    pub fn from_parts(spaces: Vec<InnerProductSpace>, diffs: Vec<LinearOp>, orders: Option<Vec<f64>>) -> Result<Self> {
        if spaces.len() != diffs.len() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} spaces cannot carry {} differentials",
                spaces.len(),
                diffs.len()
            )));
        }
        for (i, d) in diffs.iter().enumerate() {
            if !d.domain().same_as(&spaces[i]) || !d.codomain().same_as(&spaces[i + 1]) {
                return Err(Error::ShapeMismatch(format!(
                    "differential {i} is {}x{} but spaces {i},{} have dims {},{}",
                    d.shape().0,
                    d.shape().1,
                    i + 1,
                    spaces[i].dim(),
                    spaces[i + 1].dim()
                )));
            }
        }
        let orders = orders.unwrap_or_else(|| vec![0.0; diffs.len()]);
        if orders.len() != diffs.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} orders given for {} differentials",
                orders.len(),
                diffs.len()
            )));
        }
        Ok(QuasiComplex { spaces, diffs, orders })
    }

    /// Euclidean spaces, real or complex matrices.
    pub fn from_matrices(matrices: Vec<CMatrix>) -> Result<Self> {
        Self::new(matrices.into_iter().map(LinearOp::euclidean).collect(), None)
    }

    /// Number of differentials `N`.
    pub fn len(&self) -> usize {
        self.diffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diffs.is_empty()
    }

    pub fn spaces(&self) -> &[InnerProductSpace] {
        &self.spaces
    }

    pub fn space(&self, i: usize) -> &InnerProductSpace {
        &self.spaces[i]
    }

    pub fn dims(&self) -> Vec<usize> {
        self.spaces.iter().map(InnerProductSpace::dim).collect()
    }

    pub fn diffs(&self) -> &[LinearOp] {
        &self.diffs
    }

    pub fn diff(&self, i: usize) -> &LinearOp {
        &self.diffs[i]
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    /// `A^i` for any integer `i`; out-of-range steps are zero maps to or from the zero space.
    pub fn diff_or_zero(&self, i: isize) -> LinearOp {
        let n = self.diffs.len() as isize;
        if (0..n).contains(&i) {
            return self.diffs[i as usize].clone();
        }
        let zero = InnerProductSpace::zero();
        if i == -1 {
            LinearOp::zero(&zero, &self.spaces[0])
        } else if i == n {
            LinearOp::zero(&self.spaces[n as usize], &zero)
        } else {
            LinearOp::zero(&zero, &zero)
        }
    }

    /// Alternating sum of the space dimensions.
    pub fn dimension_euler(&self) -> i64 {
        self.spaces
            .iter()
            .enumerate()
            .map(|(i, s)| if i % 2 == 0 { s.dim() as i64 } else { -(s.dim() as i64) })
            .sum()
    }

    pub fn validate(&self) -> CurvatureReport {
        self.validate_with(DEFAULT_EXACTNESS_TOL)
    }

    pub fn validate_with(&self, exactness_tol: f64) -> CurvatureReport {
        let mut absolute = Vec::new();
        let mut relative = Vec::new();
        let mut scales = Vec::new();
        let mut is_exact = true;
        for pair in self.diffs.windows(2) {
            let (abs, rel, scale) = pair_curvature(&pair[0], &pair[1]);
            is_exact &= within_tolerance(abs, scale, exactness_tol);
            absolute.push(abs);
            relative.push(rel);
            scales.push(scale);
        }
        CurvatureReport { absolute, relative, scales, is_exact, exactness_tol }
    }

    pub fn is_exact(&self) -> bool {
        self.validate().is_exact
    }

    /// `0 ← V⁰ ← … ← Vᴺ ← 0` re-indexed as a cochain sequence starting at `Vᴺ`.
    pub fn adjoint_sequence(&self) -> QuasiComplex {
        let diffs: Vec<LinearOp> = self.diffs.iter().rev().map(LinearOp::adjoint).collect();
        let spaces: Vec<InnerProductSpace> = self.spaces.iter().rev().cloned().collect();
        let orders: Vec<f64> = self.orders.iter().rev().copied().collect();
        QuasiComplex { spaces, diffs, orders }
    }

    /// `Δ^i = A^{i-1} A^{i-1}* + A^i* A^i` for `i = 0..=N`.
    pub fn laplacians(&self) -> Vec<LinearOp> {
        (0..=self.len()).map(|i| self.laplacian(i)).collect()
    }

    pub fn laplacian(&self, i: usize) -> LinearOp {
        let before = self.diff_or_zero(i as isize - 1);
        let after = self.diff_or_zero(i as isize);
        let down = before.then(&before.adjoint());
        let up = after.adjoint().then(&after);
        down.add(&up).expect("both Laplacian terms act on the same space")
    }

    /// Square-root factor `T_i = A^{i-1}* ⊕ A^i : V^i → V^{i-1} ⊕ V^{i+1}` with `T_i* T_i = Δ^i`.
    pub fn laplacian_factor(&self, i: usize) -> LinearOp {
        let before_adj = self.diff_or_zero(i as isize - 1).adjoint();
        let after = self.diff_or_zero(i as isize);
        let target = before_adj.codomain().direct_sum(after.codomain());
        let (a, b) = (before_adj.matrix(), after.matrix());
        let mut m = CMatrix::zeros(a.nrows() + b.nrows(), self.spaces[i].dim());
        m.view_mut((0, 0), a.shape()).copy_from(a);
        m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
        LinearOp::new(self.spaces[i].clone(), target, m).expect("stacked factor has consistent shape")
    }

    /// Same spaces and orders, new differentials.
    pub fn with_diffs(&self, diffs: Vec<LinearOp>) -> Result<QuasiComplex> {
        Self::from_parts(self.spaces.clone(), diffs, Some(self.orders.clone()))
    }

    pub fn to_json(&self) -> QuasiComplexJson {
        QuasiComplexJson {
            spaces: self
                .spaces
                .iter()
                .map(|s| SpaceJson {
                    dim: s.dim(),
                    gram: if s.is_euclidean() { None } else { Some(MatrixJson::from_matrix(&s.gram())) },
                })
                .collect(),
            diffs: self.diffs.iter().map(|d| MatrixJson::from_matrix(d.matrix())).collect(),
            orders: if self.orders.iter().all(|m| *m == 0.0) { None } else { Some(self.orders.clone()) },
            meta: None,
        }
    }

    pub fn from_json(json: &QuasiComplexJson) -> Result<Self> {
        let spaces = json
            .spaces
            .iter()
            .map(|s| match &s.gram {
                None => Ok(InnerProductSpace::euclidean(s.dim)),
                Some(g) => {
                    let g = g.to_matrix()?;
                    if g.shape() != (s.dim, s.dim) {
                        return Err(Error::ShapeMismatch(format!(
                            "gram is {}x{} for a space of dim {}",
                            g.nrows(),
                            g.ncols(),
                            s.dim
                        )));
                    }
                    InnerProductSpace::with_gram(g)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if spaces.len() != json.diffs.len() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} spaces cannot carry {} differentials",
                spaces.len(),
                json.diffs.len()
            )));
        }
        let diffs = json
            .diffs
            .iter()
            .enumerate()
            .map(|(i, m)| LinearOp::new(spaces[i].clone(), spaces[i + 1].clone(), m.to_matrix()?))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(spaces, diffs, json.orders.clone())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let json: QuasiComplexJson = serde_json::from_str(text)?;
        Self::from_json(&json)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceJson {
    pub dim: usize,
    #[serde(default)]
    pub gram: Option<MatrixJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiComplexJson {
    pub spaces: Vec<SpaceJson>,
    pub diffs: Vec<MatrixJson>,
    #[serde(default)]
    pub orders: Option<Vec<f64>>,
    /// Free-form provenance (seed, generator, source digest); ignored on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<serde_json::Value>,
}
