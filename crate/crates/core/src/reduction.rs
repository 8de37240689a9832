//! Reduction of a quasicomplex to a complex by a backward sweep.
//!
//! The top differential is kept, `D^{N-1} = A^{N-1}`. Walking down, each
//! `D^k` is obtained from `A^k` by the kernel projector of the already fixed
//! `D^{k+1}`:
//!
//! ```text
//! P^{k+2}   = D^{k+1}* G^{k+2}          G^{k+2} Green operator of
//!                                       Δ^{k+2} = D^{k+1}D^{k+1}* + D^{k+2}*D^{k+2}
//! 𝒫^{k+1}   = Id − P^{k+2} D^{k+1}      projector onto ker D^{k+1}
//! D^k       = 𝒫^{k+1} A^k
//! ```
//!
//! `𝒫^{k+1}` is taken from the singular vectors of `D^{k+1}` (it coincides
//! with `Id − P^{k+2}D^{k+1}`, whose defects are logged), symmetrized and
//! re-idempotized. `A^k` is left untouched whenever `D^{k+1}A^k` vanishes.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::hodge::green_split;
use crate::linop::{hermitian_eigen, CMatrix, LinearOp, DEFAULT_RANK_TOL};
use crate::quasicomplex::{pair_curvature, within_tolerance, QuasiComplex};

/// Default relative tolerance on the output curvature.
pub const DEFAULT_REDUCTION_TOL: f64 = 1e-10;
/// Input relative curvature above which the proximity bound is not certified.
pub const UNCERTIFIED_CURVATURE: f64 = 0.1;

#[derive(Clone, Copy, Debug)]
pub struct ReductionOptions {
    pub rank_tol: f64,
    /// Certificate threshold on the relative output curvature.
    pub reduction_tol: f64,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        ReductionOptions { rank_tol: DEFAULT_RANK_TOL, reduction_tol: DEFAULT_REDUCTION_TOL }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepStep {
    /// Index `k` of the differential produced at this step.
    pub target: usize,
    /// `‖G^{k+2}‖`.
    pub green_norm: f64,
    /// `‖P^{k+2}‖`.
    pub parametrix_norm: f64,
    /// `‖𝒫² − 𝒫‖` before symmetrization.
    pub raw_idempotence_defect: f64,
    /// `‖𝒫 − 𝒫*‖` before symmetrization.
    pub raw_self_adjoint_defect: f64,
    /// `‖𝒫² − 𝒫‖` of the projector actually used.
    pub idempotence_defect: f64,
    pub projector_rank: usize,
    /// `‖D^{k+1} A^k‖`, the residual corrected at this step.
    pub residual_curvature: f64,
    pub kappa: f64,
}

#[derive(Clone, Debug)]
pub struct ReductionResult {
    pub reduced: QuasiComplex,
    /// `‖D^i − A^i‖`.
    pub diff_norms: Vec<f64>,
    /// `‖D^{i+1} D^i‖`.
    pub curvature_after: Vec<f64>,
    pub curvature_after_relative: Vec<f64>,
    /// Bound factors with `‖D^i − A^i‖ ≤ κ_i · max_input_curvature`.
    pub kappa: Vec<f64>,
    pub max_input_curvature: f64,
    pub max_input_relative_curvature: f64,
    pub sweep_log: Vec<SweepStep>,
    /// Input curvature small enough for the proximity bound to mean something.
    pub certified: bool,
    /// Every output curvature entry within the reduction tolerance.
    pub exact_output: bool,
    pub reduction_tol: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReductionCertificate {
    pub diff_norms: Vec<f64>,
    pub curvature_after: Vec<f64>,
    pub curvature_after_relative: Vec<f64>,
    pub kappa: Vec<f64>,
    pub max_input_curvature: f64,
    pub max_input_relative_curvature: f64,
    pub certified: bool,
    pub exact_output: bool,
    pub reduction_tol: f64,
    pub sweep_log: Vec<SweepStep>,
}

impl ReductionResult {
    pub fn certificate(&self) -> ReductionCertificate {
        ReductionCertificate {
            diff_norms: self.diff_norms.clone(),
            curvature_after: self.curvature_after.clone(),
            curvature_after_relative: self.curvature_after_relative.clone(),
            kappa: self.kappa.clone(),
            max_input_curvature: self.max_input_curvature,
            max_input_relative_curvature: self.max_input_relative_curvature,
            certified: self.certified,
            exact_output: self.exact_output,
            reduction_tol: self.reduction_tol,
            sweep_log: self.sweep_log.clone(),
        }
    }

    /// `‖D^i − A^i‖ ≤ κ_i · max_curvature` up to roundoff.
    pub fn proximity_holds(&self) -> bool {
        self.diff_norms
            .iter()
            .zip(&self.kappa)
            .all(|(d, k)| *d <= k * self.max_input_curvature * (1.0 + 1e-8) + 1e-12)
    }
}

pub fn reduce(qc: &QuasiComplex) -> Result<ReductionResult> {
    reduce_with(qc, ReductionOptions::default())
}

pub fn reduce_with(qc: &QuasiComplex, options: ReductionOptions) -> Result<ReductionResult> {
    let n = qc.len();
    let input = qc.validate();
    let max_curvature = input.max_absolute();
    let mut d: Vec<LinearOp> = qc.diffs().to_vec();
    let mut kappa = vec![0.0; n];
    let mut log = Vec::new();

    for k in (0..n.saturating_sub(1)).rev() {
        let staged = qc.with_diffs(d.clone())?;
        // Only D^{k+1}, D^{k+2} enter Δ^{k+2}; both are already fixed.
        let split = green_split(&staged, k + 2, options.rank_tol);
        let next = &d[k + 1];
        // D^{k+2}D^{k+1} = 0 makes D^{k+1}*G^{k+2} the pseudo-inverse of
        // D^{k+1}; the direct SVD avoids squaring its condition number.
        let p = next.pinv(options.rank_tol);
        let space = qc.space(k + 1);
        let raw = LinearOp::identity(space).sub(&p.then(next))?;
        // Same projector as `raw`, but from the singular vectors of D^{k+1},
        // so its error does not scale with ‖P‖.
        let svd_projector = LinearOp::projector_onto(space, &next.kernel_basis(options.rank_tol));
        let (projector, complement_rank) = clean_projector(&svd_projector);

        // A^k − (Id − 𝒫)P(D^{k+1}A^k) equals 𝒫A^k. Applying the orthogonal
        // projector directly keeps roundoff from being amplified by ‖P‖, which
        // would otherwise leave spurious small singular values in D^k.
        let residual = next.then(qc.diff(k));
        if residual.matrix().iter().any(|z| *z != Complex64::new(0.0, 0.0)) {
            d[k] = projector.then(qc.diff(k));
        }

        let p_norm = p.norm();
        kappa[k] = p_norm * (1.0 + kappa[k + 1] * qc.diff(k).norm());
        log.push(SweepStep {
            target: k,
            green_norm: split.green.norm(),
            parametrix_norm: p_norm,
            raw_idempotence_defect: raw.then(&raw).distance(&raw),
            raw_self_adjoint_defect: raw.self_adjoint_defect(),
            idempotence_defect: projector.then(&projector).distance(&projector),
            projector_rank: space.dim() - complement_rank,
            residual_curvature: residual.norm(),
            kappa: kappa[k],
        });
    }

    let diff_norms: Vec<f64> = d.iter().zip(qc.diffs()).map(|(x, a)| x.distance(a)).collect();
    let mut curvature_after = Vec::new();
    let mut curvature_after_relative = Vec::new();
    let mut exact_output = true;
    for pair in d.windows(2) {
        let (abs, rel, scale) = pair_curvature(&pair[0], &pair[1]);
        exact_output &= within_tolerance(abs, scale, options.reduction_tol);
        curvature_after.push(abs);
        curvature_after_relative.push(rel);
    }
    Ok(ReductionResult {
        reduced: qc.with_diffs(d)?,
        diff_norms,
        curvature_after,
        curvature_after_relative,
        kappa,
        max_input_curvature: max_curvature,
        max_input_relative_curvature: input.max_relative(),
        sweep_log: log,
        certified: input.max_relative() <= UNCERTIFIED_CURVATURE,
        exact_output,
        reduction_tol: options.reduction_tol,
    })
}

/// Symmetrize, then split the spectrum at 1/2. Returns the projector and the
/// rank of its complement.
fn clean_projector(raw: &LinearOp) -> (LinearOp, usize) {
    let space = raw.domain();
    let m = raw.orthonormal_matrix();
    let (vals, vecs) = hermitian_eigen(&m);
    let n = space.dim();
    let mut p = CMatrix::zeros(n, n);
    let mut complement = 0;
    for (k, lambda) in vals.iter().enumerate() {
        if *lambda > 0.5 {
            let v = vecs.column(k);
            p += &v * v.adjoint();
        } else {
            complement += 1;
        }
    }
    (LinearOp::from_orthonormal(space, space, p).expect("square"), complement)
}

/// Orthogonal projector onto `ker d` via the Green-operator route.
pub fn kernel_projector(d: &LinearOp, rank_tol: f64) -> LinearOp {
    crate::hodge::green_kernel_projector(d, rank_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{derham_complex, perturb, tetrahedron, torus_grid, PerturbationSpec};
    use crate::cohomology::{betti, BettiRoute};
    use crate::linop::{real_matrix, InnerProductSpace};

    #[test]
    fn exact_input_is_left_untouched() {
        for qc in [derham_complex(&tetrahedron()), derham_complex(&torus_grid(3).unwrap())] {
            let r = reduce(&qc).unwrap();
            assert!(r.diff_norms.iter().all(|d| *d == 0.0), "{:?}", r.diff_norms);
            assert!(r.exact_output && r.certified);
        }
    }

    #[test]
    fn short_complex_needs_no_correction() {
        let qc = QuasiComplex::from_matrices(vec![real_matrix(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])]).unwrap();
        let r = reduce(&qc).unwrap();
        assert_eq!(r.diff_norms, vec![0.0]);
        assert!(r.sweep_log.is_empty());
    }

    #[test]
    fn perturbed_tetrahedron_reduces_to_complex() {
        let base = derham_complex(&tetrahedron());
        let qc = perturb(&base, &PerturbationSpec::new(1e-3, 7));
        let r = reduce(&qc).unwrap();
        assert!(r.curvature_after.iter().all(|c| *c <= 1e-12), "{:?}", r.curvature_after);
        assert_eq!(r.diff_norms[1], 0.0);
        assert!(r.proximity_holds(), "{:?} vs {:?}", r.diff_norms, r.kappa);
        let b = betti(&r.reduced, BettiRoute::RankNullity, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(b.chi, 2);
        assert_eq!(b.betti[0] as i64 + b.betti[2] as i64 - b.betti[1] as i64, 2);
        for step in &r.sweep_log {
            assert!(step.idempotence_defect <= 1e-10);
        }
    }

    #[test]
    fn reduction_is_deterministic() {
        let qc = perturb(&derham_complex(&torus_grid(3).unwrap()), &PerturbationSpec::new(1e-3, 1));
        let a = reduce(&qc).unwrap();
        let b = reduce(&qc).unwrap();
        for (x, y) in a.reduced.diffs().iter().zip(b.reduced.diffs()) {
            assert_eq!(x.matrix(), y.matrix());
        }
    }

    #[test]
    fn large_curvature_is_flagged_uncertified() {
        let qc = QuasiComplex::from_matrices(vec![
            real_matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            real_matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]),
        ])
        .unwrap();
        let r = reduce(&qc).unwrap();
        assert!(!r.certified);
        assert!(r.exact_output);
    }

    #[test]
    fn kernel_projector_examples() {
        let v = InnerProductSpace::euclidean(3);
        let zero = LinearOp::zero(&v, &InnerProductSpace::euclidean(2));
        assert!(kernel_projector(&zero, DEFAULT_RANK_TOL).distance(&LinearOp::identity(&v)) < 1e-15);
        let inv = LinearOp::from_real(2, 2, &[1.0, 1.0, 0.0, 2.0]);
        assert!(kernel_projector(&inv, DEFAULT_RANK_TOL).norm() < 1e-14);
        let d1 = derham_complex(&tetrahedron()).diff(1).clone();
        let p = kernel_projector(&d1, DEFAULT_RANK_TOL);
        assert_eq!(p.rank(DEFAULT_RANK_TOL), 3);
        assert!(p.then(&p).distance(&p) < 1e-12);
        assert!(d1.then(&p).norm() < 1e-12);
    }
}
