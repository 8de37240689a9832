//! Harmonic projectors, Green operators and parametrices.
//!
//! The kernel of `Δ^i` is read from the singular values of the square-root
//! factor `T_i = A^{i-1}* ⊕ A^i` (so `Δ^i = T_i* T_i`), which resolves the
//! kernel at the precision of the differentials rather than of their squares.
//!
//! For sequences that are not exact the Laplacians have near-kernels whose
//! eigenvalues are of the order of the curvature squared. Those directions are
//! treated as harmonic: the relative cutoff on `σ(T_i)` becomes
//! `max(rank_tol, √κ)` where `κ` is the largest relative curvature. With that
//! convention `Id − H^i` is what the parametrix inverts and the homotopy defect
//! is linear in the curvature.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linop::{c64, matmul, profile_from, rank_threshold, CMatrix, LinearOp, MatrixJson};
use crate::quasicomplex::{CurvatureReport, QuasiComplex};

/// Relative cutoff applied to `σ(T_i)` when extracting harmonic spaces.
pub fn kernel_cutoff(curvature: &CurvatureReport, rank_tol: f64) -> f64 {
    if curvature.is_exact {
        rank_tol
    } else {
        rank_tol.max(curvature.max_relative().sqrt())
    }
}

/// Harmonic projector and Green operator at one step.
#[derive(Clone, Debug)]
pub struct GreenSplit {
    pub harmonic: LinearOp,
    pub green: LinearOp,
    pub harmonic_dim: usize,
    /// Largest singular value of `T_i` assigned to the kernel (0 if none).
    pub largest_harmonic_singular: f64,
    /// Smallest singular value of `T_i` that was inverted.
    pub smallest_inverted_singular: Option<f64>,
}

pub fn green_split(qc: &QuasiComplex, step: usize, cutoff_rel: f64) -> GreenSplit {
    let factor = qc.laplacian_factor(step);
    let space = qc.space(step);
    let f = factor.factorization();
    let profile = profile_from(&f.s, cutoff_rel);
    let n = space.dim();
    let rank = profile.rank;
    let kernel = f.v.columns(rank, n - rank);
    let h = matmul(&kernel.into_owned(), &kernel.adjoint());
    let mut scaled = f.v.columns(0, rank).into_owned();
    for k in 0..rank {
        scaled.column_mut(k).scale_mut(1.0 / (f.s[k] * f.s[k]));
    }
    let g = matmul(&scaled, &f.v.columns(0, rank).adjoint());
    GreenSplit {
        harmonic: LinearOp::from_orthonormal(space, space, h).expect("square"),
        green: LinearOp::from_orthonormal(space, space, g).expect("square"),
        harmonic_dim: n - profile.rank,
        largest_harmonic_singular: f.s.get(profile.rank).copied().unwrap_or(0.0),
        smallest_inverted_singular: profile.rank.checked_sub(1).map(|k| f.s[k]),
    }
}

/// Residual checks, measured in the metric Hilbert–Schmidt norm (which
/// dominates the operator norm).
#[derive(Clone, Debug, Serialize)]
pub struct HodgeResiduals {
    /// `‖(H^i)² − H^i‖`.
    pub projector_idempotence: f64,
    /// `‖H^i − H^i*‖`.
    pub projector_self_adjoint: f64,
    /// `max(‖G^iΔ^i − (Id − H^i)‖, ‖Δ^iG^i − (Id − H^i)‖)`.
    pub green_identity: f64,
    /// `max(‖H^iG^i‖, ‖G^iH^i‖)`.
    pub harmonic_green: f64,
    /// `‖Δ^i − Δ^i*‖ / ‖Δ^i‖`.
    pub laplacian_self_adjoint: f64,
    /// `‖H^i + A^{i-1}P^i + P^{i+1}A^i − Id‖`.
    pub hodge_identity: f64,
    /// Largest norm of a product of two distinct summands of the decomposition.
    pub orthogonality: f64,
}

#[derive(Clone, Debug)]
pub struct HodgeData {
    pub step: usize,
    pub laplacian: LinearOp,
    pub harmonic_projector: LinearOp,
    pub green: LinearOp,
    /// `P^i = A^{i-1}* G^i : V^i → V^{i-1}`.
    pub parametrix: LinearOp,
    pub harmonic_dim: usize,
    pub kernel_cutoff: f64,
    pub residuals: HodgeResiduals,
}

pub fn hodge_decompose(qc: &QuasiComplex, step: usize, rank_tol: f64) -> Result<HodgeData> {
    let n = qc.len();
    if step > n {
        return Err(Error::StepOutOfRange { step, max: n });
    }
    let cutoff = kernel_cutoff(&qc.validate(), rank_tol);
    let split = green_split(qc, step, cutoff);
    let next = (step < n).then(|| green_split(qc, step + 1, cutoff));

    let space = qc.space(step);
    let id = LinearOp::identity(space);
    let laplacian = qc.laplacian(step);
    let (h, g) = (&split.harmonic, &split.green);
    let id_minus_h = id.sub(h)?;

    let before = qc.diff_or_zero(step as isize - 1);
    let after = qc.diff_or_zero(step as isize);
    let parametrix = before.adjoint().then(g);
    let exact_part = before.then(&parametrix);
    let coexact_part = match &next {
        Some(nx) => after.adjoint().then(&nx.green).then(&after),
        None => LinearOp::zero(space, space),
    };

    let summands = [h, &exact_part, &coexact_part];
    let mut orthogonality: f64 = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            if a != b {
                orthogonality = orthogonality.max(summands[a].then(summands[b]).hs_norm());
            }
        }
    }
    let gap = |x: &LinearOp, y: &LinearOp| x.sub(y).expect("same spaces").hs_norm();
    let total = h.add(&exact_part)?.add(&coexact_part)?;
    let lap_norm = laplacian.hs_norm();
    let residuals = HodgeResiduals {
        projector_idempotence: gap(&h.then(h), h),
        projector_self_adjoint: gap(h, &h.adjoint()),
        green_identity: gap(&g.then(&laplacian), &id_minus_h).max(gap(&laplacian.then(g), &id_minus_h)),
        harmonic_green: h.then(g).hs_norm().max(g.then(h).hs_norm()),
        laplacian_self_adjoint: if lap_norm > 0.0 { gap(&laplacian, &laplacian.adjoint()) / lap_norm } else { 0.0 },
        hodge_identity: gap(&total, &id),
        orthogonality,
    };
    Ok(HodgeData {
        step,
        laplacian,
        harmonic_projector: split.harmonic,
        green: split.green,
        parametrix,
        harmonic_dim: split.harmonic_dim,
        kernel_cutoff: cutoff,
        residuals,
    })
}

/// Hodge data at every step `0..=N`.
pub fn hodge_all(qc: &QuasiComplex, rank_tol: f64) -> Vec<HodgeData> {
    (0..=qc.len())
        .map(|i| hodge_decompose(qc, i, rank_tol).expect("step in range"))
        .collect()
}

impl HodgeData {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "step": self.step,
            "harmonic_dim": self.harmonic_dim,
            "kernel_cutoff": self.kernel_cutoff,
            "laplacian": MatrixJson::from_matrix(self.laplacian.matrix()),
            "harmonic_projector": MatrixJson::from_matrix(self.harmonic_projector.matrix()),
            "green": MatrixJson::from_matrix(self.green.matrix()),
            "parametrix": MatrixJson::from_matrix(self.parametrix.matrix()),
            "residuals": self.residuals,
        })
    }
}

/// Parametrix `P^i = G^{i-1} A^{i-1}*` of a (quasi)complex with its certificates.
#[derive(Clone, Debug)]
pub struct ParametrixReport {
    /// `P^0, …, P^N` with `P^i : V^i → V^{i-1}` (`P^0` maps to the zero space).
    pub maps: Vec<LinearOp>,
    pub harmonic_projectors: Vec<LinearOp>,
    /// `‖P^{i+1}A^i + A^{i-1}P^i − (Id − H^i)‖` for `i = 0..=N`.
    pub defects: Vec<f64>,
    /// A-priori bounds on `defects` assembled from Green and harmonic norms.
    pub defect_bounds: Vec<f64>,
    /// `‖A^iG^i − G^{i+1}A^i‖` for `i = 0..N-1`.
    pub commutators: Vec<f64>,
    pub commutator_bounds: Vec<f64>,
    pub green_norms: Vec<f64>,
    pub max_curvature: f64,
    /// `max defect_bound / max_curvature` (0 for exact input).
    pub kappa: f64,
    /// `max commutator_bound / max_curvature` (0 for exact input).
    pub kappa_prime: f64,
    pub kernel_cutoff: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParametrixSummary {
    pub defects: Vec<f64>,
    pub defect_bounds: Vec<f64>,
    pub commutators: Vec<f64>,
    pub commutator_bounds: Vec<f64>,
    pub green_norms: Vec<f64>,
    pub max_curvature: f64,
    pub kappa: f64,
    pub kappa_prime: f64,
    pub kernel_cutoff: f64,
}

impl ParametrixReport {
    pub fn max_defect(&self) -> f64 {
        self.defects.iter().fold(0.0, |a, b| a.max(*b))
    }

    pub fn summary(&self) -> ParametrixSummary {
        ParametrixSummary {
            defects: self.defects.clone(),
            defect_bounds: self.defect_bounds.clone(),
            commutators: self.commutators.clone(),
            commutator_bounds: self.commutator_bounds.clone(),
            green_norms: self.green_norms.clone(),
            max_curvature: self.max_curvature,
            kappa: self.kappa,
            kappa_prime: self.kappa_prime,
            kernel_cutoff: self.kernel_cutoff,
        }
    }
}

pub fn parametrix(qc: &QuasiComplex, rank_tol: f64) -> ParametrixReport {
    let n = qc.len();
    let curvature = qc.validate();
    let cutoff = kernel_cutoff(&curvature, rank_tol);
    let splits: Vec<GreenSplit> = (0..=n).map(|i| green_split(qc, i, cutoff)).collect();
    let diff = |i: isize| qc.diff_or_zero(i);
    let norms: Vec<f64> = (-1..=n as isize).map(|i| diff(i).norm()).collect();
    let diff_norm = |i: isize| norms[(i + 1) as usize];
    let curv = |i: isize| -> f64 {
        if i < 0 || i as usize >= curvature.absolute.len() {
            0.0
        } else {
            curvature.absolute[i as usize]
        }
    };

    let zero = crate::linop::InnerProductSpace::zero();
    let mut maps = Vec::with_capacity(n + 1);
    maps.push(LinearOp::zero(qc.space(0), &zero));
    for i in 1..=n {
        maps.push(splits[i - 1].green.then(&qc.diff(i - 1).adjoint()));
    }

    let green_norms: Vec<f64> = splits.iter().map(|s| s.green.norm()).collect();
    // ‖A^jG^j − G^{j+1}A^j‖ ≤ ‖G^{j+1}‖‖G^j‖(‖A^{j+1}‖κ_j + ‖A^{j-1}‖κ_{j-1}) + s_{j+1}‖G^j‖ + ‖G^{j+1}‖s_j
    let mut commutators = Vec::with_capacity(n);
    let mut commutator_bounds = Vec::with_capacity(n);
    for j in 0..n {
        let a = qc.diff(j);
        let x = a.then(&splits[j].green).sub(&splits[j + 1].green.then(a)).expect("same spaces");
        commutators.push(x.norm());
        let ji = j as isize;
        let bound = green_norms[j + 1] * green_norms[j] * (diff_norm(ji + 1) * curv(ji) + diff_norm(ji - 1) * curv(ji - 1))
            + splits[j + 1].largest_harmonic_singular * green_norms[j]
            + green_norms[j + 1] * splits[j].largest_harmonic_singular;
        commutator_bounds.push(bound);
    }

    let mut defects = Vec::with_capacity(n + 1);
    let mut defect_bounds = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let space = qc.space(i);
        let target = LinearOp::identity(space).sub(&splits[i].harmonic).expect("same space");
        let mut sum = LinearOp::zero(space, space);
        if i < n {
            sum = sum.add(&maps[i + 1].then(qc.diff(i))).expect("same space");
        }
        if i > 0 {
            sum = sum.add(&qc.diff(i - 1).then(&maps[i])).expect("same space");
        }
        defects.push(sum.distance(&target));
        // The defect operator equals (A^{i-1}G^{i-1} − G^iA^{i-1}) A^{i-1}*.
        defect_bounds.push(if i > 0 { commutator_bounds[i - 1] * diff_norm(i as isize - 1) } else { 0.0 });
    }

    let max_curvature = curvature.max_absolute();
    let ratio = |v: &[f64]| {
        if max_curvature > 0.0 {
            v.iter().fold(0.0_f64, |a, b| a.max(*b)) / max_curvature
        } else {
            0.0
        }
    };
    ParametrixReport {
        kappa: ratio(&defect_bounds),
        kappa_prime: ratio(&commutator_bounds),
        harmonic_projectors: splits.into_iter().map(|s| s.harmonic).collect(),
        maps,
        defects,
        defect_bounds,
        commutators,
        commutator_bounds,
        green_norms,
        max_curvature,
        kernel_cutoff: cutoff,
    }
}

/// Kernel projector by the Green-operator route `Id − d* G d` with `G` the
/// Green operator of `d d*`.
pub fn green_kernel_projector(d: &LinearOp, rank_tol: f64) -> LinearOp {
    let dom = d.domain();
    let adjoint = d.adjoint();
    let f = adjoint.factorization();
    let cod = d.codomain();
    let threshold = rank_threshold(f.s.first().copied().unwrap_or(0.0), rank_tol);
    let m = cod.dim();
    let mut g = CMatrix::zeros(m, m);
    for k in 0..m {
        if f.s[k] > threshold {
            let v = f.v.column(k);
            g += (&v * v.adjoint()) * c64(1.0 / (f.s[k] * f.s[k]));
        }
    }
    let green = LinearOp::from_orthonormal(cod, cod, g).expect("square");
    LinearOp::identity(dom).sub(&adjoint.then(&green).then(d)).expect("same space")
}
