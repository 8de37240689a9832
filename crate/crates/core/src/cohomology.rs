//! Betti numbers, Euler characteristics and Lefschetz numbers.

use num_complex::Complex64;
use serde::Serialize;

use crate::builders::{perturb, PerturbationSpec};
use crate::error::{Error, Result};
use crate::hodge::green_split;
use crate::linop::{CMatrix, LinearOp};
use crate::quasicomplex::{QuasiComplex, CURVATURE_FLOOR};
use crate::reduction::{reduce_with, ReductionOptions};

/// Magnitude of the re-perturbations used to test stability of χ.
pub const REPERTURBATION_EPS: f64 = 1e-6;
/// Relative commutation defect allowed for an endomorphism.
pub const ENDOMORPHISM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BettiRoute {
    RankNullity,
    Harmonic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BettiReport {
    pub betti: Vec<usize>,
    pub route: BettiRoute,
    pub chi: i64,
}

fn require_exact(c: &QuasiComplex) -> Result<()> {
    let report = c.validate();
    match report.first_violation() {
        None => Ok(()),
        Some(step) => Err(Error::NotAComplex { step, relative_curvature: report.relative[step] }),
    }
}

pub fn alternating_sum(values: &[usize]) -> i64 {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| if i % 2 == 0 { *v as i64 } else { -(*v as i64) })
        .sum()
}

pub fn betti(c: &QuasiComplex, route: BettiRoute, rank_tol: f64) -> Result<BettiReport> {
    require_exact(c)?;
    let n = c.len();
    let betti: Vec<usize> = match route {
        BettiRoute::RankNullity => {
            let ranks: Vec<usize> = c.diffs().iter().map(|d| d.rank(rank_tol)).collect();
            (0..=n)
                .map(|i| {
                    let kernel = c.space(i).dim() - if i < n { ranks[i] } else { 0 };
                    let image = if i > 0 { ranks[i - 1] } else { 0 };
                    // A numerically inconsistent input could make this negative.
                    kernel.saturating_sub(image)
                })
                .collect()
        }
        BettiRoute::Harmonic => (0..=n).map(|i| green_split(c, i, rank_tol).harmonic_dim).collect(),
    };
    let chi = alternating_sum(&betti);
    Ok(BettiReport { betti, route, chi })
}

#[derive(Clone, Debug, Serialize)]
pub struct EulerQuasiReport {
    pub chi: i64,
    /// Betti numbers of the reduced complex of the input itself.
    pub reduced_betti: Vec<usize>,
    pub trial_seeds: Vec<u64>,
    pub trial_chis: Vec<i64>,
    pub reperturbation_eps: f64,
    pub certified: bool,
    pub exact_output: bool,
}

fn reduced_betti(qc: &QuasiComplex, options: ReductionOptions) -> Result<(BettiReport, bool, bool)> {
    let r = reduce_with(qc, options)?;
    let b = betti(&r.reduced, BettiRoute::RankNullity, options.rank_tol)?;
    Ok((b, r.certified, r.exact_output))
}

/// χ of a quasicomplex through its reduced complex. With `trials > 1` the
/// input is re-perturbed `trials` times and every reduced χ must coincide.
pub fn euler_quasi(qc: &QuasiComplex, trials: usize, seed: u64, options: ReductionOptions) -> Result<EulerQuasiReport> {
    let (base, mut certified, mut exact_output) = reduced_betti(qc, options)?;
    let mut trial_seeds = Vec::new();
    let mut trial_chis = Vec::new();
    if trials > 1 {
        for t in 0..trials as u64 {
            let s = seed.wrapping_add(t);
            let shaken = perturb(qc, &PerturbationSpec::new(REPERTURBATION_EPS, s));
            let (b, c, e) = reduced_betti(&shaken, options)?;
            certified &= c;
            exact_output &= e;
            trial_seeds.push(s);
            trial_chis.push(b.chi);
        }
    }
    if trial_chis.iter().any(|chi| *chi != base.chi) {
        let mut all = vec![base.chi];
        all.extend(&trial_chis);
        return Err(Error::InconsistentEuler(all));
    }
    Ok(EulerQuasiReport {
        chi: base.chi,
        reduced_betti: base.betti,
        trial_seeds,
        trial_chis,
        reperturbation_eps: REPERTURBATION_EPS,
        certified,
        exact_output,
    })
}

/// Family of maps `E^i : V^i → V^i`.
#[derive(Clone, Debug)]
pub struct Endomorphism {
    maps: Vec<LinearOp>,
    commute_defect: Vec<f64>,
}

impl Endomorphism {
    pub fn new(c: &QuasiComplex, maps: Vec<LinearOp>) -> Result<Self> {
        if maps.len() != c.spaces().len() {
            return Err(Error::ShapeMismatch(format!(
                "{} maps for a sequence with {} spaces",
                maps.len(),
                c.spaces().len()
            )));
        }
        for (i, e) in maps.iter().enumerate() {
            if !e.is_square_on(c.space(i)) {
                return Err(Error::ShapeMismatch(format!("map {i} does not act on space {i}")));
            }
        }
        let commute_defect = c
            .diffs()
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let lhs = maps[i + 1].then(a);
                let rhs = a.then(&maps[i]);
                let scale = a.norm() * maps[i].norm().max(maps[i + 1].norm());
                lhs.distance(&rhs) / scale.max(CURVATURE_FLOOR)
            })
            .collect();
        Ok(Endomorphism { maps, commute_defect })
    }

    /// Builds from raw matrices on the spaces of `c`.
    pub fn from_matrices(c: &QuasiComplex, matrices: Vec<CMatrix>) -> Result<Self> {
        if matrices.len() != c.spaces().len() {
            return Err(Error::ShapeMismatch(format!(
                "{} maps for a sequence with {} spaces",
                matrices.len(),
                c.spaces().len()
            )));
        }
        let maps = matrices
            .into_iter()
            .enumerate()
            .map(|(i, m)| LinearOp::new(c.space(i).clone(), c.space(i).clone(), m))
            .collect::<Result<Vec<_>>>()?;
        Self::new(c, maps)
    }

    pub fn identity(c: &QuasiComplex) -> Self {
        Self::new(c, c.spaces().iter().map(LinearOp::identity).collect()).expect("identity is an endomorphism")
    }

    pub fn maps(&self) -> &[LinearOp] {
        &self.maps
    }

    pub fn commute_defect(&self) -> &[f64] {
        &self.commute_defect
    }

    /// `α·self + β·other`.
    pub fn combine(&self, c: &QuasiComplex, alpha: Complex64, other: &Endomorphism, beta: Complex64) -> Result<Self> {
        let maps = self
            .maps
            .iter()
            .zip(&other.maps)
            .map(|(e, f)| e.scale(alpha).add(&f.scale(beta)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(c, maps)
    }

    fn check(&self) -> Result<()> {
        match self.commute_defect.iter().position(|d| *d > ENDOMORPHISM_TOL) {
            None => Ok(()),
            Some(step) => Err(Error::NotAnEndomorphism { step, defect: self.commute_defect[step] }),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LefschetzReport {
    pub value: Complex64,
    /// `tr(H^i E^i H^i)` per step.
    pub traces: Vec<Complex64>,
}

/// `L(E) = Σ (−1)^i tr(H^i E^i H^i)` with `H^i` the harmonic projectors.
pub fn lefschetz(c: &QuasiComplex, e: &Endomorphism, rank_tol: f64) -> Result<LefschetzReport> {
    require_exact(c)?;
    e.check()?;
    let traces: Vec<Complex64> = (0..=c.len())
        .map(|i| {
            let h = green_split(c, i, rank_tol).harmonic;
            h.then(&e.maps[i]).then(&h).trace()
        })
        .collect();
    Ok(LefschetzReport { value: signed_sum(&traces), traces })
}

fn signed_sum(traces: &[Complex64]) -> Complex64 {
    traces
        .iter()
        .enumerate()
        .map(|(i, t)| if i % 2 == 0 { *t } else { -*t })
        .sum()
}

/// Lefschetz number through explicit quotient bases of `ker A^i / im A^{i-1}`.
///
/// The complement of the image inside the kernel is chosen greedily among
/// kernel basis vectors; coordinates are solved in the plain Euclidean sense,
/// so no orthogonal projector enters this route.
pub fn lefschetz_quotient(c: &QuasiComplex, e: &Endomorphism, rank_tol: f64) -> Result<LefschetzReport> {
    require_exact(c)?;
    e.check()?;
    let mut traces = Vec::with_capacity(c.len() + 1);
    for i in 0..=c.len() {
        let kernel = c.diff_or_zero(i as isize).kernel_basis(rank_tol);
        let image = c.diff_or_zero(i as isize - 1).image_basis(rank_tol);
        let r = image.ncols();
        let mut basis = image.clone();
        let mut complement = Vec::new();
        for k in 0..kernel.ncols() {
            let candidate = append_column(&basis, &kernel.columns(k, 1).into_owned());
            if LinearOp::euclidean(candidate.clone()).rank(1e-8) > basis.ncols() {
                basis = candidate;
                complement.push(k);
            }
        }
        let solve = LinearOp::euclidean(basis.clone()).pinv(rank_tol);
        let mut trace = Complex64::new(0.0, 0.0);
        for (j, &k) in complement.iter().enumerate() {
            let image_of = e.maps[i].matrix() * kernel.column(k);
            let coords = solve.matrix() * image_of;
            trace += coords[(r + j, 0)];
        }
        traces.push(trace);
    }
    Ok(LefschetzReport { value: signed_sum(&traces), traces })
}

fn append_column(m: &CMatrix, col: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(m.nrows(), m.ncols() + 1);
    out.view_mut((0, 0), m.shape()).copy_from(m);
    out.column_mut(m.ncols()).copy_from(&col.column(0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{derham_complex, simplicial_endomorphism, tetrahedron, torus_grid};
    use crate::linop::{c64, real_matrix, DEFAULT_RANK_TOL};

    #[test]
    fn tetrahedron_betti() {
        let qc = derham_complex(&tetrahedron());
        for route in [BettiRoute::RankNullity, BettiRoute::Harmonic] {
            let b = betti(&qc, route, DEFAULT_RANK_TOL).unwrap();
            assert_eq!(b.betti, vec![1, 0, 1]);
            assert_eq!(b.chi, 2);
        }
    }

    #[test]
    fn torus_betti() {
        let qc = derham_complex(&torus_grid(3).unwrap());
        assert_eq!(qc.dims(), vec![9, 27, 18]);
        for route in [BettiRoute::RankNullity, BettiRoute::Harmonic] {
            let b = betti(&qc, route, DEFAULT_RANK_TOL).unwrap();
            assert_eq!(b.betti, vec![1, 2, 1]);
            assert_eq!(b.chi, 0);
        }
    }

    #[test]
    fn short_complex_index() {
        let qc = QuasiComplex::from_matrices(vec![real_matrix(2, 2, &[1.0, 0.0, 0.0, 0.0])]).unwrap();
        let b = betti(&qc, BettiRoute::RankNullity, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(b.betti, vec![1, 1]);
        assert_eq!(b.chi, 0);
    }

    #[test]
    fn quasicomplex_refused() {
        let qc = QuasiComplex::from_matrices(vec![
            real_matrix(1, 1, &[1.0]),
            real_matrix(1, 1, &[1e-3]),
        ])
        .unwrap();
        assert!(matches!(betti(&qc, BettiRoute::Harmonic, DEFAULT_RANK_TOL), Err(Error::NotAComplex { step: 0, .. })));
        let id = Endomorphism::identity(&qc);
        assert!(matches!(lefschetz(&qc, &id, DEFAULT_RANK_TOL), Err(Error::NotAComplex { .. })));
    }

    #[test]
    fn euler_of_exact_input_matches_betti() {
        let qc = derham_complex(&tetrahedron());
        let r = euler_quasi(&qc, 0, 0, ReductionOptions::default()).unwrap();
        assert_eq!(r.chi, 2);
        assert!(r.trial_chis.is_empty());
    }

    #[test]
    fn euler_of_perturbed_torus() {
        let qc = perturb(&derham_complex(&torus_grid(3).unwrap()), &PerturbationSpec::new(1e-3, 5));
        let r = euler_quasi(&qc, 3, 11, ReductionOptions::default()).unwrap();
        assert_eq!(r.chi, 0);
        assert_eq!(r.trial_chis, vec![0, 0, 0]);
        assert_eq!(r.trial_seeds, vec![11, 12, 13]);
    }

    #[test]
    fn scalar_endomorphisms() {
        let qc = derham_complex(&tetrahedron());
        let id = Endomorphism::identity(&qc);
        let l = lefschetz(&qc, &id, DEFAULT_RANK_TOL).unwrap();
        assert!((l.value - c64(2.0)).norm() < 1e-10);
        let two = id.combine(&qc, c64(2.0), &id, c64(0.0)).unwrap();
        let l2 = lefschetz(&qc, &two, DEFAULT_RANK_TOL).unwrap();
        assert!((l2.value - c64(4.0)).norm() < 1e-10);
    }

    #[test]
    fn rotation_routes_agree() {
        let mesh = tetrahedron();
        let qc = derham_complex(&mesh);
        let rot = Endomorphism::new(&qc, simplicial_endomorphism(&mesh, &[0, 2, 3, 1]).unwrap()).unwrap();
        let harmonic = lefschetz(&qc, &rot, DEFAULT_RANK_TOL).unwrap();
        let quotient = lefschetz_quotient(&qc, &rot, DEFAULT_RANK_TOL).unwrap();
        assert!((harmonic.value - quotient.value).norm() < 1e-8);
        assert!((harmonic.value - c64(2.0)).norm() < 1e-8);
    }

    #[test]
    fn non_commuting_maps_rejected() {
        let qc = derham_complex(&tetrahedron());
        let mut maps: Vec<LinearOp> = qc.spaces().iter().map(LinearOp::identity).collect();
        maps[0] = LinearOp::from_real(4, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let e = Endomorphism::new(&qc, maps).unwrap();
        assert!(matches!(lefschetz(&qc, &e, DEFAULT_RANK_TOL), Err(Error::NotAnEndomorphism { step: 0, .. })));
    }
}
