//! Pointwise principal-symbol complexes: exactness, symbol Laplacians and
//! conjugation by scalar order reductions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::{rank_threshold, spectral_norm, CMatrix, LinearOp, MatrixJson};
use crate::quasicomplex::{within_tolerance, DEFAULT_EXACTNESS_TOL};

/// Symbol sequence `σ_0, …, σ_{N-1}` at one covector.
#[derive(Clone, Debug)]
pub struct SymbolComplexSample {
    point_id: String,
    xi_norm: f64,
    mats: Vec<CMatrix>,
    orders: Vec<f64>,
    fiber_dims: Vec<usize>,
}

impl SymbolComplexSample {
    pub fn new(point_id: impl Into<String>, xi_norm: f64, mats: Vec<CMatrix>, orders: Option<Vec<f64>>) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::ShapeMismatch("a symbol sample needs at least one matrix".into()));
        }
        let mut fiber_dims = vec![mats[0].ncols()];
        for (i, m) in mats.iter().enumerate() {
            if m.ncols() != fiber_dims[i] {
                return Err(Error::ShapeMismatch(format!(
                    "symbol {i} has {} columns, fiber {i} has dim {}",
                    m.ncols(),
                    fiber_dims[i]
                )));
            }
            fiber_dims.push(m.nrows());
        }
        let orders = orders.unwrap_or_else(|| vec![0.0; mats.len()]);
        if orders.len() != mats.len() {
            return Err(Error::ShapeMismatch(format!("{} orders for {} symbols", orders.len(), mats.len())));
        }
        for (i, pair) in mats.windows(2).enumerate() {
            let abs = spectral_norm(&(&pair[1] * &pair[0]));
            let scale = spectral_norm(&pair[1]) * spectral_norm(&pair[0]);
            if !within_tolerance(abs, scale, DEFAULT_EXACTNESS_TOL) {
                return Err(Error::NotAComplex { step: i, relative_curvature: abs / scale.max(f64::MIN_POSITIVE) });
            }
        }
        Ok(SymbolComplexSample { point_id: point_id.into(), xi_norm, mats, orders, fiber_dims })
    }

    pub fn point_id(&self) -> &str {
        &self.point_id
    }

    pub fn xi_norm(&self) -> f64 {
        self.xi_norm
    }

    pub fn mats(&self) -> &[CMatrix] {
        &self.mats
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    pub fn fiber_dims(&self) -> &[usize] {
        &self.fiber_dims
    }

    pub fn with_orders(mut self, orders: Vec<f64>) -> Result<Self> {
        if orders.len() != self.mats.len() {
            return Err(Error::ShapeMismatch(format!("{} orders for {} symbols", orders.len(), self.mats.len())));
        }
        self.orders = orders;
        Ok(self)
    }

    /// `σ_i` for any integer `i`, zero outside `0..N`.
    fn symbol_or_zero(&self, i: isize) -> CMatrix {
        let n = self.mats.len() as isize;
        if (0..n).contains(&i) {
            self.mats[i as usize].clone()
        } else if i == -1 {
            CMatrix::zeros(self.fiber_dims[0], 0)
        } else {
            CMatrix::zeros(0, self.fiber_dims[n as usize])
        }
    }

    fn check_covector(&self) -> Result<()> {
        if self.xi_norm > 0.0 && self.xi_norm.is_finite() {
            Ok(())
        } else {
            Err(Error::ZeroCovector(self.xi_norm))
        }
    }

    pub fn to_json(&self) -> SymbolSampleJson {
        SymbolSampleJson {
            point_id: self.point_id.clone(),
            xi_norm: self.xi_norm,
            orders: Some(self.orders.clone()),
            mats: self.mats.iter().map(MatrixJson::from_matrix).collect(),
        }
    }

    pub fn from_json(json: &SymbolSampleJson) -> Result<Self> {
        let mats = json.mats.iter().map(MatrixJson::to_matrix).collect::<Result<Vec<_>>>()?;
        Self::new(json.point_id.clone(), json.xi_norm, mats, json.orders.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolSampleJson {
    pub point_id: String,
    pub xi_norm: f64,
    #[serde(default)]
    pub orders: Option<Vec<f64>>,
    pub mats: Vec<MatrixJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepDiagnosis {
    pub step: usize,
    pub kernel_dim: usize,
    pub incoming_rank: usize,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactnessVerdict {
    pub exact: bool,
    pub steps: Vec<StepDiagnosis>,
}

/// Exactness of the symbol sequence at each fiber.
pub fn symbol_exact(sample: &SymbolComplexSample, rank_tol: f64) -> Result<ExactnessVerdict> {
    sample.check_covector()?;
    let n = sample.mats.len();
    let ranks: Vec<usize> = sample.mats.iter().map(|m| LinearOp::euclidean(m.clone()).rank(rank_tol)).collect();
    let steps: Vec<StepDiagnosis> = (0..=n)
        .map(|i| {
            let outgoing = if i < n { ranks[i] } else { 0 };
            let kernel_dim = sample.fiber_dims[i] - outgoing;
            let incoming_rank = if i > 0 { ranks[i - 1] } else { 0 };
            StepDiagnosis { step: i, kernel_dim, incoming_rank, exact: kernel_dim == incoming_rank }
        })
        .collect();
    Ok(ExactnessVerdict { exact: steps.iter().all(|s| s.exact), steps })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LaplacianVerdict {
    pub invertible: bool,
    /// Smallest singular value of `σ_{i-1}σ_{i-1}* + σ_i*σ_i`; `None` on zero fibers.
    pub min_singular_values: Vec<Option<f64>>,
}

/// Invertibility of every symbol Laplacian.
pub fn symbol_laplacian_check(sample: &SymbolComplexSample, rank_tol: f64) -> Result<LaplacianVerdict> {
    sample.check_covector()?;
    let n = sample.mats.len();
    let mut invertible = true;
    let mut min_singular_values = Vec::with_capacity(n + 1);
    for i in 0..=n {
        if sample.fiber_dims[i] == 0 {
            min_singular_values.push(None);
            continue;
        }
        let before = sample.symbol_or_zero(i as isize - 1);
        let after = sample.symbol_or_zero(i as isize);
        let lap = &before * before.adjoint() + after.adjoint() * &after;
        let profile = LinearOp::euclidean(lap).rank_profile(rank_tol);
        let smallest = *profile.singular_values.last().expect("non-empty fiber");
        invertible &= smallest > rank_threshold(profile.singular_values[0], rank_tol);
        min_singular_values.push(Some(smallest));
    }
    Ok(LaplacianVerdict { invertible, min_singular_values })
}

/// Scalar order reduction `r_i = |ξ|^{s_i}` with `s_0 = s`, `s_{i+1} = s_i − m_i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrderReductionPlan {
    pub s: f64,
    pub s_list: Vec<f64>,
}

impl OrderReductionPlan {
    pub fn new(s: f64, orders: &[f64]) -> Self {
        let mut s_list = Vec::with_capacity(orders.len() + 1);
        s_list.push(s);
        for m in orders {
            let last = *s_list.last().expect("non-empty");
            s_list.push(last - m);
        }
        OrderReductionPlan { s, s_list }
    }

    /// The stored exponents agree with the recurrence for `orders`.
    pub fn is_consistent_with(&self, orders: &[f64]) -> bool {
        *self == OrderReductionPlan::new(self.s, orders)
    }
}

/// `σ̃_i = r_{i+1} σ_i r_i⁻¹ = |ξ|^{-m_i} σ_i`; every output order is 0.
pub fn conjugate_orders(sample: &SymbolComplexSample, plan: &OrderReductionPlan) -> Result<SymbolComplexSample> {
    sample.check_covector()?;
    if !plan.is_consistent_with(&sample.orders) {
        return Err(Error::InvalidPlan(format!(
            "exponents {:?} do not follow from s = {} and orders {:?}",
            plan.s_list, plan.s, sample.orders
        )));
    }
    let t = sample.xi_norm;
    let mats = sample
        .mats
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let factor = t.powf(plan.s_list[i + 1]) / t.powf(plan.s_list[i]);
            m * crate::linop::c64(factor)
        })
        .collect();
    Ok(SymbolComplexSample {
        point_id: sample.point_id.clone(),
        xi_norm: sample.xi_norm,
        mats,
        orders: vec![0.0; sample.orders.len()],
        fiber_dims: sample.fiber_dims.clone(),
    })
}

/// Source of samples; pure in `(seed, index)`.
pub trait SampleGenerator {
    fn name(&self) -> String;
    fn sample(&self, seed: u64, index: usize) -> Result<SymbolComplexSample>;
}

/// Fixed list of samples, ignoring the seed.
pub struct SampleList(pub Vec<SymbolComplexSample>);

impl SampleGenerator for SampleList {
    fn name(&self) -> String {
        "list".into()
    }

    fn sample(&self, _seed: u64, index: usize) -> Result<SymbolComplexSample> {
        Ok(self.0[index % self.0.len()].clone())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleVerdict {
    pub point_id: String,
    pub exact: bool,
    pub laplacian_invertible: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub generator: String,
    pub seed: u64,
    pub n_samples: usize,
    pub elliptic: bool,
    pub verdicts: Vec<SampleVerdict>,
    pub offending: Vec<String>,
    /// Samples on which exactness and Laplacian invertibility disagree.
    pub disagreements: Vec<String>,
    pub warning: Option<String>,
}

pub fn sample_sweep(generator: &dyn SampleGenerator, n_samples: usize, seed: u64, rank_tol: f64) -> Result<SweepReport> {
    let mut verdicts = Vec::with_capacity(n_samples);
    for index in 0..n_samples {
        let sample = generator.sample(seed, index)?;
        verdicts.push(SampleVerdict {
            point_id: sample.point_id.clone(),
            exact: symbol_exact(&sample, rank_tol)?.exact,
            laplacian_invertible: symbol_laplacian_check(&sample, rank_tol)?.invertible,
        });
    }
    let offending: Vec<String> = verdicts.iter().filter(|v| !v.exact).map(|v| v.point_id.clone()).collect();
    let disagreements = verdicts
        .iter()
        .filter(|v| v.exact != v.laplacian_invertible)
        .map(|v| v.point_id.clone())
        .collect();
    Ok(SweepReport {
        generator: generator.name(),
        seed,
        n_samples,
        elliptic: offending.is_empty(),
        verdicts,
        offending,
        disagreements,
        warning: (n_samples == 0).then(|| "no samples drawn; verdict is vacuous".to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{koszul_symbol, KoszulGenerator};
    use crate::linop::{c64, real_matrix, DEFAULT_RANK_TOL};

    #[test]
    fn planar_koszul_is_exact() {
        let s = koszul_symbol(&[1.0, 0.0], "e1").unwrap();
        let v = symbol_exact(&s, DEFAULT_RANK_TOL).unwrap();
        assert!(v.exact);
        assert_eq!(v.steps.iter().map(|d| d.incoming_rank).collect::<Vec<_>>(), vec![0, 1, 1]);
    }

    #[test]
    fn zeroed_first_symbol_breaks_exactness_at_step_zero() {
        let s = koszul_symbol(&[0.6, 0.8], "p").unwrap();
        let mut mats = s.mats().to_vec();
        mats[0] = CMatrix::zeros(2, 1);
        let broken = SymbolComplexSample::new("broken", 1.0, mats, None).unwrap();
        let v = symbol_exact(&broken, DEFAULT_RANK_TOL).unwrap();
        assert!(!v.exact && !v.steps[0].exact);
        assert!(!symbol_laplacian_check(&broken, DEFAULT_RANK_TOL).unwrap().invertible);
    }

    #[test]
    fn koszul_laplacians_are_identity_for_unit_covectors() {
        let gen = KoszulGenerator::new(3).unwrap();
        for i in 0..20 {
            let s = gen.sample(9, i).unwrap();
            assert!(symbol_exact(&s, DEFAULT_RANK_TOL).unwrap().exact);
            let lap = symbol_laplacian_check(&s, DEFAULT_RANK_TOL).unwrap();
            assert!(lap.invertible);
            for m in lap.min_singular_values.iter().flatten() {
                assert!((m - 1.0).abs() < 1e-12, "{m}");
            }
        }
    }

    #[test]
    fn scalar_sequence() {
        let s = SymbolComplexSample::new("c", 1.0, vec![real_matrix(1, 1, &[3.0])], None).unwrap();
        let lap = symbol_laplacian_check(&s, DEFAULT_RANK_TOL).unwrap();
        assert!(lap.invertible);
        assert_eq!(lap.min_singular_values, vec![Some(9.0), Some(9.0)]);
    }

    #[test]
    fn zero_covector_rejected() {
        let s = SymbolComplexSample::new("z", 0.0, vec![real_matrix(1, 1, &[0.0])], None).unwrap();
        assert!(matches!(symbol_exact(&s, DEFAULT_RANK_TOL), Err(Error::ZeroCovector(_))));
        assert!(matches!(symbol_laplacian_check(&s, DEFAULT_RANK_TOL), Err(Error::ZeroCovector(_))));
    }

    #[test]
    fn non_complex_sample_rejected() {
        let m = real_matrix(1, 1, &[1.0]);
        assert!(matches!(
            SymbolComplexSample::new("x", 1.0, vec![m.clone(), m], None),
            Err(Error::NotAComplex { .. })
        ));
    }

    #[test]
    fn conjugation_examples() {
        let s = koszul_symbol(&[2.0, 0.0, 0.0], "twice").unwrap().with_orders(vec![1.0, 1.0, 1.0]).unwrap();
        let plan = OrderReductionPlan::new(0.0, s.orders());
        assert_eq!(plan.s_list, vec![0.0, -1.0, -2.0, -3.0]);
        let c = conjugate_orders(&s, &plan).unwrap();
        assert_eq!(c.orders(), &[0.0, 0.0, 0.0]);
        for (a, b) in s.mats().iter().zip(c.mats()) {
            assert!(crate::linop::frobenius(&(a * c64(0.5) - b)) < 1e-15);
        }
        assert_eq!(symbol_exact(&s, DEFAULT_RANK_TOL).unwrap().exact, symbol_exact(&c, DEFAULT_RANK_TOL).unwrap().exact);

        let zero_orders = koszul_symbol(&[2.0, 0.0], "z").unwrap();
        let zero_orders = zero_orders.with_orders(vec![0.0, 0.0]).unwrap();
        let same = conjugate_orders(&zero_orders, &OrderReductionPlan::new(1.7, zero_orders.orders())).unwrap();
        assert_eq!(same.mats(), zero_orders.mats());

        let unit = koszul_symbol(&[0.0, 1.0], "u").unwrap().with_orders(vec![2.0, -1.0]).unwrap();
        let kept = conjugate_orders(&unit, &OrderReductionPlan::new(0.3, unit.orders())).unwrap();
        assert_eq!(kept.mats(), unit.mats());
    }

    #[test]
    fn inconsistent_plan_rejected() {
        let s = koszul_symbol(&[1.0, 1.0], "p").unwrap();
        let plan = OrderReductionPlan { s: 0.0, s_list: vec![0.0, 1.0, 2.0] };
        assert!(matches!(conjugate_orders(&s, &plan), Err(Error::InvalidPlan(_))));
    }

    #[test]
    fn sweep_reports_planted_failure_and_vacuous_case() {
        let good = koszul_symbol(&[1.0, 0.0], "good").unwrap();
        let mut mats = good.mats().to_vec();
        mats[1] = CMatrix::zeros(1, 2);
        let bad = SymbolComplexSample::new("planted", 1.0, mats, None).unwrap();
        let list = SampleList(vec![good, bad]);
        let r = sample_sweep(&list, 2, 0, DEFAULT_RANK_TOL).unwrap();
        assert!(!r.elliptic);
        assert_eq!(r.offending, vec!["planted".to_string()]);
        assert!(r.disagreements.is_empty());

        let empty = sample_sweep(&KoszulGenerator::new(2).unwrap(), 0, 0, DEFAULT_RANK_TOL).unwrap();
        assert!(empty.elliptic);
        assert!(empty.warning.is_some());
    }
}
