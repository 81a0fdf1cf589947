//! Density matrices on the 64-dimensional two-photon space and the basic
//! operations on them: pure-state construction, unitary evolution, Kraus
//! measurement, partial trace and fidelity.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{Coordinate, Dof, DIM};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

/// Entrywise tolerance on `ρ − ρ†`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `|Tr ρ − 1|`.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted as nonnegative.
pub const PSD_TOL: f64 = 1e-10;
/// Entrywise tolerance on `U†U − I` and `Σ K†K − I`.
pub const OPERATOR_TOL: f64 = 1e-12;
/// Branches with probability at or below this are dropped by [`measure`].
pub const PROBABILITY_FLOOR: f64 = 1e-14;

/// Tag written into state dumps; readers reject anything else.
pub const DUMP_BASIS_TAG: &str = "v1";

/// A Hermitian, unit-trace, positive semidefinite 64×64 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    /// Validates all three invariants before wrapping `m`.
    pub fn from_matrix(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != DIM || m.ncols() != DIM {
            return Err(Error::InvalidState(format!(
                "expected {DIM}x{DIM} matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let rho = Self { m };
        rho.check_invariants()?;
        Ok(rho)
    }

    pub(crate) fn from_raw(m: CMatrix) -> Self {
        debug_assert_eq!(m.nrows(), DIM);
        Self { m }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.m
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.m[(row, col)]
    }

    /// `I/64`.
    pub fn maximally_mixed() -> Self {
        Self::from_raw(CMatrix::identity(DIM, DIM) / Complex64::new(DIM as f64, 0.0))
    }

    /// Single basis projector `|i⟩⟨i|`.
    pub fn basis_state(index: usize) -> Result<Self> {
        if index >= DIM {
            return Err(Error::InvalidArgument(format!("basis index {index} out of range")));
        }
        let mut m = CMatrix::zeros(DIM, DIM);
        m[(index, index)] = Complex64::new(1.0, 0.0);
        Ok(Self::from_raw(m))
    }

    /// Convex combination `Σ p_k ρ_k`; weights must be nonnegative and sum to 1.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument("empty mixture".into()));
        }
        let total: f64 = parts.iter().map(|(p, _)| p).sum();
        if parts.iter().any(|(p, _)| *p < 0.0 || !p.is_finite()) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "mixture weights must be nonnegative and sum to 1 (sum = {total})"
            )));
        }
        let mut m = CMatrix::zeros(DIM, DIM);
        for (p, rho) in parts {
            m += &rho.m * Complex64::new(*p, 0.0);
        }
        Ok(Self::from_raw(m))
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.m).re
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        // Tr(ρρ) = Σ_ij ρ_ij ρ_ji = Σ_ij |ρ_ij|² for Hermitian ρ
        self.m.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        linalg::hermiticity_error(&self.m)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.m + self.m.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Cholesky test on `ρ + tol·I`: succeeds iff every eigenvalue exceeds `-tol`.
    pub fn is_psd(&self, tol: f64) -> bool {
        linalg::shifted_cholesky_ok(&self.m, tol)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = linalg::trace(&self.m);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        if !self.is_psd(PSD_TOL) {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite (min eigenvalue {:e})",
                self.min_eigenvalue()
            )));
        }
        Ok(())
    }

    /// Probability that `coordinate` reads `value`.
    pub fn population(&self, coordinate: Coordinate, value: u8) -> f64 {
        (0..DIM)
            .filter(|&i| coordinate.bit(i) == value)
            .map(|i| self.m[(i, i)].re)
            .sum()
    }

    pub fn to_dump(&self) -> StateDump {
        StateDump::from_matrix(&self.m)
    }

    pub fn from_dump(dump: &StateDump) -> Result<Self> {
        if dump.basis != DUMP_BASIS_TAG {
            return Err(Error::InvalidState(format!(
                "unsupported basis tag {:?}, expected {DUMP_BASIS_TAG:?}",
                dump.basis
            )));
        }
        Self::from_matrix(dump.to_matrix(DIM)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_dump())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dump: StateDump = serde_json::from_str(text)?;
        Self::from_dump(&dump)
    }
}

/// Serialized matrix: `{basis, re, im}` with row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDump {
    pub basis: String,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl StateDump {
    pub fn from_matrix(m: &DMatrix<Complex64>) -> Self {
        let rows = |f: fn(&Complex64) -> f64| {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect())
                .collect()
        };
        Self {
            basis: DUMP_BASIS_TAG.to_string(),
            re: rows(|c| c.re),
            im: rows(|c| c.im),
        }
    }

    /// Rebuilds an `n×n` matrix, rejecting any other shape.
    pub fn to_matrix(&self, n: usize) -> Result<DMatrix<Complex64>> {
        let shape_ok = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if !shape_ok(&self.re) || !shape_ok(&self.im) {
            return Err(Error::InvalidState(format!(
                "state dump must hold two {n}x{n} arrays"
            )));
        }
        Ok(DMatrix::from_fn(n, n, |i, j| {
            Complex64::new(self.re[i][j], self.im[i][j])
        }))
    }
}

/// A complete set of measurement operators, `Σ K†K = I`.
#[derive(Debug, Clone)]
pub struct KrausSet {
    operators: Vec<CMatrix>,
}

impl KrausSet {
    pub fn new(operators: Vec<DMatrix<Complex64>>) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::ContractViolation("empty Kraus set".into()));
        }
        if let Some(k) = operators.iter().find(|k| k.nrows() != DIM || k.ncols() != DIM) {
            return Err(Error::ContractViolation(format!(
                "Kraus operator has shape {}x{}, expected {DIM}x{DIM}",
                k.nrows(),
                k.ncols()
            )));
        }
        let set = Self { operators };
        let dev = set.completeness_error();
        if dev > OPERATOR_TOL {
            return Err(Error::ContractViolation(format!(
                "Kraus set incomplete: |ΣK†K − I| = {dev:e}"
            )));
        }
        Ok(set)
    }

    pub fn operators(&self) -> &[DMatrix<Complex64>] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// Entrywise maximum of `|Σ K†K − I|`.
    pub fn completeness_error(&self) -> f64 {
        let mut sum = CMatrix::zeros(DIM, DIM);
        for k in &self.operators {
            sum += linalg::gram(k);
        }
        linalg::identity_deviation(&sum)
    }
}

/// One outcome of a generalized measurement.
#[derive(Debug, Clone)]
pub struct MeasurementBranch {
    pub outcome: usize,
    pub probability: f64,
    pub state: DensityMatrix,
}

/// Normalized pure state `|ψ⟩⟨ψ|`. Vectors off unit norm by more than 1e-12
/// are rescaled; the zero vector is rejected.
pub fn make_pure(amplitudes: &[Complex64]) -> Result<DensityMatrix> {
    if amplitudes.len() != DIM {
        return Err(Error::InvalidState(format!(
            "expected {DIM} amplitudes, got {}",
            amplitudes.len()
        )));
    }
    let v = DVector::from_column_slice(amplitudes);
    let norm = v.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::InvalidState("amplitude vector is zero".into()));
    }
    let v = if (norm - 1.0).abs() > 1e-12 {
        v / Complex64::new(norm, 0.0)
    } else {
        v
    };
    Ok(DensityMatrix::from_raw(&v * v.adjoint()))
}

/// Checks `|U†U − I| ≤ 1e-12` entrywise.
pub fn check_unitary(u: &DMatrix<Complex64>) -> Result<()> {
    if u.nrows() != DIM || u.ncols() != DIM {
        return Err(Error::ContractViolation(format!(
            "unitary must be {DIM}x{DIM}, got {}x{}",
            u.nrows(),
            u.ncols()
        )));
    }
    let dev = linalg::identity_deviation(&linalg::gram(u));
    if dev > OPERATOR_TOL {
        return Err(Error::ContractViolation(format!(
            "operator is not unitary: |U†U − I| = {dev:e}"
        )));
    }
    Ok(())
}

/// `UρU†`.
pub fn apply_unitary(rho: &DensityMatrix, u: &DMatrix<Complex64>) -> Result<DensityMatrix> {
    check_unitary(u)?;
    Ok(evolve(rho, u))
}

// Caller guarantees `u` is exactly unitary.
pub(crate) fn evolve(rho: &DensityMatrix, u: &CMatrix) -> DensityMatrix {
    DensityMatrix::from_raw(linalg::sandwich(u, &rho.m))
}

/// Applies every Kraus operator and returns the nonzero branches with their
/// renormalized post-measurement states.
pub fn measure(rho: &DensityMatrix, kraus: &KrausSet) -> Vec<MeasurementBranch> {
    kraus
        .operators
        .iter()
        .enumerate()
        .filter_map(|(outcome, k)| {
            let unnormalized = linalg::sandwich(k, &rho.m);
            let probability = linalg::trace(&unnormalized).re;
            (probability > PROBABILITY_FLOOR).then(|| MeasurementBranch {
                outcome,
                probability,
                state: DensityMatrix::from_raw(unnormalized / Complex64::new(probability, 0.0)),
            })
        })
        .collect()
}

/// A density matrix over a subset of the degrees of freedom.
///
/// Kept coordinates are ordered as in the full basis: for `[Pol, Rail]` the
/// index is `8·pol_A + 4·pol_B + 2·rail_A + rail_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    dofs: Vec<Dof>,
    m: CMatrix,
}

impl ReducedState {
    pub(crate) fn from_raw(dofs: Vec<Dof>, m: CMatrix) -> Self {
        Self { dofs, m }
    }

    pub fn dofs(&self) -> &[Dof] {
        &self.dofs
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.m).re
    }

    /// `⟨ψ|ρ|ψ⟩` for a normalized target over the kept coordinates.
    pub fn fidelity(&self, target: &DVector<Complex64>) -> Result<f64> {
        overlap(&self.m, target)
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_deviation(&self, other: &DMatrix<Complex64>) -> f64 {
        if other.shape() != self.m.shape() {
            return f64::INFINITY;
        }
        linalg::max_abs_diff(&self.m, other)
    }
}

/// Traces out every degree of freedom not listed in `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: &[Dof]) -> Result<ReducedState> {
    let mut dofs: Vec<Dof> = keep.to_vec();
    dofs.sort();
    dofs.dedup();
    if dofs.is_empty() {
        return Err(Error::InvalidArgument("partial trace needs at least one kept degree of freedom".into()));
    }
    let kept: Vec<Coordinate> = Coordinate::ALL
        .into_iter()
        .filter(|c| dofs.contains(&c.dof()))
        .collect();
    let kept_mask: usize = kept.iter().map(|c| c.mask()).sum();
    let reduce = |i: usize| {
        kept.iter()
            .fold(0usize, |acc, c| (acc << 1) | c.bit(i) as usize)
    };
    let dim = 1 << kept.len();
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..DIM {
        for j in 0..DIM {
            if (i & !kept_mask) == (j & !kept_mask) {
                m[(reduce(i), reduce(j))] += rho.m[(i, j)];
            }
        }
    }
    Ok(ReducedState { dofs, m })
}

/// `⟨target|ρ|target⟩`, clamped into [0, 1].
pub fn fidelity(rho: &DensityMatrix, target: &DVector<Complex64>) -> Result<f64> {
    overlap(&rho.m, target)
}

fn overlap(m: &CMatrix, target: &DVector<Complex64>) -> Result<f64> {
    if target.len() != m.nrows() {
        return Err(Error::InvalidArgument(format!(
            "target has {} amplitudes, state has dimension {}",
            target.len(),
            m.nrows()
        )));
    }
    let norm = target.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!("target not normalized (norm {norm})")));
    }
    let value = (target.adjoint() * m * target)[(0, 0)].re;
    Ok(value.clamp(0.0, 1.0))
}

/// Polarization marginal fidelity to a Bell state.
pub fn polarization_fidelity(rho: &DensityMatrix, target: crate::BellLabel) -> f64 {
    let pol = partial_trace(rho, &[Dof::Pol]).expect("pol is a valid keep set");
    pol.fidelity(&target.vector()).expect("Bell vectors are normalized")
}
