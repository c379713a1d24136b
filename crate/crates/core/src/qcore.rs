//! Exact finite-dimensional quantum mechanics: pure states, density matrices,
//! generalized measurements and Born-rule sampling.
//!
//! Pure states are stored sparsely because the protocol registers can be large
//! (a graph-isomorphism input register times a permutation output register)
//! while every state the protocol actually prepares is supported on at most a
//! handful of basis vectors. Operators are dense and only used at small
//! dimensions.
//!
//! Composite systems use the row-major convention: the basis vector
//! `|a; b⟩` of a system with dimensions `(d1, d2)` has index `a * d2 + b`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<Complex64>;

/// Tolerance for structural invariants (normalization, completeness, ...).
pub const STRUCTURAL_TOL: f64 = 1e-9;
/// Tolerance for analytic identities.
pub const ANALYTIC_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A normalized vector over an indexed basis of dimension `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    dim: usize,
    // sorted by index, no exact zeros
    entries: Vec<(usize, Complex64)>,
}

impl PureState {
    /// The computational basis vector `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        Ok(Self {
            dim,
            entries: vec![(index, ONE)],
        })
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        let entries = amplitudes
            .into_iter()
            .enumerate()
            .filter(|(_, a)| *a != ZERO)
            .collect();
        Self::from_entries(dim, entries)
    }

    /// Builds a state from `(index, amplitude)` pairs, summing duplicates.
    /// Fails unless the result is normalized within [`STRUCTURAL_TOL`].
    pub fn from_entries(dim: usize, entries: Vec<(usize, Complex64)>) -> Result<Self> {
        let state = Self::collect(dim, entries)?;
        let norm = state.norm_sqr();
        if dim == 0 || (norm - 1.0).abs() > STRUCTURAL_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(state)
    }

    /// Builds a state from an arbitrary nonzero vector, rescaling it to unit norm.
    pub fn normalized(dim: usize, entries: Vec<(usize, Complex64)>) -> Result<Self> {
        let mut state = Self::collect(dim, entries)?;
        let norm = state.norm_sqr();
        if !(norm > 0.0) {
            return Err(Error::ZeroVector);
        }
        let scale = 1.0 / norm.sqrt();
        for (_, a) in &mut state.entries {
            *a *= scale;
        }
        Ok(state)
    }

    fn collect(dim: usize, mut entries: Vec<(usize, Complex64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("state dimension must be positive".into()));
        }
        if let Some(&(index, _)) = entries.iter().find(|(i, _)| *i >= dim) {
            return Err(Error::IndexOutOfRange { index, dim });
        }
        entries.sort_by_key(|(i, _)| *i);
        let mut merged: Vec<(usize, Complex64)> = Vec::with_capacity(entries.len());
        for (i, a) in entries {
            match merged.last_mut() {
                Some((j, b)) if *j == i => *b += a,
                _ => merged.push((i, a)),
            }
        }
        merged.retain(|(_, a)| *a != ZERO);
        Ok(Self {
            dim,
            entries: merged,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nonzero amplitudes sorted by basis index.
    pub fn entries(&self) -> &[(usize, Complex64)] {
        &self.entries
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.entries
            .binary_search_by_key(&index, |(i, _)| *i)
            .map(|k| self.entries[k].1)
            .unwrap_or(ZERO)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut v = vec![ZERO; self.dim];
        for &(i, a) in &self.entries {
            v[i] = a;
        }
        v
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        let (mut i, mut j) = (0, 0);
        let mut acc = ZERO;
        while i < self.entries.len() && j < other.entries.len() {
            let (a, b) = (self.entries[i], other.entries[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a.1.conj() * b.1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// |⟨self|other⟩|².
    pub fn overlap(&self, other: &PureState) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn density(&self) -> DensityMatrix {
        let v = nalgebra::DVector::from_vec(self.to_dense());
        DensityMatrix {
            matrix: &v * v.adjoint(),
        }
    }
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &PureState, b: &PureState) -> PureState {
    let mut entries = Vec::with_capacity(a.entries.len() * b.entries.len());
    for &(i, x) in &a.entries {
        for &(j, y) in &b.entries {
            entries.push((i * b.dim + j, x * y));
        }
    }
    PureState {
        dim: a.dim * b.dim,
        entries,
    }
}

/// A Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: Matrix,
}

impl DensityMatrix {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let herm = max_abs(&(&matrix - matrix.adjoint()));
        if herm > STRUCTURAL_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > STRUCTURAL_TOL {
            return Err(Error::BadTrace(trace));
        }
        let min_eig = matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -STRUCTURAL_TOL {
            return Err(Error::NotPositive(min_eig));
        }
        Ok(Self { matrix })
    }

    /// 𝕀/n.
    pub fn maximally_mixed(n: usize) -> Self {
        Self {
            matrix: Matrix::identity(n, n).map(|z| z / n as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn distance_max(&self, other: &DensityMatrix) -> f64 {
        max_abs(&(&self.matrix - &other.matrix))
    }
}

/// Which factor of a bipartite system survives a partial trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

pub fn partial_trace(rho: &DensityMatrix, dims: (usize, usize), keep: Keep) -> Result<DensityMatrix> {
    let (d1, d2) = dims;
    if d1 * d2 != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: d1 * d2,
            found: rho.dim(),
        });
    }
    let m = &rho.matrix;
    let out = match keep {
        Keep::First => Matrix::from_fn(d1, d1, |a, b| {
            (0..d2).map(|k| m[(a * d2 + k, b * d2 + k)]).sum()
        }),
        Keep::Second => Matrix::from_fn(d2, d2, |a, b| {
            (0..d1).map(|k| m[(k * d2 + a, k * d2 + b)]).sum()
        }),
    };
    DensityMatrix::new(out)
}

/// Σ pᵢ |ψᵢ⟩⟨ψᵢ|.
pub fn average_density(ensemble: &[(f64, PureState)]) -> Result<DensityMatrix> {
    let (_, first) = ensemble.first().ok_or(Error::EmptyEnsemble)?;
    let dim = first.dim();
    let total: f64 = ensemble.iter().map(|(p, _)| p).sum();
    if (total - 1.0).abs() > ANALYTIC_TOL {
        return Err(Error::ProbabilitySum(total));
    }
    let mut acc = Matrix::zeros(dim, dim);
    for (p, psi) in ensemble {
        if psi.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: psi.dim(),
            });
        }
        for &(i, a) in psi.entries() {
            for &(j, b) in psi.entries() {
                acc[(i, j)] += a * b.conj() * *p;
            }
        }
    }
    DensityMatrix::new(acc)
}

/// A finite family of Kraus operators `{Mₓ}` with Σ Mₓ†Mₓ = 𝕀.
#[derive(Clone, Debug)]
pub struct GeneralizedMeasurement {
    dim_in: usize,
    dim_out: usize,
    operators: Vec<(usize, Matrix)>,
}

impl GeneralizedMeasurement {
    /// Validates completeness. Labels are the outcome identifiers.
    pub fn new(operators: Vec<(usize, Matrix)>) -> Result<Self> {
        let (_, first) = operators
            .first()
            .ok_or_else(|| Error::InvalidParameter("measurement needs an operator".into()))?;
        let (dim_out, dim_in) = first.shape();
        let mut sum = Matrix::zeros(dim_in, dim_in);
        for (_, m) in &operators {
            if m.shape() != (dim_out, dim_in) {
                return Err(Error::DimensionMismatch {
                    expected: dim_out * dim_in,
                    found: m.nrows() * m.ncols(),
                });
            }
            sum += m.adjoint() * m;
        }
        let residual = max_abs(&(sum - Matrix::identity(dim_in, dim_in)));
        if residual > STRUCTURAL_TOL {
            return Err(Error::Incomplete(residual));
        }
        Ok(Self {
            dim_in,
            dim_out,
            operators,
        })
    }

    /// Projective measurement in the computational basis; outcome `j` ↔ `|j⟩⟨j|`.
    pub fn computational(dim: usize) -> Self {
        let operators = (0..dim)
            .map(|j| {
                let mut m = Matrix::zeros(dim, dim);
                m[(j, j)] = ONE;
                (j, m)
            })
            .collect();
        Self {
            dim_in: dim,
            dim_out: dim,
            operators,
        }
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn operators(&self) -> &[(usize, Matrix)] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// Born probabilities ‖Mₓ s‖² in operator order.
    pub fn probabilities(&self, state: &PureState) -> Result<Vec<f64>> {
        self.check_input(state)?;
        Ok(self
            .operators
            .iter()
            .map(|(_, m)| apply_dense(m, state).iter().map(|z| z.norm_sqr()).sum())
            .collect())
    }

    fn check_input(&self, state: &PureState) -> Result<()> {
        if state.dim() != self.dim_in {
            return Err(Error::DimensionMismatch {
                expected: self.dim_in,
                found: state.dim(),
            });
        }
        Ok(())
    }
}

/// One sampled branch of a measurement.
#[derive(Clone, Debug)]
pub struct OutcomeSample {
    pub outcome: usize,
    pub post_state: PureState,
    pub probability: f64,
}

/// Branches whose probability falls below this are never selected.
const NEGLIGIBLE_BRANCH: f64 = 1e-15;

pub fn born_measure<R: Rng + ?Sized>(
    state: &PureState,
    m: &GeneralizedMeasurement,
    rng: &mut R,
) -> Result<OutcomeSample> {
    m.check_input(state)?;
    let branches: Vec<(usize, Vec<Complex64>, f64)> = m
        .operators
        .iter()
        .map(|(label, op)| {
            let v = apply_dense(op, state);
            let p = v.iter().map(|z| z.norm_sqr()).sum();
            (*label, v, p)
        })
        .collect();
    let weights: Vec<f64> = branches.iter().map(|b| b.2).collect();
    let k = sample_index(&weights, rng).ok_or(Error::ZeroVector)?;
    let (outcome, v, probability) = branches.into_iter().nth(k).expect("sampled index in range");
    let post_state = PureState::normalized(
        m.dim_out,
        v.into_iter().enumerate().filter(|(_, z)| *z != ZERO).collect(),
    )?;
    Ok(OutcomeSample {
        outcome,
        post_state,
        probability,
    })
}

/// Samples an index with probability proportional to `weights`, skipping
/// negligible entries. `None` when every weight is negligible.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().filter(|w| **w > NEGLIGIBLE_BRANCH).sum();
    if total <= 0.0 {
        return None;
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (k, &w) in weights.iter().enumerate() {
        if w <= NEGLIGIBLE_BRANCH {
            continue;
        }
        acc += w;
        last = Some(k);
        if u < acc {
            return Some(k);
        }
    }
    last
}

/// Applies an isometry `V` (V†V = 𝕀) to a state.
pub fn apply_isometry(v: &Matrix, state: &PureState) -> Result<PureState> {
    if v.ncols() != state.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.ncols(),
            found: state.dim(),
        });
    }
    let residual = isometry_residual(v);
    if residual > STRUCTURAL_TOL {
        return Err(Error::NotIsometry(residual));
    }
    let out = apply_dense(v, state);
    PureState::normalized(
        v.nrows(),
        out.into_iter().enumerate().filter(|(_, z)| *z != ZERO).collect(),
    )
}

/// ‖V†V − 𝕀‖_max.
pub fn isometry_residual(v: &Matrix) -> f64 {
    let n = v.ncols();
    max_abs(&(v.adjoint() * v - Matrix::identity(n, n)))
}

/// Dense product `M s` for a sparse `s`.
pub fn apply_dense(m: &Matrix, state: &PureState) -> Vec<Complex64> {
    let mut out = vec![ZERO; m.nrows()];
    for &(j, a) in state.entries() {
        for (i, o) in out.iter_mut().enumerate() {
            *o += m[(i, j)] * a;
        }
    }
    out
}

/// Projects the first factor of a bipartite state onto `phi`:
/// returns `‖(⟨φ| ⊗ 𝕀)ψ‖²` and, when nonzero, the normalized second-factor state.
pub fn project_first(
    psi: &PureState,
    phi: &PureState,
    second_dim: usize,
) -> Result<(f64, Option<PureState>)> {
    if phi.dim() * second_dim != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: phi.dim() * second_dim,
            found: psi.dim(),
        });
    }
    let mut rest = vec![ZERO; second_dim];
    let mut j = 0;
    for &(idx, b) in psi.entries() {
        let (first, second) = (idx / second_dim, idx % second_dim);
        while j < phi.entries.len() && phi.entries[j].0 < first {
            j += 1;
        }
        if j < phi.entries.len() && phi.entries[j].0 == first {
            rest[second] += phi.entries[j].1.conj() * b;
        }
    }
    let p: f64 = rest.iter().map(|z| z.norm_sqr()).sum();
    if p <= NEGLIGIBLE_BRANCH {
        return Ok((p, None));
    }
    let post = PureState::normalized(
        second_dim,
        rest.into_iter().enumerate().filter(|(_, z)| *z != ZERO).collect(),
    )?;
    Ok((p, Some(post)))
}

/// Removes the component `|φ⟩ ⊗ (⟨φ| ⊗ 𝕀)ψ` from a bipartite state, i.e. applies
/// `(𝕀 − |φ⟩⟨φ|) ⊗ 𝕀`. The result is unnormalized (returned as raw entries).
pub fn project_first_complement(
    psi: &PureState,
    phi: &PureState,
    second_dim: usize,
) -> Result<Vec<(usize, Complex64)>> {
    let (p, rest) = project_first(psi, phi, second_dim)?;
    let mut entries: Vec<(usize, Complex64)> = psi.entries().to_vec();
    if let Some(rest) = rest {
        let scale = p.sqrt();
        for &(i, a) in phi.entries() {
            for &(k, c) in rest.entries() {
                entries.push((i * second_dim + k, -(a * c * scale)));
            }
        }
    }
    Ok(entries)
}

/// Measures the first factor of a bipartite (raw, possibly unnormalized)
/// vector in the computational basis. Returns the outcome and the normalized
/// second-factor state.
pub fn measure_first_basis<R: Rng + ?Sized>(
    entries: &[(usize, Complex64)],
    dims: (usize, usize),
    rng: &mut R,
) -> Result<(usize, PureState)> {
    let (d1, d2) = dims;
    let raw = PureState::collect(d1 * d2, entries.to_vec())?;
    let mut firsts: Vec<usize> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for &(idx, a) in raw.entries() {
        let f = idx / d2;
        if firsts.last() != Some(&f) {
            firsts.push(f);
            weights.push(0.0);
        }
        *weights.last_mut().unwrap() += a.norm_sqr();
    }
    let k = sample_index(&weights, rng).ok_or(Error::ZeroVector)?;
    let chosen = firsts[k];
    let rest = raw
        .entries()
        .iter()
        .filter(|(idx, _)| idx / d2 == chosen)
        .map(|&(idx, a)| (idx % d2, a))
        .collect();
    Ok((chosen, PureState::normalized(d2, rest)?))
}

/// Haar-distributed random pure state.
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    loop {
        let amps: Vec<(usize, Complex64)> = (0..dim).map(|i| (i, gaussian_c64(rng))).collect();
        if let Ok(s) = PureState::normalized(dim, amps) {
            return s;
        }
    }
}

/// Haar-distributed random unitary (QR of a complex Ginibre matrix with phase fix).
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Matrix {
    let g = Matrix::from_fn(dim, dim, |_, _| gaussian_c64(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `S^{-1/2}` for Hermitian positive definite `S`; `None` if `S` is (near) singular.
pub fn inverse_sqrt_psd(s: &Matrix) -> Option<Matrix> {
    let eig = s.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 1e-12) {
        return None;
    }
    let d = Matrix::from_diagonal(
        &eig.eigenvalues
            .map(|l| Complex64::new(1.0 / l.sqrt(), 0.0)),
    );
    Some(&eig.eigenvectors * d * eig.eigenvectors.adjoint())
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn tensor_of_basis_states() {
        let z = PureState::basis(2, 0).unwrap();
        let t = tensor(&z, &z);
        assert_eq!(t, PureState::basis(4, 0).unwrap());
    }

    #[test]
    fn tensor_is_linear() {
        let plus_i = PureState::from_amplitudes(vec![c(S, 0.0), c(0.0, S)]).unwrap();
        let z = PureState::basis(2, 0).unwrap();
        let t = tensor(&plus_i, &z);
        assert_eq!(t.dim(), 4);
        assert!((t.amplitude(0) - c(S, 0.0)).norm() < 1e-15);
        assert!((t.amplitude(2) - c(0.0, S)).norm() < 1e-15);
        assert_eq!(t.amplitude(1), ZERO);
    }

    #[test]
    fn tensor_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = random_state(3, &mut rng);
            let b = random_state(5, &mut rng);
            assert!((tensor(&a, &b).norm_sqr() - 1.0).abs() < ANALYTIC_TOL);
        }
    }

    #[test]
    fn rejects_unnormalized_and_out_of_range() {
        assert!(matches!(
            PureState::from_amplitudes(vec![ONE, ONE]),
            Err(Error::NotNormalized(_))
        ));
        assert!(matches!(
            PureState::basis(2, 2),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(PureState::normalized(3, vec![]).is_err());
    }

    #[test]
    fn partial_trace_of_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_state(3, &mut rng);
        let b = random_state(2, &mut rng);
        let rho = tensor(&a, &b).density();
        let first = partial_trace(&rho, (3, 2), Keep::First).unwrap();
        let second = partial_trace(&rho, (3, 2), Keep::Second).unwrap();
        assert!(first.distance_max(&a.density()) < ANALYTIC_TOL);
        assert!(second.distance_max(&b.density()) < ANALYTIC_TOL);
    }

    #[test]
    fn partial_trace_of_maximally_entangled_state() {
        for d in 2..6 {
            let entries = (0..d).map(|k| (k * d + k, ONE)).collect();
            let psi = PureState::normalized(d * d, entries).unwrap();
            let reduced = partial_trace(&psi.density(), (d, d), Keep::First).unwrap();
            assert!(reduced.distance_max(&DensityMatrix::maximally_mixed(d)) < ANALYTIC_TOL);
        }
    }

    #[test]
    fn partial_trace_dimension_mismatch() {
        let rho = DensityMatrix::maximally_mixed(6);
        assert!(matches!(
            partial_trace(&rho, (4, 2), Keep::First),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn born_measure_eigenstate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = PureState::basis(3, 0).unwrap();
        let out = born_measure(&s, &GeneralizedMeasurement::computational(3), &mut rng).unwrap();
        assert_eq!(out.outcome, 0);
        assert!((out.probability - 1.0).abs() < ANALYTIC_TOL);
    }

    #[test]
    fn born_measure_projector_onto_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_state(4, &mut rng);
        let v = nalgebra::DVector::from_vec(s.to_dense());
        let p = &v * v.adjoint();
        let q = Matrix::identity(4, 4) - &p;
        let m = GeneralizedMeasurement::new(vec![(0, p), (1, q)]).unwrap();
        for _ in 0..50 {
            let out = born_measure(&s, &m, &mut rng).unwrap();
            assert_eq!(out.outcome, 0);
        }
    }

    #[test]
    fn born_measure_equal_superposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = PureState::normalized(4, vec![(1, ONE), (3, c(0.0, 1.0))]).unwrap();
        let m = GeneralizedMeasurement::computational(4);
        assert_eq!(m.probabilities(&s).unwrap().iter().filter(|p| **p > 0.0).count(), 2);
        let mut hits = [0usize; 4];
        for _ in 0..2000 {
            let out = born_measure(&s, &m, &mut rng).unwrap();
            assert!((out.probability - 0.5).abs() < ANALYTIC_TOL);
            hits[out.outcome] += 1;
        }
        assert_eq!(hits[0] + hits[2], 0);
        assert!(hits[1] > 800 && hits[3] > 800);
    }

    #[test]
    fn born_measure_never_selects_zero_branch() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s = PureState::basis(2, 1).unwrap();
        let m = GeneralizedMeasurement::computational(2);
        for _ in 0..1000 {
            assert_eq!(born_measure(&s, &m, &mut rng).unwrap().outcome, 1);
        }
    }

    #[test]
    fn measurement_completeness_enforced() {
        let half = Matrix::identity(2, 2).map(|z| z * 0.5);
        assert!(matches!(
            GeneralizedMeasurement::new(vec![(0, half)]),
            Err(Error::Incomplete(_))
        ));
    }

    #[test]
    fn isometry_basis_action_and_identity() {
        // V|q⟩ = |q; f(q)⟩ with f = [1, 0], output register size 2.
        let mut v = Matrix::zeros(4, 2);
        v[(1, 0)] = ONE;
        v[(2, 1)] = ONE;
        let out = apply_isometry(&v, &PureState::basis(2, 0).unwrap()).unwrap();
        assert_eq!(out, PureState::basis(4, 1).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_state(5, &mut rng);
        let id = apply_isometry(&Matrix::identity(5, 5), &s).unwrap();
        assert!((id.inner(&s).norm() - 1.0).abs() < ANALYTIC_TOL);
    }

    #[test]
    fn non_isometry_rejected() {
        let v = Matrix::from_element(2, 2, ONE);
        assert!(matches!(
            apply_isometry(&v, &PureState::basis(2, 0).unwrap()),
            Err(Error::NotIsometry(_))
        ));
    }

    #[test]
    fn average_density_cases() {
        for n in 2..6 {
            let ensemble: Vec<_> = (0..n)
                .map(|j| (1.0 / n as f64, PureState::basis(n, j).unwrap()))
                .collect();
            let rho = average_density(&ensemble).unwrap();
            assert!(rho.distance_max(&DensityMatrix::maximally_mixed(n)) < ANALYTIC_TOL);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let psi = random_state(3, &mut rng);
        let rho = average_density(&[(1.0, psi.clone())]).unwrap();
        assert!(rho.distance_max(&psi.density()) < ANALYTIC_TOL);
        assert_eq!(average_density(&[]), Err(Error::EmptyEnsemble));
        assert!(matches!(
            average_density(&[(0.5, psi)]),
            Err(Error::ProbabilitySum(_))
        ));
    }

    #[test]
    fn density_matrix_validation() {
        let bad = Matrix::identity(2, 2);
        assert!(matches!(DensityMatrix::new(bad), Err(Error::BadTrace(_))));
        let mut neg = Matrix::zeros(2, 2);
        neg[(0, 0)] = c(1.5, 0.0);
        neg[(1, 1)] = c(-0.5, 0.0);
        assert!(matches!(DensityMatrix::new(neg), Err(Error::NotPositive(_))));
        let mut nh = Matrix::identity(2, 2).map(|z| z * 0.5);
        nh[(0, 1)] = c(0.1, 0.0);
        assert!(matches!(DensityMatrix::new(nh), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn project_first_matches_dense_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let psi = random_state(6, &mut rng);
        let phi = random_state(3, &mut rng);
        let (p, rest) = project_first(&psi, &phi, 2).unwrap();
        // dense: P = |φ⟩⟨φ| ⊗ 𝕀
        let pv = nalgebra::DVector::from_vec(phi.to_dense());
        let proj = (&pv * pv.adjoint()).kronecker(&Matrix::identity(2, 2));
        let branch = apply_dense(&proj, &psi);
        let p_dense: f64 = branch.iter().map(|z| z.norm_sqr()).sum();
        assert!((p - p_dense).abs() < ANALYTIC_TOL);
        let post = tensor(&phi, &rest.unwrap());
        let expected = PureState::normalized(6, branch.into_iter().enumerate().collect()).unwrap();
        assert!((post.overlap(&expected) - 1.0).abs() < 1e-10);

        let comp = project_first_complement(&psi, &phi, 2).unwrap();
        let comp = PureState::collect(6, comp).unwrap();
        assert!((comp.norm_sqr() - (1.0 - p)).abs() < 1e-10);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let u = random_unitary(6, &mut rng);
        assert!(isometry_residual(&u) < 1e-10);
    }
}
