//! Chain Hamiltonians, quantum states, expectation values and partial traces.

use std::collections::HashMap;
use std::ops::Range;

use faer::{Mat, MatRef};

use crate::basis::{range_mask, BoxPartition, FockBasis};
use crate::error::{check_dim, domain, Error, Result};
use crate::linalg::{self, norm_sqr};
use crate::C64;

/// Couplings of the chain Hamiltonian (units with ħ = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    /// Nearest-neighbour hopping.
    pub t: f64,
    /// Nearest-neighbour density interaction.
    pub v: f64,
    /// Next-nearest-neighbour hopping.
    pub t_prime: f64,
    /// Next-nearest-neighbour density interaction.
    pub v_prime: f64,
}

impl ChainParams {
    pub fn new(t: f64, v: f64, t_prime: f64, v_prime: f64) -> Result<Self> {
        let p = Self {
            t,
            v,
            t_prime,
            v_prime,
        };
        if [t, v, t_prime, v_prime].iter().all(|x| x.is_finite()) {
            Ok(p)
        } else {
            Err(domain("chain couplings must be finite"))
        }
    }

    /// `t = V = 1`, `t' = V' = 0`.
    pub fn integrable() -> Self {
        Self {
            t: 1.0,
            v: 1.0,
            t_prime: 0.0,
            v_prime: 0.0,
        }
    }

    /// `t = V = 1`, `t' = V' = 0.96`.
    pub fn non_integrable() -> Self {
        Self {
            t: 1.0,
            v: 1.0,
            t_prime: 0.96,
            v_prime: 0.96,
        }
    }
}

/// Dense real-symmetric operator on a Fock basis.
#[derive(Debug, Clone)]
pub struct Operator {
    matrix: Mat<f64>,
}

/// Elementwise symmetry tolerance accepted by [`Operator::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;

impl Operator {
    pub fn new(matrix: Mat<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(domain(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let defect = linalg::symmetry_defect(matrix.as_ref());
        if defect > HERMITIAN_TOL {
            return Err(domain(format!("operator is not Hermitian (defect {defect:.3e})")));
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: Mat::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: Mat::zeros(dim, dim),
        }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self {
            matrix: Mat::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 }),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<f64> {
        self.matrix
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self {
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self {
            matrix: &self.matrix - &other.matrix,
        })
    }

    pub fn scale(&self, factor: f64) -> Operator {
        Self {
            matrix: Mat::from_fn(self.dim(), self.dim(), |i, j| factor * self.matrix[(i, j)]),
        }
    }

    /// Operator product; the result is symmetrised and must be Hermitian.
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        check_dim(self.dim(), other.dim())?;
        let m = &self.matrix * &other.matrix;
        Operator::new(m)
    }

    /// Largest absolute matrix element.
    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                m = m.max(self.matrix[(i, j)].abs());
            }
        }
        m
    }
}

/// Pure state vector or dense density matrix.
#[derive(Debug, Clone)]
pub enum QuantumState {
    Pure(Vec<C64>),
    Mixed(Mat<C64>),
}

/// Normalisation tolerance for states.
pub const STATE_TOL: f64 = 1e-10;

impl QuantumState {
    /// Wraps a unit vector.
    pub fn pure(v: Vec<C64>) -> Result<Self> {
        let n = norm_sqr(&v).sqrt();
        if (n - 1.0).abs() > STATE_TOL {
            return Err(domain(format!("state vector has norm {n}")));
        }
        Ok(Self::Pure(v))
    }

    /// Normalises `v` first.
    pub fn pure_normalized(mut v: Vec<C64>) -> Result<Self> {
        let n = norm_sqr(&v).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(domain("cannot normalise a zero or non-finite vector"));
        }
        v.iter_mut().for_each(|a| *a /= n);
        Ok(Self::Pure(v))
    }

    /// Real unit vector.
    pub fn from_real(v: &[f64]) -> Result<Self> {
        Self::pure(v.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Validates trace, Hermiticity and positivity.
    pub fn mixed(m: Mat<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(domain("density matrix must be square"));
        }
        let h = linalg::hermiticity_defect(m.as_ref());
        if h > STATE_TOL {
            return Err(domain(format!("density matrix not Hermitian (defect {h:.3e})")));
        }
        let tr: f64 = (0..m.nrows()).map(|i| m[(i, i)].re).sum();
        if (tr - 1.0).abs() > STATE_TOL {
            return Err(domain(format!("density matrix has trace {tr}")));
        }
        let ev = linalg::hermitian_eigenvalues(m.as_ref())?;
        if let Some(&lo) = ev.first() {
            if lo < -STATE_TOL {
                return Err(domain(format!("density matrix has eigenvalue {lo}")));
            }
        }
        Ok(Self::Mixed(m))
    }

    pub(crate) fn mixed_unchecked(m: Mat<C64>) -> Self {
        Self::Mixed(m)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let w = 1.0 / dim as f64;
        Self::Mixed(Mat::from_fn(dim, dim, |i, j| {
            if i == j {
                C64::new(w, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[index] = C64::new(1.0, 0.0);
        Self::Pure(v)
    }

    /// `Σ_k w_k |v_k⟩⟨v_k|` from non-negative weights summing to one and unit vectors.
    pub fn from_ensemble(weights: &[f64], vectors: &[Vec<C64>]) -> Result<Self> {
        if weights.len() != vectors.len() || vectors.is_empty() {
            return Err(domain("ensemble needs one weight per vector"));
        }
        let d = vectors[0].len();
        let mut m = Mat::<C64>::zeros(d, d);
        for (&w, v) in weights.iter().zip(vectors) {
            check_dim(d, v.len())?;
            for j in 0..d {
                let cj = v[j].conj() * w;
                for i in 0..d {
                    m[(i, j)] += v[i] * cj;
                }
            }
        }
        Self::mixed(m)
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Pure(v) => v.len(),
            Self::Mixed(m) => m.nrows(),
        }
    }

    pub fn is_pure(&self) -> bool {
        matches!(self, Self::Pure(_))
    }

    pub fn as_pure(&self) -> Option<&[C64]> {
        match self {
            Self::Pure(v) => Some(v),
            Self::Mixed(_) => None,
        }
    }

    pub fn density_matrix(&self) -> Mat<C64> {
        match self {
            Self::Pure(v) => Mat::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj()),
            Self::Mixed(m) => m.clone(),
        }
    }

    /// Real part of the density matrix. Every quantity evaluated against a
    /// real frame depends on the state only through this matrix.
    pub fn real_density(&self) -> Mat<f64> {
        match self {
            Self::Pure(v) => Mat::from_fn(v.len(), v.len(), |i, j| (v[i] * v[j].conj()).re),
            Self::Mixed(m) => Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Self::Pure(v) => norm_sqr(v),
            Self::Mixed(m) => (0..m.nrows()).map(|i| m[(i, i)].re).sum(),
        }
    }

    /// Kronecker product with `self` as the slow index.
    pub fn tensor(&self, other: &QuantumState) -> QuantumState {
        match (self, other) {
            (Self::Pure(a), Self::Pure(b)) => {
                let mut v = Vec::with_capacity(a.len() * b.len());
                for x in a {
                    for y in b {
                        v.push(x * y);
                    }
                }
                Self::Pure(v)
            }
            _ => {
                let a = self.density_matrix();
                let b = other.density_matrix();
                let (da, db) = (a.nrows(), b.nrows());
                Self::Mixed(Mat::from_fn(da * db, da * db, |i, j| {
                    a[(i / db, j / db)] * b[(i % db, j % db)]
                }))
            }
        }
    }
}

/// Product of an operator with a state: a vector for pure states, a matrix
/// (`op · ρ`, not renormalised) for mixed ones.
#[derive(Debug, Clone)]
pub enum Applied {
    Vector(Vec<C64>),
    Matrix(Mat<C64>),
}

pub fn apply(op: &Operator, s: &QuantumState) -> Result<Applied> {
    check_dim(op.dim(), s.dim())?;
    Ok(match s {
        QuantumState::Pure(v) => Applied::Vector(linalg::real_matvec(op.matrix(), v)),
        QuantumState::Mixed(m) => Applied::Matrix(linalg::real_times_complex(op.matrix(), m.as_ref())),
    })
}

/// `⟨ψ|A|ψ⟩` or `tr[A ρ]`.
pub fn expectation(op: &Operator, s: &QuantumState) -> Result<f64> {
    check_dim(op.dim(), s.dim())?;
    let a = op.matrix();
    let value = match s {
        QuantumState::Pure(v) => {
            let av = linalg::real_matvec(a, v);
            v.iter().zip(&av).map(|(x, y)| x.conj() * y).sum::<C64>()
        }
        QuantumState::Mixed(m) => {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    acc += a[(i, j)] * m[(j, i)];
                }
            }
            acc
        }
    };
    if value.im.abs() > 1e-10 * value.re.abs().max(1.0) {
        return Err(Error::Numeric(format!(
            "expectation value has imaginary part {}",
            value.im
        )));
    }
    Ok(value.re)
}

/// Chain Hamiltonian restricted to `sites` (0-based, half-open) with hard walls.
///
/// Hopping elements carry the fermionic sign `(-1)^n`, `n` being the number of
/// occupied sites strictly between the two hop endpoints.
pub fn build_chain_hamiltonian(basis: &FockBasis, sites: Range<usize>, params: &ChainParams) -> Result<Operator> {
    if sites.start >= sites.end || sites.end > basis.sites() {
        return Err(domain(format!(
            "site range {sites:?} is not a non-empty range inside 0..{}",
            basis.sites()
        )));
    }
    let d = basis.dim();
    let mut h = Mat::<f64>::zeros(d, d);
    let bonds = [(1usize, params.t, params.v), (2, params.t_prime, params.v_prime)];
    for (col, &s) in basis.states().iter().enumerate() {
        let mut diag = 0.0;
        for i in sites.clone() {
            for &(dist, hop, int) in &bonds {
                let j = i + dist;
                if j >= sites.end {
                    continue;
                }
                let ni = (s >> i) & 1;
                let nj = (s >> j) & 1;
                if ni == 1 && nj == 1 {
                    diag += int;
                } else if ni != nj && hop != 0.0 {
                    let between = s & (((1u32 << j) - 1) ^ ((1u32 << (i + 1)) - 1));
                    let sign = if between.count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                    let row = basis
                        .index_of(s ^ (1 << i) ^ (1 << j))
                        .expect("hopping preserves particle number");
                    h[(row, col)] += -hop * sign;
                }
            }
        }
        h[(col, col)] += diag;
    }
    Operator::new(h)
}

/// Full-lattice Hamiltonian.
pub fn build_full_hamiltonian(basis: &FockBasis, params: &ChainParams) -> Result<Operator> {
    build_chain_hamiltonian(basis, 0..basis.sites(), params)
}

/// Sum of the block Hamiltonians of `blocks`; no term crosses a block boundary.
pub fn block_hamiltonian(basis: &FockBasis, blocks: &BoxPartition, params: &ChainParams) -> Result<Operator> {
    check_dim(basis.sites(), blocks.sites())?;
    let mut total = Operator::zeros(basis.dim());
    for b in blocks.boxes() {
        let hb = build_chain_hamiltonian(basis, b.clone(), params)?;
        total = total.add(&hb)?;
    }
    Ok(total)
}

/// Every term of the full Hamiltonian that crosses a block boundary:
/// `H_int = H − Σ_k H^(k)`.
pub fn interaction_hamiltonian(basis: &FockBasis, blocks: &BoxPartition, params: &ChainParams) -> Result<Operator> {
    build_full_hamiltonian(basis, params)?.sub(&block_hamiltonian(basis, blocks, params)?)
}

/// `Σ_k H^(k) + λ H_int`: the chain with cross-boundary couplings scaled by `λ`.
pub fn scaled_coupling_hamiltonian(
    basis: &FockBasis,
    blocks: &BoxPartition,
    params: &ChainParams,
    coupling: f64,
) -> Result<Operator> {
    let local = block_hamiltonian(basis, blocks, params)?;
    let int = interaction_hamiltonian(basis, blocks, params)?;
    local.add(&int.scale(coupling))
}

/// Reduced density matrix on a contiguous block of sites.
///
/// Rows and columns are indexed by the block's occupation bitstring (shifted
/// to start at bit 0) over all particle sectors, so the matrix has dimension
/// `2^len`. It is block diagonal in the block particle number. Contiguous
/// blocks need no fermionic sign: the sign from moving the block past the
/// lower sites depends only on particle numbers, which are equal on both
/// sides of every non-zero element.
#[derive(Debug, Clone)]
pub struct ReducedState {
    pub sites: Range<usize>,
    pub matrix: Mat<C64>,
}

impl ReducedState {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Indices (block bitstrings) of the `n`-particle sector, ascending.
    pub fn sector_indices(&self, n: usize) -> Vec<usize> {
        (0..self.dim()).filter(|b| b.count_ones() as usize == n).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).sum()
    }

    pub fn into_state(self) -> QuantumState {
        QuantumState::mixed_unchecked(self.matrix)
    }
}

pub fn partial_trace(s: &QuantumState, basis: &FockBasis, block: Range<usize>) -> Result<ReducedState> {
    check_dim(basis.dim(), s.dim())?;
    if block.start >= block.end || block.end > basis.sites() {
        return Err(domain(format!("block {block:?} is not inside 0..{}", basis.sites())));
    }
    if block.end - block.start > 16 {
        return Err(domain("reduced blocks are limited to 16 sites"));
    }
    let mask = range_mask(&block);
    let shift = block.start;
    let bd = 1usize << (block.end - block.start);
    // group basis indices by the configuration outside the block
    let mut env: HashMap<u32, Vec<(usize, usize)>> = HashMap::new();
    let mut order = Vec::new();
    for (i, &st) in basis.states().iter().enumerate() {
        let key = st & !mask;
        let local = ((st & mask) >> shift) as usize;
        env.entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push((local, i));
    }
    let matrix = match s {
        QuantumState::Pure(v) => {
            let mut m = Mat::<C64>::zeros(bd, order.len());
            for (c, key) in order.iter().enumerate() {
                for &(local, i) in &env[key] {
                    m[(local, c)] = v[i];
                }
            }
            &m * m.adjoint()
        }
        QuantumState::Mixed(rho) => {
            let mut m = Mat::<C64>::zeros(bd, bd);
            for key in &order {
                let members = &env[key];
                for &(a, i) in members {
                    for &(b, j) in members {
                        m[(a, b)] += rho[(i, j)];
                    }
                }
            }
            m
        }
    };
    Ok(ReducedState {
        sites: block,
        matrix,
    })
}

/// Reduced state of the leading `left_sites` sites.
pub fn partial_trace_left(s: &QuantumState, basis: &FockBasis, left_sites: usize) -> Result<ReducedState> {
    if left_sites == 0 || left_sites >= basis.sites() {
        return Err(domain(format!(
            "left block must satisfy 1 <= {left_sites} < {}",
            basis.sites()
        )));
    }
    partial_trace(s, basis, 0..left_sites)
}
