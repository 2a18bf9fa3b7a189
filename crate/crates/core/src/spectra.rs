//! Dense eigendecomposition and quantities derived from a spectrum: thermal
//! ensembles, canonical and microcanonical entropies, density of states and
//! the diagonal (dephased) density matrix.

use std::ops::Range;
use std::sync::Arc;

use faer::{Mat, MatRef};

use crate::error::{check_dim, domain, Error, Result};
use crate::linalg::{self, xlogx};
use crate::operators::{Operator, QuantumState};
use crate::C64;

/// Relative tolerance used to decide that two eigenvalues are degenerate.
pub const DEFAULT_DEGENERACY_REL_TOL: f64 = 1e-9;

/// Components below this magnitude are skipped when fixing eigenvector phases.
const PHASE_FLOOR: f64 = 1e-10;

/// Ascending eigenvalues and the matching orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    energies: Vec<f64>,
    vectors: Arc<Mat<f64>>,
}

impl Spectrum {
    /// Assembles a spectrum from precomputed data. Columns must be orthonormal
    /// and the energies ascending.
    pub fn from_parts(energies: Vec<f64>, vectors: Mat<f64>) -> Result<Self> {
        check_dim(vectors.nrows(), vectors.ncols())?;
        check_dim(vectors.ncols(), energies.len())?;
        if energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(domain("energies must be ascending"));
        }
        let defect = linalg::orthonormality_defect(vectors.as_ref());
        if defect > 1e-9 {
            return Err(domain(format!("eigenvectors not orthonormal (defect {defect:.3e})")));
        }
        Ok(Self {
            energies,
            vectors: Arc::new(vectors),
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn vectors(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref().as_ref()
    }

    /// Shared handle to the eigenvector matrix, used as a coarse-graining frame.
    pub fn vectors_arc(&self) -> Arc<Mat<f64>> {
        Arc::clone(&self.vectors)
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.dim()).map(|i| self.vectors[(i, k)]).collect()
    }

    /// Eigenvector `k` as a pure state.
    pub fn eigenstate(&self, k: usize) -> Result<QuantumState> {
        if k >= self.dim() {
            return Err(domain(format!("eigenstate index {k} out of range 0..{}", self.dim())));
        }
        Ok(QuantumState::Pure(
            (0..self.dim()).map(|i| C64::new(self.vectors[(i, k)], 0.0)).collect(),
        ))
    }

    pub fn range(&self) -> f64 {
        match (self.energies.first(), self.energies.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Default absolute degeneracy tolerance: a fixed fraction of the spectral range.
    pub fn degeneracy_tol(&self) -> f64 {
        let r = self.range();
        if r > 0.0 {
            DEFAULT_DEGENERACY_REL_TOL * r
        } else {
            DEFAULT_DEGENERACY_REL_TOL
        }
    }

    pub fn mean_energy(&self) -> f64 {
        self.energies.iter().sum::<f64>() / self.dim() as f64
    }

    /// Standard deviation of the eigenvalues (uniform weight).
    pub fn energy_stddev(&self) -> f64 {
        let m = self.mean_energy();
        let var = self.energies.iter().map(|e| (e - m).powi(2)).sum::<f64>() / self.dim() as f64;
        var.sqrt()
    }

    /// Amplitudes `⟨E_k|ψ⟩`.
    pub fn to_eigenbasis(&self, psi: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.dim(), psi.len())?;
        Ok(linalg::real_t_matvec(self.vectors(), psi))
    }

    /// `Σ_k c_k |E_k⟩`.
    pub fn from_eigenbasis(&self, coeffs: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.dim(), coeffs.len())?;
        Ok(linalg::real_matvec(self.vectors(), coeffs))
    }

    /// Energy populations `⟨E_k|ρ|E_k⟩`.
    pub fn populations(&self, s: &QuantumState) -> Result<Vec<f64>> {
        check_dim(self.dim(), s.dim())?;
        match s {
            QuantumState::Pure(v) => Ok(self.to_eigenbasis(v)?.iter().map(|c| c.norm_sqr()).collect()),
            QuantumState::Mixed(_) => {
                let r = s.real_density();
                let ru = &r * self.vectors();
                let u = self.vectors();
                Ok((0..self.dim())
                    .map(|k| (0..self.dim()).map(|i| u[(i, k)] * ru[(i, k)]).sum())
                    .collect())
            }
        }
    }

    /// Maximal runs of consecutive eigenvalues whose neighbouring gaps are at most `tol`.
    pub fn level_groups(&self, tol: f64) -> Vec<Range<usize>> {
        level_groups(&self.energies, tol)
    }

    /// `Σ_k w_k |E_k⟩⟨E_k|` as a real matrix.
    pub fn weighted_projector_sum(&self, weights: &[f64]) -> Result<Mat<f64>> {
        check_dim(self.dim(), weights.len())?;
        let u = self.vectors();
        let scaled = Mat::<f64>::from_fn(self.dim(), self.dim(), |i, k| u[(i, k)] * weights[k]);
        Ok(&scaled * u.transpose())
    }
}

/// Clusters of an ascending list: a new cluster starts whenever the gap to the
/// previous value exceeds `tol`.
pub fn level_groups(sorted: &[f64], tol: f64) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=sorted.len() {
        if k == sorted.len() || sorted[k] - sorted[k - 1] > tol {
            if k > start {
                out.push(start..k);
            }
            start = k;
        }
    }
    out
}

/// Eigendecomposition with ascending eigenvalues. Each eigenvector is signed
/// so that its first component above `1e-10` in magnitude is positive.
pub fn eigendecompose(op: &Operator) -> Result<Spectrum> {
    let (energies, mut u) = linalg::symmetric_eigen(op.matrix())?;
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numeric("eigensolver returned non-finite eigenvalues".into()));
    }
    let n = u.nrows();
    for k in 0..u.ncols() {
        let pivot = (0..n).map(|i| u[(i, k)]).find(|x| x.abs() > PHASE_FLOOR);
        if matches!(pivot, Some(x) if x < 0.0) {
            for i in 0..n {
                u[(i, k)] = -u[(i, k)];
            }
        }
    }
    Ok(Spectrum {
        energies,
        vectors: Arc::new(u),
    })
}

/// Canonical (Gibbs) weights over a list of eigenvalues.
#[derive(Debug, Clone)]
pub struct ThermalEnsemble {
    pub beta: f64,
    pub log_partition: f64,
    pub probabilities: Vec<f64>,
    pub mean_energy: f64,
}

impl ThermalEnsemble {
    /// Evaluated with log-sum-exp so that large `|β|` cannot overflow.
    pub fn new(energies: &[f64], beta: f64) -> Result<Self> {
        if energies.is_empty() {
            return Err(domain("empty spectrum"));
        }
        if !beta.is_finite() {
            return Err(domain("beta must be finite"));
        }
        let shift = energies
            .iter()
            .map(|&e| -beta * e)
            .fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = energies.iter().map(|&e| (-beta * e - shift).exp()).collect();
        let z: f64 = w.iter().sum();
        let probabilities: Vec<f64> = w.iter().map(|x| x / z).collect();
        let mean_energy = probabilities.iter().zip(energies).map(|(p, e)| p * e).sum();
        Ok(Self {
            beta,
            log_partition: shift + z.ln(),
            probabilities,
            mean_energy,
        })
    }

    /// `β Ē + ln Z`.
    pub fn entropy(&self) -> f64 {
        self.beta * self.mean_energy + self.log_partition
    }

    /// `−Σ p ln p`, an independent evaluation of [`ThermalEnsemble::entropy`].
    pub fn shannon_entropy(&self) -> f64 {
        -self.probabilities.iter().map(|&p| xlogx(p)).sum::<f64>()
    }

    pub fn energy_variance(&self, energies: &[f64]) -> f64 {
        self.probabilities
            .iter()
            .zip(energies)
            .map(|(p, e)| p * (e - self.mean_energy).powi(2))
            .sum()
    }
}

pub fn canonical_entropy(ens: &ThermalEnsemble) -> f64 {
    ens.entropy()
}

/// Inverse temperature whose canonical mean energy equals `target`.
pub fn solve_beta(spec: &Spectrum, target: f64) -> Result<ThermalEnsemble> {
    solve_beta_for(spec.energies(), target)
}

/// [`solve_beta`] on a bare eigenvalue list.
pub fn solve_beta_for(energies: &[f64], target: f64) -> Result<ThermalEnsemble> {
    let lo_e = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_e = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(target > lo_e && target < hi_e) {
        return Err(domain(format!(
            "target energy {target} outside the open spectral interval ({lo_e}, {hi_e})"
        )));
    }
    let range = hi_e - lo_e;
    let tol = 1e-12 * range;
    let residual = |b: f64| -> Result<(ThermalEnsemble, f64)> {
        let ens = ThermalEnsemble::new(energies, b)?;
        let r = ens.mean_energy - target;
        Ok((ens, r))
    };

    // mean energy decreases monotonically in beta
    let (ens0, r0) = residual(0.0)?;
    if r0.abs() <= tol {
        return Ok(ens0);
    }
    let dir = if r0 > 0.0 { 1.0 } else { -1.0 };
    let mut step = 1.0 / range;
    let (mut a, mut b) = (0.0, dir * step);
    loop {
        let (_, r) = residual(b)?;
        if r.signum() != r0.signum() || r == 0.0 {
            break;
        }
        a = b;
        step *= 2.0;
        b = dir * step;
        if step * range > 1e8 {
            return Err(Error::Numeric("could not bracket beta".into()));
        }
    }
    let (mut lo, mut hi) = if a < b { (a, b) } else { (b, a) };
    let mut x = 0.5 * (lo + hi);
    for _ in 0..500 {
        let (ens, r) = residual(x)?;
        if r.abs() <= tol {
            return Ok(ens);
        }
        // residual is decreasing in beta
        if r > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let var = ens.energy_variance(energies);
        let newton = if var > 0.0 { x + r / var } else { f64::NAN };
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
            return Ok(ens);
        }
    }
    Err(Error::Numeric("beta solve did not converge".into()))
}

/// `ρ_th = Σ_k p_k |E_k⟩⟨E_k|`.
pub fn thermal_state(spec: &Spectrum, ens: &ThermalEnsemble) -> Result<QuantumState> {
    let m = spec.weighted_projector_sum(&ens.probabilities)?;
    Ok(QuantumState::mixed_unchecked(linalg::to_complex(m.as_ref())))
}

/// `−tr ρ ln ρ`; pure states are exactly zero.
pub fn von_neumann_entropy(s: &QuantumState) -> Result<f64> {
    match s {
        QuantumState::Pure(_) => Ok(0.0),
        QuantumState::Mixed(m) => von_neumann_entropy_of(m.as_ref()),
    }
}

/// `−Σ λ ln λ` over eigenvalues above `1e-14` of a Hermitian matrix.
pub fn von_neumann_entropy_of(m: MatRef<'_, C64>) -> Result<f64> {
    Ok(linalg::hermitian_eigenvalues(m)?
        .into_iter()
        .filter(|&l| l > 1e-14)
        .map(|l| -l * l.ln())
        .sum())
}

/// Populations summed over degenerate levels, then spread evenly across each level.
pub fn dephased_weights(spec: &Spectrum, s: &QuantumState, tol: f64) -> Result<Vec<f64>> {
    let p = spec.populations(s)?;
    let mut w = vec![0.0; p.len()];
    for g in spec.level_groups(tol) {
        let total: f64 = p[g.clone()].iter().sum();
        let share = total / g.len() as f64;
        w[g].iter_mut().for_each(|x| *x = share);
    }
    Ok(w)
}

/// `ρ_d = Σ_E p_E / tr P_E · P_E`.
pub fn diagonal_density_matrix(s: &QuantumState, spec: &Spectrum, tol: f64) -> Result<QuantumState> {
    let w = dephased_weights(spec, s, tol)?;
    let m = spec.weighted_projector_sum(&w)?;
    Ok(QuantumState::mixed_unchecked(linalg::to_complex(m.as_ref())))
}

/// Bandwidth rule for the Gaussian density-of-states kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelWidth {
    Fixed(f64),
    /// A multiple of the mean level spacing among the levels nearest the evaluation energy.
    LevelSpacings { multiple: f64, neighbours: usize },
}

impl Default for KernelWidth {
    fn default() -> Self {
        Self::LevelSpacings {
            multiple: 5.0,
            neighbours: 5,
        }
    }
}

impl KernelWidth {
    /// Concrete width at energy `e` for an ascending spectrum.
    pub fn resolve(&self, sorted: &[f64], e: f64) -> Result<f64> {
        let w = match *self {
            Self::Fixed(w) => w,
            Self::LevelSpacings { multiple, neighbours } => multiple * local_spacing(sorted, e, neighbours.max(1)),
        };
        if w > 0.0 && w.is_finite() {
            Ok(w)
        } else {
            Err(domain(format!("kernel width must be positive, got {w}")))
        }
    }
}

/// Mean gap among the `2·neighbours + 1` levels closest in index to `e`.
/// Falls back to the global mean spacing inside exactly degenerate windows.
pub fn local_spacing(sorted: &[f64], e: f64, neighbours: usize) -> f64 {
    let n = sorted.len();
    if n < 2 {
        return 0.0;
    }
    let pos = sorted.partition_point(|&x| x < e).min(n - 1);
    let span = (2 * neighbours).min(n - 1);
    let start = pos.saturating_sub(neighbours).min(n - 1 - span);
    let local = (sorted[start + span] - sorted[start]) / span as f64;
    if local > 0.0 {
        local
    } else {
        (sorted[n - 1] - sorted[0]) / (n - 1) as f64
    }
}

/// Gaussian-kernel estimate `Σ_k N(e − E_k; width)`.
pub fn density_of_states(spec: &Spectrum, e: f64, width: KernelWidth) -> Result<f64> {
    let w = width.resolve(spec.energies(), e)?;
    Ok(gaussian_density(spec.energies(), e, w))
}

pub fn gaussian_density(energies: &[f64], e: f64, width: f64) -> f64 {
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * width);
    energies
        .iter()
        .map(|&x| {
            let z = (e - x) / width;
            (-0.5 * z * z).exp()
        })
        .sum::<f64>()
        * norm
}

/// Smallest density accepted by [`microcanonical_entropy`].
pub const DENSITY_FLOOR: f64 = 1e-300;

/// `ln(ρ(E)·ΔE)` with the energy window `ΔE = σ/√N`, `σ` the eigenvalue
/// standard deviation and `N` the particle number.
pub fn microcanonical_entropy(spec: &Spectrum, e: f64, particles: usize, width: KernelWidth) -> Result<f64> {
    if particles == 0 {
        return Err(domain("particle number must be positive"));
    }
    let window = spec.energy_stddev() / (particles as f64).sqrt();
    microcanonical_entropy_with_window(spec, e, window, width)
}

/// `ln(ρ(E)·ΔE)` for an explicit window `ΔE`.
pub fn microcanonical_entropy_with_window(spec: &Spectrum, e: f64, window: f64, width: KernelWidth) -> Result<f64> {
    let rho = density_of_states(spec, e, width)?;
    if !(rho > DENSITY_FLOOR) {
        return Err(domain(format!("density of states vanishes at E = {e}")));
    }
    Ok((rho * window).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::FockBasis;
    use crate::operators::{build_full_hamiltonian, ChainParams};

    fn ladder(n: usize, gap: f64) -> Spectrum {
        let e: Vec<f64> = (0..n).map(|k| k as f64 * gap).collect();
        eigendecompose(&Operator::diagonal(&e)).unwrap()
    }

    #[test]
    fn diagonal_matrix_sorted() {
        let s = eigendecompose(&Operator::diagonal(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(s.energies(), &[1.0, 2.0, 3.0]);
        let u = s.vectors();
        assert_eq!(u[(1, 0)], 1.0);
        assert_eq!(u[(2, 1)], 1.0);
        assert_eq!(u[(0, 2)], 1.0);
    }

    #[test]
    fn two_level_phase_fixed() {
        let m = Mat::<f64>::from_fn(2, 2, |i, j| if i == j { 0.0 } else { -1.0 });
        let s = eigendecompose(&Operator::new(m).unwrap()).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((s.energies()[0] + 1.0).abs() < 1e-14);
        assert!((s.vector(0)[0] - r).abs() < 1e-14 && (s.vector(0)[1] - r).abs() < 1e-14);
        assert!((s.vector(1)[0] - r).abs() < 1e-14 && (s.vector(1)[1] + r).abs() < 1e-14);
    }

    #[test]
    fn chain_residuals() {
        let b = FockBasis::new(10, 4).unwrap();
        let h = build_full_hamiltonian(&b, &ChainParams::non_integrable()).unwrap();
        let s = eigendecompose(&h).unwrap();
        let hu = h.matrix() * s.vectors();
        let mut worst = 0.0f64;
        for k in 0..s.dim() {
            for i in 0..s.dim() {
                worst = worst.max((hu[(i, k)] - s.energies()[k] * s.vectors()[(i, k)]).abs());
            }
        }
        assert!(worst < 1e-10 * h.max_abs().max(1.0), "{worst}");
        assert!(linalg::orthonormality_defect(s.vectors()) < 1e-10);
    }

    #[test]
    fn beta_zero_at_mean() {
        let s = ladder(7, 0.3);
        let ens = solve_beta(&s, s.mean_energy()).unwrap();
        assert!(ens.beta.abs() < 1e-12);
        assert!((ens.entropy() - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn two_level_beta_one() {
        let s = eigendecompose(&Operator::diagonal(&[-1.0, 1.0])).unwrap();
        let ens = solve_beta(&s, -(1f64).tanh()).unwrap();
        assert!((ens.beta - 1.0).abs() < 1e-10, "{}", ens.beta);
        let neg = solve_beta(&s, (0.5f64).tanh()).unwrap();
        assert!((neg.beta + 0.5).abs() < 1e-10);
    }

    #[test]
    fn beta_outside_interval() {
        let s = ladder(4, 1.0);
        assert!(solve_beta(&s, 0.0).is_err());
        assert!(solve_beta(&s, 3.5).is_err());
    }

    #[test]
    fn beta_monotone_and_entropy_identity() {
        let s = ladder(20, 0.17);
        let mut prev = f64::INFINITY;
        for k in 1..20 {
            let target = 0.05 + k as f64 * 0.16;
            let ens = solve_beta(&s, target).unwrap();
            assert!((ens.mean_energy - target).abs() < 1e-8 * s.range());
            assert!(ens.beta < prev);
            prev = ens.beta;
            assert!((ens.entropy() - ens.shannon_entropy()).abs() < 1e-10);
        }
    }

    #[test]
    fn cold_gapped_spectrum() {
        let ens = ThermalEnsemble::new(&[0.0, 1.0, 2.0], 50.0).unwrap();
        assert!(ens.entropy() < 1e-20);
        let huge = ThermalEnsemble::new(&[0.0, 1.0], 1e4).unwrap();
        assert!(huge.log_partition.is_finite());
    }

    #[test]
    fn von_neumann_basics() {
        assert_eq!(von_neumann_entropy(&QuantumState::basis_state(3, 1)).unwrap(), 0.0);
        let mm = QuantumState::maximally_mixed(6);
        assert!((von_neumann_entropy(&mm).unwrap() - 6f64.ln()).abs() < 1e-12);
        let w = [0.1, 0.2, 0.3, 0.4];
        let rho = QuantumState::Mixed(linalg::to_complex(Operator::diagonal(&w).matrix()));
        let direct: f64 = -w.iter().map(|&p| xlogx(p)).sum::<f64>();
        assert!((von_neumann_entropy(&rho).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn diagonal_density_of_eigenstate_and_identity() {
        let b = FockBasis::new(6, 3).unwrap();
        let h = build_full_hamiltonian(&b, &ChainParams::non_integrable()).unwrap();
        let s = eigendecompose(&h).unwrap();
        let e5 = s.eigenstate(5).unwrap();
        let rd = diagonal_density_matrix(&e5, &s, s.degeneracy_tol()).unwrap();
        let direct = e5.density_matrix();
        let QuantumState::Mixed(m) = rd else { unreachable!() };
        for i in 0..s.dim() {
            for j in 0..s.dim() {
                assert!((m[(i, j)] - direct[(i, j)]).norm() < 1e-10);
            }
        }
        let mm = QuantumState::maximally_mixed(s.dim());
        let QuantumState::Mixed(m) = diagonal_density_matrix(&mm, &s, s.degeneracy_tol()).unwrap() else {
            unreachable!()
        };
        for i in 0..s.dim() {
            assert!((m[(i, i)].re - 1.0 / s.dim() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_levels_are_averaged() {
        let s = eigendecompose(&Operator::diagonal(&[0.0, 1.0, 1.0])).unwrap();
        let psi = QuantumState::basis_state(3, 1);
        let w = dephased_weights(&s, &psi, 1e-9).unwrap();
        assert_eq!(w, vec![0.0, 0.5, 0.5]);
        let rd = diagonal_density_matrix(&psi, &s, 1e-9).unwrap();
        assert!((von_neumann_entropy(&rd).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ladder_density() {
        let gap = 0.1;
        let s = ladder(401, gap);
        let rho = density_of_states(&s, 20.0, KernelWidth::Fixed(5.0 * gap)).unwrap();
        assert!((rho * gap - 1.0).abs() < 0.02);
        let rho_default = density_of_states(&s, 20.03, KernelWidth::default()).unwrap();
        assert!((rho_default * gap - 1.0).abs() < 0.02);
    }

    #[test]
    fn single_level_peak() {
        let s = eigendecompose(&Operator::diagonal(&[0.7])).unwrap();
        let w = 0.25;
        let rho = density_of_states(&s, 0.7, KernelWidth::Fixed(w)).unwrap();
        assert!((rho - 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * w)).abs() < 1e-12);
        assert!(density_of_states(&s, 0.7, KernelWidth::Fixed(0.0)).is_err());
    }

    #[test]
    fn ladder_microcanonical_is_zero() {
        let d = 400;
        let gap = 0.05;
        let s = ladder(d, gap);
        let range = gap * d as f64;
        let v = microcanonical_entropy_with_window(&s, 10.0, range / d as f64, KernelWidth::Fixed(4.0 * gap)).unwrap();
        assert!(v.abs() < 0.02, "{v}");
        assert!(microcanonical_entropy_with_window(&s, 1e4, 1.0, KernelWidth::Fixed(gap)).is_err());
    }

    #[test]
    fn local_spacing_at_edges() {
        let e: Vec<f64> = (0..10).map(|k| k as f64).collect();
        assert!((local_spacing(&e, -5.0, 3) - 1.0).abs() < 1e-14);
        assert!((local_spacing(&e, 50.0, 3) - 1.0).abs() < 1e-14);
        assert!((local_spacing(&[1.0, 1.0, 1.0, 3.0], 1.0, 1) - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn groups_from_tolerance() {
        let g = level_groups(&[0.0, 1e-12, 1.0, 2.0, 2.0 + 1e-11, 2.0 + 2e-11], 1e-10);
        assert_eq!(g, vec![0..2, 2..3, 3..6]);
        assert!(level_groups(&[], 1.0).is_empty());
    }
}
