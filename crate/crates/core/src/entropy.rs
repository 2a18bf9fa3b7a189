//! Observational entropy and the functionals built from it.

use std::collections::HashMap;

use faer::Mat;

use crate::basis::{BoxPartition, FockBasis};
use crate::coarse::{
    factorized, CoarseGraining, ChainEvaluator, Frame, Label, LocalSpectrum, MacrostateTable, P_FLOOR,
};
use crate::error::{check_dim, domain, Result};
use crate::linalg::{self, xlogx};
use crate::operators::{partial_trace, partial_trace_left, ChainParams, Operator, QuantumState};
use crate::spectra::{von_neumann_entropy_of, Spectrum, ThermalEnsemble};
use crate::C64;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `E[η² ln η²]` for a standard real Gaussian `η` (`2 − γ − ln 2`): the mean
/// entropy gap between a microcanonical mixture and a single energy eigenstate.
pub const REAL_GAUSSIAN_LOG_MOMENT: f64 = 2.0 - EULER_GAMMA - std::f64::consts::LN_2;

/// `E[|ζ|² ln |ζ|²]` for a unit-variance complex Gaussian `ζ` (`1 − γ`): the
/// corresponding gap for a random superposition of neighbouring eigenstates.
pub const COMPLEX_GAUSSIAN_LOG_MOMENT: f64 = 1.0 - EULER_GAMMA;

/// An entropy in nats with its split into the Shannon term `−Σ p ln p` and
/// the mean log-volume term `Σ p ln V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyValue {
    pub value: f64,
    pub shannon: f64,
    pub mean_log_volume: f64,
}

impl EntropyValue {
    pub fn from_table(table: &MacrostateTable) -> Self {
        let mut shannon = 0.0;
        let mut logv = 0.0;
        for (_, p, v) in table.iter() {
            if p > P_FLOOR {
                shannon -= p * p.ln();
                logv += p * v.ln();
            }
        }
        Self {
            value: shannon + logv,
            shannon,
            mean_log_volume: logv,
        }
    }
}

impl ChainEvaluator {
    /// Observational entropy of `s` under the prepared chain.
    pub fn entropy(&self, s: &QuantumState) -> Result<EntropyValue> {
        Ok(EntropyValue::from_table(&self.evaluate(s)?))
    }
}

/// `S_O = −Σ p ln(p/V)` over the multi-macrostates of `chain`.
pub fn s_obs(s: &QuantumState, chain: &[CoarseGraining]) -> Result<EntropyValue> {
    ChainEvaluator::new(chain)?.entropy(s)
}

/// `Σ_i p_i / tr P_i · P_i`, whose von Neumann entropy equals `S_O`.
pub fn coarse_grained_state(s: &QuantumState, c: &CoarseGraining) -> Result<QuantumState> {
    let table = ChainEvaluator::new(std::slice::from_ref(c))?.evaluate(s)?;
    let mut w = vec![0.0; c.dim()];
    for (idx, p, v) in table.iter() {
        for &a in &c.groups()[idx[0]] {
            w[a] = p / v;
        }
    }
    let m = match c.frame() {
        Frame::Identity(d) => Mat::<f64>::from_fn(*d, *d, |i, j| if i == j { w[i] } else { 0.0 }),
        Frame::Dense(f) => {
            let scaled = Mat::<f64>::from_fn(f.nrows(), f.ncols(), |i, a| f[(i, a)] * w[a]);
            &scaled * f.transpose()
        }
    };
    QuantumState::mixed(linalg::to_complex(m.as_ref()))
}

/// Entropy of the energy eigenprojectors (degenerate levels merged), equal to
/// the von Neumann entropy of the dephased state.
pub fn diagonal_entropy(s: &QuantumState, spec: &Spectrum) -> Result<EntropyValue> {
    s_obs(s, &[CoarseGraining::from_observable(spec, spec.degeneracy_tol())])
}

/// Shannon entropy `−Σ p_a ln p_a` of the outcome distribution of `c`.
pub fn entropy_of_observable(s: &QuantumState, c: &CoarseGraining) -> Result<f64> {
    Ok(s_obs(s, std::slice::from_ref(c))?.shannon)
}

/// Both sides of `S_O = ln dim − D_KL(p ‖ V/dim)`.
#[derive(Debug, Clone, Copy)]
pub struct KlCheck {
    pub s_obs: f64,
    pub ln_dim_minus_kl: f64,
    pub gap: f64,
}

pub fn kl_identity_check(s: &QuantumState, chain: &[CoarseGraining]) -> Result<KlCheck> {
    let table = ChainEvaluator::new(chain)?.evaluate(s)?;
    let so = EntropyValue::from_table(&table).value;
    let d = s.dim() as f64;
    let mut kl = 0.0;
    for (_, p, v) in table.iter() {
        if p > P_FLOOR {
            kl += p * (p / (v / d)).ln();
        }
    }
    let rhs = d.ln() - kl;
    Ok(KlCheck {
        s_obs: so,
        ln_dim_minus_kl: rhs,
        gap: (so - rhs).abs(),
    })
}

/// Factorised observational entropy prepared for one lattice and block layout.
#[derive(Debug, Clone)]
pub struct Foe {
    basis: FockBasis,
    blocks: BoxPartition,
    locals: Vec<LocalSpectrum>,
    evaluator: ChainEvaluator,
}

impl Foe {
    /// Block Hamiltonians are the chain restricted to each block, with no
    /// term crossing a block boundary.
    pub fn new(basis: &FockBasis, blocks: &BoxPartition, params: &ChainParams) -> Result<Self> {
        check_dim(basis.sites(), blocks.sites())?;
        let mut cache: HashMap<usize, LocalSpectrum> = HashMap::new();
        let mut locals = Vec::new();
        for b in blocks.boxes() {
            let w = b.end - b.start;
            if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(w) {
                e.insert(LocalSpectrum::chain(w, basis.particles(), params)?);
            }
            locals.push(cache[&w].clone());
        }
        let cg = factorized(&locals, basis)?;
        Ok(Self {
            basis: basis.clone(),
            blocks: blocks.clone(),
            locals,
            evaluator: ChainEvaluator::new(&[cg])?,
        })
    }

    pub fn coarse_graining(&self) -> &CoarseGraining {
        &self.evaluator.chain()[0]
    }

    pub fn local_spectra(&self) -> &[LocalSpectrum] {
        &self.locals
    }

    pub fn entropy(&self, s: &QuantumState) -> Result<EntropyValue> {
        self.evaluator.entropy(s)
    }

    /// Local diagonal entropies of the block-reduced states against the
    /// factorised entropy and the total correlation of the local energies.
    ///
    /// Block projectors span every particle sector sharing an energy. When a
    /// level is shared by several sectors its local volume exceeds the volume
    /// seen inside the fixed-`N` space, and the identity picks up a residual.
    pub fn decomposition(&self, s: &QuantumState) -> Result<LocalDecomposition> {
        let table = self.evaluator.evaluate(s)?;
        let s_foe = EntropyValue::from_table(&table).value;
        let mut marginals = Vec::new();
        let mut sum_local = 0.0;
        for (k, b) in self.blocks.boxes().iter().enumerate() {
            let reduced = partial_trace(s, &self.basis, b.clone())?;
            let local_cg = local_energy_coarse_graining(&self.locals[k]);
            let rho = QuantumState::Mixed(reduced.matrix);
            let t = ChainEvaluator::new(std::slice::from_ref(&local_cg))?.evaluate(&rho)?;
            sum_local += EntropyValue::from_table(&t).value;
            let mut p = HashMap::new();
            for (idx, pk, _) in t.iter() {
                if let Label::Energy(e) = local_cg.labels()[idx[0]] {
                    p.insert(e.to_bits(), pk);
                }
            }
            marginals.push(p);
        }
        let cg = self.coarse_graining();
        let mut correlation = 0.0;
        for (idx, p, _) in table.iter() {
            if p <= P_FLOOR {
                continue;
            }
            let Label::LocalEnergies(es) = &cg.labels()[idx[0]] else {
                return Err(domain("factorised coarse-graining lost its local-energy labels"));
            };
            let mut prod = 1.0;
            for (k, e) in es.iter().enumerate() {
                prod *= marginals[k].get(&e.to_bits()).copied().unwrap_or(0.0);
            }
            correlation += p * (p / prod).ln();
        }
        Ok(LocalDecomposition {
            sum_local,
            s_foe,
            total_correlation: correlation,
        })
    }
}

/// Eigenprojectors of a block Hamiltonian on the block's full Fock space
/// (all particle sectors), rows indexed by the block occupation bitstring.
pub fn local_energy_coarse_graining(local: &LocalSpectrum) -> CoarseGraining {
    let d = 1usize << local.sites();
    let mut frame = Mat::<f64>::zeros(d, d);
    let (ids, means) = local.energy_clusters();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); means.len()];
    let mut col = 0;
    for (n, sec) in local.sectors().iter().enumerate() {
        let u = sec.spectrum.vectors();
        for a in 0..sec.basis.dim() {
            for (i, &st) in sec.basis.states().iter().enumerate() {
                frame[(st as usize, col)] = u[(i, a)];
            }
            groups[ids[n][a]].push(col);
            col += 1;
        }
    }
    // sectors above the retained particle number are absent; fill them with
    // Fock columns in a group of their own so the frame stays complete
    let mut extra = Vec::new();
    for st in 0..d {
        if st.count_ones() as usize >= local.sectors().len() {
            frame[(st, col)] = 1.0;
            extra.push(col);
            col += 1;
        }
    }
    let mut labels: Vec<Label> = means.into_iter().map(Label::Energy).collect();
    if !extra.is_empty() {
        groups.push(extra);
        labels.push(Label::Whole);
    }
    CoarseGraining::new(Frame::Dense(std::sync::Arc::new(frame)), groups, labels)
        .expect("block eigenvectors form an orthonormal frame")
}

/// Both sides of `Σ_k S_diag(ρ_k) = S_F(ρ) + C(E_1, …, E_m)`.
#[derive(Debug, Clone, Copy)]
pub struct LocalDecomposition {
    pub sum_local: f64,
    pub s_foe: f64,
    pub total_correlation: f64,
}

impl LocalDecomposition {
    pub fn residual(&self) -> f64 {
        (self.sum_local - self.s_foe - self.total_correlation).abs()
    }
}

/// One-shot factorised entropy.
pub fn s_foe(s: &QuantumState, basis: &FockBasis, blocks: &BoxPartition, params: &ChainParams) -> Result<EntropyValue> {
    Foe::new(basis, blocks, params)?.entropy(s)
}

pub fn local_diagonal_decomposition(
    s: &QuantumState,
    basis: &FockBasis,
    blocks: &BoxPartition,
    params: &ChainParams,
) -> Result<LocalDecomposition> {
    Foe::new(basis, blocks, params)?.decomposition(s)
}

/// Position then energy: `S_O(C_X, C_H)`.
pub fn sxe_evaluator(basis: &FockBasis, part: &BoxPartition, spec: &Spectrum) -> Result<ChainEvaluator> {
    ChainEvaluator::new(&[
        CoarseGraining::positional(basis, part)?,
        CoarseGraining::from_observable(spec, spec.degeneracy_tol()),
    ])
}

pub fn s_xe(s: &QuantumState, basis: &FockBasis, part: &BoxPartition, spec: &Spectrum) -> Result<EntropyValue> {
    sxe_evaluator(basis, part, spec)?.entropy(s)
}

/// Binned energy then position: `S_O(C_{H,Δ}, C_X)`.
pub fn sex_evaluator(bins: usize, spec: &Spectrum, basis: &FockBasis, part: &BoxPartition) -> Result<ChainEvaluator> {
    ChainEvaluator::new(&[
        CoarseGraining::energy_binned(spec, bins)?,
        CoarseGraining::positional(basis, part)?,
    ])
}

pub fn s_ex(
    s: &QuantumState,
    bins: usize,
    spec: &Spectrum,
    basis: &FockBasis,
    part: &BoxPartition,
) -> Result<EntropyValue> {
    sex_evaluator(bins, spec, basis, part)?.entropy(s)
}

/// Time scale below which `S_O` cannot decrease for a state confined to one
/// macrostate: `(tr[(I − P_i) H ρ H] · (1 + tr P_i / min_{j≠i} tr P_j))^{-1/2}`.
/// Returns `+∞` when nothing leaks out of the macrostate.
pub fn short_time_bound(s0: &QuantumState, h: &Operator, c: &CoarseGraining) -> Result<f64> {
    check_dim(c.dim(), s0.dim())?;
    check_dim(h.dim(), s0.dim())?;
    let table = ChainEvaluator::new(std::slice::from_ref(c))?.evaluate(s0)?;
    let Some((k, _)) = table.probabilities().iter().enumerate().find(|(_, &p)| p > 1.0 - 1e-9) else {
        return Err(domain("initial state is not confined to a single macrostate"));
    };
    let i = table.index(k)[0];
    let cols = c.frame().columns(&c.groups()[i]);
    // tr[(I − P_i) H ρ H] = tr[H ρ H] − tr[P_i H ρ H]
    let leakage = match s0 {
        QuantumState::Pure(psi) => {
            let hpsi = linalg::real_matvec(h.matrix(), psi);
            let inside = linalg::real_t_matvec(cols.as_ref(), &hpsi);
            linalg::norm_sqr(&hpsi) - linalg::norm_sqr(&inside)
        }
        QuantumState::Mixed(rho) => {
            let hr = linalg::real_times_complex(h.matrix(), rho.as_ref());
            let hrh = linalg::complex_times_real(hr.as_ref(), h.matrix());
            let total: f64 = (0..hrh.nrows()).map(|a| hrh[(a, a)].re).sum();
            let fc = linalg::complex_times_real(hrh.as_ref(), cols.as_ref());
            let inside: f64 = (0..cols.ncols())
                .map(|b| (0..cols.nrows()).map(|a| cols[(a, b)] * fc[(a, b)].re).sum::<f64>())
                .sum();
            total - inside
        }
    };
    let scale = h.max_abs().powi(2).max(1e-300);
    let others = c.groups().iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g.len()).min();
    match others {
        Some(min_v) if leakage > 1e-13 * scale => {
            let vi = c.groups()[i].len() as f64;
            Ok((leakage * (1.0 + vi / min_v as f64)).powf(-0.5))
        }
        _ => Ok(f64::INFINITY),
    }
}

/// First-order gap between the canonical entropy and the factorised entropy
/// of the thermal state: `−2β² (⟨H H_int⟩ − ⟨H⟩⟨H_int⟩)` in the thermal state
/// of the full Hamiltonian, where `H_int` holds every cross-boundary term.
pub fn foe_thermal_correction(spec: &Spectrum, h_int: &Operator, beta: f64) -> Result<f64> {
    check_dim(spec.dim(), h_int.dim())?;
    let ens = ThermalEnsemble::new(spec.energies(), beta)?;
    let u = spec.vectors();
    let hu = h_int.matrix() * u;
    let diag: Vec<f64> = (0..spec.dim())
        .map(|k| (0..spec.dim()).map(|i| u[(i, k)] * hu[(i, k)]).sum())
        .collect();
    let mut eh = 0.0;
    let mut e = 0.0;
    let mut hh = 0.0;
    for k in 0..spec.dim() {
        let p = ens.probabilities[k];
        eh += p * spec.energies()[k] * diag[k];
        e += p * spec.energies()[k];
        hh += p * diag[k];
    }
    Ok(-2.0 * beta * beta * (eh - e * hh))
}

/// Von Neumann entropy of the leading `left_sites` sites, diagonalised one
/// particle sector at a time.
pub fn entanglement_entropy(s: &QuantumState, basis: &FockBasis, left_sites: usize) -> Result<f64> {
    let r = partial_trace_left(s, basis, left_sites)?;
    let mut total = 0.0;
    for n in 0..=left_sites {
        let idx = r.sector_indices(n);
        if idx.is_empty() {
            continue;
        }
        let block = Mat::<C64>::from_fn(idx.len(), idx.len(), |i, j| r.matrix[(idx[i], idx[j])]);
        total += von_neumann_entropy_of(block.as_ref())?;
    }
    Ok(total)
}

/// Shannon entropy of a probability vector.
pub fn shannon(p: &[f64]) -> f64 {
    -p.iter().map(|&x| xlogx(x)).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::embed_subsystem_state;
    use crate::operators::{build_chain_hamiltonian, build_full_hamiltonian, interaction_hamiltonian};
    use crate::spectra::{eigendecompose, solve_beta, thermal_state, von_neumann_entropy};

    fn random_state(d: usize, seed: u64) -> QuantumState {
        let mut x = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        QuantumState::pure_normalized((0..d).map(|_| C64::new(next(), next())).collect()).unwrap()
    }

    #[test]
    fn offsets_by_quadrature() {
        // E[x ln x] for x ~ Exp(1)
        let n = 400_000;
        let hi = 60.0;
        let h = hi / n as f64;
        let f = |x: f64| if x > 0.0 { x * x.ln() * (-x).exp() } else { 0.0 };
        let mut acc = f(0.0) + f(hi);
        for k in 1..n {
            acc += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert!((acc * h / 3.0 - COMPLEX_GAUSSIAN_LOG_MOMENT).abs() < 1e-7);
        // E[η² ln η²] for η standard normal
        let g = |e: f64| {
            let y = e * e;
            if y > 0.0 {
                y * y.ln() * (-0.5 * y).exp() / (2.0 * std::f64::consts::PI).sqrt()
            } else {
                0.0
            }
        };
        let (lo, hi) = (-40.0, 40.0);
        let h = (hi - lo) / n as f64;
        let mut acc = g(lo) + g(hi);
        for k in 1..n {
            acc += g(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert!((acc * h / 3.0 - REAL_GAUSSIAN_LOG_MOMENT).abs() < 1e-7);
        assert!((REAL_GAUSSIAN_LOG_MOMENT - 0.72963715).abs() < 1e-8);
        assert!((COMPLEX_GAUSSIAN_LOG_MOMENT - 0.422784336).abs() < 1e-9);
        assert!((REAL_GAUSSIAN_LOG_MOMENT - COMPLEX_GAUSSIAN_LOG_MOMENT - 0.3068528).abs() < 1e-7);
    }

    #[test]
    fn confined_state_gives_log_volume() {
        let b = FockBasis::new(6, 2).unwrap();
        let c = CoarseGraining::positional(&b, &BoxPartition::uniform(6, 3).unwrap()).unwrap();
        let g = &c.groups()[1];
        let mut v = vec![C64::new(0.0, 0.0); b.dim()];
        for (k, &a) in g.iter().enumerate() {
            v[a] = C64::new(1.0 + k as f64, -0.5);
        }
        let s = QuantumState::pure_normalized(v).unwrap();
        let e = s_obs(&s, std::slice::from_ref(&c)).unwrap();
        assert!((e.value - (g.len() as f64).ln()).abs() < 1e-12);
        assert!((e.shannon + e.mean_log_volume - e.value).abs() < 1e-14);
    }

    #[test]
    fn maximally_mixed_and_balanced_pure_reach_ln_dim() {
        let b = FockBasis::new(6, 3).unwrap();
        let h = build_full_hamiltonian(&b, &ChainParams::non_integrable()).unwrap();
        let spec = eigendecompose(&h).unwrap();
        let pos = CoarseGraining::positional(&b, &BoxPartition::uniform(6, 2).unwrap()).unwrap();
        let en = CoarseGraining::from_observable(&spec, spec.degeneracy_tol());
        let mm = QuantumState::maximally_mixed(b.dim());
        let ln_d = (b.dim() as f64).ln();
        for chain in [vec![pos.clone()], vec![pos.clone(), en.clone()], vec![en.clone(), pos.clone()]] {
            assert!((s_obs(&mm, &chain).unwrap().value - ln_d).abs() < 1e-10);
        }
        // Σ_i sqrt(V_i/dim) |ψ_i⟩ with |ψ_i⟩ normalised inside each macrostate
        let mut v = vec![C64::new(0.0, 0.0); b.dim()];
        for g in pos.groups() {
            let w = ((g.len() as f64) / b.dim() as f64).sqrt() / (g.len() as f64).sqrt();
            for &a in g {
                v[a] = C64::new(w, 0.0);
            }
        }
        let psi = QuantumState::pure(v).unwrap();
        assert!((s_obs(&psi, &[pos]).unwrap().value - ln_d).abs() < 1e-10);
    }

    #[test]
    fn coarse_grained_state_entropy() {
        let b = FockBasis::new(6, 2).unwrap();
        let h = build_full_hamiltonian(&b, &ChainParams::non_integrable()).unwrap();
        let c = CoarseGraining::from_operator(&h).unwrap();
        let pos = CoarseGraining::positional(&b, &BoxPartition::uniform(6, 3).unwrap()).unwrap();
        let s = random_state(b.dim(), 3);
        for cg in [&c, &pos, &CoarseGraining::trivial(b.dim())] {
            let rho = coarse_grained_state(&s, cg).unwrap();
            let so = s_obs(&s, std::slice::from_ref(cg)).unwrap().value;
            assert!((von_neumann_entropy(&rho).unwrap() - so).abs() < 1e-9);
        }
    }

    #[test]
    fn kl_and_observable_relations() {
        let b = FockBasis::new(6, 3).unwrap();
        let pos = CoarseGraining::positional(&b, &BoxPartition::uniform(6, 2).unwrap()).unwrap();
        let s = random_state(b.dim(), 9);
        let k = kl_identity_check(&s, std::slice::from_ref(&pos)).unwrap();
        assert!(k.gap < 1e-12);
        let mm = kl_identity_check(&QuantumState::maximally_mixed(b.dim()), std::slice::from_ref(&pos)).unwrap();
        assert!((mm.s_obs - (b.dim() as f64).ln()).abs() < 1e-12);
        let so = s_obs(&s, std::slice::from_ref(&pos)).unwrap();
        let sa = entropy_of_observable(&s, &pos).unwrap();
        assert!((sa - (so.value - so.mean_log_volume)).abs() < 1e-12);
        let det = entropy_of_observable(&QuantumState::basis_state(b.dim(), 0), &pos).unwrap();
        assert!(det.abs() < 1e-14);
    }

    #[test]
    fn diagonal_entropy_of_eigenstate() {
        let b = FockBasis::new(6, 3).unwrap();
        let spec = eigendecompose(&build_full_hamiltonian(&b, &ChainParams::non_integrable()).unwrap()).unwrap();
        assert!(diagonal_entropy(&spec.eigenstate(4).unwrap(), &spec).unwrap().value.abs() < 1e-10);
        let s = random_state(b.dim(), 1);
        let p = spec.populations(&s).unwrap();
        assert!((diagonal_entropy(&s, &spec).unwrap().value - shannon(&p)).abs() < 1e-10);
    }

    #[test]
    fn foe_of_local_eigenstate_product_is_zero() {
        let full = FockBasis::new(8, 4).unwrap();
        let sub = FockBasis::new(4, 4).unwrap();
        let p = ChainParams::non_integrable();
        let hs = build_chain_hamiltonian(&sub, 0..4, &p).unwrap();
        let v = eigendecompose(&hs).unwrap().eigenstate(0).unwrap();
        let emb = embed_subsystem_state(v.as_pure().unwrap(), &sub, &full).unwrap();
        let s = QuantumState::pure(emb).unwrap();
        let blocks = BoxPartition::uniform(8, 4).unwrap();
        assert!(s_foe(&s, &full, &blocks, &p).unwrap().value.abs() < 1e-9);
    }

    #[test]
    fn local_eigenstate_product_decomposes_to_zero() {
        let full = FockBasis::new(8, 4).unwrap();
        let half = FockBasis::new(4, 2).unwrap();
        let p = ChainParams::non_integrable();
        let spec = eigendecompose(&build_chain_hamiltonian(&half, 0..4, &p).unwrap()).unwrap();
        let (a, c) = (spec.vector(0), spec.vector(3));
        let map = crate::basis::merge_local_states(&half, &half, &full).unwrap();
        let mut v = vec![C64::new(0.0, 0.0); full.dim()];
        for ((l, r), i) in map.iter() {
            v[i] = C64::new(a[l] * c[r], 0.0);
        }
        let s = QuantumState::pure(v).unwrap();
        let blocks = BoxPartition::uniform(8, 4).unwrap();
        let d = local_diagonal_decomposition(&s, &full, &blocks, &p).unwrap();
        assert!(d.s_foe.abs() < 1e-9, "{d:?}");
        assert!(d.sum_local.abs() < 1e-9 && d.total_correlation.abs() < 1e-9, "{d:?}");
    }

    #[test]
    fn shared_level_across_sectors_leaves_residual() {
        // the empty right block shares its energy with another sector
        let full = FockBasis::new(8, 4).unwrap();
        let sub = FockBasis::new(4, 4).unwrap();
        let s = QuantumState::pure(embed_subsystem_state(&[C64::new(1.0, 0.0)], &sub, &full).unwrap()).unwrap();
        let d = local_diagonal_decomposition(&s, &full, &BoxPartition::uniform(8, 4).unwrap(), &ChainParams::non_integrable()).unwrap();
        assert!((d.residual() - 2f64.ln()).abs() < 1e-9, "{d:?}");
    }

    #[test]
    fn local_decomposition_identity() {
        let full = FockBasis::new(8, 3).unwrap();
        let p = ChainParams::non_integrable();
        let blocks = BoxPartition::uniform(8, 4).unwrap();
        let s = random_state(full.dim(), 5);
        let d = local_diagonal_decomposition(&s, &full, &blocks, &p).unwrap();
        assert!(d.residual() < 1e-9, "{d:?}");
        assert!(d.total_correlation >= -1e-12);
    }

    #[test]
    fn thermal_correction_trivial_cases() {
        let b = FockBasis::new(6, 3).unwrap();
        let spec = eigendecompose(&build_full_hamiltonian(&b, &ChainParams::non_integrable()).unwrap()).unwrap();
        assert_eq!(foe_thermal_correction(&spec, &Operator::zeros(b.dim()), 1.0).unwrap(), 0.0);
        assert!(foe_thermal_correction(&spec, &Operator::identity(b.dim()).scale(2.5), 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn thermal_correction_first_order() {
        let b = FockBasis::new(8, 4).unwrap();
        let p = ChainParams::integrable();
        let blocks = BoxPartition::uniform(8, 4).unwrap();
        let h = build_full_hamiltonian(&b, &p).unwrap();
        let spec = eigendecompose(&h).unwrap();
        let ens = crate::spectra::ThermalEnsemble::new(spec.energies(), 1.0).unwrap();
        let rho = thermal_state(&spec, &ens).unwrap();
        let sf = s_foe(&rho, &b, &blocks, &p).unwrap().value;
        let o = foe_thermal_correction(&spec, &interaction_hamiltonian(&b, &blocks, &p).unwrap(), 1.0).unwrap();
        assert!(o < 0.0);
        assert!(((ens.entropy() - sf) - o).abs() <= 0.5 * o.abs());
        let _ = solve_beta(&spec, ens.mean_energy).unwrap();
    }

    #[test]
    fn short_time_bound_cases() {
        let b = FockBasis::new(6, 2).unwrap();
        let h = build_full_hamiltonian(&b, &ChainParams::non_integrable()).unwrap();
        let spec = eigendecompose(&h).unwrap();
        let e = CoarseGraining::from_observable(&spec, spec.degeneracy_tol());
        let eig = spec.eigenstate(2).unwrap();
        assert_eq!(short_time_bound(&eig, &h, &e).unwrap(), f64::INFINITY);
        // two-level system H = σ_x, macrostates {|0⟩}, {|1⟩}: leakage 1, bound 1/√2
        let sx = Operator::new(Mat::from_fn(2, 2, |i, j| if i == j { 0.0 } else { 1.0 })).unwrap();
        let t = short_time_bound(&QuantumState::basis_state(2, 0), &sx, &CoarseGraining::fock(2)).unwrap();
        assert!((t - 0.5f64.sqrt()).abs() < 1e-14);
        let rho = QuantumState::mixed(QuantumState::basis_state(2, 0).density_matrix()).unwrap();
        assert!((short_time_bound(&rho, &sx, &CoarseGraining::fock(2)).unwrap() - t).abs() < 1e-14);
        let plus = QuantumState::pure_normalized(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        assert!(short_time_bound(&plus, &sx, &CoarseGraining::fock(2)).is_err());
    }

    #[test]
    fn entanglement_of_schmidt_pair() {
        let b = FockBasis::new(4, 2).unwrap();
        let mut v = vec![C64::new(0.0, 0.0); b.dim()];
        v[b.index_of(0b0011).unwrap()] = C64::new(0.6, 0.0);
        v[b.index_of(0b1100).unwrap()] = C64::new(0.0, 0.8);
        let s = QuantumState::pure(v).unwrap();
        let expect = -(0.36f64 * 0.36f64.ln() + 0.64 * 0.64f64.ln());
        assert!((entanglement_entropy(&s, &b, 2).unwrap() - expect).abs() < 1e-12);
    }
}
