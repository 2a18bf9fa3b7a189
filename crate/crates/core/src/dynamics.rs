//! Unitary evolution in the energy eigenbasis, hard-wall quenches and the
//! initial states used by the scenarios.

use std::ops::Range;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::basis::{embed_subsystem_state, FockBasis};
use crate::error::{check_dim, domain, Result};
use crate::linalg;
use crate::operators::{build_chain_hamiltonian, ChainParams, QuantumState};
use crate::spectra::{eigendecompose, Spectrum, ThermalEnsemble};
use crate::C64;

/// Seeded generator that keeps a log of what each batch of draws was for.
#[derive(Debug, Clone)]
pub struct ScenarioSeed {
    seed: u64,
    rng: ChaCha8Rng,
    log: Vec<DrawRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DrawRecord {
    pub purpose: String,
    pub count: usize,
}

impl ScenarioSeed {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            log: Vec::new(),
        }
    }

    /// Independent stream `stream` of the same seed, so that work items can
    /// draw in any order.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            seed,
            rng,
            log: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn log(&self) -> &[DrawRecord] {
        &self.log
    }

    fn record(&mut self, purpose: &str, count: usize) {
        self.log.push(DrawRecord {
            purpose: purpose.to_string(),
            count,
        });
    }

    /// `n` uniform draws from `[0, 1)`.
    pub fn uniform(&mut self, purpose: &str, n: usize) -> Vec<f64> {
        self.record(purpose, n);
        (0..n).map(|_| self.rng.random::<f64>()).collect()
    }

    /// `n` unit-modulus phases, uniform on `[0, 2π)`.
    pub fn phases(&mut self, purpose: &str, n: usize) -> Vec<C64> {
        self.uniform(purpose, n)
            .into_iter()
            .map(|u| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * u))
            .collect()
    }

    /// `n` points uniform on the complex unit disk.
    pub fn unit_disk(&mut self, purpose: &str, n: usize) -> Vec<C64> {
        let u = self.uniform(purpose, 2 * n);
        u.chunks(2)
            .map(|c| C64::from_polar(c[0].sqrt(), 2.0 * std::f64::consts::PI * c[1]))
            .collect()
    }
}

/// A state expressed in the eigenbasis of the evolving Hamiltonian.
#[derive(Debug, Clone)]
pub struct EvolutionContext {
    spectrum: Spectrum,
    coeffs: Coeffs,
}

#[derive(Debug, Clone)]
enum Coeffs {
    Pure(Vec<C64>),
    Mixed(Mat<C64>),
}

impl EvolutionContext {
    pub fn new(spectrum: &Spectrum, initial: &QuantumState) -> Result<Self> {
        check_dim(spectrum.dim(), initial.dim())?;
        let coeffs = match initial {
            QuantumState::Pure(v) => Coeffs::Pure(spectrum.to_eigenbasis(v)?),
            QuantumState::Mixed(m) => {
                let u = spectrum.vectors();
                let mu = linalg::complex_times_real(m.as_ref(), u);
                Coeffs::Mixed(linalg::real_times_complex(u.transpose(), mu.as_ref()))
            }
        };
        Ok(Self {
            spectrum: spectrum.clone(),
            coeffs,
        })
    }

    /// Context from eigenbasis amplitudes.
    pub fn from_coefficients(spectrum: &Spectrum, coeffs: Vec<C64>) -> Result<Self> {
        check_dim(spectrum.dim(), coeffs.len())?;
        Ok(Self {
            spectrum: spectrum.clone(),
            coeffs: Coeffs::Pure(coeffs),
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// Energy populations, which the evolution leaves unchanged.
    pub fn populations(&self) -> Vec<f64> {
        match &self.coeffs {
            Coeffs::Pure(c) => c.iter().map(|x| x.norm_sqr()).collect(),
            Coeffs::Mixed(m) => (0..m.nrows()).map(|k| m[(k, k)].re).collect(),
        }
    }

    pub fn mean_energy(&self) -> f64 {
        self.populations().iter().zip(self.spectrum.energies()).map(|(p, e)| p * e).sum()
    }

    /// Eigenbasis amplitudes `e^{−iE t} c_E` of a pure state.
    pub fn coefficients_at(&self, t: f64) -> Option<Vec<C64>> {
        match &self.coeffs {
            Coeffs::Pure(c) => Some(
                c.iter()
                    .zip(self.spectrum.energies())
                    .map(|(x, &e)| x * C64::from_polar(1.0, -e * t))
                    .collect(),
            ),
            Coeffs::Mixed(_) => None,
        }
    }

    /// `e^{−iHt} ρ e^{iHt}` in the original basis.
    pub fn evolve(&self, t: f64) -> QuantumState {
        let u = self.spectrum.vectors();
        match &self.coeffs {
            Coeffs::Pure(_) => {
                let c = self.coefficients_at(t).expect("pure coefficients");
                QuantumState::Pure(linalg::real_matvec(u, &c))
            }
            Coeffs::Mixed(m) => {
                let e = self.spectrum.energies();
                let ph: Vec<C64> = e.iter().map(|&x| C64::from_polar(1.0, -x * t)).collect();
                let rt = Mat::<C64>::from_fn(m.nrows(), m.ncols(), |j, k| ph[j] * m[(j, k)] * ph[k].conj());
                let left = linalg::real_times_complex(u, rt.as_ref());
                QuantumState::mixed_unchecked(linalg::complex_times_real(left.as_ref(), u.transpose()))
            }
        }
    }
}

/// Eigenstate `ordinal` (1-based, ascending energy) of the chain confined to
/// the leading `sub_sites` sites, embedded in `full`.
pub fn reduced_eigenstate(full: &FockBasis, sub_sites: usize, params: &ChainParams, ordinal: usize) -> Result<QuantumState> {
    let (sub, spec) = reduced_spectrum(full, sub_sites, params)?;
    if ordinal == 0 || ordinal > spec.dim() {
        return Err(domain(format!(
            "eigenstate ordinal {ordinal} outside 1..={}",
            spec.dim()
        )));
    }
    let v: Vec<C64> = spec.vector(ordinal - 1).into_iter().map(|x| C64::new(x, 0.0)).collect();
    QuantumState::pure(embed_subsystem_state(&v, &sub, full)?)
}

/// Basis and spectrum of the chain confined to the leading `sub_sites` sites.
pub fn reduced_spectrum(full: &FockBasis, sub_sites: usize, params: &ChainParams) -> Result<(FockBasis, Spectrum)> {
    if sub_sites == 0 || sub_sites > full.sites() {
        return Err(domain(format!("sub-lattice of {sub_sites} sites does not fit in {}", full.sites())));
    }
    let sub = FockBasis::new(sub_sites, full.particles())?;
    let h = build_chain_hamiltonian(&sub, 0..sub_sites, params)?;
    let spec = eigendecompose(&h)?;
    Ok((sub, spec))
}

/// `Σ_E d_E |E⟩` with `|d_E|² = e^{−βE}/Z` and independent uniform phases.
pub fn pure_thermal_state(spec: &Spectrum, beta: f64, seed: &mut ScenarioSeed) -> Result<QuantumState> {
    let ens = ThermalEnsemble::new(spec.energies(), beta)?;
    let phases = seed.phases("pure thermal phases", spec.dim());
    let d: Vec<C64> = ens.probabilities.iter().zip(&phases).map(|(p, z)| z * p.sqrt()).collect();
    QuantumState::pure_normalized(spec.from_eigenbasis(&d)?)
}

/// Indices of the `k` consecutive eigenstates centred on `center`.
pub fn window(dim: usize, center: usize, k: usize) -> Result<Range<usize>> {
    if k == 0 {
        return Err(domain("window must hold at least one eigenstate"));
    }
    let start = center
        .checked_sub(k / 2)
        .ok_or_else(|| domain(format!("window of {k} around {center} starts below 0")))?;
    if start + k > dim {
        return Err(domain(format!("window of {k} around {center} overflows dimension {dim}")));
    }
    Ok(start..start + k)
}

/// Superposition of `k` neighbouring eigenstates with amplitudes uniform on
/// the complex unit disk, normalised.
pub fn ps_state(spec: &Spectrum, center: usize, k: usize, seed: &mut ScenarioSeed) -> Result<QuantumState> {
    let w = window(spec.dim(), center, k)?;
    let amps = seed.unit_disk("superposition amplitudes", k);
    let mut c = vec![C64::new(0.0, 0.0); spec.dim()];
    for (j, a) in w.zip(amps) {
        c[j] = a;
    }
    QuantumState::pure_normalized(spec.from_eigenbasis(&c)?)
}

/// Equal-weight mixture of `k` neighbouring eigenstates.
pub fn microcanonical_mixture(spec: &Spectrum, center: usize, k: usize) -> Result<QuantumState> {
    let w = window(spec.dim(), center, k)?;
    let mut weights = vec![0.0; spec.dim()];
    for j in w {
        weights[j] = 1.0 / k as f64;
    }
    let m = spec.weighted_projector_sum(&weights)?;
    Ok(QuantumState::mixed_unchecked(linalg::to_complex(m.as_ref())))
}

/// Hard-wall expansion: a state on the leading sites evolves under the
/// confined Hamiltonian until `switch_time`, is then embedded in the full
/// lattice and evolves under the full Hamiltonian.
#[derive(Debug, Clone)]
pub struct Quench {
    switch_time: f64,
    before: EvolutionContext,
    after: EvolutionContext,
    sub: FockBasis,
    full: FockBasis,
}

/// State along a quench, on the confined or the full lattice.
#[derive(Debug, Clone)]
pub enum QuenchState {
    Before(QuantumState),
    After(QuantumState),
}

impl Quench {
    pub fn new(
        initial: &QuantumState,
        sub: &FockBasis,
        sub_spectrum: &Spectrum,
        full: &FockBasis,
        full_spectrum: &Spectrum,
        switch_time: f64,
    ) -> Result<Self> {
        check_dim(sub.dim(), initial.dim())?;
        check_dim(full.dim(), full_spectrum.dim())?;
        if !(switch_time >= 0.0) {
            return Err(domain("switch time must be non-negative"));
        }
        let before = EvolutionContext::new(sub_spectrum, initial)?;
        let at_switch = before.evolve(switch_time);
        let QuantumState::Pure(v) = at_switch else {
            return Err(domain("quenches are defined for pure states"));
        };
        let embedded = QuantumState::pure_normalized(embed_subsystem_state(&v, sub, full)?)?;
        let after = EvolutionContext::new(full_spectrum, &embedded)?;
        Ok(Self {
            switch_time,
            before,
            after,
            sub: sub.clone(),
            full: full.clone(),
        })
    }

    pub fn switch_time(&self) -> f64 {
        self.switch_time
    }

    pub fn sub_basis(&self) -> &FockBasis {
        &self.sub
    }

    pub fn full_basis(&self) -> &FockBasis {
        &self.full
    }

    pub fn before(&self) -> &EvolutionContext {
        &self.before
    }

    pub fn after(&self) -> &EvolutionContext {
        &self.after
    }

    pub fn state_at(&self, t: f64) -> QuenchState {
        if t < self.switch_time {
            QuenchState::Before(self.before.evolve(t))
        } else {
            QuenchState::After(self.after.evolve(t - self.switch_time))
        }
    }
}

/// Expansion at `t = 0`: embed and evolve under the full Hamiltonian.
pub fn quench(
    pre_state: &QuantumState,
    sub: &FockBasis,
    full: &FockBasis,
    full_spectrum: &Spectrum,
    times: &[f64],
) -> Result<Vec<QuantumState>> {
    let QuantumState::Pure(v) = pre_state else {
        return Err(domain("quenches are defined for pure states"));
    };
    let embedded = QuantumState::pure(embed_subsystem_state(v, sub, full)?)?;
    let ctx = EvolutionContext::new(full_spectrum, &embedded)?;
    Ok(times.iter().map(|&t| ctx.evolve(t)).collect())
}

/// `points` evenly spaced times from 0 to `t_max` inclusive.
pub fn time_grid(t_max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|k| t_max * k as f64 / (points - 1) as f64).collect(),
    }
}
