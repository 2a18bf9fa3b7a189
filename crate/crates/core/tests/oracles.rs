//! Independent oracles: a matrix-free second-quantised Lanczos ground state,
//! free-fermion spectra and the density-of-states normalisation.

use std::collections::HashMap;

use faer::Mat;
use obsentropy::basis::{binomial, BoxPartition, FockBasis};
use obsentropy::dynamics::reduced_eigenstate;
use obsentropy::linalg::symmetric_eigen;
use obsentropy::operators::{build_full_hamiltonian, ChainParams};
use obsentropy::spectra::{density_of_states, eigendecompose, KernelWidth};

/// `H v` applied term by term with fermionic signs from explicit operator strings.
fn apply_second_quantised(states: &[u32], index: &HashMap<u32, usize>, sites: usize, p: &ChainParams, v: &[f64]) -> Vec<f64> {
    let sign_below = |s: u32, k: usize| if (s & ((1u32 << k) - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut out = vec![0.0; v.len()];
    for (col, &s) in states.iter().enumerate() {
        for i in 0..sites {
            for (dist, hop, int) in [(1, p.t, p.v), (2, p.t_prime, p.v_prime)] {
                let j = i + dist;
                if j >= sites {
                    continue;
                }
                let (ni, nj) = ((s >> i) & 1, (s >> j) & 1);
                out[col] += int * (ni * nj) as f64 * v[col];
                for (a, b) in [(i, j), (j, i)] {
                    if (s >> b) & 1 == 1 && (s >> a) & 1 == 0 {
                        let s1 = s ^ (1 << b);
                        let g = sign_below(s, b) * sign_below(s1, a);
                        let row = index[&(s1 | (1 << a))];
                        out[row] += -hop * g * v[col];
                    }
                }
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lowest Ritz value of a fully reorthogonalised Lanczos run.
fn lanczos_ground(apply: impl Fn(&[f64]) -> Vec<f64>, dim: usize, steps: usize) -> f64 {
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut v: Vec<f64> = (0..dim).map(|k| ((k * 7919 % 1013) as f64 / 1013.0) - 0.37).collect();
    let n = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    for _ in 0..steps {
        let mut w = apply(&v);
        let a = dot(&w, &v);
        alpha.push(a);
        q.push(v.clone());
        for _ in 0..2 {
            for qk in &q {
                let c = dot(&w, qk);
                w.iter_mut().zip(qk).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = dot(&w, &w).sqrt();
        if b < 1e-12 {
            break;
        }
        beta.push(b);
        v = w.into_iter().map(|x| x / b).collect();
    }
    let m = alpha.len();
    let t = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j || j + 1 == i {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    symmetric_eigen(t.as_ref()).unwrap().0[0]
}

#[test]
fn lanczos_ground_state_matches_dense_at_sixteen_sites() {
    let basis = FockBasis::new(16, 4).unwrap();
    let index: HashMap<u32, usize> = basis.states().iter().enumerate().map(|(k, &s)| (s, k)).collect();
    for p in [ChainParams::non_integrable(), ChainParams::integrable()] {
        let dense = eigendecompose(&build_full_hamiltonian(&basis, &p).unwrap()).unwrap();
        let e0 = lanczos_ground(|v| apply_second_quantised(basis.states(), &index, 16, &p, v), basis.dim(), 160);
        assert!((e0 - dense.energies()[0]).abs() < 1e-8, "{e0} vs {}", dense.energies()[0]);
    }
}

/// Single-particle hopping matrix with nearest and next-nearest terms.
fn single_particle(sites: usize, t: f64, t_prime: f64) -> Vec<f64> {
    let h = Mat::<f64>::from_fn(sites, sites, |i, j| match i.abs_diff(j) {
        1 => -t,
        2 => -t_prime,
        _ => 0.0,
    });
    symmetric_eigen(h.as_ref()).unwrap().0
}

fn subset_sums(levels: &[f64], n: usize) -> Vec<f64> {
    fn rec(levels: &[f64], n: usize, start: usize, acc: f64, out: &mut Vec<f64>) {
        if n == 0 {
            out.push(acc);
            return;
        }
        for k in start..levels.len() {
            rec(levels, n - 1, k + 1, acc + levels[k], out);
        }
    }
    let mut out = Vec::new();
    rec(levels, n, 0, 0.0, &mut out);
    out.sort_by(f64::total_cmp);
    out
}

#[test]
fn free_fermion_spectrum_is_sums_of_single_particle_levels() {
    for (l, n, tp) in [(10, 3, 0.0), (10, 4, 0.96), (9, 5, -0.5)] {
        let p = ChainParams::new(1.0, 0.0, tp, 0.0).unwrap();
        let basis = FockBasis::new(l, n).unwrap();
        let spec = eigendecompose(&build_full_hamiltonian(&basis, &p).unwrap()).unwrap();
        let expected = subset_sums(&single_particle(l, 1.0, tp), n);
        assert_eq!(expected.len(), spec.dim());
        for (a, b) in spec.energies().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10, "L={l} N={n}: {a} vs {b}");
        }
    }
}

#[test]
fn first_reduced_eigenstate_is_the_free_fermion_filling() {
    let p = ChainParams::new(1.0, 0.0, 0.0, 0.0).unwrap();
    let full = FockBasis::new(12, 3).unwrap();
    let psi = reduced_eigenstate(&full, 6, &p, 1).unwrap();
    let h = build_full_hamiltonian(&full, &p).unwrap();
    let e = obsentropy::operators::expectation(&h, &psi).unwrap();
    let filling: f64 = single_particle(6, 1.0, 0.0)[..3].iter().sum();
    assert!((e - filling).abs() < 1e-10);
    let right = BoxPartition::from_cuts(12, &[6]).unwrap();
    let v = psi.as_pure().unwrap();
    for (k, &s) in full.states().iter().enumerate() {
        if s >> right.boxes()[1].start != 0 {
            assert_eq!(v[k].norm(), 0.0);
        }
    }
}

#[test]
fn density_of_states_integrates_to_dimension() {
    let basis = FockBasis::new(16, 4).unwrap();
    let spec = eigendecompose(&build_full_hamiltonian(&basis, &ChainParams::non_integrable()).unwrap()).unwrap();
    let (lo, hi) = (spec.energies()[0] - 3.0, spec.energies()[spec.dim() - 1] + 3.0);
    let steps = 6000;
    let h = (hi - lo) / steps as f64;
    let total: f64 = (0..=steps)
        .map(|k| {
            let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
            w * density_of_states(&spec, lo + k as f64 * h, KernelWidth::Fixed(0.2)).unwrap()
        })
        .sum::<f64>()
        * h;
    assert_eq!(binomial(16, 4), 1820);
    assert!((total - 1820.0).abs() < 1e-6 * 1820.0, "{total}");
}
