//! Randomised invariants of observational entropy on small Hilbert spaces.

use std::sync::Arc;

use faer::Mat;
use obsentropy::coarse::{macrostate_table, CoarseGraining, Frame, Label};
use obsentropy::entropy::s_obs;
use obsentropy::linalg::symmetric_eigen;
use obsentropy::operators::QuantumState;
use obsentropy::spectra::von_neumann_entropy;
use obsentropy::C64;
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn groups_from(assign: &[usize]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut seen: Vec<usize> = Vec::new();
    for (col, &a) in assign.iter().enumerate() {
        match seen.iter().position(|&s| s == a) {
            Some(k) => groups[k].push(col),
            None => {
                seen.push(a);
                groups.push(vec![col]);
            }
        }
    }
    groups
}

fn coarse(frame: Frame, assign: &[usize]) -> CoarseGraining {
    let groups = groups_from(assign);
    let labels = (0..groups.len()).map(Label::Index).collect();
    CoarseGraining::new(frame, groups, labels).unwrap()
}

fn frame(entries: &[f64], d: usize) -> Frame {
    let m = Mat::<f64>::from_fn(d, d, |i, j| entries[i.min(j) * d + i.max(j)]);
    Frame::Dense(Arc::new(symmetric_eigen(m.as_ref()).unwrap().1))
}

fn case() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, Vec<usize>, Vec<usize>, usize)> {
    (2usize..9).prop_flat_map(|d| {
        (
            Just(d),
            prop::collection::vec(-1.0f64..1.0, 2 * d * d),
            prop::collection::vec(-1.0f64..1.0, d * d),
            prop::collection::vec(0usize..4, d),
            prop::collection::vec(0usize..3, d),
            1usize..=d,
        )
    })
}

fn mixed_state(d: usize, raw: &[f64], rank: usize) -> QuantumState {
    let vectors: Vec<Vec<C64>> = (0..rank)
        .map(|r| (0..d).map(|i| C64::new(raw[2 * (r * d + i)], raw[2 * (r * d + i) + 1])).collect())
        .collect();
    let weights: Vec<f64> = (0..rank).map(|r| 1.0 + r as f64).collect();
    let total: f64 = weights.iter().sum();
    let normed: Vec<Vec<C64>> = vectors
        .iter()
        .map(|v| {
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1e-3);
            v.iter().map(|z| z / n).collect()
        })
        .collect();
    QuantumState::from_ensemble(&weights.iter().map(|w| w / total).collect::<Vec<_>>(), &normed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounded_by_von_neumann_and_log_dimension((d, raw, f, a, _b, rank) in case()) {
        let s = mixed_state(d, &raw, rank);
        let c = coarse(frame(&f, d), &a);
        let so = s_obs(&s, &[c]).unwrap().value;
        let svn = von_neumann_entropy(&s).unwrap();
        prop_assert!(svn <= so + TOL, "{svn} > {so}");
        prop_assert!(so <= (d as f64).ln() + TOL);
    }

    #[test]
    fn refining_never_raises_entropy((d, raw, f, a, b, rank) in case()) {
        let s = mixed_state(d, &raw, rank);
        let fr = frame(&f, d);
        let fine: Vec<usize> = a.iter().zip(&b).map(|(x, y)| 3 * x + y).collect();
        let s_coarse = s_obs(&s, &[coarse(fr.clone(), &a)]).unwrap().value;
        let s_fine = s_obs(&s, &[coarse(fr, &fine)]).unwrap().value;
        prop_assert!(s_fine <= s_coarse + TOL, "{s_fine} > {s_coarse}");
    }

    #[test]
    fn appending_a_coarse_graining_never_raises_entropy((d, raw, f, a, b, rank) in case()) {
        let s = mixed_state(d, &raw, rank);
        let c1 = coarse(Frame::Identity(d), &a);
        let c2 = coarse(frame(&f, d), &b);
        let one = s_obs(&s, std::slice::from_ref(&c1)).unwrap().value;
        let two = s_obs(&s, &[c1.clone(), c2.clone()]).unwrap().value;
        prop_assert!(two <= one + TOL, "{two} > {one}");
        let table = macrostate_table(&s, &[c1, c2]).unwrap();
        prop_assert!((table.total_probability() - 1.0).abs() < TOL);
        prop_assert!((table.total_volume() - d as f64).abs() < TOL);
    }

    #[test]
    fn fock_coarse_graining_of_a_fock_state_vanishes(d in 2usize..12, k in 0usize..12) {
        let s = QuantumState::basis_state(d, k % d);
        prop_assert!(s_obs(&s, &[CoarseGraining::fock(d)]).unwrap().value.abs() < TOL);
        let trivial = s_obs(&s, &[CoarseGraining::trivial(d)]).unwrap().value;
        prop_assert!((trivial - (d as f64).ln()).abs() < TOL);
    }
}
