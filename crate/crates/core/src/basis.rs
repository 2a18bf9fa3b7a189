//! Fock bases of `N` spinless fermions on `L` sites.
//!
//! A basis state is an occupation bitstring: bit `s` is set iff site `s`
//! (0-based) is occupied. A bitstring denotes the product of creation
//! operators applied in ascending site order to the vacuum, so concatenating
//! a left block with a right block never introduces a permutation sign.

use std::ops::Range;

use crate::error::{domain, Error, Result};
use crate::C64;

/// Largest supported lattice; bitstrings are stored as `u32`.
pub const MAX_SITES: usize = 28;

/// Default cap on the Hilbert-space dimension for dense linear algebra.
pub const DEFAULT_MAX_DIM: usize = 20_000;

/// Binomial coefficient, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Ordered enumeration of all `N`-particle occupation bitstrings on `L` sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FockBasis {
    sites: usize,
    particles: usize,
    states: Vec<u32>,
}

impl FockBasis {
    /// Builds the basis with the default dimension cap.
    pub fn new(sites: usize, particles: usize) -> Result<Self> {
        Self::with_limit(sites, particles, DEFAULT_MAX_DIM)
    }

    pub fn with_limit(sites: usize, particles: usize, max_dim: usize) -> Result<Self> {
        if sites > MAX_SITES {
            return Err(domain(format!("{sites} sites exceeds the maximum of {MAX_SITES}")));
        }
        if particles > sites {
            return Err(domain(format!("{particles} particles do not fit on {sites} sites")));
        }
        let dim = binomial(sites, particles);
        if dim > max_dim as u64 {
            return Err(Error::Capacity {
                dim: dim.min(usize::MAX as u64) as usize,
                limit: max_dim,
            });
        }
        let mut states = Vec::with_capacity(dim as usize);
        if particles == 0 {
            states.push(0);
        } else {
            // Gosper's hack walks fixed-popcount words in ascending order.
            let limit: u64 = 1 << sites;
            let mut v: u64 = (1 << particles) - 1;
            while v < limit {
                states.push(v as u32);
                let t = v | (v - 1);
                let tz = v.trailing_zeros();
                v = (t + 1) | (((!t & (t + 1)) - 1) >> (tz + 1));
            }
        }
        debug_assert_eq!(states.len() as u64, dim);
        Ok(Self {
            sites,
            particles,
            states,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    /// Bitstrings in ascending integer order.
    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn state(&self, index: usize) -> u32 {
        self.states[index]
    }

    /// Position of `state` in the basis, or `None` if it is not a member.
    ///
    /// Ascending order of fixed-popcount words is colexicographic order, so the
    /// rank is given directly by the combinatorial number system.
    pub fn index_of(&self, state: u32) -> Option<usize> {
        if state.count_ones() as usize != self.particles
            || (self.sites < 32 && (state >> self.sites) != 0)
        {
            return None;
        }
        let mut rank = 0u64;
        let mut bits = state;
        let mut k = 1;
        while bits != 0 {
            let pos = bits.trailing_zeros() as usize;
            rank += binomial(pos, k);
            bits &= bits - 1;
            k += 1;
        }
        Some(rank as usize)
    }
}

/// Number of particles in each box of a [`BoxPartition`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Signature(pub Vec<usize>);

impl Signature {
    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

/// Ordered, disjoint, contiguous site ranges tiling `0..sites`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxPartition {
    sites: usize,
    boxes: Vec<Range<usize>>,
}

impl BoxPartition {
    /// `sites / width` boxes of equal width; uneven tails are rejected.
    pub fn uniform(sites: usize, width: usize) -> Result<Self> {
        if width == 0 || sites == 0 {
            return Err(domain("box width and site count must be positive"));
        }
        if !sites.is_multiple_of(width) {
            return Err(domain(format!(
                "box width {width} does not tile {sites} sites exactly"
            )));
        }
        let boxes = (0..sites / width)
            .map(|k| k * width..(k + 1) * width)
            .collect();
        Ok(Self { sites, boxes })
    }

    /// `count` equal boxes.
    pub fn equal_parts(sites: usize, count: usize) -> Result<Self> {
        if count == 0 || !sites.is_multiple_of(count) {
            return Err(domain(format!("{count} equal boxes do not tile {sites} sites")));
        }
        Self::uniform(sites, sites / count)
    }

    /// Boxes delimited by interior cut positions, e.g. `cuts = [8]` on 16 sites
    /// gives `0..8` and `8..16`.
    pub fn from_cuts(sites: usize, cuts: &[usize]) -> Result<Self> {
        let mut start = 0;
        let mut boxes = Vec::with_capacity(cuts.len() + 1);
        for &c in cuts {
            if c <= start || c >= sites {
                return Err(domain(format!("cut {c} is not strictly increasing inside 0..{sites}")));
            }
            boxes.push(start..c);
            start = c;
        }
        if start >= sites {
            return Err(domain("empty final box"));
        }
        boxes.push(start..sites);
        Ok(Self { sites, boxes })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn boxes(&self) -> &[Range<usize>] {
        &self.boxes
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Interior cut positions (inverse of [`BoxPartition::from_cuts`]).
    pub fn cuts(&self) -> Vec<usize> {
        self.boxes[1..].iter().map(|r| r.start).collect()
    }
}

pub(crate) fn range_mask(r: &Range<usize>) -> u32 {
    if r.end - r.start >= 32 {
        u32::MAX
    } else {
        ((1u32 << (r.end - r.start)) - 1) << r.start
    }
}

/// Per-box particle counts of `state`.
pub fn signature_of(state: u32, part: &BoxPartition) -> Signature {
    Signature(
        part.boxes
            .iter()
            .map(|r| (state & range_mask(r)).count_ones() as usize)
            .collect(),
    )
}

/// Embeds a state of the leading `sub.sites()` sites into a larger lattice with
/// the trailing sites empty.
pub fn embed_subsystem_state(v: &[C64], sub: &FockBasis, full: &FockBasis) -> Result<Vec<C64>> {
    if sub.particles != full.particles {
        return Err(domain(format!(
            "particle number mismatch: {} vs {}",
            sub.particles, full.particles
        )));
    }
    if sub.sites > full.sites {
        return Err(domain("subsystem is larger than the full lattice"));
    }
    crate::error::check_dim(sub.dim(), v.len())?;
    let mut out = vec![C64::new(0.0, 0.0); full.dim()];
    for (&s, &a) in sub.states.iter().zip(v) {
        let j = full.index_of(s).expect("leading-site bitstring is a member");
        out[j] = a;
    }
    Ok(out)
}

/// Map from `(left index, right index)` pairs to the full-basis index of the
/// concatenated bitstring (left block on the low sites).
#[derive(Debug, Clone)]
pub struct MergeMap {
    left_dim: usize,
    right_dim: usize,
    map: Vec<usize>,
}

impl MergeMap {
    pub fn get(&self, left: usize, right: usize) -> usize {
        self.map[left * self.right_dim + right]
    }

    pub fn left_dim(&self) -> usize {
        self.left_dim
    }

    pub fn right_dim(&self) -> usize {
        self.right_dim
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), usize)> + '_ {
        self.map
            .iter()
            .enumerate()
            .map(move |(k, &f)| ((k / self.right_dim, k % self.right_dim), f))
    }
}

pub fn merge_local_states(left: &FockBasis, right: &FockBasis, full: &FockBasis) -> Result<MergeMap> {
    if left.sites + right.sites != full.sites {
        return Err(domain(format!(
            "site counts {} + {} do not match {}",
            left.sites, right.sites, full.sites
        )));
    }
    if left.particles + right.particles != full.particles {
        return Err(domain(format!(
            "particle numbers {} + {} do not match {}",
            left.particles, right.particles, full.particles
        )));
    }
    let mut map = Vec::with_capacity(left.dim() * right.dim());
    for &l in &left.states {
        for &r in &right.states {
            let s = l | (r << left.sites);
            map.push(full.index_of(s).expect("merged bitstring is a member"));
        }
    }
    Ok(MergeMap {
        left_dim: left.dim(),
        right_dim: right.dim(),
        map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_of_sixteen_site_lattice() {
        assert_eq!(FockBasis::new(16, 4).unwrap().dim(), 1820);
    }

    #[test]
    fn vacuum_basis() {
        let b = FockBasis::new(3, 0).unwrap();
        assert_eq!(b.states(), &[0]);
    }

    #[test]
    fn small_enumeration_is_ascending() {
        let b = FockBasis::new(4, 2).unwrap();
        assert_eq!(b.states(), &[0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100]);
    }

    #[test]
    fn rank_matches_position() {
        for (l, n) in [(1, 1), (5, 2), (10, 5), (12, 3), (16, 4)] {
            let b = FockBasis::new(l, n).unwrap();
            for (i, &s) in b.states().iter().enumerate() {
                assert_eq!(b.index_of(s), Some(i));
            }
            assert_eq!(b.index_of(0b1), if n == 1 { Some(0) } else { None });
        }
    }

    #[test]
    fn too_many_particles() {
        assert!(matches!(FockBasis::new(3, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn capacity_guard() {
        assert!(matches!(
            FockBasis::with_limit(16, 8, 10_000),
            Err(Error::Capacity { dim: 12870, .. })
        ));
        assert!(FockBasis::new(28, 2).is_ok());
    }

    #[test]
    fn signatures() {
        // sites {1,4,5,7} in 1-based numbering
        let s = (1 << 0) | (1 << 3) | (1 << 4) | (1 << 6);
        let part = BoxPartition::uniform(9, 3).unwrap();
        assert_eq!(signature_of(s, &part), Signature(vec![1, 2, 1]));
        assert_eq!(signature_of(0, &part), Signature(vec![0, 0, 0]));
        let p16 = BoxPartition::uniform(16, 4).unwrap();
        assert_eq!(signature_of(0b1111, &p16), Signature(vec![4, 0, 0, 0]));
    }

    #[test]
    fn uneven_partition_rejected() {
        assert!(BoxPartition::uniform(10, 4).is_err());
        assert!(BoxPartition::from_cuts(8, &[4, 4]).is_err());
        let p = BoxPartition::from_cuts(8, &[3, 5]).unwrap();
        assert_eq!(p.boxes(), &[0..3, 3..5, 5..8]);
        assert_eq!(p.cuts(), vec![3, 5]);
    }

    #[test]
    fn signature_counts_sum_to_dimension() {
        use std::collections::BTreeMap;
        let b = FockBasis::new(12, 5).unwrap();
        let part = BoxPartition::uniform(12, 3).unwrap();
        let mut counts = BTreeMap::new();
        for &s in b.states() {
            let sig = signature_of(s, &part);
            assert_eq!(sig.total(), 5);
            *counts.entry(sig).or_insert(0u64) += 1;
        }
        assert_eq!(counts.values().sum::<u64>(), binomial(12, 5));
        // each signature class has product-of-binomials size
        for (sig, c) in counts {
            let expect: u64 = sig.0.iter().map(|&k| binomial(3, k)).product();
            assert_eq!(c, expect);
        }
    }

    #[test]
    fn embed_two_site_into_three() {
        let sub = FockBasis::new(2, 1).unwrap();
        let full = FockBasis::new(3, 1).unwrap();
        let v = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let e = embed_subsystem_state(&v, &sub, &full).unwrap();
        assert_eq!(e, vec![v[0], v[1], C64::new(0.0, 0.0)]);
    }

    #[test]
    fn embed_preserves_norm_and_support() {
        let sub = FockBasis::new(8, 4).unwrap();
        let full = FockBasis::new(16, 4).unwrap();
        let v: Vec<C64> = (0..sub.dim())
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 1.1).cos()))
            .collect();
        let e = embed_subsystem_state(&v, &sub, &full).unwrap();
        let n0: f64 = v.iter().map(|a| a.norm_sqr()).sum();
        let n1: f64 = e.iter().map(|a| a.norm_sqr()).sum();
        assert_eq!(n0, n1);
        for (i, a) in e.iter().enumerate() {
            if full.state(i) >> 8 != 0 {
                assert_eq!(*a, C64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn embed_rejects_particle_mismatch() {
        let sub = FockBasis::new(4, 1).unwrap();
        let full = FockBasis::new(8, 2).unwrap();
        let v = vec![C64::new(0.5, 0.0); 4];
        assert!(embed_subsystem_state(&v, &sub, &full).is_err());
    }

    #[test]
    fn merge_single_particles() {
        let l = FockBasis::new(2, 1).unwrap();
        let r = FockBasis::new(2, 1).unwrap();
        let f = FockBasis::new(4, 2).unwrap();
        let m = merge_local_states(&l, &r, &f).unwrap();
        assert_eq!(m.len(), 4);
        for ((li, ri), fi) in m.iter() {
            let s = f.state(fi);
            assert_eq!((s & 0b11).count_ones(), 1);
            assert_eq!(s & 0b11, l.state(li));
            assert_eq!(s >> 2, r.state(ri));
        }
    }

    #[test]
    fn merge_vacuum_with_full_block() {
        let l = FockBasis::new(2, 0).unwrap();
        let r = FockBasis::new(3, 3).unwrap();
        let f = FockBasis::new(5, 3).unwrap();
        let m = merge_local_states(&l, &r, &f).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(f.state(m.get(0, 0)), 0b11100);
    }

    #[test]
    fn merge_sectors_biject_onto_full_basis() {
        let (l1, l2, n) = (5, 4, 4);
        let full = FockBasis::new(l1 + l2, n).unwrap();
        let mut hit = vec![0u32; full.dim()];
        let mut total = 0u64;
        for n1 in 0..=n.min(l1) {
            let n2 = n - n1;
            if n2 > l2 {
                continue;
            }
            let a = FockBasis::new(l1, n1).unwrap();
            let b = FockBasis::new(l2, n2).unwrap();
            total += binomial(l1, n1) * binomial(l2, n2);
            for (_, f) in merge_local_states(&a, &b, &full).unwrap().iter() {
                hit[f] += 1;
            }
        }
        assert_eq!(total, binomial(l1 + l2, n));
        assert!(hit.iter().all(|&h| h == 1));
    }

    #[test]
    fn merge_rejects_site_mismatch() {
        let a = FockBasis::new(2, 1).unwrap();
        let f = FockBasis::new(5, 2).unwrap();
        assert!(merge_local_states(&a, &a, &f).is_err());
    }
}
