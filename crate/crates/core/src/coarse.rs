//! Coarse-grainings stored as an orthonormal real frame plus a partition of
//! the frame's columns. Group `g` stands for the projector
//! `P_g = Σ_{a∈g} f_a f_aᵀ`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use faer::{Mat, MatRef};

use crate::basis::{signature_of, BoxPartition, FockBasis, Signature};
use crate::error::{check_dim, domain, Result};
use crate::linalg;
use crate::operators::{build_chain_hamiltonian, ChainParams, Operator, QuantumState};
use crate::spectra::{eigendecompose, level_groups, Spectrum, DEFAULT_DEGENERACY_REL_TOL};
use crate::C64;

/// Tolerance for the projector-algebra predicates.
pub const ALGEBRA_TOL: f64 = 1e-9;
/// Macrostates with probability at or below this are treated as empty.
pub const P_FLOOR: f64 = 1e-14;
/// Macrostates with volume below this are treated as absent.
pub const V_FLOOR: f64 = 1e-12;

/// Orthonormal basis in which every projector of a coarse-graining is diagonal.
#[derive(Debug, Clone)]
pub enum Frame {
    /// The computational (Fock) basis.
    Identity(usize),
    /// Columns of a real orthogonal matrix.
    Dense(Arc<Mat<f64>>),
}

impl Frame {
    pub fn dim(&self) -> usize {
        match self {
            Self::Identity(d) => *d,
            Self::Dense(m) => m.nrows(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Self::Identity(_))
    }

    /// True when both frames are the same object, so their groups can be
    /// compared as index sets.
    pub fn same_as(&self, other: &Frame) -> bool {
        match (self, other) {
            (Self::Identity(a), Self::Identity(b)) => a == b,
            (Self::Dense(a), Self::Dense(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        match self {
            Self::Identity(d) => Mat::identity(*d, *d),
            Self::Dense(m) => (**m).clone(),
        }
    }

    pub fn dense(&self) -> Option<MatRef<'_, f64>> {
        match self {
            Self::Identity(_) => None,
            Self::Dense(m) => Some(m.as_ref().as_ref()),
        }
    }

    /// Frame coordinates `Fᵀ v`.
    pub fn coords(&self, v: &[C64]) -> Vec<C64> {
        match self {
            Self::Identity(_) => v.to_vec(),
            Self::Dense(m) => linalg::real_t_matvec(m.as_ref().as_ref(), v),
        }
    }

    /// `Fᵀ A F` for a real symmetric `A`.
    pub fn conjugate(&self, a: MatRef<'_, f64>) -> Mat<f64> {
        match self {
            Self::Identity(_) => a.to_owned(),
            Self::Dense(m) => {
                let af = a * m.as_ref();
                m.transpose() * &af
            }
        }
    }

    /// Columns listed in `cols` as a `dim × |cols|` matrix.
    pub fn columns(&self, cols: &[usize]) -> Mat<f64> {
        match self {
            Self::Identity(d) => Mat::from_fn(*d, cols.len(), |i, j| if cols[j] == i { 1.0 } else { 0.0 }),
            Self::Dense(m) => Mat::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])]),
        }
    }
}

/// Human-readable identity of a macrostate.
#[derive(Debug, Clone, PartialEq)]
pub enum Label {
    Whole,
    Index(usize),
    Signature(Signature),
    Energy(f64),
    LocalEnergies(Vec<f64>),
    EnergyBin { index: usize, lo: f64, hi: f64 },
    Joint(Box<Label>, Box<Label>),
}

impl Label {
    fn rank(&self) -> u8 {
        match self {
            Self::Whole => 0,
            Self::Index(_) => 1,
            Self::Signature(_) => 2,
            Self::Energy(_) => 3,
            Self::LocalEnergies(_) => 4,
            Self::EnergyBin { .. } => 5,
            Self::Joint(..) => 6,
        }
    }

    /// Total order used to sort macrostates.
    pub fn total_cmp(&self, other: &Label) -> Ordering {
        fn slice_cmp(a: &[f64], b: &[f64]) -> Ordering {
            for (x, y) in a.iter().zip(b) {
                match x.total_cmp(y) {
                    Ordering::Equal => {}
                    o => return o,
                }
            }
            a.len().cmp(&b.len())
        }
        match (self, other) {
            (Self::Index(a), Self::Index(b)) => a.cmp(b),
            (Self::Signature(a), Self::Signature(b)) => a.0.cmp(&b.0),
            (Self::Energy(a), Self::Energy(b)) => a.total_cmp(b),
            (Self::LocalEnergies(a), Self::LocalEnergies(b)) => slice_cmp(a, b),
            (Self::EnergyBin { index: a, .. }, Self::EnergyBin { index: b, .. }) => a.cmp(b),
            (Self::Joint(a1, a2), Self::Joint(b1, b2)) => a1.total_cmp(b1).then_with(|| a2.total_cmp(b2)),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Whole => write!(f, "*"),
            Self::Index(i) => write!(f, "{i}"),
            Self::Signature(s) => write!(f, "{s}"),
            Self::Energy(e) => write!(f, "E={e:.12}"),
            Self::LocalEnergies(es) => {
                write!(f, "(")?;
                for (k, e) in es.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{e:.12}")?;
                }
                write!(f, ")")
            }
            Self::EnergyBin { index, lo, hi } => write!(f, "bin{index}[{lo:.12},{hi:.12}]"),
            Self::Joint(a, b) => write!(f, "{a}&{b}"),
        }
    }
}

/// A complete family of mutually orthogonal non-zero projectors.
#[derive(Debug, Clone)]
pub struct CoarseGraining {
    frame: Frame,
    groups: Vec<Vec<usize>>,
    labels: Vec<Label>,
}

impl CoarseGraining {
    /// Validates the partition and, for dense frames, orthonormality.
    pub fn new(frame: Frame, groups: Vec<Vec<usize>>, labels: Vec<Label>) -> Result<Self> {
        if let Some(m) = frame.dense() {
            if m.nrows() != m.ncols() {
                return Err(domain("frame must be square"));
            }
            let defect = linalg::orthonormality_defect(m);
            if defect > ALGEBRA_TOL {
                return Err(domain(format!("frame is not orthonormal (defect {defect:.3e})")));
            }
        }
        Self::checked_partition(frame, groups, labels)
    }

    fn checked_partition(frame: Frame, groups: Vec<Vec<usize>>, labels: Vec<Label>) -> Result<Self> {
        let d = frame.dim();
        if groups.len() != labels.len() {
            return Err(domain("one label per group is required"));
        }
        let mut seen = vec![false; d];
        for g in &groups {
            if g.is_empty() {
                return Err(domain("empty macrostate"));
            }
            for &a in g {
                if a >= d || seen[a] {
                    return Err(domain(format!("column {a} is out of range or repeated")));
                }
                seen[a] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(domain("groups do not cover every frame column"));
        }
        Ok(Self::sorted(frame, groups, labels))
    }

    /// Orders members ascending and groups by label.
    fn sorted(frame: Frame, groups: Vec<Vec<usize>>, labels: Vec<Label>) -> Self {
        let mut pairs: Vec<(Vec<usize>, Label)> = groups
            .into_iter()
            .zip(labels)
            .map(|(mut g, l)| {
                g.sort_unstable();
                (g, l)
            })
            .collect();
        pairs.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0[0].cmp(&b.0[0])));
        let (groups, labels) = pairs.into_iter().unzip();
        Self { frame, groups, labels }
    }

    /// The single-projector coarse-graining `{I}`.
    pub fn trivial(dim: usize) -> Self {
        Self {
            frame: Frame::Identity(dim),
            groups: vec![(0..dim).collect()],
            labels: vec![Label::Whole],
        }
    }

    /// Finest coarse-graining in the Fock basis: one projector per basis state.
    pub fn fock(dim: usize) -> Self {
        Self {
            frame: Frame::Identity(dim),
            groups: (0..dim).map(|a| vec![a]).collect(),
            labels: (0..dim).map(Label::Index).collect(),
        }
    }

    /// Eigenprojectors of an observable, degenerate levels merged within `tol`.
    pub fn from_observable(spec: &Spectrum, tol: f64) -> Self {
        let groups: Vec<Vec<usize>> = spec.level_groups(tol).into_iter().map(|r| r.collect()).collect();
        let labels = groups
            .iter()
            .map(|g| Label::Energy(g.iter().map(|&k| spec.energies()[k]).sum::<f64>() / g.len() as f64))
            .collect();
        Self::sorted(Frame::Dense(spec.vectors_arc()), groups, labels)
    }

    /// Diagonalises `op` and calls [`CoarseGraining::from_observable`] with the default tolerance.
    pub fn from_operator(op: &Operator) -> Result<Self> {
        let spec = eigendecompose(op)?;
        Ok(Self::from_observable(&spec, spec.degeneracy_tol()))
    }

    /// Fock states grouped by their box occupation counts.
    pub fn positional(basis: &FockBasis, part: &BoxPartition) -> Result<Self> {
        check_dim(basis.sites(), part.sites())?;
        let mut by_sig: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for (i, &s) in basis.states().iter().enumerate() {
            by_sig.entry(signature_of(s, part).0).or_default().push(i);
        }
        let (labels, groups) = by_sig
            .into_iter()
            .map(|(sig, g)| (Label::Signature(Signature(sig)), g))
            .unzip();
        Ok(Self::sorted(Frame::Identity(basis.dim()), groups, labels))
    }

    /// Eigenvalues split into `bins` equal-width bins over the spectral range;
    /// bins are half-open except the top one, and empty bins are dropped.
    pub fn energy_binned(spec: &Spectrum, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(domain("at least one energy bin is required"));
        }
        let e = spec.energies();
        let lo = e[0];
        let width = spec.range() / bins as f64;
        let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, &x) in e.iter().enumerate() {
            let b = if width > 0.0 {
                (((x - lo) / width).floor() as usize).min(bins - 1)
            } else {
                0
            };
            members.entry(b).or_default().push(k);
        }
        let (groups, labels) = members
            .into_iter()
            .map(|(b, g)| {
                let label = Label::EnergyBin {
                    index: b,
                    lo: lo + b as f64 * width,
                    hi: lo + (b + 1) as f64 * width,
                };
                (g, label)
            })
            .unzip();
        Ok(Self::sorted(Frame::Dense(spec.vectors_arc()), groups, labels))
    }

    /// Kronecker product on a tensor-product space, `self` as the slow index.
    pub fn product(&self, other: &CoarseGraining) -> Self {
        let (d1, d2) = (self.dim(), other.dim());
        let frame = match (&self.frame, &other.frame) {
            (Frame::Identity(_), Frame::Identity(_)) => Frame::Identity(d1 * d2),
            _ => {
                let a = self.frame.to_dense();
                let b = other.frame.to_dense();
                Frame::Dense(Arc::new(Mat::from_fn(d1 * d2, d1 * d2, |i, j| {
                    a[(i / d2, j / d2)] * b[(i % d2, j % d2)]
                })))
            }
        };
        let mut groups = Vec::new();
        let mut labels = Vec::new();
        for (g, lg) in self.groups.iter().zip(&self.labels) {
            for (h, lh) in other.groups.iter().zip(&other.labels) {
                groups.push(g.iter().flat_map(|&a| h.iter().map(move |&b| a * d2 + b)).collect());
                labels.push(Label::Joint(Box::new(lg.clone()), Box::new(lh.clone())));
            }
        }
        Self::sorted(frame, groups, labels)
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// `tr P_g` for every group.
    pub fn volumes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Group id of every frame column.
    pub fn group_of_columns(&self) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for (g, cols) in self.groups.iter().enumerate() {
            for &a in cols {
                out[a] = g;
            }
        }
        out
    }

    /// Explicit projector matrix of group `g`.
    pub fn projector(&self, g: usize) -> Mat<f64> {
        let f = self.frame.columns(&self.groups[g]);
        &f * f.transpose()
    }
}

/// Eigen-data of a block Hamiltonian in one particle-number sector.
#[derive(Debug, Clone)]
pub struct SectorSpectrum {
    pub basis: FockBasis,
    pub spectrum: Spectrum,
}

/// Sector-resolved spectrum of one block of sites.
#[derive(Debug, Clone)]
pub struct LocalSpectrum {
    sites: usize,
    sectors: Vec<SectorSpectrum>,
}

impl LocalSpectrum {
    /// Sectors `0..=max_particles` (capped at the block size) of the open chain on `sites` sites.
    pub fn chain(sites: usize, max_particles: usize, params: &ChainParams) -> Result<Self> {
        let mut sectors = Vec::new();
        for n in 0..=max_particles.min(sites) {
            let basis = FockBasis::new(sites, n)?;
            let h = build_chain_hamiltonian(&basis, 0..sites, params)?;
            sectors.push(SectorSpectrum {
                spectrum: eigendecompose(&h)?,
                basis,
            });
        }
        Self::from_sectors(sites, sectors)
    }

    /// Sector `n` must sit at position `n`.
    pub fn from_sectors(sites: usize, sectors: Vec<SectorSpectrum>) -> Result<Self> {
        for (n, s) in sectors.iter().enumerate() {
            if s.basis.sites() != sites || s.basis.particles() != n {
                return Err(domain(format!(
                    "sector {n} holds a basis with {} sites and {} particles",
                    s.basis.sites(),
                    s.basis.particles()
                )));
            }
            check_dim(s.basis.dim(), s.spectrum.dim())?;
        }
        Ok(Self { sites, sectors })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn sector(&self, n: usize) -> Option<&SectorSpectrum> {
        self.sectors.get(n)
    }

    pub fn sectors(&self) -> &[SectorSpectrum] {
        &self.sectors
    }

    /// Clusters of degenerate energies pooled over all sectors. Returns, per
    /// sector, the cluster id of each eigenvalue, and the mean energy of each cluster.
    pub fn energy_clusters(&self) -> (Vec<Vec<usize>>, Vec<f64>) {
        let mut all: Vec<(f64, usize, usize)> = Vec::new();
        for (n, s) in self.sectors.iter().enumerate() {
            for (k, &e) in s.spectrum.energies().iter().enumerate() {
                all.push((e, n, k));
            }
        }
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let energies: Vec<f64> = all.iter().map(|x| x.0).collect();
        let range = energies.last().copied().unwrap_or(0.0) - energies.first().copied().unwrap_or(0.0);
        let tol = DEFAULT_DEGENERACY_REL_TOL * if range > 0.0 { range } else { 1.0 };
        let mut ids: Vec<Vec<usize>> = self.sectors.iter().map(|s| vec![0; s.spectrum.dim()]).collect();
        let mut means = Vec::new();
        for (c, r) in level_groups(&energies, tol).into_iter().enumerate() {
            means.push(energies[r.clone()].iter().sum::<f64>() / r.len() as f64);
            for &(_, n, k) in &all[r] {
                ids[n][k] = c;
            }
        }
        (ids, means)
    }
}

/// Tensor products of local eigenvectors, grouped by the tuple of local energies.
///
/// Blocks are contiguous and laid out left to right in the order given. The
/// product of local occupation strings is the full string with each block
/// shifted to its offset; with modes ordered by site this carries no sign.
pub fn factorized(locals: &[LocalSpectrum], full: &FockBasis) -> Result<CoarseGraining> {
    if locals.is_empty() {
        return Err(domain("at least one block is required"));
    }
    let total: usize = locals.iter().map(|l| l.sites).sum();
    if total != full.sites() {
        return Err(domain(format!(
            "blocks cover {total} sites but the lattice has {}",
            full.sites()
        )));
    }
    let n = full.particles();
    for (k, l) in locals.iter().enumerate() {
        let need = n.min(l.sites);
        if l.sectors.len() <= need {
            return Err(domain(format!("block {k} lacks particle sector {need}")));
        }
    }
    let offsets: Vec<usize> = locals
        .iter()
        .scan(0, |acc, l| {
            let o = *acc;
            *acc += l.sites;
            Some(o)
        })
        .collect();
    let clusters: Vec<(Vec<Vec<usize>>, Vec<f64>)> = locals.iter().map(LocalSpectrum::energy_clusters).collect();

    let d = full.dim();
    let mut frame = Mat::<f64>::zeros(d, d);
    let mut by_key: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    let mut next_col = 0usize;
    for comp in compositions(n, &locals.iter().map(|l| l.sites).collect::<Vec<_>>()) {
        // Kronecker product of the local eigenvector matrices, block 0 slowest
        let mut rows: Vec<u32> = vec![0];
        let mut kron = Mat::<f64>::from_fn(1, 1, |_, _| 1.0);
        let mut keys: Vec<Vec<usize>> = vec![Vec::new()];
        for (k, &nk) in comp.iter().enumerate() {
            let sec = &locals[k].sectors[nk];
            let off = offsets[k];
            let ids = &clusters[k].0[nk];
            let u = sec.spectrum.vectors();
            let dk = sec.basis.dim();
            rows = rows
                .iter()
                .flat_map(|&r| sec.basis.states().iter().map(move |&s| r | (s << off)))
                .collect();
            let prev = kron;
            kron = Mat::from_fn(prev.nrows() * dk, prev.ncols() * dk, |i, j| {
                prev[(i / dk, j / dk)] * u[(i % dk, j % dk)]
            });
            keys = keys
                .iter()
                .flat_map(|key| {
                    (0..dk).map(move |a| {
                        let mut kk = key.clone();
                        kk.push(ids[a]);
                        kk
                    })
                })
                .collect();
        }
        let full_rows: Vec<usize> = rows
            .iter()
            .map(|&s| full.index_of(s).expect("merged state lies in the full basis"))
            .collect();
        for j in 0..kron.ncols() {
            for (i, &r) in full_rows.iter().enumerate() {
                frame[(r, next_col + j)] = kron[(i, j)];
            }
            by_key.entry(keys[j].clone()).or_default().push(next_col + j);
        }
        next_col += kron.ncols();
    }
    debug_assert_eq!(next_col, d);
    let (groups, labels) = by_key
        .into_iter()
        .map(|(key, g)| {
            let es = key.iter().enumerate().map(|(k, &c)| clusters[k].1[c]).collect();
            (g, Label::LocalEnergies(es))
        })
        .unzip();
    Ok(CoarseGraining::sorted(Frame::Dense(Arc::new(frame)), groups, labels))
}

/// Factorised coarse-graining of the chain for the given blocks.
pub fn factorized_chain(full: &FockBasis, blocks: &BoxPartition, params: &ChainParams) -> Result<CoarseGraining> {
    check_dim(full.sites(), blocks.sites())?;
    let mut cache: BTreeMap<usize, LocalSpectrum> = BTreeMap::new();
    let mut locals = Vec::new();
    for b in blocks.boxes() {
        let w = b.end - b.start;
        if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(w) {
            e.insert(LocalSpectrum::chain(w, full.particles(), params)?);
        }
        locals.push(cache[&w].clone());
    }
    factorized(&locals, full)
}

/// All `(n_0, …, n_{m−1})` with `Σ n_k = total` and `n_k ≤ caps[k]`, lexicographic.
fn compositions(total: usize, caps: &[usize]) -> Vec<Vec<usize>> {
    fn rec(rest: usize, caps: &[usize], cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if caps.is_empty() {
            if rest == 0 {
                out.push(cur.clone());
            }
            return;
        }
        let room: usize = caps[1..].iter().sum();
        for n in rest.saturating_sub(room)..=rest.min(caps[0]) {
            cur.push(n);
            rec(rest - n, &caps[1..], cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, caps, &mut Vec::new(), &mut out);
    out
}

/// Overlap `W = F1ᵀ F2` between two frames; `None` when the frames coincide.
fn overlap(f1: &Frame, f2: &Frame) -> Option<Mat<f64>> {
    if f1.same_as(f2) {
        return None;
    }
    Some(match (f1, f2) {
        (Frame::Identity(_), Frame::Identity(_)) => unreachable!(),
        (Frame::Identity(_), Frame::Dense(b)) => (**b).clone(),
        (Frame::Dense(a), Frame::Identity(_)) => a.transpose().to_owned(),
        (Frame::Dense(a), Frame::Dense(b)) => a.transpose() * b.as_ref(),
    })
}

/// Whether `fine` is finer than `coarse`: every projector of `coarse` is a
/// sum of projectors of `fine`.
pub fn is_finer(coarse: &CoarseGraining, fine: &CoarseGraining) -> Result<bool> {
    Ok(finer_defect(coarse, fine)? < ALGEBRA_TOL)
}

/// Largest `‖(I − P_g) P_h‖_F` over groups `h` of `fine`, `g` being the group
/// of `coarse` carrying most of `P_h`. Zero exactly when `fine` is finer.
pub fn finer_defect(coarse: &CoarseGraining, fine: &CoarseGraining) -> Result<f64> {
    check_dim(coarse.dim(), fine.dim())?;
    let gid = coarse.group_of_columns();
    let Some(w) = overlap(&coarse.frame, &fine.frame) else {
        let ok = fine.groups.iter().all(|h| h.iter().all(|&b| gid[b] == gid[h[0]]));
        return Ok(if ok { 0.0 } else { 1.0 });
    };
    let mut worst = 0.0f64;
    let mut mass = vec![0.0; coarse.len()];
    for h in &fine.groups {
        mass.iter_mut().for_each(|m| *m = 0.0);
        for &b in h {
            for a in 0..coarse.dim() {
                mass[gid[a]] += w[(a, b)] * w[(a, b)];
            }
        }
        let best = (0..mass.len()).max_by(|&x, &y| mass[x].total_cmp(&mass[y])).unwrap_or(0);
        let mut leak = 0.0;
        for &b in h {
            for a in 0..coarse.dim() {
                if gid[a] != best {
                    leak += w[(a, b)] * w[(a, b)];
                }
            }
        }
        worst = worst.max(leak.sqrt());
    }
    Ok(worst)
}

/// `max_{g,h} ‖[P_g, P_h]‖_F`.
pub fn commutator_norm(c1: &CoarseGraining, c2: &CoarseGraining) -> Result<f64> {
    check_dim(c1.dim(), c2.dim())?;
    let Some(w) = overlap(&c1.frame, &c2.frame) else {
        return Ok(0.0);
    };
    let gid = c1.group_of_columns();
    let d = c1.dim();
    let mut worst = 0.0f64;
    for h in &c2.groups {
        // in frame 1, P_h = B Bᵀ with B the columns h of W; the commutator with
        // the diagonal P_g only keeps the (g, not g) blocks of B Bᵀ
        for (g, gcols) in c1.groups.iter().enumerate() {
            let outside: Vec<usize> = (0..d).filter(|&a| gid[a] != g).collect();
            let a = Mat::<f64>::from_fn(gcols.len(), h.len(), |i, j| w[(gcols[i], h[j])]);
            let c = Mat::<f64>::from_fn(outside.len(), h.len(), |i, j| w[(outside[i], h[j])]);
            if a.norm_l2() * c.norm_l2() < 1e-14 {
                continue;
            }
            let off = &a * c.transpose();
            worst = worst.max(std::f64::consts::SQRT_2 * off.norm_l2());
        }
    }
    Ok(worst)
}

pub fn commutes(c1: &CoarseGraining, c2: &CoarseGraining) -> Result<bool> {
    Ok(commutator_norm(c1, c2)? < ALGEBRA_TOL)
}

/// Joint coarse-graining `{P_g P_h} \ {0}` of two commuting coarse-grainings.
pub fn joint(c1: &CoarseGraining, c2: &CoarseGraining) -> Result<CoarseGraining> {
    if !commutes(c1, c2)? {
        return Err(domain("coarse-grainings do not commute, so no joint coarse-graining exists"));
    }
    let mut groups = Vec::new();
    let mut labels = Vec::new();
    let Some(w) = overlap(&c1.frame, &c2.frame) else {
        let gid2 = c2.group_of_columns();
        for (g, lg) in c1.groups.iter().zip(&c1.labels) {
            let mut parts: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &a in g {
                parts.entry(gid2[a]).or_default().push(a);
            }
            for (h, cols) in parts {
                groups.push(cols);
                labels.push(Label::Joint(Box::new(lg.clone()), Box::new(c2.labels[h].clone())));
            }
        }
        return Ok(CoarseGraining::sorted(c1.frame.clone(), groups, labels));
    };
    let d = c1.dim();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    for (g, lg) in c1.groups.iter().zip(&c1.labels) {
        let fg = c1.frame.columns(g);
        for (h, lh) in c2.groups.iter().zip(&c2.labels) {
            let b = Mat::<f64>::from_fn(g.len(), h.len(), |i, j| w[(g[i], h[j])]);
            if b.norm_l2() < 1e-6 {
                continue;
            }
            // range of P_g P_h inside the g block: eigenvalue-one eigenvectors of B Bᵀ
            let bbt = &b * b.transpose();
            let (vals, vecs) = linalg::symmetric_eigen(bbt.as_ref())?;
            let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > 0.5).collect();
            if keep.is_empty() {
                continue;
            }
            let v = Mat::<f64>::from_fn(g.len(), keep.len(), |i, j| vecs[(i, keep[j])]);
            let newcols = &fg * &v;
            let start = cols.len();
            for j in 0..newcols.ncols() {
                cols.push((0..d).map(|i| newcols[(i, j)]).collect());
            }
            groups.push((start..cols.len()).collect());
            labels.push(Label::Joint(Box::new(lg.clone()), Box::new(lh.clone())));
        }
    }
    if cols.len() != d {
        return Err(domain(format!(
            "joint construction produced {} columns for dimension {d}",
            cols.len()
        )));
    }
    let frame = Mat::<f64>::from_fn(d, d, |i, j| cols[j][i]);
    CoarseGraining::new(Frame::Dense(Arc::new(frame)), groups, labels)
}

/// Probabilities and volumes of the multi-macrostates of an ordered chain.
#[derive(Debug, Clone)]
pub struct MacrostateTable {
    order: usize,
    indices: Vec<usize>,
    probabilities: Vec<f64>,
    volumes: Vec<f64>,
}

impl MacrostateTable {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn index(&self, k: usize) -> &[usize] {
        &self.indices[k * self.order..(k + 1) * self.order]
    }

    pub fn probability(&self, k: usize) -> f64 {
        self.probabilities[k]
    }

    pub fn volume(&self, k: usize) -> f64 {
        self.volumes[k]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// `(multi-index, p, V)` triples.
    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64, f64)> + '_ {
        (0..self.len()).map(move |k| (self.index(k), self.probabilities[k], self.volumes[k]))
    }

    pub fn total_probability(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    fn push(&mut self, idx: &[usize], p: f64, v: f64) {
        if p > P_FLOOR || v >= V_FLOOR {
            self.indices.extend_from_slice(idx);
            self.probabilities.push(p);
            self.volumes.push(v);
        }
    }
}

/// Coarse-graining chain prepared for repeated evaluation on many states.
/// Frame overlaps and multi-macrostate volumes are computed once.
#[derive(Debug, Clone)]
pub struct ChainEvaluator {
    chain: Vec<CoarseGraining>,
    plan: Plan,
}

#[derive(Debug, Clone)]
enum Plan {
    Single,
    Pair(PairPlan),
    General(GeneralPlan),
}

#[derive(Debug, Clone)]
struct PairPlan {
    /// Per first-chain group `g`, the rows `g` of `F1ᵀ F2`; `None` when the frames coincide.
    rows: Option<Vec<Mat<f64>>>,
    second_group: Vec<usize>,
    /// `(g, h, V_gh)` with `V_gh ≥ V_FLOOR`, lexicographic.
    volumes: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone)]
struct GeneralPlan {
    /// Frame columns of every group of every chain element; `None` for the identity frame.
    blocks: Vec<Vec<Option<Mat<f64>>>>,
    volumes: BTreeMap<Vec<usize>, f64>,
}

impl ChainEvaluator {
    pub fn new(chain: &[CoarseGraining]) -> Result<Self> {
        let first = chain.first().ok_or_else(|| domain("empty coarse-graining chain"))?;
        for c in chain {
            check_dim(first.dim(), c.dim())?;
        }
        let plan = match chain.len() {
            1 => Plan::Single,
            2 => Plan::Pair(Self::pair_plan(&chain[0], &chain[1])),
            _ => Plan::General(Self::general_plan(chain)),
        };
        Ok(Self {
            chain: chain.to_vec(),
            plan,
        })
    }

    fn pair_plan(c1: &CoarseGraining, c2: &CoarseGraining) -> PairPlan {
        let second_group = c2.group_of_columns();
        let mut volumes = Vec::new();
        let rows = match overlap(&c1.frame, &c2.frame) {
            None => {
                for (g, cols) in c1.groups.iter().enumerate() {
                    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
                    for &a in cols {
                        *counts.entry(second_group[a]).or_default() += 1;
                    }
                    volumes.extend(counts.into_iter().map(|(h, n)| (g, h, n as f64)));
                }
                None
            }
            Some(w) => {
                let d = c1.dim();
                let mut rows = Vec::with_capacity(c1.len());
                for (g, cols) in c1.groups.iter().enumerate() {
                    let wg = Mat::<f64>::from_fn(cols.len(), d, |i, b| w[(cols[i], b)]);
                    let mut v = vec![0.0; c2.len()];
                    for b in 0..d {
                        let mut s = 0.0;
                        for i in 0..cols.len() {
                            s += wg[(i, b)] * wg[(i, b)];
                        }
                        v[second_group[b]] += s;
                    }
                    volumes.extend(v.into_iter().enumerate().filter(|(_, x)| *x >= V_FLOOR).map(|(h, x)| (g, h, x)));
                    rows.push(wg);
                }
                Some(rows)
            }
        };
        PairPlan {
            rows,
            second_group,
            volumes,
        }
    }

    fn general_plan(chain: &[CoarseGraining]) -> GeneralPlan {
        let blocks: Vec<Vec<Option<Mat<f64>>>> = chain
            .iter()
            .map(|c| {
                c.groups
                    .iter()
                    .map(|g| (!c.frame.is_identity()).then(|| c.frame.columns(g)))
                    .collect()
            })
            .collect();
        let d = chain[0].dim();
        let mut volumes = BTreeMap::new();
        for k in 0..d {
            let mut e = vec![C64::new(0.0, 0.0); d];
            e[k] = C64::new(1.0, 0.0);
            descend(chain, &blocks, 0, &e, 1.0, &mut Vec::new(), &mut volumes);
        }
        GeneralPlan { blocks, volumes }
    }

    pub fn chain(&self) -> &[CoarseGraining] {
        &self.chain
    }

    pub fn dim(&self) -> usize {
        self.chain[0].dim()
    }

    /// Volumes of every stored multi-macrostate (state independent).
    pub fn volume_table(&self) -> Vec<(Vec<usize>, f64)> {
        match &self.plan {
            Plan::Single => self.chain[0].groups.iter().enumerate().map(|(g, c)| (vec![g], c.len() as f64)).collect(),
            Plan::Pair(p) => p.volumes.iter().map(|&(g, h, v)| (vec![g, h], v)).collect(),
            Plan::General(p) => p.volumes.iter().map(|(k, &v)| (k.clone(), v)).collect(),
        }
    }

    pub fn evaluate(&self, s: &QuantumState) -> Result<MacrostateTable> {
        check_dim(self.dim(), s.dim())?;
        let mut table = MacrostateTable {
            order: self.chain.len(),
            indices: Vec::new(),
            probabilities: Vec::new(),
            volumes: Vec::new(),
        };
        match &self.plan {
            Plan::Single => {
                let c = &self.chain[0];
                let weights = frame_populations(&c.frame, s);
                for (g, cols) in c.groups.iter().enumerate() {
                    let p = cols.iter().map(|&a| weights[a]).sum();
                    table.push(&[g], p, cols.len() as f64);
                }
            }
            Plan::Pair(plan) => self.evaluate_pair(plan, s, &mut table),
            Plan::General(plan) => {
                let mut probs = BTreeMap::new();
                for (w, v) in ensemble(s)? {
                    descend(&self.chain, &plan.blocks, 0, &v, w, &mut Vec::new(), &mut probs);
                }
                for (idx, &v) in &plan.volumes {
                    table.push(idx, probs.get(idx).copied().unwrap_or(0.0), v);
                }
            }
        }
        Ok(table)
    }

    fn evaluate_pair(&self, plan: &PairPlan, s: &QuantumState, table: &mut MacrostateTable) {
        let (c1, c2) = (&self.chain[0], &self.chain[1]);
        let mut p = vec![vec![0.0; c2.len()]; c1.len()];
        match (&plan.rows, s) {
            (None, _) => {
                let weights = frame_populations(&c1.frame, s);
                for (g, cols) in c1.groups.iter().enumerate() {
                    for &a in cols {
                        p[g][plan.second_group[a]] += weights[a];
                    }
                }
            }
            (Some(rows), QuantumState::Pure(psi)) => {
                let c = c1.frame.coords(psi);
                for (g, cols) in c1.groups.iter().enumerate() {
                    let cg: Vec<C64> = cols.iter().map(|&a| c[a]).collect();
                    let d = linalg::real_t_matvec(rows[g].as_ref(), &cg);
                    for (b, x) in d.iter().enumerate() {
                        p[g][plan.second_group[b]] += x.norm_sqr();
                    }
                }
            }
            (Some(rows), QuantumState::Mixed(_)) => {
                let r = c1.frame.conjugate(s.real_density().as_ref());
                for (g, cols) in c1.groups.iter().enumerate() {
                    let rgg = Mat::<f64>::from_fn(cols.len(), cols.len(), |i, j| r[(cols[i], cols[j])]);
                    let t = &rgg * &rows[g];
                    let wg = &rows[g];
                    for b in 0..wg.ncols() {
                        let mut acc = 0.0;
                        for i in 0..cols.len() {
                            acc += wg[(i, b)] * t[(i, b)];
                        }
                        p[g][plan.second_group[b]] += acc;
                    }
                }
            }
        }
        for &(g, h, v) in &plan.volumes {
            table.push(&[g, h], p[g][h], v);
        }
    }
}

impl ChainEvaluator {
    /// Table of `Σ_j w_j v_j v_jᵀ` for the real columns `v_j` of `vectors`.
    /// Eigenstate windows of a real Hamiltonian go through here in one batch.
    pub fn evaluate_real_mixture(&self, vectors: MatRef<'_, f64>, weights: &[f64]) -> Result<MacrostateTable> {
        check_dim(self.dim(), vectors.nrows())?;
        check_dim(vectors.ncols(), weights.len())?;
        let mut table = MacrostateTable {
            order: self.chain.len(),
            indices: Vec::new(),
            probabilities: Vec::new(),
            volumes: Vec::new(),
        };
        let c1 = &self.chain[0];
        let coords = match c1.frame.dense() {
            None => vectors.to_owned(),
            Some(f) => f.transpose() * vectors,
        };
        let row_weight = |m: &Mat<f64>, a: usize| -> f64 { weights.iter().enumerate().map(|(j, w)| w * m[(a, j)] * m[(a, j)]).sum() };
        match &self.plan {
            Plan::Single => {
                for (g, cols) in c1.groups.iter().enumerate() {
                    let p = cols.iter().map(|&a| row_weight(&coords, a)).sum();
                    table.push(&[g], p, cols.len() as f64);
                }
            }
            Plan::Pair(plan) => {
                let mut p = vec![vec![0.0; self.chain[1].len()]; c1.len()];
                for (g, cols) in c1.groups.iter().enumerate() {
                    match &plan.rows {
                        None => {
                            for &a in cols {
                                p[g][plan.second_group[a]] += row_weight(&coords, a);
                            }
                        }
                        Some(rows) => {
                            let cg = Mat::<f64>::from_fn(cols.len(), coords.ncols(), |i, j| coords[(cols[i], j)]);
                            let d = rows[g].transpose() * &cg;
                            for b in 0..d.nrows() {
                                p[g][plan.second_group[b]] += row_weight(&d, b);
                            }
                        }
                    }
                }
                for &(g, h, v) in &plan.volumes {
                    table.push(&[g, h], p[g][h], v);
                }
            }
            Plan::General(plan) => {
                let mut probs = BTreeMap::new();
                for (j, &w) in weights.iter().enumerate() {
                    let v: Vec<C64> = (0..vectors.nrows()).map(|i| C64::new(vectors[(i, j)], 0.0)).collect();
                    descend(&self.chain, &plan.blocks, 0, &v, w, &mut Vec::new(), &mut probs);
                }
                for (idx, &v) in &plan.volumes {
                    table.push(idx, probs.get(idx).copied().unwrap_or(0.0), v);
                }
            }
        }
        Ok(table)
    }
}

/// `⟨f_a|ρ|f_a⟩` for every frame column.
fn frame_populations(frame: &Frame, s: &QuantumState) -> Vec<f64> {
    match s {
        QuantumState::Pure(v) => frame.coords(v).iter().map(|c| c.norm_sqr()).collect(),
        QuantumState::Mixed(m) => match frame {
            Frame::Identity(d) => (0..*d).map(|i| m[(i, i)].re).collect(),
            Frame::Dense(f) => {
                let rf = &s.real_density() * f.as_ref();
                (0..f.ncols())
                    .map(|a| (0..f.nrows()).map(|i| f[(i, a)] * rf[(i, a)]).sum())
                    .collect()
            }
        },
    }
}

/// A pure state as itself, a mixed state as the eigen-ensemble of `Re ρ`.
/// Real projector products only see the real part of the density matrix.
fn ensemble(s: &QuantumState) -> Result<Vec<(f64, Vec<C64>)>> {
    match s {
        QuantumState::Pure(v) => Ok(vec![(1.0, v.clone())]),
        QuantumState::Mixed(_) => {
            let (vals, vecs) = linalg::symmetric_eigen(s.real_density().as_ref())?;
            Ok(vals
                .iter()
                .enumerate()
                .filter(|(_, &l)| l > 1e-16)
                .map(|(k, &l)| (l, (0..vecs.nrows()).map(|i| C64::new(vecs[(i, k)], 0.0)).collect()))
                .collect())
        }
    }
}

/// Accumulates `weight · ‖P_{i_n}⋯P_{i_1} v‖²` into `out` for every multi-index.
fn descend(
    chain: &[CoarseGraining],
    blocks: &[Vec<Option<Mat<f64>>>],
    level: usize,
    v: &[C64],
    weight: f64,
    idx: &mut Vec<usize>,
    out: &mut BTreeMap<Vec<usize>, f64>,
) {
    for (g, cols) in chain[level].groups.iter().enumerate() {
        let w: Vec<C64> = match &blocks[level][g] {
            None => {
                let mut w = vec![C64::new(0.0, 0.0); v.len()];
                for &a in cols {
                    w[a] = v[a];
                }
                w
            }
            Some(fg) => {
                let c = linalg::real_t_matvec(fg.as_ref(), v);
                linalg::real_matvec(fg.as_ref(), &c)
            }
        };
        let n2 = linalg::norm_sqr(&w) * weight;
        if n2 < 1e-30 {
            continue;
        }
        idx.push(g);
        if level + 1 == chain.len() {
            *out.entry(idx.clone()).or_insert(0.0) += n2;
        } else {
            descend(chain, blocks, level + 1, &w, weight, idx, out);
        }
        idx.pop();
    }
}

/// Probabilities and volumes of `s` under the ordered `chain`.
pub fn macrostate_table(s: &QuantumState, chain: &[CoarseGraining]) -> Result<MacrostateTable> {
    ChainEvaluator::new(chain)?.evaluate(s)
}

/// Literal test of whether the ordered `chain` is finer than `c`: for every
/// multi-index with `Q = P_{i_n}⋯P_{i_1} ≠ 0` some `P_j` of `c` satisfies `Q P_j = Q`.
/// Uses explicit projector matrices, so it is meant for small dimensions.
pub fn chain_is_finer_than(c: &CoarseGraining, chain: &[CoarseGraining]) -> Result<bool> {
    if chain.is_empty() {
        return Err(domain("empty coarse-graining chain"));
    }
    for x in chain {
        check_dim(c.dim(), x.dim())?;
    }
    let target: Vec<Mat<f64>> = (0..c.len()).map(|j| c.projector(j)).collect();
    let projectors: Vec<Vec<Mat<f64>>> = chain.iter().map(|x| (0..x.len()).map(|g| x.projector(g)).collect()).collect();
    fn rec(level: usize, q: Mat<f64>, projectors: &[Vec<Mat<f64>>], target: &[Mat<f64>]) -> bool {
        if q.norm_l2() < ALGEBRA_TOL {
            return true;
        }
        if level == projectors.len() {
            return target.iter().any(|pj| (&q * pj - &q).norm_l2() < ALGEBRA_TOL);
        }
        projectors[level].iter().all(|p| rec(level + 1, p * &q, projectors, target))
    }
    let d = c.dim();
    Ok(rec(0, Mat::identity(d, d), &projectors, &target))
}
