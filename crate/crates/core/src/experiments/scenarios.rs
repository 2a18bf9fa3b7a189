//! Scenario registry, default configurations and the scenario runners.

use toml::Value;

use super::config::Config;
use super::output::{format_float, Table};
use super::suite::{self, SuiteReport};
use super::{par_map, provenance};
use crate::basis::{binomial, BoxPartition, FockBasis, MAX_SITES};
use crate::coarse::{ChainEvaluator, CoarseGraining};
use crate::dynamics::{
    pure_thermal_state, ps_state, reduced_eigenstate, time_grid, window, EvolutionContext, Quench, QuenchState, ScenarioSeed,
};
use crate::entropy::{
    diagonal_entropy, entanglement_entropy, sex_evaluator, sxe_evaluator, Foe, COMPLEX_GAUSSIAN_LOG_MOMENT, REAL_GAUSSIAN_LOG_MOMENT,
};
use crate::error::Result;
use crate::linalg::norm_sqr;
use crate::operators::{build_chain_hamiltonian, build_full_hamiltonian, expectation, ChainParams, Operator, QuantumState};
use crate::spectra::{
    canonical_entropy, eigendecompose, microcanonical_entropy, solve_beta, KernelWidth, Spectrum,
};

/// A runnable scenario and its default configuration.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioInfo {
    pub id: &'static str,
    pub summary: &'static str,
}

pub const SCENARIOS: [ScenarioInfo; 7] = [
    ScenarioInfo {
        id: "expansion",
        summary: "Free expansion after the right wall moves out; positional entropy over time.",
    },
    ScenarioInfo {
        id: "eigenstate_quench",
        summary: "Reduced-Hamiltonian eigenstate released into the full chain; S_F and S_xE over time.",
    },
    ScenarioInfo {
        id: "entanglement",
        summary: "Same quench as eigenstate_quench; entanglement entropy across a cut over time.",
    },
    ScenarioInfo {
        id: "pure_thermal",
        summary: "Pure thermal state on the confined chain, wall moved out at the switch time; S_F and S_xE.",
    },
    ScenarioInfo {
        id: "entropy_vs_energy",
        summary: "S_F and S_xE of eigenstates, superpositions and microcanonical mixtures against energy.",
    },
    ScenarioInfo {
        id: "s_ex_bins",
        summary: "Energy-binned-then-position entropy for several bin counts during the quench.",
    },
    ScenarioInfo {
        id: "property_suite",
        summary: "Randomised checks of the observational-entropy theorems and identities.",
    },
];

pub fn scenario(id: &str) -> Result<&'static ScenarioInfo> {
    SCENARIOS.iter().find(|s| s.id == id).ok_or_else(|| crate::Error::Config {
        path: "scenario".into(),
        msg: format!(
            "unknown scenario `{id}`; expected one of {}",
            SCENARIOS.iter().map(|s| s.id).collect::<Vec<_>>().join(", ")
        ),
    })
}

fn model_section(sites: usize, particles: usize, preset: &str) -> String {
    format!(
        "[model]\nsites = {sites}\nparticles = {particles}\npreset = \"{preset}\"\nt = 1.0\nv = 1.0\nt_prime = 0.96\nv_prime = 0.96\nmax_dim = 20000\n"
    )
}

const QUENCH_INITIAL: &str = "[initial]\nsub_sites = 8\neigenstate = 11\nindex_base = 1\n";

/// Default configuration of `id` as TOML text.
pub fn default_config_text(id: &str) -> Result<String> {
    scenario(id)?;
    let body = match id {
        "expansion" => format!(
            "{}[coarse]\nblocks = 4\n{QUENCH_INITIAL}bitstring = \"\"\n[time]\nt_max = 200.0\npoints = 400\naverage_from = 100.0\n",
            model_section(16, 4, "non_integrable")
        ),
        "eigenstate_quench" => format!(
            "{}[coarse]\nblocks = 2\n{QUENCH_INITIAL}[time]\nt_max = 60.0\npoints = 241\naverage_from = 30.0\n",
            model_section(16, 4, "non_integrable")
        ),
        "entanglement" => format!(
            "{}[entanglement]\ncut = 8\n{QUENCH_INITIAL}[time]\nt_max = 60.0\npoints = 241\naverage_from = 30.0\n",
            model_section(16, 4, "non_integrable")
        ),
        "pure_thermal" => format!(
            "{}[coarse]\nblocks = 4\n[initial]\nsub_sites = 8\nbeta = 1.0\n[time]\nt_max = 120.0\npoints = 481\nswitch = 30.0\naverage_from = 60.0\n[run]\nseed = 1\n",
            model_section(16, 4, "non_integrable")
        ),
        "entropy_vs_energy" => format!(
            "{}[coarse]\nblocks = 4\n[window]\nk = 30\ncenters = 60\nlo = 0.0\nhi = 1.0\n[kernel]\nwidth = 0.0\nmultiple = 5.0\nneighbours = 5\n[run]\nseed = 1\n",
            model_section(20, 4, "non_integrable")
        ),
        "s_ex_bins" => format!(
            "{}[coarse]\nblocks = 4\n{QUENCH_INITIAL}[bins]\ncounts = [1, 8, 64]\n[time]\nt_max = 60.0\npoints = 241\n",
            model_section(16, 4, "integrable")
        ),
        _ => "[suite]\ndims = [4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20]\ntrials = 50\nchain = true\nchain_sites = 16\nchain_particles = 4\n[run]\nseed = 1\n".to_string(),
    };
    Ok(format!("{body}[output]\nname = \"{id}\"\n"))
}

/// Defaults of `id`, then the optional file, then `key=value` overrides.
/// Named presets fix the couplings, which are written back so that the echo
/// and hash show the values actually used.
pub fn resolve_config(id: &str, file: Option<&Config>, overrides: &[String]) -> Result<Config> {
    let mut cfg = Config::parse(&default_config_text(id)?, "defaults")?;
    if let Some(f) = file {
        cfg.overlay(f)?;
    }
    for o in overrides {
        cfg.set(o)?;
    }
    if cfg.get("model.preset").is_some() {
        let p = couplings(&cfg)?;
        cfg.insert("model.t", Value::Float(p.t));
        cfg.insert("model.v", Value::Float(p.v));
        cfg.insert("model.t_prime", Value::Float(p.t_prime));
        cfg.insert("model.v_prime", Value::Float(p.v_prime));
    }
    Ok(cfg)
}

/// Tables written by a scenario plus the suite report when there is one.
#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub tables: Vec<Table>,
    pub report: Option<SuiteReport>,
}

impl ScenarioOutput {
    pub fn passed(&self) -> bool {
        self.report.as_ref().is_none_or(SuiteReport::passed)
    }
}

pub fn run_scenario(id: &str, cfg: &Config, threads: usize) -> Result<ScenarioOutput> {
    scenario(id)?;
    let mut report = None;
    let mut table = match id {
        "expansion" => expansion(cfg, threads)?,
        "eigenstate_quench" => eigenstate_quench(cfg, threads)?,
        "entanglement" => entanglement(cfg, threads)?,
        "pure_thermal" => pure_thermal(cfg, threads)?,
        "entropy_vs_energy" => entropy_vs_energy(cfg, threads)?,
        "s_ex_bins" => s_ex_bins(cfg, threads)?,
        _ => {
            let (t, r) = property_suite(cfg)?;
            report = Some(r);
            t
        }
    };
    table.name = cfg.str("output.name")?.to_string();
    if table.name.is_empty() || table.name.contains(['/', '\\']) {
        return Err(cfg.invalid("output.name", "must be a non-empty file stem"));
    }
    let mut out = Table::new(table.name.clone(), &[]);
    provenance(&mut out, id, cfg, threads);
    out.metadata.append(&mut table.metadata);
    out.columns = table.columns;
    out.rows = table.rows;
    Ok(ScenarioOutput {
        tables: vec![out],
        report,
    })
}

struct Model {
    basis: FockBasis,
    params: ChainParams,
}

const COUPLING_KEYS: [&str; 4] = ["model.t", "model.v", "model.t_prime", "model.v_prime"];

fn couplings(cfg: &Config) -> Result<ChainParams> {
    let named = match cfg.str("model.preset")? {
        "integrable" => Some(ChainParams::integrable()),
        "non_integrable" => Some(ChainParams::non_integrable()),
        "custom" => None,
        other => {
            return Err(cfg.invalid(
                "model.preset",
                format!("unknown preset `{other}`; expected integrable, non_integrable or custom"),
            ))
        }
    };
    match named {
        Some(p) => {
            if let Some(k) = COUPLING_KEYS.iter().find(|k| cfg.is_explicit(k)) {
                return Err(cfg.invalid(k, "couplings are fixed by the named preset; set model.preset = \"custom\""));
            }
            Ok(p)
        }
        None => ChainParams::new(
            cfg.f64("model.t")?,
            cfg.f64("model.v")?,
            cfg.f64("model.t_prime")?,
            cfg.f64("model.v_prime")?,
        )
        .map_err(|e| cfg.invalid("model", e.to_string())),
    }
}

fn model(cfg: &Config) -> Result<Model> {
    let sites = cfg.usize("model.sites")?;
    if sites == 0 || sites > MAX_SITES {
        return Err(cfg.invalid("model.sites", format!("must lie in 1..={MAX_SITES}")));
    }
    let particles = cfg.usize("model.particles")?;
    if particles == 0 || particles > sites {
        return Err(cfg.invalid("model.particles", format!("must lie in 1..={sites}")));
    }
    let basis = FockBasis::with_limit(sites, particles, cfg.usize("model.max_dim")?)?;
    Ok(Model {
        basis,
        params: couplings(cfg)?,
    })
}

fn equal_blocks(cfg: &Config, key: &str, sites: usize) -> Result<BoxPartition> {
    let count = cfg.usize(key)?;
    if count == 0 || !sites.is_multiple_of(count) {
        return Err(cfg.invalid(key, format!("{count} blocks do not tile {sites} sites")));
    }
    BoxPartition::equal_parts(sites, count)
}

fn times(cfg: &Config) -> Result<Vec<f64>> {
    let t_max = cfg.f64("time.t_max")?;
    if !(t_max > 0.0) {
        return Err(cfg.invalid("time.t_max", "must be positive"));
    }
    let points = cfg.usize("time.points")?;
    if points < 2 {
        return Err(cfg.invalid("time.points", "at least two points are required"));
    }
    Ok(time_grid(t_max, points))
}

fn average_from(cfg: &Config) -> Result<f64> {
    let a = cfg.f64("time.average_from")?;
    if !(0.0..=cfg.f64("time.t_max")?).contains(&a) {
        return Err(cfg.invalid("time.average_from", "must lie inside the time grid"));
    }
    Ok(a)
}

/// Initial state from `initial.*`: a Fock bitstring when given, otherwise an
/// eigenstate of the chain confined to the leading `sub_sites`.
fn initial_state(cfg: &Config, m: &Model) -> Result<QuantumState> {
    let bits = if cfg.get("initial.bitstring").is_some() {
        cfg.str("initial.bitstring")?
    } else {
        ""
    };
    if !bits.is_empty() {
        return bitstring_state(cfg, bits, &m.basis);
    }
    let sub_sites = cfg.usize("initial.sub_sites")?;
    let n = m.basis.particles();
    if sub_sites < n || sub_sites > m.basis.sites() {
        return Err(cfg.invalid(
            "initial.sub_sites",
            format!("must lie in {n}..={} to hold {n} particles", m.basis.sites()),
        ));
    }
    let base = cfg.usize("initial.index_base")?;
    if base > 1 {
        return Err(cfg.invalid("initial.index_base", "must be 0 or 1"));
    }
    let k = cfg.usize("initial.eigenstate")?;
    let sub_dim = binomial(sub_sites, n) as usize;
    if k < base || k - base >= sub_dim {
        return Err(cfg.invalid(
            "initial.eigenstate",
            format!("must lie in {base}..={} for a {sub_dim}-dimensional confined space", sub_dim - 1 + base),
        ));
    }
    reduced_eigenstate(&m.basis, sub_sites, &m.params, k - base + 1)
}

fn bitstring_state(cfg: &Config, bits: &str, basis: &FockBasis) -> Result<QuantumState> {
    if bits.len() != basis.sites() || !bits.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(cfg.invalid(
            "initial.bitstring",
            format!("expected {} characters of 0/1, site 0 first", basis.sites()),
        ));
    }
    let state = bits.bytes().enumerate().filter(|(_, b)| *b == b'1').fold(0u32, |s, (i, _)| s | (1 << i));
    let index = basis.index_of(state).ok_or_else(|| {
        cfg.invalid(
            "initial.bitstring",
            format!("must hold exactly {} particles", basis.particles()),
        )
    })?;
    Ok(QuantumState::basis_state(basis.dim(), index))
}

fn norm(s: &QuantumState) -> f64 {
    match s {
        QuantumState::Pure(v) => norm_sqr(v).sqrt(),
        QuantumState::Mixed(_) => s.trace(),
    }
}

/// Mean and population standard deviation of `column` over rows with `t ≥ from`.
fn window_stats(rows: &[Vec<f64>], column: usize, from: f64) -> (f64, f64) {
    let xs: Vec<f64> = rows.iter().filter(|r| r[0] >= from).map(|r| r[column]).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn table_from_rows(columns: &[&str], rows: Vec<Vec<f64>>) -> Result<Table> {
    let mut t = Table::new("", columns);
    for r in rows {
        t.push(&r)?;
    }
    Ok(t)
}

fn canonical_reference(t: &mut Table, spec: &Spectrum, energy: f64, suffix: &str) -> Result<()> {
    let ens = solve_beta(spec, energy)?;
    t.meta_f64(format!("mean_energy{suffix}"), energy);
    t.meta_f64(format!("beta{suffix}"), ens.beta);
    t.meta_f64(format!("canonical_entropy{suffix}"), canonical_entropy(&ens));
    t.meta_f64(format!("ln_dim{suffix}"), (spec.dim() as f64).ln());
    Ok(())
}

fn full_spectrum(m: &Model) -> Result<(Operator, Spectrum)> {
    let h = build_full_hamiltonian(&m.basis, &m.params)?;
    let spec = eigendecompose(&h)?;
    Ok((h, spec))
}

fn expansion(cfg: &Config, threads: usize) -> Result<Table> {
    let m = model(cfg)?;
    let part = equal_blocks(cfg, "coarse.blocks", m.basis.sites())?;
    let grid = times(cfg)?;
    let from = average_from(cfg)?;
    let (h, spec) = full_spectrum(&m)?;
    let ctx = EvolutionContext::new(&spec, &initial_state(cfg, &m)?)?;
    let x = ChainEvaluator::new(&[CoarseGraining::positional(&m.basis, &part)?])?;
    let rows = par_map(&grid, threads, |&t| {
        let s = ctx.evolve(t);
        Ok(vec![t, x.entropy(&s)?.value, norm(&s), expectation(&h, &s)?])
    })?;
    let (mean, sd) = window_stats(&rows, 1, from);
    let mut table = table_from_rows(&["t", "S_x", "norm", "energy"], rows)?;
    canonical_reference(&mut table, &spec, ctx.mean_energy(), "")?;
    table.meta_f64("S_x_average", mean);
    table.meta_f64("S_x_stddev", sd);
    Ok(table)
}

fn eigenstate_quench(cfg: &Config, threads: usize) -> Result<Table> {
    let m = model(cfg)?;
    let part = equal_blocks(cfg, "coarse.blocks", m.basis.sites())?;
    let grid = times(cfg)?;
    let from = average_from(cfg)?;
    let (h, spec) = full_spectrum(&m)?;
    let ctx = EvolutionContext::new(&spec, &initial_state(cfg, &m)?)?;
    let foe = Foe::new(&m.basis, &part, &m.params)?;
    let sxe = sxe_evaluator(&m.basis, &part, &spec)?;
    let rows = par_map(&grid, threads, |&t| {
        let s = ctx.evolve(t);
        Ok(vec![
            t,
            foe.entropy(&s)?.value,
            sxe.entropy(&s)?.value,
            norm(&s),
            expectation(&h, &s)?,
        ])
    })?;
    let stats = [window_stats(&rows, 1, from), window_stats(&rows, 2, from)];
    let mut table = table_from_rows(&["t", "S_F", "S_xE", "norm", "energy"], rows)?;
    canonical_reference(&mut table, &spec, ctx.mean_energy(), "")?;
    for (name, (mean, sd)) in ["S_F", "S_xE"].iter().zip(stats) {
        table.meta_f64(format!("{name}_average"), mean);
        table.meta_f64(format!("{name}_stddev"), sd);
    }
    Ok(table)
}

fn entanglement(cfg: &Config, threads: usize) -> Result<Table> {
    let m = model(cfg)?;
    let cut = cfg.usize("entanglement.cut")?;
    if cut == 0 || cut >= m.basis.sites() {
        return Err(cfg.invalid("entanglement.cut", format!("must lie in 1..{}", m.basis.sites())));
    }
    let grid = times(cfg)?;
    let from = average_from(cfg)?;
    let (h, spec) = full_spectrum(&m)?;
    let ctx = EvolutionContext::new(&spec, &initial_state(cfg, &m)?)?;
    let rows = par_map(&grid, threads, |&t| {
        let s = ctx.evolve(t);
        Ok(vec![t, entanglement_entropy(&s, &m.basis, cut)?, norm(&s), expectation(&h, &s)?])
    })?;
    let (mean, sd) = window_stats(&rows, 1, from);
    let mut table = table_from_rows(&["t", "S_ent", "norm", "energy"], rows)?;
    canonical_reference(&mut table, &spec, ctx.mean_energy(), "")?;
    table.meta_f64("S_ent_average", mean);
    table.meta_f64("S_ent_stddev", sd);
    Ok(table)
}

fn pure_thermal(cfg: &Config, threads: usize) -> Result<Table> {
    let m = model(cfg)?;
    let grid = times(cfg)?;
    let from = average_from(cfg)?;
    let switch = cfg.f64("time.switch")?;
    if !(0.0..=cfg.f64("time.t_max")?).contains(&switch) {
        return Err(cfg.invalid("time.switch", "must lie inside the time grid"));
    }
    let beta = cfg.f64("initial.beta")?;
    let sub_sites = cfg.usize("initial.sub_sites")?;
    if sub_sites < m.basis.particles() || sub_sites > m.basis.sites() {
        return Err(cfg.invalid("initial.sub_sites", "confined chain must hold the particles and fit the lattice"));
    }
    let sub = FockBasis::new(sub_sites, m.basis.particles())?;
    let part_sub = equal_blocks(cfg, "coarse.blocks", sub_sites)?;
    let part = equal_blocks(cfg, "coarse.blocks", m.basis.sites())?;
    let h_sub = build_chain_hamiltonian(&sub, 0..sub_sites, &m.params)?;
    let spec_sub = eigendecompose(&h_sub)?;
    let (h, spec) = full_spectrum(&m)?;
    let mut seed = ScenarioSeed::new(cfg.u64("run.seed")?);
    let psi0 = pure_thermal_state(&spec_sub, beta, &mut seed)?;
    let q = Quench::new(&psi0, &sub, &spec_sub, &m.basis, &spec, switch)?;
    let before = (Foe::new(&sub, &part_sub, &m.params)?, sxe_evaluator(&sub, &part_sub, &spec_sub)?);
    let after = (Foe::new(&m.basis, &part, &m.params)?, sxe_evaluator(&m.basis, &part, &spec)?);
    let rows = par_map(&grid, threads, |&t| {
        let (s, (foe, sxe), h, sites) = match q.state_at(t) {
            QuenchState::Before(s) => (s, &before, &h_sub, sub_sites),
            QuenchState::After(s) => (s, &after, &h, m.basis.sites()),
        };
        Ok(vec![
            t,
            foe.entropy(&s)?.value,
            sxe.entropy(&s)?.value,
            sites as f64,
            norm(&s),
            expectation(h, &s)?,
        ])
    })?;
    let from = from.max(switch);
    let stats = [window_stats(&rows, 1, from), window_stats(&rows, 2, from)];
    let mut table = table_from_rows(&["t", "S_F", "S_xE", "sites", "norm", "energy"], rows)?;
    table.meta_f64("switch_time", switch);
    canonical_reference(&mut table, &spec_sub, q.before().mean_energy(), "_before")?;
    canonical_reference(&mut table, &spec, q.after().mean_energy(), "_after")?;
    table.meta_f64("diagonal_entropy_before", diagonal_entropy(&psi0, &spec_sub)?.value);
    for (name, (mean, sd)) in ["S_F", "S_xE"].iter().zip(stats) {
        table.meta_f64(format!("{name}_average_after"), mean);
        table.meta_f64(format!("{name}_stddev_after"), sd);
    }
    Ok(table)
}

/// Window centres spread evenly over the fraction `[lo, hi]` of the admissible range.
fn window_centers(cfg: &Config, dim: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > dim {
        return Err(cfg.invalid("window.k", format!("must lie in 1..={dim}")));
    }
    let (lo, hi) = (cfg.f64("window.lo")?, cfg.f64("window.hi")?);
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(cfg.invalid("window.lo", "need 0 <= window.lo <= window.hi <= 1"));
    }
    let count = cfg.usize("window.centers")?;
    if count == 0 {
        return Err(cfg.invalid("window.centers", "at least one centre is required"));
    }
    let span = (dim - k) as f64;
    let first = k / 2 + (lo * span).round() as usize;
    let last = k / 2 + (hi * span).round() as usize;
    let mut centers: Vec<usize> = (0..count)
        .map(|j| {
            if count == 1 {
                first
            } else {
                first + ((last - first) as f64 * j as f64 / (count - 1) as f64).round() as usize
            }
        })
        .collect();
    centers.dedup();
    Ok(centers)
}

fn kernel(cfg: &Config) -> Result<KernelWidth> {
    let w = cfg.f64("kernel.width")?;
    if w < 0.0 {
        return Err(cfg.invalid("kernel.width", "must be non-negative (0 selects the level-spacing rule)"));
    }
    if w > 0.0 {
        return Ok(KernelWidth::Fixed(w));
    }
    let multiple = cfg.f64("kernel.multiple")?;
    if !(multiple > 0.0) {
        return Err(cfg.invalid("kernel.multiple", "must be positive"));
    }
    Ok(KernelWidth::LevelSpacings {
        multiple,
        neighbours: cfg.usize("kernel.neighbours")?.max(1),
    })
}

pub const ENTROPY_VS_ENERGY_COLUMNS: [&str; 10] = [
    "center",
    "E",
    "S_micro",
    "S_canonical",
    "S_F_eigenstate",
    "S_xE_eigenstate",
    "S_F_ps",
    "S_xE_ps",
    "S_F_micro",
    "S_xE_micro",
];

fn entropy_vs_energy(cfg: &Config, threads: usize) -> Result<Table> {
    let m = model(cfg)?;
    let part = equal_blocks(cfg, "coarse.blocks", m.basis.sites())?;
    let k = cfg.usize("window.k")?;
    let width = kernel(cfg)?;
    let seed = cfg.u64("run.seed")?;
    let spec = eigendecompose(&build_full_hamiltonian(&m.basis, &m.params)?)?;
    let centers = window_centers(cfg, spec.dim(), k)?;
    let foe = Foe::new(&m.basis, &part, &m.params)?;
    let foe_eval = ChainEvaluator::new(std::slice::from_ref(foe.coarse_graining()))?;
    drop(foe);
    let sxe = sxe_evaluator(&m.basis, &part, &spec)?;
    let vectors = spec.vectors();
    let rows = par_map(&centers, threads, |&c| {
        let e = spec.energies()[c];
        let s_micro = microcanonical_entropy(&spec, e, m.basis.particles(), width)?;
        let s_can = canonical_entropy(&solve_beta(&spec, e)?);
        let eig = vectors.subcols(c, 1);
        let w = window(spec.dim(), c, k)?;
        let win = vectors.subcols(w.start, k);
        let flat = vec![1.0 / k as f64; k];
        let mut rng = ScenarioSeed::with_stream(seed, c as u64);
        let ps = ps_state(&spec, c, k, &mut rng)?;
        let value = |ev: &ChainEvaluator, v, wt: &[f64]| -> Result<f64> {
            Ok(crate::entropy::EntropyValue::from_table(&ev.evaluate_real_mixture(v, wt)?).value)
        };
        Ok(vec![
            c as f64,
            e,
            s_micro,
            s_can,
            value(&foe_eval, eig, &[1.0])?,
            value(&sxe, eig, &[1.0])?,
            foe_eval.entropy(&ps)?.value,
            sxe.entropy(&ps)?.value,
            value(&foe_eval, win, &flat)?,
            value(&sxe, win, &flat)?,
        ])
    })?;
    let mean_diff = |a: usize, b: usize| rows.iter().map(|r| r[a] - r[b]).sum::<f64>() / rows.len() as f64;
    let diffs = [
        ("mean_S_F_micro_minus_eigenstate", mean_diff(8, 4)),
        ("mean_S_F_micro_minus_ps", mean_diff(8, 6)),
        ("mean_S_xE_micro_minus_eigenstate", mean_diff(9, 5)),
        ("mean_S_xE_micro_minus_ps", mean_diff(9, 7)),
    ];
    let mut table = table_from_rows(&ENTROPY_VS_ENERGY_COLUMNS, rows)?;
    table.meta_f64("ln_dim", (spec.dim() as f64).ln());
    table.meta_f64("offset_real_gaussian", REAL_GAUSSIAN_LOG_MOMENT);
    table.meta_f64("offset_complex_gaussian", COMPLEX_GAUSSIAN_LOG_MOMENT);
    table.meta_f64("offset_difference", REAL_GAUSSIAN_LOG_MOMENT - COMPLEX_GAUSSIAN_LOG_MOMENT);
    table.meta(
        "kernel",
        match width {
            KernelWidth::Fixed(w) => format!("fixed width {}", format_float(w)),
            KernelWidth::LevelSpacings { multiple, neighbours } => {
                format!("{} local level spacings over {} neighbours", format_float(multiple), neighbours)
            }
        },
    );
    table.meta("micro_window", "sigma/sqrt(N)");
    for (key, v) in diffs {
        table.meta_f64(key, v);
    }
    Ok(table)
}

fn s_ex_bins(cfg: &Config, threads: usize) -> Result<Table> {
    let m = model(cfg)?;
    let part = equal_blocks(cfg, "coarse.blocks", m.basis.sites())?;
    let grid = times(cfg)?;
    let counts = cfg.usize_list("bins.counts")?;
    if counts.is_empty() || counts.contains(&0) {
        return Err(cfg.invalid("bins.counts", "need at least one bin count, all positive"));
    }
    let (h, spec) = full_spectrum(&m)?;
    let ctx = EvolutionContext::new(&spec, &initial_state(cfg, &m)?)?;
    let x = ChainEvaluator::new(&[CoarseGraining::positional(&m.basis, &part)?])?;
    let binned: Vec<ChainEvaluator> = counts
        .iter()
        .map(|&b| sex_evaluator(b, &spec, &m.basis, &part))
        .collect::<Result<_>>()?;
    let rows = par_map(&grid, threads, |&t| {
        let s = ctx.evolve(t);
        let mut r = vec![t, x.entropy(&s)?.value];
        for ev in &binned {
            r.push(ev.entropy(&s)?.value);
        }
        r.push(norm(&s));
        r.push(expectation(&h, &s)?);
        Ok(r)
    })?;
    let names: Vec<String> = counts.iter().map(|b| format!("S_Ex_M{b}")).collect();
    let mut columns = vec!["t", "S_x"];
    columns.extend(names.iter().map(String::as_str));
    columns.extend(["norm", "energy"]);
    let mut table = table_from_rows(&columns, rows)?;
    canonical_reference(&mut table, &spec, ctx.mean_energy(), "")?;
    table.meta("bin_counts", counts.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" "));
    table.meta(
        "distinct_levels",
        spec.level_groups(spec.degeneracy_tol()).len().to_string(),
    );
    Ok(table)
}

fn property_suite(cfg: &Config) -> Result<(Table, SuiteReport)> {
    let dims = cfg.usize_list("suite.dims")?;
    if dims.iter().any(|&d| d < 2) {
        return Err(cfg.invalid("suite.dims", "dimensions must be at least 2"));
    }
    let trials = cfg.usize("suite.trials")?;
    let seed = cfg.u64("run.seed")?;
    let mut report = suite::run_property_suite(&dims, trials, seed)?;
    if cfg.bool("suite.chain")? {
        let sites = cfg.usize("suite.chain_sites")?;
        let particles = cfg.usize("suite.chain_particles")?;
        if sites < 2 || sites % 2 != 0 || sites > 16 || particles == 0 || particles > sites {
            return Err(cfg.invalid("suite.chain_sites", "need an even lattice of at most 16 sites holding the particles"));
        }
        report.merge(suite::run_chain_checks(sites, particles, seed)?);
    }
    Ok((report.to_table(), report))
}
