//! Monte Carlo harness: random sparse instances, per-trial reduction, rank
//! and uniqueness measurements, and phase-transition grids.
//!
//! Every trial derives its randomness from a hash of the master seed and its
//! grid coordinates, so cells can be re-run individually and results do not
//! depend on the number of worker threads.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_measurement_matrix, perturb, Geometry, Normalization};
use crate::reduction::{reduce, ReducedSystem};
use crate::solvers::kruskal::binomial_u128;
use crate::solvers::rank::numeric_rank;
use crate::solvers::uniqueness::{
    verify_unique_box_reduced, verify_unique_nonneg_reduced, UniquenessVerdict, VerdictStatus, VerifyOptions,
};
use crate::sparse::SparseMatrix;

/// Default perturbation half-width: entries drawn from `(0.9, 1.1)`.
pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    /// `k` independent uniform cell draws; `x_c` counts the particles in `c`.
    NonnegMultiplicity,
    /// Uniform `k`-subset of cells.
    Binary,
}

impl SignalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SignalKind::NonnegMultiplicity => "nonneg_multiplicity",
            SignalKind::Binary => "binary",
        }
    }
}

impl std::str::FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nonneg_multiplicity" | "nonneg" => Ok(SignalKind::NonnegMultiplicity),
            "binary" => Ok(SignalKind::Binary),
            _ => Err(Error::InvalidArgument(format!("unknown signal kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Unperturbed,
    Perturbed,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Unperturbed => "unperturbed",
            Variant::Perturbed => "perturbed",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unperturbed" => Ok(Variant::Unperturbed),
            "perturbed" => Ok(Variant::Perturbed),
            _ => Err(Error::InvalidArgument(format!("unknown variant `{s}`"))),
        }
    }
}

/// Draws a random `k`-particle signal.
pub fn sample_sparse_signal(g: &Geometry, k: usize, kind: SignalKind, seed: u64) -> Result<Vec<f64>> {
    let n = g.n_cells();
    let mut x = vec![0.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        SignalKind::NonnegMultiplicity => {
            for _ in 0..k {
                x[rng.gen_range(0..n)] += 1.0;
            }
        }
        SignalKind::Binary => {
            if k > n {
                return Err(Error::InvalidArgument(format!("{k} distinct cells requested from {n}")));
            }
            for c in sample(&mut rng, n, k) {
                x[c] = 1.0;
            }
        }
    }
    Ok(x)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix(seed: u64, value: u64) -> u64 {
    splitmix64(seed ^ splitmix64(value))
}

/// Seed of one trial, a hash of the master seed and its grid coordinates.
pub fn trial_seed(master: u64, d: usize, k: usize, variant: Variant, signal: SignalKind, trial: usize) -> u64 {
    [d as u64, k as u64, variant as u64, signal as u64, trial as u64].into_iter().fold(splitmix64(master), mix)
}

/// Per-trial measurement settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOptions {
    pub probes: usize,
    pub epsilon: f64,
    pub normalization: Normalization,
    /// Run the LP uniqueness tests (otherwise only reduction and rank).
    pub uniqueness: bool,
    /// Skip the LPs when the reduced system is overdetermined with full rank.
    pub fast_path: bool,
}

impl Default for TrialOptions {
    fn default() -> Self {
        TrialOptions {
            probes: 5,
            epsilon: DEFAULT_EPSILON,
            normalization: Normalization::None,
            uniqueness: true,
            fast_path: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub dim: usize,
    pub d: usize,
    pub k: usize,
    pub variant: Variant,
    pub signal: SignalKind,
    pub seed: u64,
    pub support_size: usize,
    pub m_red: usize,
    pub n_red: usize,
    pub overdetermined_fullrank: bool,
    pub unique_nonneg: Option<UniquenessVerdict>,
    /// Only measured for binary signals.
    pub unique_box: Option<UniquenessVerdict>,
}

impl TrialRecord {
    fn status(v: &Option<UniquenessVerdict>) -> Option<VerdictStatus> {
        v.as_ref().map(|v| v.status)
    }

    pub fn nonneg_status(&self) -> Option<VerdictStatus> {
        Self::status(&self.unique_nonneg)
    }

    pub fn box_status(&self) -> Option<VerdictStatus> {
        Self::status(&self.unique_box)
    }

    pub fn any_inconclusive(&self) -> bool {
        self.nonneg_status() == Some(VerdictStatus::Inconclusive)
            || self.box_status() == Some(VerdictStatus::Inconclusive)
    }
}

/// Runs one trial, building the measurement matrix from scratch.
pub fn run_trial(
    g: &Geometry,
    k: usize,
    variant: Variant,
    signal: SignalKind,
    seed: u64,
    opts: &TrialOptions,
) -> Result<TrialRecord> {
    run_trial_on(g, &build_measurement_matrix(g), k, variant, signal, seed, opts)
}

/// Runs one trial on a shared unperturbed measurement matrix `base`.
pub fn run_trial_on(
    g: &Geometry,
    base: &SparseMatrix,
    k: usize,
    variant: Variant,
    signal: SignalKind,
    seed: u64,
    opts: &TrialOptions,
) -> Result<TrialRecord> {
    let x = sample_sparse_signal(g, k, signal, mix(seed, 1))?;
    let perturbed;
    let a = match variant {
        Variant::Unperturbed => base,
        Variant::Perturbed => {
            perturbed = perturb(base, opts.epsilon, opts.normalization, mix(seed, 2))?;
            &perturbed
        }
    };
    let b = a.mul_vec(&x)?;
    let r = reduce(a, &b)?;
    let overdetermined_fullrank = r.n_red() > 0 && r.is_overdetermined() && numeric_rank(&r.a_red) == r.n_red();
    let (unique_nonneg, unique_box) = if opts.uniqueness {
        verdicts(&r, &x, signal, overdetermined_fullrank, mix(seed, 3), opts)?
    } else {
        (None, None)
    };
    Ok(TrialRecord {
        dim: g.dim(),
        d: g.resolution(),
        k,
        variant,
        signal,
        seed,
        support_size: x.iter().filter(|&&v| v != 0.0).count(),
        m_red: r.m_red(),
        n_red: r.n_red(),
        overdetermined_fullrank,
        unique_nonneg,
        unique_box,
    })
}

type VerdictPair = (Option<UniquenessVerdict>, Option<UniquenessVerdict>);

fn verdicts(
    r: &ReducedSystem,
    x: &[f64],
    signal: SignalKind,
    fullrank: bool,
    seed: u64,
    opts: &TrialOptions,
) -> Result<VerdictPair> {
    let fast = UniquenessVerdict { status: VerdictStatus::Unique, witness: None, probes_used: 0, fast_path: true };
    if opts.fast_path && fullrank {
        let boxed = (signal == SignalKind::Binary).then(|| fast.clone());
        return Ok((Some(fast), boxed));
    }
    let vopts = VerifyOptions { probes: opts.probes, seed, fast_path: false };
    let nonneg = verify_unique_nonneg_reduced(r, x, &vopts)?;
    let boxed = match signal {
        SignalKind::Binary => Some(verify_unique_box_reduced(r, x, &vopts)?),
        SignalKind::NonnegMultiplicity => None,
    };
    Ok((Some(nonneg), boxed))
}

/// Phase-transition grid configuration (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub d: Vec<usize>,
    /// Sparsity fractions, `k = round(ρ·d^(D−1))`. Ignored when `k` is set.
    pub rho: Vec<f64>,
    /// Explicit particle counts.
    pub k: Vec<usize>,
    pub trials: usize,
    pub variants: Vec<Variant>,
    pub signals: Vec<SignalKind>,
    pub probes: usize,
    pub epsilon: f64,
    pub normalization: Normalization,
    pub seed: u64,
    pub uniqueness: bool,
    pub fast_path: bool,
    /// Stop increasing `k` for a `(variant, signal, d)` row once the unique
    /// fraction drops below this value.
    pub stop_below: Option<f64>,
    /// Worker threads; `None` uses all available cores.
    pub jobs: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            dim: 3,
            d: vec![10, 15, 20, 25, 30],
            rho: (1..=40).map(|i| i as f64 * 0.025).collect(),
            k: Vec::new(),
            trials: 50,
            variants: vec![Variant::Unperturbed, Variant::Perturbed],
            signals: vec![SignalKind::Binary],
            probes: 5,
            epsilon: DEFAULT_EPSILON,
            normalization: Normalization::None,
            seed: 0,
            uniqueness: true,
            fast_path: true,
            stop_below: Some(0.05),
            jobs: None,
        }
    }
}

impl GridConfig {
    /// Larger grid with resolutions up to 100.
    pub fn full() -> Self {
        GridConfig { d: (10..=100).step_by(10).collect(), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one resolution".into()));
        }
        if self.k.is_empty() && self.rho.is_empty() {
            return Err(Error::InvalidArgument("grid needs a k or rho axis".into()));
        }
        if self.rho.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::InvalidArgument("rho values must be finite and nonnegative".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.variants.is_empty() || self.signals.is_empty() {
            return Err(Error::InvalidArgument("variants and signals must be nonempty".into()));
        }
        if self.uniqueness && self.probes == 0 {
            return Err(Error::InvalidArgument("probes must be at least 1".into()));
        }
        for &d in &self.d {
            Geometry::new(self.dim, d)?;
        }
        Ok(())
    }

    /// `(k, ρ)` pairs for resolution `d`, increasing and without duplicates.
    pub fn k_axis(&self, d: usize) -> Vec<(usize, f64)> {
        let scale = d.pow(self.dim as u32 - 1) as f64;
        let mut axis: Vec<(usize, f64)> = if self.k.is_empty() {
            self.rho.iter().map(|&r| ((r * scale).round() as usize, r)).collect()
        } else {
            self.k.iter().map(|&k| (k, k as f64 / scale)).collect()
        };
        axis.sort_by_key(|p| p.0);
        axis.dedup_by_key(|p| p.0);
        axis
    }

    fn trial_options(&self) -> TrialOptions {
        TrialOptions {
            probes: self.probes,
            epsilon: self.epsilon,
            normalization: self.normalization,
            uniqueness: self.uniqueness,
            fast_path: self.fast_path,
        }
    }
}

/// Aggregated statistics of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub variant: Variant,
    pub signal: SignalKind,
    pub d: usize,
    pub k: usize,
    pub rho: f64,
    /// Mean `m_red` over mean `n_red`.
    pub ratio_mean: f64,
    pub m_red_mean: f64,
    pub n_red_mean: f64,
    pub p_overdet_fullrank: f64,
    pub p_unique_nonneg: Option<f64>,
    pub p_unique_box: Option<f64>,
    pub p_inconclusive: f64,
    pub trials: usize,
    pub all_inconclusive: bool,
}

impl GridCell {
    pub fn aggregate(
        variant: Variant,
        signal: SignalKind,
        d: usize,
        k: usize,
        rho: f64,
        records: &[TrialRecord],
    ) -> Self {
        let t = records.len() as f64;
        let mean = |f: &dyn Fn(&TrialRecord) -> f64| records.iter().map(f).sum::<f64>() / t;
        let m_red_mean = mean(&|r| r.m_red as f64);
        let n_red_mean = mean(&|r| r.n_red as f64);
        // inconclusive verdicts count as failures
        let freq = |get: &dyn Fn(&TrialRecord) -> Option<VerdictStatus>| {
            let measured: Vec<VerdictStatus> = records.iter().filter_map(get).collect();
            (!measured.is_empty()).then(|| {
                measured.iter().filter(|&&s| s == VerdictStatus::Unique).count() as f64 / measured.len() as f64
            })
        };
        let inconclusive = records.iter().filter(|r| r.any_inconclusive()).count();
        GridCell {
            variant,
            signal,
            d,
            k,
            rho,
            ratio_mean: m_red_mean / n_red_mean,
            m_red_mean,
            n_red_mean,
            p_overdet_fullrank: mean(&|r| r.overdetermined_fullrank as u8 as f64),
            p_unique_nonneg: freq(&|r| r.nonneg_status()),
            p_unique_box: freq(&|r| r.box_status()),
            p_inconclusive: inconclusive as f64 / t,
            trials: records.len(),
            all_inconclusive: !records.is_empty() && inconclusive == records.len(),
        }
    }
}

/// Formats a float with 12 significant digits; NaN becomes an empty field.
pub fn fmt_sig(x: f64) -> String {
    if x.is_nan() {
        return String::new();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("valid float");
    format!("{rounded}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

pub const CSV_HEADER: &str = "variant,signal,d,k,rho,ratio_mean,p_overdet_fullrank,p_unique_nonneg,p_unique_box,p_inconclusive,trials,all_inconclusive";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub config: GridConfig,
    pub cells: Vec<GridCell>,
}

impl PhaseGrid {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                c.variant.as_str(),
                c.signal.as_str(),
                c.d,
                c.k,
                fmt_sig(c.rho),
                fmt_sig(c.ratio_mean),
                fmt_sig(c.p_overdet_fullrank),
                fmt_opt(c.p_unique_nonneg),
                fmt_opt(c.p_unique_box),
                fmt_sig(c.p_inconclusive),
                c.trials,
                c.all_inconclusive
            );
        }
        out
    }

    pub fn cell(&self, variant: Variant, signal: SignalKind, d: usize, k: usize) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.variant == variant && c.signal == signal && c.d == d && c.k == k)
    }
}

/// Run metadata written next to the CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: GridConfig,
    pub wall_time_s: f64,
    pub cells: usize,
}

impl Manifest {
    pub fn new(config: &GridConfig, wall_time_s: f64, cells: usize) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            wall_time_s,
            cells,
        }
    }
}

fn in_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Runs `trials` trials of one grid cell in parallel; results are ordered
/// by trial index.
#[allow(clippy::too_many_arguments)]
pub fn run_cell(
    g: &Geometry,
    base: &SparseMatrix,
    k: usize,
    variant: Variant,
    signal: SignalKind,
    trials: usize,
    master_seed: u64,
    opts: &TrialOptions,
) -> Result<Vec<TrialRecord>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(master_seed, g.resolution(), k, variant, signal, t);
            run_trial_on(g, base, k, variant, signal, seed, opts)
        })
        .collect()
}

/// Runs the whole grid. Cells are processed in a fixed order with their
/// trials in parallel, so the output does not depend on scheduling.
pub fn run_grid(config: &GridConfig) -> Result<(PhaseGrid, Manifest)> {
    config.validate()?;
    let start = Instant::now();
    let opts = config.trial_options();
    let cells = in_pool(config.jobs, || -> Result<Vec<GridCell>> {
        let mut cells = Vec::new();
        let mut bases: HashMap<usize, SparseMatrix> = HashMap::new();
        for &variant in &config.variants {
            for &signal in &config.signals {
                for &d in &config.d {
                    let g = Geometry::new(config.dim, d)?;
                    let base = bases.entry(d).or_insert_with(|| build_measurement_matrix(&g));
                    for (k, rho) in config.k_axis(d) {
                        if signal == SignalKind::Binary && k > g.n_cells() {
                            break;
                        }
                        let records = run_cell(&g, base, k, variant, signal, config.trials, config.seed, &opts)?;
                        let cell = GridCell::aggregate(variant, signal, d, k, rho, &records);
                        log::info!(
                            "{} {} d={} k={}: ratio {:.3}, unique {:?}",
                            variant.as_str(),
                            signal.as_str(),
                            d,
                            k,
                            cell.ratio_mean,
                            cell.p_unique_nonneg
                        );
                        let stop = matches!((config.stop_below, cell.p_unique_nonneg), (Some(s), Some(p)) if p < s);
                        cells.push(cell);
                        if stop {
                            break;
                        }
                    }
                }
            }
        }
        Ok(cells)
    })??;
    let manifest = Manifest::new(config, start.elapsed().as_secs_f64(), cells.len());
    Ok((PhaseGrid { config: config.clone(), cells }, manifest))
}

/// Outcome counts of an exhaustive enumeration over supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationCounts {
    pub total: u64,
    pub unique: u64,
    pub nonunique: u64,
    pub inconclusive: u64,
}

impl EnumerationCounts {
    pub fn unique_fraction(&self) -> f64 {
        self.unique as f64 / self.total as f64
    }
}

/// Whether `cells` are exactly one parity class of the corners of an
/// axis-aligned box with two distinct coordinates per axis.
pub fn is_alternating_corner_set(g: &Geometry, cells: &[usize]) -> bool {
    let dim = g.dim();
    if cells.len() != 1 << (dim - 1) {
        return false;
    }
    let coords: Vec<Vec<usize>> = cells.iter().map(|&c| g.cell_coords(c)).collect();
    let mut low = vec![0; dim];
    for axis in 0..dim {
        let mut values: Vec<usize> = coords.iter().map(|c| c[axis]).collect();
        values.sort_unstable();
        values.dedup();
        if values.len() != 2 {
            return false;
        }
        low[axis] = values[0];
    }
    let parity = |c: &Vec<usize>| (0..dim).filter(|&a| c[a] != low[a]).count() % 2;
    let p0 = parity(&coords[0]);
    let mut seen: Vec<&Vec<usize>> = Vec::new();
    for c in &coords {
        if parity(c) != p0 || seen.contains(&c) {
            return false;
        }
        seen.push(c);
    }
    true
}

fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else { return };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// All `2^(D−1)`-subsets of cells, classified by the alternating-corner
/// criterion: a binary support of that size is nonunique exactly when it is
/// one parity class of a box.
pub fn enumerate_corner_supports(g: &Geometry) -> Result<EnumerationCounts> {
    let k = 1usize << (g.dim() - 1);
    let n = g.n_cells();
    let total = guarded_count(n, k)?;
    let mut nonunique = 0;
    for_each_subset(n, k, |s| {
        if is_alternating_corner_set(g, s) {
            nonunique += 1;
        }
    });
    Ok(EnumerationCounts { total, unique: total - nonunique, nonunique, inconclusive: 0 })
}

/// Largest number of supports an enumeration helper accepts.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

fn guarded_count(n: usize, k: usize) -> Result<u64> {
    let count = binomial_u128(n as u128, k as u128);
    if count > ENUMERATION_LIMIT as u128 {
        return Err(Error::EnumerationGuard { count, limit: ENUMERATION_LIMIT as u128 });
    }
    Ok(count as u64)
}

/// Classifies every binary `k`-support by LP uniqueness over
/// `{A x = A x*, x ≥ 0}` with one fixed perturbed matrix (or the
/// unperturbed one when `epsilon == 0`).
pub fn enumerate_lp_uniqueness(
    g: &Geometry,
    k: usize,
    epsilon: f64,
    seed: u64,
    probes: usize,
) -> Result<EnumerationCounts> {
    let n = g.n_cells();
    let total = guarded_count(n, k)?;
    let a = perturb(&build_measurement_matrix(g), epsilon, Normalization::None, seed)?;
    let mut subsets = Vec::with_capacity(total as usize);
    for_each_subset(n, k, |s| subsets.push(s.to_vec()));
    let opts = VerifyOptions { probes, seed: mix(seed, 3), fast_path: true };
    let statuses: Vec<VerdictStatus> = subsets
        .par_iter()
        .map(|s| {
            let mut x = vec![0.0; n];
            s.iter().for_each(|&c| x[c] = 1.0);
            let b = a.mul_vec(&x)?;
            let r = reduce(&a, &b)?;
            Ok(verify_unique_nonneg_reduced(&r, &x, &opts)?.status)
        })
        .collect::<Result<_>>()?;
    let mut tally: BTreeMap<VerdictStatus, u64> = BTreeMap::new();
    for s in statuses {
        *tally.entry(s).or_default() += 1;
    }
    Ok(EnumerationCounts {
        total,
        unique: tally.get(&VerdictStatus::Unique).copied().unwrap_or(0),
        nonunique: tally.get(&VerdictStatus::Nonunique).copied().unwrap_or(0),
        inconclusive: tally.get(&VerdictStatus::Inconclusive).copied().unwrap_or(0),
    })
}
