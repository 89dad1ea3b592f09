//! Monte Carlo estimation and the statistical checks built on it.
//!
//! Every replica draws from its own stream `(seed, replica index)`, results
//! are collected in replica order and reduced with a fixed pairwise tree, so
//! reports depend only on `(seed, parameters, replicas)` and never on the
//! number of worker threads.

pub mod acceptance;

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cells::{neighbors_of_diagonal, SplitVector};
use crate::chain::{rescale, simulate_chain, Chain, ChainSpec, EVENT_CAP};
use crate::error::{Error, Result};
use crate::flow::{sample_particles, Environment};
use crate::params::{p_from_mu, p_n_from_theta, theta_from_nu, AtomicMeasure, PFamily, ThetaFamily};
use crate::path::JumpPath;
use crate::rng::{self, Domain, SimRng};

/// Largest fraction of capped replicas an experiment tolerates.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

/// Number of worker threads to use when the caller has no preference.
pub fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs `sampler` once per replica on `parallelism` threads; results come
/// back in replica order.
pub fn replicate<T, F>(replicas: usize, seed: u64, parallelism: usize, sampler: F) -> Result<Vec<Result<T>>>
where
    T: Send,
    F: Fn(u64, &mut SimRng) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        (0..replicas as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng::stream(seed, Domain::Replica, i);
                sampler(i, &mut rng)
            })
            .collect()
    }))
}

/// Splits replica results into successes and event-cap failures; any other
/// error aborts.
fn successes<T>(results: Vec<Result<T>>) -> Result<(Vec<T>, usize)> {
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut failed = 0;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(Error::EventCap(_)) => failed += 1,
            Err(e) => return Err(e),
        }
    }
    if ok.is_empty() && total > 0 {
        return Err(Error::AllReplicasFailed(total));
    }
    Ok((ok, failed))
}

/// Count, mean and centered sum of squares of a sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn of(x: f64) -> Self {
        Self { count: 1, mean: x, m2: 0.0 }
    }

    pub fn merge(a: Self, b: Self) -> Self {
        if a.count == 0 {
            return b;
        }
        if b.count == 0 {
            return a;
        }
        let count = a.count + b.count;
        let delta = b.mean - a.mean;
        let (na, nb) = (a.count as f64, b.count as f64);
        let mean = a.mean + delta * nb / count as f64;
        let m2 = a.m2 + b.m2 + delta * delta * na * nb / count as f64;
        Self { count, mean, m2 }
    }

    /// Pairwise reduction with a tree shape fixed by the slice length.
    pub fn from_slice(xs: &[f64]) -> Self {
        match xs.len() {
            0 => Self::default(),
            1 => Self::of(xs[0]),
            len => {
                let (left, right) = xs.split_at(len / 2);
                Self::merge(Self::from_slice(left), Self::from_slice(right))
            }
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replicas: usize,
    pub master_seed: u64,
    pub failed_replicas: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64], master_seed: u64, failed_replicas: usize) -> Self {
        let m = Moments::from_slice(xs);
        Self { mean: m.mean, stderr: m.stderr(), replicas: xs.len(), master_seed, failed_replicas }
    }

    pub fn failure_rate(&self) -> f64 {
        let total = self.replicas + self.failed_replicas;
        if total == 0 {
            0.0
        } else {
            self.failed_replicas as f64 / total as f64
        }
    }
}

fn check_replicas(replicas: usize) -> Result<()> {
    if replicas < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 replicas, got {replicas}")));
    }
    Ok(())
}

/// Mean and standard error of a scalar sampler.
pub fn mc_run<F>(replicas: usize, seed: u64, parallelism: usize, sampler: F) -> Result<McEstimate>
where
    F: Fn(&mut SimRng) -> Result<f64> + Sync,
{
    check_replicas(replicas)?;
    let (xs, failed) = successes(replicate(replicas, seed, parallelism, |_, rng| sampler(rng))?)?;
    Ok(McEstimate::from_samples(&xs, seed, failed))
}

/// How a check compares its estimate with the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|estimate − target| ≤ tolerance`
    Within,
    /// `estimate − slack ≤ target`
    AtMost,
    /// `estimate + slack ≥ target`
    AtLeast,
    /// Printed for inspection only.
    Report,
}

/// One gate: an estimate, its standard error, a target and a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Check {
    pub fn within(name: impl Into<String>, estimate: f64, stderr: f64, target: f64, tolerance: f64) -> Self {
        let pass = (estimate - target).abs() <= tolerance;
        Self { name: name.into(), estimate, stderr, target, tolerance, comparison: Comparison::Within, pass }
    }

    /// One-sided upper bound with `slack` in the estimate's favour.
    pub fn at_most(name: impl Into<String>, estimate: f64, stderr: f64, bound: f64, slack: f64) -> Self {
        let pass = estimate - slack <= bound;
        Self { name: name.into(), estimate, stderr, target: bound, tolerance: slack, comparison: Comparison::AtMost, pass }
    }

    pub fn at_least(name: impl Into<String>, estimate: f64, stderr: f64, bound: f64, slack: f64) -> Self {
        let pass = estimate + slack >= bound;
        Self { name: name.into(), estimate, stderr, target: bound, tolerance: slack, comparison: Comparison::AtLeast, pass }
    }

    pub fn report(name: impl Into<String>, estimate: f64, stderr: f64, target: f64) -> Self {
        Self { name: name.into(), estimate, stderr, target, tolerance: f64::NAN, comparison: Comparison::Report, pass: true }
    }
}

/// What one first-passage replica saw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitSample {
    pub time: f64,
    /// Index into the canonical list of diagonal neighbors, `None` for three
    /// or more distinct values.
    pub cell: Option<usize>,
    /// `∫_0^{T_ε} 1(X ∉ D)`
    pub off_diagonal: f64,
    /// Smallest pairwise gap at exit.
    pub min_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCount {
    pub vector: String,
    pub count: u64,
}

/// Exit statistics from the diagonal at spread `ε`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitStats {
    pub epsilon: f64,
    pub n: f64,
    pub dim: usize,
    pub replicas: usize,
    pub master_seed: u64,
    pub failed_replicas: usize,
    pub cells: Vec<CellCount>,
    pub multi_value: u64,
    /// `T_ε`
    pub time: Moments,
    /// `T_ε²`
    pub time_sq: Moments,
    pub off_diagonal: Moments,
    pub min_gap: Moments,
}

impl ExitStats {
    pub fn exits(&self) -> u64 {
        self.cells.iter().map(|c| c.count).sum::<u64>() + self.multi_value
    }

    pub fn frequency(&self, count: u64) -> (f64, f64) {
        let total = self.exits() as f64;
        let f = count as f64 / total;
        (f, (f * (1.0 - f) / total).sqrt())
    }

    pub fn ensure_failure_rate(&self) -> Result<()> {
        let total = self.replicas + self.failed_replicas;
        if self.failed_replicas as f64 > MAX_FAILURE_RATE * total as f64 {
            return Err(Error::EventCap(EVENT_CAP));
        }
        Ok(())
    }
}

/// Runs one lattice replica from the diagonal until the spread reaches `ε`.
pub fn exit_sample<R: Rng + ?Sized>(
    chain: &Chain,
    neighbors: &[SplitVector],
    epsilon: f64,
    n: f64,
    rng: &mut R,
) -> Result<ExitSample> {
    let dim = chain.dim();
    let threshold = (epsilon * n.sqrt() - 1e-9).ceil().max(1.0) as i64;
    let spread = |x: &[i64]| x.iter().max().unwrap() - x.iter().min().unwrap();
    let mut walker = chain.walker(&vec![0; dim])?;
    let mut off = 0.0;
    while spread(walker.state()) < threshold {
        if walker.events() >= EVENT_CAP {
            return Err(Error::EventCap(EVENT_CAP));
        }
        let apart = spread(walker.state()) > 0;
        let dt = walker.advance(rng);
        if apart {
            off += dt;
        }
    }
    let x = walker.state();
    let hi = *x.iter().max().unwrap();
    let lo = *x.iter().min().unwrap();
    let cell = if x.iter().all(|&v| v == hi || v == lo) {
        let up = x.iter().enumerate().filter(|(_, &v)| v == hi).fold(0u64, |m, (i, _)| m | 1 << i);
        neighbors.iter().position(|v| v.up_mask() == up)
    } else {
        None
    };
    let mut min_gap = i64::MAX;
    for i in 0..dim {
        for j in i + 1..dim {
            min_gap = min_gap.min((x[i] - x[j]).abs());
        }
    }
    Ok(ExitSample { time: walker.time() / n, cell, off_diagonal: off / n, min_gap: min_gap as f64 / n.sqrt() })
}

/// First exit of the `θ` family at resolution `n` from `{spread < ε}`,
/// started on the diagonal.
pub fn exit_experiment(
    theta: &ThetaFamily,
    dim: usize,
    epsilon: f64,
    n: f64,
    replicas: usize,
    seed: u64,
    parallelism: usize,
) -> Result<ExitStats> {
    check_replicas(replicas)?;
    if dim < 2 {
        return Err(Error::DimensionTooSmall { got: dim, min: 2 });
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("ε = {epsilon} must be positive")));
    }
    let p = p_n_from_theta(theta, n)?;
    let chain = Chain::new(&p, dim)?;
    let neighbors = neighbors_of_diagonal(dim)?;
    let results = replicate(replicas, seed, parallelism, |_, rng| exit_sample(&chain, &neighbors, epsilon, n, rng))?;
    let (samples, failed) = successes(results)?;

    let mut counts = vec![0u64; neighbors.len()];
    let mut multi = 0;
    for s in &samples {
        match s.cell {
            Some(c) => counts[c] += 1,
            None => multi += 1,
        }
    }
    let column = |f: fn(&ExitSample) -> f64| Moments::from_slice(&samples.iter().map(f).collect::<Vec<_>>());
    Ok(ExitStats {
        epsilon,
        n,
        dim,
        replicas: samples.len(),
        master_seed: seed,
        failed_replicas: failed,
        cells: neighbors.iter().zip(counts).map(|(v, count)| CellCount { vector: v.to_string(), count }).collect(),
        multi_value: multi,
        time: column(|s| s.time),
        time_sq: column(|s| s.time * s.time),
        off_diagonal: column(|s| s.off_diagonal),
        min_gap: column(|s| s.min_gap),
    })
}

/// `Σ_{v ∈ V_+(D)} θ(v)` for dimension `dim`.
pub fn boundary_theta_sum(theta: &ThetaFamily, dim: usize) -> Result<f64> {
    Ok(neighbors_of_diagonal(dim)?.iter().map(|v| theta.get(v.k(), v.l()).unwrap_or(0.0)).sum())
}

/// Limiting exit frequency `θ(v)/Σθ` of each diagonal neighbor.
pub fn limiting_cell_frequencies(theta: &ThetaFamily, dim: usize) -> Result<Vec<f64>> {
    let total = boundary_theta_sum(theta, dim)?;
    Ok(neighbors_of_diagonal(dim)?.iter().map(|v| theta.get(v.k(), v.l()).unwrap_or(0.0) / total).collect())
}

/// Pair family with splitting rate `θ(1:1) = theta11` and no drift.
pub fn pair_family(theta11: f64) -> Result<ThetaFamily> {
    theta_from_nu(&AtomicMeasure::new(vec![(0.5, theta11)])?, 0.0, 2)
}

/// `E[T_ε] = ε²/2 + ε/(2θ)` for a pair from the diagonal, `θ = 2θ(1:1)`.
pub fn pair_exit_mean(theta: f64, epsilon: f64) -> f64 {
    epsilon * epsilon / 2.0 + epsilon / (2.0 * theta)
}

/// `E[T_ε²] = 5ε⁴/12 + 5ε³/(6θ) + ε²/(2θ²)`
pub fn pair_exit_second_moment(theta: f64, epsilon: f64) -> f64 {
    let e2 = epsilon * epsilon;
    5.0 * e2 * e2 / 12.0 + 5.0 * e2 * epsilon / (6.0 * theta) + e2 / (2.0 * theta * theta)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub stats: ExitStats,
    pub checks: Vec<Check>,
}

/// First and second moments of the pair exit time against their exact values.
#[allow(clippy::too_many_arguments)]
pub fn moment_check_n2(
    theta11: f64,
    epsilon: f64,
    n: f64,
    replicas: usize,
    seed: u64,
    parallelism: usize,
    tolerances: (f64, f64),
) -> Result<MomentReport> {
    let theta = 2.0 * theta11;
    let stats = exit_experiment(&pair_family(theta11)?, 2, epsilon, n, replicas, seed, parallelism)?;
    let checks = vec![
        Check::within("E[T]", stats.time.mean, stats.time.stderr(), pair_exit_mean(theta, epsilon), tolerances.0),
        Check::within(
            "E[T^2]",
            stats.time_sq.mean,
            stats.time_sq.stderr(),
            pair_exit_second_moment(theta, epsilon),
            tolerances.1,
        ),
    ];
    Ok(MomentReport { stats, checks })
}

/// Off-diagonal occupation bound for any `N` and, for `N = 3`, the bound on
/// the smallest gap at exit.
pub fn occupation_bound_check(
    theta: &ThetaFamily,
    dim: usize,
    epsilon: f64,
    n: f64,
    replicas: usize,
    seed: u64,
    parallelism: usize,
) -> Result<MomentReport> {
    let stats = exit_experiment(theta, dim, epsilon, n, replicas, seed, parallelism)?;
    let occ = stats.off_diagonal;
    let mut checks = vec![Check::at_most(
        "off-diagonal occupation",
        occ.mean,
        occ.stderr(),
        (dim * (dim - 1)) as f64 / 4.0 * epsilon * epsilon,
        3.0 * occ.stderr(),
    )];
    if dim == 3 {
        let gap = stats.min_gap;
        let pair_theta = 2.0 * theta.get(1, 1).unwrap();
        checks.push(Check::at_most(
            "min gap at exit",
            gap.mean,
            gap.stderr(),
            6.0 * pair_theta * epsilon * epsilon,
            3.0 * gap.stderr(),
        ));
    }
    Ok(MomentReport { stats, checks })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub bins: usize,
    pub replicas: usize,
    pub pass: bool,
}

/// Significance level of the distributional tests.
pub const SIGNIFICANCE: f64 = 1e-3;

/// Differences beyond this are pooled into one tail bin.
pub const TAIL_CUTOFF: i64 = 10;

const MIN_BIN_COUNT: u64 = 10;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Bin {
    Value(Vec<i64>),
    Tail,
}

fn bin_of(x: &[i64]) -> Bin {
    let key: Vec<i64> = if x.len() == 1 { x.to_vec() } else { x.windows(2).map(|w| w[0] - w[1]).collect() };
    if key.iter().any(|v| v.abs() > TAIL_CUTOFF) {
        Bin::Tail
    } else {
        Bin::Value(key)
    }
}

/// Two-sample chi-square test of equal laws for integer vectors. Bins with
/// fewer than ten observations in total are pooled.
pub fn two_sample_chi_square(a: &[Vec<i64>], b: &[Vec<i64>]) -> Result<(f64, usize, f64, usize)> {
    let mut table: BTreeMap<Bin, (u64, u64)> = BTreeMap::new();
    for x in a {
        table.entry(bin_of(x)).or_default().0 += 1;
    }
    for x in b {
        table.entry(bin_of(x)).or_default().1 += 1;
    }
    let mut bins: Vec<(u64, u64)> = Vec::new();
    let mut rare = (0u64, 0u64);
    for (_, (ca, cb)) in table {
        if ca + cb < MIN_BIN_COUNT {
            rare.0 += ca;
            rare.1 += cb;
        } else {
            bins.push((ca, cb));
        }
    }
    if rare.0 + rare.1 > 0 {
        if rare.0 + rare.1 >= MIN_BIN_COUNT || bins.is_empty() {
            bins.push(rare);
        } else {
            let smallest = (0..bins.len()).min_by_key(|&i| bins[i].0 + bins[i].1).unwrap();
            bins[smallest].0 += rare.0;
            bins[smallest].1 += rare.1;
        }
    }
    if bins.len() < 2 {
        return Err(Error::DegenerateBinning(format!("{} usable bin(s) after pooling", bins.len())));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let statistic: f64 = bins
        .iter()
        .map(|&(ca, cb)| {
            let d = ka * ca as f64 - kb * cb as f64;
            d * d / (ca + cb) as f64
        })
        .sum();
    let dof = bins.len() - 1;
    let p_value = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?.sf(statistic);
    Ok((statistic, dof, p_value, bins.len()))
}

/// Compares particles moved in sampled environments with the lattice chain
/// `G_N^p`, `p` the moment family of `μ`, at time `t`.
pub fn equivalence_test(
    mu: &AtomicMeasure,
    x0: &[i64],
    t: f64,
    replicas: usize,
    seed: u64,
    parallelism: usize,
) -> Result<EquivalenceReport> {
    check_replicas(replicas)?;
    if x0.is_empty() {
        return Err(Error::DimensionTooSmall { got: 0, min: 1 });
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time t = {t} must be positive")));
    }
    let p = p_from_mu(mu, x0.len())?;
    let spec = ChainSpec::new(p, x0.to_vec(), t)?;

    let env_seed = rng::derive_seed(seed, Domain::Replica, 0);
    let flow_side = replicate(replicas, env_seed, parallelism, |i, rng| {
        let env = Environment::new(rng::derive_seed(seed, Domain::EnvironmentSeed, i), mu.clone(), t)?;
        let paths = sample_particles(&env, x0, 0.0, t, rng)?;
        Ok(paths.iter().map(|p| p.final_state()[0]).collect::<Vec<i64>>())
    })?;
    let chain_seed = rng::derive_seed(seed, Domain::Replica, 1);
    let chain_side =
        replicate(replicas, chain_seed, parallelism, |_, rng| Ok(simulate_chain(&spec, rng)?.final_state().to_vec()))?;
    let (a, _) = successes(flow_side)?;
    let (b, _) = successes(chain_side)?;
    let (statistic, dof, p_value, bins) = two_sample_chi_square(&a, &b)?;
    Ok(EquivalenceReport { statistic, degrees_of_freedom: dof, p_value, bins, replicas, pass: p_value > SIGNIFICANCE })
}

/// Path functionals whose mean is constant in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum MartingaleForm {
    /// `X_i(t) − d·t`
    CoordinateMinusDrift { i: usize, drift: f64 },
    /// `(X_i − d t)(X_j − d t) − c ∫1(X_i = X_j)`
    ProductForm { i: usize, j: usize, drift: f64, bracket_rate: f64 },
    /// `|X_i − X_j| − r ∫1(X_i = X_j)`
    AbsDiffForm { i: usize, j: usize, rate: f64 },
}

impl MartingaleForm {
    /// Absolute-difference form of the lattice chain: `r = 4p(1:1)`.
    pub fn lattice_abs_diff(p: &PFamily, i: usize, j: usize) -> Self {
        Self::AbsDiffForm { i, j, rate: 4.0 * p.get(1, 1).unwrap() }
    }

    /// Absolute-difference form of the continuum family: `r = 4θ(1:1)`.
    pub fn continuum_abs_diff(theta: &ThetaFamily, i: usize, j: usize) -> Self {
        Self::AbsDiffForm { i, j, rate: 4.0 * theta.get(1, 1).unwrap() }
    }

    /// Product form of the lattice chain: `c = p(2:0) + p(0:2) − 2p(1:1)`.
    pub fn lattice_product(p: &PFamily, i: usize, j: usize) -> Self {
        let c = p.get(2, 0).unwrap() + p.get(0, 2).unwrap() - 2.0 * p.get(1, 1).unwrap();
        Self::ProductForm { i, j, drift: p.drift(), bracket_rate: c }
    }

    pub fn eval(&self, path: &JumpPath<f64>, t: f64) -> Result<f64> {
        let x = path.value_at(t)?;
        match *self {
            Self::CoordinateMinusDrift { i, drift } => Ok(x[i] - drift * t),
            Self::ProductForm { i, j, drift, bracket_rate } => {
                let together = path.occupation(t, |s| s[i] == s[j])?;
                Ok((x[i] - drift * t) * (x[j] - drift * t) - bracket_rate * together)
            }
            Self::AbsDiffForm { i, j, rate } => {
                let together = path.occupation(t, |s| s[i] == s[j])?;
                Ok((x[i] - x[j]).abs() - rate * together)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub form: MartingaleForm,
    pub grid: Vec<f64>,
    pub means: Vec<McEstimate>,
    /// Differences of the mean between grid points `a < b`.
    pub pairs: Vec<Check>,
    pub pass: bool,
}

/// Estimates the functional's mean at each grid time; passes iff the means
/// agree pairwise within 3 standard errors of the per-replica differences.
pub fn martingale_drift_check<F>(
    sampler: F,
    form: MartingaleForm,
    grid: &[f64],
    replicas: usize,
    seed: u64,
    parallelism: usize,
) -> Result<MartingaleReport>
where
    F: Fn(&mut SimRng) -> Result<JumpPath<f64>> + Sync,
{
    check_replicas(replicas)?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty time grid".into()));
    }
    let rows = replicate(replicas, seed, parallelism, |_, rng| {
        let path = sampler(rng)?;
        grid.iter().map(|&t| form.eval(&path, t)).collect::<Result<Vec<f64>>>()
    })?;
    let (rows, failed) = successes(rows)?;
    let column = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
    let means = (0..grid.len()).map(|k| McEstimate::from_samples(&column(k), seed, failed)).collect();
    let mut pairs = Vec::new();
    for a in 0..grid.len() {
        for b in a + 1..grid.len() {
            let d = Moments::from_slice(&rows.iter().map(|r| r[b] - r[a]).collect::<Vec<f64>>());
            pairs.push(Check::within(
                format!("mean({}) - mean({})", grid[b], grid[a]),
                d.mean,
                d.stderr(),
                0.0,
                3.0 * d.stderr(),
            ));
        }
    }
    let pass = pairs.iter().all(|c| c.pass);
    Ok(MartingaleReport { form, grid: grid.to_vec(), means, pairs, pass })
}

/// Sampler of rescaled paths of the `θ` family from `x0`.
pub fn continuum_sampler(
    theta: &ThetaFamily,
    x0: &[f64],
    horizon: f64,
    n: f64,
) -> Result<impl Fn(&mut SimRng) -> Result<JumpPath<f64>> + Sync> {
    let p = p_n_from_theta(theta, n)?;
    let start: Vec<i64> = x0.iter().map(|&v| crate::chain::snap(v, n)).collect();
    let spec = ChainSpec::new(p, start, horizon * n)?;
    Ok(move |rng: &mut SimRng| rescale(&simulate_chain(&spec, rng)?, n))
}

/// Sampler of raw lattice paths of `G_N^p`, as reals.
pub fn lattice_sampler(spec: ChainSpec) -> impl Fn(&mut SimRng) -> Result<JumpPath<f64>> + Sync {
    move |rng: &mut SimRng| Ok(simulate_chain(&spec, rng)?.map(|t| t, |y| y as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiValueRow {
    pub epsilon: f64,
    pub probability: f64,
    pub stderr: f64,
    /// `P(Λ)/ε`
    pub ratio: f64,
}

/// Frequency of exits with three or more distinct values, per `ε`.
pub fn multi_value_diagnostic(
    theta: &ThetaFamily,
    dim: usize,
    epsilons: &[f64],
    n: f64,
    replicas: usize,
    seed: u64,
    parallelism: usize,
) -> Result<Vec<MultiValueRow>> {
    epsilons
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            let stats = exit_experiment(theta, dim, eps, n, replicas, rng::derive_seed(seed, Domain::Replica, k as u64), parallelism)?;
            let (p, se) = stats.frequency(stats.multi_value);
            Ok(MultiValueRow { epsilon: eps, probability: p, stderr: se, ratio: p / eps })
        })
        .collect()
}
