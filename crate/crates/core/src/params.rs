//! Parameter calculus: atomic measures on `[0,1]`, θ-families and p-families.
//!
//! Both families are triangular arrays indexed by `(k, l)` with
//! `k + l ≤ max_order`. A family built for `n_max` stores every entry with
//! `k + l ≤ n_max + 1`, which covers simulations in dimension up to
//! `n_max + 1`.

use std::collections::BTreeMap;
use std::fmt;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for consistency and normalization identities.
pub const FAMILY_TOL: f64 = 1e-12;

/// Number of Gauss–Legendre nodes used to turn a density into atoms.
pub const QUADRATURE_NODES: usize = 32;

/// A finite nonnegative measure on `[0,1]` given by its atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        for (index, &(x, w)) in atoms.iter().enumerate() {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidAtom { index, reason: format!("location {x} outside [0,1]") });
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidAtom { index, reason: format!("weight {w} is not a finite nonnegative number") });
            }
        }
        Ok(Self { atoms })
    }

    pub fn zero() -> Self {
        Self { atoms: Vec::new() }
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Self::new(vec![(x, 1.0)])
    }

    /// `½(δ_0 + δ_1)`
    pub fn endpoints() -> Self {
        Self { atoms: vec![(0.0, 0.5), (1.0, 0.5)] }
    }

    /// `scale · Lebesgue` on `[0,1]`, discretized at the Gauss–Legendre nodes.
    pub fn uniform(scale: f64) -> Result<Self> {
        Self::from_density(|_| scale)
    }

    /// Atoms at the Gauss–Legendre nodes of `[0,1]` reproducing the moments of
    /// `density(x) dx` up to degree `2·QUADRATURE_NODES − 1`.
    pub fn from_density(density: impl Fn(f64) -> f64) -> Result<Self> {
        let degree = NonZeroUsize::new(QUADRATURE_NODES).expect("nonzero");
        let rule = GaussLegendre::new(degree);
        let atoms = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(node, weight)| {
                let x = 0.5 * (node + 1.0);
                (x, 0.5 * weight * density(x))
            })
            .collect();
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total(&self) -> f64 {
        self.atoms.iter().map(|&(_, w)| w).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(x, w)| x * w).sum()
    }

    pub fn is_probability(&self) -> bool {
        (self.total() - 1.0).abs() <= FAMILY_TOL
    }

    /// `Σ w_i x_i = total / 2`
    pub fn is_centered(&self) -> bool {
        (self.mean() - self.total() / 2.0).abs() <= FAMILY_TOL
    }

    /// `∫ x^a (1-x)^b dm`
    pub fn moment(&self, a: usize, b: usize) -> f64 {
        self.atoms.iter().map(|&(x, w)| w * x.powi(a as i32) * (1.0 - x).powi(b as i32)).sum()
    }

    /// Index of the atom selected by a uniform draw `u ∈ [0,1)`, scanning the
    /// atoms in order. The measure must be a probability.
    pub fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, &(_, w)) in self.atoms.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        // rounding left u above the final partial sum
        self.atoms.iter().rposition(|&(_, w)| w > 0.0).unwrap_or(0)
    }
}

/// Triangular array of values at `(k, l)` with `k + l ≤ order`.
#[derive(Debug, Clone, PartialEq)]
struct Table {
    order: usize,
    values: Vec<f64>,
}

impl Table {
    fn filled(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity((order + 1) * (order + 2) / 2);
        for s in 0..=order {
            for k in 0..=s {
                values.push(f(k, s - k));
            }
        }
        Self { order, values }
    }

    fn index(k: usize, l: usize) -> usize {
        let s = k + l;
        s * (s + 1) / 2 + k
    }

    fn get(&self, k: usize, l: usize) -> Option<f64> {
        (k + l <= self.order).then(|| self.values[Self::index(k, l)])
    }

    fn set(&mut self, k: usize, l: usize, v: f64) {
        assert!(k + l <= self.order, "({k},{l}) outside table of order {}", self.order);
        self.values[Self::index(k, l)] = v;
    }

    fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.order).flat_map(move |s| (0..=s).map(move |k| (k, s - k, self.values[Self::index(k, s - k)])))
    }

    fn map(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        Self::filled(self.order, |k, l| f(k, l, self.values[Self::index(k, l)]))
    }

    /// `t(k:l) - t(k+1:l) - t(k:l+1)` wherever all three entries exist.
    fn consistency_residuals(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.order).flat_map(move |s| {
            (0..=s).map(move |k| {
                let l = s - k;
                let r = self.get(k, l).unwrap() - self.get(k + 1, l).unwrap() - self.get(k, l + 1).unwrap();
                (k, l, r)
            })
        })
    }
}

/// The parameters `θ(k:l)` of the generator `A_N^θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaFamily {
    n_max: usize,
    table: Table,
}

impl ThetaFamily {
    /// Builds a family from arbitrary values; use [`validate_theta`] to check it.
    pub fn from_fn(n_max: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self { n_max, table: Table::filled(n_max + 1, f) }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Highest `k + l` stored.
    pub fn max_order(&self) -> usize {
        self.table.order
    }

    pub fn get(&self, k: usize, l: usize) -> Option<f64> {
        self.table.get(k, l)
    }

    pub fn set(&mut self, k: usize, l: usize, v: f64) {
        self.table.set(k, l, v);
    }

    /// `θ(1:0) − θ(0:1)`
    pub fn beta(&self) -> f64 {
        self.table.get(1, 0).unwrap() - self.table.get(0, 1).unwrap()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.table.entries()
    }
}

/// The jump rates `p(k:l)` of the lattice generator `G_N^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PFamily {
    n_max: usize,
    table: Table,
}

impl PFamily {
    pub fn from_fn(n_max: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self { n_max, table: Table::filled(n_max + 1, f) }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn max_order(&self) -> usize {
        self.table.order
    }

    pub fn get(&self, k: usize, l: usize) -> Option<f64> {
        self.table.get(k, l)
    }

    pub fn set(&mut self, k: usize, l: usize, v: f64) {
        self.table.set(k, l, v);
    }

    /// `p(1:0) − p(0:1)`
    pub fn drift(&self) -> f64 {
        self.table.get(1, 0).unwrap() - self.table.get(0, 1).unwrap()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.table.entries()
    }

    /// `Σ_k C(m,k) p(k:m−k)`, the total jump rate of a class of size `m`.
    pub fn class_rate(&self, m: usize) -> Option<f64> {
        (m <= self.table.order).then(|| (0..=m).map(|k| binomial(m, k) * self.table.get(k, m - k).unwrap()).sum())
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `p(k:l) = ∫ x^k (1−x)^l μ(dx)`
pub fn p_from_mu(mu: &AtomicMeasure, n_max: usize) -> Result<PFamily> {
    if !mu.is_probability() {
        return Err(Error::NotProbability(mu.total()));
    }
    Ok(PFamily::from_fn(n_max, |k, l| mu.moment(k, l)))
}

/// Splitting rates `θ(k:l) = ∫ x^{k−1}(1−x)^{l−1} ν(dx)` for `k, l ≥ 1`,
/// completed with the gauge `θ(0:1) = 0`, `θ(1:0) = β` and the downward
/// consistency recursion along the edges.
pub fn theta_from_nu(nu: &AtomicMeasure, beta: f64, n_max: usize) -> Result<ThetaFamily> {
    if let Some((index, &(_, w))) = nu.atoms().iter().enumerate().find(|(_, &(_, w))| w < 0.0) {
        return Err(Error::InvalidAtom { index, reason: format!("negative weight {w}") });
    }
    let order = n_max + 1;
    let mut theta = ThetaFamily::from_fn(n_max, |k, l| if k >= 1 && l >= 1 { nu.moment(k - 1, l - 1) } else { 0.0 });
    theta.set(1, 0, beta);
    theta.set(0, 1, 0.0);
    theta.set(0, 0, beta);
    for k in 1..order {
        let down = theta.get(k, 0).unwrap() - theta.get(k, 1).unwrap();
        theta.set(k + 1, 0, down);
        let up = theta.get(0, k).unwrap() - theta.get(1, k).unwrap();
        theta.set(0, k + 1, up);
    }
    Ok(theta)
}

/// `θ̃(k:l) = θ(k:l) + α·1(k=0) + α·1(l=0)`; leaves `A_N^θ` unchanged.
pub fn gauge_shift(theta: &ThetaFamily, alpha: f64) -> ThetaFamily {
    let table = theta.table.map(|k, l, v| v + if k == 0 { alpha } else { 0.0 } + if l == 0 { alpha } else { 0.0 });
    ThetaFamily { n_max: theta.n_max, table }
}

/// `θ̃(k:l) = θ(k:l) + β·1(k=0) − β·1(l=0)` with `β` the family drift.
///
/// The result has drift `−β` and satisfies `2β f(𝟙) + A^θ̃ f = A^θ f`. The
/// map is an involution.
pub fn drift_transform(theta: &ThetaFamily) -> ThetaFamily {
    let beta = theta.beta();
    let table = theta.table.map(|k, l, v| v + if k == 0 { beta } else { 0.0 } - if l == 0 { beta } else { 0.0 });
    ThetaFamily { n_max: theta.n_max, table }
}

/// `p_n(k:l) = ½·1(k=0) + ½·1(l=0) + n^{−1/2} θ(k:l)`.
///
/// The family is first gauge-shifted so that `θ(0:0) = 0`, which makes
/// `p_n(0:0) = 1` for every drift; families with `β = 0` in the standard gauge
/// are unaffected.
pub fn p_n_from_theta(theta: &ThetaFamily, n: f64) -> Result<PFamily> {
    if !(n >= 1.0) || !n.is_finite() {
        return Err(Error::InvalidArgument(format!("resolution n = {n} must be ≥ 1")));
    }
    let theta00 = theta.get(0, 0).unwrap();
    let normalized = if theta00 == 0.0 { theta.clone() } else { gauge_shift(theta, -theta00 / 2.0) };
    let scale = n.sqrt().recip();
    let table = normalized.table.map(|k, l, v| {
        0.5 * f64::from(u8::from(k == 0)) + 0.5 * f64::from(u8::from(l == 0)) + scale * v
    });
    if let Some((k, l, value)) = table.entries().find(|&(_, _, v)| v < 0.0) {
        return Err(Error::NegativeRate { k, l, value, n });
    }
    Ok(PFamily { n_max: theta.n_max, table })
}

/// One violated family invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// `t(k:l) ≠ t(k+1:l) + t(k:l+1)`
    Consistency { k: usize, l: usize, residual: f64 },
    /// `θ(k:l) < 0` with `k, l ≥ 1`
    Positivity { k: usize, l: usize, value: f64 },
    /// `p(k:l) < 0` or `p(k:l) > 1`
    OutOfRange { k: usize, l: usize, value: f64 },
    /// `p(0:0) ≠ 1`
    Normalization { value: f64 },
    /// `Σ_k C(n,k) p(k:n−k) ≠ 1`
    Binomial { n: usize, residual: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Consistency { k, l, residual } => write!(f, "consistency violated at ({k},{l}): residual {residual:e}"),
            Violation::Positivity { k, l, value } => write!(f, "positivity violated at ({k},{l}): value {value}"),
            Violation::OutOfRange { k, l, value } => write!(f, "p({k}:{l}) = {value} outside [0,1]"),
            Violation::Normalization { value } => write!(f, "p(0:0) = {value} ≠ 1"),
            Violation::Binomial { n, residual } => write!(f, "binomial identity violated at n = {n}: residual {residual:e}"),
        }
    }
}

fn consistency_violations(table: &Table) -> impl Iterator<Item = Violation> + '_ {
    table
        .consistency_residuals()
        .filter(|&(_, _, r)| r.abs() > FAMILY_TOL)
        .map(|(k, l, residual)| Violation::Consistency { k, l, residual })
}

/// Consistency everywhere and positivity of the splitting rates.
pub fn validate_theta(theta: &ThetaFamily) -> Vec<Violation> {
    let mut out: Vec<Violation> = consistency_violations(&theta.table).collect();
    out.extend(
        theta
            .entries()
            .filter(|&(k, l, v)| k >= 1 && l >= 1 && v < 0.0)
            .map(|(k, l, value)| Violation::Positivity { k, l, value }),
    );
    out
}

/// Normalization, range, consistency and the binomial identity for every
/// `n ≤ n_max`.
pub fn validate_p(p: &PFamily) -> Vec<Violation> {
    let mut out = Vec::new();
    let p00 = p.get(0, 0).unwrap();
    if (p00 - 1.0).abs() > FAMILY_TOL {
        out.push(Violation::Normalization { value: p00 });
    }
    out.extend(consistency_violations(&p.table));
    out.extend(
        p.entries()
            .filter(|&(_, _, v)| !(0.0..=1.0 + FAMILY_TOL).contains(&v))
            .map(|(k, l, value)| Violation::OutOfRange { k, l, value }),
    );
    for n in 0..=p.n_max.min(p.max_order()) {
        let residual = p.class_rate(n).unwrap() - 1.0;
        if residual.abs() > FAMILY_TOL {
            out.push(Violation::Binomial { n, residual });
        }
    }
    out
}

/// JSON document for families: `{"kind", "n_max", "beta", "values": {"k,l": v}}`.
/// For p-families `beta` carries the lattice drift `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<FamilyKind>,
    pub n_max: usize,
    pub beta: f64,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Theta,
    P,
}

fn table_to_values(table: &Table) -> BTreeMap<String, f64> {
    table.entries().map(|(k, l, v)| (format!("{k},{l}"), v)).collect()
}

fn table_from_values(n_max: usize, values: &BTreeMap<String, f64>) -> Result<Table> {
    let mut table = Table::filled(n_max + 1, |_, _| f64::NAN);
    for (key, &v) in values {
        let (k, l) = key
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?)))
            .ok_or_else(|| Error::InvalidFamily(format!("bad key {key:?}, expected \"k,l\"")))?;
        if k + l > n_max + 1 {
            return Err(Error::InvalidFamily(format!("entry ({k},{l}) exceeds order {}", n_max + 1)));
        }
        table.set(k, l, v);
    }
    if let Some((k, l, _)) = table.entries().find(|(_, _, v)| v.is_nan()) {
        return Err(Error::InvalidFamily(format!("missing entry ({k},{l})")));
    }
    Ok(table)
}

impl ThetaFamily {
    pub fn to_doc(&self) -> FamilyDoc {
        FamilyDoc { kind: Some(FamilyKind::Theta), n_max: self.n_max, beta: self.beta(), values: table_to_values(&self.table) }
    }

    pub fn from_doc(doc: &FamilyDoc) -> Result<Self> {
        if doc.kind == Some(FamilyKind::P) {
            return Err(Error::InvalidFamily("document holds a p-family".into()));
        }
        let theta = Self { n_max: doc.n_max, table: table_from_values(doc.n_max, &doc.values)? };
        if (theta.beta() - doc.beta).abs() > FAMILY_TOL {
            return Err(Error::InvalidFamily(format!(
                "beta {} disagrees with θ(1:0) − θ(0:1) = {}",
                doc.beta,
                theta.beta()
            )));
        }
        Ok(theta)
    }
}

impl PFamily {
    pub fn to_doc(&self) -> FamilyDoc {
        FamilyDoc { kind: Some(FamilyKind::P), n_max: self.n_max, beta: self.drift(), values: table_to_values(&self.table) }
    }

    pub fn from_doc(doc: &FamilyDoc) -> Result<Self> {
        if doc.kind == Some(FamilyKind::Theta) {
            return Err(Error::InvalidFamily("document holds a θ-family".into()));
        }
        let p = Self { n_max: doc.n_max, table: table_from_values(doc.n_max, &doc.values)? };
        if (p.drift() - doc.beta).abs() > FAMILY_TOL {
            return Err(Error::InvalidFamily(format!("drift {} disagrees with p(1:0) − p(0:1) = {}", doc.beta, p.drift())));
        }
        Ok(p)
    }
}
