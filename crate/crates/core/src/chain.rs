//! The N-point lattice chain with generator `G_N^p` and its diffusive scaling.
//!
//! From `x`, each class of `π(x)` of size `m` moves at total rate
//! `Σ_k C(m,k) p(k:m−k) = 1`: with probability `C(m,k) p(k:m−k)` a uniformly
//! chosen `k`-subset steps up and the remaining `m − k` members step down.
//! The chain therefore jumps at rate `|π(x)|`, the number of distinct values.

use rand::Rng;
use rand_distr::Exp1;

use crate::cells::MAX_DIM;
use crate::error::{Error, Result};
use crate::params::{binomial, p_n_from_theta, theta_from_nu, validate_p, AtomicMeasure, PFamily, ThetaFamily};
use crate::path::JumpPath;

/// Hard cap on events in a single first-passage replica.
pub const EVENT_CAP: u64 = 1_000_000_000;

/// Inputs of [`simulate_chain`].
#[derive(Debug, Clone)]
pub struct ChainSpec {
    pub p: PFamily,
    pub x0: Vec<i64>,
    pub horizon: f64,
}

impl ChainSpec {
    pub fn new(p: PFamily, x0: Vec<i64>, horizon: f64) -> Result<Self> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon {horizon} must be finite and ≥ 0")));
        }
        Chain::new(&p, x0.len())?;
        Ok(Self { p, x0, horizon })
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }
}

/// Jump law of `G_N^p`, precomputed as cumulative split-size tables per class size.
#[derive(Debug, Clone)]
pub struct Chain {
    dim: usize,
    // split_cdf[m][k] = Σ_{j ≤ k} C(m,j) p(j:m−j)
    split_cdf: Vec<Vec<f64>>,
}

impl Chain {
    pub fn new(p: &PFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionTooSmall { got: 0, min: 1 });
        }
        if dim > MAX_DIM {
            return Err(Error::DimensionTooLarge(dim));
        }
        if p.max_order() < dim {
            return Err(Error::FamilyTooSmall { covered: p.max_order(), needed: dim });
        }
        if let Some(v) = validate_p(p).into_iter().next() {
            return Err(Error::InvalidFamily(v.to_string()));
        }
        let split_cdf = (0..=dim)
            .map(|m| {
                let mut acc = 0.0;
                (0..=m)
                    .map(|k| {
                        acc += binomial(m, k) * p.get(k, m - k).unwrap();
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(Self { dim, split_cdf })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total jump rate of a class of size `m`; 1 for a valid family.
    pub fn class_rate(&self, m: usize) -> f64 {
        *self.split_cdf[m].last().unwrap()
    }

    fn sample_split<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> usize {
        let cdf = &self.split_cdf[m];
        let u = rng.gen::<f64>() * cdf[m];
        cdf.iter().position(|&c| u < c).unwrap_or(m)
    }

    pub fn walker(&self, x0: &[i64]) -> Result<Walker<'_>> {
        if x0.len() != self.dim {
            return Err(Error::InvalidArgument(format!("start has {} coordinates, chain has {}", x0.len(), self.dim)));
        }
        Ok(Walker { chain: self, state: x0.to_vec(), time: 0.0, events: 0, order: (0..self.dim).collect() })
    }
}

/// A running realization of the chain.
#[derive(Debug, Clone)]
pub struct Walker<'a> {
    chain: &'a Chain,
    state: Vec<i64>,
    time: f64,
    events: u64,
    order: Vec<usize>,
}

impl Walker<'_> {
    pub fn state(&self) -> &[i64] {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Number of distinct coordinate values, which is also the exit rate.
    pub fn classes(&self) -> usize {
        let x = &self.state;
        (0..x.len()).filter(|&i| !x[..i].contains(&x[i])).count()
    }

    /// Performs one jump and returns the holding time that preceded it.
    pub fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let x = &mut self.state;
        let order = &mut self.order;
        order.sort_unstable_by_key(|&i| x[i]);
        let mut starts = [0usize; MAX_DIM + 1];
        let mut count = 0;
        for j in 0..order.len() {
            if j == 0 || x[order[j]] != x[order[j - 1]] {
                starts[count] = j;
                count += 1;
            }
        }
        starts[count] = order.len();
        debug_assert!(
            ((0..count).map(|c| self.chain.class_rate(starts[c + 1] - starts[c])).sum::<f64>() - count as f64).abs()
                <= 1e-9,
            "exit rate differs from the number of classes"
        );

        let holding = rng.sample::<f64, _>(Exp1) / count as f64;
        let c = rng.gen_range(0..count);
        let members = &mut order[starts[c]..starts[c + 1]];
        let m = members.len();
        let k = self.chain.sample_split(m, rng);
        for j in 0..k {
            let pick = rng.gen_range(j..m);
            members.swap(j, pick);
        }
        for (j, &i) in members.iter().enumerate() {
            x[i] += if j < k { 1 } else { -1 };
        }
        self.time += holding;
        self.events += 1;
        holding
    }

    /// Runs until `stop(state)` holds, returning the stopping time.
    pub fn run_until<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        cap: u64,
        mut stop: impl FnMut(f64, &[i64]) -> bool,
    ) -> Result<f64> {
        while !stop(self.time, &self.state) {
            if self.events >= cap {
                return Err(Error::EventCap(cap));
            }
            self.advance(rng);
        }
        Ok(self.time)
    }
}

/// One path of `G_N^p` on `[0, T]`.
pub fn simulate_chain<R: Rng + ?Sized>(spec: &ChainSpec, rng: &mut R) -> Result<JumpPath<i64>> {
    let chain = Chain::new(&spec.p, spec.dim())?;
    let mut walker = chain.walker(&spec.x0)?;
    let mut path = JumpPath::new(0.0, &spec.x0, spec.horizon);
    loop {
        walker.advance(rng);
        if walker.time() > spec.horizon {
            break;
        }
        path.push(walker.time(), walker.state());
    }
    Ok(path)
}

/// `Y^n(t) = n^{−1/2} Y(nt)`
pub fn rescale(path: &JumpPath<i64>, n: f64) -> Result<JumpPath<f64>> {
    if !(n >= 1.0) || !n.is_finite() {
        return Err(Error::InvalidArgument(format!("resolution n = {n} must be ≥ 1")));
    }
    let scale = n.sqrt().recip();
    Ok(path.map(|t| t / n, |y| y as f64 * scale))
}

/// Nearest point of `n^{−1/2} Z`, ties toward −∞, in lattice units.
pub fn snap(value: f64, n: f64) -> i64 {
    (value * n.sqrt() - 0.5).ceil() as i64
}

/// Approximate sample of the `A_N^θ` family from `x0` on `[0, T]`: the chain
/// with rates `p_n` run from the snapped start, then rescaled.
pub fn sample_continuum_family<R: Rng + ?Sized>(
    theta: &ThetaFamily,
    x0: &[f64],
    horizon: f64,
    n: f64,
    rng: &mut R,
) -> Result<JumpPath<f64>> {
    let p = p_n_from_theta(theta, n)?;
    let start: Vec<i64> = x0.iter().map(|&v| snap(v, n)).collect();
    let spec = ChainSpec::new(p, start, horizon * n)?;
    rescale(&simulate_chain(&spec, rng)?, n)
}

/// θ-family of a pair whose scaled gap is sticky BM with parameter `theta0`.
pub fn sticky_pair_family(theta0: f64) -> Result<ThetaFamily> {
    if !(theta0 > 0.0) || !theta0.is_finite() {
        return Err(Error::InvalidArgument(format!("stickiness θ0 = {theta0} must be positive and finite")));
    }
    let nu = AtomicMeasure::new(vec![(0.5, theta0 / (2.0 * std::f64::consts::SQRT_2))])?;
    theta_from_nu(&nu, 0.0, 2)
}

/// Lattice chain of a sticky pair at resolution `n`, started at gap `y0`.
///
/// Returns the compiled chain and the integer start. The scaled gap is
/// `|Y1 − Y2| / √(2n)`.
pub fn sticky_pair_chain(theta0: f64, y0: f64, n: f64) -> Result<(Chain, [i64; 2])> {
    if !(y0 >= 0.0) || !y0.is_finite() {
        return Err(Error::StartOutsideDomain(format!("y0 = {y0} must be finite and ≥ 0")));
    }
    let p = p_n_from_theta(&sticky_pair_family(theta0)?, n)?;
    let chain = Chain::new(&p, 2)?;
    Ok((chain, [snap(std::f64::consts::SQRT_2 * y0, n), 0]))
}

/// Approximate sticky Brownian motion `η(t) = |X1(t) − X2(t)| / √2` on `[0, T]`,
/// recorded only when `η` changes.
pub fn sample_sticky_bm<R: Rng + ?Sized>(
    theta0: f64,
    y0: f64,
    horizon: f64,
    n: f64,
    rng: &mut R,
) -> Result<JumpPath<f64>> {
    let (chain, start) = sticky_pair_chain(theta0, y0, n)?;
    let scale = (2.0 * n).sqrt().recip();
    let gap = |x: &[i64]| (x[0] - x[1]).unsigned_abs() as f64 * scale;
    let mut walker = chain.walker(&start)?;
    let mut path = JumpPath::new(0.0, &[gap(&start)], horizon);
    let mut last = (start[0] - start[1]).abs();
    loop {
        walker.advance(rng);
        let t = walker.time() / n;
        if t > horizon {
            break;
        }
        let d = (walker.state()[0] - walker.state()[1]).abs();
        if d != last {
            path.push(t, &[gap(walker.state())]);
            last = d;
        }
    }
    Ok(path)
}
