//! The lattice flow of kernels on `Z` driven by a marked Poisson environment.
//!
//! Each site carries a rate-1 Poisson clock on `[0, T_max]`; every ring comes
//! with a mark `r` drawn from `μ`. When a site rings, the mass sitting there is
//! split: a fraction `r` moves one step right, the rest one step left. A
//! particle moving in the same environment jumps right with probability `r`.

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::sync::{Arc, RwLock};

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::params::AtomicMeasure;
use crate::path::JumpPath;
use crate::rng::{self, Domain};

/// Weights below this are dropped when a kernel row is written out.
pub const SERIALIZE_TRIM: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteEvent {
    pub time: f64,
    pub mark: f64,
}

/// A seeded realization of the marked Poisson process on `[0, T_max] × Z`.
///
/// Site streams are generated on first access from `(seed, site)` alone, so
/// the order in which sites are touched never changes what they contain.
#[derive(Debug)]
pub struct Environment {
    seed: u64,
    horizon: f64,
    mu: AtomicMeasure,
    sites: RwLock<HashMap<i64, Arc<[SiteEvent]>>>,
}

impl Environment {
    pub fn new(seed: u64, mu: AtomicMeasure, horizon: f64) -> Result<Self> {
        if !mu.is_probability() {
            return Err(Error::NotProbability(mu.total()));
        }
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon {horizon} must be finite and ≥ 0")));
        }
        Ok(Self { seed, horizon, mu, sites: RwLock::new(HashMap::new()) })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn mark_law(&self) -> &AtomicMeasure {
        &self.mu
    }

    /// Event stream of `site`, sorted by time.
    pub fn site(&self, site: i64) -> Arc<[SiteEvent]> {
        if let Some(events) = self.sites.read().expect("site cache poisoned").get(&site) {
            return Arc::clone(events);
        }
        let fresh: Arc<[SiteEvent]> = self.generate(site).into();
        match self.sites.write().expect("site cache poisoned").entry(site) {
            // another caller filled it first; both streams are identical
            Entry::Occupied(e) => Arc::clone(e.get()),
            Entry::Vacant(e) => Arc::clone(e.insert(fresh)),
        }
    }

    /// Number of sites materialized so far.
    pub fn touched_sites(&self) -> usize {
        self.sites.read().expect("site cache poisoned").len()
    }

    fn generate(&self, site: i64) -> Vec<SiteEvent> {
        let mut rng = rng::stream(self.seed, Domain::Environment, rng::site_index(site));
        let mut events = Vec::new();
        let mut t = 0.0;
        loop {
            let gap: f64 = rng.sample(Exp1);
            if gap == 0.0 {
                continue;
            }
            t += gap;
            if t > self.horizon {
                break;
            }
            let atom = self.mu.sample_index(rng.gen::<f64>());
            events.push(SiteEvent { time: t, mark: self.mu.atoms()[atom].0 });
        }
        events
    }

    fn check_window(&self, s: f64, t: f64) -> Result<()> {
        if !(0.0 <= s && s <= t && t <= self.horizon) {
            return Err(Error::WindowOutsideHorizon { s, t, horizon: self.horizon });
        }
        Ok(())
    }

    /// Index of the first event at `site` strictly after `after`.
    fn next_index(events: &[SiteEvent], after: f64) -> usize {
        events.partition_point(|e| e.time <= after)
    }
}

/// A kernel row `K_{s,t}(x0, ·)`: weights on consecutive sites from `offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassVector {
    pub offset: i64,
    pub weights: Vec<f64>,
}

impl MassVector {
    pub fn dirac(site: i64) -> Self {
        Self { offset: site, weights: vec![1.0] }
    }

    pub fn weight(&self, site: i64) -> f64 {
        usize::try_from(site - self.offset).ok().and_then(|i| self.weights.get(i)).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `(site, weight)` for every stored site, zeros included.
    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.weights.iter().enumerate().map(move |(i, &w)| (self.offset + i as i64, w))
    }

    /// Sites with weight at or above [`SERIALIZE_TRIM`].
    pub fn trimmed(&self) -> Vec<(i64, f64)> {
        self.iter().filter(|&(_, w)| w >= SERIALIZE_TRIM).collect()
    }

    /// Largest absolute difference over the union of supports.
    pub fn max_abs_diff(&self, other: &MassVector) -> f64 {
        let lo = self.offset.min(other.offset);
        let hi = (self.offset + self.weights.len() as i64).max(other.offset + other.weights.len() as i64);
        (lo..hi).map(|y| (self.weight(y) - other.weight(y)).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    time: f64,
    site: i64,
    index: usize,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Pending {
    // reversed: BinaryHeap pops the earliest event, ties by lower site
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.site.cmp(&self.site))
    }
}

/// Exact kernel row `K_{s,t}(x0, ·)`: unit mass at `x0` at time `s`, pushed
/// through every environment event in `(s, t]` in time order.
pub fn propagate_kernel(env: &Environment, x0: i64, s: f64, t: f64) -> Result<MassVector> {
    env.check_window(s, t)?;
    let mut mass: VecDeque<f64> = VecDeque::from([1.0]);
    let mut lo = x0;
    let mut queue = BinaryHeap::new();
    let mut streams: HashMap<i64, Arc<[SiteEvent]>> = HashMap::new();

    let track = |site: i64, after: f64, queue: &mut BinaryHeap<Pending>, streams: &mut HashMap<i64, Arc<[SiteEvent]>>| {
        let events = env.site(site);
        let index = Environment::next_index(&events, after);
        if let Some(e) = events.get(index) {
            if e.time <= t {
                queue.push(Pending { time: e.time, site, index });
            }
        }
        streams.insert(site, events);
    };
    track(x0, s, &mut queue, &mut streams);

    while let Some(Pending { time, site, index }) = queue.pop() {
        let events = Arc::clone(&streams[&site]);
        let r = events[index].mark;
        let slot = (site - lo) as usize;
        let m = mass[slot];
        if m > 0.0 {
            mass[slot] = 0.0;
            let right = r * m;
            let left = m - right;
            if right > 0.0 {
                if slot + 1 == mass.len() {
                    mass.push_back(0.0);
                    track(site + 1, time, &mut queue, &mut streams);
                }
                mass[slot + 1] += right;
            }
            if left > 0.0 {
                let slot = if slot == 0 {
                    mass.push_front(0.0);
                    lo -= 1;
                    track(site - 1, time, &mut queue, &mut streams);
                    1
                } else {
                    slot
                };
                mass[slot - 1] += left;
            }
        }
        if let Some(next) = events.get(index + 1) {
            if next.time <= t {
                queue.push(Pending { time: next.time, site, index: index + 1 });
            }
        }
    }
    Ok(MassVector { offset: lo, weights: mass.into() })
}

/// Max-norm distance between `K_{s,u}(x0,·)` and `Σ_y K_{s,t}(x0,y) K_{t,u}(y,·)`.
pub fn compose_check(env: &Environment, x0: i64, s: f64, t: f64, u: f64) -> Result<f64> {
    env.check_window(s, t)?;
    env.check_window(t, u)?;
    let direct = propagate_kernel(env, x0, s, u)?;
    let first = propagate_kernel(env, x0, s, t)?;
    let mut composed: HashMap<i64, f64> = HashMap::new();
    for (y, w) in first.iter().filter(|&(_, w)| w > 0.0) {
        for (z, v) in propagate_kernel(env, y, t, u)?.iter() {
            *composed.entry(z).or_insert(0.0) += w * v;
        }
    }
    let lo = composed.keys().copied().min().unwrap_or(x0).min(direct.offset);
    let hi = composed.keys().copied().max().unwrap_or(x0).max(direct.offset + direct.weights.len() as i64 - 1);
    Ok((lo..=hi)
        .map(|z| (direct.weight(z) - composed.get(&z).copied().unwrap_or(0.0)).abs())
        .fold(0.0, f64::max))
}

/// `N` particles moving conditionally independently in `env` over `(s, t]`.
///
/// At each event `(u, y, r)` every particle at `y` draws its own uniform and
/// steps to `y + 1` if it is below `r`, else to `y − 1`. Particles are visited
/// in index order.
pub fn sample_particles<R: Rng + ?Sized>(
    env: &Environment,
    x: &[i64],
    s: f64,
    t: f64,
    rng: &mut R,
) -> Result<Vec<JumpPath<i64>>> {
    env.check_window(s, t)?;
    let mut pos = x.to_vec();
    let mut paths: Vec<JumpPath<i64>> = x.iter().map(|&p| JumpPath::new(s, &[p], t)).collect();
    let mut now = s;
    let mut occupied: Vec<i64> = Vec::with_capacity(x.len());
    loop {
        occupied.clear();
        occupied.extend_from_slice(&pos);
        occupied.sort_unstable();
        occupied.dedup();
        let next = occupied
            .iter()
            .filter_map(|&site| {
                let events = env.site(site);
                let i = Environment::next_index(&events, now);
                events.get(i).filter(|e| e.time <= t).map(|e| (e.time, site, e.mark))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some((time, site, mark)) = next else { break };
        for (i, p) in pos.iter_mut().enumerate() {
            if *p == site {
                let u: f64 = rng.gen();
                *p += if u < mark { 1 } else { -1 };
                paths[i].push(time, &[*p]);
            }
        }
        now = time;
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use rand::SeedableRng;

    fn half() -> AtomicMeasure {
        AtomicMeasure::dirac(0.5).unwrap()
    }

    /// Environment with hand-placed events, for propagation oracles.
    fn scripted(events: &[(i64, f64, f64)], horizon: f64) -> Environment {
        let env = Environment::new(0, half(), horizon).unwrap();
        let mut by_site: HashMap<i64, Vec<SiteEvent>> = HashMap::new();
        for &(site, time, mark) in events {
            by_site.entry(site).or_default().push(SiteEvent { time, mark });
        }
        let mut cache = env.sites.write().unwrap();
        for site in -50..=50 {
            let mut ev = by_site.remove(&site).unwrap_or_default();
            ev.sort_by(|a, b| a.time.total_cmp(&b.time));
            cache.insert(site, ev.into());
        }
        drop(cache);
        env
    }

    #[test]
    fn empty_horizon_has_no_events() {
        let env = Environment::new(3, half(), 0.0).unwrap();
        assert!((-5..5).all(|y| env.site(y).is_empty()));
        assert_eq!(propagate_kernel(&env, 2, 0.0, 0.0).unwrap(), MassVector::dirac(2));
    }

    #[test]
    fn query_order_does_not_matter() {
        let a = Environment::new(11, half(), 10.0).unwrap();
        let b = Environment::new(11, half(), 10.0).unwrap();
        let a5 = a.site(5);
        let a3 = a.site(3);
        let b3 = b.site(3);
        let b5 = b.site(5);
        assert_eq!(&*a5, &*b5);
        assert_eq!(&*a3, &*b3);
        assert_ne!(&*a3, &*a5);
    }

    #[test]
    fn event_counts_follow_poisson_law() {
        let env = Environment::new(2024, half(), 10.0).unwrap();
        let sites = 1000;
        let mean = (0..sites).map(|y| env.site(y).len() as f64).sum::<f64>() / sites as f64;
        assert!((mean - 10.0).abs() <= 3.0 * (10.0f64 / sites as f64).sqrt(), "mean {mean}");
        let streams: Vec<_> = (0..sites).map(|y| env.site(y)).collect();
        assert!(streams.iter().all(|s| s.windows(2).all(|w| w[0].time < w[1].time)));
        assert!(streams.iter().flat_map(|s| s.iter()).all(|e| e.time > 0.0 && e.time <= 10.0 && e.mark == 0.5));
    }

    #[test]
    fn single_split() {
        let env = scripted(&[(0, 0.5, 0.3)], 2.0);
        let k = propagate_kernel(&env, 0, 0.0, 1.0).unwrap();
        assert_eq!(k.weight(1), 0.3);
        assert_eq!(k.weight(-1), 0.7);
        assert_eq!(k.weight(0), 0.0);
        // window that misses the event
        assert_eq!(propagate_kernel(&env, 0, 0.5, 1.0).unwrap(), MassVector::dirac(0));
    }

    #[test]
    fn two_splits_by_hand() {
        // after u1: {1: 0.5, -1: 0.5}; after u2 at site 1: {2: 0.125, 0: 0.375, -1: 0.5}
        let env = scripted(&[(0, 0.2, 0.5), (1, 0.4, 0.25)], 1.0);
        let k = propagate_kernel(&env, 0, 0.0, 1.0).unwrap();
        let expected = [(-1, 0.5), (0, 0.375), (1, 0.0), (2, 0.125)];
        for (site, w) in expected {
            assert_eq!(k.weight(site), w, "site {site}");
        }
        assert_eq!(k.total(), 1.0);
    }

    #[test]
    fn window_outside_horizon_is_rejected() {
        let env = Environment::new(1, half(), 1.0).unwrap();
        assert!(matches!(propagate_kernel(&env, 0, 0.0, 2.0), Err(Error::WindowOutsideHorizon { .. })));
        assert!(propagate_kernel(&env, 0, 0.8, 0.5).is_err());
    }

    #[test]
    fn flow_property_and_mass_conservation() {
        let skewed = AtomicMeasure::new(vec![(0.25, 1.0 / 3.0), (0.75, 2.0 / 3.0)]).unwrap();
        let env = Environment::new(77, skewed, 2.0).unwrap();
        assert_eq!(compose_check(&env, 0, 0.0, 0.0, 2.0).unwrap(), 0.0);
        assert!(compose_check(&env, 0, 0.0, 1.0, 2.0).unwrap() <= 1e-10);
        assert!((propagate_kernel(&env, 0, 0.0, 2.0).unwrap().total() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn particle_moves_follow_marks() {
        let env = scripted(&[(0, 0.5, 1.0), (1, 0.7, 0.0)], 1.0);
        let mut rng = SimRng::seed_from_u64(1);
        let paths = sample_particles(&env, &[0, 0, 5], 0.0, 1.0, &mut rng).unwrap();
        assert_eq!(paths[0].jump_times(), &[0.5, 0.7]);
        assert_eq!(paths[0].final_state(), &[0]);
        assert_eq!(paths[1].final_state(), &[0]);
        assert!(paths[2].jump_times().is_empty());
    }

    #[test]
    fn endpoint_marks_make_met_particles_coalesce() {
        let env = Environment::new(5, AtomicMeasure::endpoints(), 30.0).unwrap();
        let mut rng = SimRng::seed_from_u64(9);
        let paths = sample_particles(&env, &[0, 0], 0.0, 30.0, &mut rng).unwrap();
        assert_eq!(paths[0], paths[1]);
    }
}
