//! Sticky Brownian motion in the half plane `{y ≥ 0}` with data `(a0, θ0)`.
//!
//! `ξ` is a Brownian motion with clock `∫1(η>0) + a0 ∫1(η=0)` and `η` a sticky
//! Brownian motion at 0 with drift `θ0` on `{η = 0}`. For `a0 = 1` the two are
//! independent; general `a0` follows from the unit case with stickiness
//! `θ0/a0` by slowing the clock on `{η = 0}`.

use std::f64::consts::{FRAC_2_SQRT_PI, PI};

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::chain::{snap, sticky_pair_chain, Chain, Walker, EVENT_CAP};
use crate::error::{Error, Result};
use crate::path::JumpPath;

const SERIES_LIMIT: f64 = 2.0;
const FRACTION_DEPTH: usize = 60;

/// Scaled complementary error function `e^{z²} erfc(z)`.
pub fn erfcx(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z < 0.0 {
        return 2.0 * (z * z).exp() - erfcx(-z);
    }
    if z <= SERIES_LIMIT {
        // erf(z) = 2/√π e^{−z²} Σ 2^k z^{2k+1} / (2k+1)!!
        let mut term = z;
        let mut sum = z;
        let mut k = 0.0;
        while term > 1e-17 * sum {
            k += 1.0;
            term *= 2.0 * z * z / (2.0 * k + 1.0);
            sum += term;
        }
        return (z * z).exp() - FRAC_2_SQRT_PI * sum;
    }
    // 1/√π · 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + …))))
    let mut tail = z;
    for k in (1..=FRACTION_DEPTH).rev() {
        tail = z + 0.5 * k as f64 / tail;
    }
    1.0 / (PI.sqrt() * tail)
}

/// `f(t) = P(η(t) = 0 | η(0) = 0) = e^{2tθ0²} erfc(√(2t) θ0)`
pub fn occupation_probability(theta0: f64, t: f64) -> Result<f64> {
    if !(theta0 > 0.0) {
        return Err(Error::InvalidArgument(format!("θ0 = {theta0} must be positive")));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time t = {t} must be ≥ 0")));
    }
    Ok(erfcx((2.0 * t).sqrt() * theta0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfPlaneSpec {
    pub a0: f64,
    pub theta0: f64,
    pub start: (f64, f64),
    pub n: f64,
}

impl HalfPlaneSpec {
    pub fn new(a0: f64, theta0: f64, start: (f64, f64), n: f64) -> Result<Self> {
        if !(a0 > 0.0) || !a0.is_finite() {
            return Err(Error::InvalidArgument(format!("a0 = {a0} must be positive")));
        }
        if !(theta0 > 0.0) || !theta0.is_finite() {
            return Err(Error::InvalidArgument(format!("θ0 = {theta0} must be positive")));
        }
        if !start.0.is_finite() || !(start.1 >= 0.0) || !start.1.is_finite() {
            return Err(Error::StartOutsideDomain(format!("({}, {}) is not in the closed upper half plane", start.0, start.1)));
        }
        if !(n >= 1.0) || !n.is_finite() {
            return Err(Error::InvalidArgument(format!("resolution n = {n} must be ≥ 1")));
        }
        Ok(Self { a0, theta0, start, n })
    }

    /// Stickiness of the equivalent unit-clock process.
    pub fn unit_theta(&self) -> f64 {
        self.theta0 / self.a0
    }
}

/// Lattice approximation of the unit-clock process: `ξ` a rate-1 simple walk,
/// `η` the scaled gap of a sticky pair chain, on superposed clocks.
struct UnitWalker<'a> {
    pair: Walker<'a>,
    // the pair walker runs one event ahead; `gap` is the gap before that event
    gap: i64,
    xi: i64,
    xi_next: f64,
    time: f64,
    events: u64,
}

impl<'a> UnitWalker<'a> {
    fn new<R: Rng + ?Sized>(chain: &'a Chain, pair_start: [i64; 2], xi: i64, rng: &mut R) -> Result<Self> {
        let mut pair = chain.walker(&pair_start)?;
        pair.advance(rng);
        let xi_next = rng.sample::<f64, _>(Exp1);
        Ok(Self { pair, gap: (pair_start[0] - pair_start[1]).abs(), xi, xi_next, time: 0.0, events: 0 })
    }

    /// Advances to the next event; returns the holding time.
    fn advance<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let before = self.time;
        if self.xi_next < self.pair.time() {
            self.time = self.xi_next;
            self.xi += if rng.gen::<bool>() { 1 } else { -1 };
            self.xi_next += rng.sample::<f64, _>(Exp1);
        } else {
            self.time = self.pair.time();
            let s = self.pair.state();
            self.gap = (s[0] - s[1]).abs();
            self.pair.advance(rng);
        }
        self.events += 1;
        self.time - before
    }
}

struct Lattice<'a> {
    walker: UnitWalker<'a>,
    scale_xi: f64,
    scale_eta: f64,
    n: f64,
}

impl<'a> Lattice<'a> {
    fn new<R: Rng + ?Sized>(spec: &HalfPlaneSpec, chain: &'a Chain, pair_start: [i64; 2], rng: &mut R) -> Result<Self> {
        let walker = UnitWalker::new(chain, pair_start, snap(spec.start.0, spec.n), rng)?;
        Ok(Self { walker, scale_xi: spec.n.sqrt().recip(), scale_eta: (2.0 * spec.n).sqrt().recip(), n: spec.n })
    }

    fn point(&self) -> (f64, f64) {
        (self.walker.xi as f64 * self.scale_xi, self.walker.gap as f64 * self.scale_eta)
    }

    fn time(&self) -> f64 {
        self.walker.time / self.n
    }
}

fn unit_chain(spec: &HalfPlaneSpec) -> Result<(Chain, [i64; 2])> {
    sticky_pair_chain(spec.unit_theta(), spec.start.1, spec.n)
}

/// Path of `(ξ, η)` with data `(a0, θ0)` on `[0, T]`.
pub fn simulate_halfplane<R: Rng + ?Sized>(spec: &HalfPlaneSpec, horizon: f64, rng: &mut R) -> Result<JumpPath<f64>> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be finite and ≥ 0")));
    }
    let (chain, pair_start) = unit_chain(spec)?;
    let mut lattice = Lattice::new(spec, &chain, pair_start, rng)?;
    let start = lattice.point();
    let mut unit = JumpPath::new(0.0, &[start.0, start.1], f64::INFINITY);
    let mut last = start;
    // elapsed time on the (a0, θ0) clock
    let mut clock = 0.0;
    loop {
        let on_boundary = lattice.walker.gap == 0;
        let du = lattice.walker.advance(rng) / spec.n;
        let dt = if on_boundary { du / spec.a0 } else { du };
        if clock + dt > horizon {
            let rest = horizon - clock;
            let unit_end = lattice.time() - du + if on_boundary { rest * spec.a0 } else { rest };
            unit.set_horizon(unit_end.max(unit.jump_times().last().copied().unwrap_or(0.0)));
            break;
        }
        clock += dt;
        let point = lattice.point();
        if point != last {
            unit.push(lattice.time(), &[point.0, point.1]);
            last = point;
        }
    }
    let mut out = time_change(&unit, spec.a0)?;
    if out.horizon() < horizon {
        out.set_horizon(horizon);
    } else {
        out.truncate(horizon);
    }
    Ok(out)
}

/// Maps a unit-clock path `(ξ, η)` to data `(a0, θ0)`: time spent with
/// `η = 0` runs `a0` times faster, time with `η > 0` is unchanged.
pub fn time_change(unit_path: &JumpPath<f64>, a0: f64) -> Result<JumpPath<f64>> {
    if !(a0 > 0.0) || !a0.is_finite() {
        return Err(Error::InvalidArgument(format!("a0 = {a0} must be positive")));
    }
    if unit_path.dim() != 2 {
        return Err(Error::InvalidArgument(format!("expected a (ξ, η) path, got dimension {}", unit_path.dim())));
    }
    let mut clock = unit_path.t0();
    let mut times = Vec::with_capacity(unit_path.jump_times().len());
    for (start, end, state) in unit_path.segments() {
        if start > unit_path.t0() {
            times.push(clock);
        }
        let du = end - start;
        clock += if state[1] == 0.0 { du / a0 } else { du };
    }
    let states: Vec<f64> = unit_path.states().flatten().copied().collect();
    Ok(JumpPath::from_parts(2, unit_path.t0(), clock, times, states))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StripSpec {
    pub eps: f64,
}

impl StripSpec {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::InvalidArgument(format!("strip width ε = {eps} must be positive")));
        }
        Ok(Self { eps })
    }

    /// Angles `(φ1, φ2)` of a start point: `tan φ1 = y/x`, `tan φ2 = y/(ε−x)`.
    pub fn angles(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (y.atan2(x), y.atan2(self.eps - x))
    }

    /// `(2/π) max(φ1, φ2)`
    pub fn lower_bound(&self, start: (f64, f64)) -> f64 {
        let (p1, p2) = self.angles(start);
        2.0 / PI * p1.max(p2)
    }

    /// `(2/π)(φ1 + φ2) + (2/√π)(θ0/a0)ε`
    pub fn upper_bound(&self, spec: &HalfPlaneSpec) -> f64 {
        let (p1, p2) = self.angles(spec.start);
        2.0 / PI * (p1 + p2) + FRAC_2_SQRT_PI * spec.unit_theta() * self.eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriangleSpec {
    pub eps: f64,
    pub phi1: f64,
    pub phi2: f64,
}

impl TriangleSpec {
    pub fn new(eps: f64, phi1: f64, phi2: f64) -> Result<Self> {
        StripSpec::new(eps)?;
        for phi in [phi1, phi2] {
            if !(phi > 0.0 && phi < PI / 2.0) {
                return Err(Error::InvalidArgument(format!("angle {phi} is not acute")));
            }
        }
        Ok(Self { eps, phi1, phi2 })
    }

    /// First violated side, checked as base, left side, right side.
    pub fn violated(&self, (x, y): (f64, f64)) -> Option<Side> {
        if !(x > 0.0 && x < self.eps) {
            Some(Side::Base)
        } else if !(y < x * self.phi1.tan()) {
            Some(Side::Left)
        } else if !(y < (self.eps - x) * self.phi2.tan()) {
            Some(Side::Right)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Base,
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitOutcome {
    pub point: (f64, f64),
    /// `η(τ) ≠ 0`
    pub sticky: bool,
    /// Exit time on the `(a0, θ0)` clock.
    pub time: f64,
    pub side: Side,
    pub events: u64,
}

fn run_exit<R: Rng + ?Sized>(
    spec: &HalfPlaneSpec,
    rng: &mut R,
    mut outside: impl FnMut((f64, f64)) -> Option<Side>,
) -> Result<ExitOutcome> {
    let (chain, pair_start) = unit_chain(spec)?;
    let mut lattice = Lattice::new(spec, &chain, pair_start, rng)?;
    let mut clock = 0.0;
    loop {
        let point = lattice.point();
        if let Some(side) = outside(point) {
            return Ok(ExitOutcome { point, sticky: point.1 != 0.0, time: clock, side, events: lattice.walker.events });
        }
        if lattice.walker.events >= EVENT_CAP {
            return Err(Error::EventCap(EVENT_CAP));
        }
        let on_boundary = lattice.walker.gap == 0;
        let du = lattice.walker.advance(rng) / spec.n;
        clock += if on_boundary { du / spec.a0 } else { du };
    }
}

/// First exit of the lattice process from the strip `0 < x < ε`.
pub fn exit_strip<R: Rng + ?Sized>(spec: &HalfPlaneSpec, strip: &StripSpec, rng: &mut R) -> Result<ExitOutcome> {
    let x = spec.start.0;
    if !(0.0..=strip.eps).contains(&x) {
        return Err(Error::StartOutsideDomain(format!("x = {x} is outside [0, {}]", strip.eps)));
    }
    run_exit(spec, rng, |(x, _)| (!(x > 0.0 && x < strip.eps)).then_some(Side::Base))
}

/// First exit of the lattice process from the triangle `Δ(ε)`.
pub fn exit_triangle<R: Rng + ?Sized>(spec: &HalfPlaneSpec, tri: &TriangleSpec, rng: &mut R) -> Result<ExitOutcome> {
    let (x, y) = spec.start;
    let inside = x > 0.0 && x < tri.eps && y <= x * tri.phi1.tan() && y <= (tri.eps - x) * tri.phi2.tan();
    if !inside {
        return Err(Error::StartOutsideDomain(format!("({x}, {y}) is outside the triangle")));
    }
    run_exit(spec, rng, |p| tri.violated(p))
}
