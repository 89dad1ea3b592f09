//! Piecewise-constant, right-continuous trajectories.

use crate::error::{Error, Result};

/// A jump path on `[t0, horizon]`: an initial state plus strictly increasing
/// jump times, each followed by the state entered at that time. States are
/// stored flat, `dim` values per state.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpPath<T> {
    dim: usize,
    t0: f64,
    horizon: f64,
    times: Vec<f64>,
    states: Vec<T>,
}

impl<T: Copy> JumpPath<T> {
    pub fn new(t0: f64, initial: &[T], horizon: f64) -> Self {
        assert!(horizon >= t0, "horizon {horizon} before start {t0}");
        Self { dim: initial.len(), t0, horizon, times: Vec::new(), states: initial.to_vec() }
    }

    /// Appends a jump. Times must increase strictly and stay within the horizon.
    pub fn push(&mut self, time: f64, state: &[T]) {
        assert_eq!(state.len(), self.dim);
        let last = self.times.last().copied().unwrap_or(self.t0);
        assert!(time > last || (self.times.is_empty() && time >= last), "jump time {time} not after {last}");
        assert!(time <= self.horizon, "jump time {time} beyond horizon {}", self.horizon);
        self.times.push(time);
        self.states.extend_from_slice(state);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Shortens the horizon; jumps after the new horizon are dropped.
    pub fn truncate(&mut self, horizon: f64) {
        assert!(horizon >= self.t0);
        let keep = self.times.partition_point(|&s| s <= horizon);
        self.times.truncate(keep);
        self.states.truncate((keep + 1) * self.dim);
        self.horizon = horizon;
    }

    pub fn set_horizon(&mut self, horizon: f64) {
        assert!(horizon >= self.times.last().copied().unwrap_or(self.t0));
        self.horizon = horizon;
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.times
    }

    /// Number of recorded states (jumps + 1).
    pub fn len(&self) -> usize {
        self.times.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn state(&self, i: usize) -> &[T] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    /// Time at which state `i` is entered.
    pub fn entry_time(&self, i: usize) -> f64 {
        if i == 0 {
            self.t0
        } else {
            self.times[i - 1]
        }
    }

    pub fn states(&self) -> impl Iterator<Item = &[T]> {
        self.states.chunks_exact(self.dim)
    }

    pub fn initial(&self) -> &[T] {
        self.state(0)
    }

    pub fn final_state(&self) -> &[T] {
        self.state(self.times.len())
    }

    pub fn value_at(&self, t: f64) -> Result<&[T]> {
        if t > self.horizon || t < self.t0 {
            return Err(Error::BeyondHorizon { t, horizon: self.horizon });
        }
        Ok(self.state(self.times.partition_point(|&s| s <= t)))
    }

    /// Segments `(start, end, state)` covering `[t0, horizon]`.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, &[T])> {
        (0..self.len()).map(move |i| {
            let end = if i < self.times.len() { self.times[i] } else { self.horizon };
            (self.entry_time(i), end, self.state(i))
        })
    }

    /// `∫_{t0}^{t} 1(pred(state)) ds`, exact for the piecewise-constant path.
    pub fn occupation(&self, t: f64, mut pred: impl FnMut(&[T]) -> bool) -> Result<f64> {
        if t > self.horizon || t < self.t0 {
            return Err(Error::BeyondHorizon { t, horizon: self.horizon });
        }
        let mut total = 0.0;
        for (start, end, state) in self.segments() {
            if start >= t {
                break;
            }
            if pred(state) {
                total += end.min(t) - start;
            }
        }
        Ok(total)
    }

    /// Applies `f` to every state and `g` to every time.
    pub fn map<U: Copy>(&self, mut g: impl FnMut(f64) -> f64, mut f: impl FnMut(T) -> U) -> JumpPath<U> {
        JumpPath {
            dim: self.dim,
            t0: g(self.t0),
            horizon: g(self.horizon),
            times: self.times.iter().map(|&s| g(s)).collect(),
            states: self.states.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Keeps the coordinates listed in `coords`, merging consecutive equal states.
    pub fn project(&self, coords: &[usize]) -> JumpPath<T>
    where
        T: PartialEq,
    {
        let pick = |s: &[T]| coords.iter().map(|&c| s[c]).collect::<Vec<T>>();
        let mut out = JumpPath::new(self.t0, &pick(self.initial()), self.horizon);
        let mut last = pick(self.initial());
        for i in 1..self.len() {
            let s = pick(self.state(i));
            if s != last {
                out.push(self.entry_time(i), &s);
                last = s;
            }
        }
        out
    }

    pub(crate) fn from_parts(dim: usize, t0: f64, horizon: f64, times: Vec<f64>, states: Vec<T>) -> Self {
        debug_assert_eq!(states.len(), (times.len() + 1) * dim);
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        Self { dim, t0, horizon, times, states }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn right_continuous_lookup() {
        let mut p = JumpPath::new(0.0, &[0i64, 0], 3.0);
        p.push(1.0, &[1, -1]);
        p.push(2.0, &[2, -1]);
        assert_eq!(p.value_at(0.5).unwrap(), &[0, 0]);
        assert_eq!(p.value_at(1.0).unwrap(), &[1, -1]);
        assert_eq!(p.value_at(3.0).unwrap(), &[2, -1]);
        assert!(p.value_at(3.5).is_err());
        assert_eq!(p.occupation(3.0, |s| s[0] == s[1]).unwrap(), 1.0);
        assert_eq!(p.occupation(1.5, |s| s[0] != s[1]).unwrap(), 0.5);
    }

    #[test]
    fn projection_merges_repeats() {
        let mut p = JumpPath::new(0.0, &[0i64, 5], 4.0);
        p.push(1.0, &[0, 6]);
        p.push(2.0, &[1, 6]);
        let q = p.project(&[0]);
        assert_eq!(q.jump_times(), &[2.0]);
        assert_eq!(q.final_state(), &[1]);
    }

    #[test]
    fn truncate_drops_late_jumps() {
        let mut p = JumpPath::new(0.0, &[0i64], 4.0);
        p.push(1.0, &[1]);
        p.push(3.0, &[2]);
        p.truncate(2.0);
        assert_eq!(p.len(), 2);
        assert_eq!(p.value_at(2.0).unwrap(), &[1]);
    }
}
