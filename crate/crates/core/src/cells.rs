//! Cells, split vectors and the piecewise-linear generator.
//!
//! A point `x ∈ R^N` determines a partition of the coordinate indices into
//! classes of equal values. Each class `C` admits `2^|C|` split vectors
//! `v_IJ` (`I ∪ J = C`, `I ∩ J = ∅`) that move the coordinates of `I` up by one
//! and those of `J` down by one. Vectors with `I` or `J` empty keep `x` in
//! its cell; the others point into a neighbouring cell.
//!
//! Indices are 0-based throughout. Split vectors are stored as bitmasks, so
//! the dimension is limited to 63.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ThetaFamily;

pub const MAX_DIM: usize = 63;

/// A validated point of `R^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration(Vec<f64>);

impl Configuration {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::DimensionTooSmall { got: 0, min: 1 });
        }
        if coords.len() > MAX_DIM {
            return Err(Error::DimensionTooLarge(coords.len()));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("coordinate {i} is not finite")));
        }
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Configuration {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Partition of `{0..N}` into classes of equal coordinate values.
///
/// Classes are ordered by their smallest member and each class is sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    classes: Vec<Vec<usize>>,
}

impl Partition {
    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    /// Number of classes, `|π(x)|`.
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_of(&self, i: usize) -> Option<usize> {
        self.classes.iter().position(|c| c.contains(&i))
    }
}

/// Groups indices by exact equality of the stored values.
pub fn partition_of<T: PartialEq + Copy>(x: &[T]) -> Partition {
    let mut class_idx: Vec<Option<usize>> = vec![None; x.len()];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for i in 0..x.len() {
        if class_idx[i].is_some() {
            continue;
        }
        let c = classes.len();
        let mut members = vec![i];
        class_idx[i] = Some(c);
        for j in (i + 1)..x.len() {
            if class_idx[j].is_none() && x[j] == x[i] {
                class_idx[j] = Some(c);
                members.push(j);
            }
        }
        classes.push(members);
    }
    Partition { classes }
}

/// The vector `v_IJ` with `+1` on `I`, `-1` on `J` and `0` elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SplitVector {
    dim: usize,
    up: u64,
    down: u64,
}

impl SplitVector {
    pub fn new(dim: usize, up: u64, down: u64) -> Result<Self> {
        if dim > MAX_DIM {
            return Err(Error::DimensionTooLarge(dim));
        }
        let all = mask_all(dim);
        if up & !all != 0 || down & !all != 0 {
            return Err(Error::InvalidArgument("split index out of range".into()));
        }
        if up & down != 0 {
            return Err(Error::InvalidArgument("I and J must be disjoint".into()));
        }
        if up == 0 && down == 0 {
            return Err(Error::InvalidArgument("I and J cannot both be empty".into()));
        }
        Ok(Self { dim, up, down })
    }

    pub fn from_sets(dim: usize, up: &[usize], down: &[usize]) -> Result<Self> {
        let to_mask = |s: &[usize]| -> Result<u64> {
            s.iter().try_fold(0u64, |m, &i| {
                if i >= dim {
                    Err(Error::InvalidArgument(format!("index {i} out of range for dimension {dim}")))
                } else {
                    Ok(m | (1u64 << i))
                }
            })
        };
        Self::new(dim, to_mask(up)?, to_mask(down)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn up_mask(&self) -> u64 {
        self.up
    }

    pub fn down_mask(&self) -> u64 {
        self.down
    }

    pub fn up_set(&self) -> Vec<usize> {
        mask_members(self.up)
    }

    pub fn down_set(&self) -> Vec<usize> {
        mask_members(self.down)
    }

    /// `|I|`
    pub fn k(&self) -> usize {
        self.up.count_ones() as usize
    }

    /// `|J|`
    pub fn l(&self) -> usize {
        self.down.count_ones() as usize
    }

    pub fn component(&self, i: usize) -> i8 {
        let bit = 1u64 << i;
        if self.up & bit != 0 {
            1
        } else if self.down & bit != 0 {
            -1
        } else {
            0
        }
    }

    pub fn to_vec(&self) -> Vec<i8> {
        (0..self.dim).map(|i| self.component(i)).collect()
    }

    /// Both `I` and `J` nonempty: the vector leaves the current cell.
    pub fn is_boundary(&self) -> bool {
        self.up != 0 && self.down != 0
    }

    pub fn negated(&self) -> Self {
        Self { dim: self.dim, up: self.down, down: self.up }
    }
}

impl fmt::Display for SplitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = |c: i8| match c {
            1 => "+",
            -1 => "-",
            _ => "0",
        };
        for i in 0..self.dim {
            f.write_str(sign(self.component(i)))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    /// `V_0(x)`: stays in the cell of `x`.
    Interior,
    /// `V_+(x)`: points into a neighbouring cell.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaggedSplit {
    pub vector: SplitVector,
    pub kind: SplitKind,
}

fn mask_all(dim: usize) -> u64 {
    if dim >= 64 {
        u64::MAX
    } else {
        (1u64 << dim) - 1
    }
}

fn mask_members(mut m: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(m.count_ones() as usize);
    while m != 0 {
        let i = m.trailing_zeros() as usize;
        out.push(i);
        m &= m - 1;
    }
    out
}

/// Splits of a single class, ordered by the binary encoding of `I` over the
/// class positions.
fn class_splits(dim: usize, class: &[usize], out: &mut Vec<TaggedSplit>) {
    let m = class.len();
    for sub in 0u64..(1u64 << m) {
        let mut up = 0u64;
        let mut down = 0u64;
        for (pos, &i) in class.iter().enumerate() {
            if sub >> pos & 1 == 1 {
                up |= 1 << i;
            } else {
                down |= 1 << i;
            }
        }
        let vector = SplitVector { dim, up, down };
        let kind = if vector.is_boundary() { SplitKind::Boundary } else { SplitKind::Interior };
        out.push(TaggedSplit { vector, kind });
    }
}

/// All of `V(x)` in canonical order: classes by smallest member, then splits
/// by binary encoding of `I`.
pub fn split_vectors<T: PartialEq + Copy>(x: &[T]) -> Vec<TaggedSplit> {
    assert!(x.len() <= MAX_DIM, "dimension {} exceeds {MAX_DIM}", x.len());
    let partition = partition_of(x);
    let total: usize = partition.classes.iter().map(|c| 1usize << c.len()).sum();
    let mut out = Vec::with_capacity(total);
    for class in &partition.classes {
        class_splits(x.len(), class, &mut out);
    }
    out
}

/// `V_+(D)`: every `v_IJ` with `I ∪ J = {0..N}` and both parts nonempty.
pub fn neighbors_of_diagonal(dim: usize) -> Result<Vec<SplitVector>> {
    if dim < 2 {
        return Err(Error::DimensionTooSmall { got: dim, min: 2 });
    }
    if dim > MAX_DIM {
        return Err(Error::DimensionTooLarge(dim));
    }
    let class: Vec<usize> = (0..dim).collect();
    let mut all = Vec::with_capacity(1 << dim);
    class_splits(dim, &class, &mut all);
    Ok(all.into_iter().filter(|s| s.kind == SplitKind::Boundary).map(|s| s.vector).collect())
}

/// One of the building blocks of the piecewise-linear test functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Combinator {
    /// `x_i`
    Coordinate(usize),
    /// `|x_i - x_j|`
    AbsDiff(usize, usize),
    /// `max_i x_i - min_i x_i`
    Range,
    /// `min_{i∈I, j∈J} (x_i - x_j)^+`
    GapPlus { up: Vec<usize>, down: Vec<usize> },
}

impl Combinator {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Combinator::Coordinate(i) => x[*i],
            Combinator::AbsDiff(i, j) => (x[*i] - x[*j]).abs(),
            Combinator::Range => {
                let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
                hi - lo
            }
            Combinator::GapPlus { up, down } => {
                let lo_up = up.iter().map(|&i| x[i]).fold(f64::INFINITY, f64::min);
                let hi_down = down.iter().map(|&j| x[j]).fold(f64::NEG_INFINITY, f64::max);
                (lo_up - hi_down).max(0.0)
            }
        }
    }

    /// Largest coordinate index the combinator reads, if any.
    pub fn max_index(&self) -> Option<usize> {
        match self {
            Combinator::Coordinate(i) => Some(*i),
            Combinator::AbsDiff(i, j) => Some((*i).max(*j)),
            Combinator::Range => None,
            Combinator::GapPlus { up, down } => up.iter().chain(down).copied().max(),
        }
    }
}

/// A finite weighted sum of combinators. Continuous and linear on every cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PwlFunction {
    pub terms: Vec<(f64, Combinator)>,
}

impl PwlFunction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(c: Combinator) -> Self {
        Self { terms: vec![(1.0, c)] }
    }

    pub fn with(mut self, weight: f64, c: Combinator) -> Self {
        self.terms.push((weight, c));
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(w, c)| w * c.eval(x)).sum()
    }
}

/// Smallest positive gap between coordinate values, or `None` on the diagonal.
fn min_positive_gap(x: &[f64]) -> Option<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).map(|w| w[1] - w[0]).filter(|&g| g > 0.0).min_by(f64::total_cmp)
}

/// Step that keeps `x + step·v` inside the cell entered from `x`, for every
/// `{-1,0,1}` direction `v`.
pub fn gradient_step(x: &[f64]) -> f64 {
    min_positive_gap(x).map_or(1.0, |g| g / 4.0)
}

/// One-sided derivative of `f` at `x` in direction `v`.
pub fn directional_gradient(f: &PwlFunction, x: &[f64], v: &SplitVector) -> f64 {
    gradient_with_step(f, x, v, gradient_step(x))
}

fn gradient_with_step(f: &PwlFunction, x: &[f64], v: &SplitVector, step: f64) -> f64 {
    let moved: Vec<f64> =
        x.iter().enumerate().map(|(i, &xi)| xi + step * f64::from(v.component(i))).collect();
    (f.eval(&moved) - f.eval(x)) / step
}

/// `Σ_{v∈V(x)} rate(|I|, |J|) · ∇_v f(x)` for an arbitrary rate lookup.
pub fn generator_sum(f: &PwlFunction, x: &[f64], mut rate: impl FnMut(usize, usize) -> f64) -> f64 {
    let step = gradient_step(x);
    split_vectors(x)
        .iter()
        .map(|s| {
            let r = rate(s.vector.k(), s.vector.l());
            if r == 0.0 {
                0.0
            } else {
                r * gradient_with_step(f, x, &s.vector, step)
            }
        })
        .sum()
}

/// `A_N^θ f(x)`.
pub fn apply_generator(f: &PwlFunction, theta: &ThetaFamily, x: &[f64]) -> Result<f64> {
    let n = x.len();
    if theta.max_order() < n {
        return Err(Error::FamilyTooSmall { covered: theta.max_order(), needed: n });
    }
    if let Some(i) = f.terms.iter().filter_map(|(_, c)| c.max_index()).max() {
        if i >= n {
            return Err(Error::InvalidArgument(format!(
                "function reads coordinate {i} but the configuration has dimension {n}"
            )));
        }
    }
    Ok(generator_sum(f, x, |k, l| theta.get(k, l).expect("order checked above")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{theta_from_nu, AtomicMeasure};

    /// Exact one-sided derivative of a combinator, computed from the
    /// argmin/argmax sets rather than by a finite step.
    fn symbolic_gradient(c: &Combinator, x: &[f64], v: &[i8]) -> f64 {
        let vf = |i: usize| f64::from(v[i]);
        match c {
            Combinator::Coordinate(i) => vf(*i),
            Combinator::AbsDiff(i, j) => {
                let d = x[*i] - x[*j];
                let dv = vf(*i) - vf(*j);
                if d > 0.0 {
                    dv
                } else if d < 0.0 {
                    -dv
                } else {
                    dv.abs()
                }
            }
            Combinator::Range => {
                let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
                let dhi = (0..x.len()).filter(|&i| x[i] == hi).map(vf).fold(f64::NEG_INFINITY, f64::max);
                let dlo = (0..x.len()).filter(|&i| x[i] == lo).map(vf).fold(f64::INFINITY, f64::min);
                dhi - dlo
            }
            Combinator::GapPlus { up, down } => {
                let m = up.iter().map(|&i| x[i]).fold(f64::INFINITY, f64::min);
                let big = down.iter().map(|&j| x[j]).fold(f64::NEG_INFINITY, f64::max);
                let dm = up.iter().filter(|&&i| x[i] == m).map(|&i| vf(i)).fold(f64::INFINITY, f64::min);
                let dbig =
                    down.iter().filter(|&&j| x[j] == big).map(|&j| vf(j)).fold(f64::NEG_INFINITY, f64::max);
                let g = m - big;
                if g > 0.0 {
                    dm - dbig
                } else if g < 0.0 {
                    0.0
                } else {
                    (dm - dbig).max(0.0)
                }
            }
        }
    }

    fn brute_force_splits(x: &[f64]) -> (usize, usize) {
        // every (I, J) over {0..N}, kept when I ∪ J is one class of equal values
        let n = x.len();
        let mut total = 0;
        let mut boundary = 0;
        for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            let mut members = Vec::new();
            let mut up = 0;
            let mut down = 0;
            for i in 0..n {
                match c % 3 {
                    1 => {
                        members.push(i);
                        up += 1;
                    }
                    2 => {
                        members.push(i);
                        down += 1;
                    }
                    _ => {}
                }
                c /= 3;
            }
            if members.is_empty() {
                continue;
            }
            let v = x[members[0]];
            let is_class = (0..n).all(|i| (x[i] == v) == members.contains(&i));
            if is_class {
                total += 1;
                if up > 0 && down > 0 {
                    boundary += 1;
                }
            }
        }
        (total, boundary)
    }

    #[test]
    fn partition_examples() {
        assert_eq!(partition_of(&[1.0, 3.0, 1.0]).classes(), &[vec![0, 2], vec![1]]);
        assert_eq!(partition_of(&[0.0, 0.0, 0.0]).classes(), &[vec![0, 1, 2]]);
        assert_eq!(partition_of(&[5.0]).classes(), &[vec![0]]);
    }

    #[test]
    fn split_vector_counts_match_enumeration() {
        let x = [1.0, 3.0, 1.0];
        let splits = split_vectors(&x);
        assert_eq!((splits.len(), splits.iter().filter(|s| s.kind == SplitKind::Boundary).count()), brute_force_splits(&x));
        assert_eq!(splits.len(), 6);

        let distinct = [0.1, 0.7, -2.0, 4.0];
        let splits = split_vectors(&distinct);
        assert_eq!(splits.len(), 8);
        assert!(splits.iter().all(|s| s.kind == SplitKind::Interior));
        assert_eq!(brute_force_splits(&distinct), (8, 0));
    }

    #[test]
    fn split_vectors_on_planar_diagonal() {
        let splits = split_vectors(&[0.0, 0.0]);
        let vecs: Vec<(Vec<i8>, SplitKind)> = splits.iter().map(|s| (s.vector.to_vec(), s.kind)).collect();
        assert_eq!(
            vecs,
            vec![
                (vec![-1, -1], SplitKind::Interior),
                (vec![1, -1], SplitKind::Boundary),
                (vec![-1, 1], SplitKind::Boundary),
                (vec![1, 1], SplitKind::Interior),
            ]
        );
    }

    #[test]
    fn diagonal_neighbor_counts() {
        assert_eq!(neighbors_of_diagonal(2).unwrap().len(), 2);
        assert_eq!(neighbors_of_diagonal(3).unwrap().len(), 6);
        assert_eq!(neighbors_of_diagonal(4).unwrap().len(), 14);
        assert!(matches!(neighbors_of_diagonal(1), Err(Error::DimensionTooSmall { .. })));
    }

    #[test]
    fn split_vector_rejects_bad_sets() {
        assert!(SplitVector::from_sets(3, &[0], &[0]).is_err());
        assert!(SplitVector::from_sets(3, &[], &[]).is_err());
        assert!(SplitVector::from_sets(3, &[3], &[]).is_err());
        let v = SplitVector::from_sets(3, &[0, 2], &[1]).unwrap();
        assert_eq!(v.to_vec(), vec![1, -1, 1]);
        assert_eq!((v.k(), v.l()), (2, 1));
        assert_eq!(v.to_string(), "+-+");
    }

    #[test]
    fn gradient_examples() {
        let a = 0.37;
        let absdiff = PwlFunction::single(Combinator::AbsDiff(0, 1));
        let v = SplitVector::from_sets(2, &[0], &[1]).unwrap();
        assert_eq!(directional_gradient(&absdiff, &[a, a], &v), 2.0);

        let range = PwlFunction::single(Combinator::Range);
        for v in neighbors_of_diagonal(3).unwrap() {
            assert_eq!(directional_gradient(&range, &[1.5, 1.5, 1.5], &v), 2.0);
        }

        let coord = PwlFunction::single(Combinator::Coordinate(0));
        let e1 = SplitVector::from_sets(3, &[0], &[]).unwrap();
        assert_eq!(directional_gradient(&coord, &[0.2, -4.0, 9.0], &e1), 1.0);
    }

    #[test]
    fn generator_examples() {
        let absdiff = PwlFunction::single(Combinator::AbsDiff(0, 1));
        let theta = theta_from_nu(&AtomicMeasure::new(vec![(0.5, 1.0)]).unwrap(), 0.0, 4).unwrap();
        assert_eq!(apply_generator(&absdiff, &theta, &[0.25, 0.25]).unwrap(), 4.0);
        assert_eq!(apply_generator(&absdiff, &theta, &[0.0, 1.0]).unwrap(), 0.0);

        // Range on the diagonal of R^3: Σ over 6 neighbours of θ(v)·2
        let theta = theta_from_nu(&AtomicMeasure::new(vec![(0.5, 1.0)]).unwrap(), 0.0, 4).unwrap();
        let expected: f64 = neighbors_of_diagonal(3)
            .unwrap()
            .iter()
            .map(|v| 2.0 * theta.get(v.k(), v.l()).unwrap())
            .sum();
        assert_eq!(expected, 6.0);
        let range = PwlFunction::single(Combinator::Range);
        assert_eq!(apply_generator(&range, &theta, &[2.0, 2.0, 2.0]).unwrap(), 6.0);
    }

    #[test]
    fn generator_rejects_small_family() {
        let theta = theta_from_nu(&AtomicMeasure::new(vec![(0.5, 1.0)]).unwrap(), 0.0, 1).unwrap();
        let f = PwlFunction::single(Combinator::Range);
        assert!(matches!(
            apply_generator(&f, &theta, &[0.0, 0.0, 0.0]),
            Err(Error::FamilyTooSmall { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn config() -> impl Strategy<Value = Vec<f64>> {
            // small integer grid so ties are frequent
            prop::collection::vec(-3i32..=3, 1..=6).prop_map(|v| v.into_iter().map(|c| f64::from(c) * 0.5).collect())
        }

        fn combinator(n: usize) -> impl Strategy<Value = Combinator> {
            prop_oneof![
                (0..n).prop_map(Combinator::Coordinate),
                (0..n, 0..n).prop_map(|(i, j)| Combinator::AbsDiff(i, j)),
                Just(Combinator::Range),
                prop::collection::vec(prop::bool::ANY, n).prop_map(move |side| {
                    if n < 2 {
                        return Combinator::Range;
                    }
                    let mut up: Vec<usize> = (0..n).filter(|&i| side[i]).collect();
                    let mut down: Vec<usize> = (0..n).filter(|&i| !side[i]).collect();
                    if up.is_empty() {
                        up.push(down.remove(0));
                    } else if down.is_empty() {
                        down.push(up.pop().unwrap());
                    }
                    Combinator::GapPlus { up, down }
                }),
            ]
        }

        proptest! {
            #[test]
            fn class_sizes_determine_split_counts(x in config()) {
                let p = partition_of(&x);
                let splits = split_vectors(&x);
                let total: usize = p.classes().iter().map(|c| 1usize << c.len()).sum();
                let boundary: usize = p.classes().iter().map(|c| (1usize << c.len()) - 2).sum();
                prop_assert_eq!(splits.len(), total);
                prop_assert_eq!(splits.iter().filter(|s| s.kind == SplitKind::Boundary).count(), boundary);
                prop_assert_eq!((total, boundary), brute_force_splits(&x));
            }

            #[test]
            fn finite_step_gradient_is_exact(
                (x, c) in config().prop_flat_map(|x| { let n = x.len(); (Just(x), combinator(n)) }),
                dir in prop::collection::vec(-1i8..=1, 6),
            ) {
                let n = x.len();
                let v: Vec<i8> = dir[..n].to_vec();
                prop_assume!(v.iter().any(|&c| c != 0));
                let up: Vec<usize> = (0..n).filter(|&i| v[i] == 1).collect();
                let down: Vec<usize> = (0..n).filter(|&i| v[i] == -1).collect();
                let sv = SplitVector::from_sets(n, &up, &down).unwrap();
                let f = PwlFunction::single(c.clone());
                let fd = directional_gradient(&f, &x, &sv);
                prop_assert!((fd - symbolic_gradient(&c, &x, &v)).abs() < 1e-12);
            }

            #[test]
            fn interior_gradients_are_antisymmetric(
                (x, c) in config().prop_flat_map(|x| { let n = x.len(); (Just(x), combinator(n)) }),
            ) {
                let f = PwlFunction::single(c);
                for s in split_vectors(&x).iter().filter(|s| s.kind == SplitKind::Interior) {
                    let plus = directional_gradient(&f, &x, &s.vector);
                    let minus = directional_gradient(&f, &x, &s.vector.negated());
                    prop_assert!((plus + minus).abs() < 1e-12);
                }
            }
        }
    }
}
