use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::{lcm, parse_rational, CirclePoint};
use crate::error::{Error, Result};

/// Denominators up to this many bits keep their numerators in `i128`.
/// Sums and differences of numerators stay below `den`, and the sweep code
/// never multiplies two numerators, so this leaves ample headroom.
const SMALL_BITS: u64 = 120;

/// A half-open arc `[left, right)` of `[0, 1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Arc {
    pub left: BigRational,
    pub right: BigRational,
}

impl Arc {
    pub fn length(&self) -> BigRational {
        &self.right - &self.left
    }
}

/// A finite disjoint union of half-open arcs of the circle, with exact
/// rational endpoints.
///
/// All endpoints share one denominator `den`. The arcs are stored as the
/// flat sequence `l0, r0, l1, r1, …` of numerators with
/// `0 ≤ l0 < r0 < l1 < r1 < … ≤ den`. Gaps are strict, so adjacent arcs are
/// always merged, and `den` is the least common denominator. The
/// representation is therefore canonical and derived equality is set
/// equality. An arc ending at 1 and an arc starting at 0 are stored
/// separately but count as one circle arc in [`IntervalSet::arc_count`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntervalSet {
    den: BigInt,
    bounds: Bounds,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Bounds {
    Small(Vec<i128>),
    Big(Vec<BigInt>),
}

pub(crate) trait Coord: Clone + Ord + Send + Sync {
    fn origin() -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn rem_euclid(&self, m: &Self) -> Self;
}

impl Coord for i128 {
    fn origin() -> Self {
        0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn rem_euclid(&self, m: &Self) -> Self {
        i128::rem_euclid(*self, *m)
    }
}

impl Coord for BigInt {
    fn origin() -> Self {
        Zero::zero()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn rem_euclid(&self, m: &Self) -> Self {
        self.mod_floor(m)
    }
}

/// Merges arcs sorted by left endpoint into strictly separated arcs.
fn coalesce<T: Coord>(sorted: impl IntoIterator<Item = (T, T)>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for (l, r) in sorted {
        if l >= r {
            continue;
        }
        if let Some(last) = out.last_mut() {
            if l <= *last {
                if r > *last {
                    *last = r;
                }
                continue;
            }
        }
        out.push(l);
        out.push(r);
    }
    out
}

/// Splits possibly wrapping arcs `(l, r)` with `l < r` into `[0, den)`,
/// then sorts and coalesces.
fn build_flat<T: Coord>(den: &T, arcs: Vec<(T, T)>) -> Vec<T> {
    let zero = T::origin();
    let mut pieces: Vec<(T, T)> = Vec::with_capacity(arcs.len() + 1);
    for (l, r) in arcs {
        if l >= r {
            continue;
        }
        if r.sub(&l) >= *den {
            return vec![zero, den.clone()];
        }
        let l0 = l.rem_euclid(den);
        let r0 = l0.add(&r.sub(&l));
        if r0 <= *den {
            pieces.push((l0, r0));
        } else {
            pieces.push((zero.clone(), r0.sub(den)));
            pieces.push((l0, den.clone()));
        }
    }
    let sorted = pieces.windows(2).all(|w| w[0].0 <= w[1].0);
    if !sorted {
        pieces.sort_by(|a, b| a.0.cmp(&b.0));
    }
    coalesce(pieces)
}

fn pairs<T: Clone>(flat: &[T]) -> impl Iterator<Item = (T, T)> + '_ {
    flat.chunks_exact(2).map(|c| (c[0].clone(), c[1].clone()))
}

fn union_flat<T: Coord>(a: &[T], b: &[T]) -> Vec<T> {
    let mut merged: Vec<(T, T)> = Vec::with_capacity((a.len() + b.len()) / 2);
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = j >= b.len() || (i < a.len() && a[i] <= b[j]);
        if take_a {
            merged.push((a[i].clone(), a[i + 1].clone()));
            i += 2;
        } else {
            merged.push((b[j].clone(), b[j + 1].clone()));
            j += 2;
        }
    }
    coalesce(merged)
}

fn intersect_flat<T: Coord>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let l = if a[i] > b[j] { &a[i] } else { &b[j] };
        let (r, advance_a) = if a[i + 1] < b[j + 1] {
            (&a[i + 1], true)
        } else {
            (&b[j + 1], false)
        };
        if l < r {
            out.push(l.clone());
            out.push(r.clone());
        }
        if advance_a {
            i += 2;
        } else {
            j += 2;
        }
    }
    out
}

fn intersection_length_flat<T: Coord>(a: &[T], b: &[T]) -> T {
    let mut total = T::origin();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let l = if a[i] > b[j] { &a[i] } else { &b[j] };
        let (r, advance_a) = if a[i + 1] < b[j + 1] {
            (&a[i + 1], true)
        } else {
            (&b[j + 1], false)
        };
        if l < r {
            total = total.add(&r.sub(l));
        }
        if advance_a {
            i += 2;
        } else {
            j += 2;
        }
    }
    total
}

/// Intersection length of `a·fa` and `b·fb` without materialising either.
fn scaled_intersection_length(a: &[i128], fa: i128, b: &[i128], fb: i128) -> i128 {
    let mut total = 0i128;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let l = (a[i] * fa).max(b[j] * fb);
        let (ra, rb) = (a[i + 1] * fa, b[j + 1] * fb);
        let r = ra.min(rb);
        if l < r {
            total += r - l;
        }
        if ra < rb {
            i += 2;
        } else {
            j += 2;
        }
    }
    total
}

fn complement_flat<T: Coord>(a: &[T], den: &T) -> Vec<T> {
    let mut out = Vec::with_capacity(a.len() + 2);
    let mut cursor = T::origin();
    for (l, r) in pairs(a) {
        if cursor < l {
            out.push(cursor);
            out.push(l);
        }
        cursor = r;
    }
    if cursor < *den {
        out.push(cursor);
        out.push(den.clone());
    }
    out
}

fn length_flat<T: Coord>(a: &[T]) -> T {
    let mut total = T::origin();
    for c in a.chunks_exact(2) {
        total = total.add(&c[1].sub(&c[0]));
    }
    total
}

fn fits_small(den: &BigInt) -> bool {
    den.bits() <= SMALL_BITS
}

/// Numerators and a denominator brought to a common scale.
enum Scaled {
    Small(i128, Vec<i128>, Vec<i128>),
    Big(BigInt, Vec<BigInt>, Vec<BigInt>),
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet {
            den: BigInt::one(),
            bounds: Bounds::Small(Vec::new()),
        }
    }

    pub fn full() -> Self {
        IntervalSet {
            den: BigInt::one(),
            bounds: Bounds::Small(vec![0, 1]),
        }
    }

    /// Builds the union of circle arcs `[left, right)`. Endpoints may lie
    /// outside `[0, 1)`; arcs are read modulo 1 and an arc of length ≥ 1 is
    /// the whole circle. Arcs with `left ≥ right` are empty.
    pub fn from_arcs<I>(arcs: I) -> Self
    where
        I: IntoIterator<Item = (BigRational, BigRational)>,
    {
        let arcs: Vec<(BigRational, BigRational)> = arcs.into_iter().collect();
        let mut den = BigInt::one();
        for (l, r) in &arcs {
            den = lcm(&den, l.denom());
            den = lcm(&den, r.denom());
        }
        let scale = |x: &BigRational| x.numer() * (&den / x.denom());
        let ints = arcs.iter().map(|(l, r)| (scale(l), scale(r))).collect();
        Self::from_integer_arcs(den.clone(), ints)
    }

    /// Circle ball `B(center, radius)` as the open arc `(c − r, c + r)`
    /// normalised to half-open.
    pub fn ball(center: &BigRational, radius: &BigRational) -> Self {
        Self::from_arcs([(center - radius, center + radius)])
    }

    /// Arcs given by integer numerators over `den`; wrapping is allowed.
    pub(crate) fn from_integer_arcs(den: BigInt, arcs: Vec<(BigInt, BigInt)>) -> Self {
        assert!(den > BigInt::zero(), "denominator must be positive");
        if fits_small(&den) {
            let d = den.to_i128().expect("fits");
            let small: Option<Vec<(i128, i128)>> =
                arcs.iter().map(|(l, r)| Some((l.to_i128()?, r.to_i128()?))).collect();
            if let Some(small) = small {
                return Self::from_small_flat(d, build_flat(&d, small));
            }
        }
        let flat = build_flat(&den, arcs);
        Self::from_big_flat(den, flat)
    }

    /// `flat` must already be sorted and strictly separated within `[0, den]`.
    pub(crate) fn from_small_flat(den: i128, flat: Vec<i128>) -> Self {
        let mut g = den;
        for &v in &flat {
            if g == 1 {
                break;
            }
            g = g.gcd(&v);
        }
        if g > 1 {
            let flat = flat.into_iter().map(|v| v / g).collect();
            return IntervalSet {
                den: BigInt::from(den / g),
                bounds: Bounds::Small(flat),
            };
        }
        if flat.is_empty() {
            return Self::empty();
        }
        IntervalSet {
            den: BigInt::from(den),
            bounds: Bounds::Small(flat),
        }
    }

    /// `flat` must already be sorted and strictly separated within `[0, den]`.
    pub(crate) fn from_big_flat(den: BigInt, flat: Vec<BigInt>) -> Self {
        if flat.is_empty() {
            return Self::empty();
        }
        let mut g = den.clone();
        for v in &flat {
            if g.is_one() {
                break;
            }
            g = g.gcd(v);
        }
        let (den, flat) = if g.is_one() {
            (den, flat)
        } else {
            (&den / &g, flat.into_iter().map(|v| v / &g).collect())
        };
        if fits_small(&den) {
            let flat = flat.iter().map(|v| v.to_i128().expect("below den")).collect();
            IntervalSet {
                den,
                bounds: Bounds::Small(flat),
            }
        } else {
            IntervalSet {
                den,
                bounds: Bounds::Big(flat),
            }
        }
    }

    /// Common denominator of all endpoints.
    pub fn denominator(&self) -> &BigInt {
        &self.den
    }

    pub fn is_empty(&self) -> bool {
        match &self.bounds {
            Bounds::Small(v) => v.is_empty(),
            Bounds::Big(v) => v.is_empty(),
        }
    }

    pub fn is_full(&self) -> bool {
        self.den.is_one() && !self.is_empty()
    }

    /// Number of maximal `[left, right)` pieces of `[0, 1)`.
    pub fn linear_arc_count(&self) -> usize {
        match &self.bounds {
            Bounds::Small(v) => v.len() / 2,
            Bounds::Big(v) => v.len() / 2,
        }
    }

    /// Number of maximal arcs on the circle (an arc through 0 counts once).
    pub fn arc_count(&self) -> usize {
        let n = self.linear_arc_count();
        if n >= 2 && self.touches_zero() && self.touches_one() {
            n - 1
        } else {
            n
        }
    }

    fn touches_zero(&self) -> bool {
        match &self.bounds {
            Bounds::Small(v) => v.first() == Some(&0),
            Bounds::Big(v) => v.first().is_some_and(|x| x.is_zero()),
        }
    }

    fn touches_one(&self) -> bool {
        match &self.bounds {
            Bounds::Small(v) => v.last().map(|&x| BigInt::from(x)) == Some(self.den.clone()),
            Bounds::Big(v) => v.last() == Some(&self.den),
        }
    }

    /// Exact Lebesgue measure.
    pub fn measure(&self) -> BigRational {
        let total = match &self.bounds {
            Bounds::Small(v) => BigInt::from(length_flat(v)),
            Bounds::Big(v) => length_flat(v),
        };
        BigRational::new(total, self.den.clone())
    }

    /// The arcs as exact rationals in increasing order.
    pub fn arcs(&self) -> Vec<Arc> {
        let mk = |l: BigInt, r: BigInt| Arc {
            left: BigRational::new(l, self.den.clone()),
            right: BigRational::new(r, self.den.clone()),
        };
        match &self.bounds {
            Bounds::Small(v) => pairs(v).map(|(l, r)| mk(BigInt::from(l), BigInt::from(r))).collect(),
            Bounds::Big(v) => pairs(v).map(|(l, r)| mk(l, r)).collect(),
        }
    }

    /// Membership of a point under the half-open convention.
    pub fn contains(&self, x: &CirclePoint) -> bool {
        let v = x.value();
        // x = p/q lies in [l/den, r/den) iff l·q ≤ p·den < r·q.
        let target = v.numer() * &self.den;
        let q = v.denom();
        let flat: Vec<BigInt> = match &self.bounds {
            Bounds::Small(v) => v.iter().map(|&x| BigInt::from(x)).collect(),
            Bounds::Big(v) => v.clone(),
        };
        // First index whose scaled bound exceeds the target.
        let idx = flat.partition_point(|b| b * q <= target);
        idx % 2 == 1
    }

    fn common_scale(&self, other: &Self) -> Scaled {
        let l = lcm(&self.den, &other.den);
        if fits_small(&l) {
            let ls = l.to_i128().expect("fits");
            let fa = (&l / &self.den).to_i128().expect("fits");
            let fb = (&l / &other.den).to_i128().expect("fits");
            let a = self.small_scaled(fa);
            let b = other.small_scaled(fb);
            Scaled::Small(ls, a, b)
        } else {
            let fa = &l / &self.den;
            let fb = &l / &other.den;
            Scaled::Big(l, self.big_scaled(&fa), other.big_scaled(&fb))
        }
    }

    fn small_scaled(&self, f: i128) -> Vec<i128> {
        match &self.bounds {
            Bounds::Small(v) if f == 1 => v.clone(),
            Bounds::Small(v) => v.iter().map(|x| x * f).collect(),
            Bounds::Big(_) => unreachable!("a big denominator cannot divide a small lcm"),
        }
    }

    fn big_scaled(&self, f: &BigInt) -> Vec<BigInt> {
        match &self.bounds {
            Bounds::Small(v) => v.iter().map(|&x| BigInt::from(x) * f).collect(),
            Bounds::Big(v) if f.is_one() => v.clone(),
            Bounds::Big(v) => v.iter().map(|x| x * f).collect(),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        match self.common_scale(other) {
            Scaled::Small(d, a, b) => Self::from_small_flat(d, union_flat(&a, &b)),
            Scaled::Big(d, a, b) => Self::from_big_flat(d, union_flat(&a, &b)),
        }
    }

    pub fn intersect(&self, other: &Self) -> Self {
        match self.common_scale(other) {
            Scaled::Small(d, a, b) => Self::from_small_flat(d, intersect_flat(&a, &b)),
            Scaled::Big(d, a, b) => Self::from_big_flat(d, intersect_flat(&a, &b)),
        }
    }

    /// `μ(self ∩ other)` without materialising the intersection.
    pub fn intersection_measure(&self, other: &Self) -> BigRational {
        if let (Bounds::Small(a), Bounds::Small(b)) = (&self.bounds, &other.bounds) {
            let l = lcm(&self.den, &other.den);
            if fits_small(&l) {
                let fa = (&l / &self.den).to_i128().expect("fits");
                let fb = (&l / &other.den).to_i128().expect("fits");
                let len = scaled_intersection_length(a, fa, b, fb);
                return BigRational::new(len.into(), l);
            }
        }
        match self.common_scale(other) {
            Scaled::Small(d, a, b) => BigRational::new(intersection_length_flat(&a, &b).into(), d.into()),
            Scaled::Big(d, a, b) => BigRational::new(intersection_length_flat(&a, &b), d),
        }
    }

    pub fn complement(&self) -> Self {
        match &self.bounds {
            Bounds::Small(v) => {
                let d = self.den.to_i128().expect("small");
                Self::from_small_flat(d, complement_flat(v, &d))
            }
            Bounds::Big(v) => Self::from_big_flat(self.den.clone(), complement_flat(v, &self.den)),
        }
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.intersect(&other.complement())
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        &self.intersect(other) == self
    }

    /// Union of many sets in one sort-and-merge pass.
    pub fn union_all<'a, I>(sets: I) -> Self
    where
        I: IntoIterator<Item = &'a IntervalSet>,
    {
        let sets: Vec<&IntervalSet> = sets.into_iter().collect();
        let mut den = BigInt::one();
        for s in &sets {
            den = lcm(&den, &s.den);
        }
        if fits_small(&den) {
            let d = den.to_i128().expect("fits");
            let mut all: Vec<(i128, i128)> = Vec::new();
            for s in &sets {
                let f = (&den / &s.den).to_i128().expect("fits");
                all.extend(pairs(&s.small_scaled(f)));
            }
            all.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            Self::from_small_flat(d, coalesce(all))
        } else {
            let mut all: Vec<(BigInt, BigInt)> = Vec::new();
            for s in &sets {
                let f = &den / &s.den;
                let scaled = s.big_scaled(&f);
                all.extend(pairs(&scaled));
            }
            all.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            Self::from_big_flat(den, coalesce(all))
        }
    }

    /// Rotates every endpoint by `offset` modulo 1.
    pub fn rotate(&self, offset: &BigRational) -> Self {
        let den = lcm(&self.den, offset.denom());
        let f = &den / &self.den;
        let shift = offset.numer() * (&den / offset.denom());
        let arcs = pairs(&self.big_scaled(&f))
            .map(|(l, r)| (l + &shift, r + &shift))
            .collect();
        Self::from_integer_arcs(den, arcs)
    }

    /// One arc per line as `num/den,num/den`, in increasing order.
    pub fn to_canonical_text(&self) -> String {
        let mut out = String::new();
        for a in self.arcs() {
            out.push_str(&format!(
                "{}/{},{}/{}\n",
                a.left.numer(),
                a.left.denom(),
                a.right.numer(),
                a.right.denom()
            ));
        }
        out
    }

    pub fn from_canonical_text(text: &str) -> Result<Self> {
        let mut arcs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (l, r) = line
                .split_once(',')
                .ok_or_else(|| Error::param("interval set", format!("line {}: expected `l,r`", lineno + 1)))?;
            let l = parse_rational(l)?;
            let r = parse_rational(r)?;
            let zero = BigRational::zero();
            let one = BigRational::one();
            if l < zero || r > one || l >= r {
                return Err(Error::param(
                    "interval set",
                    format!("line {}: arc must satisfy 0 ≤ l < r ≤ 1", lineno + 1),
                ));
            }
            arcs.push((l, r));
        }
        Ok(Self::from_arcs(arcs))
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "∅");
        }
        let parts: Vec<String> = self
            .arcs()
            .iter()
            .map(|a| format!("[{}, {})", a.left, a.right))
            .collect();
        write!(f, "{}", parts.join(" ∪ "))
    }
}
