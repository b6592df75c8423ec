//! Piecewise affine contractions and the shifted mod-1 family.
//!
//! Cells are left-closed and right-open: with breakpoints `x_1 < … < x_{n-1}`
//! branch `i` (0-based) acts on `[x_i, x_{i+1})`, where `x_0` and `x_n` are
//! the domain ends. Every index in this crate is 0-based.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{ExactScalar, Rational, Scalar};

/// Affine map `x ↦ slope·x + intercept`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AffineBranch<S> {
    pub slope: S,
    pub intercept: S,
}

impl<S: Scalar> AffineBranch<S> {
    pub fn new(slope: S, intercept: S) -> Self {
        Self { slope, intercept }
    }

    pub fn identity() -> Self {
        Self::new(S::one(), S::zero())
    }

    pub fn apply(&self, x: &S) -> S {
        self.slope.clone() * x.clone() + self.intercept.clone()
    }

    /// The map `x ↦ next(self(x))`.
    pub fn then(&self, next: &AffineBranch<S>) -> AffineBranch<S> {
        AffineBranch {
            slope: next.slope.clone() * self.slope.clone(),
            intercept: next.slope.clone() * self.intercept.clone() + next.intercept.clone(),
        }
    }

    /// Solves `self(x) = y`; `None` for a constant branch.
    pub fn solve(&self, y: &S) -> Option<S> {
        if self.slope.is_zero() {
            None
        } else {
            Some((y.clone() - self.intercept.clone()) / self.slope.clone())
        }
    }

    pub fn project<T: Scalar>(&self) -> AffineBranch<T>
    where
        S: Into<Rational>,
    {
        AffineBranch {
            slope: T::from_rational(&self.slope.clone().into()),
            intercept: T::from_rational(&self.intercept.clone().into()),
        }
    }
}

/// Composes a word of branches in application order: the first branch of the
/// word is applied first.
pub fn compose_word<S: Scalar>(word: &[AffineBranch<S>]) -> AffineBranch<S> {
    word.iter()
        .fold(AffineBranch::identity(), |acc, branch| acc.then(branch))
}

/// `[lo, hi)` with either end possibly infinite (`None`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Domain<S> {
    pub lo: Option<S>,
    pub hi: Option<S>,
}

impl<S: Scalar> Domain<S> {
    pub fn bounded(lo: S, hi: S) -> Self {
        Self {
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    pub fn unit() -> Self {
        Self::bounded(S::zero(), S::one())
    }

    pub fn real_line() -> Self {
        Self { lo: None, hi: None }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_some() && self.hi.is_some()
    }

    pub fn is_real_line(&self) -> bool {
        self.lo.is_none() && self.hi.is_none()
    }

    pub fn contains(&self, x: &S) -> bool {
        self.lo.as_ref().is_none_or(|lo| x >= lo) && self.hi.as_ref().is_none_or(|hi| x < hi)
    }

    /// Open interior `(lo, hi)`.
    pub fn interior_contains(&self, x: &S) -> bool {
        self.lo.as_ref().is_none_or(|lo| x > lo) && self.hi.as_ref().is_none_or(|hi| x < hi)
    }

    pub fn length(&self) -> Option<S> {
        match (&self.lo, &self.hi) {
            (Some(lo), Some(hi)) => Some(hi.clone() - lo.clone()),
            _ => None,
        }
    }
}

impl<S: fmt::Debug> fmt::Display for Domain<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.lo {
            Some(lo) => write!(f, "[{lo:?}, ")?,
            None => write!(f, "(-inf, ")?,
        }
        match &self.hi {
            Some(hi) => write!(f, "{hi:?})"),
            None => write!(f, "+inf)"),
        }
    }
}

/// An n-interval piecewise contraction.
///
/// `wrap` marks maps obtained by reduction mod 1: a value equal to the upper
/// domain end is read as the lower end, so the map lives on the circle. It
/// only ever fires at the split point of a decreasing branch.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PiecewiseContraction<S> {
    domain: Domain<S>,
    breakpoints: Vec<S>,
    branches: Vec<AffineBranch<S>>,
    wrap: bool,
}

impl<S: Scalar> PiecewiseContraction<S> {
    /// Builds a map that sends every cell into the domain.
    pub fn new(domain: Domain<S>, breakpoints: Vec<S>, branches: Vec<AffineBranch<S>>) -> Result<Self> {
        let pc = Self::new_raw(domain, breakpoints, branches)?;
        pc.check_self_map()?;
        Ok(pc)
    }

    /// Builds a map whose branch images may leave the domain (the raw `f`
    /// of a mod-1 family, or a line map before trimming).
    pub fn new_raw(domain: Domain<S>, breakpoints: Vec<S>, branches: Vec<AffineBranch<S>>) -> Result<Self> {
        let pc = Self {
            domain,
            breakpoints,
            branches,
            wrap: false,
        };
        pc.check_structure()?;
        Ok(pc)
    }

    /// Builds a circle map on a bounded domain: closed cell images must lie
    /// in `[lo, hi]`, and the value `hi` is identified with `lo`.
    pub fn new_wrapped(domain: Domain<S>, breakpoints: Vec<S>, branches: Vec<AffineBranch<S>>) -> Result<Self> {
        if !domain.is_bounded() {
            return Err(Error::InvalidMap("a wrapped map needs a bounded domain".into()));
        }
        let mut pc = Self::new_raw(domain, breakpoints, branches)?;
        pc.wrap = true;
        pc.check_self_map()?;
        Ok(pc)
    }

    fn check_structure(&self) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::InvalidMap("no branches".into()));
        }
        if self.branches.len() != self.breakpoints.len() + 1 {
            return Err(Error::InvalidMap(format!(
                "{} branches need {} breakpoints, got {}",
                self.branches.len(),
                self.branches.len() - 1,
                self.breakpoints.len()
            )));
        }
        if let (Some(lo), Some(hi)) = (&self.domain.lo, &self.domain.hi) {
            if lo >= hi {
                return Err(Error::InvalidMap("empty domain".into()));
            }
        }
        for (i, x) in self.breakpoints.iter().enumerate() {
            if !self.domain.interior_contains(x) {
                return Err(Error::InvalidMap(format!(
                    "breakpoint {i} ({x:?}) is not inside the domain"
                )));
            }
            if i > 0 && self.breakpoints[i - 1] >= *x {
                return Err(Error::InvalidMap("breakpoints must be strictly increasing".into()));
            }
        }
        for (i, b) in self.branches.iter().enumerate() {
            if b.slope.abs() >= S::one() {
                return Err(Error::InvalidMap(format!("branch {i} has |slope| >= 1")));
            }
        }
        Ok(())
    }

    fn check_self_map(&self) -> Result<()> {
        let (lo, hi) = (&self.domain.lo, &self.domain.hi);
        for i in 0..self.len() {
            let (a, b) = self.cell(i);
            let branch = &self.branches[i];
            // Image of [a, b): attained end `fa`, open end `fb`.
            let fa = a.as_ref().map(|a| branch.apply(a));
            let fb = b.as_ref().map(|b| branch.apply(b));
            let slope = &branch.slope;
            let bad = |what: &str| Err(Error::InvalidMap(format!("branch {i} {what}")));
            if slope.is_zero() {
                let value = match (&fa, &fb) {
                    (Some(v), _) | (None, Some(v)) => v.clone(),
                    (None, None) => branch.intercept.clone(),
                };
                if !self.value_in_range(&value) {
                    return bad("maps its cell outside the domain");
                }
                continue;
            }
            let increasing = slope.is_positive();
            // An unbounded cell has an unbounded image, unless the domain is
            // unbounded on that side too.
            let (low_end, high_end) = if increasing { (&fa, &fb) } else { (&fb, &fa) };
            match (lo, low_end) {
                (Some(_), None) => return bad("sends an unbounded cell below the domain"),
                (Some(lo), Some(v)) if v < lo => return bad("maps below the domain"),
                _ => {}
            }
            match (hi, high_end) {
                (Some(_), None) => return bad("sends an unbounded cell above the domain"),
                (Some(hi), Some(v)) => {
                    // The attained end must be < hi unless wrapping; the open
                    // end may touch hi.
                    let attained = !increasing;
                    if v > hi || (attained && !self.wrap && v == hi) {
                        return bad("maps above the domain");
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn value_in_range(&self, v: &S) -> bool {
        if self.wrap {
            self.domain.lo.as_ref().is_none_or(|lo| v >= lo) && self.domain.hi.as_ref().is_none_or(|hi| v <= hi)
        } else {
            self.domain.contains(v)
        }
    }

    pub fn domain(&self) -> &Domain<S> {
        &self.domain
    }

    pub fn breakpoints(&self) -> &[S] {
        &self.breakpoints
    }

    pub fn branches(&self) -> &[AffineBranch<S>] {
        &self.branches
    }

    pub fn branch(&self, i: usize) -> &AffineBranch<S> {
        &self.branches[i]
    }

    pub fn is_wrapped(&self) -> bool {
        self.wrap
    }

    /// Number of branches `n`.
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Ends of cell `i`; `None` marks an infinite end.
    pub fn cell(&self, i: usize) -> (Option<S>, Option<S>) {
        let lo = if i == 0 {
            self.domain.lo.clone()
        } else {
            Some(self.breakpoints[i - 1].clone())
        };
        let hi = if i + 1 == self.len() {
            self.domain.hi.clone()
        } else {
            Some(self.breakpoints[i].clone())
        };
        (lo, hi)
    }

    /// Cell points `x_0 < x_1 < … < x_{n-1}`: the finite lower domain end
    /// (when present) followed by the breakpoints.
    pub fn cell_starts(&self) -> Vec<S> {
        self.domain.lo.iter().chain(self.breakpoints.iter()).cloned().collect()
    }

    /// Index of the cell containing `x`, without a domain check.
    pub fn cell_index(&self, x: &S) -> usize {
        self.breakpoints.partition_point(|b| b <= x)
    }

    /// Applies branch `i` by formula, with no cell check and no wrapping.
    pub fn eval_branch(&self, i: usize, x: &S) -> S {
        self.branches[i].apply(x)
    }

    /// Evaluates the map, returning the value and the active branch index.
    pub fn eval(&self, x: &S) -> Result<(S, usize)> {
        if !self.domain.contains(x) {
            return Err(Error::Domain {
                x: format!("{x:?}"),
                domain: self.domain.to_string(),
            });
        }
        let i = self.cell_index(x);
        Ok((self.wrap_value(self.branches[i].apply(x)), i))
    }

    pub(crate) fn wrap_value(&self, v: S) -> S {
        if self.wrap {
            if let (Some(lo), Some(hi)) = (&self.domain.lo, &self.domain.hi) {
                if v == *hi {
                    return lo.clone();
                }
            }
        }
        v
    }

    /// Whether every branch has the same slope.
    pub fn uniform_slope(&self) -> Option<&S> {
        let first = &self.branches[0].slope;
        self.branches.iter().all(|b| b.slope == *first).then_some(first)
    }

    /// `f + delta` on the same domain with no reduction (raw).
    pub fn shifted(&self, delta: &S) -> Result<Self> {
        let branches = self
            .branches
            .iter()
            .map(|b| AffineBranch::new(b.slope.clone(), b.intercept.clone() + delta.clone()))
            .collect();
        Self::new_raw(self.domain.clone(), self.breakpoints.clone(), branches)
    }

    /// Same map on a new domain, keeping breakpoints and branches.
    pub fn restricted(&self, domain: Domain<S>) -> Result<Self> {
        Self::new(domain, self.breakpoints.clone(), self.branches.clone())
    }
}

impl PiecewiseContraction<Rational> {
    /// Float (or other scalar) projection, used by fast orbit scans.
    pub fn project<T: Scalar>(&self) -> PiecewiseContraction<T> {
        PiecewiseContraction {
            domain: Domain {
                lo: self.domain.lo.as_ref().map(T::from_rational),
                hi: self.domain.hi.as_ref().map(T::from_rational),
            },
            breakpoints: self.breakpoints.iter().map(T::from_rational).collect(),
            branches: self.branches.iter().map(|b| b.project()).collect(),
            wrap: self.wrap,
        }
    }
}

/// The family `f_δ = f + δ (mod 1)` for a raw base map on `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModOneFamily<S> {
    base: PiecewiseContraction<S>,
    delta: S,
}

impl<S: Scalar> ModOneFamily<S> {
    pub fn new(base: PiecewiseContraction<S>, delta: S) -> Result<Self> {
        if base.domain != Domain::unit() {
            return Err(Error::InvalidMap("a mod-1 family needs base domain [0, 1)".into()));
        }
        for i in 0..base.len() {
            let (a, b) = base.cell(i);
            let (a, b) = (a.expect("bounded"), b.expect("bounded"));
            if base.branches[i].slope.abs() * (b - a) >= S::one() {
                return Err(Error::InvalidMap(format!("branch {i} has an image of length >= 1")));
            }
        }
        Ok(Self { base, delta })
    }

    pub fn base(&self) -> &PiecewiseContraction<S> {
        &self.base
    }

    pub fn delta(&self) -> &S {
        &self.delta
    }

    pub fn with_delta(&self, delta: S) -> Self {
        Self {
            base: self.base.clone(),
            delta,
        }
    }

    /// Raw value `f(x) + δ` before reduction.
    pub fn eval_raw(&self, x: &S) -> Result<S> {
        let (_, i) = self.base.eval(x).map_err(|_| Error::Domain {
            x: format!("{x:?}"),
            domain: self.base.domain.to_string(),
        })?;
        Ok(self.base.branches[i].apply(x) + self.delta.clone())
    }

    /// True when some cell-endpoint image `λe + b_i + δ` is an integer.
    pub fn is_bad_delta(&self) -> bool {
        (0..self.base.len()).any(|i| {
            let (a, b) = self.base.cell(i);
            [a, b]
                .into_iter()
                .flatten()
                .any(|e| (self.base.branches[i].apply(&e) + self.delta.clone()).is_integer())
        })
    }

    /// Reduces `f + δ` mod 1 into an m-branch circle map on `[0, 1)`,
    /// splitting each branch at most once where it crosses an integer.
    pub fn reduce(&self) -> Result<PiecewiseContraction<S>> {
        if self.is_bad_delta() {
            return Err(Error::BadParameter(format!("{:?}", self.delta)));
        }
        let mut breakpoints = Vec::with_capacity(2 * self.base.len());
        let mut branches = Vec::with_capacity(2 * self.base.len());
        for i in 0..self.base.len() {
            let (a, b) = self.base.cell(i);
            let (a, b) = (a.expect("bounded"), b.expect("bounded"));
            let slope = self.base.branches[i].slope.clone();
            let shifted = self.base.branches[i].intercept.clone() + self.delta.clone();
            let at_a = slope.clone() * a.clone() + shifted.clone();
            let at_b = slope.clone() * b.clone() + shifted.clone();
            let k = at_a.floor();
            if i > 0 {
                breakpoints.push(a.clone());
            }
            // Integer crossed strictly inside (a, b), if any.
            let crossing = if slope.is_positive() && at_b > k.clone() + S::one() {
                Some(k.clone() + S::one())
            } else if slope.is_negative() && at_b < k {
                Some(k.clone())
            } else {
                None
            };
            branches.push(AffineBranch::new(slope.clone(), shifted.clone() - k.clone()));
            if let Some(level) = crossing {
                let split = (level.clone() - shifted.clone()) / slope.clone();
                debug_assert!(split > a && split < b);
                breakpoints.push(split);
                // Raw values right of the split lie in [level, level + 1) for an
                // increasing branch and in (level - 1, level] for a decreasing one.
                let far_floor = if slope.is_positive() { level } else { level - S::one() };
                branches.push(AffineBranch::new(slope, shifted - far_floor));
            }
        }
        PiecewiseContraction::new_wrapped(Domain::unit(), breakpoints, branches)
    }
}

/// Offset `δ/(1-λ)` of the conjugacy `h(x) = x + δ/(1-λ)`.
pub fn conjugacy_offset<S: Scalar>(slope: &S, delta: &S) -> S {
    delta.clone() / (S::one() - slope.clone())
}

/// For a constant-slope map on the line, returns the map with breakpoints
/// `c_i - δ/(1-λ)` and the same branches; it is conjugate to `f + δ` via
/// `h(x) = x + δ/(1-λ)`.
pub fn conjugate_shift<S: Scalar>(pc: &PiecewiseContraction<S>, delta: &S) -> Result<PiecewiseContraction<S>> {
    if !pc.domain.is_real_line() {
        return Err(Error::Unsupported(
            "the shift conjugacy is defined on the whole line".into(),
        ));
    }
    let slope = pc
        .uniform_slope()
        .ok_or_else(|| Error::Unsupported("the shift conjugacy needs a constant slope".into()))?;
    let offset = conjugacy_offset(slope, delta);
    let breakpoints = pc.breakpoints.iter().map(|c| c.clone() - offset.clone()).collect();
    PiecewiseContraction::new_raw(Domain::real_line(), breakpoints, pc.branches.clone())
}

/// Finite check for the generic-position condition: no breakpoint equals
/// `h(x_i)` for a cell point `x_i` and a branch composition `h` of length
/// `1..=depth`.
pub fn generic_position_check<S: ExactScalar>(pc: &PiecewiseContraction<S>, depth: usize) -> bool {
    assert!(depth >= 1, "depth must be at least 1");
    let targets: BTreeSet<&S> = pc.breakpoints.iter().collect();
    if targets.is_empty() {
        return true;
    }
    let mut frontier: BTreeSet<S> = pc.cell_starts().into_iter().collect();
    for _ in 0..depth {
        let next: BTreeSet<S> = frontier
            .iter()
            .flat_map(|v| pc.branches.iter().map(move |b| b.apply(v)))
            .collect();
        if next.iter().any(|v| targets.contains(v)) {
            return false;
        }
        frontier = next;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{fixture_a, fixture_a_family, sharpness_family, two_branch};
    use crate::scalar::ratio;
    use proptest::prelude::*;

    fn r(p: i64, q: i64) -> Rational {
        ratio(p, q)
    }

    fn line_map(
        slope: Rational,
        breakpoints: Vec<Rational>,
        intercepts: Vec<Rational>,
    ) -> PiecewiseContraction<Rational> {
        let branches = intercepts
            .into_iter()
            .map(|b| AffineBranch::new(slope.clone(), b))
            .collect();
        PiecewiseContraction::new_raw(Domain::real_line(), breakpoints, branches).unwrap()
    }

    #[test]
    fn eval_fixture_a_anchors() {
        let pc = fixture_a();
        assert_eq!(pc.eval(&r(0, 1)).unwrap(), (r(1, 3), 0));
        assert_eq!(pc.eval(&r(3, 5)).unwrap(), (r(2, 5), 2));
        // left-closed cells: the breakpoint belongs to the right cell
        assert_eq!(pc.eval(&r(3, 10)).unwrap().1, 1);
        assert_eq!(pc.eval(&r(299, 1000)).unwrap().1, 0);
    }

    #[test]
    fn eval_constant_branch() {
        let pc = PiecewiseContraction::new(Domain::unit(), vec![], vec![AffineBranch::new(r(0, 1), r(1, 2))]).unwrap();
        for x in [r(0, 1), r(1, 3), r(99, 100)] {
            assert_eq!(pc.eval(&x).unwrap(), (r(1, 2), 0));
        }
    }

    #[test]
    fn eval_outside_domain_is_an_error() {
        let pc = fixture_a();
        assert!(matches!(pc.eval(&r(1, 1)), Err(Error::Domain { .. })));
        assert!(matches!(pc.eval(&r(-1, 10)), Err(Error::Domain { .. })));
    }

    #[test]
    fn construction_rejects_bad_maps() {
        let b = |s, i| AffineBranch::new(r(s, 2), r(i, 4));
        // unsorted breakpoints
        assert!(
            PiecewiseContraction::new(Domain::unit(), vec![r(1, 2), r(1, 4)], vec![b(1, 1), b(1, 1), b(1, 1)]).is_err()
        );
        // breakpoint on the boundary
        assert!(PiecewiseContraction::new(Domain::unit(), vec![r(0, 1)], vec![b(1, 1), b(1, 1)]).is_err());
        // expanding branch
        assert!(PiecewiseContraction::new(Domain::unit(), vec![], vec![AffineBranch::new(r(1, 1), r(0, 1))]).is_err());
        // image leaves [0, 1)
        assert!(PiecewiseContraction::new(Domain::unit(), vec![], vec![AffineBranch::new(r(1, 2), r(3, 4))]).is_err());
        // the raw constructor accepts it
        assert!(
            PiecewiseContraction::new_raw(Domain::unit(), vec![], vec![AffineBranch::new(r(1, 2), r(3, 4))]).is_ok()
        );
        // branch count mismatch
        assert!(PiecewiseContraction::new(Domain::unit(), vec![r(1, 2)], vec![b(1, 1)]).is_err());
    }

    #[test]
    fn reduce_fixture_a_at_two_ninths() {
        let reduced = fixture_a_family(r(2, 9)).reduce().unwrap();
        assert_eq!(reduced.len(), 5);
        assert_eq!(reduced.breakpoints(), &[r(3, 10), r(47, 90), r(3, 5), r(9, 10)]);
    }

    #[test]
    fn reduce_fixture_a_at_fourteen_twentyfifths() {
        let reduced = fixture_a_family(r(14, 25)).reduce().unwrap();
        assert_eq!(reduced.len(), 6);
        assert_eq!(
            reduced.breakpoints(),
            &[r(16, 75), r(3, 10), r(3, 5), r(17, 25), r(9, 10)]
        );
    }

    #[test]
    fn reduce_without_crossing_is_identity() {
        let family = fixture_a_family(r(0, 1));
        let reduced = family.reduce().unwrap();
        assert_eq!(reduced.len(), 4);
        assert_eq!(reduced.breakpoints(), fixture_a().breakpoints());
        assert_eq!(reduced.branches(), fixture_a().branches());
    }

    #[test]
    fn reduce_decreasing_branch_wraps_at_split() {
        let pc = two_branch();
        assert_eq!(pc.breakpoints(), &[r(1, 2)]);
        assert_eq!(pc.branch(0), &AffineBranch::new(r(-1, 2), r(1, 4)));
        assert_eq!(pc.branch(1), &AffineBranch::new(r(-1, 2), r(5, 4)));
        // frac(-1/4 + 1/4) = 0 at the split point
        assert_eq!(pc.eval(&r(1, 2)).unwrap(), (r(0, 1), 1));
    }

    #[test]
    fn bad_delta_examples() {
        assert!(fixture_a_family(r(31, 60)).is_bad_delta());
        assert!(!fixture_a_family(r(2, 9)).is_bad_delta());
        assert!(matches!(
            fixture_a_family(r(31, 60)).reduce(),
            Err(Error::BadParameter(_))
        ));
        // δ = -b_1 makes the image of 0 exactly 0
        assert!(fixture_a_family(r(-1, 3)).is_bad_delta());
        assert!(sharpness_family(r(-1, 4)).is_bad_delta());
    }

    #[test]
    fn conjugate_shift_examples() {
        let pc = line_map(r(1, 2), vec![r(1, 2)], vec![r(0, 1), r(1, 1)]);
        assert_eq!(conjugate_shift(&pc, &r(1, 8)).unwrap().breakpoints(), &[r(1, 4)]);
        assert_eq!(conjugate_shift(&pc, &r(0, 1)).unwrap().breakpoints(), pc.breakpoints());
        let neg = line_map(r(-1, 2), vec![r(1, 2)], vec![r(0, 1), r(1, 1)]);
        assert_eq!(conjugate_shift(&neg, &r(3, 4)).unwrap().breakpoints(), &[r(0, 1)]);
    }

    #[test]
    fn conjugate_shift_rejects_mixed_slopes_and_bounded_domains() {
        let mixed = PiecewiseContraction::new_raw(
            Domain::real_line(),
            vec![r(0, 1)],
            vec![AffineBranch::new(r(1, 2), r(0, 1)), AffineBranch::new(r(1, 3), r(0, 1))],
        )
        .unwrap();
        assert!(matches!(conjugate_shift(&mixed, &r(1, 2)), Err(Error::Unsupported(_))));
        assert!(matches!(
            conjugate_shift(&fixture_a(), &r(1, 2)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn generic_position_examples() {
        let b = AffineBranch::new(r(1, 2), r(1, 4));
        let pc = PiecewiseContraction::new(Domain::unit(), vec![r(1, 2)], vec![b.clone(), b]).unwrap();
        assert!(!generic_position_check(&pc, 1));
        let single =
            PiecewiseContraction::new(Domain::unit(), vec![], vec![AffineBranch::new(r(1, 2), r(1, 4))]).unwrap();
        assert!(generic_position_check(&single, 3));
    }

    #[test]
    fn generic_position_fixture_a_by_word_enumeration() {
        // Oracle: enumerate every word of length 1..=5 and compose it.
        let pc = fixture_a();
        let mut first_hit = None;
        'outer: for len in 1..=5u32 {
            for code in 0..4usize.pow(len) {
                let word: Vec<_> = (0..len).map(|k| pc.branch(code / 4usize.pow(k) % 4).clone()).collect();
                let h = compose_word(&word);
                if pc.cell_starts().iter().any(|s| pc.breakpoints().contains(&h.apply(s))) {
                    first_hit = Some(len);
                    break 'outer;
                }
            }
        }
        // φ_3(φ_3(3/5)) = φ_3(2/5) = 3/10: a length-2 coincidence.
        assert_eq!(first_hit, Some(2));
        assert_eq!(
            compose_word(&[pc.branch(2).clone(), pc.branch(2).clone()]).apply(&r(3, 5)),
            r(3, 10)
        );
        assert!(generic_position_check(&pc, 1));
        assert!(!generic_position_check(&pc, 2));
        assert!(!generic_position_check(&pc, 5));
    }

    #[test]
    fn compose_word_applies_first_letter_first() {
        let a = AffineBranch::new(r(1, 2), r(0, 1));
        let b = AffineBranch::new(r(1, 1), r(1, 1)); // x + 1 as a plain map
        let ab = compose_word(&[a.clone(), b.clone()]);
        let x = r(3, 7);
        assert_eq!(ab.apply(&x), b.apply(&a.apply(&x)));
    }

    #[test]
    fn float_projection_tracks_exact_eval() {
        let exact = fixture_a_family(r(2, 9)).reduce().unwrap();
        let float: PiecewiseContraction<f64> = exact.project();
        for k in 0..100 {
            let x = r(k, 100);
            let (v, i) = exact.eval(&x).unwrap();
            let (vf, jf) = float.eval(&(k as f64 / 100.0)).unwrap();
            assert_eq!(i, jf);
            assert!((v.to_f64() - vf).abs() < 1e-12);
        }
    }

    fn frac(v: Rational) -> Rational {
        let f = Scalar::floor(&v);
        v - f
    }

    fn arb_family() -> impl Strategy<Value = ModOneFamily<Rational>> {
        (
            2usize..=5,
            prop::sample::select(vec![(1i64, 2i64), (1, 3), (2, 5), (-1, 2)]),
        )
            .prop_flat_map(|(n, slope)| {
                (
                    Just(n),
                    Just(slope),
                    prop::collection::btree_set(1i64..10_000, n - 1),
                    prop::collection::vec(-30_000i64..30_000, n),
                    0i64..10_000,
                )
            })
            .prop_map(|(_, slope, cuts, intercepts, delta)| {
                let slope = r(slope.0, slope.1);
                let breakpoints = cuts.into_iter().map(|c| r(c, 10_000)).collect();
                let branches = intercepts
                    .into_iter()
                    .map(|b| AffineBranch::new(slope.clone(), r(b, 10_000)))
                    .collect();
                let base = PiecewiseContraction::new_raw(Domain::unit(), breakpoints, branches).unwrap();
                ModOneFamily::new(base, r(delta, 9_973)).unwrap()
            })
    }

    proptest! {
        #[test]
        fn reduction_matches_fractional_part(family in arb_family(), xs in prop::collection::vec(0i64..1_000, 40)) {
            prop_assume!(!family.is_bad_delta());
            let reduced = family.reduce().unwrap();
            let n = family.base().len();
            prop_assert!(n <= reduced.len() && reduced.len() <= 2 * n);
            let grid = xs.into_iter().map(|k| r(k, 1_000)).chain(reduced.breakpoints().iter().cloned());
            for x in grid {
                let (v, _) = reduced.eval(&x).unwrap();
                prop_assert_eq!(v.clone(), frac(family.eval_raw(&x).unwrap()));
                prop_assert!(v >= r(0, 1) && v < r(1, 1));
            }
        }

        #[test]
        fn eval_is_affine_within_cells(family in arb_family(), a in 0i64..1_000, b in 0i64..1_000) {
            let pc = family.base();
            let (x, y) = (r(a, 1_000), r(b, 1_000));
            let (fx, i) = pc.eval(&x).unwrap();
            let (fy, j) = pc.eval(&y).unwrap();
            if i == j {
                prop_assert_eq!(fx - fy, pc.branch(i).slope.clone() * (x - y));
            }
        }

        #[test]
        fn shift_conjugacy_is_exact(
            slope in prop::sample::select(vec![(1i64, 2i64), (1, 3), (2, 5), (-1, 2), (-3, 4)]),
            cuts in prop::collection::btree_set(-500i64..500, 1..4),
            delta in -500i64..500,
            xs in prop::collection::vec(-2_000i64..2_000, 30),
        ) {
            let slope = r(slope.0, slope.1);
            let breakpoints: Vec<_> = cuts.iter().map(|&c| r(c, 97)).collect();
            let intercepts = (0..=breakpoints.len()).map(|i| r(i as i64 * 7 - 3, 5)).collect();
            let pc = line_map(slope.clone(), breakpoints, intercepts);
            let delta = r(delta, 101);
            let g = conjugate_shift(&pc, &delta).unwrap();
            let f_delta = pc.shifted(&delta).unwrap();
            let h = |x: &Rational| x.clone() + conjugacy_offset(&slope, &delta);
            for x in xs.into_iter().map(|k| r(k, 89)) {
                let lhs = h(&g.eval(&x).unwrap().0);
                let rhs = f_delta.eval(&h(&x)).unwrap().0;
                prop_assert_eq!(lhs, rhs);
            }
        }
    }
}
