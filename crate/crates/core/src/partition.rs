//! Backward closure of the breakpoints, the invariant quasi-partition it
//! cuts out, and the periodic orbits read off the transition map `τ`.
//!
//! When the closure `Q` is finite it is closed under preimages, so no open
//! component of `domain ∖ Q` can be mapped across a point of `Q`. Every
//! component therefore lands inside a single component, which is what makes
//! `τ` well defined and lets every statement below be checked exactly.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::map::{AffineBranch, Domain, PiecewiseContraction};
use crate::orbit::{certify_word, fixed_point_of_composition, PeriodicOrbit};
use crate::scalar::{ExactScalar, Rational, Scalar};

/// Closed interval `[lo, hi]`, or an open one where the context says so.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interval<S> {
    pub lo: S,
    pub hi: S,
}

impl<S: Scalar> Interval<S> {
    pub fn new(lo: S, hi: S) -> Self {
        Self { lo, hi }
    }

    pub fn length(&self) -> S {
        self.hi.clone() - self.lo.clone()
    }

    pub fn midpoint(&self) -> S {
        (self.lo.clone() + self.hi.clone()) * S::half()
    }

    /// Membership in the open interval.
    pub fn contains_open(&self, x: &S) -> bool {
        self.lo < *x && *x < self.hi
    }

    pub fn contains_closed(&self, x: &S) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    /// Image under an affine branch, endpoints reordered when the slope is
    /// negative.
    pub fn image(&self, branch: &AffineBranch<S>) -> Self {
        let (a, b) = (branch.apply(&self.lo), branch.apply(&self.hi));
        if a <= b {
            Self::new(a, b)
        } else {
            Self::new(b, a)
        }
    }
}

/// Every solution of `f(x) = y`, sorted.
///
/// On a wrapped map the value `hi` reads as `lo`, so a target equal to `lo`
/// also collects solutions of `branch(x) = hi`.
pub fn preimages<S: Scalar>(pc: &PiecewiseContraction<S>, y: &S) -> Result<Vec<S>> {
    let mut targets = vec![y.clone()];
    if pc.is_wrapped() && pc.domain().lo.as_ref() == Some(y) {
        targets.extend(pc.domain().hi.clone());
    }
    let mut out = Vec::new();
    for (i, branch) in pc.branches().iter().enumerate() {
        for target in &targets {
            let x = branch.solve(target).ok_or(Error::DegenerateSlope(i))?;
            let (lo, hi) = pc.cell(i);
            if lo.is_none_or(|lo| x >= lo) && hi.is_none_or(|hi| x < hi) {
                out.push(x);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).expect("preimages are comparable"));
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClosureBudget {
    pub max_points: usize,
    pub max_depth: usize,
}

impl Default for ClosureBudget {
    fn default() -> Self {
        Self {
            max_points: 100_000,
            max_depth: 10_000,
        }
    }
}

impl ClosureBudget {
    /// Multiplies both limits, rounding up and keeping at least 1.
    pub fn scaled(&self, factor: f64) -> Self {
        let scale = |v: usize| ((v as f64 * factor).ceil() as usize).max(1);
        Self {
            max_points: scale(self.max_points),
            max_depth: scale(self.max_depth),
        }
    }
}

/// `Q = ⋃_i Q_i` with `Q_i = ⋃_k f^{-k}(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardClosure<S> {
    /// `per_breakpoint[i]` is `Q_i`, sorted. Truncated when not finite.
    pub per_breakpoint: Vec<Vec<S>>,
    /// Sorted union.
    pub points: Vec<S>,
    /// The search emptied its frontier within budget.
    pub finite: bool,
    /// Largest number of nonempty layers `f^{-k}(x_i)` seen for one breakpoint.
    pub depth_reached: usize,
    /// Number of single-step preimage solves performed.
    pub work: u64,
}

impl<S: ExactScalar> BackwardClosure<S> {
    pub fn contains(&self, x: &S) -> bool {
        self.points.binary_search(x).is_ok()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Whether the sets `Q_i` are pairwise disjoint.
    pub fn is_disjoint(&self) -> bool {
        self.per_breakpoint.iter().map(Vec::len).sum::<usize>() == self.points.len()
    }

    /// Recomputes every preimage and checks that it lies in `Q`.
    pub fn is_closed_under(&self, pc: &PiecewiseContraction<S>) -> Result<bool> {
        for q in &self.points {
            if preimages(pc, q)?.iter().any(|p| !self.contains(p)) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Breadth-first closure of the breakpoints under [`preimages`], with exact
/// deduplication. Running out of budget is reported through `finite`, never
/// as an error.
pub fn backward_closure<S: ExactScalar>(
    pc: &PiecewiseContraction<S>,
    budget: ClosureBudget,
) -> Result<BackwardClosure<S>> {
    if let Some(i) = pc.branches().iter().position(|b| b.slope.is_zero()) {
        return Err(Error::DegenerateSlope(i));
    }
    let mut union: BTreeSet<S> = BTreeSet::new();
    let mut per_breakpoint = Vec::with_capacity(pc.breakpoints().len());
    let mut finite = true;
    let mut depth_reached = 0;
    let mut work = 0u64;
    'outer: for x in pc.breakpoints() {
        let mut seen: BTreeSet<S> = BTreeSet::new();
        seen.insert(x.clone());
        union.insert(x.clone());
        let mut frontier = vec![x.clone()];
        let mut depth = 0;
        while !frontier.is_empty() {
            depth += 1;
            depth_reached = depth_reached.max(depth);
            if depth > budget.max_depth || union.len() > budget.max_points {
                finite = false;
                per_breakpoint.push(seen.into_iter().collect());
                break 'outer;
            }
            let mut next = Vec::new();
            for y in &frontier {
                work += pc.len() as u64;
                for p in preimages(pc, y)? {
                    if seen.insert(p.clone()) {
                        union.insert(p.clone());
                        next.push(p);
                    }
                }
            }
            frontier = next;
        }
        per_breakpoint.push(seen.into_iter().collect());
    }
    if union.len() > budget.max_points {
        finite = false;
    }
    Ok(BackwardClosure {
        per_breakpoint,
        points: union.into_iter().collect(),
        finite,
        depth_reached,
        work,
    })
}

/// The components `J_0 < … < J_{m-1}` of `(lo, hi) ∖ Q` with the transition
/// map `τ` and the cell assignment `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiPartition {
    pub domain: Interval<Rational>,
    /// The closure `Q` the partition was cut by, sorted.
    pub q: Vec<Rational>,
    /// Open intervals, sorted.
    pub intervals: Vec<Interval<Rational>>,
    /// `f(J_l) ⊆ J_{tau[l]}`.
    pub tau: Vec<usize>,
    /// `J_l ⊆ cell eta[l]`.
    pub eta: Vec<usize>,
}

impl QuasiPartition {
    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Index of the interval whose interior holds `x`.
    pub fn locate(&self, x: &Rational) -> Option<usize> {
        let l = self.intervals.partition_point(|j| j.hi <= *x);
        self.intervals.get(l).filter(|j| j.contains_open(x)).map(|_| l)
    }

    pub fn in_q(&self, x: &Rational) -> bool {
        self.q.binary_search(x).is_ok()
    }

    /// `τ^k(l)`.
    pub fn tau_iter(&self, l: usize, k: usize) -> usize {
        (0..k).fold(l, |l, _| self.tau[l])
    }
}

/// Cuts the domain at `Q` and computes `τ` at midpoints. Invariance is then
/// verified exactly from endpoint images.
pub fn build_quasi_partition(
    pc: &PiecewiseContraction<Rational>,
    closure: &BackwardClosure<Rational>,
) -> Result<QuasiPartition> {
    if !closure.finite {
        return Err(Error::Budget("the backward closure is not known to be finite".into()));
    }
    let (Some(lo), Some(hi)) = (pc.domain().lo.clone(), pc.domain().hi.clone()) else {
        return Err(Error::Unsupported(
            "the quasi-partition needs a bounded domain; trim line maps first".into(),
        ));
    };
    let mut cuts = vec![lo.clone()];
    cuts.extend(closure.points.iter().filter(|q| **q > lo).cloned());
    cuts.push(hi.clone());
    let intervals: Vec<Interval<Rational>> = cuts
        .windows(2)
        .map(|w| Interval::new(w[0].clone(), w[1].clone()))
        .collect();
    let mut qp = QuasiPartition {
        domain: Interval::new(lo, hi),
        q: closure.points.clone(),
        intervals,
        tau: Vec::new(),
        eta: Vec::new(),
    };
    for (l, j) in qp.intervals.iter().enumerate() {
        let mid = j.midpoint();
        let cell = pc.cell_index(&mid);
        let (a, b) = pc.cell(cell);
        if a.is_some_and(|a| j.lo < a) || b.is_some_and(|b| j.hi > b) {
            return Err(Error::Inconsistency(format!("interval {l} straddles a breakpoint")));
        }
        let (value, _) = pc.eval(&mid)?;
        let target = qp
            .locate(&value)
            .ok_or_else(|| Error::Inconsistency(format!("the midpoint of interval {l} maps into Q")))?;
        let image = j.image(pc.branch(cell));
        let t = &qp.intervals[target];
        if image.lo < t.lo || image.hi > t.hi {
            return Err(Error::Inconsistency(format!(
                "interval {l} is not mapped inside interval {target}; the closure is not closed"
            )));
        }
        qp.eta.push(cell);
        qp.tau.push(target);
    }
    Ok(qp)
}

/// Checks, exactly, the orbit-level part of the generic-position condition:
/// after one step the forward orbit of every cell point must leave `Q`,
/// passing through the domain end `lo` at most once on the way.
///
/// A failure means some breakpoint is (pre)periodic onto a breakpoint, so
/// a periodic orbit could hide inside `Q` where `τ` cannot see it.
pub fn check_orbit_genericity(pc: &PiecewiseContraction<Rational>, qp: &QuasiPartition) -> Result<()> {
    let lo = &qp.domain.lo;
    for start in pc.cell_starts() {
        let mut current = start.clone();
        let mut passed_lo = current == *lo;
        loop {
            let (next, _) = pc.eval(&current)?;
            if qp.in_q(&next) {
                return Err(Error::NonGeneric(format!(
                    "the orbit of cell point {start} returns to the backward closure at {next}"
                )));
            }
            if next != *lo {
                break;
            }
            if passed_lo {
                return Err(Error::NonGeneric(format!(
                    "the orbit of cell point {start} is periodic through {lo}"
                )));
            }
            passed_lo = true;
            current = next;
        }
    }
    Ok(())
}

/// A periodic orbit attached to a cycle of `τ`, rotated so the smallest
/// point comes first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicOrbitCert {
    pub points: Vec<Rational>,
    pub period: usize,
    pub branch_word: Vec<usize>,
    /// `points[k]` lies in interval `interval_cycle[k]`.
    pub interval_cycle: Vec<usize>,
}

impl PeriodicOrbitCert {
    pub fn orbit(&self) -> PeriodicOrbit {
        PeriodicOrbit {
            points: self.points.clone(),
            word: self.branch_word.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodicStructure {
    /// Sorted by first point.
    pub orbits: Vec<PeriodicOrbitCert>,
    /// `basin[l]` is the orbit every point of `J_l` is attracted to.
    pub basin: Vec<usize>,
    /// `entry[l]` is the number of `τ` steps before `J_l` reaches its cycle.
    pub entry: Vec<usize>,
}

/// One exact orbit per cycle of `τ`, plus the cycle every interval falls
/// into.
pub fn extract_periodic_orbits(pc: &PiecewiseContraction<Rational>, qp: &QuasiPartition) -> Result<PeriodicStructure> {
    check_orbit_genericity(pc, qp)?;
    let m = qp.len();
    let (cycles, cycle_of, entry) = tau_cycles(&qp.tau);
    let mut orbits = Vec::with_capacity(cycles.len());
    for cycle in &cycles {
        let word: Vec<usize> = cycle.iter().map(|&l| qp.eta[l]).collect();
        let branches: Vec<_> = word.iter().map(|&i| pc.branch(i).clone()).collect();
        let z = fixed_point_of_composition(&branches)?;
        let mut points = Vec::with_capacity(cycle.len());
        let mut current = z.clone();
        for &l in cycle {
            if !qp.intervals[l].contains_open(&current) {
                return Err(Error::NonGeneric(format!(
                    "periodic point {current} lies on the boundary of interval {l}"
                )));
            }
            points.push(current.clone());
            current = pc.eval_branch(qp.eta[l], &current);
        }
        if current != z {
            return Err(Error::Inconsistency("cycle fixed point does not close up".into()));
        }
        let shift = (0..points.len())
            .min_by(|&a, &b| points[a].cmp(&points[b]))
            .unwrap_or(0);
        let mut interval_cycle = cycle.clone();
        let mut branch_word = word;
        points.rotate_left(shift);
        interval_cycle.rotate_left(shift);
        branch_word.rotate_left(shift);
        let cert = PeriodicOrbitCert {
            period: points.len(),
            points,
            branch_word,
            interval_cycle,
        };
        // Independent re-derivation through the orbit engine.
        let check = certify_word(pc, &cert.branch_word).map_err(Error::Inconsistency)?;
        if check != cert.orbit() {
            return Err(Error::Inconsistency(
                "orbit engine disagrees with the τ-cycle orbit".into(),
            ));
        }
        orbits.push(cert);
    }
    let mut order: Vec<usize> = (0..orbits.len()).collect();
    order.sort_by(|&a, &b| orbits[a].points[0].cmp(&orbits[b].points[0]));
    let mut rank = vec![0; orbits.len()];
    for (r, &o) in order.iter().enumerate() {
        rank[o] = r;
    }
    let mut sorted: Vec<Option<PeriodicOrbitCert>> = orbits.into_iter().map(Some).collect();
    let orbits = order
        .iter()
        .map(|&o| sorted[o].take().expect("each orbit once"))
        .collect();
    let basin = (0..m).map(|l| rank[cycle_of[l]]).collect();
    Ok(PeriodicStructure { orbits, basin, entry })
}

/// Cycles of a functional graph, each listed from its smallest member and
/// in order of that member, plus the cycle and entry time of every node.
pub(crate) fn tau_cycles(tau: &[usize]) -> (Vec<Vec<usize>>, Vec<usize>, Vec<usize>) {
    let m = tau.len();
    const UNSEEN: usize = usize::MAX;
    let mut cycle_of = vec![UNSEEN; m];
    let mut entry = vec![0; m];
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    let mut pos = vec![UNSEEN; m];
    for start in 0..m {
        if cycle_of[start] != UNSEEN {
            continue;
        }
        let mut path = Vec::new();
        let mut l = start;
        while cycle_of[l] == UNSEEN && pos[l] == UNSEEN {
            pos[l] = path.len();
            path.push(l);
            l = tau[l];
        }
        let (cycle_id, base_entry, tail_len) = if cycle_of[l] == UNSEEN {
            let cycle: Vec<usize> = path[pos[l]..].to_vec();
            let first = *cycle.iter().min().expect("nonempty cycle");
            let at = cycle.iter().position(|&c| c == first).expect("member");
            let mut cycle = cycle;
            cycle.rotate_left(at);
            for &c in &cycle {
                cycle_of[c] = cycles.len();
                entry[c] = 0;
            }
            cycles.push(cycle);
            (cycles.len() - 1, 0, pos[l])
        } else {
            (cycle_of[l], entry[l], path.len())
        };
        for (k, &node) in path[..tail_len].iter().enumerate() {
            cycle_of[node] = cycle_id;
            entry[node] = base_entry + tail_len - k;
        }
        for &node in &path {
            pos[node] = UNSEEN;
        }
    }
    // Renumber cycles by their smallest member.
    let mut order: Vec<usize> = (0..cycles.len()).collect();
    order.sort_by_key(|&c| cycles[c][0]);
    let mut rank = vec![0; cycles.len()];
    for (r, &c) in order.iter().enumerate() {
        rank[c] = r;
    }
    let cycle_of = cycle_of.into_iter().map(|c| rank[c]).collect();
    let cycles = order.into_iter().map(|c| cycles[c].clone()).collect();
    (cycles, cycle_of, entry)
}

/// Finite union of disjoint, sorted closed intervals. Intervals sharing an
/// endpoint are merged; points are kept as intervals of length zero.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalUnion<S> {
    intervals: Vec<Interval<S>>,
}

impl<S: Scalar> IntervalUnion<S> {
    pub fn new(mut pieces: Vec<Interval<S>>) -> Self {
        pieces.sort_by(|a, b| a.lo.partial_cmp(&b.lo).expect("comparable endpoints"));
        let mut intervals: Vec<Interval<S>> = Vec::with_capacity(pieces.len());
        for piece in pieces {
            match intervals.last_mut() {
                Some(last) if piece.lo <= last.hi => {
                    if piece.hi > last.hi {
                        last.hi = piece.hi;
                    }
                }
                _ => intervals.push(piece),
            }
        }
        Self { intervals }
    }

    pub fn intervals(&self) -> &[Interval<S>] {
        &self.intervals
    }

    pub fn total_length(&self) -> S {
        self.intervals.iter().fold(S::zero(), |acc, j| acc + j.length())
    }

    /// `⋃_i φ_i(self)`.
    pub fn image_under(&self, branches: &[AffineBranch<S>]) -> Self {
        Self::new(
            branches
                .iter()
                .flat_map(|b| self.intervals.iter().map(move |j| j.image(b)))
                .collect(),
        )
    }

    /// Whether every interval of `other` lies inside one interval of `self`.
    pub fn covers(&self, other: &Self) -> bool {
        other.intervals.iter().all(|j| {
            let k = self.intervals.partition_point(|i| i.hi < j.lo);
            self.intervals.get(k).is_some_and(|i| i.lo <= j.lo && j.hi <= i.hi)
        })
    }
}

/// `A_k = ⋃_{|w| = k} φ_w([lo, hi])`, returned with its total length.
pub fn attractor_iterates<S: Scalar>(
    branches: &[AffineBranch<S>],
    domain: &Domain<S>,
    k: usize,
) -> Result<(IntervalUnion<S>, S)> {
    let (Some(lo), Some(hi)) = (domain.lo.clone(), domain.hi.clone()) else {
        return Err(Error::Unsupported("attractor iterates need a bounded domain".into()));
    };
    if branches.is_empty() {
        return Err(Error::InvalidMap("no branches".into()));
    }
    if let Some(i) = branches.iter().position(|b| b.slope.abs() >= S::one()) {
        return Err(Error::NotAContraction(format!("branch {i}: {:?}", branches[i].slope)));
    }
    let mut a = IntervalUnion::new(vec![Interval::new(lo, hi)]);
    for _ in 0..k {
        a = a.image_under(branches);
    }
    let length = a.total_length();
    Ok((a, length))
}
