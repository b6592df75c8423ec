//! Counting periodic orbits through the intervals next to the breakpoints.
//!
//! For each breakpoint `x_i` let `F_i` be the partition interval ending at
//! `x_i` and `G_i` the one starting there. Two such intervals are
//! equivalent when some forward images of them land in a common interval.
//! Each periodic orbit owns its own class, and there are at most `n`
//! classes, which caps the number of orbits.
//!
//! Since `τ` tracks images of whole intervals, equivalence is decided on the
//! functional graph of `τ`: paths either meet within `m = |partition|`
//! steps or never, because every path is on its cycle after `m` steps.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::partition::{BackwardClosure, PeriodicOrbitCert, QuasiPartition};
use crate::scalar::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    /// Interval ending at the breakpoint.
    F,
    /// Interval starting at the breakpoint.
    G,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoundaryTag {
    pub side: Side,
    /// Index into the map's breakpoints.
    pub breakpoint: usize,
}

/// One distinct interval next to a breakpoint, with every tag it carries
/// (`G_i = F_{i+1}` gives two).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub interval: usize,
    pub tags: Vec<BoundaryTag>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryIntervalTable {
    pub f: Vec<usize>,
    pub g: Vec<usize>,
    /// Interval touching the lower domain end.
    pub first: usize,
    /// Interval touching the upper domain end.
    pub last: usize,
    /// Distinct members, sorted by interval.
    pub members: Vec<Member>,
}

pub fn boundary_intervals(qp: &QuasiPartition, breakpoints: &[Rational]) -> Result<BoundaryIntervalTable> {
    if qp.is_empty() {
        return Err(Error::Inconsistency("empty quasi-partition".into()));
    }
    let ends_at = |x: &Rational| qp.intervals.binary_search_by(|j| j.hi.cmp(x)).ok();
    let starts_at = |x: &Rational| qp.intervals.binary_search_by(|j| j.lo.cmp(x)).ok();
    let mut f = Vec::with_capacity(breakpoints.len());
    let mut g = Vec::with_capacity(breakpoints.len());
    let mut tags: HashMap<usize, Vec<BoundaryTag>> = HashMap::new();
    for (i, x) in breakpoints.iter().enumerate() {
        let missing = || Error::Inconsistency(format!("breakpoint {x} is not an interval endpoint"));
        let fi = ends_at(x).ok_or_else(missing)?;
        let gi = starts_at(x).ok_or_else(missing)?;
        tags.entry(fi).or_default().push(BoundaryTag {
            side: Side::F,
            breakpoint: i,
        });
        tags.entry(gi).or_default().push(BoundaryTag {
            side: Side::G,
            breakpoint: i,
        });
        f.push(fi);
        g.push(gi);
    }
    let mut members: Vec<Member> = tags
        .into_iter()
        .map(|(interval, mut tags)| {
            tags.sort();
            Member { interval, tags }
        })
        .collect();
    members.sort_by_key(|m| m.interval);
    Ok(BoundaryIntervalTable {
        f,
        g,
        first: 0,
        last: qp.len() - 1,
        members,
    })
}

/// `τ^l(C_a) = τ^k(C_b) = interval`, which proves `C_a ≡ C_b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub a: usize,
    pub b: usize,
    pub l: usize,
    pub k: usize,
    pub interval: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceClasses {
    pub members: Vec<Member>,
    /// Class of each member, numbered by first appearance.
    pub class_of: Vec<usize>,
    pub class_count: usize,
    /// One witness per union performed.
    pub witnesses: Vec<Witness>,
}

impl EquivalenceClasses {
    /// Replays every witness on `τ`.
    pub fn verify(&self, qp: &QuasiPartition) -> bool {
        self.witnesses.iter().all(|w| {
            let (Some(a), Some(b)) = (self.members.get(w.a), self.members.get(w.b)) else {
                return false;
            };
            qp.tau_iter(a.interval, w.l) == w.interval
                && qp.tau_iter(b.interval, w.k) == w.interval
                && self.class_of[w.a] == self.class_of[w.b]
        })
    }

    /// Class of the member sitting on `interval`, if any.
    pub fn class_of_interval(&self, interval: usize) -> Option<usize> {
        self.members
            .iter()
            .position(|m| m.interval == interval)
            .map(|i| self.class_of[i])
    }
}

/// Classes of `≡` among the members, merging members whose `τ`-paths meet
/// within `horizon` steps. A short horizon can only under-merge.
pub fn equivalence_classes(
    qp: &QuasiPartition,
    table: &BoundaryIntervalTable,
    horizon: usize,
) -> Result<EquivalenceClasses> {
    if horizon == 0 {
        return Err(Error::Unsupported("the horizon must be at least 1".into()));
    }
    let members = table.members.clone();
    // First visit time of every interval along each member's path.
    let visits: Vec<HashMap<usize, usize>> = members
        .iter()
        .map(|m| {
            let mut seen = HashMap::new();
            let mut l = m.interval;
            for step in 0..=horizon {
                seen.entry(l).or_insert(step);
                l = qp.tau[l];
            }
            seen
        })
        .collect();
    let mut parent: Vec<usize> = (0..members.len()).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut x = x;
        while parent[x] != root {
            let next = parent[x];
            parent[x] = root;
            x = next;
        }
        root
    }
    let mut witnesses = Vec::new();
    for a in 0..members.len() {
        for b in a + 1..members.len() {
            let meet = visits[a]
                .iter()
                .filter_map(|(interval, &l)| visits[b].get(interval).map(|&k| (l + k, l, k, *interval)))
                .min();
            if let Some((_, l, k, interval)) = meet {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[rb] = ra;
                    witnesses.push(Witness { a, b, l, k, interval });
                }
            }
        }
    }
    let mut label: HashMap<usize, usize> = HashMap::new();
    let mut class_of = Vec::with_capacity(members.len());
    for i in 0..members.len() {
        let root = find(&mut parent, i);
        let next = label.len();
        class_of.push(*label.entry(root).or_insert(next));
    }
    Ok(EquivalenceClasses {
        class_count: label.len(),
        members,
        class_of,
        witnesses,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitBoundReport {
    pub num_orbits: usize,
    pub class_count: usize,
    /// Branch count of the map.
    pub n: usize,
    /// Branch count of the unreduced family, for reduced maps.
    pub n_base: Option<usize>,
    /// `orbit_class[o]` is the class owning orbit `o`.
    pub orbit_class: Vec<usize>,
}

/// Checks `#orbits ≤ #classes ≤ n`, and `#orbits ≤ 2·n_base` for a reduced
/// mod-1 family, building the orbit-to-class injection along the way.
pub fn verify_orbit_bound(
    orbits: &[PeriodicOrbitCert],
    classes: &EquivalenceClasses,
    n: usize,
    n_base: Option<usize>,
) -> Result<OrbitBoundReport> {
    let violation = |what: String| Err(Error::TheoremViolation(what));
    if classes.members.is_empty() {
        // No breakpoints: a single contraction, so the domain is one class.
        if orbits.len() > 1 || n != 1 {
            return violation(format!("{} orbits without breakpoints on {n} branches", orbits.len()));
        }
        return Ok(OrbitBoundReport {
            num_orbits: orbits.len(),
            class_count: 1,
            n,
            n_base,
            orbit_class: vec![0; orbits.len()],
        });
    }
    let mut orbit_class = Vec::with_capacity(orbits.len());
    for (o, orbit) in orbits.iter().enumerate() {
        let Some(class) = orbit.interval_cycle.iter().find_map(|&l| classes.class_of_interval(l)) else {
            return violation(format!(
                "the cycle of orbit {o} contains no interval next to a breakpoint"
            ));
        };
        if let Some(other) = orbit_class.iter().position(|&c| c == class) {
            return violation(format!("orbits {other} and {o} fall into the same class"));
        }
        // Every member on the cycle must agree.
        for &l in &orbit.interval_cycle {
            if classes.class_of_interval(l).is_some_and(|c| c != class) {
                return violation(format!("orbit {o} meets two classes"));
            }
        }
        orbit_class.push(class);
    }
    let report = OrbitBoundReport {
        num_orbits: orbits.len(),
        class_count: classes.class_count,
        n,
        n_base,
        orbit_class,
    };
    if report.num_orbits > report.class_count {
        return violation(format!(
            "{} orbits but {} classes",
            report.num_orbits, report.class_count
        ));
    }
    if report.class_count > n {
        return violation(format!("{} classes for {n} branches", report.class_count));
    }
    if let Some(base) = n_base {
        if report.num_orbits > 2 * base {
            return violation(format!(
                "{} orbits for a family with {base} branches",
                report.num_orbits
            ));
        }
    }
    Ok(report)
}

/// Ordering of the breakpoints by `min Q_i`, with the partition interval
/// `(a_{k-1}, b_k)` that links each breakpoint to an earlier one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderingWitness {
    /// Breakpoint indices sorted by `min Q_i`.
    pub permutation: Vec<usize>,
    /// `links[k-1] = (a_{k-1}, b_k)` for `k = 1..n-1`.
    pub links: Vec<(Rational, Rational)>,
}

/// Recomputes the ordering witness from `Q` alone and checks it.
pub fn ordering_witness(closure: &BackwardClosure<Rational>) -> Result<OrderingWitness> {
    if !closure.is_disjoint() {
        return Err(Error::NonGeneric("the sets Q_i are not pairwise disjoint".into()));
    }
    let owner: HashMap<&Rational, usize> = closure
        .per_breakpoint
        .iter()
        .enumerate()
        .flat_map(|(i, qi)| qi.iter().map(move |q| (q, i)))
        .collect();
    let mut permutation: Vec<usize> = (0..closure.per_breakpoint.len()).collect();
    let mins: Vec<&Rational> = closure
        .per_breakpoint
        .iter()
        .map(|qi| qi.first().ok_or_else(|| Error::Inconsistency("empty Q_i".into())))
        .collect::<Result<_>>()?;
    permutation.sort_by(|&a, &b| mins[a].cmp(mins[b]));
    let mut links = Vec::new();
    for k in 1..permutation.len() {
        let b = mins[permutation[k]];
        let below = closure.points.partition_point(|q| q < b);
        let a = &closure.points[below - 1];
        let earlier = &permutation[..k];
        if !earlier.contains(&owner[a]) {
            return Err(Error::TheoremViolation(format!(
                "{a} precedes min Q_{} but belongs to a later breakpoint",
                permutation[k]
            )));
        }
        links.push((a.clone(), b.clone()));
    }
    Ok(OrderingWitness { permutation, links })
}

/// Number of `τ` steps after which each interval first lands on a member,
/// or `None` if it never does within `qp.len()` steps.
pub fn steps_to_boundary(qp: &QuasiPartition, table: &BoundaryIntervalTable) -> Vec<Option<usize>> {
    let is_member: Vec<bool> = (0..qp.len())
        .map(|l| table.members.iter().any(|m| m.interval == l))
        .collect();
    (0..qp.len())
        .map(|start| {
            let mut l = start;
            for step in 0..=qp.len() {
                if is_member[l] {
                    return Some(step);
                }
                l = qp.tau[l];
            }
            None
        })
        .collect()
}
