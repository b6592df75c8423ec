//! Forward orbits, itineraries and certified periodic cycles.
//!
//! Cycle detection runs Brent's algorithm on the `f64` projection of an
//! exact map and then promotes the candidate only after recomputing it in
//! exact arithmetic: the branch word seen along the float cycle is composed
//! exactly, its fixed point is expanded into a full cycle, and every point is
//! checked against the cell its letter names.

use std::collections::HashMap;

use num_traits::Signed;

use crate::error::{Error, Result};
use crate::map::{compose_word, AffineBranch, PiecewiseContraction};
use crate::scalar::{bit_size, Rational, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTrace<S> {
    pub start: S,
    /// `points[k] = f^k(start)`.
    pub points: Vec<S>,
    /// `digits[k]` is the cell of `points[k]`.
    pub digits: Vec<usize>,
    /// False for float traces: rounded values carry no certificate.
    pub exact: bool,
}

/// Iterates `steps` times, recording the itinerary.
pub fn iterate_with_itinerary<S: Scalar>(pc: &PiecewiseContraction<S>, x: &S, steps: usize) -> Result<OrbitTrace<S>> {
    let mut points = Vec::with_capacity(steps + 1);
    let mut digits = Vec::with_capacity(steps + 1);
    let mut current = x.clone();
    for k in 0..=steps {
        let (next, digit) = pc.eval(&current)?;
        points.push(current);
        digits.push(digit);
        if k == steps {
            break;
        }
        current = next;
    }
    Ok(OrbitTrace {
        start: x.clone(),
        points,
        digits,
        exact: S::EXACT,
    })
}

/// Fixed point `B / (1 - Λ)` of the composition `x ↦ Λx + B` of `word`
/// (first letter applied first).
pub fn fixed_point_of_composition<S: Scalar>(word: &[AffineBranch<S>]) -> Result<S> {
    if word.is_empty() {
        return Err(Error::Unsupported("empty branch word".into()));
    }
    let composed = compose_word(word);
    if composed.slope.abs() >= S::one() {
        return Err(Error::NotAContraction(format!("{:?}", composed.slope)));
    }
    Ok(composed.intercept / (S::one() - composed.slope))
}

/// An exactly periodic orbit, rotated so that its smallest point comes first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PeriodicOrbit {
    pub points: Vec<Rational>,
    /// `word[k]` is the cell of `points[k]`.
    pub word: Vec<usize>,
}

impl PeriodicOrbit {
    pub fn period(&self) -> usize {
        self.points.len()
    }

    pub(crate) fn canonical(mut points: Vec<Rational>, mut word: Vec<usize>) -> Self {
        let shift = points
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        points.rotate_left(shift);
        word.rotate_left(shift);
        Self { points, word }
    }

    /// Checks exact periodicity and cell membership against `pc`; returns the
    /// reason on failure.
    pub fn verify(&self, pc: &PiecewiseContraction<Rational>) -> std::result::Result<(), String> {
        let p = self.period();
        if p == 0 || self.word.len() != p {
            return Err("empty orbit or word length mismatch".into());
        }
        for k in 0..p {
            let z = &self.points[k];
            let (value, cell) = pc.eval(z).map_err(|e| e.to_string())?;
            if cell != self.word[k] {
                return Err(format!("point {k} lies in cell {cell}, word says {}", self.word[k]));
            }
            if !strictly_inside_cell(pc, cell, z) {
                return Err(format!("point {k} sits on the boundary of cell {cell}"));
            }
            if value != self.points[(k + 1) % p] {
                return Err(format!("f(point {k}) is not point {}", (k + 1) % p));
            }
        }
        Ok(())
    }
}

fn strictly_inside_cell(pc: &PiecewiseContraction<Rational>, cell: usize, z: &Rational) -> bool {
    let (lo, _) = pc.cell(cell);
    lo.is_none_or(|lo| *z > lo)
}

/// Distance from `z` to the nearest finite end of its cell.
fn cell_margin(pc: &PiecewiseContraction<Rational>, cell: usize, z: &Rational) -> Option<Rational> {
    let (lo, hi) = pc.cell(cell);
    let below = lo.map(|lo| z - lo);
    let above = hi.map(|hi| hi - z);
    match (below, above) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Builds the exact cycle generated by `word` and verifies it. On success the
/// period is reduced to the minimal one.
pub fn certify_word(pc: &PiecewiseContraction<Rational>, word: &[usize]) -> std::result::Result<PeriodicOrbit, String> {
    if word.iter().any(|&i| i >= pc.len()) {
        return Err("word names a branch the map does not have".into());
    }
    let branches: Vec<_> = word.iter().map(|&i| pc.branch(i).clone()).collect();
    let z = fixed_point_of_composition(&branches).map_err(|e| e.to_string())?;
    let mut points = Vec::with_capacity(word.len());
    let mut current = z.clone();
    for &letter in word {
        if !pc.domain().contains(&current) {
            return Err("cycle point leaves the domain".into());
        }
        let cell = pc.cell_index(&current);
        if cell != letter {
            return Err(format!("cycle point {current} lies in cell {cell}, word says {letter}"));
        }
        if !strictly_inside_cell(pc, cell, &current) {
            return Err(format!("cycle point {current} sits on a breakpoint"));
        }
        points.push(current.clone());
        current = pc.wrap_value(pc.eval_branch(letter, &current));
    }
    if current != z {
        return Err("composition fixed point does not close the cycle".into());
    }
    let p = points.len();
    let minimal = (1..=p)
        .filter(|d| p % d == 0)
        .find(|&d| points[d % p] == points[0])
        .unwrap_or(p);
    points.truncate(minimal);
    let word = word[..minimal].to_vec();
    let orbit = PeriodicOrbit::canonical(points, word);
    orbit.verify(pc)?;
    Ok(orbit)
}

/// How the start point was shown to fall into the cycle's trapping region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasinCheck {
    /// The exact orbit itself closed up.
    ExactPeriodic,
    /// An exact iterate entered the trapping neighbourhood.
    Exact,
    /// The bit cap was hit; entry was observed on the float projection.
    Float,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    /// Steps before the itinerary becomes periodic with `branch_word`.
    pub preperiod: usize,
    pub period: usize,
    pub cycle_points: Vec<Rational>,
    pub branch_word: Vec<usize>,
    pub certified: bool,
    /// Why certification failed, when it did.
    pub reason: Option<String>,
    pub basin: Option<BasinCheck>,
    /// Map evaluations spent (exact and float).
    pub work: u64,
}

impl CycleReport {
    pub fn orbit(&self) -> Option<PeriodicOrbit> {
        self.certified.then(|| PeriodicOrbit {
            points: self.cycle_points.clone(),
            word: self.branch_word.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InconclusiveCycle {
    pub steps: usize,
    /// Last few iterates of the float orbit.
    pub tail: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CycleDetection {
    Found(CycleReport),
    Inconclusive(InconclusiveCycle),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleOptions {
    /// Maximum number of map evaluations along the float orbit.
    pub budget: usize,
    /// Closeness used by the float cycle finder.
    pub epsilon: f64,
    /// Cumulative numerator+denominator bits allowed for exact iteration.
    pub bit_cap: u64,
    /// Exact steps tried first, looking for an exactly periodic orbit.
    pub exact_probe: usize,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self {
            budget: 100_000,
            epsilon: 1e-9,
            bit_cap: 1_000_000,
            exact_probe: 64,
        }
    }
}

const TAIL_LEN: usize = 16;

fn float_step(pc: &PiecewiseContraction<f64>, x: f64) -> (f64, usize) {
    let cell = pc.cell_index(&x);
    let mut v = pc.eval_branch(cell, &x);
    let dom = pc.domain();
    if let Some(hi) = dom.hi {
        if v >= hi {
            v = dom.lo.unwrap_or(hi);
        }
    }
    if let Some(lo) = dom.lo {
        if v < lo {
            v = lo;
        }
    }
    (v, cell)
}

/// Finds the cycle the orbit of `x` settles on.
pub fn detect_cycle(
    pc: &PiecewiseContraction<Rational>,
    x: &Rational,
    options: &CycleOptions,
) -> Result<CycleDetection> {
    if options.budget == 0 {
        return Err(Error::Budget("cycle detection needs a budget of at least 1".into()));
    }
    if !pc.domain().contains(x) {
        return Err(Error::Domain {
            x: x.to_string(),
            domain: pc.domain().to_string(),
        });
    }
    let mut work = 0u64;

    // Exact probe: short orbits that close up exactly.
    let mut seen: HashMap<Rational, usize> = HashMap::new();
    let mut points = Vec::new();
    let mut digits = Vec::new();
    let mut current = x.clone();
    for k in 0..=options.exact_probe.min(options.budget) {
        if let Some(&first) = seen.get(&current) {
            let word = &digits[first..k];
            return Ok(CycleDetection::Found(match certify_word(pc, word) {
                Ok(orbit) => report(first, orbit, BasinCheck::ExactPeriodic, work),
                Err(reason) => failed(first, &points[first..k], word, reason, work),
            }));
        }
        seen.insert(current.clone(), k);
        let (next, digit) = pc.eval(&current)?;
        work += 1;
        points.push(current);
        digits.push(digit);
        current = next;
    }

    // Float candidate by Brent's algorithm.
    let fpc: PiecewiseContraction<f64> = pc.project();
    let close = |a: f64, b: f64| (a - b).abs() <= options.epsilon;
    let x0 = x.to_f64();
    let mut orbit = vec![x0];
    let mut orbit_digits = Vec::new();
    let advance = |orbit: &mut Vec<f64>, orbit_digits: &mut Vec<usize>| {
        let (v, d) = float_step(&fpc, *orbit.last().expect("nonempty"));
        orbit_digits.push(d);
        orbit.push(v);
    };
    let mut power = 1usize;
    let mut lam = 1usize;
    let mut tortoise = 0usize;
    advance(&mut orbit, &mut orbit_digits);
    while !close(orbit[tortoise], orbit[orbit.len() - 1]) {
        if orbit.len() > options.budget {
            return Ok(CycleDetection::Inconclusive(InconclusiveCycle {
                steps: orbit.len() - 1,
                tail: orbit[orbit.len().saturating_sub(TAIL_LEN)..].to_vec(),
                reason: "float orbit did not close within the budget".into(),
            }));
        }
        if power == lam {
            tortoise = orbit.len() - 1;
            power *= 2;
            lam = 0;
        }
        advance(&mut orbit, &mut orbit_digits);
        lam += 1;
    }
    let mut mu = 0usize;
    while !close(orbit[mu], orbit[mu + lam]) {
        mu += 1;
        while orbit.len() <= mu + lam {
            advance(&mut orbit, &mut orbit_digits);
        }
    }
    while orbit_digits.len() < mu + lam {
        advance(&mut orbit, &mut orbit_digits);
    }
    work += orbit.len() as u64;
    let word = orbit_digits[mu..mu + lam].to_vec();
    let orbit_cycle = match certify_word(pc, &word) {
        Ok(o) => o,
        Err(reason) => {
            let approx: Vec<Rational> = Vec::new();
            return Ok(CycleDetection::Found(failed(mu, &approx, &word, reason, work)));
        }
    };

    // Preperiod: first iterate inside the trapping neighbourhood of the cycle.
    let margin = orbit_cycle
        .points
        .iter()
        .zip(&orbit_cycle.word)
        .filter_map(|(z, &cell)| cell_margin(pc, cell, z))
        .min();
    let Some(margin) = margin else {
        // A single unbounded cell: every point is attracted from step 0.
        return Ok(CycleDetection::Found(report(0, orbit_cycle, BasinCheck::Exact, work)));
    };
    let mut bits = 0u64;
    let mut current = x.clone();
    for k in 0..=options.budget {
        if within(&orbit_cycle.points, &current, &margin) {
            return Ok(CycleDetection::Found(report(k, orbit_cycle, BasinCheck::Exact, work)));
        }
        bits += bit_size(&current);
        if bits > options.bit_cap {
            return Ok(float_basin(&fpc, orbit_cycle, &current, k, &margin, options, work));
        }
        current = pc.eval(&current)?.0;
        work += 1;
    }
    Ok(CycleDetection::Inconclusive(InconclusiveCycle {
        steps: options.budget,
        tail: vec![current.to_f64()],
        reason: "exact orbit never entered the trapping neighbourhood".into(),
    }))
}

fn within(cycle: &[Rational], y: &Rational, margin: &Rational) -> bool {
    cycle.iter().any(|z| (y - z).abs() < *margin)
}

fn float_basin(
    fpc: &PiecewiseContraction<f64>,
    orbit: PeriodicOrbit,
    from: &Rational,
    offset: usize,
    margin: &Rational,
    options: &CycleOptions,
    mut work: u64,
) -> CycleDetection {
    // Half the margin keeps clear of rounding in the float comparison.
    let m = margin.to_f64() / 2.0;
    let zs: Vec<f64> = orbit.points.iter().map(|z| z.to_f64()).collect();
    let mut y = from.to_f64();
    for k in offset..=options.budget {
        if zs.iter().any(|z| (y - z).abs() < m) {
            return CycleDetection::Found(report(k, orbit, BasinCheck::Float, work));
        }
        y = float_step(fpc, y).0;
        work += 1;
    }
    CycleDetection::Inconclusive(InconclusiveCycle {
        steps: options.budget,
        tail: vec![y],
        reason: "float orbit never entered the trapping neighbourhood".into(),
    })
}

fn report(preperiod: usize, orbit: PeriodicOrbit, basin: BasinCheck, work: u64) -> CycleReport {
    CycleReport {
        preperiod,
        period: orbit.period(),
        cycle_points: orbit.points,
        branch_word: orbit.word,
        certified: true,
        reason: None,
        basin: Some(basin),
        work,
    }
}

fn failed(preperiod: usize, points: &[Rational], word: &[usize], reason: String, work: u64) -> CycleReport {
    CycleReport {
        preperiod,
        period: word.len(),
        cycle_points: points.to_vec(),
        branch_word: word.to_vec(),
        certified: false,
        reason: Some(reason),
        basin: None,
        work,
    }
}

/// Limit behaviour of a single orbit.
#[derive(Debug, Clone, PartialEq)]
pub enum OmegaLimit {
    Periodic {
        orbit: PeriodicOrbit,
        preperiod: usize,
        work: u64,
    },
    Inconclusive {
        reason: String,
        work: u64,
    },
}

/// The periodic orbit the orbit of `x` accumulates on, when certifiable.
pub fn omega_limit(pc: &PiecewiseContraction<Rational>, x: &Rational, budget: usize) -> Result<OmegaLimit> {
    let options = CycleOptions {
        budget,
        ..CycleOptions::default()
    };
    Ok(match detect_cycle(pc, x, &options)? {
        CycleDetection::Found(r) if r.certified => OmegaLimit::Periodic {
            preperiod: r.preperiod,
            work: r.work,
            orbit: PeriodicOrbit {
                points: r.cycle_points,
                word: r.branch_word,
            },
        },
        CycleDetection::Found(r) => OmegaLimit::Inconclusive {
            reason: r.reason.unwrap_or_default(),
            work: r.work,
        },
        CycleDetection::Inconclusive(i) => OmegaLimit::Inconclusive {
            reason: i.reason,
            work: i.steps as u64,
        },
    })
}
