//! Constructions on the iterated function system behind a map: the
//! highly-contractive test, the clamped system, composition classes and the
//! trimming radius for line maps.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::map::{compose_word, AffineBranch, Domain, PiecewiseContraction};
use crate::partition::Interval;
use crate::scalar::Scalar;

/// Affine branches acting on a common domain.
#[derive(Debug, Clone, PartialEq)]
pub struct IfsSpec<S> {
    pub branches: Vec<AffineBranch<S>>,
    pub domain: Domain<S>,
}

impl<S: Scalar> IfsSpec<S> {
    /// Needs at least two branches, each a strict contraction.
    pub fn new(branches: Vec<AffineBranch<S>>, domain: Domain<S>) -> Result<Self> {
        if branches.len() < 2 {
            return Err(Error::InvalidMap("an IFS needs at least two branches".into()));
        }
        if let Some(i) = branches.iter().position(|b| b.slope.abs() >= S::one()) {
            return Err(Error::NotAContraction(format!("branch {i}: {:?}", branches[i].slope)));
        }
        Ok(Self { branches, domain })
    }

    pub fn from_map(pc: &PiecewiseContraction<S>) -> Result<Self> {
        Self::new(pc.branches().to_vec(), pc.domain().clone())
    }

    /// Whether every branch sends the closed domain into its interior.
    /// Always true on the line.
    pub fn maps_into_interior(&self) -> bool {
        let (Some(lo), Some(hi)) = (&self.domain.lo, &self.domain.hi) else {
            return self.domain.is_real_line();
        };
        self.branches.iter().all(|b| {
            let image = Interval::new(lo.clone(), hi.clone()).image(b);
            image.lo > *lo && image.hi < *hi
        })
    }

    /// Largest `|λ_i|`.
    pub fn max_slope(&self) -> S {
        self.branches
            .iter()
            .map(|b| b.slope.abs())
            .fold(S::zero(), |m, s| if s > m { s } else { m })
    }
}

/// `(Σ|λ_i| < 1, Σ|λ_i|)`.
pub fn highly_contractive_check<S: Scalar>(ifs: &IfsSpec<S>) -> (bool, S) {
    let rho = ifs.branches.iter().fold(S::zero(), |acc, b| acc + b.slope.abs());
    (rho < S::one(), rho)
}

/// An affine branch frozen outside a window: `x ↦ φ(clamp(x, lo, hi))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampedBranch<S> {
    pub branch: AffineBranch<S>,
    pub window: Interval<S>,
}

impl<S: Scalar> ClampedBranch<S> {
    pub fn apply(&self, x: &S) -> S {
        let clamped = if *x < self.window.lo {
            &self.window.lo
        } else if *x > self.window.hi {
            &self.window.hi
        } else {
            x
        };
        self.branch.apply(clamped)
    }

    /// Constant, affine, constant pieces over `[lo, hi]`; pieces that miss
    /// `[lo, hi]` are dropped.
    pub fn pieces(&self, lo: &S, hi: &S) -> Vec<(Interval<S>, AffineBranch<S>)> {
        let w = &self.window;
        let constant = |x: &S| AffineBranch::new(S::zero(), self.branch.apply(x));
        let mut out = Vec::with_capacity(3);
        if *lo < w.lo {
            out.push((Interval::new(lo.clone(), w.lo.clone()), constant(&w.lo)));
        }
        let a = if w.lo > *lo { w.lo.clone() } else { lo.clone() };
        let b = if w.hi < *hi { w.hi.clone() } else { hi.clone() };
        if a < b {
            out.push((Interval::new(a, b), self.branch.clone()));
        }
        if w.hi < *hi {
            out.push((Interval::new(w.hi.clone(), hi.clone()), constant(&w.hi)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClampedSystem<S> {
    pub branches: Vec<ClampedBranch<S>>,
    /// A third of the smallest cell length.
    pub delta: S,
    /// `V` is the product of the open intervals `(x_i - δ, x_i + δ)`.
    pub neighborhood: Vec<Interval<S>>,
    pub domain: Interval<S>,
}

impl<S: Scalar> ClampedSystem<S> {
    /// `sup_x Σ_i |D φ'_i(x)|`: the clamped branches only vary on their
    /// windows, and at most two windows overlap.
    pub fn rho(&self) -> S {
        let mut cuts: Vec<S> = vec![self.domain.lo.clone(), self.domain.hi.clone()];
        for b in &self.branches {
            cuts.push(b.window.lo.clone());
            cuts.push(b.window.hi.clone());
        }
        cuts.retain(|c| self.domain.contains_closed(c));
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        cuts.dedup();
        let mut best = S::zero();
        for w in cuts.windows(2) {
            let mid = Interval::new(w[0].clone(), w[1].clone()).midpoint();
            let sum = self
                .branches
                .iter()
                .filter(|b| b.window.contains_open(&mid))
                .fold(S::zero(), |acc, b| acc + b.branch.slope.abs());
            if sum > best {
                best = sum;
            }
        }
        best
    }

    /// Whether `ys` lies in the neighborhood `V`.
    pub fn in_neighborhood(&self, ys: &[S]) -> bool {
        ys.len() == self.neighborhood.len() && ys.iter().zip(&self.neighborhood).all(|(y, v)| v.contains_open(y))
    }

    /// The map built from the clamped branches cut at `ys`, evaluated at `x`.
    pub fn eval_cut(&self, ys: &[S], x: &S) -> Result<S> {
        if !self.in_neighborhood(ys) {
            return Err(Error::Unsupported("cut points outside the neighborhood V".into()));
        }
        if !(self.domain.lo <= *x && *x < self.domain.hi) {
            return Err(Error::Domain {
                x: format!("{x:?}"),
                domain: format!("[{:?}, {:?})", self.domain.lo, self.domain.hi),
            });
        }
        let i = ys.partition_point(|y| y <= x);
        Ok(self.branches[i].apply(x))
    }
}

/// Clamps branch `i` to `[x_i - δ, x_{i+1} + δ]` (cells numbered from 0, with
/// `x_0 = lo` and `x_n = hi`) where `δ` is a third of the smallest cell.
pub fn clamp_construction<S: Scalar>(ifs: &IfsSpec<S>, breakpoints: &[S]) -> Result<ClampedSystem<S>> {
    let (Some(lo), Some(hi)) = (ifs.domain.lo.clone(), ifs.domain.hi.clone()) else {
        return Err(Error::Unsupported(
            "the clamp construction needs a bounded domain".into(),
        ));
    };
    if breakpoints.len() + 1 != ifs.branches.len() {
        return Err(Error::InvalidMap(format!(
            "{} branches need {} breakpoints",
            ifs.branches.len(),
            ifs.branches.len() - 1
        )));
    }
    let mut cuts = vec![lo.clone()];
    cuts.extend(breakpoints.iter().cloned());
    cuts.push(hi.clone());
    if cuts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidMap(
            "breakpoints must increase strictly inside the domain".into(),
        ));
    }
    let three = S::from_i64(3);
    let delta = cuts
        .windows(2)
        .map(|w| (w[1].clone() - w[0].clone()) / three.clone())
        .fold(None, |m: Option<S>, g| {
            Some(m.map_or(g.clone(), |m| if g < m { g } else { m }))
        })
        .expect("at least one cell");
    let branches = ifs
        .branches
        .iter()
        .enumerate()
        .map(|(i, b)| ClampedBranch {
            branch: b.clone(),
            window: Interval::new(cuts[i].clone() - delta.clone(), cuts[i + 1].clone() + delta.clone()),
        })
        .collect();
    let neighborhood = breakpoints
        .iter()
        .map(|x| Interval::new(x.clone() - delta.clone(), x.clone() + delta.clone()))
        .collect();
    Ok(ClampedSystem {
        branches,
        delta,
        neighborhood,
        domain: Interval::new(lo, hi),
    })
}

/// A member of `C_k` with its word, first letter applied first.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition<S> {
    pub word: Vec<usize>,
    pub map: AffineBranch<S>,
}

/// All `n^k` compositions of length `k`, words in lexicographic order.
pub fn compose_enumerate<S: Scalar>(ifs: &IfsSpec<S>, k: usize, cap: usize) -> Result<Vec<Composition<S>>> {
    let n = ifs.branches.len();
    let count = u32::try_from(k)
        .ok()
        .and_then(|k| n.checked_pow(k))
        .filter(|&c| c <= cap)
        .ok_or_else(|| Error::Budget(format!("{n}^{k} compositions exceed the cap {cap}")))?;
    let mut out = Vec::with_capacity(count);
    let mut word = vec![0usize; k];
    for _ in 0..count {
        let letters: Vec<_> = word.iter().map(|&i| ifs.branches[i].clone()).collect();
        out.push(Composition {
            word: word.clone(),
            map: compose_word(&letters),
        });
        for digit in word.iter_mut().rev() {
            *digit += 1;
            if *digit < n {
                break;
            }
            *digit = 0;
        }
    }
    Ok(out)
}

/// `r0 = 2·max|φ_i(0)| / (1 - ρ)` with `ρ = max|λ_i|`: every branch sends
/// `[-r, r]` into `(-r, r)` once `r ≥ r0` (and `r > 0`).
pub fn real_line_radius<S: Scalar>(ifs: &IfsSpec<S>) -> S {
    let c = ifs
        .branches
        .iter()
        .map(|b| b.intercept.abs())
        .fold(S::zero(), |m, v| if v > m { v } else { m });
    let two = S::from_i64(2);
    two * c / (S::one() - ifs.max_slope())
}

/// Whether every branch maps `[-r, r]` strictly inside `(-r, r)`.
pub fn radius_is_invariant<S: Scalar>(ifs: &IfsSpec<S>, r: &S) -> bool {
    let window = Interval::new(-r.clone(), r.clone());
    ifs.branches.iter().all(|b| {
        let image = window.image(b);
        image.lo > -r.clone() && image.hi < *r
    })
}

/// Smallest `k` with `ρ^k·|x| < r/2`.
pub fn escape_steps<S: Scalar>(rho: &S, x: &S, r: &S) -> Result<usize> {
    if !(*rho >= S::zero() && *rho < S::one()) || *r <= S::zero() {
        return Err(Error::Unsupported("escape time needs 0 <= ρ < 1 and r > 0".into()));
    }
    let target = r.clone() * S::half();
    let mut value = x.abs();
    let mut k = 0;
    while value >= target {
        value = value * rho.clone();
        k += 1;
        if k > 100_000 {
            return Err(Error::Budget("escape time did not settle".into()));
        }
    }
    Ok(k)
}

/// Restricts a line map to `I_k = [-(r0 + k), r0 + k)`, which it maps into
/// itself. `k` must exceed every `|breakpoint|`.
pub fn trim_line_map<S: Scalar>(pc: &PiecewiseContraction<S>, k: u64) -> Result<PiecewiseContraction<S>> {
    if !pc.domain().is_real_line() {
        return Err(Error::Unsupported("only line maps are trimmed".into()));
    }
    let branches = pc.branches().to_vec();
    let r0 = if branches.len() >= 2 {
        real_line_radius(&IfsSpec::new(branches, Domain::real_line())?)
    } else {
        let b = &branches[0];
        S::from_i64(2) * b.intercept.abs() / (S::one() - b.slope.abs())
    };
    let k = S::from_i64(i64::try_from(k).map_err(|_| Error::Unsupported("trim index too large".into()))?);
    let r = r0 + k.clone();
    if pc.breakpoints().iter().any(|x| x.abs() >= k) {
        return Err(Error::Unsupported(
            "the trim index must exceed every |breakpoint|".into(),
        ));
    }
    pc.restricted(Domain::bounded(-r.clone(), r))
}

/// [`trim_line_map`] with the smallest admissible `k ≥ 1`.
pub fn trim_line_map_auto<S: Scalar>(pc: &PiecewiseContraction<S>) -> Result<PiecewiseContraction<S>> {
    let widest = pc
        .breakpoints()
        .iter()
        .map(|x| x.abs().floor().to_f64() as u64 + 1)
        .max()
        .unwrap_or(1);
    trim_line_map(pc, widest.max(1))
}
