//! JSON documents: map definitions and checkable certificates.
//!
//! Every rational is a `"p/q"` string. A certificate carries the map it was
//! computed for, so a third party can re-check it with evaluation alone.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::counting::OrbitBoundReport;
use crate::error::{Error, Result};
use crate::map::{AffineBranch, Domain, ModOneFamily, PiecewiseContraction};
use crate::orbit::PeriodicOrbit;
use crate::partition::{Interval, PeriodicOrbitCert, QuasiPartition};
use crate::scalar::{format_rational, parse_rational, pq_vec, Rational};

/// `"p/q"` for one slope shared by all branches, or one entry per branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SlopeSpec {
    Uniform(String),
    PerBranch(Vec<String>),
}

type MapParts = (Domain<Rational>, Vec<Rational>, Vec<AffineBranch<Rational>>);

/// Map definition file.
///
/// `delta`, when present, shifts the map and reduces it mod 1. `wrap` marks
/// a circle map whose value `hi` reads as `lo`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub domain: [Value; 2],
    pub slope: SlopeSpec,
    pub breakpoints: Vec<String>,
    pub intercepts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub wrap: bool,
}

fn parse_end(v: &Value, low: bool) -> Result<Option<Rational>> {
    let text = match v {
        Value::String(s) => s.trim().to_string(),
        Value::Number(n) => n.to_string(),
        _ => return Err(Error::Parse(format!("domain end must be a string or number, got {v}"))),
    };
    match (text.as_str(), low) {
        ("-inf", true) | ("inf", false) | ("+inf", false) => Ok(None),
        ("inf", true) => Ok(None),
        _ => parse_rational(&text).map(Some),
    }
}

fn render_end(v: &Option<Rational>, low: bool) -> Value {
    match v {
        Some(r) => Value::String(format_rational(r)),
        None => Value::String(if low { "-inf" } else { "inf" }.into()),
    }
}

impl MapDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn parts(&self) -> Result<MapParts> {
        let domain = Domain {
            lo: parse_end(&self.domain[0], true)?,
            hi: parse_end(&self.domain[1], false)?,
        };
        let breakpoints = self
            .breakpoints
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>>>()?;
        let intercepts = self
            .intercepts
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>>>()?;
        let slopes = match &self.slope {
            SlopeSpec::Uniform(s) => vec![parse_rational(s)?; intercepts.len()],
            SlopeSpec::PerBranch(v) => v.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>>>()?,
        };
        if slopes.len() != intercepts.len() {
            return Err(Error::InvalidMap(format!(
                "{} slopes for {} intercepts",
                slopes.len(),
                intercepts.len()
            )));
        }
        let branches = slopes
            .into_iter()
            .zip(intercepts)
            .map(|(s, b)| AffineBranch::new(s, b))
            .collect();
        Ok((domain, breakpoints, branches))
    }

    /// The branches as written, with no self-map check and no shift.
    pub fn raw_map(&self) -> Result<PiecewiseContraction<Rational>> {
        let (domain, breakpoints, branches) = self.parts()?;
        PiecewiseContraction::new_raw(domain, breakpoints, branches)
    }

    /// The mod-1 family with this map as base, at the document's `delta`
    /// (0 when absent).
    pub fn family(&self) -> Result<ModOneFamily<Rational>> {
        let delta = self
            .delta
            .as_deref()
            .map(parse_rational)
            .transpose()?
            .unwrap_or_else(|| Rational::from_integer(0.into()));
        ModOneFamily::new(self.raw_map()?, delta)
    }

    /// The map a user means by this file: reduced when `delta` is given,
    /// a circle map when `wrap` is set, the raw map on the line, and a
    /// checked self-map otherwise.
    pub fn to_map(&self) -> Result<PiecewiseContraction<Rational>> {
        if self.delta.is_some() {
            return self.family()?.reduce();
        }
        let (domain, breakpoints, branches) = self.parts()?;
        if self.wrap {
            PiecewiseContraction::new_wrapped(domain, breakpoints, branches)
        } else if domain.is_real_line() {
            PiecewiseContraction::new_raw(domain, breakpoints, branches)
        } else {
            PiecewiseContraction::new(domain, breakpoints, branches)
        }
    }

    pub fn from_map(pc: &PiecewiseContraction<Rational>) -> Self {
        let slope = match pc.uniform_slope() {
            Some(s) => SlopeSpec::Uniform(format_rational(s)),
            None => SlopeSpec::PerBranch(pc.branches().iter().map(|b| format_rational(&b.slope)).collect()),
        };
        Self {
            domain: [render_end(&pc.domain().lo, true), render_end(&pc.domain().hi, false)],
            slope,
            breakpoints: pc.breakpoints().iter().map(format_rational).collect(),
            intercepts: pc.branches().iter().map(|b| format_rational(&b.intercept)).collect(),
            delta: None,
            wrap: pc.is_wrapped(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitEntry {
    #[serde(with = "pq_vec")]
    pub points: Vec<Rational>,
    pub period: usize,
    pub word: Vec<usize>,
    pub interval_cycle: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub num_orbits: usize,
    pub class_count: usize,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_base: Option<usize>,
    pub orbit_class: Vec<usize>,
}

/// `{map, Q, intervals, tau, eta, orbits, bound}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub map: MapDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<String>,
    #[serde(rename = "Q", with = "pq_vec")]
    pub q: Vec<Rational>,
    pub intervals: Vec<[String; 2]>,
    pub tau: Vec<usize>,
    pub eta: Vec<usize>,
    pub orbits: Vec<OrbitEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundEntry>,
}

impl Certificate {
    pub fn new(
        pc: &PiecewiseContraction<Rational>,
        qp: &QuasiPartition,
        orbits: &[PeriodicOrbitCert],
        bound: Option<&OrbitBoundReport>,
    ) -> Self {
        Self {
            map: MapDocument::from_map(pc),
            delta: None,
            q: qp.q.clone(),
            intervals: qp
                .intervals
                .iter()
                .map(|j| [format_rational(&j.lo), format_rational(&j.hi)])
                .collect(),
            tau: qp.tau.clone(),
            eta: qp.eta.clone(),
            orbits: orbits
                .iter()
                .map(|o| OrbitEntry {
                    points: o.points.clone(),
                    period: o.period,
                    word: o.branch_word.clone(),
                    interval_cycle: o.interval_cycle.clone(),
                })
                .collect(),
            bound: bound.map(|b| BoundEntry {
                num_orbits: b.num_orbits,
                class_count: b.class_count,
                n: b.n,
                n_base: b.n_base,
                orbit_class: b.orbit_class.clone(),
            }),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// What a successful verification established.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifiedCertificate {
    pub intervals: usize,
    pub orbits: usize,
    pub periods: Vec<usize>,
}

/// Re-checks a certificate against `pc` by evaluation: `Q` contains the
/// breakpoints and cuts the domain into exactly the listed intervals, each
/// interval maps inside its `τ` target, and every orbit is exactly periodic
/// on its interval cycle.
pub fn verify_certificate(cert: &Certificate, pc: &PiecewiseContraction<Rational>) -> Result<VerifiedCertificate> {
    let reject = |what: String| Err(Error::CertificateRejected(what));
    let (Some(lo), Some(hi)) = (pc.domain().lo.clone(), pc.domain().hi.clone()) else {
        return reject("the map has an unbounded domain".into());
    };
    if cert.q.windows(2).any(|w| w[0] >= w[1]) {
        return reject("Q is not strictly increasing".into());
    }
    if cert.q.iter().any(|q| !pc.domain().contains(q)) {
        return reject("Q leaves the domain".into());
    }
    if let Some(x) = pc.breakpoints().iter().find(|x| cert.q.binary_search(x).is_err()) {
        return reject(format!("breakpoint {x} is missing from Q"));
    }
    let mut cuts = vec![lo.clone()];
    cuts.extend(cert.q.iter().filter(|q| **q > lo).cloned());
    cuts.push(hi);
    let expected: Vec<Interval<Rational>> = cuts
        .windows(2)
        .map(|w| Interval::new(w[0].clone(), w[1].clone()))
        .collect();
    let intervals = cert
        .intervals
        .iter()
        .map(|[a, b]| Ok(Interval::new(parse_rational(a)?, parse_rational(b)?)))
        .collect::<Result<Vec<_>>>()?;
    if intervals != expected {
        return reject("intervals are not the components of the domain minus Q".into());
    }
    let m = intervals.len();
    if cert.tau.len() != m || cert.eta.len() != m || cert.tau.iter().any(|&t| t >= m) {
        return reject("tau or eta has the wrong shape".into());
    }
    for (l, j) in intervals.iter().enumerate() {
        let mid = j.midpoint();
        let (value, cell) = pc.eval(&mid)?;
        let cell_end = pc.cell(cell).1;
        if cell != cert.eta[l] || pc.cell_index(&j.lo) != cell || cell_end.is_some_and(|e| j.hi > e) {
            return reject(format!("interval {l} is not inside cell {}", cert.eta[l]));
        }
        let target = &intervals[cert.tau[l]];
        if !target.contains_open(&value) {
            return reject(format!(
                "f(midpoint of interval {l}) is outside interval {}",
                cert.tau[l]
            ));
        }
        let image = Interval::new(pc.eval_branch(cell, &j.lo), pc.eval_branch(cell, &j.hi));
        let (a, b) = if image.lo <= image.hi {
            (image.lo, image.hi)
        } else {
            (image.hi, image.lo)
        };
        if a < target.lo || b > target.hi {
            return reject(format!("interval {l} is not mapped inside interval {}", cert.tau[l]));
        }
    }
    let mut periods = Vec::with_capacity(cert.orbits.len());
    for (o, entry) in cert.orbits.iter().enumerate() {
        let p = entry.period;
        if p == 0 || entry.points.len() != p || entry.interval_cycle.len() != p {
            return reject(format!("orbit {o} has inconsistent lengths"));
        }
        let orbit = PeriodicOrbit {
            points: entry.points.clone(),
            word: entry.word.clone(),
        };
        if let Err(e) = orbit.verify(pc) {
            return reject(format!("orbit {o}: {e}"));
        }
        for k in 0..p {
            let l = entry.interval_cycle[k];
            if l >= m || !intervals[l].contains_open(&entry.points[k]) {
                return reject(format!("orbit {o} point {k} is not inside interval {l}"));
            }
            if cert.tau[l] != entry.interval_cycle[(k + 1) % p] {
                return reject(format!("orbit {o} does not follow tau at step {k}"));
            }
        }
        periods.push(p);
    }
    periods.sort_unstable();
    Ok(VerifiedCertificate {
        intervals: m,
        orbits: cert.orbits.len(),
        periods,
    })
}
