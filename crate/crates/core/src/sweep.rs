//! Parameter sweeps over `f + δ (mod 1)`.
//!
//! Each `δ` is classified independently, so records are computed in
//! parallel and sorted by `δ` before anything is written: the output bytes
//! never depend on scheduling.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::{boundary_intervals, equivalence_classes, verify_orbit_bound};
use crate::error::{Error, Result};
use crate::io::Certificate;
use crate::map::ModOneFamily;
use crate::orbit::{detect_cycle, CycleDetection, CycleOptions};
use crate::partition::{backward_closure, build_quasi_partition, extract_periodic_orbits, ClosureBudget};
use crate::scalar::{format_rational, Rational, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    Periodic,
    ExceptionalSuspect,
    BadSetF,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Periodic => "PERIODIC",
            Classification::ExceptionalSuspect => "EXCEPTIONAL_SUSPECT",
            Classification::BadSetF => "BAD_SET_F",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepBudgets {
    /// Steps per orbit probe on inconclusive parameters.
    pub orbit: usize,
    pub closure: ClosureBudget,
}

impl Default for SweepBudgets {
    fn default() -> Self {
        Self {
            orbit: 100_000,
            closure: ClosureBudget::default(),
        }
    }
}

impl SweepBudgets {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            orbit: ((self.orbit as f64 * factor).ceil() as usize).max(1),
            closure: self.closure.scaled(factor),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub delta: Rational,
    pub in_bad_set_f: bool,
    /// Branch count after reduction, 0 on the bad set.
    pub m: usize,
    pub finite_q: bool,
    pub num_orbits: usize,
    /// Sorted.
    pub periods: Vec<usize>,
    pub classification: Classification,
    /// Preimage solves plus orbit steps.
    pub work: u64,
    /// Certified orbits for PERIODIC records; cycles seen by orbit probes
    /// for suspects.
    pub orbits: Vec<Vec<Rational>>,
    /// Why a record is not PERIODIC.
    pub reason: Option<String>,
}

/// A record plus, for PERIODIC ones, the certificate backing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Classified {
    pub record: SweepRecord,
    pub certificate: Option<Certificate>,
}

/// `from + j·(to - from)/steps` for `j = 0..=steps`; a single point when
/// `steps` is 0.
pub fn delta_grid(from: &Rational, to: &Rational, steps: usize) -> Vec<Rational> {
    if steps == 0 {
        return vec![from.clone()];
    }
    let width = to - from;
    (0..=steps)
        .map(|j| from + &width * Rational::from_i64(j as i64) / Rational::from_i64(steps as i64))
        .collect()
}

/// Runs the whole pipeline for one `δ`.
pub fn classify_delta(base: &ModOneFamily<Rational>, delta: &Rational, budgets: &SweepBudgets) -> Result<Classified> {
    let family = base.with_delta(delta.clone());
    let mut record = SweepRecord {
        delta: delta.clone(),
        in_bad_set_f: false,
        m: 0,
        finite_q: false,
        num_orbits: 0,
        periods: Vec::new(),
        classification: Classification::BadSetF,
        work: 0,
        orbits: Vec::new(),
        reason: None,
    };
    if family.is_bad_delta() {
        record.in_bad_set_f = true;
        record.reason = Some("a cell-endpoint image is an integer".into());
        return Ok(Classified {
            record,
            certificate: None,
        });
    }
    let pc = family.reduce()?;
    record.m = pc.len();
    record.classification = Classification::ExceptionalSuspect;
    let closure = backward_closure(&pc, budgets.closure)?;
    record.work = closure.work;
    record.finite_q = closure.finite;
    let outcome = if closure.finite {
        build_quasi_partition(&pc, &closure).and_then(|qp| {
            let structure = extract_periodic_orbits(&pc, &qp)?;
            let table = boundary_intervals(&qp, pc.breakpoints())?;
            let classes = equivalence_classes(&qp, &table, qp.len())?;
            let report = verify_orbit_bound(&structure.orbits, &classes, pc.len(), Some(base.base().len()))?;
            let mut cert = Certificate::new(&pc, &qp, &structure.orbits, Some(&report));
            cert.delta = Some(format_rational(delta));
            Ok((structure.orbits, cert))
        })
    } else {
        Err(Error::Budget("backward closure did not terminate".into()))
    };
    match outcome {
        Ok((orbits, cert)) => {
            record.classification = Classification::Periodic;
            record.num_orbits = orbits.len();
            record.periods = orbits.iter().map(|o| o.period).collect();
            record.periods.sort_unstable();
            record.orbits = orbits.into_iter().map(|o| o.points).collect();
            Ok(Classified {
                record,
                certificate: Some(cert),
            })
        }
        Err(e @ (Error::Budget(_) | Error::NonGeneric(_))) => {
            record.reason = Some(e.to_string());
            probe_orbits(&pc, budgets, &mut record)?;
            Ok(Classified {
                record,
                certificate: None,
            })
        }
        Err(e) => Err(e),
    }
}

/// Diagnostic for suspects: the distinct cycles reached from the cell
/// midpoints within the orbit budget.
fn probe_orbits(pc: &crate::ExactMap, budgets: &SweepBudgets, record: &mut SweepRecord) -> Result<()> {
    let options = CycleOptions {
        budget: budgets.orbit,
        ..CycleOptions::default()
    };
    let mut cycles: Vec<Vec<Rational>> = Vec::new();
    for i in 0..pc.len() {
        let (a, b) = pc.cell(i);
        let (Some(a), Some(b)) = (a, b) else { continue };
        let mid = (a + b) * Rational::half();
        match detect_cycle(pc, &mid, &options)? {
            CycleDetection::Found(rep) => {
                record.work += rep.work;
                if rep.certified && !cycles.contains(&rep.cycle_points) {
                    cycles.push(rep.cycle_points);
                }
            }
            CycleDetection::Inconclusive(inc) => record.work += inc.steps as u64,
        }
    }
    cycles.sort();
    record.num_orbits = cycles.len();
    record.periods = cycles.iter().map(Vec::len).collect();
    record.periods.sort_unstable();
    record.orbits = cycles;
    Ok(())
}

/// Classifies every `δ` of the grid in parallel; output is sorted by `δ`.
pub fn sweep_classify(
    base: &ModOneFamily<Rational>,
    grid: &[Rational],
    budgets: &SweepBudgets,
) -> Result<Vec<Classified>> {
    if grid.is_empty() {
        return Err(Error::Unsupported("empty parameter grid".into()));
    }
    let mut out = grid
        .par_iter()
        .map(|delta| classify_delta(base, delta, budgets))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.record.delta.cmp(&b.record.delta));
    Ok(out)
}

/// Share of EXCEPTIONAL_SUSPECT among records off the bad set; 0 when no
/// record is eligible.
pub fn estimate_exceptional(records: &[SweepRecord]) -> Rational {
    let eligible = records
        .iter()
        .filter(|r| r.classification != Classification::BadSetF)
        .count();
    let suspects = records
        .iter()
        .filter(|r| r.classification == Classification::ExceptionalSuspect)
        .count();
    if eligible == 0 {
        return Rational::from_i64(0);
    }
    Rational::from_i64(suspects as i64) / Rational::from_i64(eligible as i64)
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// `delta,m,classification,num_orbits,periods,work`, LF line endings.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["delta", "m", "classification", "num_orbits", "periods", "work"])?;
    for r in records {
        let periods = r.periods.iter().map(usize::to_string).collect::<Vec<_>>().join(";");
        w.write_record([
            format_rational(&r.delta),
            r.m.to_string(),
            r.classification.to_string(),
            r.num_orbits.to_string(),
            periods,
            r.work.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Bifurcation data: one row per orbit point, exact and as a float.
pub fn write_plot_data<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["delta", "point", "delta_f64", "point_f64"])?;
    for r in records {
        for z in r.orbits.iter().flatten() {
            w.write_record([
                format_rational(&r.delta),
                format_rational(z),
                format!("{:?}", Scalar::to_f64(&r.delta)),
                format!("{:?}", Scalar::to_f64(z)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
