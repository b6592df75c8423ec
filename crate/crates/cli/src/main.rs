use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use pwc_core::counting::{boundary_intervals, equivalence_classes, verify_orbit_bound};
use pwc_core::ifs::{clamp_construction, highly_contractive_check, radius_is_invariant, real_line_radius, IfsSpec};
use pwc_core::io::{verify_certificate, Certificate, MapDocument};
use pwc_core::orbit::{detect_cycle, iterate_with_itinerary, CycleDetection, CycleOptions};
use pwc_core::partition::{backward_closure, build_quasi_partition, extract_periodic_orbits, ClosureBudget};
use pwc_core::sweep::{
    delta_grid, estimate_exceptional, sweep_classify, write_csv, write_plot_data, Classification, SweepBudgets,
};
use pwc_core::{format_rational, parse_rational, Error, ExactMap, Rational, Scalar};

const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

/// Exact dynamics of piecewise contractions and their mod-1 families.
#[derive(Parser, Debug)]
#[command(name = "pwc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Orbit steps allowed per cycle search (before PWC_BUDGET_SCALE)
    #[arg(long, global = true, default_value_t = 100_000)]
    orbit_budget: usize,

    /// Largest backward closure searched
    #[arg(long, global = true, default_value_t = 100_000)]
    max_points: usize,

    /// Deepest backward closure searched
    #[arg(long, global = true, default_value_t = 10_000)]
    max_depth: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the map at one point
    Eval { map: PathBuf, x: String },
    /// Print an orbit with its itinerary, then the cycle it falls into
    Orbit {
        map: PathBuf,
        x: String,
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
    /// Backward closure, quasi-partition and certified periodic orbits
    Partition {
        map: PathBuf,
        /// Write the checkable certificate here
        #[arg(long)]
        cert: Option<PathBuf>,
    },
    /// Classify the family f + δ (mod 1) over a grid of δ
    Sweep {
        family: PathBuf,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// Grid intervals; the grid has steps + 1 points
        #[arg(long)]
        steps: usize,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write bifurcation plot data here
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Write one certificate and reduced map per PERIODIC record here
        #[arg(long)]
        certs: Option<PathBuf>,
    },
    /// Re-check a certificate against a map by evaluation alone
    Verify { cert: PathBuf, map: PathBuf },
    /// Highly-contractive test, clamp construction and line radius
    IfsCheck {
        ifs: PathBuf,
        /// Breakpoints for the clamp construction, comma separated
        #[arg(long, value_delimiter = ',')]
        clamp: Option<Vec<String>>,
        #[arg(long)]
        radius: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::TheoremViolation(_) | Error::CertificateRejected(_)) => EXIT_VIOLATION,
        Some(Error::Budget(_) | Error::NonGeneric(_)) => EXIT_INCONCLUSIVE,
        _ => 1,
    }
}

fn budget_scale() -> anyhow::Result<f64> {
    let Ok(text) = std::env::var("PWC_BUDGET_SCALE") else {
        return Ok(1.0);
    };
    let scale = parse_rational(&text).context("PWC_BUDGET_SCALE")?;
    if scale <= Rational::from_i64(0) {
        bail!("PWC_BUDGET_SCALE must be positive, got {text}");
    }
    Ok(Scalar::to_f64(&scale))
}

fn budgets(cli: &Cli) -> anyhow::Result<SweepBudgets> {
    let base = SweepBudgets {
        orbit: cli.orbit_budget,
        closure: ClosureBudget {
            max_points: cli.max_points,
            max_depth: cli.max_depth,
        },
    };
    Ok(base.scaled(budget_scale()?))
}

fn read_doc(path: &Path) -> anyhow::Result<MapDocument> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    MapDocument::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_map(path: &Path) -> anyhow::Result<ExactMap> {
    Ok(read_doc(path)?.to_map()?)
}

fn show(r: &Rational) -> String {
    format!("{} (~{})", format_rational(r), Scalar::to_f64(r))
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let budgets = budgets(&cli)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Eval { map, x } => {
            let pc = read_map(map)?;
            let (value, branch) = pc.eval(&parse_rational(x)?)?;
            writeln!(out, "{} branch {branch}", format_rational(&value))?;
            Ok(0)
        }
        Command::Orbit { map, x, steps } => {
            let pc = read_map(map)?;
            let x = parse_rational(x)?;
            let trace = iterate_with_itinerary(&pc, &x, *steps)?;
            for (k, (p, d)) in trace.points.iter().zip(&trace.digits).enumerate() {
                writeln!(out, "{k}\t{}\t{d}", format_rational(p))?;
            }
            let options = CycleOptions {
                budget: budgets.orbit,
                ..CycleOptions::default()
            };
            match detect_cycle(&pc, &x, &options)? {
                CycleDetection::Found(rep) => {
                    let points: Vec<_> = rep.cycle_points.iter().map(format_rational).collect();
                    writeln!(
                        out,
                        "cycle period {} preperiod {} points [{}] word {:?} {}",
                        rep.period,
                        rep.preperiod,
                        points.join(", "),
                        rep.branch_word,
                        if rep.certified { "certified" } else { "uncertified" }
                    )?;
                    Ok(if rep.certified { 0 } else { EXIT_INCONCLUSIVE })
                }
                CycleDetection::Inconclusive(inc) => {
                    writeln!(out, "inconclusive after {} steps: {}", inc.steps, inc.reason)?;
                    Ok(EXIT_INCONCLUSIVE)
                }
            }
        }
        Command::Partition { map, cert } => {
            let doc = read_doc(map)?;
            let pc = doc.to_map()?;
            let closure = backward_closure(&pc, budgets.closure)?;
            writeln!(out, "Q: {} points, depth {}", closure.len(), closure.depth_reached)?;
            if !closure.finite {
                writeln!(out, "closure not finite within budget: possibly exceptional")?;
                return Ok(EXIT_INCONCLUSIVE);
            }
            let qp = build_quasi_partition(&pc, &closure)?;
            writeln!(out, "intervals: {}", qp.len())?;
            writeln!(out, "tau: {:?}", qp.tau)?;
            let structure = match extract_periodic_orbits(&pc, &qp) {
                Ok(s) => s,
                Err(Error::NonGeneric(reason)) => {
                    writeln!(out, "non-generic: {reason}")?;
                    return Ok(EXIT_INCONCLUSIVE);
                }
                Err(e) => return Err(e.into()),
            };
            let table = boundary_intervals(&qp, pc.breakpoints())?;
            let classes = equivalence_classes(&qp, &table, qp.len())?;
            let n_base = if doc.delta.is_some() {
                Some(doc.raw_map()?.len())
            } else {
                None
            };
            let report = verify_orbit_bound(&structure.orbits, &classes, pc.len(), n_base)?;
            writeln!(out, "classes: {} (bound {})", report.class_count, report.n)?;
            for orbit in &structure.orbits {
                let points: Vec<_> = orbit.points.iter().map(show).collect();
                writeln!(out, "orbit period {}: {}", orbit.period, points.join(", "))?;
            }
            if let Some(path) = cert {
                let mut document = Certificate::new(&pc, &qp, &structure.orbits, Some(&report));
                document.delta = doc.delta.clone();
                fs::write(path, document.to_json()? + "\n").with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(0)
        }
        Command::Sweep {
            family,
            from,
            to,
            steps,
            csv,
            plot,
            certs,
        } => {
            let family = read_doc(family)?.family()?;
            let grid = delta_grid(&parse_rational(from)?, &parse_rational(to)?, *steps);
            let classified = sweep_classify(&family, &grid, &budgets)?;
            let records: Vec<_> = classified.iter().map(|c| c.record.clone()).collect();
            match csv {
                Some(path) => {
                    let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
                    write_csv(&records, io::BufWriter::new(file))?;
                }
                None => write_csv(&records, &mut out)?,
            }
            if let Some(path) = plot {
                let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
                write_plot_data(&records, io::BufWriter::new(file))?;
            }
            if let Some(dir) = certs {
                fs::create_dir_all(dir)?;
                for (idx, c) in classified.iter().enumerate() {
                    if let Some(cert) = &c.certificate {
                        fs::write(dir.join(format!("delta_{idx}.cert.json")), cert.to_json()? + "\n")?;
                        fs::write(dir.join(format!("delta_{idx}.map.json")), cert.map.to_json()? + "\n")?;
                    }
                }
            }
            let suspects = records
                .iter()
                .filter(|r| r.classification == Classification::ExceptionalSuspect)
                .count();
            eprintln!(
                "{} records, {suspects} suspect, exceptional fraction {}",
                records.len(),
                format_rational(&estimate_exceptional(&records))
            );
            Ok(if suspects > 0 { EXIT_INCONCLUSIVE } else { 0 })
        }
        Command::Verify { cert, map } => {
            let text = fs::read_to_string(cert).with_context(|| format!("reading {}", cert.display()))?;
            let cert = Certificate::from_json(&text)?;
            let pc = read_map(map)?;
            let verified = verify_certificate(&cert, &pc)?;
            writeln!(
                out,
                "certificate verified: {} intervals, {} orbits, periods {:?}",
                verified.intervals, verified.orbits, verified.periods
            )?;
            Ok(0)
        }
        Command::IfsCheck { ifs, clamp, radius } => {
            let raw = read_doc(ifs)?.raw_map()?;
            let system = IfsSpec::from_map(&raw)?;
            let (ok, rho) = highly_contractive_check(&system);
            writeln!(
                out,
                "sum of |slopes| = {} highly contractive: {ok}",
                format_rational(&rho)
            )?;
            if let Some(points) = clamp {
                let points = points
                    .iter()
                    .map(|p| parse_rational(p))
                    .collect::<Result<Vec<_>, _>>()?;
                let clamped = clamp_construction(&system, &points)?;
                writeln!(out, "clamp delta = {}", format_rational(&clamped.delta))?;
                for (i, b) in clamped.branches.iter().enumerate() {
                    writeln!(
                        out,
                        "branch {i} window [{}, {}]",
                        format_rational(&b.window.lo),
                        format_rational(&b.window.hi)
                    )?;
                }
                let rho = clamped.rho();
                writeln!(
                    out,
                    "clamped rho = {} highly contractive: {}",
                    format_rational(&rho),
                    rho < Rational::from_i64(1)
                )?;
            }
            if *radius {
                let r0 = real_line_radius(&system);
                let check = if r0 > Rational::from_i64(0) {
                    r0.clone()
                } else {
                    Rational::from_i64(1)
                };
                writeln!(
                    out,
                    "r0 = {} invariant: {}",
                    format_rational(&r0),
                    radius_is_invariant(&system, &check)
                )?;
            }
            Ok(0)
        }
    }
}
