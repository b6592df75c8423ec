//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use pwc_core::io::{verify_certificate, Certificate};
use pwc_core::map::{conjugacy_offset, conjugate_shift, AffineBranch, Domain, ModOneFamily, PiecewiseContraction};
use pwc_core::partition::{attractor_iterates, backward_closure, build_quasi_partition, extract_periodic_orbits};
use pwc_core::sweep::{
    classify_delta, delta_grid, estimate_exceptional, sweep_classify, write_csv, Classification, Classified,
    SweepBudgets,
};
use pwc_core::{ratio, ExactMap, Rational, Scalar};

type Outcome = Result<String, String>;

fn r(p: i64, q: i64) -> Rational {
    ratio(p, q)
}

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

/// Fixed points of `x ↦ frac(λx + b + δ)` on `[0, 1)`, found by solving
/// `λx + b + δ - k = x` for every integer `k` that can occur.
fn one_branch_fixed_points(lambda: &Rational, b: &Rational, delta: &Rational) -> Vec<Rational> {
    let mut out: Vec<Rational> = (-3..=3)
        .map(|k| (b + delta - r(k, 1)) / (r(1, 1) - lambda))
        .filter(|x| *x >= r(0, 1) && *x < r(1, 1))
        .collect();
    out.sort();
    out
}

fn sharpness_family() -> ModOneFamily<Rational> {
    let base =
        PiecewiseContraction::new_raw(Domain::unit(), vec![], vec![AffineBranch::new(r(-1, 2), r(1, 4))]).unwrap();
    ModOneFamily::new(base, r(0, 1)).unwrap()
}

fn criterion_1(certs: &mut Vec<(Certificate, ExactMap)>) -> Outcome {
    let family = sharpness_family();
    let grid = delta_grid(&r(0, 1), &r(1, 20), 49);
    ensure(grid.len() == 50, || "grid size".into())?;
    let start = Instant::now();
    let out = sweep_classify(&family, &grid, &SweepBudgets::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    for c in &out {
        let rec = &c.record;
        ensure(
            rec.classification == Classification::Periodic && rec.num_orbits == 2,
            || {
                format!(
                    "delta {} gave {} with {} orbits",
                    rec.delta, rec.classification, rec.num_orbits
                )
            },
        )?;
        // Both orbits are fixed points, and they are exactly the oracle's.
        let mut points: Vec<_> = rec.orbits.iter().flatten().cloned().collect();
        points.sort();
        let oracle = one_branch_fixed_points(&r(-1, 2), &r(1, 4), &rec.delta);
        ensure(rec.periods == vec![1, 1] && points == oracle, || {
            format!("delta {}: {:?} vs {:?}", rec.delta, points, oracle)
        })?;
        let pc = family
            .with_delta(rec.delta.clone())
            .reduce()
            .map_err(|e| e.to_string())?;
        certs.push((c.certificate.clone().ok_or("missing certificate")?, pc));
    }
    ensure(out[0].record.orbits == vec![vec![r(1, 6)], vec![r(5, 6)]], || {
        "fixed points at 0".into()
    })?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("50 parameters, 2 orbits each, {elapsed:.2?}"))
}

struct Instance {
    family: ModOneFamily<Rational>,
    delta: Rational,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.gen_range(2..=5);
    let slopes = [r(1, 2), r(1, 3), r(2, 5), r(-1, 2)];
    let lambda = slopes[rng.gen_range(0..slopes.len())].clone();
    let den = rng.gen_range(2..=10_000i64);
    let mut cuts: Vec<i64> = Vec::new();
    while cuts.len() < n - 1 {
        let c = rng.gen_range(1..den);
        if !cuts.contains(&c) {
            cuts.push(c);
        }
    }
    cuts.sort_unstable();
    let breakpoints = cuts.into_iter().map(|c| r(c, den)).collect();
    let branches = (0..n)
        .map(|_| AffineBranch::new(lambda.clone(), r(rng.gen_range(0..10_000), rng.gen_range(1..=10_000))))
        .collect();
    let base = PiecewiseContraction::new_raw(Domain::unit(), breakpoints, branches).unwrap();
    let delta = r(rng.gen_range(0..10_000), rng.gen_range(1..=10_000));
    Instance {
        family: ModOneFamily::new(base, r(0, 1)).unwrap(),
        delta,
    }
}

struct Certified {
    pc: ExactMap,
    classified: Classified,
}

fn criterion_2(certified: &mut Vec<Certified>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let instances: Vec<Instance> = (0..240).map(|_| random_instance(&mut rng)).collect();
    let start = Instant::now();
    let results: Vec<_> = instances
        .par_iter()
        .map(|inst| classify_delta(&inst.family, &inst.delta, &SweepBudgets::default()).map(|c| (inst, c)))
        .collect();
    let elapsed = start.elapsed();
    let mut records = Vec::new();
    for result in results {
        let (inst, c) = result.map_err(|e| format!("pipeline error: {e}"))?;
        records.push(c.record.clone());
        if c.record.classification != Classification::Periodic {
            continue;
        }
        let cert = c.certificate.as_ref().ok_or("periodic record without certificate")?;
        let bound = cert.bound.as_ref().ok_or("certificate without bound report")?;
        let n_base = inst.family.base().len();
        ensure(
            bound.num_orbits <= bound.class_count && bound.class_count <= c.record.m && bound.num_orbits <= 2 * n_base,
            || format!("bound fails at delta {}: {:?}", inst.delta, bound),
        )?;
        let pc = inst
            .family
            .with_delta(inst.delta.clone())
            .reduce()
            .map_err(|e| e.to_string())?;
        certified.push(Certified { pc, classified: c });
    }
    let bad = records
        .iter()
        .filter(|r| r.classification == Classification::BadSetF)
        .count();
    ensure(records.len() - bad >= 200, || {
        format!("only {} eligible instances", records.len() - bad)
    })?;
    ensure(!certified.is_empty(), || "nothing certified".into())?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    let fraction = estimate_exceptional(&records);
    Ok(format!(
        "{} instances, {} certified, 0 violations, inconclusive fraction {} (~{:.3}), {elapsed:.2?}",
        records.len() - bad,
        certified.len(),
        fraction,
        Scalar::to_f64(&fraction)
    ))
}

fn criterion_3() -> Outcome {
    let cantor = [AffineBranch::new(r(1, 4), r(1, 8)), AffineBranch::new(r(1, 4), r(5, 8))];
    for k in 0..=10 {
        let (_, len) = attractor_iterates(&cantor, &Domain::unit(), k).map_err(|e| e.to_string())?;
        let expected = (0..k).fold(r(1, 1), |acc, _| acc * r(1, 2));
        ensure(len == expected, || format!("A_{k} has length {len}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..20 {
        let n = rng.gen_range(2..=3);
        let den = 40i64;
        let mut budget = den - rng.gen_range(1..=8);
        let mut branches = Vec::new();
        for i in 0..n {
            let remaining = (n - i - 1) as i64;
            let s = rng.gen_range(1..=(budget - remaining).min(12));
            budget -= s;
            let lambda = r(if rng.gen_bool(0.5) { s } else { -s }, den);
            let room = r(1, 1) - r(s, den);
            let start = if lambda < r(0, 1) { r(s, den) } else { r(0, 1) };
            branches.push(AffineBranch::new(lambda, start + room * r(rng.gen_range(0..=100), 100)));
        }
        let rho: Rational = branches
            .iter()
            .map(|b| {
                if b.slope < r(0, 1) {
                    -b.slope.clone()
                } else {
                    b.slope.clone()
                }
            })
            .sum();
        ensure(rho < r(1, 1), || "random IFS is not highly contractive".into())?;
        let mut bound = r(1, 1);
        for k in 0..=10 {
            let (_, len) = attractor_iterates(&branches, &Domain::unit(), k).map_err(|e| e.to_string())?;
            ensure(len <= bound, || {
                format!("trial {trial}: length {len} exceeds rho^{k} = {bound}")
            })?;
            bound *= rho.clone();
        }
    }
    Ok("(1/2)^k exact for k <= 10; 20 random systems within rho^k".into())
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut checks = 0;
    for _ in 0..10 {
        let lambda = [r(1, 2), r(-1, 3), r(2, 5), r(-3, 7)][rng.gen_range(0..4)].clone();
        let n = rng.gen_range(2..=4);
        let mut cuts: Vec<Rational> = (0..n - 1)
            .map(|_| r(rng.gen_range(-500..500), rng.gen_range(1..100)))
            .collect();
        cuts.sort();
        cuts.dedup();
        let branches = (0..cuts.len() + 1)
            .map(|_| AffineBranch::new(lambda.clone(), r(rng.gen_range(-500..500), rng.gen_range(1..100))))
            .collect();
        let line = PiecewiseContraction::new_raw(Domain::real_line(), cuts, branches).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let delta = r(rng.gen_range(-1000..1000), rng.gen_range(1..200));
            let shifted = line.shifted(&delta).map_err(|e| e.to_string())?;
            let g = conjugate_shift(&line, &delta).map_err(|e| e.to_string())?;
            let offset = conjugacy_offset(&lambda, &delta);
            for _ in 0..100 {
                let x = r(rng.gen_range(-10_000..10_000), rng.gen_range(1..1_000));
                let lhs = g.eval(&x).map_err(|e| e.to_string())?.0 + &offset;
                let rhs = shifted.eval(&(&x + &offset)).map_err(|e| e.to_string())?.0;
                ensure(lhs == rhs, || format!("conjugacy fails at x = {x}, delta = {delta}"))?;
                checks += 1;
            }
        }
    }
    Ok(format!("{checks} exact identities, 0 failures"))
}

/// Points inside cell `i` where `λx + b_i + δ` is an integer.
fn split_points(base: &ExactMap, delta: &Rational) -> Vec<Rational> {
    let mut out: Vec<Rational> = base.breakpoints().to_vec();
    for i in 0..base.len() {
        let (a, b) = base.cell(i);
        let (a, b) = (a.unwrap(), b.unwrap());
        let branch = base.branch(i);
        for k in -3..=3 {
            let x = (r(k, 1) - &branch.intercept - delta) / &branch.slope;
            if x > a && x < b {
                out.push(x);
            }
        }
    }
    out.sort();
    out
}

fn criterion_5() -> Outcome {
    let base = PiecewiseContraction::new_raw(
        Domain::unit(),
        vec![r(3, 10), r(3, 5), r(9, 10)],
        [r(1, 3), r(31, 60), r(1, 10), r(-7, 20)]
            .into_iter()
            .map(|b| AffineBranch::new(r(1, 2), b))
            .collect(),
    )
    .unwrap();
    let family = ModOneFamily::new(base.clone(), r(0, 1)).unwrap();
    let at = |delta: Rational| family.with_delta(delta).reduce().map_err(|e| e.to_string());
    let a = at(r(2, 9))?;
    ensure(a.len() == 5 && a.breakpoints().contains(&r(47, 90)), || {
        format!("2/9: {:?}", a.breakpoints())
    })?;
    ensure(a.breakpoints() == split_points(&base, &r(2, 9)).as_slice(), || {
        "2/9 disagrees with the oracle".into()
    })?;
    let b = at(r(14, 25))?;
    let expected = vec![r(16, 75), r(3, 10), r(3, 5), r(17, 25), r(9, 10)];
    ensure(b.len() == 6 && b.breakpoints() == expected.as_slice(), || {
        format!("14/25: {:?}", b.breakpoints())
    })?;
    ensure(b.breakpoints() == split_points(&base, &r(14, 25)).as_slice(), || {
        "14/25 disagrees with the oracle".into()
    })?;
    Ok("m = 5 at 2/9, m = 6 at 14/25, breakpoints exact".into())
}

fn criterion_6(certs: &[(Certificate, ExactMap)], dir: &Path) -> Outcome {
    let pwc = env!("CARGO_BIN_EXE_pwc");
    for (i, (cert, pc)) in certs.iter().enumerate() {
        let text = cert.to_json().map_err(|e| e.to_string())?;
        let parsed = Certificate::from_json(&text).map_err(|e| e.to_string())?;
        verify_certificate(&parsed, pc).map_err(|e| format!("certificate {i}: {e}"))?;
    }
    // A sample also goes through the command line, map taken from the file.
    for (i, (cert, _)) in certs.iter().enumerate().step_by(25) {
        let cert_path = dir.join(format!("c{i}.json"));
        let map_path = dir.join(format!("m{i}.json"));
        fs::write(&cert_path, cert.to_json().unwrap()).map_err(|e| e.to_string())?;
        fs::write(&map_path, cert.map.to_json().unwrap()).map_err(|e| e.to_string())?;
        let status = Command::new(pwc)
            .arg("verify")
            .arg(&cert_path)
            .arg(&map_path)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            format!("pwc verify rejected certificate {i}")
        })?;
    }
    Ok(format!("{} of {} certificates re-verified", certs.len(), certs.len()))
}

fn criterion_7(certified: &[Certified]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut starts = 0;
    for c in certified {
        let pc = &c.pc;
        let closure = backward_closure(pc, Default::default()).map_err(|e| e.to_string())?;
        let qp = build_quasi_partition(pc, &closure).map_err(|e| e.to_string())?;
        let structure = extract_periodic_orbits(pc, &qp).map_err(|e| e.to_string())?;
        let mut done = 0;
        while done < 25 {
            let x = r(rng.gen_range(0..10_000), 10_000);
            let Some(l) = qp.locate(&x) else { continue };
            let orbit = &structure.orbits[structure.basin[l]];
            let (s, p) = (structure.entry[l], orbit.period);
            let steps = s + 4 * p;
            let trace = pwc_core::orbit::iterate_with_itinerary(pc, &x, steps).map_err(|e| e.to_string())?;
            // Smallest period of the digit tail over the window.
            let tail = &trace.digits[s..];
            let q = (1..=p)
                .find(|&q| (0..tail.len() - q).all(|k| tail[k] == tail[k + q]))
                .unwrap_or(0);
            ensure(q > 0 && p % q == 0, || {
                format!("itinerary from {x} is not periodic after {s} steps")
            })?;
            // The tail follows the certified word.
            let at = orbit
                .interval_cycle
                .iter()
                .position(|&j| j == qp.tau_iter(l, s))
                .ok_or("cycle mismatch")?;
            ensure((0..p).all(|k| tail[k] == orbit.branch_word[(at + k) % p]), || {
                format!("itinerary from {x} leaves the word")
            })?;
            done += 1;
            starts += 1;
        }
    }
    Ok(format!(
        "{starts} starts over {} instances settle within preperiod + 4 periods",
        certified.len()
    ))
}

fn run_sweep_cli(family: &Path, out: &Path, threads: Option<usize>) -> Result<Vec<u8>, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pwc"));
    cmd.args(["sweep"])
        .arg(family)
        .args([
            "--from",
            "0",
            "--to",
            "1",
            "--steps",
            "60",
            "--max-points",
            "20000",
            "--csv",
        ])
        .arg(out);
    if let Some(t) = threads {
        cmd.env("RAYON_NUM_THREADS", t.to_string());
    }
    let status = cmd.output().map_err(|e| e.to_string())?;
    ensure(matches!(status.status.code(), Some(0) | Some(2)), || {
        format!("sweep failed: {}", String::from_utf8_lossy(&status.stderr))
    })?;
    fs::read(out).map_err(|e| e.to_string())
}

fn criterion_8(dir: &Path) -> Outcome {
    let family = dir.join("family.json");
    fs::write(
        &family,
        r#"{"domain": ["0", "1"], "slope": "1/2", "breakpoints": ["3/10", "3/5", "9/10"], "intercepts": ["1/3", "31/60", "1/10", "-7/20"]}"#,
    )
    .map_err(|e| e.to_string())?;
    let first = run_sweep_cli(&family, &dir.join("a.csv"), None)?;
    let second = run_sweep_cli(&family, &dir.join("b.csv"), None)?;
    let serial = run_sweep_cli(&family, &dir.join("c.csv"), Some(1))?;
    ensure(first == second && first == serial, || {
        "CSV bytes differ between runs".into()
    })?;
    ensure(!first.contains(&b'\r'), || "CRLF in CSV".into())?;
    // The library agrees under explicit pools too.
    let base = sharpness_family();
    let grid = delta_grid(&r(0, 1), &r(1, 1), 40);
    let render = |threads: usize| -> Result<Vec<u8>, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        let out = pool
            .install(|| sweep_classify(&base, &grid, &SweepBudgets::default()))
            .map_err(|e| e.to_string())?;
        let mut bytes = Vec::new();
        let records: Vec<_> = out.into_iter().map(|c| c.record).collect();
        write_csv(&records, &mut bytes).map_err(|e| e.to_string())?;
        Ok(bytes)
    };
    ensure(render(1)? == render(4)?, || {
        "library CSV depends on thread count".into()
    })?;
    Ok(format!("3 CLI runs and 2 pools byte-identical ({} bytes)", first.len()))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut certs = Vec::new();
    let mut certified = Vec::new();
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 sharpness sweep", criterion_1(&mut certs)),
        ("2 orbit bounds on random instances", criterion_2(&mut certified)),
        ("3 attractor measure", criterion_3()),
        ("4 shift conjugacy", criterion_4()),
        ("5 mod-1 reduction goldens", criterion_5()),
    ];
    certs.extend(
        certified
            .iter()
            .filter_map(|c| c.classified.certificate.clone().map(|cert| (cert, c.pc.clone()))),
    );
    results.push(("6 certificate round-trip", criterion_6(&certs, dir.path())));
    results.push(("7 itinerary periodicity", criterion_7(&certified)));
    results.push(("8 determinism", criterion_8(dir.path())));
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(why) => {
                failed += 1;
                println!("criterion {name}: FAIL ({why})");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
