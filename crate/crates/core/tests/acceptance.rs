//! One pass/fail line per acceptance criterion.
//!
//! The quick mode runs the property suite and the two coarse vertical-load
//! levels. `LDG_ACCEPTANCE_FULL=1` runs every experiment, which takes a long
//! time in release mode. Only the property suite and the vertical-load
//! reproduction fail the process; the remaining lines are reported.

use std::time::Instant;

use ldg_plates::presets::{preset, run_experiment, run_level, ExperimentOutcome, LevelRow};
use ldg_plates::verify::run_suite;
use ldg_plates::{BrokenField, Result};

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Pass,
    Fail,
    Skip,
}

struct Line {
    id: u32,
    name: &'static str,
    status: Status,
    detail: String,
}

impl Line {
    fn print(&self) {
        let tag = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        println!("[{tag}] {}. {}: {}", self.id, self.name, self.detail);
    }
}

fn full() -> bool {
    std::env::var("LDG_ACCEPTANCE_FULL").is_ok_and(|v| !v.is_empty() && v != "0")
}

fn rel(value: f64, reference: f64) -> f64 {
    (value - reference).abs() / reference.abs()
}

/// Appends `what = value (ref reference)` and returns whether `value` is
/// within `tol` relative error.
fn within(detail: &mut Vec<String>, what: &str, value: f64, reference: f64, tol: f64) -> bool {
    let ok = rel(value, reference) <= tol;
    detail.push(format!(
        "{what} {value:.5e} (ref {reference:.5e}{})",
        if ok { "" } else { ", out" }
    ));
    ok
}

fn status(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn skipped(id: u32, name: &'static str) -> Line {
    Line {
        id,
        name,
        status: Status::Skip,
        detail: "set LDG_ACCEPTANCE_FULL=1".into(),
    }
}

fn errored(id: u32, name: &'static str, e: ldg_plates::Error) -> Line {
    Line {
        id,
        name,
        status: Status::Fail,
        detail: format!("error: {e}"),
    }
}

/// Energy, defect, steps, Schur range and deflection per level.
type LevelRef = (f64, f64, usize, (usize, usize), f64);

const VERTICAL: [LevelRef; 3] = [
    (-1.002e-2, 1.062e-2, 11, (60, 65), 0.0478),
    (-9.709e-3, 5.967e-3, 17, (85, 101), 0.0443),
    (-8.762e-3, 2.962e-3, 28, (118, 148), 0.0365),
];

fn vertical_rows() -> Result<Vec<LevelRow>> {
    let levels: &[u32] = if full() { &[3, 4, 5] } else { &[3, 4] };
    levels
        .iter()
        .map(|&l| run_level("vertical_load", l, None))
        .collect()
}

fn table1(rows: &[LevelRow]) -> Line {
    let mut d = Vec::new();
    let mut ok = true;
    for (row, &(e, dd, steps, (lo, hi), _)) in rows.iter().zip(&VERTICAL) {
        d.push(format!("l={}:", row.level));
        ok &= within(&mut d, "E", row.energy, e, 0.03);
        ok &= within(&mut d, "D", row.defect, dd, 0.03);
        let steps_ok = row.steps.abs_diff(steps) <= 3;
        d.push(format!("steps {} (ref {steps})", row.steps));
        let (slo, shi) = row.schur.unwrap_or((0, 0));
        let band = |v: usize, r: usize| (v as f64 - r as f64).abs() <= 0.3 * r as f64;
        let schur_ok = band(slo, lo) && band(shi, hi);
        d.push(format!("Schur [{slo}, {shi}] (ref [{lo}, {hi}])"));
        let limit = if row.level == 3 { 10.0 } else { 600.0 };
        let time_ok = row.level == 4 || row.seconds <= limit;
        d.push(format!("{:.1} s", row.seconds));
        ok &= steps_ok && schur_ok && time_ok;
    }
    let partial = if rows.len() < 3 { " (l=5 skipped)" } else { "" };
    Line {
        id: 1,
        name: "vertical load table",
        status: status(ok),
        detail: format!("{}{partial}", d.join(" ")),
    }
}

fn table3(rows: &[LevelRow]) -> Line {
    let mut d = Vec::new();
    let mut ok = true;
    for (row, v) in rows.iter().zip(&VERTICAL) {
        ok &= within(
            &mut d,
            &format!("l={} max y3", row.level),
            row.deflection.unwrap_or(f64::NAN),
            v.4,
            0.05,
        );
    }
    let partial = if rows.len() < 3 { " (l=5 skipped)" } else { "" };
    Line {
        id: 2,
        name: "diagonal deflection",
        status: status(ok),
        detail: format!("{}{partial}", d.join(", ")),
    }
}

fn stage_check(
    d: &mut Vec<String>,
    out: &ExperimentOutcome,
    label: &str,
    e: f64,
    dd: f64,
    tol: f64,
) -> bool {
    match out.stage(label) {
        Some(s) => {
            let a = within(d, &format!("{label} E"), s.energy, e, tol);
            let b = within(d, &format!("{label} D"), s.defect, dd, tol);
            a && b
        }
        None => {
            d.push(format!("{label} missing"));
            false
        }
    }
}

fn one_mode() -> Line {
    const NAME: &str = "one-mode cylinder stages";
    match run_experiment(&preset("one_mode", None).unwrap(), None) {
        Ok(out) => {
            let mut d = Vec::new();
            let mut ok = stage_check(&mut d, &out, "BC PP", 1.1951, 3.2899, 0.05);
            ok &= stage_check(&mut d, &out, "Metric PP", 2.5464, 9.8609e-2, 0.05);
            ok &= stage_check(&mut d, &out, "Final", 1.7707, 9.5183e-2, 0.05);
            let pp = out.preprocess.as_ref().map_or(0, |s| s.n);
            ok &= pp.abs_diff(49) <= 10;
            d.push(format!("PP steps {pp} (ref 49)"));
            Line {
                id: 3,
                name: NAME,
                status: status(ok),
                detail: d.join(", "),
            }
        }
        Err(e) => errored(3, NAME, e),
    }
}

fn two_modes() -> Line {
    const NAME: &str = "two-mode cylinder";
    let t0 = Instant::now();
    match run_experiment(&preset("two_modes", None).unwrap(), None) {
        Ok(out) => {
            let mut d = Vec::new();
            let mut ok = within(&mut d, "E", out.flow.energy, 13.0706, 0.08);
            ok &= within(&mut d, "D", out.flow.defect, 1.0178e-1, 0.08);
            ok &= rel(out.flow.n as f64, 1833.0) <= 0.1;
            let secs = t0.elapsed().as_secs_f64();
            ok &= secs <= 1800.0;
            d.push(format!("steps {} (ref 1833), {secs:.0} s", out.flow.n));
            Line {
                id: 4,
                name: NAME,
                status: status(ok),
                detail: d.join(", "),
            }
        }
        Err(e) => errored(4, NAME, e),
    }
}

/// Largest distance between matching points of the edges `x1 = 0` and
/// `x1 = x_end`.
fn edge_gap(y: &BrokenField, x_end: f64) -> Result<f64> {
    let mut gap = 0.0f64;
    for i in 0..=40 {
        let s = -1.0 + 2.0 * i as f64 / 40.0;
        let a = y.value_at_point([0.0, s])?;
        let b = y.value_at_point([x_end, s])?;
        let dist = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt();
        gap = gap.max(dist);
    }
    Ok(gap)
}

fn catenoid() -> Line {
    const NAME: &str = "catenoid free-boundary sweep";
    let refs = [
        (0.1, 4.011, 3.198),
        (0.025, 7.429, 2.693),
        (0.01, 8.786, 1.834),
    ];
    let mut d = Vec::new();
    let mut ok = true;
    let mut gaps = Vec::new();
    for (tol_pp, e, dd) in refs {
        let mut spec = preset("catenoid", None).unwrap();
        spec.flow.tol_pp = tol_pp;
        match run_experiment(&spec, None).and_then(|out| Ok((edge_gap(&out.flow.y, 6.25)?, out))) {
            Ok((gap, out)) => {
                d.push(format!("tol {tol_pp}:"));
                ok &= within(&mut d, "E", out.flow.energy, e, 0.1);
                ok &= within(&mut d, "D", out.flow.defect, dd, 0.1);
                d.push(format!("gap {gap:.4}"));
                gaps.push(gap);
            }
            Err(e) => return errored(5, NAME, e),
        }
    }
    let closing = gaps.windows(2).all(|w| w[1] < w[0]);
    d.push(format!("gap decreasing: {closing}"));
    Line {
        id: 5,
        name: NAME,
        status: status(ok && closing),
        detail: d.join(" "),
    }
}

fn discs() -> Line {
    const NAME: &str = "disc experiments";
    let cases = [
        ("bubble", 2.08544, 0.087839),
        ("hyperbolic_paraboloid", 1.83112, 0.0980273),
        ("gel_disc", 9.35368, 0.188454),
        ("gel_disc_hyperbolic", 6.92318, 0.245552),
    ];
    let mut d = Vec::new();
    let mut ok = true;
    for (name, e, dd) in cases {
        match run_experiment(&preset(name, None).unwrap(), None) {
            Ok(out) => {
                d.push(format!("{name}:"));
                ok &= within(&mut d, "E", out.flow.energy, e, 0.15);
                ok &= within(&mut d, "D", out.flow.defect, dd, 0.15);
            }
            Err(e) => {
                d.push(format!("{name}: error {e}"));
                ok = false;
            }
        }
    }
    Line {
        id: 6,
        name: NAME,
        status: status(ok),
        detail: d.join(" "),
    }
}

fn property_suite() -> Line {
    let t0 = Instant::now();
    let checks = run_suite();
    let secs = t0.elapsed().as_secs_f64();
    for c in &checks {
        println!("    {c}");
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.name.as_str())
        .collect();
    Line {
        id: 7,
        name: "property suite",
        status: status(failed.is_empty() && secs < 60.0),
        detail: format!(
            "{} checks, {} failed, {secs:.1} s",
            checks.len(),
            failed.len()
        ),
    }
}

fn main() {
    let full = full();
    println!("acceptance ({} mode)", if full { "full" } else { "quick" });
    let mut lines = Vec::new();
    let mut must_pass = Vec::new();
    match vertical_rows() {
        Ok(rows) => {
            lines.push(table1(&rows));
            lines.push(table3(&rows));
        }
        Err(e) => {
            lines.push(errored(1, "vertical load table", e));
            lines.push(skipped(2, "diagonal deflection"));
        }
    }
    must_pass.extend([0, 1]);
    if full {
        lines.push(one_mode());
        lines.push(two_modes());
        lines.push(catenoid());
        lines.push(discs());
    } else {
        lines.push(skipped(3, "one-mode cylinder stages"));
        lines.push(skipped(4, "two-mode cylinder"));
        lines.push(skipped(5, "catenoid free-boundary sweep"));
        lines.push(skipped(6, "disc experiments"));
    }
    must_pass.push(lines.len());
    lines.push(property_suite());
    for l in &lines {
        l.print();
    }
    let failed: Vec<u32> = must_pass
        .iter()
        .filter(|&&i| lines[i].status == Status::Fail)
        .map(|&i| lines[i].id)
        .collect();
    let reported: Vec<u32> = lines
        .iter()
        .filter(|l| l.status == Status::Fail)
        .map(|l| l.id)
        .collect();
    println!("failing criteria: {reported:?}");
    if !failed.is_empty() {
        eprintln!("required criteria failed: {failed:?}");
        std::process::exit(1);
    }
}
