use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use lorenz_shadow::config::to_config_text;
use lorenz_shadow::falsifier::{positive_control, verify_floor, FloorVerdict};
use lorenz_shadow::pseudo_orbit::{block_of, expected_gap, ClassReport};
use lorenz_shadow::shadowing::{evaluate_both, Shadower};
use lorenz_shadow::{
    minimize_functional, verify_classes, Error, PseudoOrbit, SearchOptions, ShadowReport,
};

use crate::checks::model_properties;
use crate::config::{ExperimentConfig, GammaSource};
use crate::error::{io_err, CliError};

pub const GAP_TOL: f64 = 1e-9;
pub const CONTROL_TOL: f64 = 1e-9;
/// Segments in the positive-control run.
pub const CONTROL_SEGMENTS: usize = 32;

/// Result of a command that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    /// Short human-readable summary, also printed by the binary.
    pub summary: String,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.passed {
            0
        } else {
            1
        }
    }
}

fn prepare(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_err(path))
}

fn write_csv<R>(path: &Path, header: &[&str], rows: R) -> Result<(), CliError>
where
    R: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Config(format!("{}: {other:?}", path.display())),
    })?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn write_dat<R>(path: &Path, rows: R) -> Result<(), CliError>
where
    R: IntoIterator<Item = (f64, f64)>,
{
    let mut s = String::new();
    for (a, b) in rows {
        let _ = writeln!(s, "{a} {b}");
    }
    write_text(path, &s)
}

fn gamma_line(cfg: &ExperimentConfig) -> String {
    match &cfg.gamma {
        GammaSource::Given => format!("gamma = {} (given)", cfg.params.gamma),
        GammaSource::Auto => format!("gamma = {} (auto-chosen)", cfg.params.gamma),
        GammaSource::Failed(e) => format!("gamma: automatic choice failed: {e}"),
    }
}

/// Runs the model property suite and writes `model_report.txt`.
pub fn run_model_check(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    prepare(&cfg.out)?;
    let checks = model_properties(&cfg.params, cfg.seed);
    let mut failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if matches!(cfg.gamma, GammaSource::Failed(_)) {
        failed.push("gamma");
    }
    let mut report = String::new();
    report.push_str("# model parameters\n");
    report.push_str(&to_config_text(&cfg.params));
    let _ = writeln!(report, "\n{}\n", gamma_line(cfg));
    for c in &checks {
        let _ = writeln!(report, "{c}");
    }
    let verdict = if failed.is_empty() {
        "result: PASS".to_string()
    } else {
        format!("result: FAIL ({})", failed.join(", "))
    };
    let _ = writeln!(report, "\n{verdict}");
    write_text(&cfg.out.join("model_report.txt"), &report)?;
    Ok(Outcome {
        passed: failed.is_empty(),
        summary: format!("{}\n{verdict}", gamma_line(cfg)),
    })
}

fn class_text(r: &ClassReport, n_max: usize, tol: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "gap mass M = {:e} (12 gamma)", r.mass);
    let _ = writeln!(s, "limit class: max A_m / (2 gamma 2^(-|m|/4)) = {:.6}", r.limit_ratio);
    let _ = writeln!(s, "asymptotic-average class, n <= {n_max}:");
    let _ = writeln!(s, "  n average 8gamma/n M/n");
    for row in &r.cesaro {
        let _ = writeln!(s, "  {} {:e} {:e} {:e}", row.n, row.average, row.eight_gamma_bound, row.mass_bound);
    }
    let _ = writeln!(
        s,
        "  8 gamma / n holds for every n: {} (first failure: {})",
        r.eight_gamma_cesaro_holds(),
        r.first_eight_gamma_violation.map_or("none".into(), |n| n.to_string())
    );
    let _ = writeln!(s, "  average at n_max = {:e}, tol = {tol:e}, within: {}", r.final_average, r.within_tol);
    let _ = writeln!(
        s,
        "delta-average class, delta = {:e}: N = {}, M/delta bound = {}, 8 gamma/delta = {:.3}, within 8 gamma/delta: {}",
        r.delta,
        r.n_delta.map_or("none".into(), |n| n.to_string()),
        r.n_delta_bound,
        r.eight_gamma_n_delta_bound,
        r.eight_gamma_n_delta_holds()
    );
    s
}

/// Builds the pseudo-orbit, checks the gap law and the pseudo-orbit classes,
/// and writes `gaps.csv`, `orbit.csv`, `gaps.dat` and `classes.txt`.
pub fn run_build_pseudo(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let p = cfg.checked_params()?;
    prepare(&cfg.out)?;
    let orbit = PseudoOrbit::build(&p, cfg.k)?;
    let gaps = orbit.gaps()?;
    let g = p.gamma;
    let mut worst: (f64, i64) = (0.0, 0);
    let rows: Vec<Vec<String>> = gaps
        .iter()
        .map(|&(m, a)| {
            let (k, i) = block_of(m);
            let want = expected_gap(m, g);
            let err = (a - want).abs();
            if err > worst.0 {
                worst = (err, m);
            }
            vec![m.to_string(), k.to_string(), i.to_string(), a.to_string(), want.to_string(), err.to_string()]
        })
        .collect();
    write_csv(
        &cfg.out.join("gaps.csv"),
        &["m", "k", "i", "A_m", "Gamma_over_2k", "abs_err"],
        rows,
    )?;
    write_dat(&cfg.out.join("gaps.dat"), gaps.iter().map(|&(m, a)| (m as f64, a)))?;

    let (lo, hi) = orbit.index_range();
    let orbit_rows = (lo..=hi).map(|n| {
        let q = orbit.point(n).expect("in window").position();
        vec![
            n.to_string(),
            orbit.region_tag(n).expect("in window").to_string(),
            q.x.to_string(),
            q.y.to_string(),
            q.z.to_string(),
            orbit.time(n).expect("in window").to_string(),
            orbit.s(n).expect("in window").to_string(),
        ]
    });
    write_csv(
        &cfg.out.join("orbit.csv"),
        &["n", "region", "x", "y", "z", "t_n", "s_n"],
        orbit_rows,
    )?;

    let mut summary = format!(
        "{}\nwindow n in [{lo}, {hi}], {} gaps, max |A_m - gamma/2^|k|| = {:e} at m = {}\n",
        gamma_line(cfg),
        gaps.len(),
        worst.0,
        worst.1
    );
    let gap_ok = worst.0 <= GAP_TOL;
    if !gap_ok {
        let _ = writeln!(summary, "gap law violated at m = {}", worst.1);
    }
    let classes = verify_classes(&orbit, cfg.n_max, cfg.delta, cfg.tol);
    let classes_ok = match &classes {
        Ok(r) => {
            write_text(&cfg.out.join("classes.txt"), &class_text(r, cfg.n_max, cfg.tol))?;
            let _ = writeln!(
                summary,
                "classes: limit ratio {:.4}, average at n_max {:e} (tol {:e}), N(delta) = {}",
                r.limit_ratio,
                r.final_average,
                cfg.tol,
                r.n_delta.map_or("none".into(), |n| n.to_string())
            );
            r.within_tol
        }
        Err(e @ Error::ClassViolated { .. }) => {
            write_text(&cfg.out.join("classes.txt"), &format!("{e}\n"))?;
            let _ = writeln!(summary, "{e}");
            false
        }
        Err(e) => return Err(CliError::Core(e.clone())),
    };
    let passed = gap_ok && classes_ok;
    let _ = write!(summary, "result: {}", if passed { "PASS" } else { "FAIL" });
    Ok(Outcome { passed, summary })
}

/// Everything `falsify` computed, for callers that want more than the files.
#[derive(Debug, Clone)]
pub struct FalsifyRun {
    pub report: ShadowReport,
    /// `None` when the floor check found a breach (see `breach`).
    pub floor: Option<FloorVerdict>,
    pub breach: Option<Error>,
    pub control: f64,
    pub outcome: Outcome,
}

/// Full pipeline: build, search, witnesses, floor check and positive control.
///
/// Writes `search.csv`, `functional.csv`, `segments.csv`, `witnesses.csv`,
/// `running_average.dat` and `summary.txt`.
pub fn run_falsify(cfg: &ExperimentConfig) -> Result<FalsifyRun, CliError> {
    let p = cfg.checked_params()?;
    prepare(&cfg.out)?;
    let orbit = PseudoOrbit::build(&p, cfg.k)?;
    let opts = SearchOptions {
        budget: cfg.budget,
        seed: cfg.seed,
        local_evals: cfg.local_evals,
        floor_tol: cfg.floor_tol,
        ..SearchOptions::default()
    };
    let mut report = minimize_functional(&orbit, p.delta_rep, &opts)?;
    write_csv(
        &cfg.out.join("search.csv"),
        &["eval_id", "start_id", "value", "y_descr", "h_descr"],
        report.log.iter().map(|r| {
            vec![
                r.eval_id.to_string(),
                r.start_id.to_string(),
                r.value.to_string(),
                r.y_descr.clone(),
                r.h_descr.clone(),
            ]
        }),
    )?;

    let (floor, breach) = match verify_floor(&report, cfg.floor_tol) {
        Ok(v) => (Some(v), None),
        Err(e @ Error::FloorBreached { .. }) => (None, Some(e)),
        Err(e) => return Err(e.into()),
    };
    if let Some(v) = &floor {
        report.verdicts = v.verdicts;
    }

    let orbit = orbit.with_delta_rep(p.delta_rep);
    let (mut running, mut segments) = (Vec::new(), Vec::new());
    if let Some(c) = &report.best_candidate {
        let s = Shadower::new(&orbit, c.y, c.h.clone())?;
        let (avg, _) = evaluate_both(&s, report.horizon, None)?;
        running = avg.running;
        segments = s.integrals(report.horizon, None)?;
    }
    write_csv(
        &cfg.out.join("functional.csv"),
        &["n", "running_average", "error_bound"],
        running
            .iter()
            .map(|r| vec![r.n.to_string(), r.average.to_string(), r.error_bound.to_string()]),
    )?;
    write_dat(
        &cfg.out.join("running_average.dat"),
        running.iter().map(|r| (r.n as f64, r.average)),
    )?;
    write_csv(
        &cfg.out.join("segments.csv"),
        &["i", "integral", "error_bound"],
        segments
            .iter()
            .map(|s| vec![s.i.to_string(), s.value.to_string(), s.error_bound.to_string()]),
    )?;
    write_csv(
        &cfg.out.join("witnesses.csv"),
        &["k", "u", "t", "distance"],
        report
            .witnesses
            .iter()
            .map(|w| vec![w.k.to_string(), w.u.to_string(), w.t.to_string(), w.distance.to_string()]),
    )?;

    let control = positive_control(&p, CONTROL_SEGMENTS)?;
    let control_ok = control < CONTROL_TOL;
    let passed = breach.is_none() && report.verdicts.all_falsified() && control_ok;

    let mut s = String::new();
    let v = report.verdicts;
    let _ = writeln!(s, "ASP: {}\nLSP: {}\nAASP: {}", v.asp, v.lsp, v.aasp);
    let _ = writeln!(s, "case = {}", p.case);
    let _ = writeln!(s, "delta_rep = {}", p.delta_rep);
    let _ = writeln!(s, "{}", gamma_line(cfg));
    let _ = writeln!(s, "beta = {:e}", report.beta);
    let _ = writeln!(s, "floor = {:e}", report.floor);
    let _ = writeln!(s, "horizon = {}", report.horizon);
    let _ = writeln!(s, "budget = {}, seed = {}", cfg.budget, cfg.seed);
    let _ = writeln!(s, "evaluations = {}", report.evaluations);
    match report.best_eval_id {
        Some(id) => {
            let _ = writeln!(s, "best_eval_id = {id}");
            let _ = writeln!(s, "best_value = {:e}", report.best_value);
            let _ = writeln!(s, "best_asymp_value = {:e}", report.best_asymp_value);
        }
        None => {
            let _ = writeln!(s, "best_eval_id = none");
        }
    }
    if let Some(f) = &floor {
        let _ = writeln!(s, "min_certified_lower = {:e}", f.min_lower);
        let _ = writeln!(s, "min_certified_asymp_lower = {:e}", f.min_asymp_lower);
        let _ = writeln!(s, "floor_check = {}", if f.passed { "PASS" } else { "FAIL" });
    }
    if let Some(e) = &breach {
        let _ = writeln!(s, "floor_check = BREACHED: {e}");
    }
    let _ = writeln!(
        s,
        "witnesses = {} found, failed blocks {:?}, integrals certified: {}",
        report.witnesses.len(),
        report.witness_failures,
        report.witness_integrals_ok
    );
    let _ = writeln!(s, "positive_control = {control:e} ({})", if control_ok { "PASS" } else { "FAIL" });
    let _ = writeln!(s, "result: {}", if passed { "PASS" } else { "FAIL" });
    write_text(&cfg.out.join("summary.txt"), &s)?;

    Ok(FalsifyRun {
        report,
        floor,
        breach,
        control,
        outcome: Outcome {
            passed,
            summary: s.trim_end().to_string(),
        },
    })
}
