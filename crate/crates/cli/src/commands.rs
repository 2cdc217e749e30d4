use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use htc_conic::{backend_from_env, sdpa, ConicBackend};
use htc_core::analysis::{
    brute_force_oracle, exactness_report, maxgen_check, sign_condition_check, stationarity_check,
};
use htc_core::ccp::{ccp_solve, starting_relaxation, CcpOptions};
use htc_core::cuts::CutOptions;
use htc_core::report::{generation_csv, rank1_csv, sig6, trace_csv, trace_svg, trajectory_csv};
use htc_core::shor::{
    build_relaxation, extract_schedule, rank1_gap, solve_relaxation, Relaxation, Schedule, SolveSettings,
    StructureMatrices,
};
use htc_core::CaseStudy;

use crate::error::CliError;
use crate::{Check, Common, Mode};

/// Relative step of the stationarity check on the CCP output.
const STATIONARITY_STEP: f64 = 1e-3;

fn load_case(name: &str) -> Result<CaseStudy, CliError> {
    let path = Path::new(name);
    if !path.exists() {
        match name {
            "paranaiba" => return Ok(CaseStudy::paranaiba()),
            "mini" => return Ok(CaseStudy::mini()),
            _ => {}
        }
    }
    Ok(CaseStudy::load(path)?)
}

fn backend() -> Result<Box<dyn ConicBackend>, CliError> {
    backend_from_env().map_err(|e| CliError::Validation(e.to_string()))
}

fn check_tolerance(name: &str, value: Option<f64>) -> Result<(), CliError> {
    match value {
        Some(v) if !(v.is_finite() && v > 0.0) => {
            Err(CliError::Validation(format!("--{name} must be a positive number, got {v}")))
        }
        _ => Ok(()),
    }
}

fn settings(common: &Common, mut base: SolveSettings) -> Result<SolveSettings, CliError> {
    check_tolerance("feas-tol", common.feas_tol)?;
    check_tolerance("gap-tol", common.gap_tol)?;
    if let Some(t) = common.feas_tol {
        base.solver.feas_tol = t;
    }
    if let Some(t) = common.gap_tol {
        base.solver.gap_tol = t;
    }
    Ok(base)
}

fn write(out: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::create_dir_all(out)
        .and_then(|_| fs::write(out.join(name), contents))
        .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", out.join(name).display())))
}

/// `schedule.csv` (generation per plant) and `trajectories.csv` (storage,
/// discharge, spillage), with an optional file-name prefix.
fn write_schedule(out: &Path, prefix: &str, case: &CaseStudy, schedule: &Schedule) -> Result<(), CliError> {
    write(out, &format!("{prefix}schedule.csv"), &generation_csv(case, schedule))?;
    write(out, &format!("{prefix}trajectories.csv"), &trajectory_csv(case, schedule))
}

fn relaxation(case: &CaseStudy, mode: Mode) -> Relaxation {
    match mode {
        Mode::Shor => build_relaxation(case),
        Mode::ShorRlt => starting_relaxation(case, &CutOptions::default()),
    }
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Shor => "shor",
        Mode::ShorRlt => "shor+rlt",
    }
}

pub fn solve(common: &Common, mode: Mode) -> Result<(), CliError> {
    let case = load_case(&common.case)?;
    let settings = settings(common, SolveSettings::default())?;
    let backend = backend()?;
    let rel = relaxation(&case, mode);
    let sol = solve_relaxation(&case, &rel, backend.as_ref(), &settings)?;
    let (ratios, max_ratio) = rank1_gap(&sol, &rel.layout);

    let mut summary = String::new();
    let _ = writeln!(summary, "mode: {}", mode_name(mode));
    let _ = writeln!(summary, "status: {}", sol.status);
    let _ = writeln!(summary, "lower bound: {:?}", sol.objective_value);
    let _ = writeln!(summary, "largest rank-one ratio: {max_ratio:?}");
    let _ = writeln!(summary, "solver iterations: {}", sol.iterations);
    write(&common.out, "objective.txt", &summary)?;
    write(&common.out, "rank1.csv", &rank1_csv(&case, &ratios))?;
    match extract_schedule(&case, &sol, &rel.layout, None) {
        Ok(schedule) => write_schedule(&common.out, "", &case, &schedule)?,
        Err(e) => eprintln!("warning: no schedule written: {e}"),
    }

    println!("lower bound ({}): {:.2}", mode_name(mode), sol.objective_value);
    println!("largest rank-one ratio: {}", sig6(max_ratio));
    Ok(())
}

pub fn ccp(common: &Common, eps: f64, max_iter: usize, cuts_in_ccp: bool, plot: bool) -> Result<(), CliError> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(CliError::Validation(format!("--eps must be a nonnegative number, got {eps}")));
    }
    let case = load_case(&common.case)?;
    let defaults = CcpOptions::default();
    let options = CcpOptions {
        eps,
        max_iter,
        cuts_in_subproblems: cuts_in_ccp,
        settings: settings(common, defaults.settings)?,
        ..defaults
    };
    let backend = backend()?;
    let (schedule, trace) = match ccp_solve(&case, backend.as_ref(), &options) {
        Ok(r) => r,
        Err(e) => {
            write(&common.out, "trace.csv", &trace_csv(&e.trace))?;
            return Err(e.into());
        }
    };
    write(&common.out, "trace.csv", &trace_csv(&trace))?;
    if plot {
        write(&common.out, "trace.svg", &trace_svg(&trace))?;
    }
    write_schedule(&common.out, "", &case, &schedule)?;

    let final_objective = trace.last().map_or(f64::NAN, |it| it.objective);
    let st = stationarity_check(&case, &schedule, STATIONARITY_STEP);
    let mut report = String::new();
    let _ = writeln!(report, "schedule cost: {:?}", schedule.cost(&case));
    let _ = writeln!(report, "step: {STATIONARITY_STEP:?} of each discharge range");
    let _ = writeln!(report, "directions checked: {}", st.directions_checked);
    let _ = writeln!(report, "most negative rate: {:?} per unit relative shift", st.rate);
    let _ = writeln!(report, "relative to the cost: {:?}", st.rate / schedule.cost(&case).abs().max(1.0));
    if let Some((t, h)) = st.direction {
        let _ = writeln!(report, "attained by: period {} plant {}", t + 1, case.hydro[h].id);
    }
    write(&common.out, "stationarity.txt", &report)?;

    println!("final objective: {final_objective:.2}");
    println!("subproblems: {}", trace.num_subproblems());
    println!("converged: {}", trace.converged);
    Ok(())
}

pub fn check(common: &Common, which: Check) -> Result<(), CliError> {
    let case = load_case(&common.case)?;
    let settings = settings(common, SolveSettings::default())?;
    match which {
        Check::Signs => {
            let s = sign_condition_check(&StructureMatrices::standard());
            let mut text = String::new();
            let _ = writeln!(text, "V off-diagonal nonnegative: {}", s.v_nonnegative);
            let _ = writeln!(text, "Q off-diagonal nonnegative: {}", s.q_nonnegative);
            let _ = writeln!(text, "P off-diagonal nonnegative: {}", s.p_nonnegative);
            let _ = writeln!(
                text,
                "{}",
                if s.exactness_conditions_fail() {
                    "sign-pattern exactness conditions do not apply"
                } else {
                    "sign pattern does not rule out the exactness conditions"
                }
            );
            write(&common.out, "signs.txt", &text)?;
            print!("{text}");
        }
        Check::Maxgen => {
            let backend = backend()?;
            let rows = maxgen_check(&case, backend.as_ref(), &settings.solver)?;
            let mut csv = String::from("period,max_hydro_mw,load_mw,thermal_min_mw,inequality_justified\n");
            for (t, m) in rows.iter().enumerate() {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    t + 1,
                    sig6(m.max_hydro_mw),
                    sig6(m.load),
                    sig6(m.thermal_min),
                    m.holds
                );
                println!(
                    "period {}: max hydro {} MW, load {} MW: {}",
                    t + 1,
                    sig6(m.max_hydro_mw),
                    sig6(m.load),
                    if m.holds { "justified" } else { "not justified" }
                );
            }
            write(&common.out, "maxgen.csv", &csv)?;
        }
        Check::Exactness => {
            let backend = backend()?;
            let report = exactness_report(&case, backend.as_ref(), &settings)?;
            write(&common.out, "exactness.txt", &report.to_text())?;
            write(&common.out, "exactness.csv", &report.to_csv())?;
            println!("largest rank-one ratio: {}", sig6(report.max_rank1()));
        }
    }
    Ok(())
}

pub fn oracle(common: &Common, grid: usize) -> Result<(), CliError> {
    let case = load_case(&common.case)?;
    let settings = settings(common, SolveSettings::default())?;
    let result = brute_force_oracle(&case, grid)?;
    let backend = backend()?;
    let shor = relaxation(&case, Mode::Shor);
    let shor = solve_relaxation(&case, &shor, backend.as_ref(), &settings)?.objective_value;
    let cuts = relaxation(&case, Mode::ShorRlt);
    let cuts = solve_relaxation(&case, &cuts, backend.as_ref(), &settings)?.objective_value;
    let tol = |f: f64| settings.solver.gap_tol * (1.0 + f.abs());
    let holds = shor <= cuts + tol(cuts) && cuts <= result.objective + tol(result.objective);

    let mut text = String::new();
    let _ = writeln!(text, "grid points: {}", result.points);
    let _ = writeln!(text, "oracle objective: {:?}", result.objective);
    let _ = writeln!(text, "shor bound: {shor:?}");
    let _ = writeln!(text, "shor+rlt bound: {cuts:?}");
    let _ = writeln!(text, "sandwich holds: {holds}");
    write(&common.out, "oracle.txt", &text)?;
    write_schedule(&common.out, "oracle_", &case, &result.schedule)?;

    println!("oracle objective: {:.2}", result.objective);
    println!("bounds: shor {shor:.2} <= shor+rlt {cuts:.2} <= oracle: {holds}");
    Ok(())
}

pub fn export_sdpa(common: &Common, mode: Mode) -> Result<(), CliError> {
    let case = load_case(&common.case)?;
    let rel = relaxation(&case, mode);
    let text = sdpa::to_sdpa(&rel.problem)?;
    let name = format!("{}.dat-s", if mode == Mode::Shor { "shor" } else { "shor_rlt" });
    write(&common.out, &name, &text)?;
    println!("wrote {}", common.out.join(name).display());
    Ok(())
}
