//! The five experiment tasks.

use std::path::Path;

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use spinbound::exact::{self, EdMode};
use spinbound::relaxation::{
    assemble_energy_problem, assemble_observable_problem, Direction, RelaxationOptions,
    RelaxationProblem, RelaxationReport,
};
use spinbound::sdp::{complex_to_real, solve, SolveReport};
use spinbound::SolveStatus;

use crate::config::{Job, Task, WindowConfig, WindowSource, EXACT_REFERENCE_LIMIT};
use crate::table::{fixed, full, Row};
use crate::CliError;

/// Slack allowed when comparing certified bounds with exact values.
const SOUNDNESS_SLACK: f64 = 1e-7;

/// Everything a finished job hands back to the driver.
pub struct Outcome {
    pub rows: Vec<Row>,
    pub report: serde_json::Value,
    /// `false` when some solve did not reach the requested accuracy.
    pub optimal: bool,
}

#[derive(Serialize)]
struct SolvedRelaxation {
    relaxation: RelaxationReport,
    solve: SolveReport,
    /// Certified bound on the original objective (lower when minimizing).
    bound: f64,
}

fn options(job: &Job) -> RelaxationOptions {
    RelaxationOptions {
        symmetry: job.symmetry,
        rdm_k: job.rdm_k.clone(),
    }
}

fn solve_relaxation(job: &Job, problem: &RelaxationProblem) -> Result<SolvedRelaxation, CliError> {
    let conic = complex_to_real(problem)?;
    let result = solve(&conic, &job.config.solver)?;
    if result.status == SolveStatus::Infeasible {
        return Err(CliError::NonOptimal(format!(
            "relaxation reported infeasible ({})",
            result.certificate.clone().unwrap_or_default()
        )));
    }
    let sign = problem.objective_sign();
    Ok(SolvedRelaxation {
        relaxation: problem.report.clone(),
        solve: result.report(),
        bound: sign * result.certified_bound,
    })
}

fn exact_energy(job: &Job) -> Result<Option<f64>, CliError> {
    if job.sites() > EXACT_REFERENCE_LIMIT {
        return Ok(None);
    }
    Ok(Some(exact::ground_space(&job.hamiltonian, job.sites(), job.ed_mode)?.energy))
}

fn census(report: &RelaxationReport) -> String {
    let mut dims: Vec<usize> = report.census.iter().map(|b| b.dim).collect();
    dims.sort_unstable_by(|a, b| b.cmp(a));
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    while i < dims.len() {
        let run = dims[i..].iter().take_while(|&&d| d == dims[i]).count();
        parts.push(format!("{}x{}", dims[i], run));
        i += run;
    }
    parts.join(";")
}

fn status_name(s: SolveStatus) -> String {
    serde_json::to_value(s)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn check_bound(what: &str, bound: f64, exact: f64) -> Result<(), CliError> {
    if bound > exact + SOUNDNESS_SLACK * exact.abs().max(1.0) {
        return Err(CliError::Invariant(format!(
            "{what}: certified lower bound {bound} exceeds the exact value {exact}"
        )));
    }
    Ok(())
}

pub fn run(job: &Job, out_dir: &Path) -> Result<Outcome, CliError> {
    match job.task {
        Task::Energy => run_energy(job),
        Task::Observable => run_observable(job),
        Task::Anderson => run_anderson(job),
        Task::Exact => run_exact(job),
        Task::Export => run_export(job, out_dir),
    }
}

/// Leading identification columns; the toggle set only matters for
/// relaxation tasks.
fn head(job: &Job, toggles: bool) -> Row {
    let mut row = vec![job.hash[..16].to_string()];
    if toggles {
        row.push(job.symmetry.label());
    }
    row.extend([job.model_label.to_string(), job.sites().to_string(), job.j2.to_string()]);
    row
}

fn rdm_label(job: &Job) -> String {
    job.rdm_k.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";")
}

pub fn run_energy(job: &Job) -> Result<Outcome, CliError> {
    let basis = job.basis.as_ref().expect("energy jobs carry a basis");
    let problem = assemble_energy_problem(&job.hamiltonian, basis, &options(job))?;
    let solved = solve_relaxation(job, &problem)?;
    let exact = exact_energy(job)?;
    if let Some(e) = exact {
        check_bound("energy", solved.bound, e)?;
    }
    let n = job.sites() as f64;
    let gap = exact.map(|e| ((solved.bound - e) / e).abs());
    let mut row = head(job, true);
    row.extend([
        job.basis_label(),
        rdm_label(job),
        fixed(solved.bound / n),
        exact.map(|e| fixed(e / n)).unwrap_or_default(),
        gap.map(fixed).unwrap_or_default(),
        full(solved.bound),
        exact.map(full).unwrap_or_default(),
        status_name(solved.solve.status),
        census(&solved.relaxation),
        solved.solve.iterations.to_string(),
    ]);
    let optimal = solved.solve.status == SolveStatus::Optimal;
    let report = json!({
        "lower_bound": solved.bound,
        "lower_bound_per_spin": solved.bound / n,
        "exact": exact,
        "relative_gap": gap,
        "relaxation": solved.relaxation,
        "solve": solved.solve,
    });
    Ok(Outcome {
        rows: vec![row],
        report,
        optimal,
    })
}

/// The energy window `[lower, upper]` and where each side came from.
fn energy_window(job: &Job) -> Result<(f64, f64, String, serde_json::Value), CliError> {
    let margin = job.window_margin;
    match job.window {
        WindowConfig::Explicit { lower, upper } => Ok((lower, upper, "explicit".into(), json!(null))),
        WindowConfig::Source(WindowSource::Exact) => {
            let e = exact_energy(job)?.expect("validated site limit");
            Ok((e - margin, e + margin, "exact".into(), json!(null)))
        }
        WindowConfig::Source(WindowSource::Auto) => {
            let basis = job.basis.as_ref().expect("observable jobs carry a basis");
            let problem = assemble_energy_problem(&job.hamiltonian, basis, &options(job))?;
            let solved = solve_relaxation(job, &problem)?;
            let (upper, source) = match exact_energy(job)? {
                Some(e) => (e + margin, "relaxation/exact"),
                None => (
                    exact::product_state_upper_bound(&job.hamiltonian, job.sites(), job.restarts, job.seed)?,
                    "relaxation/product",
                ),
            };
            let lower = solved.bound.min(upper);
            Ok((lower, upper, source.into(), serde_json::to_value(&solved).unwrap_or_default()))
        }
    }
}

pub fn run_observable(job: &Job) -> Result<Outcome, CliError> {
    let basis = job.basis.as_ref().expect("observable jobs carry a basis");
    let (lower_e, upper_e, source, energy_solve) = energy_window(job)?;
    let window_holds_ground_state = !matches!(job.window, WindowConfig::Explicit { .. });
    let ground = if job.sites() <= EXACT_REFERENCE_LIMIT {
        Some(exact::ground_space(&job.hamiltonian, job.sites(), job.ed_mode)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    let mut details = Vec::new();
    let mut optimal = true;
    for obs in &job.observables {
        let side = |direction| -> Result<SolvedRelaxation, CliError> {
            let p = assemble_observable_problem(
                &job.hamiltonian,
                basis,
                &obs.poly,
                (lower_e, upper_e),
                direction,
                &options(job),
            )?;
            solve_relaxation(job, &p)
        };
        let lo = side(Direction::Min)?;
        let hi = side(Direction::Max)?;
        let target = ground.as_ref().map(|g| g.expectation(&obs.poly)).transpose()?;
        if let (Some(t), true) = (target, window_holds_ground_state) {
            let slack = SOUNDNESS_SLACK * t.abs().max(1.0);
            if t < lo.bound - slack || t > hi.bound + slack {
                return Err(CliError::Invariant(format!(
                    "{}: exact value {t} outside the certified interval [{}, {}]",
                    obs.label, lo.bound, hi.bound
                )));
            }
        }
        optimal &= lo.solve.status == SolveStatus::Optimal && hi.solve.status == SolveStatus::Optimal;
        let mut row = head(job, true);
        row.extend([
            job.basis_label(),
            obs.label.clone(),
            full(lo.bound),
            target.map(full).unwrap_or_default(),
            full(hi.bound),
            full(lower_e),
            full(upper_e),
            status_name(lo.solve.status),
            status_name(hi.solve.status),
        ]);
        rows.push(row);
        details.push(json!({
            "observable": obs.label,
            "lower": lo.bound,
            "upper": hi.bound,
            "target": target,
            "min": lo,
            "max": hi,
        }));
    }
    let report = json!({
        "window": {"lower": lower_e, "upper": upper_e, "source": source, "energy_solve": energy_solve},
        "observables": details,
    });
    Ok(Outcome { rows, report, optimal })
}

/// Open windows of `k` consecutive sites on the three-site model.
fn three_site_windows(k: usize) -> Result<Vec<Vec<usize>>, CliError> {
    if !(2..=3).contains(&k) {
        return Err(CliError::Config(format!("cluster size {k} must be 2 or 3 here")));
    }
    Ok((0..=3 - k).map(|s| (s..s + k).collect()).collect())
}

pub fn run_anderson(job: &Job) -> Result<Outcome, CliError> {
    let n = job.sites() as f64;
    let exact = exact_energy(job)?;
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for &k in &job.config.anderson_k {
        let total = match &job.spec {
            Some(spec) => exact::anderson_bound(spec, k)? * n,
            None => exact::cluster_bound(&job.hamiltonian, &three_site_windows(k)?)?,
        };
        if let Some(e) = exact {
            check_bound(&format!("cluster bound K={k}"), total, e)?;
        }
        let mut row = head(job, false);
        row.extend([
            k.to_string(),
            full(total),
            full(total / n),
            exact.map(|e| full(e / n)).unwrap_or_default(),
        ]);
        rows.push(row);
        details.push(json!({"k": k, "bound": total, "bound_per_spin": total / n}));
    }
    Ok(Outcome {
        rows,
        report: json!({"exact": exact, "bounds": details}),
        optimal: true,
    })
}

pub fn run_exact(job: &Job) -> Result<Outcome, CliError> {
    let n = job.sites();
    let mode = if n > 20 && job.ed_mode == EdMode::Auto { EdMode::Lanczos } else { job.ed_mode };
    let gs = exact::ground_space(&job.hamiltonian, n, mode)?;
    let product = exact::product_state_upper_bound(&job.hamiltonian, n, job.restarts, job.seed)?;
    if product < gs.energy - SOUNDNESS_SLACK * gs.energy.abs().max(1.0) {
        return Err(CliError::Invariant(format!(
            "product-state energy {product} lies below the ground energy {}",
            gs.energy
        )));
    }
    let mut quantities: Vec<(String, String)> = vec![
        ("energy".into(), full(gs.energy)),
        ("energy_per_spin".into(), full(gs.energy / n as f64)),
        ("degeneracy".into(), gs.degeneracy().to_string()),
        ("product_upper".into(), full(product)),
        ("product_upper_per_spin".into(), full(product / n as f64)),
    ];
    let mut expectations = Vec::new();
    for obs in &job.observables {
        let v = gs.expectation(&obs.poly)?;
        quantities.push((obs.label.clone(), full(v)));
        expectations.push(json!({"observable": obs.label, "value": v}));
    }
    let rows = quantities
        .into_iter()
        .map(|(q, v)| {
            let mut row = head(job, false);
            row.extend([q, v]);
            row
        })
        .collect();
    let report = json!({
        "energy": gs.energy,
        "energy_per_spin": gs.energy / n as f64,
        "degeneracy": gs.degeneracy(),
        "product_upper": product,
        "restarts": job.restarts,
        "expectations": expectations,
    });
    Ok(Outcome {
        rows,
        report,
        optimal: true,
    })
}

pub fn run_export(job: &Job, out_dir: &Path) -> Result<Outcome, CliError> {
    let basis = job.basis.as_ref().expect("export jobs carry a basis");
    let problem = assemble_energy_problem(&job.hamiltonian, basis, &options(job))?;
    let conic = complex_to_real(&problem)?;
    let name = job
        .config
        .export_file
        .clone()
        .unwrap_or_else(|| format!("{}.dat-s", job.stem()));
    let path = out_dir.join(&name);
    conic.export_sdpa(&path)?;
    let bytes = std::fs::read(&path).map_err(spinbound::Error::from)?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let dims = conic
        .dims()
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(";");
    let mut row = head(job, true);
    row.extend([
        job.basis_label(),
        name.clone(),
        conic.num_vars.to_string(),
        dims,
        digest.clone(),
    ]);
    Ok(Outcome {
        rows: vec![row],
        report: json!({
            "file": name,
            "sha256": digest,
            "num_vars": conic.num_vars,
            "relaxation": problem.report,
        }),
        optimal: true,
    })
}
