//! Subcommand bodies. Each writes its files into an [`Output`] and returns a
//! short JSON summary for stdout.

use ptbec_core::continuation::{Branch, Termination};
use ptbec_core::dynamics::{
    absorption_image, classify_run, evolve, extrema, imbalance, oscillation_period, oscillation_periods, perturb,
    RunTermination, Trajectory, SWING,
};
use ptbec_core::model::{ParamLayout, StateRecord};
use ptbec_core::stability::{smallest_excitation, stability_spectrum_with, StabilitySpectrum};
use ptbec_core::stationary::{census, run_parallel, StationaryState, Symmetry};
use ptbec_grid::Grid;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{OracleKind, RunConfig};
use crate::error::CliError;
use crate::family::{sweep_family, Family};
use crate::oracle;
use crate::output::{file_label, num, Output};

fn symmetry_name(s: Symmetry) -> String {
    serde_json::to_value(s).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

fn label_of(s: &StationaryState) -> String {
    s.label.clone().unwrap_or_else(|| "unlabelled".into())
}

fn run_census(cfg: &RunConfig, jobs: usize) -> Result<Vec<StationaryState>, CliError> {
    census(&cfg.params(), &cfg.census_options(jobs)).map_err(|e| CliError::from(e).context("census"))
}

/// Census members named in `wanted` (all of them if empty), in that order.
fn select(states: &[StationaryState], wanted: &[String]) -> Result<Vec<StationaryState>, CliError> {
    if wanted.is_empty() {
        return Ok(states.to_vec());
    }
    wanted
        .iter()
        .map(|w| {
            states.iter().find(|s| s.label.as_deref() == Some(w.as_str())).cloned().ok_or_else(|| {
                let found: Vec<String> = states.iter().map(label_of).collect();
                CliError::Solver(format!("state {w} not found; census has [{}]", found.join(", ")))
            })
        })
        .collect()
}

fn spectra(cfg: &RunConfig, states: &[StationaryState], jobs: usize) -> Vec<Result<StabilitySpectrum, CliError>> {
    let opts = cfg.stability_options();
    run_parallel(states, jobs, |s| stability_spectrum_with(s, &opts).map_err(CliError::from))
}

pub fn cmd_census(cfg: &RunConfig, out: &Output, jobs: usize) -> Result<Value, CliError> {
    let states = run_census(cfg, jobs)?;
    let stab: Vec<Option<Result<StabilitySpectrum, CliError>>> = if cfg.census.with_stability {
        spectra(cfg, &states, jobs).into_iter().map(Some).collect()
    } else {
        states.iter().map(|_| None).collect()
    };
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (s, sp) in states.iter().zip(&stab) {
        let (stable, max_re) = match sp {
            Some(Ok(sp)) => (sp.stable.to_string(), num(sp.max_re)),
            Some(Err(_)) => ("failed".into(), String::new()),
            None => ("skipped".into(), String::new()),
        };
        rows.push(vec![
            label_of(s),
            symmetry_name(s.symmetry),
            num(s.mu.re),
            num(s.mu.im),
            num(s.e_mf.re),
            num(s.e_mf.im),
            num(s.pt_residual),
            stable,
            max_re,
            num(s.converged_residual),
        ]);
        let mut rec = StateRecord::new(&s.state);
        rec.metadata.insert("label".into(), json!(label_of(s)));
        rec.metadata.insert("mu".into(), json!([s.mu.re, s.mu.im]));
        rec.metadata.insert("e_mf".into(), json!([s.e_mf.re, s.e_mf.im]));
        records.push(rec);
    }
    out.csv(
        "census.csv",
        &["label", "symmetry", "mu_re", "mu_im", "e_mf_re", "e_mf_im", "pt_residual", "stable", "max_re", "newton_residual"],
        &rows,
    )?;
    out.json("states.json", &json!({ "states": records }))?;
    Ok(json!({ "command": "census", "states": states.iter().map(label_of).collect::<Vec<_>>() }))
}

fn branch_rows(b: &Branch) -> Vec<Vec<String>> {
    b.points
        .iter()
        .map(|p| {
            let s = &p.state;
            let (stable, max_re, min_abs) = match &p.stability {
                Some(st) => (st.stable.to_string(), num(st.max_re), num(st.min_abs)),
                None => (String::new(), String::new(), String::new()),
            };
            vec![
                num(p.param),
                num(s.e_mf.re),
                num(s.e_mf.im),
                num(s.mu.re),
                num(s.mu.im),
                num(s.pt_residual),
                symmetry_name(s.symmetry),
                stable,
                max_re,
                min_abs,
            ]
        })
        .collect()
}

#[derive(Serialize)]
struct BranchSummary {
    label: String,
    points: usize,
    start: f64,
    end: f64,
    termination: Termination,
    holes: Vec<(f64, f64)>,
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Output, jobs: usize) -> Result<Value, CliError> {
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Usage("sweep needs a [sweep] section with axis and target".into()))?;
    let Family {
        branches,
        events,
        mut failures,
    } = sweep_family(cfg, sw, jobs)?;
    let header = [
        "param", "e_mf_re", "e_mf_im", "mu_re", "mu_im", "pt_residual", "symmetry", "stable", "max_re", "min_abs",
    ];
    for b in &branches {
        let name = file_label(b.label.as_deref().unwrap_or("unlabelled"));
        out.csv(&format!("branch_{name}.csv"), &header, &branch_rows(b))?;
        if sw.spectra {
            let states: Vec<StationaryState> = b.points.iter().map(|p| p.state.clone()).collect();
            let mut rows = Vec::new();
            for (p, sp) in b.points.iter().zip(spectra(cfg, &states, jobs)) {
                match sp {
                    Ok(sp) => {
                        for (k, l) in sp.eigenvalues.iter().enumerate() {
                            let zero = sp.zero_indices.contains(&k);
                            rows.push(vec![num(p.param), k.to_string(), num(l.re), num(l.im), zero.to_string()]);
                        }
                    }
                    Err(e) => failures.push(format!("spectrum of {name} at {}: {e}", p.param)),
                }
            }
            out.csv(&format!("spectrum_{name}.csv"), &["param", "index", "re", "im", "zero_mode"], &rows)?;
        }
    }
    let summaries: Vec<BranchSummary> = branches
        .iter()
        .map(|b| BranchSummary {
            label: b.label.clone().unwrap_or_else(|| "unlabelled".into()),
            points: b.points.len(),
            start: b.points[0].param,
            end: b.last().param,
            termination: b.termination,
            holes: b.holes.clone(),
        })
        .collect();
    out.json(
        "events.json",
        &json!({ "axis": sw.axis, "events": events, "branches": summaries, "failures": failures }),
    )?;
    if !failures.is_empty() {
        return Err(CliError::Solver(format!("sweep: {}", failures.join("; "))));
    }
    Ok(json!({ "command": "sweep", "branches": summaries.len(), "events": events.len() }))
}

pub fn cmd_stability(cfg: &RunConfig, out: &Output, jobs: usize) -> Result<Value, CliError> {
    let states = select(&run_census(cfg, jobs)?, &cfg.stability.states)?;
    let mut summary = Vec::new();
    let mut failures = Vec::new();
    for (s, sp) in states.iter().zip(spectra(cfg, &states, jobs)) {
        let label = label_of(s);
        let sp = match sp {
            Ok(sp) => sp,
            Err(e) => {
                failures.push(format!("{label}: {e}"));
                continue;
            }
        };
        let rows: Vec<Vec<String>> = sp
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(k, l)| vec![k.to_string(), num(l.re), num(l.im), sp.zero_indices.contains(&k).to_string()])
            .collect();
        out.csv(&format!("spectrum_{}.csv", file_label(&label)), &["index", "re", "im", "zero_mode"], &rows)?;
        summary.push(vec![
            label,
            sp.stable.to_string(),
            num(sp.max_re),
            smallest_excitation(&sp).map(num).unwrap_or_default(),
            num(sp.pairing_defect),
            num(sp.spectral_radius),
            sp.zero_modes.to_string(),
        ]);
    }
    out.csv(
        "stability.csv",
        &["label", "stable", "max_re", "min_excitation", "pairing_defect", "spectral_radius", "zero_modes"],
        &summary,
    )?;
    if !failures.is_empty() {
        return Err(CliError::Solver(format!("stability: {}", failures.join("; "))));
    }
    Ok(json!({ "command": "stability", "states": summary.len() }))
}

/// Sample indices for the snapshot images: explicit times first, then
/// `count` images spread over the first full population oscillation.
fn snapshot_indices(traj: &Trajectory, times: &[f64], count: usize) -> Vec<usize> {
    let nearest = |t: f64| {
        (0..traj.times.len())
            .min_by(|&a, &b| (traj.times[a] - t).abs().total_cmp(&(traj.times[b] - t).abs()))
            .unwrap_or(0)
    };
    let mut idx: Vec<usize> = times.iter().map(|&t| nearest(t)).collect();
    if count > 0 {
        let ext = extrema(&imbalance(traj), SWING);
        let (t0, t1) = if ext.len() >= 3 {
            (traj.times[ext[0]], traj.times[ext[2]])
        } else {
            (0.0, *traj.times.last().unwrap_or(&0.0))
        };
        let steps = count.max(2) - 1;
        idx.extend((0..count).map(|k| nearest(t0 + (t1 - t0) * k as f64 / steps as f64)));
    }
    idx
}

pub fn cmd_evolve(cfg: &RunConfig, out: &Output, jobs: usize) -> Result<Value, CliError> {
    let e = cfg
        .evolve
        .as_ref()
        .ok_or_else(|| CliError::Usage("evolve needs an [evolve] section with state and t_end".into()))?;
    let start = select(&run_census(cfg, jobs)?, std::slice::from_ref(&e.state))?.remove(0);
    let initially_stable = stability_spectrum_with(&start, &cfg.stability_options()).ok().map(|s| s.stable);
    let layout = ParamLayout::with_xz(cfg.couple_xz);
    let initial = if e.perturbation > 0.0 {
        perturb(&start.state, &layout, e.perturbation, e.seed)
    } else {
        start.state
    };
    let mut traj = evolve(&initial, &cfg.params(), e.t_end, &cfg.evolve_options(e)).map_err(|x| CliError::from(x).context("evolve"))?;
    traj.initially_stable = initially_stable;
    let imb = imbalance(&traj);
    let rows: Vec<Vec<String>> = traj
        .times
        .iter()
        .zip(&traj.observables)
        .zip(&imb)
        .map(|((t, o), d)| {
            vec![num(*t), num(o.norm), num(o.i1), num(o.i2), num(*d), num(o.e_mf.re), num(o.e_mf.im), num(o.pt_residual)]
        })
        .collect();
    out.csv(
        "trajectory.csv",
        &["t", "norm", "i1", "i2", "imbalance", "e_mf_re", "e_mf_im", "pt_residual"],
        &rows,
    )?;
    let mut snapshots = Vec::new();
    for (k, i) in snapshot_indices(&traj, &e.snapshot_times, e.oscillation_snapshots).into_iter().enumerate() {
        let img = absorption_image(
            &traj.states[i],
            cfg.image.extent,
            (cfg.image.resolution[0], cfg.image.resolution[1]),
            cfg.image.line_of_sight,
        )?;
        let name = format!("snapshot_{k:02}.txt");
        out.image(&name, &img, &format!("state={} t={}", e.state, num(traj.times[i])))?;
        snapshots.push(json!({ "file": name, "t": traj.times[i] }));
    }
    let class = classify_run(&traj);
    out.json(
        "run.json",
        &json!({
            "state": e.state,
            "seed": e.seed,
            "perturbation": e.perturbation,
            "initially_stable": initially_stable,
            "classification": class,
            "termination": traj.termination,
            "oscillation_period": oscillation_period(&traj),
            "oscillation_periods": oscillation_periods(&traj),
            "snapshots": snapshots,
        }),
    )?;
    match traj.termination {
        RunTermination::Collapsed { t } => Err(CliError::Collapse(format!("evolve: collapse at t = {t}"))),
        RunTermination::StepUnderflow { t, h, .. } => {
            Err(CliError::Solver(format!("evolve: step underflow at t = {t} (h = {h:e})")))
        }
        RunTermination::Completed => Ok(json!({ "command": "evolve", "classification": class })),
    }
}

pub fn cmd_image(cfg: &RunConfig, out: &Output, jobs: usize) -> Result<Value, CliError> {
    let states = select(&run_census(cfg, jobs)?, &cfg.image.states)?;
    let mut files = Vec::new();
    for s in &states {
        let img = absorption_image(
            &s.state,
            cfg.image.extent,
            (cfg.image.resolution[0], cfg.image.resolution[1]),
            cfg.image.line_of_sight,
        )?;
        let name = format!("image_{}.txt", file_label(&label_of(s)));
        out.image(&name, &img, &format!("state={}", label_of(s)))?;
        files.push(name);
    }
    Ok(json!({ "command": "image", "files": files }))
}

pub fn cmd_oracle(cfg: &RunConfig, out: &Output, jobs: usize) -> Result<Value, CliError> {
    let o = &cfg.oracle;
    let grid = || Grid::new(o.grid_n, o.grid_lo, o.grid_hi).map_err(CliError::from);
    match o.kind {
        OracleKind::DdiQuartets => {
            let res = oracle::ddi_quartets(o.quartets, o.seed, cfg.dipole_axis, jobs)?;
            let rows: Vec<Vec<String>> = res
                .iter()
                .map(|r| {
                    vec![
                        r.index.to_string(),
                        num(r.semi_analytic.re),
                        num(r.semi_analytic.im),
                        num(r.quadrature.re),
                        num(r.quadrature.im),
                        num(r.relative_error),
                    ]
                })
                .collect();
            out.csv(
                "ddi_quartets.csv",
                &["index", "semi_analytic_re", "semi_analytic_im", "quadrature_re", "quadrature_im", "relative_error"],
                &rows,
            )?;
            let worst = res.iter().map(|r| r.relative_error).fold(0.0, f64::max);
            let report = json!({ "kind": o.kind, "seed": o.seed, "quartets": res.len(), "max_relative_error": worst });
            out.json("oracle.json", &report)?;
            Ok(report)
        }
        OracleKind::GroundState => {
            let cmp = oracle::ground_state_comparison(&cfg.params(), grid()?)?;
            out.json("oracle.json", &json!({ "kind": o.kind, "comparison": cmp }))?;
            if cmp.collapse {
                return Err(CliError::Collapse(format!(
                    "oracle: variational {:?}, grid {:?}",
                    cmp.variational_e_mf, cmp.grid_e_mf
                )));
            }
            if let (Err(m), _) | (_, Err(m)) = (&cmp.variational_e_mf, &cmp.grid_e_mf) {
                return Err(CliError::Solver(format!("oracle: {m}")));
            }
            Ok(json!({ "kind": o.kind, "relative_gap": cmp.relative_gap }))
        }
        OracleKind::LinearSpectrum => {
            let cmp = oracle::linear_comparison(&cfg.params(), grid()?)?;
            out.json("oracle.json", &json!({ "kind": o.kind, "comparison": cmp }))?;
            Ok(json!({ "kind": o.kind, "difference": cmp.difference }))
        }
    }
}
