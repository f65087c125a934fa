//! All branches reachable from a census, plus those found by probe
//! censuses further along the sweep.

use ptbec_core::continuation::{detect_events, sweep_branch, BifurcationEvent, Branch, Termination};
use ptbec_core::stationary::{census, run_parallel, StationaryState};

use crate::config::{RunConfig, SweepConfig};
use crate::error::CliError;

pub struct Family {
    pub branches: Vec<Branch>,
    pub events: Vec<BifurcationEvent>,
    /// Branches that could not be swept, with the reason.
    pub failures: Vec<String>,
}

fn label_of(s: &StationaryState) -> String {
    s.label.clone().unwrap_or_else(|| "unlabelled".into())
}

/// Whether `s` lies on some branch: compared with the branch point at the
/// same parameter if there is one, else with the nearest within `window`.
fn on_branch(s: &StationaryState, param: f64, branches: &[Branch], window: f64) -> bool {
    branches.iter().any(|b| {
        let Some(p) = b.points.iter().min_by(|x, y| (x.param - param).abs().total_cmp(&(y.param - param).abs())) else {
            return false;
        };
        let gap = (p.param - param).abs();
        let tol = if gap < 1e-12 { 1e-3 } else if gap <= window { 1e-2 } else { return false };
        p.state.state.wavefunction_distance(&s.state).map(|d| d < tol).unwrap_or(false)
    })
}

/// A branch point shortly before the end of every fold-terminated branch.
fn fold_probes(branches: &[Branch]) -> Vec<f64> {
    branches
        .iter()
        .filter(|b| matches!(b.termination, Termination::FoldSuspected { .. }))
        .filter_map(|b| {
            let (start, end) = (b.points[0].param, b.last().param);
            let aim = end - 0.02 * (end - start);
            b.points.iter().map(|p| p.param).min_by(|x, y| (x - aim).abs().total_cmp(&(y - aim).abs()))
        })
        .collect()
}

pub fn sweep_family(cfg: &RunConfig, sw: &SweepConfig, jobs: usize) -> Result<Family, CliError> {
    let params = cfg.params();
    let start = sw.axis.get(&params);
    let ctrl = cfg.step_control(sw);
    let initial = census(&params, &cfg.census_options(jobs)).map_err(|e| CliError::from(e).context("census"))?;
    let starts: Vec<StationaryState> = if sw.states.is_empty() {
        initial
    } else {
        sw.states
            .iter()
            .map(|w| {
                initial.iter().find(|s| s.label.as_deref() == Some(w.as_str())).cloned().ok_or_else(|| {
                    let found: Vec<String> = initial.iter().map(label_of).collect();
                    CliError::Solver(format!("state {w} not found; census has [{}]", found.join(", ")))
                })
            })
            .collect::<Result<_, _>>()?
    };
    let mut branches = Vec::new();
    let mut failures = Vec::new();
    for (s, r) in starts.iter().zip(run_parallel(&starts, jobs, |s| sweep_branch(s, sw.axis, sw.target, &ctrl))) {
        match r {
            Ok(b) => branches.push(b),
            Err(e) => failures.push(format!("{}: {e}", label_of(s))),
        }
    }

    let mut probes = sw.probes.clone();
    if sw.probe_folds {
        probes.extend(fold_probes(&branches));
    }
    probes.sort_by(f64::total_cmp);
    probes.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    for probe in probes {
        let mut p = params;
        sw.axis.set(&mut p, probe);
        let found = match census(&p, &cfg.census_options(jobs)) {
            Ok(f) => f,
            Err(e) => {
                failures.push(format!("probe census at {probe}: {e}"));
                continue;
            }
        };
        // PT images are swept implicitly through their partners.
        let fresh: Vec<StationaryState> = found
            .into_iter()
            .filter(|s| !label_of(s).ends_with('\''))
            .filter(|s| !on_branch(s, probe, &branches, 2.0 * sw.max_step))
            .collect();
        let jobs_list: Vec<(StationaryState, f64)> = fresh
            .iter()
            .flat_map(|s| [(s.clone(), start), (s.clone(), sw.target)])
            .collect();
        let swept = run_parallel(&jobs_list, jobs, |(s, t)| sweep_branch(s, sw.axis, *t, &ctrl));
        for ((s, t), r) in jobs_list.iter().zip(swept) {
            let dir = if (*t - probe) * (sw.target - start) < 0.0 { "-" } else { "+" };
            let name = format!("{}@{probe:.6}{dir}", label_of(s));
            match r {
                Ok(mut b) => {
                    b.label = Some(name);
                    branches.push(b);
                }
                Err(e) => failures.push(format!("{name}: {e}")),
            }
        }
    }
    let events = detect_events(&branches, &ctrl);
    Ok(Family {
        branches,
        events,
        failures,
    })
}
