//! Bundled configurations that regenerate the data behind each figure.

use ptbec_core::continuation::SweepAxis;

use crate::config::{EvolveConfig, RunConfig, SweepConfig};
use crate::Command;

pub const FIGURES: [&str; 5] = ["fig2", "fig3", "fig4", "fig5", "fig6"];

/// One step of a recipe: output subdirectory, command and its config.
pub struct Step {
    pub name: String,
    pub command: Command,
    pub config: RunConfig,
}

fn sweep(target: f64, spectra: bool) -> Option<SweepConfig> {
    Some(SweepConfig {
        axis: SweepAxis::Gamma,
        target,
        states: Vec::new(),
        with_stability: true,
        spectra,
        probes: Vec::new(),
        probe_folds: true,
        initial_step: 1e-3,
        min_step: 1e-8,
        max_step: 1e-2,
    })
}

fn with(na: f64, nadd: f64, gamma: f64) -> RunConfig {
    RunConfig {
        na,
        nadd,
        gamma,
        ..Default::default()
    }
}

fn evolve(state: &str) -> Option<EvolveConfig> {
    Some(EvolveConfig {
        state: state.into(),
        t_end: 150.0,
        samples: 3000,
        perturbation: 0.0,
        seed: 0,
        rtol: 1e-9,
        atol: 1e-10,
        snapshot_times: Vec::new(),
        oscillation_snapshots: 6,
    })
}

pub fn recipe(figure: &str) -> Option<Vec<Step>> {
    let step = |name: String, command, config| Step { name, command, config };
    let steps = match figure {
        // Non-dipolar branches: single fold at Na = 0, pitchfork plus tangent below.
        "fig2" => [0.0, -0.0022]
            .iter()
            .map(|&na| step(format!("na{na}"), Command::Sweep, RunConfig { sweep: sweep(1.0, false), ..with(na, 0.0, 0.0) }))
            .collect(),
        // Dipolar branches for three scattering lengths plus the state images.
        "fig3" => {
            let mut v: Vec<Step> = [-0.03, -0.035, -0.0425]
                .iter()
                .map(|&na| step(format!("na{na}"), Command::Sweep, RunConfig { sweep: sweep(0.5, false), ..with(na, 0.3, 0.0) }))
                .collect();
            v.push(step("images".into(), Command::Image, with(-0.03, 0.3, 0.2)));
            v
        }
        // Stability spectra along every branch.
        "fig4" => vec![step(
            "na-0.038".into(),
            Command::Sweep,
            RunConfig { sweep: sweep(0.4, true), ..with(-0.038, 0.3, 0.0) },
        )],
        "fig5" => vec![step("S02".into(), Command::Evolve, RunConfig { evolve: evolve("S02"), ..with(-0.038, 0.3, 0.2) })],
        "fig6" => vec![step("S12".into(), Command::Evolve, RunConfig { evolve: evolve("S12"), ..with(-0.038, 0.3, 0.25) })],
        _ => return None,
    };
    Some(steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_recipe_config_survives_a_round_trip() {
        for f in FIGURES {
            for s in recipe(f).unwrap() {
                let back = RunConfig::from_toml(&s.config.to_toml(), &[]).unwrap();
                assert_eq!(back, s.config, "{f}/{}", s.name);
            }
        }
        assert!(recipe("fig9").is_none());
    }
}
