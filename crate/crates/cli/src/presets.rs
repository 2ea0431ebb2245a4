//! Built-in scenario presets reproducing the reference figures.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::config::{
    Checkpoints, GridConfig, InitialConfig, ObservableConfig, ScenarioConfig, SolverConfig,
    SweepConfig, System,
};

pub struct PresetInfo {
    pub name: &'static str,
    /// Which figure the preset reproduces.
    pub figure: &'static str,
    pub summary: &'static str,
    pub config: ScenarioConfig,
}

fn scalar_base(theta: f64, rho: f64) -> (System, InitialConfig, GridConfig, SolverConfig) {
    (
        System::Scalar,
        InitialConfig::Scalar {
            gamma: 1.0,
            theta,
            rho,
        },
        GridConfig {
            n: 1024,
            t_half_span: 20.0,
        },
        SolverConfig { z_step: 1e-3 },
    )
}

pub fn fig1() -> ScenarioConfig {
    let (system, initial, grid, solver) = scalar_base(FRAC_PI_2, 3.5);
    ScenarioConfig {
        system,
        initial,
        grid,
        solver,
        observables: vec![ObservableConfig::Map {
            z_checkpoints: Checkpoints::List(vec![6.0, 30.0, 50.0]),
            slot_width: 0.1,
            window: [-8.0, 8.0],
            write_pgm: true,
        }],
        sweep: SweepConfig::default(),
        fluctuation_scale: 1.0,
        oracle: false,
        output: None,
    }
}

pub fn fig2a() -> ScenarioConfig {
    let (system, initial, grid, solver) = scalar_base(FRAC_PI_2, 3.5);
    ScenarioConfig {
        system,
        initial,
        grid,
        solver,
        observables: vec![ObservableConfig::Pair {
            z_checkpoints: Checkpoints::Range {
                from: 0.0,
                to: 100.0,
                every: 2.5,
            },
            window_half_width: None,
        }],
        sweep: SweepConfig {
            rho: Some(vec![3.0, 3.5, 4.0]),
            ..SweepConfig::default()
        },
        fluctuation_scale: 1.0,
        oracle: false,
        output: None,
    }
}

pub fn fig2b() -> ScenarioConfig {
    let (system, initial, grid, solver) = scalar_base(0.0, 3.5);
    ScenarioConfig {
        system,
        initial,
        grid,
        solver,
        observables: vec![ObservableConfig::Pair {
            z_checkpoints: Checkpoints::Range {
                from: 0.0,
                to: 100.0,
                every: 2.5,
            },
            window_half_width: None,
        }],
        sweep: SweepConfig {
            theta: Some(vec![0.0, FRAC_PI_4, FRAC_PI_2]),
            ..SweepConfig::default()
        },
        fluctuation_scale: 1.0,
        oracle: false,
        output: None,
    }
}

pub fn fig3() -> ScenarioConfig {
    ScenarioConfig {
        system: System::Vector,
        initial: InitialConfig::Vector {
            t1: 3.5,
            a_coeff: 1.0,
            b_coeff: 2.0,
        },
        grid: GridConfig {
            n: 1024,
            t_half_span: 20.0,
        },
        solver: SolverConfig { z_step: 1e-3 },
        observables: vec![ObservableConfig::PolarizationPair {
            z_checkpoints: Checkpoints::Range {
                from: 0.0,
                to: 50.0,
                every: 1.0,
            },
            trace_slot: [-6.5, -0.5],
            trace_every: 0.1,
        }],
        sweep: SweepConfig::default(),
        fluctuation_scale: 1.0,
        oracle: false,
        output: None,
    }
}

pub fn all() -> Vec<PresetInfo> {
    vec![
        PresetInfo {
            name: "fig1",
            figure: "1",
            summary: "slot-resolved correlation maps of the out-of-phase pair \
                      (theta=pi/2, rho=3.5) at z = 6, 30, 50; slot width 0.1",
            config: fig1(),
        },
        PresetInfo {
            name: "fig2a",
            figure: "2(a)",
            summary: "two-soliton correlation parameter vs z for separations \
                      rho = 3.0, 3.5, 4.0 (theta=pi/2)",
            config: fig2a(),
        },
        PresetInfo {
            name: "fig2b",
            figure: "2(b)",
            summary: "two-soliton correlation parameter vs z for relative \
                      phases theta = 0, pi/4, pi/2 (rho=3.5)",
            config: fig2b(),
        },
        PresetInfo {
            name: "fig3",
            figure: "3",
            summary: "x/y polarization photon-number correlation of the \
                      vector pair (t1=3.5, A:B = 1:2) plus the classical \
                      x-component energy trace",
            config: fig3(),
        },
    ]
}

pub fn by_name(name: &str) -> Option<ScenarioConfig> {
    all().into_iter().find(|p| p.name == name).map(|p| p.config)
}
