//! Scenario execution: one propagation per sweep tuple, observables at the
//! configured checkpoints, deterministic output files plus a machine-readable
//! report.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;

use solq::classical::{
    self, init_scalar_pair, init_vector_pair, propagate_scalar, propagate_vector, slot_energy,
    SolitonPairSpec, Trajectory, VectorPairSpec,
};
use solq::correlation::{
    correlation_maps, covariance, oracle_support_functionals, pair_correlation_windowed,
    pair_correlations, polarization_pair_correlations_in, CorrelationMap, PairCorrelation,
    SlotPartition,
};
use solq::grid::TimeGrid;
use solq::quantum::build_green_matrix;

use crate::config::{InitialConfig, ObservableConfig, ScenarioConfig, SweepTuple};
use crate::output;

/// Conservation drift between the first and last snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct ConservationReport {
    pub photon_number_initial: f64,
    pub photon_number_drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub photon_number_v_drift: Option<f64>,
    pub hamiltonian_drift: f64,
    pub momentum_drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_breach_z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary_breach_ratio: Option<f64>,
}

/// Green-matrix cross-check summary (oracle mode).
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub z: f64,
    pub max_relative_covariance_deviation: f64,
    pub bogoliubov_unitarity_residual: f64,
    pub bogoliubov_symmetry_residual: f64,
}

/// Everything computed for one sweep tuple.
pub struct TupleOutcome {
    pub label: String,
    pub error: Option<String>,
    pub maps: Vec<CorrelationMap>,
    pub pair_curve: Vec<PairCorrelation>,
    pub pol_curve: Vec<PairCorrelation>,
    /// Classical x-component slot energy trace (z, energy).
    pub trace: Vec<(f64, f64)>,
    pub conservation: Option<ConservationReport>,
    pub oracle: Option<OracleReport>,
    pub seconds: f64,
}

pub struct RunOutcome {
    pub config: ScenarioConfig,
    pub tuples: Vec<TupleOutcome>,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

impl RunOutcome {
    pub fn failed_tuples(&self) -> usize {
        self.tuples.iter().filter(|t| t.error.is_some()).count()
    }

    pub fn all_tuples_failed(&self) -> bool {
        !self.tuples.is_empty() && self.failed_tuples() == self.tuples.len()
    }
}

fn propagate_tuple(
    cfg: &ScenarioConfig,
    grid: &Arc<TimeGrid>,
    tuple: &SweepTuple,
    z_max: f64,
) -> solq::Result<Trajectory> {
    match tuple.initial {
        InitialConfig::Scalar { gamma, theta, rho } => {
            let spec = SolitonPairSpec::new(gamma, theta, rho)?;
            let u = init_scalar_pair(&spec, grid)?;
            propagate_scalar(&u, z_max, cfg.solver.z_step)
        }
        InitialConfig::Vector { t1, a_coeff, b_coeff } => {
            let spec = VectorPairSpec::new(t1, a_coeff, b_coeff)?;
            let (u, v) = init_vector_pair(&spec, grid)?;
            propagate_vector(&u, &v, z_max, cfg.solver.z_step, &spec)
        }
    }
}

fn conservation_report(traj: &Trajectory) -> ConservationReport {
    let first = traj.conserved_at(0);
    let last = traj.conserved_at(traj.n_steps());
    let rel = |a: f64, b: f64| (b - a) / a.abs().max(1e-300);
    ConservationReport {
        photon_number_initial: first.photon_number,
        photon_number_drift: rel(first.photon_number, last.photon_number),
        photon_number_v_drift: first
            .photon_number_v
            .zip(last.photon_number_v)
            .map(|(a, b)| rel(a, b)),
        hamiltonian_drift: rel(first.hamiltonian, last.hamiltonian),
        momentum_drift: last.momentum - first.momentum,
        boundary_breach_z: traj.boundary_breach().map(|b| b.z),
        boundary_breach_ratio: traj.boundary_breach().map(|b| b.ratio),
    }
}

/// Cross-check the final-checkpoint covariances against the dense Green
/// matrix (the trajectory ends at the last checkpoint by construction).
fn oracle_check(traj: &Trajectory, cfg: &ScenarioConfig) -> solq::Result<OracleReport> {
    let green = build_green_matrix(traj)?;
    let (r1, r2) = green.bogoliubov_residuals();
    let z = traj.z_end();
    let n0 = cfg.fluctuation_scale;

    // A handful of representative functionals at the final checkpoint.
    // Deviation is measured against the largest covariance magnitude: tail
    // slots carry covariances many orders below the working scale, where a
    // per-entry quotient would compare rounding noise against itself.
    let functionals = oracle_support_functionals(traj, z, 8)?;
    let mut worst_abs = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..functionals.len() {
        for j in i..functionals.len() {
            let fast = covariance(&functionals[i].1, &functionals[j].1, n0);
            let oracle = covariance(
                &green.transpose_apply(&functionals[i].0),
                &green.transpose_apply(&functionals[j].0),
                n0,
            );
            worst_abs = worst_abs.max((fast - oracle).abs());
            scale = scale.max(oracle.abs());
        }
    }
    Ok(OracleReport {
        z,
        max_relative_covariance_deviation: worst_abs / scale.max(1e-300),
        bogoliubov_unitarity_residual: r1,
        bogoliubov_symmetry_residual: r2,
    })
}

fn evaluate_tuple(
    cfg: &ScenarioConfig,
    grid: &Arc<TimeGrid>,
    tuple: &SweepTuple,
) -> solq::Result<TupleOutcome> {
    let started = Instant::now();
    let z_max = cfg.z_max();
    let traj = propagate_tuple(cfg, grid, tuple, z_max)?;
    let n0 = cfg.fluctuation_scale;

    let mut maps = Vec::new();
    let mut pair_curve = Vec::new();
    let mut pol_curve = Vec::new();
    let mut trace = Vec::new();

    for obs in &cfg.observables {
        match obs {
            ObservableConfig::Map {
                slot_width, window, ..
            } => {
                let part = SlotPartition::uniform(grid, window[0], window[1], *slot_width)?;
                let zs = obs.checkpoints();
                maps.extend(correlation_maps(&traj, &zs, &part, n0)?);
            }
            ObservableConfig::Pair {
                window_half_width, ..
            } => {
                let zs = obs.checkpoints();
                match window_half_width {
                    None => pair_curve.extend(pair_correlations(&traj, &zs, n0)?),
                    Some(w) => {
                        for &z in &zs {
                            pair_curve.push(pair_correlation_windowed(&traj, z, n0, *w)?);
                        }
                    }
                }
            }
            ObservableConfig::PolarizationPair {
                trace_slot,
                trace_every,
                ..
            } => {
                let zs = obs.checkpoints();
                pol_curve.extend(polarization_pair_correlations_in(
                    &traj,
                    &zs,
                    n0,
                    (0, grid.len()),
                )?);
                let a = grid.index_of_t(trace_slot[0]);
                let b = grid.index_of_t(trace_slot[1]).max(a + 1);
                let stride = (trace_every / cfg.solver.z_step).round().max(1.0) as usize;
                let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
                for k in (0..=traj.n_steps()).step_by(stride) {
                    let u = traj.snapshot_u(k);
                    let v = traj.snapshot_v(k).expect("vector trajectory");
                    let ex: Vec<num_complex::Complex64> = u[a..b]
                        .iter()
                        .zip(&v[a..b])
                        .map(|(x, y)| (x + y) * inv_sqrt2)
                        .collect();
                    trace.push((traj.z_at(k), slot_energy(&ex, (0, ex.len()), grid.dt())));
                }
            }
        }
    }

    let oracle = if cfg.oracle {
        Some(oracle_check(&traj, cfg)?)
    } else {
        None
    };

    Ok(TupleOutcome {
        label: tuple.label.clone(),
        error: None,
        maps,
        pair_curve,
        pol_curve,
        trace,
        conservation: Some(conservation_report(&traj)),
        oracle,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Execute a validated scenario and write all output files under `out_dir`.
///
/// Numerical failure of one sweep tuple aborts that tuple only; the error is
/// recorded in its outcome and the sweep continues.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: &Path) -> anyhow::Result<RunOutcome> {
    cfg.validate().map_err(|e| anyhow::anyhow!(e.to_string()))?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    let grid = TimeGrid::new(cfg.grid.n, cfg.grid.t_half_span)
        .map_err(|e| anyhow::anyhow!(e.to_string()))?;
    let tuples = cfg.sweep_tuples();
    let mut warnings = Vec::new();

    // Window-fit warning at initialization.
    let fit = match cfg.initial {
        InitialConfig::Scalar { rho, .. } => classical::window_fit_margin(rho, &grid),
        InitialConfig::Vector { t1, .. } => classical::window_fit_margin(t1, &grid),
    };
    if fit >= classical::WINDOW_FIT_THRESHOLD {
        warnings.push(format!(
            "pulses overhang the window: sech(span - separation) = {fit:.3e}"
        ));
    }

    let mut outcomes = Vec::with_capacity(tuples.len());
    for tuple in &tuples {
        let started = Instant::now();
        match evaluate_tuple(cfg, &grid, tuple) {
            Ok(outcome) => {
                if let Some(c) = &outcome.conservation {
                    if let (Some(z), Some(r)) = (c.boundary_breach_z, c.boundary_breach_ratio) {
                        warnings.push(format!(
                            "tuple {}: boundary energy reached {r:.3e} of peak at z = {z}",
                            tuple.label
                        ));
                    }
                }
                outcomes.push(outcome);
            }
            Err(e) => {
                log::error!("tuple {} failed: {e}", tuple.label);
                outcomes.push(TupleOutcome {
                    label: tuple.label.clone(),
                    error: Some(e.to_string()),
                    maps: Vec::new(),
                    pair_curve: Vec::new(),
                    pol_curve: Vec::new(),
                    trace: Vec::new(),
                    conservation: None,
                    oracle: None,
                    seconds: started.elapsed().as_secs_f64(),
                });
            }
        }
    }

    let files = output::write_outputs(cfg, &outcomes, &warnings, out_dir)?;
    Ok(RunOutcome {
        config: cfg.clone(),
        tuples: outcomes,
        files,
        warnings,
    })
}
