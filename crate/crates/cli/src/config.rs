//! Scenario configuration: the TOML schema mirrors these structs field for
//! field (see the README for the documented schema).

use serde::{Deserialize, Serialize};
use solq::classical::{SolitonPairSpec, VectorPairSpec};
use solq::grid::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Scalar,
    Vector,
}

/// Initial condition parameters; the variant must match `system`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum InitialConfig {
    Scalar { gamma: f64, theta: f64, rho: f64 },
    Vector { t1: f64, a_coeff: f64, b_coeff: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub t_half_span: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub z_step: f64,
}

/// Checkpoint list, explicit or as an inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Checkpoints {
    List(Vec<f64>),
    Range { from: f64, to: f64, every: f64 },
}

impl Checkpoints {
    pub fn resolve(&self) -> Vec<f64> {
        match self {
            Checkpoints::List(v) => v.clone(),
            Checkpoints::Range { from, to, every } => {
                let mut out = Vec::new();
                let mut k = 0usize;
                loop {
                    let z = from + k as f64 * every;
                    if z > to + 1e-9 {
                        break;
                    }
                    out.push(z);
                    k += 1;
                }
                out
            }
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_trace_every() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    /// Slot-resolved correlation map at each checkpoint.
    Map {
        z_checkpoints: Checkpoints,
        slot_width: f64,
        window: [f64; 2],
        #[serde(default = "default_true")]
        write_pgm: bool,
    },
    /// Two-soliton correlation parameter curve.
    Pair {
        z_checkpoints: Checkpoints,
        /// Half-line split when absent; finite windows of this half-width
        /// around each peak when present.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window_half_width: Option<f64>,
    },
    /// x/y polarization-component correlation curve, with a classical
    /// x-component slot-energy trace.
    PolarizationPair {
        z_checkpoints: Checkpoints,
        /// Time window of the classical x-energy trace.
        trace_slot: [f64; 2],
        #[serde(default = "default_trace_every")]
        trace_every: f64,
    },
}

impl ObservableConfig {
    pub fn checkpoints(&self) -> Vec<f64> {
        match self {
            ObservableConfig::Map { z_checkpoints, .. }
            | ObservableConfig::Pair { z_checkpoints, .. }
            | ObservableConfig::PolarizationPair { z_checkpoints, .. } => z_checkpoints.resolve(),
        }
    }
}

/// Parameter lists swept as a cross product, expanded in declaration order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_coeff: Option<Vec<f64>>,
}

impl SweepConfig {
    pub fn is_empty(&self) -> bool {
        self.rho.is_none()
            && self.theta.is_none()
            && self.gamma.is_none()
            && self.t1.is_none()
            && self.b_coeff.is_none()
    }
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system: System,
    pub initial: InitialConfig,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub observables: Vec<ObservableConfig>,
    #[serde(default, skip_serializing_if = "SweepConfig::is_empty")]
    pub sweep: SweepConfig,
    /// Photon-number scale n0 of the input fluctuations.
    #[serde(default = "default_scale")]
    pub fluctuation_scale: f64,
    /// Cross-check covariances against the dense Green matrix (forces
    /// n <= 256).
    #[serde(default)]
    pub oracle: bool,
    /// Output directory; the CLI `--out` flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

/// One resolved parameter tuple of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTuple {
    pub label: String,
    pub initial: InitialConfig,
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| ConfigError(format!("scenario parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn z_max(&self) -> f64 {
        self.observables
            .iter()
            .flat_map(|o| o.checkpoints())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError(m));

        match (self.system, &self.initial) {
            (System::Scalar, InitialConfig::Scalar { gamma, theta, rho }) => {
                SolitonPairSpec::new(*gamma, *theta, *rho)
                    .map_err(|e| ConfigError(e.to_string()))?;
            }
            (System::Vector, InitialConfig::Vector { t1, a_coeff, b_coeff }) => {
                VectorPairSpec::new(*t1, *a_coeff, *b_coeff)
                    .map_err(|e| ConfigError(e.to_string()))?;
            }
            _ => return err("`initial` variant does not match `system`".into()),
        }

        let grid = TimeGrid::new(self.grid.n, self.grid.t_half_span)
            .map_err(|e| ConfigError(e.to_string()))?;

        let h = self.solver.z_step;
        if !(h > 0.0) || !h.is_finite() {
            return err(format!("z_step must be positive, got {h}"));
        }

        if self.observables.is_empty() {
            return err("at least one observable is required".into());
        }
        for obs in &self.observables {
            let zs = obs.checkpoints();
            if zs.is_empty() {
                return err("observable has no checkpoints".into());
            }
            for &z in &zs {
                if z < 0.0 || !z.is_finite() {
                    return err(format!("checkpoint z = {z} invalid"));
                }
                let k = (z / h).round();
                if (k * h - z).abs() > 1e-9 * z.abs().max(1.0) {
                    return err(format!("checkpoint z = {z} is not a multiple of z_step {h}"));
                }
            }
            match obs {
                ObservableConfig::Map {
                    slot_width, window, ..
                } => {
                    if self.system != System::Scalar {
                        return err("map observables require the scalar system".into());
                    }
                    solq::SlotPartition::uniform(&grid, window[0], window[1], *slot_width)
                        .map_err(|e| ConfigError(e.to_string()))?;
                }
                ObservableConfig::Pair { .. } => {
                    if self.system != System::Scalar {
                        return err("pair observables require the scalar system".into());
                    }
                }
                ObservableConfig::PolarizationPair { trace_slot, trace_every, .. } => {
                    if self.system != System::Vector {
                        return err("polarization_pair observables require the vector system".into());
                    }
                    if !(trace_slot[0] < trace_slot[1]) {
                        return err("trace_slot must be a nonempty interval".into());
                    }
                    if !(*trace_every > 0.0) {
                        return err("trace_every must be positive".into());
                    }
                }
            }
        }

        match self.system {
            System::Scalar => {
                if self.sweep.t1.is_some() || self.sweep.b_coeff.is_some() {
                    return err("t1/b_coeff sweeps apply to the vector system".into());
                }
            }
            System::Vector => {
                if self.sweep.rho.is_some()
                    || self.sweep.theta.is_some()
                    || self.sweep.gamma.is_some()
                {
                    return err("rho/theta/gamma sweeps apply to the scalar system".into());
                }
            }
        }
        for list in [
            &self.sweep.rho,
            &self.sweep.theta,
            &self.sweep.gamma,
            &self.sweep.t1,
            &self.sweep.b_coeff,
        ]
        .into_iter()
        .flatten()
        {
            if list.is_empty() {
                return err("sweep lists must be nonempty".into());
            }
        }

        if !(self.fluctuation_scale > 0.0) {
            return err(format!(
                "fluctuation_scale must be positive, got {}",
                self.fluctuation_scale
            ));
        }
        if self.oracle && self.grid.n > 256 {
            return err(format!(
                "oracle mode forces n <= 256, got n = {}",
                self.grid.n
            ));
        }
        Ok(())
    }

    /// Cross product of the sweep lists (base parameters where no list is
    /// given), in field order rho, theta, gamma / t1, b_coeff.
    pub fn sweep_tuples(&self) -> Vec<SweepTuple> {
        fn label(parts: &[(&str, f64)]) -> String {
            parts
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(",")
        }
        match self.initial {
            InitialConfig::Scalar { gamma, theta, rho } => {
                let rhos = self.sweep.rho.clone().unwrap_or_else(|| vec![rho]);
                let thetas = self.sweep.theta.clone().unwrap_or_else(|| vec![theta]);
                let gammas = self.sweep.gamma.clone().unwrap_or_else(|| vec![gamma]);
                let mut out = Vec::new();
                for &r in &rhos {
                    for &t in &thetas {
                        for &g in &gammas {
                            let mut parts = Vec::new();
                            if self.sweep.rho.is_some() {
                                parts.push(("rho", r));
                            }
                            if self.sweep.theta.is_some() {
                                parts.push(("theta", t));
                            }
                            if self.sweep.gamma.is_some() {
                                parts.push(("gamma", g));
                            }
                            let label = if parts.is_empty() {
                                label(&[("rho", r), ("theta", t), ("gamma", g)])
                            } else {
                                label(&parts)
                            };
                            out.push(SweepTuple {
                                label,
                                initial: InitialConfig::Scalar {
                                    gamma: g,
                                    theta: t,
                                    rho: r,
                                },
                            });
                        }
                    }
                }
                out
            }
            InitialConfig::Vector { t1, a_coeff, b_coeff } => {
                let t1s = self.sweep.t1.clone().unwrap_or_else(|| vec![t1]);
                let bs = self.sweep.b_coeff.clone().unwrap_or_else(|| vec![b_coeff]);
                let mut out = Vec::new();
                for &t in &t1s {
                    for &b in &bs {
                        let mut parts = Vec::new();
                        if self.sweep.t1.is_some() {
                            parts.push(("t1", t));
                        }
                        if self.sweep.b_coeff.is_some() {
                            parts.push(("b_coeff", b));
                        }
                        let label = if parts.is_empty() {
                            label(&[("t1", t), ("b_coeff", b)])
                        } else {
                            label(&parts)
                        };
                        out.push(SweepTuple {
                            label,
                            initial: InitialConfig::Vector {
                                t1: t,
                                a_coeff,
                                b_coeff: b,
                            },
                        });
                    }
                }
                out
            }
        }
    }
}
