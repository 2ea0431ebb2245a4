//! Classical soliton dynamics: initial conditions, symmetric split-step
//! propagation of the scalar and coupled two-component cubic Schrödinger
//! equations, trajectories and conserved quantities.
//!
//! One solver step of size `h` is the Strang composition
//! `D(h/2) · K(h) · D(h/2)`: `D` is the exact spectral dispersion substep
//! (phase `exp(-i ω² dz / 2)` per mode) and `K` the exact Kerr substep
//! (pointwise phase rotation, `|u|` invariant). Both substeps preserve the
//! photon number exactly, so only rounding accumulates in `Σ|u|² dt`.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::Error;
use crate::field::ComplexEnvelope;
use crate::grid::{FftScratch, TimeGrid};
use crate::Result;

/// Boundary intensity above this fraction of the peak triggers a warning.
pub const BOUNDARY_ENERGY_THRESHOLD: f64 = 1e-10;

/// Window-fit margin `sech(t_half_span - rho)` above this triggers a warning
/// at initialization.
pub const WINDOW_FIT_THRESHOLD: f64 = 1e-5;

const MONITOR_STRIDE: usize = 256;

#[inline]
pub(crate) fn expi(phi: f64) -> Complex64 {
    Complex64::from_polar(1.0, phi)
}

#[inline]
fn sech(x: f64) -> f64 {
    1.0 / x.cosh()
}

/// Relative amplitude, phase and half-separation of a scalar soliton pair.
///
/// The input profile is `sech(t + rho) + gamma sech(t - rho) exp(i theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonPairSpec {
    pub gamma: f64,
    pub theta: f64,
    pub rho: f64,
}

impl SolitonPairSpec {
    pub fn new(gamma: f64, theta: f64, rho: f64) -> Result<Self> {
        if !gamma.is_finite() || !theta.is_finite() || !rho.is_finite() {
            return Err(Error::InvalidParameter(
                "soliton pair parameters must be finite".into(),
            ));
        }
        if gamma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "relative amplitude must be positive, got {gamma}"
            )));
        }
        if rho < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "half-separation must be non-negative, got {rho}"
            )));
        }
        let theta = theta.rem_euclid(std::f64::consts::TAU);
        Ok(SolitonPairSpec { gamma, theta, rho })
    }
}

/// Half-separation and coupling coefficients of a two-component pair.
///
/// The input profile is `U = sech(t + t1) + sech(t - t1)`,
/// `V = sech(t + t1) - sech(t - t1)`; `a_coeff` and `b_coeff` are the self-
/// and cross-phase-modulation coefficients of the coupled equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorPairSpec {
    pub t1: f64,
    pub a_coeff: f64,
    pub b_coeff: f64,
}

impl VectorPairSpec {
    pub fn new(t1: f64, a_coeff: f64, b_coeff: f64) -> Result<Self> {
        if !t1.is_finite() || !a_coeff.is_finite() || !b_coeff.is_finite() {
            return Err(Error::InvalidParameter(
                "vector pair parameters must be finite".into(),
            ));
        }
        if t1 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "half-separation must be non-negative, got {t1}"
            )));
        }
        if a_coeff <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "self-phase coefficient must be positive, got {a_coeff}"
            )));
        }
        if b_coeff < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "cross-phase coefficient must be non-negative, got {b_coeff}"
            )));
        }
        Ok(VectorPairSpec {
            t1,
            a_coeff,
            b_coeff,
        })
    }
}

/// `sech(t_half_span - rho)`: tail amplitude of a unit soliton at the window
/// edge. Above [`WINDOW_FIT_THRESHOLD`] the pulses overhang the window.
pub fn window_fit_margin(rho: f64, grid: &TimeGrid) -> f64 {
    sech(grid.t_half_span() - rho)
}

/// Input profile of the scalar pair at z = 0.
pub fn init_scalar_pair(spec: &SolitonPairSpec, grid: &Arc<TimeGrid>) -> Result<ComplexEnvelope> {
    let margin = window_fit_margin(spec.rho, grid);
    if margin >= WINDOW_FIT_THRESHOLD {
        log::warn!(
            "soliton pair overhangs the window: sech(span - rho) = {margin:.3e} \
             (threshold {WINDOW_FIT_THRESHOLD:.0e})"
        );
    }
    let phase = expi(spec.theta);
    ComplexEnvelope::from_fn(grid.clone(), |t| {
        Complex64::new(sech(t + spec.rho), 0.0) + spec.gamma * sech(t - spec.rho) * phase
    })
}

/// Input profile of the two-component pair at z = 0.
pub fn init_vector_pair(
    spec: &VectorPairSpec,
    grid: &Arc<TimeGrid>,
) -> Result<(ComplexEnvelope, ComplexEnvelope)> {
    let margin = window_fit_margin(spec.t1, grid);
    if margin >= WINDOW_FIT_THRESHOLD {
        log::warn!(
            "vector pair overhangs the window: sech(span - t1) = {margin:.3e} \
             (threshold {WINDOW_FIT_THRESHOLD:.0e})"
        );
    }
    let u = ComplexEnvelope::from_fn(grid.clone(), |t| {
        Complex64::new(sech(t + spec.t1) + sech(t - spec.t1), 0.0)
    })?;
    let v = ComplexEnvelope::from_fn(grid.clone(), |t| {
        Complex64::new(sech(t + spec.t1) - sech(t - spec.t1), 0.0)
    })?;
    Ok((u, v))
}

/// Linear-polarization component `E_x = (U + V) / sqrt(2)`.
pub fn linear_x_component(u: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    u.iter().zip(v).map(|(a, b)| (a + b) * s).collect()
}

/// Linear-polarization component `E_y = (U - V) / (i sqrt(2))`.
pub fn linear_y_component(u: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
    let s = Complex64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2); // 1/(i√2)
    u.iter().zip(v).map(|(a, b)| (a - b) * s).collect()
}

/// Pointwise Kerr phase rotation `u <- u exp(i h |u|²)`.
pub(crate) fn kerr_substep_scalar(u: &mut [Complex64], h: f64) {
    for x in u.iter_mut() {
        *x *= expi(h * x.norm_sqr());
    }
}

/// Coupled Kerr rotation: `u <- u exp(i h (A|u|² + B|v|²))` and symmetrically
/// for `v`. Both moduli are invariant, so the substep is exact.
pub(crate) fn kerr_substep_vector(
    u: &mut [Complex64],
    v: &mut [Complex64],
    a_coeff: f64,
    b_coeff: f64,
    h: f64,
) {
    for (x, y) in u.iter_mut().zip(v.iter_mut()) {
        let nu = x.norm_sqr();
        let nv = y.norm_sqr();
        *x *= expi(h * (a_coeff * nu + b_coeff * nv));
        *y *= expi(h * (a_coeff * nv + b_coeff * nu));
    }
}

/// Stored classical background along z.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    Scalar,
    Vector,
}

/// Boundary-energy breach recorded during propagation.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryBreach {
    pub z: f64,
    /// Worst boundary-to-peak intensity ratio observed.
    pub ratio: f64,
}

/// Checkpointed classical background: one snapshot per solver step, consumed
/// by the linearized propagator.
pub struct Trajectory {
    grid: Arc<TimeGrid>,
    step: f64,
    n_steps: usize,
    /// Length of the final step; equals `step` unless the target distance was
    /// not an integer number of steps.
    last_step: f64,
    kind: TrajectoryKind,
    a_coeff: f64,
    b_coeff: f64,
    /// Flat row-major snapshots, `(n_steps + 1) * n` samples.
    snapshots_u: Vec<Complex64>,
    snapshots_v: Vec<Complex64>,
    boundary_breach: Option<BoundaryBreach>,
}

impl Trajectory {
    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn kind(&self) -> TrajectoryKind {
        self.kind
    }

    pub fn is_vector(&self) -> bool {
        self.kind == TrajectoryKind::Vector
    }

    /// Self- and cross-phase coefficients (`(1, 0)` for the scalar equation).
    pub fn coefficients(&self) -> (f64, f64) {
        (self.a_coeff, self.b_coeff)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Length of solver step `k` (the final step may be shorter).
    pub fn step_len(&self, k: usize) -> f64 {
        if k + 1 == self.n_steps {
            self.last_step
        } else {
            self.step
        }
    }

    pub fn z_end(&self) -> f64 {
        if self.n_steps == 0 {
            0.0
        } else {
            (self.n_steps - 1) as f64 * self.step + self.last_step
        }
    }

    /// Propagation distance of snapshot `k`.
    pub fn z_at(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.z_end()
        } else {
            k as f64 * self.step
        }
    }

    /// Snapshot index for a distance `z`, which must be a stored checkpoint.
    pub fn index_of_z(&self, z: f64) -> Result<usize> {
        let k = (z / self.step).round();
        let idx = k as usize;
        if k >= 0.0 && idx <= self.n_steps && (self.z_at(idx) - z).abs() <= 1e-9 * z.abs().max(1.0)
        {
            Ok(idx)
        } else if (self.z_end() - z).abs() <= 1e-9 * z.abs().max(1.0) {
            Ok(self.n_steps)
        } else {
            Err(Error::CheckpointNotStored { z, step: self.step })
        }
    }

    pub fn snapshot_u(&self, k: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.snapshots_u[k * n..(k + 1) * n]
    }

    pub fn snapshot_v(&self, k: usize) -> Option<&[Complex64]> {
        if self.kind == TrajectoryKind::Scalar {
            return None;
        }
        let n = self.grid.len();
        Some(&self.snapshots_v[k * n..(k + 1) * n])
    }

    pub fn boundary_breach(&self) -> Option<BoundaryBreach> {
        self.boundary_breach
    }

    /// Conserved quantities of snapshot `k`.
    pub fn conserved_at(&self, k: usize) -> ConservedQuantities {
        match self.kind {
            TrajectoryKind::Scalar => {
                conserved_on_grid(&self.grid, self.snapshot_u(k), None, 1.0, 0.0)
            }
            TrajectoryKind::Vector => conserved_on_grid(
                &self.grid,
                self.snapshot_u(k),
                self.snapshot_v(k),
                self.a_coeff,
                self.b_coeff,
            ),
        }
    }
}

struct StepPlan {
    n_steps: usize,
    last_step: f64,
}

fn plan_steps(z_target: f64, step: f64) -> Result<StepPlan> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "z step must be positive and finite, got {step}"
        )));
    }
    if z_target < 0.0 || !z_target.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "target distance must be non-negative and finite, got {z_target}"
        )));
    }
    if z_target == 0.0 {
        return Ok(StepPlan {
            n_steps: 0,
            last_step: step,
        });
    }
    let ratio = z_target / step;
    let rounded = ratio.round();
    if (rounded * step - z_target).abs() <= 1e-9 * z_target.max(1.0) && rounded >= 1.0 {
        Ok(StepPlan {
            n_steps: rounded as usize,
            last_step: step,
        })
    } else {
        let full = ratio.floor() as usize;
        Ok(StepPlan {
            n_steps: full + 1,
            last_step: z_target - full as f64 * step,
        })
    }
}

struct BoundaryMonitor {
    worst_ratio: f64,
    first_z: f64,
}

impl BoundaryMonitor {
    fn new() -> Self {
        BoundaryMonitor {
            worst_ratio: 0.0,
            first_z: 0.0,
        }
    }

    fn check(&mut self, z: f64, fields: &[&[Complex64]]) -> Result<()> {
        let mut peak = 0.0f64;
        let mut edge = 0.0f64;
        let mut finite = true;
        for f in fields {
            for v in f.iter() {
                let m = v.norm_sqr();
                if !m.is_finite() {
                    finite = false;
                }
                peak = peak.max(m);
            }
            edge = edge.max(f[0].norm_sqr()).max(f[f.len() - 1].norm_sqr());
        }
        if !finite {
            return Err(Error::NumericalBreach { z });
        }
        if peak > 0.0 {
            let ratio = edge / peak;
            if ratio > BOUNDARY_ENERGY_THRESHOLD && ratio > self.worst_ratio {
                if self.worst_ratio == 0.0 {
                    self.first_z = z;
                }
                self.worst_ratio = ratio;
            }
        }
        Ok(())
    }

    fn breach(&self) -> Option<BoundaryBreach> {
        (self.worst_ratio > 0.0).then_some(BoundaryBreach {
            z: self.first_z,
            ratio: self.worst_ratio,
        })
    }
}

/// Integrate the scalar equation `i U_z + U_tt/2 + |U|² U = 0` up to
/// `z_target`, storing a snapshot after every step.
pub fn propagate_scalar(
    field: &ComplexEnvelope,
    z_target: f64,
    step: f64,
) -> Result<Trajectory> {
    let grid = field.grid().clone();
    let plan = plan_steps(z_target, step)?;
    let n = grid.len();

    let mut snapshots = Vec::with_capacity((plan.n_steps + 1) * n);
    snapshots.extend_from_slice(field.samples());

    let mut buf = field.samples().to_vec();
    let mut scratch = FftScratch::default();
    let half_disp = grid.dispersion_phases(0.5 * step);
    let half_disp_last = if plan.last_step != step {
        Some(grid.dispersion_phases(0.5 * plan.last_step))
    } else {
        None
    };
    let mut monitor = BoundaryMonitor::new();
    monitor.check(0.0, &[&buf])?;

    for k in 0..plan.n_steps {
        let h = if k + 1 == plan.n_steps {
            plan.last_step
        } else {
            step
        };
        let disp = half_disp_last
            .as_ref()
            .filter(|_| k + 1 == plan.n_steps)
            .unwrap_or(&half_disp);

        apply_dispersion(&grid, &mut buf, disp, &mut scratch);
        kerr_substep_scalar(&mut buf, h);
        apply_dispersion(&grid, &mut buf, disp, &mut scratch);
        snapshots.extend_from_slice(&buf);

        if (k + 1) % MONITOR_STRIDE == 0 || k + 1 == plan.n_steps {
            monitor.check((k + 1) as f64 * step, &[&buf])?;
        }
    }

    Ok(Trajectory {
        grid,
        step,
        n_steps: plan.n_steps,
        last_step: plan.last_step,
        kind: TrajectoryKind::Scalar,
        a_coeff: 1.0,
        b_coeff: 0.0,
        snapshots_u: snapshots,
        snapshots_v: Vec::new(),
        boundary_breach: monitor.breach(),
    })
}

/// Integrate the coupled equations
/// `i U_z + U_tt/2 + (A|U|² + B|V|²) U = 0` (and symmetrically for `V`)
/// up to `z_target`.
pub fn propagate_vector(
    u: &ComplexEnvelope,
    v: &ComplexEnvelope,
    z_target: f64,
    step: f64,
    spec: &VectorPairSpec,
) -> Result<Trajectory> {
    let grid = u.grid().clone();
    if !grid.same_discretization(v.grid()) {
        return Err(Error::GridMismatch(
            "vector components live on different grids".into(),
        ));
    }
    let plan = plan_steps(z_target, step)?;
    let n = grid.len();

    let mut snaps_u = Vec::with_capacity((plan.n_steps + 1) * n);
    let mut snaps_v = Vec::with_capacity((plan.n_steps + 1) * n);
    snaps_u.extend_from_slice(u.samples());
    snaps_v.extend_from_slice(v.samples());

    let mut bu = u.samples().to_vec();
    let mut bv = v.samples().to_vec();
    let mut scratch = FftScratch::default();
    let half_disp = grid.dispersion_phases(0.5 * step);
    let half_disp_last = if plan.last_step != step {
        Some(grid.dispersion_phases(0.5 * plan.last_step))
    } else {
        None
    };
    let mut monitor = BoundaryMonitor::new();
    monitor.check(0.0, &[&bu, &bv])?;

    for k in 0..plan.n_steps {
        let h = if k + 1 == plan.n_steps {
            plan.last_step
        } else {
            step
        };
        let disp = half_disp_last
            .as_ref()
            .filter(|_| k + 1 == plan.n_steps)
            .unwrap_or(&half_disp);

        apply_dispersion(&grid, &mut bu, disp, &mut scratch);
        apply_dispersion(&grid, &mut bv, disp, &mut scratch);
        kerr_substep_vector(&mut bu, &mut bv, spec.a_coeff, spec.b_coeff, h);
        apply_dispersion(&grid, &mut bu, disp, &mut scratch);
        apply_dispersion(&grid, &mut bv, disp, &mut scratch);
        snaps_u.extend_from_slice(&bu);
        snaps_v.extend_from_slice(&bv);

        if (k + 1) % MONITOR_STRIDE == 0 || k + 1 == plan.n_steps {
            monitor.check((k + 1) as f64 * step, &[&bu, &bv])?;
        }
    }

    Ok(Trajectory {
        grid,
        step,
        n_steps: plan.n_steps,
        last_step: plan.last_step,
        kind: TrajectoryKind::Vector,
        a_coeff: spec.a_coeff,
        b_coeff: spec.b_coeff,
        snapshots_u: snaps_u,
        snapshots_v: snaps_v,
        boundary_breach: monitor.breach(),
    })
}

pub(crate) fn apply_dispersion(
    grid: &TimeGrid,
    buf: &mut [Complex64],
    phases: &[Complex64],
    scratch: &mut FftScratch,
) {
    grid.forward(buf, scratch);
    for (v, p) in buf.iter_mut().zip(phases) {
        *v *= p;
    }
    grid.inverse(buf, scratch);
}

/// Photon number, momentum and Hamiltonian of a field configuration.
#[derive(Debug, Clone, Copy)]
pub struct ConservedQuantities {
    /// `Σ |u|² dt` (first component).
    pub photon_number: f64,
    /// `Σ |v|² dt` for the second component, when present.
    pub photon_number_v: Option<f64>,
    /// `Im Σ conj(u) u_t dt`, evaluated spectrally.
    pub momentum: f64,
    /// `∫ [ (|U_t|² + |V_t|²)/2 - A(|U|⁴ + |V|⁴)/2 - B |U|²|V|² ] dt`
    /// (scalar case: A = 1, B = 0, no V).
    pub hamiltonian: f64,
}

fn conserved_on_grid(
    grid: &TimeGrid,
    u: &[Complex64],
    v: Option<&[Complex64]>,
    a_coeff: f64,
    b_coeff: f64,
) -> ConservedQuantities {
    let dt = grid.dt();
    let n = grid.len() as f64;
    let mut scratch = FftScratch::default();

    let mut spec_mom = 0.0;
    let mut spec_kin = 0.0;
    let mut spectral = |f: &[Complex64]| {
        let mut buf = f.to_vec();
        grid.forward(&mut buf, &mut scratch);
        for (c, &w) in buf.iter().zip(grid.omega()) {
            let m = c.norm_sqr();
            spec_mom += w * m;
            spec_kin += w * w * m;
        }
    };
    spectral(u);
    if let Some(v) = v {
        spectral(v);
    }
    let momentum = spec_mom * dt / n;
    let kinetic = 0.5 * spec_kin * dt / n;

    let photon_number = u.iter().map(|x| x.norm_sqr()).sum::<f64>() * dt;
    let photon_number_v = v.map(|v| v.iter().map(|x| x.norm_sqr()).sum::<f64>() * dt);

    let mut quartic = u.iter().map(|x| x.norm_sqr().powi(2)).sum::<f64>();
    let mut cross = 0.0;
    if let Some(v) = v {
        quartic += v.iter().map(|x| x.norm_sqr().powi(2)).sum::<f64>();
        cross = u
            .iter()
            .zip(v)
            .map(|(x, y)| x.norm_sqr() * y.norm_sqr())
            .sum::<f64>();
    }
    let hamiltonian = kinetic - 0.5 * a_coeff * quartic * dt - b_coeff * cross * dt;

    ConservedQuantities {
        photon_number,
        photon_number_v,
        momentum,
        hamiltonian,
    }
}

/// Conserved quantities of a scalar field.
pub fn conserved_quantities(u: &ComplexEnvelope) -> ConservedQuantities {
    conserved_on_grid(u.grid(), u.samples(), None, 1.0, 0.0)
}

/// Conserved quantities of a two-component field.
pub fn conserved_quantities_vector(
    u: &ComplexEnvelope,
    v: &ComplexEnvelope,
    spec: &VectorPairSpec,
) -> Result<ConservedQuantities> {
    if !u.grid().same_discretization(v.grid()) {
        return Err(Error::GridMismatch(
            "vector components live on different grids".into(),
        ));
    }
    Ok(conserved_on_grid(
        u.grid(),
        u.samples(),
        Some(v.samples()),
        spec.a_coeff,
        spec.b_coeff,
    ))
}

/// Indices of the two largest local intensity maxima, ordered left to right.
/// Ties break toward larger `|t|`. Returns `None` when fewer than two peaks
/// stand above `1e-3` of the global maximum (merged pulses).
pub fn two_main_peaks(grid: &TimeGrid, intensity: &[f64]) -> Option<(usize, usize)> {
    let global = intensity.iter().cloned().fold(0.0, f64::max);
    if global <= 0.0 {
        return None;
    }
    let floor = 1e-3 * global;
    let n = intensity.len();
    let mut peaks: Vec<usize> = Vec::new();
    for j in 1..n - 1 {
        if intensity[j] >= floor && intensity[j] > intensity[j - 1] && intensity[j] >= intensity[j + 1]
        {
            peaks.push(j);
        }
    }
    if peaks.len() < 2 {
        return None;
    }
    // Two largest, breaking value ties toward larger |t|.
    peaks.sort_by(|&a, &b| {
        intensity[b]
            .partial_cmp(&intensity[a])
            .unwrap()
            .then_with(|| grid.t(b).abs().partial_cmp(&grid.t(a).abs()).unwrap())
    });
    let (p, q) = (peaks[0], peaks[1]);
    Some((p.min(q), p.max(q)))
}

/// Distance between the two main intensity peaks, when resolvable.
pub fn peak_separation(grid: &TimeGrid, intensity: &[f64]) -> Option<f64> {
    two_main_peaks(grid, intensity).map(|(l, r)| grid.t(r) - grid.t(l))
}

/// Index of the intensity minimum strictly between the two main peaks.
pub fn inter_peak_minimum(grid: &TimeGrid, intensity: &[f64]) -> Option<usize> {
    let (l, r) = two_main_peaks(grid, intensity)?;
    (l + 1..r).min_by(|&a, &b| intensity[a].partial_cmp(&intensity[b]).unwrap())
}

/// `Σ |u|⁴ dt`; a smooth scalar that oscillates with the two-soliton bound
/// state and is well defined even when the peaks merge.
pub fn quartic_power(samples: &[Complex64], dt: f64) -> f64 {
    samples.iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() * dt
}

/// `Σ_slot |f|² dt` over a sample range.
pub fn slot_energy(samples: &[Complex64], range: (usize, usize), dt: f64) -> f64 {
    samples[range.0..range.1]
        .iter()
        .map(|v| v.norm_sqr())
        .sum::<f64>()
        * dt
}
