//! Photon-number measurement functionals and correlation observables.
//!
//! # Discrete covariance
//!
//! Fluctuations enter at z = 0 in the coherent state about the classical
//! input: `⟨ΔÛ(0,t_j) ΔÛ†(0,t_k)⟩ = δ_jk / dt` (the discretized delta), all
//! other second moments zero, optionally scaled by the mean photon-number
//! scale `n₀`. For two Hermitian functionals back-propagated to z = 0 with
//! `plus` coefficients `p` and `q`, the symmetrized covariance reduces to
//!
//! ```text
//! cov(F, G) = n₀ dt Re Σ_comp Σ_j p_j conj(q_j)
//! ```
//!
//! (the `dt²` from the two integrals cancels one `1/dt` from the delta).
//! The imaginary part of the same contraction is `⟨[F̂, Ĝ]⟩ / 2i`, reported
//! as a diagnostic: the symmetrized real part is the observable joint
//! photodetection covariance.
//!
//! # Normal ordering and normalization
//!
//! For disjoint slots the commutator correction is diagonal:
//! `⟨:Δn̂_i Δn̂_j:⟩ = cov_ij - δ_ij n_i` with shot noise
//! `n_i = n₀ ∫_slot |U|² dt`. The correlation coefficient divides by the
//! full (non-ordered) variances, `C_ij = (cov_ij - δ_ij n_i) /
//! sqrt(cov_ii cov_jj)`, so `|C_ij| ≤ 1` off the diagonal.

use ndarray::Array2;
use num_complex::Complex64;

use crate::classical::{
    inter_peak_minimum, linear_x_component, slot_energy, Trajectory, TrajectoryKind,
};
use crate::error::Error;
use crate::grid::TimeGrid;
use crate::quantum::{backpropagate_batch, DoubledField, FieldPair};
use crate::Result;

/// Which photon number a functional measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldComponent {
    /// The single field of the scalar system.
    Scalar,
    /// First circular component `U` of the vector system.
    CompU,
    /// Second circular component `V` of the vector system.
    CompV,
    /// Linear polarization `E_x = (U + V)/sqrt(2)`.
    LinearX,
    /// Linear polarization `E_y = (U - V)/(i sqrt(2))`.
    LinearY,
    /// Total photon number (scalar field, or `n_U + n_V`).
    Total,
}

/// Ordered disjoint time slots, each an integer number of grid samples.
///
/// Nominal slot edges `t_lo + i Δt` are snapped to the nearest sample
/// boundary, so individual slots may hold different sample counts when `Δt`
/// is not a multiple of `dt`.
#[derive(Debug, Clone)]
pub struct SlotPartition {
    bounds: Vec<usize>,
    centers: Vec<f64>,
    width: f64,
}

impl SlotPartition {
    /// Partition `[t_lo, t_hi)` into slots of nominal width `width`.
    pub fn uniform(grid: &TimeGrid, t_lo: f64, t_hi: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !t_lo.is_finite() || !(t_hi > t_lo) {
            return Err(Error::InvalidParameter(format!(
                "bad slot partition: [{t_lo}, {t_hi}) width {width}"
            )));
        }
        if width < grid.dt() {
            return Err(Error::InvalidParameter(format!(
                "slot width {width} below grid spacing {}",
                grid.dt()
            )));
        }
        let n_slots = ((t_hi - t_lo) / width).round() as usize;
        let t0 = -grid.t_half_span();
        let mut bounds = Vec::with_capacity(n_slots + 1);
        for i in 0..=n_slots {
            let edge = t_lo + i as f64 * width;
            let j = ((edge - t0) / grid.dt()).round();
            if j < 0.0 || j > grid.len() as f64 {
                return Err(Error::InvalidParameter(format!(
                    "slot edge {edge} falls outside the grid window"
                )));
            }
            bounds.push(j as usize);
        }
        if bounds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "degenerate slot: edges snapped to the same sample".into(),
            ));
        }
        let centers = (0..n_slots)
            .map(|i| t_lo + (i as f64 + 0.5) * width)
            .collect();
        Ok(SlotPartition {
            bounds,
            centers,
            width,
        })
    }

    pub fn n_slots(&self) -> usize {
        self.centers.len()
    }

    pub fn slot_range(&self, i: usize) -> (usize, usize) {
        (self.bounds[i], self.bounds[i + 1])
    }

    /// Nominal slot centers (CSV header values).
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn width(&self) -> f64 {
        self.width
    }
}

/// Sample range for a time interval whose ends must land on sample
/// boundaries (within 1e-9 of a grid point).
pub fn aligned_interval(grid: &TimeGrid, t0: f64, t1: f64) -> Result<(usize, usize)> {
    let base = -grid.t_half_span();
    let snap = |t: f64| -> Result<usize> {
        let j = (t - base) / grid.dt();
        let r = j.round();
        if (j - r).abs() > 1e-9 || r < 0.0 || r > grid.len() as f64 {
            return Err(Error::MisalignedInterval(format!(
                "t = {t} is not on a sample boundary (dt = {})",
                grid.dt()
            )));
        }
        Ok(r as usize)
    };
    let a = snap(t0)?;
    let b = snap(t1)?;
    if a >= b {
        return Err(Error::MisalignedInterval(format!(
            "empty interval [{t0}, {t1})"
        )));
    }
    Ok((a, b))
}

/// Hermitian photon-number functional of `component` over a sample range,
/// anchored at checkpoint `z`: the coefficient of `ΔÛ` is the conjugate
/// classical field restricted to the slot (expressed in `(ΔU, ΔV)`
/// coordinates for the linear polarizations).
pub fn number_functional(
    traj: &Trajectory,
    z: f64,
    interval: (usize, usize),
    component: FieldComponent,
) -> Result<DoubledField> {
    let k = traj.index_of_z(z)?;
    number_functional_at_index(traj, k, interval, component)
}

pub(crate) fn number_functional_at_index(
    traj: &Trajectory,
    k: usize,
    interval: (usize, usize),
    component: FieldComponent,
) -> Result<DoubledField> {
    let grid = traj.grid().clone();
    let n = grid.len();
    let (a, b) = interval;
    if a >= b || b > n {
        return Err(Error::MisalignedInterval(format!(
            "sample range {a}..{b} outside grid of {n}"
        )));
    }
    let is_vector = traj.kind() == TrajectoryKind::Vector;
    let scalar_ok = matches!(component, FieldComponent::Scalar | FieldComponent::Total);
    if is_vector && scalar_ok && component == FieldComponent::Scalar {
        return Err(Error::GridMismatch(
            "scalar component requested on a vector trajectory".into(),
        ));
    }
    if !is_vector && !scalar_ok {
        return Err(Error::GridMismatch(
            "vector component requested on a scalar trajectory".into(),
        ));
    }

    let masked = |src: Vec<Complex64>| -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        out[a..b].copy_from_slice(&src[a..b]);
        out
    };
    let u = traj.snapshot_u(k);

    let pairs = match (component, is_vector) {
        (FieldComponent::Scalar | FieldComponent::Total, false) => {
            vec![FieldPair::hermitian(masked(
                u.iter().map(Complex64::conj).collect(),
            ))]
        }
        (FieldComponent::CompU, true) => vec![
            FieldPair::hermitian(masked(u.iter().map(Complex64::conj).collect())),
            FieldPair::zeros(n),
        ],
        (FieldComponent::CompV, true) => {
            let v = traj.snapshot_v(k).unwrap();
            vec![
                FieldPair::zeros(n),
                FieldPair::hermitian(masked(v.iter().map(Complex64::conj).collect())),
            ]
        }
        (FieldComponent::Total, true) => {
            let v = traj.snapshot_v(k).unwrap();
            vec![
                FieldPair::hermitian(masked(u.iter().map(Complex64::conj).collect())),
                FieldPair::hermitian(masked(v.iter().map(Complex64::conj).collect())),
            ]
        }
        (FieldComponent::LinearX, true) => {
            let v = traj.snapshot_v(k).unwrap();
            let ex = linear_x_component(u, v);
            // Δn̂_x = (1/2) ∫ [(U+V)(ΔÛ†+ΔV̂†) + conj(U+V)(ΔÛ+ΔV̂)]:
            // ΔÛ and ΔV̂ both carry conj(U+V)/2 = conj(E_x)/sqrt(2).
            let coeff: Vec<Complex64> = ex
                .iter()
                .map(|e| e.conj() * std::f64::consts::FRAC_1_SQRT_2)
                .collect();
            vec![
                FieldPair::hermitian(masked(coeff.clone())),
                FieldPair::hermitian(masked(coeff)),
            ]
        }
        (FieldComponent::LinearY, true) => {
            let v = traj.snapshot_v(k).unwrap();
            // Δn̂_y carries (conj(U) - conj(V))/2 on ΔÛ and the opposite sign
            // on ΔV̂.
            let coeff: Vec<Complex64> = u
                .iter()
                .zip(v)
                .map(|(x, y)| (x.conj() - y.conj()) * 0.5)
                .collect();
            let neg: Vec<Complex64> = coeff.iter().map(|c| -c).collect();
            vec![
                FieldPair::hermitian(masked(coeff)),
                FieldPair::hermitian(masked(neg)),
            ]
        }
        _ => unreachable!("component/trajectory combinations validated above"),
    };
    DoubledField::new(grid, pairs)
}

/// Complex covariance contraction of two z = 0 Hermitian functionals:
/// real part is the symmetrized covariance, imaginary part the commutator
/// diagnostic.
pub fn covariance_complex(f: &DoubledField, g: &DoubledField, n0: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in f.pairs().iter().zip(g.pairs()) {
        for j in 0..a.plus.len() {
            acc += a.plus[j] * b.plus[j].conj();
        }
    }
    acc * (n0 * f.grid().dt())
}

/// Symmetrized covariance of two z = 0 Hermitian functionals under the
/// coherent input state (see module docs for the discrete formula).
pub fn covariance(f: &DoubledField, g: &DoubledField, n0: f64) -> f64 {
    covariance_complex(f, g, n0).re
}

/// Slot partition plus the symmetric matrix of correlation coefficients.
#[derive(Debug, Clone)]
pub struct CorrelationMap {
    pub partition: SlotPartition,
    pub z: f64,
    /// Normalized coefficients `C_ij`.
    pub c: Array2<f64>,
    /// Raw symmetrized covariance matrix.
    pub cov: Array2<f64>,
    /// Per-slot shot noise `n_i`.
    pub shot: Vec<f64>,
    /// Slots with zero photon number, zeroed in `c`.
    pub mask: Vec<bool>,
    /// Largest commutator (imaginary) part seen during assembly.
    pub max_imag: f64,
}

impl CorrelationMap {
    /// Re-run the normalization stage with the covariance and shot noise
    /// multiplied by `factor` (the fluctuation scale enters both linearly,
    /// so `C` is invariant up to rounding).
    pub fn rescaled(&self, factor: f64) -> CorrelationMap {
        let cov = self.cov.mapv(|v| v * factor);
        let shot: Vec<f64> = self.shot.iter().map(|v| v * factor).collect();
        let (c, mask) = assemble_map(&cov, &shot);
        CorrelationMap {
            partition: self.partition.clone(),
            z: self.z,
            c,
            cov,
            shot,
            mask,
            max_imag: self.max_imag * factor,
        }
    }

    /// Largest `|C_ij|` with slot centers on opposite sides of `boundary`.
    pub fn max_inter_block(&self, boundary: f64) -> f64 {
        let centers = self.partition.centers();
        let mut worst = 0.0f64;
        for i in 0..centers.len() {
            for j in 0..centers.len() {
                if (centers[i] < boundary) != (centers[j] < boundary) {
                    worst = worst.max(self.c[(i, j)].abs());
                }
            }
        }
        worst
    }

    /// Largest `|C_ij|` between the two pulses' energy-carrying slots: one
    /// block of slots within `half_width` of the left pulse's energy peak,
    /// one around the right pulse's. Slots in the overlap valley between the
    /// pulses (whose tails carry both solitons) belong to neither block.
    pub fn max_inter_pulse(&self, half_width: f64) -> Option<f64> {
        let centers = self.partition.centers();
        let s = centers.len();
        let peak = |side_left: bool| -> Option<usize> {
            (0..s)
                .filter(|&i| (centers[i] < 0.0) == side_left)
                .max_by(|&a, &b| self.shot[a].partial_cmp(&self.shot[b]).unwrap())
        };
        let (pl, pr) = (peak(true)?, peak(false)?);
        if self.shot[pl] <= 0.0 || self.shot[pr] <= 0.0 {
            return None;
        }
        let mut worst = 0.0f64;
        for i in (0..s).filter(|&i| (centers[i] - centers[pl]).abs() <= half_width) {
            for j in (0..s).filter(|&j| (centers[j] - centers[pr]).abs() <= half_width) {
                worst = worst.max(self.c[(i, j)].abs());
            }
        }
        Some(worst)
    }
}

/// Slot-resolved photon-number correlation maps at several checkpoints; all
/// slot functionals back-propagate in one shared descending pass.
pub fn correlation_maps(
    traj: &Trajectory,
    zs: &[f64],
    partition: &SlotPartition,
    n0: f64,
) -> Result<Vec<CorrelationMap>> {
    if traj.kind() != TrajectoryKind::Scalar {
        return Err(Error::GridMismatch(
            "correlation maps are defined for the scalar system".into(),
        ));
    }
    let s = partition.n_slots();
    let mut items: Vec<(usize, DoubledField)> = Vec::with_capacity(s * zs.len());
    let mut indices = Vec::with_capacity(zs.len());
    for &z in zs {
        let k = traj.index_of_z(z)?;
        indices.push(k);
        for i in 0..s {
            items.push((
                k,
                number_functional_at_index(traj, k, partition.slot_range(i), FieldComponent::Scalar)?,
            ));
        }
    }
    let back = backpropagate_batch(&items, traj)?;

    let dt = traj.grid().dt();
    let mut out = Vec::with_capacity(zs.len());
    for (m, (&z, &k)) in zs.iter().zip(&indices).enumerate() {
        let block = &back[m * s..(m + 1) * s];
        let u = traj.snapshot_u(k);
        let shot: Vec<f64> = (0..s)
            .map(|i| n0 * slot_energy(u, partition.slot_range(i), dt))
            .collect();
        let mut cov = Array2::zeros((s, s));
        let mut max_imag = 0.0f64;
        for i in 0..s {
            for j in i..s {
                let v = covariance_complex(&block[i], &block[j], n0);
                cov[(i, j)] = v.re;
                cov[(j, i)] = v.re;
                max_imag = max_imag.max(v.im.abs());
            }
        }
        let (c, mask) = assemble_map(&cov, &shot);
        out.push(CorrelationMap {
            partition: partition.clone(),
            z,
            c,
            cov,
            shot,
            mask,
            max_imag,
        });
    }
    Ok(out)
}

/// Slot-resolved photon-number correlation map at checkpoint `z`.
pub fn correlation_map(
    traj: &Trajectory,
    z: f64,
    partition: &SlotPartition,
    n0: f64,
) -> Result<CorrelationMap> {
    Ok(correlation_maps(traj, &[z], partition, n0)?.pop().unwrap())
}

/// Diagonal shot-noise subtraction plus normalization; masked slots get
/// zeroed rows and columns.
fn assemble_map(cov: &Array2<f64>, shot: &[f64]) -> (Array2<f64>, Vec<bool>) {
    let s = shot.len();
    let mask: Vec<bool> = (0..s).map(|i| shot[i] == 0.0 || cov[(i, i)] <= 0.0).collect();
    let mut c = Array2::zeros((s, s));
    for i in 0..s {
        for j in i..s {
            let value = if mask[i] || mask[j] {
                0.0
            } else if i == j {
                (cov[(i, i)] - shot[i]) / cov[(i, i)]
            } else {
                cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt()
            };
            c[(i, j)] = value;
            c[(j, i)] = value;
        }
    }
    (c, mask)
}

/// Correlation parameter between two whole-soliton (or component) photon
/// numbers at one checkpoint.
#[derive(Debug, Clone, Copy)]
pub struct PairCorrelation {
    pub z: f64,
    pub c12: f64,
    /// Time splitting the two slots (`None` for component correlations).
    pub boundary: Option<f64>,
    /// True when the inter-peak minimum was unresolvable and the split fell
    /// back to t = 0.
    pub boundary_fallback: bool,
    pub cov_11: f64,
    pub cov_22: f64,
    pub cov_12: f64,
}

impl PairCorrelation {
    /// Re-run the normalization with all covariances scaled by `factor`.
    pub fn rescaled(&self, factor: f64) -> PairCorrelation {
        assemble_pair(
            self.z,
            self.boundary,
            self.boundary_fallback,
            self.cov_11 * factor,
            self.cov_22 * factor,
            self.cov_12 * factor,
        )
    }
}

fn assemble_pair(
    z: f64,
    boundary: Option<f64>,
    fallback: bool,
    cov_11: f64,
    cov_22: f64,
    cov_12: f64,
) -> PairCorrelation {
    let denom = cov_11 * cov_22;
    let c12 = if denom > 0.0 {
        cov_12 / denom.sqrt()
    } else {
        0.0
    };
    PairCorrelation {
        z,
        c12,
        boundary,
        boundary_fallback: fallback,
        cov_11,
        cov_22,
        cov_12,
    }
}

/// Weighted Hermitian number functional `plus_j = w_j conj(U_j)`.
fn weighted_scalar_functional(
    traj: &Trajectory,
    k: usize,
    weight: impl Fn(usize) -> f64,
) -> DoubledField {
    let u = traj.snapshot_u(k);
    let plus: Vec<Complex64> = u
        .iter()
        .enumerate()
        .map(|(j, v)| v.conj() * weight(j))
        .collect();
    DoubledField::new(traj.grid().clone(), vec![FieldPair::hermitian(plus)])
        .expect("weighted functional on the trajectory grid")
}

/// Split the window at the inter-peak intensity minimum (fallback t = 0)
/// and correlate the two half-line photon numbers.
///
/// The single boundary sample belongs to neither slot: it sits at the
/// intensity minimum, keeps the slots exactly disjoint (so `C_12 = 0` at
/// z = 0 holds to rounding) and makes the split exactly mirror-symmetric
/// for a symmetric pair.
pub fn pair_correlation(traj: &Trajectory, z: f64, n0: f64) -> Result<PairCorrelation> {
    Ok(pair_correlations(traj, &[z], n0)?.pop().unwrap())
}

/// [`pair_correlation`] at several checkpoints through one shared descent.
pub fn pair_correlations(traj: &Trajectory, zs: &[f64], n0: f64) -> Result<Vec<PairCorrelation>> {
    if traj.kind() != TrajectoryKind::Scalar {
        return Err(Error::GridMismatch(
            "pair correlation splits the scalar field; use \
             polarization_pair_correlation for the vector system"
                .into(),
        ));
    }
    let grid = traj.grid();
    let mut items = Vec::with_capacity(2 * zs.len());
    let mut splits = Vec::with_capacity(zs.len());
    for &z in zs {
        let k = traj.index_of_z(z)?;
        let u = traj.snapshot_u(k);
        let intensity: Vec<f64> = u.iter().map(|v| v.norm_sqr()).collect();
        let (b_idx, fallback) = match inter_peak_minimum(grid, &intensity) {
            Some(b) => (b, false),
            None => (grid.len() / 2, true),
        };
        splits.push((z, b_idx, fallback));
        items.push((
            k,
            weighted_scalar_functional(traj, k, |j| if j < b_idx { 1.0 } else { 0.0 }),
        ));
        items.push((
            k,
            weighted_scalar_functional(traj, k, |j| if j > b_idx { 1.0 } else { 0.0 }),
        ));
    }
    let back = backpropagate_batch(&items, traj)?;
    Ok(splits
        .iter()
        .enumerate()
        .map(|(m, &(z, b_idx, fallback))| {
            let (f1, f2) = (&back[2 * m], &back[2 * m + 1]);
            assemble_pair(
                z,
                Some(grid.t(b_idx)),
                fallback,
                covariance(f1, f1, n0),
                covariance(f2, f2, n0),
                covariance(f1, f2, n0),
            )
        })
        .collect())
}

/// Finite-window variant: correlate photon numbers in windows of
/// `half_width` around each intensity peak instead of half-lines. Falls back
/// to the half-line split when the peaks are unresolvable.
pub fn pair_correlation_windowed(
    traj: &Trajectory,
    z: f64,
    n0: f64,
    half_width: f64,
) -> Result<PairCorrelation> {
    if traj.kind() != TrajectoryKind::Scalar {
        return Err(Error::GridMismatch(
            "pair correlation splits the scalar field".into(),
        ));
    }
    if !(half_width > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "window half-width must be positive, got {half_width}"
        )));
    }
    let grid = traj.grid();
    let k = traj.index_of_z(z)?;
    let u = traj.snapshot_u(k);
    let intensity: Vec<f64> = u.iter().map(|v| v.norm_sqr()).collect();
    let Some((l, r)) = crate::classical::two_main_peaks(grid, &intensity) else {
        return pair_correlation(traj, z, n0);
    };
    let w = (half_width / grid.dt()).round() as usize;
    let n = grid.len();
    let slot = |p: usize| (p.saturating_sub(w), (p + w + 1).min(n));
    let (a1, b1) = slot(l);
    let (a2, b2) = slot(r);
    if b1 > a2 {
        // Overlapping windows: treat as unresolvable.
        return pair_correlation(traj, z, n0);
    }
    let f1 = number_functional_at_index(traj, k, (a1, b1), FieldComponent::Scalar)?;
    let f2 = number_functional_at_index(traj, k, (a2, b2), FieldComponent::Scalar)?;
    let back = backpropagate_batch(&[(k, f1), (k, f2)], traj)?;
    Ok(assemble_pair(
        z,
        Some(0.5 * (grid.t(b1 - 1) + grid.t(a2))),
        false,
        covariance(&back[0], &back[0], n0),
        covariance(&back[1], &back[1], n0),
        covariance(&back[0], &back[1], n0),
    ))
}

/// Photon-number correlation between the linear polarization components
/// over `interval` (whole window by default).
pub fn polarization_pair_correlation_in(
    traj: &Trajectory,
    z: f64,
    n0: f64,
    interval: (usize, usize),
) -> Result<PairCorrelation> {
    Ok(polarization_pair_correlations_in(traj, &[z], n0, interval)?
        .pop()
        .unwrap())
}

/// [`polarization_pair_correlation_in`] at several checkpoints through one
/// shared descent.
pub fn polarization_pair_correlations_in(
    traj: &Trajectory,
    zs: &[f64],
    n0: f64,
    interval: (usize, usize),
) -> Result<Vec<PairCorrelation>> {
    let mut items = Vec::with_capacity(2 * zs.len());
    for &z in zs {
        let k = traj.index_of_z(z)?;
        items.push((
            k,
            number_functional_at_index(traj, k, interval, FieldComponent::LinearX)?,
        ));
        items.push((
            k,
            number_functional_at_index(traj, k, interval, FieldComponent::LinearY)?,
        ));
    }
    let back = backpropagate_batch(&items, traj)?;
    Ok(zs
        .iter()
        .enumerate()
        .map(|(m, &z)| {
            let (fx, fy) = (&back[2 * m], &back[2 * m + 1]);
            assemble_pair(
                z,
                None,
                false,
                covariance(fx, fx, n0),
                covariance(fy, fy, n0),
                covariance(fx, fy, n0),
            )
        })
        .collect())
}

/// Whole-window x/y polarization photon-number correlation.
pub fn polarization_pair_correlation(
    traj: &Trajectory,
    z: f64,
    n0: f64,
) -> Result<PairCorrelation> {
    polarization_pair_correlation_in(traj, z, n0, (0, traj.grid().len()))
}

/// Representative functionals at checkpoint `z` paired with their
/// back-propagated form — inputs for Green-matrix cross-checks. Scalar
/// trajectories contribute coarse equal slots; vector trajectories the four
/// component photon numbers.
pub fn oracle_support_functionals(
    traj: &Trajectory,
    z: f64,
    n_slots: usize,
) -> Result<Vec<(DoubledField, DoubledField)>> {
    let k = traj.index_of_z(z)?;
    let n = traj.grid().len();
    let functionals: Vec<DoubledField> = match traj.kind() {
        TrajectoryKind::Scalar => {
            let slots = n_slots.clamp(1, n);
            (0..slots)
                .map(|i| {
                    let a = i * n / slots;
                    let b = (i + 1) * n / slots;
                    number_functional_at_index(traj, k, (a, b), FieldComponent::Scalar)
                })
                .collect::<Result<_>>()?
        }
        TrajectoryKind::Vector => [
            FieldComponent::CompU,
            FieldComponent::CompV,
            FieldComponent::LinearX,
            FieldComponent::LinearY,
        ]
        .into_iter()
        .map(|c| number_functional_at_index(traj, k, (0, n), c))
        .collect::<Result<_>>()?,
    };
    let items: Vec<(usize, DoubledField)> = functionals.iter().map(|f| (k, f.clone())).collect();
    let back = backpropagate_batch(&items, traj)?;
    Ok(functionals.into_iter().zip(back).collect())
}

/// Variance of the total photon number at checkpoint `z`; z-invariant for
/// the exact linearized flow.
pub fn total_number_variance(traj: &Trajectory, z: f64, n0: f64) -> Result<f64> {
    let k = traj.index_of_z(z)?;
    let n = traj.grid().len();
    let f = number_functional_at_index(traj, k, (0, n), FieldComponent::Total)?;
    let back = backpropagate_batch(&[(k, f)], traj)?;
    Ok(covariance(&back[0], &back[0], n0))
}

/// Smallest eigenvalue of a symmetric matrix (cyclic Jacobi sweeps).
pub fn min_eigenvalue_symmetric(mat: &Array2<f64>) -> f64 {
    let n = mat.nrows();
    assert_eq!(n, mat.ncols());
    let mut a = mat.clone();
    let diag_scale: f64 = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    for _sweep in 0..50 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(a[(p, q)].abs());
            }
        }
        if off < 1e-13 * diag_scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let tau = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[(i, i)]).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{
        init_scalar_pair, init_vector_pair, propagate_scalar, propagate_vector, SolitonPairSpec,
        VectorPairSpec,
    };
    use crate::field::ComplexEnvelope;
    use crate::grid::TimeGrid;
    use crate::quantum::build_green_matrix;
    use std::f64::consts::FRAC_PI_2;
    use std::sync::Arc;

    fn grid(n: usize, span: f64) -> Arc<TimeGrid> {
        TimeGrid::new(n, span).unwrap()
    }

    fn pair_traj(g: &Arc<TimeGrid>, z: f64) -> Trajectory {
        let spec = SolitonPairSpec::new(1.0, FRAC_PI_2, 3.5).unwrap();
        let u = init_scalar_pair(&spec, g).unwrap();
        propagate_scalar(&u, z, 1e-3).unwrap()
    }

    #[test]
    fn whole_window_functional_is_number_direction() {
        let g = grid(256, 16.0);
        let u = ComplexEnvelope::from_fn(g.clone(), |t| {
            Complex64::new(1.0 / t.cosh(), 0.0) * Complex64::from_polar(1.0, 0.2 * t)
        })
        .unwrap();
        let traj = propagate_scalar(&u, 0.0, 1e-3).unwrap();
        let f =
            number_functional(&traj, 0.0, (0, g.len()), FieldComponent::Scalar).unwrap();
        for j in 0..g.len() {
            assert_eq!(f.pairs()[0].plus[j], u.samples()[j].conj());
            assert_eq!(f.pairs()[0].minus[j], u.samples()[j]);
        }
    }

    #[test]
    fn tail_slot_functional_vanishes() {
        let g = grid(256, 16.0);
        let u = ComplexEnvelope::from_fn(g.clone(), |t| Complex64::new(1.0 / t.cosh(), 0.0))
            .unwrap();
        let traj = propagate_scalar(&u, 0.0, 1e-3).unwrap();
        let tail = aligned_interval(&g, -16.0, -13.0).unwrap();
        let f = number_functional(&traj, 0.0, tail, FieldComponent::Scalar).unwrap();
        let norm: f64 = f.pairs()[0].plus.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(norm < 1e-5);
        let var = covariance(&f, &f, 1.0);
        assert!(var < 1e-9, "tail-slot variance {var}");
    }

    #[test]
    fn coherent_pulse_shot_noise() {
        // Variance of the total photon number of a coherent sech pulse is its
        // mean: Σ|U|² dt = 2.
        let g = grid(1024, 20.0);
        let u = ComplexEnvelope::from_fn(g.clone(), |t| Complex64::new(1.0 / t.cosh(), 0.0))
            .unwrap();
        let traj = propagate_scalar(&u, 0.0, 1e-3).unwrap();
        let f =
            number_functional(&traj, 0.0, (0, g.len()), FieldComponent::Scalar).unwrap();
        let var = covariance(&f, &f, 1.0);
        assert!((var - 2.0).abs() < 1e-8, "shot noise {var}");
    }

    #[test]
    fn disjoint_functionals_are_uncorrelated() {
        let g = grid(512, 20.0);
        let traj = pair_traj(&g, 0.0);
        let left = number_functional(&traj, 0.0, (0, g.len() / 2), FieldComponent::Scalar)
            .unwrap();
        let right =
            number_functional(&traj, 0.0, (g.len() / 2, g.len()), FieldComponent::Scalar)
                .unwrap();
        assert_eq!(covariance(&left, &right, 1.0), 0.0);
    }

    #[test]
    fn map_at_z_zero_is_uncorrelated_coherent_noise() {
        let g = grid(512, 20.0);
        let traj = pair_traj(&g, 0.0);
        let part = SlotPartition::uniform(&g, -8.0, 8.0, 0.5).unwrap();
        let map = correlation_map(&traj, 0.0, &part, 1.0).unwrap();
        let worst = map.c.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "max |C| at z=0 is {worst}");
    }

    #[test]
    fn map_is_symmetric_and_bounded() {
        let g = grid(256, 20.0);
        let traj = pair_traj(&g, 1.0);
        let part = SlotPartition::uniform(&g, -8.0, 8.0, 1.0).unwrap();
        let map = correlation_map(&traj, 1.0, &part, 1.0).unwrap();
        let s = part.n_slots();
        for i in 0..s {
            for j in 0..s {
                assert_eq!(map.c[(i, j)], map.c[(j, i)]);
                if i != j {
                    assert!(map.c[(i, j)].abs() <= 1.0 + 1e-9);
                }
            }
            assert!(map.c[(i, i)] <= 1.0 + 1e-9);
        }
        // Raw covariance is a Gram matrix: PSD up to rounding.
        let trace: f64 = (0..s).map(|i| map.cov[(i, i)]).sum();
        let min_eig = min_eigenvalue_symmetric(&map.cov);
        assert!(min_eig > -1e-8 * trace, "min eigenvalue {min_eig}");
    }

    #[test]
    fn covariance_matches_green_matrix_oracle() {
        let g = grid(128, 20.0);
        let traj = pair_traj(&g, 2.0);
        let green = build_green_matrix(&traj).unwrap();
        let part = SlotPartition::uniform(&g, -8.0, 8.0, 4.0).unwrap();
        let k = traj.index_of_z(2.0).unwrap();
        let functionals: Vec<DoubledField> = (0..part.n_slots())
            .map(|i| {
                number_functional_at_index(&traj, k, part.slot_range(i), FieldComponent::Scalar)
                    .unwrap()
            })
            .collect();
        let items: Vec<(usize, DoubledField)> =
            functionals.iter().map(|f| (k, f.clone())).collect();
        let fast = backpropagate_batch(&items, &traj).unwrap();
        for i in 0..functionals.len() {
            for j in 0..functionals.len() {
                let direct = covariance(&fast[i], &fast[j], 1.0);
                let oracle = covariance(
                    &green.transpose_apply(&functionals[i]),
                    &green.transpose_apply(&functionals[j]),
                    1.0,
                );
                assert!(
                    (direct - oracle).abs() <= 1e-9 * oracle.abs().max(1e-12),
                    "cov[{i},{j}]: {direct} vs oracle {oracle}"
                );
            }
        }
    }

    #[test]
    fn pair_correlation_vanishes_at_input() {
        let g = grid(512, 20.0);
        let traj = pair_traj(&g, 0.0);
        let pc = pair_correlation(&traj, 0.0, 1.0).unwrap();
        assert!(pc.c12.abs() < 1e-9);
        assert!(!pc.boundary_fallback);
        assert!(pc.boundary.unwrap().abs() < 2.0 * g.dt());
        // Symmetric pair: equal variances.
        assert!((pc.cov_11 - pc.cov_22).abs() / pc.cov_11 < 1e-6);
    }

    #[test]
    fn windowed_pair_mode_matches_halfline_qualitatively() {
        let g = grid(256, 16.0);
        let traj = pair_traj(&g, 0.0);
        // Disjoint peak windows at z = 0: exactly uncorrelated.
        let pc = pair_correlation_windowed(&traj, 0.0, 1.0, 2.0).unwrap();
        assert_eq!(pc.c12, 0.0);
        assert!(!pc.boundary_fallback);
        assert!(pc.c12.abs() <= 1.0 + 1e-9);
        // Overlapping windows fall back to the half-line split.
        let wide = pair_correlation_windowed(&traj, 0.0, 1.0, 12.0).unwrap();
        assert!(wide.boundary.is_some());
    }

    #[test]
    fn merged_pulses_fall_back_to_symmetry_point() {
        let g = grid(256, 16.0);
        let spec = SolitonPairSpec::new(1.0, 0.0, 0.0).unwrap();
        let u = init_scalar_pair(&spec, &g).unwrap();
        let traj = propagate_scalar(&u, 0.1, 1e-3).unwrap();
        let pc = pair_correlation(&traj, 0.1, 1.0).unwrap();
        assert!(pc.boundary_fallback);
        assert_eq!(pc.boundary.unwrap(), 0.0);
    }

    #[test]
    fn total_number_variance_is_z_invariant() {
        let g = grid(256, 16.0);
        let traj = pair_traj(&g, 2.0);
        let n0_mean = traj.conserved_at(0).photon_number;
        for z in [0.0, 1.0, 2.0] {
            let var = total_number_variance(&traj, z, 1.0).unwrap();
            assert!(
                (var - n0_mean).abs() / n0_mean < 1e-6,
                "total variance {var} vs mean {n0_mean} at z = {z}"
            );
        }
    }

    #[test]
    fn fluctuation_scale_cancels_bitwise() {
        let g = grid(128, 16.0);
        let traj = pair_traj(&g, 1.0);
        let part = SlotPartition::uniform(&g, -8.0, 8.0, 2.0).unwrap();
        let reference = correlation_map(&traj, 1.0, &part, 1.0).unwrap();
        for n0 in [0.5, 2.0] {
            let scaled = correlation_map(&traj, 1.0, &part, n0).unwrap();
            let worst = reference
                .c
                .iter()
                .zip(scaled.c.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(worst < 1e-12, "scale {n0} shifted C by {worst}");
        }
    }

    #[test]
    fn polarization_correlation_is_zero_at_input() {
        let g = grid(256, 16.0);
        let spec = VectorPairSpec::new(3.5, 1.0, 2.0).unwrap();
        let (u, v) = init_vector_pair(&spec, &g).unwrap();
        let traj = propagate_vector(&u, &v, 0.0, 1e-3, &spec).unwrap();
        let pc = polarization_pair_correlation(&traj, 0.0, 1.0).unwrap();
        assert!(pc.c12.abs() < 1e-9, "C_xy(0) = {}", pc.c12);
        // x functional lives on the left pulse at z = 0.
        let k = 0;
        let fx =
            number_functional_at_index(&traj, k, (0, g.len()), FieldComponent::LinearX).unwrap();
        let peak_j = (0..g.len())
            .max_by(|&a, &b| {
                fx.pairs()[0].plus[a]
                    .norm()
                    .partial_cmp(&fx.pairs()[0].plus[b].norm())
                    .unwrap()
            })
            .unwrap();
        assert_eq!(peak_j, g.index_of_t(-3.5));
    }

    #[test]
    fn decoupled_silent_component_is_uncorrelated() {
        // B = 0 and V ≡ 0: the V photon-number functional is identically
        // zero, so its covariance with anything is exactly zero.
        let g = grid(128, 16.0);
        let u0 = ComplexEnvelope::from_fn(g.clone(), |t| Complex64::new(1.0 / t.cosh(), 0.0))
            .unwrap();
        let v0 = ComplexEnvelope::from_fn(g.clone(), |_| Complex64::new(0.0, 0.0)).unwrap();
        let spec = VectorPairSpec::new(0.0, 1.0, 0.0).unwrap();
        let traj = propagate_vector(&u0, &v0, 0.5, 1e-3, &spec).unwrap();
        let k = traj.index_of_z(0.5).unwrap();
        let fu = number_functional_at_index(&traj, k, (0, g.len()), FieldComponent::CompU)
            .unwrap();
        let fv = number_functional_at_index(&traj, k, (0, g.len()), FieldComponent::CompV)
            .unwrap();
        let back = backpropagate_batch(&[(k, fu), (k, fv)], &traj).unwrap();
        assert_eq!(covariance(&back[0], &back[1], 1.0), 0.0);
    }

    #[test]
    fn misaligned_interval_is_rejected() {
        let g = grid(256, 16.0);
        // dt = 0.125; 0.3 is not a sample boundary.
        assert!(matches!(
            aligned_interval(&g, 0.0, 0.3),
            Err(Error::MisalignedInterval(_))
        ));
        assert!(aligned_interval(&g, 0.0, 0.25).is_ok());
        assert!(aligned_interval(&g, 0.25, 0.25).is_err());
    }

    #[test]
    fn slot_partition_snaps_to_samples() {
        let g = grid(1024, 20.0);
        let part = SlotPartition::uniform(&g, -8.0, 8.0, 0.1).unwrap();
        assert_eq!(part.n_slots(), 160);
        let mut samples = 0;
        for i in 0..part.n_slots() {
            let (a, b) = part.slot_range(i);
            assert!(b > a);
            samples += b - a;
            // 0.1 / dt = 2.56: slots hold 2 or 3 samples.
            assert!((2..=3).contains(&(b - a)));
        }
        let (first, _) = part.slot_range(0);
        let (_, last) = part.slot_range(part.n_slots() - 1);
        assert_eq!(samples, last - first);
        assert!(SlotPartition::uniform(&g, -8.0, 8.0, 0.01).is_err());
    }

    #[test]
    fn jacobi_eigenvalues_on_known_matrix() {
        let m = ndarray::array![[2.0, 1.0, 0.0], [1.0, 2.0, 1.0], [0.0, 1.0, 2.0]];
        // Eigenvalues 2 - sqrt(2), 2, 2 + sqrt(2).
        let min = min_eigenvalue_symmetric(&m);
        assert!((min - (2.0 - 2f64.sqrt())).abs() < 1e-10);
    }
}
