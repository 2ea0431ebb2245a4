//! Linearized quantum fluctuations around a stored classical trajectory.
//!
//! # Doubled fields
//!
//! A fluctuation state or a measurement functional is represented by its
//! coefficient pair on the grid: `plus` multiplies the annihilation part
//! `ΔÛ(t_j)` and `minus` the creation part `ΔÛ†(t_j)`. A measurement
//! functional `Ô = Σ_j [plus_j ΔÛ(t_j) + minus_j ΔÛ†(t_j)] dt` is Hermitian
//! exactly when `minus = conj(plus)` pointwise. For the two-component system
//! the type carries one such pair per polarization component.
//!
//! # Linearized evolution
//!
//! Around a scalar background `U(z, t)` the fluctuation obeys
//! `i ∂_z ΔU + ΔU_tt/2 + 2|U|² ΔU + U² ΔU† = 0` together with its conjugate,
//! and the analogous four-component system holds around a two-component
//! background. The propagator mirrors the classical split exactly: spectral
//! dispersion half-steps (phases `exp(∓i ω² h/4)` on `plus`/`minus`), and a
//! pointwise Kerr-linearization substep. The Kerr substep uses the classical
//! field at the substep point (`U` after the leading dispersion half-step,
//! recomputed from the stored snapshot) and applies the exact tangent map of
//! the classical Kerr rotation,
//!
//! ```text
//! plus'  =  e^{+iφ} [ (1 + i h n) plus + i h U² minus ],   n = |U|², φ = h n,
//! minus' =  e^{-iφ} [ (1 - i h n) minus - i h conj(U)² plus ],
//! ```
//!
//! which satisfies `|P|² - |Q|² = 1` identically, so the full step is an
//! exact Bogoliubov map and the linearized flow is the exact derivative of
//! the classical splitting scheme. Photon-number overlaps and commutators
//! are therefore preserved to rounding, not merely to the splitting order.
//!
//! # Back-propagation and the pairing convention
//!
//! The bilinear pairing used throughout is
//! `⟨f, w⟩ = Σ_comp Σ_j (f.plus w.plus + f.minus w.minus) dt` (no
//! conjugation): it is exactly how a functional is evaluated on a field.
//! [`backpropagate_functional`] returns `f0` with
//! `⟨f0, w⟩ = ⟨fL, forward(w)⟩` for every state `w`, i.e. the transpose of
//! the forward map in this pairing, applied substep by substep in reverse
//! order (discrete adjoint). In the standard transform basis the dispersion
//! substep is a circulant with even symbol and hence its own transpose; the
//! pointwise substeps are transposed explicitly. Equivalently, for a
//! functional expanded in the dual basis the dispersion phases appear
//! conjugated — the convention here fixes the sample-basis form.
//!
//! Hermiticity (`minus = conj(plus)`) is preserved by every adjoint substep,
//! so back-propagation tracks only the `plus` coefficients and reconstructs
//! `minus` at the end.

use std::sync::Arc;

use ndarray::{s, Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::classical::{apply_dispersion, expi, Trajectory, TrajectoryKind};
use crate::error::Error;
use crate::grid::{FftScratch, TimeGrid};
use crate::Result;

/// Largest grid for which the Green-matrix oracle may be built.
pub const GREEN_MATRIX_MAX_N: usize = 512;

/// Hermiticity tolerance for functionals entering the adjoint propagator.
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Coefficient pair multiplying `(ΔÛ, ΔÛ†)` of one field component.
#[derive(Debug, Clone)]
pub struct FieldPair {
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
}

impl FieldPair {
    pub fn zeros(n: usize) -> Self {
        FieldPair {
            plus: vec![Complex64::new(0.0, 0.0); n],
            minus: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Hermitian pair `(plus, conj(plus))`.
    pub fn hermitian(plus: Vec<Complex64>) -> Self {
        let minus = plus.iter().map(Complex64::conj).collect();
        FieldPair { plus, minus }
    }
}

/// A fluctuation state or measurement functional: one coefficient pair per
/// field component (one for the scalar system, two for the vector system).
#[derive(Debug, Clone)]
pub struct DoubledField {
    grid: Arc<TimeGrid>,
    pairs: Vec<FieldPair>,
}

impl DoubledField {
    pub fn new(grid: Arc<TimeGrid>, pairs: Vec<FieldPair>) -> Result<Self> {
        if pairs.is_empty() || pairs.len() > 2 {
            return Err(Error::InvalidParameter(format!(
                "a doubled field carries 1 or 2 component pairs, got {}",
                pairs.len()
            )));
        }
        for p in &pairs {
            if p.plus.len() != grid.len() || p.minus.len() != grid.len() {
                return Err(Error::GridMismatch(
                    "component length does not match the grid".into(),
                ));
            }
        }
        Ok(DoubledField { grid, pairs })
    }

    pub fn scalar(grid: Arc<TimeGrid>, pair: FieldPair) -> Result<Self> {
        Self::new(grid, vec![pair])
    }

    pub fn vector(grid: Arc<TimeGrid>, u: FieldPair, v: FieldPair) -> Result<Self> {
        Self::new(grid, vec![u, v])
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn pairs(&self) -> &[FieldPair] {
        &self.pairs
    }

    pub fn n_components(&self) -> usize {
        self.pairs.len()
    }

    /// Max pointwise deviation from `minus = conj(plus)`.
    pub fn hermitian_deviation(&self) -> f64 {
        self.pairs
            .iter()
            .flat_map(|p| {
                p.plus
                    .iter()
                    .zip(&p.minus)
                    .map(|(a, b)| (b - a.conj()).norm())
            })
            .fold(0.0, f64::max)
    }

    /// Bilinear pairing `Σ (f.plus w.plus + f.minus w.minus) dt`.
    pub fn pairing(&self, state: &DoubledField) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (f, w) in self.pairs.iter().zip(&state.pairs) {
            for j in 0..f.plus.len() {
                acc += f.plus[j] * w.plus[j] + f.minus[j] * w.minus[j];
            }
        }
        acc * self.grid.dt()
    }

    /// Symplectic form `Σ (plus_a conj(plus_b) - minus_a conj(minus_b)) dt`,
    /// conserved along the linearized flow for any two solutions.
    pub fn symplectic_pairing(&self, other: &DoubledField) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in self.pairs.iter().zip(&other.pairs) {
            for j in 0..a.plus.len() {
                acc += a.plus[j] * b.plus[j].conj() - a.minus[j] * b.minus[j].conj();
            }
        }
        acc * self.grid.dt()
    }
}

fn check_compatible(field: &DoubledField, traj: &Trajectory) -> Result<()> {
    if !field.grid.same_discretization(traj.grid()) {
        return Err(Error::GridMismatch(
            "doubled field and trajectory grids differ".into(),
        ));
    }
    let want = match traj.kind() {
        TrajectoryKind::Scalar => 1,
        TrajectoryKind::Vector => 2,
    };
    if field.n_components() != want {
        return Err(Error::GridMismatch(format!(
            "doubled field has {} components, trajectory needs {}",
            field.n_components(),
            want
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Per-step tables
// ---------------------------------------------------------------------------

enum Rotation {
    Scalar {
        alpha: Vec<Complex64>,
        beta: Vec<Complex64>,
    },
    Vector {
        cu: Vec<Complex64>,
        qu: Vec<Complex64>,
        ruv: Vec<Complex64>,
        suv: Vec<Complex64>,
        cv: Vec<Complex64>,
        qv: Vec<Complex64>,
        rvu: Vec<Complex64>,
        svu: Vec<Complex64>,
    },
}

/// Below this many active fields the per-step work is cheaper serially than
/// through the thread pool.
const PAR_THRESHOLD: usize = 16;

struct StepTables<'a> {
    traj: &'a Trajectory,
    half_disp: Vec<Complex64>,
    /// `half_disp / n`: folds the inverse-transform normalization into the
    /// pre-rotation phase multiply.
    half_disp_scaled: Vec<Complex64>,
    half_disp_last: Option<(Vec<Complex64>, Vec<Complex64>)>,
    rot: Rotation,
    um: Vec<Complex64>,
    vm: Vec<Complex64>,
    scratch: FftScratch,
}

impl<'a> StepTables<'a> {
    fn new(traj: &'a Trajectory) -> Self {
        let grid = traj.grid();
        let n = grid.len();
        let inv_n = 1.0 / n as f64;
        let half_disp = grid.dispersion_phases(0.5 * traj.step());
        let half_disp_scaled = half_disp.iter().map(|p| p * inv_n).collect();
        let last = traj.n_steps().checked_sub(1).map(|k| traj.step_len(k));
        let half_disp_last = match last {
            Some(h) if h != traj.step() => {
                let t = grid.dispersion_phases(0.5 * h);
                let ts = t.iter().map(|p| p * inv_n).collect();
                Some((t, ts))
            }
            _ => None,
        };
        let zeros = vec![Complex64::new(0.0, 0.0); n];
        let rot = match traj.kind() {
            TrajectoryKind::Scalar => Rotation::Scalar {
                alpha: zeros.clone(),
                beta: zeros.clone(),
            },
            TrajectoryKind::Vector => Rotation::Vector {
                cu: zeros.clone(),
                qu: zeros.clone(),
                ruv: zeros.clone(),
                suv: zeros.clone(),
                cv: zeros.clone(),
                qv: zeros.clone(),
                rvu: zeros.clone(),
                svu: zeros.clone(),
            },
        };
        StepTables {
            traj,
            half_disp,
            half_disp_scaled,
            half_disp_last,
            rot,
            um: zeros.clone(),
            vm: zeros,
            scratch: FftScratch::default(),
        }
    }

    fn is_last(&self, k: usize) -> bool {
        k + 1 == self.traj.n_steps() && self.half_disp_last.is_some()
    }

    fn half_disp(&self, k: usize) -> &[Complex64] {
        if self.is_last(k) {
            &self.half_disp_last.as_ref().unwrap().0
        } else {
            &self.half_disp
        }
    }

    fn half_disp_scaled(&self, k: usize) -> &[Complex64] {
        if self.is_last(k) {
            &self.half_disp_last.as_ref().unwrap().1
        } else {
            &self.half_disp_scaled
        }
    }

    /// Fill the Kerr-linearization coefficients for step `k` from the
    /// classical field at the substep point (snapshot `k` advanced by the
    /// leading dispersion half-step, exactly as the classical propagator
    /// computed it).
    fn prepare(&mut self, k: usize) {
        let grid = self.traj.grid();
        let h = self.traj.step_len(k);
        let disp = if self.is_last(k) {
            &self.half_disp_last.as_ref().unwrap().0
        } else {
            &self.half_disp
        };

        self.um.copy_from_slice(self.traj.snapshot_u(k));
        apply_dispersion(grid, &mut self.um, disp, &mut self.scratch);

        match self.traj.kind() {
            TrajectoryKind::Scalar => {
                let Rotation::Scalar { alpha, beta } = &mut self.rot else {
                    unreachable!()
                };
                for (j, &u) in self.um.iter().enumerate() {
                    let nu = u.norm_sqr();
                    let e = expi(h * nu);
                    alpha[j] = e * Complex64::new(1.0, h * nu);
                    beta[j] = e * Complex64::new(0.0, h) * u * u;
                }
            }
            TrajectoryKind::Vector => {
                self.vm.copy_from_slice(self.traj.snapshot_v(k).unwrap());
                apply_dispersion(grid, &mut self.vm, disp, &mut self.scratch);
                let (a, b) = self.traj.coefficients();
                let Rotation::Vector {
                    cu,
                    qu,
                    ruv,
                    suv,
                    cv,
                    qv,
                    rvu,
                    svu,
                } = &mut self.rot
                else {
                    unreachable!()
                };
                for (j, (&u, &v)) in self.um.iter().zip(&self.vm).enumerate() {
                    let nu = u.norm_sqr();
                    let nv = v.norm_sqr();
                    let eu = expi(h * (a * nu + b * nv));
                    let ev = expi(h * (a * nv + b * nu));
                    let iha = Complex64::new(0.0, h * a);
                    let ihb = Complex64::new(0.0, h * b);
                    cu[j] = eu * Complex64::new(1.0, h * a * nu);
                    qu[j] = eu * iha * u * u;
                    ruv[j] = eu * ihb * u * v.conj();
                    suv[j] = eu * ihb * u * v;
                    cv[j] = ev * Complex64::new(1.0, h * a * nv);
                    qv[j] = ev * iha * v * v;
                    rvu[j] = ev * ihb * v * u.conj();
                    svu[j] = ev * ihb * v * u;
                }
            }
        }
    }
}

/// Run `f` over the items, through the pool only when the batch is large
/// enough to amortize the dispatch. Results are identical either way: each
/// item's arithmetic is self-contained.
fn for_each_maybe_par<T: Send>(items: &mut [T], f: impl Fn(&mut T) + Sync + Send) {
    if items.len() < PAR_THRESHOLD {
        items.iter_mut().for_each(f);
    } else {
        items.par_iter_mut().for_each(f);
    }
}

// ---------------------------------------------------------------------------
// Forward propagation
// ---------------------------------------------------------------------------

struct FwdState {
    // Frequency-domain (plus, minus) per component.
    comps: Vec<(Vec<Complex64>, Vec<Complex64>)>,
    scratch: FftScratch,
}

fn rotate_forward(rot: &Rotation, comps: &mut [(Vec<Complex64>, Vec<Complex64>)]) {
    match rot {
        Rotation::Scalar { alpha, beta } => {
            let (plus, minus) = &mut comps[0];
            for j in 0..plus.len() {
                let a = plus[j];
                let b = minus[j];
                plus[j] = alpha[j] * a + beta[j] * b;
                minus[j] = beta[j].conj() * a + alpha[j].conj() * b;
            }
        }
        Rotation::Vector {
            cu,
            qu,
            ruv,
            suv,
            cv,
            qv,
            rvu,
            svu,
        } => {
            let (head, tail) = comps.split_at_mut(1);
            let (up, um) = &mut head[0];
            let (vp, vm) = &mut tail[0];
            for j in 0..up.len() {
                let au = up[j];
                let bu = um[j];
                let av = vp[j];
                let bv = vm[j];
                up[j] = cu[j] * au + qu[j] * bu + ruv[j] * av + suv[j] * bv;
                um[j] = qu[j].conj() * au
                    + cu[j].conj() * bu
                    + suv[j].conj() * av
                    + ruv[j].conj() * bv;
                vp[j] = rvu[j] * au + svu[j] * bu + cv[j] * av + qv[j] * bv;
                vm[j] = svu[j].conj() * au
                    + rvu[j].conj() * bu
                    + qv[j].conj() * av
                    + cv[j].conj() * bv;
            }
        }
    }
}

/// Propagate a batch of doubled fields from z = 0 to the trajectory end.
pub fn forward_linearized_many(
    states: &[DoubledField],
    traj: &Trajectory,
) -> Result<Vec<DoubledField>> {
    for s in states {
        check_compatible(s, traj)?;
    }
    let grid = traj.grid().clone();
    let mut tables = StepTables::new(traj);

    // Into frequency domain.
    let mut work: Vec<FwdState> = states
        .iter()
        .map(|s| {
            let mut scratch = FftScratch::default();
            let comps = s
                .pairs
                .iter()
                .map(|p| {
                    let mut plus = p.plus.clone();
                    let mut minus = p.minus.clone();
                    grid.forward(&mut plus, &mut scratch);
                    grid.forward(&mut minus, &mut scratch);
                    (plus, minus)
                })
                .collect();
            FwdState { comps, scratch }
        })
        .collect();

    for k in 0..traj.n_steps() {
        tables.prepare(k);
        let rot = &tables.rot;
        let disp = tables.half_disp(k);
        let disp_scaled = tables.half_disp_scaled(k);
        for_each_maybe_par(&mut work, |st| {
            for (plus, minus) in st.comps.iter_mut() {
                for j in 0..plus.len() {
                    plus[j] *= disp_scaled[j];
                    minus[j] *= disp_scaled[j].conj();
                }
                grid.inverse_unnormalized(plus, &mut st.scratch);
                grid.inverse_unnormalized(minus, &mut st.scratch);
            }
            rotate_forward(rot, &mut st.comps);
            for (plus, minus) in st.comps.iter_mut() {
                grid.forward(plus, &mut st.scratch);
                grid.forward(minus, &mut st.scratch);
                for j in 0..plus.len() {
                    plus[j] *= disp[j];
                    minus[j] *= disp[j].conj();
                }
            }
        });
    }

    // Back to the time domain.
    Ok(work
        .into_iter()
        .map(|mut st| {
            let pairs = st
                .comps
                .iter_mut()
                .map(|(plus, minus)| {
                    grid.inverse(plus, &mut st.scratch);
                    grid.inverse(minus, &mut st.scratch);
                    FieldPair {
                        plus: std::mem::take(plus),
                        minus: std::mem::take(minus),
                    }
                })
                .collect();
            DoubledField {
                grid: grid.clone(),
                pairs,
            }
        })
        .collect())
}

/// Propagate one doubled field along the full trajectory.
pub fn forward_linearized(state: &DoubledField, traj: &Trajectory) -> Result<DoubledField> {
    Ok(forward_linearized_many(std::slice::from_ref(state), traj)?
        .pop()
        .unwrap())
}

// ---------------------------------------------------------------------------
// Adjoint propagation (Hermitian functionals, plus-only fast path)
// ---------------------------------------------------------------------------

struct AdjState {
    /// Frequency-domain plus coefficients per component.
    comps: Vec<Vec<Complex64>>,
    scratch: FftScratch,
}

fn rotate_adjoint(rot: &Rotation, comps: &mut [Vec<Complex64>]) {
    match rot {
        Rotation::Scalar { alpha, beta } => {
            let p = &mut comps[0];
            for j in 0..p.len() {
                let x = p[j];
                p[j] = alpha[j] * x + (beta[j] * x).conj();
            }
        }
        Rotation::Vector {
            cu,
            qu,
            ruv,
            suv,
            cv,
            qv,
            rvu,
            svu,
        } => {
            let (head, tail) = comps.split_at_mut(1);
            let pu = &mut head[0];
            let pv = &mut tail[0];
            for j in 0..pu.len() {
                let xu = pu[j];
                let xv = pv[j];
                pu[j] = cu[j] * xu + (qu[j] * xu).conj() + rvu[j] * xv + (svu[j] * xv).conj();
                pv[j] = ruv[j] * xu + (suv[j] * xu).conj() + cv[j] * xv + (qv[j] * xv).conj();
            }
        }
    }
}

/// Back-propagate Hermitian functionals, each anchored at its own snapshot
/// index, down to z = 0. Returns the functionals in input order.
///
/// All items walk one shared descending pass over the trajectory; a
/// functional anchored at index `c` joins the pass when it reaches `c`.
pub fn backpropagate_batch(
    items: &[(usize, DoubledField)],
    traj: &Trajectory,
) -> Result<Vec<DoubledField>> {
    let grid = traj.grid().clone();
    for (idx, f) in items {
        check_compatible(f, traj)?;
        if *idx > traj.n_steps() {
            return Err(Error::CheckpointNotStored {
                z: *idx as f64 * traj.step(),
                step: traj.step(),
            });
        }
        let dev = f.hermitian_deviation();
        let scale = f
            .pairs
            .iter()
            .flat_map(|p| p.plus.iter().map(|v| v.norm()))
            .fold(0.0, f64::max);
        if dev > HERMITICITY_TOL * scale.max(1.0) {
            return Err(Error::NonHermitian { deviation: dev });
        }
    }

    let mut result: Vec<Option<DoubledField>> = items.iter().map(|_| None).collect();
    let max_c = items.iter().map(|(c, _)| *c).max().unwrap_or(0);

    // Items anchored at z = 0 are already where they need to be.
    for (slot, (c, f)) in items.iter().enumerate() {
        if *c == 0 {
            result[slot] = Some(f.clone());
        }
    }
    if max_c == 0 {
        return Ok(result.into_iter().map(Option::unwrap).collect());
    }

    // Activation lists per anchor index, in input order.
    let mut joining: Vec<Vec<usize>> = vec![Vec::new(); max_c + 1];
    for (slot, (c, _)) in items.iter().enumerate() {
        if *c > 0 {
            joining[*c].push(slot);
        }
    }

    let mut tables = StepTables::new(traj);
    let mut active: Vec<(usize, AdjState)> = Vec::new();

    for k in (0..max_c).rev() {
        for &slot in &joining[k + 1] {
            let f = &items[slot].1;
            let mut scratch = FftScratch::default();
            let comps = f
                .pairs
                .iter()
                .map(|p| {
                    let mut plus = p.plus.clone();
                    grid.forward(&mut plus, &mut scratch);
                    plus
                })
                .collect();
            active.push((slot, AdjState { comps, scratch }));
        }

        tables.prepare(k);
        let rot = &tables.rot;
        let disp = tables.half_disp(k);
        let disp_scaled = tables.half_disp_scaled(k);
        for_each_maybe_par(&mut active, |(_, st)| {
            for plus in st.comps.iter_mut() {
                for j in 0..plus.len() {
                    plus[j] *= disp_scaled[j];
                }
                grid.inverse_unnormalized(plus, &mut st.scratch);
            }
            rotate_adjoint(rot, &mut st.comps);
            for plus in st.comps.iter_mut() {
                grid.forward(plus, &mut st.scratch);
                for j in 0..plus.len() {
                    plus[j] *= disp[j];
                }
            }
        });
    }

    for (slot, mut st) in active {
        let pairs = st
            .comps
            .iter_mut()
            .map(|plus| {
                grid.inverse(plus, &mut st.scratch);
                FieldPair::hermitian(std::mem::take(plus))
            })
            .collect();
        result[slot] = Some(DoubledField {
            grid: grid.clone(),
            pairs,
        });
    }

    Ok(result.into_iter().map(Option::unwrap).collect())
}

/// Back-propagate a Hermitian functional anchored at the trajectory end.
pub fn backpropagate_functional(
    functional: &DoubledField,
    traj: &Trajectory,
) -> Result<DoubledField> {
    backpropagate_from_index(functional, traj, traj.n_steps())
}

/// Back-propagate a Hermitian functional anchored at checkpoint `z`.
pub fn backpropagate_functional_from(
    functional: &DoubledField,
    traj: &Trajectory,
    z: f64,
) -> Result<DoubledField> {
    backpropagate_from_index(functional, traj, traj.index_of_z(z)?)
}

fn backpropagate_from_index(
    functional: &DoubledField,
    traj: &Trajectory,
    index: usize,
) -> Result<DoubledField> {
    Ok(
        backpropagate_batch(std::slice::from_ref(&(index, functional.clone())), traj)?
            .pop()
            .unwrap(),
    )
}

// ---------------------------------------------------------------------------
// Green-matrix oracle
// ---------------------------------------------------------------------------

/// Dense linearized propagator `w(L) = S w(0)` on the stacked doubled field
/// (`plus` components of every polarization first, then `minus`).
///
/// Brute-force oracle: columns are obtained by forward runs on basis vectors,
/// so the cost is `2 c n` full propagations. Guarded to small grids.
pub struct GreenMatrix {
    grid: Arc<TimeGrid>,
    components: usize,
    s: Array2<Complex64>,
}

impl GreenMatrix {
    pub fn dim(&self) -> usize {
        2 * self.components * self.grid.len()
    }

    pub fn as_array(&self) -> &Array2<Complex64> {
        &self.s
    }

    fn stack(&self, f: &DoubledField) -> Array1<Complex64> {
        let n = self.grid.len();
        let m = self.components * n;
        let mut out = Array1::zeros(2 * m);
        for (c, pair) in f.pairs.iter().enumerate() {
            for j in 0..n {
                out[c * n + j] = pair.plus[j];
                out[m + c * n + j] = pair.minus[j];
            }
        }
        out
    }

    fn unstack(&self, v: &Array1<Complex64>) -> DoubledField {
        let n = self.grid.len();
        let m = self.components * n;
        let pairs = (0..self.components)
            .map(|c| FieldPair {
                plus: (0..n).map(|j| v[c * n + j]).collect(),
                minus: (0..n).map(|j| v[m + c * n + j]).collect(),
            })
            .collect();
        DoubledField {
            grid: self.grid.clone(),
            pairs,
        }
    }

    /// `S w`: the forward map applied through the dense matrix.
    pub fn apply(&self, state: &DoubledField) -> DoubledField {
        self.unstack(&self.s.dot(&self.stack(state)))
    }

    /// `Sᵀ f`: the matrix route for back-propagation in the bilinear pairing.
    pub fn transpose_apply(&self, functional: &DoubledField) -> DoubledField {
        self.unstack(&self.s.t().dot(&self.stack(functional)))
    }

    /// Max-entry residuals of the Bogoliubov conditions
    /// `P P† - Q Q† = I` and `P Qᵀ - Q Pᵀ = 0`.
    pub fn bogoliubov_residuals(&self) -> (f64, f64) {
        let m = self.components * self.grid.len();
        let p = self.s.slice(s![..m, ..m]);
        let q = self.s.slice(s![..m, m..]);
        let p_h = p.mapv(|z| z.conj()).reversed_axes().to_owned();
        let q_h = q.mapv(|z| z.conj()).reversed_axes().to_owned();
        let mut unitary = p.dot(&p_h) - q.dot(&q_h);
        for j in 0..m {
            unitary[(j, j)] -= Complex64::new(1.0, 0.0);
        }
        let r1 = unitary.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let sym = p.dot(&q.t().to_owned()) - q.dot(&p.t().to_owned());
        let r2 = sym.iter().map(|z| z.norm()).fold(0.0, f64::max);
        (r1, r2)
    }
}

/// Build the dense propagator for the full trajectory by `2 c n` forward
/// runs on basis vectors. Refused above [`GREEN_MATRIX_MAX_N`] samples.
pub fn build_green_matrix(traj: &Trajectory) -> Result<GreenMatrix> {
    let grid = traj.grid().clone();
    let n = grid.len();
    if n > GREEN_MATRIX_MAX_N {
        return Err(Error::OracleGuard {
            n,
            limit: GREEN_MATRIX_MAX_N,
        });
    }
    let components = match traj.kind() {
        TrajectoryKind::Scalar => 1,
        TrajectoryKind::Vector => 2,
    };
    let m = components * n;
    let dim = 2 * m;

    let basis: Vec<DoubledField> = (0..dim)
        .map(|col| {
            let mut pairs: Vec<FieldPair> = (0..components).map(|_| FieldPair::zeros(n)).collect();
            let (block, rest) = (col / m, col % m);
            let (comp, j) = (rest / n, rest % n);
            if block == 0 {
                pairs[comp].plus[j] = Complex64::new(1.0, 0.0);
            } else {
                pairs[comp].minus[j] = Complex64::new(1.0, 0.0);
            }
            DoubledField {
                grid: grid.clone(),
                pairs,
            }
        })
        .collect();

    let propagated = forward_linearized_many(&basis, traj)?;

    let mut s = Array2::zeros((dim, dim));
    for (col, f) in propagated.iter().enumerate() {
        for (c, pair) in f.pairs.iter().enumerate() {
            for j in 0..n {
                s[(c * n + j, col)] = pair.plus[j];
                s[(m + c * n + j, col)] = pair.minus[j];
            }
        }
    }

    Ok(GreenMatrix {
        grid,
        components,
        s,
    })
}
