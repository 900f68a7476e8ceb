//! Field filtering and RK4 propagation of the state and adjoint ensembles.
//!
//! Controls are piecewise constant on the intervals of a uniform grid and are
//! stored in μT. The filtered field is evaluated in closed form on every
//! interval, so the RK4 stages see the exact field at `t_k`, `t_k + h/2` and
//! `t_{k+1}`.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ut_to_mt, ModelAssembly, TripletBasis};
use crate::spin_algebra::{ComplexMatrix, ComplexVector};

pub type Vec3 = [f64; 3];

/// Integration aborts once any state component exceeds this modulus.
pub const OVERFLOW_LIMIT: f64 = 1e6;

/// Below this much work per step (states × dim²) the ensemble is stepped on
/// the calling thread.
const PARALLEL_WORK_THRESHOLD: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::config("t_final", "must be positive and finite"));
        }
        if steps == 0 {
            return Err(Error::config("steps", "must be at least 1"));
        }
        Ok(Self { t_final, steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_final
        } else {
            k as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.node(k)).collect()
    }
}

/// Box `Π [m_i, M_i]` of admissible control values, μT.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prism {
    pub lower: Vec3,
    pub upper: Vec3,
}

impl Prism {
    pub fn new(lower: Vec3, upper: Vec3) -> Result<Self> {
        let prism = Self { lower, upper };
        prism.validate()?;
        Ok(prism)
    }

    pub fn cube(lower: f64, upper: f64) -> Self {
        Self {
            lower: [lower; 3],
            upper: [upper; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..3 {
            if !self.lower[i].is_finite() || !self.upper[i].is_finite() {
                return Err(Error::config("prism", "bounds must be finite"));
            }
            if self.lower[i] > self.upper[i] {
                return Err(Error::config(
                    "prism.lower",
                    format!(
                        "component {i} lower bound {} exceeds upper bound {}",
                        self.lower[i], self.upper[i]
                    ),
                ));
            }
        }
        Ok(())
    }

    pub fn contains(&self, v: &Vec3) -> bool {
        (0..3).all(|i| self.lower[i] <= v[i] && v[i] <= self.upper[i])
    }

    pub fn clamp(&self, v: Vec3) -> Vec3 {
        std::array::from_fn(|i| v[i].clamp(self.lower[i], self.upper[i]))
    }

    pub fn width(&self) -> Vec3 {
        std::array::from_fn(|i| self.upper[i] - self.lower[i])
    }
}

/// Piecewise-constant control, one value per grid interval, μT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub grid: TimeGrid,
    pub values: Vec<Vec3>,
}

impl ControlSignal {
    pub fn new(grid: TimeGrid, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != grid.steps() {
            return Err(Error::GridMismatch(format!(
                "control has {} values for {} intervals",
                values.len(),
                grid.steps()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Independent uniform draws inside the prism on every interval.
    pub fn random(grid: TimeGrid, prism: &Prism, rng: &mut impl Rng) -> Self {
        let values = (0..grid.steps())
            .map(|_| std::array::from_fn(|i| rng.gen_range(prism.lower[i]..=prism.upper[i])))
            .collect();
        Self { grid, values }
    }

    pub fn constant(grid: TimeGrid, value: Vec3) -> Self {
        Self {
            grid,
            values: vec![value; grid.steps()],
        }
    }

    pub fn is_within(&self, prism: &Prism) -> bool {
        self.values.iter().all(|v| prism.contains(v))
    }

    /// Discrete L² inner product with weight `h` per interval.
    pub fn dot(&self, other: &ControlSignal) -> f64 {
        weighted_dot(self.grid.step(), &self.values, &other.values)
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(&self, other: &ControlSignal) -> f64 {
        let diff: Vec<Vec3> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| std::array::from_fn(|i| a[i] - b[i]))
            .collect();
        weighted_dot(self.grid.step(), &diff, &diff).sqrt()
    }

    /// `self + factor * direction`, unprojected.
    pub fn offset(&self, factor: f64, direction: &[Vec3]) -> ControlSignal {
        let values = self
            .values
            .iter()
            .zip(direction)
            .map(|(u, d)| std::array::from_fn(|i| u[i] + factor * d[i]))
            .collect();
        ControlSignal {
            grid: self.grid,
            values,
        }
    }
}

pub(crate) fn weighted_dot(h: f64, a: &[Vec3], b: &[Vec3]) -> f64 {
    h * a
        .iter()
        .zip(b)
        .map(|(x, y)| x[0] * y[0] + x[1] * y[1] + x[2] * y[2])
        .sum::<f64>()
}

/// First-order filter `v̇ + γ v = γ u`, `v(0) = v₀` (μT).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub gamma: f64,
    pub v0: Vec3,
}

/// How the applied field is obtained from the control.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldModel {
    Filtered(FilterConfig),
    /// The field equals the control.
    NoFilter,
}

impl FieldModel {
    pub fn gamma(&self) -> Option<f64> {
        match self {
            FieldModel::Filtered(cfg) => Some(cfg.gamma),
            FieldModel::NoFilter => None,
        }
    }
}

/// Applied field sampled at the grid nodes and interval midpoints, μT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldTrajectory {
    pub nodes: Vec<Vec3>,
    pub midpoints: Vec<Vec3>,
    /// Set in no-filter mode: the field is constant on each interval, so the
    /// node value at `t_{k+1}` seen from interval `k` is the interval value.
    pub piecewise_constant: bool,
}

impl FieldTrajectory {
    /// Field at the start, midpoint and end of interval `k`.
    pub fn interval_samples(&self, k: usize) -> [Vec3; 3] {
        if self.piecewise_constant {
            [self.midpoints[k]; 3]
        } else {
            [self.nodes[k], self.midpoints[k], self.nodes[k + 1]]
        }
    }

    pub fn steps(&self) -> usize {
        self.midpoints.len()
    }
}

/// Evaluates the applied field for a control.
///
/// In filtered mode the closed form `v(t) = u_k + (v(t_k) − u_k) e^{−γ(t−t_k)}`
/// is used on each interval.
pub fn filter_field(u: &ControlSignal, model: &FieldModel) -> Result<FieldTrajectory> {
    let steps = u.grid.steps();
    match model {
        FieldModel::Filtered(cfg) => {
            if !(cfg.gamma > 0.0) {
                return Err(Error::config("filter.gamma", "must be positive"));
            }
            let h = u.grid.step();
            let decay_full = (-cfg.gamma * h).exp();
            let decay_half = (-cfg.gamma * 0.5 * h).exp();
            let mut nodes = Vec::with_capacity(steps + 1);
            let mut midpoints = Vec::with_capacity(steps);
            let mut v = cfg.v0;
            nodes.push(v);
            for uk in &u.values {
                midpoints.push(std::array::from_fn(|i| uk[i] + (v[i] - uk[i]) * decay_half));
                v = std::array::from_fn(|i| uk[i] + (v[i] - uk[i]) * decay_full);
                nodes.push(v);
            }
            Ok(FieldTrajectory {
                nodes,
                midpoints,
                piecewise_constant: false,
            })
        }
        FieldModel::NoFilter => {
            let mut nodes = u.values.clone();
            nodes.push(*u.values.last().expect("grid has at least one interval"));
            Ok(FieldTrajectory {
                nodes,
                midpoints: u.values.clone(),
                piecewise_constant: true,
            })
        }
    }
}

/// Trajectories of every ensemble member: `trajectories[l][k]` is state `l`
/// at node `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateEnsemble {
    pub trajectories: Vec<Vec<ComplexVector>>,
}

impl StateEnsemble {
    pub fn count(&self) -> usize {
        self.trajectories.len()
    }

    pub fn snapshot(&self, l: usize, k: usize) -> &ComplexVector {
        &self.trajectories[l][k]
    }

    pub fn final_states(&self) -> Vec<&ComplexVector> {
        self.trajectories
            .iter()
            .map(|t| t.last().expect("non-empty trajectory"))
            .collect()
    }

    pub fn nodes(&self) -> usize {
        self.trajectories.first().map_or(0, Vec::len)
    }
}

/// How states at `t_k + h/2` are reconstructed from the node values, both
/// for the adjoint source term and for the midpoint samples of the cost and
/// switching-function quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfStepRule {
    /// `(x_k + x_{k+1}) / 2`. Second order only.
    Average,
    /// Cubic Hermite interpolation using `ẋ` at both ends.
    #[default]
    Hermite,
}

/// `-i H x`.
pub(crate) fn forward_slope(h: &ComplexMatrix, x: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); x.len()];
    derivative(h, x, None, &mut out);
    out
}

/// Midpoint reconstruction from node values and, for the Hermite rule, the
/// node slopes.
pub(crate) fn half_step_state(
    x0: &[Complex64],
    x1: &[Complex64],
    slopes: Option<(&[Complex64], &[Complex64])>,
    h: f64,
) -> Vec<Complex64> {
    let mut mid: Vec<Complex64> = x0.iter().zip(x1).map(|(a, b)| (a + b) * 0.5).collect();
    if let Some((d0, d1)) = slopes {
        for j in 0..mid.len() {
            mid[j] += (d0[j] - d1[j]) * (h / 8.0);
        }
    }
    mid
}

/// Forward state at the midpoint of an interval. `ops` are the forward
/// Hamiltonians at the interval's start, midpoint and end.
pub(crate) fn forward_midpoint(
    rule: HalfStepRule,
    ops: &[ComplexMatrix; 3],
    psi0: &[Complex64],
    psi1: &[Complex64],
    h: f64,
) -> Vec<Complex64> {
    match rule {
        HalfStepRule::Average => half_step_state(psi0, psi1, None, h),
        HalfStepRule::Hermite => {
            let d0 = forward_slope(&ops[0], psi0);
            let d1 = forward_slope(&ops[2], psi1);
            half_step_state(psi0, psi1, Some((&d0, &d1)), h)
        }
    }
}

/// `-(k_S/2) P_S ψ`, the adjoint source.
pub(crate) fn adjoint_source(assembly: &ModelAssembly, psi: &[Complex64]) -> Vec<Complex64> {
    let coef = -0.5 * assembly.constants().k_singlet;
    let mut s = vec![Complex64::default(); psi.len()];
    assembly.system().projector_singlet().apply_into(psi, &mut s);
    s.iter_mut().for_each(|z| *z *= coef);
    s
}

/// Adjoint slope `-i H* χ + s(ψ)`.
pub(crate) fn adjoint_slope(
    assembly: &ModelAssembly,
    h_adj: &ComplexMatrix,
    chi: &[Complex64],
    psi: &[Complex64],
) -> Vec<Complex64> {
    let src = adjoint_source(assembly, psi);
    let mut out = vec![Complex64::default(); chi.len()];
    derivative(h_adj, chi, Some(&src), &mut out);
    out
}

/// `out = -i H x + source`.
fn derivative(h: &ComplexMatrix, x: &[Complex64], source: Option<&[Complex64]>, out: &mut [Complex64]) {
    h.apply_into(x, out);
    for (k, o) in out.iter_mut().enumerate() {
        let hx = *o;
        *o = Complex64::new(hx.im, -hx.re);
        if let Some(src) = source {
            *o += src[k];
        }
    }
}

/// One classical RK4 step of `ẋ = -i H(t) x + s(t)` over `dt`, with the
/// operators and sources given at the start, midpoint and end of the step.
fn rk4_step(
    ops: [&ComplexMatrix; 3],
    sources: Option<[&[Complex64]; 3]>,
    x: &[Complex64],
    dt: f64,
) -> Vec<Complex64> {
    let n = x.len();
    let mut k1 = vec![Complex64::default(); n];
    let mut k2 = vec![Complex64::default(); n];
    let mut k3 = vec![Complex64::default(); n];
    let mut k4 = vec![Complex64::default(); n];
    let mut tmp = vec![Complex64::default(); n];
    let src = |i: usize| sources.map(|s| s[i]);

    derivative(ops[0], x, src(0), &mut k1);
    for j in 0..n {
        tmp[j] = x[j] + k1[j] * (0.5 * dt);
    }
    derivative(ops[1], &tmp, src(1), &mut k2);
    for j in 0..n {
        tmp[j] = x[j] + k2[j] * (0.5 * dt);
    }
    derivative(ops[1], &tmp, src(1), &mut k3);
    for j in 0..n {
        tmp[j] = x[j] + k3[j] * dt;
    }
    derivative(ops[2], &tmp, src(2), &mut k4);
    (0..n)
        .map(|j| x[j] + (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (dt / 6.0))
        .collect()
}

fn guard(v: &[Complex64], time: f64, state: usize) -> Result<()> {
    for z in v {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::NumericalAbort {
                time,
                state,
                reason: "non-finite state component".into(),
            });
        }
        if z.norm() > OVERFLOW_LIMIT {
            return Err(Error::NumericalAbort {
                time,
                state,
                reason: format!(
                    "state component modulus {} exceeds {OVERFLOW_LIMIT}; check field and rate units",
                    z.norm()
                ),
            });
        }
    }
    Ok(())
}

pub(crate) fn hamiltonians(assembly: &ModelAssembly, samples: [Vec3; 3], adjoint: bool) -> [ComplexMatrix; 3] {
    samples.map(|v| assembly.hamiltonian_at(ut_to_mt(v), adjoint))
}

fn check_field(field: &FieldTrajectory, grid: &TimeGrid) -> Result<()> {
    if field.steps() != grid.steps() || field.nodes.len() != grid.steps() + 1 {
        return Err(Error::GridMismatch(format!(
            "field has {} intervals, grid has {}",
            field.steps(),
            grid.steps()
        )));
    }
    Ok(())
}

/// Runs `step` over every state, in parallel when the work is large enough.
fn for_each_state<T, F>(items: &mut [T], parallel: bool, step: F) -> Result<()>
where
    T: Send,
    F: Fn(usize, &mut T) -> Result<()> + Sync + Send,
{
    if parallel {
        items
            .par_iter_mut()
            .enumerate()
            .map(|(l, item)| step(l, item))
            .collect::<Result<Vec<()>>>()?;
    } else {
        for (l, item) in items.iter_mut().enumerate() {
            step(l, item)?;
        }
    }
    Ok(())
}

/// RK4 forward integration of `i ψ̇ = H(v(t)) ψ` from the triplet states.
pub fn integrate_forward(
    assembly: &ModelAssembly,
    field: &FieldTrajectory,
    basis: &TripletBasis,
    grid: &TimeGrid,
) -> Result<StateEnsemble> {
    check_field(field, grid)?;
    let n = assembly.system().dim();
    let h = grid.step();
    let parallel = basis.len() * n * n >= PARALLEL_WORK_THRESHOLD;
    let mut trajectories: Vec<Vec<ComplexVector>> = basis
        .states
        .iter()
        .map(|s| {
            let mut t = Vec::with_capacity(grid.steps() + 1);
            t.push(s.clone());
            t
        })
        .collect();
    for k in 0..grid.steps() {
        let ops = hamiltonians(assembly, field.interval_samples(k), false);
        let time = grid.node(k + 1);
        for_each_state(&mut trajectories, parallel, |l, traj| {
            let x = traj[k].as_slice();
            let next = rk4_step([&ops[0], &ops[1], &ops[2]], None, x, h);
            guard(&next, time, l)?;
            traj.push(ComplexVector::from(next));
            Ok(())
        })?;
    }
    Ok(StateEnsemble { trajectories })
}

/// RK4 backward integration of the adjoint system
/// `i χ̇ = H*(v) χ − i (k_S/2) P_S ψ`, `χ(T) = 0`.
pub fn integrate_adjoint(
    assembly: &ModelAssembly,
    field: &FieldTrajectory,
    forward: &StateEnsemble,
    grid: &TimeGrid,
    half_step: HalfStepRule,
) -> Result<StateEnsemble> {
    check_field(field, grid)?;
    if forward.nodes() != grid.steps() + 1 {
        return Err(Error::GridMismatch(format!(
            "forward ensemble has {} nodes, grid has {}",
            forward.nodes(),
            grid.steps() + 1
        )));
    }
    let n = assembly.system().dim();
    let steps = grid.steps();
    let h = grid.step();
    let parallel = forward.count() * n * n >= PARALLEL_WORK_THRESHOLD;

    // Built in reverse node order, flipped at the end.
    let mut reversed: Vec<(usize, Vec<ComplexVector>)> = (0..forward.count())
        .map(|l| {
            let mut t = Vec::with_capacity(steps + 1);
            t.push(ComplexVector::zeros(n));
            (l, t)
        })
        .collect();

    for k in (0..steps).rev() {
        let samples = field.interval_samples(k);
        let adj = hamiltonians(assembly, samples, true);
        let fwd = hamiltonians(assembly, samples, false);
        let time = grid.node(k);
        for_each_state(&mut reversed, parallel, |_, (l, traj)| {
            let psi_start = forward.trajectories[*l][k].as_slice();
            let psi_end = forward.trajectories[*l][k + 1].as_slice();
            let psi_mid = forward_midpoint(half_step, &fwd, psi_start, psi_end, h);
            let s_end = adjoint_source(assembly, psi_end);
            let s_mid = adjoint_source(assembly, &psi_mid);
            let s_start = adjoint_source(assembly, psi_start);
            let chi = traj.last().expect("terminal condition").as_slice();
            // Stepping from t_{k+1} back to t_k.
            let next = rk4_step(
                [&adj[2], &adj[1], &adj[0]],
                Some([&s_end, &s_mid, &s_start]),
                chi,
                -h,
            );
            guard(&next, time, *l)?;
            traj.push(ComplexVector::from(next));
            Ok(())
        })?;
    }
    let trajectories = reversed
        .into_iter()
        .map(|(_, mut t)| {
            t.reverse();
            t
        })
        .collect();
    Ok(StateEnsemble { trajectories })
}
