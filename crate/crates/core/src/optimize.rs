//! Gradient projection (GPM) and iterative Pontryagin maximum principle
//! (IPMP) optimizers for the singlet yield.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    filter_field, integrate_adjoint, integrate_forward, weighted_dot, ControlSignal, FieldModel,
    FieldTrajectory, HalfStepRule, Prism, StateEnsemble, TimeGrid, Vec3,
};
use crate::error::{Error, Result};
use crate::model::{ModelAssembly, TripletBasis};
use crate::objective::{singlet_yield, switching_function, CostValue, SwitchingSignal};

/// Everything that defines one optimal control problem.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    pub assembly: ModelAssembly,
    pub basis: TripletBasis,
    pub grid: TimeGrid,
    pub field_model: FieldModel,
    pub prism: Prism,
    pub half_step: HalfStepRule,
}

/// Forward solve of one control.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub control: ControlSignal,
    pub field: FieldTrajectory,
    pub forward: StateEnsemble,
    pub cost: CostValue,
}

impl ControlProblem {
    pub fn evaluate(&self, u: &ControlSignal) -> Result<Evaluation> {
        if u.grid != self.grid {
            return Err(Error::GridMismatch("control grid differs from problem grid".into()));
        }
        let field = filter_field(u, &self.field_model)?;
        let forward = integrate_forward(&self.assembly, &field, &self.basis, &self.grid)?;
        let cost = singlet_yield(&forward, &self.assembly, &field, &self.grid, self.half_step)?;
        Ok(Evaluation {
            control: u.clone(),
            field,
            forward,
            cost,
        })
    }

    pub fn cost(&self, u: &ControlSignal) -> Result<CostValue> {
        Ok(self.evaluate(u)?.cost)
    }

    /// Adjoint solve and switching function at an evaluated control.
    pub fn switching(&self, eval: &Evaluation) -> Result<SwitchingSignal> {
        let adjoint = integrate_adjoint(
            &self.assembly,
            &eval.field,
            &eval.forward,
            &self.grid,
            self.half_step,
        )?;
        switching_function(
            &eval.forward,
            &adjoint,
            &self.assembly,
            &self.field_model,
            &eval.field,
            &self.grid,
            self.half_step,
        )
    }

    pub fn gradient(&self, u: &ControlSignal) -> Result<SwitchingSignal> {
        self.switching(&self.evaluate(u)?)
    }

    fn check_feasible(&self, u: &ControlSignal) -> Result<()> {
        if !u.is_within(&self.prism) {
            return Err(Error::config("u0", "initial control lies outside the prism"));
        }
        Ok(())
    }
}

/// Componentwise clamp of every interval value into the prism.
pub fn project_to_prism(u: &ControlSignal, prism: &Prism) -> ControlSignal {
    ControlSignal {
        grid: u.grid,
        values: u.values.iter().map(|&v| prism.clamp(v)).collect(),
    }
}

/// Denominator of the Barzilai-Borwein step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BbDenominator {
    /// `‖Δg‖²`, the classical Barzilai-Borwein step.
    #[default]
    Squared,
    /// `‖Δg‖`.
    Norm,
}

/// `|⟨Δu, Δg⟩| / ‖Δg‖²` with discrete L² products (weight `h`); returns
/// `fallback` when `‖Δg‖² < 1e-30`.
pub fn bb_step(
    u_prev: &ControlSignal,
    u_cur: &ControlSignal,
    g_prev: &[Vec3],
    g_cur: &[Vec3],
    fallback: f64,
    denominator: BbDenominator,
) -> f64 {
    let h = u_cur.grid.step();
    let du: Vec<Vec3> = diff(&u_cur.values, &u_prev.values);
    let dg: Vec<Vec3> = diff(g_cur, g_prev);
    let dg_sq = weighted_dot(h, &dg, &dg);
    if dg_sq < 1e-30 {
        return fallback;
    }
    let num = weighted_dot(h, &du, &dg).abs();
    match denominator {
        BbDenominator::Squared => num / dg_sq,
        BbDenominator::Norm => num / dg_sq.sqrt(),
    }
}

fn diff(a: &[Vec3], b: &[Vec3]) -> Vec<Vec3> {
    a.iter()
        .zip(b)
        .map(|(x, y)| std::array::from_fn(|i| x[i] - y[i]))
        .collect()
}

/// Bang-bang control selected by the sign of the interval mean of `φ`, which
/// is the exact gradient with respect to that interval's value. Components
/// with a mean of exactly zero keep the previous value.
pub fn synthesize_bang_bang(
    phi: &SwitchingSignal,
    prism: &Prism,
    previous: &ControlSignal,
) -> ControlSignal {
    let values = phi
        .interval
        .iter()
        .zip(&previous.values)
        .map(|(f, prev)| {
            std::array::from_fn(|i| {
                if f[i] > 0.0 {
                    prism.upper[i]
                } else if f[i] < 0.0 {
                    prism.lower[i]
                } else {
                    prev[i]
                }
            })
        })
        .collect();
    ControlSignal {
        grid: previous.grid,
        values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GpmSettings {
    /// Relative cost tolerance.
    pub eps_cost: f64,
    /// Relative control tolerance.
    pub eps_ctrl: f64,
    pub max_iters: usize,
    /// Multiplier on the Barzilai-Borwein step.
    pub step_scale: f64,
    /// First step length. When unset, chosen so the first step moves the
    /// control by 10% of the narrowest prism side.
    pub lambda0: Option<f64>,
    pub bb_denominator: BbDenominator,
}

impl Default for GpmSettings {
    fn default() -> Self {
        Self {
            eps_cost: 1e-5,
            eps_ctrl: 1e-5,
            max_iters: 200,
            step_scale: 4.0,
            lambda0: None,
            bb_denominator: BbDenominator::Squared,
        }
    }
}

impl GpmSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_cost > 0.0) {
            return Err(Error::config("gpm.eps_cost", "must be positive"));
        }
        if !(self.eps_ctrl > 0.0) {
            return Err(Error::config("gpm.eps_ctrl", "must be positive"));
        }
        if self.max_iters < 1 {
            return Err(Error::config("gpm.max_iters", "must be at least 1"));
        }
        if !(self.step_scale > 0.0) {
            return Err(Error::config("gpm.step_scale", "must be positive"));
        }
        if let Some(l) = self.lambda0 {
            if !(l > 0.0) {
                return Err(Error::config("gpm.lambda0", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IpmpSettings {
    pub max_iters: usize,
    /// Number of past controls searched for a repeat.
    pub cycle_window: usize,
}

impl Default for IpmpSettings {
    fn default() -> Self {
        Self {
            max_iters: 50,
            cycle_window: 8,
        }
    }
}

impl IpmpSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::config("ipmp.max_iters", "must be at least 1"));
        }
        if self.cycle_window < 2 {
            return Err(Error::config("ipmp.cycle_window", "must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "gpm")]
    Gpm,
    #[serde(rename = "ipmp")]
    Ipmp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    MaxIters,
    Oscillating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    /// `‖u^N − u^{N−1}‖ / ‖u^N‖`.
    pub control_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleMember {
    pub control: ControlSignal,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub method: Method,
    pub status: Status,
    pub iterations: usize,
    pub cost_history: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub final_control: ControlSignal,
    pub final_field: FieldTrajectory,
    pub final_cost: CostValue,
    pub final_switching: SwitchingSignal,
    /// Controls visited by a detected cycle, in iteration order.
    pub cycle_members: Option<Vec<CycleMember>>,
}

fn relative_change(new: &ControlSignal, old: &ControlSignal) -> f64 {
    let norm = new.l2_norm();
    let dist = new.distance(old);
    if norm > 0.0 {
        dist / norm
    } else {
        dist
    }
}

/// Iterate observed by an optimizer callback.
pub struct Iterate<'a> {
    pub iteration: usize,
    pub control: &'a ControlSignal,
    pub cost: f64,
}

pub fn gpm_optimize(
    problem: &ControlProblem,
    u0: &ControlSignal,
    settings: &GpmSettings,
) -> Result<OptimizerReport> {
    gpm_optimize_observed(problem, u0, settings, |_| {})
}

/// Gradient ascent in L² with Barzilai-Borwein steps and projection onto the
/// prism. Terminates when both relative cost and relative control changes
/// fall below their tolerances.
pub fn gpm_optimize_observed(
    problem: &ControlProblem,
    u0: &ControlSignal,
    settings: &GpmSettings,
    mut observer: impl FnMut(&Iterate<'_>),
) -> Result<OptimizerReport> {
    settings.validate()?;
    problem.check_feasible(u0)?;
    let mut eval = problem.evaluate(u0)?;
    let mut cost_history = vec![eval.cost.value()];
    let mut history = vec![IterationRecord {
        iteration: 0,
        cost: eval.cost.value(),
        control_change: 0.0,
    }];
    observer(&Iterate {
        iteration: 0,
        control: &eval.control,
        cost: eval.cost.value(),
    });
    let mut previous: Option<(ControlSignal, Vec<Vec3>)> = None;
    let mut lambda0 = settings.lambda0;
    let mut iteration = 0usize;

    let status = loop {
        if let Some((u_prev, _)) = &previous {
            let j = eval.cost.value();
            let j_prev = cost_history[cost_history.len() - 2];
            let cost_change = if j != 0.0 {
                ((j - j_prev) / j).abs()
            } else {
                (j - j_prev).abs()
            };
            let ctrl_change = relative_change(&eval.control, u_prev);
            if cost_change < settings.eps_cost && ctrl_change < settings.eps_ctrl {
                break Status::Converged;
            }
        }
        if iteration == settings.max_iters {
            break Status::MaxIters;
        }
        let phi = problem.switching(&eval)?;
        let grad = phi.interval_gradient().to_vec();
        let fallback = *lambda0.get_or_insert_with(|| initial_step(&problem.prism, &grad));
        let lambda = match &previous {
            None => fallback,
            Some((u_prev, g_prev)) => {
                settings.step_scale
                    * bb_step(u_prev, &eval.control, g_prev, &grad, fallback, settings.bb_denominator)
            }
        };
        let next = project_to_prism(&eval.control.offset(lambda, &grad), &problem.prism);
        let new_eval = problem.evaluate(&next)?;
        iteration += 1;
        let change = relative_change(&new_eval.control, &eval.control);
        log::info!(
            "gpm iter {iteration}: J = {:.10e}, step = {lambda:.3e}, control change = {change:.3e}",
            new_eval.cost.value()
        );
        cost_history.push(new_eval.cost.value());
        history.push(IterationRecord {
            iteration,
            cost: new_eval.cost.value(),
            control_change: change,
        });
        observer(&Iterate {
            iteration,
            control: &new_eval.control,
            cost: new_eval.cost.value(),
        });
        previous = Some((std::mem::replace(&mut eval, new_eval).control, grad));
    };
    log::info!("gpm finished: {status:?} after {iteration} iterations");
    let final_switching = problem.switching(&eval)?;
    Ok(OptimizerReport {
        method: Method::Gpm,
        status,
        iterations: iteration,
        cost_history,
        history,
        final_cost: eval.cost,
        final_control: eval.control,
        final_field: eval.field,
        final_switching,
        cycle_members: None,
    })
}

fn initial_step(prism: &Prism, grad: &[Vec3]) -> f64 {
    let width = prism.width().into_iter().fold(f64::INFINITY, f64::min);
    let gmax = grad
        .iter()
        .flat_map(|g| g.iter())
        .map(|x| x.abs())
        .fold(0.0, f64::max);
    if gmax > 0.0 && width > 0.0 {
        0.1 * width / gmax
    } else {
        1.0
    }
}

pub fn ipmp_optimize(
    problem: &ControlProblem,
    u0: &ControlSignal,
    settings: &IpmpSettings,
) -> Result<OptimizerReport> {
    ipmp_optimize_observed(problem, u0, settings, |_| {})
}

/// Fixed-point iteration `u ← Γ(ψ(u), χ(u))` on bang-bang controls.
///
/// Stops when the synthesized control repeats the current one (Converged) or
/// any other control among the last `cycle_window` iterates (Oscillating). In
/// the latter case the best-cost cycle member is returned.
pub fn ipmp_optimize_observed(
    problem: &ControlProblem,
    u0: &ControlSignal,
    settings: &IpmpSettings,
    mut observer: impl FnMut(&Iterate<'_>),
) -> Result<OptimizerReport> {
    settings.validate()?;
    problem.check_feasible(u0)?;
    let mut eval = problem.evaluate(u0)?;
    let mut cost_history = vec![eval.cost.value()];
    let mut history = vec![IterationRecord {
        iteration: 0,
        cost: eval.cost.value(),
        control_change: 0.0,
    }];
    observer(&Iterate {
        iteration: 0,
        control: &eval.control,
        cost: eval.cost.value(),
    });
    let mut window: VecDeque<CycleMember> = VecDeque::from([CycleMember {
        control: eval.control.clone(),
        cost: eval.cost.value(),
    }]);
    let mut outcome = None;
    let mut iteration = 0usize;
    let mut phi = problem.switching(&eval)?;

    while iteration < settings.max_iters {
        iteration += 1;
        let next = synthesize_bang_bang(&phi, &problem.prism, &eval.control);
        observer(&Iterate {
            iteration,
            control: &next,
            cost: f64::NAN,
        });
        if next == eval.control {
            cost_history.push(eval.cost.value());
            history.push(IterationRecord {
                iteration,
                cost: eval.cost.value(),
                control_change: 0.0,
            });
            log::info!("ipmp iter {iteration}: fixed point, J = {:.10e}", eval.cost.value());
            outcome = Some((Status::Converged, None));
            break;
        }
        if let Some(pos) = window.iter().position(|m| m.control == next) {
            let cycle: Vec<CycleMember> = window.iter().skip(pos).cloned().collect();
            cost_history.push(window[pos].cost);
            history.push(IterationRecord {
                iteration,
                cost: window[pos].cost,
                control_change: relative_change(&next, &eval.control),
            });
            log::info!(
                "ipmp iter {iteration}: cycle of period {} detected",
                cycle.len()
            );
            outcome = Some((Status::Oscillating, Some(cycle)));
            break;
        }
        let change = relative_change(&next, &eval.control);
        eval = problem.evaluate(&next)?;
        log::info!(
            "ipmp iter {iteration}: J = {:.10e}, control change = {change:.3e}",
            eval.cost.value()
        );
        cost_history.push(eval.cost.value());
        history.push(IterationRecord {
            iteration,
            cost: eval.cost.value(),
            control_change: change,
        });
        window.push_back(CycleMember {
            control: eval.control.clone(),
            cost: eval.cost.value(),
        });
        while window.len() > settings.cycle_window {
            window.pop_front();
        }
        phi = problem.switching(&eval)?;
    }

    let (status, cycle_members) = outcome.unwrap_or((Status::MaxIters, None));
    if let Some(cycle) = &cycle_members {
        let best = cycle
            .iter()
            .max_by(|a, b| a.cost.total_cmp(&b.cost))
            .expect("cycle has members");
        if best.control != eval.control {
            eval = problem.evaluate(&best.control)?;
            phi = problem.switching(&eval)?;
        }
    }
    log::info!("ipmp finished: {status:?} after {iteration} iterations");
    Ok(OptimizerReport {
        method: Method::Ipmp,
        status,
        iterations: iteration,
        cost_history,
        history,
        final_cost: eval.cost,
        final_control: eval.control,
        final_field: eval.field,
        final_switching: phi,
        cycle_members,
    })
}

/// Whether every value of `u` sits at a prism bound, componentwise.
pub fn is_bang_bang(u: &ControlSignal, prism: &Prism) -> bool {
    u.values
        .iter()
        .all(|v| (0..3).all(|i| v[i] == prism.lower[i] || v[i] == prism.upper[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(steps: usize) -> TimeGrid {
        TimeGrid::new(1.0, steps).unwrap()
    }

    #[test]
    fn projection_cases() {
        let prism = Prism::cube(3.0, 6.0);
        let g = grid(3);
        let inside = ControlSignal::constant(g, [4.0, 5.0, 3.0]);
        assert_eq!(project_to_prism(&inside, &prism), inside);
        let above = ControlSignal::constant(g, [7.0; 3]);
        assert_eq!(project_to_prism(&above, &prism).values, vec![[6.0; 3]; 3]);
        let mixed = ControlSignal::constant(g, [2.0, 7.0, 4.0]);
        assert_eq!(project_to_prism(&mixed, &prism).values[0], [3.0, 6.0, 4.0]);
    }

    #[test]
    fn bb_step_recovers_inverse_curvature() {
        let g = grid(4);
        let u_prev = ControlSignal::constant(g, [3.0, 4.0, 5.0]);
        let du = [[0.1, -0.2, 0.3], [0.0, 0.5, -0.1], [0.2, 0.2, 0.2], [-0.4, 0.1, 0.0]];
        let u_cur = u_prev.offset(1.0, &du);
        let g_prev = vec![[1.0, 2.0, 3.0]; 4];
        let c = 2.5;
        let g_cur: Vec<Vec3> = g_prev
            .iter()
            .zip(&du)
            .map(|(a, d)| std::array::from_fn(|i| a[i] + c * d[i]))
            .collect();
        let lambda = bb_step(&u_prev, &u_cur, &g_prev, &g_cur, 9.0, BbDenominator::Squared);
        assert!((lambda - 1.0 / c).abs() < 1e-12);
    }

    #[test]
    fn bb_step_falls_back_on_zero_gradient_change() {
        let g = grid(4);
        let u_prev = ControlSignal::constant(g, [3.0; 3]);
        let u_cur = ControlSignal::constant(g, [4.0; 3]);
        let grad = vec![[1.0; 3]; 4];
        assert_eq!(
            bb_step(&u_prev, &u_cur, &grad, &grad, 0.7, BbDenominator::Squared),
            0.7
        );
    }

    #[test]
    fn bb_step_matches_hand_computation() {
        // h = 0.25; du, dg chosen by hand.
        let g = grid(4);
        let u_prev = ControlSignal::constant(g, [0.0; 3]);
        let du = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, -1.0], [1.0, 1.0, 1.0]];
        let dg = [[2.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 3.0], [0.0, 1.0, 0.0]];
        let u_cur = u_prev.offset(1.0, &du);
        let zero = vec![[0.0; 3]; 4];
        // ⟨du,dg⟩ = 0.25 (2 + 2 − 3 + 1) = 0.5; ‖dg‖² = 0.25 (4 + 1 + 9 + 1) = 3.75.
        let squared = bb_step(&u_prev, &u_cur, &zero, &dg, 1.0, BbDenominator::Squared);
        assert!((squared - 0.5 / 3.75).abs() < 1e-12);
        let literal = bb_step(&u_prev, &u_cur, &zero, &dg, 1.0, BbDenominator::Norm);
        assert!((literal - 0.5 / 3.75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn synthesis_sign_rule_and_ties() {
        let g = grid(4);
        let prism = Prism::new([3.0, 3.0, -1.0], [6.0, 6.0, 2.0]).unwrap();
        let prev = ControlSignal::constant(g, [4.0, 5.0, 0.5]);
        let positive = SwitchingSignal::from_nodes(g, vec![[1.0; 3]; 5]);
        assert_eq!(
            synthesize_bang_bang(&positive, &prism, &prev).values,
            vec![[6.0, 6.0, 2.0]; 4]
        );
        let zero = SwitchingSignal::from_nodes(g, vec![[0.0; 3]; 5]);
        assert_eq!(synthesize_bang_bang(&zero, &prism, &prev), prev);
    }

    #[test]
    fn synthesis_single_switch() {
        let steps = 40;
        let g = grid(steps);
        let prism = Prism::cube(3.0, 6.0);
        let values = (0..=steps)
            .map(|k| {
                let t = g.node(k);
                // Sign change between nodes 20 and 21, off the interval midpoint.
                [(std::f64::consts::PI * (0.515 - t)).sin(), 1.0, -1.0]
            })
            .collect();
        let phi = SwitchingSignal::from_nodes(g, values);
        let prev = ControlSignal::constant(g, [4.0; 3]);
        let u = synthesize_bang_bang(&phi, &prism, &prev);
        let switches = u.values.windows(2).filter(|w| w[0][0] != w[1][0]).count();
        assert_eq!(switches, 1);
        assert!(u.values[..21].iter().all(|v| v[0] == 6.0));
        assert!(u.values[21..].iter().all(|v| v[0] == 3.0));
        assert!(is_bang_bang(&u, &prism));
    }

    #[test]
    fn settings_validation() {
        assert!(GpmSettings {
            eps_cost: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(IpmpSettings {
            cycle_window: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(IpmpSettings::default().validate().is_ok());
    }
}
