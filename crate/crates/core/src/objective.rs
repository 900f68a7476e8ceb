//! Singlet yield, switching function and Pontryagin diagnostics.

use serde::{Deserialize, Serialize};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{
    adjoint_slope, forward_midpoint, half_step_state, hamiltonians, weighted_dot, ControlSignal,
    FieldModel, FieldTrajectory, HalfStepRule, Prism, StateEnsemble, TimeGrid, Vec3,
};
use crate::error::{Error, Result};
use crate::model::{ModelAssembly, MT_PER_UT};

/// Value of the singlet-yield functional.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostValue(pub f64);

impl CostValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Gradient of the yield with respect to the control, in μT⁻¹.
///
/// `values` samples the switching function at the grid nodes (used for sign
/// tests); `interval` holds its exact mean over each interval, which is the
/// gradient with respect to the piecewise-constant control value per unit
/// interval length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingSignal {
    pub grid: TimeGrid,
    pub values: Vec<Vec3>,
    pub interval: Vec<Vec3>,
}

impl SwitchingSignal {
    /// Builds a signal from node samples only, taking interval means as the
    /// average of the two end nodes.
    pub fn from_nodes(grid: TimeGrid, values: Vec<Vec3>) -> Self {
        let interval = values
            .windows(2)
            .map(|w| std::array::from_fn(|i| 0.5 * (w[0][i] + w[1][i])))
            .collect();
        SwitchingSignal {
            grid,
            values,
            interval,
        }
    }

    pub fn interval_gradient(&self) -> &[Vec3] {
        &self.interval
    }

    /// `⟨φ, δu⟩` in the discrete L² sense.
    pub fn directional_derivative(&self, direction: &[Vec3]) -> f64 {
        weighted_dot(self.grid.step(), &self.interval, direction)
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .map(|x| x.abs())
            .fold(0.0, f64::max)
    }
}

/// Composite trapezoid rule on uniformly spaced samples.
pub fn trapezoid(h: f64, samples: &[f64]) -> f64 {
    match samples {
        [] | [_] => 0.0,
        [first, inner @ .., last] => h * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Composite Simpson rule from node samples and interval midpoint samples.
pub fn simpson(h: f64, nodes: &[f64], midpoints: &[f64]) -> f64 {
    nodes
        .windows(2)
        .zip(midpoints)
        .map(|(w, m)| h / 6.0 * (w[0] + 4.0 * m + w[1]))
        .sum()
}

fn check_nodes(ensemble: &StateEnsemble, grid: &TimeGrid) -> Result<()> {
    if ensemble.nodes() != grid.steps() + 1 {
        return Err(Error::GridMismatch(format!(
            "ensemble has {} nodes, grid has {}",
            ensemble.nodes(),
            grid.steps() + 1
        )));
    }
    Ok(())
}

fn check_field(field: &FieldTrajectory, grid: &TimeGrid) -> Result<()> {
    if field.steps() != grid.steps() {
        return Err(Error::GridMismatch(format!(
            "field has {} intervals, grid has {}",
            field.steps(),
            grid.steps()
        )));
    }
    Ok(())
}

/// Singlet yield `k_S / (3·2^{p+1}) Σ_l ∫ ⟨ψ^l|P_S|ψ^l⟩ dt`.
///
/// The time integral uses Simpson's rule with midpoint states reconstructed
/// by `rule`, so that it matches the accuracy of the RK4 trajectories.
pub fn singlet_yield(
    forward: &StateEnsemble,
    assembly: &ModelAssembly,
    field: &FieldTrajectory,
    grid: &TimeGrid,
    rule: HalfStepRule,
) -> Result<CostValue> {
    check_nodes(forward, grid)?;
    check_field(field, grid)?;
    let sys = assembly.system();
    let ps = sys.projector_singlet();
    let h = grid.step();
    let prefactor = assembly.constants().k_singlet / (3u64 << (sys.protons() + 1)) as f64;
    let pop = |psi: &[Complex64]| ps.expectation(psi, psi).re;
    let nodes: Vec<f64> = (0..=grid.steps())
        .map(|k| forward.trajectories.iter().map(|t| pop(t[k].as_slice())).sum())
        .collect();
    let midpoints: Vec<f64> = (0..grid.steps())
        .map(|k| {
            let ops = hamiltonians(assembly, field.interval_samples(k), false);
            forward
                .trajectories
                .iter()
                .map(|t| pop(&forward_midpoint(rule, &ops, t[k].as_slice(), t[k + 1].as_slice(), h)))
                .sum()
        })
        .collect();
    Ok(CostValue(prefactor * simpson(h, &nodes, &midpoints)))
}

/// Interaction density sampled at the grid nodes and interval midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySamples {
    pub nodes: Vec<Vec3>,
    pub midpoints: Vec<Vec3>,
}

/// `m_i(t) = gyro / (3·2^{p−1}) Σ_l Im⟨χ^l|S₁i + S₂i|ψ^l⟩`, per μT of field.
pub fn interaction_density(
    forward: &StateEnsemble,
    adjoint: &StateEnsemble,
    assembly: &ModelAssembly,
    field: &FieldTrajectory,
    grid: &TimeGrid,
    rule: HalfStepRule,
) -> Result<DensitySamples> {
    check_nodes(forward, grid)?;
    check_nodes(adjoint, grid)?;
    check_field(field, grid)?;
    if forward.count() != adjoint.count() {
        return Err(Error::GridMismatch(format!(
            "{} forward states but {} adjoint states",
            forward.count(),
            adjoint.count()
        )));
    }
    let p = assembly.system().protons();
    let h = grid.step();
    // Zeeman generators already carry the gyromagnetic factor, per mT.
    let prefactor = MT_PER_UT * 2.0 / (3u64 << p) as f64;
    let generators = assembly.zeeman_generators();
    let density = |pairs: &[(Vec<Complex64>, Vec<Complex64>)]| -> Vec3 {
        std::array::from_fn(|i| {
            prefactor
                * pairs
                    .iter()
                    .map(|(chi, psi)| generators[i].expectation(chi, psi).im)
                    .sum::<f64>()
        })
    };
    let pairs = forward.trajectories.iter().zip(&adjoint.trajectories);
    let nodes = (0..=grid.steps())
        .map(|k| {
            let at: Vec<_> = pairs
                .clone()
                .map(|(psi, chi)| (chi[k].as_slice().to_vec(), psi[k].as_slice().to_vec()))
                .collect();
            density(&at)
        })
        .collect();
    let midpoints = (0..grid.steps())
        .map(|k| {
            let samples = field.interval_samples(k);
            let fwd = hamiltonians(assembly, samples, false);
            let adj = match rule {
                HalfStepRule::Average => None,
                HalfStepRule::Hermite => Some(hamiltonians(assembly, samples, true)),
            };
            let at: Vec<_> = pairs
                .clone()
                .map(|(psi, chi)| {
                    let (p0, p1) = (psi[k].as_slice(), psi[k + 1].as_slice());
                    let (c0, c1) = (chi[k].as_slice(), chi[k + 1].as_slice());
                    let psi_mid = forward_midpoint(rule, &fwd, p0, p1, h);
                    let chi_mid = match &adj {
                        None => half_step_state(c0, c1, None, h),
                        Some(adj) => {
                            let d0 = adjoint_slope(assembly, &adj[0], c0, p0);
                            let d1 = adjoint_slope(assembly, &adj[2], c1, p1);
                            half_step_state(c0, c1, Some((&d0, &d1)), h)
                        }
                    };
                    (chi_mid, psi_mid)
                })
                .collect();
            density(&at)
        })
        .collect();
    Ok(DensitySamples { nodes, midpoints })
}

/// `μ_n(a) = ∫_0^1 xⁿ e^{−a x} dx` and `ν_n(a) = ∫_0^1 xⁿ (1 − e^{−a x}) dx`
/// for `n = 0, 1, 2`.
fn kernel_moments(a: f64) -> ([f64; 3], [f64; 3]) {
    if a < 2.0 {
        // ν_n = −Σ_{j≥1} (−a)^j / (j! (n + j + 1)); safe for small a.
        let mut nu = [0.0; 3];
        let mut term = 1.0;
        for j in 1..60 {
            term *= -a / j as f64;
            for (n, v) in nu.iter_mut().enumerate() {
                *v -= term / (n + j + 1) as f64;
            }
            if term.abs() < 1e-18 {
                break;
            }
        }
        let mu = std::array::from_fn(|n| 1.0 / (n + 1) as f64 - nu[n]);
        (mu, nu)
    } else {
        let e = (-a).exp();
        let m0 = -(-a).exp_m1() / a;
        let m1 = (m0 - e) / a;
        let m2 = (2.0 * m1 - e) / a;
        let mu = [m0, m1, m2];
        let nu = std::array::from_fn(|n| 1.0 / (n + 1) as f64 - mu[n]);
        (mu, nu)
    }
}

/// Weights of the quadratic Lagrange basis on nodes `0, ½, 1` against the
/// given moments.
fn lagrange_weights(m: [f64; 3]) -> [f64; 3] {
    [
        2.0 * m[2] - 3.0 * m[1] + m[0],
        4.0 * m[1] - 4.0 * m[2],
        2.0 * m[2] - m[1],
    ]
}

/// `w(t) = γ ∫_t^T m(τ) e^{γ(t−τ)} dτ` at the grid nodes together with its
/// exact mean over each interval, for `m` interpolated quadratically through
/// the node and midpoint samples.
pub fn exponential_tail(density: &DensitySamples, gamma: f64, h: f64) -> (Vec<Vec3>, Vec<Vec3>) {
    let steps = density.midpoints.len();
    let a = gamma * h;
    let decay = (-a).exp();
    let (mu, nu) = kernel_moments(a);
    let w_tail = lagrange_weights(mu);
    let w_local = lagrange_weights(nu);
    // (1 − e^{−a}) / a: carries the downstream tail into the interval mean.
    let carry = if a < 1e-8 { 1.0 - 0.5 * a } else { -(-a).exp_m1() / a };
    let mut nodes = vec![[0.0; 3]; steps + 1];
    let mut interval = vec![[0.0; 3]; steps];
    for k in (0..steps).rev() {
        for i in 0..3 {
            let m = [density.nodes[k][i], density.midpoints[k][i], density.nodes[k + 1][i]];
            let dot = |w: [f64; 3]| w[0] * m[0] + w[1] * m[1] + w[2] * m[2];
            let next = nodes[k + 1][i];
            nodes[k][i] = decay * next + a * dot(w_tail);
            interval[k][i] = dot(w_local) + carry * next;
        }
    }
    (nodes, interval)
}

/// Gradient of the singlet yield with respect to the control.
///
/// Filtered mode returns the exponentially weighted tail of the interaction
/// density; no-filter mode returns the density itself, with Simpson interval
/// means.
pub fn switching_function(
    forward: &StateEnsemble,
    adjoint: &StateEnsemble,
    assembly: &ModelAssembly,
    model: &FieldModel,
    field: &FieldTrajectory,
    grid: &TimeGrid,
    rule: HalfStepRule,
) -> Result<SwitchingSignal> {
    let density = interaction_density(forward, adjoint, assembly, field, grid, rule)?;
    let (values, interval) = match model {
        FieldModel::Filtered(cfg) => exponential_tail(&density, cfg.gamma, grid.step()),
        FieldModel::NoFilter => {
            let interval = density
                .nodes
                .windows(2)
                .zip(&density.midpoints)
                .map(|(w, m)| std::array::from_fn(|i| (w[0][i] + 4.0 * m[i] + w[1][i]) / 6.0))
                .collect();
            (density.nodes, interval)
        }
    };
    Ok(SwitchingSignal {
        grid: *grid,
        values,
        interval,
    })
}

/// Hamilton-Pontryagin density `φ̄_k · u_k` on each interval, with `φ̄_k` the
/// interval mean of the switching function.
pub fn hp_density(phi: &SwitchingSignal, u: &ControlSignal) -> Vec<f64> {
    phi.interval
        .iter()
        .zip(&u.values)
        .map(|(f, v)| f[0] * v[0] + f[1] * v[1] + f[2] * v[2])
        .collect()
}

/// `∫ φ · u dt` with the interval pairing of [`hp_density`].
pub fn integrated_hp(phi: &SwitchingSignal, u: &ControlSignal) -> f64 {
    u.grid.step() * hp_density(phi, u).iter().sum::<f64>()
}

/// Default dead band for sign tests: `1e-8 · max|φ|`.
pub fn default_dead_band(phi: &SwitchingSignal) -> f64 {
    1e-8 * phi.max_abs()
}

/// Bound selected by the sign of `phi`, or `None` when `|phi| <= dead_band`.
pub(crate) fn selected_bound(phi: f64, lower: f64, upper: f64, dead_band: f64) -> Option<f64> {
    if phi > dead_band {
        Some(upper)
    } else if phi < -dead_band {
        Some(lower)
    } else {
        None
    }
}

/// Fraction of decisive (interval, component) pairs where `u` is not at the
/// bound selected by the sign of the interval mean of `φ`.
pub fn pmp_residual(phi: &SwitchingSignal, u: &ControlSignal, prism: &Prism, dead_band: f64) -> f64 {
    let mut decisive = 0usize;
    let mut violated = 0usize;
    for (f, v) in phi.interval.iter().zip(&u.values) {
        for i in 0..3 {
            if let Some(bound) = selected_bound(f[i], prism.lower[i], prism.upper[i], dead_band) {
                decisive += 1;
                if v[i] != bound {
                    violated += 1;
                }
            }
        }
    }
    if decisive == 0 {
        0.0
    } else {
        violated as f64 / decisive as f64
    }
}

/// Maximum-principle check at a candidate optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmpCertificate {
    pub residual: f64,
    pub dead_band: f64,
    /// `∫ φ · u` at the candidate.
    pub hp_candidate: f64,
    /// Largest `∫ φ · u` among the random feasible samples.
    pub hp_best_sample: f64,
    pub samples: usize,
    /// Zero residual and no sample beating the candidate.
    pub holds: bool,
}

/// Sign consistency of `u` with `φ`, and `∫ φ·u ≥ ∫ φ·w` for `samples`
/// random feasible controls `w` drawn from `seed`.
pub fn pmp_certificate(
    phi: &SwitchingSignal,
    u: &ControlSignal,
    prism: &Prism,
    samples: usize,
    seed: u64,
) -> PmpCertificate {
    let dead_band = default_dead_band(phi);
    let residual = pmp_residual(phi, u, prism, dead_band);
    let hp_candidate = integrated_hp(phi, u);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hp_best_sample = (0..samples)
        .map(|_| integrated_hp(phi, &ControlSignal::random(u.grid, prism, &mut rng)))
        .fold(f64::NEG_INFINITY, f64::max);
    let slack = 1e-12 * hp_candidate.abs();
    PmpCertificate {
        residual,
        dead_band,
        hp_candidate,
        hp_best_sample,
        samples,
        holds: residual == 0.0 && hp_best_sample <= hp_candidate + slack,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{filter_field, integrate_adjoint, integrate_forward, HalfStepRule};
    use crate::model::{triplet_states, HyperfineTable, PhysicalConstants};
    use crate::spin_algebra::{build_spin_system, ComplexVector};
    use num_complex::Complex64;

    fn assembly() -> ModelAssembly {
        ModelAssembly::new(
            build_spin_system(1).unwrap(),
            PhysicalConstants::default(),
            &HyperfineTable::reference(1),
        )
        .unwrap()
    }

    #[test]
    fn trapezoid_exact_for_linear() {
        let samples: Vec<f64> = (0..=10).map(|k| 2.0 * k as f64 * 0.1 + 1.0).collect();
        assert!((trapezoid(0.1, &samples) - 2.0).abs() < 1e-14);
        assert_eq!(trapezoid(0.1, &[3.0]), 0.0);
    }

    #[test]
    fn zero_states_give_zero_yield() {
        let a = assembly();
        let grid = TimeGrid::new(0.5, 4).unwrap();
        let zero = StateEnsemble {
            trajectories: vec![vec![ComplexVector::zeros(8); 5]; 6],
        };
        let field = filter_field(&ControlSignal::constant(grid, [3.0; 3]), &FieldModel::NoFilter).unwrap();
        let j = singlet_yield(&zero, &a, &field, &grid, HalfStepRule::Hermite).unwrap();
        assert_eq!(j, CostValue(0.0));
    }

    #[test]
    fn constant_singlet_state_yield() {
        let a = assembly();
        let grid = TimeGrid::new(0.5, 7).unwrap();
        // (e_2 − e_4)/√2 (zero-based) is a singlet with the nucleus up.
        let mut s = ComplexVector::zeros(8);
        s[2] = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        s[4] = Complex64::new(-std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let ens = StateEnsemble {
            trajectories: vec![vec![s; 8]],
        };
        // Average midpoints reproduce the constant state exactly.
        let field = filter_field(&ControlSignal::constant(grid, [3.0; 3]), &FieldModel::NoFilter).unwrap();
        let j = singlet_yield(&ens, &a, &field, &grid, HalfStepRule::Average).unwrap().value();
        assert!((j - 5.0 / 12.0).abs() < 1e-14);
    }

    #[test]
    fn zero_adjoint_gives_zero_switching() {
        let a = assembly();
        let grid = TimeGrid::new(0.5, 10).unwrap();
        let u = ControlSignal::constant(grid, [3.0; 3]);
        let model = FieldModel::Filtered(crate::dynamics::FilterConfig {
            gamma: 1.0,
            v0: [3.0; 3],
        });
        let field = filter_field(&u, &model).unwrap();
        let fwd = integrate_forward(&a, &field, &triplet_states(a.system()), &grid).unwrap();
        let zero = StateEnsemble {
            trajectories: vec![vec![ComplexVector::zeros(8); 11]; 6],
        };
        let phi = switching_function(&fwd, &zero, &a, &model, &field, &grid, HalfStepRule::Average).unwrap();
        assert!(phi.values.iter().all(|v| *v == [0.0; 3]));
    }

    #[test]
    fn filtered_switching_vanishes_at_final_time() {
        let a = assembly();
        let grid = TimeGrid::new(0.5, 20).unwrap();
        let u = ControlSignal::constant(grid, [4.0, 5.0, 3.5]);
        let model = FieldModel::Filtered(crate::dynamics::FilterConfig {
            gamma: 10.0,
            v0: [3.0; 3],
        });
        let field = filter_field(&u, &model).unwrap();
        let fwd = integrate_forward(&a, &field, &triplet_states(a.system()), &grid).unwrap();
        let adj = integrate_adjoint(&a, &field, &fwd, &grid, HalfStepRule::Hermite).unwrap();
        let phi = switching_function(&fwd, &adj, &a, &model, &field, &grid, HalfStepRule::Hermite).unwrap();
        assert_eq!(phi.values[20], [0.0; 3]);
        assert!(phi.max_abs() > 0.0);
    }

    #[test]
    fn tail_recursion_handles_tiny_gamma() {
        let density = DensitySamples {
            nodes: vec![[1.0, 2.0, -1.0]; 11],
            midpoints: vec![[1.0, 2.0, -1.0]; 10],
        };
        let (w, mean) = exponential_tail(&density, 1e-9, 0.1);
        // γ ∫_t^T m e^{γ(t−τ)} dτ → γ m (T − t) as γ → 0, and the interval
        // mean of φ approaches γ m (T − t_k − h/2).
        for i in 0..3 {
            let m = density.nodes[0][i];
            assert!((w[0][i] - 1e-9 * m).abs() < 1e-15);
            assert!((mean[0][i] - 1e-9 * m * 0.95).abs() < 1e-15);
        }
    }

    #[test]
    fn hp_density_zero_and_vertex_maximality() {
        let grid = TimeGrid::new(1.0, 3).unwrap();
        let prism = Prism::cube(3.0, 6.0);
        let phi = SwitchingSignal::from_nodes(grid, vec![[1.0, -2.0, 0.5], [-1.0, 1.0, -3.0], [0.2, 0.2, 0.2], [0.0; 3]]);
        let zero = SwitchingSignal::from_nodes(grid, vec![[0.0; 3]; 4]);
        let u = ControlSignal::constant(grid, [4.0; 3]);
        assert!(hp_density(&zero, &u).iter().all(|&d| d == 0.0));
        let best: Vec<Vec3> = phi.interval
            .iter()
            .map(|f| std::array::from_fn(|i| if f[i] > 0.0 { 6.0 } else { 3.0 }))
            .collect();
        let best = ControlSignal::new(grid, best).unwrap();
        let top = hp_density(&phi, &best);
        for corner in 0..8u32 {
            let v: Vec3 = std::array::from_fn(|i| if corner >> i & 1 == 1 { 6.0 } else { 3.0 });
            let other = hp_density(&phi, &ControlSignal::constant(grid, v));
            for (a, b) in top.iter().zip(&other) {
                assert!(a >= b);
            }
        }
        assert_eq!(pmp_residual(&phi, &best, &prism, 0.0), 0.0);
    }

    #[test]
    fn pmp_residual_full_violation() {
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let prism = Prism::cube(3.0, 6.0);
        let phi = SwitchingSignal::from_nodes(grid, vec![[1.0, -1.0, 1.0], [2.0, -2.0, 2.0], [0.0; 3]]);
        let anti = ControlSignal::constant(grid, [3.0, 6.0, 3.0]);
        assert_eq!(pmp_residual(&phi, &anti, &prism, 1e-3), 1.0);
    }
}
