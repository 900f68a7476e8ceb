//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use spinctrl::dynamics::{FieldModel, FilterConfig, HalfStepRule, Prism, TimeGrid};
use spinctrl::objective::DensitySamples;
use spinctrl::model::{triplet_states, HyperfineTable, ModelAssembly, PhysicalConstants};
use spinctrl::optimize::ControlProblem;
use spinctrl::spin_algebra::{build_spin_system, ComplexMatrix};

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn assembly(p: usize) -> ModelAssembly {
    let sys = build_spin_system(p).unwrap();
    ModelAssembly::new(sys, PhysicalConstants::default(), &HyperfineTable::reference(p)).unwrap()
}

pub fn problem(p: usize, steps: usize, field_model: FieldModel, prism: Prism) -> ControlProblem {
    let assembly = assembly(p);
    let basis = triplet_states(assembly.system());
    ControlProblem {
        assembly,
        basis,
        grid: TimeGrid::new(0.5, steps).unwrap(),
        field_model,
        prism,
        half_step: HalfStepRule::default(),
    }
}

pub fn filtered(gamma: f64, v0: [f64; 3]) -> FieldModel {
    FieldModel::Filtered(FilterConfig { gamma, v0 })
}

fn matmul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// `exp(A)` by scaling and squaring of a truncated Taylor series.
pub fn expm(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.rows();
    let norm: f64 = (0..n)
        .map(|i| a.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = 0.5f64.powi(squarings as i32);
    let scaled: Vec<Complex64> = a.entries().iter().map(|z| z * scale).collect();
    let mut result = ComplexMatrix::identity(n).entries().to_vec();
    let mut term = result.clone();
    for k in 1..=30 {
        term = matmul(&term, &scaled, n);
        let inv = 1.0 / k as f64;
        term.iter_mut().for_each(|z| *z *= inv);
        for (r, t) in result.iter_mut().zip(&term) {
            *r += t;
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result, n);
    }
    ComplexMatrix::from_row_major(n, n, result)
}

/// `exp(−i H t)`.
pub fn propagator(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
    expm(&h.scale(-I * t))
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            loop {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-15 {
                    let w = 2.0 / ((1.0 - x * x) * dp * dp);
                    return (x, w);
                }
            }
        })
        .collect()
}

/// `∫_a^b f` with `rule` mapped from [-1, 1].
pub fn integrate(rule: &[(f64, f64)], a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.iter().map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}


/// Quadratic through `(0, m0)`, `(1/2, m1)`, `(1, m2)`.
fn quadratic(m: [f64; 3], x: f64) -> f64 {
    m[0] * 2.0 * (x - 0.5) * (x - 1.0) - m[1] * 4.0 * x * (x - 1.0) + m[2] * 2.0 * x * (x - 0.5)
}

/// Brute-force `w(t) = γ ∫_t^T m(τ) e^{γ(t−τ)} dτ` for `m` the quadratic
/// interpolant of node and midpoint samples.
pub struct TailOracle<'a> {
    pub density: &'a DensitySamples,
    pub gamma: f64,
    pub h: f64,
    pub rule: Vec<(f64, f64)>,
}

impl TailOracle<'_> {
    fn m(&self, i: usize, t: f64) -> f64 {
        let steps = self.density.midpoints.len();
        let k = ((t / self.h).floor() as usize).min(steps - 1);
        let x = t / self.h - k as f64;
        let d = self.density;
        quadratic([d.nodes[k][i], d.midpoints[k][i], d.nodes[k + 1][i]], x)
    }

    /// Composite Gauss rule: `PANELS` sub-panels per piece keep the sharp
    /// kernel of large γ resolved.
    fn quad(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        const PANELS: usize = 8;
        let w = (b - a) / PANELS as f64;
        (0..PANELS)
            .map(|j| integrate(&self.rule, a + j as f64 * w, a + (j + 1) as f64 * w, &mut f))
            .sum()
    }

    /// `γ ∫_t^T m(τ) e^{γ(t−τ)} dτ`, integrated piecewise between nodes.
    pub fn w(&self, i: usize, t: f64) -> f64 {
        let steps = self.density.midpoints.len();
        let t_final = self.h * steps as f64;
        let mut pieces = vec![t];
        let first = (t / self.h).floor() as usize + 1;
        pieces.extend((first..=steps).map(|k| k as f64 * self.h));
        if *pieces.last().unwrap() < t_final {
            pieces.push(t_final);
        }
        pieces
            .windows(2)
            .filter(|p| p[1] > p[0])
            .map(|p| {
                self.quad(p[0], p[1], |tau| {
                    self.gamma * self.m(i, tau) * (self.gamma * (t - tau)).exp()
                })
            })
            .sum()
    }

    pub fn interval_mean(&self, i: usize, k: usize) -> f64 {
        let (a, b) = (k as f64 * self.h, (k + 1) as f64 * self.h);
        self.quad(a, b, |t| self.w(i, t)) / self.h
    }
}
