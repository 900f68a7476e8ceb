//! Spin Hamiltonian assembly.
//!
//! Solver units: ħ = 1, time in μs, energies in rad/μs, magnetic fields in mT
//! inside this module. Control-facing code works in μT and converts through
//! [`ut_to_mt`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spin_algebra::{ComplexMatrix, ComplexVector, SpinSystem};

/// Electron gyromagnetic ratio `μ_B g / ħ` for g = 2.0023, in rad·μs⁻¹·mT⁻¹.
pub const ELECTRON_GYRO: f64 = 176.0859;

/// Millitesla per microtesla.
pub const MT_PER_UT: f64 = 1e-3;

pub fn ut_to_mt(v: [f64; 3]) -> [f64; 3] {
    v.map(|x| x * MT_PER_UT)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConstants {
    /// rad·μs⁻¹·mT⁻¹
    pub gyro: f64,
    /// μs⁻¹
    pub k_singlet: f64,
    /// μs⁻¹
    pub k_triplet: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            gyro: ELECTRON_GYRO,
            k_singlet: 10.0,
            k_triplet: 10.0,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.gyro > 0.0) {
            return Err(Error::config("constants.gyro", "must be positive"));
        }
        if !(self.k_singlet >= 0.0) {
            return Err(Error::config("constants.k_singlet", "must be non-negative"));
        }
        if !(self.k_triplet >= 0.0) {
            return Err(Error::config("constants.k_triplet", "must be non-negative"));
        }
        Ok(())
    }
}

/// Hyperfine coupling vectors `A_j`, one row per proton, in mT.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HyperfineTable {
    pub rows: Vec<[f64; 3]>,
}

impl HyperfineTable {
    /// Reference couplings: three tabulated protons, then a repeated row for
    /// every further proton.
    pub fn reference(protons: usize) -> Self {
        const TABLE: [[f64; 3]; 3] = [
            [-0.234, -0.234, 0.117],
            [-0.030, -0.022, 0.688],
            [0.238, 0.357, 0.117],
        ];
        const TAIL: [f64; 3] = [-0.218, -0.202, -0.054];
        let rows = (0..protons)
            .map(|j| TABLE.get(j).copied().unwrap_or(TAIL))
            .collect();
        Self { rows }
    }

    pub fn zeros(protons: usize) -> Self {
        Self {
            rows: vec![[0.0; 3]; protons],
        }
    }

    /// Parses a JSON array of 3-element arrays (mT).
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// `gyro · Σ_j Σ_i A_ji I_ji S₁i`.
pub fn build_hfi(
    sys: &SpinSystem,
    constants: &PhysicalConstants,
    table: &HyperfineTable,
) -> Result<ComplexMatrix> {
    if table.len() != sys.protons() {
        return Err(Error::HyperfineRowMismatch {
            rows: table.len(),
            protons: sys.protons(),
        });
    }
    let n = sys.dim();
    let mut h = ComplexMatrix::zeros(n, n);
    for (nucleus, coupling) in sys.nuclei().iter().zip(&table.rows) {
        for i in 0..3 {
            if coupling[i] == 0.0 {
                continue;
            }
            let term = nucleus[i].matmul(&sys.s1()[i]);
            h.add_scaled(Complex64::new(constants.gyro * coupling[i], 0.0), &term);
        }
    }
    Ok(h)
}

/// Haberkorn recombination operator `K = (k_S P_S + k_T P_T) / 2`.
pub fn build_recombination(sys: &SpinSystem, constants: &PhysicalConstants) -> ComplexMatrix {
    let mut k = sys.projector_singlet().scale_real(0.5 * constants.k_singlet);
    k.add_scaled(
        Complex64::new(0.5 * constants.k_triplet, 0.0),
        sys.projector_triplet(),
    );
    k
}

/// Everything needed to evaluate `H(v)` and its adjoint at any field.
#[derive(Debug, Clone)]
pub struct ModelAssembly {
    sys: SpinSystem,
    constants: PhysicalConstants,
    h_hfi: ComplexMatrix,
    k_op: ComplexMatrix,
    zeeman: [ComplexMatrix; 3],
    static_forward: ComplexMatrix,
    static_adjoint: ComplexMatrix,
}

impl ModelAssembly {
    pub fn new(
        sys: SpinSystem,
        constants: PhysicalConstants,
        table: &HyperfineTable,
    ) -> Result<Self> {
        constants.validate()?;
        let h_hfi = build_hfi(&sys, &constants, table)?;
        let k_op = build_recombination(&sys, &constants);
        let zeeman = std::array::from_fn(|i| {
            (&sys.s1()[i] + &sys.s2()[i]).scale_real(constants.gyro)
        });
        let mut static_forward = h_hfi.clone();
        static_forward.add_scaled(Complex64::new(0.0, -1.0), &k_op);
        let mut static_adjoint = h_hfi.clone();
        static_adjoint.add_scaled(Complex64::new(0.0, 1.0), &k_op);
        Ok(Self {
            sys,
            constants,
            h_hfi,
            k_op,
            zeeman,
            static_forward,
            static_adjoint,
        })
    }

    pub fn system(&self) -> &SpinSystem {
        &self.sys
    }

    pub fn constants(&self) -> &PhysicalConstants {
        &self.constants
    }

    pub fn h_hfi(&self) -> &ComplexMatrix {
        &self.h_hfi
    }

    pub fn k_op(&self) -> &ComplexMatrix {
        &self.k_op
    }

    /// `Z_i = gyro (S₁i + S₂i)`.
    pub fn zeeman_generators(&self) -> &[ComplexMatrix; 3] {
        &self.zeeman
    }

    /// `H(v) = Σ v_i Z_i + H_hfi − iK`, or `H*(v)` with `+iK` when `adjoint`.
    /// `field_mt` is in mT.
    pub fn hamiltonian_at(&self, field_mt: [f64; 3], adjoint: bool) -> ComplexMatrix {
        let mut h = if adjoint {
            self.static_adjoint.clone()
        } else {
            self.static_forward.clone()
        };
        for (z, &v) in self.zeeman.iter().zip(&field_mt) {
            if v != 0.0 {
                h.add_scaled(Complex64::new(v, 0.0), z);
            }
        }
        h
    }
}

/// Triplet initial states ordered T0 block, T+ block, T− block.
#[derive(Debug, Clone)]
pub struct TripletBasis {
    pub states: Vec<ComplexVector>,
}

impl TripletBasis {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Builds the `3·2^p` triplet states of the product basis.
///
/// With `b = 2^p` and zero-based indices, T0 states are
/// `(e_{b+j} + e_{2b+j})/√2`, T+ states are `e_j` and T− states are
/// `e_{3b+j}` for `j < b`. The T0 combination is the symmetric one: the
/// antisymmetric combination of |↑↓⟩ and |↓↑⟩ is the singlet.
pub fn triplet_states(sys: &SpinSystem) -> TripletBasis {
    let n = sys.dim();
    let block = 1usize << sys.protons();
    let amp = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut states = Vec::with_capacity(3 * block);
    for j in 0..block {
        let mut v = ComplexVector::zeros(n);
        v[block + j] = amp;
        v[2 * block + j] = amp;
        states.push(v);
    }
    states.extend((0..block).map(|j| ComplexVector::basis(n, j)));
    states.extend((0..block).map(|j| ComplexVector::basis(n, 3 * block + j)));
    TripletBasis { states }
}
