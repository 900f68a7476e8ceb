//! Operator algebra and Hamiltonian assembly against independent
//! constructions.

mod common;

use common::{assembly, c, I};
use num_complex::Complex64;
use proptest::prelude::*;
use spinctrl::model::{triplet_states, ELECTRON_GYRO, MT_PER_UT};
use spinctrl::spin_algebra::{build_spin_system, kron, ComplexMatrix, ComplexVector};

const TOL: f64 = 1e-12;

fn sigma() -> [ComplexMatrix; 3] {
    let z = c(0.0);
    [
        ComplexMatrix::from_rows(&[[z, c(1.0)], [c(1.0), z]]),
        ComplexMatrix::from_rows(&[[z, -I], [I, z]]),
        ComplexMatrix::from_rows(&[[c(1.0), z], [z, c(-1.0)]]),
    ]
}

/// `(1/2) σ_i` in `slot` of a chain of `slots` qubits, built by folding
/// Kronecker products left to right.
fn spin_in_slot(i: usize, slot: usize, slots: usize) -> ComplexMatrix {
    let s = sigma();
    let mut out = ComplexMatrix::identity(1);
    for k in 0..slots {
        let factor = if k == slot { s[i].scale_real(0.5) } else { ComplexMatrix::identity(2) };
        out = kron(&out, &factor);
    }
    out
}

#[test]
fn spin_operators_obey_su2_and_commute_across_slots() {
    for p in 1..=4 {
        let sys = build_spin_system(p).unwrap();
        let mut triples = vec![sys.s1().clone(), sys.s2().clone()];
        triples.extend(sys.nuclei().iter().cloned());
        for t in &triples {
            for (a, b, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
                let lhs = t[a].commutator(&t[b]);
                let rhs = t[k].scale(I);
                assert!(lhs.max_abs_diff(&rhs) <= TOL, "p={p}");
            }
            assert!(t.iter().all(|op| op.is_hermitian(TOL)));
        }
        for (x, tx) in triples.iter().enumerate() {
            for ty in &triples[x + 1..] {
                for a in tx {
                    for b in ty {
                        assert!(a.commutator(b).max_abs() <= TOL, "p={p}");
                    }
                }
            }
        }
    }
}

#[test]
fn operators_match_direct_kronecker_chains() {
    for p in 1..=3 {
        let sys = build_spin_system(p).unwrap();
        let slots = p + 2;
        for i in 0..3 {
            assert!(sys.s1()[i].max_abs_diff(&spin_in_slot(i, 0, slots)) == 0.0);
            assert!(sys.s2()[i].max_abs_diff(&spin_in_slot(i, 1, slots)) == 0.0);
            for (j, nucleus) in sys.nuclei().iter().enumerate() {
                assert!(nucleus[i].max_abs_diff(&spin_in_slot(i, j + 2, slots)) == 0.0);
            }
        }
    }
}

/// Permutation swapping the two electron qubits (the two most significant
/// bits of the basis index).
fn electron_swap(p: usize) -> ComplexMatrix {
    let b = 1usize << p;
    let n = 4 * b;
    let mut m = ComplexMatrix::zeros(n, n);
    for idx in 0..n {
        let (e1, e2, nuc) = (idx / (2 * b), (idx / b) % 2, idx % b);
        let swapped = e2 * 2 * b + e1 * b + nuc;
        m[(swapped, idx)] = c(1.0);
    }
    m
}

#[test]
fn singlet_projector_is_the_antisymmetrizer() {
    // On two spin-1/2 particles S₁·S₂ = (2 SWAP − 1)/4, so P_S = (1 − SWAP)/2.
    for p in 1..=4 {
        let sys = build_spin_system(p).unwrap();
        let n = sys.dim();
        let swap = electron_swap(p);
        let expected = (&ComplexMatrix::identity(n) - &swap).scale_real(0.5);
        assert!(sys.projector_singlet().max_abs_diff(&expected) <= TOL, "p={p}");
        let ps = sys.projector_singlet();
        let pt = sys.projector_triplet();
        assert!((ps * ps).max_abs_diff(ps) <= TOL);
        assert!((pt * pt).max_abs_diff(pt) <= TOL);
        assert!((ps * pt).max_abs() <= TOL);
        assert!((ps + pt).max_abs_diff(&ComplexMatrix::identity(n)) <= TOL);
        assert!((ps.trace().re - (1 << p) as f64).abs() <= 1e-9);
        assert!((pt.trace().re - (3 << p) as f64).abs() <= 1e-9);
    }
}

#[test]
fn singlet_states_span_the_projector() {
    // (|↑↓⟩ − |↓↑⟩)/√2 ⊗ |j⟩ for each nuclear basis state j.
    for p in 1..=3 {
        let sys = build_spin_system(p).unwrap();
        let (n, b) = (sys.dim(), 1usize << p);
        let amp = std::f64::consts::FRAC_1_SQRT_2;
        let mut rebuilt = ComplexMatrix::zeros(n, n);
        for j in 0..b {
            let mut v = ComplexVector::zeros(n);
            v[b + j] = c(amp);
            v[2 * b + j] = c(-amp);
            let pv = sys.projector_singlet().apply(&v);
            assert!(pv.max_abs_diff(&v) <= TOL);
            for r in 0..n {
                for s in 0..n {
                    rebuilt[(r, s)] += v[r] * v[s].conj();
                }
            }
        }
        assert!(rebuilt.max_abs_diff(sys.projector_singlet()) <= TOL, "p={p}");
    }
}

#[test]
fn triplet_states_are_orthonormal_and_triplet() {
    for p in 1..=3 {
        let sys = build_spin_system(p).unwrap();
        let basis = triplet_states(&sys);
        assert_eq!(basis.len(), 3 << p);
        for (a, x) in basis.states.iter().enumerate() {
            for (b, y) in basis.states.iter().enumerate() {
                let g = x.inner(y);
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((g - c(expected)).norm() <= TOL);
            }
            assert!(sys.projector_singlet().apply(x).max_abs() <= 1e-10);
            assert!(sys.projector_triplet().apply(x).max_abs_diff(x) <= 1e-10);
        }
    }
}

#[test]
fn hamiltonian_matches_a_raw_kronecker_sum() {
    let a = assembly(1);
    let v_mt = [3.0 * MT_PER_UT; 3];
    let table = [-0.234, -0.234, 0.117];
    let n = 8;
    let mut h = ComplexMatrix::zeros(n, n);
    for i in 0..3 {
        let s1 = spin_in_slot(i, 0, 3);
        let s2 = spin_in_slot(i, 1, 3);
        let i1 = spin_in_slot(i, 2, 3);
        h.add_scaled(c(ELECTRON_GYRO * v_mt[i]), &(&s1 + &s2));
        h.add_scaled(c(ELECTRON_GYRO * table[i]), &(&i1 * &s1));
    }
    // k_S = k_T = 10 makes K = 5 I.
    h.add_scaled(-I * 5.0, &ComplexMatrix::identity(n));
    assert!(a.hamiltonian_at(v_mt, false).max_abs_diff(&h) <= TOL);
    let h_adj = a.hamiltonian_at(v_mt, true);
    let expected_adj = &h + &ComplexMatrix::identity(n).scale(I * 10.0);
    assert!(h_adj.max_abs_diff(&expected_adj) <= TOL);
}

#[test]
fn hamiltonian_is_affine_in_the_field() {
    let a = assembly(2);
    let h0 = a.hamiltonian_at([0.0; 3], false);
    let v1 = [0.003, -0.001, 0.004];
    let v2 = [0.002, 0.005, -0.006];
    let (alpha, beta) = (0.7, -1.3);
    let mix: [f64; 3] = std::array::from_fn(|i| alpha * v1[i] + beta * v2[i]);
    let d1 = &a.hamiltonian_at(v1, false) - &h0;
    let d2 = &a.hamiltonian_at(v2, false) - &h0;
    let mut expected = h0.clone();
    expected.add_scaled(c(alpha), &d1);
    expected.add_scaled(c(beta), &d2);
    assert!(a.hamiltonian_at(mix, false).max_abs_diff(&expected) <= TOL);
    // The anti-Hermitian part is −iK whatever the field.
    let h = a.hamiltonian_at(v1, false);
    let anti = (&h - &h.adjoint()).scale_real(0.5);
    assert!(anti.max_abs_diff(&a.k_op().scale(-I)) <= TOL);
}

fn small_matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), rows * cols).prop_map(move |v| {
        ComplexMatrix::from_row_major(rows, cols, v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
    })
}

proptest! {
    #[test]
    fn kron_is_associative(a in small_matrix(2, 3), b in small_matrix(3, 2), cm in small_matrix(2, 2)) {
        let left = kron(&kron(&a, &b), &cm);
        let right = kron(&a, &kron(&b, &cm));
        prop_assert!(left.max_abs_diff(&right) <= TOL);
    }

    #[test]
    fn kron_mixed_product(a in small_matrix(2, 2), b in small_matrix(2, 2), x in small_matrix(2, 2), y in small_matrix(2, 2)) {
        let lhs = &kron(&a, &b) * &kron(&x, &y);
        let rhs = kron(&(&a * &x), &(&b * &y));
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-11);
    }
}
