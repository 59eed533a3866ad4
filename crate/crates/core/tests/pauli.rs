mod common;

use std::collections::BTreeMap;

use common::*;
use ion_dmet::pauli::{commutator_expectation, pauli_mul, PauliString, PauliSum};
use ion_dmet::sim::StateVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LETTERS: [char; 4] = ['I', 'X', 'Y', 'Z'];

fn random_letters<R: Rng>(rng: &mut R, n: usize) -> String {
    (0..n).map(|_| LETTERS[rng.random_range(0..4)]).collect()
}

fn dense_expectation(m: &CMat, amps: &[num_complex::Complex64]) -> num_complex::Complex64 {
    let v = CMat::from_column_slice(amps.len(), 1, amps);
    (v.adjoint() * m * v)[(0, 0)]
}

#[test]
fn single_string_expectations_match_dense_kronecker_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let n = rng.random_range(1..=4);
        let letters = random_letters(&mut rng, n);
        let amps = random_state(&mut rng, 1 << n);
        let psi = StateVector::from_amplitudes(amps.clone()).unwrap();
        let p: PauliString = letters.parse().unwrap();
        let got = p.expectation_complex(&psi).unwrap();
        let want = dense_expectation(&pauli_string_matrix(&letters), &amps);
        assert!((got - want).norm() < 1e-12, "{letters}: {got} vs {want}");
        assert!(got.im.abs() < 1e-12);
    }
}

#[test]
fn basis_action_matches_dense_columns() {
    for letters in ["XY", "YZ", "ZZX", "IYX", "YYY"] {
        let p: PauliString = letters.parse().unwrap();
        let m = pauli_string_matrix(letters);
        for k in 0..(1 << letters.len()) {
            let (amp, k2) = p.apply_basis(k);
            assert!((m[(k2, k)] - amp).norm() < 1e-14, "{letters} column {k}");
        }
    }
}

#[test]
fn products_match_matrix_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.random_range(1..=3);
        let a = random_letters(&mut rng, n);
        let b = random_letters(&mut rng, n);
        let (phase, prod) = pauli_mul(&a.parse().unwrap(), &b.parse().unwrap()).unwrap();
        let lhs = pauli_string_matrix(&a) * pauli_string_matrix(&b);
        let rhs = pauli_string_matrix(&prod.to_string()) * phase.to_complex();
        assert!(max_abs(&(lhs - rhs)) < 1e-14, "{a}·{b}");
    }
}

#[test]
fn commutation_agrees_with_matrix_commutator() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let n = rng.random_range(1..=3);
        let a = random_letters(&mut rng, n);
        let b = random_letters(&mut rng, n);
        let (ma, mb) = (pauli_string_matrix(&a), pauli_string_matrix(&b));
        let dense = max_abs(&(&ma * &mb - &mb * &ma)) < 1e-12;
        let pa: PauliString = a.parse().unwrap();
        assert_eq!(pa.commutes_with(&b.parse().unwrap()), dense, "{a} {b}");
    }
}

#[test]
fn sum_expectation_is_linear_and_includes_constant() {
    let mut h = PauliSum::new(2).unwrap();
    h.add("XX", 0.25).unwrap();
    h.add("ZZ", -0.5).unwrap();
    h.add("XZ", 0.125).unwrap();
    h.add("II", 1.5).unwrap();
    assert!((h.constant() - 1.5).abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let amps = random_state(&mut rng, 4);
    let psi = StateVector::from_amplitudes(amps.clone()).unwrap();
    let dense = pauli_string_matrix("XX") * c(0.25, 0.)
        + pauli_string_matrix("ZZ") * c(-0.5, 0.)
        + pauli_string_matrix("XZ") * c(0.125, 0.)
        + eye(4) * c(1.5, 0.);
    let want = dense_expectation(&dense, &amps).re;
    assert!((h.expectation(&psi).unwrap() - want).abs() < 1e-12);
}

#[test]
fn repeated_terms_accumulate() {
    let mut h = PauliSum::new(2).unwrap();
    h.add("XY", 0.5).unwrap();
    h.add("XY", 0.25).unwrap();
    assert_eq!(h.len(), 1);
    assert!((h.coefficient(&"XY".parse().unwrap()) - 0.75).abs() < 1e-15);
}

#[test]
fn evaluate_on_table_and_missing_key() {
    let mut h = PauliSum::new(2).unwrap();
    h.add("ZZ", 2.0).unwrap();
    h.add("XI", -1.0).unwrap();
    h.set_constant(0.5);
    let mut t = BTreeMap::new();
    t.insert("ZZ".to_string(), 0.25);
    assert!(h.evaluate_on(&t).is_err());
    t.insert("XI".to_string(), 0.5);
    assert!((h.evaluate_on(&t).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn text_round_trip_preserves_terms() {
    let text = "0.5 XX\n-0.25 ZY # comment\n\n0.75 II\n";
    let h = PauliSum::parse_text(text).unwrap();
    let back = PauliSum::parse_text(&h.to_text()).unwrap();
    assert_eq!(h.len(), back.len());
    for (p, c) in h.terms() {
        assert!((back.coefficient(p) - c).abs() < 1e-12);
    }
    assert!((back.constant() - 0.75).abs() < 1e-12);
}

#[test]
fn malformed_input_is_rejected() {
    assert!("XQ".parse::<PauliString>().is_err());
    assert!(PauliSum::parse_text("0.5 XX\n0.1 XXX\n").is_err());
    assert!(PauliSum::parse_text("abc XX\n").is_err());
    assert!(PauliSum::parse_text("# nothing\n").is_err());
    let mut h = PauliSum::new(2).unwrap();
    assert!(h.add("X", 1.0).is_err());
    let psi = StateVector::zero(3).unwrap();
    assert!(h.expectation(&psi).is_err());
}

#[test]
fn commutator_expectation_matches_dense_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..50 {
        let mut h = PauliSum::new(2).unwrap();
        let mut dense = CMat::zeros(4, 4);
        for l in ["XX", "YY", "ZZ", "XZ", "ZX", "XI", "IZ"] {
            let w: f64 = rng.random_range(-1.0..1.0);
            h.add(l, w).unwrap();
            dense += pauli_string_matrix(l) * c(w, 0.0);
        }
        let amps = random_state(&mut rng, 4);
        let psi = StateVector::from_amplitudes(amps.clone()).unwrap();
        let p = random_letters(&mut rng, 2);
        let mp = pauli_string_matrix(&p);
        // d/dτ ⟨e^{iτP/2} H e^{−iτP/2}⟩ by central differences on dense matrices
        let f = |tau: f64| {
            let u = rotation(&mp, tau);
            dense_expectation(&(u.adjoint() * &dense * u), &amps).re
        };
        let step = 1e-5;
        let fd = (f(step) - f(-step)) / (2.0 * step);
        let got = commutator_expectation(&h, &p.parse().unwrap(), &psi).unwrap();
        assert!((got - fd).abs() < 1e-7, "{p}: {got} vs {fd}");
    }
}

proptest! {
    #[test]
    fn expectation_lies_in_unit_interval(letters in "[IXYZ]{1,5}", seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = random_state(&mut rng, 1 << letters.len());
        let psi = StateVector::from_amplitudes(amps).unwrap();
        let p: PauliString = letters.parse().unwrap();
        let v = p.expectation_complex(&psi).unwrap();
        prop_assert!(v.re.abs() <= 1.0 + 1e-12);
        prop_assert!(v.im.abs() < 1e-12);
    }

    #[test]
    fn squaring_gives_identity(letters in "[IXYZ]{1,6}") {
        let p: PauliString = letters.parse().unwrap();
        let (phase, prod) = pauli_mul(&p, &p).unwrap();
        prop_assert!(prod.is_identity());
        prop_assert_eq!(phase.power(), 0);
    }
}
