// Independent dense-matrix oracles shared by the integration tests. Nothing
// here calls into the library's own matrix code, so agreement is meaningful.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use ion_dmet::sim::{Gate, NativeGate};
use rand::Rng;

pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn pauli(letter: char) -> CMat {
    match letter {
        'I' => eye(2),
        'X' => CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        'Y' => CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
        'Z' => CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
        _ => panic!("bad letter {letter}"),
    }
}

/// Kronecker product with `a` on the high bits.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca, rb, cb) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    CMat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

/// Dense matrix of a letter string, qubit 0 = leftmost letter = lowest index bit.
pub fn pauli_string_matrix(letters: &str) -> CMat {
    letters.chars().fold(eye(1), |acc, l| kron(&pauli(l), &acc))
}

/// Embeds a one-qubit matrix on qubit `q` of an n-qubit register.
pub fn on_qubit(m: &CMat, q: usize, n: usize) -> CMat {
    let id = eye(2);
    (0..n).fold(eye(1), |acc, k| kron(if k == q { m } else { &id }, &acc))
}

/// Projector-sum form of a controlled-X.
pub fn cnot(ctl: usize, tgt: usize, n: usize) -> CMat {
    let p0 = CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)]);
    let p1 = CMat::from_row_slice(2, 2, &[c(0., 0.), c(0., 0.), c(0., 0.), c(1., 0.)]);
    let a = on_qubit(&p0, ctl, n);
    let b = on_qubit(&p1, ctl, n) * on_qubit(&pauli('X'), tgt, n);
    a + b
}

/// `exp(−iθ/2 · M)` for an involutory Hermitian `M` (M² = I).
pub fn rotation(m: &CMat, theta: f64) -> CMat {
    let n = m.nrows();
    eye(n) * c((theta / 2.0).cos(), 0.0) + m * c(0.0, -(theta / 2.0).sin())
}

pub fn hadamard() -> CMat {
    (pauli('X') + pauli('Z')) * c(std::f64::consts::FRAC_1_SQRT_2, 0.0)
}

pub fn sigma_phi(phi: f64) -> CMat {
    pauli('X') * c(phi.cos(), 0.0) + pauli('Y') * c(phi.sin(), 0.0)
}

/// Global-phase-insensitive distance `min_φ ‖A − e^{iφ}B‖_max`, via the phase of ⟨B, A⟩.
pub fn phase_distance(a: &CMat, b: &CMat) -> f64 {
    let ip: Complex64 = b.iter().zip(a.iter()).map(|(x, y)| x.conj() * y).sum();
    let ph = if ip.norm() > 1e-300 { ip / ip.norm() } else { c(1.0, 0.0) };
    (a - b * ph).iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn random_state<R: Rng>(rng: &mut R, dim: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..dim)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

/// Shannon entropy in bits of a probability list.
pub fn entropy_bits(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 1e-15).map(|&x| -x * x.log2()).sum()
}

pub fn gate_dense(g: &Gate, n: usize) -> CMat {
    match *g {
        Gate::Rx(q, t) => on_qubit(&rotation(&pauli('X'), t), q, n),
        Gate::Ry(q, t) => on_qubit(&rotation(&pauli('Y'), t), q, n),
        Gate::Rz(q, t) => on_qubit(&rotation(&pauli('Z'), t), q, n),
        Gate::H(q) => on_qubit(&hadamard(), q, n),
        Gate::S(q) => on_qubit(&CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 1.)]), q, n),
        Gate::Sdg(q) => on_qubit(&CMat::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., -1.)]), q, n),
        Gate::Cnot(a, b) => cnot(a, b, n),
    }
}

pub fn native_dense(g: &NativeGate, n: usize) -> CMat {
    match *g {
        NativeGate::R { q, phi, theta } => on_qubit(&rotation(&sigma_phi(phi), theta), q, n),
        NativeGate::Ms { a, b, phi_a, phi_b, theta } => {
            let m = on_qubit(&sigma_phi(phi_a), a, n) * on_qubit(&sigma_phi(phi_b), b, n);
            rotation(&m, theta)
        }
    }
}

/// Dense unitary of a gate list, earliest gate first.
pub fn native_unitary(gates: &[NativeGate], n: usize) -> CMat {
    gates.iter().fold(eye(1 << n), |u, g| native_dense(g, n) * u)
}

pub fn standard_unitary(gates: &[Gate], n: usize) -> CMat {
    gates.iter().fold(eye(1 << n), |u, g| gate_dense(g, n) * u)
}

/// Fresh per-process scratch directory under the system temp dir.
pub fn scratch_dir(tag: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("ion-dmet-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

/// Jordan–Wigner annihilator for mode `k` of `n`: Z on every lower mode, |0⟩⟨1| on `k`.
pub fn ladder(k: usize, n: usize) -> CMat {
    let lower = CMat::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]);
    let mut m = eye(1 << n);
    for j in 0..k {
        m = on_qubit(&pauli('Z'), j, n) * m;
    }
    on_qubit(&lower, k, n) * m
}

pub fn expect(op: &CMat, v: &CMat) -> Complex64 {
    (v.adjoint() * op * v)[(0, 0)]
}

pub fn random_sector_state<R: Rng>(rng: &mut R, n: usize, n_elec: u32) -> Vec<Complex64> {
    let dim = 1 << n;
    let mut amps = vec![c(0.0, 0.0); dim];
    for (s, a) in amps.iter_mut().enumerate() {
        if (s as u32).count_ones() == n_elec {
            *a = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    amps.into_iter().map(|z| z / norm).collect()
}

pub fn random_gate<R: Rng>(rng: &mut R, n: usize) -> Gate {
    let q = rng.random_range(0..n);
    let t = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    match rng.random_range(0..7) {
        0 => Gate::Rx(q, t),
        1 => Gate::Ry(q, t),
        2 => Gate::Rz(q, t),
        3 => Gate::H(q),
        4 => Gate::S(q),
        5 => Gate::Sdg(q),
        _ => {
            let mut b = rng.random_range(0..n);
            while b == q {
                b = rng.random_range(0..n);
            }
            Gate::Cnot(q, b)
        }
    }
}
