//! Exact statevector simulation of standard-gate and trapped-ion native circuits,
//! plus seeded shot sampling with a readout-noise model.
//!
//! Basis index convention: bit `q` of the index is the state of qubit `q`.
//! Bitstrings are printed with qubit 0 first.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::pauli::MAX_QUBITS;

const NORM_TOL: f64 = 1e-10;

pub type Mat2 = [[Complex64; 2]; 2];
pub type Mat4 = [[Complex64; 4]; 4];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0…0⟩ on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, k: usize) -> Result<Self> {
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        if k >= 1 << n {
            return Err(Error::Dimension(format!("basis index {k} for {n} qubits")));
        }
        let mut amps = vec![c(0.0, 0.0); 1 << n];
        amps[k] = c(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if !len.is_power_of_two() {
            return Err(Error::Dimension(format!("{len} amplitudes")));
        }
        let n = len.trailing_zeros() as usize;
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        let sv = StateVector { n, amps };
        let norm = sv.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(norm));
        }
        Ok(sv)
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(mut amps: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized(norm));
        }
        let s = 1.0 / norm.sqrt();
        amps.iter_mut().for_each(|a| *a *= s);
        Self::from_amplitudes(amps)
    }

    /// Tensor product of single-qubit states, qubit 0 first.
    pub fn product(qubits: &[[Complex64; 2]]) -> Result<Self> {
        let n = qubits.len();
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        let amps = (0..1usize << n)
            .map(|k| {
                qubits
                    .iter()
                    .enumerate()
                    .fold(c(1.0, 0.0), |acc, (q, s)| acc * s[(k >> q) & 1])
            })
            .collect();
        Self::from_amplitudes(amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    fn check(&self, q: usize) -> Result<()> {
        if q >= self.n {
            Err(Error::QubitOutOfRange { qubit: q, n: self.n })
        } else {
            Ok(())
        }
    }

    pub fn apply_1q(&mut self, q: usize, m: &Mat2) -> Result<()> {
        self.check(q)?;
        let bit = 1 << q;
        for k in 0..self.amps.len() {
            if k & bit == 0 {
                let a0 = self.amps[k];
                let a1 = self.amps[k | bit];
                self.amps[k] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[k | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        Ok(())
    }

    /// Applies a 4×4 unitary whose local index is `bit_a + 2·bit_b`.
    pub fn apply_2q(&mut self, a: usize, b: usize, m: &Mat4) -> Result<()> {
        self.check(a)?;
        self.check(b)?;
        if a == b {
            return Err(Error::Dimension(format!("two-qubit gate on qubit {a} twice")));
        }
        let (ba, bb) = (1 << a, 1 << b);
        for k in 0..self.amps.len() {
            if k & ba == 0 && k & bb == 0 {
                let idx = [k, k | ba, k | bb, k | ba | bb];
                let v = idx.map(|i| self.amps[i]);
                for (r, &i) in idx.iter().enumerate() {
                    self.amps[i] = (0..4).map(|j| m[r][j] * v[j]).sum();
                }
            }
        }
        Ok(())
    }
}

/// Standard gate set used by ansatz circuits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    H(usize),
    S(usize),
    Sdg(usize),
    Cnot(usize, usize),
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) | Gate::H(q) | Gate::S(q) | Gate::Sdg(q) => {
                vec![q]
            }
            Gate::Cnot(a, b) => vec![a, b],
        }
    }

    /// The 2×2 matrix of a single-qubit gate; `None` for CNOT.
    pub fn matrix(&self) -> Option<Mat2> {
        let half = |t: f64| ((t / 2.0).cos(), (t / 2.0).sin());
        Some(match *self {
            Gate::Rx(_, t) => {
                let (co, si) = half(t);
                [[c(co, 0.0), c(0.0, -si)], [c(0.0, -si), c(co, 0.0)]]
            }
            Gate::Ry(_, t) => {
                let (co, si) = half(t);
                [[c(co, 0.0), c(-si, 0.0)], [c(si, 0.0), c(co, 0.0)]]
            }
            Gate::Rz(_, t) => {
                let (co, si) = half(t);
                [[c(co, -si), c(0.0, 0.0)], [c(0.0, 0.0), c(co, si)]]
            }
            Gate::H(_) => {
                let h = FRAC_1_SQRT_2;
                [[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]
            }
            Gate::S(_) => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]],
            Gate::Sdg(_) => [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, -1.0)]],
            Gate::Cnot(..) => return None,
        })
    }

    fn apply(&self, psi: &mut StateVector) -> Result<()> {
        match *self {
            Gate::Cnot(ctl, tgt) => {
                psi.check(ctl)?;
                psi.check(tgt)?;
                if ctl == tgt {
                    return Err(Error::Dimension("CNOT control equals target".into()));
                }
                let (bc, bt) = (1 << ctl, 1 << tgt);
                for k in 0..psi.amps.len() {
                    if k & bc != 0 && k & bt == 0 {
                        psi.amps.swap(k, k | bt);
                    }
                }
                Ok(())
            }
            g => {
                let q = g.qubits()[0];
                psi.apply_1q(q, &g.matrix().expect("single-qubit gate"))
            }
        }
    }
}

/// Basis-change suffix that rotates the measured Pauli `letter` onto Z.
pub fn basis_change(q: usize, letter: char) -> Result<Vec<Gate>> {
    match letter {
        'Z' | 'I' => Ok(vec![]),
        'X' => Ok(vec![Gate::H(q)]),
        'Y' => Ok(vec![Gate::Sdg(q), Gate::H(q)]),
        other => Err(Error::Config(format!("unknown basis letter {other:?}"))),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    /// Basis-change suffix applied after `gates`.
    pub measure_prep: Vec<Gate>,
    /// Measured Pauli per qubit (e.g. `XZ`), when the suffix came from a label.
    pub basis_label: Option<String>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
            measure_prep: Vec::new(),
            basis_label: None,
        }
    }

    pub fn push(&mut self, g: Gate) -> &mut Self {
        self.gates.push(g);
        self
    }

    /// Replaces the measurement suffix by the basis change for `label` (one letter per qubit).
    pub fn with_basis(mut self, label: &str) -> Result<Self> {
        if label.chars().count() != self.n_qubits {
            return Err(Error::Config(format!(
                "basis label {label:?} for {} qubits",
                self.n_qubits
            )));
        }
        self.measure_prep.clear();
        for (q, l) in label.chars().enumerate() {
            self.measure_prep.extend(basis_change(q, l)?);
        }
        self.basis_label = Some(label.to_string());
        Ok(self)
    }

    /// Gates followed by the measurement suffix.
    pub fn all_gates(&self) -> impl Iterator<Item = &Gate> {
        self.gates.iter().chain(&self.measure_prep)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("QUBITS {}\n", self.n_qubits);
        for g in &self.gates {
            out.push_str(&format_gate(g));
            out.push('\n');
        }
        match &self.basis_label {
            Some(l) => out.push_str(&format!("BASIS {l}\n")),
            None => {
                for g in &self.measure_prep {
                    out.push_str(&format_gate(g));
                    out.push('\n');
                }
            }
        }
        out
    }
}

fn format_gate(g: &Gate) -> String {
    match *g {
        Gate::Rx(q, t) => format!("RX q{q} {t:.9}"),
        Gate::Ry(q, t) => format!("RY q{q} {t:.9}"),
        Gate::Rz(q, t) => format!("RZ q{q} {t:.9}"),
        Gate::H(q) => format!("H q{q}"),
        Gate::S(q) => format!("S q{q}"),
        Gate::Sdg(q) => format!("SDG q{q}"),
        Gate::Cnot(a, b) => format!("CNOT q{a} q{b}"),
    }
}

/// Trapped-ion native operations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NativeGate {
    /// `exp(−iθ/2 σ_φ)` with `σ_φ = cos φ X + sin φ Y`.
    R { q: usize, phi: f64, theta: f64 },
    /// `exp(−iθ/2 σ_φa ⊗ σ_φb)` on qubits (a, b).
    Ms {
        a: usize,
        b: usize,
        phi_a: f64,
        phi_b: f64,
        theta: f64,
    },
}

impl NativeGate {
    pub fn is_two_qubit(&self) -> bool {
        matches!(self, NativeGate::Ms { .. })
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            NativeGate::R { q, .. } => vec![q],
            NativeGate::Ms { a, b, .. } => vec![a, b],
        }
    }

    fn apply(&self, psi: &mut StateVector) -> Result<()> {
        match *self {
            NativeGate::R { q, phi, theta } => psi.apply_1q(q, &r_phi(phi, theta)),
            NativeGate::Ms {
                a,
                b,
                phi_a,
                phi_b,
                theta,
            } => psi.apply_2q(a, b, &ms_matrix(phi_a, phi_b, theta)),
        }
    }
}

/// `σ_φ = cos φ X + sin φ Y`.
pub fn sigma_phi(phi: f64) -> Mat2 {
    let z = c(0.0, 0.0);
    [[z, Complex64::from_polar(1.0, -phi)], [Complex64::from_polar(1.0, phi), z]]
}

pub fn r_phi(phi: f64, theta: f64) -> Mat2 {
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mi = c(0.0, -si);
    [
        [c(co, 0.0), mi * Complex64::from_polar(1.0, -phi)],
        [mi * Complex64::from_polar(1.0, phi), c(co, 0.0)],
    ]
}

/// `cos(θ/2) I − i sin(θ/2) σ_φa ⊗ σ_φb`, local index `bit_a + 2·bit_b`.
pub fn ms_matrix(phi_a: f64, phi_b: f64, theta: f64) -> Mat4 {
    let sa = sigma_phi(phi_a);
    let sb = sigma_phi(phi_b);
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mut m = [[c(0.0, 0.0); 4]; 4];
    for (r, row) in m.iter_mut().enumerate() {
        for (col, v) in row.iter_mut().enumerate() {
            let kron = sa[r & 1][col & 1] * sb[r >> 1][col >> 1];
            *v = c(0.0, -si) * kron + if r == col { c(co, 0.0) } else { c(0.0, 0.0) };
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct NativeCircuit {
    pub n_qubits: usize,
    pub gates: Vec<NativeGate>,
    /// Post-measurement rewrites `(source, target)`: target bit ^= source bit, applied in order.
    pub fixups: Vec<(usize, usize)>,
}

impl NativeCircuit {
    pub fn new(n_qubits: usize) -> Self {
        NativeCircuit {
            n_qubits,
            gates: Vec::new(),
            fixups: Vec::new(),
        }
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }

    pub fn single_qubit_count(&self) -> usize {
        self.gates.len() - self.two_qubit_count()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("QUBITS {}\n", self.n_qubits);
        for g in &self.gates {
            match *g {
                NativeGate::R { q, phi, theta } => out.push_str(&format!("R q{q} {phi:.9} {theta:.9}\n")),
                NativeGate::Ms {
                    a,
                    b,
                    phi_a,
                    phi_b,
                    theta,
                } => out.push_str(&format!("MS q{a} q{b} {phi_a:.9} {phi_b:.9} {theta:.9}\n")),
            }
        }
        for (s, t) in &self.fixups {
            out.push_str(&format!("FIXUP q{s} -> q{t}\n"));
        }
        out
    }
}

/// One executable operation of either gate set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step {
    Standard(Gate),
    Native(NativeGate),
}

impl Step {
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Step::Standard(g) => g.qubits(),
            Step::Native(g) => g.qubits(),
        }
    }

    pub fn apply(&self, psi: &mut StateVector) -> Result<()> {
        match self {
            Step::Standard(g) => g.apply(psi),
            Step::Native(g) => g.apply(psi),
        }
    }
}

/// Anything the simulator can execute.
pub trait Program {
    fn n_qubits(&self) -> usize;
    fn steps(&self) -> Vec<Step>;
    fn fixups(&self) -> &[(usize, usize)] {
        &[]
    }
}

impl Program for Circuit {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    fn steps(&self) -> Vec<Step> {
        self.all_gates().map(|g| Step::Standard(*g)).collect()
    }
}

impl Program for NativeCircuit {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }
    fn steps(&self) -> Vec<Step> {
        self.gates.iter().map(|g| Step::Native(*g)).collect()
    }
    fn fixups(&self) -> &[(usize, usize)] {
        &self.fixups
    }
}

/// Either kind of circuit, as read from the shared text format.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyCircuit {
    Standard(Circuit),
    Native(NativeCircuit),
}

impl Program for AnyCircuit {
    fn n_qubits(&self) -> usize {
        match self {
            AnyCircuit::Standard(c) => c.n_qubits,
            AnyCircuit::Native(c) => c.n_qubits,
        }
    }
    fn steps(&self) -> Vec<Step> {
        match self {
            AnyCircuit::Standard(c) => c.steps(),
            AnyCircuit::Native(c) => c.steps(),
        }
    }
    fn fixups(&self) -> &[(usize, usize)] {
        match self {
            AnyCircuit::Standard(_) => &[],
            AnyCircuit::Native(c) => &c.fixups,
        }
    }
}

/// Applies the program's gates in order. Classical fixups are not touched here.
pub fn run<P: Program + ?Sized>(program: &P, initial: &StateVector) -> Result<StateVector> {
    if program.n_qubits() != initial.n_qubits() {
        return Err(Error::LengthMismatch {
            left: program.n_qubits(),
            right: initial.n_qubits(),
        });
    }
    let mut psi = initial.clone();
    for s in program.steps() {
        s.apply(&mut psi)?;
    }
    Ok(psi)
}

/// Applies `(source, target)` XOR rewrites to one measured basis index.
pub fn apply_fixups(k: usize, fixups: &[(usize, usize)]) -> usize {
    fixups
        .iter()
        .fold(k, |k, &(s, t)| if (k >> s) & 1 == 1 { k ^ (1 << t) } else { k })
}

/// Outcome probabilities indexed by basis index.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub n_qubits: usize,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn get(&self, k: usize) -> f64 {
        self.probs[k]
    }

    pub fn by_bitstring(&self) -> BTreeMap<String, f64> {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, &p)| (bitstring(k, self.n_qubits), p))
            .collect()
    }

    pub fn total_variation(&self, other: &Distribution) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// `⟨Z_S⟩` parity expectation over the qubits in `mask`.
    pub fn parity(&self, mask: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| if (k & mask).count_ones().is_multiple_of(2) { *p } else { -*p })
            .sum()
    }
}

/// `q0 q1 …` ordering of a basis index.
pub fn bitstring(k: usize, n: usize) -> String {
    (0..n).map(|q| if (k >> q) & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn parse_bitstring(s: &str) -> Option<usize> {
    s.chars().enumerate().try_fold(0usize, |acc, (q, ch)| match ch {
        '0' => Some(acc),
        '1' => Some(acc | (1 << q)),
        _ => None,
    })
}

pub fn exact_distribution<P: Program + ?Sized>(program: &P, initial: &StateVector) -> Result<Distribution> {
    let psi = run(program, initial)?;
    let mut probs = vec![0.0; 1 << psi.n_qubits()];
    for (k, p) in psi.probabilities().into_iter().enumerate() {
        probs[apply_fixups(k, program.fixups())] += p;
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized(total));
    }
    Ok(Distribution {
        n_qubits: psi.n_qubits(),
        probs,
    })
}

/// Per-qubit readout confusion, plus an optional depolarizing knob on two-qubit gates.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    /// `(p01, p10)` per qubit: P(read 1 | 0) and P(read 0 | 1).
    pub readout: Vec<(f64, f64)>,
    /// Probability of a uniformly random non-identity two-qubit Pauli after each entangler.
    pub two_qubit_depolarizing: f64,
}

impl NoiseModel {
    pub fn noiseless(n: usize) -> Self {
        NoiseModel {
            readout: vec![(0.0, 0.0); n],
            two_qubit_depolarizing: 0.0,
        }
    }

    pub fn readout(n: usize, p01: f64, p10: f64) -> Result<Self> {
        for p in [p01, p10] {
            if !(0.0..0.5).contains(&p) {
                return Err(Error::Config(format!("readout flip probability {p} not in [0, 0.5)")));
            }
        }
        Ok(NoiseModel {
            readout: vec![(p01, p10); n],
            two_qubit_depolarizing: 0.0,
        })
    }

    pub fn is_noiseless(&self) -> bool {
        self.two_qubit_depolarizing == 0.0 && self.readout.iter().all(|&(a, b)| a == 0.0 && b == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub n_qubits: usize,
    /// Counts indexed by basis index.
    pub counts: Vec<u64>,
    pub shots: u64,
    pub basis_label: String,
}

impl Histogram {
    pub fn from_counts(n_qubits: usize, counts: Vec<u64>, basis_label: &str) -> Result<Self> {
        if counts.len() != 1 << n_qubits {
            return Err(Error::Dimension(format!(
                "{} counts for {n_qubits} qubits",
                counts.len()
            )));
        }
        let shots = counts.iter().sum();
        Ok(Histogram {
            n_qubits,
            counts,
            shots,
            basis_label: basis_label.to_string(),
        })
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let s = self.shots.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / s).collect()
    }

    pub fn by_bitstring(&self) -> BTreeMap<String, u64> {
        self.counts
            .iter()
            .enumerate()
            .map(|(k, &c)| (bitstring(k, self.n_qubits), c))
            .collect()
    }
}

impl fmt::Display for Histogram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} shots):", self.basis_label, self.shots)?;
        for (b, c) in self.by_bitstring() {
            write!(f, " {b}={c}")?;
        }
        Ok(())
    }
}

/// Seeded generator shared by every stochastic routine.
pub fn rng_from_seed(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn draw_index<R: Rng>(rng: &mut R, cdf: &[f64]) -> usize {
    let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
    cdf.partition_point(|&x| x <= u).min(cdf.len() - 1)
}

fn readout_flip<R: Rng>(rng: &mut R, k: usize, noise: &NoiseModel) -> usize {
    let mut out = k;
    for (q, &(p01, p10)) in noise.readout.iter().enumerate() {
        let bit = (k >> q) & 1;
        let p = if bit == 0 { p01 } else { p10 };
        if p > 0.0 && rng.random::<f64>() < p {
            out ^= 1 << q;
        }
    }
    out
}

/// Multinomial draw from the exact distribution followed by per-qubit readout flips.
///
/// With a nonzero depolarizing knob each shot runs its own trajectory instead.
pub fn sample<P: Program + ?Sized>(
    program: &P,
    initial: &StateVector,
    shots: u64,
    noise: &NoiseModel,
    seed: u64,
    basis_label: &str,
) -> Result<Histogram> {
    if shots == 0 {
        return Err(Error::ZeroShots(basis_label.to_string()));
    }
    let n = program.n_qubits();
    if noise.readout.len() != n {
        return Err(Error::LengthMismatch {
            left: noise.readout.len(),
            right: n,
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut counts = vec![0u64; 1 << n];
    if noise.two_qubit_depolarizing > 0.0 {
        for _ in 0..shots {
            let k = sample_trajectory(program, initial, noise.two_qubit_depolarizing, &mut rng)?;
            counts[readout_flip(&mut rng, k, noise)] += 1;
        }
    } else {
        let dist = exact_distribution(program, initial)?;
        let mut acc = 0.0;
        let cdf: Vec<f64> = dist
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        for _ in 0..shots {
            let k = draw_index(&mut rng, &cdf);
            counts[readout_flip(&mut rng, k, noise)] += 1;
        }
    }
    Histogram::from_counts(n, counts, basis_label)
}

fn random_pauli_pair<R: Rng>(rng: &mut R, a: usize, b: usize, psi: &mut StateVector) -> Result<()> {
    let paulis: [Mat2; 4] = [
        [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
        [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]],
        [[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]],
        [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]],
    ];
    let which = rng.random_range(1..16usize);
    psi.apply_1q(a, &paulis[which & 3])?;
    psi.apply_1q(b, &paulis[which >> 2])
}

fn sample_trajectory<P: Program + ?Sized, R: Rng>(
    program: &P,
    initial: &StateVector,
    p: f64,
    rng: &mut R,
) -> Result<usize> {
    let mut psi = initial.clone();
    for s in program.steps() {
        s.apply(&mut psi)?;
        let qs = s.qubits();
        if qs.len() == 2 && rng.random::<f64>() < p {
            random_pauli_pair(rng, qs[0], qs[1], &mut psi)?;
        }
    }
    let mut acc = 0.0;
    let cdf: Vec<f64> = psi
        .probabilities()
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect();
    let k = draw_index(rng, &cdf);
    Ok(apply_fixups(k, program.fixups()))
}

fn parse_qubit(tok: &str, line: usize) -> Result<usize> {
    tok.strip_prefix('q')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected qubit like q0, got {tok:?}"),
        })
}

fn parse_angle(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("bad angle {tok:?}"),
        })
}

/// Reads the shared one-gate-per-line text format.
///
/// Standard gates: `RX q0 1.571`, `H q0`, `CNOT q0 q1`, optional `BASIS XZ`.
/// Native gates: `R q0 <phi> <theta>`, `MS q0 q1 <phi0> <phi1> <theta>`, `FIXUP q0 -> q1`.
/// `QUBITS n` fixes the register width; otherwise it is inferred. Mixing the two
/// gate sets in one file is an error.
pub fn parse_circuit(text: &str) -> Result<AnyCircuit> {
    let mut std_gates = Vec::new();
    let mut native = Vec::new();
    let mut fixups = Vec::new();
    let mut basis: Option<String> = None;
    let mut declared: Option<usize> = None;
    let mut max_q = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let arity = |k: usize| -> Result<()> {
            if toks.len() == k {
                Ok(())
            } else {
                Err(Error::Parse {
                    line: ln,
                    msg: format!("{} takes {} fields, got {line:?}", toks[0], k - 1),
                })
            }
        };
        let mut q = |t: &str| -> Result<usize> {
            let v = parse_qubit(t, ln)?;
            max_q = max_q.max(v + 1);
            Ok(v)
        };
        match toks[0].to_ascii_uppercase().as_str() {
            "QUBITS" => {
                arity(2)?;
                declared = Some(toks[1].parse().map_err(|_| Error::Parse {
                    line: ln,
                    msg: format!("bad qubit count {:?}", toks[1]),
                })?);
            }
            "BASIS" => {
                arity(2)?;
                basis = Some(toks[1].to_string());
            }
            "RX" | "RY" | "RZ" => {
                arity(3)?;
                let (qq, t) = (q(toks[1])?, parse_angle(toks[2], ln)?);
                std_gates.push(match toks[0].to_ascii_uppercase().as_str() {
                    "RX" => Gate::Rx(qq, t),
                    "RY" => Gate::Ry(qq, t),
                    _ => Gate::Rz(qq, t),
                });
            }
            "H" | "S" | "SDG" => {
                arity(2)?;
                let qq = q(toks[1])?;
                std_gates.push(match toks[0].to_ascii_uppercase().as_str() {
                    "H" => Gate::H(qq),
                    "S" => Gate::S(qq),
                    _ => Gate::Sdg(qq),
                });
            }
            "CNOT" => {
                arity(3)?;
                std_gates.push(Gate::Cnot(q(toks[1])?, q(toks[2])?));
            }
            "R" => {
                arity(4)?;
                native.push(NativeGate::R {
                    q: q(toks[1])?,
                    phi: parse_angle(toks[2], ln)?,
                    theta: parse_angle(toks[3], ln)?,
                });
            }
            "MS" => {
                arity(6)?;
                native.push(NativeGate::Ms {
                    a: q(toks[1])?,
                    b: q(toks[2])?,
                    phi_a: parse_angle(toks[3], ln)?,
                    phi_b: parse_angle(toks[4], ln)?,
                    theta: parse_angle(toks[5], ln)?,
                });
            }
            "FIXUP" => {
                arity(4)?;
                if toks[2] != "->" {
                    return Err(Error::Parse {
                        line: ln,
                        msg: "expected `FIXUP qS -> qT`".into(),
                    });
                }
                fixups.push((q(toks[1])?, q(toks[3])?));
            }
            other => return Err(Error::UnsupportedGate(other.to_string())),
        }
    }
    if let Some(b) = &basis {
        max_q = max_q.max(b.chars().count());
    }
    let n = declared.unwrap_or(max_q);
    if max_q > n {
        return Err(Error::QubitOutOfRange { qubit: max_q - 1, n });
    }
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits(n));
    }
    let is_native = !native.is_empty() || !fixups.is_empty();
    if is_native && (!std_gates.is_empty() || basis.is_some()) {
        return Err(Error::Parse {
            line: 0,
            msg: "standard and native gates mixed in one circuit".into(),
        });
    }
    if is_native {
        Ok(AnyCircuit::Native(NativeCircuit {
            n_qubits: n,
            gates: native,
            fixups,
        }))
    } else {
        let mut c = Circuit::new(n);
        c.gates = std_gates;
        if let Some(b) = basis {
            c = c.with_basis(&b)?;
        }
        Ok(AnyCircuit::Standard(c))
    }
}
