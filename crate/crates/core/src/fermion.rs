//! Fixed map between the two-qubit register and the two-electron,
//! four-spin-orbital Fock space, with reduced density matrices and entropies.
//!
//! Spin-orbital modes are ordered (1α, 1β, 2α, 2β) = (0, 1, 2, 3) and Fock
//! basis index bit `k` is the occupation of mode `k`; Jordan–Wigner signs follow
//! that order. Qubit 0 selects the α electron's orbital and qubit 1 the β
//! electron's, so register index `q0 + 2·q1` decodes to `a†_α a†_β |vac⟩`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum};
use crate::sim::StateVector;

pub const N_MODES: usize = 4;
pub const FOCK_DIM: usize = 1 << N_MODES;
/// Electrons in the fragment+bath problem.
pub const N_ELECTRONS: usize = 2;

/// Letter strings of the nine expectation values the pipeline measures.
pub const MEASURED_PAULIS: [&str; 9] = ["XX", "YY", "ZZ", "XZ", "ZX", "XI", "IX", "ZI", "IZ"];

type CMat = DMatrix<Complex64>;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// `a_k|s⟩` on a Fock basis index: `None` if mode `k` is empty, else (sign, new index).
pub fn annihilate(k: usize, s: usize) -> Option<(f64, usize)> {
    if (s >> k) & 1 == 0 {
        return None;
    }
    let sign = if (s & ((1 << k) - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((sign, s ^ (1 << k)))
}

/// `a†_k|s⟩`: `None` if mode `k` is occupied.
pub fn create(k: usize, s: usize) -> Option<(f64, usize)> {
    if (s >> k) & 1 == 1 {
        return None;
    }
    let sign = if (s & ((1 << k) - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((sign, s | (1 << k)))
}

fn annihilate_vec(k: usize, v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![zero(); v.len()];
    for (s, a) in v.iter().enumerate() {
        if let Some((sg, t)) = annihilate(k, s) {
            out[t] += a * sg;
        }
    }
    out
}

/// Amplitudes over the 16 occupation configurations of (1α, 1β, 2α, 2β).
#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    pub amps: Vec<Complex64>,
}

impl FockState {
    pub fn particle_number(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(s, a)| a.norm_sqr() * s.count_ones() as f64)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Fock index and sign of the configuration encoded by register index `k`.
pub fn configuration(k: usize) -> (f64, usize) {
    let alpha = if k & 1 == 0 { 0 } else { 2 };
    let beta = if (k >> 1) & 1 == 0 { 1 } else { 3 };
    let (s1, f1) = create(beta, 0).expect("vacuum");
    let (s2, f2) = create(alpha, f1).expect("distinct modes");
    (s1 * s2, f2)
}

/// The 16×4 isometry from the register into Fock space.
fn decode_isometry() -> &'static CMat {
    static E: OnceLock<CMat> = OnceLock::new();
    E.get_or_init(|| {
        let mut e = CMat::zeros(FOCK_DIM, 4);
        for k in 0..4 {
            let (sg, f) = configuration(k);
            e[(f, k)] = Complex64::new(sg, 0.0);
        }
        e
    })
}

pub fn decode_state(psi: &StateVector) -> Result<FockState> {
    if psi.n_qubits() != 2 {
        return Err(Error::LengthMismatch {
            left: psi.n_qubits(),
            right: 2,
        });
    }
    let mut amps = vec![zero(); FOCK_DIM];
    for (k, a) in psi.amplitudes().iter().enumerate() {
        let (sg, f) = configuration(k);
        amps[f] += a * sg;
    }
    Ok(FockState { amps })
}

/// One- and two-particle reduced density matrices over the four spin-orbitals.
///
/// `one[(q, p)] = D_qp = ⟨a†_p a_q⟩`. The two-particle part is held as the
/// 16×16 pair matrix `two[(4p + r, 4q + s)] = P_qp|sr = ⟨a†_p a†_r a_s a_q⟩`,
/// which is Hermitian and positive semidefinite for physical states.
#[derive(Clone, Debug, PartialEq)]
pub struct RdmPair {
    pub one: CMat,
    pub two: CMat,
}

impl RdmPair {
    pub fn zeros() -> Self {
        RdmPair {
            one: CMat::zeros(N_MODES, N_MODES),
            two: CMat::zeros(N_MODES * N_MODES, N_MODES * N_MODES),
        }
    }

    /// `P_qp|sr = ⟨a†_p a†_r a_s a_q⟩`.
    pub fn p(&self, q: usize, p: usize, s: usize, r: usize) -> Complex64 {
        self.two[(4 * p + r, 4 * q + s)]
    }

    /// `D_qp = ⟨a†_p a_q⟩`.
    pub fn d(&self, q: usize, p: usize) -> Complex64 {
        self.one[(q, p)]
    }

    /// Row-major text with 12 significant digits: the 4×4 block, then the 16×16 block.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# one-particle D[q][p] (re im)\n");
        for m in [&self.one, &self.two] {
            for i in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols())
                    .map(|j| format!("{:.11e} {:.11e}", m[(i, j)].re, m[(i, j)].im))
                    .collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
            if m.nrows() == N_MODES {
                out.push_str("# two-particle pair matrix [(p,r)][(q,s)] (re im)\n");
            }
        }
        out
    }
}

pub fn build_rdms(f: &FockState) -> Result<RdmPair> {
    if f.amps.len() != FOCK_DIM {
        return Err(Error::Dimension(format!("{} Fock amplitudes", f.amps.len())));
    }
    let (one, two) = rdms_general(&f.amps, N_MODES);
    Ok(RdmPair { one, two })
}

/// Spin-orbital RDMs of a pure state on `n_modes` modes, in the same layout as
/// [`RdmPair`]: `one[(q, p)] = ⟨a†_p a_q⟩`, `two[(n·p + r, n·q + s)] = ⟨a†_p a†_r a_s a_q⟩`.
pub fn rdms_general(amps: &[Complex64], n_modes: usize) -> (CMat, CMat) {
    let single: Vec<Vec<Complex64>> = (0..n_modes).map(|q| annihilate_vec(q, amps)).collect();
    let mut pairs = vec![vec![]; n_modes * n_modes];
    for q in 0..n_modes {
        for s in 0..n_modes {
            pairs[n_modes * q + s] = annihilate_vec(s, &single[q]);
        }
    }
    let inner = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let one = CMat::from_fn(n_modes, n_modes, |q, p| inner(&single[p], &single[q]));
    let nn = n_modes * n_modes;
    let two = CMat::from_fn(nn, nn, |pr, qs| inner(&pairs[pr], &pairs[qs]));
    (one, two)
}

/// RDMs of a (possibly non-physical) Fock-space operator ρ_F via `Tr(ρ_F ·)`.
fn rdms_of_operator(rho: &CMat) -> RdmPair {
    let ladder = |k: usize, dagger: bool| {
        let mut m = CMat::zeros(FOCK_DIM, FOCK_DIM);
        for s in 0..FOCK_DIM {
            let hit = if dagger { create(k, s) } else { annihilate(k, s) };
            if let Some((sg, t)) = hit {
                m[(t, s)] = Complex64::new(sg, 0.0);
            }
        }
        m
    };
    let a: Vec<CMat> = (0..N_MODES).map(|k| ladder(k, false)).collect();
    let ad: Vec<CMat> = (0..N_MODES).map(|k| ladder(k, true)).collect();
    let tr = |m: &CMat| (rho * m).trace();
    let one = CMat::from_fn(N_MODES, N_MODES, |q, p| tr(&(&ad[p] * &a[q])));
    let two = CMat::from_fn(16, 16, |pr, qs| {
        let (p, r, q, s) = (pr / 4, pr % 4, qs / 4, qs % 4);
        tr(&(&ad[p] * &ad[r] * &a[s] * &a[q]))
    });
    RdmPair { one, two }
}

fn pauli_matrix(letters: &str) -> CMat {
    let p: PauliString = letters.parse().expect("static Pauli label");
    let mut m = CMat::zeros(4, 4);
    for k in 0..4 {
        let (amp, k2) = p.apply_basis(k);
        m[(k2, k)] = amp;
    }
    m
}

/// RDMs of `E (¼ P) E†` for the identity and each measured Pauli.
fn pauli_rdm_basis() -> &'static Vec<(String, RdmPair)> {
    static B: OnceLock<Vec<(String, RdmPair)>> = OnceLock::new();
    B.get_or_init(|| {
        let e = decode_isometry();
        std::iter::once("II")
            .chain(MEASURED_PAULIS)
            .map(|l| {
                let rho = e * (pauli_matrix(l) * Complex64::new(0.25, 0.0)) * e.adjoint();
                (l.to_string(), rdms_of_operator(&rho))
            })
            .collect()
    })
}

/// Linear map from the nine measured expectations to RDMs, through
/// `ρ = ¼(I + Σ⟨P⟩P)` on the register. Odd-Y expectations vanish for the
/// real-amplitude states this pipeline prepares and are not needed.
pub fn pauli_to_rdms(expectations: &BTreeMap<String, f64>) -> Result<RdmPair> {
    let mut out = RdmPair::zeros();
    for (label, basis) in pauli_rdm_basis() {
        let w = if label == "II" {
            1.0
        } else {
            let v = *expectations
                .get(label)
                .ok_or_else(|| Error::MissingExpectation(label.clone()))?;
            if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(Error::ExpectationRange {
                    label: label.clone(),
                    value: v,
                });
            }
            v
        };
        let w = Complex64::new(w, 0.0);
        out.one += &basis.one * w;
        out.two += &basis.two * w;
    }
    Ok(out)
}

/// Two-electron determinant pairs (p < r) spanning the sector.
fn determinants() -> Vec<(usize, usize, f64, usize)> {
    let mut v = Vec::new();
    for p in 0..N_MODES {
        for r in p + 1..N_MODES {
            let (s1, f1) = create(r, 0).expect("vacuum");
            let (s2, f2) = create(p, f1).expect("distinct");
            v.push((p, r, s1 * s2, f2));
        }
    }
    v
}

/// Inverse map: rebuild the sector density from the pair matrix and read
/// every two-qubit Pauli expectation off `E† ρ_F E`.
pub fn rdms_to_pauli(rdm: &RdmPair) -> BTreeMap<String, f64> {
    let dets = determinants();
    let mut rho_f = CMat::zeros(FOCK_DIM, FOCK_DIM);
    // ⟨a†_p a†_r a_s a_q⟩ = ρ_{(q,s),(p,r)} for determinant |pr⟩ = a†_p a†_r|0⟩.
    for &(q, s, sg_i, fi) in &dets {
        for &(p, r, sg_j, fj) in &dets {
            rho_f[(fi, fj)] += rdm.two[(4 * p + r, 4 * q + s)] * (sg_i * sg_j);
        }
    }
    let e = decode_isometry();
    let rho = e.adjoint() * rho_f * e;
    let mut out = BTreeMap::new();
    for a in ["I", "X", "Y", "Z"] {
        for b in ["I", "X", "Y", "Z"] {
            let l = format!("{a}{b}");
            if l == "II" {
                continue;
            }
            let v = (&rho * pauli_matrix(&l)).trace().re;
            out.insert(l, v);
        }
    }
    out
}

/// `D_qp = Σ_r P_qp|rr / (N − 1)` with N = 2.
pub fn trace_down(two: &CMat) -> CMat {
    let n1 = (N_ELECTRONS - 1) as f64;
    CMat::from_fn(N_MODES, N_MODES, |q, p| {
        (0..N_MODES).map(|r| two[(4 * p + r, 4 * q + r)]).sum::<Complex64>() / n1
    })
}

/// `N^A = Σ_{p∈A} D_pp` over the listed spin-orbitals.
pub fn electron_count(one: &CMat, orbitals: &[usize]) -> f64 {
    orbitals.iter().map(|&p| one[(p, p)].re).sum()
}

/// Orthogonal 2×2 rotation from the register's molecular orbitals to the
/// (fragment, bath) pair: new orbital i' = Σ_i C[i'][i] · old orbital i.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoCoefficients(pub Matrix2<f64>);

impl MoCoefficients {
    pub fn new(c: Matrix2<f64>) -> Result<Self> {
        // Tabulated coefficients carry eight decimals, so exact orthogonality
        // is out of reach; anything beyond 1e-6 is a genuinely wrong matrix.
        let dev = (c.transpose() * c - Matrix2::identity()).abs().max();
        if dev > 1e-6 {
            return Err(Error::NonOrthogonal(dev));
        }
        Ok(MoCoefficients(c))
    }

    /// The discrete-Fourier form (1/√2)[[1, 1], [−1, 1]].
    pub fn fourier() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        MoCoefficients(Matrix2::new(h, h, -h, h))
    }

    /// The same rotation acting on spin-orbitals (1α, 1β, 2α, 2β).
    pub fn spin_orbital(&self) -> CMat {
        CMat::from_fn(N_MODES, N_MODES, |i, j| {
            if i % 2 == j % 2 {
                Complex64::new(self.0[(i / 2, j / 2)], 0.0)
            } else {
                zero()
            }
        })
    }
}

/// 1-RDM in the rotated orbital basis: `D' = U D Uᵀ`.
pub fn rotate_one_rdm(one: &CMat, c: &MoCoefficients) -> CMat {
    let u = c.spin_orbital();
    &u * one * u.transpose()
}

fn shannon_bits(p: impl IntoIterator<Item = f64>) -> f64 {
    p.into_iter()
        .filter(|&x| x > 1e-300)
        .map(|x| -x * x.log2())
        .sum()
}

fn eigen_entropy(rho: CMat) -> f64 {
    let eig = nalgebra::SymmetricEigen::new(rho);
    shannon_bits(eig.eigenvalues.iter().map(|&v| v.max(0.0)))
}

/// Entropy (bits) between the two register halves in the molecular-orbital
/// picture: the configuration weights of the decoded state.
pub fn entropy_mo(psi: &StateVector) -> Result<f64> {
    let f = decode_state(psi)?;
    // Each configuration pairs one α orbital with one β orbital, so the
    // reduced density of the α half is diagonal in occupations.
    let mut rho = CMat::zeros(4, 4);
    for (k, a) in psi.amplitudes().iter().enumerate() {
        rho[(k, k)] += Complex64::new(a.norm_sqr(), 0.0);
    }
    debug_assert!((f.norm_sqr() - 1.0).abs() < 1e-9);
    Ok(eigen_entropy(rho))
}

/// Entropy (bits) between fragment and bath orbitals: rotate the orbitals by
/// `C`, trace out the bath modes and diagonalize the 4×4 fragment density.
pub fn entropy_fragment_bath(psi: &StateVector, c: &MoCoefficients) -> Result<f64> {
    let c = MoCoefficients::new(c.0)?;
    let f = decode_state(psi)?;
    // α/β amplitude matrix M[i][j] for a†_{α i} a†_{β j}|vac⟩.
    let mut m = Matrix2::<Complex64>::zeros();
    for i in 0..2 {
        for j in 0..2 {
            let (s1, f1) = create(2 * j + 1, 0).expect("vacuum");
            let (s2, f2) = create(2 * i, f1).expect("distinct");
            m[(i, j)] = f.amps[f2] * (s1 * s2);
        }
    }
    let cc = c.0.map(|v| Complex64::new(v, 0.0));
    let mr = cc * m * cc.transpose();
    // Rotated modes in order (fragment α, fragment β, bath α, bath β).
    let mode = |spin: usize, orb: usize| if orb == 0 { spin } else { 2 + spin };
    let mut rotated = vec![zero(); FOCK_DIM];
    for i in 0..2 {
        for j in 0..2 {
            let (s1, f1) = create(mode(1, j), 0).expect("vacuum");
            let (s2, f2) = create(mode(0, i), f1).expect("distinct");
            rotated[f2] += mr[(i, j)] * (s1 * s2);
        }
    }
    let mut rho = CMat::zeros(4, 4);
    for (k, a) in rotated.iter().enumerate() {
        for (k2, b) in rotated.iter().enumerate() {
            if k >> 2 == k2 >> 2 {
                rho[(k & 3, k2 & 3)] += a * b.conj();
            }
        }
    }
    Ok(eigen_entropy(rho))
}

/// Pauli decomposition of a sector operator: `E† O E = Σ c_P P`.
pub fn qubit_operator(o: &CMat) -> Result<PauliSum> {
    if o.nrows() != FOCK_DIM || o.ncols() != FOCK_DIM {
        return Err(Error::Dimension(format!("{}×{} Fock operator", o.nrows(), o.ncols())));
    }
    let e = decode_isometry();
    let oq = e.adjoint() * o * e;
    let mut sum = PauliSum::new(2)?;
    for a in ["I", "X", "Y", "Z"] {
        for b in ["I", "X", "Y", "Z"] {
            let l = format!("{a}{b}");
            let v = (&oq * pauli_matrix(&l)).trace() / 4.0;
            if v.im.abs() > 1e-12 {
                return Err(Error::NonHermitian(v.im));
            }
            if v.re.abs() > 1e-14 {
                sum.add(&l, v.re)?;
            }
        }
    }
    Ok(sum)
}

/// Fragment electron-number operator `Σ_σ b†_{0σ} b_{0σ}` in qubit form, where
/// orbital 0 of the rotated pair is the fragment orbital.
pub fn fragment_number_operator(c: &MoCoefficients) -> Result<PauliSum> {
    let u = c.spin_orbital();
    let mut o = CMat::zeros(FOCK_DIM, FOCK_DIM);
    for spin in 0..2 {
        let frag = spin; // fragment orbital 0, spin-orbital index = spin
        for p in 0..N_MODES {
            for q in 0..N_MODES {
                let w = u[(frag, p)] * u[(frag, q)];
                if w.norm() == 0.0 {
                    continue;
                }
                for s in 0..FOCK_DIM {
                    if let Some((s1, t1)) = annihilate(q, s) {
                        if let Some((s2, t2)) = create(p, t1) {
                            o[(t2, s)] += w * (s1 * s2);
                        }
                    }
                }
            }
        }
    }
    qubit_operator(&o)
}
