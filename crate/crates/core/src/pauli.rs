//! Pauli strings, real-weighted Pauli sums and their expectation values.
//!
//! Strings are written with qubit 0 as the leftmost letter, so `XZ` means
//! X on qubit 0 and Z on qubit 1.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sim::StateVector;

/// Hard cap on register width. The pipeline itself never goes beyond four.
pub const MAX_QUBITS: usize = 16;

/// Imaginary parts below this are treated as round-off in expectation values.
const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Pauli> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Single-qubit product `self · other` as (power of i, letter).
    fn mul(self, other: Pauli) -> (u8, Pauli) {
        use Pauli::*;
        match (self, other) {
            (I, p) | (p, I) => (0, p),
            (a, b) if a == b => (0, I),
            (X, Y) => (1, Z),
            (Y, Z) => (1, X),
            (Z, X) => (1, Y),
            (Y, X) => (3, Z),
            (Z, Y) => (3, X),
            (X, Z) => (3, Y),
            _ => unreachable!(),
        }
    }
}

/// A power of i: one of +1, +i, −1, −i.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(k: u8) -> Phase {
        Phase(k % 4)
    }

    pub fn power(self) -> u8 {
        self.0
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

impl std::ops::Mul for Phase {
    type Output = Phase;
    fn mul(self, rhs: Phase) -> Phase {
        Phase((self.0 + rhs.0) % 4)
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(["+1", "+i", "-1", "-i"][self.0 as usize])
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Result<Self> {
        if letters.len() > MAX_QUBITS {
            return Err(Error::TooManyQubits(letters.len()));
        }
        Ok(PauliString { letters })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(vec![Pauli::I; n])
    }

    /// Single non-identity letter `p` on qubit `q` of an `n`-qubit register.
    pub fn single(n: usize, q: usize, p: Pauli) -> Result<Self> {
        if q >= n {
            return Err(Error::QubitOutOfRange { qubit: q, n });
        }
        let mut letters = vec![Pauli::I; n];
        letters[q] = p;
        Self::new(letters)
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    pub fn weight(&self) -> usize {
        self.letters.iter().filter(|&&p| p != Pauli::I).count()
    }

    /// Bit mask of qubits on which the string flips the computational basis (X or Y).
    pub fn flip_mask(&self) -> usize {
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, &p)| matches!(p, Pauli::X | Pauli::Y))
            .fold(0, |m, (q, _)| m | (1 << q))
    }

    /// Bit mask of qubits carrying a Z-type sign (Z or Y).
    pub fn sign_mask(&self) -> usize {
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, &p)| matches!(p, Pauli::Z | Pauli::Y))
            .fold(0, |m, (q, _)| m | (1 << q))
    }

    pub fn count_y(&self) -> usize {
        self.letters.iter().filter(|&&p| p == Pauli::Y).count()
    }

    /// True when the two strings commute.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let anti = self
            .letters
            .iter()
            .zip(&other.letters)
            .filter(|(&a, &b)| a != Pauli::I && b != Pauli::I && a != b)
            .count();
        anti % 2 == 0
    }

    /// Matrix element action: `P|k⟩ = amp · |k'⟩`.
    pub fn apply_basis(&self, k: usize) -> (Complex64, usize) {
        let y = self.count_y() as u8;
        let sign = (k & self.sign_mask()).count_ones() % 2;
        let phase = Phase::from_power(y + 2 * sign as u8);
        (phase.to_complex(), k ^ self.flip_mask())
    }

    /// `⟨ψ|P|ψ⟩` as a complex number (real for any normalized ψ).
    pub fn expectation_complex(&self, psi: &StateVector) -> Result<Complex64> {
        if self.len() != psi.n_qubits() {
            return Err(Error::LengthMismatch {
                left: self.len(),
                right: psi.n_qubits(),
            });
        }
        let amps = psi.amplitudes();
        let flip = self.flip_mask();
        let signs = self.sign_mask();
        let base = Phase::from_power(self.count_y() as u8).to_complex();
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, a) in amps.iter().enumerate() {
            let s = if (k & signs).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            acc += amps[k ^ flip].conj() * a * s;
        }
        Ok(acc * base)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let letters = s
            .chars()
            .map(|c| {
                Pauli::from_char(c).ok_or_else(|| Error::Parse {
                    line: 0,
                    msg: format!("bad Pauli letter {c:?} in {s:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PauliString::new(letters)
    }
}

/// Letterwise product `a · b` with its accumulated phase.
pub fn pauli_mul(a: &PauliString, b: &PauliString) -> Result<(Phase, PauliString)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut power = 0u8;
    let letters = a
        .letters
        .iter()
        .zip(&b.letters)
        .map(|(&x, &y)| {
            let (k, p) = x.mul(y);
            power += k;
            p
        })
        .collect();
    Ok((Phase::from_power(power), PauliString { letters }))
}

/// Real linear combination of Pauli strings plus a constant offset.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: BTreeMap<PauliString, f64>,
    constant: f64,
}

impl PauliSum {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits(n_qubits));
        }
        Ok(PauliSum {
            n_qubits,
            terms: BTreeMap::new(),
            constant: 0.0,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn set_constant(&mut self, c: f64) {
        self.constant = c;
    }

    /// Adds `coeff · p`, merging with an existing term. Identity strings go to the constant.
    pub fn add_term(&mut self, p: PauliString, coeff: f64) -> Result<()> {
        if p.len() != self.n_qubits {
            return Err(Error::LengthMismatch {
                left: p.len(),
                right: self.n_qubits,
            });
        }
        if p.is_identity() {
            self.constant += coeff;
            return Ok(());
        }
        let slot = self.terms.entry(p.clone()).or_insert(0.0);
        *slot += coeff;
        if *slot == 0.0 {
            self.terms.remove(&p);
        }
        Ok(())
    }

    /// Convenience: `add_term` from a letter string such as `"XZ"`.
    pub fn add(&mut self, letters: &str, coeff: f64) -> Result<()> {
        self.add_term(letters.parse()?, coeff)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, f64)> {
        self.terms.iter().map(|(p, &c)| (p, c))
    }

    pub fn coefficient(&self, p: &PauliString) -> f64 {
        if p.is_identity() {
            return self.constant;
        }
        self.terms.get(p).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `⟨ψ|op|ψ⟩ + constant`. A residual imaginary part above 1e-10 is an error.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        if psi.n_qubits() != self.n_qubits {
            return Err(Error::LengthMismatch {
                left: self.n_qubits,
                right: psi.n_qubits(),
            });
        }
        let mut acc = Complex64::new(self.constant, 0.0);
        for (p, c) in self.terms() {
            acc += p.expectation_complex(psi)? * c;
        }
        if acc.im.abs() > HERMITIAN_TOL {
            return Err(Error::NonHermitian(acc.im));
        }
        Ok(acc.re)
    }

    /// Evaluates the sum on a table of expectation values keyed by letter string.
    pub fn evaluate_on(&self, values: &BTreeMap<String, f64>) -> Result<f64> {
        let mut e = self.constant;
        for (p, c) in self.terms() {
            let key = p.to_string();
            let v = values
                .get(&key)
                .ok_or_else(|| Error::MissingExpectation(key.clone()))?;
            e += c * v;
        }
        Ok(e)
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut sum: Option<PauliSum> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(c), Some(l), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected `<coeff> <letters>`, got {line:?}"),
                });
            };
            let coeff: f64 = c.parse().map_err(|_| Error::Parse {
                line: i + 1,
                msg: format!("bad coefficient {c:?}"),
            })?;
            let p: PauliString = l.parse().map_err(|e| match e {
                Error::Parse { msg, .. } => Error::Parse { line: i + 1, msg },
                other => other,
            })?;
            let s = match sum.as_mut() {
                Some(s) => s,
                None => sum.insert(PauliSum::new(p.len())?),
            };
            s.add_term(p, coeff).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        sum.ok_or(Error::Parse {
            line: 0,
            msg: "no terms".into(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (p, c) in self.terms() {
            out.push_str(&format!("{c:.9} {p}\n"));
        }
        out.push_str(&format!(
            "{:.9} {}\n",
            self.constant,
            "I".repeat(self.n_qubits)
        ));
        out
    }
}

/// `(i/2)⟨ψ|[P, H]|ψ⟩`, the derivative of `⟨e^{iτP/2} H e^{−iτP/2}⟩` at τ = 0.
///
/// Only anticommuting terms survive: `[P, Q] = 2PQ` for those.
pub fn commutator_expectation(h: &PauliSum, p: &PauliString, psi: &StateVector) -> Result<f64> {
    if p.len() != h.n_qubits() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: h.n_qubits(),
        });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (q, c) in h.terms() {
        if p.commutes_with(q) {
            continue;
        }
        let (phase, prod) = pauli_mul(p, q)?;
        acc += phase.to_complex() * prod.expectation_complex(psi)? * c;
    }
    let g = Complex64::new(0.0, 1.0) * acc;
    if g.im.abs() > HERMITIAN_TOL {
        return Err(Error::NonHermitian(g.im));
    }
    Ok(g.re)
}
