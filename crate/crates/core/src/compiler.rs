//! Standard-gate → trapped-ion native compilation and measurement-aware
//! optimization.
//!
//! Z rotations are never executed: each qubit carries a virtual frame `f` and
//! the physical state is `Rz(f)` applied to what has been emitted, so later
//! pulses are emitted with their phase shifted by `−f`.
//!
//! The two-qubit eliminations only ever fire after the candidate rewrite has
//! been simulated and found to reproduce the exact outcome distribution of the
//! input, so an ambiguous sign in a pattern costs one extra simulation, never
//! a wrong circuit.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sim::{
    exact_distribution, r_phi, sigma_phi, Circuit, Distribution, Gate, Mat2, NativeCircuit, NativeGate,
    Program, StateVector,
};

const EXACT_TOL: f64 = 1e-12;
const ZERO_TOL: f64 = 1e-9;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut m = [[c(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    m
}

fn adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

fn identity() -> Mat2 {
    [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]
}

fn rz(a: f64) -> Mat2 {
    let h = a / 2.0;
    [[Complex64::from_polar(1.0, -h), c(0.0, 0.0)], [c(0.0, 0.0), Complex64::from_polar(1.0, h)]]
}

fn pauli_z() -> Mat2 {
    [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]
}

/// Phase normalized into [0, 2π).
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if (TAU - w).abs() < 1e-12 {
        0.0
    } else {
        w
    }
}

/// Z-axis weight of `U A U†`, i.e. how much of the measured Z the operator `A`
/// becomes once `U` has acted: `Tr(Z U A U†) / 2`.
fn z_component(u: &Mat2, a: &Mat2) -> f64 {
    let m = mul(&mul(u, a), &adjoint(u));
    let zm = mul(&pauli_z(), &m);
    ((zm[0][0] + zm[1][1]) / 2.0).re
}

/// Euler angles with `U = e^{iγ} Rz(α) Ry(β) Rz(δ)`, β ∈ [0, π].
pub fn zyz_angles(u: &Mat2) -> (f64, f64, f64) {
    let det = u[0][0] * u[1][1] - u[0][1] * u[1][0];
    let s = det.sqrt();
    let (p, q) = (u[0][0] / s, u[1][0] / s);
    let beta = 2.0 * q.norm().atan2(p.norm());
    let sum = if p.norm() > 1e-12 { -2.0 * p.arg() } else { 0.0 };
    let diff = if q.norm() > 1e-12 { 2.0 * q.arg() } else { 0.0 };
    ((sum + diff) / 2.0, beta, (sum - diff) / 2.0)
}

/// Realizes `U` (up to phase) with at most two `R_φ(π/2)` pulses followed by a
/// residual Z frame. Returns (pulse phases in time order, frame).
pub fn synthesize_half_pulses(u: &Mat2) -> (Vec<f64>, f64) {
    let (alpha, beta, delta) = zyz_angles(u);
    if beta.abs() < ZERO_TOL {
        (vec![], alpha + delta)
    } else if (beta - FRAC_PI_2).abs() < ZERO_TOL {
        (vec![wrap_phase(FRAC_PI_2 - delta)], alpha + delta)
    } else {
        let p1 = -delta;
        let p2 = -delta - beta + PI;
        (vec![wrap_phase(p1), wrap_phase(p2)], alpha - p2 + PI)
    }
}

fn count_standard(c: &Circuit) -> (usize, usize) {
    let two = c.all_gates().filter(|g| matches!(g, Gate::Cnot(..))).count();
    (c.all_gates().count() - two, two)
}

/// Direct transpilation into `R_φ(θ)` and `MS`. The result equals the input
/// unitary up to global phase: residual frames are closed with `R_0(π)` then
/// `R_{f/2}(π)`, which is `Rz(f)`.
pub fn transpile(circ: &Circuit) -> Result<NativeCircuit> {
    let gates: Vec<Gate> = circ.all_gates().copied().collect();
    let n = circ.n_qubits;
    for g in &gates {
        if g.qubits().iter().any(|&q| q >= n) {
            return Err(Error::QubitOutOfRange {
                qubit: *g.qubits().iter().max().unwrap_or(&0),
                n,
            });
        }
    }
    let mut out = NativeCircuit::new(n);
    let mut frame = vec![0.0f64; n];
    let mut i = 0;
    while i < gates.len() {
        let emit = |out: &mut NativeCircuit, frame: &[f64], q: usize, phi: f64, theta: f64| {
            out.gates.push(NativeGate::R {
                q,
                phi: phi - frame[q],
                theta,
            })
        };
        match gates[i] {
            // CNOT · RZ_t(α) · CNOT is exp(−iα/2 Z_c Z_t): one MS with angle α.
            Gate::Cnot(ct, tg)
                if i + 2 < gates.len()
                    && matches!(gates[i + 1], Gate::Rz(q, _) if q == tg)
                    && gates[i + 2] == Gate::Cnot(ct, tg) =>
            {
                let Gate::Rz(_, alpha) = gates[i + 1] else { unreachable!() };
                emit(&mut out, &frame, ct, FRAC_PI_2, FRAC_PI_2);
                emit(&mut out, &frame, tg, FRAC_PI_2, FRAC_PI_2);
                out.gates.push(NativeGate::Ms {
                    a: ct,
                    b: tg,
                    phi_a: -frame[ct],
                    phi_b: -frame[tg],
                    theta: alpha,
                });
                emit(&mut out, &frame, ct, FRAC_PI_2, -FRAC_PI_2);
                emit(&mut out, &frame, tg, FRAC_PI_2, -FRAC_PI_2);
                i += 3;
                continue;
            }
            Gate::Cnot(ct, tg) => {
                emit(&mut out, &frame, ct, FRAC_PI_2, FRAC_PI_2);
                out.gates.push(NativeGate::Ms {
                    a: ct,
                    b: tg,
                    phi_a: -frame[ct],
                    phi_b: -frame[tg],
                    theta: FRAC_PI_2,
                });
                emit(&mut out, &frame, ct, 0.0, -FRAC_PI_2);
                emit(&mut out, &frame, tg, 0.0, -FRAC_PI_2);
                emit(&mut out, &frame, ct, FRAC_PI_2, -FRAC_PI_2);
            }
            Gate::Rz(q, a) => frame[q] += a,
            Gate::S(q) => frame[q] += FRAC_PI_2,
            Gate::Sdg(q) => frame[q] -= FRAC_PI_2,
            Gate::Rx(q, t) => emit(&mut out, &frame, q, 0.0, t),
            Gate::Ry(q, t) => emit(&mut out, &frame, q, FRAC_PI_2, t),
            Gate::H(q) => {
                // H = Ry(π/2)·Rz(π)
                frame[q] += PI;
                emit(&mut out, &frame, q, FRAC_PI_2, FRAC_PI_2);
            }
        }
        i += 1;
    }
    for (q, &f) in frame.iter().enumerate() {
        if wrap_phase(f) != 0.0 {
            out.gates.push(NativeGate::R { q, phi: 0.0, theta: PI });
            out.gates.push(NativeGate::R { q, phi: f / 2.0, theta: PI });
        }
    }
    Ok(out)
}

/// Which optimization step rewrote the circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Both MS operands are followed by a rotation turning σ_φ into ±Z: the MS
    /// only relabels outcomes that are measured anyway, so it goes.
    DressedPair,
    /// Only the first operand is dressed: the MS becomes a single-qubit
    /// rotation on the partner plus a classical XOR of the measured bits.
    DressedSource,
    /// One operand enters the MS in an eigenstate of its σ_φ, so the MS acts
    /// as a local rotation on the partner.
    Eigenstate,
    /// The first operand enters as a pure state orthogonal to its axis and is
    /// dressed afterwards: the MS collapses to a rotation on that operand,
    /// an optional π pulse on the partner, and an XOR fixup.
    PhaseKickback,
    /// Runs of single-qubit gates merged and re-emitted as ≤ 2 π/2 pulses.
    Fusion,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::DressedPair => "dressed-pair",
            Rule::DressedSource => "dressed-source",
            Rule::Eigenstate => "eigenstate",
            Rule::PhaseKickback => "phase-kickback",
            Rule::Fusion => "fusion",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompileReport {
    pub input_single: usize,
    pub input_two: usize,
    pub transpiled_single: usize,
    pub transpiled_two: usize,
    pub output_single: usize,
    pub output_two: usize,
    pub rules_fired: Vec<Rule>,
    pub fixups: Vec<(usize, usize)>,
    pub quantized: bool,
}

impl fmt::Display for CompileReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "input_gates single={} two={}", self.input_single, self.input_two)?;
        writeln!(
            f,
            "transpiled_gates single={} two={}",
            self.transpiled_single, self.transpiled_two
        )?;
        writeln!(f, "output_gates single={} two={}", self.output_single, self.output_two)?;
        let rules: Vec<String> = self.rules_fired.iter().map(|r| r.to_string()).collect();
        writeln!(f, "rules_fired {}", if rules.is_empty() { "none".into() } else { rules.join(",") })?;
        let fx: Vec<String> = self.fixups.iter().map(|(s, t)| format!("q{s}->q{t}")).collect();
        writeln!(f, "fixups {}", if fx.is_empty() { "none".into() } else { fx.join(",") })?;
        writeln!(f, "quantized {}", self.quantized)
    }
}

fn distribution(nc: &NativeCircuit) -> Result<Distribution> {
    exact_distribution(nc, &StateVector::zero(nc.n_qubits)?)
}

fn same_distribution(a: &Distribution, b: &Distribution) -> bool {
    a.probs.iter().zip(&b.probs).all(|(x, y)| (x - y).abs() <= EXACT_TOL)
}

/// Product of the single-qubit gates acting on `q` (time-ordered).
fn single_product<'a>(gates: impl IntoIterator<Item = &'a NativeGate>, q: usize) -> Mat2 {
    let mut u = identity();
    for g in gates {
        if let NativeGate::R { q: gq, phi, theta } = *g {
            if gq == q {
                u = mul(&r_phi(phi, theta), &u);
            }
        }
    }
    u
}

/// Bloch vector of qubit `q`, if the register is in a product state.
fn product_bloch(psi: &StateVector, q: usize) -> Option<[f64; 3]> {
    let n = psi.n_qubits();
    let amps = psi.amplitudes();
    let mut rho = [[c(0.0, 0.0); 2]; 2];
    for k in 0..amps.len() {
        for k2 in 0..amps.len() {
            if (k ^ k2) & !(1 << q) == 0 {
                rho[(k >> q) & 1][(k2 >> q) & 1] += amps[k] * amps[k2].conj();
            }
        }
    }
    let purity: f64 = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| rho[i][j].norm_sqr())
        .sum();
    if n > 2 || (1.0 - purity).abs() > 1e-12 {
        return None;
    }
    Some([2.0 * rho[1][0].re, 2.0 * rho[1][0].im, (rho[0][0] - rho[1][1]).re])
}

struct Candidate {
    gates: Vec<NativeGate>,
    fixups: Vec<(usize, usize)>,
    rule: Rule,
}

/// Candidate rewrites for the last MS, most aggressive first.
fn candidates(nc: &NativeCircuit, i: usize) -> Result<Vec<Candidate>> {
    let NativeGate::Ms {
        a,
        b,
        phi_a,
        phi_b,
        theta,
    } = nc.gates[i]
    else {
        return Ok(vec![]);
    };
    let phase = |q: usize| if q == a { phi_a } else { phi_b };
    let tail = &nc.gates[i + 1..];
    let dressed = |q: usize| {
        let u = single_product(tail, q);
        (z_component(&u, &sigma_phi(phase(q))).abs() - 1.0).abs() < ZERO_TOL
    };
    let before = NativeCircuit {
        n_qubits: nc.n_qubits,
        gates: nc.gates[..i].to_vec(),
        fixups: vec![],
    };
    let pre = crate::sim::run(&before, &StateVector::zero(nc.n_qubits)?)?;
    let axis = |p: f64| [p.cos(), p.sin(), 0.0];
    let dot = |x: [f64; 3], y: [f64; 3]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];

    let splice = |ins: Vec<NativeGate>, fix: Option<(usize, usize)>| {
        let mut g = nc.gates[..i].to_vec();
        g.extend(ins);
        g.extend_from_slice(tail);
        let mut f = Vec::new();
        f.extend(fix);
        f.extend_from_slice(&nc.fixups);
        (g, f)
    };
    let mut out = Vec::new();
    let mut push = |ins: Vec<NativeGate>, fix: Option<(usize, usize)>, rule: Rule| {
        let (gates, fixups) = splice(ins, fix);
        out.push(Candidate { gates, fixups, rule });
    };
    let rot = |q: usize, phi: f64, theta: f64| NativeGate::R { q, phi, theta };

    if dressed(a) && dressed(b) {
        push(vec![], None, Rule::DressedPair);
    }
    // Only the first operand may act as the classical control.
    let (s, t) = (a, b);
    if dressed(s) {
        for sg in [1.0, -1.0] {
            push(vec![rot(t, phase(t), sg * theta)], Some((s, t)), Rule::DressedSource);
            push(vec![rot(t, phase(t), sg * theta)], None, Rule::DressedSource);
        }
    }
    for (q, other) in [(a, b), (b, a)] {
        if let Some(r) = product_bloch(&pre, q) {
            if (dot(r, axis(phase(q))).abs() - 1.0).abs() < ZERO_TOL {
                for sg in [1.0, -1.0] {
                    push(vec![rot(other, phase(other), sg * theta)], None, Rule::Eigenstate);
                }
            }
        }
    }
    if let Some(r) = product_bloch(&pre, s) {
        let norm = dot(r, r).sqrt();
        if (norm - 1.0).abs() < ZERO_TOL && dot(r, axis(phase(s))).abs() < ZERO_TOL {
            let n_op = {
                let (x, y, z) = (r[0], r[1], r[2]);
                [[c(z, 0.0), c(x, -y)], [c(x, y), c(-z, 0.0)]]
            };
            let u = single_product(tail, s);
            if (z_component(&u, &n_op).abs() - 1.0).abs() < ZERO_TOL {
                for flip in [false, true] {
                    for sg in [1.0, -1.0] {
                        let mut ins = Vec::new();
                        if flip {
                            ins.push(rot(t, phase(t), PI));
                        }
                        ins.push(rot(s, phase(s), sg * theta));
                        push(ins, Some((s, t)), Rule::PhaseKickback);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Merges single-qubit runs into π/2-pulse form, pushing Z frames through MS
/// phases and dropping the frames left in front of the measurement.
fn fuse(nc: &NativeCircuit) -> NativeCircuit {
    let n = nc.n_qubits;
    let mut out = NativeCircuit {
        n_qubits: n,
        gates: Vec::new(),
        fixups: nc.fixups.clone(),
    };
    let mut pending: Vec<Mat2> = vec![identity(); n];
    let mut original: Vec<Vec<NativeGate>> = vec![Vec::new(); n];
    let mut fresh = vec![true; n];

    // Emits the run on `q`, returning its residual frame.
    let flush = |q: usize,
                 pending: &mut Vec<Mat2>,
                 original: &mut Vec<Vec<NativeGate>>,
                 fresh: &mut Vec<bool>,
                 out: &mut NativeCircuit|
     -> f64 {
        let (phases, frame) = synthesize_half_pulses(&pending[q]);
        let synth: Vec<NativeGate> = phases
            .iter()
            .map(|&phi| NativeGate::R {
                q,
                phi,
                theta: FRAC_PI_2,
            })
            .collect();
        // A run already in canonical form is kept verbatim so a second pass
        // reproduces the first gate-for-gate.
        let keep = fresh[q]
            && original[q].len() == synth.len()
            && original[q].iter().zip(&synth).all(|(x, y)| match (x, y) {
                (NativeGate::R { phi: p1, theta: t1, .. }, NativeGate::R { phi: p2, theta: t2, .. }) => {
                    (wrap_phase(*p1 - *p2).min(TAU - wrap_phase(*p1 - *p2))) < 1e-10 && (t1 - t2).abs() < 1e-10
                }
                _ => false,
            });
        if keep {
            out.gates.extend(original[q].iter().copied());
        } else {
            out.gates.extend(synth);
        }
        pending[q] = identity();
        original[q].clear();
        frame
    };

    for g in &nc.gates {
        match *g {
            NativeGate::R { q, phi, theta } => {
                pending[q] = mul(&r_phi(phi, theta), &pending[q]);
                original[q].push(*g);
            }
            NativeGate::Ms {
                a,
                b,
                phi_a,
                phi_b,
                theta,
            } => {
                let fa = flush(a, &mut pending, &mut original, &mut fresh, &mut out);
                let fb = flush(b, &mut pending, &mut original, &mut fresh, &mut out);
                out.gates.push(NativeGate::Ms {
                    a,
                    b,
                    phi_a: if fa == 0.0 { phi_a } else { wrap_phase(phi_a - fa) },
                    phi_b: if fb == 0.0 { phi_b } else { wrap_phase(phi_b - fb) },
                    theta,
                });
                // The frame now sits after the MS; it seeds the next run.
                for (q, f) in [(a, fa), (b, fb)] {
                    pending[q] = rz(f);
                    fresh[q] = f == 0.0;
                }
            }
        }
    }
    for q in 0..n {
        let _ = flush(q, &mut pending, &mut original, &mut fresh, &mut out);
    }
    out
}

fn close_enough(x: &NativeCircuit, y: &NativeCircuit) -> bool {
    x.fixups == y.fixups
        && x.gates.len() == y.gates.len()
        && x.gates.iter().zip(&y.gates).all(|(g, h)| match (g, h) {
            (NativeGate::R { q, phi, theta }, NativeGate::R { q: q2, phi: p2, theta: t2 }) => {
                let d = wrap_phase(phi - p2);
                q == q2 && d.min(TAU - d) < 1e-9 && (theta - t2).abs() < 1e-9
            }
            (
                NativeGate::Ms { a, b, phi_a, phi_b, theta },
                NativeGate::Ms { a: a2, b: b2, phi_a: pa2, phi_b: pb2, theta: t2 },
            ) => {
                let da = wrap_phase(phi_a - pa2);
                let db = wrap_phase(phi_b - pb2);
                a == a2
                    && b == b2
                    && da.min(TAU - da) < 1e-9
                    && db.min(TAU - db) < 1e-9
                    && (theta - t2).abs() < 1e-9
            }
            _ => false,
        })
}

/// Removes two-qubit gates that the final measurement makes redundant, then
/// fuses single-qubit runs. Every elimination is accepted only if the exact
/// outcome distribution is unchanged to 1e−12.
pub fn optimize(nc: &NativeCircuit) -> Result<(NativeCircuit, Vec<Rule>)> {
    let target = distribution(nc)?;
    let mut cur = nc.clone();
    let mut fired = Vec::new();
    while let Some(i) = cur.gates.iter().rposition(|g| g.is_two_qubit()) {
        let mut accepted = None;
        for cand in candidates(&cur, i)? {
            let trial = NativeCircuit {
                n_qubits: cur.n_qubits,
                gates: cand.gates,
                fixups: cand.fixups,
            };
            if same_distribution(&distribution(&trial)?, &target) {
                accepted = Some((trial, cand.rule));
                break;
            }
        }
        match accepted {
            Some((trial, rule)) => {
                cur = trial;
                fired.push(rule);
            }
            None => break,
        }
    }
    let fused = fuse(&cur);
    if !same_distribution(&distribution(&fused)?, &target) {
        return Err(Error::Dimension("single-qubit fusion changed the distribution".into()));
    }
    if close_enough(&fused, nc) {
        // Already optimal: return the input untouched.
        return Ok((nc.clone(), fired));
    }
    fired.push(Rule::Fusion);
    Ok((fused, fired))
}

/// Rounds `x` half-to-even at three decimals.
pub fn round3(x: f64) -> f64 {
    let scaled = x * 1000.0;
    // Snap values that are a ulp away from a tie so decimal ties round as written.
    let snapped = if ((scaled - scaled.trunc()).abs() - 0.5).abs() < 1e-9 {
        scaled.trunc() + 0.5 * scaled.signum()
    } else {
        scaled
    };
    snapped.round_ties_even() / 1000.0
}

pub fn quantize_params(nc: &NativeCircuit) -> NativeCircuit {
    let gates = nc
        .gates
        .iter()
        .map(|g| match *g {
            NativeGate::R { q, phi, theta } => NativeGate::R {
                q,
                phi: round3(phi),
                theta: round3(theta),
            },
            NativeGate::Ms {
                a,
                b,
                phi_a,
                phi_b,
                theta,
            } => NativeGate::Ms {
                a,
                b,
                phi_a: round3(phi_a),
                phi_b: round3(phi_b),
                theta: round3(theta),
            },
        })
        .collect();
    NativeCircuit {
        n_qubits: nc.n_qubits,
        gates,
        fixups: nc.fixups.clone(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    /// (label, total-variation distance)
    pub distances: Vec<(String, f64)>,
    pub tol: f64,
}

impl EquivalenceReport {
    pub fn pass(&self) -> bool {
        self.distances.iter().all(|(_, d)| *d < self.tol)
    }

    pub fn max_distance(&self) -> f64 {
        self.distances.iter().fold(0.0, |m, (_, d)| m.max(*d))
    }
}

impl fmt::Display for EquivalenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (l, d) in &self.distances {
            writeln!(f, "{l} tv={d:.3e}")?;
        }
        writeln!(f, "verdict {} (tol {:.1e})", if self.pass() { "pass" } else { "fail" }, self.tol)
    }
}

/// Total-variation distance between the exact outcome distributions of each
/// labelled pair, both started from |0…0⟩.
pub fn equivalence_check(cases: &[(&str, &dyn Program, &dyn Program)], tol: f64) -> Result<EquivalenceReport> {
    let mut distances = Vec::new();
    for (label, x, y) in cases {
        if x.n_qubits() != y.n_qubits() {
            return Err(Error::LengthMismatch {
                left: x.n_qubits(),
                right: y.n_qubits(),
            });
        }
        let z = StateVector::zero(x.n_qubits())?;
        let d = exact_distribution(*x, &z)?.total_variation(&exact_distribution(*y, &z)?);
        distances.push((label.to_string(), d));
    }
    Ok(EquivalenceReport { distances, tol })
}

/// One measurement circuit taken through the whole flow.
#[derive(Clone, Debug)]
pub struct CompiledBasis {
    pub basis: String,
    pub pre: Circuit,
    pub transpiled: NativeCircuit,
    /// Optimized, full-precision angles.
    pub optimized: NativeCircuit,
    /// Optimized and rounded to three decimals.
    pub post: NativeCircuit,
    pub report: CompileReport,
    pub tv_to_pre: f64,
}

pub fn compile_basis(ansatz: &Circuit, basis: &str) -> Result<CompiledBasis> {
    let pre = ansatz.clone().with_basis(basis)?;
    let transpiled = transpile(&pre)?;
    let (optimized, rules) = optimize(&transpiled)?;
    let post = quantize_params(&optimized);
    let (input_single, input_two) = count_standard(&pre);
    let z = StateVector::zero(pre.n_qubits)?;
    let tv_to_pre = exact_distribution(&pre, &z)?.total_variation(&exact_distribution(&post, &z)?);
    let report = CompileReport {
        input_single,
        input_two,
        transpiled_single: transpiled.single_qubit_count(),
        transpiled_two: transpiled.two_qubit_count(),
        output_single: post.single_qubit_count(),
        output_two: post.two_qubit_count(),
        rules_fired: rules,
        fixups: post.fixups.clone(),
        quantized: true,
    };
    Ok(CompiledBasis {
        basis: basis.to_string(),
        pre,
        transpiled,
        optimized,
        post,
        report,
        tv_to_pre,
    })
}
