//! Qubit coupled-cluster ansatz: a Bloch-angle product state dressed by
//! exponentials of screened Pauli generators, and its variational minimization.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lbfgs::{self, LbfgsOptions, Termination};
use crate::pauli::{commutator_expectation, Pauli, PauliString, PauliSum};
use crate::sim::{rng_from_seed, Circuit, Gate, StateVector};

#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldParams {
    /// Polar angles θ_j (rad).
    pub theta: Vec<f64>,
    /// Azimuthal angles φ_j (rad).
    pub phi: Vec<f64>,
}

impl MeanFieldParams {
    pub fn new(theta: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if theta.len() != phi.len() {
            return Err(Error::LengthMismatch {
                left: theta.len(),
                right: phi.len(),
            });
        }
        if theta.iter().chain(&phi).any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite mean-field angle".into()));
        }
        Ok(MeanFieldParams { theta, phi })
    }

    pub fn n_qubits(&self) -> usize {
        self.theta.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzSpec {
    pub mf: MeanFieldParams,
    pub generators: Vec<PauliString>,
    pub tau: Vec<f64>,
}

impl AnsatzSpec {
    pub fn new(mf: MeanFieldParams, generators: Vec<PauliString>, tau: Vec<f64>) -> Result<Self> {
        if generators.len() != tau.len() {
            return Err(Error::LengthMismatch {
                left: generators.len(),
                right: tau.len(),
            });
        }
        if let Some(g) = generators.iter().find(|g| g.len() != mf.n_qubits()) {
            return Err(Error::LengthMismatch {
                left: g.len(),
                right: mf.n_qubits(),
            });
        }
        Ok(AnsatzSpec { mf, generators, tau })
    }

    pub fn n_qubits(&self) -> usize {
        self.mf.n_qubits()
    }

    /// Flattened parameter vector `[θ…, φ…, τ…]`.
    pub fn params(&self) -> Vec<f64> {
        let mut v = self.mf.theta.clone();
        v.extend(&self.mf.phi);
        v.extend(&self.tau);
        v
    }

    pub fn with_params(&self, p: &[f64]) -> AnsatzSpec {
        let n = self.n_qubits();
        AnsatzSpec {
            mf: MeanFieldParams {
                theta: p[..n].to_vec(),
                phi: p[n..2 * n].to_vec(),
            },
            generators: self.generators.clone(),
            tau: p[2 * n..].to_vec(),
        }
    }

    /// Structured text, radians to nine significant digits.
    pub fn to_text(&self) -> String {
        let fmt_list = |v: &[f64]| v.iter().map(|x| format!("{x:.8e}")).collect::<Vec<_>>().join(" ");
        let mut out = format!("qubits {}\n", self.n_qubits());
        out.push_str(&format!("theta {}\n", fmt_list(&self.mf.theta)));
        out.push_str(&format!("phi {}\n", fmt_list(&self.mf.phi)));
        for (g, t) in self.generators.iter().zip(&self.tau) {
            out.push_str(&format!("generator {g} {t:.8e}\n"));
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut theta = None;
        let mut phi = None;
        let mut gens = Vec::new();
        let mut taus = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: &str| Error::Parse {
                line: i + 1,
                msg: m.to_string(),
            };
            let mut toks = line.split_whitespace();
            let key = toks.next().unwrap_or_default();
            let nums = |t: std::str::SplitWhitespace| -> Result<Vec<f64>> {
                t.map(|s| s.parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}"))))
                    .collect()
            };
            match key {
                "qubits" => {}
                "theta" => theta = Some(nums(toks)?),
                "phi" => phi = Some(nums(toks)?),
                "generator" => {
                    let g: PauliString = toks.next().ok_or_else(|| bad("missing generator"))?.parse()?;
                    let t = nums(toks)?;
                    if t.len() != 1 {
                        return Err(bad("generator needs one amplitude"));
                    }
                    gens.push(g);
                    taus.push(t[0]);
                }
                other => return Err(bad(&format!("unknown key {other:?}"))),
            }
        }
        let mf = MeanFieldParams::new(
            theta.ok_or(Error::Parse {
                line: 0,
                msg: "missing theta".into(),
            })?,
            phi.ok_or(Error::Parse {
                line: 0,
                msg: "missing phi".into(),
            })?,
        )?;
        AnsatzSpec::new(mf, gens, taus)
    }
}

/// `⊗_j (cos(θ_j/2)|0⟩ + e^{iφ_j} sin(θ_j/2)|1⟩)`.
pub fn mean_field_state(mf: &MeanFieldParams) -> Result<StateVector> {
    let qubits: Vec<[Complex64; 2]> = mf
        .theta
        .iter()
        .zip(&mf.phi)
        .map(|(&t, &p)| {
            [
                Complex64::new((t / 2.0).cos(), 0.0),
                Complex64::from_polar((t / 2.0).sin(), p),
            ]
        })
        .collect();
    StateVector::product(&qubits)
}

/// `e^{−iτP/2}ψ = cos(τ/2)ψ − i sin(τ/2)Pψ`.
pub fn apply_pauli_rotation(psi: &StateVector, p: &PauliString, tau: f64) -> Result<StateVector> {
    if p.len() != psi.n_qubits() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: psi.n_qubits(),
        });
    }
    let (co, si) = ((tau / 2.0).cos(), (tau / 2.0).sin());
    let amps = psi.amplitudes();
    let mut out: Vec<Complex64> = amps.iter().map(|a| a * co).collect();
    for (k, a) in amps.iter().enumerate() {
        let (ph, k2) = p.apply_basis(k);
        out[k2] += Complex64::new(0.0, -si) * ph * a;
    }
    StateVector::from_amplitudes(out)
}

/// `∏_k e^{−iτ_k P_k/2} |Ω(Γ)⟩`, with generator 0 applied first.
pub fn qcc_state(spec: &AnsatzSpec) -> Result<StateVector> {
    let mut psi = mean_field_state(&spec.mf)?;
    for (g, &t) in spec.generators.iter().zip(&spec.tau) {
        psi = apply_pauli_rotation(&psi, g, t)?;
    }
    Ok(psi)
}

pub fn qcc_energy(h: &PauliSum, spec: &AnsatzSpec) -> Result<f64> {
    h.expectation(&qcc_state(spec)?)
}

#[derive(Clone, Debug)]
pub struct MeanFieldResult {
    pub params: MeanFieldParams,
    pub energy: f64,
    pub converged: bool,
}

/// Multi-start quasi-Newton over the 2n_q Bloch angles; best start wins.
pub fn optimize_mean_field(h: &PauliSum, starts: usize, seed: u64) -> Result<MeanFieldResult> {
    let n = h.n_qubits();
    let starts = starts.max(1);
    let mut rng = rng_from_seed(seed);
    let inits: Vec<Vec<f64>> = (0..starts)
        .map(|_| {
            (0..2 * n)
                .map(|i| {
                    if i < n {
                        rng.random_range(0.0..PI)
                    } else {
                        rng.random_range(0.0..2.0 * PI)
                    }
                })
                .collect()
        })
        .collect();
    let opts = LbfgsOptions::default();
    let runs: Vec<lbfgs::Minimum> = inits
        .par_iter()
        .map(|x0| {
            lbfgs::minimize(
                |x| {
                    let mf = MeanFieldParams {
                        theta: x[..n].to_vec(),
                        phi: x[n..].to_vec(),
                    };
                    mean_field_state(&mf)
                        .and_then(|psi| h.expectation(&psi))
                        .unwrap_or(f64::INFINITY)
                },
                x0,
                &opts,
            )
        })
        .collect();
    let best = runs
        .into_iter()
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .expect("at least one start");
    Ok(MeanFieldResult {
        converged: best.converged(),
        energy: best.f,
        params: MeanFieldParams {
            theta: best.x[..n].to_vec(),
            phi: best.x[n..].to_vec(),
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlipGroup {
    /// Qubits flipped by every member (X or Y positions), as a bit mask.
    pub flip_mask: usize,
    /// Indices into `ScreeningReport::candidates`.
    pub members: Vec<usize>,
    pub max_magnitude: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScreeningReport {
    /// Candidate generators with |∂E/∂τ| at τ = 0, strongest first.
    pub candidates: Vec<(PauliString, f64)>,
    pub flip_index_groups: Vec<FlipGroup>,
}

impl ScreeningReport {
    /// The top `k` generators in ranking order.
    pub fn top(&self, k: usize) -> Vec<PauliString> {
        self.candidates.iter().take(k).map(|(p, _)| p.clone()).collect()
    }
}

/// Ranking key: magnitude descending on a 1e-10 grid, then lexicographic string order.
fn rank_key(p: &PauliString, m: f64) -> (i64, PauliString) {
    (-(m * 1e10).round() as i64, p.clone())
}

/// All strings with an odd number of Y letters, i.e. generators whose rotation is real.
pub fn odd_y_strings(n: usize) -> Result<Vec<PauliString>> {
    if n > 8 {
        return Err(Error::Config(format!("generator enumeration over {n} qubits is too large")));
    }
    let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    (0..4usize.pow(n as u32))
        .map(|mut code| {
            let v: Vec<Pauli> = (0..n)
                .map(|_| {
                    let l = letters[code % 4];
                    code /= 4;
                    l
                })
                .collect();
            PauliString::new(v)
        })
        .filter(|p| p.as_ref().map_or(true, |p| p.count_y() % 2 == 1))
        .collect()
}

/// Energy gradients of every odd-Y generator at τ = 0, grouped by flip index.
pub fn screen_generators(h: &PauliSum, mf: &MeanFieldParams) -> Result<ScreeningReport> {
    let psi = mean_field_state(mf)?;
    let mut candidates = odd_y_strings(h.n_qubits())?
        .into_iter()
        .map(|p| {
            let g = commutator_expectation(h, &p, &psi)?;
            Ok((p, g.abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    candidates.sort_by_key(|(p, m)| rank_key(p, *m));

    let mut groups: Vec<FlipGroup> = Vec::new();
    for (i, (p, m)) in candidates.iter().enumerate() {
        let mask = p.flip_mask();
        match groups.iter_mut().find(|g| g.flip_mask == mask) {
            Some(g) => {
                g.members.push(i);
                g.max_magnitude = g.max_magnitude.max(*m);
            }
            None => groups.push(FlipGroup {
                flip_mask: mask,
                members: vec![i],
                max_magnitude: *m,
            }),
        }
    }
    Ok(ScreeningReport {
        candidates,
        flip_index_groups: groups,
    })
}

/// Standard-gate circuit preparing the ansatz state from |0…0⟩.
///
/// Each qubit gets RY(θ) then RZ(φ); each generator is exponentiated by rotating
/// its support onto Z, a CNOT ladder, RZ(τ) on the last support qubit, and the
/// mirror image.
pub fn build_ansatz_circuit(spec: &AnsatzSpec) -> Circuit {
    let n = spec.n_qubits();
    let mut c = Circuit::new(n);
    for q in 0..n {
        c.push(Gate::Ry(q, spec.mf.theta[q]));
        c.push(Gate::Rz(q, spec.mf.phi[q]));
    }
    for (p, &tau) in spec.generators.iter().zip(&spec.tau) {
        let support: Vec<usize> = (0..n).filter(|&q| p.letters()[q] != Pauli::I).collect();
        let Some(&last) = support.last() else {
            continue; // identity generator: global phase only
        };
        let into_z = |q: usize, inverse: bool| match p.letters()[q] {
            Pauli::X => vec![Gate::H(q)],
            Pauli::Y => vec![Gate::Rx(q, if inverse { -FRAC_PI_2 } else { FRAC_PI_2 })],
            _ => vec![],
        };
        for &q in &support {
            c.gates.extend(into_z(q, false));
        }
        for w in support.windows(2) {
            c.push(Gate::Cnot(w[0], w[1]));
        }
        c.push(Gate::Rz(last, tau));
        for w in support.windows(2).rev() {
            c.push(Gate::Cnot(w[0], w[1]));
        }
        for &q in &support {
            c.gates.extend(into_z(q, true));
        }
    }
    c
}

#[derive(Clone, Debug)]
pub struct VqeResult {
    pub spec: AnsatzSpec,
    pub energy: f64,
    pub iterations: usize,
    pub termination: Termination,
}

impl VqeResult {
    pub fn converged(&self) -> bool {
        self.termination != Termination::IterationCap
    }
}

/// Quasi-Newton minimization of the exact energy over Γ ∪ τ.
pub fn vqe_minimize(h: &PauliSum, spec0: &AnsatzSpec, ftol: f64, gtol: f64) -> Result<VqeResult> {
    if spec0.n_qubits() != h.n_qubits() {
        return Err(Error::LengthMismatch {
            left: spec0.n_qubits(),
            right: h.n_qubits(),
        });
    }
    let opts = LbfgsOptions {
        ftol,
        gtol,
        ..LbfgsOptions::default()
    };
    let m = lbfgs::minimize(
        |x| qcc_energy(h, &spec0.with_params(x)).unwrap_or(f64::INFINITY),
        &spec0.params(),
        &opts,
    );
    Ok(VqeResult {
        spec: spec0.with_params(&m.x),
        energy: m.f,
        iterations: m.iterations,
        termination: m.termination,
    })
}

/// VQE from `spec0` and from `starts − 1` random perturbations of it (±0.3 rad
/// on every parameter); the lowest energy wins. Restarts let the Bloch angles
/// leave the symmetric point where the mean-field optimum often sits.
pub fn vqe_multistart(h: &PauliSum, spec0: &AnsatzSpec, starts: usize, seed: u64) -> Result<VqeResult> {
    let mut rng = rng_from_seed(seed ^ 0x005e_ed0f_5eed);
    let p0 = spec0.params();
    let inits: Vec<AnsatzSpec> = (0..starts.max(1))
        .map(|k| {
            if k == 0 {
                return spec0.clone();
            }
            let p: Vec<f64> = p0.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
            spec0.with_params(&p)
        })
        .collect();
    let runs = inits
        .par_iter()
        .map(|s| vqe_minimize(h, s, 1e-8, 1e-6))
        .collect::<Result<Vec<_>>>()?;
    Ok(runs
        .into_iter()
        .min_by(|a, b| a.energy.total_cmp(&b.energy))
        .expect("at least one start"))
}

/// Mean field → screening → VQE with the `n_generators` strongest generators.
#[derive(Clone, Debug)]
pub struct QccWorkflow {
    pub mean_field: MeanFieldResult,
    pub screening: ScreeningReport,
    pub vqe: VqeResult,
}

pub fn run_qcc(h: &PauliSum, n_generators: usize, starts: usize, seed: u64) -> Result<QccWorkflow> {
    let mean_field = optimize_mean_field(h, starts, seed)?;
    let screening = screen_generators(h, &mean_field.params)?;
    let gens = screening.top(n_generators);
    let tau = vec![0.0; gens.len()];
    let spec0 = AnsatzSpec::new(mean_field.params.clone(), gens, tau)?;
    let vqe = vqe_multistart(h, &spec0, starts, seed)?;
    Ok(QccWorkflow {
        mean_field,
        screening,
        vqe,
    })
}

impl fmt::Display for ScreeningReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (p, m) in &self.candidates {
            writeln!(f, "{p} {m:.10}")?;
        }
        Ok(())
    }
}
