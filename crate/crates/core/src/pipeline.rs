//! End-to-end commands behind the CLI. Each returns structured results plus a
//! deterministic text/CSV rendering; the binary only parses flags and writes files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::compiler::{compile_basis, equivalence_check, CompiledBasis};
use crate::dmet::{
    chemical_potential_loop, dmet_total_energy, exact_ground_energy, toy_problem, DmetConfig, DmetProblem,
    LoopResult,
};
use crate::error::{Error, Result};
use crate::fermion::{entropy_fragment_bath, entropy_mo, MoCoefficients};
use crate::mitigation::{
    accuracy_window, bootstrap, energy_from_histograms, pooled_expectations, sweep_purification_landscape,
    sweep_yy, task_seed, yy_sweep_csv, AccuracyWindow, BasisData, BootstrapConfig, ConfusionModel, Landscape,
    YySweepPoint,
};
use crate::qcc::{build_ansatz_circuit, qcc_energy, qcc_state, run_qcc, AnsatzSpec, QccWorkflow};
use crate::reference::{ReferenceData, ReferencePoint, BASES};
use crate::sim::{exact_distribution, sample, NoiseModel, Program, StateVector};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub rs: Vec<f64>,
    pub shots: u64,
    pub seed: u64,
    /// Readout flips `(p01, p10)` applied to every qubit.
    pub noise: Option<(f64, f64)>,
    pub resamples: usize,
    /// Use exact distributions instead of sampling.
    pub exact: bool,
    /// Purification stop threshold.
    pub eps: f64,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rs: vec![0.7, 1.0, 1.1, 1.3, 1.6],
            shots: 5000,
            seed: 2021,
            noise: None,
            resamples: 500,
            exact: false,
            eps: 1e-2,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        if self.resamples == 0 {
            return Err(Error::Config("resamples must be at least 1".into()));
        }
        if self.rs.is_empty() {
            return Err(Error::Config("no bond lengths selected".into()));
        }
        if let Some((a, b)) = self.noise {
            ConfusionModel::uniform(2, a, b)?;
        }
        Ok(())
    }
}

/// Writes `contents` to `dir/name` via a temporary file and rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, &path)?;
    Ok(path)
}

#[derive(Clone, Debug)]
pub struct VqeReport {
    pub r: f64,
    pub workflow: QccWorkflow,
    pub reference_energy: f64,
    pub reference_gradient: f64,
    /// Energy of the stored optimal parameters.
    pub stored_parameter_energy: f64,
}

impl VqeReport {
    pub fn to_text(&self) -> String {
        let w = &self.workflow;
        let mut s = String::new();
        let _ = writeln!(s, "R = {:.1}", self.r);
        let _ = writeln!(s, "mean-field energy      {:.8}", w.mean_field.energy);
        if let Some((g, m)) = w.screening.candidates.first() {
            let _ = writeln!(s, "leading generator      {g}  |dE/dtau| = {m:.8} (reference {:.8})", self.reference_gradient);
        }
        let _ = writeln!(s, "QCC energy             {:.8}", w.vqe.energy);
        let _ = writeln!(s, "reference              {:.8}", self.reference_energy);
        let _ = writeln!(s, "difference             {:.2e}", w.vqe.energy - self.reference_energy);
        let _ = writeln!(s, "stored parameters give {:.8}", self.stored_parameter_energy);
        let _ = writeln!(s, "optimal ansatz:\n{}", w.vqe.spec.to_text());
        s
    }
}

pub fn cmd_vqe(rd: &ReferenceData, r: f64, seed: u64) -> Result<VqeReport> {
    let p = rd.point(r)?;
    let h = p.hamiltonian();
    let workflow = run_qcc(&h, 1, 8, seed)?;
    Ok(VqeReport {
        r,
        reference_energy: p.e_qcc,
        reference_gradient: p.gradient,
        stored_parameter_energy: qcc_energy(&h, &p.ansatz())?,
        workflow,
    })
}

/// The four optimized measurement circuits for an ansatz.
pub fn compile_all(spec: &AnsatzSpec) -> Result<Vec<CompiledBasis>> {
    let circ = build_ansatz_circuit(spec);
    BASES.iter().map(|b| compile_basis(&circ, b)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub r: f64,
    pub hf: f64,
    pub fci: f64,
    pub theory: f64,
    pub experiment: f64,
    pub experiment_sigma: f64,
    pub purified: f64,
    pub purified_sigma: f64,
    pub experiment_within: bool,
    pub purified_within: bool,
}

pub const CURVE_HEADER: &str =
    "R,E_HF,E_FCI,E_T,E_exp,sigma_exp,E_purified,sigma_purified,exp_within_chemical_accuracy,purified_within_chemical_accuracy";

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut s = format!("{CURVE_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:.1},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
            r.r,
            r.hf,
            r.fci,
            r.theory,
            r.experiment,
            r.experiment_sigma,
            r.purified,
            r.purified_sigma,
            r.experiment_within,
            r.purified_within
        );
    }
    s
}

fn curve_point(rd: &ReferenceData, p: &ReferencePoint, cfg: &RunConfig) -> Result<CurveRow> {
    let fp = rd.fragment(p.r)?;
    let compiled = compile_all(&p.ansatz())?;
    let zero = StateVector::zero(2)?;
    let within = |e: f64| (e - p.fci).abs() < rd.chemical_accuracy;
    let (experiment, experiment_sigma, purified, purified_sigma) = if cfg.exact {
        let data = compiled
            .iter()
            .map(|c| {
                Ok(BasisData {
                    basis_label: c.basis.clone(),
                    probs: exact_distribution(&c.optimized, &zero)?.probs,
                    shots: cfg.shots,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let exps = pooled_expectations(&data)?;
        let e = crate::dmet::fragment_energy_from_expression(&fp, &exps)?;
        let ep = crate::mitigation::purify_expectations(&exps, &fp, cfg.eps)?;
        (e, 0.0, ep, 0.0)
    } else {
        let noise = match cfg.noise {
            Some((a, b)) => NoiseModel::readout(2, a, b)?,
            None => NoiseModel::noiseless(2),
        };
        let spam = match cfg.noise {
            Some((a, b)) => Some(ConfusionModel::uniform(2, a, b)?),
            None => None,
        };
        let r_seed = task_seed(cfg.seed, (p.r * 10.0).round() as u64);
        let hists = compiled
            .iter()
            .enumerate()
            .map(|(k, c)| sample(&c.post, &zero, cfg.shots, &noise, task_seed(r_seed, k as u64), &c.basis))
            .collect::<Result<Vec<_>>>()?;
        let e = energy_from_histograms(&hists, &fp, false, cfg.eps, spam.as_ref())?;
        let ep = energy_from_histograms(&hists, &fp, true, cfg.eps, spam.as_ref())?;
        let mut bc = BootstrapConfig::new(cfg.resamples, false, task_seed(r_seed, 100));
        bc.eps = cfg.eps;
        bc.spam = spam.clone();
        let b = bootstrap(&hists, &fp, &bc)?;
        bc.purify = true;
        bc.seed = task_seed(r_seed, 101);
        let bp = bootstrap(&hists, &fp, &bc)?;
        (e, b.sigma, ep, bp.sigma)
    };
    Ok(CurveRow {
        r: p.r,
        hf: p.hf,
        fci: p.fci,
        theory: p.theory,
        experiment,
        experiment_sigma,
        purified,
        purified_sigma,
        experiment_within: within(experiment),
        purified_within: within(purified),
    })
}

/// Full pipeline per bond length; rows come back in the order of `cfg.rs`.
pub fn cmd_curve(rd: &ReferenceData, cfg: &RunConfig) -> Result<Vec<CurveRow>> {
    cfg.validate()?;
    let points = cfg.rs.iter().map(|&r| rd.point(r)).collect::<Result<Vec<_>>>()?;
    points.par_iter().map(|p| curve_point(rd, p, cfg)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyReport {
    pub r: f64,
    pub tau: f64,
    pub mo: f64,
    pub fragment_bath: f64,
    pub reference: Option<(f64, f64)>,
}

impl EntropyReport {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "R = {:.1}, tau = {:.6}\nMO basis entropy            {:.5} bits\nfragment-bath entropy       {:.5} bits\n",
            self.r, self.tau, self.mo, self.fragment_bath
        );
        if let Some((m, f)) = self.reference {
            let _ = writeln!(s, "reference (MO, fragment-bath) {m:.5} {f:.5}");
        }
        s
    }
}

pub fn cmd_entropy(rd: &ReferenceData, r: f64, tau: Option<f64>) -> Result<EntropyReport> {
    let p = rd.point(r)?;
    let mut spec = p.ansatz();
    if let Some(t) = tau {
        spec.tau[0] = t;
    }
    let psi = qcc_state(&spec)?;
    let m = rd.mo_coefficients;
    let c = MoCoefficients::new(nalgebra::Matrix2::new(m[0], m[1], m[2], m[3]))?;
    Ok(EntropyReport {
        r,
        tau: spec.tau[0],
        mo: entropy_mo(&psi)?,
        fragment_bath: entropy_fragment_bath(&psi, &c)?,
        reference: p.entropy.as_ref().map(|e| (e.mo_theory, e.fragment_bath_theory)),
    })
}

#[derive(Clone, Debug)]
pub struct CompileOutput {
    pub r: f64,
    pub compiled: CompiledBasis,
    /// Distance to the stored post-optimization circuit, when one exists.
    pub tv_to_stored: Option<f64>,
    pub tol: f64,
}

impl CompileOutput {
    pub fn pass(&self) -> bool {
        self.compiled.tv_to_pre < self.tol
    }

    pub fn to_text(&self) -> String {
        let c = &self.compiled;
        let mut s = format!("# R = {:.1}, basis {}\n## pre-optimization\n", self.r, c.basis);
        s.push_str(&c.pre.to_text());
        s.push_str("## post-optimization\n");
        s.push_str(&c.post.to_text());
        let _ = writeln!(s, "## report\n{}", c.report);
        let _ = writeln!(
            s,
            "equivalence (total variation to pre-optimization) {:.3e}: {}",
            c.tv_to_pre,
            if self.pass() { "pass" } else { "FAIL" }
        );
        if let Some(d) = self.tv_to_stored {
            let _ = writeln!(s, "total variation to stored reference circuit {d:.3e}");
        }
        s
    }
}

pub fn cmd_compile(rd: &ReferenceData, r: f64, basis: &str) -> Result<CompileOutput> {
    let basis = basis.to_ascii_uppercase();
    if !BASES.contains(&basis.as_str()) {
        return Err(Error::Config(format!("unknown basis {basis:?}")));
    }
    let p = rd.point(r)?;
    let compiled = compile_basis(&build_ansatz_circuit(&p.ansatz()), &basis)?;
    let tv_to_stored = if basis == "YY" {
        None
    } else {
        let stored = rd.circuit("post", r, &basis)?;
        let rep = equivalence_check(&[("stored", &compiled.post as &dyn Program, &stored as &dyn Program)], 1e-3)?;
        Some(rep.max_distance())
    };
    Ok(CompileOutput {
        r,
        compiled,
        tv_to_stored,
        tol: 1e-3,
    })
}

/// Reference root of `N^Fragment(δμ) = N^Total` by bisection on a bracket.
pub fn bisect_delta_mu(
    problem: &DmetProblem,
    n_total: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let emb = problem.embeddings()?;
    let f = |mu: f64| -> Result<f64> { Ok(problem.sweep(&emb, mu)?.n_fragment() - n_total) };
    let (mut flo, fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::Config(format!("bracket [{lo}, {hi}] does not straddle the root")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Clone, Debug)]
pub struct ToyReport {
    pub result: LoopResult,
    pub energy: f64,
    pub exact_energy: f64,
    pub bisection_root: f64,
    pub n_bisection: f64,
}

impl ToyReport {
    pub fn to_text(&self) -> String {
        let mut s = self.result.to_string();
        let _ = writeln!(s, "converged delta_mu        {:.10}", self.result.delta_mu);
        let _ = writeln!(s, "bisection root            {:.10}", self.bisection_root);
        let _ = writeln!(s, "fragment electrons        {:.10}", self.result.sweep.n_fragment());
        let _ = writeln!(s, "secant fallback engaged   {}", self.result.secant_engaged);
        let _ = writeln!(s, "DMET energy               {:.8}", self.energy);
        let _ = writeln!(s, "exact diagonalization     {:.8}", self.exact_energy);
        s
    }
}

pub fn cmd_dmet_toy(step: f64, tolerance: f64) -> Result<ToyReport> {
    let problem = toy_problem()?;
    let mut cfg = DmetConfig::new(problem.n_electrons as f64, problem.fragments.len());
    cfg.step = step;
    cfg.tolerance = tolerance;
    let emb = problem.embeddings()?;
    let result = chemical_potential_loop(|mu| problem.sweep(&emb, mu), 0.0, &cfg)?;
    let energy = dmet_total_energy(&result.sweep.energies, problem.ints.e_nuc);
    let bisection_root = bisect_delta_mu(&problem, cfg.n_total, -5.0, 5.0, 1e-12)?;
    let n_bisection = problem.sweep(&emb, bisection_root)?.n_fragment();
    Ok(ToyReport {
        exact_energy: exact_ground_energy(&problem.ints, problem.n_electrons)?,
        result,
        energy,
        bisection_root,
        n_bisection,
    })
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub r: f64,
    pub yy: Vec<YySweepPoint>,
    pub window: AccuracyWindow,
    pub landscape: Landscape,
}

/// Exact-state expectations of the stored optimal ansatz at `r`.
pub fn exact_expectations(p: &ReferencePoint) -> Result<std::collections::BTreeMap<String, f64>> {
    let psi = qcc_state(&p.ansatz())?;
    let rdm = crate::fermion::build_rdms(&crate::fermion::decode_state(&psi)?)?;
    Ok(crate::fermion::rdms_to_pauli(&rdm))
}

pub fn cmd_purify_sweep(rd: &ReferenceData, r: f64, eps: f64) -> Result<SweepOutput> {
    let p = rd.point(r)?;
    let fp = rd.fragment(r)?;
    let exact = exact_expectations(p)?;
    let values: Vec<f64> = (0..=500).map(|k| -0.2 + 0.8 * k as f64 / 500.0).collect();
    let yy = sweep_yy(&fp, &exact, &values, eps)?;
    let ideal = crate::dmet::fragment_energy_from_expression(&fp, &exact)?;
    let window = accuracy_window(&yy, exact["YY"], ideal, rd.chemical_accuracy);
    let landscape = sweep_purification_landscape(&fp, &exact, 41, 0.2, eps, rd.chemical_accuracy)?;
    Ok(SweepOutput { r, yy, window, landscape })
}

pub fn sweep_files(s: &SweepOutput) -> Vec<(String, String)> {
    vec![
        (format!("yy_sweep_r{:.1}.csv", s.r), yy_sweep_csv(&s.yy)),
        (format!("landscape_r{:.1}.csv", s.r), s.landscape.to_csv()),
    ]
}

