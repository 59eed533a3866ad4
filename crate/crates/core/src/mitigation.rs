//! Readout-error correction, McWeeny purification of the two-particle density,
//! expectation pooling across measurement circuits, bootstrap error bars and
//! the purification sweeps.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::dmet::{fragment_energy_from_expression, FragmentProblem};
use crate::error::{Error, Result};
use crate::fermion::{pauli_to_rdms, rdms_to_pauli, trace_down, RdmPair, MEASURED_PAULIS, N_ELECTRONS};
use crate::sim::{rng_from_seed, Histogram};

type CMat = DMatrix<Complex64>;

/// Per-qubit readout confusion: `p01` = P(read 1 | 0), `p10` = P(read 0 | 1).
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionModel {
    pub flips: Vec<(f64, f64)>,
}

impl ConfusionModel {
    pub fn new(flips: Vec<(f64, f64)>) -> Result<Self> {
        for &(a, b) in &flips {
            for p in [a, b] {
                if !(0.0..0.5).contains(&p) {
                    return Err(Error::Config(format!("readout flip probability {p} not in [0, 0.5)")));
                }
            }
        }
        Ok(ConfusionModel { flips })
    }

    pub fn uniform(n: usize, p01: f64, p10: f64) -> Result<Self> {
        Self::new(vec![(p01, p10); n])
    }

    pub fn identity(n: usize) -> Self {
        ConfusionModel { flips: vec![(0.0, 0.0); n] }
    }

    pub fn n_qubits(&self) -> usize {
        self.flips.len()
    }

    /// Applies a 2×2 matrix per qubit (`m[read][true]`) to a distribution over basis indices.
    fn apply(&self, probs: &[f64], per_qubit: impl Fn(f64, f64) -> [[f64; 2]; 2]) -> Result<Vec<f64>> {
        let n = self.n_qubits();
        if probs.len() != 1 << n {
            return Err(Error::Dimension(format!("{} probabilities for {n} qubits", probs.len())));
        }
        let mut v = probs.to_vec();
        for (q, &(p01, p10)) in self.flips.iter().enumerate() {
            let m = per_qubit(p01, p10);
            let bit = 1 << q;
            for k in 0..v.len() {
                if k & bit == 0 {
                    let (a, b) = (v[k], v[k | bit]);
                    v[k] = m[0][0] * a + m[0][1] * b;
                    v[k | bit] = m[1][0] * a + m[1][1] * b;
                }
            }
        }
        Ok(v)
    }

    /// Distribution seen through the noisy readout.
    pub fn forward(&self, probs: &[f64]) -> Result<Vec<f64>> {
        self.apply(probs, |p01, p10| [[1.0 - p01, p10], [p01, 1.0 - p10]])
    }

    /// Exact inverse of [`forward`](Self::forward), without clipping.
    pub fn invert(&self, probs: &[f64]) -> Result<Vec<f64>> {
        self.apply(probs, |p01, p10| {
            let det = 1.0 - p01 - p10;
            [[(1.0 - p10) / det, -p10 / det], [-p01 / det, (1.0 - p01) / det]]
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpamCorrected {
    /// Corrected distribution, clipped at zero and renormalized.
    pub probs: Vec<f64>,
    /// The inverse applied to the empirical frequencies, before clipping.
    pub unclipped: Vec<f64>,
    pub clipped: bool,
}

pub fn spam_correct_frequencies(freq: &[f64], m: &ConfusionModel) -> Result<SpamCorrected> {
    let unclipped = m.invert(freq)?;
    let clipped = unclipped.iter().any(|&p| p < 0.0);
    let mut probs: Vec<f64> = unclipped.iter().map(|&p| p.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        probs.iter_mut().for_each(|p| *p /= total);
    }
    Ok(SpamCorrected {
        probs,
        unclipped,
        clipped,
    })
}

pub fn spam_correct(h: &Histogram, m: &ConfusionModel) -> Result<SpamCorrected> {
    if h.shots == 0 {
        return Err(Error::ZeroShots(h.basis_label.clone()));
    }
    spam_correct_frequencies(&h.frequencies(), m)
}

/// A measured distribution over basis indices with its circuit label and weight.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisData {
    pub basis_label: String,
    pub probs: Vec<f64>,
    pub shots: u64,
}

/// `⟨P⟩` of a letter string, read off a distribution measured in `basis`;
/// `None` unless every non-identity letter of `P` matches the basis letter.
fn parity_expectation(label: &str, basis: &str, probs: &[f64]) -> Option<f64> {
    let mut mask = 0usize;
    for (q, (l, b)) in label.chars().zip(basis.chars()).enumerate() {
        if l == 'I' {
            continue;
        }
        if l != b {
            return None;
        }
        mask |= 1 << q;
    }
    Some(
        probs
            .iter()
            .enumerate()
            .map(|(k, p)| if (k & mask).count_ones().is_multiple_of(2) { *p } else { -*p })
            .sum(),
    )
}

/// Operators equal to `label` under the fragment/bath (qubit) swap, which the
/// ansatz states respect: estimates of any of them are pooled.
fn swap_partners(label: &str) -> Vec<String> {
    let swapped: String = label.chars().rev().collect();
    if swapped == label {
        vec![label.to_string()]
    } else {
        vec![label.to_string(), swapped]
    }
}

/// The nine expectations the RDMs need. Each is the shot-weighted average of
/// every circuit reading of the operator or its swap partner, so `ZX` (which
/// no circuit measures directly) comes from the `XZ` circuit and the
/// single-qubit terms use every X or Z readout on either qubit.
pub fn pooled_expectations(data: &[BasisData]) -> Result<BTreeMap<String, f64>> {
    if let Some(d) = data.iter().find(|d| d.shots == 0) {
        return Err(Error::ZeroShots(d.basis_label.clone()));
    }
    let mut out = BTreeMap::new();
    for label in MEASURED_PAULIS {
        let mut acc = 0.0;
        let mut weight = 0.0;
        for source in swap_partners(label) {
            for d in data {
                if let Some(v) = parity_expectation(&source, &d.basis_label, &d.probs) {
                    acc += v * d.shots as f64;
                    weight += d.shots as f64;
                }
            }
        }
        if weight == 0.0 {
            return Err(Error::MissingExpectation(label.to_string()));
        }
        out.insert(label.to_string(), acc / weight);
    }
    Ok(out)
}

/// Output of McWeeny purification.
#[derive(Clone, Debug)]
pub struct Purified {
    /// Pair matrix rescaled back to trace N(N−1).
    pub two: CMat,
    pub iterations: usize,
    /// `‖P² − P‖₁` of the normalized pair matrix before each iteration and at exit.
    pub residuals: Vec<f64>,
}

impl Purified {
    pub fn residual(&self) -> f64 {
        *self.residuals.last().expect("at least the initial residual")
    }

    /// Residuals never increase (to 1e-12).
    pub fn monotone(&self) -> bool {
        self.residuals.windows(2).all(|w| w[1] <= w[0] + 1e-12)
    }
}

fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `Σ|λ² − λ|` over the eigenvalues of a Hermitian matrix.
fn idempotency_residual(p: &CMat) -> f64 {
    let eig = SymmetricEigen::new(hermitian_part(p));
    eig.eigenvalues.iter().map(|l| (l * l - l).abs()).sum()
}

/// McWeeny purification `P ← 3P² − 2P³` of the pair matrix, normalized to unit
/// trace (a pure two-electron state makes it a rank-one projector). Stops when
/// `‖P² − P‖₁ < eps`.
pub fn mcweeny_purify(two: &CMat, eps: f64, max_iter: usize) -> Result<Purified> {
    let n = two.nrows();
    if n != two.ncols() || n != 16 {
        return Err(Error::Dimension(format!("pair matrix is {}×{}", n, two.ncols())));
    }
    let pairs = (N_ELECTRONS * (N_ELECTRONS - 1)) as f64;
    let tr = two.trace();
    if (tr.re - pairs).abs() > 1e-6 || tr.im.abs() > 1e-6 {
        return Err(Error::NotTwoElectron(tr.re));
    }
    let herm = (two - two.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if herm > 1e-8 {
        return Err(Error::NonHermitian(herm));
    }
    let scale = Complex64::new(pairs, 0.0);
    let mut p = hermitian_part(two) / scale;
    let mut residuals = vec![idempotency_residual(&p)];
    let mut iterations = 0;
    while residuals[iterations] >= eps {
        if iterations >= max_iter || !residuals[iterations].is_finite() {
            return Err(Error::PurificationDiverged {
                iterations,
                residual: residuals[iterations],
            });
        }
        let p2 = &p * &p;
        let p3 = &p2 * &p;
        p = hermitian_part(&(p2 * Complex64::new(3.0, 0.0) - p3 * Complex64::new(2.0, 0.0)));
        iterations += 1;
        residuals.push(idempotency_residual(&p));
    }
    Ok(Purified {
        two: p * scale,
        iterations,
        residuals,
    })
}

/// Energy from a purified pair matrix: contract down to the 1-RDM, map back to
/// Pauli expectations and evaluate the per-atom expression.
pub fn purified_energy(two: &CMat, fp: &FragmentProblem) -> Result<f64> {
    let rdm = RdmPair {
        one: trace_down(two),
        two: two.clone(),
    };
    fragment_energy_from_expression(fp, &rdms_to_pauli(&rdm))
}

/// Purified per-atom energy straight from expectations.
pub fn purify_expectations(exps: &BTreeMap<String, f64>, fp: &FragmentProblem, eps: f64) -> Result<f64> {
    let rdm = pauli_to_rdms(exps)?;
    let pure = mcweeny_purify(&rdm.two, eps, 100)?;
    purified_energy(&pure.two, fp)
}

/// Controls for [`bootstrap`].
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub purify: bool,
    pub eps: f64,
    pub seed: u64,
    pub spam: Option<ConfusionModel>,
}

impl BootstrapConfig {
    pub fn new(resamples: usize, purify: bool, seed: u64) -> Self {
        BootstrapConfig {
            resamples,
            purify,
            eps: 1e-2,
            seed,
            spam: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapResult {
    pub mean: f64,
    pub sigma: f64,
    pub resamples: usize,
    pub energies: Vec<f64>,
    /// The estimate from the original histograms.
    pub plug_in: f64,
}

/// Seed of resample `k`, decorrelated from the master seed.
pub fn task_seed(master: u64, k: u64) -> u64 {
    let mut z = master ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-atom energy from raw histograms: SPAM correction, pooling, optional purification.
pub fn energy_from_histograms(
    hists: &[Histogram],
    fp: &FragmentProblem,
    purify: bool,
    eps: f64,
    spam: Option<&ConfusionModel>,
) -> Result<f64> {
    let data = hists
        .iter()
        .map(|h| {
            if h.shots == 0 {
                return Err(Error::ZeroShots(h.basis_label.clone()));
            }
            let probs = match spam {
                Some(m) => spam_correct(h, m)?.probs,
                None => h.frequencies(),
            };
            Ok(BasisData {
                basis_label: h.basis_label.clone(),
                probs,
                shots: h.shots,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let exps = pooled_expectations(&data)?;
    if purify {
        purify_expectations(&exps, fp, eps)
    } else {
        fragment_energy_from_expression(fp, &exps)
    }
}

fn resample<R: Rng>(h: &Histogram, rng: &mut R) -> Histogram {
    let mut acc = 0u64;
    let cdf: Vec<u64> = h
        .counts
        .iter()
        .map(|c| {
            acc += c;
            acc
        })
        .collect();
    let mut counts = vec![0u64; h.counts.len()];
    for _ in 0..h.shots {
        let u = rng.random_range(0..h.shots);
        counts[cdf.partition_point(|&x| x <= u)] += 1;
    }
    Histogram {
        n_qubits: h.n_qubits,
        counts,
        shots: h.shots,
        basis_label: h.basis_label.clone(),
    }
}

/// Empirical bootstrap: each resample redraws every histogram with replacement
/// at its original size and recomputes the energy.
pub fn bootstrap(hists: &[Histogram], fp: &FragmentProblem, cfg: &BootstrapConfig) -> Result<BootstrapResult> {
    if cfg.resamples == 0 {
        return Err(Error::Config("bootstrap needs at least one resample".into()));
    }
    if let Some(h) = hists.iter().find(|h| h.shots == 0) {
        return Err(Error::ZeroShots(h.basis_label.clone()));
    }
    let plug_in = energy_from_histograms(hists, fp, cfg.purify, cfg.eps, cfg.spam.as_ref())?;
    let energies = (0..cfg.resamples as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(task_seed(cfg.seed, k));
            let redrawn: Vec<Histogram> = hists.iter().map(|h| resample(h, &mut rng)).collect();
            energy_from_histograms(&redrawn, fp, cfg.purify, cfg.eps, cfg.spam.as_ref())
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = energies.len() as f64;
    let mean = energies.iter().sum::<f64>() / n;
    let var = if energies.len() > 1 {
        energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(BootstrapResult {
        mean,
        sigma: var.sqrt(),
        resamples: cfg.resamples,
        energies,
        plug_in,
    })
}

/// `|E_purified − E_ideal|` (mHa) over a grid of offsets to `⟨XZ⟩+⟨ZX⟩` (x) and
/// `⟨X₀⟩+⟨X₁⟩` (y), each sum split equally between its two terms.
#[derive(Clone, Debug, PartialEq)]
pub struct Landscape {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major over `ys`, then `xs`; `None` where purification failed.
    pub errors_mha: Vec<Option<f64>>,
    pub chemical_accuracy_mha: f64,
}

impl Landscape {
    pub fn at(&self, ix: usize, iy: usize) -> Option<f64> {
        self.errors_mha[iy * self.xs.len() + ix]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,abs_error_mHa,within_chemical_accuracy\n");
        for (iy, y) in self.ys.iter().enumerate() {
            for (ix, x) in self.xs.iter().enumerate() {
                match self.at(ix, iy) {
                    Some(e) => out.push_str(&format!(
                        "{x:.6},{y:.6},{e:.6},{}\n",
                        e < self.chemical_accuracy_mha
                    )),
                    None => out.push_str(&format!("{x:.6},{y:.6},nan,false\n")),
                }
            }
        }
        out
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Grid of `n × n` points with sums spanning `exact ± half_width`.
pub fn sweep_purification_landscape(
    fp: &FragmentProblem,
    exact: &BTreeMap<String, f64>,
    n: usize,
    half_width: f64,
    eps: f64,
    chemical_accuracy: f64,
) -> Result<Landscape> {
    let ideal = fragment_energy_from_expression(fp, exact)?;
    let get = |k: &str| exact.get(k).copied().ok_or_else(|| Error::MissingExpectation(k.to_string()));
    let x0 = get("XZ")? + get("ZX")?;
    let y0 = get("XI")? + get("IX")?;
    let xs = linspace(x0 - half_width, x0 + half_width, n);
    let ys = linspace(y0 - half_width, y0 + half_width, n);
    let points: Vec<(f64, f64)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    let errors_mha = points
        .par_iter()
        .map(|&(x, y)| {
            let mut e = exact.clone();
            e.insert("XZ".into(), x / 2.0);
            e.insert("ZX".into(), x / 2.0);
            e.insert("XI".into(), y / 2.0);
            e.insert("IX".into(), y / 2.0);
            purify_expectations(&e, fp, eps).ok().map(|v| (v - ideal).abs() * 1e3)
        })
        .collect();
    Ok(Landscape {
        xs,
        ys,
        errors_mha,
        chemical_accuracy_mha: chemical_accuracy * 1e3,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct YySweepPoint {
    pub yy: f64,
    pub unpurified: f64,
    pub purified: Option<f64>,
}

/// Energies with `⟨YY⟩` replaced by each value and everything else exact.
pub fn sweep_yy(
    fp: &FragmentProblem,
    exact: &BTreeMap<String, f64>,
    values: &[f64],
    eps: f64,
) -> Result<Vec<YySweepPoint>> {
    values
        .par_iter()
        .map(|&yy| {
            let mut e = exact.clone();
            e.insert("YY".into(), yy);
            Ok(YySweepPoint {
                yy,
                unpurified: fragment_energy_from_expression(fp, &e)?,
                purified: purify_expectations(&e, fp, eps).ok(),
            })
        })
        .collect()
}

pub fn yy_sweep_csv(points: &[YySweepPoint]) -> String {
    let mut out = String::from("yy,E_unpurified,E_purified\n");
    for p in points {
        match p.purified {
            Some(e) => out.push_str(&format!("{:.6},{:.6},{e:.6}\n", p.yy, p.unpurified)),
            None => out.push_str(&format!("{:.6},{:.6},nan\n", p.yy, p.unpurified)),
        }
    }
    out
}

/// The `⟨YY⟩` interval, bracketing `center`, over which the purified energy stays
/// within `band` of `target`. Edges are located on the sweep grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AccuracyWindow {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl fmt::Display for AccuracyWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:.3}"));
        write!(f, "[{}, {}]", show(self.lower), show(self.upper))
    }
}

pub fn accuracy_window(points: &[YySweepPoint], center: f64, target: f64, band: f64) -> AccuracyWindow {
    let inside = |p: &YySweepPoint| p.purified.is_some_and(|e| (e - target).abs() < band);
    let start = points
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.yy - center).abs().total_cmp(&(b.1.yy - center).abs()))
        .map(|(i, _)| i);
    let Some(start) = start.filter(|&i| inside(&points[i])) else {
        return AccuracyWindow {
            lower: None,
            upper: None,
        };
    };
    let mut lo = start;
    while lo > 0 && inside(&points[lo - 1]) {
        lo -= 1;
    }
    let mut hi = start;
    while hi + 1 < points.len() && inside(&points[hi + 1]) {
        hi += 1;
    }
    AccuracyWindow {
        lower: (lo > 0).then(|| points[lo].yy),
        upper: (hi + 1 < points.len()).then(|| points[hi].yy),
    }
}
