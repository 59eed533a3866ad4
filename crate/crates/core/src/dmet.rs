//! Density matrix embedding: bath construction from a mean-field reference,
//! embedding Hamiltonians, fragment energies and electron counts, and the
//! chemical-potential loop that matches the fragment electron total.
//!
//! Integrals live on spatial orbitals. Spin-orbital mode `2p + σ` (σ = 0 for α)
//! keeps the (1α, 1β, 2α, 2β) order of the two-orbital problems. Mean-field
//! densities (`D^env`, the bath SVD input) are per spin; the environment
//! potential is therefore `V_pq = Σ_rs [2(pq|rs) − (ps|rq)] D^env_rs`.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fermion::{annihilate, create, rdms_general};
use crate::pauli::PauliSum;
use crate::sim::StateVector;

/// One- and two-electron integrals over L spatial orbitals (chemists' notation).
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralSet {
    pub h: DMatrix<f64>,
    /// `(pq|rs)` at `((p·L + q)·L + r)·L + s`.
    pub g: Vec<f64>,
    pub e_nuc: f64,
}

impl IntegralSet {
    pub fn new(h: DMatrix<f64>, g: Vec<f64>, e_nuc: f64) -> Result<Self> {
        let l = h.nrows();
        if h.ncols() != l || g.len() != l.pow(4) {
            return Err(Error::Dimension(format!(
                "h is {}×{}, g has {} entries",
                h.nrows(),
                h.ncols(),
                g.len()
            )));
        }
        let asym = (&h - h.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(Error::Config(format!("one-electron integrals not symmetric ({asym:e})")));
        }
        let ints = IntegralSet { h, g, e_nuc };
        for p in 0..l {
            for q in 0..l {
                for r in 0..l {
                    for s in 0..l {
                        let v = ints.eri(p, q, r, s);
                        for w in [
                            ints.eri(q, p, r, s),
                            ints.eri(p, q, s, r),
                            ints.eri(r, s, p, q),
                        ] {
                            if (v - w).abs() > 1e-12 {
                                return Err(Error::Config(format!(
                                    "two-electron integrals lack 8-fold symmetry at ({p}{q}|{r}{s})"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(ints)
    }

    pub fn n_orbitals(&self) -> usize {
        self.h.nrows()
    }

    pub fn eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let l = self.n_orbitals();
        self.g[((p * l + q) * l + r) * l + s]
    }

    /// Text form: `L n`, `ENUC e`, `H p q v` (p ≤ q) and `G p q r s v` for one
    /// representative of each nonzero permutation class.
    pub fn to_text(&self) -> String {
        let l = self.n_orbitals();
        let mut out = format!("L {l}\nENUC {:.12e}\n", self.e_nuc);
        for p in 0..l {
            for q in p..l {
                if self.h[(p, q)] != 0.0 {
                    out.push_str(&format!("H {p} {q} {:.12e}\n", self.h[(p, q)]));
                }
            }
        }
        for p in 0..l {
            for q in 0..=p {
                for r in 0..l {
                    for s in 0..=r {
                        if (p, q) < (r, s) {
                            continue;
                        }
                        let v = self.eri(p, q, r, s);
                        if v != 0.0 {
                            out.push_str(&format!("G {p} {q} {r} {s} {v:.12e}\n"));
                        }
                    }
                }
            }
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut l = None;
        let mut e_nuc = 0.0;
        let mut h_entries = Vec::new();
        let mut g_entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: String| Error::Parse { line: i + 1, msg: m };
            let toks: Vec<&str> = line.split_whitespace().collect();
            let idx = |t: &str| t.parse::<usize>().map_err(|_| bad(format!("bad index {t:?}")));
            let num = |t: &str| t.parse::<f64>().map_err(|_| bad(format!("bad number {t:?}")));
            match (toks[0], toks.len()) {
                ("L", 2) => l = Some(idx(toks[1])?),
                ("ENUC", 2) => e_nuc = num(toks[1])?,
                ("H", 4) => h_entries.push((idx(toks[1])?, idx(toks[2])?, num(toks[3])?)),
                ("G", 6) => g_entries.push((
                    [idx(toks[1])?, idx(toks[2])?, idx(toks[3])?, idx(toks[4])?],
                    num(toks[5])?,
                )),
                _ => return Err(bad(format!("unrecognized line {line:?}"))),
            }
        }
        let l = l.ok_or(Error::Parse {
            line: 0,
            msg: "missing L".into(),
        })?;
        let mut h = DMatrix::zeros(l, l);
        for (p, q, v) in h_entries {
            if p >= l || q >= l {
                return Err(Error::Dimension(format!("H index ({p},{q}) for L = {l}")));
            }
            h[(p, q)] = v;
            h[(q, p)] = v;
        }
        let mut g = vec![0.0; l.pow(4)];
        for ([p, q, r, s], v) in g_entries {
            if [p, q, r, s].iter().any(|&x| x >= l) {
                return Err(Error::Dimension(format!("G index ({p}{q}|{r}{s}) for L = {l}")));
            }
            for (a, b, c, d) in [
                (p, q, r, s),
                (q, p, r, s),
                (p, q, s, r),
                (q, p, s, r),
                (r, s, p, q),
                (s, r, p, q),
                (r, s, q, p),
                (s, r, q, p),
            ] {
                g[((a * l + b) * l + c) * l + d] = v;
            }
        }
        IntegralSet::new(h, g, e_nuc)
    }

    /// Integrals in a new orbital basis given by the columns of `w` (L × m).
    pub fn transform(&self, w: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
        let l = self.n_orbitals();
        let m = w.ncols();
        let h = w.transpose() * &self.h * w;
        // Four quarter transformations.
        let mut cur = self.g.clone();
        let mut dims = [l, l, l, l];
        for axis in 0..4 {
            let mut nd = dims;
            nd[axis] = m;
            let mut next = vec![0.0; nd.iter().product()];
            for i0 in 0..nd[0] {
                for i1 in 0..nd[1] {
                    for i2 in 0..nd[2] {
                        for i3 in 0..nd[3] {
                            let out_idx = [i0, i1, i2, i3];
                            let mut acc = 0.0;
                            for k in 0..l {
                                let mut src = out_idx;
                                src[axis] = k;
                                let v = cur[((src[0] * dims[1] + src[1]) * dims[2] + src[2]) * dims[3] + src[3]];
                                if v != 0.0 {
                                    acc += w[(k, out_idx[axis])] * v;
                                }
                            }
                            next[((i0 * nd[1] + i1) * nd[2] + i2) * nd[3] + i3] = acc;
                        }
                    }
                }
            }
            cur = next;
            dims = nd;
        }
        (h, cur)
    }
}

/// Whole-system mean-field reference: orbital coefficients (columns) and the
/// number of doubly occupied orbitals.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldReference {
    pub mo_coeff: DMatrix<f64>,
    pub n_occ: usize,
}

impl MeanFieldReference {
    pub fn new(mo_coeff: DMatrix<f64>, n_occ: usize) -> Result<Self> {
        let l = mo_coeff.nrows();
        if mo_coeff.ncols() != l || n_occ > l {
            return Err(Error::Dimension(format!(
                "{}×{} coefficients with {n_occ} occupied",
                l,
                mo_coeff.ncols()
            )));
        }
        let dev = (mo_coeff.transpose() * &mo_coeff - DMatrix::identity(l, l)).abs().max();
        if dev > 1e-10 {
            return Err(Error::NonOrthogonal(dev));
        }
        Ok(MeanFieldReference { mo_coeff, n_occ })
    }

    /// Orbitals of the one-electron Hamiltonian alone, lowest `n_occ` filled.
    pub fn from_core_hamiltonian(h: &DMatrix<f64>, n_electrons: usize) -> Result<Self> {
        if !n_electrons.is_multiple_of(2) {
            return Err(Error::Config("closed-shell reference needs an even electron count".into()));
        }
        let eig = SymmetricEigen::new(h.clone());
        let mut order: Vec<usize> = (0..h.nrows()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let c = DMatrix::from_fn(h.nrows(), h.nrows(), |i, j| eig.eigenvectors[(i, order[j])]);
        MeanFieldReference::new(c, n_electrons / 2)
    }

    /// Per-spin density `C_occ C_occᵀ`.
    pub fn density(&self) -> DMatrix<f64> {
        let occ: Vec<usize> = (0..self.n_occ).collect();
        env_density_matrix(&self.mo_coeff, &occ)
    }
}

/// `D^env_pq = Σ_{r∈env} C_pr C_qr` over the listed columns of `c`.
pub fn env_density_matrix(c: &DMatrix<f64>, env_columns: &[usize]) -> DMatrix<f64> {
    let l = c.nrows();
    let mut d = DMatrix::zeros(l, l);
    for &r in env_columns {
        let col = c.column(r);
        d += col * col.transpose();
    }
    d
}

/// Orbital rotation produced by the Schmidt decomposition of a mean-field
/// density. Columns of `rotation`, in order: fragment, bath, unentangled
/// occupied, unentangled virtual.
#[derive(Clone, Debug, PartialEq)]
pub struct BathRotation {
    pub rotation: DMatrix<f64>,
    pub n_frag: usize,
    pub n_bath: usize,
    pub n_core: usize,
    pub singular_values: Vec<f64>,
}

impl BathRotation {
    /// Fragment + bath columns.
    pub fn embedding_orbitals(&self) -> DMatrix<f64> {
        self.rotation.columns(0, self.n_frag + self.n_bath).into_owned()
    }

    /// Per-spin density of the unentangled occupied orbitals.
    pub fn core_density(&self) -> DMatrix<f64> {
        let start = self.n_frag + self.n_bath;
        let core: Vec<usize> = (start..start + self.n_core).collect();
        env_density_matrix(&self.rotation, &core)
    }
}

/// Bath orbitals from the SVD of the environment-rows / fragment-columns block
/// of the per-spin mean-field density. Singular values above `threshold` give
/// bath orbitals; a near-degenerate cluster straddling the threshold is kept
/// whole.
pub fn build_bath(d: &DMatrix<f64>, fragment: &[usize], threshold: f64) -> Result<BathRotation> {
    let l = d.nrows();
    if d.ncols() != l {
        return Err(Error::Dimension(format!("density is {}×{}", d.nrows(), d.ncols())));
    }
    if fragment.iter().any(|&p| p >= l) || fragment.is_empty() {
        return Err(Error::Dimension(format!("fragment {fragment:?} for {l} orbitals")));
    }
    let env: Vec<usize> = (0..l).filter(|p| !fragment.contains(p)).collect();
    let nf = fragment.len();
    let mut rotation = DMatrix::zeros(l, l);
    for (k, &p) in fragment.iter().enumerate() {
        rotation[(p, k)] = 1.0;
    }
    if env.is_empty() {
        return Ok(BathRotation {
            rotation,
            n_frag: nf,
            n_bath: 0,
            n_core: 0,
            singular_values: vec![],
        });
    }
    let block = DMatrix::from_fn(env.len(), nf, |i, j| d[(env[i], fragment[j])]);
    // Right singular vectors from the small fragment-side Gram matrix; σ and the
    // left vectors then follow from B·v, which stays accurate in absolute terms
    // even for null directions (the bidiagonal SVD can mis-factor rank-deficient blocks).
    let eig = SymmetricEigen::new(block.transpose() * &block);
    let mut pairs: Vec<(f64, DVector<f64>)> = (0..nf)
        .map(|k| {
            let bv = &block * eig.eigenvectors.column(k);
            (bv.norm(), bv)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs.truncate(nf.min(env.len()));
    let sv: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut keep = sv.iter().take_while(|&&s| s > threshold).count();
    // Extend across a degenerate cluster that crosses the threshold.
    while keep > 0 && keep < sv.len() && (sv[keep - 1] - sv[keep]).abs() <= 1e-8 * sv[keep - 1].max(1.0) {
        keep += 1;
    }
    let raw = DMatrix::from_fn(env.len(), keep, |i, k| pairs[k].1[i] / pairs[k].0.max(f64::MIN_POSITIVE));
    // Re-orthonormalize: near-degenerate σ leave the B·v images slightly skewed.
    let bath_env = if keep == 0 { raw } else { raw.qr().q() };

    // Remaining environment space: bath directions pushed to −1, then the
    // projected density separates occupied (≈1) from virtual (≈0).
    let ne = env.len();
    let proj = DMatrix::identity(ne, ne) - &bath_env * bath_env.transpose();
    let d_ee = DMatrix::from_fn(ne, ne, |i, j| d[(env[i], env[j])]);
    let m = &proj * d_ee * &proj - &bath_env * bath_env.transpose();
    let eig = SymmetricEigen::new(m);
    let mut core = Vec::new();
    let mut virt = Vec::new();
    for k in 0..ne {
        let v = eig.eigenvalues[k];
        if v < -0.5 {
            continue;
        }
        if v > 0.5 {
            core.push(k);
        } else {
            virt.push(k);
        }
    }
    let mut col = nf;
    let mut place = |vec: DVector<f64>, rotation: &mut DMatrix<f64>| {
        for (i, &p) in env.iter().enumerate() {
            rotation[(p, col)] = vec[i];
        }
        col += 1;
    };
    for k in 0..keep {
        place(bath_env.column(k).into_owned(), &mut rotation);
    }
    for &k in core.iter().chain(&virt) {
        place(eig.eigenvectors.column(k).into_owned(), &mut rotation);
    }
    if col != l {
        return Err(Error::Dimension(format!(
            "environment split produced {col} of {l} orbitals"
        )));
    }
    Ok(BathRotation {
        rotation,
        n_frag: nf,
        n_bath: keep,
        n_core: core.len(),
        singular_values: sv,
    })
}

/// `V_pq = Σ_rs [2(pq|rs) − (ps|rq)] D_rs` for a per-spin density `D`.
pub fn environment_potential(ints: &IntegralSet, d_env: &DMatrix<f64>) -> DMatrix<f64> {
    let l = ints.n_orbitals();
    DMatrix::from_fn(l, l, |p, q| {
        let mut v = 0.0;
        for r in 0..l {
            for s in 0..l {
                let d = d_env[(r, s)];
                if d != 0.0 {
                    v += (2.0 * ints.eri(p, q, r, s) - ints.eri(p, s, r, q)) * d;
                }
            }
        }
        v
    })
}

/// Second-quantized Hamiltonian on the fragment + bath orbitals.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedHamiltonian {
    /// One-body part, including the environment potential and `−δμ` on fragment diagonals.
    pub h1: DMatrix<f64>,
    /// Two-body `(pq|rs)`, nonzero only when all four indices are fragment orbitals.
    pub g2: Vec<f64>,
    pub n_frag: usize,
}

impl EmbeddedHamiltonian {
    pub fn n_orbitals(&self) -> usize {
        self.h1.nrows()
    }

    pub fn eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        let m = self.n_orbitals();
        self.g2[((p * m + q) * m + r) * m + s]
    }
}

/// Projects the full problem onto the columns of `emb` (fragment orbitals
/// first, `n_frag` of them):
/// `Σ_pq [h + V_env]_pq a†_p a_q − δμ Σ_{p∈A} n_p + ½ Σ_{pqrs∈A} (pq|rs) a†_p a†_r a_s a_q`.
pub fn build_embedding_hamiltonian(
    ints: &IntegralSet,
    d_env: &DMatrix<f64>,
    emb: &DMatrix<f64>,
    n_frag: usize,
    delta_mu: f64,
) -> Result<EmbeddedHamiltonian> {
    let l = ints.n_orbitals();
    if emb.nrows() != l || d_env.nrows() != l || d_env.ncols() != l || n_frag > emb.ncols() {
        return Err(Error::Dimension(format!(
            "embedding orbitals {}×{}, density {}×{}, L = {l}, {n_frag} fragment orbitals",
            emb.nrows(),
            emb.ncols(),
            d_env.nrows(),
            d_env.ncols()
        )));
    }
    let v = environment_potential(ints, d_env);
    let mut h1 = emb.transpose() * (&ints.h + v) * emb;
    for p in 0..n_frag {
        h1[(p, p)] -= delta_mu;
    }
    let (_, mut g2) = ints.transform(emb);
    let m = emb.ncols();
    for p in 0..m {
        for q in 0..m {
            for r in 0..m {
                for s in 0..m {
                    if p >= n_frag || q >= n_frag || r >= n_frag || s >= n_frag {
                        g2[((p * m + q) * m + r) * m + s] = 0.0;
                    }
                }
            }
        }
    }
    Ok(EmbeddedHamiltonian { h1, g2, n_frag })
}

/// Dense Hamiltonian on the `n_elec`, S_z = 0 determinants of `m` spatial orbitals.
pub struct FockSector {
    pub n_modes: usize,
    pub dets: Vec<usize>,
    index: HashMap<usize, usize>,
}

impl FockSector {
    pub fn new(m: usize, n_elec: usize) -> Result<Self> {
        let n_modes = 2 * m;
        if n_modes > 20 {
            return Err(Error::TooManyQubits(n_modes));
        }
        if !n_elec.is_multiple_of(2) || n_elec > n_modes {
            return Err(Error::Config(format!("{n_elec} electrons in {m} orbitals, S_z = 0")));
        }
        let alpha_mask: usize = (0..m).map(|p| 1 << (2 * p)).sum();
        let dets: Vec<usize> = (0..1usize << n_modes)
            .filter(|s| s.count_ones() as usize == n_elec && (s & alpha_mask).count_ones() as usize == n_elec / 2)
            .collect();
        let index = dets.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        Ok(FockSector { n_modes, dets, index })
    }

    /// Matrix of `Σ h_pq a†_pσ a_qσ + ½ Σ (pq|rs) a†_pσ a†_rτ a_sτ a_qσ`.
    pub fn hamiltonian(&self, h1: &DMatrix<f64>, eri: impl Fn(usize, usize, usize, usize) -> f64) -> DMatrix<f64> {
        let m = self.n_modes / 2;
        let dim = self.dets.len();
        let mut hm = DMatrix::zeros(dim, dim);
        let g: Vec<f64> = (0..m.pow(4))
            .map(|k| eri(k / (m * m * m), (k / (m * m)) % m, (k / m) % m, k % m))
            .collect();
        for (col, &det) in self.dets.iter().enumerate() {
            for p in 0..m {
                for q in 0..m {
                    let t = h1[(p, q)];
                    if t == 0.0 {
                        continue;
                    }
                    for sigma in 0..2 {
                        if let Some((s1, d1)) = annihilate(2 * q + sigma, det) {
                            if let Some((s2, d2)) = create(2 * p + sigma, d1) {
                                hm[(self.index[&d2], col)] += t * s1 * s2;
                            }
                        }
                    }
                }
            }
            for (k, &v) in g.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let (p, q, r, s) = (k / (m * m * m), (k / (m * m)) % m, (k / m) % m, k % m);
                for sigma in 0..2 {
                    for tau in 0..2 {
                        let ops = [
                            (false, 2 * q + sigma),
                            (false, 2 * s + tau),
                            (true, 2 * r + tau),
                            (true, 2 * p + sigma),
                        ];
                        let mut cur = Some((1.0, det));
                        for (dag, mode) in ops {
                            cur = cur.and_then(|(sg, d)| {
                                let hit = if dag { create(mode, d) } else { annihilate(mode, d) };
                                hit.map(|(s2, d2)| (sg * s2, d2))
                            });
                        }
                        if let Some((sg, d2)) = cur {
                            hm[(self.index[&d2], col)] += 0.5 * v * sg;
                        }
                    }
                }
            }
        }
        hm
    }

    /// Ground state (energy, amplitudes over all `2^n_modes` configurations).
    pub fn ground_state(&self, hm: DMatrix<f64>) -> (f64, Vec<Complex64>) {
        let eig = SymmetricEigen::new(hm);
        let k = eig.eigenvalues.imin();
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << self.n_modes];
        let v = eig.eigenvectors.column(k);
        // Fix the sign so the largest component is positive.
        let big = v.iamax();
        let sign = if v[big] < 0.0 { -1.0 } else { 1.0 };
        for (i, &d) in self.dets.iter().enumerate() {
            amps[d] = Complex64::new(sign * v[i], 0.0);
        }
        (eig.eigenvalues[k], amps)
    }
}

/// Spin-orbital RDMs of the embedded ground state plus its energy.
#[derive(Clone, Debug)]
pub struct EmbeddedSolution {
    pub energy: f64,
    pub one: DMatrix<Complex64>,
    pub two: DMatrix<Complex64>,
}

/// Exact diagonalization of an embedded Hamiltonian in the `n_elec`, S_z = 0 sector.
pub fn solve_embedded(hemb: &EmbeddedHamiltonian, n_elec: usize) -> Result<EmbeddedSolution> {
    let sector = FockSector::new(hemb.n_orbitals(), n_elec)?;
    let hm = sector.hamiltonian(&hemb.h1, |p, q, r, s| hemb.eri(p, q, r, s));
    let (energy, amps) = sector.ground_state(hm);
    let (one, two) = rdms_general(&amps, sector.n_modes);
    Ok(EmbeddedSolution { energy, one, two })
}

/// Ground state of the bare problem over all orbitals (reference for tests and the toy CLI).
pub fn exact_ground_energy(ints: &IntegralSet, n_elec: usize) -> Result<f64> {
    let sector = FockSector::new(ints.n_orbitals(), n_elec)?;
    let hm = sector.hamiltonian(&ints.h, |p, q, r, s| ints.eri(p, q, r, s));
    Ok(sector.ground_state(hm).0 + ints.e_nuc)
}

/// Fragment energy from spin-orbital RDMs in the embedding basis `emb`
/// (fragment orbitals are the first `fragment.len()` ... given explicitly):
/// `E^A = Σ_{p∈A} [Σ_q (h_pq + ½ V_pq) D_qp + ½ Σ_qrs (pq|rs) P_qp|sr]`.
pub fn fragment_energy_from_rdms(
    ints: &IntegralSet,
    d_env: &DMatrix<f64>,
    one: &DMatrix<Complex64>,
    two: &DMatrix<Complex64>,
    emb: &DMatrix<f64>,
    fragment: &[usize],
) -> Result<f64> {
    let m = emb.ncols();
    let n = 2 * m;
    if one.nrows() != n || two.nrows() != n * n {
        return Err(Error::Dimension(format!(
            "RDMs of size {} / {} for {m} embedding orbitals",
            one.nrows(),
            two.nrows()
        )));
    }
    let v = environment_potential(ints, d_env);
    let h_eff = emb.transpose() * (&ints.h + v * 0.5) * emb;
    let (_, g) = ints.transform(emb);
    let eri = |p: usize, q: usize, r: usize, s: usize| g[((p * m + q) * m + r) * m + s];
    let mut e = 0.0;
    for &p in fragment {
        for sp in 0..2 {
            let pp = 2 * p + sp;
            for q in 0..m {
                e += h_eff[(p, q)] * one[(2 * q + sp, pp)].re;
            }
            for q in 0..m {
                for r in 0..m {
                    for s in 0..m {
                        let v = eri(p, q, r, s);
                        if v == 0.0 {
                            continue;
                        }
                        for sr in 0..2 {
                            // P_qp|sr = ⟨a†_p a†_r a_s a_q⟩, q shares p's spin, s shares r's.
                            let (qq, rr, ss) = (2 * q + sp, 2 * r + sr, 2 * s + sr);
                            e += 0.5 * v * two[(n * pp + rr, n * qq + ss)].re;
                        }
                    }
                }
            }
        }
    }
    Ok(e)
}

/// `N^A = Σ_{p∈A,σ} D_pσ,pσ` for spatial fragment orbitals.
pub fn fragment_electrons(one: &DMatrix<Complex64>, fragment: &[usize]) -> f64 {
    fragment
        .iter()
        .map(|&p| one[(2 * p, 2 * p)].re + one[(2 * p + 1, 2 * p + 1)].re)
        .sum()
}

/// `E^DMET = Σ_A E^A + E_nuc`.
pub fn dmet_total_energy(fragment_energies: &[f64], e_nuc: f64) -> f64 {
    fragment_energies.iter().sum::<f64>() + e_nuc
}

/// Controls for the electron-count loop.
#[derive(Clone, Debug, PartialEq)]
pub struct DmetConfig {
    pub n_total: f64,
    /// Step `a > 0` of the fixed-point update.
    pub step: f64,
    pub tolerance: f64,
    pub max_iter: usize,
    pub n_fragments: usize,
    /// Switch to secant steps once the fixed-point iteration oscillates.
    pub secant_fallback: bool,
}

impl DmetConfig {
    pub fn new(n_total: f64, n_fragments: usize) -> Self {
        DmetConfig {
            n_total,
            step: 1.0,
            tolerance: 1e-5,
            max_iter: 100,
            n_fragments,
            secant_fallback: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        // written so that NaN controls are rejected too
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(self.step) || !positive(self.tolerance) || self.max_iter == 0 || self.n_fragments == 0 {
            return Err(Error::Config(format!("invalid loop controls {self:?}")));
        }
        Ok(())
    }
}

/// One evaluation of every fragment at a given δμ.
#[derive(Clone, Debug, PartialEq)]
pub struct FragmentSweep {
    pub electrons: Vec<f64>,
    pub energies: Vec<f64>,
}

impl FragmentSweep {
    pub fn n_fragment(&self) -> f64 {
        self.electrons.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopStep {
    pub delta_mu: f64,
    pub n_fragment: f64,
    pub residual: f64,
    pub secant: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopResult {
    pub delta_mu: f64,
    pub sweep: FragmentSweep,
    pub trace: Vec<LoopStep>,
    /// δμ updates performed (0 when the start already matches).
    pub iterations: usize,
    pub secant_engaged: bool,
}

impl fmt::Display for LoopResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "iter delta_mu n_fragment residual step")?;
        for (k, s) in self.trace.iter().enumerate() {
            writeln!(
                f,
                "{k} {:.10} {:.10} {:.3e} {}",
                s.delta_mu,
                s.n_fragment,
                s.residual,
                if s.secant { "secant" } else { "fixed-point" }
            )?;
        }
        Ok(())
    }
}

/// Drives `N^Fragment(δμ)` to `N^Total`.
///
/// The fixed-point step is `δμ ← δμ − a (N^Fragment − N^Total)`: the embedding
/// Hamiltonian carries `−δμ N̂_A`, so raising δμ fills the fragment and an
/// excess of electrons must lower it. When the residual changes sign without
/// shrinking, the iteration is oscillating and (if enabled) secant steps
/// inside the bracketing pair take over.
pub fn chemical_potential_loop<F>(mut solver: F, delta_mu0: f64, cfg: &DmetConfig) -> Result<LoopResult>
where
    F: FnMut(f64) -> Result<FragmentSweep>,
{
    cfg.validate()?;
    let mut mu = delta_mu0;
    let mut sweep = solver(mu)?;
    let mut resid = sweep.n_fragment() - cfg.n_total;
    let mut trace = vec![LoopStep {
        delta_mu: mu,
        n_fragment: sweep.n_fragment(),
        residual: resid,
        secant: false,
    }];
    let mut secant = false;
    let mut iterations = 0;
    while resid.abs() >= cfg.tolerance {
        if iterations >= cfg.max_iter {
            return Err(Error::ChemicalPotential {
                residuals: trace.iter().map(|s| s.residual).collect(),
            });
        }
        if cfg.secant_fallback && !secant && trace.len() >= 2 {
            let prev = &trace[trace.len() - 2];
            if prev.residual.signum() != resid.signum() && resid.abs() >= 0.5 * prev.residual.abs() {
                secant = true;
            }
        }
        let next = if secant {
            // Secant through the most recent bracketing pair (regula falsi).
            let other = trace
                .iter()
                .rev()
                .skip(1)
                .find(|s| s.residual.signum() != resid.signum())
                .unwrap_or(&trace[trace.len() - 2]);
            let denom = resid - other.residual;
            if denom.abs() < 1e-300 {
                mu - cfg.step * resid
            } else {
                let cand = mu - resid * (mu - other.delta_mu) / denom;
                // Illinois-style safeguard: stay strictly inside the bracket.
                let (lo, hi) = if mu < other.delta_mu { (mu, other.delta_mu) } else { (other.delta_mu, mu) };
                if cand > lo && cand < hi {
                    cand
                } else {
                    0.5 * (lo + hi)
                }
            }
        } else {
            mu - cfg.step * resid
        };
        mu = next;
        sweep = solver(mu)?;
        resid = sweep.n_fragment() - cfg.n_total;
        iterations += 1;
        trace.push(LoopStep {
            delta_mu: mu,
            n_fragment: sweep.n_fragment(),
            residual: resid,
            secant,
        });
    }
    Ok(LoopResult {
        delta_mu: mu,
        sweep,
        trace,
        iterations,
        secant_engaged: secant,
    })
}

/// A full DMET problem: integrals, mean-field reference and fragment list.
#[derive(Clone, Debug)]
pub struct DmetProblem {
    pub ints: IntegralSet,
    pub reference: MeanFieldReference,
    pub fragments: Vec<Vec<usize>>,
    pub n_electrons: usize,
    pub bath_threshold: f64,
}

/// Embedding data for one fragment, independent of δμ.
#[derive(Clone, Debug)]
pub struct FragmentEmbedding {
    pub fragment: Vec<usize>,
    pub bath: BathRotation,
    pub d_env: DMatrix<f64>,
    pub n_elec: usize,
}

impl DmetProblem {
    pub fn embeddings(&self) -> Result<Vec<FragmentEmbedding>> {
        let d = self.reference.density();
        self.fragments
            .iter()
            .map(|frag| {
                let bath = build_bath(&d, frag, self.bath_threshold)?;
                let emb = bath.embedding_orbitals();
                // Electrons in fragment + bath under the mean-field density (both spins).
                let n = 2.0 * (emb.transpose() * &d * &emb).trace();
                Ok(FragmentEmbedding {
                    fragment: frag.clone(),
                    d_env: bath.core_density(),
                    bath,
                    n_elec: n.round() as usize,
                })
            })
            .collect()
    }

    /// Solves every fragment at `delta_mu`.
    pub fn sweep(&self, embeddings: &[FragmentEmbedding], delta_mu: f64) -> Result<FragmentSweep> {
        let mut electrons = Vec::new();
        let mut energies = Vec::new();
        for fe in embeddings {
            let emb = fe.bath.embedding_orbitals();
            let nf = fe.bath.n_frag;
            let hemb = build_embedding_hamiltonian(&self.ints, &fe.d_env, &emb, nf, delta_mu)?;
            let sol = solve_embedded(&hemb, fe.n_elec)?;
            let local: Vec<usize> = (0..nf).collect();
            electrons.push(fragment_electrons(&sol.one, &local));
            energies.push(fragment_energy_from_rdms(
                &self.ints, &fe.d_env, &sol.one, &sol.two, &emb, &local,
            )?);
        }
        Ok(FragmentSweep { electrons, energies })
    }

    pub fn run(&self, cfg: &DmetConfig) -> Result<(LoopResult, f64)> {
        let embeddings = self.embeddings()?;
        let res = chemical_potential_loop(|mu| self.sweep(&embeddings, mu), 0.0, cfg)?;
        let e = dmet_total_energy(&res.sweep.energies, self.ints.e_nuc);
        Ok((res, e))
    }
}

/// Synthetic open chain of `l` sites: hopping `t`, next-nearest hopping `t2`
/// (breaks particle–hole symmetry), on-site `u` and nearest-neighbour `v`
/// density interactions.
pub fn chain_integrals(l: usize, t: f64, t2: f64, u: f64, v: f64, e_nuc: f64) -> Result<IntegralSet> {
    let mut h = DMatrix::zeros(l, l);
    for p in 0..l {
        if p + 1 < l {
            h[(p, p + 1)] = -t;
            h[(p + 1, p)] = -t;
        }
        if p + 2 < l {
            h[(p, p + 2)] = -t2;
            h[(p + 2, p)] = -t2;
        }
    }
    let mut g = vec![0.0; l.pow(4)];
    let idx = |p: usize, q: usize, r: usize, s: usize| ((p * l + q) * l + r) * l + s;
    for p in 0..l {
        g[idx(p, p, p, p)] = u;
        if p + 1 < l {
            g[idx(p, p, p + 1, p + 1)] = v;
            g[idx(p + 1, p + 1, p, p)] = v;
        }
    }
    IntegralSet::new(h, g, e_nuc)
}

/// The toy problem used by the CLI and tests: 4-site chain, half filling,
/// one site per fragment.
pub fn toy_problem() -> Result<DmetProblem> {
    let ints = chain_integrals(4, 1.0, 0.3, 2.0, 0.5, 0.0)?;
    let reference = MeanFieldReference::from_core_hamiltonian(&ints.h, 4)?;
    Ok(DmetProblem {
        ints,
        reference,
        fragments: (0..4).map(|p| vec![p]).collect(),
        n_electrons: 4,
        bath_threshold: 1e-13,
    })
}

/// Per-R two-qubit embedding problem: Hamiltonian, per-atom energy expression
/// and the fragment electron-number operator, all in qubit form.
#[derive(Clone, Debug, PartialEq)]
pub struct FragmentProblem {
    pub r: f64,
    pub n_qubits: usize,
    pub comment: String,
    pub hamiltonian: PauliSum,
    pub energy_expression: PauliSum,
    pub number_operator: PauliSum,
}

impl FragmentProblem {
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut r = None;
        let mut n = None;
        let mut comment = String::new();
        let mut sections: HashMap<String, String> = HashMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(name.to_string());
                sections.entry(name.to_string()).or_default();
                continue;
            }
            match &current {
                Some(sec) => {
                    let buf = sections.get_mut(sec).expect("section exists");
                    buf.push_str(raw);
                    buf.push('\n');
                }
                None => {
                    let body = line.split('#').next().unwrap_or("").trim();
                    if body.is_empty() {
                        continue;
                    }
                    let (key, val) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
                    let bad = |m: String| Error::Parse { line: i + 1, msg: m };
                    match key {
                        "R" => r = Some(val.trim().parse::<f64>().map_err(|_| bad(format!("bad R {val:?}")))?),
                        "QUBITS" => {
                            n = Some(val.trim().parse::<usize>().map_err(|_| bad(format!("bad QUBITS {val:?}")))?)
                        }
                        "COMMENT" => comment = val.trim().to_string(),
                        other => return Err(bad(format!("unknown header key {other:?}"))),
                    }
                }
            }
        }
        let missing = |what: &str| Error::Parse {
            line: 0,
            msg: format!("missing {what}"),
        };
        let n_qubits = n.ok_or_else(|| missing("QUBITS"))?;
        let section = |name: &str| -> Result<PauliSum> {
            let body = sections.get(name).ok_or_else(|| missing(&format!("[{name}] section")))?;
            let s = PauliSum::parse_text(body)?;
            if s.n_qubits() != n_qubits {
                return Err(Error::LengthMismatch {
                    left: s.n_qubits(),
                    right: n_qubits,
                });
            }
            Ok(s)
        };
        Ok(FragmentProblem {
            r: r.ok_or_else(|| missing("R"))?,
            n_qubits,
            comment,
            hamiltonian: section("hamiltonian")?,
            energy_expression: section("energy")?,
            number_operator: section("number")?,
        })
    }

    pub fn to_text(&self) -> String {
        format!(
            "R {}\nQUBITS {}\nCOMMENT {}\n\n[hamiltonian]\n{}\n[energy]\n{}\n[number]\n{}",
            self.r,
            self.n_qubits,
            self.comment,
            self.hamiltonian.to_text(),
            self.energy_expression.to_text(),
            self.number_operator.to_text()
        )
    }
}

/// Per-atom energy from measured (or exact) Pauli expectations.
pub fn fragment_energy_from_expression(
    fp: &FragmentProblem,
    expectations: &std::collections::BTreeMap<String, f64>,
) -> Result<f64> {
    fp.energy_expression.evaluate_on(expectations)
}

/// Dense matrix of a qubit operator (index bit q = qubit q).
pub fn dense_matrix(op: &PauliSum) -> DMatrix<Complex64> {
    let dim = 1usize << op.n_qubits();
    let mut m = DMatrix::from_diagonal_element(dim, dim, Complex64::new(op.constant(), 0.0));
    for (p, coeff) in op.terms() {
        for k in 0..dim {
            let (amp, k2) = p.apply_basis(k);
            m[(k2, k)] += amp * coeff;
        }
    }
    m
}

/// Lowest eigenpair of a qubit Hamiltonian by dense diagonalization.
pub fn qubit_ground_state(op: &PauliSum) -> Result<(f64, StateVector)> {
    let eig = SymmetricEigen::new(dense_matrix(op));
    let k = eig.eigenvalues.imin();
    let v: Vec<Complex64> = eig.eigenvectors.column(k).iter().copied().collect();
    Ok((eig.eigenvalues[k], StateVector::normalized(v)?))
}

/// Electron-count loop for a qubit-form fragment problem: `H − δμ N̂_A` is
/// solved exactly and the fragment count is scaled by `n_fragments`
/// (all fragments equivalent by symmetry).
pub fn qubit_fragment_sweep(fp: &FragmentProblem, n_fragments: usize, delta_mu: f64) -> Result<FragmentSweep> {
    let mut h = fp.hamiltonian.clone();
    for (p, c) in fp.number_operator.terms() {
        h.add_term(p.clone(), -delta_mu * c)?;
    }
    h.set_constant(h.constant() - delta_mu * fp.number_operator.constant());
    let (_, psi) = qubit_ground_state(&h)?;
    let n_a = fp.number_operator.expectation(&psi)?;
    let mut exps = std::collections::BTreeMap::new();
    for (p, _) in fp.energy_expression.terms() {
        let v = p.expectation_complex(&psi)?.re;
        exps.insert(p.to_string(), v);
    }
    let e = fragment_energy_from_expression(fp, &exps)?;
    Ok(FragmentSweep {
        electrons: vec![n_a; n_fragments],
        energies: vec![e; n_fragments],
    })
}
