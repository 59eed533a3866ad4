//! Checksummed reference data: per-R energies, Hamiltonian coefficients,
//! optimal ansatz parameters, entropies, fragment problems and circuits.
//!
//! Files are read at run time from `$ION_DMET_DATA`, falling back to the
//! `data/` directory shipped with the crate. Every file listed in
//! `MANIFEST.sha256` is verified before use.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::dmet::FragmentProblem;
use crate::error::{Error, Result};
use crate::pauli::PauliSum;
use crate::qcc::{AnsatzSpec, MeanFieldParams};
use crate::sim::{parse_circuit, AnyCircuit};

pub const DATA_ENV: &str = "ION_DMET_DATA";
pub const BASES: [&str; 4] = ["ZZ", "XZ", "XX", "YY"];

pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("data"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Checks every `hash  path` line of the manifest; returns the number of files verified.
pub fn verify_manifest(dir: &Path) -> Result<usize> {
    let manifest = fs::read_to_string(dir.join("MANIFEST.sha256"))?;
    let mut n = 0;
    for (i, line) in manifest.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (expected, rel) = line.split_once(char::is_whitespace).ok_or(Error::Parse {
            line: i + 1,
            msg: format!("bad manifest line {line:?}"),
        })?;
        let rel = rel.trim();
        let found = sha256_hex(&fs::read(dir.join(rel))?);
        if found != expected {
            return Err(Error::Checksum {
                file: rel.to_string(),
                expected: expected.to_string(),
                found,
            });
        }
        n += 1;
    }
    Ok(n)
}

/// The five-letter R key used in file names, e.g. `1.1`.
pub fn r_key(r: f64) -> String {
    format!("{r:.1}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyReference {
    pub mo_theory: f64,
    pub mo_hardware: f64,
    pub fragment_bath_theory: f64,
    pub fragment_bath_hardware: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferencePoint {
    pub r: f64,
    /// Per-atom energies (hartree).
    pub hf: f64,
    pub fci: f64,
    pub theory: f64,
    pub hardware: f64,
    pub hardware_sigma: f64,
    pub purified: f64,
    pub purified_sigma: f64,
    /// `a..f` of `a + b XX + c ZZ + d(X0+X1) + e(Z0+Z1) + f(XZ+ZX)`.
    pub coeffs: [f64; 6],
    pub theta: [f64; 2],
    pub phi: [f64; 2],
    pub tau: f64,
    pub gradient: f64,
    pub e_qcc: f64,
    pub entropy: Option<EntropyReference>,
    pub yy_angle: f64,
}

impl ReferencePoint {
    pub fn hamiltonian(&self) -> PauliSum {
        let [a, b, c, d, e, f] = self.coeffs;
        let mut h = PauliSum::new(2).expect("two qubits");
        h.set_constant(a);
        for (l, v) in [
            ("XX", b),
            ("ZZ", c),
            ("XI", d),
            ("IX", d),
            ("ZI", e),
            ("IZ", e),
            ("XZ", f),
            ("ZX", f),
        ] {
            h.add(l, v).expect("valid letters");
        }
        h
    }

    /// Optimal ansatz: Bloch angles plus the single `XY` generator.
    pub fn ansatz(&self) -> AnsatzSpec {
        let mf = MeanFieldParams::new(self.theta.to_vec(), self.phi.to_vec()).expect("finite angles");
        AnsatzSpec::new(mf, vec!["XY".parse().expect("valid letters")], vec![self.tau]).expect("two qubits")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceData {
    pub dir: PathBuf,
    pub points: Vec<ReferencePoint>,
    /// Row-major 2×2 fragment/bath rotation.
    pub mo_coefficients: [f64; 4],
    pub chemical_accuracy: f64,
    pub atoms: usize,
}

fn parse_value(tok: &str, line: usize) -> Result<f64> {
    if tok == "pi" {
        return Ok(PI);
    }
    tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("bad number {tok:?}"),
    })
}

/// Rows of a section, each with its 1-based line number.
type Rows = Vec<(usize, Vec<String>)>;

/// Splits `[section]` blocks into rows of numbers (comments dropped).
fn sections(text: &str) -> Result<HashMap<String, Rows>> {
    let mut out: HashMap<String, Rows> = HashMap::new();
    let mut current = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            out.entry(name.to_string()).or_default();
            current = Some(name.to_string());
            continue;
        }
        let Some(sec) = &current else {
            return Err(Error::Parse {
                line: i + 1,
                msg: "data before first section".into(),
            });
        };
        out.get_mut(sec)
            .expect("section exists")
            .push((i + 1, line.split_whitespace().map(str::to_string).collect()));
    }
    Ok(out)
}

fn numeric_rows(
    secs: &HashMap<String, Rows>,
    name: &str,
    width: usize,
) -> Result<Vec<Vec<f64>>> {
    let rows = secs.get(name).ok_or(Error::Parse {
        line: 0,
        msg: format!("missing [{name}] section"),
    })?;
    rows.iter()
        .map(|(line, toks)| {
            if toks.len() != width {
                return Err(Error::Parse {
                    line: *line,
                    msg: format!("[{name}] expects {width} columns, got {}", toks.len()),
                });
            }
            toks.iter().map(|t| parse_value(t, *line)).collect()
        })
        .collect()
}

impl ReferenceData {
    pub fn load_default() -> Result<Self> {
        Self::load(&data_dir())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        verify_manifest(dir)?;
        let text = fs::read_to_string(dir.join("reference.txt"))?;
        Self::parse(&text, dir)
    }

    pub fn parse(text: &str, dir: &Path) -> Result<Self> {
        let secs = sections(text)?;
        let by_r = |rows: Vec<Vec<f64>>| -> HashMap<String, Vec<f64>> {
            rows.into_iter().map(|row| (r_key(row[0]), row)).collect()
        };
        let energies = numeric_rows(&secs, "energies", 8)?;
        let ham = by_r(numeric_rows(&secs, "hamiltonian", 7)?);
        let qcc = by_r(numeric_rows(&secs, "qcc", 8)?);
        let ent = by_r(numeric_rows(&secs, "entropy", 5)?);
        let yy = by_r(numeric_rows(&secs, "yy_angle", 2)?);
        let mut points = Vec::new();
        for e in energies {
            let key = r_key(e[0]);
            let missing = || Error::UnknownBondLength(e[0]);
            let h = ham.get(&key).ok_or_else(missing)?;
            let q = qcc.get(&key).ok_or_else(missing)?;
            points.push(ReferencePoint {
                r: e[0],
                hf: e[1],
                fci: e[2],
                theory: e[3],
                hardware: e[4],
                hardware_sigma: e[5],
                purified: e[6],
                purified_sigma: e[7],
                coeffs: [h[1], h[2], h[3], h[4], h[5], h[6]],
                theta: [q[1], q[2]],
                phi: [q[3], q[4]],
                tau: q[5],
                gradient: q[6],
                e_qcc: q[7],
                entropy: ent.get(&key).map(|s| EntropyReference {
                    mo_theory: s[1],
                    mo_hardware: s[2],
                    fragment_bath_theory: s[3],
                    fragment_bath_hardware: s[4],
                }),
                yy_angle: yy.get(&key).ok_or_else(missing)?[1],
            });
        }
        let mo = numeric_rows(&secs, "mo_coefficients", 4)?;
        let mo = mo.first().ok_or(Error::Parse {
            line: 0,
            msg: "empty [mo_coefficients]".into(),
        })?;
        let mut consts = HashMap::new();
        for (line, toks) in secs.get("constants").map(Vec::as_slice).unwrap_or(&[]) {
            if toks.len() != 2 {
                return Err(Error::Parse {
                    line: *line,
                    msg: "constants are `name value` pairs".into(),
                });
            }
            consts.insert(toks[0].clone(), parse_value(&toks[1], *line)?);
        }
        let constant = |k: &str| {
            consts.get(k).copied().ok_or(Error::Parse {
                line: 0,
                msg: format!("missing constant {k}"),
            })
        };
        Ok(ReferenceData {
            dir: dir.to_path_buf(),
            points,
            mo_coefficients: [mo[0], mo[1], mo[2], mo[3]],
            chemical_accuracy: constant("chemical_accuracy")?,
            atoms: constant("atoms")? as usize,
        })
    }

    pub fn bond_lengths(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.r).collect()
    }

    pub fn point(&self, r: f64) -> Result<&ReferencePoint> {
        self.points
            .iter()
            .find(|p| (p.r - r).abs() < 1e-9)
            .ok_or(Error::UnknownBondLength(r))
    }

    pub fn fragment(&self, r: f64) -> Result<FragmentProblem> {
        self.point(r)?;
        let path = self.dir.join("fragments").join(format!("r{}.txt", r_key(r)));
        FragmentProblem::parse_text(&fs::read_to_string(path)?)
    }

    /// `stage` is `pre` (standard gates) or `post` (native gates); YY has no `post` file.
    pub fn circuit(&self, stage: &str, r: f64, basis: &str) -> Result<AnyCircuit> {
        self.point(r)?;
        let name = format!("{stage}_r{}_{}.txt", r_key(r), basis.to_ascii_lowercase());
        parse_circuit(&fs::read_to_string(self.dir.join("circuits").join(name))?)
    }
}
