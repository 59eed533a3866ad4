use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ion_dmet::pipeline::{
    cmd_compile, cmd_curve, cmd_dmet_toy, cmd_entropy, cmd_purify_sweep, cmd_vqe, curve_csv, sweep_files,
    write_atomic, RunConfig,
};
use ion_dmet::reference::{ReferenceData, BASES};
use ion_dmet::Result;

#[derive(Parser)]
#[command(name = "ion-dmet", version, about = "DMET-QCC hydrogen-ring pipeline with trapped-ion compilation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Bond length(s) in angstrom, comma separated (default: all five)
    #[arg(long = "r", global = true, value_delimiter = ',')]
    r: Vec<f64>,
    /// Shots per measurement basis
    #[arg(long, global = true, default_value_t = 5000)]
    shots: u64,
    #[arg(long, global = true, default_value_t = 2021)]
    seed: u64,
    /// Readout flip probabilities as p01,p10
    #[arg(long, global = true, value_parser = parse_noise)]
    noise: Option<(f64, f64)>,
    /// Bootstrap resamples
    #[arg(long, global = true, default_value_t = 500)]
    resamples: usize,
    /// Exact distributions instead of sampling
    #[arg(long, global = true)]
    exact: bool,
    /// Purification stop threshold
    #[arg(long, global = true, default_value_t = 1e-2)]
    eps: f64,
    /// Directory for CSV and text artifacts
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Mean field, generator screening and VQE on the embedding Hamiltonian
    Vqe,
    /// Full pipeline and potential-energy-curve CSV
    Curve,
    /// Entanglement entropies of the optimal ansatz state
    Entropy {
        /// Override the generator amplitude
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Compile measurement circuits to the native gate set
    Compile {
        /// ZZ, XZ, XX or YY (default: all four)
        #[arg(long)]
        basis: Option<String>,
    },
    /// Chemical-potential loop on the synthetic chain
    DmetToy {
        /// Fixed-point step a
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        #[arg(long, default_value_t = 1e-8)]
        tolerance: f64,
    },
    /// Purification sweeps over <YY> and the (<XZ>+<ZX>, <X0>+<X1>) plane
    PurifySweep,
}

fn parse_noise(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected p01,p10")?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

fn emit(out: &Option<PathBuf>, name: &str, text: &str) -> Result<()> {
    print!("{text}");
    if let Some(dir) = out {
        let path = write_atomic(dir, name, text)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let c = cli.common;
    let rd = ReferenceData::load_default()?;
    let rs = if c.r.is_empty() { rd.bond_lengths() } else { c.r.clone() };
    match cli.command {
        Command::Vqe => {
            for &r in &rs {
                let rep = cmd_vqe(&rd, r, c.seed)?;
                emit(&c.out, &format!("vqe_r{r:.1}.txt"), &rep.to_text())?;
            }
        }
        Command::Curve => {
            let cfg = RunConfig {
                rs,
                shots: c.shots,
                seed: c.seed,
                noise: c.noise,
                resamples: c.resamples,
                exact: c.exact,
                eps: c.eps,
                out: c.out.clone(),
            };
            let rows = cmd_curve(&rd, &cfg)?;
            emit(&c.out, "curve.csv", &curve_csv(&rows))?;
        }
        Command::Entropy { tau } => {
            for &r in &rs {
                let rep = cmd_entropy(&rd, r, tau)?;
                emit(&c.out, &format!("entropy_r{r:.1}.txt"), &rep.to_text())?;
            }
        }
        Command::Compile { basis } => {
            let bases: Vec<String> = match basis {
                Some(b) => vec![b],
                None => BASES.iter().map(|s| s.to_string()).collect(),
            };
            for &r in &rs {
                for b in &bases {
                    let o = cmd_compile(&rd, r, b)?;
                    emit(&c.out, &format!("compile_r{r:.1}_{}.txt", b.to_ascii_lowercase()), &o.to_text())?;
                }
            }
        }
        Command::DmetToy { step, tolerance } => {
            let rep = cmd_dmet_toy(step, tolerance)?;
            emit(&c.out, "dmet_toy.txt", &rep.to_text())?;
        }
        Command::PurifySweep => {
            for &r in &rs {
                let s = cmd_purify_sweep(&rd, r, c.eps)?;
                println!("R = {r:.1}: purified energy within chemical accuracy for <YY> in {}", s.window);
                if let Some(dir) = &c.out {
                    for (name, text) in sweep_files(&s) {
                        let path = write_atomic(dir, &name, &text)?;
                        eprintln!("wrote {}", path.display());
                    }
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
