use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;

use pnqd::homodyne::{read_dataset, uniform_phases, write_dataset};
use pnqd::processes::OutputState;
use pnqd::quasiprob::DEFAULT_SIGNIFICANCE;
use pnqd::{
    nqd_direct, parseval_output_nqd, predict_output_nqd, run_recipe, sample_nqd, sample_nqd_eta_removed,
    sample_pnqd, simulate_dataset, Error, Experiment, FilterSpec, GridLayout, InputPSpec, PnqdTable, ProcessModel,
    QuasiprobGrid, RecipeConfig, Result, StateModel,
};

/// Filtered quasiprobabilities for nonclassicality tests of states and processes.
#[derive(Parser)]
#[command(name = "pnqd", version)]
struct Cli {
    /// RNG seed; commands that draw no random numbers ignore it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FilterArgs {
    /// Filter width w.
    #[arg(long)]
    width: f64,
    /// Truncation tolerance of the filter tail.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

impl FilterArgs {
    fn build(&self) -> Result<FilterSpec> {
        FilterSpec::build(self.width, self.tol)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the filter profile.
    Filter {
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate homodyne data for a state or a process output.
    Simulate {
        /// State descriptor, e.g. `fock:n=1`.
        #[arg(long, conflicts_with = "process", required_unless_present = "process")]
        state: Option<String>,
        /// Process probed with the coherent state `--alpha`.
        #[arg(long, requires = "alpha")]
        process: Option<String>,
        /// Probe amplitude `re` or `re,im`.
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Total number of samples, split evenly over the phases.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10)]
        phases: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Direct quasiprobability of a state, or of a process output for that input.
    Nqd {
        #[arg(long)]
        state: String,
        /// Apply this process to the state through its characteristic function.
        #[arg(long)]
        process: Option<String>,
        #[command(flatten)]
        filter: FilterArgs,
        /// Grid, e.g. `square:half=3,n=61` or `radial:r_max=3,n=31`.
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Direct PNQD table of a process at real probe amplitudes.
    Pnqd {
        #[arg(long)]
        process: String,
        /// Comma-separated amplitudes.
        #[arg(long, value_delimiter = ',', required = true)]
        alpha: Vec<f64>,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        grid: String,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "pnqd")]
        stem: String,
    },
    /// Estimate quasiprobabilities from homodyne data.
    Sample {
        /// Dataset files; several files with probe tags form a PNQD table.
        #[arg(long, required = true)]
        data: Vec<PathBuf>,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        grid: String,
        /// Use the phase-averaged pattern function (radial grids).
        #[arg(long)]
        phase_randomized: bool,
        /// Undo detector loss with the efficiency identity.
        #[arg(long)]
        remove_eta: bool,
        /// Output grid for a single dataset.
        #[arg(long, conflicts_with = "table", required_unless_present = "table")]
        out: Option<PathBuf>,
        /// Output directory for a PNQD table.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, default_value = "sampled")]
        stem: String,
    },
    /// Predict the output for a classical input from a PNQD table.
    Predict {
        /// Index file of the table.
        #[arg(long)]
        pnqd: PathBuf,
        /// Input, e.g. `thermal:nbar=0.5`, `coherent:re=0.5` or `mixture:re,im,p;...`.
        #[arg(long)]
        input: String,
        /// Process whose heralding weight enters the prediction.
        #[arg(long, default_value = "add")]
        process: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a named experiment recipe.
    Recipe {
        /// fig1, fig2, fig3, fig4, fig5 or custom.
        #[arg(long)]
        name: Option<String>,
        /// TOML file overriding preset fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn write_grid(path: &Path, grid: &QuasiprobGrid) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    grid.write_csv(&mut out)?;
    out.flush()?;
    report(grid)
}

fn report(grid: &QuasiprobGrid) -> Result<()> {
    let scan = grid.negativity_scan(DEFAULT_SIGNIFICANCE)?;
    let verdict = if scan.nonclassical { "nonclassical" } else { "no certified negativity" };
    let sig = scan.significance.map(|s| format!(" ({s:.2} sigma)")).unwrap_or_default();
    println!(
        "{}: min {:.6e} at ({}, {}){sig}: {verdict}",
        grid.source, scan.min_value, scan.argmin.re, scan.argmin.im
    );
    Ok(())
}

fn parse_alpha(s: &str) -> Result<C64> {
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| Error::Parameter(format!("bad amplitude `{s}`")));
    Ok(match s.split_once(',') {
        Some((re, im)) => C64::new(num(re)?, num(im)?),
        None => C64::new(num(s)?, 0.0),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Filter { filter, out } => {
            let f = filter.build()?;
            let mut w = BufWriter::new(File::create(&out)?);
            f.write_csv(&mut w)?;
            w.flush()?;
            println!("w={} b_max={:.4}", f.width(), f.b_max());
        }
        Command::Simulate { state, process, alpha, eta, n, phases, out } => {
            if phases == 0 || !n.is_multiple_of(phases) {
                return Err(Error::Parameter(format!("{n} samples do not split evenly over {phases} phases")));
            }
            let (s, tag) = match (state, process) {
                (Some(s), _) => (s.parse::<StateModel>()?, None),
                (None, Some(p)) => {
                    let p: ProcessModel = p.parse()?;
                    let a = parse_alpha(alpha.as_deref().unwrap_or("0"))?;
                    match p.apply_to_coherent(a)?.state {
                        OutputState::State(s) => (s, Some(a)),
                        other => return Err(Error::Capability(format!("no quadrature model for {other}"))),
                    }
                }
                (None, None) => unreachable!("clap requires one of them"),
            };
            let mut d = simulate_dataset(&s, &uniform_phases(phases), n / phases, eta, cli.seed.unwrap_or(0))?;
            if let Some(a) = tag {
                d = d.with_alpha(a);
            }
            write_dataset(&d, &out)?;
            println!("{} samples of {s}", d.len());
        }
        Command::Nqd { state, process, filter, grid, out } => {
            let s: StateModel = state.parse()?;
            let layout: GridLayout = grid.parse()?;
            let f = filter.build()?;
            let g = match process {
                Some(p) => parseval_output_nqd(&p.parse()?, &s, &f, &layout)?,
                None => nqd_direct(&s, &f, &layout)?,
            };
            write_grid(&out, &g)?;
        }
        Command::Pnqd { process, alpha, filter, grid, out_dir, stem } => {
            let p: ProcessModel = process.parse()?;
            let layout: GridLayout = grid.parse()?;
            let table = PnqdTable::direct(&p, &alpha, &filter.build()?, &layout)?;
            std::fs::create_dir_all(&out_dir)?;
            let index = table.write(&out_dir, &stem)?;
            for g in &table.grids {
                report(g)?;
            }
            println!("index {}", index.display());
        }
        Command::Sample { data, filter, grid, phase_randomized, remove_eta, out, table, stem } => {
            let layout: GridLayout = grid.parse()?;
            if phase_randomized != matches!(layout, GridLayout::Radial { .. }) {
                return Err(Error::Parameter("--phase-randomized goes with a radial grid, and only with one".into()));
            }
            let f = filter.build()?;
            let sets = data.iter().map(read_dataset).collect::<Result<Vec<_>>>()?;
            match (out, table) {
                (Some(out), _) => {
                    if sets.len() != 1 {
                        return Err(Error::Parameter("--out takes one dataset; use --table for several".into()));
                    }
                    let g = if remove_eta {
                        sample_nqd_eta_removed(&sets[0], &layout, &f)?
                    } else {
                        sample_nqd(&sets[0], &layout, &f)?
                    };
                    write_grid(&out, &g)?;
                }
                (None, Some(dir)) => {
                    if !remove_eta && sets.iter().any(|d| d.meta.eta != 1.0) {
                        return Err(Error::Parameter("tables of lossy data need --remove-eta".into()));
                    }
                    let t = sample_pnqd(&sets, &layout, &f, phase_randomized)?;
                    std::fs::create_dir_all(&dir)?;
                    let index = t.write(&dir, &stem)?;
                    for g in &t.grids {
                        report(g)?;
                    }
                    println!("index {}", index.display());
                }
                (None, None) => unreachable!("clap requires one of them"),
            }
        }
        Command::Predict { pnqd, input, process, out } => {
            let table = PnqdTable::read(&pnqd)?;
            let input: InputPSpec = input.parse()?;
            let p: ProcessModel = process.parse()?;
            let g = predict_output_nqd(&table, &input, &|a| p.weight(a))?;
            write_grid(&out, &g)?;
        }
        Command::Recipe { name, config, out_dir } => {
            let name = name.map(|n| n.parse::<Experiment>()).transpose()?;
            let mut c = match config {
                Some(path) => RecipeConfig::from_toml(&std::fs::read_to_string(path)?, name)?,
                None => RecipeConfig::preset(
                    name.ok_or_else(|| Error::Parameter("recipe needs --name or --config".into()))?,
                ),
            };
            if let Some(dir) = out_dir {
                c.out_dir = dir;
            }
            if let Some(seed) = cli.seed {
                c.seed = seed;
            }
            let m = run_recipe(&c)?;
            for v in m.verdicts() {
                let sig = v.significance.map(|s| format!(" ({s:.2} sigma)")).unwrap_or_default();
                let verdict = if v.nonclassical { "nonclassical" } else { "no certified negativity" };
                println!("{}: min {:.6e}{sig}: {verdict}", v.label, v.min_value);
            }
            println!("manifest {}", c.out_dir.join("manifest.json").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
