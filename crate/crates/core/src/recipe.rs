//! Reproducible experiment recipes writing plot-ready CSV and a JSON manifest.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::estimator::{sample_nqd_eta_removed, sample_pnqd, PnqdTable, MIN_PHASES};
use crate::filters::FilterSpec;
use crate::homodyne::{simulate_dataset, substream_seed, uniform_phases, QuadratureDataset};
use crate::predictor::{parseval_output_nqd, predict_output_nqd, InputPSpec};
use crate::processes::{fixed_point_check, OutputState, ProcessModel};
use crate::quasiprob::{nqd_direct, GridLayout, QuasiprobGrid, DEFAULT_SIGNIFICANCE};
use crate::states::StateModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// Photon subtraction on a squeezed vacuum, direct.
    Fig1,
    /// Kerr cat generation, direct, with the thermal fixed-point check.
    Fig2,
    /// Sampled photon-addition PNQD at a few amplitudes.
    Fig3,
    /// Sampled photon-addition PNQD at the origin against amplitude.
    Fig4,
    /// Fig4 table used to predict the output for a thermal input.
    Fig5,
    Custom,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
            Experiment::Fig5 => "fig5",
            Experiment::Custom => "custom",
        };
        f.write_str(name)
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Experiment> {
        Ok(match s {
            "fig1" => Experiment::Fig1,
            "fig2" => Experiment::Fig2,
            "fig3" => Experiment::Fig3,
            "fig4" => Experiment::Fig4,
            "fig5" => Experiment::Fig5,
            "custom" => Experiment::Custom,
            _ => return Err(Error::param(format!("unknown experiment `{s}`"))),
        })
    }
}

/// All parameters of a recipe run. Presets fill every field; a TOML file
/// overrides any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeConfig {
    pub experiment: Experiment,
    /// Filter width.
    pub width: f64,
    /// Filter truncation tolerance.
    pub tol: f64,
    /// Grid descriptor, e.g. `radial:r_max=3,n=31`.
    pub grid: String,
    /// Samples per simulated dataset, split evenly over the phases; 0 skips sampling.
    pub samples: usize,
    pub phases: usize,
    pub seed: u64,
    /// Probe amplitudes (real, nonnegative).
    pub amplitudes: Vec<f64>,
    /// Thermal input occupation for fig2 and fig5.
    pub nbar: f64,
    pub eta: f64,
    /// State descriptor (fig1, custom).
    pub state: String,
    /// Process descriptor (fig2 to fig5, custom).
    pub process: String,
    pub out_dir: PathBuf,
    /// Also write the simulated quadrature datasets.
    pub write_data: bool,
}

/// 13 equally spaced amplitudes on `[0, 1.6]`.
pub fn default_amplitudes() -> Vec<f64> {
    (0..13).map(|i| 1.6 * i as f64 / 12.0).collect()
}

impl RecipeConfig {
    pub fn preset(experiment: Experiment) -> RecipeConfig {
        let base = RecipeConfig {
            experiment,
            width: 1.2,
            tol: 1e-8,
            grid: "radial:r_max=3,n=31".into(),
            samples: 266_000,
            phases: 10,
            seed: 1,
            amplitudes: default_amplitudes(),
            nbar: 0.5,
            eta: 1.0,
            state: String::new(),
            process: "add".into(),
            out_dir: PathBuf::from(format!("out/{experiment}")),
            write_data: false,
        };
        match experiment {
            Experiment::Fig1 => RecipeConfig {
                width: 1.5,
                grid: "square:half=3,n=61".into(),
                samples: 0,
                amplitudes: vec![],
                state: "subtracted(squeezed:vx=0.5,vp=3)".into(),
                process: String::new(),
                ..base
            },
            Experiment::Fig2 => RecipeConfig {
                width: 1.5,
                grid: "square:half=3.5,n=71".into(),
                samples: 0,
                amplitudes: vec![2.0],
                nbar: 1.0,
                process: "kerrcat".into(),
                ..base
            },
            Experiment::Fig3 => RecipeConfig { amplitudes: vec![0.0, 0.46, 1.12], ..base },
            Experiment::Fig4 | Experiment::Fig5 => base,
            Experiment::Custom => RecipeConfig {
                grid: "square:half=3,n=41".into(),
                samples: 0,
                amplitudes: vec![],
                state: "vacuum".into(),
                process: String::new(),
                ..base
            },
        }
    }

    /// Preset for the file's `experiment` (or `fallback`) with the file's
    /// fields on top.
    pub fn from_toml(text: &str, fallback: Option<Experiment>) -> Result<RecipeConfig> {
        let table: toml::Table = text.parse().map_err(|e| Error::Format(format!("recipe config: {e}")))?;
        let experiment = match table.get("experiment") {
            Some(v) => v
                .as_str()
                .ok_or_else(|| Error::param("`experiment` must be a string"))?
                .parse()?,
            None => fallback.ok_or_else(|| Error::param("recipe config names no experiment"))?,
        };
        let preset = toml::Table::try_from(RecipeConfig::preset(experiment))
            .map_err(|e| Error::Format(format!("recipe config: {e}")))?;
        let mut merged = preset;
        for (k, v) in table {
            merged.insert(k, v);
        }
        let mut config: RecipeConfig =
            merged.try_into().map_err(|e| Error::param(format!("recipe config: {e}")))?;
        config.experiment = experiment;
        Ok(config)
    }

    fn n_per_phase(&self) -> Result<usize> {
        if self.phases == 0 {
            return Err(Error::param("need at least one phase"));
        }
        if !self.samples.is_multiple_of(self.phases) {
            return Err(Error::param(format!(
                "{} samples do not split evenly over {} phases",
                self.samples, self.phases
            )));
        }
        Ok(self.samples / self.phases)
    }

    /// Checks every parameter and parses the descriptors.
    pub fn validate(&self) -> Result<Checked> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::param(format!("filter width must be positive, got {}", self.width)));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-3) {
            return Err(Error::param(format!("tolerance must lie in (0, 1e-3], got {}", self.tol)));
        }
        let layout: GridLayout = self.grid.parse()?;
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::param(format!("efficiency must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.nbar >= 0.0 && self.nbar.is_finite()) {
            return Err(Error::param(format!("nbar must be >= 0, got {}", self.nbar)));
        }
        for (i, a) in self.amplitudes.iter().enumerate() {
            if !(*a >= 0.0 && a.is_finite()) {
                return Err(Error::param(format!("amplitudes must be finite and >= 0, got {a}")));
            }
            if self.amplitudes[..i].contains(a) {
                return Err(Error::param(format!("amplitude {a} listed twice")));
            }
        }
        let sampling = self.samples > 0;
        if sampling {
            self.n_per_phase()?;
            if matches!(layout, GridLayout::Square { .. }) && self.phases < MIN_PHASES {
                return Err(Error::param(format!("square grids need at least {MIN_PHASES} phases")));
            }
        }
        let state = if self.state.is_empty() { None } else { Some(self.state.parse::<StateModel>()?) };
        if let Some(s) = &state {
            s.char_fn()?;
        }
        let process = if self.process.is_empty() { None } else { Some(self.process.parse::<ProcessModel>()?) };
        if let Some(p) = &process {
            p.validate()?;
        }
        let need = |ok: bool, what: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::param(format!("{} recipe needs {what}", self.experiment)))
            }
        };
        match self.experiment {
            Experiment::Fig1 => need(state.is_some(), "a state")?,
            Experiment::Fig2 => need(process.is_some() && !self.amplitudes.is_empty(), "a process and amplitudes")?,
            Experiment::Fig3 | Experiment::Fig4 => {
                need(process.is_some() && !self.amplitudes.is_empty() && sampling, "a process, amplitudes and samples")?
            }
            Experiment::Fig5 => {
                need(process.is_some() && !self.amplitudes.is_empty() && sampling, "a process, amplitudes and samples")?;
                need(matches!(layout, GridLayout::Radial { .. }), "a radial grid")?;
            }
            Experiment::Custom => need(
                process.is_some() != state.is_some() && (process.is_none() || !self.amplitudes.is_empty()),
                "either a state or a process with amplitudes",
            )?,
        }
        Ok(Checked { layout, state, process })
    }
}

/// Parsed form of a validated config.
#[derive(Debug, Clone)]
pub struct Checked {
    pub layout: GridLayout,
    pub state: Option<StateModel>,
    pub process: Option<ProcessModel>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub label: String,
    pub min_value: f64,
    pub argmin: [f64; 2],
    pub significance: Option<f64>,
    pub nonclassical: bool,
}

impl Verdict {
    fn of(grid: &QuasiprobGrid) -> Result<Verdict> {
        let scan = grid.negativity_scan(DEFAULT_SIGNIFICANCE)?;
        Ok(Verdict {
            label: grid.source.clone(),
            min_value: scan.min_value,
            argmin: [scan.argmin.re, scan.argmin.im],
            significance: scan.significance.filter(|s| s.is_finite()),
            nonclassical: scan.nonclassical,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub runtime_s: f64,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub verdicts: Vec<Verdict>,
    pub details: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub config: RecipeConfig,
    pub stages: Vec<StageRecord>,
    pub runtime_s: f64,
}

impl Manifest {
    pub fn verdicts(&self) -> impl Iterator<Item = &Verdict> {
        self.stages.iter().flat_map(|s| s.verdicts.iter())
    }
}

struct Run<'a> {
    config: &'a RecipeConfig,
    checked: Checked,
    filter: FilterSpec,
    stages: Vec<StageRecord>,
}

impl Run<'_> {
    fn stage<T>(&mut self, name: &str, body: impl FnOnce(&mut Self, &mut StageRecord) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let mut rec = StageRecord {
            name: name.to_string(),
            runtime_s: 0.0,
            artifacts: vec![],
            verdicts: vec![],
            details: Value::Null,
        };
        let out = body(self, &mut rec).map_err(|e| e.in_stage(name))?;
        rec.runtime_s = start.elapsed().as_secs_f64();
        self.stages.push(rec);
        Ok(out)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.out_dir.join(name)
    }

    fn write_grid(&self, rec: &mut StageRecord, name: &str, grid: &QuasiprobGrid) -> Result<()> {
        let mut out = BufWriter::new(File::create(self.path(name))?);
        grid.write_csv(&mut out)?;
        out.flush()?;
        rec.artifacts.push(name.to_string());
        rec.verdicts.push(Verdict::of(grid)?);
        Ok(())
    }

    fn write_table(&self, rec: &mut StageRecord, stem: &str, table: &PnqdTable) -> Result<()> {
        let index = table.write(&self.config.out_dir, stem)?;
        rec.artifacts.push(relative(&index, &self.config.out_dir));
        for (i, g) in table.grids.iter().enumerate() {
            rec.artifacts.push(format!("{stem}_a{i:02}.csv"));
            rec.verdicts.push(Verdict::of(g)?);
        }
        Ok(())
    }

    fn process(&self) -> ProcessModel {
        self.checked.process.expect("validated")
    }

    fn simulate(&mut self) -> Result<Vec<QuadratureDataset>> {
        let p = self.process();
        self.stage("simulate", |run, rec| {
            let c = run.config;
            let phases = uniform_phases(c.phases);
            let n = c.n_per_phase()?;
            let mut sets = Vec::with_capacity(c.amplitudes.len());
            for (j, &a) in c.amplitudes.iter().enumerate() {
                let alpha = C64::new(a, 0.0);
                let state = match p.apply_to_coherent(alpha)?.state {
                    OutputState::State(s) => s,
                    other => {
                        return Err(Error::Capability(format!("no quadrature model for {other}")));
                    }
                };
                let d = simulate_dataset(&state, &phases, n, c.eta, substream_seed(c.seed, j))?.with_alpha(alpha);
                if c.write_data {
                    let name = format!("{}_data_a{j:02}.csv", c.experiment);
                    let mut out = BufWriter::new(File::create(run.path(&name))?);
                    d.write(&mut out)?;
                    out.flush()?;
                    rec.artifacts.push(name);
                }
                sets.push(d);
            }
            rec.details = json!({ "datasets": sets.len(), "samples_each": c.samples });
            Ok(sets)
        })
    }

    fn sample_table(&mut self, sets: &[QuadratureDataset]) -> Result<PnqdTable> {
        self.stage("sample", |run, rec| {
            let layout = run.checked.layout;
            let radial = matches!(layout, GridLayout::Radial { .. });
            let table = sample_pnqd(sets, &layout, &run.filter, radial)?;
            run.write_table(rec, &format!("{}_sampled", run.config.experiment), &table)?;
            Ok(table)
        })
    }

    fn direct_table(&mut self) -> Result<PnqdTable> {
        let p = self.process();
        self.stage("direct", |run, rec| {
            let table = PnqdTable::direct(&p, &run.config.amplitudes, &run.filter, &run.checked.layout)?;
            run.write_table(rec, &format!("{}_direct", run.config.experiment), &table)?;
            Ok(table)
        })
    }

    fn origin_curve(&mut self, sampled: &PnqdTable, direct: &PnqdTable) -> Result<()> {
        self.stage("curve", |run, rec| {
            let points = run.checked.layout.points();
            let idx = (0..points.len()).min_by(|&a, &b| points[a].norm().total_cmp(&points[b].norm())).unwrap();
            let name = format!("{}_curve.csv", run.config.experiment);
            let mut out = BufWriter::new(File::create(run.path(&name))?);
            writeln!(out, "# PNQD at beta={},{} w={}", points[idx].re, points[idx].im, run.filter.width())?;
            writeln!(out, "# columns: 1 alpha, 2 sampled value, 3 stat_err, 4 direct value")?;
            writeln!(out, "alpha,value,stat_err,direct")?;
            let mut worst: f64 = 0.0;
            for (j, a) in sampled.amplitudes().iter().enumerate() {
                let v = sampled.grids[j].values[idx];
                let e = sampled.grids[j].stat_err.as_ref().map_or(0.0, |e| e[idx]);
                let d = direct.grids[j].values[idx];
                if e > 0.0 {
                    worst = worst.max((v - d).abs() / e);
                }
                writeln!(out, "{a:.16e},{v:.16e},{e:.16e},{d:.16e}")?;
            }
            out.flush()?;
            rec.artifacts.push(name);
            rec.details = json!({ "max_deviation_in_stderr": worst });
            Ok(())
        })
    }

    fn predict(&mut self, sampled: &PnqdTable) -> Result<()> {
        let p = self.process();
        let nbar = self.config.nbar;
        let exp = self.config.experiment;
        let predicted = self.stage("predict", |run, rec| {
            let weight = |a: f64| p.weight(a);
            let g = predict_output_nqd(sampled, &InputPSpec::ThermalRadial { nbar }, &weight)?;
            run.write_grid(rec, &format!("{exp}_predicted.csv"), &g)?;
            Ok(g)
        })?;
        self.stage("reference", |run, rec| {
            let out = p.apply_to_state(&StateModel::Thermal(nbar))?;
            let direct = match &out.state {
                OutputState::State(s) => nqd_direct(s, &run.filter, &run.checked.layout)?,
                other => crate::quasiprob::nqd_direct_output(other, &run.filter, &run.checked.layout)?,
            };
            run.write_grid(rec, &format!("{exp}_direct.csv"), &direct)?;
            let parseval = parseval_output_nqd(&p, &StateModel::Thermal(nbar), &run.filter, &run.checked.layout)?;
            run.write_grid(rec, &format!("{exp}_parseval.csv"), &parseval)?;
            let stat = predicted.stat_err.clone().unwrap_or_else(|| vec![0.0; direct.values.len()]);
            let sys = predicted.sys_err.clone().unwrap_or_else(|| vec![0.0; direct.values.len()]);
            let worst = (0..direct.values.len())
                .map(|i| {
                    let err = stat[i].hypot(sys[i]);
                    (predicted.values[i] - direct.values[i]).abs() / err.max(f64::MIN_POSITIVE)
                })
                .fold(0.0, f64::max);
            rec.details = json!({ "max_deviation_in_combined_error": worst });
            Ok(())
        })
    }
}

fn relative(path: &Path, base: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).display().to_string()
}

/// Runs a recipe; the manifest is written after every stage has finished.
pub fn run_recipe(config: &RecipeConfig) -> Result<Manifest> {
    let checked = config.validate()?;
    let start = Instant::now();
    fs::create_dir_all(&config.out_dir)?;
    let filter = FilterSpec::build(config.width, config.tol).map_err(|e| e.in_stage("filter"))?;
    let mut run = Run { config, checked, filter, stages: vec![] };
    let exp = config.experiment;
    match exp {
        Experiment::Fig1 => {
            let s = run.checked.state.clone().expect("validated");
            run.stage("nqd", |run, rec| {
                let g = nqd_direct(&s, &run.filter, &run.checked.layout)?;
                run.write_grid(rec, "fig1_nqd.csv", &g)
            })?;
        }
        Experiment::Fig2 => {
            let p = run.process();
            run.direct_table()?;
            let nbar = config.nbar;
            run.stage("fixed_point", |_, rec| {
                let distance = fixed_point_check(&p, nbar, 60)?;
                rec.details = json!({ "input": format!("thermal:nbar={nbar}"), "trace_distance": distance });
                Ok(())
            })?;
        }
        Experiment::Fig3 => {
            let sets = run.simulate()?;
            run.sample_table(&sets)?;
            run.direct_table()?;
        }
        Experiment::Fig4 | Experiment::Fig5 => {
            let sets = run.simulate()?;
            let sampled = run.sample_table(&sets)?;
            let direct = run.direct_table()?;
            run.origin_curve(&sampled, &direct)?;
            if exp == Experiment::Fig5 {
                run.predict(&sampled)?;
            }
        }
        Experiment::Custom => {
            if let Some(s) = run.checked.state.clone() {
                run.stage("nqd", |run, rec| {
                    let g = nqd_direct(&s, &run.filter, &run.checked.layout)?;
                    run.write_grid(rec, "custom_nqd.csv", &g)
                })?;
                if config.samples > 0 {
                    run.stage("sample", |run, rec| {
                        let c = run.config;
                        let d = simulate_dataset(&s, &uniform_phases(c.phases), c.n_per_phase()?, c.eta, c.seed)?;
                        let g = sample_nqd_eta_removed(&d, &run.checked.layout, &run.filter)?;
                        run.write_grid(rec, "custom_sampled.csv", &g)
                    })?;
                }
            } else {
                run.direct_table()?;
                if config.samples > 0 {
                    let sets = run.simulate()?;
                    run.sample_table(&sets)?;
                }
            }
        }
    }
    let manifest = Manifest { config: config.clone(), stages: run.stages, runtime_s: start.elapsed().as_secs_f64() };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(config.out_dir.join("manifest.json"), text + "\n")?;
    Ok(manifest)
}

#[cfg(test)]
mod tests;
