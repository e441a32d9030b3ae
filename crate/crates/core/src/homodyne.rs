//! Simulated balanced-homodyne data and its text format.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Lines, Write};
use std::path::Path;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::MonotoneCubic;
use crate::states::{QuadratureModel, QuadratureSlice, StateModel};

/// Nodes of each inverse-CDF table.
pub const CDF_NODES: usize = 4096;
/// Half-width of each table in standard deviations.
pub const CDF_SPAN: f64 = 10.0;
/// Largest probability mass a table may leave outside its range.
const MAX_MASS_DEFICIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    /// State descriptor, see [`StateModel`]'s text form.
    pub state: String,
    /// Coherent amplitude fed to the process, for process tomography.
    pub alpha: Option<C64>,
    pub eta: f64,
    pub phases: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureDataset {
    pub meta: DatasetMeta,
    /// `(x, phi)` pairs grouped by phase.
    pub samples: Vec<(f64, f64)>,
}

/// `k` equally spaced phases `j pi / k`.
pub fn uniform_phases(k: usize) -> Vec<f64> {
    (0..k).map(|j| PI * j as f64 / k as f64).collect()
}

fn validate_phases(phases: &[f64]) -> Result<()> {
    if phases.is_empty() {
        return Err(Error::param("phase list is empty"));
    }
    for (i, &p) in phases.iter().enumerate() {
        if !(0.0..PI).contains(&p) {
            return Err(Error::param(format!("phase {p} outside [0, pi)")));
        }
        if phases[..i].contains(&p) {
            return Err(Error::param(format!("phase {p} listed twice")));
        }
    }
    Ok(())
}

/// Deterministic per-phase seed.
pub(crate) fn substream_seed(seed: u64, index: usize) -> u64 {
    // SplitMix64 finalizer over the pair
    let mut z = seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Tabulated inverse of a quadrature distribution function.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    inverse: MonotoneCubic,
}

impl InverseCdf {
    pub fn build(slice: &QuadratureSlice) -> Result<InverseCdf> {
        let (mean, sd) = slice.moments();
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(Error::Range(format!("degenerate quadrature distribution (mean {mean}, sd {sd})")));
        }
        let lo = mean - CDF_SPAN * sd;
        let h = 2.0 * CDF_SPAN * sd / (CDF_NODES - 1) as f64;
        let xs: Vec<f64> = (0..CDF_NODES).map(|i| lo + i as f64 * h).collect();
        let pdf: Vec<f64> = xs.iter().map(|&x| slice.pdf(x)).collect();
        let mut cdf = Vec::with_capacity(CDF_NODES);
        cdf.push(0.0);
        for i in 1..CDF_NODES {
            let mid = slice.pdf(xs[i] - 0.5 * h);
            cdf.push(cdf[i - 1] + h / 6.0 * (pdf[i - 1] + 4.0 * mid + pdf[i]));
        }
        let mass = cdf[CDF_NODES - 1];
        if (1.0 - mass).abs() > MAX_MASS_DEFICIT {
            return Err(Error::Range(format!(
                "inverse-CDF table over [{lo:.3}, {:.3}] holds mass {mass:.9}",
                xs[CDF_NODES - 1]
            )));
        }
        let mut knots_u = Vec::with_capacity(CDF_NODES);
        let mut knots_x = Vec::with_capacity(CDF_NODES);
        for (u, x) in cdf.iter().map(|c| c / mass).zip(&xs) {
            // flat stretches would make the inverse multivalued
            if knots_u.last().is_none_or(|&last| u > last) {
                knots_u.push(u);
                knots_x.push(*x);
            }
        }
        Ok(InverseCdf { inverse: MonotoneCubic::new(knots_u, knots_x) })
    }

    pub fn sample(&self, u: f64) -> f64 {
        self.inverse.eval(u)
    }
}

/// Draws `n_per_phase` quadratures at each phase from `s` measured with
/// efficiency `eta`.
pub fn simulate_dataset(
    s: &StateModel,
    phases: &[f64],
    n_per_phase: usize,
    eta: f64,
    seed: u64,
) -> Result<QuadratureDataset> {
    validate_phases(phases)?;
    if n_per_phase == 0 {
        return Err(Error::param("need at least one sample per phase"));
    }
    let model = QuadratureModel::new(s, eta)?;
    let blocks: Vec<Result<Vec<(f64, f64)>>> = phases
        .par_iter()
        .enumerate()
        .map(|(i, &phi)| {
            let table = InverseCdf::build(&model.at_phase(phi)?)?;
            let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, i));
            Ok((0..n_per_phase).map(|_| (table.sample(rng.random::<f64>()), phi)).collect())
        })
        .collect();
    let mut samples = Vec::with_capacity(phases.len() * n_per_phase);
    for b in blocks {
        samples.extend(b?);
    }
    Ok(QuadratureDataset {
        meta: DatasetMeta { state: s.to_string(), alpha: None, eta, phases: phases.to_vec(), seed },
        samples,
    })
}

impl QuadratureDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn with_alpha(mut self, alpha: C64) -> Self {
        self.meta.alpha = Some(alpha);
        self
    }

    /// Samples taken at `phi`.
    pub fn at_phase(&self, phi: f64) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().filter(move |s| s.1 == phi).map(|s| s.0)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let m = &self.meta;
        writeln!(out, "# state={}", m.state)?;
        if let Some(a) = m.alpha {
            writeln!(out, "# alpha={},{}", a.re, a.im)?;
        }
        writeln!(out, "# eta={}", m.eta)?;
        let phases: Vec<String> = m.phases.iter().map(|p| format!("{p}")).collect();
        writeln!(out, "# phases={}", phases.join(";"))?;
        writeln!(out, "# n={}", self.samples.len())?;
        writeln!(out, "# seed={}", m.seed)?;
        writeln!(out, "x,phi")?;
        for (x, phi) in &self.samples {
            writeln!(out, "{x:.16e},{phi:.16e}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<QuadratureDataset> {
        let mut reader = DatasetReader::new(input)?;
        let mut samples = Vec::with_capacity(reader.declared_len());
        for s in reader.by_ref() {
            samples.push(s?);
        }
        Ok(QuadratureDataset { meta: reader.meta, samples })
    }
}

pub fn write_dataset(d: &QuadratureDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    d.write(&mut out)?;
    out.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<QuadratureDataset> {
    QuadratureDataset::read(BufReader::new(File::open(path)?))
}

/// Streams `(x, phi)` rows after parsing and validating the header. The
/// iterator reports a parse error if the row count disagrees with `n`.
pub struct DatasetReader<R> {
    pub meta: DatasetMeta,
    declared: usize,
    seen: usize,
    line: usize,
    lines: Lines<R>,
    done: bool,
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

impl<R: BufRead> DatasetReader<R> {
    pub fn new(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let mut line = 0;
        let (mut state, mut alpha, mut eta, mut phases, mut n, mut seed) = (None, None, None, None, None, None);
        loop {
            line += 1;
            let text = lines.next().ok_or_else(|| perr(line, "unexpected end of file in header"))??;
            let text = text.trim();
            let Some(body) = text.strip_prefix('#') else {
                if text != "x,phi" {
                    return Err(perr(line, format!("expected `x,phi` column line, got `{text}`")));
                }
                break;
            };
            let (key, value) = body
                .trim()
                .split_once('=')
                .ok_or_else(|| perr(line, format!("header line `{text}` is not key=value")))?;
            let num = |v: &str| v.trim().parse::<f64>().map_err(|_| perr(line, format!("`{key}` is not a number: `{v}`")));
            match key.trim() {
                "state" => state = Some(value.trim().to_string()),
                "alpha" => {
                    let (re, im) = value.split_once(',').ok_or_else(|| perr(line, "alpha must be `re,im`"))?;
                    alpha = Some(C64::new(num(re)?, num(im)?));
                }
                "eta" => eta = Some(num(value)?),
                "phases" => {
                    phases = Some(value.split(';').map(num).collect::<Result<Vec<f64>>>()?);
                }
                "n" => n = Some(value.trim().parse::<usize>().map_err(|_| perr(line, format!("bad sample count `{value}`")))?),
                "seed" => seed = Some(value.trim().parse::<u64>().map_err(|_| perr(line, format!("bad seed `{value}`")))?),
                other => return Err(perr(line, format!("unknown header key `{other}`"))),
            }
        }
        let missing = |k: &str| perr(line, format!("header lacks `{k}`"));
        let eta = eta.ok_or_else(|| missing("eta"))?;
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(perr(line, format!("eta must lie in (0, 1], got {eta}")));
        }
        let phases = phases.ok_or_else(|| missing("phases"))?;
        validate_phases(&phases).map_err(|e| perr(line, e.to_string()))?;
        let meta = DatasetMeta {
            state: state.ok_or_else(|| missing("state"))?,
            alpha,
            eta,
            phases,
            seed: seed.ok_or_else(|| missing("seed"))?,
        };
        let declared = n.ok_or_else(|| missing("n"))?;
        Ok(DatasetReader { meta, declared, seen: 0, line, lines, done: false })
    }

    pub fn declared_len(&self) -> usize {
        self.declared
    }

    fn parse_row(&self, text: &str) -> Result<(f64, f64)> {
        let (x, phi) = text.split_once(',').ok_or_else(|| perr(self.line, format!("expected `x,phi`, got `{text}`")))?;
        let x: f64 = x.trim().parse().map_err(|_| perr(self.line, format!("bad x `{x}`")))?;
        let phi: f64 = phi.trim().parse().map_err(|_| perr(self.line, format!("bad phi `{phi}`")))?;
        if !x.is_finite() {
            return Err(perr(self.line, "x is not finite"));
        }
        if !self.meta.phases.contains(&phi) {
            return Err(perr(self.line, format!("phase {phi} is not in the declared list")));
        }
        Ok((x, phi))
    }
}

impl<R: BufRead> Iterator for DatasetReader<R> {
    type Item = Result<(f64, f64)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            self.line += 1;
            match self.lines.next() {
                None => {
                    self.done = true;
                    if self.seen != self.declared {
                        return Some(Err(perr(
                            self.line,
                            format!("header declares {} samples, file holds {}", self.declared, self.seen),
                        )));
                    }
                    return None;
                }
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
                Some(Ok(text)) => {
                    let text = text.trim();
                    if text.is_empty() {
                        continue;
                    }
                    let row = self.parse_row(text);
                    if row.is_err() {
                        self.done = true;
                    } else {
                        self.seen += 1;
                    }
                    return Some(row);
                }
            }
        }
    }
}
