//! Pattern-function estimators of filtered quasiprobabilities from
//! quadrature samples.
//!
//! The pattern function depends on the sample only through
//! `y = x - 2 Re(beta e^{-i phi})`:
//! `f(y) = (2/pi) int_0^{b_max} b e^{b^2/2} Omega_w(b) cos(b y) db`.
//! Averaging over the circle `|beta| = a` multiplies the integrand by
//! `J0(2 a b)` and leaves a function of `x` alone. Both are tabulated once
//! per grid with cubic Hermite interpolation and evaluated per sample.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::homodyne::QuadratureDataset;
use crate::numeric::{mean_and_stderr, pairwise_sum, UniformHermite};
use crate::processes::ProcessModel;
use crate::quasiprob::{pnqd_direct, GridLayout, QuasiprobGrid};
use crate::special::j0;

/// Interpolation error target of a pattern table.
const TABLE_TOL: f64 = 1e-10;

/// Fewest distinct phases for estimating a phase-sensitive grid.
pub const MIN_PHASES: usize = 5;

/// `(2/pi) b e^{b^2/2} Omega(b) J0(2 a b)` times quadrature weights on a
/// rule fine enough for `cos(b y)` with `|y| <= y_max`.
fn kernel_nodes(f: &FilterSpec, a: f64, y_max: f64) -> Vec<(f64, f64)> {
    let panel = (4.0 / (y_max + 2.0 * a).max(1e-3)).min(0.25);
    let rule = f.radial_rule(panel, 12);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&b, &w)| {
            let g = 2.0 / PI * w * b * (0.5 * b * b).exp() * f.value_unchecked(b);
            (b, if a == 0.0 { g } else { g * j0(2.0 * a * b) })
        })
        .collect()
}

fn cosine_sum(nodes: &[(f64, f64)], y: f64) -> f64 {
    let terms: Vec<f64> = nodes.iter().map(|&(b, c)| c * (b * y).cos()).collect();
    pairwise_sum(&terms)
}

/// A tabulated pattern function, even in its argument.
#[derive(Debug, Clone)]
pub struct PatternTable {
    width: f64,
    radius: f64,
    table: UniformHermite,
}

impl PatternTable {
    /// `f(y)` for `|y| <= y_max`.
    pub fn new(f: &FilterSpec, y_max: f64) -> Result<PatternTable> {
        PatternTable::build(f, 0.0, y_max)
    }

    /// Circle-averaged pattern function at radius `a`, for `|x| <= x_max`.
    pub fn phase_randomized(f: &FilterSpec, a: f64, x_max: f64) -> Result<PatternTable> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::param(format!("radius must be nonnegative, got {a}")));
        }
        PatternTable::build(f, a, x_max)
    }

    fn build(f: &FilterSpec, a: f64, y_max: f64) -> Result<PatternTable> {
        if !(y_max > 0.0 && y_max.is_finite()) {
            return Err(Error::param(format!("pattern table range must be positive, got {y_max}")));
        }
        let nodes = kernel_nodes(f, a, y_max);
        // Hermite error <= h^4 max|f''''| / 384 and |f''''| <= sum |c| b^4
        let m4: f64 = nodes.iter().map(|&(b, c)| c.abs() * b.powi(4)).sum();
        let h_target = (384.0 * TABLE_TOL / m4.max(1e-300)).powf(0.25).min(0.05);
        let steps = (y_max / h_target).ceil() as usize;
        let h = y_max / steps as f64;
        let (values, derivs): (Vec<f64>, Vec<f64>) = (0..=steps)
            .into_par_iter()
            .map(|i| {
                let y = i as f64 * h;
                let d: Vec<f64> = nodes.iter().map(|&(b, c)| -c * b * (b * y).sin()).collect();
                (cosine_sum(&nodes, y), pairwise_sum(&d))
            })
            .unzip();
        Ok(PatternTable { width: f.width(), radius: a, table: UniformHermite::new(0.0, h, values, derivs) })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn range(&self) -> f64 {
        self.table.x_max()
    }

    /// Interpolated value; `None` outside the tabulated range.
    #[inline]
    pub fn eval(&self, y: f64) -> Option<f64> {
        self.table.eval(y.abs())
    }
}

/// Pattern function `f(x, phi; beta, w)` evaluated directly as the complex
/// integral over `[-b_max, b_max]`.
pub fn pattern_fn(x: f64, phi: f64, beta: C64, f: &FilterSpec) -> Result<f64> {
    if !(x.is_finite() && phi.is_finite() && beta.re.is_finite() && beta.im.is_finite()) {
        return Err(Error::param("pattern function arguments must be finite"));
    }
    let shift = 2.0 * beta.norm() * (beta.arg() - phi - 0.5 * PI).sin();
    let panel = (4.0 / (x.abs() + shift.abs()).max(1e-3)).min(0.25);
    let rule = f.radial_rule(panel, 12);
    let mut terms = Vec::with_capacity(2 * rule.len());
    for (&b, &w) in rule.nodes.iter().zip(&rule.weights) {
        let g = w * b / PI * (0.5 * b * b).exp() * f.value_unchecked(b);
        for s in [b, -b] {
            terms.push(C64::from_polar(1.0, s * x) * C64::from_polar(1.0, s * shift) * g);
        }
    }
    let re: Vec<f64> = terms.iter().map(|c| c.re).collect();
    let im: Vec<f64> = terms.iter().map(|c| c.im).collect();
    let residue = pairwise_sum(&im);
    if residue.abs() > 1e-8 {
        return Err(Error::Numerical(format!("pattern function residue {residue:.2e}")));
    }
    Ok(pairwise_sum(&re))
}

/// Circle average of [`pattern_fn`] over `beta = a e^{i theta}`.
pub fn phase_randomized_pattern(x: f64, a: f64, f: &FilterSpec) -> Result<f64> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::param(format!("radius must be nonnegative, got {a}")));
    }
    if !x.is_finite() {
        return Err(Error::param("pattern function arguments must be finite"));
    }
    Ok(cosine_sum(&kernel_nodes(f, a, x.abs()), x))
}

fn phase_indices(d: &QuadratureDataset) -> Result<Vec<u8>> {
    if d.meta.phases.len() > u8::MAX as usize {
        return Err(Error::param("at most 255 distinct phases are supported"));
    }
    d.samples
        .iter()
        .map(|&(_, phi)| {
            d.meta
                .phases
                .iter()
                .position(|&p| p == phi)
                .map(|i| i as u8)
                .ok_or_else(|| Error::Format(format!("sample phase {phi} is not in the declared list")))
        })
        .collect()
}

fn sampled_label(d: &QuadratureDataset) -> String {
    match d.meta.alpha {
        Some(a) => format!("sampled({};alpha={},{})", d.meta.state, a.re, a.im),
        None => format!("sampled({})", d.meta.state),
    }
}

/// Sample mean of the pattern function at each grid point, with the
/// standard error of the mean. Radial layouts use the circle-averaged
/// pattern function.
pub fn sample_nqd(d: &QuadratureDataset, layout: &GridLayout, f: &FilterSpec) -> Result<QuasiprobGrid> {
    if d.is_empty() {
        return Err(Error::param("dataset holds no samples"));
    }
    layout.validate()?;
    let x_max = d.samples.iter().map(|s| s.0.abs()).fold(0.0, f64::max);
    let stats: Vec<(f64, f64)> = match layout {
        GridLayout::Square { .. } => {
            if d.meta.phases.len() < MIN_PHASES {
                return Err(Error::param(format!(
                    "phase-sensitive estimation needs at least {MIN_PHASES} phases, dataset has {}",
                    d.meta.phases.len()
                )));
            }
            let idx = phase_indices(d)?;
            let table = PatternTable::new(f, x_max + 2.0 * layout.max_modulus() + 1.0)?;
            let (cos, sin): (Vec<f64>, Vec<f64>) = d.meta.phases.iter().map(|p| (p.cos(), p.sin())).unzip();
            layout
                .points()
                .par_iter()
                .map(|beta| {
                    let shift: Vec<f64> =
                        cos.iter().zip(&sin).map(|(c, s)| 2.0 * (beta.re * c + beta.im * s)).collect();
                    let vals: Vec<f64> = d
                        .samples
                        .iter()
                        .zip(&idx)
                        .map(|(&(x, _), &k)| table.eval(x - shift[k as usize]).unwrap())
                        .collect();
                    mean_and_stderr(&vals)
                })
                .collect()
        }
        GridLayout::Radial { .. } => {
            let radii = layout.axis();
            let tables: Vec<PatternTable> = radii
                .iter()
                .map(|&a| PatternTable::phase_randomized(f, a, x_max + 1.0))
                .collect::<Result<_>>()?;
            tables
                .par_iter()
                .map(|t| {
                    let vals: Vec<f64> = d.samples.iter().map(|&(x, _)| t.eval(x).unwrap()).collect();
                    mean_and_stderr(&vals)
                })
                .collect()
        }
    };
    let (values, stat_err) = stats.into_iter().unzip();
    Ok(QuasiprobGrid {
        layout: *layout,
        values,
        stat_err: Some(stat_err),
        sys_err: None,
        width: f.width(),
        source: sampled_label(d),
    })
}

/// Filter width used on lossy data so that the result refers to unit efficiency.
pub fn removal_width(w: f64, eta: f64) -> f64 {
    w / eta.sqrt()
}

fn scaled_layout(layout: &GridLayout, s: f64) -> GridLayout {
    match *layout {
        GridLayout::Square { center, half_width, n } => {
            GridLayout::Square { center: center * s, half_width: half_width * s, n }
        }
        GridLayout::Radial { r_max, n } => GridLayout::Radial { r_max: r_max * s, n },
    }
}

/// Estimates the quasiprobability at unit efficiency from data taken at
/// efficiency `eta < 1`, using `P(beta; 1, w) = eta P(sqrt(eta) beta; eta, w / sqrt(eta))`.
pub fn sample_nqd_eta_removed(d: &QuadratureDataset, layout: &GridLayout, f: &FilterSpec) -> Result<QuasiprobGrid> {
    let eta = d.meta.eta;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Format(format!("dataset efficiency {eta} outside (0, 1]")));
    }
    if eta == 1.0 {
        return sample_nqd(d, layout, f);
    }
    let lossy = FilterSpec::build(removal_width(f.width(), eta), f.tol())?;
    let s = eta.sqrt();
    let mut g = sample_nqd(d, &scaled_layout(layout, s), &lossy)?;
    for v in g.values.iter_mut() {
        *v *= eta;
    }
    for e in g.stat_err.iter_mut().flatten() {
        *e *= eta;
    }
    g.layout = *layout;
    g.width = f.width();
    g.source = format!("{};eta_removed", g.source);
    Ok(g)
}

/// One grid per probe amplitude, sharing width and geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct PnqdTable {
    pub width: f64,
    pub phase_randomized: bool,
    pub alphas: Vec<C64>,
    pub grids: Vec<QuasiprobGrid>,
}

impl PnqdTable {
    /// Sorts by `|alpha|` and checks the table invariants.
    pub fn new(mut entries: Vec<(C64, QuasiprobGrid)>, phase_randomized: bool) -> Result<PnqdTable> {
        if entries.is_empty() {
            return Err(Error::param("PNQD table needs at least one amplitude"));
        }
        entries.sort_by(|a, b| a.0.norm().total_cmp(&b.0.norm()).then(a.0.arg().total_cmp(&b.0.arg())));
        for pair in entries.windows(2) {
            let (a, b) = (pair[0].0, pair[1].0);
            if a == b || (phase_randomized && a.norm() == b.norm()) {
                return Err(Error::param(format!("duplicate probe amplitude {b}")));
            }
        }
        let (width, layout) = (entries[0].1.width, entries[0].1.layout);
        for (a, g) in &entries {
            if g.width != width || !g.layout.same_geometry(&layout) {
                return Err(Error::param(format!("grid for alpha = {a} differs in width or geometry")));
            }
        }
        if phase_randomized != matches!(layout, GridLayout::Radial { .. }) {
            return Err(Error::param("phase-randomized tables use radial grids and only those"));
        }
        let (alphas, grids) = entries.into_iter().unzip();
        Ok(PnqdTable { width, phase_randomized, alphas, grids })
    }

    /// Probe amplitudes `|alpha|`, increasing.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.alphas.iter().map(|a| a.norm()).collect()
    }

    pub fn layout(&self) -> GridLayout {
        self.grids[0].layout
    }

    /// Direct (noise-free) table for a process at real amplitudes.
    pub fn direct(p: &ProcessModel, amplitudes: &[f64], f: &FilterSpec, layout: &GridLayout) -> Result<PnqdTable> {
        let entries = amplitudes
            .iter()
            .map(|&a| {
                let alpha = C64::new(a, 0.0);
                Ok((alpha, pnqd_direct(p, alpha, f, layout)?))
            })
            .collect::<Result<Vec<_>>>()?;
        PnqdTable::new(entries, matches!(layout, GridLayout::Radial { .. }))
    }

    /// Writes `<stem>_index.csv` and one grid per amplitude into `dir`,
    /// returning the index path.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        let index = dir.join(format!("{stem}_index.csv"));
        let mut out = BufWriter::new(File::create(&index)?);
        writeln!(out, "# pnqd w={} phase_randomized={}", self.width, self.phase_randomized)?;
        writeln!(out, "alpha,path")?;
        for (i, (a, g)) in self.alphas.iter().zip(&self.grids).enumerate() {
            let name = format!("{stem}_a{i:02}.csv");
            let mut gout = BufWriter::new(File::create(dir.join(&name))?);
            g.write_csv(&mut gout)?;
            gout.flush()?;
            let alpha = if a.im == 0.0 { format!("{}", a.re) } else { format!("{};{}", a.re, a.im) };
            writeln!(out, "{alpha},{name}")?;
        }
        out.flush()?;
        Ok(index)
    }

    /// Reads an index file; grid paths are relative to its directory.
    pub fn read(index: &Path) -> Result<PnqdTable> {
        let dir = index.parent().unwrap_or(Path::new("."));
        let reader = BufReader::new(File::open(index)?);
        let mut phase_randomized = None;
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let lno = i + 1;
            let line = line?;
            let line = line.trim();
            if let Some(h) = line.strip_prefix('#') {
                for tok in h.split_whitespace() {
                    if let Some(v) = tok.strip_prefix("phase_randomized=") {
                        phase_randomized = Some(v.parse::<bool>().map_err(|_| Error::Parse {
                            line: lno,
                            msg: format!("bad flag `{v}`"),
                        })?);
                    }
                }
                continue;
            }
            if line.is_empty() || line == "alpha,path" {
                continue;
            }
            let (alpha, path) = line
                .split_once(',')
                .ok_or_else(|| Error::Parse { line: lno, msg: format!("expected `alpha,path`, got `{line}`") })?;
            let num = |s: &str| {
                s.trim().parse::<f64>().map_err(|_| Error::Parse { line: lno, msg: format!("bad amplitude `{alpha}`") })
            };
            let alpha = match alpha.split_once(';') {
                Some((re, im)) => C64::new(num(re)?, num(im)?),
                None => C64::new(num(alpha)?, 0.0),
            };
            let file = File::open(dir.join(path.trim()))?;
            let grid = QuasiprobGrid::read_csv(BufReader::new(file)).map_err(|e| e.in_stage(path.trim()))?;
            entries.push((alpha, grid));
        }
        let phase_randomized =
            phase_randomized.ok_or_else(|| Error::Format("index header lacks `phase_randomized=`".into()))?;
        PnqdTable::new(entries, phase_randomized)
    }
}

/// Samples one grid per probe dataset. Each dataset must carry its probe
/// amplitude; lossy datasets go through the efficiency-removal identity.
pub fn sample_pnqd(
    datasets: &[QuadratureDataset],
    layout: &GridLayout,
    f: &FilterSpec,
    phase_randomized: bool,
) -> Result<PnqdTable> {
    if phase_randomized != matches!(layout, GridLayout::Radial { .. }) {
        return Err(Error::param("phase-randomized estimation needs a radial grid, and vice versa"));
    }
    let mut entries = Vec::with_capacity(datasets.len());
    for d in datasets {
        let alpha = d
            .meta
            .alpha
            .ok_or_else(|| Error::Format(format!("dataset for {} carries no probe amplitude", d.meta.state)))?;
        entries.push((alpha, sample_nqd_eta_removed(d, layout, f)?));
    }
    PnqdTable::new(entries, phase_randomized)
}
