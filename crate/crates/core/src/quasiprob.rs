//! Filtered quasiprobabilities on grids of phase-space points.
//!
//! `P(beta) = (1/pi^2) int d^2 xi Phi(xi) Omega_w(|xi|) exp(beta xi* - beta* xi)`
//! is evaluated by polar quadrature over `xi`: composite Gauss–Legendre in
//! `|xi|` on `[0, b_max]` and the periodic trapezoid rule in `arg xi`. For
//! phase-insensitive sources the angular integral is the Bessel kernel
//! `2 pi J0(2 |beta| b)`.

use std::f64::consts::PI;
use std::fmt::{self, Write as _};
use std::io::{BufRead, Write};
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::numeric::{pairwise_sum, trapezoid_weights, Rule};
use crate::processes::{OutputState, ProcessModel};
use crate::special::j0;
use crate::states::{get, parse_params, require, StateModel};

/// Values above `-NUMERICAL_ZERO` count as nonnegative in direct computations.
pub const NUMERICAL_ZERO: f64 = 1e-8;

/// Default significance for declaring sampled negativities nonclassical.
pub const DEFAULT_SIGNIFICANCE: f64 = 3.0;

/// Largest imaginary residue of the Fourier integral we accept.
const MAX_IMAG_RESIDUE: f64 = 1e-8;

/// Points at which a quasiprobability is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridLayout {
    /// `n x n` points covering `center + [-h, h]^2`, stored row by row with
    /// `Re beta` running fastest.
    Square { center: C64, half_width: f64, n: usize },
    /// `n` radii `r_i = r_max i / (n - 1)`; values are averages over the
    /// circle `|beta| = r_i`.
    Radial { r_max: f64, n: usize },
}

impl GridLayout {
    pub fn square(half_width: f64, n: usize) -> GridLayout {
        GridLayout::Square { center: C64::new(0.0, 0.0), half_width, n }
    }

    pub fn radial(r_max: f64, n: usize) -> GridLayout {
        GridLayout::Radial { r_max, n }
    }

    pub fn validate(&self) -> Result<()> {
        let (extent, n) = match *self {
            GridLayout::Square { center, half_width, n } => {
                if !(center.re.is_finite() && center.im.is_finite()) {
                    return Err(Error::param("grid center must be finite"));
                }
                (half_width, n)
            }
            GridLayout::Radial { r_max, n } => (r_max, n),
        };
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::param(format!("grid extent must be positive, got {extent}")));
        }
        if n < 2 {
            return Err(Error::param(format!("grid needs at least 2 points per axis, got {n}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        match *self {
            GridLayout::Square { n, .. } => n * n,
            GridLayout::Radial { n, .. } => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distance between neighbouring points.
    pub fn spacing(&self) -> f64 {
        match *self {
            GridLayout::Square { half_width, n, .. } => 2.0 * half_width / (n - 1) as f64,
            GridLayout::Radial { r_max, n } => r_max / (n - 1) as f64,
        }
    }

    /// Coordinates along one axis (square) or the radii (radial).
    pub fn axis(&self) -> Vec<f64> {
        let h = self.spacing();
        match *self {
            GridLayout::Square { half_width, n, .. } => {
                (0..n).map(|i| -half_width + i as f64 * h).collect()
            }
            GridLayout::Radial { n, .. } => (0..n).map(|i| i as f64 * h).collect(),
        }
    }

    /// All points; radial grids report their radii on the real axis.
    pub fn points(&self) -> Vec<C64> {
        let axis = self.axis();
        match *self {
            GridLayout::Square { center, .. } => axis
                .iter()
                .flat_map(|&y| axis.iter().map(move |&x| center + C64::new(x, y)))
                .collect(),
            GridLayout::Radial { .. } => axis.into_iter().map(|r| C64::new(r, 0.0)).collect(),
        }
    }

    /// Largest `|beta|` on the grid.
    pub fn max_modulus(&self) -> f64 {
        match *self {
            GridLayout::Square { center, half_width, .. } => {
                (center.re.abs() + half_width).hypot(center.im.abs() + half_width)
            }
            GridLayout::Radial { r_max, .. } => r_max,
        }
    }

    /// Whether both grids have the same geometry.
    pub fn same_geometry(&self, other: &GridLayout) -> bool {
        self == other
    }
}

impl fmt::Display for GridLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GridLayout::Square { center, half_width, n } => {
                write!(f, "square:half={half_width},n={n}")?;
                if center != C64::new(0.0, 0.0) {
                    write!(f, ",re={},im={}", center.re, center.im)?;
                }
                Ok(())
            }
            GridLayout::Radial { r_max, n } => write!(f, "radial:r_max={r_max},n={n}"),
        }
    }
}

/// `square:half=H,n=N[,re=,im=]` or `radial:r_max=R,n=N`.
impl FromStr for GridLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<GridLayout> {
        let (kind, body) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let count = |p: &[(&str, f64)]| -> Result<usize> {
            let n = require(p, "n", kind)?;
            if n < 0.0 || n.fract() != 0.0 {
                return Err(Error::param(format!("grid size must be a whole number, got {n}")));
            }
            Ok(n as usize)
        };
        let layout = match kind {
            "square" => {
                let p = parse_params(body, &["half", "n", "re", "im"])?;
                GridLayout::Square {
                    center: C64::new(get(&p, "re").unwrap_or(0.0), get(&p, "im").unwrap_or(0.0)),
                    half_width: require(&p, "half", kind)?,
                    n: count(&p)?,
                }
            }
            "radial" => {
                let p = parse_params(body, &["r_max", "n"])?;
                GridLayout::Radial { r_max: require(&p, "r_max", kind)?, n: count(&p)? }
            }
            _ => return Err(Error::param(format!("unknown grid kind `{kind}` (square or radial)"))),
        };
        layout.validate()?;
        Ok(layout)
    }
}

/// Negativity summary of a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativityScan {
    pub min_value: f64,
    pub argmin: C64,
    /// `|min| / stat_err` at the minimum, when errors are known.
    pub significance: Option<f64>,
    pub nonclassical: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuasiprobGrid {
    pub layout: GridLayout,
    pub values: Vec<f64>,
    pub stat_err: Option<Vec<f64>>,
    pub sys_err: Option<Vec<f64>>,
    pub width: f64,
    pub source: String,
}

impl QuasiprobGrid {
    pub fn points(&self) -> Vec<C64> {
        self.layout.points()
    }

    /// Integral over the plane: a Riemann sum on square grids, the
    /// trapezoid rule in `2 pi r dr` on radial ones.
    pub fn mass(&self) -> f64 {
        match self.layout {
            GridLayout::Square { .. } => {
                let h = self.layout.spacing();
                pairwise_sum(&self.values) * h * h
            }
            GridLayout::Radial { .. } => {
                let r = self.layout.axis();
                let w = trapezoid_weights(&r);
                let terms: Vec<f64> =
                    r.iter().zip(&w).zip(&self.values).map(|((r, w), v)| 2.0 * PI * r * w * v).collect();
                pairwise_sum(&terms)
            }
        }
    }

    /// Minimum and its significance. Direct grids (no `stat_err`) are
    /// nonclassical when the minimum is below `-NUMERICAL_ZERO`; sampled
    /// grids need `significance > threshold` as well.
    pub fn negativity_scan(&self, threshold: f64) -> Result<NegativityScan> {
        let (idx, &min_value) = self
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .ok_or_else(|| Error::param("negativity scan of an empty grid"))?;
        let argmin = self.points()[idx];
        let significance = self.stat_err.as_ref().map(|e| {
            if e[idx] > 0.0 {
                min_value.abs() / e[idx]
            } else {
                f64::INFINITY
            }
        });
        let nonclassical = match significance {
            Some(s) => min_value < 0.0 && s > threshold,
            None => min_value < -NUMERICAL_ZERO,
        };
        Ok(NegativityScan { min_value, argmin, significance, nonclassical })
    }

    /// Writes the grid as CSV with a metadata header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let source = self.source.replace(char::is_whitespace, "_");
        let mut header = format!("# source={source} w={}", self.width);
        match self.layout {
            GridLayout::Square { center, half_width, n } => {
                write!(header, " nx={n} ny={n} half_width={half_width}").unwrap();
                if center != C64::new(0.0, 0.0) {
                    write!(header, " center={},{}", center.re, center.im).unwrap();
                }
            }
            GridLayout::Radial { r_max, n } => {
                write!(header, " nr={n} r_max={r_max} layout=radial").unwrap();
            }
        }
        writeln!(out, "{header}")?;
        let mut cols = String::from("re_beta,im_beta,value");
        if self.stat_err.is_some() {
            cols.push_str(",stat_err");
        }
        if self.sys_err.is_some() {
            cols.push_str(",sys_err");
        }
        writeln!(out, "# columns: {}", cols.replace(',', " "))?;
        writeln!(out, "{cols}")?;
        for (i, b) in self.points().iter().enumerate() {
            let mut row = format!("{:.16e},{:.16e},{:.16e}", b.re, b.im, self.values[i]);
            if let Some(e) = &self.stat_err {
                write!(row, ",{:.16e}", e[i]).unwrap();
            }
            if let Some(e) = &self.sys_err {
                write!(row, ",{:.16e}", e[i]).unwrap();
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<QuasiprobGrid> {
        let mut lines = input.lines().enumerate();
        let mut next = || -> Result<Option<(usize, String)>> {
            match lines.next() {
                Some((i, l)) => Ok(Some((i + 1, l?))),
                None => Ok(None),
            }
        };
        let (lno, header) = next()?.ok_or_else(|| Error::Parse { line: 1, msg: "empty grid file".into() })?;
        let body = header
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse { line: lno, msg: "missing `#` header".into() })?;
        let mut fields: Vec<(&str, &str)> = Vec::new();
        for tok in body.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: lno, msg: format!("bad header field `{tok}`") })?;
            fields.push((k, v));
        }
        let field = |k: &str| {
            fields
                .iter()
                .find(|(key, _)| *key == k)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Parse { line: lno, msg: format!("header lacks `{k}`") })
        };
        let num = |k: &str| -> Result<f64> {
            let v = field(k)?;
            v.parse().map_err(|_| Error::Parse { line: lno, msg: format!("`{k}` is not a number: `{v}`") })
        };
        let count = |k: &str| -> Result<usize> {
            let v = field(k)?;
            v.parse().map_err(|_| Error::Parse { line: lno, msg: format!("`{k}` is not a count: `{v}`") })
        };
        let source = field("source")?.to_string();
        let width = num("w")?;
        let layout = if fields.iter().any(|&(k, v)| k == "layout" && v == "radial") {
            GridLayout::Radial { r_max: num("r_max")?, n: count("nr")? }
        } else {
            let (nx, ny) = (count("nx")?, count("ny")?);
            if nx != ny {
                return Err(Error::Parse { line: lno, msg: "only square grids are supported".into() });
            }
            let center = match fields.iter().find(|(k, _)| *k == "center") {
                Some((_, v)) => {
                    let (re, im) = v.split_once(',').ok_or_else(|| Error::Parse {
                        line: lno,
                        msg: "center must be `re,im`".into(),
                    })?;
                    let parse = |s: &str| {
                        s.parse::<f64>().map_err(|_| Error::Parse { line: lno, msg: format!("bad center `{v}`") })
                    };
                    C64::new(parse(re)?, parse(im)?)
                }
                None => C64::new(0.0, 0.0),
            };
            GridLayout::Square { center, half_width: num("half_width")?, n: nx }
        };
        layout.validate().map_err(|e| Error::Parse { line: lno, msg: e.to_string() })?;

        let mut columns: Option<Vec<String>> = None;
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(layout.len());
        while let Some((lno, line)) = next()? {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if columns.is_none() {
                let cols: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
                if cols.len() < 3 || cols[..3] != ["re_beta", "im_beta", "value"] {
                    return Err(Error::Parse { line: lno, msg: format!("unexpected columns `{line}`") });
                }
                columns = Some(cols);
                continue;
            }
            let ncols = columns.as_ref().unwrap().len();
            let row: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse { line: lno, msg: format!("non-numeric row `{line}`") })?;
            if row.len() != ncols {
                return Err(Error::Parse { line: lno, msg: format!("expected {ncols} fields, got {}", row.len()) });
            }
            rows.push(row);
        }
        let columns = columns.ok_or_else(|| Error::Format("grid file has no column line".into()))?;
        if rows.len() != layout.len() {
            return Err(Error::Format(format!("expected {} rows, found {}", layout.len(), rows.len())));
        }
        let col = |name: &str| -> Option<Vec<f64>> {
            columns.iter().position(|c| c == name).map(|j| rows.iter().map(|r| r[j]).collect())
        };
        Ok(QuasiprobGrid {
            layout,
            values: col("value").unwrap(),
            stat_err: col("stat_err"),
            sys_err: col("sys_err"),
            width,
            source,
        })
    }
}

/// A characteristic function handed to the Fourier integral.
pub struct CfSource<'a> {
    pub eval: &'a (dyn Fn(C64) -> C64 + Sync),
    /// Rough phase-space radius of the state, used to pick angular nodes.
    pub scale: f64,
    pub phase_insensitive: bool,
    pub label: String,
}

/// Phase-space radius for angular resolution: centroid plus a few widths.
fn state_scale(out: &OutputState) -> Result<f64> {
    Ok(out.amplitude_scale() + 3.0 * (out.mean_photon_number()? + 1.0).sqrt())
}

fn angular_nodes(b_max: f64, beta_max: f64, scale: f64) -> usize {
    let bandwidth = 2.0 * b_max * (beta_max + scale);
    let m = (bandwidth + 48.0).ceil() as usize;
    m.div_ceil(4) * 4
}

fn radial_rule(f: &FilterSpec, freq: f64) -> Rule {
    let panel = (4.0 / freq.max(1e-3)).min(0.5);
    f.radial_rule(panel, 12)
}

fn check_resolution(f: &FilterSpec, layout: &GridLayout) -> Result<()> {
    let limit = PI / (2.0 * f.b_max());
    let h = layout.spacing();
    if matches!(layout, GridLayout::Square { .. }) && h > limit {
        return Err(Error::Resolution(format!(
            "grid spacing {h:.4} exceeds pi/(2 b_max) = {limit:.4} for w = {}",
            f.width()
        )));
    }
    Ok(())
}

/// Filtered quasiprobability of an arbitrary characteristic function.
pub fn nqd_from_cf(src: &CfSource, f: &FilterSpec, layout: &GridLayout) -> Result<QuasiprobGrid> {
    nqd_with_path(src, f, layout, false)
}

fn nqd_with_path(src: &CfSource, f: &FilterSpec, layout: &GridLayout, force_polar: bool) -> Result<QuasiprobGrid> {
    layout.validate()?;
    check_resolution(f, layout)?;
    let beta_max = layout.max_modulus();
    let values = match layout {
        GridLayout::Radial { .. } => bessel_path(src, f, &layout.axis(), beta_max)?,
        GridLayout::Square { .. } if src.phase_insensitive && !force_polar => {
            let radii: Vec<f64> = layout.points().iter().map(|b| b.norm()).collect();
            bessel_path(src, f, &radii, beta_max)?
        }
        GridLayout::Square { center, n, .. } => polar_path(src, f, *center, &layout.axis(), *n, beta_max)?,
    };
    Ok(QuasiprobGrid {
        layout: *layout,
        values,
        stat_err: None,
        sys_err: None,
        width: f.width(),
        source: src.label.clone(),
    })
}

/// `(2/pi) int b Omega(b) Phibar(b) J0(2 r b) db`, where `Phibar` is the
/// angular mean of `Phi` (equal to `Phi` for phase-insensitive sources).
fn bessel_path(src: &CfSource, f: &FilterSpec, radii: &[f64], r_max: f64) -> Result<Vec<f64>> {
    let rule = radial_rule(f, 2.0 * r_max + 2.0 * src.scale);
    let m = if src.phase_insensitive { 1 } else { angular_nodes(f.b_max(), 0.0, src.scale) };
    let mut coef = Vec::with_capacity(rule.len());
    for (&b, &w) in rule.nodes.iter().zip(&rule.weights) {
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..m {
            acc += (src.eval)(C64::from_polar(b, 2.0 * PI * k as f64 / m as f64));
        }
        let phibar = acc / m as f64;
        if phibar.im.abs() > MAX_IMAG_RESIDUE * phibar.norm().max(1.0) {
            return Err(Error::Numerical(format!(
                "angular mean of the characteristic function is complex ({:.2e}) at |xi| = {b:.3}",
                phibar.im
            )));
        }
        coef.push((b, 2.0 / PI * w * b * f.value_unchecked(b) * phibar.re));
    }
    Ok(radii
        .par_iter()
        .map(|&r| {
            let terms: Vec<f64> = coef.iter().map(|&(b, c)| c * j0(2.0 * r * b)).collect();
            pairwise_sum(&terms)
        })
        .collect())
}

/// Full polar quadrature on a square grid. Along a row the kernel advances
/// by a fixed per-node phase, so each point costs one complex multiply per
/// node.
fn polar_path(
    src: &CfSource,
    f: &FilterSpec,
    center: C64,
    axis: &[f64],
    n: usize,
    beta_max: f64,
) -> Result<Vec<f64>> {
    let rule = radial_rule(f, 2.0 * beta_max + 2.0 * src.scale);
    let m = angular_nodes(f.b_max(), beta_max, src.scale);
    let dtheta = 2.0 * PI / m as f64;
    let mut nodes: Vec<(C64, C64)> = Vec::with_capacity(rule.len() * m);
    for (&b, &w) in rule.nodes.iter().zip(&rule.weights) {
        let radial = w * b * f.value_unchecked(b) * dtheta / (PI * PI);
        if radial == 0.0 {
            continue;
        }
        for k in 0..m {
            let xi = C64::from_polar(b, k as f64 * dtheta);
            nodes.push((xi, (src.eval)(xi) * radial));
        }
    }
    let du = axis[1] - axis[0];
    // exp(beta xi* - beta* xi) = exp(2i (v x - u y)) for beta = u + iv, xi = x + iy
    let step: Vec<C64> = nodes.iter().map(|(xi, _)| C64::from_polar(1.0, -2.0 * du * xi.im)).collect();
    let rows: Vec<Result<Vec<f64>>> = axis
        .par_iter()
        .map(|&y| {
            let v = center.im + y;
            let u0 = center.re + axis[0];
            let mut cur: Vec<C64> = nodes
                .iter()
                .map(|(xi, c)| c * C64::from_polar(1.0, 2.0 * (v * xi.re - u0 * xi.im)))
                .collect();
            let mut row = Vec::with_capacity(n);
            let mut re = vec![0.0; cur.len()];
            let mut im = vec![0.0; cur.len()];
            for ix in 0..n {
                if ix > 0 {
                    for (c, s) in cur.iter_mut().zip(&step) {
                        *c *= s;
                    }
                }
                for (k, c) in cur.iter().enumerate() {
                    re[k] = c.re;
                    im[k] = c.im;
                }
                let value = pairwise_sum(&re);
                let residue = pairwise_sum(&im);
                if residue.abs() > MAX_IMAG_RESIDUE {
                    return Err(Error::Numerical(format!(
                        "imaginary residue {residue:.2e} at beta = {}",
                        C64::new(u0 + ix as f64 * du, v)
                    )));
                }
                row.push(value);
            }
            Ok(row)
        })
        .collect();
    let mut values = Vec::with_capacity(n * n);
    for row in rows {
        values.extend(row?);
    }
    Ok(values)
}

fn output_source<'a>(out: &OutputState, cf: &'a (dyn Fn(C64) -> C64 + Sync), label: String) -> Result<CfSource<'a>> {
    Ok(CfSource { eval: cf, scale: state_scale(out)?, phase_insensitive: out.is_phase_insensitive(), label })
}

/// Filtered quasiprobability of a process output or any other output state.
pub fn nqd_direct_output(out: &OutputState, f: &FilterSpec, layout: &GridLayout) -> Result<QuasiprobGrid> {
    let cf = out.char_fn()?;
    let eval = move |xi: C64| cf.eval(xi);
    nqd_from_cf(&output_source(out, &eval, out.to_string())?, f, layout)
}

/// Filtered quasiprobability of a state.
pub fn nqd_direct(s: &StateModel, f: &FilterSpec, layout: &GridLayout) -> Result<QuasiprobGrid> {
    nqd_direct_output(&OutputState::State(s.clone()), f, layout)
}

/// Filtered quasiprobability of the normalized output for a coherent input.
pub fn pnqd_direct(p: &ProcessModel, alpha: C64, f: &FilterSpec, layout: &GridLayout) -> Result<QuasiprobGrid> {
    let out = p.apply_to_coherent(alpha)?;
    let mut grid = nqd_direct_output(&out.state, f, layout)?;
    grid.source = pnqd_label(p, alpha);
    Ok(grid)
}

pub(crate) fn pnqd_label(p: &ProcessModel, alpha: C64) -> String {
    format!("pnqd({p};alpha={},{})", alpha.re, alpha.im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::unit_filter_with_derivative;
    use std::sync::OnceLock;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn filter(w: f64) -> &'static FilterSpec {
        static F12: OnceLock<FilterSpec> = OnceLock::new();
        static F15: OnceLock<FilterSpec> = OnceLock::new();
        match w {
            1.2 => F12.get_or_init(|| FilterSpec::build(1.2, 1e-8).unwrap()),
            1.5 => F15.get_or_init(|| FilterSpec::build(1.5, 1e-8).unwrap()),
            _ => unreachable!(),
        }
    }

    fn force_polar(s: &StateModel, f: &FilterSpec, layout: &GridLayout) -> QuasiprobGrid {
        let out = OutputState::State(s.clone());
        let cf = s.char_fn().unwrap();
        let eval = move |xi: C64| cf.eval(xi);
        let src = output_source(&out, &eval, s.to_string()).unwrap();
        nqd_with_path(&src, f, layout, true).unwrap()
    }

    #[test]
    fn vacuum_is_the_filter_transform() {
        let f = filter(1.2);
        let g = nqd_direct(&StateModel::vacuum(), f, &GridLayout::square(4.0, 41)).unwrap();
        let radii: Vec<f64> = g.points().iter().map(|b| b.norm()).collect();
        let ft = f.fourier(&radii).unwrap();
        for (a, b) in g.values.iter().zip(&ft) {
            assert!((a - b).abs() < 1e-10);
        }
        let scan = g.negativity_scan(DEFAULT_SIGNIFICANCE).unwrap();
        assert!(scan.min_value >= -NUMERICAL_ZERO);
        assert!(!scan.nonclassical);
        let peak = g.values.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(peak, g.values[g.values.len() / 2]);
    }

    #[test]
    fn single_photon_at_origin() {
        // independent: (2/pi) int b (1 - b^2) Omega(b) db from the untabulated filter
        let w = 1.2;
        let rule = Rule::composite_gauss_legendre(0.0, 12.0, 240, 16);
        let oracle = 2.0 / PI * rule.integrate(|b| b * (1.0 - b * b) * unit_filter_with_derivative(b / w).0);
        assert!((oracle - -0.358971072812885).abs() < 1e-9, "{oracle}");
        let g = nqd_direct(&StateModel::Fock(1), filter(w), &GridLayout::square(2.0, 41)).unwrap();
        let centre = g.values[g.values.len() / 2];
        assert!((centre - oracle).abs() < 1e-8, "{centre} vs {oracle}");
        let scan = g.negativity_scan(DEFAULT_SIGNIFICANCE).unwrap();
        assert!(scan.nonclassical);
        assert!(scan.argmin.norm() < 1e-12);
    }

    #[test]
    fn polar_and_bessel_paths_agree() {
        let f = filter(1.2);
        let layout = GridLayout::square(3.0, 21);
        for s in [StateModel::Fock(2), StateModel::Thermal(0.8), StateModel::added(StateModel::Thermal(0.5))] {
            let fast = nqd_direct(&s, f, &layout).unwrap();
            let slow = force_polar(&s, f, &layout);
            for (a, b) in fast.values.iter().zip(&slow.values) {
                assert!((a - b).abs() < 1e-9, "{s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn angular_resolution_is_converged() {
        let f = filter(1.5);
        let s = StateModel::Cat(c(2.0, 0.0));
        let layout = GridLayout::square(4.0, 33);
        let base = force_polar(&s, f, &layout);
        let out = OutputState::State(s.clone());
        let cf = s.char_fn().unwrap();
        let eval = move |xi: C64| cf.eval(xi);
        let mut src = output_source(&out, &eval, String::new()).unwrap();
        src.scale *= 2.0;
        let fine = nqd_with_path(&src, f, &layout, true).unwrap();
        for (a, b) in base.values.iter().zip(&fine.values) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn mass_is_one() {
        let f = filter(1.2);
        let layout = GridLayout::square(7.0, 121);
        for s in [
            StateModel::vacuum(),
            StateModel::Fock(3),
            StateModel::Thermal(1.0),
            StateModel::SqueezedVacuum { vx: 0.5, vp: 3.0 },
            StateModel::Cat(c(1.5, 0.5)),
            StateModel::added(StateModel::Coherent(c(0.7, 0.3))),
        ] {
            let g = nqd_direct(&s, f, &layout).unwrap();
            assert!((g.mass() - 1.0).abs() < 0.02, "{s}: {}", g.mass());
        }
    }

    #[test]
    fn displacement_covariance() {
        let f = filter(1.2);
        let alpha = c(0.8, -0.5);
        let at = GridLayout::Square { center: alpha, half_width: 3.0, n: 31 };
        let shifted = nqd_direct(&StateModel::Coherent(alpha), f, &at).unwrap();
        let vacuum = nqd_direct(&StateModel::vacuum(), f, &GridLayout::square(3.0, 31)).unwrap();
        for (a, b) in shifted.values.iter().zip(&vacuum.values) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn phase_insensitive_states_are_radial() {
        let f = filter(1.2);
        let layout = GridLayout::square(3.0, 25);
        let radial = GridLayout::radial(5.0, 2);
        for s in [StateModel::Thermal(0.4), StateModel::Fock(2)] {
            let g = force_polar(&s, f, &layout);
            let radii: Vec<f64> = g.points().iter().map(|b| b.norm()).collect();
            let src_cf = s.char_fn().unwrap();
            let eval = move |xi: C64| src_cf.eval(xi);
            let out = OutputState::State(s.clone());
            let src = output_source(&out, &eval, String::new()).unwrap();
            let expect = bessel_path(&src, f, &radii, radial.max_modulus()).unwrap();
            for (a, b) in g.values.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn radial_grid_is_circle_average() {
        let f = filter(1.2);
        let s = StateModel::added(StateModel::Coherent(c(0.6, 0.0)));
        let radial = nqd_direct(&s, f, &GridLayout::radial(2.0, 5)).unwrap();
        let out = OutputState::State(s.clone());
        let cf = s.char_fn().unwrap();
        let eval = move |xi: C64| cf.eval(xi);
        let src = output_source(&out, &eval, String::new()).unwrap();
        for (i, r) in GridLayout::radial(2.0, 5).axis().into_iter().enumerate() {
            let m = 64;
            let direct: f64 = (0..m)
                .map(|k| {
                    // first point of a tiny grid sits at center - h (1 + i)
                    let beta = C64::from_polar(r, 2.0 * PI * k as f64 / m as f64) + c(0.05, 0.05);
                    let layout = GridLayout::Square { center: beta, half_width: 0.05, n: 2 };
                    nqd_with_path(&src, f, &layout, true).unwrap().values[0]
                })
                .sum::<f64>()
                / m as f64;
            assert!((radial.values[i] - direct).abs() < 1e-8, "r={r}: {} vs {direct}", radial.values[i]);
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let f = filter(1.5);
        let err = nqd_direct(&StateModel::vacuum(), f, &GridLayout::square(4.0, 11)).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)));
        assert!(err.is_numerical());
    }

    #[test]
    fn pnqd_examples() {
        let f = filter(1.2);
        let layout = GridLayout::square(3.0, 31);
        let added = pnqd_direct(&ProcessModel::PhotonAddition, c(0.0, 0.0), f, &layout).unwrap();
        let fock = nqd_direct(&StateModel::Fock(1), f, &layout).unwrap();
        for (a, b) in added.values.iter().zip(&fock.values) {
            assert!((a - b).abs() < 1e-12);
        }
        let sub = pnqd_direct(&ProcessModel::PhotonSubtraction, c(1.0, 0.0), f, &layout).unwrap();
        let coh = nqd_direct(&StateModel::Coherent(c(1.0, 0.0)), f, &layout).unwrap();
        assert_eq!(sub.values, coh.values);
        assert!(sub.negativity_scan(3.0).unwrap().min_value >= -1e-8);
        assert!(matches!(
            pnqd_direct(&ProcessModel::PhotonSubtraction, c(0.0, 0.0), f, &layout),
            Err(Error::ZeroWeight(_))
        ));
    }

    #[test]
    fn kerr_cat_is_negative() {
        let f = filter(1.5);
        let g = pnqd_direct(&ProcessModel::KerrCat, c(2.0, 0.0), f, &GridLayout::square(4.0, 41)).unwrap();
        assert!(g.negativity_scan(3.0).unwrap().min_value < -1e-3);
    }

    #[test]
    fn addition_witness_across_widths() {
        for w in [1.0, 1.25, 1.5] {
            let f = FilterSpec::build(w, 1e-8).unwrap();
            let g = pnqd_direct(&ProcessModel::PhotonAddition, c(0.0, 0.0), &f, &GridLayout::square(2.0, 21)).unwrap();
            assert!(g.negativity_scan(3.0).unwrap().min_value < 0.0);
        }
    }

    #[test]
    fn significance_arithmetic() {
        let g = QuasiprobGrid {
            layout: GridLayout::radial(1.0, 2),
            values: vec![-0.02, 0.1],
            stat_err: Some(vec![0.004, 0.01]),
            sys_err: None,
            width: 1.2,
            source: "test".into(),
        };
        let scan = g.negativity_scan(3.0).unwrap();
        assert!((scan.significance.unwrap() - 5.0).abs() < 1e-12);
        assert!(scan.nonclassical);
        assert!(!g.negativity_scan(6.0).unwrap().nonclassical);
    }

    #[test]
    fn csv_round_trip() {
        let f = filter(1.2);
        for layout in [
            GridLayout::Square { center: c(0.5, -0.25), half_width: 1.0, n: 9 },
            GridLayout::radial(2.0, 7),
        ] {
            let mut g = nqd_direct(&StateModel::Fock(1), f, &layout).unwrap();
            g.stat_err = Some(vec![0.125; g.values.len()]);
            let mut buf = Vec::new();
            g.write_csv(&mut buf).unwrap();
            let back = QuasiprobGrid::read_csv(buf.as_slice()).unwrap();
            assert_eq!(back, g);
        }
    }

    #[test]
    fn csv_errors_name_lines() {
        let text = "# source=x w=1.2 nx=2 ny=2 half_width=1\nre_beta,im_beta,value\n0,0,1\n0,0,oops\n";
        match QuasiprobGrid::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let text = "# source=x nx=2 ny=2 half_width=1\n";
        assert!(matches!(QuasiprobGrid::read_csv(text.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }
}
