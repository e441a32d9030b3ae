//! Output quasiprobabilities for classical inputs.
//!
//! A process acts linearly on the P function, so for a classical input
//! `P_out(beta) = int d^2 alpha P_in(alpha) Tr E(|alpha><alpha|) P(beta|alpha) / <weight>`.
//! [`predict_output_nqd`] evaluates this integral over a table of
//! conditional grids; [`parseval_output_nqd`] works with the input
//! characteristic function instead and so also covers inputs whose P
//! function is singular.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::estimator::PnqdTable;
use crate::filters::FilterSpec;
use crate::numeric::{trapezoid_weights, NaturalSpline, Rule};
use crate::processes::{decohere_with, OutputState, ProcessModel};
use crate::quasiprob::{nqd_from_cf, CfSource, GridLayout, QuasiprobGrid};
use crate::states::{parse_params, require, StateModel};

/// Smallest share of the input distribution the table must cover.
pub const MIN_COVERAGE: f64 = 0.99;

/// Amplitudes closer than this are the same table node.
const NODE_TOL: f64 = 1e-12;

/// P function of a classical input.
#[derive(Debug, Clone, PartialEq)]
pub enum InputPSpec {
    /// `P(alpha) = exp(-|alpha|^2 / nbar) / (pi nbar)`; the vacuum at `nbar = 0`.
    ThermalRadial { nbar: f64 },
    CoherentDelta(C64),
    /// Point masses `(alpha, probability)`.
    DiscreteMixture(Vec<(C64, f64)>),
}

impl InputPSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            InputPSpec::ThermalRadial { nbar } => {
                if !(*nbar >= 0.0 && nbar.is_finite()) {
                    return Err(Error::param(format!("thermal nbar must be >= 0, got {nbar}")));
                }
            }
            InputPSpec::CoherentDelta(a) => {
                if !(a.re.is_finite() && a.im.is_finite()) {
                    return Err(Error::param("coherent amplitude must be finite"));
                }
            }
            InputPSpec::DiscreteMixture(parts) => {
                if parts.is_empty() {
                    return Err(Error::param("mixture needs at least one component"));
                }
                if parts.iter().any(|(a, p)| !(*p >= 0.0) || !a.re.is_finite() || !a.im.is_finite()) {
                    return Err(Error::param("mixture weights must be nonnegative and amplitudes finite"));
                }
                let total: f64 = parts.iter().map(|(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::param(format!("mixture weights sum to {total}, not 1")));
                }
            }
        }
        Ok(())
    }

    pub fn mean_photon_number(&self) -> f64 {
        match self {
            InputPSpec::ThermalRadial { nbar } => *nbar,
            InputPSpec::CoherentDelta(a) => a.norm_sqr(),
            InputPSpec::DiscreteMixture(parts) => parts.iter().map(|(a, p)| p * a.norm_sqr()).sum(),
        }
    }

    /// `int d^2 alpha P(alpha) weight(|alpha|)`, the normalization of the output.
    pub fn mean_weight(&self, weight: &dyn Fn(f64) -> f64) -> f64 {
        match self {
            InputPSpec::ThermalRadial { nbar } if *nbar == 0.0 => weight(0.0),
            InputPSpec::ThermalRadial { nbar } => {
                let rule = Rule::with_max_panel(0.0, (40.0 * nbar).sqrt(), 0.1 * nbar.sqrt(), 12);
                rule.integrate(|a| 2.0 * a / nbar * (-a * a / nbar).exp() * weight(a))
            }
            InputPSpec::CoherentDelta(a) => weight(a.norm()),
            InputPSpec::DiscreteMixture(parts) => parts.iter().map(|(a, p)| p * weight(a.norm())).sum(),
        }
    }
}

impl fmt::Display for InputPSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputPSpec::ThermalRadial { nbar } => write!(f, "thermal:nbar={nbar}"),
            InputPSpec::CoherentDelta(a) => write!(f, "coherent:re={},im={}", a.re, a.im),
            InputPSpec::DiscreteMixture(parts) => {
                write!(f, "mixture:")?;
                for (i, (a, p)) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{},{},{}", a.re, a.im, p)?;
                }
                Ok(())
            }
        }
    }
}

/// `thermal:nbar=`, `vacuum`, `coherent:re=,im=`, or
/// `mixture:re,im,p;re,im,p;...`.
impl FromStr for InputPSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<InputPSpec> {
        let s = s.trim();
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        let spec = match kind {
            "vacuum" => {
                parse_params(body, &[])?;
                InputPSpec::ThermalRadial { nbar: 0.0 }
            }
            "thermal" => InputPSpec::ThermalRadial { nbar: require(&parse_params(body, &["nbar"])?, "nbar", kind)? },
            "coherent" => {
                let p = parse_params(body, &["re", "im"])?;
                InputPSpec::CoherentDelta(C64::new(require(&p, "re", kind)?, crate::states::get(&p, "im").unwrap_or(0.0)))
            }
            "mixture" => {
                let mut parts = Vec::new();
                for item in body.split(';') {
                    let nums: Vec<f64> = item
                        .split(',')
                        .map(|v| v.trim().parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::param(format!("bad mixture component `{item}`")))?;
                    if nums.len() != 3 {
                        return Err(Error::param(format!("mixture component `{item}` is not `re,im,p`")));
                    }
                    parts.push((C64::new(nums[0], nums[1]), nums[2]));
                }
                InputPSpec::DiscreteMixture(parts)
            }
            _ => return Err(Error::param(format!("unknown input `{kind}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// `P_out` as two linear functionals over the table grids: the primary
/// (trapezoid or linear interpolation) and the cubic-spline alternative.
struct Functional {
    primary: Vec<f64>,
    spline: Vec<f64>,
}

impl Functional {
    fn zeros(n: usize) -> Functional {
        Functional { primary: vec![0.0; n], spline: vec![0.0; n] }
    }

    fn add_scaled(&mut self, other: &Functional, s: f64) {
        for (a, b) in self.primary.iter_mut().zip(&other.primary) {
            *a += s * b;
        }
        for (a, b) in self.spline.iter_mut().zip(&other.spline) {
            *a += s * b;
        }
    }
}

/// `c_j` with `int s(x) dx = sum_j c_j y_j` for the natural spline `s`.
fn spline_integral_weights(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut e = vec![0.0; x.len()];
            e[j] = 1.0;
            NaturalSpline::new(x, &e).integral()
        })
        .collect()
}

fn spline_eval_weights(x: &[f64], t: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut e = vec![0.0; x.len()];
            e[j] = 1.0;
            NaturalSpline::new(x, &e).eval(t)
        })
        .collect()
}

/// Grid of the table for a single input amplitude, possibly between nodes.
fn delta_functional(table: &PnqdTable, alpha: C64) -> Result<Functional> {
    let n = table.alphas.len();
    let mut out = Functional::zeros(n);
    if !table.phase_randomized {
        let j = table
            .alphas
            .iter()
            .position(|b| (b - alpha).norm() <= NODE_TOL)
            .ok_or_else(|| Error::param(format!("phase-sensitive table has no entry at alpha = {alpha}")))?;
        out.primary[j] = 1.0;
        out.spline[j] = 1.0;
        return Ok(out);
    }
    let amps = table.amplitudes();
    let a = alpha.norm();
    if let Some(j) = amps.iter().position(|&b| (b - a).abs() <= NODE_TOL) {
        out.primary[j] = 1.0;
        out.spline[j] = 1.0;
        return Ok(out);
    }
    if a < amps[0] || a > amps[n - 1] {
        return Err(Error::Coverage { missing: 1.0, max_amplitude: amps[n - 1] });
    }
    let k = amps.partition_point(|&b| b < a);
    let t = (a - amps[k - 1]) / (amps[k] - amps[k - 1]);
    out.primary[k - 1] = 1.0 - t;
    out.primary[k] = t;
    if n > 2 {
        out.spline = spline_eval_weights(&amps, a);
    } else {
        out.spline = out.primary.clone();
    }
    Ok(out)
}

fn thermal_functional(table: &PnqdTable, nbar: f64, weight: &dyn Fn(f64) -> f64) -> Result<Functional> {
    if !table.phase_randomized {
        return Err(Error::param("a phase-insensitive input needs a phase-randomized table"));
    }
    let amps = table.amplitudes();
    let a_max = *amps.last().unwrap();
    let missing = (-a_max * a_max / nbar).exp();
    if missing > 1.0 - MIN_COVERAGE {
        return Err(Error::Coverage { missing, max_amplitude: a_max });
    }
    let max_gap = amps.windows(2).map(|w| w[1] - w[0]).fold(amps[0], f64::max);
    if max_gap > nbar.sqrt() {
        return Err(Error::Resolution(format!(
            "amplitude spacing {max_gap:.3} exceeds the input width {:.3}",
            nbar.sqrt()
        )));
    }
    // the integrand carries a factor a, so a node at zero contributes nothing
    let head = usize::from(amps[0] > 0.0);
    let mut knots = Vec::with_capacity(amps.len() + head);
    if head == 1 {
        knots.push(0.0);
    }
    knots.extend_from_slice(&amps);
    let trap = trapezoid_weights(&knots);
    let spline = if knots.len() > 2 { spline_integral_weights(&knots) } else { trap.clone() };
    let mut out = Functional::zeros(amps.len());
    for (j, &a) in amps.iter().enumerate() {
        let density = (-a * a / nbar).exp() / (PI * nbar);
        let factor = 2.0 * PI * a * density * weight(a);
        out.primary[j] = trap[j + head] * factor;
        out.spline[j] = spline[j + head] * factor;
    }
    Ok(out)
}

/// Predicts the output grid for a classical input from a table of
/// conditional grids. `process_weight(|alpha|)` is the trace of the
/// unnormalized output for a coherent input.
///
/// Values use the trapezoid rule over the table amplitudes (linear
/// interpolation for point inputs between nodes); `sys_err` is its
/// distance from the natural-spline alternative and `stat_err` is the
/// table error propagated through the same weights.
pub fn predict_output_nqd(
    table: &PnqdTable,
    input: &InputPSpec,
    process_weight: &dyn Fn(f64) -> f64,
) -> Result<QuasiprobGrid> {
    input.validate()?;
    let norm = input.mean_weight(process_weight);
    if !(norm > 0.0) {
        return Err(Error::ZeroWeight(format!("the process never fires on input {input}")));
    }
    let n = table.alphas.len();
    let func = match input {
        InputPSpec::ThermalRadial { nbar } if *nbar == 0.0 => {
            let mut d = delta_functional(table, C64::new(0.0, 0.0))?;
            let w = process_weight(0.0);
            d.primary.iter_mut().chain(d.spline.iter_mut()).for_each(|c| *c *= w);
            d
        }
        InputPSpec::ThermalRadial { nbar } => thermal_functional(table, *nbar, process_weight)?,
        InputPSpec::CoherentDelta(a) => {
            let mut d = delta_functional(table, *a)?;
            let w = process_weight(a.norm());
            d.primary.iter_mut().chain(d.spline.iter_mut()).for_each(|c| *c *= w);
            d
        }
        InputPSpec::DiscreteMixture(parts) => {
            let mut acc = Functional::zeros(n);
            for (a, p) in parts {
                if *p > 0.0 {
                    acc.add_scaled(&delta_functional(table, *a)?, p * process_weight(a.norm()));
                }
            }
            acc
        }
    };

    let len = table.grids[0].values.len();
    let mut values = vec![0.0; len];
    let mut sys = vec![0.0; len];
    let sampled = table.grids.iter().any(|g| g.stat_err.is_some());
    let mut stat = vec![0.0; len];
    for i in 0..len {
        let (mut v, mut s, mut var, mut inherited) = (0.0, 0.0, 0.0, 0.0);
        for (j, g) in table.grids.iter().enumerate() {
            let (cp, cs) = (func.primary[j] / norm, func.spline[j] / norm);
            v += cp * g.values[i];
            s += cs * g.values[i];
            if let Some(e) = &g.stat_err {
                var += (cp * e[i]).powi(2);
            }
            if let Some(e) = &g.sys_err {
                inherited += cp.abs() * e[i];
            }
        }
        values[i] = v;
        sys[i] = (v - s).abs() + inherited;
        stat[i] = var.sqrt();
    }
    Ok(QuasiprobGrid {
        layout: table.layout(),
        values,
        stat_err: sampled.then_some(stat),
        sys_err: Some(sys),
        width: table.width,
        source: format!("predicted({input})"),
    })
}

/// Output grid from the input characteristic function.
///
/// Photon addition and subtraction act on `Phi_in` as the differential
/// operators of `a^dag rho a` and `a rho a^dag`, evaluated here by finite
/// differences so that any characteristic function works; the output is
/// normalized by the mean weight as in [`predict_output_nqd`]. The Kerr
/// output needs the full input characteristic function through
/// `int d^2 nu chi(nu) sin(Im(xi nu*))`, tabulated once per call.
pub fn parseval_output_nqd(
    process: &ProcessModel,
    input: &StateModel,
    f: &FilterSpec,
    layout: &GridLayout,
) -> Result<QuasiprobGrid> {
    process.validate()?;
    let cf = input.char_fn()?;
    let phi = |xi: C64| cf.eval(xi);
    let n_in = input.mean_photon_number()?;
    let amp = OutputState::State(input.clone()).amplitude_scale();
    let kerr = match process {
        ProcessModel::KerrCat => Some(KerrTable::build(&phi, f.b_max())?),
        _ => None,
    };
    let (eval, n_out): (Box<dyn Fn(C64) -> C64 + Sync + '_>, f64) = match *process {
        ProcessModel::PhotonAddition => {
            let weight = 1.0 - wirtinger_laplacian(&phi, C64::new(0.0, 0.0)).re;
            (Box::new(move |xi| raise_fd(&phi, xi) / weight), 2.0 * n_in + 1.0)
        }
        ProcessModel::PhotonSubtraction => {
            let weight = -wirtinger_laplacian(&phi, C64::new(0.0, 0.0)).re;
            if weight < 1e-10 {
                return Err(Error::ZeroWeight(format!("photon subtraction from {input}")));
            }
            (Box::new(move |xi| -wirtinger_laplacian(&phi, xi) / weight), 2.0 * n_in)
        }
        ProcessModel::ThermalDecoherence { nbar, gt } => {
            (Box::new(move |xi| decohere_with(nbar, gt, phi, xi)), n_in + nbar)
        }
        ProcessModel::KerrCat => {
            let kerr = kerr.as_ref().unwrap();
            (
                Box::new(move |xi: C64| {
                    let sym = 0.5 * (phi(xi) + phi(-xi));
                    sym - kerr.eval(xi) * (0.5 * xi.norm_sqr()).exp() / (2.0 * PI)
                }),
                n_in,
            )
        }
    };
    let src = CfSource {
        eval: &*eval,
        scale: amp + 3.0 * (n_out + 1.0).sqrt(),
        phase_insensitive: input.is_phase_insensitive(),
        label: format!("parseval({process};{input})"),
    };
    nqd_from_cf(&src, f, layout)
}

/// Step for finite differences at `xi`; shrinks where `Phi` varies fast.
fn fd_step(xi: C64) -> f64 {
    0.02 / (1.0 + xi.norm())
}

/// Fourth-order central first and second derivatives along `dir`.
fn fd_derivs(phi: &dyn Fn(C64) -> C64, xi: C64, dir: C64) -> (C64, C64) {
    let h = fd_step(xi);
    let p1 = phi(xi + dir * h);
    let m1 = phi(xi - dir * h);
    let p2 = phi(xi + dir * (2.0 * h));
    let m2 = phi(xi - dir * (2.0 * h));
    let c = phi(xi);
    let d1 = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
    let d2 = (16.0 * (p1 + m1) - (p2 + m2) - 30.0 * c) / (12.0 * h * h);
    (d1, d2)
}

/// `d dbar Phi = (Phi_xx + Phi_yy) / 4`.
fn wirtinger_laplacian(phi: &dyn Fn(C64) -> C64, xi: C64) -> C64 {
    let (_, xx) = fd_derivs(phi, xi, C64::new(1.0, 0.0));
    let (_, yy) = fd_derivs(phi, xi, C64::new(0.0, 1.0));
    0.25 * (xx + yy)
}

/// `-d dbar Phi + z d Phi + zb dbar Phi + (1 - z zb) Phi`.
fn raise_fd(phi: &dyn Fn(C64) -> C64, xi: C64) -> C64 {
    let (dx, xx) = fd_derivs(phi, xi, C64::new(1.0, 0.0));
    let (dy, yy) = fd_derivs(phi, xi, C64::new(0.0, 1.0));
    let i = C64::new(0.0, 1.0);
    let d = 0.5 * (dx - i * dy);
    let db = 0.5 * (dx + i * dy);
    -0.25 * (xx + yy) + xi * d + xi.conj() * db + (1.0 - xi.norm_sqr()) * phi(xi)
}

/// `F(xi) = int d^2 nu chi(nu) sin(Im(xi nu*))` with
/// `chi = Phi exp(-|nu|^2/2)`, on a uniform grid with local Lagrange
/// interpolation.
struct KerrTable {
    lo: f64,
    h: f64,
    k: usize,
    values: DMatrix<C64>,
}

const KERR_STEP: f64 = 0.05;
const KERR_STENCIL: usize = 8;
const NU_MAX: f64 = 20.0;

impl KerrTable {
    fn build(phi: &dyn Fn(C64) -> C64, b_max: f64) -> Result<KerrTable> {
        let chi = |nu: C64| phi(nu) * (-0.5 * nu.norm_sqr()).exp();
        let big = |r: f64| {
            (0..64).any(|k| chi(C64::from_polar(r, 2.0 * PI * k as f64 / 64.0)).norm() > 1e-16)
        };
        let mut l = NU_MAX;
        while l > 0.5 && !big(l - 0.25) {
            l -= 0.25;
        }
        if l >= NU_MAX {
            return Err(Error::Resolution(format!(
                "characteristic function has not decayed by |nu| = {NU_MAX}"
            )));
        }
        let nu = Rule::with_max_panel(-l, l, 0.25, 12);
        let nn = nu.len();
        let c = DMatrix::from_fn(nn, nn, |p, q| chi(C64::new(nu.nodes[p], nu.nodes[q])));

        let margin = (KERR_STENCIL as f64) * KERR_STEP;
        let k = 2 * ((b_max + margin) / KERR_STEP).ceil() as usize + 1;
        let lo = -KERR_STEP * ((k - 1) / 2) as f64;
        let grid: Vec<f64> = (0..k).map(|i| lo + i as f64 * KERR_STEP).collect();
        // G(x, y) = sum_pq chi(p + iq) exp(i (y p - x q)), stored with y as row index
        let a = DMatrix::from_fn(k, nn, |r, p| C64::from_polar(nu.weights[p], grid[r] * nu.nodes[p]));
        let b = DMatrix::from_fn(nn, k, |q, s| C64::from_polar(nu.weights[q], -grid[s] * nu.nodes[q]));
        let g = a * c * b;
        // sin = (e^{i t} - e^{-i t}) / 2i and G(-x, -y) sits at the reversed indices
        let values = DMatrix::from_fn(k, k, |r, s| {
            (g[(r, s)] - g[(k - 1 - r, k - 1 - s)]) / C64::new(0.0, 2.0)
        });
        Ok(KerrTable { lo, h: KERR_STEP, k, values })
    }

    fn eval(&self, xi: C64) -> C64 {
        let (wx, ix) = self.lagrange(xi.re);
        let (wy, iy) = self.lagrange(xi.im);
        let mut acc = C64::new(0.0, 0.0);
        for (a, wa) in wy.iter().enumerate() {
            for (b, wb) in wx.iter().enumerate() {
                acc += self.values[(iy + a, ix + b)] * (wa * wb);
            }
        }
        acc
    }

    fn lagrange(&self, t: f64) -> ([f64; KERR_STENCIL], usize) {
        let pos = (t - self.lo) / self.h;
        let start = (pos.floor() as isize - (KERR_STENCIL as isize / 2 - 1)).clamp(0, (self.k - KERR_STENCIL) as isize) as usize;
        let mut w = [1.0; KERR_STENCIL];
        for (i, wi) in w.iter_mut().enumerate() {
            for j in 0..KERR_STENCIL {
                if j != i {
                    *wi *= (pos - (start + j) as f64) / (i as f64 - j as f64);
                }
            }
        }
        (w, start)
    }
}
