//! Single-mode state models.
//!
//! Quadratures follow `x(phi) = a e^{-i phi} + a^dag e^{i phi}`, so the vacuum
//! has unit variance and `x = x(0)`, `p = x(pi/2)`.

mod cf;
mod fock;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub use cf::CfExpr;
pub use fock::{
    fock_density, fock_density_with_bound, hermite_functions, FockDensity, QuadratureSlice,
    DEFAULT_TAIL_BOUND,
};

/// Deepest nesting of photon additions and subtractions we evaluate.
pub const MAX_LADDER_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum StateModel {
    Coherent(C64),
    Thermal(f64),
    Fock(u32),
    /// Zero-mean Gaussian state with quadrature variances `vx`, `vp`.
    SqueezedVacuum { vx: f64, vp: f64 },
    /// `(|alpha> + i|-alpha>) / sqrt(2)`.
    Cat(C64),
    PhotonAdded(Box<StateModel>),
    PhotonSubtracted(Box<StateModel>),
}

/// A validated state with its closed-form characteristic function.
#[derive(Debug, Clone)]
pub struct CharFn {
    expr: CfExpr,
}

impl CharFn {
    #[inline]
    pub fn eval(&self, xi: C64) -> C64 {
        self.expr.eval(xi)
    }

    pub fn expr(&self) -> &CfExpr {
        &self.expr
    }
}

impl StateModel {
    pub fn vacuum() -> StateModel {
        StateModel::Coherent(C64::new(0.0, 0.0))
    }

    pub fn added(base: StateModel) -> StateModel {
        StateModel::PhotonAdded(Box::new(base))
    }

    pub fn subtracted(base: StateModel) -> StateModel {
        StateModel::PhotonSubtracted(Box::new(base))
    }

    fn depth(&self) -> usize {
        match self {
            StateModel::PhotonAdded(b) | StateModel::PhotonSubtracted(b) => 1 + b.depth(),
            _ => 0,
        }
    }

    /// Checks parameter ranges and returns the normalized characteristic
    /// function.
    pub fn char_fn(&self) -> Result<CharFn> {
        if self.depth() > MAX_LADDER_DEPTH {
            return Err(Error::Capability(format!(
                "more than {MAX_LADDER_DEPTH} nested photon additions/subtractions"
            )));
        }
        self.expr().map(|expr| CharFn { expr })
    }

    fn expr(&self) -> Result<CfExpr> {
        let finite = |z: C64| z.re.is_finite() && z.im.is_finite();
        Ok(match self {
            StateModel::Coherent(a) => {
                if !finite(*a) {
                    return Err(Error::param("coherent amplitude must be finite"));
                }
                CfExpr::coherent(*a)
            }
            StateModel::Thermal(n) => {
                if !(*n >= 0.0 && n.is_finite()) {
                    return Err(Error::param(format!("thermal nbar must be >= 0, got {n}")));
                }
                CfExpr::thermal(*n)
            }
            StateModel::Fock(n) => CfExpr::fock(*n),
            StateModel::SqueezedVacuum { vx, vp } => {
                if !(*vx > 0.0 && *vp > 0.0 && vx.is_finite() && vp.is_finite()) {
                    return Err(Error::param("squeezed variances must be positive"));
                }
                if vx * vp < 1.0 - 1e-12 {
                    return Err(Error::param(format!(
                        "squeezed variances violate the uncertainty bound: {vx} * {vp} < 1"
                    )));
                }
                CfExpr::squeezed(*vx, *vp)
            }
            StateModel::Cat(a) => {
                if !finite(*a) {
                    return Err(Error::param("cat amplitude must be finite"));
                }
                CfExpr::cat(*a)
            }
            StateModel::PhotonAdded(base) => {
                let b = base.expr()?;
                let weight = 1.0 + b.mean_photon_number();
                b.raise().normalized_by(weight)
            }
            StateModel::PhotonSubtracted(base) => {
                let b = base.expr()?;
                let weight = b.mean_photon_number();
                if weight < 1e-14 {
                    return Err(Error::ZeroWeight(format!("photon subtraction from {base}")));
                }
                b.lower().normalized_by(weight)
            }
        })
    }

    pub fn mean_photon_number(&self) -> Result<f64> {
        Ok(self.char_fn()?.expr.mean_photon_number())
    }

    /// Whether the state is invariant under phase rotations.
    pub fn is_phase_insensitive(&self) -> bool {
        match self {
            StateModel::Thermal(_) | StateModel::Fock(_) => true,
            StateModel::Coherent(a) | StateModel::Cat(a) => a.norm() == 0.0,
            StateModel::SqueezedVacuum { vx, vp } => vx == vp,
            StateModel::PhotonAdded(b) | StateModel::PhotonSubtracted(b) => b.is_phase_insensitive(),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(
            self,
            StateModel::Coherent(_) | StateModel::Thermal(_) | StateModel::SqueezedVacuum { .. }
        )
    }

    /// Mean and variance of `x(phi)` after detection with efficiency `eta`.
    pub fn quadrature_moments(&self, phi: f64, eta: f64) -> Result<(f64, f64)> {
        check_eta(eta)?;
        let cf = self.char_fn()?;
        let rot = C64::from_polar(1.0, -phi);
        let mean = 2.0 * (cf.expr.mean_amplitude() * rot).re;
        let second = 2.0 * (cf.expr.second_moment() * rot * rot).re
            + 2.0 * cf.expr.mean_photon_number()
            + 1.0;
        let var = second - mean * mean;
        Ok((eta.sqrt() * mean, eta * var + 1.0 - eta))
    }
}

pub(crate) fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("efficiency must lie in (0, 1], got {eta}")))
    }
}

/// `Tr[rho exp(a^dag xi) exp(-a xi*)]` from the closed form.
pub fn char_fn_normal(s: &StateModel, xi: C64) -> Result<C64> {
    Ok(s.char_fn()?.eval(xi))
}

/// Quadrature distributions of one state at a fixed efficiency.
#[derive(Debug, Clone)]
pub enum QuadratureModel {
    Gaussian { state: StateModel, eta: f64 },
    Fock(FockDensity),
}

impl QuadratureModel {
    pub fn new(s: &StateModel, eta: f64) -> Result<QuadratureModel> {
        check_eta(eta)?;
        s.char_fn()?;
        if s.is_gaussian() {
            return Ok(QuadratureModel::Gaussian { state: s.clone(), eta });
        }
        let rho = FockDensity::auto(s)?;
        Ok(QuadratureModel::Fock(rho.with_loss(eta)))
    }

    /// The distribution at one phase, ready for repeated evaluation.
    pub fn at_phase(&self, phi: f64) -> Result<QuadratureSlice> {
        match self {
            QuadratureModel::Gaussian { state, eta } => {
                let (mean, var) = state.quadrature_moments(phi, *eta)?;
                Ok(QuadratureSlice::Gaussian { mean, var })
            }
            QuadratureModel::Fock(rho) => Ok(rho.quadrature_slice(phi)),
        }
    }
}

/// Density of `x(phi)` measured with efficiency `eta`.
pub fn quadrature_pdf(s: &StateModel, x: f64, phi: f64, eta: f64) -> Result<f64> {
    Ok(QuadratureModel::new(s, eta)?.at_phase(phi)?.pdf(x))
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

impl fmt::Display for StateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateModel::Coherent(a) => write!(f, "coherent:re={},im={}", fmt_f(a.re), fmt_f(a.im)),
            StateModel::Thermal(n) => write!(f, "thermal:nbar={}", fmt_f(*n)),
            StateModel::Fock(n) => write!(f, "fock:n={n}"),
            StateModel::SqueezedVacuum { vx, vp } => {
                write!(f, "squeezed:vx={},vp={}", fmt_f(*vx), fmt_f(*vp))
            }
            StateModel::Cat(a) => write!(f, "cat:re={},im={}", fmt_f(a.re), fmt_f(a.im)),
            StateModel::PhotonAdded(b) => write!(f, "added({b})"),
            StateModel::PhotonSubtracted(b) => write!(f, "subtracted({b})"),
        }
    }
}

/// Parses `key=value` pairs, rejecting unknown or repeated keys.
pub(crate) fn parse_params<'a>(
    body: &'a str,
    allowed: &[&str],
) -> Result<Vec<(&'a str, f64)>> {
    let mut out: Vec<(&str, f64)> = Vec::new();
    if body.trim().is_empty() {
        return Ok(out);
    }
    for pair in body.split(',') {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::param(format!("expected key=value, got `{pair}`")))?;
        let k = k.trim();
        if !allowed.contains(&k) {
            return Err(Error::param(format!("unknown key `{k}` (expected one of {allowed:?})")));
        }
        if out.iter().any(|(seen, _)| *seen == k) {
            return Err(Error::param(format!("repeated key `{k}`")));
        }
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::param(format!("`{k}` is not a number: `{v}`")))?;
        out.push((k, v));
    }
    Ok(out)
}

pub(crate) fn get(params: &[(&str, f64)], key: &str) -> Option<f64> {
    params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

pub(crate) fn require(params: &[(&str, f64)], key: &str, what: &str) -> Result<f64> {
    get(params, key).ok_or_else(|| Error::param(format!("{what} requires `{key}=`")))
}

impl FromStr for StateModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<StateModel> {
        let s = s.trim();
        for (prefix, wrap) in [
            ("added(", StateModel::added as fn(StateModel) -> StateModel),
            ("subtracted(", StateModel::subtracted),
        ] {
            if let Some(rest) = s.strip_prefix(prefix) {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| Error::param(format!("unbalanced parentheses in `{s}`")))?;
                return Ok(wrap(inner.parse()?));
            }
        }
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        let state = match kind {
            "vacuum" => {
                parse_params(body, &[])?;
                StateModel::vacuum()
            }
            "coherent" | "cat" => {
                let p = parse_params(body, &["re", "im"])?;
                let a = C64::new(require(&p, "re", kind)?, get(&p, "im").unwrap_or(0.0));
                if kind == "cat" {
                    StateModel::Cat(a)
                } else {
                    StateModel::Coherent(a)
                }
            }
            "thermal" => StateModel::Thermal(require(&parse_params(body, &["nbar"])?, "nbar", kind)?),
            "fock" => {
                let n = require(&parse_params(body, &["n"])?, "n", kind)?;
                if n < 0.0 || n.fract() != 0.0 || n > u32::MAX as f64 {
                    return Err(Error::param(format!("photon number must be a nonnegative integer, got {n}")));
                }
                StateModel::Fock(n as u32)
            }
            "squeezed" => {
                let p = parse_params(body, &["vx", "vp"])?;
                StateModel::SqueezedVacuum { vx: require(&p, "vx", kind)?, vp: require(&p, "vp", kind)? }
            }
            _ => return Err(Error::param(format!("unknown state `{kind}`"))),
        };
        Ok(state)
    }
}
