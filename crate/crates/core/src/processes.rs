//! Single-mode processes, described by their action on coherent states.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::states::{fock_density, parse_params, require, CharFn, StateModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProcessModel {
    PhotonAddition,
    PhotonSubtraction,
    /// Kerr evolution `exp(-i (pi/2) n^2)`.
    KerrCat,
    /// Thermal bath with mean occupation `nbar` after dimensionless time `gt`.
    ThermalDecoherence { nbar: f64, gt: f64 },
}

/// The output of a process, which may leave the closed set of state models.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputState {
    State(StateModel),
    Decohered { nbar: f64, gt: f64, input: StateModel },
}

/// Normalized output state and the trace of the unnormalized output.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalOutput {
    pub state: OutputState,
    pub weight: f64,
}

/// A characteristic function ready for repeated evaluation.
#[derive(Debug, Clone)]
pub enum OutputCharFn {
    State(CharFn),
    Decohered { nbar: f64, tau: f64, input: CharFn },
}

impl OutputCharFn {
    pub fn eval(&self, xi: C64) -> C64 {
        match self {
            OutputCharFn::State(cf) => cf.eval(xi),
            OutputCharFn::Decohered { nbar, tau, input } => {
                (-nbar * (1.0 - tau) * xi.norm_sqr()).exp() * input.eval(xi * tau.sqrt())
            }
        }
    }
}

impl OutputState {
    pub fn char_fn(&self) -> Result<OutputCharFn> {
        Ok(match self {
            OutputState::State(s) => OutputCharFn::State(s.char_fn()?),
            OutputState::Decohered { nbar, gt, input } => OutputCharFn::Decohered {
                nbar: *nbar,
                tau: (-2.0 * gt).exp(),
                input: input.char_fn()?,
            },
        })
    }

    pub fn is_phase_insensitive(&self) -> bool {
        match self {
            OutputState::State(s) => s.is_phase_insensitive(),
            OutputState::Decohered { input, .. } => input.is_phase_insensitive(),
        }
    }

    /// Mean photon number; sets the spread of the state in phase space.
    pub fn mean_photon_number(&self) -> Result<f64> {
        match self {
            OutputState::State(s) => s.mean_photon_number(),
            OutputState::Decohered { nbar, gt, input } => {
                let tau = (-2.0 * gt).exp();
                Ok(tau * input.mean_photon_number()? + nbar * (1.0 - tau))
            }
        }
    }

    /// Largest displacement of the state's phase-space centroid.
    pub fn amplitude_scale(&self) -> f64 {
        fn scale(s: &StateModel) -> f64 {
            match s {
                StateModel::Coherent(a) | StateModel::Cat(a) => a.norm(),
                StateModel::PhotonAdded(b) | StateModel::PhotonSubtracted(b) => scale(b),
                _ => 0.0,
            }
        }
        match self {
            OutputState::State(s) => scale(s),
            OutputState::Decohered { input, .. } => scale(input),
        }
    }
}

impl fmt::Display for OutputState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputState::State(s) => write!(f, "{s}"),
            OutputState::Decohered { nbar, gt, input } => {
                write!(f, "decohered(nbar={nbar},gt={gt};{input})")
            }
        }
    }
}

fn check_decoherence(nbar: f64, gt: f64) -> Result<()> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::param(format!("bath nbar must be >= 0, got {nbar}")));
    }
    if !(gt >= 0.0 && gt.is_finite()) {
        return Err(Error::param(format!("decoherence time gt must be >= 0, got {gt}")));
    }
    Ok(())
}

impl ProcessModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ProcessModel::ThermalDecoherence { nbar, gt } => check_decoherence(nbar, gt),
            _ => Ok(()),
        }
    }

    /// `E(|alpha><alpha|)` as a normalized state and its trace.
    pub fn apply_to_coherent(&self, alpha: C64) -> Result<ConditionalOutput> {
        self.validate()?;
        let input = StateModel::Coherent(alpha);
        let x = alpha.norm_sqr();
        let (state, weight) = match *self {
            ProcessModel::PhotonAddition => (OutputState::State(StateModel::added(input)), 1.0 + x),
            ProcessModel::PhotonSubtraction => {
                if x == 0.0 {
                    return Err(Error::ZeroWeight("photon subtraction from the vacuum".into()));
                }
                (OutputState::State(input), x)
            }
            ProcessModel::KerrCat => (OutputState::State(StateModel::Cat(alpha)), 1.0),
            ProcessModel::ThermalDecoherence { nbar, gt } => {
                (OutputState::Decohered { nbar, gt, input }, 1.0)
            }
        };
        Ok(ConditionalOutput { state, weight })
    }

    /// `E(rho)` for an arbitrary state model where a closed form exists.
    pub fn apply_to_state(&self, s: &StateModel) -> Result<ConditionalOutput> {
        self.validate()?;
        if let StateModel::Coherent(a) = s {
            return self.apply_to_coherent(*a);
        }
        let n = s.mean_photon_number()?;
        Ok(match *self {
            ProcessModel::PhotonAddition => ConditionalOutput {
                state: OutputState::State(StateModel::added(s.clone())),
                weight: 1.0 + n,
            },
            ProcessModel::PhotonSubtraction => {
                if n < 1e-14 {
                    return Err(Error::ZeroWeight(format!("photon subtraction from {s}")));
                }
                ConditionalOutput { state: OutputState::State(StateModel::subtracted(s.clone())), weight: n }
            }
            ProcessModel::ThermalDecoherence { nbar, gt } => ConditionalOutput {
                state: OutputState::Decohered { nbar, gt, input: s.clone() },
                weight: 1.0,
            },
            ProcessModel::KerrCat => {
                if matches!(s, StateModel::Thermal(_) | StateModel::Fock(_)) {
                    ConditionalOutput { state: OutputState::State(s.clone()), weight: 1.0 }
                } else {
                    return Err(Error::Capability(format!(
                        "no closed form for the Kerr image of {s}"
                    )));
                }
            }
        })
    }

    /// `Tr E(|alpha><alpha|)` as a function of `|alpha|`.
    pub fn weight(&self, a: f64) -> f64 {
        match self {
            ProcessModel::PhotonAddition => 1.0 + a * a,
            ProcessModel::PhotonSubtraction => a * a,
            _ => 1.0,
        }
    }
}

impl fmt::Display for ProcessModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessModel::PhotonAddition => write!(f, "add"),
            ProcessModel::PhotonSubtraction => write!(f, "subtract"),
            ProcessModel::KerrCat => write!(f, "kerrcat"),
            ProcessModel::ThermalDecoherence { nbar, gt } => write!(f, "decohere:nbar={nbar},gt={gt}"),
        }
    }
}

impl FromStr for ProcessModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<ProcessModel> {
        let (kind, body) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let p = match kind {
            "add" | "subtract" | "kerrcat" if !body.is_empty() => {
                return Err(Error::param(format!("process `{kind}` takes no parameters")))
            }
            "add" => ProcessModel::PhotonAddition,
            "subtract" => ProcessModel::PhotonSubtraction,
            "kerrcat" => ProcessModel::KerrCat,
            "decohere" => {
                let p = parse_params(body, &["nbar", "gt"])?;
                ProcessModel::ThermalDecoherence {
                    nbar: require(&p, "nbar", kind)?,
                    gt: require(&p, "gt", kind)?,
                }
            }
            _ => return Err(Error::param(format!("unknown process `{kind}`"))),
        };
        p.validate()?;
        Ok(p)
    }
}

/// `Phi(xi, t) = exp(-nbar (1 - tau) |xi|^2) Phi(sqrt(tau) xi)`, `tau = exp(-2 gt)`.
pub fn decohere_char_fn(nbar: f64, gt: f64, s: &StateModel, xi: C64) -> Result<C64> {
    check_decoherence(nbar, gt)?;
    let cf = s.char_fn()?;
    Ok(decohere_with(nbar, gt, |z| cf.eval(z), xi))
}

/// The decoherence transform applied to an arbitrary characteristic function.
pub fn decohere_with(nbar: f64, gt: f64, phi: impl Fn(C64) -> C64, xi: C64) -> C64 {
    let tau = (-2.0 * gt).exp();
    (-nbar * (1.0 - tau) * xi.norm_sqr()).exp() * phi(xi * tau.sqrt())
}

/// `nbar / (nbar + 1) > exp(-2 gt)`; equality counts as not past.
pub fn is_past_classicality_threshold(nbar: f64, gt: f64) -> bool {
    nbar / (nbar + 1.0) > (-2.0 * gt).exp()
}

/// `gt` at which the threshold condition turns into an equality.
pub fn classicality_threshold(nbar: f64) -> f64 {
    -0.5 * (nbar / (nbar + 1.0)).ln()
}

/// Covariance eigenvalues, along x and p, of the Gaussian P function of a
/// decohered squeezed vacuum. In units where the vacuum quadrature variance
/// is 1 they read `tau (V - 1) + 2 nbar (1 - tau)`.
pub fn decohered_squeezed_p_covariance(nbar: f64, gt: f64, vx: f64, vp: f64) -> Result<[f64; 2]> {
    check_decoherence(nbar, gt)?;
    StateModel::SqueezedVacuum { vx, vp }.char_fn()?;
    let tau = (-2.0 * gt).exp();
    Ok([vx, vp].map(|v| tau * (v - 1.0) + 2.0 * nbar * (1.0 - tau)))
}

/// Trace distance between `Thermal(nbar)` and its image under a
/// trace-preserving process, computed in the number basis.
pub fn fixed_point_check(p: &ProcessModel, nbar: f64, cutoff: usize) -> Result<f64> {
    p.validate()?;
    let rho = fock_density(&StateModel::Thermal(nbar), cutoff)?;
    let image = match *p {
        ProcessModel::KerrCat => rho.kerr_cat(),
        ProcessModel::ThermalDecoherence { nbar: bath, gt } => rho.decohered(bath, gt),
        _ => {
            return Err(Error::Capability(format!("{p} does not preserve the trace")));
        }
    };
    rho.trace_distance(&image)
}
