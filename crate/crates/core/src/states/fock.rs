//! Truncated number-basis density matrices. These are the brute-force
//! reference for every closed form in the crate.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::StateModel;
use crate::error::{Error, Result};

/// Largest tail `1 - Tr` a truncated density may drop by default.
pub const DEFAULT_TAIL_BOUND: f64 = 1e-8;

const MAX_AUTO_CUTOFF: usize = 640;

#[derive(Debug, Clone)]
pub struct FockDensity {
    cutoff: usize,
    matrix: DMatrix<C64>,
    tail: f64,
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

fn ln_binomial(lnf: &[f64], n: usize, k: usize) -> f64 {
    lnf[n] - lnf[k] - lnf[n - k]
}

/// Number-basis amplitudes of `|alpha>` for n < dim.
fn coherent_amplitudes(alpha: C64, dim: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(dim);
    let mut c = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        out.push(c);
        c *= alpha / ((n + 1) as f64).sqrt();
    }
    out
}

fn pure(v: &[C64]) -> DMatrix<C64> {
    let dim = v.len();
    DMatrix::from_fn(dim, dim, |m, n| v[m] * v[n].conj())
}

/// Normalized matrix elements `<m|rho|n>` for `m, n < dim`, exact up to
/// floating point.
fn elements(s: &StateModel, dim: usize) -> Result<DMatrix<C64>> {
    Ok(match s {
        StateModel::Coherent(a) => pure(&coherent_amplitudes(*a, dim)),
        StateModel::Thermal(nbar) => {
            let q = nbar / (1.0 + nbar);
            DMatrix::from_fn(dim, dim, |m, n| {
                if m == n {
                    C64::new(q.powi(m as i32) / (1.0 + nbar), 0.0)
                } else {
                    zero()
                }
            })
        }
        StateModel::Fock(k) => DMatrix::from_fn(dim, dim, |m, n| {
            if m == n && m == *k as usize {
                C64::new(1.0, 0.0)
            } else {
                zero()
            }
        }),
        StateModel::SqueezedVacuum { vx, vp } => squeezed_thermal(*vx, *vp, dim),
        StateModel::Cat(a) => {
            let plus = coherent_amplitudes(*a, dim);
            let minus = coherent_amplitudes(-*a, dim);
            let i = C64::new(0.0, 1.0);
            let v: Vec<C64> = plus
                .iter()
                .zip(&minus)
                .map(|(p, m)| (p + i * m) / 2f64.sqrt())
                .collect();
            pure(&v)
        }
        StateModel::PhotonAdded(base) => {
            let weight = 1.0 + base.mean_photon_number()?;
            let b = elements(base, dim)?;
            DMatrix::from_fn(dim, dim, |m, n| {
                if m == 0 || n == 0 {
                    zero()
                } else {
                    b[(m - 1, n - 1)] * ((m * n) as f64).sqrt() / weight
                }
            })
        }
        StateModel::PhotonSubtracted(base) => {
            let weight = base.mean_photon_number()?;
            if weight < 1e-14 {
                return Err(Error::ZeroWeight(format!("photon subtraction from {base}")));
            }
            let b = elements(base, dim + 1)?;
            DMatrix::from_fn(dim, dim, |m, n| {
                b[(m + 1, n + 1)] * (((m + 1) * (n + 1)) as f64).sqrt() / weight
            })
        }
    })
}

/// `S(r) rho_th(n) S(r)^dag` with `2n+1 = sqrt(vx vp)` and
/// `r = ln(vp/vx)/4`, computed on an enlarged space and cropped.
fn squeezed_thermal(vx: f64, vp: f64, dim: usize) -> DMatrix<C64> {
    let nbar = 0.5 * ((vx * vp).sqrt() - 1.0).max(0.0);
    let r = 0.25 * (vp / vx).ln();
    let big = dim + 60 + (60.0 * r.abs()).ceil() as usize + (20.0 * nbar).ceil() as usize;
    let mut gen = DMatrix::<f64>::zeros(big, big);
    for n in 2..big {
        let amp = 0.5 * r * ((n * (n - 1)) as f64).sqrt();
        // (r/2) a^2 and -(r/2) a^dag^2
        gen[(n - 2, n)] = amp;
        gen[(n, n - 2)] = -amp;
    }
    let s = gen.exp();
    let q = nbar / (1.0 + nbar);
    let th: Vec<f64> = (0..big).map(|k| q.powi(k as i32) / (1.0 + nbar)).collect();
    DMatrix::from_fn(dim, dim, |m, n| {
        let v: f64 = (0..big).map(|k| s[(m, k)] * th[k] * s[(n, k)]).sum();
        C64::new(v, 0.0)
    })
}

/// Default cutoff `max(20, ceil(10 (<n> + 1)))`.
pub fn default_cutoff(s: &StateModel) -> Result<usize> {
    let n = s.mean_photon_number()?;
    Ok(20usize.max((10.0 * (n + 1.0)).ceil() as usize))
}

/// Truncated density of `s` at `cutoff`, failing if the dropped tail
/// exceeds [`DEFAULT_TAIL_BOUND`].
pub fn fock_density(s: &StateModel, cutoff: usize) -> Result<FockDensity> {
    fock_density_with_bound(s, cutoff, DEFAULT_TAIL_BOUND)
}

pub fn fock_density_with_bound(s: &StateModel, cutoff: usize, bound: f64) -> Result<FockDensity> {
    if cutoff < 1 {
        return Err(Error::param("Fock cutoff must be at least 1"));
    }
    s.char_fn()?;
    let rho = FockDensity::truncated(s, cutoff)?;
    if rho.tail > bound {
        let mut suggested = cutoff;
        loop {
            suggested = (suggested * 3 / 2).max(suggested + 10);
            if suggested > MAX_AUTO_CUTOFF
                || FockDensity::truncated(s, suggested)?.tail <= bound
            {
                break;
            }
        }
        return Err(Error::Truncation { cutoff, tail: rho.tail, bound, suggested });
    }
    Ok(rho)
}

impl FockDensity {
    fn truncated(s: &StateModel, cutoff: usize) -> Result<FockDensity> {
        let mut matrix = elements(s, cutoff + 1)?;
        let trace: f64 = matrix.diagonal().iter().map(|c| c.re).sum();
        let tail = (1.0 - trace).max(0.0);
        matrix /= C64::new(trace, 0.0);
        Ok(FockDensity { cutoff, matrix, tail })
    }

    /// Density at the default cutoff, enlarged until the tail is below
    /// `1e-12`.
    pub fn auto(s: &StateModel) -> Result<FockDensity> {
        let mut cutoff = default_cutoff(s)?;
        loop {
            match fock_density_with_bound(s, cutoff, 1e-12) {
                Err(Error::Truncation { suggested, .. }) if suggested <= MAX_AUTO_CUTOFF => {
                    cutoff = suggested
                }
                other => return other,
            }
        }
    }

    /// Wraps an arbitrary matrix; the caller vouches for its validity.
    pub fn from_matrix(matrix: DMatrix<C64>, tail: f64) -> Result<FockDensity> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() < 2 {
            return Err(Error::param("density matrix must be square with dimension >= 2"));
        }
        Ok(FockDensity { cutoff: matrix.nrows() - 1, matrix, tail })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// `1 - Tr` of the truncated state before renormalization.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|c| c.re).sum()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigen().eigenvalues.iter().copied().collect()
    }

    pub fn trace_distance(&self, other: &FockDensity) -> Result<f64> {
        if self.cutoff != other.cutoff {
            return Err(Error::param("trace distance needs equal cutoffs"));
        }
        let diff = &self.matrix - &other.matrix;
        let h = (&diff + diff.adjoint()) * C64::new(0.5, 0.0);
        Ok(0.5 * h.symmetric_eigen().eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
    }

    fn map_elements(&self, f: impl Fn(usize, usize, C64) -> C64) -> FockDensity {
        let dim = self.cutoff + 1;
        FockDensity {
            cutoff: self.cutoff,
            matrix: DMatrix::from_fn(dim, dim, |m, n| f(m, n, self.matrix[(m, n)])),
            tail: self.tail,
        }
    }

    /// Beam-splitter loss with transmissivity `eta`, applied through its
    /// Kraus operators `A_k = sum_n sqrt(C(n,k)) eta^{(n-k)/2} (1-eta)^{k/2} |n-k><n|`.
    pub fn with_loss(&self, eta: f64) -> FockDensity {
        if eta == 1.0 {
            return self.clone();
        }
        let dim = self.cutoff + 1;
        let lnf = ln_factorials(dim);
        let (ln_eta, ln_loss) = (eta.ln(), (1.0 - eta).ln());
        self.map_elements(|m, n, _| {
            let mut acc = zero();
            for k in 0..dim - m.max(n) {
                let ln_w = 0.5 * (ln_binomial(&lnf, m + k, k) + ln_binomial(&lnf, n + k, k))
                    + 0.5 * (m + n) as f64 * ln_eta
                    + k as f64 * ln_loss;
                acc += self.matrix[(m + k, n + k)] * ln_w.exp();
            }
            acc
        })
    }

    /// Quantum-limited amplifier of gain `g >= 1` through its Kraus operators
    /// `<n+k|B_k|n> = sqrt(C(n+k,k)) ((g-1)/g)^{k/2} g^{-(n+1)/2}`.
    /// Population pushed past the cutoff is added to the tail.
    pub fn with_amplification(&self, g: f64) -> FockDensity {
        if g == 1.0 {
            return self.clone();
        }
        let dim = self.cutoff + 1;
        let lnf = ln_factorials(dim);
        let (ln_q, ln_g) = (((g - 1.0) / g).ln(), g.ln());
        let out = self.map_elements(|m, n, _| {
            let mut acc = zero();
            for k in 0..=m.min(n) {
                let (m0, n0) = (m - k, n - k);
                let ln_w = 0.5 * (ln_binomial(&lnf, m, k) + ln_binomial(&lnf, n, k))
                    + k as f64 * ln_q
                    - 0.5 * (m0 + n0 + 2) as f64 * ln_g;
                acc += self.matrix[(m0, n0)] * ln_w.exp();
            }
            acc
        });
        let lost = 1.0 - out.trace() / self.trace();
        FockDensity { tail: self.tail + lost.max(0.0), ..out }
    }

    /// Thermal bath channel: loss `tau/g` followed by amplification `g`,
    /// with `tau = exp(-2 gt)` and `g = 1 + nbar (1 - tau)`.
    pub fn decohered(&self, nbar: f64, gt: f64) -> FockDensity {
        let tau = (-2.0 * gt).exp();
        let g = 1.0 + nbar * (1.0 - tau);
        self.with_loss(tau / g).with_amplification(g)
    }

    /// Kerr evolution `exp(-i (pi/2) n^2)`.
    pub fn kerr_cat(&self) -> FockDensity {
        self.map_elements(|m, n, v| {
            let turns = ((m * m) as i64 - (n * n) as i64).rem_euclid(4);
            v * C64::new(0.0, -1.0).powi(turns as i32)
        })
    }

    /// `Tr[rho exp(a^dag xi) exp(-a xi*)]` summed in the number basis.
    pub fn char_fn(&self, xi: C64) -> C64 {
        let dim = self.cutoff + 1;
        let x = xi.norm_sqr();
        if x == 0.0 {
            return C64::new(self.trace(), 0.0);
        }
        let lnf = ln_factorials(dim);
        let ln_r = 0.5 * x.ln();
        let theta = xi.arg();
        let mut total = zero();
        let mut lag = vec![0.0; dim];
        for d in 0..dim {
            // L_m^{(d)}(x), m = 0..dim-d
            let len = dim - d;
            lag[0] = 1.0;
            if len > 1 {
                lag[1] = 1.0 + d as f64 - x;
            }
            for k in 1..len.saturating_sub(1) {
                let kf = k as f64;
                lag[k + 1] = ((2.0 * kf + 1.0 + d as f64 - x) * lag[k] - (kf + d as f64) * lag[k - 1])
                    / (kf + 1.0);
            }
            let phase = C64::from_polar(1.0, d as f64 * theta);
            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
            for m in 0..len {
                let n = m + d;
                let mag = (0.5 * (lnf[m] - lnf[n]) + d as f64 * ln_r).exp() * lag[m];
                // T_{nm} pairs with rho_{mn}; T_{mn} with rho_{nm}
                total += self.matrix[(m, n)] * phase * mag;
                if d > 0 {
                    total += self.matrix[(n, m)] * phase.conj() * (sign * mag);
                }
            }
        }
        total
    }

    /// Distribution of `x(phi)`, `p(x) = sum_{mn} psi_m psi_n Re[e^{-i(m-n)phi} rho_mn]`.
    pub fn quadrature_slice(&self, phi: f64) -> QuadratureSlice {
        let dim = self.cutoff + 1;
        let m = DMatrix::from_fn(dim, dim, |j, k| {
            (C64::from_polar(1.0, -((j as f64) - (k as f64)) * phi) * self.matrix[(j, k)]).re
        });
        QuadratureSlice::Fock(m)
    }
}

/// Oscillator eigenfunctions `psi_0..psi_{n-1}` at `x` in the unit vacuum
/// variance convention, `psi_n(x) = 2^{-1/4} psi_n^std(x / sqrt 2)`.
pub fn hermite_functions(x: f64, n: usize) -> Vec<f64> {
    let u = x / 2f64.sqrt();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let p0 = (2.0 * PI).powf(-0.25) * (-0.5 * u * u).exp();
    out.push(p0);
    if n > 1 {
        out.push(2f64.sqrt() * u * p0);
    }
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * u * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    out
}

/// A quadrature distribution at a fixed phase.
#[derive(Debug, Clone)]
pub enum QuadratureSlice {
    Gaussian { mean: f64, var: f64 },
    /// Real symmetric kernel `M_jk` with `p(x) = psi^T M psi`.
    Fock(DMatrix<f64>),
}

impl QuadratureSlice {
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            QuadratureSlice::Gaussian { mean, var } => {
                let d = x - mean;
                (-0.5 * d * d / var).exp() / (2.0 * PI * var).sqrt()
            }
            QuadratureSlice::Fock(m) => {
                let psi = hermite_functions(x, m.nrows());
                let mut acc = 0.0;
                for j in 0..psi.len() {
                    let mut row = 0.0;
                    for k in 0..psi.len() {
                        row += m[(j, k)] * psi[k];
                    }
                    acc += psi[j] * row;
                }
                acc.max(0.0)
            }
        }
    }

    /// Mean and standard deviation of the slice.
    pub fn moments(&self) -> (f64, f64) {
        match self {
            QuadratureSlice::Gaussian { mean, var } => (*mean, var.sqrt()),
            QuadratureSlice::Fock(m) => {
                // <x> and <x^2> from the tridiagonal x = a + a^dag
                let dim = m.nrows();
                let mut mean = 0.0;
                let mut second = 0.0;
                for j in 0..dim {
                    second += (2 * j + 1) as f64 * m[(j, j)];
                    if j + 1 < dim {
                        mean += 2.0 * ((j + 1) as f64).sqrt() * m[(j, j + 1)];
                    }
                    if j + 2 < dim {
                        second += 2.0 * (((j + 1) * (j + 2)) as f64).sqrt() * m[(j, j + 2)];
                    }
                }
                (mean, (second - mean * mean).max(0.0).sqrt())
            }
        }
    }
}
