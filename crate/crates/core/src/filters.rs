//! The nonclassicality filter: the normalized autocorrelation of
//! `exp(-|eta|^4)` evaluated at `xi / w`.
//!
//! Fixing `xi = b` on the positive real axis and centring the integration
//! variable between the two quartic bumps turns the exponent into
//! `2 (r^2 + c^2)^2 + 8 c^2 r^2 cos^2(theta)` with `c = b / (2w)`. The angular
//! integral is then a scaled Bessel `I0`, leaving a smooth 1D integral that we
//! evaluate with composite Gauss–Legendre and tabulate once per width.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::numeric::{Rule, UniformHermite};
use crate::special::{i0e, i1e, j0};

/// Largest node spacing of the tabulated profile.
pub const MAX_TABLE_STEP: f64 = 0.005;

/// Truncation of the substituted radial variable `t = |eta|`: beyond it the
/// integrand is below `exp(-2 t^4) < 1e-24`.
const T_MAX: f64 = 2.3;

/// An immutable tabulated filter of fixed width.
#[derive(Debug, Clone)]
pub struct FilterSpec {
    width: f64,
    tol: f64,
    b_max: f64,
    table: UniformHermite,
}

/// `(Omega_1(b), dOmega_1/db)` evaluated directly from the 1D reduction.
pub(crate) fn unit_filter_with_derivative(b: f64) -> (f64, f64) {
    thread_local! {
        static RULE: Rule = Rule::composite_gauss_legendre(0.0, T_MAX, 12, 16);
    }
    let c = 0.5 * b.abs();
    let c2 = c * c;
    // pi / N with N = int exp(-2|eta|^4) d^2 eta = (pi/2) sqrt(pi/2)
    let prefactor = 2.0 * (2.0 / PI).sqrt();
    RULE.with(|rule| {
        let mut value = 0.0;
        let mut deriv = 0.0;
        for (&t, &wt) in rule.nodes.iter().zip(&rule.weights) {
            let t2 = t * t;
            let s = t2 + c2;
            let z = 4.0 * c2 * t2;
            let g = 2.0 * t * (-2.0 * s * s).exp();
            let i0 = i0e(z);
            value += wt * g * i0;
            // d/dc of exp(-2 s^2) I0e(4 c^2 t^2)
            let dc = -8.0 * c * s * i0 + 8.0 * c * t2 * (i1e(z) - i0);
            deriv += wt * g * dc;
        }
        (prefactor * value, 0.5 * prefactor * deriv)
    })
}

impl FilterSpec {
    /// Tabulates the filter of width `w`, truncating where
    /// `exp(b^2/2) Omega_w(b)` falls below `tol`.
    pub fn build(w: f64, tol: f64) -> Result<FilterSpec> {
        if !(w > 0.0) || !w.is_finite() {
            return Err(Error::param(format!("filter width must be positive, got {w}")));
        }
        if !(tol > 0.0 && tol <= 1e-3) {
            return Err(Error::param(format!("filter tolerance must lie in (0, 1e-3], got {tol}")));
        }
        let weighted = |b: f64| (0.5 * b * b).exp() * unit_filter_with_derivative(b / w).0;

        // Walk past the single maximum of the weighted profile, then bracket
        // the tolerance crossing and bisect it.
        let coarse = 0.05 * w;
        let mut b = 0.0;
        let mut prev = weighted(0.0);
        loop {
            let next = weighted(b + coarse);
            if next < prev {
                break;
            }
            prev = next;
            b += coarse;
            if b > 100.0 * w {
                return Err(Error::Numerical("filter weighted profile has no maximum".into()));
            }
        }
        let mut lo = b;
        let mut hi = b + coarse;
        while weighted(hi) >= tol {
            lo = hi;
            hi += coarse;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if weighted(mid) >= tol {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let b_max = hi;

        let steps = (b_max / MAX_TABLE_STEP).ceil() as usize;
        let h = b_max / steps as f64;
        let (values, derivs): (Vec<f64>, Vec<f64>) = (0..=steps)
            .map(|i| {
                let (v, d) = unit_filter_with_derivative(i as f64 * h / w);
                (v, d / w)
            })
            .unzip();
        let residual = (values[0] - 1.0).abs();
        if residual > 1e-10 {
            return Err(Error::Numerical(format!(
                "filter normalization residual {residual:.2e} exceeds 1e-10"
            )));
        }
        let table = UniformHermite::new(0.0, h, values, derivs);
        Ok(FilterSpec {
            width: w,
            tol,
            b_max,
            table,
        })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn b_max(&self) -> f64 {
        self.b_max
    }

    /// Interpolated `Omega_w(b)`; zero beyond `b_max`.
    pub fn value(&self, b: f64) -> Result<f64> {
        if b < 0.0 || b.is_nan() {
            return Err(Error::param(format!("filter argument must be nonnegative, got {b}")));
        }
        Ok(self.value_unchecked(b))
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, b: f64) -> f64 {
        self.table.eval(b.abs()).unwrap_or(0.0)
    }

    /// `(b, Omega_w(b))` at the table nodes.
    pub fn table(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.table.nodes()
    }

    /// Radial Gauss–Legendre rule on `[0, b_max]` with panels no wider than
    /// `max_panel`.
    pub(crate) fn radial_rule(&self, max_panel: f64, order: usize) -> Rule {
        Rule::with_max_panel(0.0, self.b_max, max_panel, order)
    }

    /// Checks that `exp(b^2/2) Omega_w(b)` decreases on the table beyond its
    /// single maximum.
    pub fn tail_is_dominated(&self) -> bool {
        let weighted: Vec<f64> = self
            .table
            .nodes()
            .map(|(b, v)| (0.5 * b * b).exp() * v)
            .collect();
        let peak = weighted
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        weighted[peak..].windows(2).all(|p| p[1] <= p[0])
    }

    /// Radially symmetric Fourier transform of the filter,
    /// `(1/pi^2) int d^2 xi Omega_w(xi) exp(beta xi* - beta* xi)` at `|beta| = r`.
    /// This is the filtered quasiprobability of the vacuum.
    pub fn fourier(&self, r_grid: &[f64]) -> Result<Vec<f64>> {
        if let Some(r) = r_grid.iter().find(|r| !(**r >= 0.0)) {
            return Err(Error::param(format!("radius must be nonnegative, got {r}")));
        }
        let rule = self.radial_rule(0.1, 10);
        let weighted: Vec<(f64, f64)> = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&b, &wt)| (b, wt * b * self.value_unchecked(b)))
            .collect();
        Ok(r_grid
            .iter()
            .map(|&r| {
                let terms: Vec<f64> = weighted.iter().map(|&(b, c)| c * j0(2.0 * r * b)).collect();
                2.0 / PI * crate::numeric::pairwise_sum(&terms)
            })
            .collect())
    }

    /// Writes the table as `b,omega` rows below a `# w=.. b_max=.. tol=..` header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# w={} b_max={} tol={}", self.width, self.b_max, self.tol)?;
        writeln!(out, "b,omega")?;
        for (b, v) in self.table() {
            writeln!(out, "{b:.16e},{v:.16e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(b: f64) -> f64 {
        unit_filter_with_derivative(b).0
    }

    // Raw 2D integral of the defining autocorrelation, on a tensor
    // Gauss–Legendre grid. Independent of the Bessel reduction.
    fn unit_filter_2d(b: f64) -> f64 {
        let rule = Rule::composite_gauss_legendre(-3.0, 3.0, 24, 16);
        let mut acc = 0.0;
        for (&x, &wx) in rule.nodes.iter().zip(&rule.weights) {
            for (&y, &wy) in rule.nodes.iter().zip(&rule.weights) {
                let r1 = x * x + y * y;
                let r2 = (x + b) * (x + b) + y * y;
                acc += wx * wy * (-(r1 * r1) - r2 * r2).exp();
            }
        }
        acc / (0.5 * PI * (0.5 * PI).sqrt())
    }

    #[test]
    fn bessel_reduction_matches_raw_2d_integral() {
        for b in [0.0, 0.3, 1.0, 1.7, 2.5] {
            let (a, d) = (unit(b), unit_filter_2d(b));
            assert!((a - d).abs() < 1e-12, "b={b}: {a} vs {d}");
        }
    }

    #[test]
    fn reference_value_at_unit_argument() {
        // independent adaptive 2D cubature of the defining integral
        assert!((unit(1.0) - 0.47577819080768297).abs() < 1e-13);
        assert!((unit(0.5) - 0.8242638645609032).abs() < 1e-13);
        assert!((unit(2.0) - 0.028403978587745893).abs() < 1e-14);
        assert!((unit(3.0) - 4.0090269037972985e-06).abs() < 1e-17);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        for b in [0.2, 0.9, 1.6, 3.1] {
            let h = 1e-5;
            let fd = (unit(b + h) - unit(b - h)) / (2.0 * h);
            let d = unit_filter_with_derivative(b).1;
            assert!((fd - d).abs() < 1e-8, "b={b}: {fd} vs {d}");
        }
    }

    #[test]
    fn normalized_at_origin() {
        let f = FilterSpec::build(1.2, 1e-8).unwrap();
        assert_eq!(f.value(0.0).unwrap(), 1.0);
        assert!((unit(0.0) - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn width_scaling() {
        let f12 = FilterSpec::build(1.2, 1e-8).unwrap();
        let f10 = FilterSpec::build(1.0, 1e-8).unwrap();
        let a = f12.value(2.4).unwrap();
        let b = f10.value(2.0).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn truncation_contract() {
        let f = FilterSpec::build(1.5, 1e-8).unwrap();
        let bm = f.b_max();
        assert!(unit(bm / 1.5) < f.tol() * (-0.5 * bm * bm).exp());
        assert_eq!(f.value(bm + 0.01).unwrap(), 0.0);
        assert!(f.tail_is_dominated());
    }

    #[test]
    fn monotone_on_table() {
        let f = FilterSpec::build(1.2, 1e-8).unwrap();
        let vals: Vec<f64> = f.table().map(|(_, v)| v).collect();
        assert!(vals.windows(2).all(|p| p[1] <= p[0]));
        assert!(vals.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(FilterSpec::build(0.0, 1e-8), Err(Error::Parameter(_))));
        assert!(matches!(FilterSpec::build(-1.0, 1e-8), Err(Error::Parameter(_))));
        assert!(matches!(FilterSpec::build(1.0, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(FilterSpec::build(1.0, 1e-2), Err(Error::Parameter(_))));
        let f = FilterSpec::build(1.0, 1e-8).unwrap();
        assert!(matches!(f.value(-0.1), Err(Error::Parameter(_))));
    }

    #[test]
    fn fourier_has_unit_mass() {
        let f = FilterSpec::build(1.2, 1e-8).unwrap();
        let rule = Rule::composite_gauss_legendre(0.0, 6.0, 30, 12);
        let ft = f.fourier(&rule.nodes).unwrap();
        let mass: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .zip(&ft)
            .map(|((r, w), v)| 2.0 * PI * r * w * v)
            .sum();
        assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
    }

    #[test]
    fn fourier_scaling_theorem() {
        let f1 = FilterSpec::build(0.8, 1e-8).unwrap();
        let f2 = FilterSpec::build(1.6, 1e-8).unwrap();
        let r: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let r2: Vec<f64> = r.iter().map(|x| 2.0 * x).collect();
        let a = f2.fourier(&r).unwrap();
        let b = f1.fourier(&r2).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - 4.0 * y).abs() < 1e-8, "{x} vs {}", 4.0 * y);
        }
    }

    #[test]
    fn fourier_equals_squared_transform_of_quartic_bump() {
        // The filter is an autocorrelation, so its transform is
        // |g^(2r)|^2 / (pi^2 N) with g^(k) = 2 pi int rho exp(-rho^4) J0(k rho).
        let w = 1.0;
        let f = FilterSpec::build(w, 1e-10).unwrap();
        let rule = Rule::composite_gauss_legendre(0.0, 3.0, 30, 16);
        let norm = 0.5 * PI * (0.5 * PI).sqrt();
        let radii: Vec<f64> = (0..40).map(|i| i as f64 * 0.2).collect();
        let ft = f.fourier(&radii).unwrap();
        for (&r, &v) in radii.iter().zip(&ft) {
            let g = 2.0 * PI * rule.integrate(|rho| rho * (-rho.powi(4)).exp() * j0(2.0 * r * rho));
            let oracle = g * g / (PI * PI * norm);
            assert!((v - oracle).abs() < 1e-9, "r={r}: {v} vs {oracle}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn scale_covariance(b in 0.0f64..6.0, w in 0.6f64..2.2) {
            let fw = FilterSpec::build(w, 1e-8).unwrap();
            let f1 = unit_table();
            let lhs = fw.value(b).unwrap();
            let rhs = f1.value(b / w).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-8, "{} vs {}", lhs, rhs);
        }
    }

    fn unit_table() -> &'static FilterSpec {
        use std::sync::OnceLock;
        static F: OnceLock<FilterSpec> = OnceLock::new();
        F.get_or_init(|| FilterSpec::build(1.0, 1e-8).unwrap())
    }
}
