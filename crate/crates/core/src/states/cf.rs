//! Closed-form normally ordered characteristic functions.
//!
//! Every supported state has a characteristic function of the form
//! `sum_k poly_k(z, zb) exp(A z^2 + B z zb + C zb^2 + D z + E zb)` with
//! `z = xi`, `zb = conj(xi)`. That family is closed under the Wirtinger
//! derivatives that implement photon addition and subtraction, so ladder
//! states stay exact.

use num_complex::Complex64 as C64;

/// A monomial coefficient `c z^i zb^j`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Mono {
    i: u32,
    j: u32,
    c: C64,
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    poly: Vec<Mono>,
    // exponent coefficients [A, B, C, D, E]
    exp: [C64; 5],
}

/// A sum of polynomial-times-Gaussian-exponential terms.
#[derive(Debug, Clone, PartialEq)]
pub struct CfExpr {
    terms: Vec<Term>,
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn simplify(poly: Vec<Mono>) -> Vec<Mono> {
    let mut out: Vec<Mono> = Vec::with_capacity(poly.len());
    let mut sorted = poly;
    sorted.sort_by_key(|m| (m.i, m.j));
    for m in sorted {
        match out.last_mut() {
            Some(last) if last.i == m.i && last.j == m.j => last.c += m.c,
            _ => out.push(m),
        }
    }
    out.retain(|m| m.c != C64::new(0.0, 0.0));
    out
}

impl Term {
    fn d_z(&self) -> Term {
        let [a, b, _, d, _] = self.exp;
        let mut poly = Vec::new();
        for m in &self.poly {
            if m.i > 0 {
                poly.push(Mono { i: m.i - 1, j: m.j, c: m.c * m.i as f64 });
            }
            poly.push(Mono { i: m.i + 1, j: m.j, c: m.c * 2.0 * a });
            poly.push(Mono { i: m.i, j: m.j + 1, c: m.c * b });
            poly.push(Mono { i: m.i, j: m.j, c: m.c * d });
        }
        Term { poly: simplify(poly), exp: self.exp }
    }

    fn d_zb(&self) -> Term {
        let [_, b, cc, _, e] = self.exp;
        let mut poly = Vec::new();
        for m in &self.poly {
            if m.j > 0 {
                poly.push(Mono { i: m.i, j: m.j - 1, c: m.c * m.j as f64 });
            }
            poly.push(Mono { i: m.i + 1, j: m.j, c: m.c * b });
            poly.push(Mono { i: m.i, j: m.j + 1, c: m.c * 2.0 * cc });
            poly.push(Mono { i: m.i, j: m.j, c: m.c * e });
        }
        Term { poly: simplify(poly), exp: self.exp }
    }

    /// Multiplies the polynomial by `c z^di zb^dj`.
    fn shift(&self, di: u32, dj: u32, k: C64) -> Term {
        Term {
            poly: self
                .poly
                .iter()
                .map(|m| Mono { i: m.i + di, j: m.j + dj, c: m.c * k })
                .collect(),
            exp: self.exp,
        }
    }

    fn eval(&self, z: C64) -> C64 {
        let zb = z.conj();
        let [a, b, cc, d, e] = self.exp;
        let arg = a * z * z + b * z * zb + cc * zb * zb + d * z + e * zb;
        let mut p = C64::new(0.0, 0.0);
        for m in &self.poly {
            p += m.c * z.powu(m.i) * zb.powu(m.j);
        }
        p * arg.exp()
    }
}

impl CfExpr {
    fn single(coef: C64, exp: [C64; 5]) -> CfExpr {
        CfExpr {
            terms: vec![Term { poly: vec![Mono { i: 0, j: 0, c: coef }], exp }],
        }
    }

    pub fn coherent(alpha: C64) -> CfExpr {
        let z = C64::new(0.0, 0.0);
        CfExpr::single(c(1.0), [z, z, z, alpha.conj(), -alpha])
    }

    pub fn thermal(nbar: f64) -> CfExpr {
        let z = C64::new(0.0, 0.0);
        CfExpr::single(c(1.0), [z, c(-nbar), z, z, z])
    }

    /// `L_n(|xi|^2) = sum_k C(n,k) (-|xi|^2)^k / k!`.
    pub fn fock(n: u32) -> CfExpr {
        let z = C64::new(0.0, 0.0);
        let mut poly = Vec::with_capacity(n as usize + 1);
        let mut coef = 1.0;
        for k in 0..=n {
            poly.push(Mono { i: k, j: k, c: c(coef) });
            // next: C(n,k+1)(-1)^{k+1}/(k+1)!
            coef *= -((n - k) as f64) / ((k + 1) as f64).powi(2);
        }
        CfExpr {
            terms: vec![Term { poly, exp: [z; 5] }],
        }
    }

    /// Zero-mean Gaussian state with quadrature variances `vx`, `vp`
    /// (vacuum variance 1).
    pub fn squeezed(vx: f64, vp: f64) -> CfExpr {
        let z = C64::new(0.0, 0.0);
        let a = c((vx - vp) / 8.0);
        CfExpr::single(c(1.0), [a, c(-(vx + vp - 2.0) / 4.0), a, z, z])
    }

    /// `(|alpha> + i|-alpha>) / sqrt(2)`, normalized for every alpha.
    pub fn cat(alpha: C64) -> CfExpr {
        let z = C64::new(0.0, 0.0);
        let ac = alpha.conj();
        let overlap = (-2.0 * alpha.norm_sqr()).exp();
        let half = c(0.5);
        let i_half = C64::new(0.0, 0.5 * overlap);
        CfExpr {
            terms: vec![
                Term { poly: vec![Mono { i: 0, j: 0, c: half }], exp: [z, z, z, ac, -alpha] },
                Term { poly: vec![Mono { i: 0, j: 0, c: half }], exp: [z, z, z, -ac, alpha] },
                Term { poly: vec![Mono { i: 0, j: 0, c: i_half }], exp: [z, z, z, ac, alpha] },
                Term { poly: vec![Mono { i: 0, j: 0, c: -i_half }], exp: [z, z, z, -ac, -alpha] },
            ],
        }
    }

    pub fn eval(&self, xi: C64) -> C64 {
        self.terms.iter().map(|t| t.eval(xi)).sum()
    }

    pub fn d_z(&self) -> CfExpr {
        CfExpr { terms: self.terms.iter().map(Term::d_z).collect() }
    }

    pub fn d_zb(&self) -> CfExpr {
        CfExpr { terms: self.terms.iter().map(Term::d_zb).collect() }
    }

    fn scaled(&self, k: C64) -> CfExpr {
        CfExpr { terms: self.terms.iter().map(|t| t.shift(0, 0, k)).collect() }
    }

    fn add(mut self, other: CfExpr) -> CfExpr {
        self.terms.extend(other.terms);
        self
    }

    /// Unnormalized characteristic function of `a^dag rho a`:
    /// `-d dbar Phi + z d Phi + zb dbar Phi + (1 - z zb) Phi`.
    pub fn raise(&self) -> CfExpr {
        let dz = self.d_z();
        let dzb = self.d_zb();
        let dd = dz.d_zb();
        let mut out = dd.scaled(c(-1.0));
        out = out.add(CfExpr { terms: dz.terms.iter().map(|t| t.shift(1, 0, c(1.0))).collect() });
        out = out.add(CfExpr { terms: dzb.terms.iter().map(|t| t.shift(0, 1, c(1.0))).collect() });
        out = out.add(self.clone());
        out.add(CfExpr { terms: self.terms.iter().map(|t| t.shift(1, 1, c(-1.0))).collect() })
    }

    /// Unnormalized characteristic function of `a rho a^dag`: `-d dbar Phi`.
    pub fn lower(&self) -> CfExpr {
        self.d_z().d_zb().scaled(c(-1.0))
    }

    pub fn normalized_by(&self, weight: f64) -> CfExpr {
        self.scaled(c(1.0 / weight))
    }

    /// `<a^dag a> = -d dbar Phi(0)`.
    pub fn mean_photon_number(&self) -> f64 {
        -self.d_z().d_zb().eval(C64::new(0.0, 0.0)).re
    }

    /// `<a> = -dbar Phi(0)`.
    pub fn mean_amplitude(&self) -> C64 {
        -self.d_zb().eval(C64::new(0.0, 0.0))
    }

    /// `<a^2> = dbar^2 Phi(0)`.
    pub fn second_moment(&self) -> C64 {
        self.d_zb().d_zb().eval(C64::new(0.0, 0.0))
    }
}
