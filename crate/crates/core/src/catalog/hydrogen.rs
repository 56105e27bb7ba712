//! Hydrogen bound states in atomic units.
//!
//! Each orbital is written as `S_lm(x, y, z) * P(r) * exp(-r / n)` where
//! `S_lm = r^l Y_lm` is a solid harmonic (a polynomial in Cartesian
//! coordinates) and `P` is the associated Laguerre polynomial in `r`, so the
//! value, gradient and Hessian are all available in closed form.

use num_complex::Complex64 as C64;

use super::polynomial::Poly3;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HydrogenOrbital {
    n: u32,
    l: u32,
    m: i32,
    solid: Poly3,
    radial: Vec<f64>,
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    factorial(n) / (factorial(k) * factorial(n - k))
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `r^l Y_lm` with the Condon-Shortley phase.
fn solid_harmonic(l: u32, m: i32) -> Poly3 {
    let am = m.unsigned_abs();
    // Legendre P_l(u) = 2^-l sum_k (-1)^k C(l,k) C(2l-2k,l) u^{l-2k}; differentiate |m| times.
    let mut deriv: Vec<(u32, f64)> = Vec::new();
    for k in 0..=l / 2 {
        let p = l - 2 * k;
        if p < am {
            continue;
        }
        let c = (-1f64).powi(k as i32) * binomial(l, k) * binomial(2 * l - 2 * k, l) / 2f64.powi(l as i32);
        deriv.push((p - am, c * factorial(p) / factorial(p - am)));
    }
    let norm = ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI) * factorial(l - am) / factorial(l + am)).sqrt();
    let r2 = Poly3::monomial([2, 0, 0], re(1.0))
        .add(&Poly3::monomial([0, 2, 0], re(1.0)))
        .add(&Poly3::monomial([0, 0, 2], re(1.0)));
    // r^{l-|m|} Q(z/r) where Q has parity l-|m|: only even powers of r remain.
    let mut zr = Poly3::default();
    for (j, c) in deriv {
        let rest = (l - am - j) / 2;
        zr = zr.add(&Poly3::monomial([0, 0, j], re(c)).mul(&r2.pow(rest)));
    }
    let xy = Poly3::monomial([1, 0, 0], re(1.0)).add(&Poly3::monomial([0, 1, 0], C64::new(0.0, 1.0)));
    let sign = if am % 2 == 1 { -1.0 } else { 1.0 };
    let positive = xy.pow(am).mul(&zr).scale(re(sign * norm));
    if m >= 0 {
        positive
    } else {
        // Y_{l,-m} = (-1)^m conj(Y_lm)
        positive.conj().scale(re(sign))
    }
}

impl HydrogenOrbital {
    pub fn new(n: i64, l: i64, m: i64) -> Result<Self> {
        if n < 1 || l < 0 || l >= n || m.abs() > l {
            return Err(Error::InvalidQuantumNumbers(format!(
                "(n, l, m) = ({n}, {l}, {m}) violates n >= 1, 0 <= l < n, |m| <= l"
            )));
        }
        if n > 20 {
            return Err(Error::InvalidQuantumNumbers(format!("n = {n} is above the supported maximum 20")));
        }
        let (n, l, m) = (n as u32, l as u32, m as i32);
        let k = n - l - 1;
        let alpha = 2 * l + 1;
        let nf = f64::from(n);
        let norm = ((2.0 / nf).powi(3) * factorial(k) / (2.0 * nf * factorial(n + l))).sqrt() * (2.0 / nf).powi(l as i32);
        let radial = (0..=k)
            .map(|i| {
                norm * (-1f64).powi(i as i32) * binomial(k + alpha, k - i) / factorial(i) * (2.0 / nf).powi(i as i32)
            })
            .collect();
        Ok(Self { n, l, m, solid: solid_harmonic(l, m), radial })
    }

    pub fn quantum_numbers(&self) -> (u32, u32, i32) {
        (self.n, self.l, self.m)
    }

    /// Exact eigenvalue `-1 / (2 n^2)` in hartree.
    pub fn energy(&self) -> f64 {
        -0.5 / f64::from(self.n * self.n)
    }

    /// Radial factor `R_nl(r)`, normalized so that `int R^2 r^2 dr = 1`.
    pub fn radial(&self, r: f64) -> f64 {
        r.powi(self.l as i32) * self.radial_poly(r).0 * (-r / f64::from(self.n)).exp()
    }

    fn radial_poly(&self, r: f64) -> (f64, f64, f64) {
        let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
        for &c in self.radial.iter().rev() {
            ddp = ddp * r + 2.0 * dp;
            dp = dp * r + p;
            p = p * r + c;
        }
        (p, dp, ddp)
    }

    pub fn jet(&self, x: &[f64], grad: &mut [C64], hess: &mut [C64]) -> C64 {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let inv_n = 1.0 / f64::from(self.n);
        let e = (-r * inv_n).exp();
        let (p, dp, ddp) = self.radial_poly(r);
        let f = p * e;
        let f1 = (dp - p * inv_n) * e;
        let f2 = (ddp - 2.0 * dp * inv_n + p * inv_n * inv_n) * e;
        let (s, gs, hs) = self.solid.jet(x);
        let (u, inv_r) = if r > 0.0 { ([x[0] / r, x[1] / r, x[2] / r], 1.0 / r) } else { ([0.0; 3], 0.0) };
        let gf: [f64; 3] = std::array::from_fn(|i| f1 * u[i]);
        for i in 0..3 {
            grad[i] = gs[i] * f + s * gf[i];
            for j in 0..3 {
                let delta = if i == j { 1.0 } else { 0.0 };
                let hf = f2 * u[i] * u[j] + f1 * inv_r * (delta - u[i] * u[j]);
                hess[i * 3 + j] = hs[i * 3 + j] * f + gs[i] * gf[j] + gs[j] * gf[i] + s * hf;
            }
        }
        s * f
    }

    pub fn value(&self, x: &[f64]) -> C64 {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let (s, _, _) = self.solid.jet(x);
        s * self.radial_poly(r).0 * (-r / f64::from(self.n)).exp()
    }
}
