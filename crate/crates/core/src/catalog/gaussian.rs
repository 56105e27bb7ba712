//! Separable complex Gaussians `exp(sum_k -A_k x_k^2 + B_k x_k + C_k)`.
//!
//! This family is closed under free Schrödinger evolution, which gives an
//! exact reference solution for the propagator and residual checks.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPacket {
    a: Vec<C64>,
    b: Vec<C64>,
    c: Vec<C64>,
    /// `hbar / (2 m)` for the body owning each axis.
    beta: Vec<f64>,
    pub(crate) center: Vec<f64>,
    pub(crate) sigma: f64,
    pub(crate) k0: Vec<f64>,
    pub(crate) time: f64,
}

impl GaussianPacket {
    /// Normalized `(2 pi sigma^2)^{-d/4} exp(-|x - center|^2 / (4 sigma^2) + i k0.x)`.
    pub fn new(center: &[f64], sigma: f64, k0: &[f64], axis_masses: &[f64], hbar: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if center.len() != k0.len() || center.len() != axis_masses.len() {
            return Err(Error::InvalidParameter(format!(
                "center has {} entries, k0 {}, model {} axes",
                center.len(),
                k0.len(),
                axis_masses.len()
            )));
        }
        let a0 = 1.0 / (4.0 * sigma * sigma);
        let log_norm = -0.25 * (2.0 * std::f64::consts::PI * sigma * sigma).ln();
        let a = vec![C64::new(a0, 0.0); center.len()];
        let b = center.iter().zip(k0).map(|(&x0, &k)| C64::new(2.0 * a0 * x0, k)).collect();
        let c = center.iter().map(|&x0| C64::new(-a0 * x0 * x0 + log_norm, 0.0)).collect();
        let beta = axis_masses.iter().map(|&m| hbar / (2.0 * m)).collect();
        Ok(Self { a, b, c, beta, center: center.to_vec(), sigma, k0: k0.to_vec(), time: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// Exact free evolution by `t`.
    pub fn free_evolved(&self, t: f64) -> Self {
        let mut out = self.clone();
        for k in 0..self.dim() {
            let (a, b, c, beta) = (self.a[k], self.b[k], self.c[k], self.beta[k]);
            let den = C64::new(1.0, 0.0) + C64::new(0.0, 4.0 * beta * t) * a;
            out.a[k] = a / den;
            out.b[k] = b / den;
            out.c[k] = c + C64::new(0.0, beta * t) * b * b / den - 0.5 * den.ln();
        }
        out.time = self.time + t;
        out
    }

    pub fn value(&self, x: &[f64]) -> C64 {
        let mut e = C64::default();
        for k in 0..self.dim() {
            e += -self.a[k] * x[k] * x[k] + self.b[k] * x[k] + self.c[k];
        }
        e.exp()
    }

    pub fn jet(&self, x: &[f64], grad: &mut [C64], hess: &mut [C64]) -> C64 {
        let d = self.dim();
        let v = self.value(x);
        let g: Vec<C64> = (0..d).map(|k| -2.0 * self.a[k] * x[k] + self.b[k]).collect();
        for i in 0..d {
            grad[i] = g[i] * v;
            for j in 0..d {
                hess[i * d + j] = g[i] * g[j] * v;
            }
            hess[i * d + i] -= 2.0 * self.a[i] * v;
        }
        v
    }

    /// Closed-form `<self, other>` over all of R^d.
    pub fn overlap(&self, other: &GaussianPacket) -> Option<C64> {
        if self.dim() != other.dim() {
            return None;
        }
        let mut log = C64::default();
        for k in 0..self.dim() {
            let alpha = self.a[k].conj() + other.a[k];
            let beta = self.b[k].conj() + other.b[k];
            let gamma = self.c[k].conj() + other.c[k];
            log += 0.5 * (C64::new(std::f64::consts::PI, 0.0) / alpha).ln() + beta * beta / (4.0 * alpha) + gamma;
        }
        Some(log.exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_and_evolution_preserves_norm() {
        let g = GaussianPacket::new(&[0.5, -1.0], 0.8, &[1.5, 0.0], &[1.0, 2.0], 1.0).unwrap();
        assert!((g.overlap(&g).unwrap() - 1.0).norm() < 1e-14);
        let gt = g.free_evolved(3.0);
        assert!((gt.overlap(&gt).unwrap() - 1.0).norm() < 1e-13);
        // composition of evolutions
        let g2 = g.free_evolved(1.0).free_evolved(2.0);
        let x = [0.3, 0.9];
        assert!((g2.value(&x) - gt.value(&x)).norm() < 1e-13);
    }

    #[test]
    fn evolved_packet_solves_free_schrodinger() {
        // i dpsi/dt = -(1/2m) d2psi/dx2 with hbar = 1, checked by centered differences in t.
        let m = 1.3;
        let g = GaussianPacket::new(&[0.2], 1.1, &[0.7], &[m], 1.0).unwrap();
        let (t, dt) = (0.8, 1e-4);
        let x = [0.9];
        let dpsi = (g.free_evolved(t + dt).value(&x) - g.free_evolved(t - dt).value(&x)) / (2.0 * dt);
        let mut grad = [C64::default()];
        let mut hess = [C64::default()];
        g.free_evolved(t).jet(&x, &mut grad, &mut hess);
        let rhs = hess[0] * (-1.0 / (2.0 * m));
        assert!((C64::i() * dpsi - rhs).norm() < 1e-7);
    }

    #[test]
    fn zero_sigma_rejected() {
        assert!(GaussianPacket::new(&[0.0], 0.0, &[0.0], &[1.0], 1.0).is_err());
    }
}
