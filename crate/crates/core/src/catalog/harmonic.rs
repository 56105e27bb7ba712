//! Harmonic-oscillator eigenstates as products of Hermite functions.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicProduct {
    quanta: Vec<u32>,
    /// `sqrt(m omega / hbar)` per axis.
    alpha: Vec<f64>,
    omega: f64,
    hbar: f64,
}

/// Normalized Hermite functions phi_0..=phi_n at `xi` (unit-width oscillator).
fn hermite_functions(n: usize, xi: f64) -> Vec<f64> {
    let mut phi = vec![0.0; n + 1];
    phi[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    if n >= 1 {
        phi[1] = std::f64::consts::SQRT_2 * xi * phi[0];
    }
    for k in 1..n {
        let kf = k as f64;
        phi[k + 1] = (2.0 / (kf + 1.0)).sqrt() * xi * phi[k] - (kf / (kf + 1.0)).sqrt() * phi[k - 1];
    }
    phi
}

impl HarmonicProduct {
    pub fn new(quanta: &[i64], omega: f64, masses: &[f64], hbar: f64) -> Result<Self> {
        if let Some(q) = quanta.iter().find(|&&q| q < 0) {
            return Err(Error::InvalidQuantumNumbers(format!("negative oscillator quantum number {q}")));
        }
        if !(omega > 0.0) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        if quanta.len() != masses.len() {
            return Err(Error::InvalidParameter(format!(
                "{} quantum numbers for {} axes",
                quanta.len(),
                masses.len()
            )));
        }
        Ok(Self {
            quanta: quanta.iter().map(|&q| q as u32).collect(),
            alpha: masses.iter().map(|&m| (m * omega / hbar).sqrt()).collect(),
            omega,
            hbar,
        })
    }

    pub fn quanta(&self) -> &[u32] {
        &self.quanta
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn energy(&self) -> f64 {
        self.hbar * self.omega * self.quanta.iter().map(|&q| f64::from(q) + 0.5).sum::<f64>()
    }

    /// Value and first/second derivative of the axis-`k` factor.
    fn factor(&self, k: usize, x: f64) -> (f64, f64, f64) {
        let n = self.quanta[k] as usize;
        let a = self.alpha[k];
        let xi = a * x;
        let phi = hermite_functions(n + 1, xi);
        let nf = n as f64;
        let lower = if n > 0 { (nf / 2.0).sqrt() * phi[n - 1] } else { 0.0 };
        let d = lower - ((nf + 1.0) / 2.0).sqrt() * phi[n + 1];
        let s = a.sqrt();
        (s * phi[n], s * a * d, s * a * a * (xi * xi - (2.0 * nf + 1.0)) * phi[n])
    }

    pub fn value(&self, x: &[f64]) -> C64 {
        C64::new((0..self.quanta.len()).map(|k| self.factor(k, x[k]).0).product(), 0.0)
    }

    pub fn jet(&self, x: &[f64], grad: &mut [C64], hess: &mut [C64]) -> C64 {
        let d = self.quanta.len();
        let f: Vec<(f64, f64, f64)> = (0..d).map(|k| self.factor(k, x[k])).collect();
        let prod_except = |skip: &[usize]| -> f64 { (0..d).filter(|k| !skip.contains(k)).map(|k| f[k].0).product() };
        for i in 0..d {
            grad[i] = C64::new(f[i].1 * prod_except(&[i]), 0.0);
            for j in 0..d {
                hess[i * d + j] = if i == j {
                    C64::new(f[i].2 * prod_except(&[i]), 0.0)
                } else {
                    C64::new(f[i].1 * f[j].1 * prod_except(&[i, j]), 0.0)
                };
            }
        }
        C64::new(f.iter().map(|t| t.0).product(), 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_functions_are_orthonormal() {
        let h = 0.01;
        let xs: Vec<f64> = (-1500..1500).map(|i| (i as f64 + 0.5) * h).collect();
        let tables: Vec<Vec<f64>> = xs.iter().map(|&x| hermite_functions(6, x)).collect();
        for a in 0..=6 {
            for b in 0..=6 {
                let s: f64 = tables.iter().map(|t| t[a] * t[b]).sum::<f64>() * h;
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-12, "<{a}|{b}> = {s}");
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let st = HarmonicProduct::new(&[3], 1.7, &[0.8], 1.0).unwrap();
        let x = 0.37;
        let e = 1e-5;
        let (_, d1, d2) = st.factor(0, x);
        let fd1 = (st.factor(0, x + e).0 - st.factor(0, x - e).0) / (2.0 * e);
        let fd2 = (st.factor(0, x + e).1 - st.factor(0, x - e).1) / (2.0 * e);
        assert!((d1 - fd1).abs() < 1e-8);
        assert!((d2 - fd2).abs() < 1e-7);
    }

    #[test]
    fn negative_quanta_rejected() {
        assert!(HarmonicProduct::new(&[-1], 1.0, &[1.0], 1.0).is_err());
    }
}
