//! Complex polynomials in three Cartesian variables.

use num_complex::Complex64 as C64;

const MAX_DEGREE: usize = 48;

#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct Poly3 {
    terms: Vec<([u32; 3], C64)>,
}

impl Poly3 {
    pub fn constant(c: C64) -> Self {
        Self { terms: vec![([0, 0, 0], c)] }
    }

    pub fn monomial(exp: [u32; 3], c: C64) -> Self {
        Self { terms: vec![(exp, c)] }
    }

    pub fn add(&self, other: &Poly3) -> Self {
        let mut out = self.clone();
        for &(e, c) in &other.terms {
            out.push(e, c);
        }
        out
    }

    pub fn mul(&self, other: &Poly3) -> Self {
        let mut out = Poly3::default();
        for &(ea, ca) in &self.terms {
            for &(eb, cb) in &other.terms {
                out.push([ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]], ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Poly3::constant(C64::new(1.0, 0.0)), |acc, _| acc.mul(self))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { terms: self.terms.iter().map(|&(e, c)| (e, c * s)).collect() }
    }

    pub fn conj(&self) -> Self {
        Self { terms: self.terms.iter().map(|&(e, c)| (e, c.conj())).collect() }
    }

    fn push(&mut self, e: [u32; 3], c: C64) {
        match self.terms.iter_mut().find(|(te, _)| *te == e) {
            Some((_, tc)) => *tc += c,
            None => self.terms.push((e, c)),
        }
        self.terms.retain(|(_, c)| *c != C64::default());
    }

    fn max_degree(&self) -> u32 {
        self.terms.iter().flat_map(|(e, _)| e.iter().copied()).max().unwrap_or(0)
    }

    /// Value, gradient and row-major 3x3 Hessian at `x`.
    pub fn jet(&self, x: &[f64]) -> (C64, [C64; 3], [C64; 9]) {
        let deg = self.max_degree() as usize;
        assert!(deg < MAX_DEGREE, "polynomial degree {deg} exceeds {MAX_DEGREE}");
        let mut pw = [[1.0f64; MAX_DEGREE]; 3];
        for k in 0..3 {
            for p in 1..=deg {
                pw[k][p] = pw[k][p - 1] * x[k];
            }
        }
        let pw_ref = |k: usize, p: u32| pw[k][p as usize];
        let mut val = C64::default();
        let mut grad = [C64::default(); 3];
        let mut hess = [C64::default(); 9];
        for &(e, c) in &self.terms {
            let f = [pw_ref(0, e[0]), pw_ref(1, e[1]), pw_ref(2, e[2])];
            // first derivative factors e_k x_k^{e_k - 1}
            let d1: [f64; 3] = std::array::from_fn(|k| if e[k] >= 1 { e[k] as f64 * pw_ref(k, e[k] - 1) } else { 0.0 });
            let d2: [f64; 3] = std::array::from_fn(|k| {
                if e[k] >= 2 {
                    (e[k] * (e[k] - 1)) as f64 * pw_ref(k, e[k] - 2)
                } else {
                    0.0
                }
            });
            val += c * (f[0] * f[1] * f[2]);
            for i in 0..3 {
                let mut g = d1[i];
                for j in 0..3 {
                    if j != i {
                        g *= f[j];
                    }
                }
                grad[i] += c * g;
                for j in 0..3 {
                    let mut h = 1.0;
                    for k in 0..3 {
                        h *= if i == j && k == i {
                            d2[k]
                        } else if k == i || k == j {
                            d1[k]
                        } else {
                            f[k]
                        };
                    }
                    hess[i * 3 + j] += c * h;
                }
            }
        }
        (val, grad, hess)
    }
}
