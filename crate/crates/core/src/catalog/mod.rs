//! Closed-form models and states: hydrogen eigenstates, oscillator
//! eigenstates, Gaussian packets, their superpositions and the double-slit
//! barrier.

mod gaussian;
mod harmonic;
mod hydrogen;
mod polynomial;

use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use gaussian::GaussianPacket;
pub use harmonic::HarmonicProduct;
pub use hydrogen::HydrogenOrbital;

use crate::error::{Error, Result};
use crate::grid::{l2_normalize, ClosedForm, ComplexField, Grid};

/// Which slits of the barrier are open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WhichSlits {
    Both,
    Left,
    Right,
}

/// A wall perpendicular to the first axis with two gaps along the second.
#[derive(Debug, Clone, PartialEq)]
pub struct Barrier {
    pub x: f64,
    pub thickness: f64,
    pub slit_centers: (f64, f64),
    pub slit_width: f64,
    pub height: f64,
    pub open: WhichSlits,
}

impl Barrier {
    fn in_slit(&self, y: f64, center: f64) -> bool {
        y >= center - 0.5 * self.slit_width && y < center + 0.5 * self.slit_width
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        if !(x[0] >= self.x && x[0] < self.x + self.thickness) {
            return 0.0;
        }
        let left = matches!(self.open, WhichSlits::Both | WhichSlits::Left) && self.in_slit(x[1], self.slit_centers.0);
        let right = matches!(self.open, WhichSlits::Both | WhichSlits::Right) && self.in_slit(x[1], self.slit_centers.1);
        if left || right {
            0.0
        } else {
            self.height
        }
    }
}

#[derive(Debug, Clone)]
pub enum Potential {
    Free,
    /// `sum_a m_a omega^2 |x_a|^2 / 2`.
    Harmonic { omega: f64 },
    /// `-strength / |r|` for a single three-dimensional body.
    Coulomb { strength: f64 },
    Barrier(Barrier),
    /// Values sampled on a specific grid.
    Sampled { grid: Grid, values: Arc<Vec<f64>> },
}

impl Potential {
    pub fn label(&self) -> &'static str {
        match self {
            Potential::Free => "free",
            Potential::Harmonic { .. } => "harmonic",
            Potential::Coulomb { .. } => "coulomb",
            Potential::Barrier(_) => "barrier",
            Potential::Sampled { .. } => "custom",
        }
    }
}

/// N bodies of equal spatial dimension with masses, hbar and a potential.
#[derive(Debug, Clone)]
pub struct Model {
    masses: Vec<f64>,
    body_dims: usize,
    hbar: f64,
    potential: Potential,
}

impl Model {
    pub fn new(masses: Vec<f64>, body_dims: usize, hbar: f64, potential: Potential) -> Result<Self> {
        if masses.is_empty() || masses.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidParameter(format!("masses must be positive, got {masses:?}")));
        }
        if body_dims == 0 {
            return Err(Error::InvalidParameter("bodies need at least one spatial dimension".into()));
        }
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        match &potential {
            Potential::Harmonic { omega } if !(*omega > 0.0) => {
                return Err(Error::InvalidParameter(format!("omega must be positive, got {omega}")))
            }
            Potential::Coulomb { .. } if masses.len() != 1 || body_dims != 3 => {
                return Err(Error::InvalidParameter("the Coulomb model is a single three-dimensional body".into()))
            }
            Potential::Barrier(_) if masses.len() != 1 || body_dims != 2 => {
                return Err(Error::InvalidParameter("the barrier model is a single two-dimensional body".into()))
            }
            Potential::Sampled { grid, values } if grid.len() != values.len() || grid.dim() != masses.len() * body_dims => {
                return Err(Error::InvalidParameter("sampled potential does not match its grid".into()))
            }
            _ => {}
        }
        Ok(Self { masses, body_dims, hbar, potential })
    }

    /// Hydrogen in atomic units (`mu = hbar = e^2 / (4 pi eps0) = 1`).
    pub fn hydrogen() -> Self {
        Self { masses: vec![1.0], body_dims: 3, hbar: 1.0, potential: Potential::Coulomb { strength: 1.0 } }
    }

    pub fn harmonic(masses: Vec<f64>, body_dims: usize, hbar: f64, omega: f64) -> Result<Self> {
        Self::new(masses, body_dims, hbar, Potential::Harmonic { omega })
    }

    pub fn free(masses: Vec<f64>, body_dims: usize, hbar: f64) -> Result<Self> {
        Self::new(masses, body_dims, hbar, Potential::Free)
    }

    pub fn n_bodies(&self) -> usize {
        self.masses.len()
    }

    pub fn body_dims(&self) -> usize {
        self.body_dims
    }

    pub fn dim(&self) -> usize {
        self.masses.len() * self.body_dims
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, body: usize) -> Result<f64> {
        self.masses.get(body).copied().ok_or(Error::BodyOutOfRange { body, n_bodies: self.n_bodies() })
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn body_axes(&self, body: usize) -> Result<Range<usize>> {
        self.mass(body)?;
        Ok(body * self.body_dims..(body + 1) * self.body_dims)
    }

    pub fn body_of_axis(&self, axis: usize) -> usize {
        axis / self.body_dims
    }

    /// One axis range per body.
    pub fn groups(&self) -> Vec<Range<usize>> {
        (0..self.n_bodies()).map(|b| b * self.body_dims..(b + 1) * self.body_dims).collect()
    }

    /// Mass of the body owning each configuration axis.
    pub fn axis_masses(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.masses[self.body_of_axis(k)]).collect()
    }

    pub fn potential_at(&self, x: &[f64]) -> f64 {
        match &self.potential {
            Potential::Free => 0.0,
            Potential::Harmonic { omega } => (0..self.dim())
                .map(|k| 0.5 * self.masses[self.body_of_axis(k)] * omega * omega * x[k] * x[k])
                .sum(),
            Potential::Coulomb { strength } => -strength / (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt(),
            Potential::Barrier(b) => b.value(x),
            Potential::Sampled { grid, values } => grid.locate(x).map(|i| values[i]).unwrap_or(f64::NAN),
        }
    }

    /// Closed-form gradient of the potential.
    pub fn potential_gradient(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        match &self.potential {
            Potential::Free => out.iter_mut().for_each(|g| *g = 0.0),
            Potential::Harmonic { omega } => {
                for k in 0..self.dim() {
                    out[k] = self.masses[self.body_of_axis(k)] * omega * omega * x[k];
                }
            }
            Potential::Coulomb { strength } => {
                let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                for k in 0..3 {
                    out[k] = strength * x[k] / (r * r * r);
                }
            }
            p => return Err(Error::NonSmoothPotential(p.label().into())),
        }
        Ok(())
    }

    /// Potential at every cell center of `grid`.
    pub fn potential_on(&self, grid: &Grid) -> Result<Vec<f64>> {
        if grid.dim() != self.dim() {
            return Err(Error::InvalidParameter(format!(
                "model has {} coordinates, grid has {}",
                self.dim(),
                grid.dim()
            )));
        }
        if let Potential::Sampled { grid: g, values } = &self.potential {
            g.check_same(grid)?;
            return Ok(values.as_ref().clone());
        }
        Ok(grid.map_points(|x| self.potential_at(x)))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Basis {
    Hydrogen(HydrogenOrbital),
    Harmonic(HarmonicProduct),
    Gaussian(GaussianPacket),
}

impl Basis {
    fn dim(&self) -> usize {
        match self {
            Basis::Hydrogen(_) => 3,
            Basis::Harmonic(h) => h.quanta().len(),
            Basis::Gaussian(g) => g.dim(),
        }
    }

    fn value(&self, x: &[f64]) -> C64 {
        match self {
            Basis::Hydrogen(h) => h.value(x),
            Basis::Harmonic(h) => h.value(x),
            Basis::Gaussian(g) => g.value(x),
        }
    }

    fn jet(&self, x: &[f64], grad: &mut [C64], hess: &mut [C64]) -> C64 {
        match self {
            Basis::Hydrogen(h) => h.jet(x, grad, hess),
            Basis::Harmonic(h) => h.jet(x, grad, hess),
            Basis::Gaussian(g) => g.jet(x, grad, hess),
        }
    }

    fn energy(&self) -> Option<f64> {
        match self {
            Basis::Hydrogen(h) => Some(h.energy()),
            Basis::Harmonic(h) => Some(h.energy()),
            Basis::Gaussian(_) => None,
        }
    }

    fn label(&self) -> String {
        match self {
            Basis::Hydrogen(h) => {
                let (n, l, m) = h.quantum_numbers();
                format!("hydrogen({n},{l},{m})")
            }
            Basis::Harmonic(h) => format!("harmonic{:?}", h.quanta()),
            Basis::Gaussian(g) => format!("gaussian(sigma={}, k0={:?}, t={})", g.sigma, g.k0, g.time),
        }
    }

    fn overlap(&self, other: &Basis) -> Result<C64> {
        let delta = |same: bool| if same { C64::new(1.0, 0.0) } else { C64::default() };
        match (self, other) {
            (Basis::Hydrogen(a), Basis::Hydrogen(b)) => Ok(delta(a.quantum_numbers() == b.quantum_numbers())),
            (Basis::Harmonic(a), Basis::Harmonic(b)) if a.alpha() == b.alpha() && a.omega() == b.omega() => {
                Ok(delta(a.quanta() == b.quanta()))
            }
            (Basis::Gaussian(a), Basis::Gaussian(b)) => {
                a.overlap(b).ok_or_else(|| Error::UnsupportedOverlap(self.label(), other.label()))
            }
            _ => Err(Error::UnsupportedOverlap(self.label(), other.label())),
        }
    }
}

/// A finite linear combination of catalog basis functions.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCombination {
    terms: Vec<(C64, Basis)>,
    dim: usize,
}

impl LinearCombination {
    fn norm_sqr(&self) -> Result<f64> {
        let mut s = C64::default();
        for (ci, bi) in &self.terms {
            for (cj, bj) in &self.terms {
                s += ci.conj() * cj * bi.overlap(bj)?;
            }
        }
        Ok(s.re)
    }

    fn scaled(&self, c: C64) -> Self {
        Self { terms: self.terms.iter().map(|(k, b)| (k * c, b.clone())).collect(), dim: self.dim }
    }
}

impl ClosedForm for LinearCombination {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> C64 {
        self.terms.iter().map(|(c, b)| c * b.value(x)).sum()
    }

    fn jet(&self, x: &[f64], grad: &mut [C64], hess: &mut [C64]) -> C64 {
        let d = self.dim;
        grad.iter_mut().for_each(|g| *g = C64::default());
        hess.iter_mut().for_each(|h| *h = C64::default());
        let mut g = vec![C64::default(); d];
        let mut h = vec![C64::default(); d * d];
        let mut v = C64::default();
        for (c, b) in &self.terms {
            v += c * b.jet(x, &mut g, &mut h);
            for k in 0..d {
                grad[k] += c * g[k];
            }
            for k in 0..d * d {
                hess[k] += c * h[k];
            }
        }
        v
    }
}

/// A normalized closed-form state with optional exact eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct CatalogState {
    combo: LinearCombination,
    hbar: f64,
    eigen_energy: Option<f64>,
    quantum_numbers: Option<Vec<i64>>,
    label: String,
}

fn shared_energy(combo: &LinearCombination) -> Option<f64> {
    let first = combo.terms.first()?.1.energy()?;
    combo
        .terms
        .iter()
        .all(|(_, b)| b.energy().is_some_and(|e| (e - first).abs() <= 1e-12 * first.abs().max(1.0)))
        .then_some(first)
}

impl CatalogState {
    fn single(basis: Basis, hbar: f64, quantum_numbers: Option<Vec<i64>>) -> Self {
        let label = basis.label();
        let dim = basis.dim();
        let eigen_energy = basis.energy();
        Self {
            combo: LinearCombination { terms: vec![(C64::new(1.0, 0.0), basis)], dim },
            hbar,
            eigen_energy,
            quantum_numbers,
            label,
        }
    }

    pub fn dim(&self) -> usize {
        self.combo.dim
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn eigen_energy(&self) -> Option<f64> {
        self.eigen_energy
    }

    pub fn quantum_numbers(&self) -> Option<&[i64]> {
        self.quantum_numbers.as_deref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n_terms(&self) -> usize {
        self.combo.terms.len()
    }

    /// Coefficient and eigen energy of each basis term.
    pub fn spectral_terms(&self) -> Vec<(C64, Option<f64>)> {
        self.combo.terms.iter().map(|(c, b)| (*c, b.energy())).collect()
    }

    /// Closed-form norm squared from analytic overlaps.
    pub fn norm_sqr(&self) -> Result<f64> {
        self.combo.norm_sqr()
    }

    pub fn is_stationary_superposition(&self) -> bool {
        self.combo.terms.iter().all(|(_, b)| b.energy().is_some())
    }

    /// Exact evolution `sum_j c_j exp(-i E_j t / hbar) psi_j`.
    pub fn evolved(&self, t: f64) -> Result<Self> {
        let mut terms = Vec::with_capacity(self.combo.terms.len());
        for (c, b) in &self.combo.terms {
            let e = b.energy().ok_or_else(|| Error::MissingEigenEnergy(b.label()))?;
            terms.push((c * C64::from_polar(1.0, -e * t / self.hbar), b.clone()));
        }
        Ok(Self { combo: LinearCombination { terms, dim: self.combo.dim }, ..self.clone() })
    }

    /// Exact free evolution of a Gaussian superposition.
    pub fn free_evolved(&self, t: f64) -> Result<Self> {
        let mut terms = Vec::with_capacity(self.combo.terms.len());
        for (c, b) in &self.combo.terms {
            match b {
                Basis::Gaussian(g) => terms.push((*c, Basis::Gaussian(g.free_evolved(t)))),
                other => {
                    return Err(Error::InvalidParameter(format!("free evolution needs Gaussian terms, got {}", other.label())))
                }
            }
        }
        Ok(Self { combo: LinearCombination { terms, dim: self.combo.dim }, ..self.clone() })
    }

    /// `H^k psi` as a closed form, using the eigen decomposition.
    pub fn hamiltonian_power(&self, k: u32) -> Result<LinearCombination> {
        let mut terms = Vec::with_capacity(self.combo.terms.len());
        for (c, b) in &self.combo.terms {
            let e = b.energy().ok_or_else(|| Error::MissingEigenEnergy(b.label()))?;
            terms.push((c * e.powi(k as i32), b.clone()));
        }
        Ok(LinearCombination { terms, dim: self.combo.dim })
    }

    pub fn closed_form(&self) -> Arc<dyn ClosedForm> {
        Arc::new(self.combo.clone())
    }

    /// Samples the state at the cell centers, keeping the closed form.
    pub fn sample(&self, grid: &Grid) -> Result<ComplexField> {
        ComplexField::from_closed(grid.clone(), self.closed_form())
    }

    /// Samples and rescales to unit discrete norm.
    pub fn discretize(&self, grid: &Grid) -> Result<ComplexField> {
        l2_normalize(&self.sample(grid)?)
    }
}

impl ClosedForm for CatalogState {
    fn dim(&self) -> usize {
        self.combo.dim
    }

    fn value(&self, x: &[f64]) -> C64 {
        self.combo.value(x)
    }

    fn jet(&self, x: &[f64], grad: &mut [C64], hess: &mut [C64]) -> C64 {
        self.combo.jet(x, grad, hess)
    }
}

/// Hydrogen eigenstate `psi_nlm` in atomic units.
pub fn hydrogen_state(n: i64, l: i64, m: i64) -> Result<CatalogState> {
    let orbital = HydrogenOrbital::new(n, l, m)?;
    Ok(CatalogState::single(Basis::Hydrogen(orbital), 1.0, Some(vec![n, l, m])))
}

/// Normalized Gaussian packet with mean momentum `hbar k0`.
pub fn gaussian_packet(center: &[f64], sigma: f64, k0: &[f64], model: &Model) -> Result<CatalogState> {
    if center.len() != model.dim() {
        return Err(Error::InvalidParameter(format!(
            "packet center has {} coordinates, model has {}",
            center.len(),
            model.dim()
        )));
    }
    let g = GaussianPacket::new(center, sigma, k0, &model.axis_masses(), model.hbar())?;
    Ok(CatalogState::single(Basis::Gaussian(g), model.hbar(), None))
}

/// Product of Hermite functions with energy `hbar omega sum(n_i + 1/2)`.
pub fn harmonic_eigenstate(n_per_axis: &[i64], omega: f64, model: &Model) -> Result<CatalogState> {
    if n_per_axis.len() != model.dim() {
        return Err(Error::InvalidParameter(format!(
            "{} quantum numbers for a {}-coordinate model",
            n_per_axis.len(),
            model.dim()
        )));
    }
    let h = HarmonicProduct::new(n_per_axis, omega, &model.axis_masses(), model.hbar())?;
    Ok(CatalogState::single(Basis::Harmonic(h), model.hbar(), Some(n_per_axis.to_vec())))
}

/// Normalized linear combination of catalog states.
pub fn superpose(coeffs: &[C64], states: &[CatalogState]) -> Result<CatalogState> {
    if coeffs.is_empty() || coeffs.len() != states.len() {
        return Err(Error::InvalidParameter(format!(
            "{} coefficients for {} states",
            coeffs.len(),
            states.len()
        )));
    }
    let dim = states[0].dim();
    let hbar = states[0].hbar;
    if states.iter().any(|s| s.dim() != dim || s.hbar != hbar) {
        return Err(Error::InvalidParameter("superposed states must share dimension and hbar".into()));
    }
    let mut terms = Vec::new();
    for (c, s) in coeffs.iter().zip(states) {
        for (k, b) in &s.combo.terms {
            terms.push((c * k, b.clone()));
        }
    }
    let raw = LinearCombination { terms, dim };
    let n2 = raw.norm_sqr()?;
    if !(n2 > 1e-28) {
        return Err(Error::ZeroField);
    }
    let combo = raw.scaled(C64::new(1.0 / n2.sqrt(), 0.0));
    let eigen_energy = shared_energy(&combo);
    let label = states.iter().map(|s| s.label.as_str()).collect::<Vec<_>>().join(" + ");
    let quantum_numbers = if states.len() == 1 { states[0].quantum_numbers.clone() } else { None };
    Ok(CatalogState { combo, hbar, eigen_energy, quantum_numbers, label })
}

/// Two-dimensional single-body model with a slit barrier.
pub fn double_slit_model(
    barrier_x: f64,
    thickness: f64,
    slit_centers: (f64, f64),
    slit_width: f64,
    barrier_height: f64,
    which_slits: WhichSlits,
    mass: f64,
    hbar: f64,
) -> Result<Model> {
    if !(slit_width > 0.0) {
        return Err(Error::InvalidParameter(format!("slit width must be positive, got {slit_width}")));
    }
    if !(barrier_height > 0.0) || !(thickness > 0.0) {
        return Err(Error::InvalidParameter("barrier height and thickness must be positive".into()));
    }
    let (a, b) = slit_centers;
    if (a - b).abs() < slit_width {
        return Err(Error::InvalidParameter(format!("slits at {a} and {b} with width {slit_width} overlap")));
    }
    let barrier = Barrier { x: barrier_x, thickness, slit_centers, slit_width, height: barrier_height, open: which_slits };
    Model::new(vec![mass], 2, hbar, Potential::Barrier(barrier))
}
