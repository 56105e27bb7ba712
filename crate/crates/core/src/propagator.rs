//! Time evolution: exact phases for eigen-superpositions and Strang-split
//! Fourier stepping for everything else.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{CatalogState, Model};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid};
use crate::spectral::FftPlans;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Analytic,
    SplitStep,
}

/// Snapshots of an evolution run.
#[derive(Debug, Clone)]
pub struct EvolutionRecord {
    pub times: Vec<f64>,
    pub states: Vec<ComplexField>,
    pub norms: Vec<f64>,
    pub method: Method,
    /// Step size for split-step runs.
    pub dt: Option<f64>,
}

impl EvolutionRecord {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn last(&self) -> &ComplexField {
        self.states.last().expect("records hold at least the initial state")
    }

    /// Largest deviation of the snapshot norms from the initial norm.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.norms[0];
        self.norms.iter().fold(0.0_f64, |acc, n| acc.max((n - n0).abs()))
    }
}

/// `sum_j c_j exp(-i E_j t / hbar) psi_j` sampled on `grid`, scaled by the
/// same factor that normalizes the `t = 0` sample.
pub fn analytic_evolve(state: &CatalogState, grid: &Grid, t: f64) -> Result<ComplexField> {
    let scale = 1.0 / state.sample(grid)?.norm();
    if !scale.is_finite() {
        return Err(Error::ZeroField);
    }
    Ok(state.evolved(t)?.sample(grid)?.scaled(C64::new(scale, 0.0)))
}

/// Analytic snapshots at the given times.
pub fn analytic_record(state: &CatalogState, grid: &Grid, times: &[f64]) -> Result<EvolutionRecord> {
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("snapshot times must be strictly increasing".into()));
    }
    let states = times.iter().map(|&t| analytic_evolve(state, grid, t)).collect::<Result<Vec<_>>>()?;
    let norms = states.iter().map(ComplexField::norm).collect();
    Ok(EvolutionRecord { times: times.to_vec(), states, norms, method: Method::Analytic, dt: None })
}

/// Reusable Strang step `exp(-iV dt/2) F^-1 exp(-iT dt) F exp(-iV dt/2)`.
pub struct Propagator {
    grid: Grid,
    plans: FftPlans,
    half_potential: Vec<C64>,
    kinetic: Vec<C64>,
    dt: f64,
}

impl Propagator {
    pub fn new(grid: &Grid, model: &Model, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        let plans = FftPlans::new(grid)?;
        let v = model.potential_on(grid)?;
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::UnboundedPotential(format!("V = {} at {:?}", v[i], grid.point_vec(i))));
        }
        let hbar = model.hbar();
        let half_potential = v.par_iter().map(|&x| C64::from_polar(1.0, -0.5 * x * dt / hbar)).collect();
        let ks: Vec<Vec<f64>> = grid.axes().iter().map(|a| a.wavenumbers()).collect();
        let masses = model.axis_masses();
        let kinetic = (0..grid.len())
            .into_par_iter()
            .map_init(
                || vec![0usize; grid.dim()],
                |m, i| {
                    grid.unravel(i, m);
                    let t: f64 = (0..grid.dim()).map(|k| hbar * ks[k][m[k]] * ks[k][m[k]] / (2.0 * masses[k])).sum();
                    C64::from_polar(1.0, -t * dt)
                },
            )
            .collect();
        Ok(Self { grid: grid.clone(), plans, half_potential, kinetic, dt })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn step(&self, psi: &mut [C64]) {
        psi.par_iter_mut().zip(&self.half_potential).for_each(|(p, v)| *p *= v);
        self.plans.forward(psi);
        psi.par_iter_mut().zip(&self.kinetic).for_each(|(p, t)| *p *= t);
        self.plans.inverse(psi);
        psi.par_iter_mut().zip(&self.half_potential).for_each(|(p, v)| *p *= v);
    }

    /// Spectral partial derivative along `axis`, reusing the step's plans.
    pub fn derivative(&self, psi: &[C64], axis: usize) -> Vec<C64> {
        let a = &self.grid.axes()[axis];
        let ks = a.wavenumbers();
        let n = a.points;
        let mut hat = psi.to_vec();
        self.plans.forward(&mut hat);
        hat.par_iter_mut().enumerate().for_each_init(
            || vec![0usize; self.grid.dim()],
            |m, (i, h)| {
                self.grid.unravel(i, m);
                let j = m[axis];
                *h *= if n % 2 == 0 && j == n / 2 { C64::default() } else { C64::new(0.0, ks[j]) };
            },
        );
        self.plans.inverse(&mut hat);
        hat
    }
}

fn all_finite(psi: &[C64]) -> bool {
    psi.par_iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

/// Strang split-step evolution keeping every `stride`-th step and the last.
pub fn split_step(state: &ComplexField, model: &Model, dt: f64, steps: usize, stride: usize) -> Result<EvolutionRecord> {
    if stride == 0 {
        return Err(Error::InvalidParameter("snapshot stride must be at least 1".into()));
    }
    let prop = Propagator::new(state.grid(), model, dt)?;
    let grid = state.grid().clone();
    let mut psi = state.values().to_vec();
    let mut record = EvolutionRecord {
        times: vec![0.0],
        states: vec![state.clone()],
        norms: vec![state.norm()],
        method: Method::SplitStep,
        dt: Some(dt),
    };
    for s in 1..=steps {
        prop.step(&mut psi);
        if !all_finite(&psi) {
            return Err(Error::NonFinite { step: s });
        }
        if s % stride == 0 || s == steps {
            let f = ComplexField::new(grid.clone(), psi.clone())?;
            record.norms.push(f.norm());
            record.times.push(s as f64 * dt);
            record.states.push(f);
        }
    }
    Ok(record)
}
