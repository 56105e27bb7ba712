//! Velocity, energy and angular-momentum random variables as quotients
//! against `rho = |psi|^2`, and the matching Hilbert-space expectations.

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::born::RandomVariable;
use crate::catalog::Model;
use crate::error::{Error, Result};
use crate::grid::{tree_sum, ComplexField, Jet, RealField};
use crate::spectral::Spectrum;

/// Default relative density cutoff for the node mask.
pub const NODE_THRESHOLD: f64 = 1e-12;

/// Largest total probability the masked cells may carry.
pub const MASKED_MASS_LIMIT: f64 = 1e-9;

/// Cells where `rho >= threshold * max rho` (`true` = kept).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeMask {
    pub threshold: f64,
    pub mask: Vec<bool>,
    /// Normalized probability carried by the masked cells.
    pub masked_mass: f64,
}

impl NodeMask {
    pub fn new(rho: &[f64], threshold: f64) -> Self {
        let max = rho.iter().fold(0.0_f64, |a, &r| a.max(r));
        let cut = threshold * max;
        let mask: Vec<bool> = rho.iter().map(|&r| r > 0.0 && r >= cut).collect();
        let total = tree_sum(0..rho.len(), &|i| rho[i]);
        let masked = tree_sum(0..rho.len(), &|i| if mask[i] { 0.0 } else { rho[i] });
        let masked_mass = if total > 0.0 { masked / total } else { 1.0 };
        Self { threshold, mask, masked_mass }
    }

    pub fn of(state: &ComplexField) -> Self {
        Self::new(&state.density(), NODE_THRESHOLD)
    }

    pub fn masked_fraction(&self) -> f64 {
        self.mask.iter().filter(|m| !**m).count() as f64 / self.mask.len() as f64
    }

    pub fn check(&self) -> Result<()> {
        if self.masked_mass > MASKED_MASS_LIMIT {
            return Err(Error::MaskedMass { mass: self.masked_mass, limit: MASKED_MASS_LIMIT });
        }
        Ok(())
    }
}

/// Derivatives shared by the observables.
pub(crate) struct Local {
    pub jet: Jet,
    pub rho: Vec<f64>,
    pub mask: NodeMask,
}

impl Local {
    pub fn new(state: &ComplexField, model: &Model) -> Result<Self> {
        if state.grid().dim() != model.dim() {
            return Err(Error::InvalidParameter(format!(
                "state has {} coordinates, model has {}",
                state.grid().dim(),
                model.dim()
            )));
        }
        let mask = NodeMask::of(state);
        mask.check()?;
        Ok(Self { jet: Jet::new(state, &model.groups())?, rho: state.density(), mask })
    }
}

/// `H psi` at every cell, with zero on masked cells where `V` is not finite.
fn hamiltonian_values(state: &ComplexField, model: &Model, local: &Local) -> Result<Vec<C64>> {
    let v = model.potential_on(state.grid())?;
    let hbar = model.hbar();
    let mut out = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        if !v[i].is_finite() {
            if local.mask.mask[i] {
                return Err(Error::UnboundedPotential(format!("V = {} at {:?}", v[i], state.grid().point_vec(i))));
            }
            out.push(C64::default());
            continue;
        }
        let mut h = local.jet.psi[i] * v[i];
        for (b, lap) in local.jet.lap.iter().enumerate() {
            h -= lap[i] * (hbar * hbar / (2.0 * model.masses()[b]));
        }
        out.push(h);
    }
    Ok(out)
}

fn body_velocity(state: &ComplexField, model: &Model, a: usize, imaginary: bool) -> Result<RandomVariable> {
    let axes = model.body_axes(a)?;
    let local = Local::new(state, model)?;
    let c = model.hbar() / model.mass(a)?;
    let numerators = axes
        .map(|k| {
            local
                .jet
                .psi
                .iter()
                .zip(&local.jet.grad[k])
                .map(|(p, g)| {
                    let z = p.conj() * g;
                    c * if imaginary { z.im } else { z.re }
                })
                .collect()
        })
        .collect();
    RandomVariable::from_numerators(state.grid().clone(), numerators, &local.rho, local.mask.mask)
}

/// `v_a = (hbar / m_a) Im(psi* grad_a psi) / rho`.
pub fn drift_velocity(state: &ComplexField, model: &Model, a: usize) -> Result<RandomVariable> {
    body_velocity(state, model, a, true)
}

/// `u_a = (hbar / m_a) Re(psi* grad_a psi) / rho = (hbar / 2 m_a) grad_a rho / rho`.
pub fn osmotic_velocity(state: &ComplexField, model: &Model, a: usize) -> Result<RandomVariable> {
    body_velocity(state, model, a, false)
}

/// `E = Re(psi* H psi) / rho`.
pub fn energy_rv(state: &ComplexField, model: &Model) -> Result<RandomVariable> {
    let local = Local::new(state, model)?;
    let h = hamiltonian_values(state, model, &local)?;
    let num = local.jet.psi.iter().zip(&h).map(|(p, h)| (p.conj() * h).re).collect();
    RandomVariable::from_numerators(state.grid().clone(), vec![num], &local.rho, local.mask.mask)
}

/// `Q = -sum_b (hbar^2 / 2 m_b) lap_b(sqrt rho) / sqrt rho` on unmasked cells.
pub fn quantum_potential(state: &ComplexField, model: &Model) -> Result<RealField> {
    let local = Local::new(state, model)?;
    let hbar = model.hbar();
    let n = local.rho.len();
    let mut q = vec![0.0; n];
    if state.closed().is_some() {
        // lap(sqrt rho) / sqrt rho = Re(lap psi / psi) + |Im(grad psi / psi)|^2
        for (b, range) in model.groups().into_iter().enumerate() {
            let c = hbar * hbar / (2.0 * model.masses()[b]);
            for i in (0..n).filter(|&i| local.mask.mask[i]) {
                let psi = local.jet.psi[i];
                let mut d = (local.jet.lap[b][i] / psi).re;
                for k in range.clone() {
                    d += (local.jet.grad[k][i] / psi).im.powi(2);
                }
                q[i] -= c * d;
            }
        }
    } else {
        let sqrt_rho: Vec<C64> = local.rho.iter().map(|r| C64::new(r.sqrt(), 0.0)).collect();
        let spec = Spectrum::forward(state.grid(), &sqrt_rho)?;
        for (b, range) in model.groups().into_iter().enumerate() {
            let c = hbar * hbar / (2.0 * model.masses()[b]);
            let lap = spec.laplacian(range);
            for i in (0..n).filter(|&i| local.mask.mask[i]) {
                q[i] -= c * lap[i].re / sqrt_rho[i].re;
            }
        }
    }
    RealField::new(state.grid().clone(), q, local.mask.mask)
}

/// Energy in Madelung form `sum_a m_a |v_a|^2 / 2 + V + Q`.
pub fn energy_rv_madelung(state: &ComplexField, model: &Model) -> Result<RandomVariable> {
    let q = quantum_potential(state, model)?;
    let v = model.potential_on(state.grid())?;
    let mut e: Vec<f64> = (0..v.len()).map(|i| if q.mask()[i] { v[i] + q.values()[i] } else { 0.0 }).collect();
    for a in 0..model.n_bodies() {
        let vel = drift_velocity(state, model, a)?;
        let m = model.mass(a)?;
        for k in 0..vel.n_components() {
            let c = vel.component(k);
            for i in 0..e.len() {
                e[i] += 0.5 * m * c[i] * c[i];
            }
        }
    }
    RandomVariable::new(state.grid().clone(), vec![e], q.mask().to_vec())
}

/// `l_a = (r_a - r0) x m_a v_a` for a three-dimensional body.
pub fn angular_momentum(state: &ComplexField, model: &Model, a: usize, r0: [f64; 3]) -> Result<RandomVariable> {
    if model.body_dims() != 3 {
        return Err(Error::InvalidParameter(format!(
            "angular momentum needs three-dimensional bodies, model has {}",
            model.body_dims()
        )));
    }
    let vel = drift_velocity(state, model, a)?;
    let m = model.mass(a)?;
    let axes = model.body_axes(a)?;
    let grid = state.grid();
    let rel: Vec<[f64; 3]> = grid.map_points(|x| [x[axes.start] - r0[0], x[axes.start + 1] - r0[1], x[axes.start + 2] - r0[2]]);
    let num = vel.numerators().expect("drift velocity keeps numerators");
    let mut out = vec![vec![0.0; grid.len()]; 3];
    for i in 0..grid.len() {
        let r = rel[i];
        let p = [m * num[0][i], m * num[1][i], m * num[2][i]];
        out[0][i] = r[1] * p[2] - r[2] * p[1];
        out[1][i] = r[2] * p[0] - r[0] * p[2];
        out[2][i] = r[0] * p[1] - r[1] * p[0];
    }
    RandomVariable::from_numerators(grid.clone(), out, &state.density(), vel.mask().to_vec())
}

/// `<psi, -i hbar d_k psi>` for each axis of body `a`.
pub fn qm_momentum_expect(state: &ComplexField, model: &Model, a: usize) -> Result<Vec<C64>> {
    let axes = model.body_axes(a)?;
    let jet = Jet::new(state, &model.groups())?;
    let dv = state.grid().cell_volume();
    let hbar = model.hbar();
    Ok(axes
        .map(|k| {
            let g = &jet.grad[k];
            tree_sum(0..g.len(), &|i| jet.psi[i].conj() * g[i]) * C64::new(0.0, -hbar * dv)
        })
        .collect())
}

/// `||-i hbar d_k psi||^2 = <psi, (-i hbar d_k)^2 psi>` for each axis of body `a`.
pub fn qm_momentum_sq_expect(state: &ComplexField, model: &Model, a: usize) -> Result<Vec<f64>> {
    let axes = model.body_axes(a)?;
    let jet = Jet::new(state, &model.groups())?;
    let dv = state.grid().cell_volume();
    let hbar = model.hbar();
    Ok(axes
        .map(|k| {
            let g = &jet.grad[k];
            tree_sum(0..g.len(), &|i| g[i].norm_sqr()) * hbar * hbar * dv
        })
        .collect())
}

/// `Re <psi, H psi>`.
pub fn qm_energy_expect(state: &ComplexField, model: &Model) -> Result<f64> {
    let local = Local::new(state, model)?;
    let h = hamiltonian_values(state, model, &local)?;
    let psi = &local.jet.psi;
    Ok(tree_sum(0..h.len(), &|i| (psi[i].conj() * h[i]).re) * state.grid().cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::born::{born_measure, expectation, mean, variance, MomentKind};
    use crate::catalog::{gaussian_packet, harmonic_eigenstate, hydrogen_state, superpose};
    use crate::grid::make_grid;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn free_1d() -> (Model, crate::grid::Grid) {
        (Model::free(vec![1.0], 1, 1.0).unwrap(), make_grid(&[(-20.0, 20.0)], &[512]).unwrap())
    }

    #[test]
    fn gaussian_velocities() {
        let (model, g) = free_1d();
        let sigma = 1.3;
        let psi = gaussian_packet(&[0.0], sigma, &[2.0], &model).unwrap().discretize(&g).unwrap();
        let v = drift_velocity(&psi, &model, 0).unwrap();
        let u = osmotic_velocity(&psi, &model, 0).unwrap();
        for i in 0..g.len() {
            if let Some(vi) = v.component_field(0).get(i) {
                assert!((vi - 2.0).abs() <= 1e-8);
                let x = g.coord_of(i, 0);
                let exact = -x / (2.0 * sigma * sigma);
                assert!((u.component(0)[i] - exact).abs() <= 1e-8 * exact.abs().max(1e-3));
            }
        }
        let m = born_measure(&psi).unwrap();
        assert!(mean(&u, &m).unwrap().abs() <= 1e-8);
        let p = qm_momentum_expect(&psi, &model, 0).unwrap();
        assert!((p[0].re - 2.0).abs() <= 1e-8 && p[0].im.abs() <= 1e-10);
        assert!((mean(&v, &m).unwrap() - p[0].re).abs() <= 1e-10);
        // spectral route agrees
        let spectral = psi.clone().without_closed();
        let vs = drift_velocity(&spectral, &model, 0).unwrap();
        let m2 = born_measure(&spectral).unwrap();
        assert!((mean(&vs, &m2).unwrap() - 2.0).abs() <= 1e-8);
    }

    #[test]
    fn quantum_potential_of_gaussian() {
        let (model, g) = free_1d();
        let sigma = 0.9;
        let psi = gaussian_packet(&[0.0], sigma, &[0.7], &model).unwrap().discretize(&g).unwrap();
        for field in [psi.clone(), psi.clone().without_closed()] {
            let q = quantum_potential(&field, &model).unwrap();
            let rho_max = field.density().iter().fold(0.0_f64, |a, &b| a.max(b));
            for i in 0..g.len() {
                if field.density()[i] < 1e-6 * rho_max {
                    continue;
                }
                let x = g.coord_of(i, 0);
                let exact = -0.5 * (x * x / (4.0 * sigma.powi(4)) - 1.0 / (2.0 * sigma * sigma));
                assert!((q.values()[i] - exact).abs() <= 1e-8 * exact.abs().max(1.0), "{x}: {} vs {exact}", q.values()[i]);
            }
        }
    }

    #[test]
    fn oscillator_energy_fields() {
        let model = Model::harmonic(vec![1.0], 1, 1.0, 1.0).unwrap();
        let g = make_grid(&[(-10.0, 10.0)], &[256]).unwrap();
        for n in 0..4 {
            let psi = harmonic_eigenstate(&[n], 1.0, &model).unwrap().discretize(&g).unwrap();
            let e = energy_rv(&psi, &model).unwrap();
            let exact = n as f64 + 0.5;
            for i in 0..g.len() {
                if let Some(x) = e.component_field(0).get(i) {
                    assert!((x - exact).abs() <= 1e-8 * exact.max(1.0) * 1e2, "n={n}: {x}");
                }
            }
            let m = born_measure(&psi).unwrap();
            assert!(variance(&e, &m).unwrap() <= 1e-10 * exact * exact);
            assert!((qm_energy_expect(&psi, &model).unwrap() - exact).abs() <= 1e-8);
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = superpose(
            &[re(h), re(h)],
            &[harmonic_eigenstate(&[0], 1.0, &model).unwrap(), harmonic_eigenstate(&[1], 1.0, &model).unwrap()],
        )
        .unwrap();
        let psi = s.discretize(&g).unwrap();
        let e = energy_rv(&psi, &model).unwrap();
        let m = born_measure(&psi).unwrap();
        assert!((mean(&e, &m).unwrap() - 1.0).abs() <= 1e-6);
        assert!(variance(&e, &m).unwrap() > 1e-3);
        let e2 = energy_rv_madelung(&psi, &model).unwrap();
        for i in 0..g.len() {
            if psi.density()[i] > 1e-6 {
                let (a, b) = (e.component(0)[i], e2.component(0)[i]);
                assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn hydrogen_fields() {
        let model = Model::hydrogen();
        let g = make_grid(&[(-12.0, 12.0); 3], &[32, 32, 32]).unwrap();
        let psi = hydrogen_state(2, 1, 1).unwrap().discretize(&g).unwrap();
        let l = angular_momentum(&psi, &model, 0, [0.0, 0.0, 0.0]).unwrap();
        for i in 0..g.len() {
            if l.mask()[i] {
                assert!((l.component(2)[i] - 1.0).abs() <= 1e-9);
            }
        }
        let e = energy_rv(&psi, &model).unwrap();
        assert!(e.component_field(0).max_abs() > 0.12);
        for i in (0..g.len()).filter(|&i| e.mask()[i]) {
            assert!((e.component(0)[i] + 0.125).abs() <= 1e-9);
        }
        let ground = hydrogen_state(1, 0, 0).unwrap().discretize(&g).unwrap();
        let q = quantum_potential(&ground, &model).unwrap();
        let v = model.potential_on(&g).unwrap();
        for i in (0..g.len()).filter(|&i| q.mask()[i]) {
            assert!((q.values()[i] + v[i] + 0.5).abs() <= 1e-6);
        }
        let vel = drift_velocity(&ground, &model, 0).unwrap();
        assert_eq!(vel.n_components(), 3);
        assert!((0..3).all(|k| vel.component(k).iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn moments_and_mask() {
        let (model, g) = free_1d();
        let psi = gaussian_packet(&[0.0], 1.0, &[0.0], &model).unwrap().discretize(&g).unwrap();
        let mask = NodeMask::of(&psi);
        assert!(mask.masked_mass <= MASKED_MASS_LIMIT);
        assert!(mask.masked_fraction() > 0.0);
        let m = born_measure(&psi).unwrap();
        let u = osmotic_velocity(&psi, &model, 0).unwrap();
        let eu2 = expectation(&u, &m, 2, MomentKind::Raw).unwrap()[0];
        let p2 = qm_momentum_sq_expect(&psi, &model, 0).unwrap()[0];
        assert!((p2 - eu2).abs() <= 1e-6 * p2);
        assert!((p2 - 0.25).abs() <= 1e-8);
    }
}
