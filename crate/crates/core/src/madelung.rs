//! Residuals of the continuity, force and vorticity equations of the
//! Madelung system, evaluated on wavefunction snapshots.
//!
//! All quantities are expressed through `w_j = d_j psi / psi`,
//! `W_jk = d_j d_k psi / psi` and `T_kb = d_k lap_b psi`, which are available
//! either from a closed form or spectrally. With these,
//! `d_j v_I = (hbar / m_I) Im(W_Ij - w_I w_j)` and
//! `lap_b(sqrt rho) / sqrt rho = Re(sum_{j in b} W_jj) + sum_{j in b} (Im w_j)^2`.

use std::ops::Range;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::catalog::{Model, Potential};
use crate::error::{Error, Result};
use crate::grid::{tree_sum, ComplexField, Grid, Jet};
use crate::observables::NodeMask;
use crate::spectral::Spectrum;

/// Reports with at least this fraction of masked cells are flagged.
pub const UNRELIABLE_MASKED_FRACTION: f64 = 0.2;

/// Norms below this are treated as round-off in convergence fits.
pub const SATURATION_LEVEL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Continuity,
    Force,
    Vorticity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub equation: Equation,
    /// Root mean square with respect to the Born measure over unmasked cells.
    pub norm_l2: f64,
    pub norm_max: f64,
    /// Smallest grid spacing and time step.
    pub resolution: (f64, f64),
    pub masked_fraction: f64,
    pub unreliable: bool,
}

impl ResidualReport {
    fn new(equation: Equation, sq: &[f64], weights: &[f64], mask: &[bool], resolution: (f64, f64)) -> Self {
        let n = sq.len();
        let total = tree_sum(0..n, &|i| if mask[i] { weights[i] } else { 0.0 });
        let l2 = tree_sum(0..n, &|i| if mask[i] { sq[i] * weights[i] } else { 0.0 });
        let norm_max = (0..n).filter(|&i| mask[i]).fold(0.0_f64, |a, i| a.max(sq[i].sqrt()));
        let masked_fraction = mask.iter().filter(|m| !**m).count() as f64 / n as f64;
        Self {
            equation,
            norm_l2: if total > 0.0 { (l2 / total).sqrt() } else { 0.0 },
            norm_max,
            resolution,
            masked_fraction,
            unreliable: masked_fraction >= UNRELIABLE_MASKED_FRACTION,
        }
    }
}

fn h_min(grid: &Grid) -> f64 {
    grid.spacings().into_iter().fold(f64::INFINITY, f64::min)
}

/// Sixth-order central difference weights for offsets 1, 2, 3.
const FD6: [f64; 3] = [0.75, -0.15, 1.0 / 60.0];

fn fd_step(grid: &Grid) -> f64 {
    (1e-2 * h_min(grid)).clamp(1e-4, 1e-2)
}

/// Sixth-order central derivative of `f` along `axis` at `x`.
fn fd6<T, F>(f: &F, x: &[f64], axis: usize, eps: f64) -> T
where
    T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T> + Default,
    F: Fn(&[f64]) -> T,
{
    let mut y = x.to_vec();
    let mut acc = T::default();
    for (s, &c) in FD6.iter().enumerate() {
        let d = (s + 1) as f64 * eps;
        y[axis] = x[axis] + d;
        let p = f(&y);
        y[axis] = x[axis] - d;
        let m = f(&y);
        acc = acc + (p - m) * c;
    }
    acc * (1.0 / eps)
}

/// Value, gradient, Hessian and `d_k lap_b` at every cell.
struct FullJet {
    psi: Vec<C64>,
    grad: Vec<Vec<C64>>,
    /// Row-major `d x d`.
    hess: Vec<Vec<C64>>,
    /// `third[k][b] = d_k lap_b psi`.
    third: Vec<Vec<Vec<C64>>>,
}

impl FullJet {
    fn new(f: &ComplexField, groups: &[Range<usize>]) -> Result<Self> {
        let grid = f.grid();
        let d = grid.dim();
        let n = grid.len();
        if let Some(b) = f.closed() {
            let eps = fd_step(grid);
            let form = &b.form;
            let scale = b.scale;
            let rows: Vec<(Vec<C64>, Vec<C64>, Vec<C64>)> = grid.map_points(|x| {
                let mut g = vec![C64::default(); d];
                let mut h = vec![C64::default(); d * d];
                form.jet(x, &mut g, &mut h);
                let mut t = Vec::with_capacity(d * groups.len());
                for k in 0..d {
                    for grp in groups {
                        let lap = |y: &[f64]| form.laplacian(y, grp.clone());
                        t.push(scale * fd6(&lap, x, k, eps));
                    }
                }
                (g.into_iter().map(|v| scale * v).collect(), h.into_iter().map(|v| scale * v).collect(), t)
            });
            let mut grad = vec![Vec::with_capacity(n); d];
            let mut hess = vec![Vec::with_capacity(n); d * d];
            let mut third = vec![vec![Vec::with_capacity(n); groups.len()]; d];
            for (g, h, t) in rows {
                for (k, v) in g.into_iter().enumerate() {
                    grad[k].push(v);
                }
                for (k, v) in h.into_iter().enumerate() {
                    hess[k].push(v);
                }
                for (idx, v) in t.into_iter().enumerate() {
                    third[idx / groups.len()][idx % groups.len()].push(v);
                }
            }
            return Ok(Self { psi: f.values().to_vec(), grad, hess, third });
        }
        let spec = Spectrum::forward(grid, f.values())?;
        let unit = |axes: &[usize]| {
            let mut o = vec![0; d];
            for &a in axes {
                o[a] += 1;
            }
            o
        };
        let grad = (0..d).map(|k| spec.derivative(&unit(&[k]))).collect();
        let mut hess = vec![Vec::new(); d * d];
        for j in 0..d {
            for k in j..d {
                let h = spec.derivative(&unit(&[j, k]));
                hess[k * d + j] = h.clone();
                hess[j * d + k] = h;
            }
        }
        let third = (0..d)
            .map(|k| {
                groups
                    .iter()
                    .map(|grp| {
                        let mut acc = vec![C64::default(); n];
                        for j in grp.clone() {
                            let t = spec.derivative(&unit(&[k, j, j]));
                            acc.iter_mut().zip(t).for_each(|(a, v)| *a += v);
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(Self { psi: f.values().to_vec(), grad, hess, third })
    }
}

fn check_snapshots(snapshots: &[ComplexField; 3], dt: f64, model: &Model) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    snapshots[0].grid().check_same(snapshots[1].grid())?;
    snapshots[1].grid().check_same(snapshots[2].grid())?;
    if snapshots[1].grid().dim() != model.dim() {
        return Err(Error::InvalidParameter("snapshot grid does not match the model".into()));
    }
    Ok(())
}

/// Cells unmasked in every snapshot, and Born weights of the middle one.
fn joint_mask(snapshots: &[ComplexField]) -> (Vec<bool>, Vec<f64>) {
    let masks: Vec<NodeMask> = snapshots.iter().map(NodeMask::of).collect();
    let n = masks[0].mask.len();
    let mask = (0..n).map(|i| masks.iter().all(|m| m.mask[i])).collect();
    let weights = snapshots[snapshots.len() / 2].density();
    (mask, weights)
}

/// `d_t rho + sum_a div_a(rho v_a)` at the middle of three snapshots spaced
/// by `dt`, with `div_a(rho v_a) = (hbar / m_a) Im(psi* lap_a psi)`.
pub fn continuity_residual(snapshots: &[ComplexField; 3], dt: f64, model: &Model) -> Result<ResidualReport> {
    check_snapshots(snapshots, dt, model)?;
    let mid = &snapshots[1];
    let jet = Jet::new(mid, &model.groups())?;
    let rho_p = snapshots[2].density();
    let rho_m = snapshots[0].density();
    let hbar = model.hbar();
    let n = rho_p.len();
    let sq: Vec<f64> = (0..n)
        .map(|i| {
            let mut r = (rho_p[i] - rho_m[i]) / (2.0 * dt);
            for (b, lap) in jet.lap.iter().enumerate() {
                r += hbar / model.masses()[b] * (jet.psi[i].conj() * lap[i]).im;
            }
            r * r
        })
        .collect();
    let (mask, weights) = joint_mask(snapshots);
    Ok(ResidualReport::new(Equation::Continuity, &sq, &weights, &mask, (h_min(mid.grid()), dt)))
}

fn potential_gradient(model: &Model, grid: &Grid) -> Result<Vec<Vec<f64>>> {
    let d = grid.dim();
    if let Potential::Sampled { values, .. } = model.potential() {
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        let spec = Spectrum::forward(grid, &v)?;
        return Ok((0..d)
            .map(|k| {
                let mut o = vec![0; d];
                o[k] = 1;
                spec.derivative(&o).into_iter().map(|z| z.re).collect()
            })
            .collect());
    }
    let rows: Vec<Result<Vec<f64>>> = grid.map_points(|x| {
        let mut g = vec![0.0; d];
        model.potential_gradient(x, &mut g).map(|_| g)
    });
    let mut out = vec![Vec::with_capacity(grid.len()); d];
    for r in rows {
        for (k, v) in r?.into_iter().enumerate() {
            out[k].push(v);
        }
    }
    Ok(out)
}

fn velocity_of(f: &ComplexField, model: &Model, axes: Range<usize>) -> Result<Vec<Vec<f64>>> {
    let jet = Jet::new(f, &model.groups())?;
    let hbar = model.hbar();
    Ok(axes
        .map(|k| {
            let m = model.masses()[model.body_of_axis(k)];
            jet.psi.iter().zip(&jet.grad[k]).map(|(p, g)| hbar / m * (g / p).im).collect()
        })
        .collect())
}

/// `m_a (d_t v_a + sum_b (v_b . grad_b) v_a) + grad_a V + grad_a Q` at the
/// middle of three snapshots, in the Euclidean norm over the body's axes.
pub fn force_residual(snapshots: &[ComplexField; 3], dt: f64, model: &Model, a: usize) -> Result<ResidualReport> {
    check_snapshots(snapshots, dt, model)?;
    let axes = model.body_axes(a)?;
    let (mask, weights) = joint_mask(snapshots);
    let mid = &snapshots[1];
    let grid = mid.grid();
    let d = grid.dim();
    let n = grid.len();
    let groups = model.groups();
    let hbar = model.hbar();
    let ma = model.mass(a)?;
    let jet = FullJet::new(mid, &groups)?;
    let dv = potential_gradient(model, grid)?;
    let v_p = velocity_of(&snapshots[2], model, axes.clone())?;
    let v_m = velocity_of(&snapshots[0], model, axes.clone())?;
    let axis_mass: Vec<f64> = (0..d).map(|k| model.masses()[model.body_of_axis(k)]).collect();
    let mut sq = vec![0.0; n];
    let mut w = vec![C64::default(); d];
    for i in (0..n).filter(|&i| mask[i]) {
        let psi = jet.psi[i];
        for k in 0..d {
            w[k] = jet.grad[k][i] / psi;
        }
        let hw = |j: usize, k: usize| jet.hess[j * d + k][i] / psi;
        let mut r2 = 0.0;
        for (slot, ax) in axes.clone().enumerate() {
            let dvdt = (v_p[slot][i] - v_m[slot][i]) / (2.0 * dt);
            let mut advect = 0.0;
            for j in 0..d {
                let vj = hbar / axis_mass[j] * w[j].im;
                advect += vj * hbar / ma * (hw(ax, j) - w[ax] * w[j]).im;
            }
            let mut grad_q = 0.0;
            for (b, grp) in groups.iter().enumerate() {
                let lap_ratio: C64 = grp.clone().map(|j| hw(j, j)).sum();
                let mut dd = (jet.third[ax][b][i] / psi - lap_ratio * w[ax]).re;
                for j in grp.clone() {
                    dd += 2.0 * w[j].im * (hw(j, ax) - w[j] * w[ax]).im;
                }
                grad_q -= hbar * hbar / (2.0 * model.masses()[b]) * dd;
            }
            let r = ma * (dvdt + advect) + dv[ax][i] + grad_q;
            r2 += r * r;
        }
        sq[i] = r2;
    }
    Ok(ResidualReport::new(Equation::Force, &sq, &weights, &mask, (h_min(grid), dt)))
}

/// Largest antisymmetrized derivative `m_I d_J v_I - m_J d_I v_J` of a
/// pointwise velocity field, by sixth-order central differences.
///
/// `weights` defaults to uniform; `mask` defaults to every cell.
pub fn velocity_vorticity_residual<F>(
    grid: &Grid,
    axis_masses: &[f64],
    velocity: F,
    mask: Option<&[bool]>,
    weights: Option<&[f64]>,
) -> Result<ResidualReport>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    let d = grid.dim();
    if axis_masses.len() != d {
        return Err(Error::InvalidParameter(format!("{} masses for {} axes", axis_masses.len(), d)));
    }
    let eps = fd_step(grid);
    let all = vec![true; grid.len()];
    let uniform = vec![1.0; grid.len()];
    let mask = mask.unwrap_or(&all);
    let weights = weights.unwrap_or(&uniform);
    // d_J v_I for every ordered pair, as a row-major d x d block per cell.
    let jac: Vec<Vec<f64>> = grid.map_points(|x| {
        let mut out = vec![0.0; d * d];
        for j in 0..d {
            let dv: Vec<f64> = fd6_vec(&velocity, x, j, eps, d);
            for i in 0..d {
                out[i * d + j] = dv[i];
            }
        }
        out
    });
    worst_pair(grid, axis_masses, |c, i, j| jac[c][i * d + j], mask, weights, (h_min(grid), 0.0))
}

fn fd6_vec<F>(velocity: &F, x: &[f64], axis: usize, eps: f64, d: usize) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut y = x.to_vec();
    let mut acc = vec![0.0; d];
    let mut p = vec![0.0; d];
    let mut m = vec![0.0; d];
    for (s, &c) in FD6.iter().enumerate() {
        let h = (s + 1) as f64 * eps;
        y[axis] = x[axis] + h;
        velocity(&y, &mut p);
        y[axis] = x[axis] - h;
        velocity(&y, &mut m);
        for k in 0..d {
            acc[k] += c * (p[k] - m[k]);
        }
    }
    acc.iter().map(|a| a / eps).collect()
}

fn worst_pair<J>(
    grid: &Grid,
    axis_masses: &[f64],
    jac: J,
    mask: &[bool],
    weights: &[f64],
    resolution: (f64, f64),
) -> Result<ResidualReport>
where
    J: Fn(usize, usize, usize) -> f64,
{
    let d = grid.dim();
    let n = grid.len();
    let mut worst = ResidualReport::new(Equation::Vorticity, &vec![0.0; n], weights, mask, resolution);
    for i in 0..d {
        for j in i + 1..d {
            let sq: Vec<f64> = (0..n)
                .map(|c| {
                    let r = axis_masses[i] * jac(c, i, j) - axis_masses[j] * jac(c, j, i);
                    r * r
                })
                .collect();
            let rep = ResidualReport::new(Equation::Vorticity, &sq, weights, mask, resolution);
            worst.norm_l2 = worst.norm_l2.max(rep.norm_l2);
            worst.norm_max = worst.norm_max.max(rep.norm_max);
        }
    }
    Ok(worst)
}

/// Quantum vorticity of the drift velocities of all bodies.
///
/// Closed-form states are differentiated pointwise; sampled states use the
/// flux route `d_J v_I = (d_J j_I - v_I d_J rho) / rho` with spectral
/// derivatives of `j_I = rho v_I`.
pub fn vorticity_residual(state: &ComplexField, model: &Model) -> Result<ResidualReport> {
    let grid = state.grid();
    if grid.dim() != model.dim() {
        return Err(Error::InvalidParameter("state grid does not match the model".into()));
    }
    let node = NodeMask::of(state);
    node.check()?;
    let rho = state.density();
    let masses = model.axis_masses();
    let hbar = model.hbar();
    let d = grid.dim();
    if let Some(b) = state.closed() {
        let form = b.form.clone();
        let velocity = |x: &[f64], out: &mut [f64]| {
            let mut g = vec![C64::default(); d];
            let psi = form.gradient(x, &mut g);
            for k in 0..d {
                out[k] = hbar / masses[k] * (g[k] / psi).im;
            }
        };
        return velocity_vorticity_residual(grid, &masses, velocity, Some(&node.mask), Some(&rho));
    }
    let jet = Jet::new(state, &model.groups())?;
    let flux: Vec<Vec<f64>> = (0..d)
        .map(|k| jet.psi.iter().zip(&jet.grad[k]).map(|(p, g)| hbar / masses[k] * (p.conj() * g).im).collect())
        .collect();
    let deriv = |values: &[f64], axis: usize| -> Result<Vec<f64>> {
        let c: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        let mut o = vec![0; d];
        o[axis] = 1;
        Ok(Spectrum::forward(grid, &c)?.derivative(&o).into_iter().map(|z| z.re).collect())
    };
    let drho: Vec<Vec<f64>> = (0..d).map(|k| deriv(&rho, k)).collect::<Result<_>>()?;
    let mut jac = vec![vec![0.0; d * d]; grid.len()];
    for i in 0..d {
        for j in 0..d {
            if i == j {
                continue;
            }
            let dj = deriv(&flux[i], j)?;
            for c in (0..grid.len()).filter(|&c| node.mask[c]) {
                let v = flux[i][c] / rho[c];
                jac[c][i * d + j] = (dj[c] - v * drho[j][c]) / rho[c];
            }
        }
    }
    worst_pair(grid, &masses, |c, i, j| jac[c][i * d + j], &node.mask, &rho, (h_min(grid), 0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolution {
    pub h: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Fit {
    /// Least-squares slope of `log norm` against `log` of the refinement parameter.
    Slope(f64),
    /// Every norm is at round-off level.
    Saturated,
}

impl Fit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            Fit::Slope(s) => Some(*s),
            Fit::Saturated => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub resolutions: Vec<Resolution>,
    pub continuity: Vec<ResidualReport>,
    pub force: Vec<ResidualReport>,
    pub vorticity: Vec<ResidualReport>,
    pub continuity_order: Fit,
    pub force_order: Fit,
    pub vorticity_order: Fit,
}

/// Log-log least-squares slope of `norms` against `params`.
pub fn fit_order(params: &[f64], norms: &[f64]) -> Fit {
    if norms.iter().all(|&x| x <= SATURATION_LEVEL) {
        return Fit::Saturated;
    }
    let xs: Vec<f64> = params.iter().map(|p| p.ln()).collect();
    let ys: Vec<f64> = norms.iter().map(|r| r.max(f64::MIN_POSITIVE).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Fit::Slope(sxy / sxx)
}

/// Residuals of body 0 over a refinement sequence. `build` returns three
/// snapshots spaced by the resolution's `dt`. Orders are fitted against `dt`
/// when it varies and against `h` otherwise.
pub fn convergence_study<F>(model: &Model, build: F, resolutions: &[Resolution]) -> Result<ConvergenceStudy>
where
    F: Fn(&Resolution) -> Result<[ComplexField; 3]>,
{
    if resolutions.len() < 3 {
        return Err(Error::InsufficientResolutions(resolutions.len()));
    }
    let refines = |f: fn(&Resolution) -> f64| resolutions.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    let by_dt = refines(|r| r.dt);
    if !by_dt && !refines(|r| r.h) {
        return Err(Error::InvalidParameter("resolutions must refine h or dt monotonically".into()));
    }
    let mut study = ConvergenceStudy {
        resolutions: resolutions.to_vec(),
        continuity: Vec::new(),
        force: Vec::new(),
        vorticity: Vec::new(),
        continuity_order: Fit::Saturated,
        force_order: Fit::Saturated,
        vorticity_order: Fit::Saturated,
    };
    for res in resolutions {
        let snaps = build(res)?;
        study.continuity.push(continuity_residual(&snaps, res.dt, model)?);
        study.force.push(force_residual(&snaps, res.dt, model, 0)?);
        let mut vort = vorticity_residual(&snaps[1], model)?;
        vort.resolution.1 = res.dt;
        study.vorticity.push(vort);
    }
    let params: Vec<f64> = resolutions.iter().map(|r| if by_dt { r.dt } else { r.h }).collect();
    let norms = |reps: &[ResidualReport]| reps.iter().map(|r| r.norm_l2).collect::<Vec<_>>();
    study.continuity_order = fit_order(&params, &norms(&study.continuity));
    study.force_order = fit_order(&params, &norms(&study.force));
    study.vorticity_order = fit_order(&params, &norms(&study.vorticity));
    Ok(study)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{gaussian_packet, harmonic_eigenstate, hydrogen_state, superpose};
    use crate::grid::make_grid;
    use crate::propagator::analytic_evolve;

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn triple(f: impl Fn(f64) -> ComplexField, t: f64, dt: f64) -> [ComplexField; 3] {
        [f(t - dt), f(t), f(t + dt)]
    }

    #[test]
    fn stationary_states_have_small_residuals() {
        let model = Model::harmonic(vec![1.0], 1, 1.0, 1.0).unwrap();
        let g = make_grid(&[(-10.0, 10.0)], &[256]).unwrap();
        let s = harmonic_eigenstate(&[2], 1.0, &model).unwrap();
        let snaps = triple(|t| analytic_evolve(&s, &g, t).unwrap(), 0.3, 0.01);
        let c = continuity_residual(&snaps, 0.01, &model).unwrap();
        assert!(c.norm_l2 <= 1e-10, "{c:?}");
        let f = force_residual(&snaps, 0.01, &model, 0).unwrap();
        assert!(f.norm_l2 <= 1e-8, "{f:?}");
    }

    #[test]
    fn free_gaussian_closed_form_residuals() {
        let model = Model::free(vec![1.0], 1, 1.0).unwrap();
        let g = make_grid(&[(-15.0, 15.0)], &[256]).unwrap();
        let s = gaussian_packet(&[-1.0], 1.0, &[1.5], &model).unwrap();
        let dt = 1e-4;
        let snaps = triple(|t| s.free_evolved(t).unwrap().sample(&g).unwrap(), 0.0, dt);
        assert!(continuity_residual(&snaps, dt, &model).unwrap().norm_l2 <= 1e-8);
        let f = force_residual(&snaps, dt, &model, 0).unwrap();
        assert!(f.norm_l2 <= 1e-8, "{f:?}");
    }

    #[test]
    fn negative_control_rotation() {
        let g = make_grid(&[(-2.0, 2.0); 3], &[8, 8, 8]).unwrap();
        let m = 1.7;
        let rep = velocity_vorticity_residual(
            &g,
            &[m, m, m],
            |x, out| {
                out[0] = -x[1];
                out[1] = x[0];
                out[2] = 0.0;
            },
            None,
            None,
        )
        .unwrap();
        assert!((rep.norm_max - 2.0 * m).abs() <= 1e-10);
        assert!((rep.norm_l2 - 2.0 * m).abs() <= 1e-10);
    }

    #[test]
    fn vorticity_vanishes_for_gradient_flows() {
        let model = Model::hydrogen();
        let g = make_grid(&[(-10.0, 10.0); 3], &[16, 16, 16]).unwrap();
        let psi = hydrogen_state(2, 1, 1).unwrap().discretize(&g).unwrap();
        assert!(vorticity_residual(&psi, &model).unwrap().norm_max <= 1e-6);
        // two bodies in one dimension each, entangled
        let m2 = Model::harmonic(vec![1.0, 2.0], 1, 1.0, 1.0).unwrap();
        let g2 = make_grid(&[(-8.0, 8.0), (-8.0, 8.0)], &[128, 128]).unwrap();
        let e = superpose(
            &[re(0.6), C64::new(0.0, 0.8)],
            &[harmonic_eigenstate(&[1, 0], 1.0, &m2).unwrap(), harmonic_eigenstate(&[0, 1], 1.0, &m2).unwrap()],
        )
        .unwrap();
        let psi2 = e.discretize(&g2).unwrap();
        let closed = vorticity_residual(&psi2, &m2).unwrap();
        assert!(closed.norm_l2 <= 1e-8, "{closed:?}");
        let spectral = vorticity_residual(&psi2.clone().without_closed(), &m2).unwrap();
        assert!(spectral.norm_l2 <= 1e-6, "{spectral:?}");
    }

    #[test]
    fn fit_and_study_errors() {
        assert_eq!(fit_order(&[1.0, 0.5, 0.25], &[1e-12, 1e-12, 1e-12]), Fit::Saturated);
        let s = fit_order(&[0.4, 0.2, 0.1], &[1.6e-3, 4e-4, 1e-4]).slope().unwrap();
        assert!((s - 2.0).abs() < 1e-12);
        let model = Model::free(vec![1.0], 1, 1.0).unwrap();
        let res = [Resolution { h: 0.1, dt: 0.1 }];
        let err = convergence_study(&model, |_| unreachable!(), &res).unwrap_err();
        assert_eq!(err, Error::InsufficientResolutions(1));
    }
}
