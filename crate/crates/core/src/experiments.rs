//! End-to-end drivers: the double-slit comparison, energy moment tables and
//! the uncertainty decomposition.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::born::{born_measure, expectation, mean, MomentKind, RandomVariable};
use crate::catalog::{double_slit_model, gaussian_packet, CatalogState, Model, WhichSlits};
use crate::error::{Error, Result};
use crate::grid::{inner_product, laplacian_axes, tree_sum, ComplexField, Grid};
use crate::observables::{drift_velocity, energy_rv, osmotic_velocity, qm_momentum_expect, qm_momentum_sq_expect};
use crate::propagator::Propagator;

/// Committed default geometry and evolution parameters for the double slit.
pub const DEFAULT_DOUBLE_SLIT: &str = include_str!("../data/double_slit_default.json");

/// L1 distance between the two-slit pattern and the single-slit mixture
/// that the default configuration must reach.
pub const DEFAULT_MIN_DISTANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub extents: Vec<(f64, f64)>,
    pub points: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(&self.extents, &self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub center: Vec<f64>,
    pub sigma: f64,
    pub k0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSpec {
    pub x: f64,
    pub thickness: f64,
    pub slit_centers: (f64, f64),
    pub slit_width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleSlitConfig {
    pub grid: GridSpec,
    pub mass: f64,
    pub hbar: f64,
    pub packet: PacketSpec,
    pub barrier: BarrierSpec,
    pub detector_x: f64,
    pub dt: f64,
    pub steps: usize,
    /// Local maxima below this fraction of the peak are not fringes.
    pub fringe_threshold: f64,
}

impl DoubleSlitConfig {
    pub fn default_config() -> Self {
        serde_json::from_str(DEFAULT_DOUBLE_SLIT).expect("committed default parses")
    }

    pub fn model(&self, which: WhichSlits) -> Result<Model> {
        let b = &self.barrier;
        double_slit_model(b.x, b.thickness, b.slit_centers, b.slit_width, b.height, which, self.mass, self.hbar)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Collection {
    TimeIntegrated,
    Snapshot,
}

/// Probability arriving along the detector line, per bin of `y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorHistogram {
    pub axis: String,
    pub bin_edges: Vec<f64>,
    /// Normalized by the transmitted mass.
    pub mass_per_bin: Vec<f64>,
    pub collection: Collection,
    /// Time-integrated positive flux before normalization.
    pub transmitted_mass: f64,
    /// Share of the integrated absolute flux that was negative.
    pub clipped_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlitRun {
    pub which: WhichSlits,
    pub histogram: DetectorHistogram,
    /// Time-integrated signed flux through the detector line.
    pub net_flux_mass: f64,
    /// Mass upstream of the detector line at the end of the run.
    pub remaining_mass: f64,
    /// `net_flux_mass + remaining_mass`, which should be 1.
    pub mass_budget: f64,
    pub final_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoubleSlitResult {
    pub both: SlitRun,
    pub left: SlitRun,
    pub right: SlitRun,
    /// `(sigma_left + sigma_right) / 2`.
    pub mixture: Vec<f64>,
    /// L1 distance between `sigma_double` and the mixture.
    pub distance: f64,
    /// L1 distance between `sigma_left(y)` and `sigma_right(-y)`.
    pub mirror_difference: f64,
    pub fringes_double: usize,
    pub fringes_mixture: usize,
}

fn checked_grid(config: &DoubleSlitConfig) -> Result<Grid> {
    let grid = config.grid.build()?;
    if grid.dim() != 2 {
        return Err(Error::InvalidParameter("the double slit runs on a two-dimensional grid".into()));
    }
    let barrier_end = config.barrier.x + config.barrier.thickness;
    if !(config.detector_x > barrier_end) || grid.locate(&[config.detector_x, 0.0]).is_none() {
        return Err(Error::InvalidParameter(format!(
            "detector at x = {} must lie inside the grid and downstream of the barrier end {barrier_end}",
            config.detector_x
        )));
    }
    Ok(grid)
}

/// One evolution with the given slits open.
pub fn run_slit(config: &DoubleSlitConfig, which: WhichSlits) -> Result<SlitRun> {
    slit_on(config, &checked_grid(config)?, which)
}

fn slit_on(config: &DoubleSlitConfig, grid: &Grid, which: WhichSlits) -> Result<SlitRun> {
    let model = config.model(which)?;
    let p = &config.packet;
    let psi0 = gaussian_packet(&p.center, p.sigma, &p.k0, &model)?.discretize(grid)?;
    let prop = Propagator::new(grid, &model, config.dt)?;
    let ax = grid.axes()[0];
    let col = ((config.detector_x - ax.lo) / ax.spacing()).floor() as usize;
    let x_col = ax.coord(col);
    let ny = grid.axes()[1].points;
    let dy = grid.spacing(1);
    let c = config.hbar / config.mass;
    let flux_at = |psi: &[C64]| -> Vec<f64> {
        let dx = prop.derivative(psi, 0);
        (0..ny).map(|j| c * (psi[col * ny + j].conj() * dx[col * ny + j]).im).collect()
    };
    let mut psi = psi0.values().to_vec();
    let mut prev = flux_at(&psi);
    let mut positive = vec![0.0; ny];
    let mut net = 0.0;
    let mut negative = 0.0;
    for s in 1..=config.steps {
        prop.step(&mut psi);
        if psi.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFinite { step: s });
        }
        let cur = flux_at(&psi);
        for j in 0..ny {
            let (a, b) = (prev[j], cur[j]);
            let dt = 0.5 * config.dt;
            positive[j] += (a.max(0.0) + b.max(0.0)) * dt * dy;
            negative += (a.min(0.0) + b.min(0.0)).abs() * dt * dy;
            net += (a + b) * dt * dy;
        }
        prev = cur;
    }
    let transmitted: f64 = positive.iter().sum();
    if !(transmitted >= 1e-3) {
        return Err(Error::NoTransmission { mass: transmitted });
    }
    let dv = grid.cell_volume();
    // Cells straddling the detector line count half.
    let remaining = tree_sum(0..psi.len(), &|i| {
        let x = grid.coord_of(i, 0);
        let w = if x < x_col - 1e-12 * ax.spacing() {
            1.0
        } else if (x - x_col).abs() <= 1e-12 * ax.spacing() {
            0.5
        } else {
            0.0
        };
        w * psi[i].norm_sqr()
    }) * dv;
    let ay = grid.axes()[1];
    let bin_edges = (0..=ny).map(|j| ay.lo + j as f64 * dy).collect();
    let histogram = DetectorHistogram {
        axis: "y".into(),
        bin_edges,
        mass_per_bin: positive.iter().map(|m| m / transmitted).collect(),
        collection: Collection::TimeIntegrated,
        transmitted_mass: transmitted,
        clipped_fraction: negative / (negative + transmitted),
    };
    let final_norm = ComplexField::new(grid.clone(), psi)?.norm();
    Ok(SlitRun { which, histogram, net_flux_mass: net, remaining_mass: remaining, mass_budget: net + remaining, final_norm })
}

/// Local maxima at or above `threshold` times the peak.
pub fn count_fringes(hist: &[f64], threshold: f64) -> usize {
    let peak = hist.iter().fold(0.0_f64, |a, &b| a.max(b));
    let n = hist.len();
    (1..n.saturating_sub(1))
        .filter(|&i| hist[i] > hist[i - 1] && hist[i] >= hist[i + 1] && hist[i] >= threshold * peak)
        .count()
}

fn l1(a: &[f64], b: impl Iterator<Item = f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Runs both-slit, left-only and right-only evolutions from the same packet
/// and compares the time-integrated detector flux.
pub fn run_double_slit(config: &DoubleSlitConfig) -> Result<DoubleSlitResult> {
    let grid = checked_grid(config)?;
    let (both, (left, right)) = rayon::join(
        || slit_on(config, &grid, WhichSlits::Both),
        || rayon::join(|| slit_on(config, &grid, WhichSlits::Left), || slit_on(config, &grid, WhichSlits::Right)),
    );
    let (both, left, right) = (both?, left?, right?);
    let mixture: Vec<f64> = left
        .histogram
        .mass_per_bin
        .iter()
        .zip(&right.histogram.mass_per_bin)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let distance = l1(&both.histogram.mass_per_bin, mixture.iter().copied());
    let mirror_difference = l1(&left.histogram.mass_per_bin, right.histogram.mass_per_bin.iter().rev().copied());
    Ok(DoubleSlitResult {
        fringes_double: count_fringes(&both.histogram.mass_per_bin, config.fringe_threshold),
        fringes_mixture: count_fringes(&mixture, config.fringe_threshold),
        both,
        left,
        right,
        mixture,
        distance,
        mirror_difference,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub observable: String,
    pub order: u32,
    pub kolmogorov: f64,
    pub qm: f64,
    pub abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentTable {
    pub rows: Vec<MomentRow>,
}

impl MomentTable {
    pub fn row(&self, observable: &str, order: u32) -> Option<&MomentRow> {
        self.rows.iter().find(|r| r.observable == observable && r.order == order)
    }
}

fn apply_hamiltonian(f: &ComplexField, model: &Model) -> Result<ComplexField> {
    let v = model.potential_on(f.grid())?;
    let hbar = model.hbar();
    let mut out: Vec<C64> = f.values().iter().zip(&v).map(|(p, v)| p * v).collect();
    for (b, grp) in model.groups().into_iter().enumerate() {
        let lap = laplacian_axes(f, grp)?;
        let c = hbar * hbar / (2.0 * model.masses()[b]);
        out.iter_mut().zip(lap.values()).for_each(|(o, l)| *o -= l * c);
    }
    ComplexField::new(f.grid().clone(), out)
}

/// Compares `E[E^k]` under the Born measure with `<psi, H^k psi>`, plus the
/// moments of the first coordinate as a control.
///
/// For eigen-superpositions `H^k psi` is taken from the exact decomposition;
/// otherwise `H` is applied spectrally `k` times.
pub fn moment_divergence_report(state: &CatalogState, model: &Model, grid: &Grid, k_max: u32) -> Result<MomentTable> {
    if k_max < 1 {
        return Err(Error::InvalidParameter("k_max must be at least 1".into()));
    }
    let sample = state.sample(grid)?;
    let scale = C64::new(1.0 / sample.norm(), 0.0);
    let psi = sample.scaled(scale);
    let measure = born_measure(&psi)?;
    let e = energy_rv(&psi, model)?;
    let x = RandomVariable::coordinate(grid, 0)?;
    let rho = psi.density();
    let dv = grid.cell_volume();
    let mut rows = Vec::new();
    let mut power = psi.clone().without_closed();
    for k in 1..=k_max {
        let kolmogorov = expectation(&e, &measure, k, MomentKind::Raw)?[0];
        let hk = if state.is_stationary_superposition() {
            let form = std::sync::Arc::new(state.hamiltonian_power(k)?);
            ComplexField::from_closed(grid.clone(), form)?.scaled(scale)
        } else {
            power = apply_hamiltonian(&power, model)?;
            power.clone()
        };
        let qm = inner_product(&psi, &hk)?.re;
        rows.push(MomentRow { observable: "energy".into(), order: k, kolmogorov, qm, abs_diff: (kolmogorov - qm).abs() });
    }
    for k in 1..=k_max {
        let kolmogorov = expectation(&x, &measure, k, MomentKind::Raw)?[0];
        let qm = tree_sum(0..rho.len(), &|i| grid.coord_of(i, 0).powi(k as i32) * rho[i]) * dv;
        rows.push(MomentRow { observable: "position".into(), order: k, kolmogorov, qm, abs_diff: (kolmogorov - qm).abs() });
    }
    Ok(MomentTable { rows })
}

/// Per-axis spreads for one body.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UncertaintyReport {
    pub sigma_x: Vec<f64>,
    pub sigma_p_qm: Vec<f64>,
    /// `m sigma_v`.
    pub m_sigma_v: Vec<f64>,
    /// `m sqrt(E[u^2])`.
    pub m_sigma_u: Vec<f64>,
    pub qm_product: Vec<f64>,
    pub drift_product: Vec<f64>,
    /// `|sigma_p^2 - m^2 (sigma_v^2 + E[u^2])|`.
    pub decomposition_residual: Vec<f64>,
    /// Largest residual relative to `sigma_p^2`.
    pub relative_residual: f64,
}

pub fn uncertainty_report(state: &ComplexField, model: &Model, a: usize) -> Result<UncertaintyReport> {
    let axes = model.body_axes(a)?;
    let m = model.mass(a)?;
    let measure = born_measure(state)?;
    let norm2 = measure.raw_mass();
    let v = drift_velocity(state, model, a)?;
    let u = osmotic_velocity(state, model, a)?;
    let var_v = expectation(&v, &measure, 2, MomentKind::Central)?;
    let eu2 = expectation(&u, &measure, 2, MomentKind::Raw)?;
    let p1 = qm_momentum_expect(state, model, a)?;
    let p2 = qm_momentum_sq_expect(state, model, a)?;
    let mut r = UncertaintyReport {
        sigma_x: Vec::new(),
        sigma_p_qm: Vec::new(),
        m_sigma_v: Vec::new(),
        m_sigma_u: Vec::new(),
        qm_product: Vec::new(),
        drift_product: Vec::new(),
        decomposition_residual: Vec::new(),
        relative_residual: 0.0,
    };
    for (slot, k) in axes.enumerate() {
        let x = RandomVariable::coordinate(state.grid(), k)?;
        let mx = mean(&x, &measure)?;
        let var_x = expectation(&x.map(|c| c - mx), &measure, 2, MomentKind::Raw)?[0];
        let pm = p1[slot].re / norm2;
        let var_p = p2[slot] / norm2 - pm * pm;
        let sx = var_x.sqrt();
        let sp = var_p.max(0.0).sqrt();
        let msv = m * var_v[slot].max(0.0).sqrt();
        let res = (var_p - m * m * (var_v[slot] + eu2[slot])).abs();
        r.sigma_x.push(sx);
        r.sigma_p_qm.push(sp);
        r.m_sigma_v.push(msv);
        r.m_sigma_u.push(m * eu2[slot].max(0.0).sqrt());
        r.qm_product.push(sx * sp);
        r.drift_product.push(sx * msv);
        r.decomposition_residual.push(res);
        r.relative_residual = r.relative_residual.max(res / var_p.abs().max(f64::MIN_POSITIVE));
    }
    Ok(r)
}
