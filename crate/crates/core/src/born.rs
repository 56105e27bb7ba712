//! Probability measures `|psi|^2` on the finite algebra generated by grid
//! cells, with events, conditioning, marginals, expectations and a seeded
//! sampler.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::grid::{tree_sum, ComplexField, Grid, RealField};

/// Measures within this distance of total mass 1 are renormalized silently.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-6;

/// Largest mass a single masked cell may carry in [`expectation`].
pub const MASKED_CELL_MASS_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMeasure {
    grid: Grid,
    density: Vec<f64>,
    cell_mass: Vec<f64>,
    /// Mass before renormalization.
    raw_mass: f64,
}

impl ProbabilityMeasure {
    /// Builds a measure from a nonnegative density, renormalizing drift up to
    /// [`RENORMALIZE_TOLERANCE`].
    pub fn from_density(grid: Grid, density: Vec<f64>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} density values for a grid of {} cells",
                density.len(),
                grid.len()
            )));
        }
        if let Some(x) = density.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("density value {x} is not a finite nonnegative number")));
        }
        let dv = grid.cell_volume();
        let raw_mass = tree_sum(0..density.len(), &|i| density[i]) * dv;
        if !((raw_mass - 1.0).abs() <= RENORMALIZE_TOLERANCE) {
            return Err(Error::Unnormalized { mass: raw_mass });
        }
        Ok(Self::renormalized(grid, density, raw_mass))
    }

    fn renormalized(grid: Grid, mut density: Vec<f64>, raw_mass: f64) -> Self {
        let dv = grid.cell_volume();
        density.iter_mut().for_each(|x| *x /= raw_mass);
        let cell_mass = density.iter().map(|x| x * dv).collect();
        Self { grid, density, cell_mass, raw_mass }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn density_field(&self) -> RealField {
        RealField::unmasked(self.grid.clone(), self.density.clone()).expect("lengths match")
    }

    pub fn cell_mass(&self) -> &[f64] {
        &self.cell_mass
    }

    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    pub fn total_mass(&self) -> f64 {
        tree_sum(0..self.cell_mass.len(), &|i| self.cell_mass[i])
    }
}

/// `rho = |psi|^2` as a probability measure.
pub fn born_measure(state: &ComplexField) -> Result<ProbabilityMeasure> {
    ProbabilityMeasure::from_density(state.grid().clone(), state.density())
}

/// A set of cells. Boxes select the cells whose centers lie inside, with
/// lower-closed, upper-open intervals.
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Boxes(Vec<Vec<(f64, f64)>>),
    Cells(Vec<usize>),
}

impl Event {
    /// Every cell. A box with no intervals is unbounded on every axis.
    pub fn full() -> Self {
        Event::Boxes(vec![vec![]])
    }

    pub fn empty() -> Self {
        Event::Cells(Vec::new())
    }

    pub fn single_box(bounds: Vec<(f64, f64)>) -> Self {
        Event::Boxes(vec![bounds])
    }

    /// Cells whose centers satisfy `pred`.
    pub fn from_predicate<F>(grid: &Grid, pred: F) -> Self
    where
        F: Fn(&[f64]) -> bool + Sync,
    {
        let hits = grid.map_points(|x| pred(x));
        Event::Cells(hits.iter().enumerate().filter(|(_, &h)| h).map(|(i, _)| i).collect())
    }

    /// Sorted, deduplicated cell indices.
    pub fn resolve(&self, grid: &Grid) -> Result<Vec<usize>> {
        match self {
            Event::Cells(cells) => {
                let set: BTreeSet<usize> = cells.iter().copied().collect();
                if let Some(&c) = set.iter().next_back().filter(|&&c| c >= grid.len()) {
                    return Err(Error::EventOutOfBounds { cell: c, len: grid.len() });
                }
                Ok(set.into_iter().collect())
            }
            Event::Boxes(boxes) => {
                for b in boxes {
                    if !b.is_empty() && b.len() != grid.dim() {
                        return Err(Error::InvalidParameter(format!(
                            "box has {} intervals for a {}-dimensional grid",
                            b.len(),
                            grid.dim()
                        )));
                    }
                }
                let inside = grid.map_points(|x| {
                    boxes
                        .iter()
                        .any(|b| b.iter().zip(x).all(|(&(lo, hi), &xk)| xk >= lo && xk < hi))
                });
                Ok(inside.iter().enumerate().filter(|(_, &h)| h).map(|(i, _)| i).collect())
            }
        }
    }
}

pub fn prob(measure: &ProbabilityMeasure, event: &Event) -> Result<f64> {
    let cells = event.resolve(&measure.grid)?;
    Ok(tree_sum(0..cells.len(), &|i| measure.cell_mass[cells[i]]))
}

/// Probability of the region `pred`, resolved below the cell size: each
/// cell contributes its mass times the share of its `sub^d` sub-cell centers
/// inside the region. `sub = 1` is the cell-center rule.
pub fn prob_region<F>(measure: &ProbabilityMeasure, pred: F, sub: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> bool + Sync,
{
    if sub == 0 {
        return Err(Error::InvalidParameter("sub-cell count must be at least 1".into()));
    }
    let grid = &measure.grid;
    let d = grid.dim();
    let h = grid.spacings();
    let per_cell = sub.pow(d as u32);
    let offsets: Vec<Vec<f64>> = (0..per_cell)
        .map(|mut j| {
            (0..d)
                .map(|k| {
                    let o = j % sub;
                    j /= sub;
                    ((o as f64 + 0.5) / sub as f64 - 0.5) * h[k]
                })
                .collect()
        })
        .collect();
    let share = grid.map_points(|x| {
        let mut y = vec![0.0; d];
        let mut hits = 0usize;
        for off in &offsets {
            y.iter_mut().zip(x.iter().zip(off)).for_each(|(y, (x, o))| *y = x + o);
            hits += pred(&y) as usize;
        }
        hits as f64 / per_cell as f64
    });
    Ok(tree_sum(0..share.len(), &|i| share[i] * measure.cell_mass[i]))
}

/// The measure restricted to `event` and rescaled to unit mass.
pub fn condition(measure: &ProbabilityMeasure, event: &Event) -> Result<ProbabilityMeasure> {
    let cells = event.resolve(&measure.grid)?;
    let p = tree_sum(0..cells.len(), &|i| measure.cell_mass[cells[i]]);
    if !(p > 0.0) {
        return Err(Error::ZeroProbability);
    }
    let mut density = vec![0.0; measure.density.len()];
    for &c in &cells {
        density[c] = measure.density[c] / p;
    }
    let raw = tree_sum(0..cells.len(), &|i| density[cells[i]]) * measure.grid.cell_volume();
    Ok(ProbabilityMeasure::renormalized(measure.grid.clone(), density, raw))
}

/// Sums out every axis not listed in `keep_axes`. Kept axes stay in
/// ascending order.
pub fn marginal(measure: &ProbabilityMeasure, keep_axes: &[usize]) -> Result<ProbabilityMeasure> {
    if keep_axes.is_empty() {
        return Err(Error::EmptyAxes);
    }
    let d = measure.grid.dim();
    let keep: BTreeSet<usize> = keep_axes.iter().copied().collect();
    if let Some(&k) = keep.iter().find(|&&k| k >= d) {
        return Err(Error::AxisOutOfRange { axis: k, dim: d });
    }
    let keep: Vec<usize> = keep.into_iter().collect();
    if keep.len() == d {
        return Ok(measure.clone());
    }
    let axes = measure.grid.axes();
    let extents: Vec<(f64, f64)> = keep.iter().map(|&k| (axes[k].lo, axes[k].hi)).collect();
    let points: Vec<usize> = keep.iter().map(|&k| axes[k].points).collect();
    let out = Grid::new(&extents, &points)?;
    let mut mass = vec![0.0; out.len()];
    let mut m = vec![0usize; d];
    let mut sub = vec![0usize; keep.len()];
    for (i, &c) in measure.cell_mass.iter().enumerate() {
        measure.grid.unravel(i, &mut m);
        for (s, &k) in sub.iter_mut().zip(&keep) {
            *s = m[k];
        }
        mass[out.ravel(&sub)] += c;
    }
    let dv = out.cell_volume();
    let density: Vec<f64> = mass.iter().map(|x| x / dv).collect();
    let raw = tree_sum(0..mass.len(), &|i| mass[i]);
    Ok(ProbabilityMeasure::renormalized(out, density, raw))
}

/// Points drawn from a measure, with the cell each point came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSet {
    pub dim: usize,
    /// Row-major, `dim` coordinates per point.
    pub points: Vec<f64>,
    pub cells: Vec<usize>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Values of one component of `rv` at the sampled cells; samples in
    /// masked cells are skipped.
    pub fn values_of(&self, rv: &RandomVariable, component: usize) -> Vec<f64> {
        let c = &rv.components[component];
        self.cells.iter().filter(|&&i| rv.mask[i]).map(|&i| c[i]).collect()
    }
}

/// Draws `n` points with ChaCha20 seeded by `seed`: a cell by inverse
/// transform on the flattened cell-mass CDF, then a uniform point inside it.
pub fn sample(measure: &ProbabilityMeasure, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    let mut cdf = Vec::with_capacity(measure.cell_mass.len());
    let mut acc = 0.0;
    for &m in &measure.cell_mass {
        acc += m;
        cdf.push(acc);
    }
    let total = acc;
    let last_positive = measure.cell_mass.iter().rposition(|&m| m > 0.0).unwrap_or(cdf.len() - 1);
    let grid = &measure.grid;
    let d = grid.dim();
    let axes = grid.axes();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n * d);
    let mut cells = Vec::with_capacity(n);
    let mut m = vec![0usize; d];
    for _ in 0..n {
        let u: f64 = rng.random::<f64>() * total;
        let cell = cdf.partition_point(|&c| c <= u).min(last_positive);
        grid.unravel(cell, &mut m);
        for k in 0..d {
            let a = &axes[k];
            points.push(a.lo + (m[k] as f64 + rng.random::<f64>()) * a.spacing());
        }
        cells.push(cell);
    }
    Ok(SampleSet { dim: d, points, cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit of sampled cells against the measure, with the
/// flattened cells grouped into `bins` contiguous runs of roughly equal mass.
pub fn chi_square_test(samples: &SampleSet, measure: &ProbabilityMeasure, bins: usize) -> Result<ChiSquareTest> {
    if bins < 2 {
        return Err(Error::InvalidParameter("chi-square test needs at least 2 bins".into()));
    }
    let n_cells = measure.cell_mass.len();
    let mut bin_of = vec![0usize; n_cells];
    let mut expected = vec![0.0; bins];
    let mut acc = 0.0;
    for (i, &m) in measure.cell_mass.iter().enumerate() {
        let b = ((acc * bins as f64) as usize).min(bins - 1);
        bin_of[i] = b;
        expected[b] += m;
        acc += m;
    }
    let mut observed = vec![0usize; bins];
    for &c in &samples.cells {
        if c >= n_cells {
            return Err(Error::EventOutOfBounds { cell: c, len: n_cells });
        }
        observed[bin_of[c]] += 1;
    }
    let n = samples.len() as f64;
    let mut statistic = 0.0;
    let mut used = 0usize;
    for (o, e) in observed.iter().zip(&expected) {
        if *e > 0.0 {
            let e = e * n;
            statistic += (*o as f64 - e).powi(2) / e;
            used += 1;
        }
    }
    let dof = used.saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(ChiSquareTest { statistic, dof, p_value: dist.sf(statistic) })
}

/// Scalar or vector random variable on a grid with a definedness mask.
///
/// Variables obtained as quotients `numerator / rho` keep their numerator
/// densities, which then give the first moment as a sum over all cells.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable {
    grid: Grid,
    components: Vec<Vec<f64>>,
    mask: Vec<bool>,
    numerators: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    Raw,
    Central,
}

impl RandomVariable {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>, mask: Vec<bool>) -> Result<Self> {
        if components.is_empty() || components.iter().any(|c| c.len() != grid.len()) || mask.len() != grid.len() {
            return Err(Error::InvalidGrid("random variable components do not match the grid".into()));
        }
        Ok(Self { grid, components, mask, numerators: None })
    }

    /// `components[k][i] = numerators[k][i] / rho[i]` on unmasked cells.
    pub fn from_numerators(grid: Grid, numerators: Vec<Vec<f64>>, rho: &[f64], mask: Vec<bool>) -> Result<Self> {
        let components = numerators
            .iter()
            .map(|n| n.iter().zip(rho).zip(&mask).map(|((&x, &r), &m)| if m { x / r } else { 0.0 }).collect())
            .collect();
        let mut rv = Self::new(grid, components, mask)?;
        rv.numerators = Some(numerators);
        Ok(rv)
    }

    pub fn scalar(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let mask = vec![true; values.len()];
        Self::new(grid, vec![values], mask)
    }

    /// Coordinate `axis` of the cell centers.
    pub fn coordinate(grid: &Grid, axis: usize) -> Result<Self> {
        grid.axis(axis)?;
        let values = (0..grid.len()).map(|i| grid.coord_of(i, axis)).collect();
        Self::scalar(grid.clone(), values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.components[k]
    }

    pub fn component_field(&self, k: usize) -> RealField {
        RealField::new(self.grid.clone(), self.components[k].clone(), self.mask.clone()).expect("lengths match")
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn numerators(&self) -> Option<&[Vec<f64>]> {
        self.numerators.as_deref()
    }

    /// `a * self + b * other`, defined where both are.
    pub fn linear_combination(&self, a: f64, other: &RandomVariable, b: f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        if self.n_components() != other.n_components() {
            return Err(Error::InvalidParameter("random variables have different component counts".into()));
        }
        let mix = |x: &[Vec<f64>], y: &[Vec<f64>]| -> Vec<Vec<f64>> {
            x.iter().zip(y).map(|(p, q)| p.iter().zip(q).map(|(u, v)| a * u + b * v).collect()).collect()
        };
        let mask = self.mask.iter().zip(&other.mask).map(|(p, q)| *p && *q).collect();
        let numerators = match (&self.numerators, &other.numerators) {
            (Some(x), Some(y)) => Some(mix(x, y)),
            _ => None,
        };
        Ok(Self { grid: self.grid.clone(), components: mix(&self.components, &other.components), mask, numerators })
    }

    /// Componentwise function of the values; numerators are dropped.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            components: self.components.iter().map(|c| c.iter().map(|&x| f(x)).collect()).collect(),
            mask: self.mask.clone(),
            numerators: None,
        }
    }
}

/// Moment of order `order` for each component, summed over unmasked cells.
///
/// The raw first moment of a quotient variable sums its numerator over all
/// cells instead.
pub fn expectation(rv: &RandomVariable, measure: &ProbabilityMeasure, order: u32, kind: MomentKind) -> Result<Vec<f64>> {
    rv.grid.check_same(&measure.grid)?;
    if order == 0 {
        return Err(Error::InvalidParameter("moment order must be positive".into()));
    }
    let cm = &measure.cell_mass;
    let masked_mass = tree_sum(0..cm.len(), &|i| if rv.mask[i] { 0.0 } else { cm[i] });
    if let Some(i) = (0..cm.len()).find(|&i| !rv.mask[i] && cm[i] > MASKED_CELL_MASS_LIMIT) {
        return Err(Error::MaskedMass { mass: cm[i].max(masked_mass), limit: MASKED_CELL_MASS_LIMIT });
    }
    let dv = measure.grid.cell_volume();
    let raw_mean = |k: usize| -> f64 {
        match &rv.numerators {
            Some(num) => tree_sum(0..cm.len(), &|i| num[k][i]) * dv / measure.raw_mass,
            None => {
                let c = &rv.components[k];
                tree_sum(0..cm.len(), &|i| if rv.mask[i] { c[i] * cm[i] } else { 0.0 })
            }
        }
    };
    Ok((0..rv.components.len())
        .map(|k| {
            let c = &rv.components[k];
            match (order, kind) {
                (1, MomentKind::Raw) => raw_mean(k),
                (1, MomentKind::Central) => 0.0,
                (p, MomentKind::Raw) => {
                    tree_sum(0..cm.len(), &|i| if rv.mask[i] { c[i].powi(p as i32) * cm[i] } else { 0.0 })
                }
                (p, MomentKind::Central) => {
                    let mu = tree_sum(0..cm.len(), &|i| if rv.mask[i] { c[i] * cm[i] } else { 0.0 });
                    tree_sum(0..cm.len(), &|i| if rv.mask[i] { (c[i] - mu).powi(p as i32) * cm[i] } else { 0.0 })
                }
            }
        })
        .collect())
}

/// First raw moment of a scalar variable.
pub fn mean(rv: &RandomVariable, measure: &ProbabilityMeasure) -> Result<f64> {
    Ok(expectation(rv, measure, 1, MomentKind::Raw)?[0])
}

/// Second central moment of a scalar variable.
pub fn variance(rv: &RandomVariable, measure: &ProbabilityMeasure) -> Result<f64> {
    Ok(expectation(rv, measure, 2, MomentKind::Central)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use num_complex::Complex64 as C64;
    use proptest::prelude::*;

    fn gaussian_1d(n: usize, sigma: f64) -> ComplexField {
        let g = make_grid(&[(-10.0, 10.0)], &[n]).unwrap();
        let f = ComplexField::from_fn(g, |x| C64::new((-x[0] * x[0] / (4.0 * sigma * sigma)).exp(), 0.0));
        crate::grid::l2_normalize(&f).unwrap()
    }

    fn gaussian_2d(cov: [[f64; 2]; 2]) -> ProbabilityMeasure {
        let g = make_grid(&[(-16.0, 16.0), (-16.0, 16.0)], &[160, 160]).unwrap();
        let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
        let inv = [[cov[1][1] / det, -cov[0][1] / det], [-cov[1][0] / det, cov[0][0] / det]];
        let rho = g.map_points(|x| {
            let q = x[0] * (inv[0][0] * x[0] + inv[0][1] * x[1]) + x[1] * (inv[1][0] * x[0] + inv[1][1] * x[1]);
            (-0.5 * q).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
        });
        ProbabilityMeasure::from_density(g, rho).unwrap()
    }

    #[test]
    fn born_measure_basics() {
        let psi = gaussian_1d(256, 1.0);
        let m = born_measure(&psi).unwrap();
        assert!((m.total_mass() - 1.0).abs() < 1e-12);
        let rotated = born_measure(&psi.scaled(C64::from_polar(1.0, 0.7))).unwrap();
        for (a, b) in m.density().iter().zip(rotated.density()) {
            assert!((a - b).abs() <= 1e-15 * a.max(1e-300));
        }
        let off = psi.scaled(C64::new(1.01, 0.0));
        assert!(matches!(born_measure(&off), Err(Error::Unnormalized { .. })));
        let slight = psi.scaled(C64::new(1.0 + 1e-7, 0.0));
        assert!((born_measure(&slight).unwrap().total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn events_and_probabilities() {
        let m = born_measure(&gaussian_1d(256, 1.0)).unwrap();
        assert!((prob(&m, &Event::full()).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(prob(&m, &Event::empty()).unwrap(), 0.0);
        let half = Event::single_box(vec![(0.0, f64::INFINITY)]);
        assert!((prob(&m, &half).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(prob(&m, &Event::Cells(vec![256])), Err(Error::EventOutOfBounds { cell: 256, len: 256 })));
        // duplicates count once
        assert_eq!(prob(&m, &Event::Cells(vec![3, 3])).unwrap(), m.cell_mass()[3]);
    }

    #[test]
    fn sub_cell_regions() {
        let m = gaussian_2d([[1.0, 0.0], [0.0, 1.0]]);
        let disk = |x: &[f64]| x[0] * x[0] + x[1] * x[1] <= 1.0;
        let centers = prob(&m, &Event::from_predicate(m.grid(), disk)).unwrap();
        assert!((prob_region(&m, disk, 1).unwrap() - centers).abs() <= 1e-15);
        // P(r <= 1) for a standard 2D normal
        let exact = 1.0 - (-0.5f64).exp();
        let fine = prob_region(&m, disk, 8).unwrap();
        assert!((fine - exact).abs() < (centers - exact).abs());
        assert!((fine - exact).abs() < 1e-3);
        assert!(prob_region(&m, disk, 0).is_err());
    }

    #[test]
    fn conditioning() {
        let m = born_measure(&gaussian_1d(256, 1.0)).unwrap();
        let same = condition(&m, &Event::full()).unwrap();
        assert!(same.density().iter().zip(m.density()).all(|(a, b)| (a - b).abs() <= 1e-14 * b.max(1e-300)));
        let right = Event::single_box(vec![(0.0, f64::INFINITY)]);
        let c = condition(&m, &right).unwrap();
        for (i, (a, b)) in c.density().iter().zip(m.density()).enumerate() {
            if m.grid().coord_of(i, 0) > 0.0 {
                assert!((a - 2.0 * b).abs() <= 1e-10 * b);
            } else {
                assert_eq!(*a, 0.0);
            }
        }
        assert!((prob(&c, &right).unwrap() - 1.0).abs() <= 1e-12);
        assert_eq!(condition(&m, &Event::empty()).unwrap_err(), Error::ZeroProbability);
    }

    #[test]
    fn marginals() {
        let prod = gaussian_2d([[1.0, 0.0], [0.0, 2.0]]);
        assert_eq!(marginal(&prod, &[0, 1]).unwrap(), prod);
        assert_eq!(marginal(&prod, &[]).unwrap_err(), Error::EmptyAxes);
        let mx = marginal(&prod, &[0]).unwrap();
        let g = mx.grid().clone();
        let exact: Vec<f64> = g.map_points(|x| (-0.5 * x[0] * x[0]).exp() / (2.0 * std::f64::consts::PI).sqrt());
        let l1: f64 = mx.density().iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>() * g.spacing(0);
        assert!(l1 <= 1e-9, "{l1}");
        // rotated covariance: var(y) = sin^2 * 1 + cos^2 * 4 for a 30 degree rotation
        let (s, c) = (30f64.to_radians().sin(), 30f64.to_radians().cos());
        let (a, b) = (1.0, 4.0);
        let cov = [[c * c * a + s * s * b, c * s * (a - b)], [c * s * (a - b), s * s * a + c * c * b]];
        let my = marginal(&gaussian_2d(cov), &[1]).unwrap();
        let y = RandomVariable::coordinate(my.grid(), 0).unwrap();
        let v = variance(&y, &my).unwrap();
        assert!((v - cov[1][1]).abs() < 1e-8, "{v} vs {}", cov[1][1]);
    }

    #[test]
    fn sampler_determinism_and_moments() {
        let m = born_measure(&gaussian_1d(256, 0.5)).unwrap();
        let a = sample(&m, 1000, 42).unwrap();
        let b = sample(&m, 1000, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample(&m, 1000, 43).unwrap());
        let big = sample(&m, 1_000_000, 7).unwrap();
        let mean: f64 = big.points.iter().sum::<f64>() / big.len() as f64;
        // the density of x is N(0, 0.25); 4 sigma / sqrt(n)
        assert!(mean.abs() < 4.0 * 0.5 / 1000.0, "{mean}");
        assert!(sample(&m, 0, 1).is_err());
    }

    #[test]
    fn chi_square_on_64_cells() {
        let m = born_measure(&gaussian_1d(64, 2.0)).unwrap();
        let s = sample(&m, 100_000, 2024).unwrap();
        let t = chi_square_test(&s, &m, 64).unwrap();
        assert!(t.p_value > 1e-3, "{t:?}");
        // a shifted measure is rejected
        let shifted = born_measure(&{
            let g = m.grid().clone();
            let f = ComplexField::from_fn(g, |x| C64::new((-(x[0] - 0.5).powi(2) / 16.0).exp(), 0.0));
            crate::grid::l2_normalize(&f).unwrap()
        })
        .unwrap();
        assert!(chi_square_test(&s, &shifted, 64).unwrap().p_value < 1e-6);
    }

    #[test]
    fn expectation_rules() {
        let m = born_measure(&gaussian_1d(256, 1.0)).unwrap();
        let g = m.grid().clone();
        let c = RandomVariable::scalar(g.clone(), vec![2.5; 256]).unwrap();
        assert!((mean(&c, &m).unwrap() - 2.5).abs() < 1e-12);
        assert!((expectation(&c, &m, 3, MomentKind::Raw).unwrap()[0] - 15.625).abs() < 1e-10);
        assert!(variance(&c, &m).unwrap().abs() < 1e-20);
        let x = RandomVariable::coordinate(&g, 0).unwrap();
        assert!((variance(&x, &m).unwrap() - 1.0).abs() < 1e-10);
        let mut mask = vec![true; 256];
        mask[128] = false;
        let masked = RandomVariable::new(g.clone(), vec![vec![1.0; 256]], mask).unwrap();
        assert!(matches!(mean(&masked, &m), Err(Error::MaskedMass { .. })));
        let other = make_grid(&[(-10.0, 10.0)], &[128]).unwrap();
        let wrong = RandomVariable::scalar(other, vec![0.0; 128]).unwrap();
        assert_eq!(mean(&wrong, &m).unwrap_err(), Error::GridMismatch);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn measure_axioms(a in -10.0f64..10.0, b in -10.0f64..10.0, c in -10.0f64..10.0) {
            let m = born_measure(&gaussian_1d(128, 1.5)).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let left = Event::single_box(vec![(f64::NEG_INFINITY, lo)]);
            let mid = Event::single_box(vec![(lo, hi)]);
            let both = Event::single_box(vec![(f64::NEG_INFINITY, hi)]);
            let pl = prob(&m, &left).unwrap();
            let pm = prob(&m, &mid).unwrap();
            let pb = prob(&m, &both).unwrap();
            prop_assert!((pb - (pl + pm)).abs() <= 1e-14);
            prop_assert!(pl <= pb + 1e-15);
            let inner = Event::single_box(vec![(lo.max(c.min(hi)), hi)]);
            prop_assert!(prob(&m, &inner).unwrap() <= pm + 1e-15);
        }

        #[test]
        fn expectation_is_linear(xs in prop::collection::vec(-5.0f64..5.0, 64), ys in prop::collection::vec(-5.0f64..5.0, 64), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let m = born_measure(&gaussian_1d(64, 2.0)).unwrap();
            let g = m.grid().clone();
            let x = RandomVariable::scalar(g.clone(), xs).unwrap();
            let y = RandomVariable::scalar(g, ys).unwrap();
            let lhs = mean(&x.linear_combination(a, &y, b).unwrap(), &m).unwrap();
            let rhs = a * mean(&x, &m).unwrap() + b * mean(&y, &m).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12);
        }

        #[test]
        fn global_phase_leaves_measure(theta in 0.0f64..6.3) {
            let psi = gaussian_1d(64, 1.0);
            let a = born_measure(&psi).unwrap();
            let b = born_measure(&psi.scaled(C64::from_polar(1.0, theta))).unwrap();
            for (x, y) in a.density().iter().zip(b.density()) {
                prop_assert!((x - y).abs() <= 1e-15 * x.max(1e-300));
            }
        }
    }
}
