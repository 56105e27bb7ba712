//! Uniform Cartesian grids, midpoint quadrature and derivative operators.
//!
//! Sample points are cell centers: along an axis with extent `(lo, hi)` and
//! `n` points the spacing is `h = (hi - lo) / n` and the points are
//! `lo + (j + 1/2) h`. Symmetric extents with an even point count therefore
//! never sample the origin. Spectral operators treat every axis as periodic
//! with period `hi - lo`.
//!
//! Fields are stored row-major with the last axis contiguous. All grid sums go
//! through [`tree_sum`], whose split points depend only on the length, so
//! results do not depend on the number of rayon threads.

use std::fmt;
use std::ops::{Add, Range};
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::Spectrum;

/// Smallest admissible number of points per axis.
pub const MIN_POINTS: usize = 4;

const SEQUENTIAL_BLOCK: usize = 128;
const PARALLEL_THRESHOLD: usize = 1 << 14;

/// Sums `f(i)` over `range` with a fixed binary reduction tree.
pub fn tree_sum<T, F>(range: Range<usize>, f: &F) -> T
where
    T: Copy + Send + Default + Add<Output = T>,
    F: Fn(usize) -> T + Sync,
{
    let len = range.end - range.start;
    if len <= SEQUENTIAL_BLOCK {
        return range.fold(T::default(), |acc, i| acc + f(i));
    }
    let mid = range.start + len / 2;
    let (a, b) = if len >= PARALLEL_THRESHOLD {
        rayon::join(|| tree_sum(range.start..mid, f), || tree_sum(mid..range.end, f))
    } else {
        (tree_sum(range.start..mid, f), tree_sum(mid..range.end, f))
    };
    a + b
}

/// Pairwise sum of a slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    tree_sum(0..xs.len(), &|i| xs[i])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridAxis {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.points as f64
    }

    pub fn coord(&self, j: usize) -> f64 {
        self.lo + (j as f64 + 0.5) * self.spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.coord(j)).collect()
    }

    /// Angular wavenumbers in FFT order. The Nyquist entry is negative.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.points as i64;
        let dk = 2.0 * std::f64::consts::PI / (self.hi - self.lo);
        (0..n)
            .map(|j| if j < (n + 1) / 2 { j } else { j - n })
            .map(|j| j as f64 * dk)
            .collect()
    }
}

/// A uniform Cartesian grid over a box in configuration space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<GridAxis>,
}

impl Grid {
    pub fn new(extents: &[(f64, f64)], points: &[usize]) -> Result<Self> {
        if extents.is_empty() {
            return Err(Error::InvalidGrid("at least one axis required".into()));
        }
        if extents.len() != points.len() {
            return Err(Error::InvalidGrid(format!(
                "{} extents but {} point counts",
                extents.len(),
                points.len()
            )));
        }
        let mut axes = Vec::with_capacity(extents.len());
        for (k, (&(lo, hi), &n)) in extents.iter().zip(points).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidGrid(format!("axis {k}: extent ({lo}, {hi}) is not positive")));
            }
            if n < MIN_POINTS {
                return Err(Error::InvalidGrid(format!("axis {k}: {n} points, need at least {MIN_POINTS}")));
            }
            axes.push(GridAxis { lo, hi, points: n });
        }
        Ok(Self { axes })
    }

    /// Same box and resolution in every one of `dim` axes.
    pub fn cube(dim: usize, lo: f64, hi: f64, points: usize) -> Result<Self> {
        Self::new(&vec![(lo, hi); dim], &vec![points; dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> Result<&GridAxis> {
        self.axes.get(k).ok_or(Error::AxisOutOfRange { axis: k, dim: self.dim() })
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.points).collect()
    }

    pub fn spacing(&self, k: usize) -> f64 {
        self.axes[k].spacing()
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.axes.iter().map(GridAxis::spacing).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(GridAxis::spacing).product()
    }

    /// Row-major strides (last axis contiguous).
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dim()];
        for k in (0..self.dim().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.axes[k + 1].points;
        }
        strides
    }

    /// Power-of-two point counts on every axis.
    pub fn is_spectral(&self) -> bool {
        self.axes.iter().all(|a| a.points.is_power_of_two())
    }

    pub fn unravel(&self, mut idx: usize, out: &mut [usize]) {
        for k in (0..self.dim()).rev() {
            let n = self.axes[k].points;
            out[k] = idx % n;
            idx /= n;
        }
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&j, a)| acc * a.points + j)
    }

    /// Cell-center coordinates of the flat index `idx`.
    pub fn point(&self, mut idx: usize, out: &mut [f64]) {
        for k in (0..self.dim()).rev() {
            let a = &self.axes[k];
            out[k] = a.coord(idx % a.points);
            idx /= a.points;
        }
    }

    pub fn point_vec(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        self.point(idx, &mut x);
        x
    }

    /// Coordinate along axis `k` of the flat index `idx`.
    pub fn coord_of(&self, idx: usize, k: usize) -> f64 {
        let stride: usize = self.axes[k + 1..].iter().map(|a| a.points).product();
        let a = &self.axes[k];
        a.coord((idx / stride) % a.points)
    }

    /// Cell containing `x`, if inside the box (lower-closed, upper-open).
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for (a, &xk) in self.axes.iter().zip(x) {
            if !(xk >= a.lo && xk < a.hi) {
                return None;
            }
            let j = (((xk - a.lo) / a.spacing()).floor() as usize).min(a.points - 1);
            idx = idx * a.points + j;
        }
        Some(idx)
    }

    /// Evaluates `f` at every cell center, in parallel.
    pub fn map_points<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync,
    {
        (0..self.len())
            .into_par_iter()
            .map_init(|| vec![0.0; self.dim()], |x, i| {
                self.point(i, x);
                f(x)
            })
            .collect()
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Builds a grid; see [`Grid::new`].
pub fn make_grid(extents: &[(f64, f64)], points: &[usize]) -> Result<Grid> {
    Grid::new(extents, points)
}

/// A complex function of configuration with closed-form first and second
/// derivatives.
pub trait ClosedForm: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> C64;

    /// Writes the gradient (length `dim`) and the row-major Hessian
    /// (length `dim * dim`), returning the value.
    fn jet(&self, x: &[f64], grad: &mut [C64], hess: &mut [C64]) -> C64;

    fn gradient(&self, x: &[f64], grad: &mut [C64]) -> C64 {
        let d = self.dim();
        let mut hess = vec![C64::default(); d * d];
        self.jet(x, grad, &mut hess)
    }

    fn laplacian(&self, x: &[f64], axes: Range<usize>) -> C64 {
        let d = self.dim();
        let mut grad = vec![C64::default(); d];
        let mut hess = vec![C64::default(); d * d];
        self.jet(x, &mut grad, &mut hess);
        axes.map(|k| hess[k * d + k]).sum()
    }
}

/// Closed form attached to sampled values: `values[i] == scale * form(x_i)`.
#[derive(Debug, Clone)]
pub struct ClosedBacking {
    pub form: Arc<dyn ClosedForm>,
    pub scale: C64,
}

/// Complex amplitudes sampled on a grid, optionally backed by a closed form.
#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<C64>,
    closed: Option<ClosedBacking>,
}

impl ComplexField {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, closed: None })
    }

    pub fn zeros(grid: Grid) -> Self {
        let values = vec![C64::default(); grid.len()];
        Self { grid, values, closed: None }
    }

    pub fn from_fn<F>(grid: Grid, f: F) -> Self
    where
        F: Fn(&[f64]) -> C64 + Sync,
    {
        let values = grid.map_points(f);
        Self { grid, values, closed: None }
    }

    /// Samples a closed form at the cell centers and keeps it for derivatives.
    pub fn from_closed(grid: Grid, form: Arc<dyn ClosedForm>) -> Result<Self> {
        if form.dim() != grid.dim() {
            return Err(Error::InvalidGrid(format!(
                "closed form is {}-dimensional, grid is {}-dimensional",
                form.dim(),
                grid.dim()
            )));
        }
        let values = grid.map_points(|x| form.value(x));
        Ok(Self { grid, values, closed: Some(ClosedBacking { form, scale: C64::new(1.0, 0.0) }) })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn closed(&self) -> Option<&ClosedBacking> {
        self.closed.as_ref()
    }

    /// Drops the closed form, forcing spectral derivatives.
    pub fn without_closed(mut self) -> Self {
        self.closed = None;
        self
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| v * c).collect(),
            closed: self.closed.as_ref().map(|b| ClosedBacking { form: b.form.clone(), scale: b.scale * c }),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
            closed: None,
        }
    }

    /// `a * self + b * other`. The closed form is dropped.
    pub fn combine(&self, a: C64, other: &ComplexField, b: C64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&x, &y)| a * x + b * y).collect();
        Ok(Self { grid: self.grid.clone(), values, closed: None })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn norm(&self) -> f64 {
        inner_product_values(&self.grid, &self.values, &self.values).re.max(0.0).sqrt()
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Discrete L2 distance to `other`.
    pub fn distance(&self, other: &ComplexField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let dv = self.grid.cell_volume();
        let s = tree_sum(0..self.values.len(), &|i| (self.values[i] - other.values[i]).norm_sqr());
        Ok((s * dv).sqrt())
    }
}

/// Real values on a grid with a definedness mask (`true` = defined).
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl RealField {
    pub fn new(grid: Grid, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if values.len() != grid.len() || mask.len() != grid.len() {
            return Err(Error::InvalidGrid("value or mask length does not match the grid".into()));
        }
        Ok(Self { grid, values, mask })
    }

    pub fn unmasked(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let mask = vec![true; values.len()];
        Self::new(grid, values, mask)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        if self.mask[i] {
            Some(self.values[i])
        } else {
            None
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(_, &m)| m)
            .fold(0.0_f64, |acc, (v, _)| acc.max(v.abs()))
    }
}

fn inner_product_values(grid: &Grid, f: &[C64], g: &[C64]) -> C64 {
    tree_sum(0..f.len(), &|i| f[i].conj() * g[i]) * grid.cell_volume()
}

/// `<f, g>` by the midpoint rule, conjugate-linear in `f`.
pub fn inner_product(f: &ComplexField, g: &ComplexField) -> Result<C64> {
    f.grid.check_same(&g.grid)?;
    Ok(inner_product_values(&f.grid, &f.values, &g.values))
}

pub fn l2_normalize(f: &ComplexField) -> Result<ComplexField> {
    let norm = f.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroField);
    }
    Ok(f.scaled(C64::new(1.0 / norm, 0.0)))
}

/// Partial derivative along `axis`.
pub fn gradient(f: &ComplexField, axis: usize) -> Result<ComplexField> {
    let d = f.grid.dim();
    if axis >= d {
        return Err(Error::AxisOutOfRange { axis, dim: d });
    }
    let values = if let Some(b) = &f.closed {
        f.grid.map_points(|x| {
            let mut grad = vec![C64::default(); d];
            b.form.gradient(x, &mut grad);
            b.scale * grad[axis]
        })
    } else {
        let mut orders = vec![0; d];
        orders[axis] = 1;
        Spectrum::forward(&f.grid, &f.values)?.derivative(&orders)
    };
    Ok(ComplexField { grid: f.grid.clone(), values, closed: None })
}

/// Laplacian summed over the given axes.
pub fn laplacian_axes(f: &ComplexField, axes: Range<usize>) -> Result<ComplexField> {
    let d = f.grid.dim();
    if axes.end > d || axes.start >= axes.end {
        return Err(Error::AxisOutOfRange { axis: axes.end.saturating_sub(1), dim: d });
    }
    let values = if let Some(b) = &f.closed {
        f.grid.map_points(|x| b.scale * b.form.laplacian(x, axes.clone()))
    } else {
        Spectrum::forward(&f.grid, &f.values)?.laplacian(axes)
    };
    Ok(ComplexField { grid: f.grid.clone(), values, closed: None })
}

/// Laplacian over all axes.
pub fn laplacian(f: &ComplexField) -> Result<ComplexField> {
    laplacian_axes(f, 0..f.grid.dim())
}

/// Value, gradient and per-group Laplacians of a field at every cell.
#[derive(Debug, Clone)]
pub(crate) struct Jet {
    pub psi: Vec<C64>,
    pub grad: Vec<Vec<C64>>,
    pub lap: Vec<Vec<C64>>,
}

impl Jet {
    /// `groups` partitions the axes (one range per body).
    pub fn new(f: &ComplexField, groups: &[Range<usize>]) -> Result<Self> {
        let d = f.grid.dim();
        if let Some(b) = &f.closed {
            let rows: Vec<(Vec<C64>, Vec<C64>)> = f.grid.map_points(|x| {
                let mut grad = vec![C64::default(); d];
                let mut hess = vec![C64::default(); d * d];
                b.form.jet(x, &mut grad, &mut hess);
                let lap = groups
                    .iter()
                    .map(|g| b.scale * g.clone().map(|k| hess[k * d + k]).sum::<C64>())
                    .collect();
                (grad.into_iter().map(|g| b.scale * g).collect(), lap)
            });
            let mut grad = vec![Vec::with_capacity(rows.len()); d];
            let mut lap = vec![Vec::with_capacity(rows.len()); groups.len()];
            for (g, l) in rows {
                for (k, v) in g.into_iter().enumerate() {
                    grad[k].push(v);
                }
                for (k, v) in l.into_iter().enumerate() {
                    lap[k].push(v);
                }
            }
            Ok(Self { psi: f.values.clone(), grad, lap })
        } else {
            let spec = Spectrum::forward(&f.grid, &f.values)?;
            let grad = (0..d)
                .map(|k| {
                    let mut orders = vec![0; d];
                    orders[k] = 1;
                    spec.derivative(&orders)
                })
                .collect();
            let lap = groups.iter().map(|g| spec.laplacian(g.clone())).collect();
            Ok(Self { psi: f.values.clone(), grad, lap })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn grid_spacing_and_volume() {
        let g = make_grid(&[(-10.0, 10.0)], &[256]).unwrap();
        assert_eq!(g.spacing(0), 0.078125);
        let g2 = make_grid(&[(-8.0, 8.0), (-8.0, 8.0)], &[128, 128]).unwrap();
        assert_eq!(g2.cell_volume(), 0.015625);
        assert!(matches!(make_grid(&[(0.0, 1.0)], &[3]), Err(Error::InvalidGrid(_))));
        assert!(make_grid(&[(1.0, 1.0)], &[8]).is_err());
        assert!(make_grid(&[(2.0, 1.0)], &[8]).is_err());
    }

    #[test]
    fn ravel_roundtrip_and_locate() {
        let g = make_grid(&[(0.0, 1.0), (-2.0, 2.0), (0.0, 3.0)], &[4, 8, 6]).unwrap();
        let mut m = vec![0; 3];
        for i in 0..g.len() {
            g.unravel(i, &mut m);
            assert_eq!(g.ravel(&m), i);
            let x = g.point_vec(i);
            assert_eq!(g.locate(&x), Some(i));
            for k in 0..3 {
                assert_eq!(g.coord_of(i, k), x[k]);
            }
        }
        assert_eq!(g.locate(&[1.0, 0.0, 0.0]), None);
    }

    #[test]
    fn spectral_gradient_of_harmonic_is_exact() {
        let g = make_grid(&[(-10.0, 10.0)], &[256]).unwrap();
        let k = 2.0 * PI / 20.0 * 7.0;
        let f = ComplexField::from_fn(g.clone(), |x| (C64::i() * k * x[0]).exp());
        let df = gradient(&f, 0).unwrap();
        for (d, v) in df.values().iter().zip(f.values()) {
            assert!((d - C64::i() * k * v).norm() <= 1e-10 * k);
        }
        let lap = laplacian(&f).unwrap();
        for (d, v) in lap.values().iter().zip(f.values()) {
            assert!((d + k * k * v).norm() <= 1e-10 * k * k);
        }
    }

    #[test]
    fn spectral_gradient_of_gaussian() {
        let g = make_grid(&[(-10.0, 10.0)], &[256]).unwrap();
        let f = ComplexField::from_fn(g.clone(), |x| c((-x[0] * x[0] / 4.0).exp(), 0.0));
        let df = gradient(&f, 0).unwrap();
        let mut err = 0.0_f64;
        for i in 0..g.len() {
            let x = g.coord_of(i, 0);
            err = err.max((df.values()[i] - f.values()[i] * (-x / 2.0)).norm());
        }
        assert!(err <= 1e-8, "max error {err}");
    }

    #[test]
    fn laplacian_of_2d_gaussian() {
        let g = Grid::cube(2, -10.0, 10.0, 128).unwrap();
        let f = ComplexField::from_fn(g.clone(), |x| c((-(x[0] * x[0] + x[1] * x[1]) / 4.0).exp(), 0.0));
        let lap = laplacian(&f).unwrap();
        let mut err = 0.0_f64;
        for i in 0..g.len() {
            let x = g.point_vec(i);
            let r2 = x[0] * x[0] + x[1] * x[1];
            // d/dx e^{-x^2/4} twice: (x^2/4 - 1/2) e^{-x^2/4}, summed over two axes.
            let exact = (r2 / 4.0 - 1.0) * (-r2 / 4.0).exp();
            err = err.max((lap.values()[i].re - exact).abs());
        }
        assert!(err <= 1e-8, "max error {err}");
    }

    #[test]
    fn constant_field_has_zero_gradient() {
        let g = make_grid(&[(-5.0, 5.0), (-5.0, 5.0)], &[16, 32]).unwrap();
        let f = ComplexField::from_fn(g, |_| c(3.0, -1.0));
        for axis in 0..2 {
            assert!(gradient(&f, axis).unwrap().values().iter().all(|v| v.norm() < 1e-12));
        }
        assert!(matches!(gradient(&f, 2), Err(Error::AxisOutOfRange { .. })));
    }

    #[test]
    fn non_spectral_grid_needs_closed_form() {
        let g = make_grid(&[(-5.0, 5.0)], &[100]).unwrap();
        let f = ComplexField::from_fn(g, |x| c(x[0], 0.0));
        assert!(matches!(gradient(&f, 0), Err(Error::NotSpectral)));
    }

    #[derive(Debug)]
    struct Linear;
    impl ClosedForm for Linear {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64]) -> C64 {
            c(2.0 * x[0] + 1.0, 0.0)
        }
        fn jet(&self, x: &[f64], grad: &mut [C64], hess: &mut [C64]) -> C64 {
            grad[0] = c(2.0, 0.0);
            hess[0] = C64::default();
            self.value(x)
        }
    }

    #[test]
    fn closed_form_derivatives_are_exact() {
        let g = make_grid(&[(-5.0, 5.0)], &[100]).unwrap();
        let f = ComplexField::from_closed(g, Arc::new(Linear)).unwrap();
        assert!(laplacian(&f).unwrap().values().iter().all(|v| *v == C64::default()));
        let f3 = f.scaled(c(0.0, 3.0));
        assert!(gradient(&f3, 0).unwrap().values().iter().all(|v| *v == c(0.0, 6.0)));
    }

    #[test]
    fn normalization() {
        let g = make_grid(&[(-10.0, 10.0)], &[256]).unwrap();
        let f = ComplexField::from_fn(g.clone(), |x| c((-x[0] * x[0] / 4.0).exp(), 0.3));
        let n = l2_normalize(&f).unwrap();
        assert!((inner_product(&n, &n).unwrap().re - 1.0).abs() < 1e-12);
        let again = l2_normalize(&n).unwrap();
        assert!(again.distance(&n).unwrap() < 1e-14);
        let doubled = l2_normalize(&n.scaled(c(2.0, 0.0))).unwrap();
        assert!(doubled.distance(&n).unwrap() < 1e-14);
        assert_eq!(l2_normalize(&ComplexField::zeros(g)).unwrap_err(), Error::ZeroField);
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = ComplexField::zeros(make_grid(&[(-1.0, 1.0)], &[8]).unwrap());
        let b = ComplexField::zeros(make_grid(&[(-1.0, 1.0)], &[16]).unwrap());
        assert_eq!(inner_product(&a, &b).unwrap_err(), Error::GridMismatch);
    }

    #[test]
    fn tree_sum_is_thread_count_independent() {
        let xs: Vec<f64> = (0..100_000).map(|i| ((i as f64) * 0.37).sin() * 1e-3 + 1.0 / (i + 1) as f64).collect();
        let a = pairwise_sum(&xs);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| pairwise_sum(&xs));
        assert_eq!(a.to_bits(), b.to_bits());
    }

    fn random_field(grid: &Grid, seed: &[f64]) -> ComplexField {
        let n = grid.len();
        ComplexField::new(grid.clone(), (0..n).map(|i| c(seed[i % seed.len()] * (i as f64 + 1.0).sin(), seed[(i + 3) % seed.len()])).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn inner_product_properties(a in prop::collection::vec(-1.0f64..1.0, 8), b in prop::collection::vec(-1.0f64..1.0, 8), s in -3.0f64..3.0) {
            let g = make_grid(&[(-4.0, 4.0)], &[32]).unwrap();
            let f = random_field(&g, &a);
            let h = random_field(&g, &b);
            let fh = inner_product(&f, &h).unwrap();
            let hf = inner_product(&h, &f).unwrap();
            prop_assert!((fh - hf.conj()).norm() <= 1e-12 * (1.0 + fh.norm()));
            let ff = inner_product(&f, &f).unwrap();
            let hh = inner_product(&h, &h).unwrap();
            prop_assert!(ff.re >= 0.0 && ff.im.abs() < 1e-12);
            prop_assert!(fh.norm() <= (ff.re * hh.re).sqrt() * (1.0 + 1e-12) + 1e-15);
            // Linearity of the derivative operators.
            let combo = f.combine(C64::new(s, 0.5), &h, C64::new(1.0, -s)).unwrap();
            let lhs = gradient(&combo, 0).unwrap();
            let rhs = gradient(&f, 0).unwrap().combine(C64::new(s, 0.5), &gradient(&h, 0).unwrap(), C64::new(1.0, -s)).unwrap();
            prop_assert!(lhs.distance(&rhs).unwrap() <= 1e-10 * (1.0 + lhs.norm()));
            let lhs = laplacian(&combo).unwrap();
            let rhs = laplacian(&f).unwrap().combine(C64::new(s, 0.5), &laplacian(&h).unwrap(), C64::new(1.0, -s)).unwrap();
            prop_assert!(lhs.distance(&rhs).unwrap() <= 1e-10 * (1.0 + lhs.norm()));
        }
    }
}
