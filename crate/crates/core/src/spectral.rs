//! Multidimensional FFTs on periodic grids and Fourier-multiplier derivatives.

use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Forward and inverse plans for every axis of a grid.
#[derive(Clone)]
pub struct FftPlans {
    shape: Vec<usize>,
    strides: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FftPlans {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FftPlans").field("shape", &self.shape).finish()
    }
}

impl FftPlans {
    pub fn new(grid: &Grid) -> Result<Self> {
        if !grid.is_spectral() {
            return Err(Error::NotSpectral);
        }
        let mut planner = FftPlanner::new();
        let shape = grid.shape();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Ok(Self { strides: grid.strides(), shape, forward, inverse })
    }

    pub fn forward(&self, data: &mut [C64]) {
        for k in 0..self.shape.len() {
            self.transform_axis(data, k, &self.forward[k]);
        }
    }

    /// Inverse transform including the 1/N normalization.
    pub fn inverse(&self, data: &mut [C64]) {
        for k in 0..self.shape.len() {
            self.transform_axis(data, k, &self.inverse[k]);
        }
        let scale = 1.0 / data.len() as f64;
        data.par_iter_mut().for_each(|v| *v *= scale);
    }

    fn transform_axis(&self, data: &mut [C64], axis: usize, fft: &Arc<dyn Fft<f64>>) {
        let n = self.shape[axis];
        let stride = self.strides[axis];
        let scratch_len = fft.get_inplace_scratch_len();
        if stride == 1 {
            let lanes_per_task = (4096 / n).max(1);
            data.par_chunks_mut(n * lanes_per_task).for_each_init(
                || vec![C64::default(); scratch_len],
                |scratch, chunk| fft.process_with_scratch(chunk, scratch),
            );
            return;
        }
        // Gather strided lanes into contiguous buffers, transform, scatter back.
        let block = n * stride;
        let mut lanes = vec![C64::default(); data.len()];
        {
            let src: &[C64] = data;
            lanes.par_chunks_mut(n).enumerate().for_each_init(
                || vec![C64::default(); scratch_len],
                |scratch, (l, lane)| {
                    let base = (l / stride) * block + l % stride;
                    for (j, v) in lane.iter_mut().enumerate() {
                        *v = src[base + j * stride];
                    }
                    fft.process_with_scratch(lane, scratch);
                },
            );
        }
        data.par_chunks_mut(block).enumerate().for_each(|(o, chunk)| {
            for i in 0..stride {
                let lane = &lanes[(o * stride + i) * n..(o * stride + i + 1) * n];
                for (j, v) in lane.iter().enumerate() {
                    chunk[j * stride + i] = *v;
                }
            }
        });
    }
}

/// Fourier coefficients of a field on a periodic grid.
pub struct Spectrum {
    grid: Grid,
    plans: FftPlans,
    hat: Vec<C64>,
}

impl Spectrum {
    pub fn forward(grid: &Grid, values: &[C64]) -> Result<Self> {
        let plans = FftPlans::new(grid)?;
        let mut hat = values.to_vec();
        plans.forward(&mut hat);
        Ok(Self { grid: grid.clone(), plans, hat })
    }

    /// Applies the multiplier prod_k (i k_k)^{orders[k]}. For odd orders the
    /// Nyquist mode is dropped, which keeps real fields real.
    pub fn derivative(&self, orders: &[usize]) -> Vec<C64> {
        let d = self.grid.dim();
        let factors: Vec<Vec<C64>> = (0..d)
            .map(|k| {
                let axis = &self.grid.axes()[k];
                let n = axis.points;
                axis.wavenumbers()
                    .into_iter()
                    .enumerate()
                    .map(|(j, kk)| {
                        if orders[k] % 2 == 1 && n % 2 == 0 && j == n / 2 {
                            C64::default()
                        } else {
                            (C64::i() * kk).powu(orders[k] as u32)
                        }
                    })
                    .collect()
            })
            .collect();
        self.apply(|m| m.iter().enumerate().map(|(k, &j)| factors[k][j]).product())
    }

    /// Sum of second derivatives over `axes`.
    pub fn laplacian(&self, axes: Range<usize>) -> Vec<C64> {
        let ks: Vec<Vec<f64>> = self.grid.axes().iter().map(|a| a.wavenumbers()).collect();
        self.apply(|m| C64::new(-axes.clone().map(|k| ks[k][m[k]] * ks[k][m[k]]).sum::<f64>(), 0.0))
    }

    fn apply<F>(&self, multiplier: F) -> Vec<C64>
    where
        F: Fn(&[usize]) -> C64 + Sync,
    {
        let d = self.grid.dim();
        let mut out: Vec<C64> = (0..self.hat.len())
            .into_par_iter()
            .map_init(
                || vec![0usize; d],
                |m, i| {
                    self.grid.unravel(i, m);
                    self.hat[i] * multiplier(m)
                },
            )
            .collect();
        self.plans.inverse(&mut out);
        out
    }
}

/// Applies a real Fourier multiplier `symbol(k)` (k = wavevector) to `values`.
pub fn apply_symbol<F>(grid: &Grid, values: &[C64], symbol: F) -> Result<Vec<C64>>
where
    F: Fn(&[f64]) -> C64 + Sync,
{
    let spec = Spectrum::forward(grid, values)?;
    let ks: Vec<Vec<f64>> = grid.axes().iter().map(|a| a.wavenumbers()).collect();
    Ok(spec.apply(|m| {
        let k: Vec<f64> = m.iter().enumerate().map(|(a, &j)| ks[a][j]).collect();
        symbol(&k)
    }))
}
