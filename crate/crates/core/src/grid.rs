//! Periodic spacetime grid with spectral derivatives.
//!
//! Axis 0 is time and is optional: the Lagrangian-layer identity checks run
//! on grids with a periodic time axis (so that `d_0` is spectral and exact),
//! while Hamiltonian evolution runs on purely spatial grids where time is
//! advanced by the integrator. Axis 3 is always present; it carries the
//! axial gauge direction and the `1/d3^2` constraint solver. Absent axes
//! have a single point and count as unit-volume constants.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimeGrid {
    /// Points per axis `[N_0, N_1, N_2, N_3]`; absent axes hold 1.
    shape: [usize; 4],
    /// Extent per axis (length units); ignored on absent axes.
    extent: [f64; 4],
    /// Evolution time step.
    dt: f64,
}

impl SpacetimeGrid {
    pub fn new(shape: [usize; 4], extent: [f64; 4], dt: f64) -> Result<Arc<Self>> {
        if shape[3] < 4 {
            return Err(Error::config(format!(
                "grid.n3 must be >= 4 (axis 3 is required), got {}",
                shape[3]
            )));
        }
        for (axis, (&n, &l)) in shape.iter().zip(extent.iter()).enumerate() {
            if n == 0 {
                return Err(Error::config(format!("grid axis {axis} has zero points")));
            }
            if n > 1 {
                if n < 4 || !n.is_power_of_two() {
                    return Err(Error::config(format!(
                        "grid axis {axis}: size {n} must be a power of two >= 4"
                    )));
                }
                if !(l > 0.0) {
                    return Err(Error::config(format!(
                        "grid axis {axis}: extent must be positive, got {l}"
                    )));
                }
            }
        }
        if !(dt > 0.0) {
            return Err(Error::config(format!("grid.dt must be positive, got {dt}")));
        }
        Ok(Arc::new(SpacetimeGrid { shape, extent, dt }))
    }

    /// Spatial grid with `d` spatial dimensions (`d = 1` keeps only x3).
    pub fn spatial(d: usize, n: usize, len: f64, dt: f64) -> Result<Arc<Self>> {
        let mut shape = [1usize; 4];
        let mut extent = [1.0f64; 4];
        match d {
            1 => {}
            2 => {
                shape[1] = n;
                extent[1] = len;
            }
            3 => {
                shape[1] = n;
                shape[2] = n;
                extent[1] = len;
                extent[2] = len;
            }
            _ => return Err(Error::config(format!("grid.d must be 1, 2 or 3, got {d}"))),
        }
        shape[3] = n;
        extent[3] = len;
        SpacetimeGrid::new(shape, extent, dt)
    }

    /// Spacetime grid with a periodic time axis, for action-level checks.
    pub fn with_time(n0: usize, l0: f64, d: usize, n: usize, len: f64) -> Result<Arc<Self>> {
        let g = SpacetimeGrid::spatial(d, n, len, 1.0)?;
        let mut shape = g.shape;
        let mut extent = g.extent;
        shape[0] = n0;
        extent[0] = l0;
        SpacetimeGrid::new(shape, extent, 1.0)
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn extent(&self) -> [f64; 4] {
        self.extent
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn has_time_axis(&self) -> bool {
        self.shape[0] > 1
    }

    pub fn axis_present(&self, axis: usize) -> bool {
        self.shape[axis] > 1
    }

    pub fn n_points(&self) -> usize {
        self.shape.iter().product()
    }

    /// Cell volume over every present axis (a 4-volume element when the
    /// time axis is present).
    pub fn cell_volume(&self) -> f64 {
        let mut v = 1.0;
        for axis in 0..4 {
            if self.shape[axis] > 1 {
                v *= self.extent[axis] / self.shape[axis] as f64;
            }
        }
        v
    }

    /// Spatial volume element (axes 1..4 only), used by `d^3 x` sums.
    pub fn spatial_volume_element(&self) -> f64 {
        let mut v = 1.0;
        for axis in 1..4 {
            if self.shape[axis] > 1 {
                v *= self.extent[axis] / self.shape[axis] as f64;
            }
        }
        v
    }

    /// Point stride of `axis` in the flattened row-major point index.
    fn stride(&self, axis: usize) -> usize {
        self.shape[axis + 1..].iter().product()
    }

    /// Angular wavenumber of FFT bin `j` along `axis`, with the Nyquist
    /// bin mapped to zero so odd derivatives preserve reality.
    pub fn wavenumber(&self, axis: usize, j: usize) -> f64 {
        let n = self.shape[axis];
        let f = if 2 * j <= n { j as isize } else { j as isize - n as isize };
        if n % 2 == 0 && 2 * j == n {
            return 0.0;
        }
        2.0 * std::f64::consts::PI * f as f64 / self.extent[axis]
    }

    /// Applies a per-bin multiplier along `axis` in spectral space:
    /// `data`, laid out as `[point][0..n_inner]`, is FFT-ed along the axis,
    /// each bin multiplied by `mult(k_j)`, and transformed back.
    pub fn apply_axis_multiplier<F>(&self, data: &mut [Complex64], n_inner: usize, axis: usize, mult: F)
    where
        F: Fn(f64) -> Complex64,
    {
        let n = self.shape[axis];
        if n == 1 {
            let m = mult(0.0);
            for v in data.iter_mut() {
                *v *= m;
            }
            return;
        }
        assert_eq!(data.len(), self.n_points() * n_inner);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let weights: Vec<Complex64> = (0..n)
            .map(|j| mult(self.wavenumber(axis, j)) / n as f64)
            .collect();
        let stride = self.stride(axis);
        let mut buf = vec![Complex64::default(); n];
        for p in 0..self.n_points() {
            // line starts: points whose index along `axis` is zero
            if (p / stride) % n != 0 {
                continue;
            }
            for c in 0..n_inner {
                for j in 0..n {
                    buf[j] = data[(p + j * stride) * n_inner + c];
                }
                fwd.process(&mut buf);
                for (j, w) in weights.iter().enumerate() {
                    buf[j] *= w;
                }
                inv.process(&mut buf);
                for j in 0..n {
                    data[(p + j * stride) * n_inner + c] = buf[j];
                }
            }
        }
    }

    /// Spectral derivative `d/dx^axis`; zero on absent axes.
    pub fn derivative(&self, data: &mut [Complex64], n_inner: usize, axis: usize) {
        if self.shape[axis] == 1 {
            data.fill(Complex64::default());
            return;
        }
        self.apply_axis_multiplier(data, n_inner, axis, |k| Complex64::new(0.0, k));
    }

    /// Inverse of `d3^2` along axis 3 on nonzero x3-modes; the x3-constant
    /// mode is projected to zero. Returns the rms magnitude of the removed
    /// zero-mode component, which must vanish for the Gauss constraint to
    /// be solvable.
    pub fn inverse_d3_squared(&self, data: &mut [Complex64], n_inner: usize) -> f64 {
        let n = self.shape[3];
        assert!(n > 1);
        // measure the zero mode before killing it
        let stride = self.stride(3);
        let mut zero_sq = 0.0;
        let mut count = 0usize;
        for p in 0..self.n_points() {
            if (p / stride) % n != 0 {
                continue;
            }
            for c in 0..n_inner {
                let mut acc = Complex64::default();
                for j in 0..n {
                    acc += data[(p + j * stride) * n_inner + c];
                }
                acc /= n as f64;
                zero_sq += acc.norm_sqr();
                count += 1;
            }
        }
        self.apply_axis_multiplier(data, n_inner, 3, |k| {
            if k == 0.0 {
                Complex64::default()
            } else {
                Complex64::new(-1.0 / (k * k), 0.0)
            }
        });
        (zero_sq / count.max(1) as f64).sqrt()
    }

    /// Forward FFT along `axis` (unnormalized), returning a new buffer.
    /// Used by diagnostics such as the dispersion fit.
    pub fn fft_axis(&self, data: &[Complex64], n_inner: usize, axis: usize) -> Vec<Complex64> {
        let n = self.shape[axis];
        let mut out = data.to_vec();
        if n == 1 {
            return out;
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let stride = self.stride(axis);
        let mut buf = vec![Complex64::default(); n];
        for p in 0..self.n_points() {
            if (p / stride) % n != 0 {
                continue;
            }
            for c in 0..n_inner {
                for j in 0..n {
                    buf[j] = data[(p + j * stride) * n_inner + c];
                }
                fwd.process(&mut buf);
                for j in 0..n {
                    out[(p + j * stride) * n_inner + c] = buf[j];
                }
            }
        }
        out
    }

    /// Inverse FFT along `axis`, normalized by `1/n`, returning a new buffer.
    pub fn ifft_axis(&self, data: &[Complex64], n_inner: usize, axis: usize) -> Vec<Complex64> {
        let n = self.shape[axis];
        let mut out = data.to_vec();
        if n == 1 {
            return out;
        }
        let mut planner = FftPlanner::new();
        let inv = planner.plan_fft_inverse(n);
        let stride = self.stride(axis);
        let mut buf = vec![Complex64::default(); n];
        for p in 0..self.n_points() {
            if (p / stride) % n != 0 {
                continue;
            }
            for c in 0..n_inner {
                for j in 0..n {
                    buf[j] = data[(p + j * stride) * n_inner + c];
                }
                inv.process(&mut buf);
                for j in 0..n {
                    out[(p + j * stride) * n_inner + c] = buf[j] / n as f64;
                }
            }
        }
        out
    }

    /// Per-axis bin indices of flattened point `p`.
    pub fn bin_indices(&self, p: usize) -> [usize; 4] {
        let mut idx = [0usize; 4];
        let mut rest = p;
        for axis in (0..4).rev() {
            idx[axis] = rest % self.shape[axis];
            rest /= self.shape[axis];
        }
        idx
    }

    /// Coordinates of flattened point `p`.
    pub fn coords(&self, p: usize) -> [f64; 4] {
        let mut idx = [0usize; 4];
        let mut rest = p;
        for axis in (0..4).rev() {
            idx[axis] = rest % self.shape[axis];
            rest /= self.shape[axis];
        }
        let mut x = [0.0f64; 4];
        for axis in 0..4 {
            if self.shape[axis] > 1 {
                x[axis] = self.extent[axis] * idx[axis] as f64 / self.shape[axis] as f64;
            }
        }
        x
    }
}
