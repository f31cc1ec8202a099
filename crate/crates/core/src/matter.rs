//! Free scalar probe living on the spacetime grid with spectral inner
//! structure. The probe carries the inner Noether charges used as a
//! conserved-quantity control; its own evolution is the exact free wave
//! flow, diagonal in spacetime modes.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::inner_space::{advect_scalar, DiffVectorField, InnerScalarField, ModeLattice};
use crate::grid::SpacetimeGrid;
use std::sync::Arc;

/// `(psi, psi_dot)` pair sharing one grid and lattice.
#[derive(Debug, Clone)]
pub struct ScalarProbe {
    pub psi: InnerScalarField,
    pub psi_dot: InnerScalarField,
}

/// Noether current of rigid inner translations, sampled per grid point:
/// `j[pt*16 + nu*4 + alpha]` holds `J^nu_alpha`.
#[derive(Debug, Clone)]
pub struct MatterCurrent {
    pub grid: Arc<SpacetimeGrid>,
    pub j: Vec<f64>,
}

impl ScalarProbe {
    pub fn zeros(grid: Arc<SpacetimeGrid>, lattice: Arc<ModeLattice>) -> Self {
        ScalarProbe {
            psi: InnerScalarField::zeros(grid.clone(), lattice.clone()),
            psi_dot: InnerScalarField::zeros(grid, lattice),
        }
    }

    pub fn grid(&self) -> &Arc<SpacetimeGrid> {
        &self.psi.grid
    }

    pub fn lattice(&self) -> &Arc<ModeLattice> {
        &self.psi.lattice
    }

    /// Random real probe supported on the given inner modes.
    pub fn random(
        grid: &Arc<SpacetimeGrid>,
        lattice: &Arc<ModeLattice>,
        modes: &[usize],
        seed: u64,
        amplitude: f64,
    ) -> Self {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut probe = ScalarProbe::zeros(grid.clone(), lattice.clone());
        for field in [&mut probe.psi, &mut probe.psi_dot] {
            for pt in 0..grid.n_points() {
                for &m in modes {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    field.set(pt, m, Complex64::new(re, im) * amplitude);
                }
            }
            field.symmetrize_reality();
        }
        probe
    }

    /// Exact free evolution by time `t`: every spatial spacetime mode
    /// rotates at frequency `|k|`, the inner structure is a spectator.
    pub fn evolve_exact(&mut self, t: f64) -> Result<()> {
        let grid = self.grid().clone();
        if grid.has_time_axis() {
            return Err(Error::config(
                "evolve_exact expects a single-time-slice grid".to_string(),
            ));
        }
        let nm = self.lattice().len();
        let mut psi_hat = self.psi.data().to_vec();
        let mut dot_hat = self.psi_dot.data().to_vec();
        for axis in 1..4 {
            psi_hat = grid.fft_axis(&psi_hat, nm, axis);
            dot_hat = grid.fft_axis(&dot_hat, nm, axis);
        }
        for pt in 0..grid.n_points() {
            let bins = grid.bin_indices(pt);
            let k_sq: f64 = (1..4)
                .map(|axis| grid.wavenumber(axis, bins[axis]).powi(2))
                .sum();
            let omega = k_sq.sqrt();
            let (c, s_over_w, ws) = if omega > 0.0 {
                ((omega * t).cos(), (omega * t).sin() / omega, omega * (omega * t).sin())
            } else {
                (1.0, t, 0.0)
            };
            for m in 0..nm {
                let i = pt * nm + m;
                let p = psi_hat[i];
                let d = dot_hat[i];
                psi_hat[i] = c * p + s_over_w * d;
                dot_hat[i] = -ws * p + c * d;
            }
        }
        for axis in 1..4 {
            psi_hat = grid.ifft_axis(&psi_hat, nm, axis);
            dot_hat = grid.ifft_axis(&dot_hat, nm, axis);
        }
        self.psi.data_mut().copy_from_slice(&psi_hat);
        self.psi_dot.data_mut().copy_from_slice(&dot_hat);
        Ok(())
    }

    /// Energy `sum_x v3 <1/2 psi_dot^2 + 1/2 |grad psi|^2>`.
    pub fn energy(&self, lambda: f64) -> f64 {
        let grid = self.grid();
        let lat = self.lattice();
        let nm = lat.len();
        let w = lat.mode_volume() / lambda.powi(4);
        let grads: Vec<InnerScalarField> = (1..4)
            .map(|axis| self.psi.spacetime_derivative(axis))
            .collect();
        let mut e = 0.0;
        for pt in 0..grid.n_points() {
            for m in 0..nm {
                let mut dens = self.psi_dot.get(pt, m).norm_sqr();
                for g in &grads {
                    dens += g.get(pt, m).norm_sqr();
                }
                e += 0.5 * w * dens;
            }
        }
        e * grid.spatial_volume_element()
    }
}

/// Noether current of rigid inner translations,
/// `J^nu_alpha = -<(d^nu psi)(grad_alpha psi)>` with the `Lambda^-4`
/// inner measure. The time component uses `psi_dot` for `d_0 psi`.
pub fn noether_current(probe: &ScalarProbe, lambda: f64) -> MatterCurrent {
    let grid = probe.grid().clone();
    let lat = probe.lattice();
    let nm = lat.len();
    let npts = grid.n_points();
    let w = lat.mode_volume() / lambda.powi(4);
    let inner_grads: Vec<InnerScalarField> =
        (0..4).map(|alpha| probe.psi.spectral_derivative(alpha)).collect();
    let mut d_nu: Vec<InnerScalarField> = Vec::with_capacity(4);
    // d^0 psi = -d_0 psi = -psi_dot with eta = diag(-1,1,1,1)
    let mut d0 = probe.psi_dot.clone();
    d0.scale(-1.0);
    d_nu.push(d0);
    for axis in 1..4 {
        d_nu.push(probe.psi.spacetime_derivative(axis));
    }
    let mut j = vec![0.0; npts * 16];
    for pt in 0..npts {
        for nu in 0..4 {
            for alpha in 0..4 {
                let mut acc = 0.0;
                for m in 0..nm {
                    acc += (d_nu[nu].get(pt, m).conj() * inner_grads[alpha].get(pt, m)).re;
                }
                j[pt * 16 + nu * 4 + alpha] = -w * acc;
            }
        }
    }
    MatterCurrent { grid, j }
}

/// Inner charges `P_alpha = sum_x v3 J^0_alpha` on a single time slice.
pub fn charges(current: &MatterCurrent) -> Result<[f64; 4]> {
    if current.grid.has_time_axis() {
        return Err(Error::config(
            "charges expects a single-time-slice grid".to_string(),
        ));
    }
    let v3 = current.grid.spatial_volume_element();
    let mut p = [0.0; 4];
    for pt in 0..current.grid.n_points() {
        for alpha in 0..4 {
            p[alpha] += v3 * current.j[pt * 16 + alpha];
        }
    }
    Ok(p)
}

/// X-integral of the matter Lagrangian variation under a rigid inner
/// transformation with parameter `eps`, per grid point. Vanishes
/// identically on the symmetric truncated lattice: the convolution pairs
/// feeding the inner zero mode are all retained and cancel through the
/// divergence constraint.
pub fn delta_matter_lagrangian(
    probe: &ScalarProbe,
    eps: &DiffVectorField,
    lambda: f64,
) -> Result<Vec<f64>> {
    let grid = probe.grid().clone();
    let lat = probe.lattice();
    let nm = lat.len();
    let w = lat.mode_volume() / lambda.powi(4);
    let mut d_psi = advect_scalar(eps, &probe.psi)?;
    d_psi.scale(-1.0);
    let mut d_dot = advect_scalar(eps, &probe.psi_dot)?;
    d_dot.scale(-1.0);
    let mut out = vec![0.0; grid.n_points()];
    for pt in 0..grid.n_points() {
        let mut acc = 0.0;
        for m in 0..nm {
            acc += (probe.psi_dot.get(pt, m).conj() * d_dot.get(pt, m)).re;
        }
        out[pt] = w * acc;
    }
    for axis in 1..4 {
        let g = probe.psi.spacetime_derivative(axis);
        let dg = d_psi.spacetime_derivative(axis);
        for pt in 0..grid.n_points() {
            let mut acc = 0.0;
            for m in 0..nm {
                acc += (g.get(pt, m).conj() * dg.get(pt, m)).re;
            }
            out[pt] -= w * acc;
        }
    }
    Ok(out)
}
