//! Axial-gauge Hamiltonian dynamics: reduced canonical variables, the
//! constraint solvers, the per-mode kinetic matrix and its diagonalizer,
//! the two-route Hamiltonian, Hamilton's equations and time steppers.
//!
//! The state stores only the six independent coefficient families
//! `A_i^a`, `Pi_i^a` (`i = 1,2`, `a = 1,2,3`): `A_3 = 0` and `Pi^0 = 0`
//! are structural, the inner time components follow from the divergence
//! constraint (`c^0 = -K_a c^a / K_0`, requiring `K_0 != 0` off the
//! origin), and `A_0` is solved from the Gauss constraint. Divergence-
//! freeness of reconstructed fields is therefore exact by construction.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gauge_kinematics::{FieldStrength, GaugeField};
use crate::grid::SpacetimeGrid;
use crate::inner_space::{advect, ConeClass, DiffVectorField, ModeLattice};
use crate::ETA;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    A,
    Pi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    Rk4,
    Midpoint,
}

impl std::str::FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Integrator::Rk4),
            "midpoint" => Ok(Integrator::Midpoint),
            other => Err(Error::config(format!("unknown integrator '{other}'"))),
        }
    }
}

/// Reduced canonical state on a single time slice.
///
/// Coefficient layout: `((slot * 3 + (a-1)) * n_points + pt) * n_modes + m`
/// with `slot = family * 2 + i` for family `A = 0`, `Pi = 1` and
/// `i ∈ {0, 1}` labelling the spacetime directions 1, 2.
#[derive(Debug, Clone)]
pub struct CanonicalState {
    pub grid: Arc<SpacetimeGrid>,
    pub lattice: Arc<ModeLattice>,
    pub lambda: f64,
    pub time: f64,
    /// When set, evolution re-applies the cone-support mask each step.
    pub masked: bool,
    data: Vec<Complex64>,
}

pub const N_SLOTS: usize = 4;

impl CanonicalState {
    pub fn zeros(grid: Arc<SpacetimeGrid>, lattice: Arc<ModeLattice>, lambda: f64) -> Result<Self> {
        if grid.has_time_axis() {
            return Err(Error::config(
                "canonical state lives on a single time slice".to_string(),
            ));
        }
        if !(lambda > 0.0) {
            return Err(Error::config(format!("lambda must be positive, got {lambda}")));
        }
        let n = N_SLOTS * 3 * grid.n_points() * lattice.len();
        Ok(CanonicalState {
            grid,
            lattice,
            lambda,
            time: 0.0,
            masked: true,
            data: vec![Complex64::default(); n],
        })
    }

    #[inline]
    fn idx(&self, slot: usize, a: usize, pt: usize, m: usize) -> usize {
        ((slot * 3 + a) * self.grid.n_points() + pt) * self.lattice.len() + m
    }

    /// `a` is the inner index 1..=3 shifted down to 0..3.
    pub fn get(&self, fam: Family, i: usize, a: usize, pt: usize, m: usize) -> Complex64 {
        self.data[self.idx(slot(fam, i), a, pt, m)]
    }

    pub fn set(&mut self, fam: Family, i: usize, a: usize, pt: usize, m: usize, v: Complex64) {
        let k = self.idx(slot(fam, i), a, pt, m);
        self.data[k] = v;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn add_scaled(&mut self, rhs: &[Complex64], s: f64) {
        for (a, b) in self.data.iter_mut().zip(rhs.iter()) {
            *a += s * b;
        }
    }

    /// Enforces `c(-K) = conj(c(K))`; returns the relative size of the
    /// removed anti-symmetric part.
    pub fn symmetrize_reality(&mut self) -> f64 {
        let nm = self.lattice.len();
        let mut removed = 0.0;
        let mut total = 0.0;
        for base in 0..(self.data.len() / nm) {
            let row = &mut self.data[base * nm..(base + 1) * nm];
            for m in 0..nm {
                let mn = self.lattice.neg_index(m);
                if mn < m {
                    continue;
                }
                let sym = 0.5 * (row[m] + row[mn].conj());
                if mn == m {
                    removed += (row[m].im * row[m].im) as f64;
                    total += row[m].norm_sqr();
                    row[m] = Complex64::new(row[m].re, 0.0);
                } else {
                    removed += (row[m] - sym).norm_sqr() + (row[mn] - sym.conj()).norm_sqr();
                    total += row[m].norm_sqr() + row[mn].norm_sqr();
                    row[m] = sym;
                    row[mn] = sym.conj();
                }
            }
        }
        if total > 0.0 {
            (removed / total).sqrt()
        } else {
            0.0
        }
    }

    pub fn reality_residual(&self) -> f64 {
        let mut probe = self.clone();
        probe.symmetrize_reality()
    }

    /// Zeroes coefficients on modes outside the cone support; returns
    /// the relative norm removed.
    pub fn apply_mask(&mut self) -> f64 {
        let nm = self.lattice.len();
        let total_sq: f64 = self.data.iter().map(|c| c.norm_sqr()).sum();
        let mut removed = 0.0;
        for base in 0..(self.data.len() / nm) {
            let row = &mut self.data[base * nm..(base + 1) * nm];
            for m in 0..nm {
                if self.lattice.cone_class(m) == ConeClass::Excluded {
                    removed += row[m].norm_sqr();
                    row[m] = Complex64::default();
                }
            }
        }
        if total_sq > 0.0 {
            (removed / total_sq).sqrt()
        } else {
            0.0
        }
    }

    /// Relative norm carried by modes outside the cone support.
    pub fn support_leak(&self) -> f64 {
        let mut probe = self.clone();
        probe.apply_mask()
    }

    /// Reconstructs the two full inner four-vector slices of a family:
    /// `c^0(K) = -K_a c^a(K) / K_0` off the origin, zero at the origin.
    pub fn reconstruct(&self, fam: Family) -> Result<[DiffVectorField; 2]> {
        let nm = self.lattice.len();
        let npts = self.grid.n_points();
        let mut out = Vec::with_capacity(2);
        for i in 0..2 {
            let mut v = DiffVectorField::zeros(self.grid.clone(), self.lattice.clone());
            for m in 0..nm {
                let k = self.lattice.k(m);
                let origin = k == [0.0; 4];
                if !origin && k[0] == 0.0 {
                    return Err(Error::Constraint(format!(
                        "mode {:?} has K_0 = 0; timelike reconstruction undefined",
                        self.lattice.integer_mode(m)
                    )));
                }
                for pt in 0..npts {
                    let mut c0 = Complex64::default();
                    for a in 0..3 {
                        let c = self.get(fam, i, a, pt, m);
                        v.set(pt, m, a + 1, c);
                        if !origin {
                            c0 -= k[a + 1] * c;
                        }
                    }
                    if !origin {
                        v.set(pt, m, 0, c0 / k[0]);
                    }
                }
            }
            out.push(v);
        }
        Ok(out.try_into().unwrap())
    }

    /// Stores the a-components of two four-vector slices into a family,
    /// discarding the dependent time components.
    pub fn store(&mut self, fam: Family, slices: &[DiffVectorField; 2]) {
        let nm = self.lattice.len();
        for (i, s) in slices.iter().enumerate() {
            for pt in 0..self.grid.n_points() {
                for m in 0..nm {
                    for a in 0..3 {
                        self.set(fam, i, a, pt, m, s.get(pt, m, a + 1));
                    }
                }
            }
        }
    }
}

fn slot(fam: Family, i: usize) -> usize {
    match fam {
        Family::A => i,
        Family::Pi => 2 + i,
    }
}

/// Per-mode kinetic matrix `M_ab = delta_ab - K_a K_b / K_0^2`, its
/// orthogonal diagonalizer `C` (rows are eigenvectors, signs fixed by
/// the first-nonzero-positive convention) and the eigenvalues
/// `(1, 1, -K^2/K_0^2)`.
#[derive(Debug, Clone)]
pub struct ModeKinetics {
    pub m: [[f64; 3]; 3],
    pub c: [[f64; 3]; 3],
    pub eigenvalues: [f64; 3],
}

impl ModeKinetics {
    pub fn apply_c(&self, v: [Complex64; 3]) -> [Complex64; 3] {
        std::array::from_fn(|a| (0..3).map(|b| self.c[a][b] * v[b]).sum())
    }

    pub fn apply_c_transpose(&self, v: [Complex64; 3]) -> [Complex64; 3] {
        std::array::from_fn(|a| (0..3).map(|b| self.c[b][a] * v[b]).sum())
    }

    /// `M^{-1} v`, using the spectral decomposition. Fails on a zero
    /// eigenvalue (lightlike mode).
    pub fn apply_m_inverse(&self, v: [Complex64; 3]) -> Result<[Complex64; 3]> {
        if self.eigenvalues[2].abs() < 1e-14 {
            return Err(Error::Constraint(
                "kinetic matrix singular (lightlike mode)".to_string(),
            ));
        }
        let mut t = self.apply_c(v);
        for (a, x) in t.iter_mut().enumerate() {
            *x /= self.eigenvalues[a];
        }
        Ok(self.apply_c_transpose(t))
    }
}

pub fn mode_kinetics(k: [f64; 4]) -> Result<ModeKinetics> {
    let kv = [k[1], k[2], k[3]];
    let ksp: f64 = kv.iter().map(|x| x * x).sum();
    if ksp == 0.0 {
        return Ok(ModeKinetics {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            c: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            eigenvalues: [1.0, 1.0, 1.0],
        });
    }
    if k[0] == 0.0 {
        return Err(Error::Constraint(
            "mode_kinetics: K_0 = 0 with spatial K nonzero".to_string(),
        ));
    }
    let k0sq = k[0] * k[0];
    let mut m = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            m[a][b] = if a == b { 1.0 } else { 0.0 } - kv[a] * kv[b] / k0sq;
        }
    }
    let lam3 = (k0sq - ksp) / k0sq;
    let kn = ksp.sqrt();
    let khat = [kv[0] / kn, kv[1] / kn, kv[2] / kn];
    // transverse pair from the basis vector least aligned with khat
    let least = (0..3).min_by(|&a, &b| khat[a].abs().partial_cmp(&khat[b].abs()).unwrap()).unwrap();
    let mut u = [0.0; 3];
    u[least] = 1.0;
    let dot: f64 = (0..3).map(|a| u[a] * khat[a]).sum();
    for a in 0..3 {
        u[a] -= dot * khat[a];
    }
    let un: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in u.iter_mut() {
        *x /= un;
    }
    let w = [
        khat[1] * u[2] - khat[2] * u[1],
        khat[2] * u[0] - khat[0] * u[2],
        khat[0] * u[1] - khat[1] * u[0],
    ];
    let mut c = [u, w, khat];
    for row in c.iter_mut() {
        let lead = row.iter().find(|x| x.abs() > 1e-12);
        if let Some(&l) = lead {
            if l < 0.0 {
                for x in row.iter_mut() {
                    *x = -*x;
                }
            }
        }
    }
    Ok(ModeKinetics {
        m,
        c,
        eigenvalues: [1.0, 1.0, lam3],
    })
}

/// Mode kinetics for every lattice mode, indexed like the lattice.
pub fn lattice_kinetics(lattice: &ModeLattice) -> Result<Vec<ModeKinetics>> {
    (0..lattice.len()).map(|m| mode_kinetics(lattice.k(m))).collect()
}

/// Conjugate momenta from a gauge field and the time derivatives of its
/// spatial slices: `Pi_j = F_0j / Lambda` for `j = 1, 2`.
pub fn conjugate_momenta(
    a: &GaugeField,
    a_dot: &[DiffVectorField; 4],
    lambda: f64,
) -> Result<[DiffVectorField; 2]> {
    let mut out = Vec::with_capacity(2);
    for j in 1..3 {
        let mut p = a_dot[j].clone();
        p.add_scaled(&a.slices[0].spacetime_derivative(j), -1.0);
        p.add_scaled(&advect(&a.slices[0], &a.slices[j])?, 1.0);
        p.add_scaled(&advect(&a.slices[j], &a.slices[0])?, -1.0);
        p.scale(1.0 / lambda);
        out.push(p);
    }
    Ok(out.try_into().unwrap())
}

/// Adjoint of the advecting slot of `advect` under the metric pairing.
///
/// For fields on the truncated mode set,
/// `<G, advect(E, X)> = <pairing_gradient(X, G), E>` holds exactly,
/// where `<u, v> = sum eta_bb conj(u^b) v^b` over points and modes.
/// Componentwise,
///
/// `pg(X, G)^g(Q) = eta_gg sum_{R+M=Q} i R_g (eta_bb X^b(R) G^b(M))`,
///
/// with both input modes and the output mode restricted to the lattice.
/// Unlike the advective form this object is not divergence-free mode by
/// mode, so it must be contracted against constrained variations through
/// the kinetic-matrix reduction rather than stored directly.
fn pairing_gradient(x: &DiffVectorField, g: &DiffVectorField) -> DiffVectorField {
    let lat = x.lattice.clone();
    let nm = lat.len();
    let mut out = DiffVectorField::zeros(x.grid.clone(), lat.clone());
    for pt in 0..x.grid.n_points() {
        for p in 0..nm {
            let kp = lat.k(p);
            for q in 0..nm {
                if let Some(m) = lat.sum_index(p, q) {
                    let mut s = Complex64::default();
                    for b in 0..4 {
                        s += ETA[b] * x.get(pt, p, b) * g.get(pt, q, b);
                    }
                    if s == Complex64::default() {
                        continue;
                    }
                    for gm in 0..4 {
                        let cur = out.get(pt, m, gm);
                        out.set(pt, m, gm, cur + ETA[gm] * Complex64::new(0.0, kp[gm]) * s);
                    }
                }
            }
        }
    }
    out
}

/// Gauss source `G = sum_i (d_i Pi_i + A_i . grad Pi_i - Pi_i . grad A_i)`
/// from the reconstructed four-component slices.
fn gauss_source(
    a: &[DiffVectorField; 2],
    p: &[DiffVectorField; 2],
) -> Result<DiffVectorField> {
    let mut g = DiffVectorField::zeros(a[0].grid.clone(), a[0].lattice.clone());
    for i in 0..2 {
        g.add_scaled(&p[i].spacetime_derivative(i + 1), 1.0);
        g.add_scaled(&advect(&a[i], &p[i])?, 1.0);
        g.add_scaled(&advect(&p[i], &a[i])?, -1.0);
    }
    Ok(g)
}

/// Solves the Gauss constraint for `A_0 = Lambda (1/d3^2) G`. The
/// x3-constant mode of the source is projected out (residual gauge
/// fixing); its rms magnitude is returned alongside and must vanish for
/// the constraint to be exactly solvable.
pub fn solve_a0(state: &CanonicalState) -> Result<(DiffVectorField, f64)> {
    let a = state.reconstruct(Family::A)?;
    let p = state.reconstruct(Family::Pi)?;
    let mut g = gauss_source(&a, &p)?;
    let n_inner = 4 * state.lattice.len();
    let leak = state.grid.inverse_d3_squared(g.data_mut(), n_inner);
    g.scale(state.lambda);
    Ok((g, leak))
}

/// Residual of the full Gauss constraint including the `k = 3` term
/// `d_3 Pi_3` with `Pi_3 = -(1/Lambda) d_3 A_0`, relative to the size of
/// the contributing terms.
pub fn gauss_residual(state: &CanonicalState, a0: &DiffVectorField) -> Result<f64> {
    let a = state.reconstruct(Family::A)?;
    let p = state.reconstruct(Family::Pi)?;
    let g = gauss_source(&a, &p)?;
    let mut d3pi3 = a0.spacetime_derivative(3).spacetime_derivative(3);
    d3pi3.scale(-1.0 / state.lambda);
    let mut r = g.clone();
    r.add_scaled(&d3pi3, state.lambda / state.lambda); // Pi_3 carries 1/Lambda, the constraint multiplies by nothing further
    let scale = g.norm() + d3pi3.norm();
    if scale > 0.0 {
        Ok(r.norm() / scale)
    } else {
        Ok(0.0)
    }
}

/// Eta-contraction `sum_a |c^a|^2 - |c^0|^2` of one coefficient.
fn eta_norm_sq(v: &DiffVectorField, pt: usize, m: usize) -> f64 {
    let mut s = 0.0;
    for a in 1..4 {
        s += v.get(pt, m, a).norm_sqr();
    }
    s - v.get(pt, m, 0).norm_sqr()
}

/// The nonlinear transverse field strength
/// `F_12 = d_1 A_2 - d_2 A_1 + A_1 . grad A_2 - A_2 . grad A_1`.
fn f12(a: &[DiffVectorField; 2]) -> Result<DiffVectorField> {
    let mut f = a[1].spacetime_derivative(1);
    f.add_scaled(&a[0].spacetime_derivative(2), -1.0);
    f.add_scaled(&advect(&a[0], &a[1])?, 1.0);
    f.add_scaled(&advect(&a[1], &a[0])?, -1.0);
    Ok(f)
}

/// The reduced Hamiltonian evaluated in the physical variables, with
/// inner eta-contractions over the reconstructed four-component fields.
pub fn hamiltonian(state: &CanonicalState) -> Result<f64> {
    let (h, _) = hamiltonian_terms(state, Route::Physical)?;
    Ok(h)
}

/// The same Hamiltonian evaluated through the tilde (diagonalized)
/// variables: rotate the a-components with `C(K)` and weight the third
/// polarization with `-K^2/K_0^2`. Must agree with `hamiltonian` to
/// rounding and makes positivity manifest on cone-supported states.
pub fn hamiltonian_tilde(state: &CanonicalState) -> Result<f64> {
    let (h, _) = hamiltonian_terms(state, Route::Tilde)?;
    Ok(h)
}

enum Route {
    Physical,
    Tilde,
}

fn hamiltonian_terms(state: &CanonicalState, route: Route) -> Result<(f64, f64)> {
    let a = state.reconstruct(Family::A)?;
    let p = state.reconstruct(Family::Pi)?;
    let (a0, leak) = solve_a0(state)?;
    let lambda = state.lambda;
    let lat = &state.lattice;
    let npts = state.grid.n_points();
    let il2 = 1.0 / (lambda * lambda);
    // (field, weight) pairs entering as 1/2 * weight * |.|^2
    let d3a0 = a0.spacetime_derivative(3);
    let mut terms: Vec<(DiffVectorField, f64)> = vec![(d3a0, il2)];
    for i in 0..2 {
        terms.push((p[i].clone(), 1.0));
        terms.push((a[i].spacetime_derivative(3), il2));
    }
    terms.push((f12(&a)?, il2));
    let kin = match route {
        Route::Tilde => Some(lattice_kinetics(lat)?),
        Route::Physical => None,
    };
    let mut h = 0.0;
    for (field, w) in &terms {
        for pt in 0..npts {
            for m in 0..lat.len() {
                let q = match &kin {
                    None => eta_norm_sq(field, pt, m),
                    Some(kin) => {
                        let v: [Complex64; 3] =
                            std::array::from_fn(|a| field.get(pt, m, a + 1));
                        let t = kin[m].apply_c(v);
                        let e = &kin[m].eigenvalues;
                        e[0] * t[0].norm_sqr() + e[1] * t[1].norm_sqr() + e[2] * t[2].norm_sqr()
                    }
                };
                h += 0.5 * w * q;
            }
        }
    }
    let measure = state.grid.spatial_volume_element() * lat.mode_volume() / lambda.powi(4);
    Ok((h * measure, leak))
}

/// Rotates the state coefficients into tilde variables, per mode.
pub fn to_tilde(state: &CanonicalState) -> Result<Vec<Complex64>> {
    rotate(state, true)
}

/// Builds a physical state from tilde coefficients (layout as in
/// `CanonicalState`).
pub fn from_tilde(
    grid: Arc<SpacetimeGrid>,
    lattice: Arc<ModeLattice>,
    lambda: f64,
    tilde: &[Complex64],
) -> Result<CanonicalState> {
    let mut state = CanonicalState::zeros(grid, lattice, lambda)?;
    if tilde.len() != state.data.len() {
        return Err(Error::config("from_tilde: coefficient count mismatch".to_string()));
    }
    state.data.copy_from_slice(tilde);
    let rotated = rotate(&state, false)?;
    state.data = rotated;
    Ok(state)
}

fn rotate(state: &CanonicalState, forward: bool) -> Result<Vec<Complex64>> {
    let kin = lattice_kinetics(&state.lattice)?;
    let nm = state.lattice.len();
    let npts = state.grid.n_points();
    let mut out = state.data.clone();
    for s in 0..N_SLOTS {
        for pt in 0..npts {
            for m in 0..nm {
                let v: [Complex64; 3] = std::array::from_fn(|a| {
                    state.data[((s * 3 + a) * npts + pt) * nm + m]
                });
                let r = if forward {
                    kin[m].apply_c(v)
                } else {
                    kin[m].apply_c_transpose(v)
                };
                for a in 0..3 {
                    out[((s * 3 + a) * npts + pt) * nm + m] = r[a];
                }
            }
        }
    }
    Ok(out)
}

/// Contracts a metric-pairing gradient field against the constrained
/// variations and maps it through the inverse kinetic matrix, returning
/// the reduced flow components `M^-1(K) ghat` with
/// `ghat_a = z^a + (K_a / K_0) z^0` (the time component is an induced
/// variation off the origin and a frozen direction at the origin).
fn reduce_flow(
    z: &DiffVectorField,
    kin: &[ModeKinetics],
    scale: f64,
) -> Result<Vec<[Complex64; 3]>> {
    let lat = &z.lattice;
    let nm = lat.len();
    let npts = z.grid.n_points();
    let origin = lat.origin();
    let mut out = vec![[Complex64::default(); 3]; npts * nm];
    for pt in 0..npts {
        for m in 0..nm {
            let k = lat.k(m);
            let mut g = [Complex64::default(); 3];
            for a in 0..3 {
                g[a] = z.get(pt, m, a + 1);
                if m != origin {
                    g[a] += (k[a + 1] / k[0]) * z.get(pt, m, 0);
                }
            }
            let fl = kin[m].apply_m_inverse(g)?;
            for a in 0..3 {
                out[pt * nm + m][a] = scale * fl[a];
            }
        }
    }
    Ok(out)
}

/// Right-hand side of Hamilton's equations, in state layout.
///
/// The flow is the exact gradient of the discrete Hamiltonian with
/// respect to the reduced coordinates, mapped through the inverse
/// kinetic matrix:
///
/// `d_0 Ahat_i  = +Lambda [M^-1 ghat(Z_Pi_i)]`
/// `d_0 Pihat_j = -Lambda [M^-1 ghat(Z_A_j)]`
///
/// with the gradient fields assembled from the exact adjoints of the
/// truncated bilinears (`advect` for the advected slot,
/// `pairing_gradient` for the advecting slot):
///
/// `Z_Pi_i = Pi_i + (1/Lambda) [d_i A_0 + advect(A_i, A_0) + pg(A_i, A_0)]`
/// `Z_A_1  = -(1/Lambda^2) d_3^2 A_1
///           + (1/Lambda^2) [d_2 F_12 + advect(A_2, F_12) + pg(A_2, F_12)]
///           - (1/Lambda)   [advect(Pi_1, A_0) + pg(Pi_1, A_0)]`
///
/// (`Z_A_2` with the `F_12` block negated and indices 1 <-> 2). In the
/// continuum these reduce to the familiar advective field equations;
/// on the truncated mode set the advective form differs from the
/// gradient by lost total-derivative terms and would not conserve the
/// Hamiltonian, so the gradient form is normative here.
pub fn time_derivatives(state: &CanonicalState) -> Result<Vec<Complex64>> {
    let a = state.reconstruct(Family::A)?;
    let p = state.reconstruct(Family::Pi)?;
    let (a0, _) = solve_a0(state)?;
    let lambda = state.lambda;
    let ft = f12(&a)?;
    let kin = lattice_kinetics(&state.lattice)?;
    let nm = state.lattice.len();
    let npts = state.grid.n_points();
    let mut out = CanonicalState::zeros(state.grid.clone(), state.lattice.clone(), state.lambda)?;
    for i in 0..2 {
        let mut z = p[i].clone();
        z.add_scaled(&a0.spacetime_derivative(i + 1), 1.0 / lambda);
        z.add_scaled(&advect(&a[i], &a0)?, 1.0 / lambda);
        z.add_scaled(&pairing_gradient(&a[i], &a0), 1.0 / lambda);
        let fl = reduce_flow(&z, &kin, lambda)?;
        for pt in 0..npts {
            for m in 0..nm {
                for aa in 0..3 {
                    out.set(Family::A, i, aa, pt, m, fl[pt * nm + m][aa]);
                }
            }
        }
    }
    for j in 0..2 {
        let o = 1 - j;
        let sign = if j == 0 { 1.0 } else { -1.0 };
        let l2 = lambda * lambda;
        let mut z = a[j].spacetime_derivative(3).spacetime_derivative(3);
        z.scale(-1.0 / l2);
        z.add_scaled(&ft.spacetime_derivative(o + 1), sign / l2);
        z.add_scaled(&advect(&a[o], &ft)?, sign / l2);
        z.add_scaled(&pairing_gradient(&a[o], &ft), sign / l2);
        z.add_scaled(&advect(&p[j], &a0)?, -1.0 / lambda);
        z.add_scaled(&pairing_gradient(&p[j], &a0), -1.0 / lambda);
        let fl = reduce_flow(&z, &kin, -lambda)?;
        for pt in 0..npts {
            for m in 0..nm {
                for aa in 0..3 {
                    out.set(Family::Pi, j, aa, pt, m, fl[pt * nm + m][aa]);
                }
            }
        }
    }
    Ok(out.data)
}

/// As `time_derivatives`, but returning the full four-component slices,
/// with the time components given by the divergence-constraint
/// reconstruction of the reduced flow.
pub fn time_derivatives_full(
    state: &CanonicalState,
) -> Result<([DiffVectorField; 2], [DiffVectorField; 2])> {
    let flat = time_derivatives(state)?;
    let mut tmp = CanonicalState::zeros(state.grid.clone(), state.lattice.clone(), state.lambda)?;
    tmp.data = flat;
    Ok((tmp.reconstruct(Family::A)?, tmp.reconstruct(Family::Pi)?))
}

fn check_finite(state: &CanonicalState, step: usize) -> Result<()> {
    if state.data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::Numerical {
            step,
            what: "non-finite coefficient after step".to_string(),
        });
    }
    Ok(())
}

/// Evolves a state, returning the trajectory including the initial
/// snapshot. Reality and the support mask are re-applied after every
/// step; NaN/overflow aborts with the offending step index.
pub fn evolve(
    state: &CanonicalState,
    dt: f64,
    steps: usize,
    integrator: Integrator,
) -> Result<Vec<CanonicalState>> {
    if !(dt > 0.0) {
        return Err(Error::config(format!("dt must be positive, got {dt}")));
    }
    let mut traj = Vec::with_capacity(steps + 1);
    let mut cur = state.clone();
    traj.push(cur.clone());
    for step in 0..steps {
        match integrator {
            Integrator::Rk4 => {
                let k1 = time_derivatives(&cur)?;
                let mut s2 = cur.clone();
                s2.add_scaled(&k1, 0.5 * dt);
                let k2 = time_derivatives(&s2)?;
                let mut s3 = cur.clone();
                s3.add_scaled(&k2, 0.5 * dt);
                let k3 = time_derivatives(&s3)?;
                let mut s4 = cur.clone();
                s4.add_scaled(&k3, dt);
                let k4 = time_derivatives(&s4)?;
                cur.add_scaled(&k1, dt / 6.0);
                cur.add_scaled(&k2, dt / 3.0);
                cur.add_scaled(&k3, dt / 3.0);
                cur.add_scaled(&k4, dt / 6.0);
            }
            Integrator::Midpoint => {
                // implicit midpoint by fixed-point iteration
                let mut mid = cur.clone();
                let base = cur.data.clone();
                let mut converged = false;
                for _ in 0..100 {
                    let f = time_derivatives(&mid)?;
                    let mut next = base.clone();
                    for (n, df) in next.iter_mut().zip(f.iter()) {
                        *n += 0.5 * dt * df;
                    }
                    let delta: f64 = next
                        .iter()
                        .zip(mid.data.iter())
                        .map(|(x, y)| (x - y).norm_sqr())
                        .sum::<f64>()
                        .sqrt();
                    mid.data.copy_from_slice(&next);
                    let scale = cur.norm().max(1e-30);
                    if delta <= 1e-14 * scale {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(Error::Numerical {
                        step,
                        what: "implicit midpoint iteration did not converge".to_string(),
                    });
                }
                let f = time_derivatives(&mid)?;
                cur.add_scaled(&f, dt);
            }
        }
        cur.time += dt;
        cur.symmetrize_reality();
        if cur.masked {
            cur.apply_mask();
        }
        check_finite(&cur, step)?;
        traj.push(cur.clone());
    }
    Ok(traj)
}

/// Random cone-supported state: unit-variance tilde draws on every
/// retained mode, reality-symmetrized and rotated back. Along each
/// present spacetime axis the `A` family is band-passed to bins
/// `{0, +-1}` and the `Pi` family to `{+-2}`, so no `A`-`Pi` bin pair
/// sums to zero or to the Nyquist bin: the Gauss source then has no
/// x3-constant component and the constraint is exactly solvable on the
/// initial slice.
pub fn random_cone_state(
    grid: &Arc<SpacetimeGrid>,
    lattice: &Arc<ModeLattice>,
    lambda: f64,
    seed: u64,
    amplitude: f64,
) -> Result<CanonicalState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tilde = vec![Complex64::default(); N_SLOTS * 3 * grid.n_points() * lattice.len()];
    for c in tilde.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *c = Complex64::new(re, im) * amplitude;
    }
    // disjoint x-bands for the two families
    let nm = lattice.len();
    let npts = grid.n_points();
    let row_len = npts * nm;
    for row in 0..(N_SLOTS * 3) {
        let keep: [isize; 3] = if row < 2 * 3 { [0, 1, -1] } else { [2, -2, 2] };
        let data = &mut tilde[row * row_len..(row + 1) * row_len];
        for axis in 0..4 {
            if !grid.axis_present(axis) {
                continue;
            }
            let n = grid.shape()[axis];
            let mut filtered = grid.fft_axis(data, nm, axis);
            for (idx, c) in filtered.iter_mut().enumerate() {
                let j = grid.bin_indices(idx / nm)[axis];
                let f = if 2 * j <= n { j as isize } else { j as isize - n as isize };
                if !keep.contains(&f) && !keep.contains(&-f) {
                    *c = Complex64::default();
                }
            }
            let back = grid.ifft_axis(&filtered, nm, axis);
            data.copy_from_slice(&back);
        }
    }
    let mut state = from_tilde(grid.clone(), lattice.clone(), lambda, &tilde)?;
    state.symmetrize_reality();
    state.apply_mask();
    Ok(state)
}

/// Abelian traveling wave `A_1^1 = amp cos(k x3)`, `Pi_1^1 = (amp k /
/// Lambda) sin(k x3)` at the inner origin; an exact solution moving in
/// `+x3` with frequency `|k|`.
pub fn maxwell_plane_wave(
    grid: &Arc<SpacetimeGrid>,
    lattice: &Arc<ModeLattice>,
    lambda: f64,
    amplitude: f64,
    mode_number: i64,
) -> Result<CanonicalState> {
    let mut state = CanonicalState::zeros(grid.clone(), lattice.clone(), lambda)?;
    let k = 2.0 * std::f64::consts::PI * mode_number as f64 / grid.extent()[3];
    let origin = lattice.origin();
    for pt in 0..grid.n_points() {
        let x3 = grid.coords(pt)[3];
        state.set(Family::A, 0, 0, pt, origin, Complex64::new(amplitude * (k * x3).cos(), 0.0));
        state.set(
            Family::Pi,
            0,
            0,
            pt,
            origin,
            Complex64::new(amplitude * k / lambda * (k * x3).sin(), 0.0),
        );
    }
    Ok(state)
}

/// Assembles the full gauge field `(A_0, A_1, A_2, 0)` and field
/// strength of a state, for cross-checks against the Lagrangian-side
/// stress tensor (`H = p_0`) and Lagrangian evaluation.
pub fn state_field_strength(state: &CanonicalState) -> Result<(GaugeField, FieldStrength)> {
    let a = state.reconstruct(Family::A)?;
    let p = state.reconstruct(Family::Pi)?;
    let (a0, _) = solve_a0(state)?;
    let zero = DiffVectorField::zeros(state.grid.clone(), state.lattice.clone());
    let gauge = GaugeField {
        slices: [a0.clone(), a[0].clone(), a[1].clone(), zero.clone()],
    };
    let lambda = state.lambda;
    // F_0j = Lambda Pi_j; F_03 = -d_3 A_0; F_3j = d_3 A_j; F_12 nonlinear
    let mut f01 = p[0].clone();
    f01.scale(lambda);
    let mut f02 = p[1].clone();
    f02.scale(lambda);
    let mut f03 = a0.spacetime_derivative(3);
    f03.scale(-1.0);
    let ft = f12(&a)?;
    let mut f13 = a[0].spacetime_derivative(3);
    f13.scale(-1.0); // F_13 = -F_31
    let mut f23 = a[1].spacetime_derivative(3);
    f23.scale(-1.0);
    Ok((gauge, FieldStrength::from_slices([f01, f02, f03, ft, f13, f23])))
}

/// Worst-case mismatch between `time_derivatives` and the canonical
/// flow generated by a central finite-difference gradient of the
/// Hamiltonian, normalized by the rms derivative magnitude.
///
/// The restricted symplectic form is `Pi* M(K) dA` (the inner
/// eta-contraction of divergence-free coefficient pairs reduces to the
/// kinetic matrix M), so the flow carries `M^{-1}(K)` relative to the
/// bare gradient; `+-K` pairs are perturbed jointly under the reality
/// constraint, giving one factor 2 off the origin. The overall measure
/// factor is pinned by the Abelian `K = 0` limit `dA/dt = Lambda Pi`.
pub fn gradient_consistency(state: &CanonicalState, h_step: f64) -> Result<f64> {
    let flat = time_derivatives(state)?;
    let lat = &state.lattice;
    let grid = &state.grid;
    let lambda = state.lambda;
    let kin = lattice_kinetics(lat)?;
    let npts = grid.n_points();
    let nm = lat.len();
    let measure = grid.spatial_volume_element() * lat.mode_volume() / lambda.powi(5);
    let mut worst = 0.0f64;
    let scale =
        flat.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt() / (flat.len() as f64).sqrt();
    for slot_a in 0..2usize {
        // dA/dt from the Pi gradient, dPi/dt from minus the A gradient
        let (src_fam, dst_slot_base, sign) = if slot_a == 0 {
            (Family::Pi, 0usize, 1.0)
        } else {
            (Family::A, 2usize, -1.0)
        };
        for i in 0..2 {
            for pt in 0..npts {
                for m in 0..nm {
                    let mn = lat.neg_index(m);
                    if mn < m {
                        continue;
                    }
                    let c_factor = if mn == m { 1.0 } else { 2.0 };
                    let mut grad = [Complex64::default(); 3];
                    for a in 0..3 {
                        for (part, unit) in
                            [(0, Complex64::new(1.0, 0.0)), (1, Complex64::new(0.0, 1.0))]
                        {
                            if mn == m && part == 1 {
                                continue; // origin coefficients are real
                            }
                            let mut plus = state.clone();
                            let mut minus = state.clone();
                            for (s, d) in [(&mut plus, h_step), (&mut minus, -h_step)] {
                                let v = s.get(src_fam, i, a, pt, m) + d * unit;
                                s.set(src_fam, i, a, pt, m, v);
                                if mn != m {
                                    let w = s.get(src_fam, i, a, pt, mn) + d * unit.conj();
                                    s.set(src_fam, i, a, pt, mn, w);
                                }
                            }
                            let g =
                                (hamiltonian(&plus)? - hamiltonian(&minus)?) / (2.0 * h_step);
                            grad[a] += unit * g;
                        }
                    }
                    let flow = kin[m]
                        .apply_m_inverse(grad)?
                        .map(|g| g * sign / (c_factor * measure));
                    for a in 0..3 {
                        let idx = (((dst_slot_base + i) * 3 + a) * npts + pt) * nm + m;
                        worst = worst.max((flow[a] - flat[idx]).norm());
                    }
                }
            }
        }
    }
    Ok(worst / scale.max(1e-30))
}
