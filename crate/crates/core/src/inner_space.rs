//! Spectral representation of fields on the inner space and the Lie algebra
//! of divergence-free vector fields.
//!
//! Fields carry one complex coefficient per retained inner mode `K` at each
//! spacetime grid point; the inner mode lattice is `K_alpha = kappa0 *
//! n_alpha` with integer `n` inside a cube of the configured radius, passed
//! through a cone filter. Products are truncated convolutions over the mode
//! lattice. A sum mode that falls outside the lattice is dropped; every
//! retained coefficient of a product is exact (equivalent to zero-padding
//! to twice the radius and truncating back).

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::SpacetimeGrid;

/// Tolerance used when rejecting constraint-violating bracket inputs.
const DIVFREE_INPUT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ConeFilter {
    /// `K_0^2 > |K_vec|^2` for every retained `K != 0` (default).
    StrictTimelike,
    /// Admits lightlike boundary modes: `K_0^2 >= |K_vec|^2`, `K_0 != 0`.
    IncludeLightlike,
    /// No cone restriction. Modes with `K_0 = 0`, `K != 0` are still
    /// excluded because the axial-gauge reconstruction divides by `K_0`.
    /// Intended for negative-control experiments only.
    Unfiltered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeClass {
    Origin,
    Forward,
    Backward,
    /// Spacelike (outside both cones); only present on unfiltered lattices.
    Excluded,
}

/// Truncated inner-momentum lattice with cone classification, negation
/// map and the convolution pair table.
#[derive(Debug)]
pub struct ModeLattice {
    kappa0: f64,
    radius: i64,
    filter: ConeFilter,
    modes: Vec<[i64; 4]>,
    cone_class: Vec<ConeClass>,
    neg: Vec<usize>,
    index: HashMap<[i64; 4], usize>,
    /// `pairs[p * len + q]` = retained index of `K_p + K_q`, or `usize::MAX`.
    pairs: Vec<usize>,
}

/// Cone classification of an integer mode (independent of `kappa0`).
pub fn classify_mode(n: [i64; 4]) -> ConeClass {
    if n == [0; 4] {
        return ConeClass::Origin;
    }
    let spatial: i64 = n[1] * n[1] + n[2] * n[2] + n[3] * n[3];
    let minus_ksq = n[0] * n[0] - spatial;
    if minus_ksq < 0 {
        ConeClass::Excluded
    } else if n[0] > 0 {
        ConeClass::Forward
    } else if n[0] < 0 {
        ConeClass::Backward
    } else {
        // netural only possible for n = 0 when minus_ksq >= 0 fails;
        // lightlike with n_0 = 0 means n = 0 handled above
        ConeClass::Excluded
    }
}

fn mode_admitted(n: [i64; 4], filter: ConeFilter) -> bool {
    if n == [0; 4] {
        return true;
    }
    let spatial: i64 = n[1] * n[1] + n[2] * n[2] + n[3] * n[3];
    let minus_ksq = n[0] * n[0] - spatial;
    match filter {
        ConeFilter::StrictTimelike => minus_ksq > 0,
        ConeFilter::IncludeLightlike => minus_ksq >= 0 && n[0] != 0,
        ConeFilter::Unfiltered => n[0] != 0,
    }
}

impl ModeLattice {
    pub fn build(kappa0: f64, radius: u32, filter: ConeFilter) -> Result<Arc<Self>> {
        if !(kappa0 > 0.0) {
            return Err(Error::config(format!(
                "lattice.kappa0 must be positive, got {kappa0}"
            )));
        }
        let r = radius as i64;
        let mut modes = Vec::new();
        for n0 in -r..=r {
            for n1 in -r..=r {
                for n2 in -r..=r {
                    for n3 in -r..=r {
                        let n = [n0, n1, n2, n3];
                        if mode_admitted(n, filter) {
                            modes.push(n);
                        }
                    }
                }
            }
        }
        let index: HashMap<[i64; 4], usize> =
            modes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
        let neg = modes
            .iter()
            .map(|n| index[&[-n[0], -n[1], -n[2], -n[3]]])
            .collect();
        let cone_class = modes.iter().map(|&n| classify_mode(n)).collect();
        let len = modes.len();
        let mut pairs = vec![usize::MAX; len * len];
        for p in 0..len {
            for q in 0..len {
                let s = [
                    modes[p][0] + modes[q][0],
                    modes[p][1] + modes[q][1],
                    modes[p][2] + modes[q][2],
                    modes[p][3] + modes[q][3],
                ];
                if let Some(&m) = index.get(&s) {
                    pairs[p * len + q] = m;
                }
            }
        }
        Ok(Arc::new(ModeLattice {
            kappa0,
            radius: r,
            filter,
            modes,
            cone_class,
            neg,
            index,
            pairs,
        }))
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0
    }

    pub fn radius(&self) -> u32 {
        self.radius as u32
    }

    pub fn filter(&self) -> ConeFilter {
        self.filter
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the origin is always retained
    }

    pub fn integer_mode(&self, m: usize) -> [i64; 4] {
        self.modes[m]
    }

    /// Lower-index momentum components `K_alpha` of mode `m`.
    pub fn k(&self, m: usize) -> [f64; 4] {
        let n = self.modes[m];
        [
            self.kappa0 * n[0] as f64,
            self.kappa0 * n[1] as f64,
            self.kappa0 * n[2] as f64,
            self.kappa0 * n[3] as f64,
        ]
    }

    /// `-K^2 = K_0^2 - |K_vec|^2` of mode `m`.
    pub fn minus_ksq(&self, m: usize) -> f64 {
        let k = self.k(m);
        k[0] * k[0] - k[1] * k[1] - k[2] * k[2] - k[3] * k[3]
    }

    pub fn cone_class(&self, m: usize) -> ConeClass {
        self.cone_class[m]
    }

    /// Whether mode `m` lies in `V+ u V-` (closed cones, origin included).
    pub fn in_cone_support(&self, m: usize) -> bool {
        self.cone_class[m] != ConeClass::Excluded
    }

    pub fn neg_index(&self, m: usize) -> usize {
        self.neg[m]
    }

    pub fn find(&self, n: [i64; 4]) -> Option<usize> {
        self.index.get(&n).copied()
    }

    pub fn origin(&self) -> usize {
        self.index[&[0; 4]]
    }

    /// Retained index of `K_p + K_q`, if inside the lattice.
    pub fn sum_index(&self, p: usize, q: usize) -> Option<usize> {
        let m = self.pairs[p * self.modes.len() + q];
        (m != usize::MAX).then_some(m)
    }

    /// Inner-space Parseval weight per mode, `(2 pi / kappa0)^4`.
    pub fn mode_volume(&self) -> f64 {
        (2.0 * std::f64::consts::PI / self.kappa0).powi(4)
    }

    /// Lattices are compatible when built with identical parameters.
    pub fn compatible(&self, other: &ModeLattice) -> bool {
        self.kappa0 == other.kappa0 && self.radius == other.radius && self.filter == other.filter
    }
}

fn check_same_basis(
    ga: &Arc<SpacetimeGrid>,
    la: &Arc<ModeLattice>,
    gb: &Arc<SpacetimeGrid>,
    lb: &Arc<ModeLattice>,
) -> Result<()> {
    if !la.compatible(lb) {
        return Err(Error::LatticeMismatch(
            "operands live on different mode lattices".into(),
        ));
    }
    if ga.shape() != gb.shape() || ga.extent() != gb.extent() {
        return Err(Error::LatticeMismatch(
            "operands live on different spacetime grids".into(),
        ));
    }
    Ok(())
}

/// Scalar-valued field on the inner space: one complex coefficient per
/// spacetime point and retained mode, layout `[point][mode]`.
#[derive(Debug, Clone)]
pub struct InnerScalarField {
    pub grid: Arc<SpacetimeGrid>,
    pub lattice: Arc<ModeLattice>,
    data: Vec<Complex64>,
}

/// Inner-vector-valued field, layout `[point][mode][alpha]`. Carriers of
/// algebra elements are divergence-free: `sum_alpha K_alpha c^alpha = 0`.
#[derive(Debug, Clone)]
pub struct DiffVectorField {
    pub grid: Arc<SpacetimeGrid>,
    pub lattice: Arc<ModeLattice>,
    data: Vec<Complex64>,
}

macro_rules! field_common {
    ($T:ident, $ncomp_of:expr) => {
        impl $T {
            pub fn zeros(grid: Arc<SpacetimeGrid>, lattice: Arc<ModeLattice>) -> Self {
                let n = grid.n_points() * lattice.len() * $ncomp_of;
                $T {
                    grid,
                    lattice,
                    data: vec![Complex64::default(); n],
                }
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

            pub fn scale(&mut self, s: f64) {
                for c in self.data.iter_mut() {
                    *c *= s;
                }
            }

            pub fn add_scaled(&mut self, other: &$T, s: f64) {
                for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
                    *a += b * s;
                }
            }

            /// Spacetime spectral derivative along axis `mu`.
            pub fn spacetime_derivative(&self, mu: usize) -> $T {
                let mut out = self.clone();
                let n_inner = self.lattice.len() * $ncomp_of;
                out.grid.clone().derivative(out.data_mut(), n_inner, mu);
                out
            }

            /// Enforces the reality condition `c(-K) = conj(c(K))` by
            /// symmetrization; returns the relative size of the removed
            /// antisymmetric part.
            pub fn symmetrize_reality(&mut self) -> f64 {
                let nm = self.lattice.len();
                let ncomp = $ncomp_of;
                let mut removed = 0.0f64;
                let mut total = 0.0f64;
                for pt in 0..self.grid.n_points() {
                    for m in 0..nm {
                        let mn = self.lattice.neg_index(m);
                        if mn < m {
                            continue;
                        }
                        for c in 0..ncomp {
                            let i = (pt * nm + m) * ncomp + c;
                            let j = (pt * nm + mn) * ncomp + c;
                            let a = self.data[i];
                            let b = self.data[j];
                            let sym = 0.5 * (a + b.conj());
                            removed += (a - sym).norm_sqr() + (b - sym.conj()).norm_sqr();
                            total += a.norm_sqr() + b.norm_sqr();
                            self.data[i] = sym;
                            self.data[j] = sym.conj();
                        }
                    }
                }
                if total > 0.0 {
                    (removed / total).sqrt()
                } else {
                    0.0
                }
            }
        }
    };
}

field_common!(InnerScalarField, 1);
field_common!(DiffVectorField, 4);

impl InnerScalarField {
    #[inline]
    pub fn idx(&self, pt: usize, m: usize) -> usize {
        pt * self.lattice.len() + m
    }

    pub fn get(&self, pt: usize, m: usize) -> Complex64 {
        self.data[self.idx(pt, m)]
    }

    pub fn set(&mut self, pt: usize, m: usize, v: Complex64) {
        let i = self.idx(pt, m);
        self.data[i] = v;
    }

    /// Inner spectral derivative `nabla_beta`: coefficient-wise `i K_beta`.
    pub fn spectral_derivative(&self, beta: usize) -> InnerScalarField {
        let mut out = self.clone();
        let nm = self.lattice.len();
        for pt in 0..self.grid.n_points() {
            for m in 0..nm {
                let k = self.lattice.k(m)[beta];
                out.data[pt * nm + m] *= Complex64::new(0.0, k);
            }
        }
        out
    }
}

impl DiffVectorField {
    #[inline]
    pub fn idx(&self, pt: usize, m: usize, alpha: usize) -> usize {
        (pt * self.lattice.len() + m) * 4 + alpha
    }

    pub fn get(&self, pt: usize, m: usize, alpha: usize) -> Complex64 {
        self.data[self.idx(pt, m, alpha)]
    }

    pub fn set(&mut self, pt: usize, m: usize, alpha: usize, v: Complex64) {
        let i = self.idx(pt, m, alpha);
        self.data[i] = v;
    }

    pub fn spectral_derivative(&self, beta: usize) -> DiffVectorField {
        let mut out = self.clone();
        let nm = self.lattice.len();
        for pt in 0..self.grid.n_points() {
            for m in 0..nm {
                let k = Complex64::new(0.0, self.lattice.k(m)[beta]);
                for alpha in 0..4 {
                    out.data[(pt * nm + m) * 4 + alpha] *= k;
                }
            }
        }
        out
    }

    /// One inner-index slice as a scalar field.
    pub fn component(&self, alpha: usize) -> InnerScalarField {
        let mut out = InnerScalarField::zeros(self.grid.clone(), self.lattice.clone());
        let nm = self.lattice.len();
        for pt in 0..self.grid.n_points() {
            for m in 0..nm {
                out.data[pt * nm + m] = self.data[(pt * nm + m) * 4 + alpha];
            }
        }
        out
    }

    /// Relative spectral-divergence residual: `||sum_a K_a c^a||` over the
    /// natural scale `||  |K| |c| ||`.
    pub fn divergence_residual(&self) -> f64 {
        let nm = self.lattice.len();
        let mut num = 0.0;
        let mut den = 0.0;
        for pt in 0..self.grid.n_points() {
            for m in 0..nm {
                let k = self.lattice.k(m);
                let ksq: f64 = k.iter().map(|x| x * x).sum();
                let mut div = Complex64::default();
                let mut csq = 0.0;
                for alpha in 0..4 {
                    let c = self.data[(pt * nm + m) * 4 + alpha];
                    div += k[alpha] * c;
                    csq += c.norm_sqr();
                }
                num += div.norm_sqr();
                den += ksq * csq;
            }
        }
        if den > 0.0 {
            (num / den).sqrt()
        } else {
            0.0
        }
    }

    fn require_divergence_free(&self, what: &str) -> Result<()> {
        let r = self.divergence_residual();
        if r > DIVFREE_INPUT_TOL {
            return Err(Error::Constraint(format!(
                "{what}: divergence residual {r:e} exceeds {DIVFREE_INPUT_TOL:e}"
            )));
        }
        Ok(())
    }
}

/// Dimensionless scalar product `<psi|chi> = int d4x int d4X / L^4
/// psi* chi`, realized as a spacetime cell-volume sum times the inner
/// Parseval sum with weight `(2 pi / kappa0)^4 / Lambda^4` per mode.
pub fn inner_product(
    psi: &InnerScalarField,
    chi: &InnerScalarField,
    lambda: f64,
) -> Result<Complex64> {
    check_same_basis(&psi.grid, &psi.lattice, &chi.grid, &chi.lattice)?;
    let w = psi.lattice.mode_volume() / lambda.powi(4) * psi.grid.cell_volume();
    let acc: Complex64 = psi
        .data
        .iter()
        .zip(chi.data.iter())
        .map(|(a, b)| a.conj() * b)
        .sum();
    Ok(acc * w)
}

/// Dealiased pointwise product of two inner scalar fields: truncated
/// convolution over the mode lattice.
pub fn pointwise_product(f: &InnerScalarField, g: &InnerScalarField) -> Result<InnerScalarField> {
    check_same_basis(&f.grid, &f.lattice, &g.grid, &g.lattice)?;
    let lat = &f.lattice;
    let nm = lat.len();
    let mut out = InnerScalarField::zeros(f.grid.clone(), f.lattice.clone());
    for pt in 0..f.grid.n_points() {
        let base = pt * nm;
        for p in 0..nm {
            let fp = f.data[base + p];
            if fp == Complex64::default() {
                continue;
            }
            for q in 0..nm {
                if let Some(m) = lat.sum_index(p, q) {
                    out.data[base + m] += fp * g.data[base + q];
                }
            }
        }
    }
    Ok(out)
}

/// Advection of a scalar by an algebra element: `E^alpha nabla_alpha f`.
pub fn advect_scalar(e: &DiffVectorField, f: &InnerScalarField) -> Result<InnerScalarField> {
    check_same_basis(&e.grid, &e.lattice, &f.grid, &f.lattice)?;
    let lat = &e.lattice;
    let nm = lat.len();
    let mut out = InnerScalarField::zeros(f.grid.clone(), f.lattice.clone());
    for pt in 0..e.grid.n_points() {
        for p in 0..nm {
            let eb = (pt * nm + p) * 4;
            for q in 0..nm {
                if let Some(m) = lat.sum_index(p, q) {
                    let kq = lat.k(q);
                    let mut contr = Complex64::default();
                    for alpha in 0..4 {
                        contr += e.data[eb + alpha] * Complex64::new(0.0, kq[alpha]);
                    }
                    out.data[pt * nm + m] += contr * f.data[pt * nm + q];
                }
            }
        }
    }
    Ok(out)
}

/// Advection of a vector by an algebra element: `(E^alpha nabla_alpha F)^beta`.
pub fn advect(e: &DiffVectorField, f: &DiffVectorField) -> Result<DiffVectorField> {
    check_same_basis(&e.grid, &e.lattice, &f.grid, &f.lattice)?;
    let lat = &e.lattice;
    let nm = lat.len();
    let mut out = DiffVectorField::zeros(f.grid.clone(), f.lattice.clone());
    for pt in 0..e.grid.n_points() {
        for p in 0..nm {
            let eb = (pt * nm + p) * 4;
            if e.data[eb..eb + 4].iter().all(|c| *c == Complex64::default()) {
                continue;
            }
            for q in 0..nm {
                if let Some(m) = lat.sum_index(p, q) {
                    let kq = lat.k(q);
                    let mut contr = Complex64::default();
                    for alpha in 0..4 {
                        contr += e.data[eb + alpha] * Complex64::new(0.0, kq[alpha]);
                    }
                    if contr == Complex64::default() {
                        continue;
                    }
                    let fb = (pt * nm + q) * 4;
                    let ob = (pt * nm + m) * 4;
                    for beta in 0..4 {
                        out.data[ob + beta] += contr * f.data[fb + beta];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Lie bracket of the divergence-free algebra:
/// `[E,F]^beta = E^alpha nabla_alpha F^beta - F^alpha nabla_alpha E^beta`.
/// Rejects inputs violating the divergence-free constraint.
pub fn lie_bracket(e: &DiffVectorField, f: &DiffVectorField) -> Result<DiffVectorField> {
    e.require_divergence_free("lie_bracket: first operand")?;
    f.require_divergence_free("lie_bracket: second operand")?;
    let mut out = advect(e, f)?;
    let back = advect(f, e)?;
    out.add_scaled(&back, -1.0);
    Ok(out)
}

/// Euclidean-orthogonal projection onto the divergence-free constraint
/// kernel, per mode: `c^alpha -> c^alpha - K_alpha (K . c) / (K . K)`
/// (componentwise `K`, no metric). The `K = 0` mode is untouched.
/// Idempotent; output satisfies `sum_alpha K_alpha c^alpha = 0` exactly.
pub fn project_divergence_free(v: &DiffVectorField) -> DiffVectorField {
    let mut out = v.clone();
    let nm = v.lattice.len();
    for pt in 0..v.grid.n_points() {
        for m in 0..nm {
            let k = v.lattice.k(m);
            let ksq: f64 = k.iter().map(|x| x * x).sum();
            if ksq == 0.0 {
                continue;
            }
            let base = (pt * nm + m) * 4;
            let mut div = Complex64::default();
            for alpha in 0..4 {
                div += k[alpha] * out.data[base + alpha];
            }
            let s = div / ksq;
            for alpha in 0..4 {
                out.data[base + alpha] -= k[alpha] * s;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1() -> Arc<SpacetimeGrid> {
        SpacetimeGrid::spatial(1, 4, 1.0, 0.1).unwrap()
    }

    fn single_mode(
        grid: &Arc<SpacetimeGrid>,
        lat: &Arc<ModeLattice>,
        n: [i64; 4],
        e: [f64; 4],
    ) -> DiffVectorField {
        let m = lat.find(n).expect("mode in lattice");
        let mut f = DiffVectorField::zeros(grid.clone(), lat.clone());
        for pt in 0..grid.n_points() {
            for alpha in 0..4 {
                f.set(pt, m, alpha, Complex64::new(e[alpha], 0.0));
            }
        }
        f
    }

    #[test]
    fn lattice_radius_zero_is_origin_only() {
        let lat = ModeLattice::build(1.0, 0, ConeFilter::StrictTimelike).unwrap();
        assert_eq!(lat.len(), 1);
        assert_eq!(lat.integer_mode(0), [0; 4]);
        assert_eq!(lat.cone_class(0), ConeClass::Origin);
    }

    /// Independent enumeration oracle: all 3^4 integer points of radius 1,
    /// filtered by K_0^2 > |K_vec|^2 (strict) resp. >= with K_0 != 0.
    #[test]
    fn lattice_radius_one_matches_enumeration_oracle() {
        let oracle = |strict: bool| -> Vec<[i64; 4]> {
            let mut v = Vec::new();
            for n0 in -1i64..=1 {
                for n1 in -1i64..=1 {
                    for n2 in -1i64..=1 {
                        for n3 in -1i64..=1 {
                            let s = n1 * n1 + n2 * n2 + n3 * n3;
                            let keep = if [n0, n1, n2, n3] == [0; 4] {
                                true
                            } else if strict {
                                n0 * n0 > s
                            } else {
                                n0 * n0 >= s && n0 != 0
                            };
                            if keep {
                                v.push([n0, n1, n2, n3]);
                            }
                        }
                    }
                }
            }
            v
        };

        let strict = ModeLattice::build(1.0, 1, ConeFilter::StrictTimelike).unwrap();
        let mut got: Vec<_> = (0..strict.len()).map(|m| strict.integer_mode(m)).collect();
        let mut want = oracle(true);
        got.sort();
        want.sort();
        assert_eq!(got, want);
        // strict radius-1: only the origin and n = (+-1, 0,0,0)
        assert_eq!(want.len(), 3);
        assert!(strict.find([1, 1, 0, 0]).is_none());

        let light = ModeLattice::build(1.0, 1, ConeFilter::IncludeLightlike).unwrap();
        let mut got: Vec<_> = (0..light.len()).map(|m| light.integer_mode(m)).collect();
        let mut want = oracle(false);
        got.sort();
        want.sort();
        assert_eq!(got, want);
        assert!(light.find([1, 1, 0, 0]).is_some());
        assert!(light.find([0, 1, 0, 0]).is_none());
    }

    #[test]
    fn lattice_closed_under_negation_with_cone_classes() {
        let lat = ModeLattice::build(0.7, 2, ConeFilter::IncludeLightlike).unwrap();
        for m in 0..lat.len() {
            let mn = lat.neg_index(m);
            let n = lat.integer_mode(m);
            assert_eq!(lat.integer_mode(mn), [-n[0], -n[1], -n[2], -n[3]]);
            match lat.cone_class(m) {
                ConeClass::Forward => assert_eq!(lat.cone_class(mn), ConeClass::Backward),
                ConeClass::Backward => assert_eq!(lat.cone_class(mn), ConeClass::Forward),
                c => assert_eq!(lat.cone_class(mn), c),
            }
        }
    }

    #[test]
    fn bad_lattice_config_rejected() {
        assert!(ModeLattice::build(0.0, 1, ConeFilter::StrictTimelike).is_err());
        assert!(ModeLattice::build(-1.0, 1, ConeFilter::StrictTimelike).is_err());
    }

    #[test]
    fn spectral_derivative_single_mode() {
        let grid = grid1();
        let lat = ModeLattice::build(1.0, 2, ConeFilter::StrictTimelike).unwrap();
        let m = lat.find([2, 1, 0, 0]).unwrap();
        let mut f = InnerScalarField::zeros(grid.clone(), lat.clone());
        f.set(0, m, Complex64::new(1.0, 0.0));
        let df = f.spectral_derivative(0);
        assert_eq!(df.get(0, m), Complex64::new(0.0, 2.0));
        // zero field stays zero
        let z = InnerScalarField::zeros(grid.clone(), lat.clone());
        assert_eq!(z.spectral_derivative(1).norm(), 0.0);
        // derivatives commute exactly
        let d01 = f.spectral_derivative(0).spectral_derivative(1);
        let d10 = f.spectral_derivative(1).spectral_derivative(0);
        for (a, b) in d01.data().iter().zip(d10.data().iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn inner_product_conjugate_symmetric_and_antihermitean_gradient() {
        let grid = grid1();
        let lat = ModeLattice::build(1.3, 1, ConeFilter::StrictTimelike).unwrap();
        let mut psi = InnerScalarField::zeros(grid.clone(), lat.clone());
        let mut chi = InnerScalarField::zeros(grid.clone(), lat.clone());
        // deterministic pseudo-random fill
        let mut s = 1u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for i in 0..psi.data().len() {
            psi.data_mut()[i] = Complex64::new(next(), next());
            chi.data_mut()[i] = Complex64::new(next(), next());
        }
        let ab = inner_product(&psi, &chi, 1.0).unwrap();
        let ba = inner_product(&chi, &psi, 1.0).unwrap();
        assert!((ab - ba.conj()).norm() < 1e-12 * ab.norm().max(1.0));
        let zero = InnerScalarField::zeros(grid.clone(), lat.clone());
        assert_eq!(inner_product(&zero, &chi, 1.0).unwrap(), Complex64::default());
        // <grad psi | chi> = -<psi | grad chi>
        for alpha in 0..4 {
            let a = inner_product(&psi.spectral_derivative(alpha), &chi, 1.0).unwrap();
            let b = inner_product(&psi, &chi.spectral_derivative(alpha), 1.0).unwrap();
            assert!((a + b).norm() <= 1e-12 * (a.norm() + b.norm()).max(1e-30));
        }
    }

    #[test]
    fn product_identity_truncation_and_one_hot_convolution() {
        let grid = grid1();
        let lat = ModeLattice::build(1.0, 1, ConeFilter::StrictTimelike).unwrap();
        let mp = lat.find([1, 0, 0, 0]).unwrap();
        let mut f = InnerScalarField::zeros(grid.clone(), lat.clone());
        f.set(0, mp, Complex64::new(0.3, -0.7));
        // identity element: unit coefficient at K = 0
        let mut one = InnerScalarField::zeros(grid.clone(), lat.clone());
        for pt in 0..grid.n_points() {
            one.set(pt, lat.origin(), Complex64::new(1.0, 0.0));
        }
        let fg = pointwise_product(&f, &one).unwrap();
        for (a, b) in fg.data().iter().zip(f.data().iter()) {
            assert_eq!(a, b);
        }
        // sum mode outside the truncated lattice: result falls away
        let out = pointwise_product(&f, &f).unwrap(); // (2,0,0,0) not in R=1... it is not: |n0|<=1
        assert_eq!(out.norm(), 0.0);
        // retained sum mode carries exactly the product coefficient
        let lat2 = ModeLattice::build(1.0, 2, ConeFilter::StrictTimelike).unwrap();
        let mut a = InnerScalarField::zeros(grid.clone(), lat2.clone());
        let mut b = InnerScalarField::zeros(grid.clone(), lat2.clone());
        a.set(0, lat2.find([1, 0, 0, 0]).unwrap(), Complex64::new(1.0, 0.0));
        b.set(0, lat2.find([1, 1, 0, 0]).unwrap_or_else(|| lat2.find([1, 0, 0, 0]).unwrap()), Complex64::new(1.0, 0.0));
        let ab = pointwise_product(&a, &b).unwrap();
        let target = lat2.find([2, 0, 0, 0]).unwrap();
        // b was placed at (1,0,0,0) if (1,1,0,0) is filtered out (it is, strict)
        assert_eq!(ab.get(0, target), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn projection_examples_and_idempotence() {
        let grid = grid1();
        let lat = ModeLattice::build(1.0, 2, ConeFilter::StrictTimelike).unwrap();
        // pure longitudinal mode annihilated
        let v = single_mode(&grid, &lat, [1, 0, 0, 0], [1.0, 0.0, 0.0, 0.0]);
        let p = project_divergence_free(&v);
        let m = lat.find([1, 0, 0, 0]).unwrap();
        for alpha in 0..4 {
            assert_eq!(p.get(0, m, alpha), Complex64::default());
        }
        // worked least-squares case: K=(2,1,0,0), c=(1,0,0,0)
        let v = single_mode(&grid, &lat, [2, 1, 0, 0], [1.0, 0.0, 0.0, 0.0]);
        let p = project_divergence_free(&v);
        let m = lat.find([2, 1, 0, 0]).unwrap();
        assert!((p.get(0, m, 0) - Complex64::new(0.2, 0.0)).norm() < 1e-15);
        assert!((p.get(0, m, 1) - Complex64::new(-0.4, 0.0)).norm() < 1e-15);
        assert!(p.divergence_residual() < 1e-15);
        // idempotence
        let pp = project_divergence_free(&p);
        let mut diff = 0.0f64;
        for (a, b) in pp.data().iter().zip(p.data().iter()) {
            diff += (a - b).norm_sqr();
        }
        assert!(diff.sqrt() <= 1e-15 * p.norm());
    }

    /// Symbolic single-mode oracle for the bracket:
    /// E = e_E exp(iK X), F = e_F exp(iQ X) with e_E.K = e_F.Q = 0 gives
    /// [E,F] = i [ (e_E . Q) e_F - (e_F . K) e_E ] exp(i(K+Q) X).
    #[test]
    fn bracket_single_mode_oracle_and_antisymmetry() {
        let grid = grid1();
        let lat = ModeLattice::build(1.0, 2, ConeFilter::StrictTimelike).unwrap();
        let kn = [1i64, 0, 0, 0];
        let qn = [1i64, -1, 0, 0];
        // choose polarizations orthogonal (componentwise) to their modes
        let e_e = [0.0, 0.5, -0.25, 1.0];
        let e_f = [1.0, 1.0, 0.5, -0.3]; // e_f . Q = 1 - 1 = 0
        let lat_l = ModeLattice::build(1.0, 2, ConeFilter::IncludeLightlike).unwrap();
        let e = single_mode(&grid, &lat_l, kn, e_e);
        let f = single_mode(&grid, &lat_l, qn, e_f);
        assert!(e.divergence_residual() < 1e-15);
        assert!(f.divergence_residual() < 1e-15);
        let br = lie_bracket(&e, &f).unwrap();
        let sum = lat_l.find([2, -1, 0, 0]).unwrap();
        let kq: Vec<f64> = (0..4).map(|a| lat_l.k(lat_l.find(qn).unwrap())[a]).collect();
        let kk: Vec<f64> = (0..4).map(|a| lat_l.k(lat_l.find(kn).unwrap())[a]).collect();
        let e_dot_q: f64 = (0..4).map(|a| e_e[a] * kq[a]).sum();
        let f_dot_k: f64 = (0..4).map(|a| e_f[a] * kk[a]).sum();
        for beta in 0..4 {
            let expect = Complex64::new(0.0, e_dot_q * e_f[beta] - f_dot_k * e_e[beta]);
            assert!((br.get(0, sum, beta) - expect).norm() < 1e-13);
        }
        // the closure property: result is divergence-free
        assert!(br.divergence_residual() < 1e-13);
        // [E, E] = 0
        let ee = lie_bracket(&e, &e).unwrap();
        assert_eq!(ee.norm(), 0.0);
        let _ = lat; // strict lattice exercised above
    }

    #[test]
    fn bracket_rejects_constraint_violating_input() {
        let grid = grid1();
        let lat = ModeLattice::build(1.0, 1, ConeFilter::StrictTimelike).unwrap();
        let bad = single_mode(&grid, &lat, [1, 0, 0, 0], [1.0, 0.0, 0.0, 0.0]);
        let good = single_mode(&grid, &lat, [1, 0, 0, 0], [0.0, 1.0, 0.0, 0.0]);
        assert!(lie_bracket(&bad, &good).is_err());
    }

    #[test]
    fn jacobi_identity_on_retained_triples() {
        let grid = grid1();
        let lat = ModeLattice::build(1.0, 3, ConeFilter::StrictTimelike).unwrap();
        let e = single_mode(&grid, &lat, [1, 0, 0, 0], [0.0, 0.3, 0.7, -0.2]);
        let f = single_mode(&grid, &lat, [-1, 0, 0, 0], [0.0, 1.1, 0.0, 0.4]);
        let g = single_mode(&grid, &lat, [1, 0, 0, 0], [0.0, -0.5, 0.2, 0.9]);
        let t1 = lie_bracket(&lie_bracket(&e, &f).unwrap(), &g).unwrap();
        let t2 = lie_bracket(&lie_bracket(&f, &g).unwrap(), &e).unwrap();
        let t3 = lie_bracket(&lie_bracket(&g, &e).unwrap(), &f).unwrap();
        let mut total = t1.clone();
        total.add_scaled(&t2, 1.0);
        total.add_scaled(&t3, 1.0);
        let scale = t1.norm() + t2.norm() + t3.norm();
        assert!(total.norm() <= 1e-12 * scale.max(1e-30));
    }

    #[test]
    fn reality_symmetrization() {
        let grid = grid1();
        let lat = ModeLattice::build(1.0, 1, ConeFilter::StrictTimelike).unwrap();
        let mp = lat.find([1, 0, 0, 0]).unwrap();
        let mn = lat.find([-1, 0, 0, 0]).unwrap();
        let mut f = InnerScalarField::zeros(grid.clone(), lat.clone());
        f.set(0, mp, Complex64::new(1.0, 2.0));
        f.set(0, mn, Complex64::new(1.0, -2.0));
        let mut g = f.clone();
        assert_eq!(g.symmetrize_reality(), 0.0);
        f.set(0, mn, Complex64::new(0.0, 0.0));
        let r = f.symmetrize_reality();
        assert!(r > 0.0);
        assert_eq!(f.get(0, mp), f.get(0, mn).conj());
    }

    #[test]
    fn lattice_mismatch_rejected() {
        let grid = grid1();
        let la = ModeLattice::build(1.0, 1, ConeFilter::StrictTimelike).unwrap();
        let lb = ModeLattice::build(2.0, 1, ConeFilter::StrictTimelike).unwrap();
        let a = InnerScalarField::zeros(grid.clone(), la);
        let b = InnerScalarField::zeros(grid.clone(), lb);
        assert!(inner_product(&a, &b, 1.0).is_err());
        assert!(pointwise_product(&a, &b).is_err());
    }
}
