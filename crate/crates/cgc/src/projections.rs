//! Maps from an extended frame to surface geometry: the mu-projection
//! into the 3-sphere, the Sym formula into Euclidean 3-space, the flat
//! limit, Gauss maps, parallel surfaces and the SU(2) <-> R^4 plumbing.

use crate::dalembert::{self, ExtendedFrame, GridSpec};
use crate::error::{Error, Result};
use crate::loop_algebra::TruncationPolicy;
use crate::mat2::{c, e3, exp_tracefree, su2_coords, su2_defect, Mat2, C};
use crate::potentials::PotentialPair;
use serde::{Deserialize, Serialize};

/// Projection parameter and the curvature it induces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionParams {
    pub mu: f64,
    pub rho: f64,
    pub curvature: f64,
}

impl ProjectionParams {
    pub fn new(mu: f64) -> Result<Self> {
        if mu == 0.0 || mu == 1.0 {
            return Err(Error::DegenerateMu(mu));
        }
        let rho = (mu + 1.0) / (mu - 1.0);
        Ok(ProjectionParams {
            mu,
            rho,
            curvature: 1.0 - rho * rho,
        })
    }
}

/// Curvature K_mu = 1 - ((mu+1)/(mu-1))^2 of the mu-projection.
pub fn curvature_formula(mu: f64) -> f64 {
    let rho = (mu + 1.0) / (mu - 1.0);
    1.0 - rho * rho
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Target {
    S3,
    E3,
}

/// Per-point ambient positions, unit normals and coordinate frame.
#[derive(Clone, Debug)]
pub struct SurfaceGrid {
    pub grid: GridSpec,
    pub target: Target,
    /// R^4 coordinates; E3 targets live in the hyperplane x0 = 0 (the
    /// scaled projection keeps its x0 offset, see `scaled_projection`).
    pub position: Vec<[f64; 4]>,
    pub normal: Vec<[f64; 4]>,
    /// F at lambda = 1 (or the flat-limit analog K_0).
    pub frame_f: Vec<Mat2>,
    pub valid: Vec<bool>,
}

impl SurfaceGrid {
    pub fn position_at(&self, i: usize, j: usize) -> [f64; 4] {
        self.position[self.grid.idx(i, j)]
    }
}

/// Gauss maps of a surface in the 3-sphere.
#[derive(Clone, Debug)]
pub struct GaussMaps {
    pub grid: GridSpec,
    /// Normal Gauss map nu = f^-1 n in su(2) = R^3.
    pub normal_gauss: Vec<[f64; 3]>,
    /// Lagrangian Gauss map (Ad_G e3, Ad_F e3).
    pub lagrangian: Vec<([f64; 3], [f64; 3])>,
    /// Legendrian Gauss map (f, n) in R^4 x R^4.
    pub legendrian: Vec<([f64; 4], [f64; 4])>,
}

const SU2_TOL: f64 = 1e-8;

/// SU(2) -> unit R^4 under (z, w) <-> [[z, w], [-conj w, conj z]].
pub fn su2_to_r4(m: &Mat2) -> Result<[f64; 4]> {
    if su2_defect(m) > SU2_TOL {
        return Err(Error::NotUnitary);
    }
    Ok(su2_to_r4_unchecked(m))
}

pub fn su2_to_r4_unchecked(m: &Mat2) -> [f64; 4] {
    let z = m[(0, 0)];
    let w = m[(0, 1)];
    [z.re, w.re, w.im, z.im]
}

/// Unit R^4 -> SU(2), inverse of `su2_to_r4`.
pub fn r4_to_su2(x: &[f64; 4]) -> Result<Mat2> {
    let n2: f64 = x.iter().map(|t| t * t).sum();
    if (n2 - 1.0).abs() > SU2_TOL {
        return Err(Error::NotUnitNorm);
    }
    Ok(r4_to_su2_unchecked(x))
}

pub fn r4_to_su2_unchecked(x: &[f64; 4]) -> Mat2 {
    let z = C::new(x[0], x[3]);
    let w = C::new(x[1], x[2]);
    Mat2::new(z, w, -w.conj(), z.conj())
}

fn eval_pair(frame: &ExtendedFrame, idx: usize, la: f64, lb: f64) -> Result<(Mat2, Mat2)> {
    let v = &frame.values[idx];
    let fa = v.evaluate(c(la, 0.0))?;
    let fb = v.evaluate(c(lb, 0.0))?;
    Ok((fa, fb))
}

/// f = F|_mu F^-1|_1 with normal n = f Ad_F e3.
pub fn project_mu(frame: &ExtendedFrame, params: &ProjectionParams) -> Result<SurfaceGrid> {
    project_two_point(frame, 1.0, params.mu)
}

/// Two-parameter projection F|_lb F^-1|_la; (1, mu) is `project_mu` and
/// the curvature depends only on mu = lb / la.
pub fn project_two_point(frame: &ExtendedFrame, la: f64, lb: f64) -> Result<SurfaceGrid> {
    if la == 0.0 || lb == 0.0 {
        return Err(Error::DegenerateMu(0.0));
    }
    if la == lb {
        return Err(Error::DegenerateMu(1.0));
    }
    let n = frame.grid.len();
    let mut position = Vec::with_capacity(n);
    let mut normal = Vec::with_capacity(n);
    let mut frame_f = Vec::with_capacity(n);
    for idx in 0..n {
        let (fa, fb) = eval_pair(frame, idx, la, lb)?;
        let fa_inv = fa.adjoint(); // SU(2) inverse
        let f = fb * fa_inv;
        let nrm = f * (fa * e3() * fa_inv);
        position.push(su2_to_r4_unchecked(&f));
        normal.push(su2_to_r4_unchecked(&nrm));
        frame_f.push(fa);
    }
    Ok(SurfaceGrid {
        grid: frame.grid,
        target: Target::S3,
        position,
        normal,
        frame_f,
        valid: frame.valid.clone(),
    })
}

/// Sym formula: f = 2 dF/dlambda F^-1 |_{lambda=1}, a pseudospherical
/// surface in E^3 = su(2). The x0 component is zero by construction;
/// the discarded Hermitian defect is returned alongside.
pub fn sym(frame: &ExtendedFrame) -> Result<SurfaceGrid> {
    let n = frame.grid.len();
    let mut position = Vec::with_capacity(n);
    let mut normal = Vec::with_capacity(n);
    let mut frame_f = Vec::with_capacity(n);
    for v in &frame.values {
        let f1 = v.evaluate(c(1.0, 0.0))?;
        let d1 = v.d_lambda().evaluate(c(1.0, 0.0))?;
        let x = (d1 * f1.adjoint()) * c(2.0, 0.0);
        let p = su2_coords(&x);
        position.push([0.0, p[0], p[1], p[2]]);
        let nu = su2_coords(&(f1 * e3() * f1.adjoint()));
        normal.push([0.0, nu[0], nu[1], nu[2]]);
        frame_f.push(f1);
    }
    Ok(SurfaceGrid {
        grid: frame.grid,
        target: Target::E3,
        position,
        normal,
        frame_f,
        valid: frame.valid.clone(),
    })
}

/// Rescaled projection (2/(1-mu)) (f_mu - e0), a surface in a sphere of
/// radius 2/|1-mu| with curvature -mu.
pub fn scaled_projection(frame: &ExtendedFrame, mu: f64) -> Result<SurfaceGrid> {
    let params = ProjectionParams::new(mu)?;
    let base = project_mu(frame, &params)?;
    let s = 2.0 / (1.0 - mu);
    let position = base
        .position
        .iter()
        .map(|p| [s * (p[0] - 1.0), s * p[1], s * p[2], s * p[3]])
        .collect();
    Ok(SurfaceGrid {
        grid: base.grid,
        target: Target::E3,
        position,
        normal: base.normal,
        frame_f: base.frame_f,
        valid: base.valid,
    })
}

/// Curvature of the scaled projection: (1/4)(1-mu)^2 K_mu = -mu.
pub fn scaled_curvature_formula(mu: f64) -> f64 {
    0.25 * (1.0 - mu) * (1.0 - mu) * curvature_formula(mu)
}

/// The flat-limit surface g_0 = H_0 K_0^-1 built from the admissible
/// frame data along v = 0.
///
/// The 1-forms are H_0^-1 dH_0 = U_0 du + B_-1 dv and
/// K_0^-1 dK_0 = (U_0 + B_1) du, with coefficients sampled on the u axis;
/// `grid.v_range` is read as the range of the rescaled coordinate v~.
pub fn flat_limit(
    pair: &PotentialPair,
    grid: &GridSpec,
    policy: &TruncationPolicy,
) -> Result<SurfaceGrid> {
    let data = flat_limit_data(pair, grid, policy)?;
    Ok(build_flat_surface(grid, &data))
}

/// Maurer-Cartan coefficients along v = 0 on a doubled-resolution u grid
/// (values at half-steps are used as RK4 midpoints).
pub struct FlatLimitData {
    /// u0[k], b1[k], bm1[k] at u = u_range.0 + k * h_u / 2.
    pub u0: Vec<Mat2>,
    pub b1: Vec<Mat2>,
    pub bm1: Vec<Mat2>,
}

pub fn flat_limit_data(
    pair: &PotentialPair,
    grid: &GridSpec,
    policy: &TruncationPolicy,
) -> Result<FlatLimitData> {
    // Build a thin strip around v = 0 at half the u step, so the
    // Maurer-Cartan data is available at RK4 midpoints.
    let n_half = 2 * grid.n_u - 1;
    let hv = grid.h_u().min(0.05);
    let strip_grid = GridSpec::new(grid.u_range, (-2.0 * hv, 2.0 * hv), n_half, 5)?;
    let strip = dalembert::extended_frame(pair, &strip_grid, policy)?;
    let mc = dalembert::maurer_cartan(&strip);
    let mut u0 = Vec::with_capacity(n_half);
    let mut b1 = Vec::with_capacity(n_half);
    let mut bm1 = Vec::with_capacity(n_half);
    for k in 0..n_half {
        let idx = strip_grid.idx(k, 2); // middle row: v = 0
        u0.push(mc.u0[idx]);
        b1.push(mc.b1[idx]);
        bm1.push(mc.bm1[idx]);
    }
    Ok(FlatLimitData { u0, b1, bm1 })
}

fn normalize4(p: [f64; 4]) -> [f64; 4] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3]).sqrt();
    if n > 0.0 {
        [p[0] / n, p[1] / n, p[2] / n, p[3] / n]
    } else {
        p
    }
}

fn build_flat_surface(grid: &GridSpec, data: &FlatLimitData) -> SurfaceGrid {
    let n_u = grid.n_u;
    let h = grid.h_u();
    // RK4 for X' = X A(u) with A sampled at half-steps.
    let march = |coeff: &dyn Fn(usize) -> Mat2| -> Vec<Mat2> {
        let mut out = Vec::with_capacity(n_u);
        let mut x = Mat2::identity();
        out.push(x);
        for i in 0..n_u - 1 {
            let a0 = coeff(2 * i);
            let a1 = coeff(2 * i + 1);
            let a2 = coeff(2 * i + 2);
            let k1 = x * a0;
            let k2 = (x + k1 * c(h / 2.0, 0.0)) * a1;
            let k3 = (x + k2 * c(h / 2.0, 0.0)) * a1;
            let k4 = (x + k3 * c(h, 0.0)) * a2;
            x += (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * c(h / 6.0, 0.0);
            // pull the step back to SU(2): the Maurer-Cartan coefficients
            // carry finite-difference noise that is not exactly
            // anti-Hermitian and would otherwise accumulate
            x = x * (Mat2::identity() * c(1.5, 0.0) - x.adjoint() * x * c(0.5, 0.0));
            out.push(x);
        }
        out
    };
    let h0_axis = march(&|k| data.u0[k]);
    let k0_axis = march(&|k| data.u0[k] + data.b1[k]);

    let mut position = vec![[0.0; 4]; grid.len()];
    let mut normal = vec![[0.0; 4]; grid.len()];
    let mut frame_f = vec![Mat2::zeros(); grid.len()];
    let mut valid = vec![true; grid.len()];
    for i in 0..n_u {
        let v1 = data.bm1[2 * i];
        let k0 = k0_axis[i];
        let k0_inv = k0.adjoint();
        let ad_k0_e3 = k0 * e3() * k0_inv;
        for j in 0..grid.n_v {
            let vt = grid.v(j);
            let h0 = h0_axis[i] * exp_tracefree(&(v1 * c(vt, 0.0)));
            let g0 = h0 * k0_inv;
            let idx = grid.idx(i, j);
            position[idx] = normalize4(su2_to_r4_unchecked(&g0));
            normal[idx] = normalize4(su2_to_r4_unchecked(&(g0 * ad_k0_e3)));
            frame_f[idx] = k0;
            valid[idx] = su2_defect(&g0) < 1e-5;
        }
    }
    SurfaceGrid {
        grid: *grid,
        target: Target::S3,
        position,
        normal,
        frame_f,
        valid,
    }
}

/// The three Gauss maps of a mu-projection surface.
pub fn gauss_maps(s: &SurfaceGrid, frame: &ExtendedFrame, mu: f64) -> Result<GaussMaps> {
    if s.target != Target::S3 {
        return Err(Error::Config("Gauss maps are defined for S3 targets".into()));
    }
    let n = frame.grid.len();
    let mut normal_gauss = Vec::with_capacity(n);
    let mut lagrangian = Vec::with_capacity(n);
    let mut legendrian = Vec::with_capacity(n);
    for idx in 0..n {
        let (f1, fmu) = eval_pair(frame, idx, 1.0, mu)?;
        let nu = su2_coords(&(f1 * e3() * f1.adjoint()));
        let ad_g = su2_coords(&(fmu * e3() * fmu.adjoint()));
        normal_gauss.push(nu);
        lagrangian.push((ad_g, nu));
        legendrian.push((s.position[idx], s.normal[idx]));
    }
    Ok(GaussMaps {
        grid: frame.grid,
        normal_gauss,
        lagrangian,
        legendrian,
    })
}

/// Parallel surface f^r = cos(r) f + sin(r) n with normal
/// n^r = -sin(r) f + cos(r) n. Points where the immersion condition
/// cos 2r - sin 2r H + sin^2 r K vanishes are masked by the caller via
/// diagnostics; here only frame validity is inherited.
pub fn parallel_surface(s: &SurfaceGrid, r: f64) -> Result<SurfaceGrid> {
    if s.target != Target::S3 {
        return Err(Error::Config("parallel surfaces are defined for S3 targets".into()));
    }
    let (cr, sr) = (r.cos(), r.sin());
    let mut position = Vec::with_capacity(s.position.len());
    let mut normal = Vec::with_capacity(s.position.len());
    for (p, n) in s.position.iter().zip(&s.normal) {
        position.push([
            cr * p[0] + sr * n[0],
            cr * p[1] + sr * n[1],
            cr * p[2] + sr * n[2],
            cr * p[3] + sr * n[3],
        ]);
        normal.push([
            -sr * p[0] + cr * n[0],
            -sr * p[1] + cr * n[1],
            -sr * p[2] + cr * n[2],
            -sr * p[3] + cr * n[3],
        ]);
    }
    Ok(SurfaceGrid {
        grid: s.grid,
        target: Target::S3,
        position,
        normal,
        frame_f: s.frame_f.clone(),
        valid: s.valid.clone(),
    })
}

/// Mask parallel-surface points where the immersion condition
/// cos 2r - sin 2r H + sin^2 r K degenerates, with H and K estimated
/// from the base surface's fundamental forms (E, F, G, e, f, g).
pub fn mask_parallel_validity(
    parallel: &mut SurfaceGrid,
    base_first: &[[f64; 3]],
    base_second: &[[f64; 3]],
    r: f64,
) {
    for idx in 0..parallel.valid.len() {
        let [ee, ff, gg] = base_first[idx];
        let [le, lf, lg] = base_second[idx];
        let det = ee * gg - ff * ff;
        if det.abs() < 1e-12 {
            parallel.valid[idx] = false;
            continue;
        }
        let h = (ee * lg - 2.0 * ff * lf + gg * le) / (2.0 * det);
        let k = 1.0 + (le * lg - lf * lf) / det;
        let cond = (2.0 * r).cos() - (2.0 * r).sin() * h + r.sin().powi(2) * k;
        if cond.abs() < 1e-8 {
            parallel.valid[idx] = false;
        }
    }
}

/// Stereographic projection from the south pole (-1, 0, 0, 0):
/// x -> (x1, x2, x3) / (1 + x0).
pub fn stereographic(x: &[f64; 4]) -> Result<[f64; 3]> {
    let d = 1.0 + x[0];
    if d.abs() < 1e-12 {
        return Err(Error::AtSouthPole);
    }
    Ok([x[1] / d, x[2] / d, x[3] / d])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat2::{e1, e2, frob};
    use approx::assert_abs_diff_eq;

    #[test]
    fn su2_r4_identification() {
        assert_eq!(su2_to_r4(&Mat2::identity()).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(su2_to_r4(&e3()).unwrap(), [0.0, 0.0, 0.0, 1.0]);
        assert_eq!(su2_to_r4(&e1()).unwrap(), [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(su2_to_r4(&e2()).unwrap(), [0.0, 0.0, 1.0, 0.0]);
        // round-trip on random SU(2) samples
        for k in 0..16 {
            let t = 0.3 + k as f64 * 0.37;
            let m = crate::mat2::exp_tracefree(&crate::mat2::from_su2_coords([
                t.sin(),
                (2.0 * t).cos() * 0.7,
                t * 0.1,
            ]));
            let x = su2_to_r4(&m).unwrap();
            let back = r4_to_su2(&x).unwrap();
            assert!(frob(&(back - m)) < 1e-14);
        }
        assert!(matches!(r4_to_su2(&[2.0, 0.0, 0.0, 0.0]), Err(Error::NotUnitNorm)));
    }

    #[test]
    fn projection_params_curvature() {
        assert_abs_diff_eq!(ProjectionParams::new(4.0).unwrap().curvature, -16.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ProjectionParams::new(-4.0).unwrap().curvature, 16.0 / 25.0, epsilon = 1e-15);
        assert_abs_diff_eq!(ProjectionParams::new(-1.0).unwrap().curvature, 1.0, epsilon = 1e-15);
        assert!(matches!(ProjectionParams::new(1.0), Err(Error::DegenerateMu(_))));
        assert!(matches!(ProjectionParams::new(0.0), Err(Error::DegenerateMu(_))));
    }

    #[test]
    fn scaled_curvature_identity() {
        for mu in [4.0, -4.0, -1.0, 0.1] {
            assert_abs_diff_eq!(scaled_curvature_formula(mu), -mu, epsilon = 1e-12);
        }
    }

    #[test]
    fn stereographic_cases() {
        assert_eq!(stereographic(&[1.0, 0.0, 0.0, 0.0]).unwrap(), [0.0, 0.0, 0.0]);
        assert_eq!(stereographic(&[0.0, 1.0, 0.0, 0.0]).unwrap(), [1.0, 0.0, 0.0]);
        assert!(matches!(stereographic(&[-1.0, 0.0, 0.0, 0.0]), Err(Error::AtSouthPole)));
    }

    #[test]
    fn parallel_surface_trivial_cases() {
        let grid = GridSpec::new((0.0, 1.0), (0.0, 1.0), 2, 2).unwrap();
        let s = SurfaceGrid {
            grid,
            target: Target::S3,
            position: vec![[1.0, 0.0, 0.0, 0.0]; 4],
            normal: vec![[0.0, 0.0, 0.0, 1.0]; 4],
            frame_f: vec![Mat2::identity(); 4],
            valid: vec![true; 4],
        };
        let id = parallel_surface(&s, 0.0).unwrap();
        assert_eq!(id.position, s.position);
        let pi = parallel_surface(&s, std::f64::consts::PI).unwrap();
        for (p, q) in pi.position.iter().zip(&s.position) {
            for k in 0..4 {
                assert_abs_diff_eq!(p[k], -q[k], epsilon = 1e-12);
            }
        }
        // |f^r| = 1 for random r
        for r in [0.3, 1.1, -2.0] {
            let pr = parallel_surface(&s, r).unwrap();
            for p in &pr.position {
                let n2: f64 = p.iter().map(|t| t * t).sum();
                assert_abs_diff_eq!(n2, 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn two_point_curvature_depends_only_on_ratio() {
        // evaluation at lambda = 8 needs a truncation order well past
        // the default, so keep the domain small and the degree high
        let pair = crate::potentials::builtin("revolution").unwrap();
        let policy = crate::loop_algebra::TruncationPolicy::new(40, 1e-10);
        let grid = GridSpec::new((0.0, 0.6), (0.0, 0.6), 33, 33).unwrap();
        let frame = crate::dalembert::extended_frame(&pair, &grid, &policy).unwrap();
        let median_k = |s: f64| {
            let surf = project_two_point(&frame, s, 4.0 * s).unwrap();
            let forms = crate::geometry::fundamental_forms(&surf);
            let k = crate::geometry::curvature(&forms, Target::S3);
            let report = crate::geometry::diagnostics(&surf, (4.0 + 1.0) / (4.0 - 1.0));
            let mask = crate::geometry::regular_interior_mask(&report, 3);
            crate::geometry::median(
                k.iter()
                    .zip(&mask)
                    .filter(|(_, m)| **m)
                    .map(|(v, _)| *v),
            )
        };
        let base = median_k(1.0);
        assert_abs_diff_eq!(base, -16.0 / 9.0, epsilon = 0.05);
        for s in [2.0, 0.5] {
            assert_abs_diff_eq!(median_k(s), base, epsilon = 0.02);
        }
    }
}
