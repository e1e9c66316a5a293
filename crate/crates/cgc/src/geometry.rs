//! Independent finite-difference differential-geometry oracles:
//! fundamental forms, curvature, Gauss-Codazzi residuals, harmonicity of
//! the normal Gauss map and singular-set detection. Nothing in here
//! touches the loop-group construction except `predicted_forms`, which
//! exists precisely to cross-validate it.

use crate::dalembert::{p_cross, GridSpec, MCGrid};
use crate::mat2::su2_inner;
use crate::projections::{SurfaceGrid, Target};
use rayon::prelude::*;
use std::io::Write;

/// First (E, F, G) and second (e, f, g) fundamental form coefficients
/// per grid point.
#[derive(Clone, Debug)]
pub struct FundamentalForms {
    pub grid: GridSpec,
    /// (E, F, G).
    pub first: Vec<[f64; 3]>,
    /// (e, f, g).
    pub second: Vec<[f64; 3]>,
    pub valid: Vec<bool>,
}

impl FundamentalForms {
    pub fn det_first(&self, idx: usize) -> f64 {
        let [e, f, g] = self.first[idx];
        e * g - f * f
    }

    pub fn det_second(&self, idx: usize) -> f64 {
        let [e, f, g] = self.second[idx];
        e * g - f * f
    }

    pub fn a(&self, idx: usize) -> f64 {
        self.first[idx][0].max(0.0).sqrt()
    }

    pub fn b(&self, idx: usize) -> f64 {
        self.first[idx][2].max(0.0).sqrt()
    }

    /// cos(phi) = F / (A B), clamped to [-1, 1]; NaN where A B = 0.
    pub fn cos_phi(&self, idx: usize) -> f64 {
        let ab = self.a(idx) * self.b(idx);
        (self.first[idx][1] / ab).clamp(-1.0, 1.0)
    }
}

/// Everything `verify` reports, one value per grid point.
#[derive(Clone, Debug)]
pub struct DiagnosticsReport {
    pub grid: GridSpec,
    pub forms: FundamentalForms,
    pub k_est: Vec<f64>,
    pub res_harmonic: Vec<f64>,
    /// Proportionality factor k in nu_uv = k nu.
    pub k_factor: Vec<f64>,
    pub res_gauss: Vec<f64>,
    pub res_codazzi_u: Vec<f64>,
    pub res_codazzi_v: Vec<f64>,
    /// max(|e|, |g|): distance from asymptotic coordinates.
    pub off_asymptotic: Vec<f64>,
    pub singular: Vec<bool>,
    pub valid: Vec<bool>,
}

const SINGULAR_FRACTION: f64 = 1e-6;

fn dot4(x: &[f64; 4], y: &[f64; 4]) -> f64 {
    x[0] * y[0] + x[1] * y[1] + x[2] * y[2] + x[3] * y[3]
}

fn dot3(x: &[f64; 3], y: &[f64; 3]) -> f64 {
    x[0] * y[0] + x[1] * y[1] + x[2] * y[2]
}

/// Central difference along one grid axis, second-order one-sided at the
/// boundary.
fn derivative<const N: usize>(
    vals: &[[f64; N]],
    grid: &GridSpec,
    along_u: bool,
) -> Vec<[f64; N]> {
    let (n, h) = if along_u {
        (grid.n_u, grid.h_u())
    } else {
        (grid.n_v, grid.h_v())
    };
    let at = |i: usize, j: usize| vals[grid.idx(i, j)];
    let mut out = vec![[0.0; N]; vals.len()];
    for i in 0..grid.n_u {
        for j in 0..grid.n_v {
            let k = if along_u { i } else { j };
            let get = |k: usize| if along_u { at(k, j) } else { at(i, k) };
            let row: [f64; N] = if k >= 1 && k + 1 < n {
                let (a, b) = (get(k - 1), get(k + 1));
                std::array::from_fn(|t| (b[t] - a[t]) / (2.0 * h))
            } else if k == 0 {
                let (a, b, c) = (get(0), get(1), get(2));
                std::array::from_fn(|t| (-3.0 * a[t] + 4.0 * b[t] - c[t]) / (2.0 * h))
            } else {
                let (a, b, c) = (get(n - 1), get(n - 2), get(n - 3));
                std::array::from_fn(|t| (3.0 * a[t] - 4.0 * b[t] + c[t]) / (2.0 * h))
            };
            out[grid.idx(i, j)] = row;
        }
    }
    out
}

/// E, F, G and e, f, g by central differences of the ambient positions;
/// the second form projects second derivatives on the stored normal.
pub fn fundamental_forms(s: &SurfaceGrid) -> FundamentalForms {
    let g = s.grid;
    let fu = derivative(&s.position, &g, true);
    let fv = derivative(&s.position, &g, false);
    let fuu = derivative(&fu, &g, true);
    let fuv = derivative(&fu, &g, false);
    let fvv = derivative(&fv, &g, false);
    let mut first = Vec::with_capacity(g.len());
    let mut second = Vec::with_capacity(g.len());
    for idx in 0..g.len() {
        let n = &s.normal[idx];
        first.push([
            dot4(&fu[idx], &fu[idx]),
            dot4(&fu[idx], &fv[idx]),
            dot4(&fv[idx], &fv[idx]),
        ]);
        second.push([
            dot4(&fuu[idx], n),
            dot4(&fuv[idx], n),
            dot4(&fvv[idx], n),
        ]);
    }
    FundamentalForms {
        grid: g,
        first,
        second,
        valid: s.valid.clone(),
    }
}

/// Pointwise curvature: det II / det I, plus the ambient curvature 1 for
/// surfaces in the 3-sphere. NaN where det I is below the singular
/// threshold.
pub fn curvature(forms: &FundamentalForms, target: Target) -> Vec<f64> {
    let ambient = match target {
        Target::S3 => 1.0,
        Target::E3 => 0.0,
    };
    let max_det = forms
        .first
        .iter()
        .map(|[e, f, g]| e * g - f * f)
        .fold(0.0f64, f64::max);
    let floor = SINGULAR_FRACTION * max_det;
    (0..forms.first.len())
        .map(|idx| {
            let d1 = forms.det_first(idx);
            if d1 <= floor || !forms.valid[idx] {
                f64::NAN
            } else {
                ambient + forms.det_second(idx) / d1
            }
        })
        .collect()
}

/// Residual of the Lorentz-harmonicity condition nu_uv = k nu for a unit
/// field nu, plus the fitted factor k = <nu_uv, nu>.
pub fn harmonicity_residual(nu: &[[f64; 3]], grid: &GridSpec) -> (Vec<f64>, Vec<f64>) {
    let nv = derivative(nu, grid, false);
    let nuv = derivative(&nv, grid, true);
    let mut res = Vec::with_capacity(nu.len());
    let mut kf = Vec::with_capacity(nu.len());
    for idx in 0..nu.len() {
        let k = dot3(&nuv[idx], &nu[idx]);
        let tangential = [
            nuv[idx][0] - k * nu[idx][0],
            nuv[idx][1] - k * nu[idx][1],
            nuv[idx][2] - k * nu[idx][2],
        ];
        res.push(dot3(&tangential, &tangential).sqrt());
        kf.push(k);
    }
    (res, kf)
}

/// Residuals of the constant-rho Gauss equation
/// phi_uv + (1 - rho^2) A B sin phi = 0 and of the Codazzi equations
/// (A rho)_v = (B rho)_u = 0.
pub fn gauss_codazzi_residuals(
    forms: &FundamentalForms,
    rho: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let g = forms.grid;
    let n = g.len();
    let mut phi = vec![[0.0f64; 1]; n];
    let mut a = vec![[0.0f64; 1]; n];
    let mut b = vec![[0.0f64; 1]; n];
    for idx in 0..n {
        phi[idx][0] = forms.cos_phi(idx).acos();
        a[idx][0] = forms.a(idx) * rho;
        b[idx][0] = forms.b(idx) * rho;
    }
    let phi_u = derivative(&phi, &g, true);
    let phi_uv = derivative(&phi_u, &g, false);
    let a_v = derivative(&a, &g, false);
    let b_u = derivative(&b, &g, true);
    let mut gauss = Vec::with_capacity(n);
    let mut cod_u = Vec::with_capacity(n);
    let mut cod_v = Vec::with_capacity(n);
    for idx in 0..n {
        let sin_phi = (1.0 - forms.cos_phi(idx).powi(2)).max(0.0).sqrt();
        let ab = forms.a(idx) * forms.b(idx);
        gauss.push((phi_uv[idx][0] + (1.0 - rho * rho) * ab * sin_phi).abs());
        cod_u.push(a_v[idx][0].abs());
        cod_v.push(b_u[idx][0].abs());
    }
    (gauss, cod_u, cod_v)
}

/// Singular flags plus the flagged curves as index-space polylines.
#[derive(Clone, Debug)]
pub struct SingularSet {
    pub flags: Vec<bool>,
    /// Connected flagged components, each listed in index order.
    pub curves: Vec<Vec<(usize, usize)>>,
}

/// Flags points where det I drops below 1e-6 of the grid maximum and
/// groups them into connected curves (4-neighbor connectivity).
pub fn singular_set(forms: &FundamentalForms) -> SingularSet {
    let g = forms.grid;
    let max_det = (0..g.len()).map(|i| forms.det_first(i)).fold(0.0f64, f64::max);
    let floor = SINGULAR_FRACTION * max_det;
    let flags: Vec<bool> = (0..g.len()).map(|i| forms.det_first(i) <= floor).collect();

    let mut seen = vec![false; g.len()];
    let mut curves = Vec::new();
    for start in 0..g.len() {
        if !flags[start] || seen[start] {
            continue;
        }
        let mut component = Vec::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(idx) = stack.pop() {
            let (i, j) = (idx / g.n_v, idx % g.n_v);
            component.push((i, j));
            let mut push = |ii: usize, jj: usize| {
                let t = g.idx(ii, jj);
                if flags[t] && !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            };
            if i > 0 {
                push(i - 1, j);
            }
            if i + 1 < g.n_u {
                push(i + 1, j);
            }
            if j > 0 {
                push(i, j - 1);
            }
            if j + 1 < g.n_v {
                push(i, j + 1);
            }
        }
        component.sort_unstable();
        curves.push(component);
    }
    curves.sort_unstable_by_key(|c| c[0]);
    SingularSet { flags, curves }
}

/// Closed-form fundamental forms predicted from the Maurer-Cartan data:
/// A = (mu - 1)|B_1|, B = (1/mu - 1)|B_-1|, I with cross term A B cos phi
/// and II = 2 rho A B sin phi du dv, where phi is the angle from B_1 to
/// B_-1 in p (sign from the e3-component of the bracket).
pub fn predicted_forms(mc: &MCGrid, mu: f64) -> FundamentalForms {
    let rho = (mu + 1.0) / (mu - 1.0);
    let n = mc.grid.len();
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for idx in 0..n {
        let b1 = &mc.b1[idx];
        let bm1 = &mc.bm1[idx];
        let n1 = su2_inner(b1, b1).max(0.0).sqrt();
        let nm1 = su2_inner(bm1, bm1).max(0.0).sqrt();
        let a = (mu - 1.0) * n1;
        let b = (1.0 / mu - 1.0) * nm1;
        // <B1, B-1> and the signed area give cos, sin of the angle
        let dot = su2_inner(b1, bm1);
        let area = p_cross(b1, bm1);
        let (cos_phi, sin_phi) = if n1 * nm1 > 0.0 {
            ((dot / (n1 * nm1)).clamp(-1.0, 1.0), (area / (n1 * nm1)).clamp(-1.0, 1.0))
        } else {
            (1.0, 0.0)
        };
        first.push([a * a, a.abs() * b.abs() * cos_phi, b * b]);
        second.push([0.0, rho * a.abs() * b.abs() * sin_phi, 0.0]);
    }
    FundamentalForms {
        grid: mc.grid,
        first,
        second,
        valid: vec![true; n],
    }
}

/// Geodesic curvature estimate along a curve on the unit 3-sphere:
/// the norm of the second derivative projected orthogonal to the
/// position and the velocity, over the squared speed.
pub fn curve_geodesic_curvature(points: &[[f64; 4]], h: f64) -> Vec<f64> {
    let n = points.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        return out;
    }
    for k in 1..n - 1 {
        let p = &points[k];
        let mut vel = [0.0; 4];
        let mut acc = [0.0; 4];
        for t in 0..4 {
            vel[t] = (points[k + 1][t] - points[k - 1][t]) / (2.0 * h);
            acc[t] = (points[k + 1][t] - 2.0 * points[k][t] + points[k - 1][t]) / (h * h);
        }
        let speed2 = dot4(&vel, &vel);
        if speed2 < 1e-14 {
            out[k] = f64::NAN;
            continue;
        }
        // remove the components along p (ambient sphere) and vel
        let cp = dot4(&acc, p);
        let cv = dot4(&acc, &vel) / speed2;
        let mut tang = [0.0; 4];
        for t in 0..4 {
            tang[t] = acc[t] - cp * p[t] - cv * vel[t];
        }
        out[k] = dot4(&tang, &tang).sqrt() / speed2;
    }
    out[0] = out[1];
    out[n - 1] = out[n - 2];
    out
}

/// Median ignoring NaN entries; NaN if nothing remains.
pub fn median(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Interior regular mask: valid, not singular, `margin` points from every
/// boundary. Acceptance statistics are taken over this set.
pub fn regular_interior_mask(report: &DiagnosticsReport, margin: usize) -> Vec<bool> {
    let g = report.grid;
    (0..g.len())
        .map(|idx| {
            let (i, j) = (idx / g.n_v, idx % g.n_v);
            i >= margin
                && j >= margin
                && i + margin < g.n_u
                && j + margin < g.n_v
                && report.valid[idx]
                && !report.singular[idx]
        })
        .collect()
}

/// Run every oracle on a surface and collect the per-point report.
/// `rho` comes from the projection parameters, never fitted.
pub fn diagnostics(s: &SurfaceGrid, rho: f64) -> DiagnosticsReport {
    let forms = fundamental_forms(s);
    let k_est = curvature(&forms, s.target);
    let nu: Vec<[f64; 3]> = s
        .position
        .par_iter()
        .zip(&s.normal)
        .zip(&s.frame_f)
        .map(|((p, n), f)| {
            // nu = f^-1 n, with f the surface point for S3 targets
            match s.target {
                Target::S3 => {
                    let fm = crate::projections::r4_to_su2_unchecked(p);
                    let nm = crate::projections::r4_to_su2_unchecked(n);
                    crate::mat2::su2_coords(&(fm.adjoint() * nm))
                }
                Target::E3 => {
                    let _ = f;
                    [n[1], n[2], n[3]]
                }
            }
        })
        .collect();
    let (res_harmonic, k_factor) = harmonicity_residual(&nu, &s.grid);
    let (res_gauss, res_codazzi_u, res_codazzi_v) = gauss_codazzi_residuals(&forms, rho);
    let sing = singular_set(&forms);
    let off_asymptotic = forms
        .second
        .iter()
        .map(|[e, _, g]| e.abs().max(g.abs()))
        .collect();
    DiagnosticsReport {
        grid: s.grid,
        k_est,
        res_harmonic,
        k_factor,
        res_gauss,
        res_codazzi_u,
        res_codazzi_v,
        off_asymptotic,
        singular: sing.flags,
        valid: s.valid.clone(),
        forms,
    }
}

impl DiagnosticsReport {
    /// One row per grid point, header mandatory, C-locale decimals.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "i,j,u,v,E,F,G,e,f,g,K_est,res_harmonic,res_gauss,res_codazzi_u,res_codazzi_v,singular,valid"
        )?;
        let g = self.grid;
        for i in 0..g.n_u {
            for j in 0..g.n_v {
                let idx = g.idx(i, j);
                let [be, bf, bg] = self.forms.first[idx];
                let [se, sf, sg] = self.forms.second[idx];
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    i,
                    j,
                    g.u(i),
                    g.v(j),
                    be,
                    bf,
                    bg,
                    se,
                    sf,
                    sg,
                    self.k_est[idx],
                    self.res_harmonic[idx],
                    self.res_gauss[idx],
                    self.res_codazzi_u[idx],
                    self.res_codazzi_v[idx],
                    self.singular[idx] as u8,
                    self.valid[idx] as u8
                )?;
            }
        }
        Ok(())
    }
}
