//! Helpers for 2x2 complex matrices: the su(2) basis, inner products and
//! the identification of SU(2) with the unit 3-sphere.

use nalgebra::Matrix2;
use num_complex::Complex64;

pub type C = Complex64;
pub type Mat2 = Matrix2<C>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// e0 = I.
pub fn e0() -> Mat2 {
    Mat2::identity()
}

/// e1 = [[0, 1], [-1, 0]].
pub fn e1() -> Mat2 {
    Mat2::new(c(0.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0))
}

/// e2 = [[0, i], [i, 0]].
pub fn e2() -> Mat2 {
    Mat2::new(c(0.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(0.0, 0.0))
}

/// e3 = [[i, 0], [0, -i]].
pub fn e3() -> Mat2 {
    Mat2::new(c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, -1.0))
}

/// Frobenius norm.
pub fn frob(m: &Mat2) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Inner product <X, Y> = -Re Tr(XY) / 2, the Euclidean product on su(2)
/// in which {e1, e2, e3} is orthonormal.
pub fn su2_inner(x: &Mat2, y: &Mat2) -> f64 {
    -((x * y).trace()).re / 2.0
}

/// Coordinates of X in the basis {e1, e2, e3}. Only the anti-Hermitian
/// trace-free part of X contributes.
pub fn su2_coords(x: &Mat2) -> [f64; 3] {
    // <X, e_i> with e_i anti-Hermitian: <X,Y> = Re Tr(X Y^H)/2.
    let x1 = (x[(0, 1)].re - x[(1, 0)].re) / 2.0;
    let x2 = (x[(0, 1)].im + x[(1, 0)].im) / 2.0;
    let x3 = (x[(0, 0)].im - x[(1, 1)].im) / 2.0;
    [x1, x2, x3]
}

pub fn from_su2_coords(v: [f64; 3]) -> Mat2 {
    e1() * c(v[0], 0.0) + e2() * c(v[1], 0.0) + e3() * c(v[2], 0.0)
}

/// Distance of M from SU(2): max of || M M^H - I || and |det M - 1|.
pub fn su2_defect(m: &Mat2) -> f64 {
    let d = frob(&(m * m.adjoint() - Mat2::identity()));
    let det = (m.determinant() - C::new(1.0, 0.0)).norm();
    d.max(det)
}

/// Matrix exponential of a trace-free 2x2 matrix, via the closed form
/// exp(X) = cos(d) I + sinc(d) X with d^2 = det X.
pub fn exp_tracefree(x: &Mat2) -> Mat2 {
    let d2 = x.determinant();
    let d = d2.sqrt();
    let (cos_d, sinc_d) = if d.norm() < 1e-8 {
        // series around d = 0
        (C::new(1.0, 0.0) - d2 / 2.0, C::new(1.0, 0.0) - d2 / 6.0)
    } else {
        (d.cos(), d.sin() / d)
    };
    Mat2::identity() * cos_d + x * sinc_d
}

/// General 2x2 matrix exponential by scaling and squaring on the
/// trace-free closed form.
pub fn exp_m2(x: &Mat2) -> Mat2 {
    let t = x.trace() / 2.0;
    let y = x - Mat2::identity() * t;
    exp_tracefree(&y) * t.exp()
}
