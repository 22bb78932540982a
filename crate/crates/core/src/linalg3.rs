//! Fixed-size 3×3 linear algebra for the closed-form piecewise-linear flow.
//!
//! Everything here is a small `Copy` value type. The eigendecomposition goes
//! through the characteristic cubic (trigonometric root formula) followed by
//! nullspace extraction, which is all the flow needs: the operators we deal
//! with have three distinct real eigenvalues.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative gap below which two eigenvalues count as coincident.
pub const REPEATED_EIGEN_TOL: f64 = 1e-9;

/// A real 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn dot(&self, other: &Vec3) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn cross(&self, other: &Vec3) -> Vec3 {
        let [a0, a1, a2] = self.0;
        let [b0, b1, b2] = other.0;
        Vec3([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Vec3 {
        Vec3(self.0.map(|v| v * s))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vec3 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        for i in 0..3 {
            self.0[i] += o.0[i];
        }
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3(self.0.map(|v| -v))
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        self.scale(s)
    }
}

/// A real 3×3 matrix stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);

    pub fn diag(d: [f64; 3]) -> Mat3 {
        Mat3([[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]])
    }

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Mat3 {
        Mat3([[c0[0], c1[0], c2[0]], [c0[1], c1[1], c2[1]], [c0[2], c1[2], c2[2]]])
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3(self.0[i])
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3([self.0[0][j], self.0[1][j], self.0[2][j]])
    }

    pub fn transpose(&self) -> Mat3 {
        let mut t = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                t.0[i][j] = self.0[j][i];
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        self.0.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn norm_frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn scale(&self, s: f64) -> Mat3 {
        Mat3(self.0.map(|r| r.map(|v| v * s)))
    }

    /// Inverse via the adjugate; `None` when the determinant is negligible.
    pub fn inverse(&self) -> Option<Mat3> {
        let m = &self.0;
        let det = self.det();
        let scale = self.norm_inf().powi(3);
        if !(det.abs() > 1e-14 * scale) {
            return None;
        }
        let inv_det = 1.0 / det;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        Some(Mat3([
            [cof(1, 2, 1, 2) * inv_det, -cof(0, 2, 1, 2) * inv_det, cof(0, 1, 1, 2) * inv_det],
            [-cof(1, 2, 0, 2) * inv_det, cof(0, 2, 0, 2) * inv_det, -cof(0, 1, 0, 2) * inv_det],
            [cof(1, 2, 0, 1) * inv_det, -cof(0, 2, 0, 1) * inv_det, cof(0, 1, 0, 1) * inv_det],
        ]))
    }

    /// Solve `self · x = rhs`.
    pub fn solve(&self, rhs: Vec3) -> Option<Vec3> {
        self.inverse().map(|inv| inv * rhs)
    }

    /// Row vector product `vᵀ · self`.
    pub fn left_mul(&self, v: Vec3) -> Vec3 {
        self.transpose() * v
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, o: Mat3) -> Mat3 {
        let mut r = self;
        for i in 0..3 {
            for j in 0..3 {
                r.0[i][j] += o.0[i][j];
            }
        }
        r
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, o: Mat3) -> Mat3 {
        let mut r = self;
        for i in 0..3 {
            for j in 0..3 {
                r.0[i][j] -= o.0[i][j];
            }
        }
        r
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, s: f64) -> Mat3 {
        self.scale(s)
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        Vec3([self.row(0).dot(&v), self.row(1).dot(&v), self.row(2).dot(&v)])
    }
}

impl Mul<Mat3> for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut r = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                r.0[i][j] = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        r
    }
}

/// Spectral data of a diagonalisable operator with real spectrum.
///
/// Following the decay-rate convention of the flow, `lambda[i]` holds the
/// *negated* eigenvalue: `m · U = U · diag(−λ₁, −λ₂, −λ₃)` with
/// `λ₁ < λ₂ < λ₃`. For a dissipative operator all λᵢ are positive and λ₁ is
/// the slowest decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomp {
    pub lambda: [f64; 3],
    /// Right eigenvectors as columns, unit Euclidean norm.
    pub u: Mat3,
    pub u_inv: Mat3,
}

impl EigenDecomp {
    /// `U · diag(e^{−λᵢ dt}) · U⁻¹`.
    pub fn expm(&self, dt: f64) -> Mat3 {
        let d = self.lambda.map(|l| (-l * dt).exp());
        self.u * Mat3::diag(d) * self.u_inv
    }

    /// Projector onto the slowest mode, `U · diag(1,0,0) · U⁻¹`.
    pub fn slow_projector(&self) -> Mat3 {
        self.u * Mat3::diag([1.0, 0.0, 0.0]) * self.u_inv
    }

    pub fn reconstruct(&self) -> Mat3 {
        self.u * Mat3::diag(self.lambda.map(|l| -l)) * self.u_inv
    }
}

fn char_poly(m: &Mat3) -> (f64, f64, f64) {
    // λ³ + a2 λ² + a1 λ + a0
    let a = &m.0;
    let minors = (a[0][0] * a[1][1] - a[0][1] * a[1][0])
        + (a[0][0] * a[2][2] - a[0][2] * a[2][0])
        + (a[1][1] * a[2][2] - a[1][2] * a[2][1]);
    (-m.trace(), minors, -m.det())
}

fn polish_root(x: f64, (a2, a1, a0): (f64, f64, f64)) -> f64 {
    let mut x = x;
    for _ in 0..3 {
        let f = ((x + a2) * x + a1) * x + a0;
        let df = (3.0 * x + 2.0 * a2) * x + a1;
        if df == 0.0 {
            break;
        }
        let step = f / df;
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    x
}

fn null_vector(m: &Mat3, eig: f64) -> Vec3 {
    let shifted = *m - Mat3::IDENTITY.scale(eig);
    let (r0, r1, r2) = (shifted.row(0), shifted.row(1), shifted.row(2));
    let candidates = [r0.cross(&r1), r0.cross(&r2), r1.cross(&r2)];
    let best = candidates.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(Vec3::ZERO);
    let n = best.norm();
    if n > 0.0 {
        // Sign convention: largest-magnitude component positive.
        let pivot = (0..3).max_by(|&i, &j| best[i].abs().total_cmp(&best[j].abs())).unwrap_or(0);
        let s = if best[pivot] < 0.0 { -1.0 } else { 1.0 };
        best.scale(s / n)
    } else {
        best
    }
}

/// Diagonalise a 3×3 matrix with three distinct real eigenvalues.
pub fn eigen_decompose(m: &Mat3) -> Result<EigenDecomp> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let coeffs @ (a2, a1, a0) = char_poly(m);
    let shift = -a2 / 3.0;
    let p = a1 - a2 * a2 / 3.0;
    let q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;
    let scale = m.norm_inf().max(f64::MIN_POSITIVE);

    if p >= -1e-30 * scale * scale {
        // Either a triple root (p = q = 0) or a complex pair.
        return Err(Error::ComplexOrRepeatedEigenvalues);
    }
    let amp = 2.0 * (-p / 3.0).sqrt();
    let arg = (3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt();
    if arg.abs() > 1.0 + 1e-12 {
        return Err(Error::ComplexOrRepeatedEigenvalues);
    }
    let phi = arg.clamp(-1.0, 1.0).acos() / 3.0;
    let mut eigs = [0.0; 3];
    for (k, e) in eigs.iter_mut().enumerate() {
        let root = shift + amp * (phi - 2.0 * PI * k as f64 / 3.0).cos();
        *e = polish_root(root, coeffs);
    }
    // Decay rates λ = −eig, ascending.
    let mut lambda = eigs.map(|e| -e);
    lambda.sort_by(|x, y| x.total_cmp(y));
    let radius = lambda.iter().fold(0.0_f64, |acc, l| acc.max(l.abs())).max(f64::MIN_POSITIVE);
    if (lambda[1] - lambda[0]) < REPEATED_EIGEN_TOL * radius || (lambda[2] - lambda[1]) < REPEATED_EIGEN_TOL * radius {
        return Err(Error::ComplexOrRepeatedEigenvalues);
    }
    let cols = lambda.map(|l| null_vector(m, -l));
    let u = Mat3::from_cols(cols[0], cols[1], cols[2]);
    let u_inv = u.inverse().ok_or(Error::ComplexOrRepeatedEigenvalues)?;
    Ok(EigenDecomp { lambda, u, u_inv })
}

/// All three eigenvalues, real ones first, then a conjugate pair if any.
pub fn eigenvalues(m: &Mat3) -> [Complex64; 3] {
    let coeffs @ (a2, a1, a0) = char_poly(m);
    let shift = -a2 / 3.0;
    let p = a1 - a2 * a2 / 3.0;
    let q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;
    let disc = 0.25 * q * q + p * p * p / 27.0;
    if disc > 0.0 {
        let s = disc.sqrt();
        let real = polish_root(shift + (-0.5 * q + s).cbrt() + (-0.5 * q - s).cbrt(), coeffs);
        // Deflate: λ² + (a2 + r)λ + (a1 + r(a2 + r)).
        let b = a2 + real;
        let c = a1 + real * b;
        let re = -0.5 * b;
        let d = c - re * re;
        let (x, y) = if d >= 0.0 {
            (Complex64::new(re, d.sqrt()), Complex64::new(re, -d.sqrt()))
        } else {
            (Complex64::new(re + (-d).sqrt(), 0.0), Complex64::new(re - (-d).sqrt(), 0.0))
        };
        [Complex64::new(real, 0.0), x, y]
    } else {
        let amp = 2.0 * (-p / 3.0).max(0.0).sqrt();
        let arg = if p == 0.0 { 0.0 } else { ((3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0) };
        let phi = arg.acos() / 3.0;
        [0, 1, 2]
            .map(|k| Complex64::new(polish_root(shift + amp * (phi - 2.0 * PI * k as f64 / 3.0).cos(), coeffs), 0.0))
    }
}

/// Matrix exponential `e^{m·dt}` through the eigendecomposition.
pub fn expm(m: &Mat3, dt: f64) -> Result<Mat3> {
    Ok(eigen_decompose(m)?.expm(dt))
}

/// Real and imaginary parts of `(iωI − m)⁻¹ v`.
pub fn resolvent_apply(m: &Mat3, omega: f64, v: Vec3) -> Result<(Vec3, Vec3)> {
    let mut a = [[Complex64::new(0.0, 0.0); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] = Complex64::new(-m.0[i][j], if i == j { omega } else { 0.0 });
        }
    }
    let mut b = v.0.map(|x| Complex64::new(x, 0.0));
    let scale = m.norm_inf().max(omega.abs()).max(f64::MIN_POSITIVE);

    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap_or(col);
        if a[pivot][col].norm() <= 1e-14 * scale {
            return Err(Error::SingularResolvent);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let factor = a[row][col] / a[col][col];
            for k in col..3 {
                let upd = factor * a[col][k];
                a[row][k] -= upd;
            }
            let upd = factor * b[col];
            b[row] -= upd;
        }
    }
    let mut x = [Complex64::new(0.0, 0.0); 3];
    for row in (0..3).rev() {
        let mut acc = b[row];
        for k in row + 1..3 {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok((Vec3(x.map(|z| z.re)), Vec3(x.map(|z| z.im))))
}
