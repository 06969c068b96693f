//! Unit quaternions and the small dense matrices used throughout the crate.
//!
//! Quaternions are scalar-first, `q = [q0, qv]`, and multiply with the
//! Hamilton product
//!
//! ```text
//! a ⊗ b = [ a0 b0 - av·bv ,  a0 bv + b0 av + av × bv ]
//! ```
//!
//! The rotation matrix of a quaternion is `R(q) = I - 2 q0 [qv×] + 2 [qv×]²`.
//! With this convention `R(q)` maps reference-frame vectors into the frame
//! that `q` describes, and composes as `R(a ⊗ b) = R(b) R(a)`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Unit-norm tolerance enforced on every constructed quaternion.
pub const UNIT_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum So3Error {
    #[error("quaternion has non-finite components")]
    NonFinite,
    #[error("quaternion norm {0:e} is too small to normalize")]
    Degenerate(f64),
}

/// A 3-vector. Units depend on context (rad/s, N·m, dimensionless).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Standard basis vector `e_{i+1}`.
    pub fn unit(i: usize) -> Self {
        let mut v = Self::ZERO;
        v[i] = 1.0;
        v
    }

    #[inline]
    pub fn dot(&self, o: &Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(&self, o: &Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Returns `None` for the zero vector.
    pub fn normalized(&self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| *self * (1.0 / n))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Outer product `self · otherᵀ`.
    pub fn outer(&self, o: &Vec3) -> Mat3 {
        let a = self.to_array();
        let b = o.to_array();
        let mut m = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = a[i] * b[j];
            }
        }
        m
    }

    pub fn map(self, f: impl Fn(f64) -> f64) -> Vec3 {
        Vec3::new(f(self.x), f(self.y), f(self.z))
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl IndexMut<usize> for Vec3 {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:e}, {:e}, {:e})", self.x, self.y, self.z)
    }
}

/// Dense 3×3 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const fn zeros() -> Self {
        Mat3([[0.0; 3]; 3])
    }

    pub const fn identity() -> Self {
        Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub const fn diag(a: f64, b: f64, c: f64) -> Self {
        Mat3([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    pub fn from_rows(r0: Vec3, r1: Vec3, r2: Vec3) -> Self {
        Mat3([r0.to_array(), r1.to_array(), r2.to_array()])
    }

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Self::from_rows(c0, c1, c2).transpose()
    }

    pub fn row(&self, i: usize) -> Vec3 {
        Vec3::from(self.0[i])
    }

    pub fn col(&self, j: usize) -> Vec3 {
        Vec3::new(self.0[0][j], self.0[1][j], self.0[2][j])
    }

    pub fn transpose(&self) -> Mat3 {
        let mut t = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                t.0[j][i] = self.0[i][j];
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..3).all(|i| (0..3).all(|j| (self.0[i][j] - self.0[j][i]).abs() <= tol))
    }

    /// Inverse via the adjugate. Returns `None` when `|det|` is below
    /// `rel_tol · ‖A‖_F³`.
    pub fn inverse(&self, rel_tol: f64) -> Option<Mat3> {
        let det = self.det();
        let scale = self.frobenius_norm().powi(3);
        if !det.is_finite() || det.abs() <= rel_tol * scale || scale == 0.0 {
            return None;
        }
        let m = &self.0;
        let inv_det = 1.0 / det;
        let mut r = Mat3::zeros();
        r.0[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det;
        r.0[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
        r.0[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
        r.0[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det;
        r.0[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
        r.0[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
        r.0[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det;
        r.0[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
        r.0[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
        Some(r)
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> [f64; 3] {
        let sym = (*self + self.transpose()) * 0.5;
        let mut ev = symmetric_eigenvalues(sym.0);
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Matrix 2-norm (largest singular value).
    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(&self.0)
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
        self + o * -1.0
    }
}

impl Neg for Mat3 {
    type Output = Mat3;
    fn neg(self) -> Mat3 {
        self * -1.0
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(self, s: f64) -> Mat3 {
        let mut r = self;
        r.0.iter_mut().flatten().for_each(|v| *v *= s);
        r
    }
}

impl Mul<Vec3> for Mat3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }
}

impl Mul<Mat3> for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut r = Mat3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                r.0[i][j] = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        r
    }
}

/// Skew-symmetric matrix with `skew(v) · w = v × w`.
pub fn skew(v: Vec3) -> Mat3 {
    Mat3([[0.0, -v.z, v.y], [v.z, 0.0, -v.x], [-v.y, v.x, 0.0]])
}

/// Eigenvalues of a symmetric `N×N` matrix by cyclic Jacobi rotations.
///
/// Sweeps until the off-diagonal mass drops below `1e-14` relative to the
/// Frobenius norm. Order of the returned eigenvalues is unspecified.
pub fn symmetric_eigenvalues<const N: usize>(mut a: [[f64; N]; N]) -> [f64; N] {
    let total: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    if total == 0.0 {
        return [0.0; N];
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for (i, row) in a.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i != j {
                    off += v * v;
                }
            }
        }
        if off.sqrt() <= 1e-14 * total {
            break;
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a[p][q];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..N {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..N {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::array::from_fn(|i| a[i][i])
}

/// Largest singular value of an `R×C` matrix, from the eigenvalues of `AᵀA`.
pub fn spectral_norm<const R: usize, const C: usize>(a: &[[f64; C]; R]) -> f64 {
    let mut ata = [[0.0; C]; C];
    for (i, row) in ata.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..R).map(|k| a[k][i] * a[k][j]).sum();
        }
    }
    symmetric_eigenvalues(ata)
        .into_iter()
        .fold(0.0_f64, f64::max)
        .max(0.0)
        .sqrt()
}

/// A unit quaternion `[q0, qv]`, scalar first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct UnitQuaternion {
    q0: f64,
    qv: Vec3,
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        q0: 1.0,
        qv: Vec3::ZERO,
    };

    /// Normalizes `[q0, qv]` onto the unit sphere.
    pub fn new(q0: f64, qv: Vec3) -> Result<Self, So3Error> {
        Self::from_array([q0, qv.x, qv.y, qv.z])
    }

    pub fn from_array(a: [f64; 4]) -> Result<Self, So3Error> {
        if !a.iter().all(|v| v.is_finite()) {
            return Err(So3Error::NonFinite);
        }
        let n = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n < 1e-150 {
            return Err(So3Error::Degenerate(n));
        }
        Ok(UnitQuaternion {
            q0: a[0] / n,
            qv: Vec3::new(a[1], a[2], a[3]) * (1.0 / n),
        })
    }

    /// `[cos(θ/2), n sin(θ/2)]`; `axis` is normalized, a zero axis yields the identity.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        match axis.normalized() {
            Some(n) => {
                let (s, c) = (0.5 * angle).sin_cos();
                // already unit up to rounding; renormalize to hold the invariant
                Self::new(c, n * s).unwrap_or(Self::IDENTITY)
            }
            None => Self::IDENTITY,
        }
    }

    #[inline]
    pub fn scalar(&self) -> f64 {
        self.q0
    }

    #[inline]
    pub fn vector(&self) -> Vec3 {
        self.qv
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.q0, self.qv.x, self.qv.y, self.qv.z]
    }

    pub fn norm(&self) -> f64 {
        (self.q0 * self.q0 + self.qv.norm_squared()).sqrt()
    }

    pub fn inverse(&self) -> Self {
        UnitQuaternion {
            q0: self.q0,
            qv: -self.qv,
        }
    }

    /// The same rotation with a non-negative scalar part.
    pub fn canonical(&self) -> Self {
        if self.q0 < 0.0 {
            UnitQuaternion {
                q0: -self.q0,
                qv: -self.qv,
            }
        } else {
            *self
        }
    }

    /// `R(q) = I - 2 q0 [qv×] + 2 [qv×][qv×]`.
    pub fn rotation_matrix(&self) -> Mat3 {
        let s = skew(self.qv);
        Mat3::identity() - s * (2.0 * self.q0) + (s * s) * 2.0
    }

    /// `G(q) = q0 I + [qv×]`.
    pub fn g_matrix(&self) -> Mat3 {
        Mat3::identity() * self.q0 + skew(self.qv)
    }

    /// Principal rotation angle `2 acos(|q0|)` in `[0, π]`, evaluated as
    /// `2 atan2(‖qv‖, |q0|)` to keep precision at small angles.
    pub fn principal_angle(&self) -> f64 {
        2.0 * self.qv.norm().atan2(self.q0.abs())
    }

    /// `q̇ = ½ [-qvᵀ; G(q)] ω` on the raw components.
    pub fn derivative(&self, omega: Vec3) -> [f64; 4] {
        quaternion_rate(self.to_array(), omega)
    }
}

impl TryFrom<[f64; 4]> for UnitQuaternion {
    type Error = So3Error;
    fn try_from(a: [f64; 4]) -> Result<Self, So3Error> {
        Self::from_array(a)
    }
}

impl From<UnitQuaternion> for [f64; 4] {
    fn from(q: UnitQuaternion) -> Self {
        q.to_array()
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    /// Hamilton product, renormalized.
    fn mul(self, b: UnitQuaternion) -> UnitQuaternion {
        let a = self;
        let q0 = a.q0 * b.q0 - a.qv.dot(&b.qv);
        let qv = b.qv * a.q0 + a.qv * b.q0 + a.qv.cross(&b.qv);
        let n = (q0 * q0 + qv.norm_squared()).sqrt();
        UnitQuaternion {
            q0: q0 / n,
            qv: qv * (1.0 / n),
        }
    }
}

impl fmt::Display for UnitQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{:.12}, {:.12}, {:.12}, {:.12}]",
            self.q0, self.qv.x, self.qv.y, self.qv.z
        )
    }
}

/// Kinematics `½ [-qvᵀ ω; q0 ω + qv × ω]` for a raw (not necessarily unit) 4-vector.
#[inline]
pub fn quaternion_rate(q: [f64; 4], w: Vec3) -> [f64; 4] {
    let qv = Vec3::new(q[1], q[2], q[3]);
    let v = w * q[0] + qv.cross(&w);
    [-0.5 * qv.dot(&w), 0.5 * v.x, 0.5 * v.y, 0.5 * v.z]
}

/// The matrices `M(q̃)` (4×4) and `E(q̃)` (3×4) relating true and
/// estimated error quaternions: `q̂_e = q_e + M(q̃) q_e`, `q̂_e,v = q_e,v + E(q̃) q_e`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMatrices {
    pub m: [[f64; 4]; 4],
    pub e: [[f64; 4]; 3],
}

impl ErrorMatrices {
    pub fn m_norm(&self) -> f64 {
        spectral_norm(&self.m)
    }

    pub fn e_norm(&self) -> f64 {
        spectral_norm(&self.e)
    }

    pub fn apply_m(&self, q: &UnitQuaternion) -> [f64; 4] {
        let v = q.to_array();
        std::array::from_fn(|i| (0..4).map(|j| self.m[i][j] * v[j]).sum())
    }

    pub fn apply_e(&self, q: &UnitQuaternion) -> Vec3 {
        let v = q.to_array();
        Vec3::from(std::array::from_fn::<f64, 3, _>(|i| {
            (0..4).map(|j| self.e[i][j] * v[j]).sum()
        }))
    }
}

pub fn error_matrices(qt: &UnitQuaternion) -> ErrorMatrices {
    let c = qt.scalar() - 1.0;
    let v = qt.vector();
    let lower = Mat3::identity() * c + skew(v);
    let mut m = [[0.0; 4]; 4];
    let mut e = [[0.0; 4]; 3];
    m[0][0] = c;
    for j in 0..3 {
        m[0][j + 1] = v[j];
    }
    for i in 0..3 {
        m[i + 1][0] = -v[i];
        e[i][0] = -v[i];
        for j in 0..3 {
            m[i + 1][j + 1] = lower.0[i][j];
            e[i][j + 1] = lower.0[i][j];
        }
    }
    ErrorMatrices { m, e }
}
