//! Small fixed-size geometry: 3-vectors, 3x3 matrices, torsion angles,
//! radial basis expansion and rigid-motion helpers.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use crate::mathf;
use crate::rng::Xoshiro256StarStar;

/// Displacements shorter than this are treated as zero when normalizing;
/// unit-vector features fall back to the zero vector instead of blowing up.
pub const UNIT_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum GeomError {
    /// Torsion is undefined: consecutive points closer than 1e-9 Å or
    /// collinear spans whose cross products vanish.
    DegenerateTorsion,
}

impl core::fmt::Display for GeomError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            GeomError::DegenerateTorsion => {
                write!(f, "torsion undefined for (near-)degenerate points")
            }
        }
    }
}

impl core::error::Error for GeomError {}

/// A 3-vector in Å.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3([
            self.0[1] * o.0[2] - self.0[2] * o.0[1],
            self.0[2] * o.0[0] - self.0[0] * o.0[2],
            self.0[0] * o.0[1] - self.0[1] * o.0[0],
        ])
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        mathf::sqrt(self.norm_sq())
    }

    pub fn dist(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// Unit vector, or the zero vector when the input is shorter than
    /// [`UNIT_EPS`] (the terminus convention for backbone features).
    pub fn unit_or_zero(self) -> Vec3 {
        let n = self.norm();
        if n <= UNIT_EPS {
            Vec3::ZERO
        } else {
            self * (1.0 / n)
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
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
        Vec3([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

/// Row-major 3x3 matrix.
pub type Mat3 = [[f64; 3]; 3];

pub const MAT3_IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat3_mul_vec(m: &Mat3, v: Vec3) -> Vec3 {
    Vec3([
        m[0][0] * v.0[0] + m[0][1] * v.0[1] + m[0][2] * v.0[2],
        m[1][0] * v.0[0] + m[1][1] * v.0[1] + m[1][2] * v.0[2],
        m[2][0] * v.0[0] + m[2][1] * v.0[1] + m[2][2] * v.0[2],
    ])
}

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for (k, bk) in b.iter().enumerate() {
                out[i][j] += a[i][k] * bk[j];
            }
        }
    }
    out
}

pub fn mat3_transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in m.iter().enumerate() {
        for j in 0..3 {
            out[j][i] = row[j];
        }
    }
    out
}

pub fn mat3_det(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Signed torsion of four points, right-hand rule about the p2→p3 axis,
/// range (−π, π]. The angle is measured between the half-plane containing p1
/// and the half-plane containing p4, both hinged on the axis.
pub fn dihedral(p1: Vec3, p2: Vec3, p3: Vec3, p4: Vec3) -> Result<f64, GeomError> {
    for (a, b) in [(p1, p2), (p2, p3), (p3, p4)] {
        if a.dist(b) < 1e-9 {
            return Err(GeomError::DegenerateTorsion);
        }
    }
    let axis = (p3 - p2).unit_or_zero();
    // Components of the outer bonds perpendicular to the axis.
    let a = p1 - p2;
    let b = p4 - p3;
    let u = a - axis * a.dot(axis);
    let w = b - axis * b.dot(axis);
    if u.norm() < 1e-9 || w.norm() < 1e-9 {
        return Err(GeomError::DegenerateTorsion);
    }
    let angle = mathf::atan2(axis.cross(u).dot(w), u.dot(w));
    // atan2 may return exactly -π for signed-zero y; fold onto (−π, π].
    if angle == -core::f64::consts::PI {
        Ok(core::f64::consts::PI)
    } else {
        Ok(angle)
    }
}

/// A Gaussian radial basis grid: `B` centers evenly spaced over
/// `[d_min, d_max]` inclusive, width equal to the center spacing.
#[derive(Clone, Debug, PartialEq)]
pub struct Rbf {
    centers: Vec<f64>,
    width: f64,
}

impl Rbf {
    /// Builds the even grid. `bins` must be at least 2 so the spacing (and
    /// thus the width) is defined.
    pub fn new(bins: usize, d_min: f64, d_max: f64) -> Self {
        assert!(bins >= 2, "rbf grid needs at least 2 centers");
        assert!(d_max > d_min, "rbf grid needs a positive span");
        let spacing = (d_max - d_min) / (bins - 1) as f64;
        let centers = (0..bins).map(|b| d_min + spacing * b as f64).collect();
        Rbf {
            centers,
            width: spacing,
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Expands one distance into `out` (length must equal `len()`).
    pub fn expand_into(&self, distance: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.centers.len());
        rbf_expand_into(distance, &self.centers, self.width, out);
    }

    pub fn expand(&self, distance: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.centers.len()];
        self.expand_into(distance, &mut out);
        out
    }
}

/// Gaussian expansion `exp(-(d - c_b)^2 / (2 w^2))` over explicit centers.
/// The distance is first clamped to the span of the centers, so every
/// component lands in (0, 1].
pub fn rbf_expand_into(distance: f64, centers: &[f64], width: f64, out: &mut [f64]) {
    debug_assert!(width > 0.0);
    debug_assert!(!centers.is_empty());
    let lo = centers[0];
    let hi = centers[centers.len() - 1];
    let d = distance.clamp(lo.min(hi), hi.max(lo));
    let inv = 1.0 / (2.0 * width * width);
    for (o, &c) in out.iter_mut().zip(centers) {
        let delta = d - c;
        *o = mathf::exp(-delta * delta * inv);
    }
}

/// Rotation matrix from a unit quaternion `(w, x, y, z)`.
pub fn rotation_from_quaternion(q: [f64; 4]) -> Mat3 {
    let [w, x, y, z] = q;
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// Uniform random proper rotation (det +1) from a normalized Gaussian
/// quaternion. Used by the rigid-motion invariance suites.
pub fn random_rotation(rng: &mut Xoshiro256StarStar) -> Mat3 {
    loop {
        let q = [rng.normal(), rng.normal(), rng.normal(), rng.normal()];
        let n = mathf::sqrt(q.iter().map(|v| v * v).sum());
        if n > 1e-3 {
            return rotation_from_quaternion([q[0] / n, q[1] / n, q[2] / n, q[3] / n]);
        }
    }
}

/// Random translation with components uniform in [-span, span].
pub fn random_translation(span: f64, rng: &mut Xoshiro256StarStar) -> Vec3 {
    Vec3([
        rng.uniform(-span, span),
        rng.uniform(-span, span),
        rng.uniform(-span, span),
    ])
}
