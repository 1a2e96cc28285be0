//! Small fixed-size vectors and rigid transforms, generic over the scalar.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// 2D vector / point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2<F> {
    pub x: F,
    pub y: F,
}

impl<F: Real> Vec2<F> {
    pub fn new(x: F, y: F) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(F::zero(), F::zero())
    }

    pub fn dot(self, o: Self) -> F {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, o: Self) -> F {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> F {
        self.dot(self)
    }

    pub fn norm(self) -> F {
        self.norm_sq().sqrt()
    }

    pub fn dist(self, o: Self) -> F {
        (self - o).norm()
    }

    pub fn dist_sq(self, o: Self) -> F {
        (self - o).norm_sq()
    }

    /// Unit vector, or `None` for a (near-)zero input.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n <= F::of(1e-12) {
            None
        } else {
            Some(self / n)
        }
    }

    pub fn angle(self) -> F {
        self.y.atan2(self.x)
    }

    pub fn from_angle(a: F) -> Self {
        Self::new(a.cos(), a.sin())
    }

    pub fn rotated(self, a: F) -> Self {
        let (s, c) = a.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<F: Real> Add for Vec2<F> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<F: Real> Sub for Vec2<F> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<F: Real> Mul<F> for Vec2<F> {
    type Output = Self;
    fn mul(self, s: F) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl<F: Real> Div<F> for Vec2<F> {
    type Output = Self;
    fn div(self, s: F) -> Self {
        Self::new(self.x / s, self.y / s)
    }
}

impl<F: Real> Neg for Vec2<F> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<F: Real> AddAssign for Vec2<F> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<F: Real> SubAssign for Vec2<F> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<F: Real> From<[F; 2]> for Vec2<F> {
    fn from(a: [F; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

/// 3D vector / point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3<F> {
    pub x: F,
    pub y: F,
    pub z: F,
}

impl<F: Real> Vec3<F> {
    pub fn new(x: F, y: F, z: F) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(F::zero(), F::zero(), F::zero())
    }

    pub fn dot(self, o: Self) -> F {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> F {
        self.dot(self)
    }

    pub fn norm(self) -> F {
        self.norm_sq().sqrt()
    }

    pub fn dist(self, o: Self) -> F {
        (self - o).norm()
    }

    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n <= F::of(1e-12) {
            None
        } else {
            Some(self / n)
        }
    }

    pub fn xy(self) -> Vec2<F> {
        Vec2::new(self.x, self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<F: Real> Add for Vec3<F> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<F: Real> Sub for Vec3<F> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<F: Real> Mul<F> for Vec3<F> {
    type Output = Self;
    fn mul(self, s: F) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<F: Real> Div<F> for Vec3<F> {
    type Output = Self;
    fn div(self, s: F) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl<F: Real> Neg for Vec3<F> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<F: Real> From<[F; 3]> for Vec3<F> {
    fn from(a: [F; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// Rigid transform (rotation + translation), mapping local coordinates into
/// the parent frame: `p_parent = R * p_local + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform<F> {
    /// Row-major rotation matrix.
    pub rotation: [[F; 3]; 3],
    pub translation: Vec3<F>,
}

impl<F: Real> RigidTransform<F> {
    pub fn identity() -> Self {
        let o = F::zero();
        let l = F::one();
        Self {
            rotation: [[l, o, o], [o, l, o], [o, o, l]],
            translation: Vec3::zero(),
        }
    }

    pub fn from_translation(t: Vec3<F>) -> Self {
        Self {
            translation: t,
            ..Self::identity()
        }
    }

    /// Rotation about the world z axis by `yaw`, then translation.
    pub fn from_yaw_translation(yaw: F, t: Vec3<F>) -> Self {
        let (s, c) = yaw.sin_cos();
        let o = F::zero();
        let l = F::one();
        Self {
            rotation: [[c, -s, o], [s, c, o], [o, o, l]],
            translation: t,
        }
    }

    /// Build from orthonormal basis vectors expressed in the parent frame
    /// (they become the rotation's columns).
    pub fn from_axes(x: Vec3<F>, y: Vec3<F>, z: Vec3<F>, origin: Vec3<F>) -> Self {
        Self {
            rotation: [[x.x, y.x, z.x], [x.y, y.y, z.y], [x.z, y.z, z.z]],
            translation: origin,
        }
    }

    pub fn apply(&self, p: Vec3<F>) -> Vec3<F> {
        self.apply_rotation(p) + self.translation
    }

    pub fn apply_rotation(&self, v: Vec3<F>) -> Vec3<F> {
        let r = &self.rotation;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn inverse(&self) -> Self {
        let r = &self.rotation;
        let rt = [
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ];
        let inv = Self {
            rotation: rt,
            translation: Vec3::zero(),
        };
        let t = inv.apply_rotation(self.translation);
        Self {
            rotation: rt,
            translation: -t,
        }
    }

    /// Composition: `(a.compose(b))(p) = a(b(p))`.
    pub fn compose(&self, other: &Self) -> Self {
        let a = &self.rotation;
        let b = &other.rotation;
        let mut rotation = [[F::zero(); 3]; 3];
        for (i, row) in rotation.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        Self {
            rotation,
            translation: self.apply(other.translation),
        }
    }

    /// Max deviation of `R^T R` from identity; ~0 for a genuine rotation.
    pub fn orthonormality_error(&self) -> F {
        let r = &self.rotation;
        let mut worst = F::zero();
        for i in 0..3 {
            for j in 0..3 {
                let mut dot = F::zero();
                for row in r.iter() {
                    dot = dot + row[i] * row[j];
                }
                let expect = if i == j { F::one() } else { F::zero() };
                worst = worst.max((dot - expect).abs());
            }
        }
        worst
    }
}
