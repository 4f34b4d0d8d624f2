//! Camera model, frame-tagged points and the camera / world / semi-local
//! transforms.
//!
//! Conventions:
//!
//! * camera frame: x right, y down, z forward (standard pinhole);
//! * world frame: right-handed and gravity aligned, z up, ground plane `(x, y)`;
//! * semi-local frame: world orientation with the ego agent at the origin,
//!   i.e. `R * p_camera`, which equals `p_world - t`.
//!
//! Points carry their frame as a zero-sized type parameter so that an
//! operation can only be handed a point in the frame it expects.

use std::fmt;
use std::marker::PhantomData;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::scalar::Scalar;

/// Quaternions further than this from unit norm are rejected on ingestion.
pub const QUATERNION_HARD_TOLERANCE: f64 = 1e-3;
/// Normalized quaternions stay within this distance of unit norm.
pub const QUATERNION_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("non-positive depth {depth} m")]
    NonPositiveDepth { depth: f64 },
    #[error("pixel ({u}, {v}) outside the {width}x{height} image")]
    OutOfBounds {
        u: f64,
        v: f64,
        width: f64,
        height: f64,
    },
    #[error("point behind the camera (z = {z} m)")]
    BehindCamera { z: f64 },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("quaternion norm {norm} is not unit")]
    NonUnitQuaternion { norm: f64 },
}

/// Marker for a coordinate frame.
pub trait Frame: Copy + Clone + fmt::Debug + Default + PartialEq + Send + Sync + 'static {
    const NAME: &'static str;
}

/// Frames whose third axis is the world "up" direction, so `(x, y)` is the
/// ground plane.
pub trait GravityAligned: Frame {}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Camera;
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SemiLocal;
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct World;

impl Frame for Camera {
    const NAME: &'static str = "camera";
}
impl Frame for SemiLocal {
    const NAME: &'static str = "semi-local";
}
impl Frame for World {
    const NAME: &'static str = "world";
}
impl GravityAligned for SemiLocal {}
impl GravityAligned for World {}

/// A 3D point in meters, tagged with its coordinate frame.
pub struct Point3<T, F> {
    pub x: T,
    pub y: T,
    pub z: T,
    frame: PhantomData<F>,
}

pub type CameraPoint<T> = Point3<T, Camera>;
pub type SemiLocalPoint<T> = Point3<T, SemiLocal>;
pub type WorldPoint<T> = Point3<T, World>;

impl<T: Clone, F> Clone for Point3<T, F> {
    fn clone(&self) -> Self {
        Self {
            x: self.x.clone(),
            y: self.y.clone(),
            z: self.z.clone(),
            frame: PhantomData,
        }
    }
}
impl<T: Copy, F> Copy for Point3<T, F> {}

impl<T: PartialEq, F> PartialEq for Point3<T, F> {
    fn eq(&self, other: &Self) -> bool {
        self.x == other.x && self.y == other.y && self.z == other.z
    }
}

impl<T: fmt::Debug, F> fmt::Debug for Point3<T, F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = std::any::type_name::<F>().rsplit("::").next().unwrap_or("?");
        write!(f, "{name}({:?}, {:?}, {:?})", self.x, self.y, self.z)
    }
}

impl<T: Scalar, F: Frame> Point3<T, F> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self {
            x,
            y,
            z,
            frame: PhantomData,
        }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> T {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Componentwise difference, staying in the same frame.
    pub fn offset_from(&self, other: &Self) -> [T; 3] {
        [self.x - other.x, self.y - other.y, self.z - other.z]
    }
}

impl<T: Scalar, F: GravityAligned> Point3<T, F> {
    /// Ground-plane components.
    pub fn horizontal(&self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }
}

/// Ground-plane vector (meters).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Vec2<T> {
    pub const fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn norm(&self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: &Self) -> T {
        (*self - *other).norm()
    }
}

impl<T: Scalar> Add for Vec2<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<T: Scalar> Sub for Vec2<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<T: Scalar> Neg for Vec2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Scalar> Mul<T> for Vec2<T> {
    type Output = Self;
    fn mul(self, rhs: T) -> Self {
        Self::new(self.x * rhs, self.y * rhs)
    }
}

/// Unit quaternion `w + xi + yj + zk`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitQuaternion<T> {
    w: T,
    x: T,
    y: T,
    z: T,
}

impl<T: Scalar> UnitQuaternion<T> {
    pub fn identity() -> Self {
        Self {
            w: T::one(),
            x: T::zero(),
            y: T::zero(),
            z: T::zero(),
        }
    }

    /// Ingests `(w, x, y, z)`. Components within [`QUATERNION_TOLERANCE`] of
    /// unit norm are kept bit for bit; larger deviations up to
    /// [`QUATERNION_HARD_TOLERANCE`] are renormalized; anything else fails.
    pub fn new_normalized(w: T, x: T, y: T, z: T) -> Result<Self, GeometryError> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        let dev = (norm - T::one()).abs();
        if !norm.is_finite() || dev > T::lit(QUATERNION_HARD_TOLERANCE) {
            return Err(GeometryError::NonUnitQuaternion {
                norm: norm.to_f64_lossy(),
            });
        }
        if dev <= T::lit(QUATERNION_TOLERANCE) {
            return Ok(Self { w, x, y, z });
        }
        Ok(Self {
            w: w / norm,
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: [T; 3], angle: T) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n == T::zero() {
            return Self::identity();
        }
        let half = angle / T::lit(2.0);
        let s = half.sin() / n;
        Self {
            w: half.cos(),
            x: axis[0] * s,
            y: axis[1] * s,
            z: axis[2] * s,
        }
    }

    /// From a proper rotation matrix (row-major).
    pub fn from_rotation_matrix(m: [[T; 3]; 3]) -> Self {
        let one = T::one();
        let two = T::lit(2.0);
        let quarter = T::lit(0.25);
        let trace = m[0][0] + m[1][1] + m[2][2];
        let (w, x, y, z) = if trace > T::zero() {
            let s = (trace + one).sqrt() * two;
            (
                quarter * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (one + m[0][0] - m[1][1] - m[2][2]).sqrt() * two;
            (
                (m[2][1] - m[1][2]) / s,
                quarter * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            )
        } else if m[1][1] > m[2][2] {
            let s = (one + m[1][1] - m[0][0] - m[2][2]).sqrt() * two;
            (
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                quarter * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = (one + m[2][2] - m[0][0] - m[1][1]).sqrt() * two;
            (
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                quarter * s,
            )
        };
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        Self {
            w: w / norm,
            x: x / norm,
            y: y / norm,
            z: z / norm,
        }
    }

    pub fn wxyz(&self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn inverse(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Rotates `v`.
    pub fn rotate(&self, v: [T; 3]) -> [T; 3] {
        // v' = v + 2w (q x v) + 2 q x (q x v)
        let two = T::lit(2.0);
        let q = [self.x, self.y, self.z];
        let c1 = cross(q, v);
        let c2 = cross(q, c1);
        [
            v[0] + two * (self.w * c1[0] + c2[0]),
            v[1] + two * (self.w * c1[1] + c2[1]),
            v[2] + two * (self.w * c1[2] + c2[2]),
        ]
    }

    pub fn to_rotation_matrix(&self) -> [[T; 3]; 3] {
        let ex = self.rotate([T::one(), T::zero(), T::zero()]);
        let ey = self.rotate([T::zero(), T::one(), T::zero()]);
        let ez = self.rotate([T::zero(), T::zero(), T::one()]);
        [
            [ex[0], ey[0], ez[0]],
            [ex[1], ey[1], ez[1]],
            [ex[2], ey[2], ez[2]],
        ]
    }
}

impl<T: Scalar> Mul for UnitQuaternion<T> {
    type Output = Self;
    fn mul(self, r: Self) -> Self {
        let l = self;
        Self {
            w: l.w * r.w - l.x * r.x - l.y * r.y - l.z * r.z,
            x: l.w * r.x + l.x * r.w + l.y * r.z - l.z * r.y,
            y: l.w * r.y - l.x * r.z + l.y * r.w + l.z * r.x,
            z: l.w * r.z + l.x * r.y - l.y * r.x + l.z * r.w,
        }
    }
}

fn cross<T: Scalar>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Camera pose: world-from-camera rotation and the ego agent's position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose<T> {
    pub rotation: UnitQuaternion<T>,
    pub translation: WorldPoint<T>,
}

impl<T: Scalar> Pose<T> {
    pub fn new(rotation: UnitQuaternion<T>, translation: WorldPoint<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(UnitQuaternion::identity(), WorldPoint::origin())
    }
}

/// Pinhole intrinsics (pixels).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: T,
    pub height: T,
}

impl<T: Scalar> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: T, height: T) -> Result<Self, GeometryError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Square pixels, principal point at the image center, horizontal field
    /// of view in degrees.
    pub fn from_horizontal_fov(width: T, height: T, hfov_deg: T) -> Result<Self, GeometryError> {
        let two = T::lit(2.0);
        let half = (hfov_deg / two).to_radians();
        if !(half > T::zero() && half < T::lit(std::f64::consts::FRAC_PI_2)) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "horizontal fov {hfov_deg} deg"
            )));
        }
        let f = width / two / half.tan();
        Self::new(f, f, width / two, height / two, width, height)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.fx > T::zero()
            && self.fy > T::zero()
            && self.cx >= T::zero()
            && self.cx < self.width
            && self.cy >= T::zero()
            && self.cy < self.height
            && self.fx.is_finite()
            && self.fy.is_finite();
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidIntrinsics(format!("{self:?}")))
        }
    }

    pub fn contains(&self, u: T, v: T) -> bool {
        u >= T::zero() && u <= self.width && v >= T::zero() && v <= self.height
    }
}

/// Pixel coordinates plus metric depth at that pixel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelPoint<T> {
    pub u: T,
    pub v: T,
    pub depth: T,
}

impl<T: Scalar> PixelPoint<T> {
    pub fn new(u: T, v: T, depth: T) -> Self {
        Self { u, v, depth }
    }
}

/// Lifts a pixel with depth into the camera frame: `d * K^-1 [u v 1]^T`.
pub fn backproject<T: Scalar>(
    p: PixelPoint<T>,
    k: &CameraIntrinsics<T>,
) -> Result<CameraPoint<T>, GeometryError> {
    if !(p.depth > T::zero()) || !p.depth.is_finite() {
        return Err(GeometryError::NonPositiveDepth {
            depth: p.depth.to_f64_lossy(),
        });
    }
    if !k.contains(p.u, p.v) {
        return Err(GeometryError::OutOfBounds {
            u: p.u.to_f64_lossy(),
            v: p.v.to_f64_lossy(),
            width: k.width.to_f64_lossy(),
            height: k.height.to_f64_lossy(),
        });
    }
    Ok(CameraPoint::new(
        (p.u - k.cx) / k.fx * p.depth,
        (p.v - k.cy) / k.fy * p.depth,
        p.depth,
    ))
}

/// Projects a camera-frame point onto the image plane. The result may lie
/// outside the image; callers that need visibility check
/// [`CameraIntrinsics::contains`].
pub fn project<T: Scalar>(
    p: CameraPoint<T>,
    k: &CameraIntrinsics<T>,
) -> Result<PixelPoint<T>, GeometryError> {
    if !(p.z > T::zero()) {
        return Err(GeometryError::BehindCamera {
            z: p.z.to_f64_lossy(),
        });
    }
    Ok(PixelPoint::new(
        k.fx * p.x / p.z + k.cx,
        k.fy * p.y / p.z + k.cy,
        p.z,
    ))
}

/// `R * p + t`.
pub fn camera_to_world<T: Scalar>(p: CameraPoint<T>, pose: &Pose<T>) -> WorldPoint<T> {
    let r = pose.rotation.rotate(p.to_array());
    let t = pose.translation;
    WorldPoint::new(r[0] + t.x, r[1] + t.y, r[2] + t.z)
}

/// `R * p`: the camera point rotated into world orientation, relative to the
/// ego agent.
pub fn camera_to_semilocal<T: Scalar>(
    p: CameraPoint<T>,
    rotation: &UnitQuaternion<T>,
) -> SemiLocalPoint<T> {
    SemiLocalPoint::from_array(rotation.rotate(p.to_array()))
}

/// `p - t`.
pub fn world_to_semilocal<T: Scalar>(p: WorldPoint<T>, pose: &Pose<T>) -> SemiLocalPoint<T> {
    SemiLocalPoint::from_array(p.offset_from(&pose.translation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn k700() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(700.0, 700.0, 640.0, 360.0, 1280.0, 720.0).unwrap()
    }

    #[test]
    fn principal_point_maps_to_optical_axis() {
        let k = k700();
        let p = backproject(PixelPoint::new(k.cx, k.cy, 4.0), &k).unwrap();
        assert_eq!(p, CameraPoint::new(0.0, 0.0, 4.0));
    }

    #[test]
    fn backproject_hand_evaluated() {
        // principal point off-center so that u = 1340 is inside the image
        let k = CameraIntrinsics::<f64>::new(700.0, 700.0, 640.0, 360.0, 1920.0, 720.0).unwrap();
        let p = backproject(PixelPoint::new(1340.0, 360.0, 4.0), &k).unwrap();
        assert!((p.x - 4.0).abs() < 1e-12);
        assert_eq!(p.y, 0.0);
        assert_eq!(p.z, 4.0);
    }

    #[test]
    fn backproject_rejects_bad_input() {
        let k = k700();
        assert!(matches!(
            backproject(PixelPoint::new(640.0, 360.0, 0.0), &k),
            Err(GeometryError::NonPositiveDepth { .. })
        ));
        assert!(matches!(
            backproject(PixelPoint::new(640.0, 360.0, -1.0), &k),
            Err(GeometryError::NonPositiveDepth { .. })
        ));
        assert!(matches!(
            backproject(PixelPoint::new(-3.0, 360.0, 2.0), &k),
            Err(GeometryError::OutOfBounds { .. })
        ));
        assert!(backproject(PixelPoint::new(640.0, 900.0, 2.0), &k).is_err());
    }

    #[test]
    fn project_examples() {
        let k = k700();
        let px = project(CameraPoint::new(0.0, 0.0, 4.0), &k).unwrap();
        assert_eq!(px, PixelPoint::new(640.0, 360.0, 4.0));
        let px = project(CameraPoint::new(4.0, 0.0, 4.0), &k).unwrap();
        assert_eq!(px, PixelPoint::new(1340.0, 360.0, 4.0));
        assert!(matches!(
            project(CameraPoint::new(0.0, 0.0, -1.0), &k),
            Err(GeometryError::BehindCamera { .. })
        ));
        assert!(project(CameraPoint::new(1.0, 0.0, 0.0), &k).is_err());
    }

    #[test]
    fn intrinsics_invariants() {
        assert!(CameraIntrinsics::new(0.0, 700.0, 640.0, 360.0, 1280.0, 720.0).is_err());
        assert!(CameraIntrinsics::new(700.0, 700.0, 1280.0, 360.0, 1280.0, 720.0).is_err());
        assert!(CameraIntrinsics::new(700.0, 700.0, 640.0, -1.0, 1280.0, 720.0).is_err());
        let k = CameraIntrinsics::<f64>::from_horizontal_fov(1920.0, 1080.0, 90.0).unwrap();
        assert!((k.fx - 960.0).abs() < 1e-9);
        assert_eq!(k.cx, 960.0);
    }

    #[test]
    fn pure_translation() {
        let pose = Pose::new(UnitQuaternion::identity(), WorldPoint::new(1.0, 2.0, 0.0));
        let w = camera_to_world(CameraPoint::new(0.0, 0.0, 4.0), &pose);
        assert_eq!(w, WorldPoint::new(1.0, 2.0, 4.0));
        let p = CameraPoint::new(0.3, -1.2, 7.5);
        let w = camera_to_world(p, &Pose::identity());
        assert_eq!(w.to_array(), p.to_array());
    }

    #[test]
    fn half_turn_about_vertical_y() {
        let pose = Pose::new(
            UnitQuaternion::from_axis_angle([0.0, 1.0, 0.0], PI),
            WorldPoint::origin(),
        );
        let w = camera_to_world(CameraPoint::new(1.0, 0.0, 4.0), &pose);
        assert!((w.x + 1.0).abs() < 1e-12);
        assert!(w.y.abs() < 1e-12);
        assert!((w.z + 4.0).abs() < 1e-12);
    }

    #[test]
    fn quarter_yaw_moves_forward_into_lateral() {
        // yaw about world-up (z): +x forward rotates into +y
        let q = UnitQuaternion::from_axis_angle([0.0, 0.0, 1.0], PI / 2.0);
        let p = camera_to_semilocal(CameraPoint::new(2.0, 0.0, 0.0), &q);
        assert!(p.x.abs() < 1e-12);
        assert!((p.y - 2.0).abs() < 1e-12);
        // camera z=forward under a yaw about the camera's vertical axis (-y)
        let q = UnitQuaternion::from_axis_angle([0.0, -1.0, 0.0], PI / 2.0);
        let p = camera_to_semilocal(CameraPoint::new(0.0, 0.0, 2.0), &q);
        assert!((p.norm() - 2.0).abs() < 1e-12);
        assert!(p.z.abs() < 1e-12);
        assert!((p.x.abs() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identity_rotation_leaves_point() {
        let p = CameraPoint::new(1.5, -0.25, 3.0);
        let s = camera_to_semilocal(p, &UnitQuaternion::identity());
        assert_eq!(s.to_array(), p.to_array());
    }

    #[test]
    fn world_to_semilocal_examples() {
        let pose = Pose::new(UnitQuaternion::identity(), WorldPoint::new(1.0, 0.0, 1.7));
        let s = world_to_semilocal(WorldPoint::new(3.0, 0.0, 1.7), &pose);
        assert_eq!(s, SemiLocalPoint::new(2.0, 0.0, 0.0));
        let s = world_to_semilocal(pose.translation, &pose);
        assert_eq!(s, SemiLocalPoint::origin());
    }

    #[test]
    fn quaternion_ingestion_tolerance() {
        let q = UnitQuaternion::<f64>::new_normalized(1.0 + 5e-4, 0.0, 0.0, 0.0).unwrap();
        assert!((q.norm() - 1.0).abs() < QUATERNION_TOLERANCE);
        let q = UnitQuaternion::new_normalized(1.0 + 1e-9, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(q.wxyz()[0], 1.0 + 1e-9);
        assert!(UnitQuaternion::new_normalized(1.01, 0.0, 0.0, 0.0).is_err());
        assert!(UnitQuaternion::<f64>::new_normalized(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn matrix_round_trip() {
        let q = UnitQuaternion::from_axis_angle([0.3, -0.5, 0.8], 2.3);
        let back = UnitQuaternion::from_rotation_matrix(q.to_rotation_matrix());
        let dot: f64 = q.wxyz().iter().zip(back.wxyz()).map(|(a, b)| a * b).sum();
        assert!((dot.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn works_in_f32() {
        let k = CameraIntrinsics::<f32>::new(700.0, 700.0, 640.0, 360.0, 1280.0, 720.0).unwrap();
        let p = CameraPoint::<f32>::new(0.5, -0.2, 3.0);
        let back = backproject(project(p, &k).unwrap(), &k).unwrap();
        assert!((back.x - p.x).abs() < 1e-5 && (back.y - p.y).abs() < 1e-5);
    }

    fn arb_quat() -> impl Strategy<Value = UnitQuaternion<f64>> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -PI..PI)
            .prop_map(|(a, b, c, ang)| UnitQuaternion::from_axis_angle([a, b, c + 1.5], ang))
    }

    proptest! {
        #[test]
        fn semilocal_is_world_minus_translation(
            q in arb_quat(),
            t in prop::array::uniform3(-100.0..100.0f64),
            p in prop::array::uniform3(-30.0..30.0f64),
        ) {
            let pose = Pose::new(q, WorldPoint::from_array(t));
            let cam = CameraPoint::from_array(p);
            let a = camera_to_semilocal(cam, &pose.rotation);
            let b = world_to_semilocal(camera_to_world(cam, &pose), &pose);
            // absolute error is bounded by a few ulps of |t|
            for (x, y) in a.to_array().iter().zip(b.to_array()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + t.iter().map(|v| v.abs()).fold(0.0, f64::max)));
            }
        }

        #[test]
        fn rotation_preserves_norm(q in arb_quat(), p in prop::array::uniform3(-30.0..30.0f64)) {
            let cam = CameraPoint::from_array(p);
            let s = camera_to_semilocal(cam, &q);
            prop_assert!((s.norm() - cam.norm()).abs() < 1e-12);
        }

        #[test]
        fn ego_sits_at_origin(q in arb_quat(), t in prop::array::uniform3(-1e4..1e4f64)) {
            let pose = Pose::new(q, WorldPoint::from_array(t));
            prop_assert_eq!(world_to_semilocal(pose.translation, &pose), SemiLocalPoint::origin());
        }
    }
}
