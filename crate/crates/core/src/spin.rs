//! Messenger state: the message carried by each simulated neutron and the
//! rotations applied to it by magnetic-field regions.
//!
//! A message is stored as three angles `(psi1, psi2, theta)`. The direction of
//! the magnetic moment is
//!
//! ```text
//! m = (cos(phi) sin(theta), sin(phi) sin(theta), cos(theta)),  phi = psi1 - psi2
//! ```
//!
//! so normalization is structural and never drifts.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Tolerance used when validating unit vectors supplied by callers.
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// A plain real 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector `x cos(phi) + y sin(phi)` in the x-y plane.
    pub fn in_plane(phi: f64) -> Vec3 {
        Vec3::new(phi.cos(), phi.sin(), 0.0)
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOLERANCE
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, rhs: f64) -> Vec3 {
        Vec3::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Direction of a magnetic moment: a unit 3-vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagneticMoment(Vec3);

impl MagneticMoment {
    pub const X: MagneticMoment = MagneticMoment(Vec3::X);
    pub const Y: MagneticMoment = MagneticMoment(Vec3::Y);
    pub const Z: MagneticMoment = MagneticMoment(Vec3::Z);

    /// Validates that `v` has unit norm.
    pub fn new(v: Vec3) -> Result<Self> {
        if v.is_unit() {
            Ok(Self(v))
        } else {
            Err(Error::InvalidConfig(format!(
                "magnetic moment {v} does not have unit norm (|m| = {})",
                v.norm()
            )))
        }
    }

    /// Normalizes `v`; fails on the zero vector or non-finite input.
    pub fn normalized(v: Vec3) -> Result<Self> {
        let n = v.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidConfig(format!("cannot normalize {v}")));
        }
        Ok(Self(v * (1.0 / n)))
    }

    pub fn vec(self) -> Vec3 {
        self.0
    }
}

/// A rotation of the moment by `angle` radians about `axis` (right-hand rule).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationSpec {
    axis: Vec3,
    angle: f64,
}

impl RotationSpec {
    pub fn new(axis: Vec3, angle: f64) -> Result<Self> {
        if !axis.is_unit() {
            return Err(Error::InvalidConfig(format!(
                "rotation axis {axis} does not have unit norm"
            )));
        }
        if !angle.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "rotation angle {angle} is not finite"
            )));
        }
        Ok(Self { axis, angle })
    }

    pub fn about_x(angle: f64) -> Self {
        Self {
            axis: Vec3::X,
            angle,
        }
    }

    pub fn about_z(angle: f64) -> Self {
        Self {
            axis: Vec3::Z,
            angle,
        }
    }

    /// Rotation produced by a field region along `axis` with lumped exposure
    /// angle `exposure`.
    ///
    /// Integrating `dm/dt = m x B` turns the moment clockwise about `B`, so the
    /// right-hand rotation angle is `-exposure`.
    pub fn field_exposure(axis: Vec3, exposure: f64) -> Result<Self> {
        Self::new(axis, -exposure)
    }

    pub fn axis(&self) -> Vec3 {
        self.axis
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Rodrigues' formula applied to `v`.
    pub fn apply(&self, v: Vec3) -> Vec3 {
        let (s, c) = self.angle.sin_cos();
        let k = self.axis;
        v * c + k.cross(v) * s + k * (k.dot(v) * (1.0 - c))
    }
}

/// Reduces an angle to `[0, 2pi)`.
pub fn reduce_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// The message carried by a messenger.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    psi1: f64,
    psi2: f64,
    theta: f64,
}

impl Message {
    /// Builds a message, reducing the phases to `[0, 2pi)`.
    pub fn new(psi1: f64, psi2: f64, theta: f64) -> Result<Self> {
        if !(psi1.is_finite() && psi2.is_finite()) {
            return Err(Error::InvalidConfig("message phases must be finite".into()));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::InvalidConfig(format!(
                "polar angle {theta} outside [0, pi]"
            )));
        }
        Ok(Self {
            psi1: reduce_angle(psi1),
            psi2: reduce_angle(psi2),
            theta,
        })
    }

    /// Message whose moment points along `m`, with `psi2 = 0`.
    pub fn from_moment(m: MagneticMoment) -> Self {
        let v = m.vec();
        let rho = v.x.hypot(v.y);
        let theta = rho.atan2(v.z);
        let phi = if rho == 0.0 { 0.0 } else { v.y.atan2(v.x) };
        Self {
            psi1: reduce_angle(phi),
            psi2: 0.0,
            theta,
        }
    }

    /// Eigenstate along `+z` (`up`) or `-z`, phases reset.
    pub fn pole(up: bool) -> Self {
        Self {
            psi1: 0.0,
            psi2: 0.0,
            theta: if up { 0.0 } else { PI },
        }
    }

    pub fn psi1(&self) -> f64 {
        self.psi1
    }

    pub fn psi2(&self) -> f64 {
        self.psi2
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Azimuth of the moment, `psi1 - psi2`.
    pub fn azimuth(&self) -> f64 {
        self.psi1 - self.psi2
    }
}

/// Direction of the magnetic moment encoded by `msg`.
pub fn moment_of(msg: &Message) -> MagneticMoment {
    if msg.theta == 0.0 {
        return MagneticMoment(Vec3::Z);
    }
    if msg.theta == PI {
        return MagneticMoment(-Vec3::Z);
    }
    let (sp, cp) = msg.azimuth().sin_cos();
    let (st, ct) = msg.theta.sin_cos();
    MagneticMoment(Vec3::new(cp * st, sp * st, ct))
}

/// Rotates the moment carried by `msg` as prescribed by `spec`.
///
/// Rotations about `z` only shift the azimuth and are applied to `psi1`
/// directly, leaving `theta` bit-identical. Other axes go through the moment.
pub fn rotate(msg: &Message, spec: &RotationSpec) -> Message {
    let axis = spec.axis();
    if axis.x == 0.0 && axis.y == 0.0 {
        // axis is +z or -z
        let angle = spec.angle() * axis.z.signum();
        if msg.theta == 0.0 || msg.theta == PI {
            return *msg;
        }
        return Message {
            psi1: reduce_angle(msg.psi1 + angle),
            ..*msg
        };
    }
    let m = spec.apply(moment_of(msg).vec());
    let rho = m.x.hypot(m.y);
    let theta = rho.atan2(m.z);
    let psi1 = if rho == 0.0 {
        msg.psi1
    } else {
        reduce_angle(msg.psi2 + m.y.atan2(m.x))
    };
    Message {
        psi1,
        psi2: msg.psi2,
        theta,
    }
}

/// Advances both phases by `delta` (free flight); the moment is unchanged.
pub fn precess(msg: &Message, delta: f64) -> Message {
    Message {
        psi1: reduce_angle(msg.psi1 + delta),
        psi2: reduce_angle(msg.psi2 + delta),
        theta: msg.theta,
    }
}
