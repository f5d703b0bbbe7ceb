use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use super::OpticsError;

/// Transverse plane for astigmatic elements (off-axis curved mirrors).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Plane {
    Tangential,
    Sagittal,
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Plane::Tangential => f.write_str("tangential"),
            Plane::Sagittal => f.write_str("sagittal"),
        }
    }
}

/// 2x2 ray-transfer matrix acting on (height, angle).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RayMatrix {
    pub const IDENTITY: RayMatrix = RayMatrix {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Half trace `(a + d) / 2`; the cavity is stable iff its magnitude is below one.
    pub fn half_trace(&self) -> f64 {
        0.5 * (self.a + self.d)
    }

    /// Matrix of `self` followed by `next` along the beam path.
    pub fn then(&self, next: &RayMatrix) -> RayMatrix {
        *next * *self
    }

    /// Ordered product of a chain of elements, first element acting first.
    pub fn chain<'a>(
        elements: impl IntoIterator<Item = &'a OpticalElement>,
        plane: Plane,
    ) -> Result<RayMatrix, OpticsError> {
        elements
            .into_iter()
            .try_fold(RayMatrix::IDENTITY, |acc, el| {
                Ok(acc.then(&el.ray_matrix(plane)?))
            })
    }
}

impl Mul for RayMatrix {
    type Output = RayMatrix;

    fn mul(self, rhs: RayMatrix) -> RayMatrix {
        RayMatrix {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }
}

/// Catalog of cavity elements. Lengths in metres, angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OpticalElement {
    FreeSpace {
        d: f64,
    },
    ThinLens {
        f: f64,
    },
    CurvedMirror {
        r: f64,
        #[serde(default)]
        incidence_angle: f64,
    },
    Slab {
        d: f64,
        n: f64,
    },
}

impl OpticalElement {
    pub fn validate(&self) -> Result<(), OpticsError> {
        let bad = |msg: String| Err(OpticsError::InvalidElement(msg));
        match *self {
            OpticalElement::FreeSpace { d } if !(d >= 0.0 && d.is_finite()) => {
                bad(format!("free space length must be >= 0, got {d}"))
            }
            OpticalElement::ThinLens { f } if f == 0.0 || !f.is_finite() => bad(format!(
                "thin lens focal length must be finite and nonzero, got {f}"
            )),
            OpticalElement::CurvedMirror { r, .. } if r == 0.0 || !r.is_finite() => {
                bad(format!("mirror radius must be finite and nonzero, got {r}"))
            }
            OpticalElement::CurvedMirror {
                incidence_angle, ..
            } if !(incidence_angle.abs() < std::f64::consts::FRAC_PI_2) => bad(format!(
                "incidence angle must be below pi/2, got {incidence_angle}"
            )),
            OpticalElement::Slab { d, n } if !(d >= 0.0 && d.is_finite()) || !(n >= 1.0) => bad(
                format!("slab needs d >= 0 and n >= 1, got d = {d}, n = {n}"),
            ),
            _ => Ok(()),
        }
    }

    /// Ray matrix in the requested transverse plane.
    ///
    /// A curved mirror at incidence angle θ acts as a lens with
    /// `f = R cos θ / 2` tangentially and `f = R / (2 cos θ)` sagittally.
    pub fn ray_matrix(&self, plane: Plane) -> Result<RayMatrix, OpticsError> {
        self.validate()?;
        let m = match *self {
            OpticalElement::FreeSpace { d } => RayMatrix::new(1.0, d, 0.0, 1.0),
            OpticalElement::ThinLens { f } => lens(f),
            OpticalElement::CurvedMirror { r, incidence_angle } => {
                let cos = incidence_angle.cos();
                let f = match plane {
                    Plane::Tangential => r * cos / 2.0,
                    Plane::Sagittal => r / (2.0 * cos),
                };
                lens(f)
            }
            OpticalElement::Slab { d, n } => RayMatrix::new(1.0, d / n, 0.0, 1.0),
        };
        Ok(m)
    }

    /// Geometric path length contributed to the round trip.
    pub fn length(&self) -> f64 {
        match *self {
            OpticalElement::FreeSpace { d } | OpticalElement::Slab { d, .. } => d,
            _ => 0.0,
        }
    }
}

fn lens(f: f64) -> RayMatrix {
    RayMatrix::new(1.0, 0.0, -1.0 / f, 1.0)
}
