//! Axis-aligned boxes in normalized image coordinates and the overlap math
//! every matcher is built on.
//!
//! The kernel is generic over the float type so detector post-processing can
//! run in `f32` while corpora and metrics use `f64`. The crate root exposes
//! the concrete aliases.

use std::fmt;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Scalar used by the geometry kernel.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static {}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoxError {
    #[error("bbox has non-finite coordinate")]
    NonFinite,
    #[error("bbox coordinate outside [0, 1]: {0:?}")]
    OutOfRange([f64; 4]),
    #[error("bbox is degenerate (need x1 < x2 and y1 < y2): {0:?}")]
    Degenerate([f64; 4]),
}

/// A box `[x1, y1, x2, y2]` with x growing right and y growing down, all
/// coordinates in `[0, 1]` and strictly positive area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    x1: T,
    y1: T,
    x2: T,
    y2: T,
}

impl<T: Scalar> Rect<T> {
    pub fn new(x1: T, y1: T, x2: T, y2: T) -> Result<Self, BoxError> {
        let raw = [x1, y1, x2, y2].map(|v| v.to_f64().unwrap_or(f64::NAN));
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(BoxError::NonFinite);
        }
        if raw.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(BoxError::OutOfRange(raw));
        }
        if !(x1 < x2 && y1 < y2) {
            return Err(BoxError::Degenerate(raw));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn from_array(a: [T; 4]) -> Result<Self, BoxError> {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Builds a box from pixel edges on a `width` x `height` raster.
    /// `right`/`bottom` are exclusive.
    pub fn from_pixels(left: u32, top: u32, right: u32, bottom: u32, width: u32, height: u32) -> Result<Self, BoxError> {
        let w = T::from_u32(width).unwrap();
        let h = T::from_u32(height).unwrap();
        let c = |v: u32, d: T| T::from_u32(v).unwrap() / d;
        Self::new(c(left, w), c(top, h), c(right, w), c(bottom, h))
    }

    pub fn x1(&self) -> T {
        self.x1
    }
    pub fn y1(&self) -> T {
        self.y1
    }
    pub fn x2(&self) -> T {
        self.x2
    }
    pub fn y2(&self) -> T {
        self.y2
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn width(&self) -> T {
        self.x2 - self.x1
    }

    pub fn height(&self) -> T {
        self.y2 - self.y1
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn center(&self) -> (T, T) {
        let two = T::one() + T::one();
        ((self.x1 + self.x2) / two, (self.y1 + self.y2) / two)
    }

    pub fn intersection_area(&self, other: &Self) -> T {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= T::zero() || h <= T::zero() {
            T::zero()
        } else {
            w * h
        }
    }

    /// Shifts the box, failing if it would leave the unit square.
    pub fn translate(&self, dx: T, dy: T) -> Result<Self, BoxError> {
        Self::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }

    pub fn cast<U: Scalar>(&self) -> Result<Rect<U>, BoxError> {
        let c = |v: T| U::from_f64(v.to_f64().unwrap()).unwrap();
        Rect::new(c(self.x1), c(self.y1), c(self.x2), c(self.y2))
    }
}

/// Intersection over union. Symmetric, `1` for identical boxes, `0` for
/// disjoint or edge-touching ones.
pub fn iou<T: Scalar>(a: &Rect<T>, b: &Rect<T>) -> T {
    let inter = a.intersection_area(b);
    if inter <= T::zero() {
        return T::zero();
    }
    let union = a.area() + b.area() - inter;
    (inter / union).min(T::one())
}

/// Tolerance-aware "same box" check used where the data model demands
/// IoU = 1 (ground-truth cross references, layout graphs).
pub fn same_box<T: Scalar>(a: &Rect<T>, b: &Rect<T>) -> bool {
    let eps = T::from_f64(1e-9).unwrap();
    a.to_array().iter().zip(b.to_array()).all(|(&p, q)| (p - q).abs() <= eps)
}

pub fn median<T: Scalar>(values: &mut [T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    let two = T::one() + T::one();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / two })
}

impl<T: Scalar + Serialize> Serialize for Rect<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for Rect<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let a = <[T; 4]>::deserialize(d)?;
        Rect::from_array(a).map_err(serde::de::Error::custom)
    }
}

impl<T: Scalar> fmt::Display for Rect<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.x1, self.y1, self.x2, self.y2)
    }
}
