//! Scalar abstraction shared by every numerical module.
//!
//! All physics is written against [`Real`], which is implemented for `f32`
//! and `f64`. Tolerances throughout the crate are stated for `f64` and are
//! widened for coarser types through [`scaled_tol`].

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar usable by the dressed-system, response and pulse modules.
pub trait Real:
    RealField
    + Copy
    + FromPrimitive
    + ToPrimitive
    + Serialize
    + DeserializeOwned
    + Default
    + Display
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough literal conversion. Panics only for non-finite casts
    /// into types that cannot represent them, which never happens for the
    /// literals used in this crate.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn machine_eps() -> Self;
}

impl Real for f32 {
    fn machine_eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn machine_eps() -> Self {
        f64::EPSILON
    }
}

/// Complex amplitude over the working scalar.
pub type Cplx<T> = Complex<T>;

/// Converts a tolerance stated for `f64` into one appropriate for `T`:
/// unchanged for `f64`, scaled by the ratio of machine epsilons otherwise.
pub fn scaled_tol<T: Real>(tol_f64: f64) -> T {
    let ratio = T::machine_eps().as_f64() / f64::EPSILON;
    T::lit(tol_f64 * ratio.max(1.0))
}

#[inline]
pub(crate) fn cplx<T: Real>(re: T, im: T) -> Cplx<T> {
    Complex::new(re, im)
}

/// Serde adapter writing complex vectors as `[re, im]` pairs.
pub mod complex_pairs {
    use super::{Cplx, Real};
    use num_complex::Complex;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<T: Real, S: Serializer>(v: &[Cplx<T>], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[T; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<Vec<Cplx<T>>, D::Error> {
        let pairs: Vec<[T; 2]> = Vec::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| Complex::new(re, im)).collect())
    }
}
