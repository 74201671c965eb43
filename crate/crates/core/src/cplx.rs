//! Wire format for complex numbers: a two-element `[re, im]` array.

use num_complex::Complex64 as C64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn serialize<S: Serializer>(c: &C64, s: S) -> Result<S::Ok, S::Error> {
    [c.re, c.im].serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
    let v = Vec::<f64>::deserialize(d)?;
    if v.len() != 2 {
        return Err(D::Error::custom("complex needs [re, im]"));
    }
    Ok(C64::new(v[0], v[1]))
}

/// `#[serde(with = "crate::cplx::vec")]` for `Vec<C64>` fields.
pub mod vec {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(transparent)]
    struct Wire(#[serde(with = "super")] C64);

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&c| Wire(c)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        Ok(Vec::<Wire>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}
