//! Serializes `Array1<f64>` as a plain JSON array.

use ndarray::Array1;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub fn serialize<S: Serializer>(a: &Array1<f64>, s: S) -> Result<S::Ok, S::Error> {
    a.as_slice().expect("standard layout").serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array1<f64>, D::Error> {
    Vec::<f64>::deserialize(d).map(Array1::from)
}

pub mod option {
    use super::*;

    pub fn serialize<S: Serializer>(a: &Option<Array1<f64>>, s: S) -> Result<S::Ok, S::Error> {
        a.as_ref().map(|v| v.to_vec()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Array1<f64>>, D::Error> {
        Option::<Vec<f64>>::deserialize(d).map(|v| v.map(Array1::from))
    }
}
