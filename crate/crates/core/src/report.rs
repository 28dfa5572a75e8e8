//! Serialization helpers shared by every JSON record the crate emits.

use num_rational::BigRational;
use serde::ser::{SerializeSeq, Serializer};

/// Rationals are written as exact `"p/q"` strings.
pub fn ser_rational<S: Serializer>(q: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", q.numer(), q.denom()))
}

pub fn ser_rational_pairs<S: Serializer>(v: &[(u64, BigRational)], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for (m, q) in v {
        seq.serialize_element(&(m, format!("{}/{}", q.numer(), q.denom())))?;
    }
    seq.end()
}
