//! Serialization helpers: every float in a payload carries 9 significant digits.

use serde::ser::{SerializeSeq, Serializer};

/// Rounds to 9 significant decimal digits. Non-finite values pass through.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

pub fn sig9<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig9(*x))
}

pub fn sig9_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&round_sig9(*x))?;
    }
    seq.end()
}

pub fn sig9_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(x) => s.serialize_some(&round_sig9(*x)),
        None => s.serialize_none(),
    }
}

pub fn sig9_points<S: Serializer>(pts: &[[f64; 2]], s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(pts.len()))?;
    for p in pts {
        seq.serialize_element(&[round_sig9(p[0]), round_sig9(p[1])])?;
    }
    seq.end()
}
