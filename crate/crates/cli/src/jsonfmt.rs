//! JSON value helpers enforcing the output conventions.

use serde_json::{Number, Value};
use shapestore_core::Rat;

/// Floats are emitted with 17 significant digits (enough for exact f64
/// round-trips); non-finite values become `null`.
pub fn f64_json(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_string_unchecked(format!("{x:.16e}")))
    } else {
        Value::Null
    }
}

pub fn opt_f64_json(x: Option<f64>) -> Value {
    x.map_or(Value::Null, f64_json)
}

/// Exact rationals are emitted as `"p/q"` strings, never as floats.
pub fn rat_json(r: &Rat) -> Value {
    Value::String(r.to_string())
}

pub fn rats_json(rs: &[Rat]) -> Value {
    Value::Array(rs.iter().map(rat_json).collect())
}

pub fn opt_rat_json(r: Option<&Rat>) -> Value {
    r.map_or(Value::Null, rat_json)
}

/// 17-significant-digit rendering for CSV cells.
pub fn f64_text(x: f64) -> String {
    format!("{x:.16e}")
}
