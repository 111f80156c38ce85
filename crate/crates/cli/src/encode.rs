//! JSON encoding that keeps non-finite floats.
//!
//! `serde_json` writes `inf` and `NaN` as `null`, which would not read back.
//! Values pass through `serde_value` instead, where floats stay intact, and
//! non-finite ones become the strings below.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_value::Value;

pub const POS_INF: &str = "Infinity";
pub const NEG_INF: &str = "-Infinity";
pub const NAN: &str = "NaN";

pub fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    let value = serde_value::to_value(v).map_err(|e| e.to_string())?;
    let json = to_json_value(value)?;
    serde_json::to_string_pretty(&json).map_err(|e| e.to_string())
}

pub fn from_json<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    let json: serde_json::Value = serde_json::from_str(s).map_err(|e| e.to_string())?;
    T::deserialize(serde_value::ValueDeserializer::<serde_value::DeserializerError>::new(from_json_value(json)))
        .map_err(|e| e.to_string())
}

fn float(f: f64) -> serde_json::Value {
    match serde_json::Number::from_f64(f) {
        Some(n) => serde_json::Value::Number(n),
        None if f.is_nan() => NAN.into(),
        None if f > 0.0 => POS_INF.into(),
        None => NEG_INF.into(),
    }
}

fn to_json_value(v: Value) -> Result<serde_json::Value, String> {
    use serde_json::Value as J;
    Ok(match v {
        Value::Bool(b) => J::Bool(b),
        Value::U8(n) => n.into(),
        Value::U16(n) => n.into(),
        Value::U32(n) => n.into(),
        Value::U64(n) => n.into(),
        Value::I8(n) => n.into(),
        Value::I16(n) => n.into(),
        Value::I32(n) => n.into(),
        Value::I64(n) => n.into(),
        Value::F32(f) => float(f as f64),
        Value::F64(f) => float(f),
        Value::Char(c) => J::String(c.to_string()),
        Value::String(s) => J::String(s),
        Value::Unit | Value::Option(None) => J::Null,
        Value::Option(Some(b)) | Value::Newtype(b) => to_json_value(*b)?,
        Value::Seq(items) => J::Array(items.into_iter().map(to_json_value).collect::<Result<_, _>>()?),
        Value::Map(m) => {
            let mut out = serde_json::Map::new();
            for (k, v) in m {
                let key = match k {
                    Value::String(s) => s,
                    other => return Err(format!("non-string map key {other:?}")),
                };
                out.insert(key, to_json_value(v)?);
            }
            J::Object(out)
        }
        Value::Bytes(b) => J::Array(b.into_iter().map(J::from).collect()),
    })
}

fn from_json_value(j: serde_json::Value) -> Value {
    use serde_json::Value as J;
    match j {
        J::Null => Value::Unit,
        J::Bool(b) => Value::Bool(b),
        J::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => Value::U64(u),
            (None, Some(i)) => Value::I64(i),
            _ => Value::F64(n.as_f64().unwrap_or(f64::NAN)),
        },
        J::String(s) => match s.as_str() {
            POS_INF => Value::F64(f64::INFINITY),
            NEG_INF => Value::F64(f64::NEG_INFINITY),
            NAN => Value::F64(f64::NAN),
            _ => Value::String(s),
        },
        J::Array(a) => Value::Seq(a.into_iter().map(from_json_value).collect()),
        J::Object(o) => Value::Map(o.into_iter().map(|(k, v)| (Value::String(k), from_json_value(v))).collect::<BTreeMap<_, _>>()),
    }
}
