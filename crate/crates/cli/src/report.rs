//! JSON and plain-text rendering of results.
//!
//! Floating-point values are written as decimal strings with 17 significant
//! digits, which round-trip every `f64` and keep output byte-stable.

use serde_json::{json, Map, Value};

pub fn num(v: f64) -> Value {
    Value::String(fmt_f64(v))
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// 15 significant digits, for oracle output.
pub fn fmt_short(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.14e}")
    } else {
        fmt_f64(v)
    }
}

/// Replaces every non-integer JSON number by its decimal string.
pub fn stringify_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => num(n.as_f64().expect("f64 number")),
        Value::Array(items) => Value::Array(items.into_iter().map(stringify_floats).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, stringify_floats(v))).collect()),
        other => other,
    }
}

/// One estimate: levels, mass, diagnostics and properties.
pub struct Estimate {
    pub input: String,
    /// `(value tuple, count)`; tuples have one entry in one dimension.
    pub levels: Vec<(Vec<f64>, u64)>,
    pub mass: Vec<f64>,
    pub diagnostics: Value,
    pub properties: Vec<(String, f64)>,
    pub certified: bool,
}

impl Estimate {
    pub fn to_json(&self) -> Value {
        let scalar = self.mass.len() == 1;
        let levels: Vec<Value> = self
            .levels
            .iter()
            .map(|(v, c)| {
                let value = if scalar { num(v[0]) } else { Value::Array(v.iter().map(|&x| num(x)).collect()) };
                json!([value, c])
            })
            .collect();
        let mass = if scalar { num(self.mass[0]) } else { Value::Array(self.mass.iter().map(|&m| num(m)).collect()) };
        let mut props = Map::new();
        for (k, v) in &self.properties {
            props.insert(k.clone(), num(*v));
        }
        json!({
            "levels": levels,
            "mass": mass,
            "diagnostics": stringify_floats(self.diagnostics.clone()),
            "properties": props,
        })
    }

    pub fn to_plain(&self, with_input: bool) -> String {
        let mut out = String::new();
        if with_input {
            out.push_str(&format!("input {}\n", self.input));
        }
        for (v, c) in &self.levels {
            let vals: Vec<String> = v.iter().map(|&x| fmt_f64(x)).collect();
            out.push_str(&format!("level {} count {c}\n", vals.join(" ")));
        }
        let mass: Vec<String> = self.mass.iter().map(|&m| fmt_f64(m)).collect();
        out.push_str(&format!("mass {}\n", mass.join(" ")));
        for (k, v) in &self.properties {
            out.push_str(&format!("{k} {}\n", fmt_f64(*v)));
        }
        let delta = self.diagnostics.get("delta_total").and_then(Value::as_f64).unwrap_or(f64::NAN);
        out.push_str(&format!("delta_total {}\n", fmt_f64(delta)));
        out.push_str(&format!("certified {}\n", self.certified));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_become_strings() {
        let v = stringify_floats(json!({"a": 1.5, "b": 3, "c": [0.25, true]}));
        assert_eq!(v, json!({"a": "1.5000000000000000e0", "b": 3, "c": ["2.5000000000000000e-1", true]}));
    }

    #[test]
    fn round_trip_exact() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 123456.789] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
    }
}
