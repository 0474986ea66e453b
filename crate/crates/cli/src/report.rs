//! Result formatting: terminal text and the JSON result records.

use std::io::IsTerminal;

use serde::{Deserialize, Serialize};
use squall::checkers::Extended;
use squall::numeric::rational_to_decimal;
use squall::{Rational, Value};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub states: usize,
    pub transitions: usize,
    pub iterations: usize,
    pub build_ms: f64,
    pub check_ms: f64,
}

/// One checked property. `value` is a JSON number in float mode and a
/// `p/q` string in exact mode; infinite values are the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub property: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bit: Option<bool>,
    pub exact: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scheduler: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
    pub stats: Stats,
}

impl ResultRecord {
    /// The value or bit as a short, run-independent string.
    pub fn result_text(&self) -> String {
        if let Some(e) = &self.error {
            return e.lines().next().unwrap_or_default().to_string();
        }
        match (&self.bit, &self.value) {
            (Some(b), _) => b.to_string(),
            (None, Some(serde_json::Value::String(s))) => s.clone(),
            (None, Some(v)) => v.to_string(),
            (None, None) => String::new(),
        }
    }

    /// The value as a float, when there is one.
    pub fn approx(&self) -> Option<f64> {
        match self.value.as_ref()? {
            serde_json::Value::Number(n) => n.as_f64(),
            serde_json::Value::String(s) if s == "inf" => Some(f64::INFINITY),
            serde_json::Value::String(s) => squall::numeric::parse_rational(s).ok().map(|q| squall::numeric::rational_to_f64(&q)),
            _ => None,
        }
    }
}

pub fn json_value<V: Value>(v: &Extended<V>) -> serde_json::Value {
    match v {
        Extended::Finite(x) if V::EXACT => serde_json::Value::String(x.canonical_text()),
        Extended::Finite(x) => serde_json::Number::from_f64(x.as_float()).map_or(serde_json::Value::Null, serde_json::Value::Number),
        Extended::Infinity => serde_json::Value::String("inf".into()),
        Extended::Undefined => serde_json::Value::String("undefined".into()),
    }
}

/// `x` with 7 significant digits.
pub fn approx(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-4..7).contains(&magnitude) {
        return format!("{x:.6e}");
    }
    let decimals = (6 - magnitude).max(0) as usize;
    let text = format!("{x:.decimals$}");
    if text.contains('.') {
        text.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        text
    }
}

/// Human-readable value: `1/6 ≈ 0.1666667`, `1/4 = 0.25`, or a float.
pub fn display_value<V: Value>(v: &Extended<V>) -> String {
    match v {
        Extended::Finite(x) if V::EXACT => {
            let q: Rational = x.to_rational().expect("exact values are rational");
            if q.is_integer() {
                q.to_integer().to_string()
            } else {
                match rational_to_decimal(&q) {
                    Some(d) if d.len() <= 20 => format!("{} = {d}", x.canonical_text()),
                    _ => format!("{} ≈ {}", x.canonical_text(), approx(x.as_float())),
                }
            }
        }
        Extended::Finite(x) => x.canonical_text(),
        Extended::Infinity => "inf".into(),
        Extended::Undefined => "undefined".into(),
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Palette {
    enabled: bool,
}

impl Palette {
    /// Colors follow `SQUALL_COLOR` (`always`, `never`, `auto`), defaulting
    /// to whether stdout is a terminal.
    pub fn from_env() -> Self {
        let enabled = match std::env::var("SQUALL_COLOR").as_deref() {
            Ok("always") | Ok("1") => true,
            Ok("never") | Ok("0") => false,
            _ => std::io::stdout().is_terminal(),
        };
        Self { enabled }
    }

    fn paint(self, code: &str, text: &str) -> String {
        if self.enabled {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }

    pub fn good(self, text: &str) -> String {
        self.paint("32", text)
    }

    pub fn bad(self, text: &str) -> String {
        self.paint("31", text)
    }

    pub fn strong(self, text: &str) -> String {
        self.paint("1", text)
    }
}
