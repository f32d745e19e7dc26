//! Term-sheet text format.
//!
//! One `key = value` pair per line; `#` starts a comment and blank lines are
//! ignored. Dates are ISO `YYYY-MM-DD`, windows are `start..end` (both ends
//! inclusive). Scalar keys:
//!
//! ```text
//! face = 100
//! redemption = 100          # optional, defaults to face
//! coupon_rate = 0.08
//! coupon_frequency = 2      # or: coupon_dates = 2009-07-06, 2010-01-06, ...
//! recovery = 0.4
//! issue_date = 2009-01-06
//! maturity_date = 2014-01-06
//! day_count = ACT/365       # optional; the only convention supported
//! ```
//!
//! Schedules use dotted keys with a positive index; entries are ordered by
//! index and each needs all of its fields:
//!
//! ```text
//! conversion.1.window = 2009-01-06..2014-01-06
//! conversion.1.ratio = 1
//! call.1.window = 2011-01-06..2014-01-06
//! call.1.price = 110
//! put.1.date = 2012-01-06
//! put.1.price = 105
//! ```
//!
//! `coupon_frequency` generates dates backward from maturity (12 / frequency
//! months apart). The serializer always writes explicit `coupon_dates`, so
//! parse(serialize(t)) == t for any valid `t`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::instrument::{
    coupon_schedule, CallPeriod, ConversionPeriod, ConvertibleTerms, Date, PutDate, Window,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {field}: {message}")]
    Field {
        line: usize,
        field: String,
        message: String,
    },
    #[error("{field}: {message}")]
    Missing { field: String, message: String },
    #[error("term sheet is inconsistent: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

fn field_error(line: usize, field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_number(key: &str, e: &Entry) -> Result<f64, ConfigError> {
    let v: f64 = e
        .value
        .parse()
        .map_err(|_| field_error(e.line, key, format!("expected a number, got '{}'", e.value)))?;
    if !v.is_finite() {
        return Err(field_error(e.line, key, "number must be finite"));
    }
    Ok(v)
}

fn parse_date(key: &str, line: usize, text: &str) -> Result<Date, ConfigError> {
    text.trim().parse().map_err(|_| {
        field_error(
            line,
            key,
            format!("expected a YYYY-MM-DD date, got '{}'", text.trim()),
        )
    })
}

fn parse_window(key: &str, e: &Entry) -> Result<Window, ConfigError> {
    let (a, b) = e.value.split_once("..").ok_or_else(|| {
        field_error(
            e.line,
            key,
            format!("expected start..end, got '{}'", e.value),
        )
    })?;
    Ok(Window::new(
        parse_date(key, e.line, a)?,
        parse_date(key, e.line, b)?,
    ))
}

/// Fields of one indexed schedule entry, keyed by field name.
type Indexed = BTreeMap<u32, HashMap<String, (String, Entry)>>;

fn take_field<'a>(
    group: &str,
    index: u32,
    fields: &'a HashMap<String, (String, Entry)>,
    name: &str,
) -> Result<(&'a str, &'a Entry), ConfigError> {
    fields
        .get(name)
        .map(|(k, e)| (k.as_str(), e))
        .ok_or_else(|| ConfigError::Missing {
            field: format!("{group}.{index}.{name}"),
            message: "required field is missing".into(),
        })
}

/// Parses a term sheet. Errors name the offending line and key.
pub fn parse_terms(text: &str) -> Result<ConvertibleTerms, ConfigError> {
    let mut scalars: HashMap<String, Entry> = HashMap::new();
    let mut groups: HashMap<&'static str, Indexed> = HashMap::new();

    for (number, raw) in text.lines().enumerate() {
        let line = number + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| field_error(line, content, "expected 'key = value'"))?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(field_error(line, key, "empty value"));
        }
        let entry = Entry {
            line,
            value: value.to_string(),
        };
        let parts: Vec<&str> = key.split('.').collect();
        if parts.len() == 3 {
            let group = match parts[0] {
                "conversion" => "conversion",
                "call" => "call",
                "put" => "put",
                _ => return Err(field_error(line, key, "unknown schedule")),
            };
            let allowed: &[&str] = match group {
                "put" => &["date", "price"],
                "call" => &["window", "price"],
                _ => &["window", "ratio"],
            };
            if !allowed.contains(&parts[2]) {
                return Err(field_error(line, key, "unknown field"));
            }
            let index: u32 = parts[1]
                .parse()
                .ok()
                .filter(|&i| i > 0)
                .ok_or_else(|| field_error(line, key, "index must be a positive integer"))?;
            let fields = groups.entry(group).or_default().entry(index).or_default();
            if fields
                .insert(parts[2].to_string(), (key.to_string(), entry))
                .is_some()
            {
                return Err(field_error(line, key, "duplicate key"));
            }
            continue;
        }
        const SCALARS: [&str; 9] = [
            "face",
            "redemption",
            "coupon_rate",
            "coupon_frequency",
            "coupon_dates",
            "recovery",
            "issue_date",
            "maturity_date",
            "day_count",
        ];
        if !SCALARS.contains(&key) {
            return Err(field_error(line, key, "unknown key"));
        }
        if scalars.insert(key.to_string(), entry).is_some() {
            return Err(field_error(line, key, "duplicate key"));
        }
    }

    let required = |key: &str| {
        scalars.get(key).ok_or_else(|| ConfigError::Missing {
            field: key.to_string(),
            message: "required key is missing".into(),
        })
    };
    let number = |key: &str| required(key).and_then(|e| parse_number(key, e));
    let date = |key: &str| required(key).and_then(|e| parse_date(key, e.line, &e.value));

    if let Some(e) = scalars.get("day_count") {
        let normalized = e.value.to_ascii_uppercase().replace(' ', "");
        if !matches!(normalized.as_str(), "ACT/365" | "ACT/365F" | "ACT/365FIXED") {
            return Err(field_error(
                e.line,
                "day_count",
                "only ACT/365 is supported",
            ));
        }
    }

    let face = number("face")?;
    let redemption = match scalars.get("redemption") {
        Some(e) => parse_number("redemption", e)?,
        None => face,
    };
    let issue_date = date("issue_date")?;
    let maturity_date = date("maturity_date")?;
    let coupon_dates = match (scalars.get("coupon_dates"), scalars.get("coupon_frequency")) {
        (Some(e), None) => e
            .value
            .split(',')
            .map(|d| parse_date("coupon_dates", e.line, d))
            .collect::<Result<Vec<_>, _>>()?,
        (None, Some(e)) => {
            let months = match e.value.as_str() {
                "1" => 12,
                "2" => 6,
                "4" => 3,
                "12" => 1,
                _ => {
                    return Err(field_error(
                        e.line,
                        "coupon_frequency",
                        "expected 1, 2, 4 or 12 payments per year",
                    ))
                }
            };
            coupon_schedule(issue_date, maturity_date, months)
        }
        (None, None) => Vec::new(),
        (Some(_), Some(e)) => {
            return Err(field_error(
                e.line,
                "coupon_frequency",
                "give either coupon_dates or coupon_frequency, not both",
            ))
        }
    };
    let coupon_rate = match scalars.get("coupon_rate") {
        Some(e) => parse_number("coupon_rate", e)?,
        None if coupon_dates.is_empty() => 0.0,
        None => number("coupon_rate")?,
    };

    let mut conversion = Vec::new();
    for (&i, fields) in groups.get("conversion").into_iter().flatten() {
        let (k, w) = take_field("conversion", i, fields, "window")?;
        let window = parse_window(k, w)?;
        let (k, r) = take_field("conversion", i, fields, "ratio")?;
        conversion.push(ConversionPeriod {
            window,
            ratio: parse_number(k, r)?,
        });
    }
    let mut calls = Vec::new();
    for (&i, fields) in groups.get("call").into_iter().flatten() {
        let (k, w) = take_field("call", i, fields, "window")?;
        let window = parse_window(k, w)?;
        let (k, p) = take_field("call", i, fields, "price")?;
        calls.push(CallPeriod {
            window,
            price: parse_number(k, p)?,
        });
    }
    let mut puts = Vec::new();
    for (&i, fields) in groups.get("put").into_iter().flatten() {
        let (k, d) = take_field("put", i, fields, "date")?;
        let date = parse_date(k, d.line, &d.value)?;
        let (k, p) = take_field("put", i, fields, "price")?;
        puts.push(PutDate {
            date,
            price: parse_number(k, p)?,
        });
    }

    let terms = ConvertibleTerms {
        face,
        redemption,
        coupon_rate,
        coupon_dates,
        conversion,
        calls,
        puts,
        recovery: number("recovery")?,
        issue_date,
        maturity_date,
    };
    terms
        .validate()
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(terms)
}

/// Writes `terms` in the format read by [`parse_terms`]. Numbers use the
/// shortest decimal form that reads back to the same value.
pub fn serialize_terms(terms: &ConvertibleTerms) -> String {
    let mut out = String::new();
    let mut put = |key: &str, value: String| {
        let _ = writeln!(out, "{key} = {value}");
    };
    put("face", terms.face.to_string());
    put("redemption", terms.redemption.to_string());
    put("coupon_rate", terms.coupon_rate.to_string());
    if !terms.coupon_dates.is_empty() {
        let dates: Vec<String> = terms.coupon_dates.iter().map(Date::to_string).collect();
        put("coupon_dates", dates.join(", "));
    }
    put("recovery", terms.recovery.to_string());
    put("issue_date", terms.issue_date.to_string());
    put("maturity_date", terms.maturity_date.to_string());
    put("day_count", "ACT/365".into());
    let window = |w: &Window| format!("{}..{}", w.start, w.end);
    for (i, c) in terms.conversion.iter().enumerate() {
        put(&format!("conversion.{}.window", i + 1), window(&c.window));
        put(&format!("conversion.{}.ratio", i + 1), c.ratio.to_string());
    }
    for (i, c) in terms.calls.iter().enumerate() {
        put(&format!("call.{}.window", i + 1), window(&c.window));
        put(&format!("call.{}.price", i + 1), c.price.to_string());
    }
    for (i, p) in terms.puts.iter().enumerate() {
        put(&format!("put.{}.date", i + 1), p.date.to_string());
        put(&format!("put.{}.price", i + 1), p.price.to_string());
    }
    out
}
