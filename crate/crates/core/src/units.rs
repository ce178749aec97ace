//! Quantity strings with unit suffixes ("100fs", "75MHz", "0.4um").
//!
//! Bare numbers are already SI. Frequencies given in Hz are turned into
//! angular frequencies (×2π); a bare number or `rad/s` is taken as angular.

use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Time,
    Length,
    AngularFrequency,
    Irradiance,
    Dimensionless,
}

impl Dimension {
    fn name(self) -> &'static str {
        match self {
            Dimension::Time => "time",
            Dimension::Length => "length",
            Dimension::AngularFrequency => "frequency",
            Dimension::Irradiance => "irradiance",
            Dimension::Dimensionless => "dimensionless number",
        }
    }

    fn suffixes(self) -> &'static [(&'static str, f64)] {
        match self {
            Dimension::Time => &[("fs", 1e-15), ("ps", 1e-12), ("ns", 1e-9), ("us", 1e-6), ("µs", 1e-6), ("ms", 1e-3), ("s", 1.0)],
            Dimension::Length => &[("nm", 1e-9), ("um", 1e-6), ("µm", 1e-6), ("mm", 1e-3), ("cm", 1e-2), ("m", 1.0)],
            Dimension::AngularFrequency => &[
                ("rad/s", 1.0),
                ("THz", 2.0 * PI * 1e12),
                ("GHz", 2.0 * PI * 1e9),
                ("MHz", 2.0 * PI * 1e6),
                ("kHz", 2.0 * PI * 1e3),
                ("Hz", 2.0 * PI),
            ],
            Dimension::Irradiance => &[
                ("GW/cm2", 1e13),
                ("MW/cm2", 1e10),
                ("kW/cm2", 1e7),
                ("W/cm2", 1e4),
                ("W/m2", 1.0),
            ],
            Dimension::Dimensionless => &[],
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("cannot read {input:?} as a {}: {reason}", dimension.name())]
pub struct UnitError {
    pub input: String,
    pub dimension: Dimension,
    pub reason: String,
}

/// Parses `text` as a quantity of `dimension` and returns its SI value.
pub fn parse_quantity(text: &str, dimension: Dimension) -> Result<f64, UnitError> {
    let err = |reason: String| UnitError { input: text.to_string(), dimension, reason };
    let t = text.trim();
    if let Ok(v) = t.parse::<f64>() {
        return finite(v).ok_or_else(|| err("not finite".into()));
    }
    for (suffix, factor) in dimension.suffixes() {
        if let Some(num) = t.strip_suffix(suffix) {
            let num = num.trim_end();
            let v: f64 = num.parse().map_err(|_| err(format!("{num:?} is not a number")))?;
            return finite(v * factor).ok_or_else(|| err("not finite".into()));
        }
    }
    let known: Vec<&str> = dimension.suffixes().iter().map(|p| p.0).collect();
    if known.is_empty() {
        Err(err("expected a plain number".into()))
    } else {
        Err(err(format!("unknown unit, expected one of {}", known.join(", "))))
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}
