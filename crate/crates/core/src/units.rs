//! Physical quantities in config files carry explicit unit suffixes
//! (`"532nm"`, `"25cm"`, `"50us"`, `"2mrad"`). Values are stored in SI base
//! units and written back as `"<value><base unit>"` so that a parsed config
//! serializes and re-parses to the identical value.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Time,
    Angle,
}

impl Dimension {
    fn base_suffix(self) -> &'static str {
        match self {
            Dimension::Length => "m",
            Dimension::Time => "s",
            Dimension::Angle => "rad",
        }
    }

    fn scale(self, suffix: &str) -> Option<f64> {
        let s = match self {
            Dimension::Length => match suffix {
                "km" => 1e3,
                "m" => 1.0,
                "cm" => 1e-2,
                "mm" => 1e-3,
                "um" | "µm" | "μm" => 1e-6,
                "nm" => 1e-9,
                _ => return None,
            },
            Dimension::Time => match suffix {
                "s" => 1.0,
                "ms" => 1e-3,
                "us" | "µs" | "μs" => 1e-6,
                "ns" => 1e-9,
                "ps" => 1e-12,
                _ => return None,
            },
            Dimension::Angle => match suffix {
                "rad" => 1.0,
                "mrad" => 1e-3,
                "urad" | "µrad" | "μrad" => 1e-6,
                "deg" => std::f64::consts::PI / 180.0,
                _ => return None,
            },
        };
        Some(s)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::Length => "length",
            Dimension::Time => "duration",
            Dimension::Angle => "angle",
        })
    }
}

/// Parses `"<number><unit>"` into base units.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let t = text.trim();
    let split = t
        .char_indices()
        .find(|&(i, c)| {
            c.is_alphabetic() && !(matches!(c, 'e' | 'E') && followed_by_exponent(&t[i..]))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| format!("`{t}` has no unit suffix (expected a {dim})"))?;
    let (num, unit) = t.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("`{t}`: `{}` is not a number", num.trim()))?;
    let scale = dim
        .scale(unit.trim())
        .ok_or_else(|| format!("`{t}`: unknown {dim} unit `{}`", unit.trim()))?;
    if !value.is_finite() {
        return Err(format!("`{t}` is not finite"));
    }
    Ok(value * scale)
}

fn followed_by_exponent(rest: &str) -> bool {
    let mut chars = rest.chars().skip(1);
    match chars.next() {
        Some(c) if c.is_ascii_digit() => true,
        Some('+') | Some('-') => chars.next().is_some_and(|c| c.is_ascii_digit()),
        _ => false,
    }
}

pub fn format_quantity(value: f64, dim: Dimension) -> String {
    format!("{value}{}", dim.base_suffix())
}

macro_rules! unit_serde {
    ($name:ident, $dim:expr) => {
        pub mod $name {
            use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

            pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&crate::units::format_quantity(*v, $dim))
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
                let text = String::deserialize(d)?;
                crate::units::parse_quantity(&text, $dim).map_err(D::Error::custom)
            }

            pub mod pair {
                use serde::{de::Error as _, Deserialize, Deserializer, Serializer};
                use serde::ser::SerializeTuple;

                pub fn serialize<S: Serializer>(v: &[f64; 2], s: S) -> Result<S::Ok, S::Error> {
                    let mut t = s.serialize_tuple(2)?;
                    t.serialize_element(&crate::units::format_quantity(v[0], $dim))?;
                    t.serialize_element(&crate::units::format_quantity(v[1], $dim))?;
                    t.end()
                }

                pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 2], D::Error> {
                    let [a, b] = <[String; 2]>::deserialize(d)?;
                    let a = crate::units::parse_quantity(&a, $dim).map_err(D::Error::custom)?;
                    let b = crate::units::parse_quantity(&b, $dim).map_err(D::Error::custom)?;
                    Ok([a, b])
                }
            }
        }
    };
}

unit_serde!(length, crate::units::Dimension::Length);
unit_serde!(duration, crate::units::Dimension::Time);
unit_serde!(angle, crate::units::Dimension::Angle);
