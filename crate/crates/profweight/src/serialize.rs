//! JSON serialization helpers with fixed float formatting.
//!
//! All artifacts (models, probe sets, reports) print floats with 17
//! significant digits in scientific notation, which round-trips every
//! finite f64 exactly. Parsing relies on serde_json's `float_roundtrip`
//! feature so the decimal-to-binary direction is exact as well.

use std::io;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// serde_json formatter that prints every f64 as `{:.16e}` (17 significant digits).
struct Sig17Formatter;

impl serde_json::ser::Formatter for Sig17Formatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.8e}")
    }
}

/// Serialize to a JSON string with 17-significant-digit floats.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17Formatter);
    value.serialize(&mut ser)?;
    // Sig17Formatter only ever writes ASCII.
    Ok(String::from_utf8(out).expect("JSON output is ASCII"))
}

pub fn write_json_file<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = to_json_string(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

/// Read a JSON artifact, mapping a missing file to an actionable error
/// that names the subcommand which produces it.
pub fn read_json_artifact<T: DeserializeOwned>(path: &Path, producer: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            Error::MissingArtifact {
                path: path.display().to_string(),
                producer: producer.to_string(),
            }
        } else {
            Error::Io(e)
        }
    })?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedArtifact {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

/// Format a float with 17 significant digits (used by CSV writers too).
pub fn fmt_f64(value: f64) -> String {
    format!("{value:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip_exactly() {
        for &x in &[
            0.1,
            1.0 / 3.0,
            std::f64::consts::PI,
            1e-300,
            f64::MIN_POSITIVE,
            123456789.12345679,
            2f64.powi(-53),
        ] {
            let s = fmt_f64(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s} did not round-trip");
        }
    }

    #[test]
    fn json_floats_round_trip_exactly() {
        let xs: Vec<f64> = (0..200).map(|i| (i as f64 * 0.7318).sin() / 3.0).collect();
        let text = to_json_string(&xs).unwrap();
        let back: Vec<f64> = from_json_str(&text).unwrap();
        for (a, b) in xs.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
