//! Shared pieces of the on-disk formats.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Version stamped into every file this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

/// A float written as a plain decimal with at most 9 significant digits.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Decimal9(pub f64);

pub fn decimal9(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().expect("valid float literal");
    if rounded == 0.0 {
        "0".to_string()
    } else {
        format!("{rounded}")
    }
}

impl Serialize for Decimal9 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom("non-finite number"));
        }
        let raw = serde_json::value::RawValue::from_string(decimal9(self.0))
            .map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Decimal9 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        f64::deserialize(d).map(Decimal9)
    }
}

pub fn d9(v: [f64; 3]) -> [Decimal9; 3] {
    v.map(Decimal9)
}

pub fn un9(v: [Decimal9; 3]) -> [f64; 3] {
    v.map(|d| d.0)
}

/// Short content digest of a serializable value.
pub fn digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(&Sha256::digest(&bytes)[..8])
}

pub fn check_schema(found: u32, what: &str) -> Result<()> {
    if found == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::Schema(format!(
            "{what}: schema_version {found}, expected {SCHEMA_VERSION}"
        )))
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

pub fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io("<stream>", e))
}

/// Reads non-empty lines from a JSONL source.
pub fn lines<R: BufRead>(r: R, path: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(line);
        }
    }
    Ok(out)
}

pub fn parse<T: DeserializeOwned>(line: &str) -> Result<T> {
    Ok(serde_json::from_str(line)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(open(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal9_rounds_and_stays_decimal() {
        assert_eq!(decimal9(0.0), "0");
        assert_eq!(decimal9(-0.0), "0");
        assert_eq!(decimal9(1.0), "1");
        assert_eq!(decimal9(0.1 + 0.2), "0.3");
        assert_eq!(decimal9(1.23456789012), "1.23456789");
        assert_eq!(decimal9(-2.5e-7), "-0.00000025");
        assert!(!decimal9(3.2e-12).contains('e'));
    }

    #[test]
    fn decimal9_serializes_inside_json() {
        let s = serde_json::to_string(&[Decimal9(0.5), Decimal9(1e-5)]).unwrap();
        assert_eq!(s, "[0.5,0.00001]");
        let back: Vec<Decimal9> = serde_json::from_str(&s).unwrap();
        assert_eq!(back[1].0, 1e-5);
    }
}
