//! The `.gfn` field container: one line of JSON header terminated by `\n`,
//! followed by the samples as little-endian `f64` pairs `(re, im)` in
//! row-major order.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};

pub const GFN_EXTENSION: &str = "gfn";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfnHeader {
    pub d: usize,
    pub n: usize,
    pub period: f64,
    pub dtype: String,
    pub layout: String,
}

impl GfnHeader {
    fn for_spec(spec: &GridSpec) -> Self {
        Self {
            d: spec.d(),
            n: spec.n(),
            period: spec.period(),
            dtype: "c128".into(),
            layout: "row-major".into(),
        }
    }
}

pub fn write_gfn(writer: &mut impl Write, f: &GridFunction) -> Result<()> {
    let header = serde_json::to_string(&GfnHeader::for_spec(f.spec()))?;
    writer.write_all(header.as_bytes())?;
    writer.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(16 * f.len());
    for z in f.samples() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    writer.write_all(&buf)?;
    Ok(())
}

pub fn read_gfn(reader: impl Read) -> Result<GridFunction> {
    let mut reader = BufReader::new(reader);
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Data("gfn header is not newline-terminated".into()));
    }
    let header: GfnHeader = serde_json::from_slice(&line[..line.len() - 1])?;
    if header.dtype != "c128" || header.layout != "row-major" {
        return Err(Error::Data(format!(
            "unsupported gfn dtype/layout {}/{}",
            header.dtype, header.layout
        )));
    }
    let spec = GridSpec::new(header.d, header.n, header.period)?;
    let mut raw = Vec::with_capacity(16 * spec.len());
    reader.read_to_end(&mut raw)?;
    if raw.len() != 16 * spec.len() {
        return Err(Error::Data(format!(
            "gfn payload has {} bytes, expected {}",
            raw.len(),
            16 * spec.len()
        )));
    }
    let samples = raw
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("chunk of 16"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("chunk of 16"));
            Complex64::new(re, im)
        })
        .collect();
    GridFunction::new(spec, samples)
}

pub fn save_gfn(path: impl AsRef<Path>, f: &GridFunction) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    write_gfn(&mut file, f)?;
    file.flush()?;
    Ok(())
}

pub fn load_gfn(path: impl AsRef<Path>) -> Result<GridFunction> {
    read_gfn(fs::File::open(path)?)
}
