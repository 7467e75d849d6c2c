//! Binary/ASCII PGM codec and a minimal CSV writer.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::image::Image;

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u64> {
        let tok = self
            .token()
            .ok_or_else(|| Error::CorruptFile(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::CorruptFile(format!(
                    "non-numeric {what}: {:?}",
                    String::from_utf8_lossy(tok)
                ))
            })
    }
}

/// Decodes a P5 (binary) or P2 (ASCII) graymap with maxval 255.
pub fn read_pgm(bytes: &[u8]) -> Result<Image> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => {
            return Err(Error::UnsupportedFormat(
                "expected PGM magic P5 or P2".into(),
            ))
        }
    };
    let mut rd = HeaderReader { bytes, pos: 2 };
    let width = rd.number("width")? as usize;
    let height = rd.number("height")? as usize;
    let maxval = rd.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::CorruptFile(format!("empty {width}x{height} image")));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedDepth(maxval));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::CorruptFile("dimensions overflow".into()))?;

    let pixels = if binary {
        // exactly one whitespace byte separates maxval from the raster
        match bytes.get(rd.pos) {
            Some(b) if b.is_ascii_whitespace() => {}
            _ => return Err(Error::CorruptFile("missing raster separator".into())),
        }
        let raster = &bytes[rd.pos + 1..];
        if raster.len() < n {
            return Err(Error::CorruptFile(format!(
                "raster has {} of {n} bytes",
                raster.len()
            )));
        }
        raster[..n].iter().map(|&b| f64::from(b)).collect()
    } else {
        let mut px = Vec::with_capacity(n);
        for _ in 0..n {
            let v = rd.number("pixel")?;
            if v > 255 {
                return Err(Error::CorruptFile(format!("sample {v} exceeds maxval")));
            }
            px.push(v as f64);
        }
        px
    };
    Image::new(width, height, pixels)
}

/// Encodes `img` as binary P5, rounding half-away-from-zero.
pub fn write_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.quantized());
    out
}

/// A header plus equal-length rows of pre-rendered cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

/// Renders a number for CSV output: `inf`/`-inf`/`nan` for non-finite
/// values, otherwise the shortest representation that round-trips.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        // Display for f64 never uses exponent notation and is locale-free.
        let mut s = String::new();
        write!(s, "{v}").unwrap();
        s
    }
}

pub fn write_csv(table: &CsvTable) -> Result<Vec<u8>> {
    let cols = table.header.len();
    if let Some((i, row)) = table.rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::InvalidTable(format!(
            "row {i} has {} cells, header has {cols}",
            row.len()
        )));
    }
    let mut out = String::new();
    out.push_str(&table.header.join(","));
    out.push('\n');
    for row in &table.rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    Ok(out.into_bytes())
}
