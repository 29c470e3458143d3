//! Plain-file outputs: binary PGM heatmaps and exact float formatting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Writes an 8-bit binary (P5) greymap; `pixels` is row-major, top row first.
pub fn write_pgm<W: Write>(mut out: W, width: usize, height: usize, pixels: &[u8]) -> std::io::Result<()> {
    assert_eq!(pixels.len(), width * height, "pixel buffer does not match dimensions");
    write!(out, "P5\n{width} {height}\n255\n")?;
    out.write_all(pixels)
}

pub fn write_pgm_file(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_pgm(&mut w, width, height, pixels)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Linear map of `v` from `[lo, hi]` onto `0..=max`, clamped.
pub fn gray(v: f64, lo: f64, hi: f64, max: u8) -> u8 {
    if !(hi > lo) {
        return 0;
    }
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    (t * max as f64).round() as u8
}

/// 17 significant digits, which reparse to the same bits.
pub fn fmt_exact(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}
