//! Binary frame files: one text header line, then every frame as row-major
//! little-endian `f32`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use phpmht_core::grid::Grid;
use phpmht_core::image::IntensityImage;

const MAGIC: &str = "phpmht-frames";

pub fn write_frames(path: &Path, grid: &Grid, frames: &[IntensityImage]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(
        w,
        "{MAGIC} nx={} ny={} dx={} dy={} steps={}",
        grid.nx,
        grid.ny,
        grid.dx,
        grid.dy,
        frames.len()
    )?;
    for f in frames {
        for v in &f.values {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameFile {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub frames: Vec<Vec<f32>>,
}

pub fn read_frames(path: &Path) -> Result<FrameFile> {
    let mut r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some(MAGIC) {
        bail!("{} is not a frame file", path.display());
    }
    let mut get = |key: &str| -> Result<String> {
        let f = fields.next().context("truncated header")?;
        let v = f.strip_prefix(key).and_then(|s| s.strip_prefix('=')).context("malformed header")?;
        Ok(v.to_string())
    };
    let nx: usize = get("nx")?.parse()?;
    let ny: usize = get("ny")?.parse()?;
    let dx: f64 = get("dx")?.parse()?;
    let dy: f64 = get("dy")?.parse()?;
    let steps: usize = get("steps")?.parse()?;
    let mut frames = Vec::with_capacity(steps);
    let mut buf = vec![0u8; nx * ny * 4];
    for _ in 0..steps {
        r.read_exact(&mut buf)?;
        frames.push(buf.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect());
    }
    Ok(FrameFile { nx, ny, dx, dy, frames })
}
