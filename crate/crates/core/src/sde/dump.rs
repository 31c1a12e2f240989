//! On-disk path and noise dumps.
//!
//! Layout (all little-endian):
//!
//! ```text
//! magic    8 bytes  "SFBPATH\0"
//! version  u32      1
//! kind     u32      1 = paths [n_paths][n_steps+1][dim], 2 = increments [n_paths][n_steps][dim]
//! n_paths  u64
//! n_steps  u64
//! dim      u64
//! horizon  f64
//! seed     u64
//! values   f64 * n_paths * rows * dim
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::brownian::BrownianBatch;
use super::grid::PathGrid;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SFBPATH\0";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: u64 = 8 + 4 + 4 + 8 * 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DumpKind {
    Paths = 1,
    Increments = 2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DumpHeader {
    pub kind: DumpKind,
    pub n_paths: u64,
    pub n_steps: u64,
    pub dim: u64,
    pub horizon: f64,
    pub seed: u64,
}

impl DumpHeader {
    pub fn rows(&self) -> u64 {
        match self.kind {
            DumpKind::Paths => self.n_steps + 1,
            DumpKind::Increments => self.n_steps,
        }
    }

    pub fn n_values(&self) -> u64 {
        self.n_paths * self.rows() * self.dim
    }

    fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.kind as u32).to_le_bytes())?;
        for v in [self.n_paths, self.n_steps, self.dim] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.horizon.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())
    }

    fn read(r: &mut impl Read) -> Result<Self> {
        let mut buf = [0u8; HEADER_LEN as usize];
        r.read_exact(&mut buf).map_err(|_| Error::Format("truncated dump header".into()))?;
        if &buf[..8] != MAGIC {
            return Err(Error::Format("bad dump magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(buf[o..o + 8].try_into().unwrap());
        if u32_at(8) != VERSION {
            return Err(Error::Format(format!("unsupported dump version {}", u32_at(8))));
        }
        let kind = match u32_at(12) {
            1 => DumpKind::Paths,
            2 => DumpKind::Increments,
            k => return Err(Error::Format(format!("unknown dump kind {k}"))),
        };
        let header = DumpHeader {
            kind,
            n_paths: u64_at(16),
            n_steps: u64_at(24),
            dim: u64_at(32),
            horizon: f64::from_le_bytes(buf[40..48].try_into().unwrap()),
            seed: u64_at(48),
        };
        if header.n_paths == 0 || header.n_steps == 0 || header.dim == 0 || !(header.horizon > 0.0) {
            return Err(Error::Format("degenerate dump header".into()));
        }
        Ok(header)
    }
}

/// Streams values into a dump file whose header is written up front.
pub struct DumpWriter {
    header: DumpHeader,
    out: BufWriter<File>,
    written: u64,
}

impl DumpWriter {
    pub fn create(path: &Path, header: DumpHeader) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        header.write(&mut out)?;
        Ok(DumpWriter { header, out, written: 0 })
    }

    pub fn write_values(&mut self, values: &[f64]) -> Result<()> {
        if self.written + values.len() as u64 > self.header.n_values() {
            return Err(Error::Format("more values than the header declares".into()));
        }
        for v in values {
            self.out.write_all(&v.to_le_bytes())?;
        }
        self.written += values.len() as u64;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.written != self.header.n_values() {
            return Err(Error::Format(format!(
                "dump incomplete: wrote {} of {} values",
                self.written,
                self.header.n_values()
            )));
        }
        self.out.flush()?;
        Ok(())
    }
}

/// Reads a dump chunk by chunk; the file length is checked against the header on open.
pub struct DumpReader {
    header: DumpHeader,
    input: BufReader<File>,
    read: u64,
}

impl DumpReader {
    pub fn open(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let len = file.metadata()?.len();
        let mut input = BufReader::new(file);
        let header = DumpHeader::read(&mut input)?;
        if len != HEADER_LEN + 8 * header.n_values() {
            return Err(Error::Format(format!(
                "dump length {len} does not match header ({} values)",
                header.n_values()
            )));
        }
        Ok(DumpReader { header, input, read: 0 })
    }

    pub fn header(&self) -> &DumpHeader {
        &self.header
    }

    /// Next `n_paths` whole paths, or fewer at the end of the file.
    pub fn read_paths(&mut self, n_paths: usize) -> Result<Vec<f64>> {
        let per_path = self.header.rows() * self.header.dim;
        let remaining = self.header.n_values() - self.read;
        let count = (n_paths as u64 * per_path).min(remaining) as usize;
        let mut bytes = vec![0u8; count * 8];
        self.input.read_exact(&mut bytes)?;
        self.read += count as u64;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

pub fn write_grid(path: &Path, grid: &PathGrid, seed: u64) -> Result<()> {
    let header = DumpHeader {
        kind: DumpKind::Paths,
        n_paths: grid.n_paths() as u64,
        n_steps: grid.n_steps() as u64,
        dim: grid.dim() as u64,
        horizon: grid.horizon(),
        seed,
    };
    let mut w = DumpWriter::create(path, header)?;
    w.write_values(grid.values())?;
    w.finish()
}

/// Loads a whole path dump onto a uniform mesh.
pub fn read_grid(path: &Path) -> Result<(PathGrid, DumpHeader)> {
    let mut r = DumpReader::open(path)?;
    let h = *r.header();
    if h.kind != DumpKind::Paths {
        return Err(Error::Format("dump holds increments, not paths".into()));
    }
    let values = r.read_paths(h.n_paths as usize)?;
    let grid = PathGrid::new(PathGrid::uniform_times(h.n_steps as usize, h.horizon), values, h.n_paths as usize, h.dim as usize)?;
    Ok((grid, h))
}

pub fn write_increments(path: &Path, bm: &BrownianBatch) -> Result<()> {
    let header = DumpHeader {
        kind: DumpKind::Increments,
        n_paths: bm.n_paths as u64,
        n_steps: bm.n_steps as u64,
        dim: bm.d as u64,
        horizon: bm.horizon,
        seed: bm.seed,
    };
    let mut w = DumpWriter::create(path, header)?;
    w.write_values(&bm.increments)?;
    w.finish()
}

pub fn read_increments(path: &Path) -> Result<BrownianBatch> {
    let mut r = DumpReader::open(path)?;
    let h = *r.header();
    if h.kind != DumpKind::Increments {
        return Err(Error::Format("dump holds paths, not increments".into()));
    }
    let increments = r.read_paths(h.n_paths as usize)?;
    Ok(BrownianBatch {
        seed: h.seed,
        first_path: 0,
        n_paths: h.n_paths as usize,
        n_steps: h.n_steps as usize,
        d: h.dim as usize,
        horizon: h.horizon,
        increments,
    })
}

/// CSV with a `#` header line and columns `path,step,t,x1..xd`.
pub fn write_grid_csv(w: &mut impl Write, grid: &PathGrid, seed: u64) -> Result<()> {
    writeln!(
        w,
        "# n_paths={},n_steps={},d_state={},T={},seed={}",
        grid.n_paths(),
        grid.n_steps(),
        grid.dim(),
        grid.horizon(),
        seed
    )?;
    let cols: Vec<String> = (1..=grid.dim()).map(|i| format!("x{i}")).collect();
    writeln!(w, "path,step,t,{}", cols.join(","))?;
    for j in 0..grid.n_paths() {
        for (i, t) in grid.times().iter().enumerate() {
            let vals: Vec<String> = grid.point(j, i).iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{j},{i},{t},{}", vals.join(","))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{gen_brownian, simulate_euler, SdeSpec};

    fn tmp(name: &str) -> std::path::PathBuf {
        std::env::temp_dir().join(format!("sigfbsde-dump-{}-{name}", std::process::id()))
    }

    #[test]
    fn grid_roundtrip() {
        let bm = gen_brownian(8, 5, 16, 1, 2.0).unwrap();
        let g = simulate_euler(&SdeSpec::gbm(100.0, 0.05, 0.2), &bm).unwrap();
        let p = tmp("grid");
        write_grid(&p, &g, 8).unwrap();
        let (back, h) = read_grid(&p).unwrap();
        assert_eq!(back, g);
        assert_eq!((h.seed, h.n_paths, h.n_steps, h.dim), (8, 5, 16, 1));
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn increments_roundtrip() {
        let bm = gen_brownian(3, 4, 7, 2, 1.0).unwrap();
        let p = tmp("inc");
        write_increments(&p, &bm).unwrap();
        assert_eq!(read_increments(&p).unwrap(), bm);
        assert!(read_grid(&p).is_err());
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn corrupt_files_rejected() {
        let bm = gen_brownian(3, 4, 7, 1, 1.0).unwrap();
        let p = tmp("corrupt");
        write_increments(&p, &bm).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes[0] = b'X';
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(DumpReader::open(&p), Err(Error::Format(_))));
        bytes[0] = b'S';
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&p, &bytes).unwrap();
        assert!(matches!(DumpReader::open(&p), Err(Error::Format(_))));
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn csv_shape() {
        let g = PathGrid::single(vec![0.0, 1.0], &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let mut out = Vec::new();
        write_grid_csv(&mut out, &g, 5).unwrap();
        let s = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], "path,step,t,x1,x2");
        assert!(lines[0].contains("seed=5"));
    }
}
