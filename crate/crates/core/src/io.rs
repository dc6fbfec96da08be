//! Trajectory files.
//!
//! CSV: UTF-8, LF line endings, a mandatory header `t,sq_norm[,projection]`
//! and shortest round-trip decimal floats. The binary cache stores the same
//! columns after a versioned header.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::simulate::Trajectory;

/// Columns of a trajectory file, on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryTable {
    pub t: Vec<f64>,
    pub sq_norms: Vec<f64>,
    pub projections: Option<Vec<f64>>,
}

impl TrajectoryTable {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        Self {
            t: (0..traj.len()).map(|i| traj.grid.time(i)).collect(),
            sq_norms: traj.sq_norms.clone(),
            projections: traj.projections.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Common spacing of `t`; errors unless the grid is uniform to 1e-9
    /// relative.
    pub fn dt(&self) -> Result<f64> {
        if self.t.len() < 2 {
            return Err(Error::Format("at least two rows are required".into()));
        }
        let dt = (self.t[self.t.len() - 1] - self.t[0]) / (self.t.len() - 1) as f64;
        if !(dt > 0.0) {
            return Err(Error::Format("time column must be increasing".into()));
        }
        for (i, w) in self.t.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(w[1].abs()) {
                return Err(Error::Format(format!("time grid is not uniform at row {}", i + 2)));
            }
        }
        Ok(dt)
    }

    fn check(&self) -> Result<()> {
        if self.sq_norms.len() != self.t.len() || self.projections.as_ref().is_some_and(|p| p.len() != self.t.len()) {
            return Err(Error::Format("columns have different lengths".into()));
        }
        Ok(())
    }
}

/// Shortest round-trip decimal; exponent notation outside `[1e-5, 1e16)`.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

pub fn write_trajectory_csv<W: Write>(table: &TrajectoryTable, out: W) -> Result<()> {
    table.check()?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["t", "sq_norm"];
    if table.projections.is_some() {
        header.push("projection");
    }
    w.write_record(&header).map_err(csv_error)?;
    for i in 0..table.len() {
        let mut rec = vec![format_f64(table.t[i]), format_f64(table.sq_norms[i])];
        if let Some(p) = &table.projections {
            rec.push(format_f64(p[i]));
        }
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Reads a trajectory CSV. Column order is free; `t` and `sq_norm` are
/// required, `projection` is optional and other columns are rejected.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<TrajectoryTable> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers().map_err(csv_error)?.clone();
    let mut cols = [None::<usize>; 3];
    for (i, name) in header.iter().enumerate() {
        let slot = match name {
            "t" => 0,
            "sq_norm" => 1,
            "projection" => 2,
            other => return Err(Error::Format(format!("unknown column '{other}'"))),
        };
        if cols[slot].replace(i).is_some() {
            return Err(Error::Format(format!("duplicate column '{name}'")));
        }
    }
    let (ti, si) = match (cols[0], cols[1]) {
        (Some(t), Some(s)) => (t, s),
        _ => return Err(Error::Format("header must contain 't' and 'sq_norm'".into())),
    };
    let mut table = TrajectoryTable {
        t: Vec::new(),
        sq_norms: Vec::new(),
        projections: cols[2].map(|_| Vec::new()),
    };
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let field = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Format(format!("row {}: '{s}' is not a finite number", row + 2)))
        };
        table.t.push(field(ti)?);
        table.sq_norms.push(field(si)?);
        if let (Some(p), Some(pi)) = (table.projections.as_mut(), cols[2]) {
            p.push(field(pi)?);
        }
    }
    if table.is_empty() {
        return Err(Error::Format("trajectory has no rows".into()));
    }
    Ok(table)
}

pub fn read_trajectory_csv_file(path: &Path) -> Result<TrajectoryTable> {
    read_trajectory_csv(std::fs::File::open(path)?)
}

const MAGIC: &[u8; 8] = b"FSPDETRJ";
pub const CACHE_VERSION: u32 = 1;

/// Binary cache: magic, format version, row count, column flags, then the
/// columns as little-endian `f64`.
pub fn write_trajectory_cache<W: Write>(table: &TrajectoryTable, mut out: W) -> Result<()> {
    table.check()?;
    out.write_all(MAGIC)?;
    out.write_all(&CACHE_VERSION.to_le_bytes())?;
    out.write_all(&(table.len() as u64).to_le_bytes())?;
    out.write_all(&u32::from(table.projections.is_some()).to_le_bytes())?;
    let mut cols = vec![&table.t, &table.sq_norms];
    if let Some(p) = &table.projections {
        cols.push(p);
    }
    for col in cols {
        for v in col {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_trajectory_cache<R: Read>(mut input: R) -> Result<TrajectoryTable> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a trajectory cache".into()));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != CACHE_VERSION {
        return Err(Error::Format(format!("unsupported cache version {version}")));
    }
    input.read_exact(&mut b8)?;
    let rows = u64::from_le_bytes(b8) as usize;
    input.read_exact(&mut b4)?;
    let flags = u32::from_le_bytes(b4);
    if flags > 1 {
        return Err(Error::Format(format!("unknown cache flags {flags}")));
    }
    let mut column = || -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; rows * 8];
        input.read_exact(&mut bytes)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    let t = column()?;
    let sq_norms = column()?;
    let projections = if flags == 1 { Some(column()?) } else { None };
    Ok(TrajectoryTable {
        t,
        sq_norms,
        projections,
    })
}
