//! CSV and JSON artifacts. Floats are written with 17 significant digits so
//! that reading a file back reproduces every value exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::bohmian::{ParticleBeta, Trajectory};
use crate::error::{Error, Result};
use crate::observables::ProbabilitySeries;
use crate::state::Grid;

pub const SCHEMA_VERSION: u32 = 1;

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

/// `step,t,probability`
pub fn write_series(path: &Path, series: &ProbabilitySeries) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "step,t,probability")?;
    for ((s, t), p) in series.steps.iter().zip(&series.times).zip(&series.values) {
        writeln!(w, "{s},{},{}", float(*t), float(*p))?;
    }
    w.flush()?;
    Ok(())
}

/// `particle,step,t,x`, every `stride`-th recorded sample plus the last one
/// of each path.
pub fn write_trajectories<'a>(
    path: &Path,
    paths: impl IntoIterator<Item = (usize, &'a Trajectory)>,
    stride: u64,
) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "particle,step,t,x")?;
    for (j, p) in paths {
        let last = p.len().saturating_sub(1);
        for k in 0..p.len() {
            if p.steps[k] % stride == 0 || k == last {
                writeln!(
                    w,
                    "{j},{},{},{}",
                    p.steps[k],
                    float(p.times[k]),
                    float(p.positions[k])
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// `x,Q`; masked sites are left out.
pub fn write_qpotential(path: &Path, grid: &Grid, q: &[f64], mask: &[bool]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "x,Q")?;
    for (i, (&qi, &m)) in q.iter().zip(mask).enumerate() {
        if !m {
            writeln!(w, "{},{}", float(grid.x(i)), float(qi))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `particle,x_init,t_ip,t_i,beta`
pub fn write_betas(path: &Path, betas: &[ParticleBeta]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "particle,x_init,t_ip,t_i,beta")?;
    for b in betas {
        writeln!(
            w,
            "{},{},{},{},{}",
            b.particle,
            float(b.x_init),
            float(b.t_ip),
            float(b.t_i),
            float(b.beta)
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Header and rows of a numeric CSV file.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?.split(',').map(str::to_string).collect::<Vec<_>>(),
        None => return Err(Error::argument(format!("{} is empty", path.display()))),
    };
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        let row = line
            .split(',')
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::argument(format!("{}:{}: bad number `{f}`", path.display(), n + 2))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(Error::argument(format!(
                "{}:{}: expected {} fields",
                path.display(),
                n + 2,
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

/// Reads a series file written by [`write_series`].
pub fn read_series(
    path: &Path,
    kind: crate::observables::DetectorKind,
    detector_position: f64,
) -> Result<ProbabilitySeries> {
    let (_, rows) = read_csv(path)?;
    ProbabilitySeries::new(
        kind,
        detector_position,
        rows.iter().map(|r| r[0] as u64).collect(),
        rows.iter().map(|r| r[1]).collect(),
        rows.iter().map(|r| r[2]).collect(),
    )
}
