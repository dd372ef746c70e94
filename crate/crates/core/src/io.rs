//! Plain-text columnar formats.
//!
//! A measure family is a block
//!
//! ```text
//! # family resolution=<n> cap=<b> time=<t>
//! cell_index position weight
//! 0 0.25 0.005
//! ...
//! ```
//!
//! and a trajectory is a sequence of such blocks. Phase trajectories are rows
//! `t i u_i`, finite-volume densities rows `t x_cell u_cell value`.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::kuramoto::{PhaseTrajectory, WeightMatrix};
use crate::measure::{MeasureFamily, PhaseMeasure, Trajectory};
use crate::torus::TorusGrid;
use crate::vfpe::FvSolution;

const FAMILY_TAG: &str = "# family";
const FAMILY_COLUMNS: &str = "cell_index position weight";

pub fn write_family<W: Write>(w: &mut W, fam: &MeasureFamily, time: f64) -> Result<()> {
    writeln!(w, "{FAMILY_TAG} resolution={} cap={} time={}", fam.grid().resolution(), fam.cap(), time)?;
    writeln!(w, "{FAMILY_COLUMNS}")?;
    for (i, f) in fam.fibers().iter().enumerate() {
        for &(p, m) in f.particles() {
            writeln!(w, "{i} {p} {m}")?;
        }
    }
    Ok(())
}

pub fn write_trajectory<W: Write>(w: &mut W, traj: &Trajectory) -> Result<()> {
    for (t, fam) in traj.times().iter().zip(traj.families()) {
        write_family(w, fam, *t)?;
    }
    Ok(())
}

struct Header {
    resolution: usize,
    cap: f64,
    time: f64,
}

fn parse_header(line: &str, lineno: usize) -> Result<Header> {
    let rest = line
        .strip_prefix(FAMILY_TAG)
        .ok_or_else(|| Error::Parse(format!("line {lineno}: expected a family header")))?;
    let (mut res, mut cap, mut time) = (None, None, None);
    for kv in rest.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {lineno}: bad header field {kv:?}")))?;
        let bad = |_| Error::Parse(format!("line {lineno}: bad value for {k}: {v:?}"));
        match k {
            "resolution" => res = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "cap" => cap = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            "time" => time = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
            _ => return Err(Error::Parse(format!("line {lineno}: unknown header field {k}"))),
        }
    }
    match (res, cap, time) {
        (Some(resolution), Some(cap), Some(time)) => Ok(Header { resolution, cap, time }),
        _ => Err(Error::Parse(format!("line {lineno}: header needs resolution, cap and time"))),
    }
}

fn finish_block(h: &Header, rows: Vec<Vec<(f64, f64)>>) -> Result<(f64, MeasureFamily)> {
    let fibers = rows.into_iter().map(PhaseMeasure::new).collect::<Result<Vec<_>>>()?;
    Ok((h.time, MeasureFamily::new(TorusGrid::new(h.resolution)?, h.cap, fibers)?))
}

/// Every `(time, family)` block in the input, in order.
pub fn read_families<R: BufRead>(r: R) -> Result<Vec<(f64, MeasureFamily)>> {
    let mut out = Vec::new();
    let mut current: Option<(Header, Vec<Vec<(f64, f64)>>)> = None;
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        let line = line.trim();
        if line.is_empty() || line == FAMILY_COLUMNS {
            continue;
        }
        if line.starts_with('#') {
            let h = parse_header(line, lineno)?;
            if let Some((prev, rows)) = current.take() {
                out.push(finish_block(&prev, rows)?);
            }
            let rows = vec![Vec::new(); h.resolution];
            current = Some((h, rows));
            continue;
        }
        let (h, rows) = current
            .as_mut()
            .ok_or_else(|| Error::Parse(format!("line {lineno}: data before the first header")))?;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(Error::Parse(format!("line {lineno}: expected 3 columns, got {}", cols.len())));
        }
        let cell: usize = cols[0]
            .parse()
            .map_err(|_| Error::Parse(format!("line {lineno}: bad cell index {:?}", cols[0])))?;
        if cell >= h.resolution {
            return Err(Error::Parse(format!(
                "line {lineno}: cell {cell} outside resolution {}",
                h.resolution
            )));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {lineno}: bad number {s:?}")))
        };
        rows[cell].push((num(cols[1])?, num(cols[2])?));
    }
    if let Some((h, rows)) = current {
        out.push(finish_block(&h, rows)?);
    }
    Ok(out)
}

pub fn read_family<R: BufRead>(r: R) -> Result<(f64, MeasureFamily)> {
    let mut all = read_families(r)?;
    match all.len() {
        1 => Ok(all.pop().expect("one block")),
        k => Err(Error::Parse(format!("expected one family block, found {k}"))),
    }
}

pub fn read_trajectory<R: BufRead>(r: R) -> Result<Trajectory> {
    let (times, fams) = read_families(r)?.into_iter().unzip();
    Trajectory::new(times, fams)
}

pub fn write_phase_trajectory<W: Write>(w: &mut W, traj: &PhaseTrajectory) -> Result<()> {
    writeln!(w, "t i u")?;
    for (t, ph) in traj.times.iter().zip(&traj.phases) {
        for (i, u) in ph.iter().enumerate() {
            writeln!(w, "{t} {i} {u}")?;
        }
    }
    Ok(())
}

pub fn write_fv<W: Write>(w: &mut W, sol: &FvSolution) -> Result<()> {
    writeln!(w, "t x_cell u_cell value")?;
    for (t, dens) in sol.times.iter().zip(&sol.densities) {
        for (i, row) in dens.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                writeln!(w, "{t} {i} {j} {v}")?;
            }
        }
    }
    Ok(())
}

/// One matrix row per line.
pub fn write_dense_matrix<W: Write>(w: &mut W, m: &WeightMatrix) -> Result<()> {
    let n = m.len();
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| m.get(i, j).to_string()).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}
