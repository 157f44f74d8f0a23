//! JSONL records for paths and loops, and plain CSV output.
//!
//! Paths are `{"d":3,"sites":[[0,0,0],[1,0,0],..]}`, one per line. Walk
//! loops are `{"root":[..],"label":x,"sites":[[..],..]}` and Brownian loops
//! `{"root":[..],"duration":t,"grid":[[..],..]}` with absolute grid
//! positions.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::lattice::{DiscreteLoop, LatticePath, PathKind};
use crate::soup::ContinuousLoop;

#[derive(Serialize, Deserialize)]
struct PathRecord {
    d: usize,
    sites: Vec<Vec<i32>>,
}

#[derive(Serialize)]
struct DiscreteLoopRecord<'a> {
    root: &'a [i32],
    label: f64,
    sites: Vec<&'a [i32]>,
}

#[derive(Serialize)]
struct ContinuousLoopRecord<'a> {
    root: &'a [f64],
    duration: f64,
    grid: Vec<Vec<f64>>,
}

fn line<W: Write, T: Serialize>(w: &mut W, record: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, record)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_path<W: Write>(w: &mut W, path: &LatticePath) -> Result<()> {
    line(w, &PathRecord { d: path.dim(), sites: path.iter().map(<[i32]>::to_vec).collect() })
}

/// Reads path records, one per nonempty line. A record whose consecutive
/// sites are not neighbours is read as a discontinuous path.
pub fn read_paths<R: BufRead>(r: R) -> Result<Vec<LatticePath>> {
    let mut out = Vec::new();
    for (i, l) in r.lines().enumerate() {
        let l = l?;
        if l.trim().is_empty() {
            continue;
        }
        let rec: PathRecord = serde_json::from_str(&l)?;
        if rec.sites.iter().any(|s| s.len() != rec.d) {
            return domain(format!("line {}: site of the wrong dimension", i + 1));
        }
        let flat = rec.sites.concat();
        let path = LatticePath::from_flat(rec.d, flat.clone(), PathKind::NearestNeighbor)
            .or_else(|_| LatticePath::from_flat(rec.d, flat, PathKind::Discontinuous))?;
        out.push(path);
    }
    Ok(out)
}

pub fn write_discrete_loop<W: Write>(w: &mut W, l: &DiscreteLoop) -> Result<()> {
    line(w, &DiscreteLoopRecord { root: l.root(), label: l.label(), sites: l.path().iter().collect() })
}

pub fn write_continuous_loop<W: Write>(w: &mut W, l: &ContinuousLoop) -> Result<()> {
    let grid = (0..l.points()).map(|k| l.position(k)).collect();
    line(w, &ContinuousLoopRecord { root: &l.root, duration: l.duration, grid })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One CSV row with LF ending; fields are quoted only when needed.
pub fn write_csv_row<W: Write, S: AsRef<str>>(w: &mut W, fields: &[S]) -> Result<()> {
    let row: Vec<String> = fields.iter().map(|f| csv_field(f.as_ref())).collect();
    w.write_all(row.join(",").as_bytes())?;
    w.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_round_trip() {
        let p = LatticePath::from_flat(2, vec![0, 0, 1, 0, 1, -1], PathKind::NearestNeighbor).unwrap();
        let q = LatticePath::from_flat(2, vec![0, 0, 5, 5], PathKind::Discontinuous).unwrap();
        let mut buf = Vec::new();
        write_path(&mut buf, &p).unwrap();
        write_path(&mut buf, &q).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), r#"{"d":2,"sites":[[0,0],[1,0],[1,-1]]}"#);
        let back = read_paths(&buf[..]).unwrap();
        assert_eq!(back, vec![p, q]);
    }

    #[test]
    fn loop_records() {
        let path = LatticePath::from_flat(1, vec![0, 1, 0], PathKind::NearestNeighbor).unwrap();
        let l = DiscreteLoop::new(path, 0.5).unwrap();
        let mut buf = Vec::new();
        write_discrete_loop(&mut buf, &l).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "{\"root\":[0],\"label\":0.5,\"sites\":[[0],[1],[0]]}\n");
    }

    #[test]
    fn csv_quoting() {
        let mut buf = Vec::new();
        write_csv_row(&mut buf, &["a", "b,c", "say \"hi\""]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,\"b,c\",\"say \"\"hi\"\"\"\n");
    }
}
