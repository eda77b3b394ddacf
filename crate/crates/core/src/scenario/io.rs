//! CSV and JSON writers for run outputs, plus readers for round trips.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which parses
//! back to the same `f64`, so write → read → write is byte-identical.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::ensemble::{Event, EventKind};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str, what: &str) -> io::Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, format!("bad {what} value `{s}`")))
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e)
}

/// One node of a field snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotRow {
    pub node_index: usize,
    pub x: [f64; 2],
    pub re_psi: f64,
    pub im_psi: f64,
    pub abs2: f64,
    pub v: [f64; 2],
    pub q_stat: f64,
    pub q_dyn: f64,
    pub q_dep: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotTable {
    /// 1 for rings and radial profiles, 2 for grids.
    pub dim: usize,
    pub rows: Vec<SnapshotRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub table: SnapshotTable,
}

impl SnapshotTable {
    pub fn header(dim: usize) -> Vec<&'static str> {
        let mut h = vec!["node_index", "x"];
        if dim == 2 {
            h.push("y");
        }
        h.extend(["re_psi", "im_psi", "abs2", "vx"]);
        if dim == 2 {
            h.push("vy");
        }
        h.extend(["q_stat", "q_dyn", "q_dep"]);
        h
    }

    pub fn write<W: io::Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::header(self.dim)).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![r.node_index.to_string(), fmt_f64(r.x[0])];
            if self.dim == 2 {
                rec.push(fmt_f64(r.x[1]));
            }
            rec.extend([fmt_f64(r.re_psi), fmt_f64(r.im_psi), fmt_f64(r.abs2), fmt_f64(r.v[0])]);
            if self.dim == 2 {
                rec.push(fmt_f64(r.v[1]));
            }
            rec.extend([fmt_f64(r.q_stat), fmt_f64(r.q_dyn), fmt_f64(r.q_dep)]);
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()
    }

    pub fn read<R: io::Read>(input: R) -> io::Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let dim = if header.iter().any(|h| h == "y") { 2 } else { 1 };
        if header != Self::header(dim) {
            return Err(io::Error::new(io::ErrorKind::InvalidData, format!("unexpected snapshot header {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let f = |k: usize| parse_f64(&rec[k], &header[k]);
            let node_index = rec[0]
                .parse()
                .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, format!("bad node index `{}`", &rec[0])))?;
            let row = if dim == 2 {
                SnapshotRow {
                    node_index,
                    x: [f(1)?, f(2)?],
                    re_psi: f(3)?,
                    im_psi: f(4)?,
                    abs2: f(5)?,
                    v: [f(6)?, f(7)?],
                    q_stat: f(8)?,
                    q_dyn: f(9)?,
                    q_dep: f(10)?,
                }
            } else {
                SnapshotRow {
                    node_index,
                    x: [f(1)?, 0.0],
                    re_psi: f(2)?,
                    im_psi: f(3)?,
                    abs2: f(4)?,
                    v: [f(5)?, 0.0],
                    q_stat: f(6)?,
                    q_dyn: f(7)?,
                    q_dep: f(8)?,
                }
            };
            rows.push(row);
        }
        Ok(Self { dim, rows })
    }
}

fn position_field(p: [f64; 2], dim: usize) -> String {
    if dim == 2 {
        format!("{};{}", fmt_f64(p[0]), fmt_f64(p[1]))
    } else {
        fmt_f64(p[0])
    }
}

/// `t,kind,cell_id,position`; 2D positions are written as `x;y`.
pub fn write_events<W: io::Write>(out: W, events: &[Event], dim: usize) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "kind", "cell_id", "position"]).map_err(csv_err)?;
    for e in events {
        w.write_record([
            fmt_f64(e.t),
            e.kind.as_str().to_string(),
            e.cell_id.to_string(),
            position_field(e.position, dim),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
}

pub fn read_events<R: io::Read>(input: R) -> io::Result<(Vec<Event>, usize)> {
    let mut r = csv::Reader::from_reader(input);
    let mut events = Vec::new();
    let mut dim = 1;
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let kind = EventKind::parse(&rec[1])
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, format!("bad event kind `{}`", &rec[1])))?;
        let cell_id = rec[2]
            .parse()
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidData, format!("bad cell id `{}`", &rec[2])))?;
        let position = match rec[3].split_once(';') {
            Some((x, y)) => {
                dim = 2;
                [parse_f64(x, "position")?, parse_f64(y, "position")?]
            }
            None => [parse_f64(&rec[3], "position")?, 0.0],
        };
        events.push(Event {
            t: parse_f64(&rec[0], "t")?,
            kind,
            cell_id,
            position,
        });
    }
    Ok((events, dim))
}

/// Position of one tracked particle at one check time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub id: u64,
    pub pos: [f64; 2],
}

pub fn write_trajectories<W: io::Write>(out: W, rows: &[TrajectoryRow], dim: usize) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if dim == 2 {
        w.write_record(["t", "id", "x", "y"]).map_err(csv_err)?;
    } else {
        w.write_record(["t", "id", "x"]).map_err(csv_err)?;
    }
    for r in rows {
        let mut rec = vec![fmt_f64(r.t), r.id.to_string(), fmt_f64(r.pos[0])];
        if dim == 2 {
            rec.push(fmt_f64(r.pos[1]));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub step: usize,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub metrics: serde_json::Value,
    pub warnings: Vec<String>,
    pub snapshots: Vec<SnapshotEntry>,
    pub created_unix_s: u64,
}

pub fn snapshot_file_name(step: usize) -> String {
    format!("snapshot_{step:09}.csv")
}

fn create(path: &Path) -> io::Result<io::BufWriter<fs::File>> {
    fs::File::create(path)
        .map(io::BufWriter::new)
        .map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Writes snapshots, event log, trajectories and manifest into `dir`.
pub fn write_outputs(
    dir: &Path,
    snapshots: &[Snapshot],
    events: Option<&[Event]>,
    trajectories: Option<&[TrajectoryRow]>,
    dim: usize,
    manifest: &mut Manifest,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| io::Error::new(e.kind(), format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    manifest.snapshots.clear();
    for s in snapshots {
        let name = snapshot_file_name(s.step);
        let path = dir.join(&name);
        s.table.write(create(&path)?)?;
        manifest.snapshots.push(SnapshotEntry { file: name, step: s.step, t: s.t });
        written.push(path);
    }
    if let Some(ev) = events {
        let path = dir.join("events.csv");
        write_events(create(&path)?, ev, dim)?;
        written.push(path);
    }
    if let Some(tr) = trajectories {
        let path = dir.join("trajectories.csv");
        write_trajectories(create(&path)?, tr, dim)?;
        written.push(path);
    }
    let path = dir.join("manifest.json");
    let mut f = create(&path)?;
    serde_json::to_writer_pretty(&mut f, manifest).map_err(io::Error::other)?;
    io::Write::write_all(&mut f, b"\n")?;
    io::Write::flush(&mut f)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(dim: usize, vals: &[f64]) -> SnapshotTable {
        let rows = vals
            .chunks(9)
            .enumerate()
            .map(|(i, c)| SnapshotRow {
                node_index: i,
                x: [c[0], if dim == 2 { c[1] } else { 0.0 }],
                re_psi: c[2],
                im_psi: c[3],
                abs2: c[4],
                v: [c[5], if dim == 2 { c[6] } else { 0.0 }],
                q_stat: c[7],
                q_dyn: c[8],
                q_dep: c[0] * c[8],
            })
            .collect();
        SnapshotTable { dim, rows }
    }

    fn bytes(t: &SnapshotTable) -> Vec<u8> {
        let mut b = Vec::new();
        t.write(&mut b).unwrap();
        b
    }

    proptest! {
        #[test]
        fn snapshot_round_trip_is_byte_identical(
            vals in prop::collection::vec(prop_oneof![any::<f64>(), Just(f64::NAN), -1e3..1e3f64], 9..90),
            two in any::<bool>(),
        ) {
            let n = vals.len() / 9 * 9;
            let t = table(if two { 2 } else { 1 }, &vals[..n]);
            let first = bytes(&t);
            let back = SnapshotTable::read(first.as_slice()).unwrap();
            prop_assert_eq!(bytes(&back), first);
        }
    }

    #[test]
    fn header_matches_layout() {
        let t = table(1, &[0.5, 0.0, 1.0, 0.0, 1.0, 0.3, 0.0, f64::NAN, 0.0]);
        let s = String::from_utf8(bytes(&t)).unwrap();
        assert!(s.starts_with("node_index,x,re_psi,im_psi,abs2,vx,q_stat,q_dyn,q_dep\n"));
        assert!(s.contains("NaN"));
        assert_eq!(SnapshotTable::header(2).len(), 11);
    }

    #[test]
    fn events_round_trip() {
        let ev = vec![
            Event { t: 0.05, kind: EventKind::Create, cell_id: 3, position: [0.25, -1.5] },
            Event { t: 0.1, kind: EventKind::Starved, cell_id: 0, position: [1.0 / 3.0, 2.0] },
        ];
        let mut a = Vec::new();
        write_events(&mut a, &ev, 2).unwrap();
        assert!(String::from_utf8_lossy(&a).contains(";"));
        let (back, dim) = read_events(a.as_slice()).unwrap();
        assert_eq!(dim, 2);
        assert_eq!(back, ev);
        let mut b = Vec::new();
        write_events(&mut b, &back, dim).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn outputs_land_in_directory() {
        let dir = tempfile::tempdir().unwrap();
        let snap = Snapshot { step: 7, t: 0.5, table: table(1, &[0.0; 9]) };
        let mut m = Manifest {
            scenario: "custom".into(),
            version: "0".into(),
            seed: Some(1),
            config: serde_json::json!({}),
            metrics: serde_json::json!({"x": 1}),
            warnings: vec![],
            snapshots: vec![],
            created_unix_s: 0,
        };
        let files = write_outputs(dir.path(), &[snap], Some(&[]), Some(&[]), 1, &mut m).unwrap();
        assert_eq!(files.len(), 4);
        assert!(dir.path().join("snapshot_000000007.csv").exists());
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["snapshots"][0]["step"], 7);
    }
}
