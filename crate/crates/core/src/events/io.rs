//! Event files: CSV `t_us,x,y,p` and a length-prefixed little-endian binary
//! variant with 13-byte records `(u64 t, u16 x, u16 y, i8 p)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Event, Polarity};
use crate::error::{csv_reader, DataError};

const RECORD_LEN: usize = 13;

#[derive(Serialize, Deserialize)]
struct EventRow {
    t_us: u64,
    x: u16,
    y: u16,
    p: i8,
}

pub fn write_events_csv(path: &Path, events: &[Event]) -> Result<(), DataError> {
    let file = File::create(path).map_err(|e| DataError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| DataError::io(path, e);
    writeln!(w, "t_us,x,y,p").map_err(io)?;
    for e in events {
        writeln!(w, "{},{},{},{}", e.t, e.x, e.y, e.p.as_i8()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_events_csv(path: &Path) -> Result<Vec<Event>, DataError> {
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| DataError::csv(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t_us", "x", "y", "p"] {
        return Err(DataError::format(path, "expected header t_us,x,y,p"));
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<EventRow>().enumerate() {
        let row = row.map_err(|e| DataError::csv(path, e))?;
        let p = Polarity::from_i8(row.p)
            .ok_or_else(|| DataError::format(path, format!("row {}: polarity {} is not -1 or 1", i + 1, row.p)))?;
        out.push(Event::new(row.t_us, row.x, row.y, p));
    }
    Ok(out)
}

pub fn write_events_binary(path: &Path, events: &[Event]) -> Result<(), DataError> {
    let file = File::create(path).map_err(|e| DataError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| DataError::io(path, e);
    w.write_all(&(events.len() as u64).to_le_bytes()).map_err(io)?;
    for e in events {
        let mut rec = [0u8; RECORD_LEN];
        rec[0..8].copy_from_slice(&e.t.to_le_bytes());
        rec[8..10].copy_from_slice(&e.x.to_le_bytes());
        rec[10..12].copy_from_slice(&e.y.to_le_bytes());
        rec[12] = e.p.as_i8() as u8;
        w.write_all(&rec).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_events_binary(path: &Path) -> Result<Vec<Event>, DataError> {
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| DataError::io(path, e);
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(io)?;
    let n = u64::from_le_bytes(len) as usize;
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(io)?;
    if buf.len() != n * RECORD_LEN {
        return Err(DataError::format(
            path,
            format!("length prefix says {n} events but payload holds {} bytes", buf.len()),
        ));
    }
    buf.chunks_exact(RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| {
            let t = u64::from_le_bytes(rec[0..8].try_into().unwrap());
            let x = u16::from_le_bytes(rec[8..10].try_into().unwrap());
            let y = u16::from_le_bytes(rec[10..12].try_into().unwrap());
            let p = Polarity::from_i8(rec[12] as i8)
                .ok_or_else(|| DataError::format(path, format!("record {i}: bad polarity byte {}", rec[12])))?;
            Ok(Event::new(t, x, y, p))
        })
        .collect()
}

/// Reads either format, choosing binary for `.bin` files.
pub fn read_events(path: &Path) -> Result<Vec<Event>, DataError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => read_events_binary(path),
        _ => read_events_csv(path),
    }
}
