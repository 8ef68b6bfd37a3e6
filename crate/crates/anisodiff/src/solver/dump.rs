//! Field dumps: CSV (indices, coordinates, value) and a little-endian binary
//! format.
//!
//! Binary layout: magic `ANDF`, `u32` version, `u32` n, n x `u64` counts,
//! n x `f64` spacings, `f64` time, then the values as row-major `f64`.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

use super::grid::{Field, Grid};

const MAGIC: &[u8; 4] = b"ANDF";
const VERSION: u32 = 1;
const MAX_DIM: usize = 8;

/// Decoded binary dump. The lower corner is not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub counts: Vec<usize>,
    pub h: Vec<f64>,
    pub time: f64,
    pub values: Vec<f64>,
}

impl FieldDump {
    pub fn into_field(self, lower: &[f64]) -> Result<Field> {
        if lower.len() != self.counts.len() {
            return Err(Error::DimensionMismatch("lower corner length".into()));
        }
        let upper = lower.iter().zip(&self.counts).zip(&self.h).map(|((l, c), h)| l + *c as f64 * h).collect();
        let grid = Grid::new(lower.to_vec(), upper, self.counts)?;
        Field::new(grid, self.values, self.time)
    }
}

pub fn write_binary<W: Write>(field: &Field, mut w: W) -> Result<()> {
    let g = &field.grid;
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(g.dim() as u32)?;
    for c in g.counts() {
        w.write_u64::<LittleEndian>(*c as u64)?;
    }
    for h in g.h() {
        w.write_f64::<LittleEndian>(*h)?;
    }
    w.write_f64::<LittleEndian>(field.time)?;
    for v in &field.values {
        w.write_f64::<LittleEndian>(*v)?;
    }
    Ok(())
}

pub fn encode_binary(field: &Field) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 16 * field.grid.dim() + 8 * field.values.len());
    write_binary(field, &mut out).expect("writing to a Vec cannot fail");
    out
}

fn truncated(what: &str) -> Error {
    Error::Parse(format!("binary dump truncated while reading {what}"))
}

/// Decodes a binary dump, rejecting malformed or inconsistent headers.
pub fn decode_binary(bytes: &[u8]) -> Result<FieldDump> {
    let mut r = bytes;
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| truncated("magic"))?;
    if &magic != MAGIC {
        return Err(Error::Parse("not a field dump (bad magic)".into()));
    }
    let version = r.read_u32::<LittleEndian>().map_err(|_| truncated("version"))?;
    if version != VERSION {
        return Err(Error::Parse(format!("unsupported dump version {version}")));
    }
    let n = r.read_u32::<LittleEndian>().map_err(|_| truncated("dimension"))? as usize;
    if n == 0 || n > MAX_DIM {
        return Err(Error::Parse(format!("dimension {n} outside 1..={MAX_DIM}")));
    }
    let mut counts = Vec::with_capacity(n);
    let mut total: usize = 1;
    for _ in 0..n {
        let c = r.read_u64::<LittleEndian>().map_err(|_| truncated("counts"))?;
        let c = usize::try_from(c).map_err(|_| Error::Parse("count does not fit".into()))?;
        if c == 0 {
            return Err(Error::Parse("zero cell count".into()));
        }
        total = total.checked_mul(c).ok_or_else(|| Error::Parse("cell count overflow".into()))?;
        counts.push(c);
    }
    let mut h = Vec::with_capacity(n);
    for _ in 0..n {
        let v = r.read_f64::<LittleEndian>().map_err(|_| truncated("spacings"))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Parse(format!("spacing {v} is not positive")));
        }
        h.push(v);
    }
    let time = r.read_f64::<LittleEndian>().map_err(|_| truncated("time"))?;
    if !time.is_finite() {
        return Err(Error::Parse("non-finite time".into()));
    }
    let expect = total.checked_mul(8).ok_or_else(|| Error::Parse("payload size overflow".into()))?;
    if r.len() != expect {
        return Err(Error::Parse(format!("payload has {} bytes, header implies {expect}", r.len())));
    }
    let values = r.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8"))).collect();
    Ok(FieldDump { counts, h, time, values })
}

/// CSV with columns `t, i0.., x0.., value`.
pub fn write_csv<W: Write>(field: &Field, w: W) -> Result<()> {
    let g = &field.grid;
    let n = g.dim();
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("i{i}")));
    header.extend((0..n).map(|i| format!("x{i}")));
    header.push("value".into());
    wr.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(2 * n + 2);
    for c in 0..g.len() {
        row.clear();
        row.push(field.time.to_string());
        let idx = g.multi_index(c);
        row.extend(idx.iter().map(|k| k.to_string()));
        row.extend(idx.iter().enumerate().map(|(i, k)| g.coord(i, *k).to_string()));
        row.push(field.values[c].to_string());
        wr.write_record(&row).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

/// Parsed CSV dump: cell indices, coordinates and values.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDump {
    pub time: f64,
    pub indices: Vec<Vec<usize>>,
    pub coords: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

pub fn read_csv<R: Read>(r: R) -> Result<CsvDump> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(csv_err)?.clone();
    let cols = header.len();
    if cols < 4 || (cols - 2) % 2 != 0 || &header[0] != "t" || &header[cols - 1] != "value" {
        return Err(Error::Parse("unexpected CSV header".into()));
    }
    let n = (cols - 2) / 2;
    let mut out = CsvDump { time: f64::NAN, indices: Vec::new(), coords: Vec::new(), values: Vec::new() };
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let num = |j: usize| -> Result<f64> {
            rec[j]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("row {}: bad number {:?}", line + 2, &rec[j])))
        };
        let t = num(0)?;
        if out.values.is_empty() {
            out.time = t;
        } else if t != out.time {
            return Err(Error::Parse(format!("row {}: mixed slice times", line + 2)));
        }
        let idx = (1..=n)
            .map(|j| {
                rec[j]
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("row {}: bad index {:?}", line + 2, &rec[j])))
            })
            .collect::<Result<Vec<_>>>()?;
        let x = (n + 1..=2 * n).map(num).collect::<Result<Vec<_>>>()?;
        out.indices.push(idx);
        out.coords.push(x);
        out.values.push(num(2 * n + 1)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Field {
        let g = Grid::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![3, 4]).unwrap();
        Field::from_fn(&g, 0.25, |x| x[0] * x[0] - 0.1 * x[1])
    }

    #[test]
    fn binary_round_trip() {
        let f = sample();
        let bytes = encode_binary(&f);
        let d = decode_binary(&bytes).unwrap();
        assert_eq!(d.values, f.values);
        assert_eq!(d.counts, vec![3, 4]);
        assert_eq!(d.time, 0.25);
        let back = d.into_field(&[0.0, -1.0]).unwrap();
        assert_eq!(back.values, f.values);
        assert_eq!(back.grid.h(), f.grid.h());
    }

    #[test]
    fn binary_rejects_truncation_and_garbage() {
        let bytes = encode_binary(&sample());
        for cut in [0, 3, 8, 12, 20, bytes.len() - 1] {
            assert!(matches!(decode_binary(&bytes[..cut]), Err(Error::Parse(_))));
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_binary(&extra).is_err());
        assert!(decode_binary(b"XXXX\x01\0\0\0").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let f = sample();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let d = read_csv(buf.as_slice()).unwrap();
        assert_eq!(d.values, f.values);
        assert_eq!(d.time, 0.25);
        assert_eq!(d.indices[5], f.grid.multi_index(5));
    }
}
