//! Field serialization: a small little-endian binary container and CSV
//! tables carrying the configuration hash.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::field::{ScalarField, VelocityField};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SKFD";
const VERSION: u32 = 1;
const KIND_SCALAR: u32 = 0;
const KIND_VELOCITY: u32 = 1;

/// Decoded binary field.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredField {
    Scalar(ScalarField),
    Velocity(VelocityField),
}

fn write_header(w: &mut impl Write, kind: u32, nx: usize, ny: usize, hx: f64, hy: f64) -> Result<()> {
    w.write_all(MAGIC)?;
    for x in [VERSION, kind, nx as u32, ny as u32] {
        w.write_all(&x.to_le_bytes())?;
    }
    w.write_all(&hx.to_le_bytes())?;
    w.write_all(&hy.to_le_bytes())?;
    Ok(())
}

fn write_values(w: &mut impl Write, xs: &[f64]) -> Result<()> {
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_velocity(path: &Path, f: &VelocityField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, KIND_VELOCITY, f.nx, f.ny, f.hx, f.hy)?;
    write_values(&mut w, &f.u)?;
    write_values(&mut w, &f.v)?;
    w.flush()?;
    Ok(())
}

pub fn write_scalar(path: &Path, f: &ScalarField) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, KIND_SCALAR, f.nx, f.ny, f.hx, f.hy)?;
    write_values(&mut w, &f.values)?;
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; 8 * n];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn read_field(path: &Path) -> Result<StoredField> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Serde(format!("{}: not a field file", path.display())));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Serde(format!("unsupported field file version {version}")));
    }
    let kind = read_u32(&mut r)?;
    let nx = read_u32(&mut r)? as usize;
    let ny = read_u32(&mut r)? as usize;
    let h = read_f64s(&mut r, 2)?;
    let (hx, hy) = (h[0], h[1]);
    match kind {
        KIND_SCALAR => Ok(StoredField::Scalar(ScalarField {
            nx,
            ny,
            hx,
            hy,
            values: read_f64s(&mut r, nx * ny)?,
        })),
        KIND_VELOCITY => {
            let u = read_f64s(&mut r, (nx + 1) * ny)?;
            let v = read_f64s(&mut r, nx * (ny + 1))?;
            Ok(StoredField::Velocity(VelocityField { nx, ny, hx, hy, u, v }))
        }
        k => Err(Error::Serde(format!("unknown field kind {k}"))),
    }
}

/// Writes a numeric table preceded by a `# config_hash=<hash>` comment line.
pub fn write_csv(path: &Path, config_hash: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "# config_hash={config_hash}")?;
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| Error::Serde(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Shape(format!(
                "csv row has {} columns, header has {}",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row.iter().map(|x| format!("{x:.17e}"))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_csv`]; returns `(hash, header, rows)`.
pub fn read_csv(path: &Path) -> Result<(String, Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    let (first, rest) = text.split_once('\n').unwrap_or((&text, ""));
    let hash = first
        .strip_prefix("# config_hash=")
        .ok_or_else(|| Error::Serde(format!("{}: missing config hash line", path.display())))?
        .trim()
        .to_string();
    let mut rdr = csv::Reader::from_reader(rest.as_bytes());
    let csv_err = |e: csv::Error| Error::Serde(e.to_string());
    let header = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Serde(format!("{s}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((hash, header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fields::GridSpec;

    #[test]
    fn binary_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(9, 8, 1.0, 0.5, 8, 1.0).unwrap();
        let f = VelocityField::from_fn(&g, |x, y| x.exp() - y, |x, y| (x * y).sin());
        let p = dir.path().join("f.bin");
        write_velocity(&p, &f).unwrap();
        assert_eq!(read_field(&p).unwrap(), StoredField::Velocity(f));
        let s = ScalarField::from_fn(&g, |x, y| x + 1e-300 * y);
        write_scalar(&p, &s).unwrap();
        assert_eq!(read_field(&p).unwrap(), StoredField::Scalar(s));
    }

    #[test]
    fn csv_roundtrip_keeps_hash_and_bits() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let rows = vec![vec![0.1, 1.0 / 3.0], vec![-2.5e-17, 7.0]];
        write_csv(&p, "abc123", &["a", "b"], &rows).unwrap();
        let (h, hdr, back) = read_csv(&p).unwrap();
        assert_eq!(h, "abc123");
        assert_eq!(hdr, vec!["a", "b"]);
        assert_eq!(back, rows);
        assert!(write_csv(&p, "x", &["a"], &rows).is_err());
    }
}
