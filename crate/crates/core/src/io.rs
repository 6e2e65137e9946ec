//! File formats.
//!
//! Binary layouts are little-endian with an 8-byte `u64` element count:
//!
//! - weights: count, then `f32` or `f64` values (the width is implied by the
//!   file length);
//! - ancestors and offspring: count, then `u64` values.
//!
//! CSV files are UTF-8, comma separated, with a header row.

use std::io::{self, BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::resample::{AncestorVector, OffspringVector};
use crate::weights::{Precision, WeightVector};

fn io_err(e: io::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn write_weights_binary<W: Write>(mut out: W, w: &WeightVector) -> io::Result<()> {
    out.write_all(&(w.len() as u64).to_le_bytes())?;
    for &v in w.values() {
        match w.precision() {
            Precision::Single => out.write_all(&(v as f32).to_le_bytes())?,
            Precision::Double => out.write_all(&v.to_le_bytes())?,
        }
    }
    Ok(())
}

pub fn read_weights_binary<R: Read>(mut input: R) -> Result<WeightVector> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io_err)?;
    if bytes.len() < 8 {
        return Err(Error::Format("weight file shorter than its header".into()));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let body = &bytes[8..];
    if n == 0 {
        return Err(Error::Format("weight file declares zero values".into()));
    }
    let values = if body.len() == 4 * n {
        body.chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect::<Vec<_>>()
    } else if body.len() == 8 * n {
        body.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect::<Vec<_>>()
    } else {
        return Err(Error::Format(format!(
            "{} payload bytes do not hold {n} 32- or 64-bit floats",
            body.len()
        )));
    };
    let precision = if body.len() == 4 * n { Precision::Single } else { Precision::Double };
    WeightVector::new(values, precision)
}

pub fn write_weights_csv<W: Write>(mut out: W, w: &WeightVector) -> io::Result<()> {
    writeln!(out, "index,weight")?;
    for (i, v) in w.values().iter().enumerate() {
        writeln!(out, "{i},{v:e}")?;
    }
    Ok(())
}

fn write_indices_binary<W: Write>(mut out: W, values: impl ExactSizeIterator<Item = u64>) -> io::Result<()> {
    out.write_all(&(values.len() as u64).to_le_bytes())?;
    for v in values {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_indices_binary<R: Read>(mut input: R) -> Result<Vec<u64>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io_err)?;
    if bytes.len() < 8 {
        return Err(Error::Format("index file shorter than its header".into()));
    }
    let n = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    if bytes.len() - 8 != 8 * n {
        return Err(Error::Format(format!("expected {n} 64-bit values, found {} bytes", bytes.len() - 8)));
    }
    Ok(bytes[8..].chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn write_column_csv<W: Write>(mut out: W, header: &str, values: impl Iterator<Item = u64>) -> io::Result<()> {
    writeln!(out, "{header}")?;
    for v in values {
        writeln!(out, "{v}")?;
    }
    Ok(())
}

fn read_column_csv<R: BufRead>(input: R, header: &str) -> Result<Vec<u64>> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == header => {}
        _ => return Err(Error::Format(format!("missing {header:?} header"))),
    }
    lines
        .map(|l| {
            let l = l.map_err(io_err)?;
            l.trim().parse::<u64>().map_err(|e| Error::Format(format!("{l:?}: {e}")))
        })
        .collect()
}

pub fn write_ancestors_binary<W: Write>(out: W, a: &AncestorVector) -> io::Result<()> {
    write_indices_binary(out, a.as_slice().iter().map(|&v| v as u64))
}

pub fn read_ancestors_binary<R: Read>(input: R) -> Result<AncestorVector> {
    AncestorVector::new(read_indices_binary(input)?.into_iter().map(|v| v as usize).collect())
}

pub fn write_ancestors_csv<W: Write>(out: W, a: &AncestorVector) -> io::Result<()> {
    write_column_csv(out, "ancestor", a.as_slice().iter().map(|&v| v as u64))
}

pub fn read_ancestors_csv<R: BufRead>(input: R) -> Result<AncestorVector> {
    AncestorVector::new(read_column_csv(input, "ancestor")?.into_iter().map(|v| v as usize).collect())
}

pub fn write_offspring_binary<W: Write>(out: W, o: &OffspringVector) -> io::Result<()> {
    write_indices_binary(out, o.as_slice().iter().map(|&v| v as u64))
}

pub fn read_offspring_binary<R: Read>(input: R) -> Result<OffspringVector> {
    to_offspring(read_indices_binary(input)?)
}

pub fn write_offspring_csv<W: Write>(out: W, o: &OffspringVector) -> io::Result<()> {
    write_column_csv(out, "offspring", o.as_slice().iter().map(|&v| v as u64))
}

pub fn read_offspring_csv<R: BufRead>(input: R) -> Result<OffspringVector> {
    to_offspring(read_column_csv(input, "offspring")?)
}

fn to_offspring(raw: Vec<u64>) -> Result<OffspringVector> {
    let counts = raw
        .into_iter()
        .map(|v| u32::try_from(v).map_err(|_| Error::Format(format!("offspring count {v} too large"))))
        .collect::<Result<Vec<_>>>()?;
    OffspringVector::new(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resample::ancestors_to_offspring;

    #[test]
    fn single_precision_file_size() {
        let w = WeightVector::new(vec![0.5; 1024], Precision::Single).unwrap();
        let mut buf = Vec::new();
        write_weights_binary(&mut buf, &w).unwrap();
        assert_eq!(buf.len(), 4 * 1024 + 8);
        assert_eq!(read_weights_binary(&buf[..]).unwrap(), w);
    }

    #[test]
    fn rejects_truncated_files() {
        assert!(read_weights_binary(&[1u8, 0, 0][..]).is_err());
        let mut buf = 3u64.to_le_bytes().to_vec();
        buf.extend_from_slice(&[0u8; 10]);
        assert!(read_weights_binary(&buf[..]).is_err());
        assert!(read_ancestors_binary(&buf[..]).is_err());
    }

    #[test]
    fn index_formats() {
        let a = AncestorVector::new(vec![2, 2, 0, 5, 5, 5]).unwrap();
        let mut bin = Vec::new();
        write_ancestors_binary(&mut bin, &a).unwrap();
        assert_eq!(bin.len(), 8 + 6 * 8);
        assert_eq!(read_ancestors_binary(&bin[..]).unwrap(), a);

        let mut csv = Vec::new();
        write_ancestors_csv(&mut csv, &a).unwrap();
        assert_eq!(String::from_utf8(csv.clone()).unwrap(), "ancestor\n2\n2\n0\n5\n5\n5\n");
        assert_eq!(read_ancestors_csv(&csv[..]).unwrap(), a);

        let o = ancestors_to_offspring(&a);
        let mut csv = Vec::new();
        write_offspring_csv(&mut csv, &o).unwrap();
        assert_eq!(read_offspring_csv(&csv[..]).unwrap(), o);
        let mut bin = Vec::new();
        write_offspring_binary(&mut bin, &o).unwrap();
        assert_eq!(read_offspring_binary(&bin[..]).unwrap(), o);
    }

    #[test]
    fn weights_csv() {
        let w = WeightVector::double(vec![0.25, 1.5]).unwrap();
        let mut csv = Vec::new();
        write_weights_csv(&mut csv, &w).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "index,weight\n0,2.5e-1\n1,1.5e0\n");
    }
}
