use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FERMAT01";

/// Dense row-major `n x n` distance matrix; `+inf` marks unreachable pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Format(format!(
                "matrix of order {n} needs {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub(crate) fn from_rows(n: usize, rows: Vec<Vec<f64>>) -> Self {
        let data = rows.into_iter().flatten().collect();
        Self { n, data }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn count_unreachable(&self) -> usize {
        self.data.iter().filter(|d| d.is_infinite()).count()
    }

    /// CSV: `n` rows of `n` columns, `inf` for unreachable entries. Values are
    /// printed in shortest round-trip form, so parsing restores them exactly.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.n {
            let row = self.row(i);
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    w.write_all(b",")?;
                }
                write!(w, "{v}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut data = Vec::new();
        let mut n = None;
        for (row, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut count = 0;
            for field in line.split(',') {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    row,
                    reason: format!("bad number {field:?}"),
                })?;
                data.push(v);
                count += 1;
            }
            let n = *n.get_or_insert(count);
            if n != count {
                return Err(Error::Parse {
                    row,
                    reason: format!("expected {n} columns, found {count}"),
                });
            }
        }
        let n = n.unwrap_or(0);
        Self::new(n, data)
    }

    /// Binary: magic `FERMAT01`, `u64` order, row-major `f64`, all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("missing FERMAT01 magic".into()));
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            r.read_exact(&mut word)?;
            data.push(f64::from_le_bytes(word));
        }
        Self::new(n, data)
    }
}
