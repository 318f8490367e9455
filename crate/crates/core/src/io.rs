//! Point-cloud CSV: one row per particle, `D` comma-separated columns, no
//! header, `.` as decimal separator. `D` is taken from the first row.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::point::PointCloud;

pub fn write_cloud_csv<W: Write>(cloud: &PointCloud, mut w: W) -> Result<()> {
    for p in cloud.iter() {
        for (a, v) in p.iter().enumerate() {
            if a > 0 {
                w.write_all(b",")?;
            }
            write!(w, "{v}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_cloud_csv<R: BufRead>(r: R) -> Result<PointCloud> {
    let mut dim = None;
    let mut coords = Vec::new();
    for (row, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = coords.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row,
                reason: format!("bad number {field:?}"),
            })?;
            coords.push(v);
        }
        let cols = coords.len() - before;
        let d = *dim.get_or_insert(cols);
        if cols != d {
            return Err(Error::Parse {
                row,
                reason: format!("expected {d} columns, found {cols}"),
            });
        }
    }
    match dim {
        None => Err(Error::EmptyCloud),
        Some(d) => PointCloud::new(d, coords),
    }
}

pub fn write_cloud_csv_file(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_cloud_csv(cloud, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_cloud_csv_file(path: &Path) -> Result<PointCloud> {
    read_cloud_csv(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn infers_dimension_and_rejects_ragged() {
        let c = read_cloud_csv("0.5,1\n2,3.25\n".as_bytes()).unwrap();
        assert_eq!(c.dim(), 2);
        assert_eq!(c.point(1), &[2.0, 3.25]);
        let err = read_cloud_csv("0.5,1\n2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }));
        assert!(read_cloud_csv("1;2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(rows in prop::collection::vec((-1e9..1e9f64, -1.0..1.0f64, prop::num::f64::NORMAL), 1..20)) {
            let c = PointCloud::from_rows(rows.into_iter().map(|(a, b, c)| [a, b, c])).unwrap();
            let mut buf = Vec::new();
            write_cloud_csv(&c, &mut buf).unwrap();
            prop_assert_eq!(read_cloud_csv(&buf[..]).unwrap(), c);
        }
    }
}
