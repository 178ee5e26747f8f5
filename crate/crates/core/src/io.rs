//! Flat-file artifacts: snapshot matrices, sparse matrices and POD spectra.
//!
//! Snapshot CSV: one header row of rotor step indices, then one row per dof.
//! Snapshot binary (little endian): the 8 bytes `PMSMSNP1`, then `u64` values
//! `n_s, n_r, n_i, ncols`, `ncols` step indices as `u64`, and the matrix
//! column by column as `f64`.
//! Sparse matrices use the Matrix Market coordinate format with 1-based indices.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use nalgebra_sparse::CsrMatrix;

use crate::error::{Error, Result};
use crate::fem::BlockDims;
use crate::pod::SnapshotSet;
use crate::sparse::{csr_from_triplets, entries};

const SNAPSHOT_MAGIC: &[u8; 8] = b"PMSMSNP1";

fn read_error(path: &Path, e: std::io::Error) -> Error {
    Error::Read {
        path: path.to_path_buf(),
        source: e,
    }
}

fn bad_data(path: &Path, msg: impl Into<String>) -> Error {
    read_error(path, std::io::Error::new(std::io::ErrorKind::InvalidData, msg.into()))
}

pub fn write_snapshots_csv(path: impl AsRef<Path>, set: &SnapshotSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(set.steps.iter().map(|k| k.to_string()))?;
    for row in set.matrix.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a snapshot CSV; `dims` must match the number of data rows.
pub fn read_snapshots_csv(path: impl AsRef<Path>, dims: BlockDims) -> Result<SnapshotSet> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let steps: Vec<usize> = r
        .headers()?
        .iter()
        .map(|h| h.trim().parse().map_err(|_| bad_data(path, format!("bad step index {h:?}"))))
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(dims.total() * steps.len());
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != steps.len() {
            return Err(bad_data(path, format!("row {rows} has {} fields", rec.len())));
        }
        for f in rec.iter() {
            data.push(f.trim().parse::<f64>().map_err(|_| bad_data(path, format!("bad value {f:?}")))?);
        }
        rows += 1;
    }
    if rows != dims.total() {
        return Err(Error::DimensionMismatch(format!("{rows} rows for {} dofs", dims.total())));
    }
    let m = DMatrix::from_row_slice(rows, steps.len(), &data);
    let cols: Vec<_> = m.column_iter().map(|c| c.into_owned()).collect();
    SnapshotSet::new(steps, &cols, dims)
}

pub fn write_snapshots_bin(path: impl AsRef<Path>, set: &SnapshotSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(SNAPSHOT_MAGIC)?;
    let d = set.dims;
    for v in [d.n_s, d.n_r, d.n_i, set.len()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    for &k in &set.steps {
        w.write_all(&(k as u64).to_le_bytes())?;
    }
    for v in set.matrix.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshots_bin(path: impl AsRef<Path>) -> Result<SnapshotSet> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(|e| read_error(path, e))?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| read_error(path, e))?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(bad_data(path, "not a snapshot file"));
    }
    let mut word = [0u8; 8];
    let mut next = |r: &mut BufReader<File>| -> Result<[u8; 8]> {
        r.read_exact(&mut word).map_err(|e| read_error(path, e))?;
        Ok(word)
    };
    let mut head = [0usize; 4];
    for h in head.iter_mut() {
        *h = u64::from_le_bytes(next(&mut r)?) as usize;
    }
    let [n_s, n_r, n_i, ncols] = head;
    let dims = BlockDims { n_s, n_r, n_i };
    let steps: Vec<usize> = (0..ncols)
        .map(|_| next(&mut r).map(|b| u64::from_le_bytes(b) as usize))
        .collect::<Result<_>>()?;
    let n = dims.total();
    let data: Vec<f64> = (0..n * ncols)
        .map(|_| next(&mut r).map(f64::from_le_bytes))
        .collect::<Result<_>>()?;
    let m = DMatrix::from_column_slice(n, ncols, &data);
    let cols: Vec<_> = m.column_iter().map(|c| c.into_owned()).collect();
    SnapshotSet::new(steps, &cols, dims)
}

/// Matrix Market coordinate file, general real.
pub fn write_matrix_market(path: impl AsRef<Path>, m: &CsrMatrix<f64>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in entries(m) {
        writeln!(w, "{} {} {v:e}", i + 1, j + 1)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix<f64>> {
    let path = path.as_ref();
    let r = BufReader::new(File::open(path).map_err(|e| read_error(path, e))?);
    let mut size: Option<(usize, usize, usize)> = None;
    let mut t = Vec::new();
    for line in r.lines() {
        let line = line.map_err(|e| read_error(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad_data(path, format!("expected three fields in {line:?}")));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad_data(path, format!("bad index {s:?}")));
        match size {
            None => size = Some((int(f[0])?, int(f[1])?, int(f[2])?)),
            Some((nr, nc, _)) => {
                let (i, j) = (int(f[0])?, int(f[1])?);
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(bad_data(path, format!("entry ({i}, {j}) outside {nr}x{nc}")));
                }
                let v = f[2].parse::<f64>().map_err(|_| bad_data(path, format!("bad value {:?}", f[2])))?;
                t.push((i - 1, j - 1, v));
            }
        }
    }
    let (nr, nc, nnz) = size.ok_or_else(|| bad_data(path, "missing size line"))?;
    if t.len() != nnz {
        return Err(bad_data(path, format!("{} entries, header says {nnz}", t.len())));
    }
    Ok(csr_from_triplets(nr, nc, t))
}

/// `mode,eigenvalue,normalized` with 1-based modes.
pub fn write_spectrum_csv(path: impl AsRef<Path>, eigenvalues: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["mode", "eigenvalue", "normalized"])?;
    let l1 = eigenvalues.first().copied().unwrap_or(1.0);
    for (i, l) in eigenvalues.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format!("{l:e}"), format!("{:e}", l / l1)])?;
    }
    w.flush()?;
    Ok(())
}

/// Side-by-side normalized spectra, `mode,<name>...`; shorter columns are left empty.
pub fn write_decay_csv(path: impl AsRef<Path>, columns: &[(&str, &[f64])]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["mode".to_string()];
    head.extend(columns.iter().map(|(n, _)| n.to_string()));
    w.write_record(&head)?;
    let rows = columns.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    for i in 0..rows {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(columns.iter().map(|(_, c)| c.get(i).map(|v| format!("{v:e}")).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn small_set() -> SnapshotSet {
        let dims = BlockDims { n_s: 2, n_r: 1, n_i: 2 };
        let cols = vec![
            DVector::from_vec(vec![1.0, -2.5, 3.0e-9, 4.0, 0.0]),
            DVector::from_vec(vec![0.1, 0.2, 0.3, 0.4, 1.0 / 3.0]),
        ];
        SnapshotSet::new(vec![7, 2], &cols, dims).unwrap()
    }

    #[test]
    fn snapshot_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let set = small_set();
        let csv = dir.path().join("s.csv");
        write_snapshots_csv(&csv, &set).unwrap();
        let back = read_snapshots_csv(&csv, set.dims).unwrap();
        assert_eq!(back.steps, set.steps);
        assert_eq!(back.matrix, set.matrix);
        let first = std::fs::read_to_string(&csv).unwrap();
        assert_eq!(first.lines().next().unwrap(), "7,2");

        let bin = dir.path().join("s.bin");
        write_snapshots_bin(&bin, &set).unwrap();
        let back = read_snapshots_bin(&bin).unwrap();
        assert_eq!(back.dims, set.dims);
        assert_eq!(back.matrix, set.matrix);
        assert!(read_snapshots_csv(&csv, BlockDims { n_s: 1, n_r: 1, n_i: 2 }).is_err());
    }

    #[test]
    fn matrix_market_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = csr_from_triplets(3, 4, [(0, 0, 1.5), (2, 3, -2.0), (1, 1, 1e-300)]);
        let p = dir.path().join("m.mtx");
        write_matrix_market(&p, &m).unwrap();
        let back = read_matrix_market(&p).unwrap();
        assert_eq!(back, m);
        std::fs::write(&p, "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").unwrap();
        assert!(read_matrix_market(&p).is_err());
    }

    #[test]
    fn decay_columns_of_unequal_length() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write_decay_csv(&p, &[("stator", &[1.0, 0.5]), ("rotor", &[1.0])]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().collect::<Vec<_>>(), ["mode,stator,rotor", "1,1e0,1e0", "2,5e-1,"]);
    }
}
