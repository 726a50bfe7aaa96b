//! Dataset and assignment files.
//!
//! Binary layout: the magic `NDPT`, a little-endian `u32` point count, a
//! little-endian `u32` dimensionality, then `count * dims` little-endian
//! `f64` values in row-major order. Ids are the row indices.
//!
//! CSV layout: one point per line, comma-separated decimal values, no header
//! unless requested. With `id_column` the first field holds the point id.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::PartitionAssignment;

pub const MAGIC: &[u8; 4] = b"NDPT";
const HEADER_LEN: u64 = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Binary,
    Csv,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CsvOptions {
    pub header: bool,
    pub id_column: bool,
}

/// Binary if the file starts with the magic bytes, CSV otherwise.
pub fn detect_format(path: &Path) -> Result<DatasetFormat> {
    let mut buf = [0u8; 4];
    let mut f = File::open(path).map_err(Error::at(path))?;
    let mut read = 0;
    while read < 4 {
        let n = f.read(&mut buf[read..])?;
        if n == 0 {
            break;
        }
        read += n;
    }
    Ok(if read == 4 && &buf == MAGIC {
        DatasetFormat::Binary
    } else {
        DatasetFormat::Csv
    })
}

pub fn load_dataset(path: &Path, format: Option<DatasetFormat>, csv: CsvOptions) -> Result<Dataset> {
    let format = match format {
        Some(f) => f,
        None => detect_format(path)?,
    };
    match format {
        DatasetFormat::Binary => load_binary(path),
        DatasetFormat::Csv => load_csv(path, csv),
    }
}

pub fn save_dataset(ds: &Dataset, path: &Path, format: DatasetFormat, csv: CsvOptions) -> Result<()> {
    match format {
        DatasetFormat::Binary => save_binary(ds, path),
        DatasetFormat::Csv => save_csv(ds, path, csv),
    }
}

fn binary_err(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::Binary {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

pub fn load_binary(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    File::open(path).map_err(Error::at(path))?.read_to_end(&mut bytes)?;
    if bytes.is_empty() {
        return Err(binary_err(path, 0, "empty file"));
    }
    if bytes.len() < HEADER_LEN as usize {
        return Err(binary_err(path, bytes.len() as u64, "truncated header"));
    }
    if &bytes[0..4] != MAGIC {
        return Err(binary_err(path, 0, "missing NDPT magic"));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let dims = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if dims == 0 {
        return Err(binary_err(path, 8, "dimensionality is zero"));
    }
    if count == 0 {
        return Err(binary_err(path, 4, "point count is zero"));
    }
    let expected = count
        .checked_mul(dims)
        .and_then(|v| v.checked_mul(8))
        .ok_or_else(|| binary_err(path, 4, "payload size overflows"))?;
    let payload = &bytes[HEADER_LEN as usize..];
    if payload.len() != expected {
        return Err(binary_err(
            path,
            HEADER_LEN + payload.len().min(expected) as u64,
            format!("expected {expected} payload bytes for {count}x{dims}, found {}", payload.len()),
        ));
    }
    let mut coords = Vec::with_capacity(count * dims);
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(binary_err(path, HEADER_LEN + 8 * i as u64, "non-finite value"));
        }
        coords.push(v);
    }
    Dataset::new(dims, coords)
}

pub fn save_binary(ds: &Dataset, path: &Path) -> Result<()> {
    if ds.ids().iter().enumerate().any(|(i, &id)| id != i as u64) {
        return Err(Error::invalid(
            "binary datasets carry implicit row-index ids; use CSV with an id column for custom ids",
        ));
    }
    let count = u32::try_from(ds.len()).map_err(|_| Error::invalid("too many points for the binary format"))?;
    let dims = u32::try_from(ds.dims()).map_err(|_| Error::invalid("too many dimensions for the binary format"))?;
    let mut w = BufWriter::new(File::create(path).map_err(Error::at(path))?);
    w.write_all(MAGIC)?;
    w.write_all(&count.to_le_bytes())?;
    w.write_all(&dims.to_le_bytes())?;
    for &v in ds.coords() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    let message = e.to_string();
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::File {
            path: path.to_path_buf(),
            source,
        },
        _ => Error::Csv {
            path: path.to_path_buf(),
            line,
            message,
        },
    }
}

fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

pub fn load_csv(path: &Path, opts: CsvOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let err = |line: usize, message: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut dims: Option<usize> = None;
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let lineno = record_line(&record);
        let mut fields = record.iter();
        let id = if opts.id_column {
            let raw = fields.next().unwrap_or("");
            raw.parse::<u64>()
                .map_err(|_| err(lineno, format!("invalid point id {raw:?}")))?
        } else {
            ids.len() as u64
        };
        let before = coords.len();
        for (col, raw) in fields.enumerate() {
            let v: f64 = raw
                .parse()
                .map_err(|_| err(lineno, format!("field {} is not a number: {raw:?}", col + 1)))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("field {} is not finite", col + 1)));
            }
            coords.push(v);
        }
        let width = coords.len() - before;
        match dims {
            None if width == 0 => return Err(err(lineno, "row has no coordinates".into())),
            None => dims = Some(width),
            Some(d) if d != width => {
                return Err(err(lineno, format!("row has {width} coordinates, expected {d}")));
            }
            Some(_) => {}
        }
        ids.push(id);
    }
    let Some(dims) = dims else {
        return Err(err(0, "no data rows".into()));
    };
    Dataset::with_ids(dims, ids, coords)
}

pub fn save_csv(ds: &Dataset, path: &Path, opts: CsvOptions) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    if opts.header {
        let mut cols: Vec<String> = (0..ds.dims()).map(|j| format!("x{j}")).collect();
        if opts.id_column {
            cols.insert(0, "id".into());
        }
        w.write_record(&cols).map_err(|e| csv_error(path, e))?;
    }
    for (i, row) in ds.rows().enumerate() {
        // `to_string` on f64 gives the shortest representation that parses back exactly.
        let id = opts.id_column.then(|| ds.id(i).to_string());
        w.write_record(id.into_iter().chain(row.iter().map(f64::to_string)))
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `point_id,partition_id,affected` rows, preceded by a
/// `# partitions=<m>` comment so empty trailing partitions survive a reload.
pub fn write_assignment_csv(assignment: &PartitionAssignment, w: &mut impl Write) -> Result<()> {
    writeln!(w, "# partitions={}", assignment.partition_count())?;
    let mut w = csv::Writer::from_writer(w);
    for ((id, label), affected) in assignment
        .point_ids()
        .iter()
        .zip(assignment.labels())
        .zip(assignment.affected_flags())
    {
        w.serialize((id, label, u8::from(*affected)))
            .map_err(|e| Error::invalid(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_assignment_csv(assignment: &PartitionAssignment, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(Error::at(path))?);
    write_assignment_csv(assignment, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Reads an assignment and reorders it to match `ds` row order.
pub fn load_assignment_csv(path: &Path, ds: &Dataset) -> Result<PartitionAssignment> {
    let text = std::fs::read_to_string(path).map_err(Error::at(path))?;
    let err = |line: usize, message: String| Error::Csv {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut declared = None;
    for (idx, line) in text.lines().enumerate() {
        let Some(rest) = line.trim().strip_prefix('#') else { continue };
        if let Some(m) = rest.trim().strip_prefix("partitions=") {
            declared = Some(m.parse::<usize>().map_err(|_| err(idx + 1, format!("bad partition count {m:?}")))?);
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut labels: Vec<Option<usize>> = vec![None; ds.len()];
    let mut affected = vec![false; ds.len()];
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let lineno = record_line(&record);
        if record.len() != 3 {
            return Err(err(lineno, format!("expected 3 fields, found {}", record.len())));
        }
        let id: u64 = record[0].parse().map_err(|_| err(lineno, format!("bad point id {:?}", &record[0])))?;
        let label: usize = record[1].parse().map_err(|_| err(lineno, format!("bad partition id {:?}", &record[1])))?;
        let flag = match &record[2] {
            "0" => false,
            "1" => true,
            other => return Err(err(lineno, format!("bad affected flag {other:?}"))),
        };
        let row = ds
            .index_of(id)
            .ok_or_else(|| err(lineno, format!("point id {id} is not in the dataset")))?;
        if labels[row].replace(label).is_some() {
            return Err(err(lineno, format!("point id {id} listed twice")));
        }
        affected[row] = flag;
    }
    let labels: Vec<usize> = labels
        .into_iter()
        .enumerate()
        .map(|(row, l)| l.ok_or_else(|| err(0, format!("point id {} has no label", ds.id(row)))))
        .collect::<Result<_>>()?;
    let m = declared.unwrap_or_else(|| labels.iter().max().map_or(1, |&l| l + 1));
    PartitionAssignment::new(m, ds.ids().to_vec(), labels, affected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::generate_uniform;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("ndpart-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let ds = generate_uniform(37, 5, -1e6, 1e6, 3).unwrap();
        let p = tmp("rt.bin");
        save_dataset(&ds, &p, DatasetFormat::Binary, CsvOptions::default()).unwrap();
        assert_eq!(detect_format(&p).unwrap(), DatasetFormat::Binary);
        let back = load_dataset(&p, None, CsvOptions::default()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn binary_layout() {
        let ds = Dataset::new(2, vec![1.0, -2.5]).unwrap();
        let p = tmp("layout.bin");
        save_binary(&ds, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let mut expected = b"NDPT".to_vec();
        expected.extend(1u32.to_le_bytes());
        expected.extend(2u32.to_le_bytes());
        expected.extend(1.0f64.to_le_bytes());
        expected.extend((-2.5f64).to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn csv_round_trip_with_ids_and_header() {
        let ds = Dataset::with_ids(3, vec![9, 4, 100], vec![0.1, 0.2, 0.3, 1e-300, -5.0, 7.0, 3.0, 2.0, 1.0]).unwrap();
        let opts = CsvOptions { header: true, id_column: true };
        let p = tmp("rt.csv");
        save_dataset(&ds, &p, DatasetFormat::Csv, opts).unwrap();
        assert_eq!(detect_format(&p).unwrap(), DatasetFormat::Csv);
        let back = load_dataset(&p, None, opts).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn csv_ragged_row_names_the_line() {
        let p = tmp("ragged.csv");
        std::fs::write(&p, "1,2,3,4\n5,6,7,8\n1,2,3\n").unwrap();
        let err = load_dataset(&p, None, CsvOptions::default()).unwrap_err();
        match err {
            Error::Csv { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("expected 4"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn csv_rejects_garbage_and_non_finite() {
        let p = tmp("bad.csv");
        std::fs::write(&p, "1,2\n1,abc\n").unwrap();
        assert!(matches!(load_csv(&p, CsvOptions::default()), Err(Error::Csv { line: 2, .. })));
        std::fs::write(&p, "1,inf\n").unwrap();
        assert!(matches!(load_csv(&p, CsvOptions::default()), Err(Error::Csv { line: 1, .. })));
    }

    #[test]
    fn empty_files_are_errors() {
        let p = tmp("empty.dat");
        std::fs::write(&p, "").unwrap();
        assert!(load_dataset(&p, None, CsvOptions::default()).is_err());
        assert!(load_binary(&p).is_err());
    }

    #[test]
    fn truncated_binary_reports_offset() {
        let ds = Dataset::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let p = tmp("trunc.bin");
        save_binary(&ds, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        let err = load_binary(&p).unwrap_err();
        assert!(matches!(err, Error::Binary { offset: 41, .. }), "{err:?}");
    }

    #[test]
    fn binary_refuses_custom_ids() {
        let ds = Dataset::with_ids(1, vec![3, 1], vec![0.0, 1.0]).unwrap();
        assert!(save_binary(&ds, &tmp("ids.bin")).is_err());
    }

    #[test]
    fn assignment_csv_round_trip() {
        let ds = Dataset::with_ids(1, vec![7, 3, 5], vec![0.0, 1.0, 2.0]).unwrap();
        let a = PartitionAssignment::new(4, ds.ids().to_vec(), vec![1, 0, 1], vec![true, false, false]).unwrap();
        let p = tmp("assign.csv");
        save_assignment_csv(&a, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "# partitions=4\n7,1,1\n3,0,0\n5,1,0\n");
        assert_eq!(load_assignment_csv(&p, &ds).unwrap(), a);
    }
}
