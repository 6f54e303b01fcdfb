//! On-disk formats.
//!
//! * Matrices: headered CSV, or the binary container `AMSM` followed by
//!   `u32` rows, `u32` cols (little-endian) and `rows*cols` little-endian
//!   `f64` values in row-major order. Readers detect the format by magic.
//! * Labels: one unsigned integer class id per line.
//! * Prototypes: a matrix whose first column is the class id and whose
//!   remaining columns are the pre-defined semantic vector.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::data::{ClassId, Dataset, SeenDataset, UnseenDataset};
use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;

pub const MATRIX_MAGIC: &[u8; 4] = b"AMSM";

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_matrix_binary(m: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 8 * m.as_slice().len());
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_matrix_binary(bytes: &[u8], path: &Path) -> Result<DenseMatrix> {
    if bytes.len() < 12 || &bytes[..4] != MATRIX_MAGIC {
        return Err(Error::ingestion(path, "missing AMSM header"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(12))
        .ok_or_else(|| Error::ingestion(path, format!("shape {rows}x{cols} overflows")))?;
    if bytes.len() != expected {
        return Err(Error::ingestion(
            path,
            format!(
                "shape {rows}x{cols} needs {expected} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    let data: Vec<f64> = bytes[12..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("binary matrix payload"));
    }
    DenseMatrix::from_vec(rows, cols, data)
}

fn parse_csv_matrix(bytes: &[u8], path: &Path) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let cols = reader
        .headers()
        .map_err(|e| Error::ingestion(path, format!("bad CSV header: {e}")))?
        .len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| Error::ingestion(path, format!("line {line}: {e}")))?;
        if record.len() != cols {
            return Err(Error::ingestion(
                path,
                format!("line {line}: expected {cols} columns, found {}", record.len()),
            ));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::ingestion(path, format!("line {line}: '{field}' is not a number")))?;
            if !v.is_finite() {
                return Err(Error::ingestion(path, format!("line {line}: non-finite value")));
            }
            data.push(v);
        }
        rows += 1;
    }
    DenseMatrix::from_vec(rows, cols, data)
}

pub fn matrix_to_csv(m: &DenseMatrix, header: &[String]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn default_header(prefix: &str, cols: usize) -> Vec<String> {
    (0..cols).map(|c| format!("{prefix}{c}")).collect()
}

/// Reads a matrix in either format.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    if bytes.starts_with(MATRIX_MAGIC) {
        decode_matrix_binary(&bytes, path)
    } else {
        parse_csv_matrix(&bytes, path)
    }
}

pub fn write_matrix_binary(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    write_bytes(path.as_ref(), &encode_matrix_binary(m))
}

/// CSV with header `c0,c1,...`. Values use Rust's shortest round-trip float formatting.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    write_bytes(path.as_ref(), matrix_to_csv(m, &default_header("c", m.cols())).as_bytes())
}

/// Writes binary when the extension is `amsm`, CSV otherwise.
pub fn write_matrix(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "amsm") {
        write_matrix_binary(path, m)
    } else {
        write_matrix_csv(path, m)
    }
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<ClassId>> {
    let path = path.as_ref();
    let text = String::from_utf8(read_bytes(path)?).map_err(|_| Error::ingestion(path, "labels are not UTF-8"))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<u32>()
                .map(ClassId)
                .map_err(|_| Error::ingestion(path, format!("line {}: '{}' is not a class id", i + 1, l.trim())))
        })
        .collect()
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[ClassId]) -> Result<()> {
    let mut out = Vec::new();
    for l in labels {
        writeln!(out, "{l}").expect("writing to a Vec cannot fail");
    }
    write_bytes(path.as_ref(), &out)
}

fn class_id_from_f64(v: f64, path: &Path, row: usize) -> Result<ClassId> {
    if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
        return Err(Error::ingestion(path, format!("row {row}: class id {v} is not an unsigned integer")));
    }
    Ok(ClassId(v as u32))
}

/// Reads a prototype matrix: first column class id, remaining columns the vector.
pub fn read_prototypes(path: impl AsRef<Path>) -> Result<(Vec<ClassId>, DenseMatrix)> {
    let path = path.as_ref();
    let m = read_matrix(path)?;
    if m.cols() < 2 {
        return Err(Error::ingestion(
            path,
            format!("prototype file needs a class_id column plus at least 1 value column, found {}", m.cols()),
        ));
    }
    let ids = (0..m.rows())
        .map(|r| class_id_from_f64(m[(r, 0)], path, r))
        .collect::<Result<Vec<_>>>()?;
    Ok((ids, m.column_range(1, m.cols())))
}

/// Writes prototypes with header `class_id,p_0..p_{n-1}` (CSV) or as a binary
/// matrix with the id in column 0 (`.amsm`).
pub fn write_prototypes(path: impl AsRef<Path>, ids: &[ClassId], prototypes: &DenseMatrix) -> Result<()> {
    let path = path.as_ref();
    let id_col = DenseMatrix::from_fn(ids.len(), 1, |r, _| ids[r].0 as f64);
    let m = id_col.hconcat(prototypes)?;
    if path.extension().is_some_and(|e| e == "amsm") {
        write_matrix_binary(path, &m)
    } else {
        let mut header = vec!["class_id".to_string()];
        header.extend(default_header("p_", prototypes.cols()));
        write_bytes(path, matrix_to_csv(&m, &header).as_bytes())
    }
}

/// Loads and validates a dataset from its three files.
pub fn load_dataset(
    features_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    prototypes_path: impl AsRef<Path>,
) -> Result<Dataset> {
    let features_path = features_path.as_ref();
    let labels_path = labels_path.as_ref();
    let features = read_matrix(features_path)?;
    let labels = read_labels(labels_path)?;
    if labels.len() != features.rows() {
        return Err(Error::ingestion(
            labels_path,
            format!(
                "expected {} labels (one per row of {}), found {}",
                features.rows(),
                features_path.display(),
                labels.len()
            ),
        ));
    }
    let prototypes_path = prototypes_path.as_ref();
    let (ids, prototypes) = read_prototypes(prototypes_path)?;
    Dataset::new(features, labels, ids, prototypes).map_err(|e| match e {
        Error::UnknownLabel(c) => Error::ingestion(
            prototypes_path,
            format!("no prototype row for label {c} used in {}", labels_path.display()),
        ),
        Error::Parameter(msg) => Error::ingestion(prototypes_path, msg),
        other => other,
    })
}

/// File triple for one dataset inside a data directory.
#[derive(Clone, Debug)]
pub struct DatasetFiles {
    pub features: PathBuf,
    pub labels: PathBuf,
    pub prototypes: PathBuf,
}

impl DatasetFiles {
    /// `<prefix>_features.amsm`, `<prefix>_labels.txt`, `<prefix>_prototypes.csv`.
    /// An existing `<prefix>_features.csv` is used when the binary file is absent.
    pub fn in_dir(dir: impl AsRef<Path>, prefix: &str) -> Self {
        let dir = dir.as_ref();
        let binary = dir.join(format!("{prefix}_features.amsm"));
        let csv = dir.join(format!("{prefix}_features.csv"));
        let features = if !binary.exists() && csv.exists() { csv } else { binary };
        DatasetFiles {
            features,
            labels: dir.join(format!("{prefix}_labels.txt")),
            prototypes: dir.join(format!("{prefix}_prototypes.csv")),
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        load_dataset(&self.features, &self.labels, &self.prototypes)
    }
}

pub fn save_dataset(files: &DatasetFiles, dataset: &Dataset) -> Result<()> {
    write_matrix(&files.features, dataset.features())?;
    write_labels(&files.labels, dataset.labels())?;
    write_prototypes(&files.prototypes, dataset.class_ids(), dataset.prototypes())
}

/// Loads `seen_*` and `unseen_*` files from a directory written by [`save_split`].
pub fn load_split(dir: impl AsRef<Path>) -> Result<(SeenDataset, UnseenDataset)> {
    let dir = dir.as_ref();
    let seen = SeenDataset::new(DatasetFiles::in_dir(dir, "seen").load()?)?;
    let unseen = UnseenDataset::new(DatasetFiles::in_dir(dir, "unseen").load()?)?;
    unseen.check_disjoint(&seen)?;
    Ok((seen, unseen))
}

pub fn save_split(dir: impl AsRef<Path>, seen: &SeenDataset, unseen: &UnseenDataset) -> Result<()> {
    let dir = dir.as_ref();
    save_dataset(&DatasetFiles::in_dir(dir, "seen"), seen)?;
    save_dataset(&DatasetFiles::in_dir(dir, "unseen"), unseen)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn loads_csv_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(dir.path(), "f.csv", "x0,x1\n1,2\n3,4\n5,6\n7,8\n");
        let l = write(dir.path(), "l.txt", "4\n2\n4\n2\n");
        let p = write(dir.path(), "p.csv", "class_id,p_0\n4,1.5\n2,-0.5\n");
        let ds = load_dataset(f, l, p).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.num_classes(), 2);
        assert_eq!(ds.class_ids(), &[ClassId(2), ClassId(4)]);
        assert_eq!(ds.prototypes().column(0), vec![-0.5, 1.5]);
    }

    #[test]
    fn missing_prototype_names_label() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(dir.path(), "f.csv", "x0\n1\n2\n");
        let l = write(dir.path(), "l.txt", "0\n5\n");
        let p = write(dir.path(), "p.csv", "class_id,p_0\n0,1\n");
        let err = load_dataset(f, l, p).unwrap_err();
        assert!(matches!(err, Error::Ingestion { .. }));
        assert!(err.to_string().contains("label 5"), "{err}");
    }

    #[test]
    fn shape_mismatch_names_file() {
        let dir = tempfile::tempdir().unwrap();
        let f = write(dir.path(), "f.csv", "x0\n1\n2\n");
        let l = write(dir.path(), "l.txt", "0\n");
        let p = write(dir.path(), "p.csv", "class_id,p_0\n0,1\n");
        let err = load_dataset(f, &l, p).unwrap_err();
        assert!(err.to_string().contains("l.txt") && err.to_string().contains("expected 2"), "{err}");

        let bad = write(dir.path(), "bad.csv", "a,b\n1,2\n3\n");
        let err = read_matrix(&bad).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let m = DenseMatrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let mut bytes = encode_matrix_binary(&m);
        bytes.pop();
        assert!(matches!(
            decode_matrix_binary(&bytes, Path::new("x")),
            Err(Error::Ingestion { .. })
        ));
        let mut nan = encode_matrix_binary(&m);
        nan[12..20].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(decode_matrix_binary(&nan, Path::new("x")), Err(Error::NonFinite(_))));
    }

    #[test]
    fn dataset_round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(
            DenseMatrix::from_rows(&[[0.1, 1.0 / 3.0], [-2.5e-300, 7.0]]).unwrap(),
            vec![ClassId(1), ClassId(0)],
            vec![ClassId(0), ClassId(1)],
            DenseMatrix::from_rows(&[[std::f64::consts::PI], [1e-17]]).unwrap(),
        )
        .unwrap();
        let files = DatasetFiles::in_dir(dir.path(), "seen");
        save_dataset(&files, &ds).unwrap();
        assert_eq!(files.load().unwrap(), ds);
    }

    proptest! {
        #[test]
        fn binary_and_csv_matrices_round_trip_bit_exactly(
            rows in 0usize..6,
            cols in 1usize..6,
            seed in any::<u64>(),
        ) {
            let mut rng = crate::numerics::Rng::new(seed);
            let m = DenseMatrix::from_fn(rows, cols, |_, _| rng.normal(0.0, 1e3) * rng.next_f64().powi(20));
            let back = decode_matrix_binary(&encode_matrix_binary(&m), Path::new("mem")).unwrap();
            prop_assert_eq!(back.as_slice(), m.as_slice());
            prop_assert_eq!(back.shape(), m.shape());

            let csv = matrix_to_csv(&m, &default_header("c", cols));
            let back = parse_csv_matrix(csv.as_bytes(), Path::new("mem")).unwrap();
            prop_assert_eq!(back.as_slice(), m.as_slice());
        }
    }
}
