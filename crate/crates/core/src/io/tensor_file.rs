//! `DTENSOR` binary files and CSV import.
//!
//! Layout: the ASCII line `DTENSOR 1 <I1> <I2> <I3>\n`, then `I1*I2*I3`
//! little-endian `f64` values, first index fastest.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{MidasError, Result};
use crate::tensor::DenseTensor3;

const MAGIC: &str = "DTENSOR";
const VERSION: &str = "1";
/// Longest header we are willing to scan for the newline.
const MAX_HEADER: usize = 256;

pub fn encode_tensor(t: &DenseTensor3) -> Vec<u8> {
    let [i1, i2, i3] = t.dims();
    let header = format!("{MAGIC} {VERSION} {i1} {i2} {i3}\n");
    let mut out = Vec::with_capacity(header.len() + 8 * t.len());
    out.extend_from_slice(header.as_bytes());
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses a `DTENSOR` byte buffer; `path` is only used in error messages.
pub fn decode_tensor(bytes: &[u8], path: &Path) -> Result<DenseTensor3> {
    let err = |offset: usize, message: String| MidasError::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    };
    let scan = &bytes[..bytes.len().min(MAX_HEADER)];
    let Some(nl) = scan.iter().position(|&b| b == b'\n') else {
        return Err(err(scan.len(), "header line not terminated by a newline".into()));
    };
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|e| err(e.valid_up_to(), "header is not ASCII".into()))?;

    let mut fields = Vec::new();
    let mut pos = 0;
    for tok in header.split(' ') {
        fields.push((pos, tok));
        pos += tok.len() + 1;
    }
    if fields[0].1 != MAGIC {
        return Err(err(0, format!("expected magic {MAGIC:?}")));
    }
    if fields.len() != 5 {
        return Err(err(0, format!("expected 5 header fields, found {}", fields.len())));
    }
    if fields[1].1 != VERSION {
        return Err(err(fields[1].0, format!("unsupported version {:?}", fields[1].1)));
    }
    let mut dims = [0usize; 3];
    for (d, &(off, tok)) in dims.iter_mut().zip(&fields[2..]) {
        *d = match tok.parse::<usize>() {
            Ok(v) if v > 0 => v,
            _ => return Err(err(off, format!("dimension {tok:?} is not a positive integer"))),
        };
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(8).map(|b| (n, b)))
        .ok_or_else(|| err(fields[2].0, "dimensions overflow".into()))?;
    let payload = &bytes[nl + 1..];
    if payload.len() != count.1 {
        return Err(err(
            nl + 1 + payload.len().min(count.1),
            format!("payload is {} bytes, expected {}", payload.len(), count.1),
        ));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    DenseTensor3::new(dims, data)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &DenseTensor3) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tensor(t)).map_err(|e| MidasError::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<DenseTensor3> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| MidasError::io(path, e))?;
    decode_tensor(&bytes, path)
}

/// Stores a matrix as a `rows x cols x 1` tensor.
pub fn write_matrix(path: impl AsRef<Path>, m: &Array2<f64>) -> Result<()> {
    let (rows, cols) = m.dim();
    let data = m.t().iter().copied().collect();
    write_tensor(path, &DenseTensor3::new([rows, cols, 1], data)?)
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let t = read_tensor(path)?;
    let [rows, cols, depth] = t.dims();
    if depth != 1 {
        return Err(MidasError::Format {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("matrix file has third dimension {depth}, expected 1"),
        });
    }
    Ok(Array2::from_shape_vec((cols, rows), t.into_data())
        .expect("length checked by DenseTensor3")
        .reversed_axes()
        .as_standard_layout()
        .into_owned())
}

/// Reads `i1,i2,i3,value` rows (0-based indices, optional header row).
/// Dimensions default to the largest index plus one; missing entries are 0.
pub fn read_csv_tensor(path: impl AsRef<Path>, dims: Option<[usize; 3]>) -> Result<DenseTensor3> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut entries = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(n + 1, |p| p.line() as usize);
        let perr = |message: String| MidasError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if rec.len() != 4 {
            return Err(perr(format!("expected 4 fields, found {}", rec.len())));
        }
        if n == 0 && rec[0].parse::<usize>().is_err() {
            continue;
        }
        let mut idx = [0usize; 3];
        for (k, slot) in idx.iter_mut().enumerate() {
            *slot = rec[k]
                .parse()
                .map_err(|_| perr(format!("index {:?} is not a nonnegative integer", &rec[k])))?;
        }
        let value: f64 = rec[3]
            .parse()
            .map_err(|_| perr(format!("value {:?} is not a number", &rec[3])))?;
        entries.push((line, idx, value));
    }
    let dims = match dims {
        Some(d) => d,
        None => {
            let mut d = [0usize; 3];
            for (_, idx, _) in &entries {
                for k in 0..3 {
                    d[k] = d[k].max(idx[k] + 1);
                }
            }
            d
        }
    };
    let mut t = DenseTensor3::zeros(dims)?.into_data();
    for (line, [a, b, c], v) in entries {
        if a >= dims[0] || b >= dims[1] || c >= dims[2] {
            return Err(MidasError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("index ({a},{b},{c}) outside {dims:?}"),
            });
        }
        t[a + dims[0] * (b + dims[1] * c)] = v;
    }
    DenseTensor3::new(dims, t)
}

fn csv_error(path: &Path, e: csv::Error) -> MidasError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => MidasError::io(path, source),
        other => MidasError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::path::PathBuf;

    fn p() -> PathBuf {
        PathBuf::from("mem")
    }

    #[test]
    fn round_trip_preserves_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = DenseTensor3::from_fn([3, 1, 4], |_, _, _| rng.random::<f64>() - 0.5).unwrap();
        let back = decode_tensor(&encode_tensor(&t), &p()).unwrap();
        assert_eq!(back.dims(), t.dims());
        for (a, b) in back.data().iter().zip(t.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn header_text() {
        let t = DenseTensor3::zeros([2, 3, 4]).unwrap();
        let bytes = encode_tensor(&t);
        assert!(bytes.starts_with(b"DTENSOR 1 2 3 4\n"));
        assert_eq!(bytes.len(), 16 + 8 * 24);
    }

    fn offset_of(bytes: &[u8]) -> u64 {
        match decode_tensor(bytes, &p()) {
            Err(MidasError::Format { offset, .. }) => offset,
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_headers() {
        assert_eq!(offset_of(b"DTENSOX 1 1 1 1\n\0\0\0\0\0\0\0\0"), 0);
        assert_eq!(offset_of(b"DTENSOR 2 1 1 1\n\0\0\0\0\0\0\0\0"), 8);
        assert_eq!(offset_of(b"DTENSOR 1 1 0 1\n"), 12);
        assert_eq!(offset_of(b"DTENSOR 1 1 x 1\n"), 12);
        assert_eq!(offset_of(b"DTENSOR 1 1 1\n"), 0);
        assert_eq!(offset_of(b"DTENSOR 1 1 1 1"), 15);
        assert_eq!(offset_of(b"DTENSOR 1 1 1 2\n\0\0\0\0\0\0\0\0"), 24);
        assert_eq!(offset_of(b"DTENSOR 1 1 1 1\n\0\0\0\0\0\0\0\0\0"), 24);
    }

    #[test]
    fn matrix_round_trip() {
        let m = Array2::from_shape_fn((3, 2), |(i, j)| (i * 10 + j) as f64);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dtensor");
        write_matrix(&path, &m).unwrap();
        let t = read_tensor(&path).unwrap();
        assert_eq!(t.dims(), [3, 2, 1]);
        assert_eq!(t.get(2, 1, 0), 21.0);
        assert_eq!(read_matrix(&path).unwrap(), m);
    }

    #[test]
    fn csv_import() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        fs::write(&path, "i1,i2,i3,value\n0,0,0,1.5\n1,2,0,-2\n# note\n0,1,1,3e-1\n").unwrap();
        let t = read_csv_tensor(&path, None).unwrap();
        assert_eq!(t.dims(), [2, 3, 2]);
        assert_eq!(t.get(0, 0, 0), 1.5);
        assert_eq!(t.get(1, 2, 0), -2.0);
        assert_eq!(t.get(0, 1, 1), 0.3);
        assert_eq!(t.get(1, 1, 1), 0.0);
        assert!(matches!(
            read_csv_tensor(&path, Some([1, 1, 1])),
            Err(MidasError::Parse { .. })
        ));
    }
}
