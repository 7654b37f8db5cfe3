//! Minimal NPY v1.0 reader/writer for dense 2-D float arrays.
//!
//! Only the single-array `.npy` container is handled: magic `\x93NUMPY`,
//! version 1.0, a little-endian `u16` header length, a Python-literal header
//! dict, then the raw payload. Payloads may be `<f4` or `<f8`; values are
//! always held as `f64` in memory.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::IngestError;

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const HEADER_ALIGN: usize = 64;

/// Element type of an NPY payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloatDType {
    F4,
    F8,
}

impl FloatDType {
    fn descr(self) -> &'static str {
        match self {
            FloatDType::F4 => "<f4",
            FloatDType::F8 => "<f8",
        }
    }

    fn width(self) -> usize {
        match self {
            FloatDType::F4 => 4,
            FloatDType::F8 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Header {
    dtype: FloatDType,
    fortran_order: bool,
    shape: Vec<usize>,
}

/// Reads an NPY file into a row-major `f64` matrix.
///
/// One-dimensional arrays of length `n` come back as `n × 1`.
pub fn read_array_file(path: impl AsRef<Path>) -> Result<Array2<f64>, IngestError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| IngestError::io(path, e))?;
    parse_array(&bytes).map_err(|e| e.with_path(path))
}

/// Reads only the header of an NPY file and returns its 2-D shape.
pub fn read_array_shape(path: impl AsRef<Path>) -> Result<(usize, usize), IngestError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| IngestError::io(path, e))?;
    let (header, _) = parse_header(&bytes).map_err(|e| e.with_path(path))?;
    shape_2d(&header.shape).map_err(|e| e.with_path(path))
}

/// Parses an in-memory NPY byte buffer.
pub fn parse_array(bytes: &[u8]) -> Result<Array2<f64>, IngestError> {
    let (header, data_start) = parse_header(bytes)?;
    let (rows, cols) = shape_2d(&header.shape)?;
    let payload = &bytes[data_start..];
    let expected = rows * cols * header.dtype.width();
    if payload.len() != expected {
        return Err(IngestError::ShapeMismatch {
            path: None,
            expected_bytes: expected,
            actual_bytes: payload.len(),
        });
    }

    let values: Vec<f64> = match header.dtype {
        FloatDType::F4 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        FloatDType::F8 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
    };
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(IngestError::NonFinite {
            path: None,
            index: pos,
        });
    }

    let matrix = if header.fortran_order {
        Array2::from_shape_vec((cols, rows), values)
            .map(|m| m.reversed_axes().as_standard_layout().into_owned())
    } else {
        Array2::from_shape_vec((rows, cols), values)
    };
    Ok(matrix.expect("payload length checked against shape"))
}

/// Writes a matrix as a C-ordered NPY v1.0 file.
pub fn write_array_file(
    path: impl AsRef<Path>,
    matrix: &Array2<f64>,
    dtype: FloatDType,
) -> Result<(), IngestError> {
    let path = path.as_ref();
    let bytes = encode_array(matrix, dtype);
    let mut f = fs::File::create(path).map_err(|e| IngestError::io(path, e))?;
    f.write_all(&bytes).map_err(|e| IngestError::io(path, e))
}

/// Writes a vector as a 1-D NPY file.
pub fn write_vector_file(
    path: impl AsRef<Path>,
    values: &[f64],
    dtype: FloatDType,
) -> Result<(), IngestError> {
    let path = path.as_ref();
    let mut bytes = header_bytes(dtype, &format!("({},)", values.len()));
    push_payload(&mut bytes, values.iter().copied(), dtype);
    fs::write(path, bytes).map_err(|e| IngestError::io(path, e))
}

pub fn encode_array(matrix: &Array2<f64>, dtype: FloatDType) -> Vec<u8> {
    let (rows, cols) = matrix.dim();
    let mut bytes = header_bytes(dtype, &format!("({rows}, {cols})"));
    push_payload(&mut bytes, matrix.iter().copied(), dtype);
    bytes
}

fn push_payload(bytes: &mut Vec<u8>, values: impl Iterator<Item = f64>, dtype: FloatDType) {
    match dtype {
        FloatDType::F4 => values.for_each(|v| bytes.extend_from_slice(&(v as f32).to_le_bytes())),
        FloatDType::F8 => values.for_each(|v| bytes.extend_from_slice(&v.to_le_bytes())),
    }
}

fn header_bytes(dtype: FloatDType, shape: &str) -> Vec<u8> {
    let mut dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        dtype.descr(),
        shape
    );
    // magic(6) + version(2) + len(2) + dict + '\n' must be a multiple of 64
    let unpadded = MAGIC.len() + 4 + dict.len() + 1;
    let pad = (HEADER_ALIGN - unpadded % HEADER_ALIGN) % HEADER_ALIGN;
    dict.extend(std::iter::repeat_n(' ', pad));
    dict.push('\n');

    let mut out = Vec::with_capacity(MAGIC.len() + 4 + dict.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

fn parse_header(bytes: &[u8]) -> Result<(Header, usize), IngestError> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(IngestError::BadMagic { path: None });
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (len_bytes, header_start) = match major {
        1 => (2, 10),
        2 | 3 => (4, 12),
        _ => {
            return Err(IngestError::BadHeader {
                path: None,
                reason: format!("unsupported NPY version {major}.{minor}"),
            })
        }
    };
    if bytes.len() < header_start {
        return Err(bad_header("truncated header length"));
    }
    let header_len = if len_bytes == 2 {
        u16::from_le_bytes([bytes[8], bytes[9]]) as usize
    } else {
        u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize
    };
    let data_start = header_start + header_len;
    if bytes.len() < data_start {
        return Err(bad_header("header length exceeds file size"));
    }
    let text = std::str::from_utf8(&bytes[header_start..data_start])
        .map_err(|_| bad_header("header is not valid text"))?;
    Ok((parse_header_dict(text)?, data_start))
}

fn bad_header(reason: &str) -> IngestError {
    IngestError::BadHeader {
        path: None,
        reason: reason.to_string(),
    }
}

/// Extracts the value text following `'key':` in a header dict.
fn dict_value<'a>(text: &'a str, key: &str) -> Result<&'a str, IngestError> {
    let needle = format!("'{key}'");
    let at = text
        .find(&needle)
        .ok_or_else(|| bad_header(&format!("missing key {key}")))?;
    let rest = text[at + needle.len()..].trim_start();
    let rest = rest
        .strip_prefix(':')
        .ok_or_else(|| bad_header(&format!("malformed entry for {key}")))?;
    Ok(rest.trim_start())
}

fn parse_header_dict(text: &str) -> Result<Header, IngestError> {
    let descr_text = dict_value(text, "descr")?;
    let quote = descr_text
        .chars()
        .next()
        .filter(|c| *c == '\'' || *c == '"')
        .ok_or_else(|| bad_header("descr is not a string"))?;
    let descr_end = descr_text[1..]
        .find(quote)
        .ok_or_else(|| bad_header("unterminated descr"))?;
    let descr = &descr_text[1..1 + descr_end];
    let dtype = match descr {
        "<f4" => FloatDType::F4,
        "<f8" => FloatDType::F8,
        other => return Err(IngestError::UnsupportedDType(other.to_string())),
    };

    let fortran_text = dict_value(text, "fortran_order")?;
    let fortran_order = if fortran_text.starts_with("True") {
        true
    } else if fortran_text.starts_with("False") {
        false
    } else {
        return Err(bad_header("fortran_order is not a bool"));
    };

    let shape_text = dict_value(text, "shape")?;
    let shape_text = shape_text
        .strip_prefix('(')
        .ok_or_else(|| bad_header("shape is not a tuple"))?;
    let close = shape_text
        .find(')')
        .ok_or_else(|| bad_header("unterminated shape tuple"))?;
    let shape = shape_text[..close]
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim_end_matches('L')
                .parse::<usize>()
                .map_err(|_| bad_header(&format!("bad shape entry {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    Ok(Header {
        dtype,
        fortran_order,
        shape,
    })
}

fn shape_2d(shape: &[usize]) -> Result<(usize, usize), IngestError> {
    match *shape {
        [n] => Ok((n, 1)),
        [r, c] => Ok((r, c)),
        _ => Err(bad_header(&format!(
            "expected a 1-D or 2-D array, got shape {shape:?}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn f4_file(shape: &str, values: &[f32]) -> Vec<u8> {
        let mut bytes = header_bytes(FloatDType::F4, shape);
        for v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    #[test]
    fn reads_small_f4_matrix() {
        let bytes = f4_file("(3, 2)", &[1.0, 2.0, 3.0, 4.0, 5.5, -6.0]);
        let m = parse_array(&bytes).unwrap();
        assert_eq!(m, array![[1.0, 2.0], [3.0, 4.0], [5.5, -6.0]]);
    }

    #[test]
    fn header_is_aligned() {
        let bytes = header_bytes(FloatDType::F8, "(10, 768)");
        assert_eq!(bytes.len() % HEADER_ALIGN, 0);
        assert_eq!(*bytes.last().unwrap(), b'\n');
    }

    #[test]
    fn embedding_sized_payload() {
        let values = vec![0.25_f32; 10 * 768];
        let m = parse_array(&f4_file("(10, 768)", &values)).unwrap();
        assert_eq!(m.dim(), (10, 768));
    }

    #[test]
    fn rejects_bad_magic() {
        let mut bytes = f4_file("(1, 1)", &[1.0]);
        bytes[1] = b'X';
        assert!(matches!(
            parse_array(&bytes),
            Err(IngestError::BadMagic { .. })
        ));
    }

    #[test]
    fn rejects_integer_payload() {
        let mut bytes = header_bytes(FloatDType::F4, "(1, 1)");
        let text = String::from_utf8(bytes[10..].to_vec())
            .unwrap()
            .replace("<f4", "<i4");
        bytes.truncate(10);
        bytes.extend_from_slice(text.as_bytes());
        bytes.extend_from_slice(&7_i32.to_le_bytes());
        assert!(matches!(
            parse_array(&bytes),
            Err(IngestError::UnsupportedDType(d)) if d == "<i4"
        ));
    }

    #[test]
    fn rejects_short_payload() {
        let bytes = f4_file("(3, 2)", &[1.0, 2.0, 3.0]);
        assert!(matches!(
            parse_array(&bytes),
            Err(IngestError::ShapeMismatch {
                expected_bytes: 24,
                actual_bytes: 12,
                ..
            })
        ));
    }

    #[test]
    fn rejects_nan() {
        let bytes = f4_file("(1, 2)", &[1.0, f32::NAN]);
        assert!(matches!(
            parse_array(&bytes),
            Err(IngestError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn fortran_order_is_transposed_into_row_major() {
        let mut bytes = header_bytes(FloatDType::F8, "(2, 3)");
        let text = String::from_utf8(bytes[10..].to_vec())
            .unwrap()
            .replace("False", "True ");
        bytes.truncate(10);
        bytes.extend_from_slice(text.as_bytes());
        // column-major payload of [[1,2,3],[4,5,6]]
        for v in [1.0_f64, 4.0, 2.0, 5.0, 3.0, 6.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let m = parse_array(&bytes).unwrap();
        assert_eq!(m, array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
    }

    #[test]
    fn one_dimensional_reads_as_column() {
        let bytes = f4_file("(4,)", &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(parse_array(&bytes).unwrap().dim(), (4, 1));
    }
}
