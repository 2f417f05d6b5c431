//! NPY v1.0 codec for two-dimensional little-endian `f32` arrays.
//!
//! Only the layout numpy itself writes for `np.save(path, a.astype('<f4'))`
//! on a C-contiguous 2-D array is produced. Reading also accepts v2.0 headers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::matrix::{check_finite, EmbeddingMatrix};
use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

/// Rows moved per read or write call unless overridden.
pub const DEFAULT_CHUNK_ROWS: usize = 4096;

/// Shape of the array stored in an NPY file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NpyShape {
    pub rows: usize,
    pub cols: usize,
}

/// Renders the complete header (magic through the trailing newline).
pub fn encode_header(shape: NpyShape) -> Vec<u8> {
    let dict = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': ({}, {}), }}", shape.rows, shape.cols);
    // magic(6) + version(2) + header length(2)
    let prefix = MAGIC.len() + 4;
    let unpadded = prefix + dict.len() + 1;
    let total = unpadded.div_ceil(ALIGN) * ALIGN;
    let header_len = total - prefix;

    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.resize(total - 1, b' ');
    out.push(b'\n');
    out
}

fn parse_header(path: &Path, dict: &str) -> Result<NpyShape> {
    let bad = |why: &str| Error::format(path, why.to_string());
    let body = dict.trim_end().trim();
    let body =
        body.strip_prefix('{').and_then(|b| b.strip_suffix('}')).ok_or_else(|| bad("header is not a dict literal"))?;

    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    let mut rest = body.trim();
    while !rest.is_empty() {
        let (key, after) = take_quoted(rest).ok_or_else(|| bad("expected quoted key"))?;
        let after = after.trim_start().strip_prefix(':').ok_or_else(|| bad("expected ':'"))?;
        let after = after.trim_start();
        let consumed = match key {
            "descr" => {
                let (v, a) = take_quoted(after).ok_or_else(|| bad("descr must be a string"))?;
                descr = Some(v);
                a
            }
            "fortran_order" => {
                if let Some(a) = after.strip_prefix("False") {
                    fortran = Some(false);
                    a
                } else if let Some(a) = after.strip_prefix("True") {
                    fortran = Some(true);
                    a
                } else {
                    return Err(bad("fortran_order must be True or False"));
                }
            }
            "shape" => {
                let a = after.strip_prefix('(').ok_or_else(|| bad("shape must be a tuple"))?;
                let close = a.find(')').ok_or_else(|| bad("unterminated shape tuple"))?;
                let dims = a[..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<usize>().map_err(|_| bad("shape entries must be integers")))
                    .collect::<Result<Vec<_>>>()?;
                shape = Some(dims);
                &a[close + 1..]
            }
            other => return Err(bad(&format!("unexpected header key '{other}'"))),
        };
        rest = consumed.trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }

    match descr {
        Some("<f4") => {}
        Some(d) => return Err(bad(&format!("dtype '{d}' is not '<f4'"))),
        None => return Err(bad("missing descr")),
    }
    match fortran {
        Some(false) => {}
        Some(true) => return Err(bad("fortran_order arrays are not supported")),
        None => return Err(bad("missing fortran_order")),
    }
    match shape.as_deref() {
        Some(&[rows, cols]) => Ok(NpyShape { rows, cols }),
        Some(dims) => Err(bad(&format!("expected a 2-D array, found {} dimensions", dims.len()))),
        None => Err(bad("missing shape")),
    }
}

fn take_quoted(s: &str) -> Option<(&str, &str)> {
    let q = s.chars().next().filter(|c| *c == '\'' || *c == '"')?;
    let inner = &s[1..];
    let end = inner.find(q)?;
    Some((&inner[..end], &inner[end + 1..]))
}

/// Row-chunked reader over an NPY file.
pub struct NpyReader {
    path: PathBuf,
    inner: BufReader<File>,
    shape: NpyShape,
    next_row: usize,
}

impl NpyReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        let mut inner = BufReader::with_capacity(1 << 20, file);

        let mut pre = [0u8; 8];
        read_exact_or_format(&mut inner, &mut pre, &path)?;
        if &pre[..6] != MAGIC {
            return Err(Error::format(&path, "missing NPY magic"));
        }
        let header_len = match (pre[6], pre[7]) {
            (1, 0) => {
                let mut b = [0u8; 2];
                read_exact_or_format(&mut inner, &mut b, &path)?;
                u16::from_le_bytes(b) as usize
            }
            (2, 0) => {
                let mut b = [0u8; 4];
                read_exact_or_format(&mut inner, &mut b, &path)?;
                u32::from_le_bytes(b) as usize
            }
            (major, minor) => return Err(Error::format(&path, format!("unsupported NPY version {major}.{minor}"))),
        };
        let mut header = vec![0u8; header_len];
        read_exact_or_format(&mut inner, &mut header, &path)?;
        let header = std::str::from_utf8(&header).map_err(|_| Error::format(&path, "header is not valid text"))?;
        if !header.ends_with('\n') {
            return Err(Error::format(&path, "header is not newline terminated"));
        }
        let shape = parse_header(&path, header)?;

        let expected = (shape.rows as u64) * (shape.cols as u64) * 4;
        let meta = inner.get_ref().metadata().map_err(|e| Error::io(&path, e))?;
        let offset = 8 + if pre[6] == 1 { 2 } else { 4 } + header_len as u64;
        if meta.len() != offset + expected {
            return Err(Error::format(
                &path,
                format!("payload is {} bytes, shape needs {expected}", meta.len().saturating_sub(offset)),
            ));
        }
        Ok(Self { path, inner, shape, next_row: 0 })
    }

    pub fn shape(&self) -> NpyShape {
        self.shape
    }

    pub fn rows_remaining(&self) -> usize {
        self.shape.rows - self.next_row
    }

    /// Reads up to `max_rows` rows, or `None` once the file is exhausted.
    pub fn read_chunk(&mut self, max_rows: usize) -> Result<Option<EmbeddingMatrix>> {
        let rows = max_rows.max(1).min(self.rows_remaining());
        if rows == 0 {
            return Ok(None);
        }
        let cols = self.shape.cols;
        let mut bytes = vec![0u8; rows * cols * 4];
        read_exact_or_format(&mut self.inner, &mut bytes, &self.path)?;
        let data: Vec<f32> = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        check_finite(&data, cols, self.next_row)?;
        self.next_row += rows;
        EmbeddingMatrix::new(rows, cols, data).map(Some)
    }

    /// Reads every remaining row.
    pub fn read_all(mut self) -> Result<EmbeddingMatrix> {
        if self.shape.rows == 0 || self.shape.cols == 0 {
            return Err(Error::format(&self.path, "array has a zero-length dimension"));
        }
        let rows = self.rows_remaining();
        self.read_chunk(rows)?.ok_or_else(|| Error::format(&self.path, "no rows left to read"))
    }
}

fn read_exact_or_format(r: &mut impl Read, buf: &mut [u8], path: &Path) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::format(path, "file is truncated"),
        _ => Error::io(path, e),
    })
}

/// Streaming writer for a matrix whose shape is known up front.
pub struct NpyWriter {
    path: PathBuf,
    inner: BufWriter<File>,
    shape: NpyShape,
    written_rows: usize,
}

impl NpyWriter {
    pub fn create(path: impl AsRef<Path>, shape: NpyShape) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if shape.rows == 0 || shape.cols == 0 {
            return Err(Error::Data(format!("cannot write a {} x {} matrix", shape.rows, shape.cols)));
        }
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut inner = BufWriter::with_capacity(1 << 20, file);
        inner.write_all(&encode_header(shape)).map_err(|e| Error::io(&path, e))?;
        Ok(Self { path, inner, shape, written_rows: 0 })
    }

    /// Appends whole rows from a row-major buffer.
    pub fn write_rows(&mut self, data: &[f32]) -> Result<()> {
        let cols = self.shape.cols;
        if !data.len().is_multiple_of(cols) {
            return Err(Error::Dim { expected: cols, actual: data.len() % cols });
        }
        let rows = data.len() / cols;
        if self.written_rows + rows > self.shape.rows {
            return Err(Error::Data(format!("writing {rows} rows would exceed the declared {} rows", self.shape.rows)));
        }
        check_finite(data, cols, self.written_rows)?;
        let mut bytes = Vec::with_capacity(data.len() * 4);
        for x in data {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        self.inner.write_all(&bytes).map_err(|e| Error::io(&self.path, e))?;
        self.written_rows += rows;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.written_rows != self.shape.rows {
            return Err(Error::Data(format!("wrote {} of {} declared rows", self.written_rows, self.shape.rows)));
        }
        self.inner.flush().map_err(|e| Error::io(&self.path, e))?;
        self.inner.get_ref().sync_all().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    NpyReader::open(path)?.read_all()
}

pub fn write_matrix(matrix: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_matrix_chunked(matrix, path, DEFAULT_CHUNK_ROWS)
}

pub fn write_matrix_chunked(matrix: &EmbeddingMatrix, path: impl AsRef<Path>, chunk_rows: usize) -> Result<()> {
    let shape = NpyShape { rows: matrix.count(), cols: matrix.dim() };
    let mut w = NpyWriter::create(path, shape)?;
    for chunk in matrix.as_slice().chunks(chunk_rows.max(1) * shape.cols) {
        w.write_rows(chunk)?;
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_aligned_and_terminated() {
        for shape in [NpyShape { rows: 2, cols: 3 }, NpyShape { rows: 160_000, cols: 59_136 }] {
            let h = encode_header(shape);
            assert_eq!(h.len() % 64, 0);
            assert_eq!(*h.last().unwrap(), b'\n');
            assert_eq!(&h[..8], b"\x93NUMPY\x01\x00");
            let len = u16::from_le_bytes([h[8], h[9]]) as usize;
            assert_eq!(len + 10, h.len());
        }
    }

    #[test]
    fn header_matches_numpy_text() {
        let h = encode_header(NpyShape { rows: 2, cols: 3 });
        let text = std::str::from_utf8(&h[10..]).unwrap();
        assert!(text.starts_with("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }"));
    }

    #[test]
    fn parses_reordered_keys_and_rejects_other_dtypes() {
        let p = Path::new("x.npy");
        let s = parse_header(p, "{'shape': (4, 5), 'fortran_order': False, 'descr': '<f4'}\n").unwrap();
        assert_eq!(s, NpyShape { rows: 4, cols: 5 });
        let e = parse_header(p, "{'descr': '<f8', 'fortran_order': False, 'shape': (4, 5), }\n");
        assert!(matches!(e, Err(Error::Format { .. })));
        let e = parse_header(p, "{'descr': '<f4', 'fortran_order': False, 'shape': (4,), }\n");
        assert!(matches!(e, Err(Error::Format { .. })));
        let e = parse_header(p, "{'descr': '<f4', 'fortran_order': True, 'shape': (4, 5), }\n");
        assert!(matches!(e, Err(Error::Format { .. })));
        let e = parse_header(p, "{'descr': '<f4', 'fortran_order': False, 'shape': (4, 5, 6), }\n");
        assert!(matches!(e, Err(Error::Format { .. })));
        assert!(parse_header(p, "not a dict").is_err());
    }
}
