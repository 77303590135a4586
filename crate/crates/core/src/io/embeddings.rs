//! Labelled embedding sets and their on-disk formats.
//!
//! The binary `HEMB1` layout is little-endian throughout:
//!
//! ```text
//! magic   48 45 4D 42 31 00
//! u32     dimension L
//! u64     entry count
//! entry*  u16 label byte length, UTF-8 label, L x f32
//! ```
//!
//! A JSON form `{"dimension": L, "entries": [{"label": .., "vector": [..]}]}`
//! is accepted wherever the binary one is.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const HEMB1_MAGIC: [u8; 6] = *b"HEMB1\0";
const HEADER_LEN: usize = 6 + 4 + 8;

/// An ordered set of uniquely labelled vectors sharing one dimension.
///
/// Vectors are stored row-major in one contiguous buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet<T> {
    dimension: usize,
    labels: Vec<String>,
    data: Vec<T>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> EmbeddingSet<T> {
    pub fn new(dimension: usize) -> Self {
        EmbeddingSet {
            dimension,
            labels: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Builds a set from `(label, vector)` pairs, validating every invariant.
    pub fn from_entries<I, S>(dimension: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<T>)>,
        S: Into<String>,
    {
        let mut set = EmbeddingSet::new(dimension);
        for (label, vector) in entries {
            set.push(label, &vector)?;
        }
        Ok(set)
    }

    /// Appends one entry. Errors name the index the entry would occupy.
    pub fn push(&mut self, label: impl Into<String>, vector: &[T]) -> Result<()> {
        let record = self.labels.len();
        let label = label.into();
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                record,
                expected: self.dimension,
                found: vector.len(),
            });
        }
        if let Some(component) = vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { record, component });
        }
        if self.index.contains_key(&label) {
            return Err(Error::DuplicateLabel { record, label });
        }
        self.index.insert(label.clone(), record);
        self.labels.push(label);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn vector(&self, i: usize) -> &[T] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn get(&self, label: &str) -> Option<&[T]> {
        self.position(label).map(|i| self.vector(i))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, &[T])> + '_ {
        self.labels
            .iter()
            .enumerate()
            .map(move |(i, l)| (l.as_str(), self.vector(i)))
    }

    /// Flat row-major storage.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Subset in the order of `labels`; every label must be present.
    pub fn select<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let mut out = EmbeddingSet::new(self.dimension);
        for l in labels {
            let l = l.as_ref();
            let v = self
                .get(l)
                .ok_or_else(|| Error::MissingWord(l.to_string()))?;
            out.push(l, v)?;
        }
        Ok(out)
    }

    /// Applies `f` to every vector, keeping labels.
    pub fn map_vectors(&self, dimension: usize, mut f: impl FnMut(&[T]) -> Vec<T>) -> Result<Self> {
        let mut out = EmbeddingSet::new(dimension);
        for (l, v) in self.iter() {
            out.push(l, &f(v))?;
        }
        Ok(out)
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> EmbeddingSet<U> {
        EmbeddingSet {
            dimension: self.dimension,
            labels: self.labels.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::from_f64(v.as_f64()).expect("finite"))
                .collect(),
            index: self.index.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// binary

/// Encodes a set as `HEMB1` bytes. Values are narrowed to `f32`.
pub fn encode_hemb1<T: Scalar>(set: &EmbeddingSet<T>) -> Result<Vec<u8>> {
    let dim = u32::try_from(set.dimension)
        .map_err(|_| Error::Parameter(format!("dimension {} exceeds u32", set.dimension)))?;
    let mut buf = Vec::with_capacity(HEADER_LEN + set.len() * (2 + 16 + 4 * set.dimension));
    buf.extend_from_slice(&HEMB1_MAGIC);
    buf.extend_from_slice(&dim.to_le_bytes());
    buf.extend_from_slice(&(set.len() as u64).to_le_bytes());
    for (record, (label, vector)) in set.iter().enumerate() {
        let len = u16::try_from(label.len()).map_err(|_| Error::InvalidLabel {
            record,
            reason: format!("label is {} bytes, limit is 65535", label.len()),
        })?;
        buf.extend_from_slice(&len.to_le_bytes());
        buf.extend_from_slice(label.as_bytes());
        for v in vector {
            buf.extend_from_slice(&v.as_f32().to_le_bytes());
        }
    }
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }
}

/// Decodes `HEMB1` bytes.
pub fn decode_hemb1<T: Scalar>(bytes: &[u8]) -> Result<EmbeddingSet<T>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::MalformedHeader {
            offset: bytes.len() as u64,
            reason: format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len()),
        });
    }
    if bytes[..6] != HEMB1_MAGIC {
        return Err(Error::MalformedHeader {
            offset: 0,
            reason: "bad magic".into(),
        });
    }
    let dim = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
    if dim == 0 {
        return Err(Error::MalformedHeader {
            offset: 6,
            reason: "dimension must be positive".into(),
        });
    }
    let mut cur = Cursor {
        bytes,
        pos: HEADER_LEN,
    };
    let mut set = EmbeddingSet::new(dim);
    let mut vector = vec![T::zero(); dim];
    for record in 0..count {
        let truncated = |cur: &Cursor<'_>| Error::Truncated {
            offset: cur.pos as u64,
            expected: count,
            read: record,
        };
        let len = cur.take(2).ok_or_else(|| truncated(&cur))?;
        let len = u16::from_le_bytes([len[0], len[1]]) as usize;
        let label = cur.take(len).ok_or_else(|| truncated(&cur))?;
        let label = std::str::from_utf8(label).map_err(|e| Error::InvalidLabel {
            record: record as usize,
            reason: e.to_string(),
        })?;
        let raw = cur.take(4 * dim).ok_or_else(|| truncated(&cur))?;
        for (slot, chunk) in vector.iter_mut().zip(raw.chunks_exact(4)) {
            *slot = T::from_f32_exact(f32::from_le_bytes(chunk.try_into().unwrap()));
        }
        set.push(label, &vector)?;
    }
    if cur.pos != bytes.len() {
        return Err(Error::TrailingData {
            offset: cur.pos as u64,
            count: (bytes.len() - cur.pos) as u64,
        });
    }
    Ok(set)
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Serialize, Deserialize)]
struct JsonEntry<T> {
    label: String,
    vector: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct JsonSet<T> {
    dimension: usize,
    entries: Vec<JsonEntry<T>>,
}

pub fn encode_json<T: Scalar>(set: &EmbeddingSet<T>) -> Result<String> {
    let doc = JsonSet {
        dimension: set.dimension,
        entries: set
            .iter()
            .map(|(l, v)| JsonEntry {
                label: l.to_string(),
                vector: v.to_vec(),
            })
            .collect(),
    };
    serde_json::to_string(&doc).map_err(|e| Error::Json(e.to_string()))
}

pub fn decode_json<T: Scalar>(text: &str) -> Result<EmbeddingSet<T>> {
    // Non-finite values cannot appear in JSON, so parse as f64 and validate.
    let doc: JsonSet<f64> = serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
    if doc.dimension == 0 {
        return Err(Error::Json("dimension must be positive".into()));
    }
    let mut set = EmbeddingSet::new(doc.dimension);
    for e in doc.entries {
        let v: Vec<T> = e.vector.iter().map(|&x| T::lit(x)).collect();
        set.push(e.label, &v)?;
    }
    Ok(set)
}

// ---------------------------------------------------------------------------
// files

/// Reads an embedding set, detecting the format from the leading bytes.
pub fn read_embedding_set<T: Scalar>(path: impl AsRef<Path>) -> Result<EmbeddingSet<T>> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&HEMB1_MAGIC) {
        return decode_hemb1(&bytes);
    }
    let text = std::str::from_utf8(&bytes);
    match text {
        Ok(t) if t.trim_start().starts_with('{') => decode_json(t),
        _ => decode_hemb1(&bytes),
    }
}

/// Writes `HEMB1`, or JSON when the path ends in `.json`.
pub fn write_embedding_set<T: Scalar>(set: &EmbeddingSet<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = if path.extension().is_some_and(|e| e == "json") {
        encode_json(set)?.into_bytes()
    } else {
        encode_hemb1(set)?
    };
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
