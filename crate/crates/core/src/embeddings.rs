//! Pre-trained word vectors in the plain GloVe text format.
//!
//! Index 0 is reserved for padding (always the zero vector) and index 1 for
//! unknown words, whose vector is the mean of every vector in the source
//! file. Vocabulary entries follow from index 2 in file order.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Array2<f64>,
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` pairs. Repeated tokens keep
    /// their first vector; reserved names are skipped.
    pub fn from_entries(dim: usize, entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut index = HashMap::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (token, vector) in entries {
            if vector.len() != dim {
                return Err(Error::Shape(format!(
                    "vector for {token:?} has {} components, expected {dim}",
                    vector.len()
                )));
            }
            if token == PAD_TOKEN || token == UNK_TOKEN || index.contains_key(&token) {
                continue;
            }
            index.insert(token.clone(), tokens.len());
            tokens.push(token);
            rows.push(vector);
        }

        let mut vectors = Array2::zeros((tokens.len(), dim));
        for (row, values) in rows.iter().enumerate() {
            for (col, &v) in values.iter().enumerate() {
                vectors[[row + 2, col]] = v;
            }
        }
        if !rows.is_empty() {
            let mean = vectors.slice(ndarray::s![2.., ..]).mean_axis(Axis(0)).unwrap();
            vectors.row_mut(UNK).assign(&mean);
        }
        Ok(EmbeddingTable {
            dim,
            tokens,
            index,
            vectors,
        })
    }

    /// Reassembles a table from its full token list (reserved entries
    /// included) and matrix, e.g. when reading a checkpoint.
    pub fn from_parts(tokens: Vec<String>, vectors: Array2<f64>) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD] != PAD_TOKEN || tokens[UNK] != UNK_TOKEN {
            return Err(Error::Shape("token list must start with <pad>, <unk>".into()));
        }
        if vectors.nrows() != tokens.len() || vectors.ncols() == 0 {
            return Err(Error::Shape(format!(
                "{} tokens but a {}x{} matrix",
                tokens.len(),
                vectors.nrows(),
                vectors.ncols()
            )));
        }
        if vectors.row(PAD).iter().any(|&v| v != 0.0) {
            return Err(Error::Shape("padding vector is not zero".into()));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite embedding component".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, token) in tokens.iter().enumerate().skip(2) {
            if index.insert(token.clone(), i).is_some() {
                return Err(Error::Shape(format!("token {token:?} listed twice")));
            }
        }
        Ok(EmbeddingTable {
            dim: vectors.ncols(),
            tokens,
            index,
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of rows, reserved entries included.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vector(&self, index: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(index)
    }

    pub fn lookup(&self, token: &str) -> ArrayView1<'_, f64> {
        self.vector(self.index_of(token).unwrap_or(UNK))
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut Array2<f64> {
        &mut self.vectors
    }

    /// Keeps only the tokens that occur in `corpus_tokens`, plus the reserved
    /// rows. Surviving vectors (and the unknown-word vector) are copied as-is.
    pub fn restrict_to_corpus(&self, corpus_tokens: &HashSet<String>) -> EmbeddingTable {
        let keep: Vec<usize> = (2..self.tokens.len())
            .filter(|&i| corpus_tokens.contains(&self.tokens[i]))
            .collect();
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut index = HashMap::with_capacity(keep.len());
        let mut vectors = Array2::zeros((keep.len() + 2, self.dim));
        vectors.row_mut(UNK).assign(&self.vectors.row(UNK));
        for (offset, &old) in keep.iter().enumerate() {
            let new = offset + 2;
            vectors.row_mut(new).assign(&self.vectors.row(old));
            index.insert(self.tokens[old].clone(), new);
            tokens.push(self.tokens[old].clone());
        }
        EmbeddingTable {
            dim: self.dim,
            tokens,
            index,
            vectors,
        }
    }

    /// SHA-256 over the ordered token list; ties a checkpoint to the
    /// vocabulary its indices refer to.
    pub fn vocab_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for token in &self.tokens {
            hasher.update(token.as_bytes());
            hasher.update([0u8]);
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Reads a word-per-line vector file: a token followed by exactly `dim`
/// whitespace-separated decimal components.
pub fn load_vectors(path: impl AsRef<Path>, dim: usize) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut entries = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(entry) = parse_vector_line(&line, idx + 1, dim).map_err(|e| e.in_file(path))? {
            entries.push(entry);
        }
    }
    EmbeddingTable::from_entries(dim, entries).map_err(|e| e.in_file(path))
}

/// Streaming equivalent of `load_vectors(path, dim)?.restrict_to_corpus(vocab)`:
/// only rows for `vocab` are kept, but the unknown-word vector is still the
/// mean over the whole file.
pub fn load_vectors_for(path: impl AsRef<Path>, dim: usize, vocab: &HashSet<String>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be at least 1".into()));
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut seen = HashSet::new();
    let mut sum = vec![0.0; dim];
    let mut count = 0usize;
    let mut kept = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let Some((token, vector)) = parse_vector_line(&line, idx + 1, dim).map_err(|e| e.in_file(path))? else {
            continue;
        };
        if token == PAD_TOKEN || token == UNK_TOKEN || !seen.insert(token.clone()) {
            continue;
        }
        for (s, v) in sum.iter_mut().zip(&vector) {
            *s += v;
        }
        count += 1;
        if vocab.contains(&token) {
            kept.push((token, vector));
        }
    }
    let mut table = EmbeddingTable::from_entries(dim, kept)?;
    let unk = if count == 0 { vec![0.0; dim] } else { sum.iter().map(|s| s / count as f64).collect() };
    table.vectors.row_mut(UNK).assign(&ndarray::ArrayView1::from(&unk));
    Ok(table)
}

fn parse_vector_line(line: &str, line_no: usize, dim: usize) -> Result<Option<(String, Vec<f64>)>> {
    let mut parts = line.split_whitespace();
    let Some(token) = parts.next() else {
        return Ok(None);
    };
    let values: Vec<&str> = parts.collect();
    if values.len() != dim {
        return Err(Error::EmbeddingDimension {
            line: line_no,
            expected: dim,
            found: values.len(),
        });
    }
    let mut vector = Vec::with_capacity(dim);
    for raw in values {
        let v: f64 = raw.parse().map_err(|_| Error::BadVectorValue {
            line: line_no,
            reason: format!("cannot parse {raw:?} as a number"),
        })?;
        if !v.is_finite() {
            return Err(Error::BadVectorValue {
                line: line_no,
                reason: format!("non-finite component {raw:?}"),
            });
        }
        vector.push(v);
    }
    Ok(Some((token.to_string(), vector)))
}
