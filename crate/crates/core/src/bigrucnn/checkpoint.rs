//! Single-file model checkpoints.
//!
//! Layout:
//!
//! ```text
//! infotweet-bigrucnn-checkpoint\n
//! <one line of JSON: format version, config, vocabulary, tensor manifest>\n
//! <raw little-endian f64 data for each manifest entry, in order>
//! ```
//!
//! The manifest lists every tensor's name and shape, so the file can be
//! inspected without this crate. The vocabulary hash is recomputed on load
//! and must match.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayViewD, ArrayViewMutD};
use serde::{Deserialize, Serialize};

use super::{Adam, ModelConfig, ModelState, Weights};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

pub const MAGIC: &str = "infotweet-bigrucnn-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: u32,
    config: ModelConfig,
    embedding_dim: usize,
    vocab_hash: String,
    tokens: Vec<String>,
    optimizer_step: u64,
    tensors: Vec<TensorEntry>,
}

fn collect_views(state: &ModelState) -> Vec<(String, ArrayViewD<'_, f64>)> {
    let mut views = vec![("embedding".to_string(), state.embeddings.matrix().view().into_dyn())];
    views.extend(state.weights.tensors());
    let opt = &state.optimizer;
    views.extend(opt.first.tensors().into_iter().map(|(n, t)| (format!("adam.m.{n}"), t)));
    views.extend(opt.second.tensors().into_iter().map(|(n, t)| (format!("adam.v.{n}"), t)));
    if let (Some(m), Some(v)) = (&opt.embedding_first, &opt.embedding_second) {
        views.push(("adam.m.embedding".to_string(), m.view().into_dyn()));
        views.push(("adam.v.embedding".to_string(), v.view().into_dyn()));
    }
    views
}

pub fn to_bytes(state: &ModelState) -> Result<Vec<u8>> {
    let views = collect_views(state);
    let header = Header {
        format: FORMAT_VERSION,
        config: state.config.clone(),
        embedding_dim: state.embeddings.dim(),
        vocab_hash: state.embeddings.vocab_hash(),
        tokens: state.embeddings.tokens().to_vec(),
        optimizer_step: state.optimizer.step,
        tensors: views
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_string(&header).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let floats: usize = views.iter().map(|(_, t)| t.len()).sum();
    let mut out = Vec::with_capacity(MAGIC.len() + json.len() + 2 + floats * 8);
    out.extend_from_slice(MAGIC.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(json.as_bytes());
    out.push(b'\n');
    for (_, t) in &views {
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save(state: &ModelState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(state)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<ModelState> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes).map_err(|e| e.in_file(path))
}

fn split_line(bytes: &[u8]) -> Result<(&[u8], &[u8])> {
    let pos = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Checkpoint("truncated header".into()))?;
    Ok((&bytes[..pos], &bytes[pos + 1..]))
}

fn fill(mut dst: ArrayViewMutD<'_, f64>, data: &mut &[u8], name: &str) -> Result<()> {
    let need = dst.len() * 8;
    if data.len() < need {
        return Err(Error::Checkpoint(format!("tensor {name} is truncated")));
    }
    let (head, rest) = data.split_at(need);
    for (slot, chunk) in dst.iter_mut().zip(head.chunks_exact(8)) {
        *slot = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    *data = rest;
    Ok(())
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelState> {
    let (magic, rest) = split_line(bytes)?;
    if magic != MAGIC.as_bytes() {
        return Err(Error::Checkpoint("not a bigrucnn checkpoint".into()));
    }
    let (json, mut data) = split_line(rest)?;
    let header: Header =
        serde_json::from_slice(json).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    if header.format != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {} (expected {FORMAT_VERSION})",
            header.format
        )));
    }
    header.config.validate()?;

    let config = header.config;
    let dim = header.embedding_dim;
    let mut embedding = Array2::zeros((header.tokens.len(), dim));
    let mut weights = Weights::zeros(&config, dim);
    let mut optimizer = Adam::new(&weights, config.trainable_embeddings.then(|| embedding.dim()));
    optimizer.step = header.optimizer_step;

    let mut expected: Vec<(String, Vec<usize>)> =
        vec![("embedding".to_string(), vec![header.tokens.len(), dim])];
    expected.extend(weights.tensors().into_iter().map(|(n, t)| (n, t.shape().to_vec())));
    expected.extend(
        weights
            .tensors()
            .into_iter()
            .map(|(n, t)| (format!("adam.m.{n}"), t.shape().to_vec())),
    );
    expected.extend(
        weights
            .tensors()
            .into_iter()
            .map(|(n, t)| (format!("adam.v.{n}"), t.shape().to_vec())),
    );
    if config.trainable_embeddings {
        expected.push(("adam.m.embedding".to_string(), vec![header.tokens.len(), dim]));
        expected.push(("adam.v.embedding".to_string(), vec![header.tokens.len(), dim]));
    }
    let listed: Vec<(String, Vec<usize>)> = header
        .tensors
        .iter()
        .map(|t| (t.name.clone(), t.shape.clone()))
        .collect();
    if listed != expected {
        return Err(Error::Checkpoint("tensor manifest does not match the configuration".into()));
    }

    fill(embedding.view_mut().into_dyn(), &mut data, "embedding")?;
    for (name, t) in weights.tensors_mut() {
        fill(t, &mut data, &name)?;
    }
    for (name, t) in optimizer.first.tensors_mut() {
        fill(t, &mut data, &name)?;
    }
    for (name, t) in optimizer.second.tensors_mut() {
        fill(t, &mut data, &name)?;
    }
    if let (Some(m), Some(v)) = (optimizer.embedding_first.as_mut(), optimizer.embedding_second.as_mut()) {
        fill(m.view_mut().into_dyn(), &mut data, "adam.m.embedding")?;
        fill(v.view_mut().into_dyn(), &mut data, "adam.v.embedding")?;
    }
    if !data.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", data.len())));
    }

    let embeddings = EmbeddingTable::from_parts(header.tokens, embedding)?;
    if embeddings.vocab_hash() != header.vocab_hash {
        return Err(Error::Checkpoint("vocabulary hash mismatch".into()));
    }
    Ok(ModelState {
        config,
        embeddings,
        weights,
        optimizer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_state(trainable: bool) -> ModelState {
        let table = EmbeddingTable::from_entries(
            3,
            vec![
                ("covid".into(), vec![0.1, -0.2, 0.3]),
                ("cases".into(), vec![1.0, 0.5, -0.5]),
            ],
        )
        .unwrap();
        let config = ModelConfig {
            max_length: 8,
            conv_filters: 4,
            gru_hidden: 3,
            trainable_embeddings: trainable,
            ..Default::default()
        };
        ModelState::new(config, table).unwrap()
    }

    #[test]
    fn bytes_round_trip() {
        for trainable in [false, true] {
            let mut state = small_state(trainable);
            state.optimizer.step = 7;
            state.optimizer.first.dense_b[0] = 0.25;
            let bytes = to_bytes(&state).unwrap();
            let back = from_bytes(&bytes).unwrap();
            assert_eq!(back, state);
            assert_eq!(to_bytes(&back).unwrap(), bytes);
        }
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let bytes = to_bytes(&small_state(false)).unwrap();
        assert!(from_bytes(b"garbage\n{}\n").is_err());
        assert!(from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(from_bytes(&extra).is_err());

        // Tamper with the vocabulary hash.
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let hash = small_state(false).embeddings.vocab_hash();
        let pos = text.find(&hash).unwrap();
        let mut tampered = bytes.clone();
        tampered[pos] = if tampered[pos] == b'0' { b'1' } else { b'0' };
        let err = from_bytes(&tampered).unwrap_err();
        assert!(err.to_string().contains("hash"), "{err}");
    }
}
