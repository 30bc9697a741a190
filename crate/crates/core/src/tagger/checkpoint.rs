//! Versioned binary checkpoint container.
//!
//! Layout: 8-byte magic `OIECKPT\0`, `u32` format version, `u64` header
//! length, a JSON header (config, vocabulary, config hash, tensor shapes,
//! optimizer hyperparameters), then every tensor as row-major little-endian
//! `f64`, in header order. Optimizer accumulators, when present, follow the
//! parameters (squared gradients, then squared updates).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Adadelta, Model, ModelConfig, Params, TaggerError};
use crate::corpus::Vocab;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"OIECKPT\0";

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct OptimizerInfo {
    rho: f64,
    eps: f64,
    lr: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab: Vec<String>,
    config_hash: String,
    tensors: Vec<TensorInfo>,
    optimizer: Option<OptimizerInfo>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub optimizer: Option<Adadelta>,
    pub config_hash: String,
}

fn err(path: &Path, message: impl Into<String>) -> TaggerError {
    TaggerError::Checkpoint {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn write_params<W: Write>(w: &mut W, p: &Params) -> std::io::Result<()> {
    for (_, m) in p.named() {
        for v in m.as_slice() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_params<R: Read>(r: &mut R, p: &mut Params) -> std::io::Result<()> {
    let mut buf = [0u8; 8];
    let mut result = Ok(());
    p.for_each_mut(|_, m| {
        if result.is_err() {
            return;
        }
        for v in m.as_mut_slice() {
            if let Err(e) = r.read_exact(&mut buf) {
                result = Err(e);
                return;
            }
            *v = f64::from_le_bytes(buf);
        }
    });
    result
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    model: &Model,
    optimizer: Option<&Adadelta>,
    config_hash: &str,
) -> Result<(), TaggerError> {
    let path = path.as_ref();
    let header = Header {
        config: model.config.clone(),
        vocab: model.vocab.words().to_vec(),
        config_hash: config_hash.to_string(),
        tensors: model
            .params
            .named()
            .into_iter()
            .map(|(name, m)| TensorInfo {
                name,
                rows: m.rows(),
                cols: m.cols(),
            })
            .collect(),
        optimizer: optimizer.map(|o| OptimizerInfo {
            rho: o.rho,
            eps: o.eps,
            lr: o.lr,
        }),
    };
    let header = serde_json::to_vec(&header).map_err(|e| err(path, e.to_string()))?;
    let io = |e: std::io::Error| err(path, e.to_string());
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(header.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&header).map_err(io)?;
    write_params(&mut w, &model.params).map_err(io)?;
    if let Some(o) = optimizer {
        write_params(&mut w, &o.sq_grad).map_err(io)?;
        write_params(&mut w, &o.sq_update).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, TaggerError> {
    let path = path.as_ref();
    let io = |e: std::io::Error| err(path, e.to_string());
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(err(path, "not a checkpoint file"));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word).map_err(io)?;
    let version = u32::from_le_bytes(word);
    if version != CHECKPOINT_VERSION {
        return Err(err(path, format!("unsupported checkpoint version {version}")));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(io)?;
    let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut header).map_err(io)?;
    let header: Header = serde_json::from_slice(&header).map_err(|e| err(path, e.to_string()))?;

    let vocab = Vocab::from_words(header.vocab.iter().skip(2).cloned());
    if vocab.words() != header.vocab.as_slice() {
        return Err(err(path, "vocabulary does not start with reserved symbols"));
    }
    let mut model = Model::new(header.config, vocab)?;
    let shapes: Vec<(String, usize, usize)> = model
        .params
        .named()
        .into_iter()
        .map(|(n, m)| (n, m.rows(), m.cols()))
        .collect();
    let stored: Vec<(String, usize, usize)> = header
        .tensors
        .iter()
        .map(|t| (t.name.clone(), t.rows, t.cols))
        .collect();
    if shapes != stored {
        return Err(err(path, "tensor shapes do not match the stored config"));
    }
    read_params(&mut r, &mut model.params).map_err(io)?;
    let optimizer = match header.optimizer {
        Some(info) => {
            let mut o = Adadelta::new(&model.params);
            o.rho = info.rho;
            o.eps = info.eps;
            o.lr = info.lr;
            read_params(&mut r, &mut o.sq_grad).map_err(io)?;
            read_params(&mut r, &mut o.sq_update).map_err(io)?;
            Some(o)
        }
        None => None,
    };
    Ok(Checkpoint {
        model,
        optimizer,
        config_hash: header.config_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;

    #[test]
    fn save_load_reproduces_forward_bitwise() {
        let vocab = Vocab::from_words(["x", "y"].iter().map(|s| s.to_string()));
        let config = ModelConfig {
            word_dim: 3,
            predicate_dim: 2,
            hidden_dim: 4,
            num_layers: 2,
            recurrent_dropout: 0.1,
            max_args: 2,
            seed: 5,
        };
        let model = Model::new(config, vocab).unwrap();
        let mut opt = Adadelta::new(&model.params);
        opt.sq_grad.output_bias.fill(0.5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &model, Some(&opt), "abc").unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.config_hash, "abc");
        assert_eq!(back.model, model);
        assert_eq!(back.optimizer.unwrap(), opt);
        let s = Sentence {
            id: "s".into(),
            tokens: vec!["x".into(), "q".into(), "y".into()],
            candidate_predicates: vec![0],
        };
        let a = model.forward(&s, 0, None);
        let b = back.model.forward(&s, 0, None);
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk");
        std::fs::write(&path, b"hello world, definitely not a model").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
