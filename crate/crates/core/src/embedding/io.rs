use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use percent_encoding::percent_decode_str;
use serde::{Deserialize, Serialize};

use super::{EmbeddingModel, Vocabulary, Word2vecConfig};
use crate::error::{Error, Result};
use crate::lexer::LEXER_VERSION;
use crate::model::config_digest;
use crate::numerics::Matrix;
use crate::TOOLKIT_VERSION;

/// Training metadata written next to an embedding file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub config: Word2vecConfig,
    pub seed: u64,
    /// Digest of `config`; see [`crate::model::config_digest`].
    pub config_digest: String,
    pub vocab_size: usize,
    pub dim: usize,
    /// Per-lexeme training counts, in file order.
    pub counts: Vec<u64>,
    pub epoch_losses: Vec<f64>,
    pub toolkit_version: String,
    pub lexer_version: u32,
}

/// `vectors.txt` -> `vectors.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn encode_lexeme(lexeme: &str) -> String {
    let mut out = String::with_capacity(lexeme.len());
    for ch in lexeme.chars() {
        if ch.is_whitespace() || ch == '%' {
            let mut buf = [0u8; 4];
            for b in ch.encode_utf8(&mut buf).bytes() {
                let _ = write!(out, "%{b:02X}");
            }
        } else {
            out.push(ch);
        }
    }
    out
}

fn decode_lexeme(field: &str, line: usize) -> Result<String> {
    percent_decode_str(field)
        .decode_utf8()
        .map(|s| s.into_owned())
        .map_err(|_| Error::Record {
            line,
            message: "lexeme is not valid UTF-8 after percent-decoding".into(),
        })
}

/// Renders the embedding file: a `<vocab_size> <dim>` header, then one line
/// per vocabulary entry with nine significant digits per component.
pub fn render_text(model: &EmbeddingModel) -> String {
    let mut out = format!("{} {}\n", model.vocab.len(), model.dim());
    for (i, lexeme) in model.vocab.lexemes().iter().enumerate() {
        out.push_str(&encode_lexeme(lexeme));
        for v in model.input_vectors.row(i) {
            let _ = write!(out, " {v:.8e}");
        }
        out.push('\n');
    }
    out
}

/// Sidecar metadata for `model`.
pub fn sidecar(model: &EmbeddingModel) -> Result<EmbeddingSidecar> {
    Ok(EmbeddingSidecar {
        config: model.config.clone(),
        seed: model.config.seed,
        config_digest: config_digest(&model.config)?,
        vocab_size: model.vocab.len(),
        dim: model.dim(),
        counts: model.vocab.counts().to_vec(),
        epoch_losses: model.epoch_losses.clone(),
        toolkit_version: TOOLKIT_VERSION.to_string(),
        lexer_version: LEXER_VERSION,
    })
}

/// Writes the embedding file and its JSON sidecar.
pub fn write_text(model: &EmbeddingModel, path: &Path) -> Result<()> {
    fs::write(path, render_text(model)).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar(model)?)?;
    fs::write(&side, json + "\n").map_err(|e| Error::io(&side, e))
}

/// Parses an embedding file. Without sidecar information every count is 1
/// and the configuration is the default one with the file's dimension.
pub fn parse_text(text: &str, sidecar: Option<EmbeddingSidecar>) -> Result<EmbeddingModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or(Error::Empty("embedding file"))?;
    let bad_header = || Error::Record {
        line: 1,
        message: format!("expected `<vocab_size> <dim>`, found {header:?}"),
    };
    let mut fields = header.split_whitespace();
    let vocab_size: usize = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad_header)?;
    let dim: usize = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad_header)?;
    if fields.next().is_some() || vocab_size == 0 || dim == 0 {
        return Err(bad_header());
    }

    let mut lexemes = Vec::with_capacity(vocab_size);
    let mut data = Vec::with_capacity(vocab_size * dim);
    for (line, text) in lines {
        if text.trim().is_empty() {
            continue;
        }
        let mut fields = text.split(' ');
        let lexeme = decode_lexeme(fields.next().unwrap_or_default(), line)?;
        let before = data.len();
        for f in fields {
            let v: f64 = f.parse().map_err(|_| Error::Record {
                line,
                message: format!("invalid component {f:?}"),
            })?;
            data.push(v);
        }
        if data.len() - before != dim {
            return Err(Error::Record {
                line,
                message: format!("expected {dim} components, found {}", data.len() - before),
            });
        }
        lexemes.push(lexeme);
    }
    if lexemes.len() != vocab_size {
        return Err(Error::Artifact(format!(
            "header declares {vocab_size} entries but the file holds {}",
            lexemes.len()
        )));
    }

    let (config, counts, epoch_losses) = match sidecar {
        Some(s) if s.counts.len() == vocab_size && s.dim == dim => (s.config, s.counts, s.epoch_losses),
        Some(_) => return Err(Error::Artifact("sidecar does not match the embedding file".into())),
        None => (
            Word2vecConfig {
                vector_dim: dim,
                ..Word2vecConfig::default()
            },
            vec![1; vocab_size],
            Vec::new(),
        ),
    };
    // Keep file order: counts are only used for display once loaded.
    let vocab = Vocabulary::from_ordered(lexemes, counts)?;
    Ok(EmbeddingModel {
        vocab,
        input_vectors: Matrix::from_vec(vocab_size, dim, data)?,
        output_vectors: None,
        config,
        epoch_losses,
    })
}

/// Reads an embedding file, picking up its sidecar when one exists.
pub fn read_text(path: &Path) -> Result<EmbeddingModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let sidecar = match fs::read_to_string(&side) {
        Ok(json) => Some(serde_json::from_str(&json)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(Error::io(&side, e)),
    };
    parse_text(&text, sidecar)
}
