//! Binary checkpoint format (all integers little-endian):
//!
//! ```text
//! magic          8 bytes  "ZPSNNCKP"
//! version        u32      FORMAT_VERSION
//! header         u32 length + UTF-8 `key=value` lines (model config, feature schema)
//! vocabulary     u32 count, then per word: u32 length + UTF-8 bytes
//! tensors        u32 count, then per tensor in declared order:
//!                u32 name length + name, u32 rank, u64 per dim, f64 per entry
//! ```

use std::fs;
use std::path::Path;

use super::{ContextWindow, ModelConfig, ModelParams, ZpCombine};
use crate::candidates::FEATURE_SCHEMA_VERSION;
use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::nn::{ParamStore, Tensor};

pub const MAGIC: &[u8; 8] = b"ZPSNNCKP";
pub const FORMAT_VERSION: u32 = 1;

fn err(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn encode(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    put_str(&mut out, &header_text(&params.config));
    put_u32(&mut out, params.vocab.len() as u32);
    for w in params.vocab.words() {
        put_str(&mut out, w);
    }
    put_u32(&mut out, params.store.len() as u32);
    for (_, p) in params.store.iter() {
        put_str(&mut out, &p.name);
        put_u32(&mut out, p.value.shape().len() as u32);
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(err("bad magic"));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(err(format!("unsupported format version {version}")));
    }
    let config = parse_header(&r.string()?)?;
    let n_words = r.u32()? as usize;
    let mut words = Vec::with_capacity(n_words.min(r.remaining() / 4));
    for _ in 0..n_words {
        words.push(r.string()?);
    }
    let vocab = Vocab::from_words(words);
    if vocab.len() != n_words {
        return Err(err("duplicate vocabulary entry"));
    }
    let n_tensors = r.u32()? as usize;
    let mut store = ParamStore::new();
    for _ in 0..n_tensors {
        let name = r.string()?;
        let rank = r.u32()? as usize;
        if rank > 8 {
            return Err(err(format!("tensor {name} has implausible rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        let mut count: usize = 1;
        for _ in 0..rank {
            let d = usize::try_from(r.u64()?).map_err(|_| err("dimension overflow"))?;
            count = count.checked_mul(d).ok_or_else(|| err("dimension overflow"))?;
            shape.push(d);
        }
        let byte_len = count.checked_mul(8).ok_or_else(|| err("dimension overflow"))?;
        let raw = r.take(byte_len)?;
        let data: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if store.find(&name).is_some() {
            return Err(err(format!("duplicate tensor {name}")));
        }
        store.add(name, Tensor::new(shape, data)?);
    }
    if r.remaining() != 0 {
        return Err(err(format!("{} trailing bytes", r.remaining())));
    }
    let params = ModelParams::from_store(config, vocab, store)?;
    // Declared order is required so that encode(decode(x)) == x.
    if !params.store.iter().map(|(_, p)| p.name.as_str()).eq(declared_names()) {
        return Err(err("tensors are not in declared order"));
    }
    Ok(params)
}

/// Parameter names in registration order.
pub fn declared_names() -> impl Iterator<Item = &'static str> {
    const NAMES: [&str; 22] = [
        "embeddings",
        "unk",
        "lstm_pre.w_input",
        "lstm_pre.w_recurrent",
        "lstm_pre.bias",
        "lstm_fol.w_input",
        "lstm_fol.w_recurrent",
        "lstm_fol.bias",
        "local.l1.w",
        "local.l1.b",
        "local.l2.w",
        "local.l2.b",
        "local.l3.w",
        "local.l3.b",
        "global_fwd.w_input",
        "global_fwd.w_recurrent",
        "global_fwd.bias",
        "global_bwd.w_input",
        "global_bwd.w_recurrent",
        "global_bwd.bias",
        "scorer.w",
        "scorer.b",
    ];
    NAMES.into_iter()
}

pub fn save(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(params))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<ModelParams> {
    decode(&fs::read(path)?)
}

fn header_text(c: &ModelConfig) -> String {
    format!(
        "feature_schema={FEATURE_SCHEMA_VERSION}\nembedding_dim={}\nzp_hidden={}\nlocal_hidden={},{},{}\nglobal_hidden={}\ncontext_window={}\nzp_combine={}\nfeature_dim={}\n",
        c.embedding_dim,
        c.zp_hidden,
        c.local_hidden[0],
        c.local_hidden[1],
        c.local_hidden[2],
        c.global_hidden,
        c.context_window,
        c.zp_combine,
        c.feature_dim,
    )
}

fn parse_header(text: &str) -> Result<ModelConfig> {
    let mut c = ModelConfig::default();
    let mut schema = None;
    let num = |k: &str, v: &str| v.parse::<usize>().map_err(|_| err(format!("bad {k} `{v}`")));
    for line in text.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| err(format!("bad header line `{line}`")))?;
        match k {
            "feature_schema" => schema = Some(v.to_string()),
            "embedding_dim" => c.embedding_dim = num(k, v)?,
            "zp_hidden" => c.zp_hidden = num(k, v)?,
            "local_hidden" => {
                let w: Vec<usize> = v.split(',').map(|x| num(k, x)).collect::<Result<_>>()?;
                c.local_hidden = w.try_into().map_err(|_| err("local_hidden needs three widths"))?;
            }
            "global_hidden" => c.global_hidden = num(k, v)?,
            "context_window" => c.context_window = v.parse::<ContextWindow>()?,
            "zp_combine" => c.zp_combine = v.parse::<ZpCombine>()?,
            "feature_dim" => c.feature_dim = num(k, v)?,
            _ => return Err(err(format!("unknown header key `{k}`"))),
        }
    }
    match schema.as_deref() {
        Some(FEATURE_SCHEMA_VERSION) => {}
        Some(other) => return Err(err(format!("unsupported feature schema `{other}`"))),
        None => return Err(err("missing feature_schema")),
    }
    if text != header_text(&c) {
        return Err(err("non-canonical header"));
    }
    Ok(c)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(err("unexpected end of checkpoint"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| err("invalid UTF-8"))
    }
}
