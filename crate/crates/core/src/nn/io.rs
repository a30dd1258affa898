//! Binary model container.
//!
//! ```text
//! magic       8 bytes   "TGCNN3D\0"
//! version     u32 LE
//! header_len  u32 LE
//! header      JSON (spec, windowing, representation, normalization, training meta)
//! n_params    u64 LE
//! params      n_params × f64 LE
//! checksum    32 bytes  SHA-256 of everything above
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::network::{Model, TrainingMeta};
use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::repr::{Normalizer, ReprConfig};
use crate::windowing::WindowingConfig;

pub const MAGIC: [u8; 8] = *b"TGCNN3D\0";
pub const FORMAT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

#[derive(Serialize, Deserialize)]
struct Header {
    spec: ModelSpec,
    windowing: WindowingConfig,
    repr: ReprConfig,
    normalizer: Normalizer,
    meta: TrainingMeta,
}

pub fn encode_model(model: &Model) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        spec: model.spec.clone(),
        windowing: model.windowing,
        repr: model.repr,
        normalizer: model.normalizer.clone(),
        meta: model.meta.clone(),
    })?;
    let header_len = u32::try_from(header.len()).map_err(|_| Error::MalformedModel("header too large".into()))?;
    let mut buf = Vec::with_capacity(8 + 4 + 4 + header.len() + 8 + 8 * model.params.len() + CHECKSUM_LEN);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&header_len.to_le_bytes());
    buf.extend_from_slice(&header);
    buf.extend_from_slice(&(model.params.len() as u64).to_le_bytes());
    for p in &model.params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    Ok(buf)
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = pos
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::MalformedModel("truncated file".into()))?;
    let s = &bytes[*pos..end];
    *pos = end;
    Ok(s)
}

pub fn decode_model(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::ChecksumMismatch);
    }
    let mut pos = MAGIC.len();
    let version = u32::from_le_bytes(take(bytes, &mut pos, 4)?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::FormatVersionMismatch {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    if bytes.len() < CHECKSUM_LEN + pos {
        return Err(Error::MalformedModel("truncated file".into()));
    }
    let (body, stored) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != stored {
        return Err(Error::ChecksumMismatch);
    }

    let header_len = u32::from_le_bytes(take(body, &mut pos, 4)?.try_into().expect("4 bytes")) as usize;
    let header_bytes = take(body, &mut pos, header_len)?;
    // resolve the spec name before the full header so unknown names get a
    // precise error
    let raw: serde_json::Value = serde_json::from_slice(header_bytes)?;
    let name = raw
        .pointer("/spec/name")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| Error::MalformedModel("header lacks spec.name".into()))?;
    let registered = ModelSpec::named(&name)?;
    let header: Header = serde_json::from_value(raw)?;
    if header.spec != registered {
        return Err(Error::MalformedModel(format!(
            "stored layers for `{name}` differ from this build's definition"
        )));
    }

    let n = u64::from_le_bytes(take(body, &mut pos, 8)?.try_into().expect("8 bytes")) as usize;
    let blob = take(
        body,
        &mut pos,
        n.checked_mul(8).ok_or_else(|| Error::MalformedModel("size".into()))?,
    )?;
    if pos != body.len() {
        return Err(Error::MalformedModel("trailing bytes before checksum".into()));
    }
    let params = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Model::from_parts(
        header.spec,
        header.windowing,
        header.repr,
        header.normalizer,
        params,
        header.meta,
    )
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let bytes = encode_model(model)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
