//! Trained-model files.
//!
//! ```text
//! "EFIG"  u32 version  u64 payload_len  payload  sha256(payload)
//! payload: u32 header_len, JSON header, u32 blob_count, blobs
//! blob:    u16 name_len, name, u64 rows, u64 cols, f64 row-major
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dense::DenseMat;
use crate::error::{Error, Result};
use crate::model::{BatchNormParams, ModelConfig, ModelParams};

pub const MAGIC: &[u8; 4] = b"EFIG";
pub const VERSION: u32 = 1;
const FILE: &str = "model file";

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub config: ModelConfig,
    pub params: ModelParams<f64>,
    /// Free-form provenance (dataset name, seed, ...).
    pub info: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    block_offsets: Vec<usize>,
    info: BTreeMap<String, String>,
}

fn blobs(params: &ModelParams<f64>) -> Vec<(String, DenseMat<f64>)> {
    let mut v = Vec::new();
    for (l, w) in params.efi.iter().enumerate() {
        v.push((format!("efi.w{l}"), w.clone()));
    }
    for (l, w) in params.gcn.iter().enumerate() {
        v.push((format!("gcn.w{l}"), w.clone()));
    }
    for (l, b) in params.bn.iter().enumerate() {
        let row = |x: &[f64]| DenseMat::from_vec(1, x.len(), x.to_vec()).expect("row vector");
        v.push((format!("bn{l}.gamma"), b.gamma.clone()));
        v.push((format!("bn{l}.beta"), b.beta.clone()));
        v.push((format!("bn{l}.running_mean"), row(&b.running_mean)));
        v.push((format!("bn{l}.running_var"), row(&b.running_var)));
    }
    v.push(("out".into(), params.out.clone()));
    v
}

pub fn to_bytes(model: &SavedModel) -> Result<Vec<u8>> {
    model.config.validate()?;
    model.params.check_shapes(&model.config)?;
    let header = serde_json::to_vec(&Header {
        config: model.config.clone(),
        block_offsets: model.config.block_offsets(),
        info: model.info.clone(),
    })?;
    let mut payload = Vec::new();
    payload.extend_from_slice(&(header.len() as u32).to_le_bytes());
    payload.extend_from_slice(&header);
    let blobs = blobs(&model.params);
    payload.extend_from_slice(&(blobs.len() as u32).to_le_bytes());
    for (name, m) in &blobs {
        payload.extend_from_slice(&(name.len() as u16).to_le_bytes());
        payload.extend_from_slice(name.as_bytes());
        payload.extend_from_slice(&(m.rows() as u64).to_le_bytes());
        payload.extend_from_slice(&(m.cols() as u64).to_le_bytes());
        for v in m.as_slice() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut out = Vec::with_capacity(payload.len() + 48);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&Sha256::digest(&payload));
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::format(FILE, "payload ends early"))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<SavedModel> {
    if bytes.len() < 16 {
        return Err(Error::Checksum);
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(FILE, "bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let len = usize::try_from(len).map_err(|_| Error::Checksum)?;
    if bytes.len() != 16usize.saturating_add(len).saturating_add(32) {
        return Err(Error::Checksum);
    }
    let payload = &bytes[16..16 + len];
    if Sha256::digest(payload)[..] != bytes[16 + len..] {
        return Err(Error::Checksum);
    }

    let mut r = Reader {
        bytes: payload,
        at: 0,
    };
    let hlen = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(hlen)?)?;
    header.config.validate()?;
    if header.block_offsets != header.config.block_offsets() {
        return Err(Error::format(FILE, "block offsets disagree with config"));
    }
    let count = r.u32()?;
    let mut named = BTreeMap::new();
    for _ in 0..count {
        let nlen = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(nlen)?)
            .map_err(|_| Error::format(FILE, "blob name is not UTF-8"))?
            .to_string();
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::format(FILE, "blob dimensions overflow"))?;
        let data = r
            .take(n)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if named
            .insert(name.clone(), DenseMat::from_vec(rows, cols, data)?)
            .is_some()
        {
            return Err(Error::format(FILE, format!("duplicate blob {name}")));
        }
    }
    if r.at != payload.len() {
        return Err(Error::format(FILE, "trailing bytes in payload"));
    }

    let mut take = |name: String| {
        named
            .remove(&name)
            .ok_or_else(|| Error::format(FILE, format!("missing blob {name}")))
    };
    let cfg = &header.config;
    let efi_n = cfg.efi.as_ref().map_or(0, |e| e.num_layers + 1);
    let gcn_n = cfg.gcn.as_ref().map_or(0, |g| g.num_layers);
    let bn_n = cfg
        .gcn
        .as_ref()
        .filter(|g| g.batch_norm)
        .map_or(0, |g| g.num_layers);
    let efi = (0..efi_n)
        .map(|l| take(format!("efi.w{l}")))
        .collect::<Result<_>>()?;
    let gcn = (0..gcn_n)
        .map(|l| take(format!("gcn.w{l}")))
        .collect::<Result<_>>()?;
    let bn = (0..bn_n)
        .map(|l| {
            Ok(BatchNormParams {
                gamma: take(format!("bn{l}.gamma"))?,
                beta: take(format!("bn{l}.beta"))?,
                running_mean: take(format!("bn{l}.running_mean"))?.into_vec(),
                running_var: take(format!("bn{l}.running_var"))?.into_vec(),
            })
        })
        .collect::<Result<_>>()?;
    let out = take("out".into())?;
    if let Some(extra) = named.keys().next() {
        return Err(Error::format(FILE, format!("unexpected blob {extra}")));
    }
    let params = ModelParams { efi, gcn, bn, out };
    params.check_shapes(cfg)?;
    Ok(SavedModel {
        config: header.config,
        params,
        info: header.info,
    })
}

pub fn save_model(path: impl AsRef<Path>, model: &SavedModel) -> Result<()> {
    fs::write(path, to_bytes(model)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EfiGnnConfig, GcnConfig, SkipMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample() -> SavedModel {
        let config = ModelConfig {
            in_features: 5,
            classes: 3,
            efi: Some(EfiGnnConfig {
                num_layers: 2,
                units: 4,
                dropout: 0.5,
                include_block0: true,
            }),
            gcn: Some(GcnConfig {
                num_layers: 2,
                units: 3,
                slope: 0.01,
                dropout: 0.1,
                skip: SkipMode::Dense,
                batch_norm: true,
                bn_eps: 1e-5,
                bn_momentum: 0.9,
            }),
        };
        let params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let mut info = BTreeMap::new();
        info.insert("dataset".into(), "toy".into());
        SavedModel {
            config,
            params,
            info,
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let m = sample();
        let bytes = to_bytes(&m).unwrap();
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_bytes(&back).unwrap(), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = to_bytes(&sample()).unwrap();
        assert!(matches!(
            from_bytes(&bytes[..bytes.len() - 10]),
            Err(Error::Checksum)
        ));
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(matches!(from_bytes(&flipped), Err(Error::Checksum)));
        let mut versioned = bytes.clone();
        versioned[4] = 9;
        assert!(matches!(
            from_bytes(&versioned),
            Err(Error::Version { found: 9, .. })
        ));
        let mut magic = bytes;
        magic[0] = b'X';
        assert!(matches!(from_bytes(&magic), Err(Error::Format { .. })));
    }
}
