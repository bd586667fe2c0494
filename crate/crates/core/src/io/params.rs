use std::path::Path;

use super::bytes::{fnv1a, put_f64s, put_string, to_u32, Reader};
use crate::diff::{ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::network::Network;

pub const PARAMS_MAGIC: &[u8; 8] = b"SKLTPRM\0";
pub const PARAMS_VERSION: u32 = 1;

/// Named tensors plus the hash of the configuration that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamFile {
    pub config_hash: u64,
    pub tensors: Vec<(String, Tensor)>,
}

/// FNV-1a of the network's configuration and variant.
pub fn network_hash(net: &Network) -> u64 {
    let text = serde_json::to_string(net.config()).expect("serialisable");
    fnv1a(format!("{text}|skelet={}", net.is_skelet()).as_bytes())
}

impl ParamFile {
    pub fn from_store(store: &ParamStore, config_hash: u64) -> Self {
        ParamFile {
            config_hash,
            tensors: store
                .iter()
                .map(|(_, p)| (p.name.clone(), p.value.clone()))
                .collect(),
        }
    }

    pub fn from_network(net: &Network) -> Self {
        Self::from_store(net.store(), network_hash(net))
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(PARAMS_MAGIC);
        out.extend_from_slice(&PARAMS_VERSION.to_le_bytes());
        out.extend_from_slice(&self.config_hash.to_le_bytes());
        out.extend_from_slice(&to_u32(self.tensors.len(), "tensor count")?.to_le_bytes());
        for (name, t) in &self.tensors {
            put_string(&mut out, name)?;
            let ndim = u8::try_from(t.ndim())
                .map_err(|_| Error::config(format!("tensor '{name}' has too many axes")))?;
            out.push(ndim);
            for &d in t.shape() {
                out.extend_from_slice(&to_u32(d, "extent")?.to_le_bytes());
            }
            put_f64s(&mut out, t.data());
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        r.magic(PARAMS_MAGIC, "parameter")?;
        let at = r.offset();
        let version = r.u32("version")?;
        if version != PARAMS_VERSION {
            return Err(Error::Format {
                offset: at,
                message: format!("unsupported version {version}, expected {PARAMS_VERSION}"),
            });
        }
        let config_hash = r.u64("config hash")?;
        let count = r.u32("tensor count")? as usize;
        let mut tensors = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            let name = r.string("tensor name")?;
            let at = r.offset();
            let ndim = r.u8("rank")? as usize;
            let shape = (0..ndim)
                .map(|_| r.u32("extent").map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            if ndim == 0 || shape.contains(&0) {
                return Err(Error::Format {
                    offset: at,
                    message: format!("tensor '{name}' has invalid shape {shape:?}"),
                });
            }
            let data = r.f64s(shape.iter().product(), &format!("tensor '{name}'"))?;
            tensors.push((name, Tensor::new(&shape, data)?));
        }
        if r.remaining() != 0 {
            return r.fail(format!("{} trailing bytes after last tensor", r.remaining()));
        }
        Ok(ParamFile {
            config_hash,
            tensors,
        })
    }

    /// Copies the tensors into `net`, checking hash, names and shapes.
    pub fn load_into(&self, net: &mut Network) -> Result<()> {
        let want = network_hash(net);
        if self.config_hash != want {
            return Err(Error::config(format!(
                "parameter file was saved for config hash {:016x}, network has {want:016x}",
                self.config_hash
            )));
        }
        let store = net.store_mut();
        if self.tensors.len() != store.len() {
            return Err(Error::config(format!(
                "file holds {} tensors, network has {}",
                self.tensors.len(),
                store.len()
            )));
        }
        let ids: Vec<_> = store.ids().collect();
        for (id, (name, t)) in ids.into_iter().zip(&self.tensors) {
            if &store.get(id).name != name {
                return Err(Error::config(format!(
                    "expected tensor '{}', file has '{name}'",
                    store.get(id).name
                )));
            }
            store.set_value(id, t.clone())?;
        }
        Ok(())
    }
}

pub fn write_params(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, ParamFile::from_network(net).encode()?)?;
    Ok(())
}

pub fn read_params(path: impl AsRef<Path>) -> Result<ParamFile> {
    ParamFile::decode(&std::fs::read(path)?)
}
