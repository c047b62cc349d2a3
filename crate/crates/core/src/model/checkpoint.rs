//! Binary checkpoint of a trained GTN.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic       8 bytes   "GTNVF\0CK"
//! version     u32       1
//! meta        u64 len + UTF-8 JSON {config, n_symbols, k_num, target_scale}
//! n_tensors   u32
//! tensor      u32 name len, name bytes, u64 rows, u64 cols, rows*cols f64 row-major
//! scaler      u64 len + JSON standardizer or null
//! log         u64 len + JSON training log or null
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::gtn::{GtnConfig, GtnModel};
use super::params::ParamStore;
use super::train::TrainLog;
use crate::error::{Error, Result};
use crate::features::Standardizer;

pub const MAGIC: &[u8; 8] = b"GTNVF\0CK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: GtnModel,
    pub standardizer: Option<Standardizer>,
    pub log: Option<TrainLog>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    config: GtnConfig,
    n_symbols: usize,
    k_num: usize,
    target_scale: f64,
}

fn write_blob<W: Write>(w: &mut W, bytes: &[u8]) -> std::io::Result<()> {
    w.write_u64::<LE>(bytes.len() as u64)?;
    w.write_all(bytes)
}

fn read_blob<R: Read>(r: &mut R, limit: u64) -> Result<Vec<u8>> {
    let len = r.read_u64::<LE>().map_err(corrupt)?;
    if len > limit {
        return Err(Error::Data(format!("checkpoint section of {len} bytes is implausible")));
    }
    let mut buf = vec![0u8; len as usize];
    r.read_exact(&mut buf).map_err(corrupt)?;
    Ok(buf)
}

fn corrupt(e: std::io::Error) -> Error {
    Error::Data(format!("truncated or unreadable checkpoint: {e}"))
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Data(format!("bad checkpoint metadata: {e}"))
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let m = &self.model;
        w.write_all(MAGIC)?;
        w.write_u32::<LE>(VERSION)?;
        let meta = Meta {
            config: m.config.clone(),
            n_symbols: m.n_symbols,
            k_num: m.k_num,
            target_scale: m.target_scale,
        };
        write_blob(w, &serde_json::to_vec(&meta)?)?;
        w.write_u32::<LE>(m.params.len() as u32)?;
        for (name, t) in m.params.iter() {
            w.write_u32::<LE>(name.len() as u32)?;
            w.write_all(name.as_bytes())?;
            w.write_u64::<LE>(t.nrows() as u64)?;
            w.write_u64::<LE>(t.ncols() as u64)?;
            for &x in t.iter() {
                w.write_f64::<LE>(x)?;
            }
        }
        write_blob(w, &serde_json::to_vec(&self.standardizer)?)?;
        write_blob(w, &serde_json::to_vec(&self.log)?)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(corrupt)?;
        if &magic != MAGIC {
            return Err(Error::Data("not a checkpoint file".into()));
        }
        let version = r.read_u32::<LE>().map_err(corrupt)?;
        if version != VERSION {
            return Err(Error::Data(format!("unsupported checkpoint version {version}")));
        }
        let meta: Meta = serde_json::from_slice(&read_blob(r, 1 << 24)?).map_err(json_err)?;
        let n = r.read_u32::<LE>().map_err(corrupt)?;
        let mut params = ParamStore::default();
        for _ in 0..n {
            let len = r.read_u32::<LE>().map_err(corrupt)?;
            if len > 4096 {
                return Err(Error::Data("implausible tensor name".into()));
            }
            let mut name = vec![0u8; len as usize];
            r.read_exact(&mut name).map_err(corrupt)?;
            let name = String::from_utf8(name).map_err(|_| Error::Data("tensor name not UTF-8".into()))?;
            let rows = r.read_u64::<LE>().map_err(corrupt)? as usize;
            let cols = r.read_u64::<LE>().map_err(corrupt)? as usize;
            if rows.saturating_mul(cols) > 1 << 28 {
                return Err(Error::Data(format!("tensor {name} is implausibly large")));
            }
            let mut data = vec![0.0; rows * cols];
            r.read_f64_into::<LE>(&mut data).map_err(corrupt)?;
            let t = Array2::from_shape_vec((rows, cols), data).expect("shape matches length");
            params.push(name, t);
        }
        let standardizer = serde_json::from_slice(&read_blob(r, 1 << 26)?).map_err(json_err)?;
        let log = serde_json::from_slice(&read_blob(r, 1 << 30)?).map_err(json_err)?;
        let mut model = GtnModel::new(meta.config, meta.n_symbols, meta.k_num, meta.target_scale)
            .map_err(|e| Error::Data(format!("checkpoint config invalid: {e}")))?;
        if model.params.len() != params.len()
            || (0..params.len()).any(|i| {
                model.params.name(i) != params.name(i) || model.params.tensor(i).dim() != params.tensor(i).dim()
            })
        {
            return Err(Error::Data("checkpoint tensors do not match its config".into()));
        }
        model.params = params;
        Ok(Self {
            model,
            standardizer,
            log,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file))
    }
}
