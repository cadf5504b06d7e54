//! Binary checkpoint container shared by score models and dequantization flows.
//!
//! Layout: a magic line, one line of JSON metadata, then the parameters as
//! little-endian `f64`s.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8] = b"SCOREFLOW-CKPT 1\n";

/// Tagged parameter vector with a free-form JSON header.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub tag: String,
    pub header: serde_json::Value,
    pub params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    tag: String,
    header: serde_json::Value,
    n_params: usize,
}

pub fn write_container(path: &Path, c: &Container) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    let meta = Meta {
        tag: c.tag.clone(),
        header: c.header.clone(),
        n_params: c.params.len(),
    };
    let line = serde_json::to_string(&meta).map_err(|e| Error::Serde(e.to_string()))?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    for p in &c.params {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_container(path: &Path) -> Result<Container> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut magic = vec![0u8; MAGIC.len()];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::CheckpointMismatch(format!("{} is not a checkpoint file", path.display())));
    }
    let mut line = String::new();
    r.read_line(&mut line)?;
    let meta: Meta = serde_json::from_str(line.trim_end()).map_err(|e| Error::Serde(e.to_string()))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * meta.n_params {
        return Err(Error::CheckpointMismatch(format!(
            "expected {} parameters, file holds {} bytes",
            meta.n_params,
            bytes.len()
        )));
    }
    let params = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok(Container {
        tag: meta.tag,
        header: meta.header,
        params,
    })
}
