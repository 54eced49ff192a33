//! On-disk cache of bootstrap null tables, one CSV (`b,value`) per key.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct Keyed<'a, T: Serialize> {
    version: u32,
    material: &'a T,
}

/// Hex SHA-256 of the canonical JSON of `material`.
pub fn cache_key<T: Serialize>(material: &T) -> Result<String> {
    let bytes = serde_json::to_vec(&Keyed { version: FORMAT_VERSION, material })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub struct BootstrapCache {
    dir: PathBuf,
}

impl BootstrapCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).with_context(|| format!("creating cache directory {}", dir.display()))?;
        Ok(BootstrapCache { dir })
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.csv"))
    }

    pub fn load(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let path = self.path(key);
        if !path.exists() {
            return Ok(None);
        }
        read_table(&path).map(Some)
    }

    pub fn store(&self, key: &str, values: &[f64]) -> Result<()> {
        let path = self.path(key);
        let tmp = path.with_extension("csv.tmp");
        {
            let mut w = csv::Writer::from_path(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
            w.write_record(["b", "value"])?;
            for (b, v) in values.iter().enumerate() {
                w.write_record([b.to_string(), v.to_string()])?;
            }
            w.flush()?;
        }
        std::fs::rename(&tmp, &path).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    /// Returns the cached table or computes and stores it.
    pub fn get_or_compute<F>(&self, key: &str, compute: F) -> Result<Vec<f64>>
    where
        F: FnOnce() -> Result<Vec<f64>>,
    {
        if let Some(v) = self.load(key)? {
            return Ok(v);
        }
        let v = compute()?;
        self.store(key, &v)?;
        Ok(v)
    }
}

fn read_table(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["b", "value"] {
        bail!("{}: expected header `b,value`", path.display());
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let b: usize = rec[0].parse().with_context(|| format!("{}: bad index on row {}", path.display(), i + 1))?;
        if b != i {
            bail!("{}: row {} has index {b}", path.display(), i + 1);
        }
        out.push(rec[1].parse().with_context(|| format!("{}: bad value on row {}", path.display(), i + 1))?);
    }
    Ok(out)
}
