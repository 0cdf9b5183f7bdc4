//! Directory-backed persistence: `datasets/` holds content-addressed blobs
//! with one JSON sidecar per handle, `jobs/` one sidecar per job plus its
//! artifacts, `grids/` derived rasters.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Dem,
    Soil,
    Boundary,
    Yield,
}

impl DatasetKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dem" => Some(Self::Dem),
            "soil" => Some(Self::Soil),
            "boundary" => Some(Self::Boundary),
            "yield" => Some(Self::Yield),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Dem => "dem",
            Self::Soil => "soil",
            Self::Boundary => "boundary",
            Self::Yield => "yield",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHandle {
    pub id: String,
    pub kind: DatasetKind,
    pub name: String,
    pub byte_digest: String,
    pub size_bytes: usize,
    pub summary: Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary file so readers never see partial content.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension(format!("tmp-{}", uuid::Uuid::new_v4().simple()));
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

fn read_sidecars<T: for<'de> Deserialize<'de>>(dir: &Path) -> io::Result<Vec<T>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") && !path.to_string_lossy().ends_with(".report.json") {
            match serde_json::from_slice(&fs::read(&path)?) {
                Ok(v) => out.push(v),
                Err(e) => tracing::warn!("skipping unreadable sidecar {}: {e}", path.display()),
            }
        }
    }
    Ok(out)
}

#[derive(Debug)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> io::Result<Self> {
        let layout = Self { root: root.into() };
        for dir in [layout.datasets(), layout.blobs(), layout.jobs(), layout.grids()] {
            fs::create_dir_all(dir)?;
        }
        Ok(layout)
    }

    pub fn datasets(&self) -> PathBuf {
        self.root.join("datasets")
    }

    pub fn blobs(&self) -> PathBuf {
        self.datasets().join("blobs")
    }

    pub fn jobs(&self) -> PathBuf {
        self.root.join("jobs")
    }

    pub fn grids(&self) -> PathBuf {
        self.root.join("grids")
    }

    pub fn job_artifact(&self, id: &str, suffix: &str) -> PathBuf {
        self.jobs().join(format!("{id}.{suffix}"))
    }
}

/// Append-only dataset registry.
#[derive(Debug)]
pub struct DatasetStore {
    layout: std::sync::Arc<Layout>,
    index: RwLock<HashMap<String, DatasetHandle>>,
}

impl DatasetStore {
    pub fn open(layout: std::sync::Arc<Layout>) -> io::Result<Self> {
        let handles: Vec<DatasetHandle> = read_sidecars(&layout.datasets())?;
        let index = handles.into_iter().map(|h| (h.id.clone(), h)).collect();
        Ok(Self {
            layout,
            index: RwLock::new(index),
        })
    }

    pub fn insert(&self, kind: DatasetKind, name: String, bytes: &[u8], summary: Value) -> io::Result<DatasetHandle> {
        let digest = sha256_hex(bytes);
        let blob = self.layout.blobs().join(&digest);
        if !blob.exists() {
            write_atomic(&blob, bytes)?;
        }
        let handle = DatasetHandle {
            id: uuid::Uuid::new_v4().simple().to_string(),
            kind,
            name,
            byte_digest: digest,
            size_bytes: bytes.len(),
            summary,
        };
        let sidecar = serde_json::to_vec_pretty(&handle).expect("handle serializes");
        write_atomic(&self.layout.datasets().join(format!("{}.json", handle.id)), &sidecar)?;
        self.index.write().expect("dataset index").insert(handle.id.clone(), handle.clone());
        Ok(handle)
    }

    pub fn get(&self, id: &str) -> Option<DatasetHandle> {
        self.index.read().expect("dataset index").get(id).cloned()
    }

    pub fn bytes(&self, handle: &DatasetHandle) -> io::Result<Vec<u8>> {
        let bytes = fs::read(self.layout.blobs().join(&handle.byte_digest))?;
        if sha256_hex(&bytes) != handle.byte_digest {
            return Err(io::Error::new(io::ErrorKind::InvalidData, format!("blob for dataset {} is corrupt", handle.id)));
        }
        Ok(bytes)
    }

    pub fn list(&self) -> Vec<DatasetHandle> {
        let mut all: Vec<_> = self.index.read().expect("dataset index").values().cloned().collect();
        all.sort_by(|a, b| a.id.cmp(&b.id));
        all
    }
}

pub(crate) fn load_job_sidecars<T: for<'de> Deserialize<'de>>(layout: &Layout) -> io::Result<Vec<T>> {
    read_sidecars(&layout.jobs())
}
