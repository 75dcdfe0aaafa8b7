use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{HarnessError, PredictionRecord};

/// Append-only NDJSON file of prediction records.
pub struct PredictionStore {
    path: PathBuf,
    file: Mutex<File>,
}

impl PredictionStore {
    pub fn open(path: &Path) -> Result<Self, HarnessError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|source| HarnessError::Write { path: dir.to_path_buf(), source })?;
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|source| HarnessError::Write { path: path.to_path_buf(), source })?;
        Ok(Self { path: path.to_path_buf(), file: Mutex::new(file) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, record: &PredictionRecord) -> Result<(), HarnessError> {
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        let mut f = self.file.lock().expect("store lock");
        f.write_all(line.as_bytes()).and_then(|_| f.flush()).map_err(|source| HarnessError::Write { path: self.path.clone(), source })
    }
}

/// Every record in file order. A missing file is an empty store; a torn
/// final line (interrupted write) is skipped.
pub fn load_records(path: &Path) -> Result<Vec<PredictionRecord>, HarnessError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(HarnessError::Store { path: path.to_path_buf(), message: e.to_string() }),
    };
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>().map_err(|e| HarnessError::Store { path: path.to_path_buf(), message: e.to_string() })?;
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut out = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if Some(i) == last => log::warn!("{}: ignoring truncated final line", path.display()),
            Err(e) => return Err(HarnessError::Store { path: path.to_path_buf(), message: format!("line {}: {e}", i + 1) }),
        }
    }
    Ok(out)
}

/// The last record per image for `config_hash` (all hashes when `None`).
pub fn latest_records(records: Vec<PredictionRecord>, config_hash: Option<&str>) -> HashMap<String, PredictionRecord> {
    let mut out = HashMap::new();
    for r in records {
        if config_hash.is_none_or(|h| h == r.config_hash) {
            out.insert(r.image_id.clone(), r);
        }
    }
    out
}
