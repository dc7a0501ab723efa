use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::prompt::Style;

pub const MANIFEST_FILE: &str = "manifest.json";

/// One recorded (patient, style) generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub patient_id: String,
    pub style_name: Style,
    pub prompt_hash: String,
    pub provider_id: String,
    pub created_at: u64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Manifest {
    entries: Vec<ReplayEntry>,
}

/// Directory of `<prompt_hash>.txt` raw outputs plus `manifest.json`
/// mapping (patient_id, style_name) to the prompt hash.
#[derive(Debug)]
pub struct ReplayStore {
    dir: PathBuf,
    entries: Mutex<BTreeMap<(String, Style), ReplayEntry>>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(tmp, path)
}

impl ReplayStore {
    /// Opens (or creates) a store rooted at `dir`.
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest: Manifest = if manifest_path.exists() {
            let raw = fs::read_to_string(&manifest_path)?;
            serde_json::from_str(&raw).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?
        } else {
            Manifest::default()
        };
        let entries = manifest
            .entries
            .into_iter()
            .map(|e| ((e.patient_id.clone(), e.style_name), e))
            .collect();
        Ok(Self {
            dir,
            entries: Mutex::new(entries),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn text_path(&self, prompt_hash: &str) -> PathBuf {
        self.dir.join(format!("{prompt_hash}.txt"))
    }

    pub fn get_text(&self, prompt_hash: &str) -> io::Result<Option<String>> {
        match fs::read_to_string(self.text_path(prompt_hash)) {
            Ok(t) => Ok(Some(t)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Any manifest entry recorded under `prompt_hash`.
    pub fn entry_for_hash(&self, prompt_hash: &str) -> Option<ReplayEntry> {
        let entries = self.entries.lock().expect("replay store lock");
        entries.values().find(|e| e.prompt_hash == prompt_hash).cloned()
    }

    pub fn entry(&self, patient_id: &str, style: Style) -> Option<ReplayEntry> {
        let entries = self.entries.lock().expect("replay store lock");
        entries.get(&(patient_id.to_string(), style)).cloned()
    }

    pub fn entries(&self) -> Vec<ReplayEntry> {
        self.entries.lock().expect("replay store lock").values().cloned().collect()
    }

    /// Records an accepted output and rewrites the manifest. Writes are
    /// serialized by the store's lock.
    pub fn put(&self, entry: ReplayEntry, text: &str) -> io::Result<()> {
        let mut entries = self.entries.lock().expect("replay store lock");
        write_atomic(&self.text_path(&entry.prompt_hash), text.as_bytes())?;
        entries.insert((entry.patient_id.clone(), entry.style_name), entry);
        let manifest = Manifest {
            entries: entries.values().cloned().collect(),
        };
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&self.dir.join(MANIFEST_FILE), json.as_bytes())
    }
}
