use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::{export, import, Clock, ExportFormat, LogSink, MatchState, MatchStore, MutationRecord, StoreError, Vocabulary};

const BASE_FILE: &str = "base.jsonl";
const LOG_FILE: &str = "log.jsonl";

/// Appends records to a log file, one JSON object per line, syncing each.
pub struct FileSink {
    file: File,
}

impl FileSink {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file })
    }
}

impl LogSink for FileSink {
    fn append(&mut self, rec: &MutationRecord) -> std::io::Result<()> {
        let mut line = serde_json::to_vec(rec).map_err(std::io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }
}

/// Parses a newline-delimited mutation log.
pub fn read_log<R: BufRead>(reader: R) -> Result<Vec<MutationRecord>, StoreError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: MutationRecord = serde_json::from_str(&line).map_err(|e| StoreError::CorruptLog {
            seq: i as u64 + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// One directory per match holding `base.jsonl` (an anchors export of the
/// detected state) and `log.jsonl` (the mutation log).
#[derive(Debug, Clone)]
pub struct Repository {
    root: PathBuf,
}

impl Repository {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, match_id: &str) -> PathBuf {
        self.root.join(match_id)
    }

    pub fn exists(&self, match_id: &str) -> bool {
        self.dir(match_id).join(BASE_FILE).is_file()
    }

    pub fn match_ids(&self) -> Result<Vec<String>, StoreError> {
        if !self.root.is_dir() {
            return Ok(Vec::new());
        }
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if entry.path().join(BASE_FILE).is_file() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Writes the base state of a new match. Returns `false` without touching
    /// anything if the match already exists.
    pub fn create(&self, base: &MatchState) -> Result<bool, StoreError> {
        let id = &base.info.match_id;
        if self.exists(id) {
            return Ok(false);
        }
        let dir = self.dir(id);
        fs::create_dir_all(&dir)?;
        let mut bytes = export(base, ExportFormat::Anchors);
        // annotation lines without their repeated header
        let notes = export(base, ExportFormat::Annotations);
        let header_len = notes.iter().position(|&b| b == b'\n').map_or(notes.len(), |i| i + 1);
        bytes.extend_from_slice(&notes[header_len..]);
        let tmp = dir.join(format!("{BASE_FILE}.tmp"));
        fs::write(&tmp, bytes)?;
        File::create(dir.join(LOG_FILE))?;
        fs::rename(tmp, dir.join(BASE_FILE))?;
        Ok(true)
    }

    pub fn load_base(&self, match_id: &str) -> Result<MatchState, StoreError> {
        let path = self.dir(match_id).join(BASE_FILE);
        let bytes = fs::read(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => StoreError::MatchNotFound(match_id.to_string()),
            _ => e.into(),
        })?;
        import(&bytes)
    }

    pub fn load_log(&self, match_id: &str) -> Result<Vec<MutationRecord>, StoreError> {
        match File::open(self.dir(match_id).join(LOG_FILE)) {
            Ok(f) => read_log(BufReader::new(f)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(e.into()),
        }
    }

    /// Opens a match for writing; accepted mutations are appended to its log.
    pub fn open(&self, match_id: &str, vocab: Arc<Vocabulary>, clock: Arc<dyn Clock>) -> Result<MatchStore, StoreError> {
        let base = self.load_base(match_id)?;
        let log = self.load_log(match_id)?;
        let sink = FileSink::open(&self.dir(match_id).join(LOG_FILE))?;
        Ok(MatchStore::open(base, vocab, log, clock)?.with_sink(Box::new(sink)))
    }
}
