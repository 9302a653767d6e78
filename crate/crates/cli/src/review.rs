//! Review queue and the append-only verdict journal.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use visionseg_core::SystemRegion;

pub const QUEUE_FILE: &str = "queue.json";
pub const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pending,
    Accepted,
    Rejected,
}

impl Verdict {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pending" => Some(Self::Pending),
            "accepted" => Some(Self::Accepted),
            "rejected" => Some(Self::Rejected),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub item_id: String,
    pub page_id: String,
    /// Preview image, relative to the queue directory.
    pub image: String,
    /// Page image path as given to `segment`.
    pub source_page: String,
    pub region: SystemRegion,
    pub verdict: Verdict,
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub timestamp: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewQueue {
    pub items: Vec<ReviewItem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub item_id: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub note: Option<String>,
    pub timestamp: String,
}

/// Paths inside a segment output directory.
#[derive(Clone, Debug)]
pub struct QueueLayout {
    pub root: PathBuf,
}

impl QueueLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn segmentation(&self, page_id: &str) -> PathBuf {
        self.root
            .join("segmentations")
            .join(format!("{page_id}.json"))
    }

    pub fn preview_rel(page_id: &str, order: usize) -> String {
        format!("previews/{page_id}_{order:02}.png")
    }

    pub fn queue(&self) -> PathBuf {
        self.root.join(QUEUE_FILE)
    }

    pub fn journal(&self) -> PathBuf {
        self.root.join(JOURNAL_FILE)
    }

    pub fn read_queue(&self) -> Result<ReviewQueue> {
        let path = self.queue();
        let bytes = fs::read(&path)
            .with_context(|| format!("cannot read review queue {}", path.display()))?;
        serde_json::from_slice(&bytes)
            .with_context(|| format!("malformed review queue {}", path.display()))
    }

    /// Queue items with the verdicts replayed from the journal.
    pub fn load_items(&self) -> Result<Vec<ReviewItem>> {
        let mut items = self.read_queue()?.items;
        let index: HashMap<String, usize> = items
            .iter()
            .enumerate()
            .map(|(k, it)| (it.item_id.clone(), k))
            .collect();
        for entry in read_journal(&self.journal())? {
            if let Some(&k) = index.get(&entry.item_id) {
                apply(&mut items[k], &entry);
            }
        }
        Ok(items)
    }
}

pub fn apply(item: &mut ReviewItem, entry: &JournalEntry) {
    item.verdict = entry.verdict;
    item.note = entry.note.clone();
    item.timestamp = Some(entry.timestamp.clone());
}

/// All complete journal lines; a torn final line from an interrupted write
/// is ignored. A missing journal is empty.
pub fn read_journal(path: &Path) -> Result<Vec<JournalEntry>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e).with_context(|| format!("cannot open journal {}", path.display())),
    };
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<std::io::Result<_>>()
        .with_context(|| format!("cannot read journal {}", path.display()))?;
    let mut entries = Vec::with_capacity(lines.len());
    for (k, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(e) => entries.push(e),
            Err(_) if k + 1 == lines.len() => break,
            Err(e) => {
                return Err(e)
                    .with_context(|| format!("journal {} line {}", path.display(), k + 1));
            }
        }
    }
    Ok(entries)
}

/// Append-only journal writer.
#[derive(Debug)]
pub struct Journal {
    file: File,
}

impl Journal {
    /// Opens for appending. A torn final line left by an interrupted write
    /// is cut off so the next entry starts on a line of its own.
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(path)
            .with_context(|| format!("cannot open journal {}", path.display()))?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;
        if bytes.last().is_some_and(|&b| b != b'\n') {
            let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |k| k + 1);
            file.set_len(keep as u64)?;
        }
        Ok(Self { file })
    }

    /// Writes one line and syncs it to disk.
    pub fn append(&mut self, entry: &JournalEntry) -> Result<()> {
        let mut line = serde_json::to_vec(entry)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
