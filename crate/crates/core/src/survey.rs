//! Perception survey: blinded A/B stimulus pairs, three-way preferences and
//! per-role summaries.
//!
//! Participants never see frame rates. Each comparison gets an opaque pair
//! id, and the side (first/second) showing the higher frame rate is chosen
//! per session from the service seed. That side is written into every stored
//! response, so summaries map "first"/"second" back to higher/lower without
//! any other state.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("unknown pair {0:?}")]
    UnknownPair(String),
    #[error("invalid role {0:?} (expected surgeon, nurse or engineer)")]
    InvalidRole(String),
    #[error("invalid choice {0:?} (expected first, second or either)")]
    InvalidChoice(String),
    #[error("invalid session id {0:?} (1-64 characters from [A-Za-z0-9_-])")]
    InvalidSession(String),
    #[error("session {session:?} already answered pair {pair_id:?}")]
    Duplicate { session: String, pair_id: String },
    #[error("{path}: line {line}: {reason}")]
    CorruptLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("survey config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

type Result<T, E = SurveyError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SurveyError + '_ {
    move |source| SurveyError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Surgeon,
    Nurse,
    Engineer,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Surgeon, Role::Nurse, Role::Engineer];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Surgeon => "surgeon",
            Role::Nurse => "nurse",
            Role::Engineer => "engineer",
        }
    }
}

impl FromStr for Role {
    type Err = SurveyError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "surgeon" => Ok(Role::Surgeon),
            "nurse" => Ok(Role::Nurse),
            "engineer" => Ok(Role::Engineer),
            other => Err(SurveyError::InvalidRole(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    First,
    Second,
    Either,
}

impl FromStr for Choice {
    type Err = SurveyError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(Choice::First),
            "second" => Ok(Choice::Second),
            "either" => Ok(Choice::Either),
            other => Err(SurveyError::InvalidChoice(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    First,
    Second,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::First => Side::Second,
            Side::Second => Side::First,
        }
    }

    /// URL segment used for stimuli on this side.
    pub fn slug(self) -> &'static str {
        match self {
            Side::First => "a",
            Side::Second => "b",
        }
    }

    pub fn from_slug(s: &str) -> Option<Side> {
        match s {
            "a" => Some(Side::First),
            "b" => Some(Side::Second),
            _ => None,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

/// What a participant's choice means once presentation order is undone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preference {
    HigherFps,
    LowerFps,
    Either,
}

pub fn preference(choice: Choice, higher_side: Side) -> Preference {
    match choice {
        Choice::Either => Preference::Either,
        Choice::First if higher_side == Side::First => Preference::HigherFps,
        Choice::Second if higher_side == Side::Second => Preference::HigherFps,
        _ => Preference::LowerFps,
    }
}

// ---- configuration ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    /// Server-side label, e.g. "25v15". Never sent to participants.
    pub label: String,
    pub higher_fps: u32,
    pub lower_fps: u32,
    /// Directory of `NNNNN.png` overlay frames rendered at `higher_fps`.
    pub higher_stimulus: PathBuf,
    pub lower_stimulus: PathBuf,
}

fn default_interval() -> u32 {
    40
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyConfig {
    pub seed: u64,
    /// Append-only response file (one JSON record per line).
    pub store: PathBuf,
    /// Optional directory holding the participant web UI.
    #[serde(default)]
    pub ui_dir: Option<PathBuf>,
    /// Playback interval for stimulus frames.
    #[serde(default = "default_interval")]
    pub frame_interval_ms: u32,
    pub comparisons: Vec<ComparisonConfig>,
}

impl SurveyConfig {
    /// Reads a TOML config; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg: SurveyConfig = toml::from_str(&text)
            .map_err(|e| SurveyError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.store = base.join(&cfg.store);
        cfg.ui_dir = cfg.ui_dir.map(|d| base.join(d));
        for c in &mut cfg.comparisons {
            c.higher_stimulus = base.join(&c.higher_stimulus);
            c.lower_stimulus = base.join(&c.lower_stimulus);
        }
        Ok(cfg)
    }
}

/// A configured comparison with its opaque id and frame count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub pair_id: String,
    pub label: String,
    pub higher_fps: u32,
    pub lower_fps: u32,
    pub higher_dir: PathBuf,
    pub lower_dir: PathBuf,
    pub n_frames: usize,
}

/// `pair-a`, `pair-b`, ..., `pair-z`, `pair-ba`, ... (letters only, so ids
/// carry no numbers).
pub fn opaque_pair_id(index: usize) -> String {
    let mut letters = Vec::new();
    let mut n = index;
    loop {
        letters.push(b'a' + (n % 26) as u8);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    letters.reverse();
    format!("pair-{}", String::from_utf8(letters).expect("ascii"))
}

fn count_frames(dir: &Path) -> Result<usize> {
    let mut n = 0;
    while dir.join(format!("{n:05}.png")).is_file() {
        n += 1;
    }
    if n == 0 {
        return Err(SurveyError::Config(format!(
            "stimulus directory {} has no 00000.png",
            dir.display()
        )));
    }
    Ok(n)
}

pub fn build_comparisons(configs: &[ComparisonConfig]) -> Result<Vec<Comparison>> {
    if configs.is_empty() {
        return Err(SurveyError::Config("no comparisons configured".into()));
    }
    let mut labels = HashSet::new();
    configs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if !labels.insert(c.label.clone()) {
                return Err(SurveyError::Config(format!(
                    "duplicate comparison label {:?}",
                    c.label
                )));
            }
            if c.higher_fps <= c.lower_fps {
                return Err(SurveyError::Config(format!(
                    "comparison {:?}: higher_fps {} must exceed lower_fps {}",
                    c.label, c.higher_fps, c.lower_fps
                )));
            }
            let hi = count_frames(&c.higher_stimulus)?;
            let lo = count_frames(&c.lower_stimulus)?;
            if hi != lo {
                return Err(SurveyError::Config(format!(
                    "comparison {:?}: stimuli have {hi} and {lo} frames",
                    c.label
                )));
            }
            Ok(Comparison {
                pair_id: opaque_pair_id(i),
                label: c.label.clone(),
                higher_fps: c.higher_fps,
                lower_fps: c.lower_fps,
                higher_dir: c.higher_stimulus.clone(),
                lower_dir: c.lower_stimulus.clone(),
                n_frames: hi,
            })
        })
        .collect()
}

// ---- seeded ordering ----

fn digest(seed: u64, session: &str, pair_id: &str, purpose: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(purpose);
    h.update(seed.to_le_bytes());
    h.update((session.len() as u64).to_le_bytes());
    h.update(session.as_bytes());
    h.update(pair_id.as_bytes());
    h.finalize().into()
}

/// Side on which the higher-fps stimulus is presented to `session`.
pub fn higher_side(seed: u64, session: &str, pair_id: &str) -> Side {
    if digest(seed, session, pair_id, b"side")[0] & 1 == 0 {
        Side::First
    } else {
        Side::Second
    }
}

/// The order in which `session` sees the pairs: sorted by a seeded hash.
pub fn session_order<'a>(
    seed: u64,
    session: &str,
    pair_ids: impl IntoIterator<Item = &'a str>,
) -> Vec<&'a str> {
    let mut ids: Vec<(&str, [u8; 32])> = pair_ids
        .into_iter()
        .map(|p| (p, digest(seed, session, p, b"order")))
        .collect();
    ids.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));
    ids.into_iter().map(|(p, _)| p).collect()
}

pub fn validate_session(session: &str) -> Result<()> {
    let ok = (1..=64).contains(&session.len())
        && session
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
    if ok {
        Ok(())
    } else {
        Err(SurveyError::InvalidSession(session.to_owned()))
    }
}

// ---- wire payloads ----

/// A stimulus as participants see it: a URL prefix for `NNNNN.png` frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusRef {
    pub url: String,
    pub n_frames: usize,
}

/// The blinded pair payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairPayload {
    pub pair_id: String,
    pub first: StimulusRef,
    pub second: StimulusRef,
    pub frame_interval_ms: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub answered: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum NextPair {
    Pair {
        pair: PairPayload,
        progress: Progress,
    },
    Complete {
        progress: Progress,
    },
}

/// A response as submitted by a client; fields are validated server-side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseSubmission {
    pub pair_id: String,
    pub session: String,
    pub role: String,
    pub choice: String,
    /// Layout the UI used (e.g. "side-by-side" or "sequential"); informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<String>,
}

/// One line of the response store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub pair_id: String,
    pub label: String,
    pub session: String,
    pub role: Role,
    pub choice: Choice,
    pub higher_side: Side,
    pub timestamp_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub higher_fps: usize,
    pub lower_fps: usize,
    pub either: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.higher_fps + self.lower_fps + self.either
    }

    fn add(&mut self, p: Preference) {
        match p {
            Preference::HigherFps => self.higher_fps += 1,
            Preference::LowerFps => self.lower_fps += 1,
            Preference::Either => self.either += 1,
        }
    }
}

/// Counts per comparison label and role.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub comparisons: BTreeMap<String, BTreeMap<Role, Counts>>,
    pub total: usize,
}

/// Tallies records. Every label in `labels` appears with all roles, even at zero.
pub fn summarize<'a>(
    records: &[ResponseRecord],
    labels: impl IntoIterator<Item = &'a str>,
) -> Summary {
    let mut summary = Summary::default();
    let zero = || {
        Role::ALL
            .iter()
            .map(|&r| (r, Counts::default()))
            .collect::<BTreeMap<_, _>>()
    };
    for l in labels {
        summary.comparisons.insert(l.to_owned(), zero());
    }
    for r in records {
        summary
            .comparisons
            .entry(r.label.clone())
            .or_insert_with(zero)
            .entry(r.role)
            .or_default()
            .add(preference(r.choice, r.higher_side));
        summary.total += 1;
    }
    summary
}

/// Reads every record of a store file; a line that does not parse is an
/// error naming its 1-based line number. A missing file is an empty store.
pub fn load_records(path: &Path) -> Result<Vec<ResponseRecord>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| SurveyError::CorruptLine {
            path: path.to_owned(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn summarize_file<'a>(
    path: &Path,
    labels: impl IntoIterator<Item = &'a str>,
) -> Result<Summary> {
    Ok(summarize(&load_records(path)?, labels))
}

/// Append-only, line-delimited JSON store. Each append is flushed and synced
/// before it returns.
#[derive(Debug)]
pub struct ResponseStore {
    path: PathBuf,
    file: File,
}

impl ResponseStore {
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        Ok(Self {
            path: path.to_owned(),
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &ResponseRecord) -> Result<()> {
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .map_err(io_err(&self.path))?;
        self.file.flush().map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))
    }
}

/// Survey state: comparisons, recorded responses and the store they persist to.
#[derive(Debug)]
pub struct SurveyEngine {
    seed: u64,
    frame_interval_ms: u32,
    comparisons: Vec<Comparison>,
    records: Vec<ResponseRecord>,
    answered: HashSet<(String, String)>,
    store: ResponseStore,
}

impl SurveyEngine {
    /// Opens the store, replaying any responses already in it.
    pub fn new(
        seed: u64,
        frame_interval_ms: u32,
        comparisons: Vec<Comparison>,
        store_path: &Path,
    ) -> Result<Self> {
        let records = load_records(store_path)?;
        let answered = records
            .iter()
            .map(|r| (r.session.clone(), r.pair_id.clone()))
            .collect();
        let store = ResponseStore::open(store_path)?;
        Ok(Self {
            seed,
            frame_interval_ms,
            comparisons,
            records,
            answered,
            store,
        })
    }

    pub fn from_config(cfg: &SurveyConfig) -> Result<Self> {
        let comparisons = build_comparisons(&cfg.comparisons)?;
        Self::new(cfg.seed, cfg.frame_interval_ms, comparisons, &cfg.store)
    }

    pub fn comparisons(&self) -> &[Comparison] {
        &self.comparisons
    }

    pub fn records(&self) -> &[ResponseRecord] {
        &self.records
    }

    pub fn comparison(&self, pair_id: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.pair_id == pair_id)
    }

    pub fn higher_side(&self, session: &str, pair_id: &str) -> Side {
        higher_side(self.seed, session, pair_id)
    }

    fn progress(&self, session: &str) -> Progress {
        let answered = self
            .comparisons
            .iter()
            .filter(|c| {
                self.answered
                    .contains(&(session.to_owned(), c.pair_id.clone()))
            })
            .count();
        Progress {
            answered,
            total: self.comparisons.len(),
        }
    }

    /// The first pair in this session's order that it has not answered yet.
    pub fn next_pair(&self, session: &str) -> Result<NextPair> {
        validate_session(session)?;
        let progress = self.progress(session);
        let order = session_order(
            self.seed,
            session,
            self.comparisons.iter().map(|c| c.pair_id.as_str()),
        );
        let next = order.into_iter().find(|p| {
            !self
                .answered
                .contains(&(session.to_owned(), (*p).to_owned()))
        });
        let Some(pair_id) = next else {
            return Ok(NextPair::Complete { progress });
        };
        let c = self.comparison(pair_id).expect("pair from comparisons");
        let stim = |side: Side| StimulusRef {
            url: format!("/stimuli/{session}/{pair_id}/{}/", side.slug()),
            n_frames: c.n_frames,
        };
        Ok(NextPair::Pair {
            pair: PairPayload {
                pair_id: pair_id.to_owned(),
                first: stim(Side::First),
                second: stim(Side::Second),
                frame_interval_ms: self.frame_interval_ms,
            },
            progress,
        })
    }

    /// Directory backing `/stimuli/<session>/<pair>/<side>/`.
    pub fn stimulus_dir(&self, session: &str, pair_id: &str, side: Side) -> Option<&Path> {
        validate_session(session).ok()?;
        let c = self.comparison(pair_id)?;
        if self.higher_side(session, pair_id) == side {
            Some(&c.higher_dir)
        } else {
            Some(&c.lower_dir)
        }
    }

    /// Validates and durably appends a response; the in-memory state only
    /// changes after the store write succeeds.
    pub fn record_response(
        &mut self,
        sub: &ResponseSubmission,
        timestamp_ms: u64,
    ) -> Result<ResponseRecord> {
        validate_session(&sub.session)?;
        let label = self
            .comparison(&sub.pair_id)
            .ok_or_else(|| SurveyError::UnknownPair(sub.pair_id.clone()))?
            .label
            .clone();
        let role: Role = sub.role.parse()?;
        let choice: Choice = sub.choice.parse()?;
        let key = (sub.session.clone(), sub.pair_id.clone());
        if self.answered.contains(&key) {
            return Err(SurveyError::Duplicate {
                session: sub.session.clone(),
                pair_id: sub.pair_id.clone(),
            });
        }
        let record = ResponseRecord {
            pair_id: sub.pair_id.clone(),
            label,
            session: sub.session.clone(),
            role,
            choice,
            higher_side: self.higher_side(&sub.session, &sub.pair_id),
            timestamp_ms,
            layout: sub.layout.clone(),
        };
        self.store.append(&record)?;
        self.answered.insert(key);
        self.records.push(record.clone());
        Ok(record)
    }

    pub fn summary(&self) -> Summary {
        summarize(
            &self.records,
            self.comparisons.iter().map(|c| c.label.as_str()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stimuli(dir: &Path, name: &str, n: usize) -> PathBuf {
        let d = dir.join(name);
        fs::create_dir_all(&d).unwrap();
        for i in 0..n {
            fs::write(d.join(format!("{i:05}.png")), b"png").unwrap();
        }
        d
    }

    fn engine(dir: &Path, labels: &[(&str, u32, u32)]) -> SurveyEngine {
        let configs: Vec<ComparisonConfig> = labels
            .iter()
            .map(|&(l, hi, lo)| ComparisonConfig {
                label: l.into(),
                higher_fps: hi,
                lower_fps: lo,
                higher_stimulus: stimuli(dir, &format!("{l}-hi"), 3),
                lower_stimulus: stimuli(dir, &format!("{l}-lo"), 3),
            })
            .collect();
        SurveyEngine::new(
            11,
            40,
            build_comparisons(&configs).unwrap(),
            &dir.join("store.jsonl"),
        )
        .unwrap()
    }

    fn submit(pair: &str, session: &str, role: &str, choice: &str) -> ResponseSubmission {
        ResponseSubmission {
            pair_id: pair.into(),
            session: session.into(),
            role: role.into(),
            choice: choice.into(),
            layout: None,
        }
    }

    #[test]
    fn opaque_ids_are_letters() {
        assert_eq!(opaque_pair_id(0), "pair-a");
        assert_eq!(opaque_pair_id(25), "pair-z");
        assert_eq!(opaque_pair_id(26), "pair-ba");
        assert!((0..1000)
            .map(opaque_pair_id)
            .all(|p| !p.bytes().any(|b| b.is_ascii_digit())));
    }

    #[test]
    fn preference_mapping() {
        assert_eq!(
            preference(Choice::First, Side::First),
            Preference::HigherFps
        );
        assert_eq!(
            preference(Choice::First, Side::Second),
            Preference::LowerFps
        );
        assert_eq!(
            preference(Choice::Second, Side::Second),
            Preference::HigherFps
        );
        assert_eq!(
            preference(Choice::Second, Side::First),
            Preference::LowerFps
        );
        assert_eq!(preference(Choice::Either, Side::First), Preference::Either);
    }

    #[test]
    fn session_walks_all_pairs_then_completes() {
        let dir = tempfile::tempdir().unwrap();
        let mut e = engine(
            dir.path(),
            &[("25v22", 25, 22), ("25v20", 25, 20), ("25v15", 25, 15)],
        );
        let mut seen = HashSet::new();
        for _ in 0..3 {
            let NextPair::Pair { pair, .. } = e.next_pair("s1").unwrap() else {
                panic!("expected a pair");
            };
            assert!(seen.insert(pair.pair_id.clone()));
            e.record_response(&submit(&pair.pair_id, "s1", "nurse", "first"), 0)
                .unwrap();
        }
        assert!(matches!(
            e.next_pair("s1").unwrap(),
            NextPair::Complete {
                progress: Progress {
                    answered: 3,
                    total: 3
                }
            }
        ));
    }

    #[test]
    fn validation_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let mut e = engine(dir.path(), &[("25v15", 25, 15)]);
        assert!(matches!(
            e.record_response(&submit("pair-a", "s", "nurse", "maybe"), 0),
            Err(SurveyError::InvalidChoice(_))
        ));
        assert!(matches!(
            e.record_response(&submit("pair-a", "s", "janitor", "first"), 0),
            Err(SurveyError::InvalidRole(_))
        ));
        assert!(matches!(
            e.record_response(&submit("pair-q", "s", "nurse", "first"), 0),
            Err(SurveyError::UnknownPair(_))
        ));
        assert!(matches!(
            e.record_response(&submit("pair-a", "bad session!", "nurse", "first"), 0),
            Err(SurveyError::InvalidSession(_))
        ));
        e.record_response(&submit("pair-a", "s", "nurse", "first"), 0)
            .unwrap();
        let lines = fs::read_to_string(dir.path().join("store.jsonl")).unwrap();
        assert_eq!(lines.lines().count(), 1);
        assert!(matches!(
            e.record_response(&submit("pair-a", "s", "nurse", "second"), 0),
            Err(SurveyError::Duplicate { .. })
        ));
        assert_eq!(e.records().len(), 1);
    }

    #[test]
    fn restart_replays_store() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut e = engine(dir.path(), &[("25v15", 25, 15)]);
            e.record_response(&submit("pair-a", "s", "engineer", "either"), 5)
                .unwrap();
        }
        let mut e = engine(dir.path(), &[("25v15", 25, 15)]);
        assert_eq!(e.summary().total, 1);
        assert!(matches!(
            e.record_response(&submit("pair-a", "s", "engineer", "first"), 6),
            Err(SurveyError::Duplicate { .. })
        ));
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[], ["25v15"]);
        assert_eq!(s.total, 0);
        assert!(s.comparisons["25v15"]
            .values()
            .all(|c| *c == Counts::default()));

        let rec = |choice, side| ResponseRecord {
            pair_id: "pair-a".into(),
            label: "25v15".into(),
            session: "s".into(),
            role: Role::Surgeon,
            choice,
            higher_side: side,
            timestamp_ms: 0,
            layout: None,
        };
        let s = summarize(
            &[
                rec(Choice::First, Side::First),
                rec(Choice::Second, Side::Second),
                rec(Choice::Either, Side::First),
            ],
            ["25v15"],
        );
        assert_eq!(
            s.comparisons["25v15"][&Role::Surgeon],
            Counts {
                higher_fps: 2,
                lower_fps: 0,
                either: 1
            }
        );
        assert_eq!(s.total, 3);
    }

    #[test]
    fn corrupt_line_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("store.jsonl");
        let good = serde_json::to_string(&ResponseRecord {
            pair_id: "pair-a".into(),
            label: "x".into(),
            session: "s".into(),
            role: Role::Nurse,
            choice: Choice::First,
            higher_side: Side::First,
            timestamp_ms: 1,
            layout: None,
        })
        .unwrap();
        fs::write(&p, format!("{good}\n{{oops\n")).unwrap();
        match load_records(&p) {
            Err(SurveyError::CorruptLine { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(load_records(&dir.path().join("absent.jsonl"))
            .unwrap()
            .is_empty());
    }

    #[test]
    fn side_and_order_depend_only_on_inputs() {
        let ids = ["pair-a", "pair-b", "pair-c", "pair-d"];
        assert_eq!(session_order(3, "x", ids), session_order(3, "x", ids));
        let sides: Vec<Side> = (0..64)
            .map(|i| higher_side(3, &format!("s{i}"), "pair-a"))
            .collect();
        assert!(sides.contains(&Side::First) && sides.contains(&Side::Second));
    }

    #[test]
    fn config_rejects_bad_comparisons() {
        let dir = tempfile::tempdir().unwrap();
        let d = stimuli(dir.path(), "a", 2);
        let short = stimuli(dir.path(), "b", 1);
        let cfg = |hi, lo, l: &Path| ComparisonConfig {
            label: "x".into(),
            higher_fps: hi,
            lower_fps: lo,
            higher_stimulus: d.clone(),
            lower_stimulus: l.to_owned(),
        };
        assert!(build_comparisons(&[]).is_err());
        assert!(build_comparisons(&[cfg(15, 25, &d)]).is_err());
        assert!(build_comparisons(&[cfg(25, 15, &short)]).is_err());
        assert!(build_comparisons(&[cfg(25, 15, &d), cfg(25, 10, &d)]).is_err());
        assert!(build_comparisons(&[cfg(25, 15, &dir.path().join("none"))]).is_err());
    }

    #[test]
    fn config_loads_toml_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("survey.toml");
        fs::write(
            &p,
            r#"
seed = 7
store = "responses.jsonl"

[[comparisons]]
label = "25v15"
higher_fps = 25
lower_fps = 15
higher_stimulus = "overlays/25"
lower_stimulus = "overlays/15"
"#,
        )
        .unwrap();
        let cfg = SurveyConfig::load(&p).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.frame_interval_ms, 40);
        assert_eq!(cfg.store, dir.path().join("responses.jsonl"));
        assert_eq!(
            cfg.comparisons[0].lower_stimulus,
            dir.path().join("overlays/15")
        );
    }
}
