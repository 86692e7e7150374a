//! Importers: the canonical format, and delimited text files mapped through
//! a filename pattern plus column indices.

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use super::{format, DataError, Dataset, Provenance, SampleKey};
use crate::signal::{Point, SampleSource, StrokeSample};
use crate::util::{natural_cmp, sha256_hex};

/// How stroke boundaries are recovered from a flat list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StrokeRule {
    /// The whole file is one stroke.
    Single,
    /// A new stroke starts whenever the value in `column` changes.
    StrokeId { column: usize },
    /// Rows whose `column` equals `up_value` are pen-up events: they close
    /// the current stroke and carry no ink.
    PenUp { column: usize, up_value: f64 },
    /// A new stroke starts after a timestamp gap larger than `gap_ms`.
    TimeGap { gap_ms: f64 },
}

/// Manual mapping for delimited text files, one sample per file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelimitedSpec {
    /// Field separator; `None` splits on runs of whitespace.
    pub delimiter: Option<char>,
    /// Lines skipped at the top of every file.
    #[serde(default)]
    pub skip_lines: usize,
    #[serde(default)]
    pub comment_prefix: Option<String>,
    pub x_column: usize,
    pub y_column: usize,
    pub t_column: usize,
    /// Multiplier bringing the time column to milliseconds.
    #[serde(default = "unit")]
    pub time_scale: f64,
    pub stroke: StrokeRule,
    /// Regex over the path relative to the import root (with `/`
    /// separators). Named groups: `user` and `label` (required), `session`
    /// and `repetition` (optional).
    pub path_pattern: String,
    /// When the pattern has no `session` group: repetitions per session,
    /// so that session = (repetition - 1) / n + 1.
    #[serde(default)]
    pub repetitions_per_session: Option<u32>,
    #[serde(default)]
    pub label_map: BTreeMap<String, String>,
    /// Presets that were never checked against the real files say so.
    #[serde(default = "yes")]
    pub verified: bool,
}

fn unit() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FormatSpec {
    Canonical,
    Delimited(DelimitedSpec),
}

impl FormatSpec {
    /// Mapping guess for the e-BioDigit release (8 repetitions per digit
    /// over 2 sessions). Verify on first import.
    pub fn ebiodigit() -> Self {
        FormatSpec::Delimited(DelimitedSpec {
            delimiter: None,
            skip_lines: 1,
            comment_prefix: Some("#".into()),
            x_column: 0,
            y_column: 1,
            t_column: 2,
            time_scale: 1.0,
            stroke: StrokeRule::TimeGap { gap_ms: 50.0 },
            path_pattern: r"(?i)u(?P<user>\d+)_(?:digit_)?(?P<label>\d)_(?P<repetition>\d+)\.txt$"
                .into(),
            repetitions_per_session: Some(4),
            label_map: BTreeMap::new(),
            verified: false,
        })
    }

    /// Mapping guess for the MobileTouch release (per-user, per-session
    /// folders). Verify on first import.
    pub fn mobiletouch() -> Self {
        FormatSpec::Delimited(DelimitedSpec {
            delimiter: Some(','),
            skip_lines: 1,
            comment_prefix: None,
            x_column: 0,
            y_column: 1,
            t_column: 2,
            time_scale: 1.0,
            stroke: StrokeRule::TimeGap { gap_ms: 50.0 },
            path_pattern: r"(?i)(?P<user>[^/]+)/session_?(?P<session>\d+)/(?:.*/)?(?P<label>[a-z0-9])_(?P<repetition>\d+)\.(?:csv|txt)$".into(),
            repetitions_per_session: None,
            label_map: BTreeMap::new(),
            verified: false,
        })
    }

    /// `canonical`, `ebiodigit`, `mobiletouch`, or a path to a JSON file
    /// holding a `FormatSpec`.
    pub fn resolve(name: &str) -> Result<Self, DataError> {
        match name {
            "canonical" => Ok(FormatSpec::Canonical),
            "ebiodigit" => Ok(FormatSpec::ebiodigit()),
            "mobiletouch" => Ok(FormatSpec::mobiletouch()),
            other => {
                let path = Path::new(other);
                let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
                    path: other.into(),
                    source,
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| DataError::Schema(format!("format spec {other}: {e}")))
            }
        }
    }

    fn name(&self) -> &'static str {
        match self {
            FormatSpec::Canonical => "canonical",
            FormatSpec::Delimited(_) => "delimited",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quarantined {
    /// File (and line for the canonical format) the sample came from.
    pub source: String,
    /// Short reason class, e.g. "timestamp disorder".
    pub reason: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ImportSummary {
    pub files_scanned: usize,
    pub files_skipped: usize,
    pub parsed: usize,
    pub imported: usize,
    pub quarantined: Vec<Quarantined>,
    /// Pen-up rows that carry no ink.
    pub rows_without_ink: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct ImportReport {
    pub dataset: Dataset,
    pub summary: ImportSummary,
    pub inputs: Vec<InputDigest>,
}

fn classify(detail: &str) -> &'static str {
    if detail.contains("timestamp disorder") {
        "timestamp disorder"
    } else if detail.contains("zero time span") {
        "degenerate stroke"
    } else if detail.contains("need at least") {
        "too few points"
    } else if detail.contains("non-finite") {
        "non-finite value"
    } else if detail.contains("session") {
        "bad session"
    } else {
        "parse error"
    }
}

fn quarantine(source: String, detail: String) -> Quarantined {
    Quarantined {
        source,
        reason: classify(&detail).into(),
        detail,
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn list_files(root: &Path) -> Result<Vec<PathBuf>, DataError> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).follow_links(true) {
        let entry = entry.map_err(|e| DataError::Io {
            path: e
                .path()
                .map_or_else(|| root.display().to_string(), |p| p.display().to_string()),
            source: e
                .into_io_error()
                .unwrap_or_else(|| std::io::Error::other("walk error")),
        })?;
        if entry.file_type().is_file() {
            files.push(entry.into_path());
        }
    }
    files.sort_by(|a, b| natural_cmp(&a.to_string_lossy(), &b.to_string_lossy()));
    Ok(files)
}

fn relative(root: &Path, p: &Path) -> String {
    p.strip_prefix(root)
        .unwrap_or(p)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Reads files under `path` (a file or directory) according to `spec`.
/// Invalid samples are quarantined with a reason; nothing is dropped
/// silently, and `imported + quarantined == parsed`.
pub fn import_dataset(path: &Path, spec: &FormatSpec) -> Result<ImportReport, DataError> {
    let meta = std::fs::metadata(path).map_err(io_err(path))?;
    let (root, files) = if meta.is_dir() {
        (path.to_path_buf(), list_files(path)?)
    } else {
        (
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
            vec![path.to_path_buf()],
        )
    };

    let mut summary = ImportSummary {
        files_scanned: files.len(),
        ..Default::default()
    };
    let inputs: Vec<InputDigest> = files
        .par_iter()
        .map(|f| {
            let bytes = std::fs::read(f).map_err(io_err(f))?;
            Ok(InputDigest {
                path: f.display().to_string(),
                sha256: sha256_hex(&bytes),
            })
        })
        .collect::<Result<_, DataError>>()?;

    let candidates: Vec<(usize, Result<StrokeSample, Quarantined>)> = match spec {
        FormatSpec::Canonical => import_canonical(&files, &mut summary)?,
        FormatSpec::Delimited(d) => import_delimited(&root, &files, d, &mut summary)?,
    };

    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    for (_, c) in candidates {
        summary.parsed += 1;
        match c {
            Ok(s) => {
                let key = SampleKey::of(&s);
                if seen.insert(key.clone()) {
                    samples.push(s);
                } else {
                    summary.quarantined.push(Quarantined {
                        source: key.to_string(),
                        reason: "duplicate key".into(),
                        detail: format!("sample {key} appears more than once"),
                    });
                }
            }
            Err(q) => summary.quarantined.push(q),
        }
    }
    summary.imported = samples.len();
    if summary.parsed == 0 {
        summary
            .warnings
            .push(format!("no samples found under {}", path.display()));
    }
    if !summary.quarantined.is_empty() {
        summary.warnings.push(format!(
            "{} sample(s) quarantined",
            summary.quarantined.len()
        ));
    }
    for w in &summary.warnings {
        log::warn!("{w}");
    }

    let provenance = Provenance {
        source_paths: vec![path.display().to_string()],
        format: spec.name().into(),
        format_version: format::DATASET_VERSION,
        options: serde_json::to_value(spec).expect("spec serializes"),
        content_digest: String::new(),
    };
    let dataset = Dataset::new(samples, provenance)?;
    Ok(ImportReport {
        dataset,
        summary,
        inputs,
    })
}

type Candidate = (usize, Result<StrokeSample, Quarantined>);

fn import_canonical(
    files: &[PathBuf],
    summary: &mut ImportSummary,
) -> Result<Vec<Candidate>, DataError> {
    let mut out = Vec::new();
    for f in files {
        if f.extension().and_then(|e| e.to_str()) != Some("jsonl") {
            summary.files_skipped += 1;
            continue;
        }
        let name = f.display().to_string();
        let file = std::fs::File::open(f).map_err(io_err(f))?;
        let (_, lines) = format::parse_lines(file, &name)?;
        for (n, r) in lines {
            out.push((
                out.len(),
                r.map_err(|detail| quarantine(format!("{name}:{n}"), detail)),
            ));
        }
    }
    Ok(out)
}

struct FileMatch {
    path: PathBuf,
    user: String,
    label: String,
    session: Option<u32>,
    repetition: Option<u32>,
}

fn import_delimited(
    root: &Path,
    files: &[PathBuf],
    spec: &DelimitedSpec,
    summary: &mut ImportSummary,
) -> Result<Vec<Candidate>, DataError> {
    let re = Regex::new(&spec.path_pattern)
        .map_err(|e| DataError::Schema(format!("bad path pattern: {e}")))?;
    let groups: HashSet<&str> = re.capture_names().flatten().collect();
    for needed in ["user", "label"] {
        if !groups.contains(needed) {
            return Err(DataError::Schema(format!(
                "path pattern lacks the named group `{needed}`"
            )));
        }
    }
    if !spec.verified {
        summary.warnings.push(
            "mapping preset is unverified: verify on first import against the release files".into(),
        );
    }

    let mut matches = Vec::new();
    for f in files {
        let rel = relative(root, f);
        let Some(c) = re.captures(&rel) else {
            summary.files_skipped += 1;
            continue;
        };
        let num = |g: &str| -> Result<Option<u32>, DataError> {
            c.name(g)
                .map(|m| {
                    m.as_str().parse::<u32>().map_err(|e| {
                        DataError::Schema(format!(
                            "{rel}: group `{g}` = {:?} is not a number: {e}",
                            m.as_str()
                        ))
                    })
                })
                .transpose()
        };
        let raw_label = c["label"].to_string();
        matches.push(FileMatch {
            path: f.clone(),
            user: c["user"].to_string(),
            label: spec.label_map.get(&raw_label).cloned().unwrap_or(raw_label),
            session: num("session")?,
            repetition: num("repetition")?,
        });
    }

    // Sessions and repetitions not encoded in the path follow file order.
    let mut counters: HashMap<(String, String, u32), u32> = HashMap::new();
    let keyed: Vec<(FileMatch, u32, u32)> = matches
        .into_iter()
        .map(|m| {
            let session = match (m.session, m.repetition, spec.repetitions_per_session) {
                (Some(s), _, _) => s,
                (None, Some(r), Some(n)) if n > 0 && r > 0 => (r - 1) / n + 1,
                _ => 1,
            };
            let repetition = match m.repetition {
                Some(r) => r,
                None => {
                    let c = counters
                        .entry((m.user.clone(), m.label.clone(), session))
                        .or_insert(0);
                    *c += 1;
                    *c
                }
            };
            (m, session, repetition)
        })
        .collect();

    let parsed: Vec<(Result<StrokeSample, Quarantined>, usize)> = keyed
        .par_iter()
        .map(|(m, session, repetition)| {
            let name = m.path.display().to_string();
            let text = match std::fs::read_to_string(&m.path) {
                Ok(t) => t,
                Err(e) => return (Err(quarantine(name, format!("unreadable: {e}"))), 0),
            };
            match parse_rows(&text, spec) {
                Ok((strokes, no_ink)) => {
                    let s = StrokeSample {
                        user_id: m.user.clone(),
                        session: *session,
                        label: m.label.clone(),
                        repetition: *repetition,
                        source: SampleSource::Imported,
                        strokes,
                    };
                    match s.validate() {
                        Ok(()) => (Ok(s), no_ink),
                        Err(e) => (Err(quarantine(name, e.to_string())), no_ink),
                    }
                }
                Err(detail) => (Err(quarantine(name, detail)), 0),
            }
        })
        .collect();

    Ok(parsed
        .into_iter()
        .enumerate()
        .map(|(i, (r, no_ink))| {
            summary.rows_without_ink += no_ink;
            (i, r)
        })
        .collect())
}

fn parse_rows(text: &str, spec: &DelimitedSpec) -> Result<(Vec<Vec<Point>>, usize), String> {
    let mut strokes: Vec<Vec<Point>> = Vec::new();
    let mut current: Vec<Point> = Vec::new();
    let mut last_id: Option<String> = None;
    let mut no_ink = 0;
    let needed = [spec.x_column, spec.y_column, spec.t_column]
        .into_iter()
        .chain(match spec.stroke {
            StrokeRule::StrokeId { column } | StrokeRule::PenUp { column, .. } => Some(column),
            _ => None,
        })
        .max()
        .unwrap_or(0);

    for (n, line) in text.lines().enumerate().skip(spec.skip_lines) {
        let line = line.trim();
        if line.is_empty()
            || spec
                .comment_prefix
                .as_deref()
                .is_some_and(|p| line.starts_with(p))
        {
            continue;
        }
        let fields: Vec<&str> = match spec.delimiter {
            Some(d) => line.split(d).map(str::trim).collect(),
            None => line.split_whitespace().collect(),
        };
        if fields.len() <= needed {
            return Err(format!(
                "line {}: {} field(s), mapping needs column {needed}",
                n + 1,
                fields.len()
            ));
        }
        let num = |c: usize| -> Result<f64, String> {
            fields[c]
                .parse::<f64>()
                .map_err(|e| format!("line {}: column {c} = {:?}: {e}", n + 1, fields[c]))
        };
        let p = Point::new(
            num(spec.x_column)?,
            num(spec.y_column)?,
            num(spec.t_column)? * spec.time_scale,
        );
        match &spec.stroke {
            StrokeRule::Single => {}
            StrokeRule::StrokeId { column } => {
                let id = fields[*column].to_string();
                if last_id.as_ref().is_some_and(|l| *l != id) && !current.is_empty() {
                    strokes.push(std::mem::take(&mut current));
                }
                last_id = Some(id);
            }
            StrokeRule::PenUp { column, up_value } => {
                if num(*column)? == *up_value {
                    no_ink += 1;
                    if !current.is_empty() {
                        strokes.push(std::mem::take(&mut current));
                    }
                    continue;
                }
            }
            StrokeRule::TimeGap { gap_ms } => {
                if current.last().is_some_and(|q| p.t - q.t > *gap_ms) {
                    strokes.push(std::mem::take(&mut current));
                }
            }
        }
        current.push(p);
    }
    if !current.is_empty() {
        strokes.push(current);
    }
    Ok((strokes, no_ink))
}
