//! Partial-label datasets and their on-disk formats.
//!
//! Labels are 1-indexed in files and 0-indexed everywhere in memory; the
//! conversion happens only inside the readers and writers of this module.
//!
//! Text format:
//!
//! ```text
//! n q c
//! x_1 .. x_q | s_1 s_2 .. [| y]
//! ```
//!
//! JSON-lines format: a header object `{"n":..,"q":..,"c":..}` followed by
//! one object per instance with `features`, `candidates` and an optional
//! `true_label`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("empty candidate set at instance {0}")]
    EmptyCandidateSet(usize),
    #[error("full candidate set at instance {0}")]
    FullCandidateSet(usize),
    #[error("true label not in candidate set at instance {0}")]
    TrueLabelNotCandidate(usize),
    #[error("label {label} out of range 1..={c} at instance {instance}")]
    LabelOutOfRange { instance: usize, label: usize, c: usize },
    #[error("duplicate label {label} at instance {instance}")]
    DuplicateLabel { instance: usize, label: usize },
    #[error("non-finite feature at instance {0}")]
    NonFiniteFeature(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("missing true labels")]
    MissingTrueLabels,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DataError {
    /// Whether the error is an invariant violation rather than an I/O or syntax problem.
    pub fn is_invariant_violation(&self) -> bool {
        !matches!(self, DataError::Io(_) | DataError::Parse { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Text,
    JsonLines,
}

impl DataFormat {
    /// `.jsonl` / `.json` select JSON-lines; everything else is text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => DataFormat::JsonLines,
            _ => DataFormat::Text,
        }
    }
}

impl FromStr for DataFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "txt" => Ok(DataFormat::Text),
            "jsonl" | "json-lines" | "jsonlines" => Ok(DataFormat::JsonLines),
            other => Err(format!("unknown dataset format '{other}'")),
        }
    }
}

/// Features plus one candidate label set per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PllDataset {
    n: usize,
    q: usize,
    c: usize,
    features: Vec<f64>,
    candidates: Vec<Vec<usize>>,
    true_labels: Option<Vec<usize>>,
}

impl PllDataset {
    /// Build and validate a dataset. `features` is row-major `n × q`, labels
    /// are 0-based. Candidate sets are sorted on the way in.
    pub fn new(
        q: usize,
        c: usize,
        features: Vec<f64>,
        mut candidates: Vec<Vec<usize>>,
        true_labels: Option<Vec<usize>>,
    ) -> Result<Self, DataError> {
        let n = candidates.len();
        if q == 0 {
            return Err(DataError::DimensionMismatch("feature dimension q must be at least 1".into()));
        }
        if c < 2 {
            return Err(DataError::DimensionMismatch("at least two classes are required".into()));
        }
        if features.len() != n * q {
            return Err(DataError::DimensionMismatch(format!(
                "expected {} feature values for n={n}, q={q}, got {}",
                n * q,
                features.len()
            )));
        }
        if let Some(y) = &true_labels {
            if y.len() != n {
                return Err(DataError::DimensionMismatch(format!(
                    "{} true labels for {n} instances",
                    y.len()
                )));
            }
        }
        for (i, row) in features.chunks(q).enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(DataError::NonFiniteFeature(i));
            }
        }
        for (i, set) in candidates.iter_mut().enumerate() {
            set.sort_unstable();
            if set.is_empty() {
                return Err(DataError::EmptyCandidateSet(i));
            }
            if let Some(&bad) = set.iter().find(|&&l| l >= c) {
                return Err(DataError::LabelOutOfRange { instance: i, label: bad + 1, c });
            }
            if let Some(w) = set.windows(2).find(|w| w[0] == w[1]) {
                return Err(DataError::DuplicateLabel { instance: i, label: w[0] + 1 });
            }
            if set.len() >= c {
                return Err(DataError::FullCandidateSet(i));
            }
        }
        if let Some(y) = &true_labels {
            for (i, &label) in y.iter().enumerate() {
                if label >= c {
                    return Err(DataError::LabelOutOfRange { instance: i, label: label + 1, c });
                }
                if candidates[i].binary_search(&label).is_err() {
                    return Err(DataError::TrueLabelNotCandidate(i));
                }
            }
        }
        Ok(Self { n, q, c, features, candidates, true_labels })
    }

    /// A fully supervised dataset: every candidate set is `{y_i}`.
    pub fn from_labels(q: usize, c: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self, DataError> {
        let candidates = labels.iter().map(|&y| vec![y]).collect();
        Self::new(q, c, features, candidates, Some(labels))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.q..(i + 1) * self.q]
    }

    pub fn candidates(&self, i: usize) -> &[usize] {
        &self.candidates[i]
    }

    pub fn candidate_sets(&self) -> &[Vec<usize>] {
        &self.candidates
    }

    pub fn true_labels(&self) -> Option<&[usize]> {
        self.true_labels.as_deref()
    }

    pub fn require_true_labels(&self) -> Result<&[usize], DataError> {
        self.true_labels().ok_or(DataError::MissingTrueLabels)
    }

    /// Occurrence vector of instance `i`.
    pub fn occurrence(&self, i: usize) -> Vec<u8> {
        let mut o = vec![0u8; self.c];
        for &j in &self.candidates[i] {
            o[j] = 1;
        }
        o
    }

    pub fn mean_candidate_size(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.candidates.iter().map(Vec::len).sum::<usize>() as f64 / self.n as f64
    }

    /// Same features and true labels, new candidate sets.
    pub fn with_candidates(&self, candidates: Vec<Vec<usize>>) -> Result<Self, DataError> {
        Self::new(self.q, self.c, self.features.clone(), candidates, self.true_labels.clone())
    }

    /// Copy of the dataset without the hidden true labels.
    pub fn without_true_labels(&self) -> Self {
        Self { true_labels: None, ..self.clone() }
    }

    /// Rows `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.q);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Self {
            n: indices.len(),
            q: self.q,
            c: self.c,
            features,
            candidates: indices.iter().map(|&i| self.candidates[i].clone()).collect(),
            true_labels: self.true_labels.as_ref().map(|y| indices.iter().map(|&i| y[i]).collect()),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.n, self.q, self.c);
        for i in 0..self.n {
            for (k, v) in self.row(i).iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                push_real(&mut out, *v);
            }
            out.push_str(" |");
            for &l in &self.candidates[i] {
                let _ = write!(out, " {}", l + 1);
            }
            if let Some(y) = &self.true_labels {
                let _ = write!(out, " | {}", y[i] + 1);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, DataError> {
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
        let (_, header) = lines.next().ok_or(DataError::Parse { line: 1, message: "missing header".into() })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| DataError::Parse { line: 1, message: format!("bad header: {e}") })?;
        let [n, q, c] = dims[..] else {
            return Err(DataError::Parse { line: 1, message: "header must be \"n q c\"".into() });
        };

        let mut features = Vec::with_capacity(n * q);
        let mut candidates = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut saw_label = None;
        for (line_no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            if candidates.len() == n {
                return Err(DataError::Parse { line: line_no, message: format!("more than {n} rows") });
            }
            let parse_err = |message: String| DataError::Parse { line: line_no, message };
            let parts: Vec<&str> = line.split('|').collect();
            if parts.len() < 2 || parts.len() > 3 {
                return Err(parse_err("expected \"features | candidates [| label]\"".into()));
            }
            let row: Vec<f64> = parts[0]
                .split_whitespace()
                .map(f64::from_str)
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(format!("bad feature value: {e}")))?;
            if row.len() != q {
                return Err(parse_err(format!("expected {q} features, found {}", row.len())));
            }
            features.extend(row);
            candidates.push(parse_labels(parts[1], c).map_err(parse_err)?);
            let has_label = parts.len() == 3;
            if *saw_label.get_or_insert(has_label) != has_label {
                return Err(parse_err("true label column must be present on every row or none".into()));
            }
            if has_label {
                let mut y = parse_labels(parts[2], c).map_err(parse_err)?;
                if y.len() != 1 {
                    return Err(parse_err("exactly one true label expected".into()));
                }
                labels.push(y.remove(0));
            }
        }
        if candidates.len() != n {
            return Err(DataError::DimensionMismatch(format!(
                "header declares {n} rows, found {}",
                candidates.len()
            )));
        }
        let true_labels = if saw_label == Some(true) { Some(labels) } else { None };
        Self::new(q, c, features, candidates, true_labels)
    }

    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        let header = JsonHeader { n: self.n, q: self.q, c: self.c };
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for i in 0..self.n {
            let rec = JsonInstance {
                features: self.row(i).to_vec(),
                candidates: self.candidates[i].iter().map(|l| l + 1).collect(),
                true_label: self.true_labels.as_ref().map(|y| y[i] + 1),
            };
            out.push_str(&serde_json::to_string(&rec).expect("instance serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_json_lines(text: &str) -> Result<Self, DataError> {
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l)).filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(DataError::Parse { line: 1, message: "missing header".into() })?;
        let header: JsonHeader = serde_json::from_str(first)
            .map_err(|e| DataError::Parse { line: 1, message: format!("bad header: {e}") })?;
        let mut features = Vec::with_capacity(header.n * header.q);
        let mut candidates = Vec::with_capacity(header.n);
        let mut labels = Vec::new();
        let mut saw_label = None;
        for (line_no, line) in lines {
            let parse_err = |message: String| DataError::Parse { line: line_no, message };
            let rec: JsonInstance = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
            if rec.features.len() != header.q {
                return Err(parse_err(format!("expected {} features, found {}", header.q, rec.features.len())));
            }
            features.extend(rec.features);
            candidates.push(to_zero_based(&rec.candidates, header.c).map_err(parse_err)?);
            let has_label = rec.true_label.is_some();
            if *saw_label.get_or_insert(has_label) != has_label {
                return Err(parse_err("true_label must be present on every row or none".into()));
            }
            if let Some(y) = rec.true_label {
                labels.extend(to_zero_based(&[y], header.c).map_err(parse_err)?);
            }
        }
        if candidates.len() != header.n {
            return Err(DataError::DimensionMismatch(format!(
                "header declares {} rows, found {}",
                header.n,
                candidates.len()
            )));
        }
        let true_labels = if saw_label == Some(true) { Some(labels) } else { None };
        Self::new(header.q, header.c, features, candidates, true_labels)
    }
}

#[derive(Serialize, Deserialize)]
struct JsonHeader {
    n: usize,
    q: usize,
    c: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonInstance {
    features: Vec<f64>,
    candidates: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    true_label: Option<usize>,
}

/// Shortest decimal string that parses back to the same bits.
fn push_real(out: &mut String, v: f64) {
    let _ = write!(out, "{v:?}");
}

fn parse_labels(field: &str, c: usize) -> Result<Vec<usize>, String> {
    let raw: Vec<usize> = field
        .split_whitespace()
        .map(usize::from_str)
        .collect::<Result<_, _>>()
        .map_err(|e| format!("bad label: {e}"))?;
    to_zero_based(&raw, c)
}

fn to_zero_based(labels: &[usize], c: usize) -> Result<Vec<usize>, String> {
    labels
        .iter()
        .map(|&l| {
            if l == 0 || l > c {
                Err(format!("label {l} out of range 1..={c}"))
            } else {
                Ok(l - 1)
            }
        })
        .collect()
}

pub fn load_dataset(path: &Path, format: DataFormat) -> Result<PllDataset, DataError> {
    let text = fs::read_to_string(path)?;
    match format {
        DataFormat::Text => PllDataset::from_text(&text),
        DataFormat::JsonLines => PllDataset::from_json_lines(&text),
    }
}

pub fn write_dataset(ds: &PllDataset, path: &Path, format: DataFormat) -> Result<(), DataError> {
    let text = match format {
        DataFormat::Text => ds.to_text(),
        DataFormat::JsonLines => ds.to_json_lines(),
    };
    fs::write(path, text)?;
    Ok(())
}

/// `o_j = 1` iff `j ∈ S`.
pub fn occurrence_vector(candidates: &[usize], c: usize) -> Result<Vec<u8>, DataError> {
    let mut o = vec![0u8; c];
    for &j in candidates {
        if j >= c {
            return Err(DataError::LabelOutOfRange { instance: 0, label: j + 1, c });
        }
        o[j] = 1;
    }
    Ok(o)
}

/// One-hot correct label, incorrect-candidate indicator and occurrence vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalVectors {
    pub l: Vec<u8>,
    pub s_bar: Vec<u8>,
    pub o: Vec<u8>,
}

impl LogicalVectors {
    pub fn new(candidates: &[usize], y: usize, c: usize) -> Result<Self, DataError> {
        let o = occurrence_vector(candidates, c)?;
        if y >= c {
            return Err(DataError::LabelOutOfRange { instance: 0, label: y + 1, c });
        }
        if o[y] == 0 {
            return Err(DataError::TrueLabelNotCandidate(0));
        }
        let mut l = vec![0u8; c];
        l[y] = 1;
        let s_bar = o.iter().zip(&l).map(|(&oj, &lj)| oj - lj).collect();
        Ok(Self { l, s_bar, o })
    }
}

/// `data.txt` → `data.meta`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

pub fn write_sidecar(path: &Path, entries: &BTreeMap<String, String>) -> Result<(), DataError> {
    let mut out = String::new();
    for (k, v) in entries {
        let _ = writeln!(out, "{k}={v}");
    }
    fs::write(sidecar_path(path), out)?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<BTreeMap<String, String>, DataError> {
    let text = fs::read_to_string(sidecar_path(path))?;
    let mut map = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(DataError::Parse { line: k + 1, message: "expected key=value".into() })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}
