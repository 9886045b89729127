//! CSV data contract.
//!
//! Annotation files have one row per instance: an instance-id column followed
//! by one column per source. The header row names the sources. Cells holding
//! the missing token (empty by default) are missing labels. Class tokens are
//! numbered in order of first appearance unless the first line declares the
//! alphabet explicitly:
//!
//! ```text
//! #classes=duck,not_duck
//! image,alice,bob,carol
//! img1,duck,duck,
//! img2,not_duck,duck,not_duck
//! ```
//!
//! Outputs are three files: `scores.csv` (one row per scored class, one
//! column per instance), `predictions.csv` (`instance,label`) and
//! `rankings.csv` (`class,source,weight,rank`). Reals are written with 12
//! significant digits.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::opinions::{ClassId, OpinionMatrix, MAX_CLASSES};
use crate::rank::{Predictions, RankOutput};
use crate::{Error, Result};

const DIRECTIVE: &str = "#classes=";

pub const SCORES_FILE: &str = "scores.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const RANKINGS_FILE: &str = "rankings.csv";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationFileSpec {
    pub missing_token: String,
    /// Declared class tokens, overriding any directive in the file.
    pub alphabet: Option<Vec<String>>,
}

/// Bijection between class tokens and dense class ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassAlphabet {
    tokens: Vec<String>,
    ids: HashMap<String, ClassId>,
}

impl ClassAlphabet {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() > MAX_CLASSES {
            return Err(Error::Validation(format!("at most {MAX_CLASSES} classes are supported")));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i as ClassId).is_some() {
                return Err(Error::Validation(format!("class token {t:?} declared twice")));
            }
        }
        Ok(Self { tokens, ids })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<ClassId> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: ClassId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    fn intern(&mut self, token: &str) -> Option<ClassId> {
        if let Some(id) = self.id(token) {
            return Some(id);
        }
        if self.tokens.len() == MAX_CLASSES {
            return None;
        }
        let id = self.tokens.len() as ClassId;
        self.tokens.push(token.to_owned());
        self.ids.insert(token.to_owned(), id);
        Some(id)
    }
}

/// An opinion matrix together with the identifiers it was read with.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    pub opinions: OpinionMatrix,
    pub instance_ids: Vec<String>,
    pub source_ids: Vec<String>,
    pub alphabet: ClassAlphabet,
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    parse_err(line, e.to_string())
}

fn read_all(mut reader: impl Read) -> Result<String> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| parse_err(0, format!("cannot read input: {e}")))?;
    Ok(text)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Reads an annotation file.
pub fn read_opinions(reader: impl Read, spec: &AnnotationFileSpec) -> Result<AnnotationSet> {
    let text = read_all(reader)?;
    if text.trim().is_empty() {
        return Err(parse_err(1, "empty file"));
    }

    let (mut declared, body, offset) = match text.strip_prefix(DIRECTIVE) {
        Some(rest) => {
            let (line, body) = rest.split_once('\n').unwrap_or((rest, ""));
            let tokens = line.trim_end_matches('\r').split(',').map(str::to_owned).collect();
            (Some(tokens), body, 1)
        }
        None => (None, text.as_str(), 0),
    };
    if spec.alphabet.is_some() {
        declared = spec.alphabet.clone();
    }
    let fixed_alphabet = declared.is_some();
    let mut alphabet = ClassAlphabet::new(declared.unwrap_or_default())?;

    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(body.as_bytes());
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r.map_err(csv_err)?,
        None => return Err(parse_err(1 + offset, "missing header row")),
    };
    let header_line = header.position().map_or(1, |p| p.line()) + offset;
    if header.len() < 2 {
        return Err(parse_err(header_line, "header needs an instance column and at least one source column"));
    }
    let source_ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut seen_sources = HashSet::new();
    for id in &source_ids {
        if !seen_sources.insert(id) {
            return Err(parse_err(header_line, format!("duplicate source id {id:?}")));
        }
    }
    let s = source_ids.len();

    let mut instance_ids = Vec::new();
    let mut seen_instances = HashSet::new();
    // instance-major while reading
    let mut cells: Vec<Option<ClassId>> = Vec::new();
    for record in records {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line()) + offset;
        if record.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} columns, found {}", header.len(), record.len()),
            ));
        }
        let id = &record[0];
        if !seen_instances.insert(id.to_owned()) {
            return Err(parse_err(line, format!("duplicate instance id {id:?}")));
        }
        instance_ids.push(id.to_owned());
        for token in record.iter().skip(1) {
            if token == spec.missing_token {
                cells.push(None);
                continue;
            }
            let id = if fixed_alphabet {
                alphabet.id(token).ok_or_else(|| {
                    parse_err(line, format!("class token {token:?} is not in the declared alphabet"))
                })?
            } else {
                alphabet.intern(token).ok_or_else(|| {
                    parse_err(line, format!("more than {MAX_CLASSES} distinct class tokens"))
                })?
            };
            cells.push(Some(id));
        }
    }

    let n = instance_ids.len();
    if n == 0 {
        return Err(parse_err(header_line + 1, "no instance rows"));
    }
    if alphabet.len() < 2 {
        return Err(Error::Validation(format!(
            "found {} class token(s); at least two classes are needed (declare them with a {DIRECTIVE} line)",
            alphabet.len()
        )));
    }
    let opinions = OpinionMatrix::from_fn(s, n, alphabet.len(), |i, j| cells[j * s + i])?;
    Ok(AnnotationSet { opinions, instance_ids, source_ids, alphabet })
}

pub fn read_opinions_path(path: &Path, spec: &AnnotationFileSpec) -> Result<AnnotationSet> {
    read_opinions(open(path)?, spec)
}

/// Writes an annotation file that [`read_opinions`] reads back to the same
/// matrix. The alphabet is always declared so class ids are preserved.
pub fn write_opinions(writer: impl Write, set: &AnnotationSet, missing_token: &str) -> Result<()> {
    let mut writer = BufWriter::new(writer);
    let wrap = |e: std::io::Error| Error::io("<annotation output>", e);
    writeln!(writer, "{DIRECTIVE}{}", set.alphabet.tokens().join(",")).map_err(wrap)?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["instance".to_owned()];
    header.extend(set.source_ids.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (j, id) in set.instance_ids.iter().enumerate() {
        let mut row = vec![id.as_str()];
        row.extend(set.opinions.column(j).map(|c| c.map_or(missing_token, |c| set.alphabet.token(c))));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(wrap)
}

/// Formats `x` with 12 significant digits in positional notation.
pub fn format_real(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub scores: PathBuf,
    pub predictions: PathBuf,
    pub rankings: PathBuf,
}

/// Writes scores, predictions and rankings into `dir`, creating it if needed.
pub fn write_outputs(
    dir: &Path,
    set: &AnnotationSet,
    output: &RankOutput,
    predictions: &Predictions,
) -> Result<OutputPaths> {
    let n = set.instance_ids.len();
    if output.scores.instances() != n || predictions.len() != n {
        return Err(Error::invalid("outputs do not match the number of instances"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = OutputPaths {
        scores: dir.join(SCORES_FILE),
        predictions: dir.join(PREDICTIONS_FILE),
        rankings: dir.join(RANKINGS_FILE),
    };
    let create = |p: &Path| csv::Writer::from_path(p).map_err(csv_err);
    let finish = |mut w: csv::Writer<File>, p: &Path| w.flush().map_err(|e| Error::io(p, e));

    let scores = &output.scores;
    let mut w = create(&paths.scores)?;
    let mut header = vec!["class".to_owned()];
    header.extend(set.instance_ids.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for r in 0..scores.rows() {
        let mut row = vec![set.alphabet.token(scores.row_class(r)).to_owned()];
        row.extend(scores.row(r).iter().map(|&x| format_real(x)));
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w, &paths.scores)?;

    write_predictions(&paths.predictions, set, predictions)?;

    let mut w = create(&paths.rankings)?;
    w.write_record(["class", "source", "weight", "rank"]).map_err(csv_err)?;
    for cr in &output.rankings {
        let mut rank = vec![0; cr.ranking.len()];
        for (pos, i) in cr.ranking.order().into_iter().enumerate() {
            rank[i] = pos + 1;
        }
        let token = set.alphabet.token(cr.class_id);
        for (i, &weight) in cr.ranking.weights().iter().enumerate() {
            w.write_record([
                token,
                set.source_ids[i].as_str(),
                &format_real(weight),
                &rank[i].to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w, &paths.rankings)?;
    Ok(paths)
}

/// Writes `instance,label` rows. Multilabel predictions join the active
/// class tokens with `;`.
pub fn write_predictions(path: &Path, set: &AnnotationSet, predictions: &Predictions) -> Result<()> {
    if predictions.len() != set.instance_ids.len() {
        return Err(Error::invalid("predictions do not match the number of instances"));
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["instance", "label"]).map_err(csv_err)?;
    for (j, id) in set.instance_ids.iter().enumerate() {
        let label = match predictions {
            Predictions::Labels(v) => set.alphabet.token(v[j]).to_owned(),
            Predictions::Multilabel(v) => v[j]
                .iter()
                .enumerate()
                .filter(|(_, &on)| on)
                .map(|(c, _)| set.alphabet.token(c as ClassId))
                .collect::<Vec<_>>()
                .join(";"),
        };
        w.write_record([id.as_str(), label.as_str()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A scores file read back.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub classes: Vec<String>,
    pub instance_ids: Vec<String>,
    /// One row per class.
    pub values: Vec<Vec<f64>>,
}

pub fn read_scores(reader: impl Read) -> Result<ScoreTable> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let instance_ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut classes = Vec::new();
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(parse_err(line, format!("expected {} columns, found {}", header.len(), record.len())));
        }
        classes.push(record[0].to_owned());
        values.push(
            record
                .iter()
                .skip(1)
                .map(|v| v.parse::<f64>().map_err(|_| parse_err(line, format!("invalid score {v:?}"))))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(ScoreTable { classes, instance_ids, values })
}

/// Reads a two-column `instance,label` file (predictions or truth).
pub fn read_labels(reader: impl Read) -> Result<Vec<(String, String)>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.len() != 2 {
        return Err(parse_err(1, format!("expected 2 columns (instance,label), found {}", header.len())));
    }
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(parse_err(line, format!("expected 2 columns, found {}", record.len())));
        }
        if !seen.insert(record[0].to_owned()) {
            return Err(parse_err(line, format!("duplicate instance id {:?}", &record[0])));
        }
        out.push((record[0].to_owned(), record[1].to_owned()));
    }
    Ok(out)
}

pub fn read_labels_path(path: &Path) -> Result<Vec<(String, String)>> {
    read_labels(open(path)?)
}

/// Reorders `rows` to follow `instance_ids`, failing with every missing or
/// unexpected id listed.
fn align<'a>(rows: &'a [(String, String)], instance_ids: &[String]) -> Result<Vec<&'a str>> {
    let by_id: HashMap<&str, &str> = rows.iter().map(|(i, l)| (i.as_str(), l.as_str())).collect();
    let expected: HashSet<&str> = instance_ids.iter().map(String::as_str).collect();
    let missing: BTreeSet<&str> =
        instance_ids.iter().map(String::as_str).filter(|id| !by_id.contains_key(id)).collect();
    let extra: BTreeSet<&str> =
        rows.iter().map(|(i, _)| i.as_str()).filter(|id| !expected.contains(id)).collect();
    if !missing.is_empty() || !extra.is_empty() {
        let mut msg = Vec::new();
        if !missing.is_empty() {
            msg.push(format!("missing ids: {}", missing.into_iter().collect::<Vec<_>>().join(", ")));
        }
        if !extra.is_empty() {
            msg.push(format!("unexpected ids: {}", extra.into_iter().collect::<Vec<_>>().join(", ")));
        }
        return Err(Error::Validation(msg.join("; ")));
    }
    Ok(instance_ids.iter().map(|id| by_id[id.as_str()]).collect())
}

/// Reads ground truth and aligns it with the instance order of an annotation set.
pub fn read_truth(
    reader: impl Read,
    instance_ids: &[String],
    alphabet: &ClassAlphabet,
) -> Result<Vec<ClassId>> {
    let rows = read_labels(reader)?;
    let aligned = align(&rows, instance_ids)?;
    let unknown: BTreeSet<&str> = aligned.iter().copied().filter(|t| alphabet.id(t).is_none()).collect();
    if !unknown.is_empty() {
        return Err(Error::Validation(format!(
            "unknown class tokens: {}",
            unknown.into_iter().collect::<Vec<_>>().join(", ")
        )));
    }
    Ok(aligned.iter().map(|t| alphabet.id(t).expect("checked above")).collect())
}

pub fn read_truth_path(path: &Path, instance_ids: &[String], alphabet: &ClassAlphabet) -> Result<Vec<ClassId>> {
    read_truth(open(path)?, instance_ids, alphabet)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreSummary {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Compares predicted and true labels joined on instance id.
pub fn score_labels(predictions: &[(String, String)], truth: &[(String, String)]) -> Result<ScoreSummary> {
    let ids: Vec<String> = truth.iter().map(|(i, _)| i.clone()).collect();
    let aligned = align(predictions, &ids)?;
    let correct = aligned.iter().zip(truth).filter(|(p, (_, t))| *p == t).count();
    let total = truth.len();
    if total == 0 {
        return Err(Error::Validation("no labeled instances to score".into()));
    }
    Ok(ScoreSummary { correct, total, accuracy: correct as f64 / total as f64 })
}
