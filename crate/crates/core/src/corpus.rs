//! Documents, grants, journal metrics and field maps: the data model plus
//! ingestion and persistence.
//!
//! Ingestion is tolerant by default: malformed lines are recorded in the
//! [`IngestReport`] and skipped. With `strict` set, the first malformed line
//! or duplicate id aborts the load.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorRef {
    pub author_id: String,
    #[serde(default)]
    pub country: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub year: i32,
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub references: Vec<String>,
    #[serde(default)]
    pub authors: Vec<AuthorRef>,
    #[serde(default)]
    pub journal_id: Option<String>,
    #[serde(default = "default_true")]
    pub is_source: bool,
}

fn default_true() -> bool {
    true
}

impl Document {
    pub fn has_text(&self) -> bool {
        !self.title.trim().is_empty() || !self.abstract_text.trim().is_empty()
    }

    /// Title and abstract joined by a newline, the text every scorer sees.
    pub fn text(&self) -> String {
        format!("{}\n{}", self.title, self.abstract_text)
    }

    /// Author-units contributed by authors from `country` under fractional counting.
    pub fn country_author_units(&self, country: &str) -> f64 {
        if self.authors.is_empty() {
            return 0.0;
        }
        let hits = self
            .authors
            .iter()
            .filter(|a| a.country.as_deref() == Some(country))
            .count();
        hits as f64 / self.authors.len() as f64
    }

    /// Author-units contributed by authors with any known country.
    pub fn located_author_units(&self) -> f64 {
        if self.authors.is_empty() {
            return 0.0;
        }
        let hits = self.authors.iter().filter(|a| a.country.is_some()).count();
        hits as f64 / self.authors.len() as f64
    }
}

/// Raw line shape; `year` is optional here so that missing years can be reported
/// instead of failing the parse.
#[derive(Debug, Deserialize)]
struct RawDocument {
    doc_id: String,
    #[serde(default)]
    year: Option<i64>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default, rename = "abstract")]
    abstract_text: Option<String>,
    #[serde(default)]
    references: Vec<String>,
    #[serde(default)]
    authors: Vec<AuthorRef>,
    #[serde(default)]
    journal_id: Option<String>,
    #[serde(default = "default_true")]
    is_source: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub strict: bool,
    /// Minimum number of distinct citing documents before an absent id is
    /// materialized as a non-source document.
    pub min_noncite: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            strict: false,
            min_noncite: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub documents: usize,
    pub source_documents: usize,
    pub materialized_non_source: usize,
    pub empty_text_documents: usize,
    pub dangling_references: usize,
    pub self_references: usize,
    pub repeated_references: usize,
    pub non_source_references_dropped: usize,
    pub duplicate_ids: usize,
    pub missing_year: usize,
    pub malformed: Vec<LineIssue>,
}

/// An immutable, id-sorted collection of documents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DocumentSet {
    docs: Vec<Document>,
    index: HashMap<String, usize>,
}

impl DocumentSet {
    /// Builds a set from already-validated documents. Sorts by id and rejects duplicates.
    pub fn new(mut docs: Vec<Document>) -> Result<Self> {
        docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        let mut index = HashMap::with_capacity(docs.len());
        for (i, d) in docs.iter().enumerate() {
            if index.insert(d.doc_id.clone(), i).is_some() {
                return Err(Error::DuplicateDocument(d.doc_id.clone()));
            }
        }
        Ok(DocumentSet { docs, index })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.index.get(doc_id).map(|&i| &self.docs[i])
    }

    pub fn position(&self, doc_id: &str) -> Option<usize> {
        self.index.get(doc_id).copied()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.docs.iter()
    }

    pub fn as_slice(&self) -> &[Document] {
        &self.docs
    }

    pub fn into_vec(self) -> Vec<Document> {
        self.docs
    }

    /// Writes one JSON object per line in id order.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_jsonl(path, self.docs.iter())
    }
}

impl<'a> IntoIterator for &'a DocumentSet {
    type Item = &'a Document;
    type IntoIter = std::slice::Iter<'a, Document>;

    fn into_iter(self) -> Self::IntoIter {
        self.docs.iter()
    }
}

fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, rows: impl Iterator<Item = &'a T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        lines.push((i + 1, line));
    }
    Ok(lines)
}

/// Loads `documents.jsonl` and applies the ingest rules.
pub fn load_corpus(path: &Path, opts: &IngestOptions) -> Result<(DocumentSet, IngestReport)> {
    let mut report = IngestReport::default();
    let mut raw = Vec::new();
    for (line_no, line) in read_lines(path)? {
        match serde_json::from_str::<RawDocument>(&line) {
            Ok(r) => raw.push((line_no, r)),
            Err(e) => {
                if opts.strict {
                    return Err(Error::Malformed {
                        path: path.to_path_buf(),
                        line: line_no,
                        message: e.to_string(),
                    });
                }
                report.malformed.push(LineIssue {
                    line: line_no,
                    message: e.to_string(),
                });
            }
        }
    }
    ingest_documents(raw, opts, path, &mut report).map(|docs| (docs, report))
}

fn ingest_documents(
    raw: Vec<(usize, RawDocument)>,
    opts: &IngestOptions,
    path: &Path,
    report: &mut IngestReport,
) -> Result<DocumentSet> {
    let mut by_id: BTreeMap<String, Document> = BTreeMap::new();
    for (line_no, r) in raw {
        let issue = |message: String| Error::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        if r.doc_id.trim().is_empty() {
            let e = issue("empty doc_id".into());
            if opts.strict {
                return Err(e);
            }
            report.malformed.push(LineIssue {
                line: line_no,
                message: "empty doc_id".into(),
            });
            continue;
        }
        let year = match r.year {
            Some(y) if y > 0 && y <= i32::MAX as i64 => y as i32,
            _ => {
                report.missing_year += 1;
                report.malformed.push(LineIssue {
                    line: line_no,
                    message: format!("{}: missing or non-positive year", r.doc_id),
                });
                if opts.strict {
                    return Err(issue(format!("{}: missing or non-positive year", r.doc_id)));
                }
                continue;
            }
        };
        if r.authors.iter().any(|a| a.author_id.trim().is_empty()) {
            let msg = format!("{}: author with empty author_id", r.doc_id);
            if opts.strict {
                return Err(issue(msg));
            }
            report.malformed.push(LineIssue {
                line: line_no,
                message: msg,
            });
            continue;
        }
        if by_id.contains_key(&r.doc_id) {
            if opts.strict {
                return Err(Error::DuplicateDocument(r.doc_id));
            }
            report.duplicate_ids += 1;
            report.malformed.push(LineIssue {
                line: line_no,
                message: format!("duplicate doc_id {}", r.doc_id),
            });
            continue;
        }

        let mut seen = BTreeSet::new();
        let mut references = Vec::with_capacity(r.references.len());
        for reference in r.references {
            if reference == r.doc_id {
                report.self_references += 1;
            } else if !seen.insert(reference.clone()) {
                report.repeated_references += 1;
            } else {
                references.push(reference);
            }
        }
        if !r.is_source && !references.is_empty() {
            report.non_source_references_dropped += references.len();
            references.clear();
        }
        let doc = Document {
            doc_id: r.doc_id.clone(),
            year,
            title: r.title.unwrap_or_default(),
            abstract_text: r.abstract_text.unwrap_or_default(),
            references,
            authors: r.authors,
            journal_id: r.journal_id.filter(|j| !j.is_empty()),
            is_source: r.is_source,
        };
        by_id.insert(r.doc_id, doc);
    }

    // Absent ids: count distinct citing documents and the earliest citing year.
    let mut absent: BTreeMap<String, (usize, i32)> = BTreeMap::new();
    for doc in by_id.values() {
        for reference in &doc.references {
            if !by_id.contains_key(reference) {
                let entry = absent.entry(reference.clone()).or_insert((0, doc.year));
                entry.0 += 1;
                entry.1 = entry.1.min(doc.year);
            }
        }
    }
    for (id, (count, year)) in &absent {
        if *count >= opts.min_noncite.max(1) {
            report.materialized_non_source += 1;
            by_id.insert(
                id.clone(),
                Document {
                    doc_id: id.clone(),
                    year: *year,
                    title: String::new(),
                    abstract_text: String::new(),
                    references: Vec::new(),
                    authors: Vec::new(),
                    journal_id: None,
                    is_source: false,
                },
            );
        }
    }

    let known: BTreeSet<String> = by_id.keys().cloned().collect();
    for doc in by_id.values_mut() {
        let before = doc.references.len();
        doc.references.retain(|r| known.contains(r));
        report.dangling_references += before - doc.references.len();
    }

    report.documents = by_id.len();
    report.source_documents = by_id.values().filter(|d| d.is_source).count();
    report.empty_text_documents = by_id.values().filter(|d| !d.has_text()).count();
    DocumentSet::new(by_id.into_values().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grant {
    pub grant_id: String,
    pub funder: String,
    #[serde(default)]
    pub funder_country: String,
    pub fiscal_year: i32,
    #[serde(rename = "amount_millions")]
    pub amount: f64,
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
}

impl Grant {
    /// Grants with neither title nor abstract cannot be matched to topics.
    pub fn has_text(&self) -> bool {
        !self.title.trim().is_empty() || !self.abstract_text.trim().is_empty()
    }

    pub fn text(&self) -> String {
        format!("{}\n{}", self.title, self.abstract_text)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GrantReport {
    pub grants: usize,
    pub text_insufficient: usize,
    pub rejected: Vec<LineIssue>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GrantSet {
    grants: Vec<Grant>,
}

impl GrantSet {
    /// Rejects duplicate (grant_id, fiscal_year) rows and negative amounts.
    pub fn new(grants: Vec<Grant>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for g in &grants {
            if g.amount < 0.0 || !g.amount.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "grant {} has invalid amount {}",
                    g.grant_id, g.amount
                )));
            }
            if !seen.insert((g.grant_id.clone(), g.fiscal_year)) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate grant row {} / {}",
                    g.grant_id, g.fiscal_year
                )));
            }
        }
        Ok(GrantSet { grants })
    }

    pub fn len(&self) -> usize {
        self.grants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grants.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Grant> {
        self.grants.iter()
    }

    pub fn as_slice(&self) -> &[Grant] {
        &self.grants
    }

    /// Sum over every ingested row, text-sufficient or not.
    pub fn total_amount(&self) -> f64 {
        self.grants.iter().map(|g| g.amount).sum()
    }

    pub fn total_by_year(&self) -> BTreeMap<i32, f64> {
        let mut out = BTreeMap::new();
        for g in &self.grants {
            *out.entry(g.fiscal_year).or_insert(0.0) += g.amount;
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_jsonl(path, self.grants.iter())
    }
}

pub fn load_grants(path: &Path, strict: bool) -> Result<(GrantSet, GrantReport)> {
    let mut report = GrantReport::default();
    let mut grants = Vec::new();
    let mut seen = BTreeSet::new();
    for (line_no, line) in read_lines(path)? {
        let reject = |report: &mut GrantReport, message: String| -> Result<()> {
            if strict {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    line: line_no,
                    message,
                });
            }
            report.rejected.push(LineIssue {
                line: line_no,
                message,
            });
            Ok(())
        };
        let grant: Grant = match serde_json::from_str(&line) {
            Ok(g) => g,
            Err(e) => {
                reject(&mut report, e.to_string())?;
                continue;
            }
        };
        if grant.amount < 0.0 || !grant.amount.is_finite() {
            reject(
                &mut report,
                format!("grant {}: invalid amount {}", grant.grant_id, grant.amount),
            )?;
            continue;
        }
        if !seen.insert((grant.grant_id.clone(), grant.fiscal_year)) {
            reject(
                &mut report,
                format!(
                    "grant {}: duplicate fiscal year {}",
                    grant.grant_id, grant.fiscal_year
                ),
            )?;
            continue;
        }
        grants.push(grant);
    }
    report.grants = grants.len();
    report.text_insufficient = grants.iter().filter(|g| !g.has_text()).count();
    Ok((GrantSet { grants }, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalMetric {
    pub journal_id: String,
    pub year: i32,
    pub citescore: f64,
}

/// CiteScore lookup by (journal, year).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JournalMetrics {
    by_key: BTreeMap<(String, i32), f64>,
}

impl JournalMetrics {
    pub fn new(rows: Vec<JournalMetric>) -> Result<Self> {
        let mut by_key = BTreeMap::new();
        for r in rows {
            if !(r.citescore >= 0.0) || !r.citescore.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "citescore for {} / {} must be non-negative",
                    r.journal_id, r.year
                )));
            }
            if by_key.insert((r.journal_id.clone(), r.year), r.citescore).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate journal metric {} / {}",
                    r.journal_id, r.year
                )));
            }
        }
        Ok(JournalMetrics { by_key })
    }

    pub fn citescore(&self, journal_id: &str, year: i32) -> Option<f64> {
        self.by_key.get(&(journal_id.to_string(), year)).copied()
    }

    pub fn len(&self) -> usize {
        self.by_key.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_key.is_empty()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let rows: Vec<JournalMetric> = read_csv(path)?;
        JournalMetrics::new(rows)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        for ((journal_id, year), cs) in &self.by_key {
            w.serialize(JournalMetric {
                journal_id: journal_id.clone(),
                year: *year,
                citescore: *cs,
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub const DEFAULT_FIELDS: [&str; 12] = [
    "Biology",
    "Brain Sciences",
    "Chemistry",
    "Computer Science",
    "Disease",
    "Earth Sciences",
    "Engineering",
    "Health Sciences",
    "Humanities",
    "Medicine",
    "Physics",
    "Social Sciences",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct FieldRow {
    journal_id: String,
    field: String,
}

/// Journal to high-level field labels, drawn from a declared field set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMap {
    fields: BTreeSet<String>,
    by_journal: BTreeMap<String, String>,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap::with_fields(DEFAULT_FIELDS.iter().map(|s| s.to_string()))
    }
}

impl FieldMap {
    pub fn with_fields(fields: impl IntoIterator<Item = String>) -> Self {
        FieldMap {
            fields: fields.into_iter().collect(),
            by_journal: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, journal_id: &str, field: &str) -> Result<()> {
        if !self.fields.contains(field) {
            return Err(Error::InvalidParameter(format!(
                "field {field:?} is not in the declared field set"
            )));
        }
        self.by_journal
            .insert(journal_id.to_string(), field.to_string());
        Ok(())
    }

    pub fn field_of(&self, journal_id: &str) -> Option<&str> {
        self.by_journal.get(journal_id).map(String::as_str)
    }

    pub fn fields(&self) -> impl Iterator<Item = &str> {
        self.fields.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.by_journal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_journal.is_empty()
    }

    /// Loads with the default field set.
    pub fn load(path: &Path) -> Result<Self> {
        let mut map = FieldMap::default();
        let rows: Vec<FieldRow> = read_csv(path)?;
        for (i, r) in rows.into_iter().enumerate() {
            map.insert(&r.journal_id, &r.field)
                .map_err(|e| Error::Malformed {
                    path: path.to_path_buf(),
                    line: i + 2,
                    message: e.to_string(),
                })?;
        }
        Ok(map)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        for (journal_id, field) in &self.by_journal {
            w.serialize(FieldRow {
                journal_id: journal_id.clone(),
                field: field.clone(),
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub doc_id: String,
    pub year: i32,
    pub view_count: f64,
}

/// Per-document usage counts, split by the year the views happened.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UsageTable {
    by_doc: HashMap<String, Vec<(i32, f64)>>,
}

impl UsageTable {
    pub fn new(rows: Vec<ViewRecord>) -> Result<Self> {
        let mut by_doc: HashMap<String, Vec<(i32, f64)>> = HashMap::new();
        for r in rows {
            if !(r.view_count >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "negative view count for {}",
                    r.doc_id
                )));
            }
            by_doc.entry(r.doc_id).or_default().push((r.year, r.view_count));
        }
        Ok(UsageTable { by_doc })
    }

    /// Views of `doc_id` recorded in years up to and including `through_year`.
    pub fn views_through(&self, doc_id: &str, through_year: i32) -> f64 {
        self.by_doc
            .get(doc_id)
            .map(|rows| {
                rows.iter()
                    .filter(|(y, _)| *y <= through_year)
                    .map(|(_, v)| v)
                    .sum()
            })
            .unwrap_or(0.0)
    }

    pub fn load(path: &Path) -> Result<Self> {
        UsageTable::new(read_csv(path)?)
    }
}

pub fn save_views(path: &Path, rows: &[ViewRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        rows.push(row.map_err(|e: csv::Error| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?);
    }
    Ok(rows)
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    #[test]
    fn closed_reference_chain() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "d.jsonl",
            r#"{"doc_id":"A","year":2010,"title":"a","references":["B"]}
{"doc_id":"B","year":2009,"title":"b","references":["C"]}
{"doc_id":"C","year":2008,"title":"c"}
"#,
        );
        let (docs, report) = load_corpus(&path, &IngestOptions::default()).unwrap();
        assert_eq!(docs.len(), 3);
        assert_eq!(report.dangling_references, 0);
        assert_eq!(docs.get("A").unwrap().references, vec!["B".to_string()]);
    }

    #[test]
    fn self_reference_is_dropped_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "d.jsonl",
            r#"{"doc_id":"A","year":2010,"title":"a","references":["A"]}"#,
        );
        let (docs, report) = load_corpus(&path, &IngestOptions::default()).unwrap();
        assert!(docs.get("A").unwrap().references.is_empty());
        assert_eq!(report.self_references, 1);
    }

    #[test]
    fn absent_id_cited_twice_is_materialized() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "d.jsonl",
            r#"{"doc_id":"D","year":2011,"title":"d","references":["X9","Y1"]}
{"doc_id":"E","year":2010,"title":"e","references":["X9"]}
"#,
        );
        let (docs, report) = load_corpus(&path, &IngestOptions::default()).unwrap();
        let x9 = docs.get("X9").expect("X9 materialized");
        assert!(!x9.is_source);
        assert_eq!(x9.year, 2010);
        assert!(docs.get("Y1").is_none());
        assert_eq!(docs.get("D").unwrap().references, vec!["X9".to_string()]);
        assert_eq!(report.materialized_non_source, 1);
        assert_eq!(report.dangling_references, 1);
    }

    #[test]
    fn malformed_lines_are_reported_or_fatal_under_strict() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "d.jsonl",
            "{\"doc_id\":\"A\",\"year\":2010}\nnot json\n{\"doc_id\":\"B\"}\n",
        );
        let (docs, report) = load_corpus(&path, &IngestOptions::default()).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(report.malformed.len(), 2);
        assert_eq!(report.malformed[0].line, 2);
        assert_eq!(report.missing_year, 1);

        let strict = IngestOptions {
            strict: true,
            ..Default::default()
        };
        match load_corpus(&path, &strict) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "d.jsonl",
            "{\"doc_id\":\"A\",\"year\":2010}\n{\"doc_id\":\"A\",\"year\":2011}\n",
        );
        let (docs, report) = load_corpus(&path, &IngestOptions::default()).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs.get("A").unwrap().year, 2010);
        assert_eq!(report.duplicate_ids, 1);
        let strict = IngestOptions {
            strict: true,
            ..Default::default()
        };
        assert!(matches!(
            load_corpus(&path, &strict),
            Err(Error::DuplicateDocument(_))
        ));
    }

    #[test]
    fn grants_text_sufficiency_and_fiscal_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            &dir,
            "g.jsonl",
            r#"{"grant_id":"G1","funder":"NSF","funder_country":"US","fiscal_year":2010,"amount_millions":1.5,"title":"Graphene films"}
{"grant_id":"G2","funder":"CDC","funder_country":"US","fiscal_year":2010,"amount_millions":2.0,"title":"","abstract":""}
{"grant_id":"G3","funder":"NIH","funder_country":"US","fiscal_year":2009,"amount_millions":0.5,"title":"x"}
{"grant_id":"G3","funder":"NIH","funder_country":"US","fiscal_year":2010,"amount_millions":0.7,"title":"x"}
{"grant_id":"G4","funder":"NIH","funder_country":"US","fiscal_year":2010,"amount_millions":-1.0,"title":"x"}
"#,
        );
        let (grants, report) = load_grants(&path, false).unwrap();
        assert_eq!(grants.len(), 4);
        assert!(grants.as_slice()[0].has_text());
        assert!(!grants.as_slice()[1].has_text());
        assert_eq!(report.text_insufficient, 1);
        assert_eq!(report.rejected.len(), 1);
        assert!((grants.total_amount() - 4.7).abs() < 1e-12);
        assert!(load_grants(&path, true).is_err());
    }

    #[test]
    fn field_map_rejects_undeclared_labels() {
        let mut map = FieldMap::default();
        map.insert("J1", "Physics").unwrap();
        assert!(map.insert("J2", "Astrology").is_err());
        assert_eq!(map.field_of("J1"), Some("Physics"));
    }

    #[test]
    fn fractional_author_units() {
        let doc = Document {
            doc_id: "A".into(),
            year: 2010,
            title: String::new(),
            abstract_text: String::new(),
            references: vec![],
            authors: vec![
                AuthorRef {
                    author_id: "a1".into(),
                    country: Some("US".into()),
                },
                AuthorRef {
                    author_id: "a2".into(),
                    country: Some("GB".into()),
                },
                AuthorRef {
                    author_id: "a3".into(),
                    country: None,
                },
                AuthorRef {
                    author_id: "a4".into(),
                    country: Some("US".into()),
                },
            ],
            journal_id: None,
            is_source: true,
        };
        assert_eq!(doc.country_author_units("US"), 0.5);
        assert_eq!(doc.located_author_units(), 0.75);
    }
}
