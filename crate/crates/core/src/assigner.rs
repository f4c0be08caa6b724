//! Incremental assignment of new documents and of grants to existing topics.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bm25::{ProfileIndex, Tokenizer};
use crate::clusterer::{Partition, TopicId};
use crate::corpus::{csv_writer, Document, DocumentSet, Grant, GrantSet};
use crate::error::{Error, Result};

pub const DEFAULT_GRANT_THRESHOLD: f64 = 40.0;
pub const DEFAULT_TOP_TOPICS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    ReferenceMajority,
    TextBm25,
    Unassigned,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ReferenceMajority => "REFERENCE_MAJORITY",
            Method::TextBm25 => "TEXT_BM25",
            Method::Unassigned => "UNASSIGNED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Doc,
    Grant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub topic_id: TopicId,
    pub fraction: f64,
    /// BM25 score, or the number of resolved references for reference-majority assignments.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub id: String,
    pub kind: Kind,
    pub fiscal_year: Option<i32>,
    pub method: Method,
    pub allocations: Vec<Allocation>,
    /// Audit note: why a grant was unassigned, or which ineligible topics were skipped.
    pub note: Option<String>,
}

impl Assignment {
    fn unassigned(id: &str, kind: Kind, fiscal_year: Option<i32>, note: impl Into<String>) -> Self {
        Assignment {
            id: id.to_string(),
            kind,
            fiscal_year,
            method: Method::Unassigned,
            allocations: Vec::new(),
            note: Some(note.into()),
        }
    }

    pub fn topic(&self) -> Option<TopicId> {
        match self.allocations.as_slice() {
            [only] => Some(only.topic_id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DocAssignOptions {
    /// Minimum resolved references in the leading topic before references win over text.
    pub min_refs: usize,
}

impl Default for DocAssignOptions {
    fn default() -> Self {
        DocAssignOptions { min_refs: 1 }
    }
}

fn argmax_lowest_id(candidates: impl Iterator<Item = (TopicId, f64)>) -> Option<(TopicId, f64)> {
    candidates.fold(None, |best, (t, s)| match best {
        Some((bt, bs)) if bs > s || (bs == s && bt < t) => Some((bt, bs)),
        _ => Some((t, s)),
    })
}

/// Assigns a document outside the partition to the topic holding most of its
/// references, falling back to its best BM25 topic when references do not
/// decide. Ties in reference counts go to the higher BM25 score among the tied
/// topics, then to the lower topic id.
pub fn assign_document(
    d: &Document,
    p: &Partition,
    idx: &ProfileIndex,
    tokenizer: &Tokenizer,
    opts: &DocAssignOptions,
) -> Assignment {
    let mut counts: BTreeMap<TopicId, usize> = BTreeMap::new();
    for r in &d.references {
        if let Some(t) = p.topic_of(r) {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    let max = counts.values().copied().max().unwrap_or(0);
    if max > 0 && max >= opts.min_refs {
        let tied: Vec<TopicId> = counts
            .iter()
            .filter(|&(_, &c)| c == max)
            .map(|(&t, _)| t)
            .collect();
        let topic = if tied.len() == 1 {
            tied[0]
        } else {
            let scores = idx.score_all(&tokenizer.tokenize(&d.text()));
            let score_of = |t: TopicId| scores.get(t as usize).copied().unwrap_or(0.0);
            argmax_lowest_id(tied.iter().map(|&t| (t, score_of(t))))
                .map(|(t, _)| t)
                .expect("at least one tied topic")
        };
        return Assignment {
            id: d.doc_id.clone(),
            kind: Kind::Doc,
            fiscal_year: None,
            method: Method::ReferenceMajority,
            allocations: vec![Allocation {
                topic_id: topic,
                fraction: 1.0,
                score: max as f64,
            }],
            note: None,
        };
    }
    if d.has_text() && idx.topic_count() > 0 {
        let scores = idx.score_all(&tokenizer.tokenize(&d.text()));
        if let Some((topic, score)) =
            argmax_lowest_id(scores.iter().enumerate().map(|(t, &s)| (t as TopicId, s)))
        {
            if score > 0.0 {
                return Assignment {
                    id: d.doc_id.clone(),
                    kind: Kind::Doc,
                    fiscal_year: None,
                    method: Method::TextBm25,
                    allocations: vec![Allocation {
                        topic_id: topic,
                        fraction: 1.0,
                        score,
                    }],
                    note: None,
                };
            }
        }
        return Assignment::unassigned(&d.doc_id, Kind::Doc, None, "no resolved references and no text match");
    }
    Assignment::unassigned(&d.doc_id, Kind::Doc, None, "no resolved references and no text")
}

/// Assigns each document of `docs` that is not yet in `p` and extends the
/// partition with the results, keeping topic ids stable.
pub fn assign_documents(
    docs: &DocumentSet,
    p: &Partition,
    idx: &ProfileIndex,
    tokenizer: &Tokenizer,
    opts: &DocAssignOptions,
) -> Result<(Vec<Assignment>, Partition)> {
    let pending: Vec<&Document> = docs.iter().filter(|d| !p.contains(&d.doc_id)).collect();
    let assignments: Vec<Assignment> = pending
        .par_iter()
        .map(|d| assign_document(d, p, idx, tokenizer, opts))
        .collect();
    let mut extended = p.clone();
    for a in &assignments {
        extended.insert(a.id.clone(), a.topic())?;
    }
    Ok((assignments, extended))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrantAssignOptions {
    pub threshold: f64,
    pub top_m: usize,
}

impl Default for GrantAssignOptions {
    fn default() -> Self {
        GrantAssignOptions {
            threshold: DEFAULT_GRANT_THRESHOLD,
            top_m: DEFAULT_TOP_TOPICS,
        }
    }
}

/// Distributes a grant over its best-matching eligible topics.
///
/// Ineligible topics are skipped before the top `top_m` are taken. The grant is
/// unassigned unless the best eligible score reaches `threshold`; selected
/// topics receive fractions proportional to their scores.
pub fn assign_grant(
    g: &Grant,
    idx: &ProfileIndex,
    tokenizer: &Tokenizer,
    eligible: &BTreeSet<TopicId>,
    opts: &GrantAssignOptions,
) -> Assignment {
    let year = Some(g.fiscal_year);
    if !g.has_text() {
        return Assignment::unassigned(&g.grant_id, Kind::Grant, year, "insufficient text");
    }
    if eligible.is_empty() {
        return Assignment::unassigned(&g.grant_id, Kind::Grant, year, "no eligible topics");
    }
    let ranked = crate::bm25::rank(idx.score_all(&tokenizer.tokenize(&g.text())), None);
    let mut skipped = Vec::new();
    let mut selected = Vec::new();
    for st in ranked {
        if st.score <= 0.0 || selected.len() == opts.top_m {
            break;
        }
        if eligible.contains(&st.topic_id) {
            selected.push(st);
        } else {
            skipped.push(st.topic_id);
        }
    }
    let best = selected.first().map_or(0.0, |s| s.score);
    if selected.is_empty() || best < opts.threshold {
        return Assignment::unassigned(
            &g.grant_id,
            Kind::Grant,
            year,
            format!("best eligible score {best} below threshold {}", opts.threshold),
        );
    }
    let total: f64 = selected.iter().map(|s| s.score).sum();
    let allocations = selected
        .iter()
        .map(|s| Allocation {
            topic_id: s.topic_id,
            fraction: s.score / total,
            score: s.score,
        })
        .collect();
    Assignment {
        id: g.grant_id.clone(),
        kind: Kind::Grant,
        fiscal_year: year,
        method: Method::TextBm25,
        allocations,
        note: (!skipped.is_empty()).then(|| {
            let ids: Vec<String> = skipped.iter().map(|t| t.to_string()).collect();
            format!("skipped ineligible topics {}", ids.join(" "))
        }),
    }
}

/// Topics with at least some fractional authorship from `country` among
/// member publications of `year`.
pub fn topic_eligibility(docs: &DocumentSet, p: &Partition, year: i32, country: &str) -> BTreeSet<TopicId> {
    let mut units: BTreeMap<TopicId, f64> = BTreeMap::new();
    for d in docs.iter().filter(|d| d.year == year) {
        if let Some(t) = p.topic_of(&d.doc_id) {
            *units.entry(t).or_insert(0.0) += d.country_author_units(country);
        }
    }
    units
        .into_iter()
        .filter(|&(_, u)| u > 0.0)
        .map(|(t, _)| t)
        .collect()
}

/// Assigns every grant, using eligibility for the grant's fiscal year and
/// funder country.
pub fn assign_grants(
    grants: &GrantSet,
    docs: &DocumentSet,
    p: &Partition,
    idx: &ProfileIndex,
    tokenizer: &Tokenizer,
    opts: &GrantAssignOptions,
) -> Vec<Assignment> {
    let mut eligibility: BTreeMap<(i32, &str), BTreeSet<TopicId>> = BTreeMap::new();
    for g in grants.iter() {
        eligibility
            .entry((g.fiscal_year, g.funder_country.as_str()))
            .or_insert_with(|| topic_eligibility(docs, p, g.fiscal_year, &g.funder_country));
    }
    grants
        .as_slice()
        .par_iter()
        .map(|g| {
            let eligible = &eligibility[&(g.fiscal_year, g.funder_country.as_str())];
            assign_grant(g, idx, tokenizer, eligible, opts)
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FundingTable {
    /// (topic, year) → millions.
    pub by_topic_year: BTreeMap<(TopicId, i32), f64>,
    pub assigned_by_year: BTreeMap<i32, f64>,
    pub unassigned_by_year: BTreeMap<i32, f64>,
    pub total: f64,
}

impl FundingTable {
    pub fn assigned_total(&self) -> f64 {
        self.assigned_by_year.values().sum()
    }

    pub fn unassigned_total(&self) -> f64 {
        self.unassigned_by_year.values().sum()
    }

    /// Funding per topic summed over `years` (inclusive range).
    pub fn period_totals(&self, years: std::ops::RangeInclusive<i32>) -> BTreeMap<TopicId, f64> {
        let mut out = BTreeMap::new();
        for (&(t, y), &amount) in &self.by_topic_year {
            if years.contains(&y) {
                *out.entry(t).or_insert(0.0) += amount;
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["topic_id", "year", "amount_millions"])?;
        for (&(t, y), &amount) in &self.by_topic_year {
            w.write_record([t.to_string(), y.to_string(), amount.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            topic_id: TopicId,
            year: i32,
            amount_millions: f64,
        }
        let rows: Vec<Row> = crate::corpus::read_csv(path)?;
        let mut table = FundingTable::default();
        for r in rows {
            *table.by_topic_year.entry((r.topic_id, r.year)).or_insert(0.0) += r.amount_millions;
            *table.assigned_by_year.entry(r.year).or_insert(0.0) += r.amount_millions;
            table.total += r.amount_millions;
        }
        Ok(table)
    }
}

/// Sums allocated fractions of grant amounts by (topic, fiscal year). Grants
/// without an allocation count as unassigned money.
pub fn allocate_funding(grants: &GrantSet, assignments: &[Assignment]) -> FundingTable {
    let by_key: BTreeMap<(&str, i32), &Assignment> = assignments
        .iter()
        .filter(|a| a.kind == Kind::Grant)
        .filter_map(|a| a.fiscal_year.map(|y| ((a.id.as_str(), y), a)))
        .collect();
    let mut table = FundingTable::default();
    for g in grants.iter() {
        table.total += g.amount;
        match by_key.get(&(g.grant_id.as_str(), g.fiscal_year)) {
            Some(a) if !a.allocations.is_empty() => {
                for alloc in &a.allocations {
                    *table
                        .by_topic_year
                        .entry((alloc.topic_id, g.fiscal_year))
                        .or_insert(0.0) += alloc.fraction * g.amount;
                }
                *table.assigned_by_year.entry(g.fiscal_year).or_insert(0.0) += g.amount;
            }
            _ => {
                *table.unassigned_by_year.entry(g.fiscal_year).or_insert(0.0) += g.amount;
            }
        }
    }
    table
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunderSummary {
    pub funder: String,
    pub grants: usize,
    pub total: f64,
    pub with_text: f64,
    /// Share of the funder's money on grants with usable text, in percent.
    pub percent_with_text: f64,
    pub assigned: f64,
    pub by_year: BTreeMap<i32, f64>,
}

/// Per-funder totals in the shape of a funding-source overview table.
pub fn funder_summary(grants: &GrantSet, assignments: &[Assignment]) -> Vec<FunderSummary> {
    let assigned: BTreeSet<(&str, i32)> = assignments
        .iter()
        .filter(|a| a.kind == Kind::Grant && !a.allocations.is_empty())
        .filter_map(|a| a.fiscal_year.map(|y| (a.id.as_str(), y)))
        .collect();
    let mut by_funder: BTreeMap<&str, FunderSummary> = BTreeMap::new();
    let mut ids: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for g in grants.iter() {
        let s = by_funder.entry(g.funder.as_str()).or_insert_with(|| FunderSummary {
            funder: g.funder.clone(),
            grants: 0,
            total: 0.0,
            with_text: 0.0,
            percent_with_text: 0.0,
            assigned: 0.0,
            by_year: BTreeMap::new(),
        });
        ids.entry(g.funder.as_str()).or_default().insert(g.grant_id.as_str());
        s.total += g.amount;
        if g.has_text() {
            s.with_text += g.amount;
        }
        if assigned.contains(&(g.grant_id.as_str(), g.fiscal_year)) {
            s.assigned += g.amount;
        }
        *s.by_year.entry(g.fiscal_year).or_insert(0.0) += g.amount;
    }
    by_funder
        .into_iter()
        .map(|(funder, mut s)| {
            s.grants = ids[funder].len();
            s.percent_with_text = if s.total > 0.0 {
                100.0 * s.with_text / s.total
            } else {
                0.0
            };
            s
        })
        .collect()
}

/// Writes `id,kind,method,topic_id,fraction,score,fiscal_year`, one row per
/// allocation and a single row with empty topic for unassigned items.
pub fn save_assignments(path: &Path, assignments: &[Assignment]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["id", "kind", "method", "topic_id", "fraction", "score", "fiscal_year"])?;
    for a in assignments {
        let kind = match a.kind {
            Kind::Doc => "doc",
            Kind::Grant => "grant",
        };
        let year = a.fiscal_year.map(|y| y.to_string()).unwrap_or_default();
        if a.allocations.is_empty() {
            w.write_record([a.id.as_str(), kind, a.method.as_str(), "", "", "", year.as_str()])?;
        }
        for alloc in &a.allocations {
            w.write_record([
                a.id.clone(),
                kind.to_string(),
                a.method.as_str().to_string(),
                alloc.topic_id.to_string(),
                alloc.fraction.to_string(),
                alloc.score.to_string(),
                year.clone(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads back grant assignments written by [`save_assignments`].
pub fn load_assignments(path: &Path) -> Result<Vec<Assignment>> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        kind: Kind,
        method: Method,
        topic_id: Option<TopicId>,
        fraction: Option<f64>,
        score: Option<f64>,
        fiscal_year: Option<i32>,
    }
    let rows: Vec<Row> = crate::corpus::read_csv(path)?;
    let mut out: Vec<Assignment> = Vec::new();
    for r in rows {
        let same = out
            .last()
            .is_some_and(|a| a.id == r.id && a.kind == r.kind && a.fiscal_year == r.fiscal_year);
        if !same {
            out.push(Assignment {
                id: r.id.clone(),
                kind: r.kind,
                fiscal_year: r.fiscal_year,
                method: r.method,
                allocations: Vec::new(),
                note: None,
            });
        }
        if let (Some(topic_id), Some(fraction), Some(score)) = (r.topic_id, r.fraction, r.score) {
            out.last_mut().expect("pushed above").allocations.push(Allocation {
                topic_id,
                fraction,
                score,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AuthorRef;
    use std::collections::BTreeMap;

    fn index(profiles: &[&[(&str, u64)]]) -> ProfileIndex {
        ProfileIndex::from_counts(
            profiles
                .iter()
                .map(|p| p.iter().map(|&(t, f)| (t.to_string(), f)).collect::<BTreeMap<_, _>>())
                .collect(),
            Default::default(),
        )
    }

    fn doc(id: &str, year: i32, text: &str, refs: &[&str]) -> Document {
        Document {
            doc_id: id.into(),
            year,
            title: text.into(),
            abstract_text: String::new(),
            references: refs.iter().map(|s| s.to_string()).collect(),
            authors: vec![],
            journal_id: None,
            is_source: true,
        }
    }

    fn partition(groups: &[(&str, u32)]) -> Partition {
        Partition::from_groups(groups.iter().map(|&(d, g)| (d.to_string(), Some(g))))
    }

    #[test]
    fn reference_majority_wins() {
        // topic 0: a1..a3, topic 1: b1
        let p = partition(&[("a1", 0), ("a2", 0), ("a3", 0), ("b1", 1)]);
        let idx = index(&[&[("alpha", 5)], &[("beta", 5)]]);
        let d = doc("new", 2013, "beta beta beta", &["a1", "a2", "a3", "b1"]);
        let a = assign_document(&d, &p, &idx, &Tokenizer::default(), &Default::default());
        assert_eq!(a.method, Method::ReferenceMajority);
        assert_eq!(a.topic(), p.topic_of("a1"));
    }

    #[test]
    fn text_fallback_without_references() {
        let p = partition(&[("a1", 0), ("a2", 0), ("b1", 1)]);
        let idx = index(&[&[("alpha", 5)], &[("beta", 5), ("gamma", 2)]]);
        let d = doc("new", 2013, "beta gamma", &[]);
        let a = assign_document(&d, &p, &idx, &Tokenizer::default(), &Default::default());
        assert_eq!(a.method, Method::TextBm25);
        assert_eq!(a.topic(), Some(1));

        let silent = doc("silent", 2013, "", &[]);
        let a = assign_document(&silent, &p, &idx, &Tokenizer::default(), &Default::default());
        assert_eq!(a.method, Method::Unassigned);
    }

    #[test]
    fn grant_fractions_follow_relative_scores() {
        let scores = [50.0, 40.0, 30.0, 20.0, 10.0];
        let total: f64 = scores.iter().sum();
        let fractions: Vec<f64> = scores.iter().map(|s| s / total).collect();
        let expected = [1.0 / 3.0, 4.0 / 15.0, 1.0 / 5.0, 2.0 / 15.0, 1.0 / 15.0];
        for (f, e) in fractions.iter().zip(expected) {
            assert!((f - e).abs() < 1e-15);
        }
    }

    #[test]
    fn grant_below_threshold_is_unassigned() {
        let idx = index(&[&[("alpha", 5)], &[("beta", 5)]]);
        let g = Grant {
            grant_id: "G".into(),
            funder: "NSF".into(),
            funder_country: "US".into(),
            fiscal_year: 2010,
            amount: 1.0,
            title: "alpha".into(),
            abstract_text: String::new(),
        };
        let eligible = BTreeSet::from([0, 1]);
        let best = idx.score_all(&["alpha"])[0];
        let strict = GrantAssignOptions {
            threshold: best + 1e-9,
            top_m: 5,
        };
        let a = assign_grant(&g, &idx, &Tokenizer::default(), &eligible, &strict);
        assert_eq!(a.method, Method::Unassigned);
        let at = GrantAssignOptions {
            threshold: best,
            top_m: 5,
        };
        let a = assign_grant(&g, &idx, &Tokenizer::default(), &eligible, &at);
        assert_eq!(a.allocations.len(), 1);
        assert_eq!(a.allocations[0].fraction, 1.0);

        let none = assign_grant(&g, &idx, &Tokenizer::default(), &BTreeSet::new(), &at);
        assert_eq!(none.method, Method::Unassigned);
        assert_eq!(none.note.as_deref(), Some("no eligible topics"));
    }

    #[test]
    fn eligibility_by_year_and_country() {
        let mut d1 = doc("d1", 2010, "", &[]);
        d1.authors = vec![
            AuthorRef {
                author_id: "x".into(),
                country: Some("US".into()),
            },
            AuthorRef {
                author_id: "y".into(),
                country: Some("GB".into()),
            },
        ];
        let mut d2 = doc("d2", 2009, "", &[]);
        d2.authors = vec![AuthorRef {
            author_id: "z".into(),
            country: Some("US".into()),
        }];
        let docs = DocumentSet::new(vec![d1, d2]).unwrap();
        let p = partition(&[("d1", 0), ("d2", 1)]);
        let t1 = p.topic_of("d1").unwrap();
        assert_eq!(topic_eligibility(&docs, &p, 2010, "US"), BTreeSet::from([t1]));
        assert!(topic_eligibility(&docs, &p, 2010, "FR").is_empty());
    }

    #[test]
    fn allocation_sums() {
        let grants = GrantSet::new(vec![Grant {
            grant_id: "G".into(),
            funder: "NSF".into(),
            funder_country: "US".into(),
            fiscal_year: 2010,
            amount: 3.0,
            title: "x".into(),
            abstract_text: String::new(),
        }])
        .unwrap();
        let a = Assignment {
            id: "G".into(),
            kind: Kind::Grant,
            fiscal_year: Some(2010),
            method: Method::TextBm25,
            allocations: vec![
                Allocation {
                    topic_id: 0,
                    fraction: 0.5,
                    score: 50.0,
                },
                Allocation {
                    topic_id: 1,
                    fraction: 0.5,
                    score: 50.0,
                },
            ],
            note: None,
        };
        let table = allocate_funding(&grants, &[a]);
        assert_eq!(table.by_topic_year[&(0, 2010)], 1.5);
        assert_eq!(table.by_topic_year[&(1, 2010)], 1.5);

        let empty = allocate_funding(&grants, &[]);
        assert!(empty.by_topic_year.is_empty());
        assert_eq!(empty.unassigned_total(), 3.0);
    }

    #[test]
    fn assignments_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("assignments.csv");
        let rows = vec![
            Assignment {
                id: "G".into(),
                kind: Kind::Grant,
                fiscal_year: Some(2011),
                method: Method::TextBm25,
                allocations: vec![
                    Allocation {
                        topic_id: 2,
                        fraction: 0.75,
                        score: 60.0,
                    },
                    Allocation {
                        topic_id: 0,
                        fraction: 0.25,
                        score: 20.0,
                    },
                ],
                note: None,
            },
            Assignment::unassigned("H", Kind::Grant, Some(2011), "x"),
        ];
        save_assignments(&path, &rows).unwrap();
        let back = load_assignments(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].allocations, rows[0].allocations);
        assert_eq!(back[1].method, Method::Unassigned);
    }
}
