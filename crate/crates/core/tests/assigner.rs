use std::collections::BTreeMap;

use topicforge_core::assigner::{self, DocAssignOptions, GrantAssignOptions, Method};
use topicforge_core::bm25::{self, Bm25Params, Tokenizer};
use topicforge_core::corpus::{Document, DocumentSet, Grant};
use topicforge_core::synthetic::{self, CorpusSpec};

fn corpus_run(grants: usize) -> (synthetic::SyntheticCorpus, Vec<assigner::Assignment>) {
    let spec = CorpusSpec { grants, ..CorpusSpec::default() };
    let corpus = synthetic::synthetic_corpus(23, &spec).unwrap();
    let docs = corpus.document_set().unwrap();
    let p = corpus.planted_partition().unwrap();
    let tok = Tokenizer::default();
    let (idx, _) = bm25::build_profiles(&docs, &p, &tok, Bm25Params::default(), None);
    let a = assigner::assign_grants(&corpus.grant_set().unwrap(), &docs, &p, &idx, &tok, &GrantAssignOptions::default());
    (corpus, a)
}

#[test]
fn funder_summary_matches_spreadsheet() {
    let (corpus, assignments) = corpus_run(300);
    let grants = corpus.grant_set().unwrap();
    let summary = assigner::funder_summary(&grants, &assignments);
    let assigned: Vec<&str> = assignments.iter().filter(|a| !a.allocations.is_empty()).map(|a| a.id.as_str()).collect();

    let mut sheet: BTreeMap<&str, (usize, f64, f64, f64)> = BTreeMap::new();
    for g in &corpus.grants {
        let row = sheet.entry(&g.funder).or_default();
        row.0 += 1;
        row.1 += g.amount;
        if !g.title.trim().is_empty() || !g.abstract_text.trim().is_empty() {
            row.2 += g.amount;
        }
        if assigned.contains(&g.grant_id.as_str()) {
            row.3 += g.amount;
        }
    }
    assert_eq!(summary.len(), sheet.len());
    for s in &summary {
        let (n, total, text, done) = sheet[s.funder.as_str()];
        assert_eq!(s.grants, n);
        assert!((s.total - total).abs() < 1e-9);
        assert!((s.with_text - text).abs() < 1e-9);
        assert!((s.assigned - done).abs() < 1e-9);
        assert!((s.percent_with_text - 100.0 * text / total).abs() < 1e-9);
        assert!((s.by_year.values().sum::<f64>() - total).abs() < 1e-9);
    }
}

#[test]
fn grants_mostly_land_on_their_generating_topic() {
    let (corpus, assignments) = corpus_run(200);
    // generator labels → canonical partition ids
    let p = corpus.planted_partition().unwrap();
    let canonical: BTreeMap<u32, u32> = corpus.truth.iter().map(|(d, &t)| (t, p.topic_of(d).unwrap())).collect();
    let mut hits = 0;
    let mut judged = 0;
    for a in &assignments {
        if let (Some(truth), Some(first)) = (corpus.grant_truth.get(&a.id), a.allocations.first()) {
            judged += 1;
            hits += (first.topic_id == canonical[truth]) as usize;
        }
    }
    assert!(judged > 100);
    assert!(hits as f64 / judged as f64 > 0.9, "{hits}/{judged}");
}

#[test]
fn textless_grant_is_unassigned() {
    let (corpus, assignments) = corpus_run(200);
    for g in corpus.grants.iter().filter(|g| !g.has_text()) {
        let a = assignments.iter().find(|a| a.id == g.grant_id).unwrap();
        assert_eq!(a.method, Method::Unassigned);
        assert_eq!(a.note.as_deref(), Some("insufficient text"));
    }
}

#[test]
fn ineligible_top_topic_is_skipped_and_refilled() {
    let counts: Vec<BTreeMap<String, u64>> = vec![
        [("alpha", 9)].iter().map(|&(t, f)| (t.to_string(), f)).collect(),
        [("alpha", 2), ("beta", 5)].iter().map(|&(t, f)| (t.to_string(), f)).collect(),
        [("beta", 3), ("gamma", 1)].iter().map(|&(t, f)| (t.to_string(), f)).collect(),
    ];
    let idx = bm25::ProfileIndex::from_counts(counts, Bm25Params::default());
    let g = Grant {
        grant_id: "g1".into(),
        funder: "NSF".into(),
        funder_country: "US".into(),
        fiscal_year: 2010,
        amount: 1.0,
        title: "alpha beta".into(),
        abstract_text: String::new(),
    };
    let eligible = [1, 2].into_iter().collect();
    let opts = GrantAssignOptions { threshold: 0.0, top_m: 2 };
    let a = assigner::assign_grant(&g, &idx, &Tokenizer::default(), &eligible, &opts);
    let topics: Vec<u32> = a.allocations.iter().map(|x| x.topic_id).collect();
    assert_eq!(topics, vec![1, 2]);
    assert!(a.note.unwrap().contains('0'));
    let sum: f64 = a.allocations.iter().map(|x| x.fraction).sum();
    assert!((sum - 1.0).abs() < 1e-12);

    let strict = GrantAssignOptions { threshold: 1e6, top_m: 2 };
    assert_eq!(assigner::assign_grant(&g, &idx, &Tokenizer::default(), &eligible, &strict).method, Method::Unassigned);
}

#[test]
fn new_document_follows_its_references() {
    let corpus = synthetic::synthetic_corpus(4, &CorpusSpec { topics: 3, docs_per_topic: 20, grants: 0, ..CorpusSpec::default() })
        .unwrap();
    let docs = corpus.document_set().unwrap();
    let p = corpus.planted_partition().unwrap();
    let tok = Tokenizer::default();
    let (idx, _) = bm25::build_profiles(&docs, &p, &tok, Bm25Params::default(), None);
    let members: Vec<&str> = docs.iter().filter(|d| p.topic_of(&d.doc_id) == Some(2)).map(|d| d.doc_id.as_str()).take(3).collect();
    let newcomer = Document {
        doc_id: "NEW".into(),
        year: 2014,
        title: String::new(),
        abstract_text: String::new(),
        references: members.iter().map(|s| s.to_string()).collect(),
        authors: Vec::new(),
        journal_id: None,
        is_source: true,
    };
    let a = assigner::assign_document(&newcomer, &p, &idx, &tok, &DocAssignOptions::default());
    assert_eq!(a.method, Method::ReferenceMajority);
    assert_eq!(a.topic(), Some(2));

    let mut all = docs.into_vec();
    all.push(newcomer);
    let extended_docs = DocumentSet::new(all).unwrap();
    let (assignments, extended) = assigner::assign_documents(&extended_docs, &p, &idx, &tok, &DocAssignOptions::default()).unwrap();
    assert_eq!(assignments.len(), 1);
    assert_eq!(extended.topic_of("NEW"), Some(2));
    assert_eq!(extended.topic_count(), p.topic_count());
}
