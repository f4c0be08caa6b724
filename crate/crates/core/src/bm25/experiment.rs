use serde::{Deserialize, Serialize};

use super::{ProfileIndex, Tokenizer};
use crate::clusterer::{Partition, TopicId};
use crate::corpus::DocumentSet;

/// Lower edges of the default score bands; the last band is open-ended.
pub const DEFAULT_BAND_EDGES: &[f64] = &[0.0, 5.0, 10.0, 20.0, 40.0, 80.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyBand {
    pub lower: f64,
    /// `None` for the open-ended top band.
    pub upper: Option<f64>,
    pub documents: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfAssignmentTable {
    pub bands: Vec<AccuracyBand>,
    pub documents: usize,
    pub correct: usize,
    pub accuracy: Option<f64>,
}

/// Scores every member document with text against all topics and records
/// whether the best-scoring topic is the one it belongs to, bucketed by the
/// best score. Ties go to the lowest topic id.
pub fn self_assignment_experiment(
    docs: &DocumentSet,
    p: &Partition,
    idx: &ProfileIndex,
    tokenizer: &Tokenizer,
    band_edges: &[f64],
) -> SelfAssignmentTable {
    let mut bands: Vec<AccuracyBand> = band_edges
        .iter()
        .enumerate()
        .map(|(i, &lower)| AccuracyBand {
            lower,
            upper: band_edges.get(i + 1).copied(),
            documents: 0,
            correct: 0,
            accuracy: None,
        })
        .collect();

    let (mut documents, mut correct) = (0, 0);
    if idx.topic_count() > 0 {
        for doc in docs {
            let Some(topic) = p.topic_of(&doc.doc_id) else {
                continue;
            };
            if !doc.has_text() {
                continue;
            }
            let scores = idx.score_all(&tokenizer.tokenize(&doc.text()));
            let (best, best_score) = scores
                .iter()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |acc, (t, &s)| {
                    if s > acc.1 {
                        (t, s)
                    } else {
                        acc
                    }
                });
            let hit = best as TopicId == topic;
            documents += 1;
            correct += hit as usize;
            if let Some(band) = bands
                .iter_mut()
                .rev()
                .find(|b| best_score >= b.lower)
            {
                band.documents += 1;
                band.correct += hit as usize;
            }
        }
    }
    for b in &mut bands {
        b.accuracy = (b.documents > 0).then(|| b.correct as f64 / b.documents as f64);
    }
    SelfAssignmentTable {
        bands,
        documents,
        correct,
        accuracy: (documents > 0).then(|| correct as f64 / documents as f64),
    }
}
