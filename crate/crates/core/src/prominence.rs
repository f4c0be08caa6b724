//! Per-topic yearly indicators and the composite prominence score.
//!
//! For topic `j` in year `n`:
//!
//! ```text
//! P_j = w_c · z(ln(c_j + 1)) + w_v · z(ln(v_j + 1)) + w_cs · z(ln(cs_j + 1))
//! ```
//!
//! with `c` the citations to members published in `n − 1` and `n`, `v` the
//! views of the same articles, `cs` the mean journal CiteScore of year-`n`
//! members, and `z` the population z-score over all topics of the year.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::analytics::correlation_matrix;
use crate::clusterer::{Partition, TopicId};
use crate::corpus::{csv_writer, DocumentSet, JournalMetrics, UsageTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicYearStats {
    pub topic_id: TopicId,
    pub year: i32,
    pub citations: f64,
    pub views: f64,
    pub citescore: f64,
    pub authors_per_paper: f64,
    pub vitality: f64,
    /// Fractional author-units of authors with a known country.
    pub authors_frac: f64,
    /// Fractional author-units from the configured country.
    pub country_authors_frac: f64,
    pub pubs: usize,
    /// Set when the topic has no publications in the year.
    pub empty: bool,
}

/// `1 / (1 + mean reference age)`; zero when there are no references.
pub fn vitality(reference_ages: &[f64]) -> f64 {
    if reference_ages.is_empty() {
        return 0.0;
    }
    let mean = reference_ages.iter().sum::<f64>() / reference_ages.len() as f64;
    1.0 / (1.0 + mean)
}

/// Yearly indicators for every topic of `p`.
///
/// Citations are counted only from corpus documents published up to `year`;
/// views only from usage records up to `year`.
pub fn compute_stats(
    docs: &DocumentSet,
    p: &Partition,
    views: &UsageTable,
    metrics: &JournalMetrics,
    year: i32,
    country: &str,
) -> Vec<TopicYearStats> {
    let n = p.topic_count();
    let in_window = |y: i32| y == year || y == year - 1;
    let mut citations = vec![0.0; n];
    let mut view_sum = vec![0.0; n];
    let mut cs_sum = vec![0.0; n];
    let mut cs_count = vec![0usize; n];
    let mut author_sum = vec![0.0; n];
    let mut ages: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut frac = vec![0.0; n];
    let mut country_frac = vec![0.0; n];
    let mut pubs = vec![0usize; n];

    for d in docs {
        if d.year <= year {
            for r in &d.references {
                let Some(cited) = docs.get(r) else { continue };
                if let Some(t) = p.topic_of(r) {
                    if in_window(cited.year) {
                        citations[t as usize] += 1.0;
                    }
                }
            }
        }
        let Some(t) = p.topic_of(&d.doc_id) else {
            continue;
        };
        let t = t as usize;
        if in_window(d.year) {
            view_sum[t] += views.views_through(&d.doc_id, year);
        }
        if d.year != year {
            continue;
        }
        pubs[t] += 1;
        author_sum[t] += d.authors.len() as f64;
        frac[t] += d.located_author_units();
        country_frac[t] += d.country_author_units(country);
        if let Some(cs) = d.journal_id.as_deref().and_then(|j| metrics.citescore(j, year)) {
            cs_sum[t] += cs;
            cs_count[t] += 1;
        }
        for r in &d.references {
            if let Some(cited) = docs.get(r) {
                ages[t].push(f64::from((d.year - cited.year).max(0)));
            }
        }
    }

    (0..n)
        .map(|t| TopicYearStats {
            topic_id: t as TopicId,
            year,
            citations: citations[t],
            views: view_sum[t],
            citescore: if cs_count[t] > 0 {
                cs_sum[t] / cs_count[t] as f64
            } else {
                0.0
            },
            authors_per_paper: if pubs[t] > 0 {
                author_sum[t] / pubs[t] as f64
            } else {
                0.0
            },
            vitality: vitality(&ages[t]),
            authors_frac: frac[t],
            country_authors_frac: country_frac[t],
            pubs: pubs[t],
            empty: pubs[t] == 0,
        })
        .collect()
}

/// `ln(x + 1)` for non-negative counts.
pub fn log_transform(x: f64) -> Result<f64> {
    if x >= 0.0 {
        Ok(x.ln_1p())
    } else {
        Err(Error::InvalidParameter(format!(
            "log transform needs a non-negative value, got {x}"
        )))
    }
}

fn mean_and_population_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Population z-scores.
pub fn standardize(values: &[f64], name: &str) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "standardizing {name} needs at least two values"
        )));
    }
    let (mean, sd) = mean_and_population_sd(values);
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return Err(Error::ConstantVariable(name.to_string()));
    }
    Ok(values.iter().map(|v| (v - mean) / sd).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProminenceWeights {
    pub citations: f64,
    pub views: f64,
    pub citescore: f64,
}

impl Default for ProminenceWeights {
    fn default() -> Self {
        ProminenceWeights {
            citations: 0.495,
            views: 0.391,
            citescore: 0.114,
        }
    }
}

impl ProminenceWeights {
    pub fn sum(&self) -> f64 {
        self.citations + self.views + self.citescore
    }

    /// Parses `"0.495,0.391,0.114"`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidParameter(format!("weights {text:?}: {e}")))?;
        match parts.as_slice() {
            &[citations, views, citescore] => Ok(ProminenceWeights {
                citations,
                views,
                citescore,
            }),
            _ => Err(Error::InvalidParameter(format!(
                "expected three comma-separated weights, got {text:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProminenceScore {
    pub topic_id: TopicId,
    pub year: i32,
    pub p: f64,
    pub z_citations: f64,
    pub z_views: f64,
    pub z_citescore: f64,
    pub percentile: f64,
}

/// Share of the population strictly below each value, scaled to 0..=100.
pub fn percentiles(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n <= 1 {
        return vec![100.0; n];
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    values
        .iter()
        .map(|v| {
            let below = sorted.partition_point(|x| x < v);
            100.0 * below as f64 / (n - 1) as f64
        })
        .collect()
}

/// Composite score from already log-transformed columns.
pub fn prominence_from_logs(
    topics: &[(TopicId, i32)],
    log_citations: &[f64],
    log_views: &[f64],
    log_citescore: &[f64],
    w: &ProminenceWeights,
) -> Result<Vec<ProminenceScore>> {
    let zc = standardize(log_citations, "citations")?;
    let zv = standardize(log_views, "views")?;
    let zcs = standardize(log_citescore, "citescore")?;
    let p: Vec<f64> = (0..topics.len())
        .map(|i| w.citations * zc[i] + w.views * zv[i] + w.citescore * zcs[i])
        .collect();
    let pct = percentiles(&p);
    Ok(topics
        .iter()
        .enumerate()
        .map(|(i, &(topic_id, year))| ProminenceScore {
            topic_id,
            year,
            p: p[i],
            z_citations: zc[i],
            z_views: zv[i],
            z_citescore: zcs[i],
            percentile: pct[i],
        })
        .collect())
}

/// Prominence of every topic in one year's stats.
pub fn prominence(stats: &[TopicYearStats], w: &ProminenceWeights) -> Result<Vec<ProminenceScore>> {
    let logs = |f: fn(&TopicYearStats) -> f64| -> Result<Vec<f64>> {
        stats.iter().map(|s| log_transform(f(s))).collect()
    };
    let topics: Vec<(TopicId, i32)> = stats.iter().map(|s| (s.topic_id, s.year)).collect();
    prominence_from_logs(
        &topics,
        &logs(|s| s.citations)?,
        &logs(|s| s.views)?,
        &logs(|s| s.citescore)?,
        w,
    )
}

pub const CANDIDATE_NAMES: [&str; 5] = ["L:Citations", "L:Views", "L:CiteScore", "L:Authors", "Vitality"];

/// Rows of the five candidate variables: four log-transformed counts and raw vitality.
pub fn candidate_matrix(stats: &[TopicYearStats]) -> Vec<[f64; 5]> {
    stats
        .iter()
        .map(|s| {
            [
                s.citations.ln_1p(),
                s.views.ln_1p(),
                s.citescore.ln_1p(),
                s.authors_per_paper.ln_1p(),
                s.vitality,
            ]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorAnalysis {
    pub names: Vec<String>,
    pub correlation: Vec<Vec<f64>>,
    /// Eigenvalues of the correlation matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// `loadings[v][f]`: loading of variable `v` on factor `f` (at most two factors).
    pub loadings: Vec<Vec<f64>>,
    pub rank: usize,
    pub rank_deficient: bool,
    /// Indices into `names` of the variables in the composite.
    pub subset: Vec<usize>,
    /// First-factor loadings of the subset's own analysis, normalized to sum to one.
    pub coefficients: Vec<f64>,
}

impl FactorAnalysis {
    /// Coefficients of a citations/views/citescore subset as composite weights.
    pub fn weights(&self) -> Option<ProminenceWeights> {
        match self.coefficients.as_slice() {
            &[citations, views, citescore] => Some(ProminenceWeights {
                citations,
                views,
                citescore,
            }),
            _ => None,
        }
    }
}

struct Factors {
    eigenvalues: Vec<f64>,
    loadings: Vec<Vec<f64>>,
    rank: usize,
}

/// Principal factors of a correlation matrix. Each factor's sign is chosen so
/// most of its loadings are positive.
fn principal_factors(corr: &[Vec<f64>], max_factors: usize) -> Factors {
    let k = corr.len();
    let m = DMatrix::from_fn(k, k, |i, j| corr[i][j]);
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let tol = 1e-10 * k as f64;
    let rank = eigenvalues.iter().filter(|&&l| l > tol).count();
    let n_factors = max_factors.min(rank);
    let mut loadings = vec![vec![0.0; n_factors]; k];
    for (f, &col) in order.iter().take(n_factors).enumerate() {
        let scale = eigenvalues[f].max(0.0).sqrt();
        let v: Vec<f64> = (0..k).map(|i| eig.eigenvectors[(i, col)] * scale).collect();
        let positive = v.iter().filter(|&&x| x > 0.0).count();
        let negative = v.iter().filter(|&&x| x < 0.0).count();
        let flip = negative > positive || (negative == positive && v.iter().sum::<f64>() < 0.0);
        for i in 0..k {
            loadings[i][f] = if flip { -v[i] } else { v[i] };
        }
    }
    Factors {
        eigenvalues,
        loadings,
        rank,
    }
}

/// Factor analysis of the candidate variables.
///
/// Reports the correlation matrix and the first two principal factors of all
/// columns. The composite coefficients come from a separate analysis of only
/// the `subset` columns: their first-factor loadings normalized to sum to one.
pub fn derive_weights(rows: &[Vec<f64>], names: &[&str], subset: &[usize]) -> Result<FactorAnalysis> {
    if rows.len() < 10 {
        return Err(Error::TooFewObservations {
            needed: 9,
            got: rows.len(),
        });
    }
    let k = names.len();
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::InvalidParameter("every row needs one value per variable".into()));
    }
    if subset.is_empty() || subset.iter().any(|&i| i >= k) {
        return Err(Error::InvalidParameter("subset indices out of range".into()));
    }
    let columns: Vec<(String, Vec<f64>)> = (0..k)
        .map(|j| (names[j].to_string(), rows.iter().map(|r| r[j]).collect()))
        .collect();
    let correlation = correlation_matrix(&columns)?;
    let all = principal_factors(&correlation, 2);

    let sub_corr: Vec<Vec<f64>> = subset
        .iter()
        .map(|&i| subset.iter().map(|&j| correlation[i][j]).collect())
        .collect();
    let sub = principal_factors(&sub_corr, 1);
    let first: Vec<f64> = sub.loadings.iter().map(|l| l.first().copied().unwrap_or(0.0)).collect();
    let total: f64 = first.iter().sum();
    if !(total.abs() > 1e-12) {
        return Err(Error::InvalidParameter(
            "first-factor loadings of the subset sum to zero".into(),
        ));
    }
    Ok(FactorAnalysis {
        names: names.iter().map(|s| s.to_string()).collect(),
        correlation,
        eigenvalues: all.eigenvalues,
        loadings: all.loadings,
        rank: all.rank,
        rank_deficient: all.rank < k,
        subset: subset.to_vec(),
        coefficients: first.iter().map(|l| l / total).collect(),
    })
}

/// Writes `topic_id,year,c,v,cs,authors_per_paper,vitality,P,percentile`.
pub fn save_prominence(path: &Path, stats: &[TopicYearStats], scores: &[ProminenceScore]) -> Result<()> {
    let by_topic: BTreeMap<(TopicId, i32), &ProminenceScore> =
        scores.iter().map(|s| ((s.topic_id, s.year), s)).collect();
    let mut w = csv_writer(path)?;
    w.write_record([
        "topic_id",
        "year",
        "c",
        "v",
        "cs",
        "authors_per_paper",
        "vitality",
        "P",
        "percentile",
    ])?;
    for s in stats {
        let Some(score) = by_topic.get(&(s.topic_id, s.year)) else {
            continue;
        };
        w.write_record([
            s.topic_id.to_string(),
            s.year.to_string(),
            s.citations.to_string(),
            s.views.to_string(),
            s.citescore.to_string(),
            s.authors_per_paper.to_string(),
            s.vitality.to_string(),
            score.p.to_string(),
            score.percentile.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProminenceRow {
    pub topic_id: TopicId,
    pub year: i32,
    pub c: f64,
    pub v: f64,
    pub cs: f64,
    pub authors_per_paper: f64,
    pub vitality: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub percentile: f64,
}

pub fn load_prominence(path: &Path) -> Result<Vec<ProminenceRow>> {
    crate::corpus::read_csv(path)
}
