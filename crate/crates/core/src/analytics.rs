//! Correlations, least-squares regression and prominence binning for the
//! funding study.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::clusterer::TopicId;
use crate::corpus::csv_writer;
use crate::error::{Error, Result};

/// Offset added before taking the log of funding amounts (millions).
pub const FUNDING_LOG_OFFSET: f64 = 0.001;

pub fn funding_log(amount: f64) -> Result<f64> {
    if amount >= 0.0 {
        Ok((amount + FUNDING_LOG_OFFSET).ln())
    } else {
        Err(Error::InvalidParameter(format!(
            "funding amount must be non-negative, got {amount}"
        )))
    }
}

/// Pearson correlations between named columns.
pub fn correlation_matrix(columns: &[(String, Vec<f64>)]) -> Result<Vec<Vec<f64>>> {
    let Some((_, first)) = columns.first() else {
        return Ok(Vec::new());
    };
    let n = first.len();
    if columns.iter().any(|(_, c)| c.len() != n) {
        return Err(Error::InvalidParameter("columns differ in length".into()));
    }
    if n < 3 {
        return Err(Error::TooFewObservations { needed: 2, got: n });
    }
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .map(|(name, c)| {
            let mean = c.iter().sum::<f64>() / n as f64;
            let d: Vec<f64> = c.iter().map(|x| x - mean).collect();
            let ss: f64 = d.iter().map(|x| x * x).sum();
            if !(ss.sqrt() > 1e-12 * mean.abs().max(1.0)) {
                return Err(Error::ConstantVariable(name.clone()));
            }
            let norm = ss.sqrt();
            Ok(d.into_iter().map(|x| x / norm).collect())
        })
        .collect::<Result<_>>()?;
    let k = columns.len();
    let mut out = vec![vec![0.0; k]; k];
    for i in 0..k {
        out[i][i] = 1.0;
        for j in (i + 1)..k {
            let r: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            let r = r.clamp(-1.0, 1.0);
            out[i][j] = r;
            out[j][i] = r;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub predictors: Vec<String>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    pub n_obs: usize,
    pub residual_variance: f64,
}

/// Least squares with intercept, solved by QR decomposition of the design matrix.
pub fn ols(y: &[f64], predictors: &[(String, Vec<f64>)]) -> Result<RegressionResult> {
    let n = y.len();
    let k = predictors.len();
    if n <= k + 1 {
        return Err(Error::TooFewObservations { needed: k + 1, got: n });
    }
    if predictors.iter().any(|(_, x)| x.len() != n) {
        return Err(Error::InvalidParameter("predictor length differs from response".into()));
    }
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean_y).powi(2)).sum();
    if !(sst > 1e-24 * mean_y.abs().max(1.0).powi(2) * n as f64) {
        return Err(Error::ConstantVariable("response".into()));
    }

    let design = DMatrix::from_fn(n, k + 1, |i, j| if j == 0 { 1.0 } else { predictors[j - 1].1[i] });
    let col_scale: Vec<f64> = (0..=k)
        .map(|j| design.column(j).norm().max(f64::MIN_POSITIVE))
        .collect();
    let qr = design.clone().qr();
    let r = qr.r();
    for j in 0..=k {
        if r[(j, j)].abs() <= 1e-10 * col_scale[j] {
            return Err(Error::Collinear);
        }
    }
    let qty = qr.q().transpose() * DVector::from_column_slice(y);
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or(Error::Collinear)?;
    let fitted = &design * &beta;
    let ssr: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(RegressionResult {
        predictors: predictors.iter().map(|(name, _)| name.clone()).collect(),
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        r_squared: (1.0 - ssr / sst).clamp(0.0, 1.0),
        n_obs: n,
        residual_variance: ssr / (n - k - 1) as f64,
    })
}

/// Per-topic inputs to the funding study, aligned by index.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyInput {
    pub topics: Vec<TopicId>,
    /// Funding (millions) summed over the early period.
    pub early_funding: Vec<f64>,
    /// Funding (millions) summed over the late period; the response.
    pub late_funding: Vec<f64>,
    pub prominence: Vec<f64>,
    pub vitality: Vec<f64>,
    /// `ln(authors per paper + 1)`.
    pub log_authors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedModel {
    pub name: String,
    pub result: RegressionResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub variables: Vec<String>,
    pub correlations: Vec<Vec<f64>>,
    pub models: Vec<NamedModel>,
    /// R² gained by adding vitality and L:Authors to the two-variable model.
    pub extra_predictor_delta_r2: f64,
    /// Benchmark values from a large-scale funding study, for side-by-side reading only.
    pub reference_r2: ReferenceR2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceR2 {
    pub past_funding: f64,
    pub prominence: f64,
    pub past_funding_and_prominence: f64,
}

pub const REFERENCE_R2: ReferenceR2 = ReferenceR2 {
    past_funding: 0.701,
    prominence: 0.367,
    past_funding_and_prominence: 0.713,
};

/// Correlation table and the nested regression models predicting late-period
/// funding. Amounts are log-transformed with [`funding_log`] first.
pub fn funding_prediction_study(input: &StudyInput) -> Result<StudyReport> {
    let n = input.topics.len();
    let lens = [
        input.early_funding.len(),
        input.late_funding.len(),
        input.prominence.len(),
        input.vitality.len(),
        input.log_authors.len(),
    ];
    if lens.iter().any(|&l| l != n) {
        return Err(Error::InvalidParameter("study columns are not aligned".into()));
    }
    let late: Vec<f64> = input.late_funding.iter().map(|&a| funding_log(a)).collect::<Result<_>>()?;
    let early: Vec<f64> = input.early_funding.iter().map(|&a| funding_log(a)).collect::<Result<_>>()?;

    let col = |name: &str, v: &[f64]| (name.to_string(), v.to_vec());
    let l_late = col("L:FundLate", &late);
    let l_early = col("L:FundEarly", &early);
    let prom = col("Prominence", &input.prominence);
    let vit = col("Vitality", &input.vitality);
    let auth = col("L:Authors", &input.log_authors);

    let columns = vec![l_late.clone(), l_early.clone(), prom.clone(), vit.clone(), auth.clone()];
    let correlations = correlation_matrix(&columns)?;

    let model = |name: &str, xs: Vec<(String, Vec<f64>)>| -> Result<NamedModel> {
        Ok(NamedModel {
            name: name.to_string(),
            result: ols(&late, &xs)?,
        })
    };
    let past = model("past_funding", vec![l_early.clone()])?;
    let prominence_only = model("prominence", vec![prom.clone()])?;
    let two = model("past_funding_and_prominence", vec![l_early.clone(), prom.clone()])?;
    let full = model("with_vitality_and_authors", vec![l_early, prom, vit, auth])?;
    let delta = full.result.r_squared - two.result.r_squared;

    Ok(StudyReport {
        variables: columns.into_iter().map(|(name, _)| name).collect(),
        correlations,
        models: vec![past, prominence_only, two, full],
        extra_predictor_delta_r2: delta,
        reference_r2: REFERENCE_R2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinInput {
    pub topic_id: TopicId,
    pub prominence: f64,
    pub authors: f64,
    pub funding: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProminenceBin {
    pub index: usize,
    pub topics: Vec<TopicId>,
    pub authors: f64,
    pub funding: f64,
    pub funding_per_author: f64,
    pub funded_topics: usize,
    pub mean_prominence: f64,
}

/// Orders topics from low to high prominence and fills bins greedily until each
/// holds at least `target_authors` author-units. The last bin may fall short.
/// Topics without authors are left out.
pub fn bin_by_prominence(items: &[BinInput], target_authors: f64) -> Result<Vec<ProminenceBin>> {
    if !(target_authors > 0.0) {
        return Err(Error::InvalidParameter("target_authors must be positive".into()));
    }
    if items.iter().any(|i| i.authors < 0.0) {
        return Err(Error::InvalidParameter("author counts must be non-negative".into()));
    }
    let mut sorted: Vec<&BinInput> = items.iter().filter(|i| i.authors > 0.0).collect();
    if sorted.is_empty() {
        return Err(Error::InvalidParameter("total authors is zero".into()));
    }
    sorted.sort_by(|a, b| {
        a.prominence
            .total_cmp(&b.prominence)
            .then_with(|| a.topic_id.cmp(&b.topic_id))
    });

    let mut bins: Vec<ProminenceBin> = Vec::new();
    let mut open: Option<ProminenceBin> = None;
    let mut prom_sum = 0.0;
    for item in sorted {
        let bin = open.get_or_insert_with(|| ProminenceBin {
            index: bins.len(),
            topics: Vec::new(),
            authors: 0.0,
            funding: 0.0,
            funding_per_author: 0.0,
            funded_topics: 0,
            mean_prominence: 0.0,
        });
        bin.topics.push(item.topic_id);
        bin.authors += item.authors;
        bin.funding += item.funding;
        bin.funded_topics += (item.funding > 0.0) as usize;
        prom_sum += item.prominence;
        if bin.authors >= target_authors {
            let mut done = open.take().expect("open bin");
            done.mean_prominence = prom_sum / done.topics.len() as f64;
            prom_sum = 0.0;
            bins.push(done);
        }
    }
    if let Some(mut last) = open {
        last.mean_prominence = prom_sum / last.topics.len() as f64;
        bins.push(last);
    }
    for b in &mut bins {
        b.funding_per_author = b.funding / b.authors;
    }
    Ok(bins)
}

pub fn save_bins(path: &Path, bins: &[ProminenceBin]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["bin", "topics", "authors", "funding", "funding_per_author"])?;
    for b in bins {
        w.write_record([
            b.index.to_string(),
            b.topics.len().to_string(),
            b.authors.to_string(),
            b.funding.to_string(),
            b.funding_per_author.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn save_correlations(path: &Path, names: &[String], matrix: &[Vec<f64>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["variable".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in names.iter().zip(matrix) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn save_regressions(path: &Path, models: &[NamedModel]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["model", "term", "estimate", "r_squared", "n_obs"])?;
    for m in models {
        let r2 = m.result.r_squared.to_string();
        let n = m.result.n_obs.to_string();
        w.write_record([m.name.as_str(), "(intercept)", &m.result.intercept.to_string(), &r2, &n])?;
        for (name, c) in m.result.predictors.iter().zip(&m.result.coefficients) {
            w.write_record([m.name.as_str(), name, &c.to_string(), &r2, &n])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(name: &str, v: Vec<f64>) -> (String, Vec<f64>) {
        (name.to_string(), v)
    }

    #[test]
    fn funding_log_values() {
        assert!((funding_log(0.0).unwrap() - (-6.90776)).abs() < 1e-5);
        assert!(funding_log(0.999).unwrap().abs() < 1e-15);
        assert!((funding_log(167985.0).unwrap() - 12.0317).abs() < 1e-4);
        assert!(funding_log(-0.5).is_err());
    }

    #[test]
    fn correlation_edge_cases() {
        let x = vec![1.0, 4.0, 2.0, 8.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let m = correlation_matrix(&[col("x", x.clone()), col("x2", x.clone()), col("neg", neg)]).unwrap();
        assert!((m[0][1] - 1.0).abs() < 1e-15);
        assert!((m[0][2] + 1.0).abs() < 1e-15);
        assert!(matches!(
            correlation_matrix(&[col("x", x), col("c", vec![3.0; 4])]),
            Err(Error::ConstantVariable(_))
        ));
        assert!(correlation_matrix(&[col("a", vec![1.0, 2.0])]).is_err());
    }

    #[test]
    fn exact_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let r = ols(&y, &[col("x", x)]).unwrap();
        assert!((r.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((r.intercept - 1.0).abs() < 1e-12);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ols_errors() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        assert!(matches!(ols(&[5.0; 10], &[col("x", x.clone())]), Err(Error::ConstantVariable(_))));
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let twice: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        assert!(matches!(
            ols(&y, &[col("x", x.clone()), col("2x", twice)]),
            Err(Error::Collinear)
        ));
        assert!(matches!(
            ols(&y[..2], &[col("x", x[..2].to_vec())]),
            Err(Error::TooFewObservations { .. })
        ));
    }

    #[test]
    fn one_topic_per_bin_at_exact_target() {
        let items: Vec<BinInput> = (0..5)
            .map(|i| BinInput {
                topic_id: i,
                prominence: -(i as f64),
                authors: 10.0,
                funding: i as f64,
            })
            .collect();
        let bins = bin_by_prominence(&items, 10.0).unwrap();
        assert_eq!(bins.len(), 5);
        assert_eq!(bins[0].topics, vec![4]);
        assert_eq!(bins[4].funding_per_author, 0.0);
        assert!(bin_by_prominence(&items, 0.0).is_err());
        let silent: Vec<BinInput> = items
            .iter()
            .map(|i| BinInput { authors: 0.0, ..i.clone() })
            .collect();
        assert!(bin_by_prominence(&silent, 10.0).is_err());
    }
}
