use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::MediationDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessOptions {
    /// Mediators whose absolute sample skewness exceeds this are log-transformed.
    pub log_transform_abs_skewness_threshold: f64,
    /// Optional group label per row; mediators are z-scored within each group.
    pub zscore_groups: Option<Vec<String>>,
    pub inverse_normal_exposure: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            log_transform_abs_skewness_threshold: 2.0,
            zscore_groups: None,
            inverse_normal_exposure: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    pub log_transformed: Vec<String>,
    pub groups: Vec<String>,
    pub exposure_inverse_normal: bool,
}

/// Moment skewness `m₃ / m₂^{3/2}` with central sample moments.
pub fn sample_skewness<T: Real>(x: &[T]) -> Result<T> {
    if x.len() < 3 {
        return Err(Error::InvalidInput(format!("skewness needs at least 3 values, got {}", x.len())));
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::ZeroVariance { column: String::new(), group: None });
    }
    let n = T::from_usize_lossy(x.len());
    let mean = x.iter().copied().sum::<T>() / n;
    let (mut m2, mut m3) = (T::zero(), T::zero());
    for &v in x {
        let d = v - mean;
        m2 = m2 + d * d;
        m3 = m3 + d * d * d;
    }
    m2 = m2 / n;
    m3 = m3 / n;
    if m2 <= T::zero() {
        return Err(Error::ZeroVariance { column: String::new(), group: None });
    }
    Ok(m3 / (m2 * m2.sqrt()))
}

/// Rank-based inverse-normal transform `Φ⁻¹((rank − 0.5)/n)` with average ranks for ties.
pub fn inverse_normal_ranks<T: Real>(x: &[T]) -> Vec<T> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).expect("finite values"));
    let mut ranks = vec![0.0f64; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their average
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    ranks
        .into_iter()
        .map(|r| T::lit(std.inverse_cdf((r - 0.5) / n as f64)))
        .collect()
}

/// Log-transforms highly skewed mediators, z-scores every mediator within
/// groups and optionally inverse-normal transforms the exposure.
pub fn preprocess<T: Real>(
    data: &MediationDataset<T>,
    opts: &PreprocessOptions,
) -> Result<(MediationDataset<T>, TransformReport)> {
    if !(opts.log_transform_abs_skewness_threshold > 0.0) {
        return Err(Error::InvalidInput("skewness threshold must be positive".into()));
    }
    let n = data.n();
    let groups: BTreeMap<String, Vec<usize>> = match &opts.zscore_groups {
        Some(labels) => {
            if labels.len() != n {
                return Err(Error::InvalidInput(format!(
                    "{} group labels for {n} rows",
                    labels.len()
                )));
            }
            let mut g: BTreeMap<String, Vec<usize>> = BTreeMap::new();
            for (i, l) in labels.iter().enumerate() {
                g.entry(l.clone()).or_default().push(i);
            }
            g
        }
        None => BTreeMap::from([(String::new(), (0..n).collect())]),
    };
    if let Some((label, _)) = groups.iter().find(|(_, rows)| rows.len() < 2) {
        return Err(Error::InvalidInput(format!("z-score group {label:?} has fewer than 2 rows")));
    }
    let threshold = T::lit(opts.log_transform_abs_skewness_threshold);
    let mut report = TransformReport {
        groups: if opts.zscore_groups.is_some() { groups.keys().cloned().collect() } else { Vec::new() },
        exposure_inverse_normal: opts.inverse_normal_exposure,
        ..Default::default()
    };

    let mut columns = Vec::with_capacity(data.q());
    for (j, name) in data.mediator_names().iter().enumerate() {
        let mut col = data.m().col(j).to_vec();
        let skew = sample_skewness(&col).map_err(|e| match e {
            Error::ZeroVariance { .. } => Error::ZeroVariance { column: name.clone(), group: None },
            other => other,
        })?;
        if skew.abs() > threshold {
            if col.iter().any(|&v| v <= T::zero()) {
                return Err(Error::NonPositiveLog { column: name.clone() });
            }
            col.iter_mut().for_each(|v| *v = v.ln());
            report.log_transformed.push(name.clone());
        }
        for (label, rows) in &groups {
            let k = T::from_usize_lossy(rows.len());
            let mean = rows.iter().map(|&i| col[i]).sum::<T>() / k;
            let var = rows.iter().map(|&i| (col[i] - mean).powi(2)).sum::<T>() / (k - T::one());
            if rows.iter().all(|&i| col[i] == col[rows[0]]) || !(var > T::zero()) {
                let group = opts.zscore_groups.as_ref().map(|_| label.clone());
                return Err(Error::ZeroVariance { column: name.clone(), group });
            }
            let sd = var.sqrt();
            for &i in rows {
                col[i] = (col[i] - mean) / sd;
            }
        }
        columns.push(col);
    }
    let a = if opts.inverse_normal_exposure { inverse_normal_ranks(data.a()) } else { data.a().to_vec() };
    let out = MediationDataset::with_names(
        data.x().clone(),
        a,
        Matrix::from_columns(n, columns),
        data.y().to_vec(),
        data.mediator_names().to_vec(),
        data.covariate_names().to_vec(),
    )?
    .with_role_names(data.exposure_name().to_owned(), data.outcome_name().to_owned());
    Ok((out, report))
}
