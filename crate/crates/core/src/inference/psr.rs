use serde::{Deserialize, Serialize};

use super::f;
use crate::error::{Error, Result};
use crate::sampler::ChainDraws;
use crate::scalar::Real;

/// Chains are accepted as converged when every monitored PSR is below this.
pub const PSR_THRESHOLD: f64 = 1.05;

/// Potential scale reduction `√(V̂/W)` with `V̂ = (n−1)/n·W + B/n`.
pub fn gelman_rubin(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    let n = chains.first().map_or(0, Vec::len);
    if m < 2 || n < 2 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("PSR needs at least two equal-length chains of length two".into()));
    }
    let mean = |c: &[f64]| c.iter().sum::<f64>() / c.len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1) as f64)
        .sum::<f64>()
        / m as f64;
    if !(w > 0.0) {
        return Err(Error::InvalidInput("all chains are constant".into()));
    }
    let grand = mean(&means);
    let b = n as f64 * means.iter().map(|mu| (mu - grand) * (mu - grand)).sum::<f64>() / (m - 1) as f64;
    let n = n as f64;
    Ok((((n - 1.0) / n * w + b / n) / w).sqrt())
}

/// Default monitored scalars: σΣ², σ², the five λ_j² with the largest pooled
/// variance and the five δ_j with the largest joint PPI. Returns
/// `(name, per-chain series)` pairs.
///
/// λ is identified only up to a global sign, so its square is monitored.
pub fn monitored_scalars<T: Real>(chains: &[ChainDraws<T>], ppi_joint: &[f64]) -> Vec<(String, Vec<Vec<f64>>)> {
    let series = |g: &dyn Fn(&crate::model::ParameterState<T>) -> T| -> Vec<Vec<f64>> {
        chains.iter().map(|c| c.states.iter().map(|s| f(g(s))).collect()).collect()
    };
    let mut out = vec![
        ("sigma_sq_sigma".to_string(), series(&|s| s.sigma_sq_sigma)),
        ("sigma_sq".to_string(), series(&|s| s.sigma_sq)),
    ];
    let q = chains.first().map_or(0, ChainDraws::q);
    let top = |score: &dyn Fn(usize) -> f64| {
        let mut idx: Vec<usize> = (0..q).collect();
        idx.sort_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
        idx.truncate(5);
        idx
    };
    let lambda_var = |j: usize| {
        let xs: Vec<f64> = chains.iter().flat_map(|c| c.states.iter().map(move |s| f(s.lambda[j] * s.lambda[j]))).collect();
        let mu = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>()
    };
    for j in top(&lambda_var) {
        out.push((format!("lambda[{j}]^2"), series(&|s| s.lambda[j] * s.lambda[j])));
    }
    for j in top(&|j| ppi_joint.get(j).copied().unwrap_or(0.0)) {
        out.push((format!("delta[{j}]"), series(&|s| s.delta[j])));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsrEntry {
    pub name: String,
    /// Absent when every chain is constant (e.g. pinned λ or a never-included δ).
    pub psr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsrReport {
    pub entries: Vec<PsrEntry>,
    pub threshold: f64,
    pub converged: bool,
}

/// PSR of every monitored scalar; `converged` requires each defined PSR to be
/// below [`PSR_THRESHOLD`]. A single chain yields an empty, converged report.
pub fn psr_report<T: Real>(chains: &[ChainDraws<T>], ppi_joint: &[f64]) -> Result<PsrReport> {
    if chains.len() < 2 {
        return Ok(PsrReport { entries: Vec::new(), threshold: PSR_THRESHOLD, converged: true });
    }
    let n = chains[0].states.len();
    if n < 2 || chains.iter().any(|c| c.states.len() != n) {
        return Err(Error::InvalidInput("PSR needs equal-length chains with at least two draws".into()));
    }
    let entries: Vec<PsrEntry> = monitored_scalars(chains, ppi_joint)
        .into_iter()
        .map(|(name, s)| {
            let constant = s.iter().flatten().all(|v| *v == s[0][0]);
            // Chains stuck at different constants have no within-chain spread.
            let psr = (!constant).then(|| gelman_rubin(&s).unwrap_or(f64::INFINITY));
            PsrEntry { name, psr }
        })
        .collect();
    let converged = entries.iter().all(|e| e.psr.is_none_or(|v| v < PSR_THRESHOLD));
    Ok(PsrReport { entries, threshold: PSR_THRESHOLD, converged })
}
