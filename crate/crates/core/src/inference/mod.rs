//! Posterior post-processing: inclusion probabilities, pathway selection,
//! indirect and direct effect summaries, convergence diagnostics and
//! selection operating characteristics.

mod export;
mod psr;

pub use export::{write_ppi_csv, write_psr_csv, write_summary_csv, write_summary_json};
pub use psr::{gelman_rubin, monitored_scalars, psr_report, PsrEntry, PsrReport, PSR_THRESHOLD};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ParameterState;
use crate::sampler::ChainDraws;
use crate::scalar::Real;
use crate::tuning::bayesian_fdr_threshold;

fn f<T: Real>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

fn check_chains<T: Real>(chains: &[ChainDraws<T>]) -> Result<usize> {
    let q = chains.first().map(ChainDraws::q).ok_or_else(|| Error::InvalidInput("no chains".into()))?;
    if chains.iter().any(|c| c.states.is_empty()) {
        return Err(Error::InvalidInput("a chain has no kept draws".into()));
    }
    if chains.iter().any(|c| c.q() != q) {
        return Err(Error::InvalidInput("chains disagree on the number of mediators".into()));
    }
    Ok(q)
}

fn pooled<T: Real>(chains: &[ChainDraws<T>]) -> impl Iterator<Item = &ParameterState<T>> {
    chains.iter().flat_map(|c| c.states.iter())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ppi {
    /// `P(γ_j = 1, ω_j = 1 | data)`.
    pub joint: Vec<f64>,
    /// `P(γ_j = 1 | data)`.
    pub gamma: Vec<f64>,
}

/// Inclusion frequencies pooled over every kept draw of every chain.
pub fn ppi<T: Real>(chains: &[ChainDraws<T>]) -> Result<Ppi> {
    let q = check_chains(chains)?;
    let mut joint = vec![0usize; q];
    let mut gamma = vec![0usize; q];
    let mut n = 0usize;
    for s in pooled(chains) {
        n += 1;
        for j in 0..q {
            gamma[j] += s.gamma[j] as usize;
            joint[j] += (s.gamma[j] && s.omega[j]) as usize;
        }
    }
    let frac = |v: Vec<usize>| v.into_iter().map(|c| c as f64 / n as f64).collect();
    Ok(Ppi { joint: frac(joint), gamma: frac(gamma) })
}

/// Two exposure levels; effects are reported for the change from `a_prime`
/// to `a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectContrast {
    pub a: f64,
    pub a_prime: f64,
}

impl EffectContrast {
    pub fn new(a: f64, a_prime: f64) -> Result<Self> {
        let c = EffectContrast { a, a_prime };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a_prime.is_finite()) || self.a == self.a_prime {
            return Err(Error::InvalidInput("contrast levels must be finite and distinct".into()));
        }
        Ok(())
    }

    /// `a − a′`.
    pub fn multiplier(&self) -> f64 {
        self.a - self.a_prime
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub mean: f64,
    pub sd: f64,
    pub hpdi_lo: f64,
    pub hpdi_hi: f64,
    pub draws: usize,
}

pub const HPDI_LEVEL: f64 = 0.95;

/// Median, mean, standard deviation and 95% HPDI. Needs at least two samples.
pub fn summarize<T: Real>(samples: &[T]) -> Result<Summary> {
    let (lo, hi) = hpdi(samples, T::lit(HPDI_LEVEL))?;
    let xs: Vec<f64> = samples.iter().map(|&v| f(v)).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(Summary {
        median: crate::tuning::median(xs).unwrap_or(f64::NAN),
        mean,
        sd: var.sqrt(),
        hpdi_lo: f(lo),
        hpdi_hi: f(hi),
        draws: samples.len(),
    })
}

/// Shortest interval spanning `⌈level·N⌉` consecutive sorted samples.
pub fn hpdi<T: Real>(samples: &[T], level: T) -> Result<(T, T)> {
    if samples.len() < 2 {
        return Err(Error::InvalidInput("HPDI needs at least two samples".into()));
    }
    if !(level > T::zero() && level < T::one()) {
        return Err(Error::InvalidInput(format!("HPDI level {level} outside (0, 1)")));
    }
    if samples.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN sample".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    let k = (level * T::from_usize_lossy(n)).ceil().to_usize().unwrap_or(n).clamp(1, n);
    let best = (0..=n - k)
        .min_by(|&i, &j| (xs[i + k - 1] - xs[i]).partial_cmp(&(xs[j + k - 1] - xs[j])).unwrap())
        .unwrap();
    Ok((xs[best], xs[best + k - 1]))
}

/// Per-mediator contributions `(a − a′) τ_j δ_j` of one draw.
pub fn ie_contributions<T: Real>(state: &ParameterState<T>, multiplier: T) -> Vec<T> {
    state.tau.iter().zip(&state.delta).map(|(&t, &d)| multiplier * t * d).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimates {
    pub contrast: EffectContrast,
    /// IE_j over the draws with γ_j = ω_j = 1; absent when there are fewer
    /// than two such draws.
    pub ie_per_mediator: Vec<Option<Summary>>,
    /// τ_j over the same conditioning draws.
    pub tau_per_mediator: Vec<Option<Summary>>,
    pub ie_total: Summary,
    pub de: Summary,
}

pub fn estimate_effects<T: Real>(chains: &[ChainDraws<T>], contrast: EffectContrast) -> Result<EffectEstimates> {
    contrast.validate()?;
    let q = check_chains(chains)?;
    let mult = T::lit(contrast.multiplier());
    let mut ie_j: Vec<Vec<T>> = vec![Vec::new(); q];
    let mut tau_j: Vec<Vec<T>> = vec![Vec::new(); q];
    let mut total = Vec::new();
    let mut de = Vec::new();
    for s in pooled(chains) {
        let contrib = ie_contributions(s, mult);
        for j in (0..q).filter(|&j| s.gamma[j] && s.omega[j]) {
            ie_j[j].push(contrib[j]);
            tau_j[j].push(s.tau[j]);
        }
        total.push(contrib.into_iter().fold(T::zero(), |a, b| a + b));
        de.push(mult * s.alpha_p1);
    }
    let conditional = |v: Vec<Vec<T>>| v.iter().map(|x| summarize(x).ok()).collect();
    Ok(EffectEstimates {
        contrast,
        ie_per_mediator: conditional(ie_j),
        tau_per_mediator: conditional(tau_j),
        ie_total: summarize(&total)?,
        de: summarize(&de)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub mediators: Vec<String>,
    pub ppi_joint: Vec<f64>,
    pub ppi_gamma: Vec<f64>,
    pub fdr_target: f64,
    pub kappa: f64,
    pub fdr: Option<f64>,
    /// No threshold met the FDR target.
    pub fdr_warning: bool,
    /// Indices with `ppi_joint > kappa`.
    pub selected: Vec<usize>,
    /// Selection on `ppi_gamma` at the same target.
    pub selected_gamma: Vec<usize>,
    pub effects: EffectEstimates,
}

/// PPIs, FDR-thresholded selection and effect summaries from pooled chains.
pub fn selection_summary<T: Real>(
    chains: &[ChainDraws<T>],
    mediators: &[String],
    contrast: EffectContrast,
    fdr_target: f64,
) -> Result<SelectionSummary> {
    let p = ppi(chains)?;
    if mediators.len() != p.joint.len() {
        return Err(Error::InvalidInput("mediator names do not match the draws".into()));
    }
    let sel = bayesian_fdr_threshold(&p.joint, fdr_target)?;
    let sel_gamma = bayesian_fdr_threshold(&p.gamma, fdr_target)?;
    Ok(SelectionSummary {
        mediators: mediators.to_vec(),
        ppi_joint: p.joint,
        ppi_gamma: p.gamma,
        fdr_target,
        kappa: sel.kappa,
        fdr: sel.fdr,
        fdr_warning: sel.warning,
        selected: sel.selected,
        selected_gamma: sel_gamma.selected,
        effects: estimate_effects(chains, contrast)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
    pub nvs: usize,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

/// Confusion counts of a selected index set against the true indicators.
/// Rates whose denominator is zero are absent.
pub fn operating_characteristics(selected: &[usize], truth: &[bool]) -> Result<OperatingCharacteristics> {
    let mut sel = vec![false; truth.len()];
    for &j in selected {
        *sel.get_mut(j).ok_or_else(|| Error::InvalidInput(format!("selected index {j} out of range")))? = true;
    }
    let count = |s: bool, t: bool| sel.iter().zip(truth).filter(|&(&a, &b)| a == s && b == t).count();
    let (tp, fp, fn_, tn) = (count(true, true), count(true, false), count(false, true), count(false, false));
    let rate = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(OperatingCharacteristics {
        tpr: rate(tp, tp + fn_),
        fpr: rate(fp, fp + tn),
        ppv: rate(tp, tp + fp),
        npv: rate(tn, tn + fn_),
        nvs: tp + fp,
        tp,
        fp,
        fn_,
        tn,
    })
}
