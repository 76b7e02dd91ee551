//! TOML run configuration and its resolution into library types.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use medsel::data::{
    generate_scenario, load_dataset, load_matrix, preprocess, PreprocessOptions, ScenarioId, ScenarioSize,
    ScenarioSpec, Schema, TransformReport, TrueActiveSets,
};
use medsel::sampler::{check_variant, Fill};
use medsel::scalar::logit;
use medsel::{ChainConfig, Dataset, EffectContrast, Hyper, ModelVariant, PhaseScanConfig, PhaseScanResult};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Not part of the recorded configuration, so runs written to different
    /// directories share a hash.
    #[serde(default = "default_output", skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(default = "default_variant")]
    pub model_variant: ModelVariant,
    #[serde(default = "default_fdr")]
    pub fdr_target: f64,
    pub data: Option<DataSource>,
    pub scenario: Option<ScenarioSection>,
    #[serde(default)]
    pub hyper: HyperSection,
    #[serde(default)]
    pub chains: ChainsSection,
    #[serde(default)]
    pub contrast: ContrastSection,
    #[serde(default)]
    pub scan: ScanSection,
}

fn default_output() -> PathBuf {
    PathBuf::from("medsel-out")
}

fn default_variant() -> ModelVariant {
    ModelVariant::MvnMrfSsb
}

fn default_fdr() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSource {
    pub path: PathBuf,
    pub exposure: String,
    pub outcome: String,
    pub mediators: Vec<String>,
    #[serde(default)]
    pub covariates: Vec<String>,
    pub preprocess: Option<PreprocessOptions>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub id: ScenarioId,
    #[serde(default)]
    pub size: ScenarioSize,
    pub seed: u64,
    /// Residual covariance CSV, required for the IV-like scenario.
    pub covariance: Option<PathBuf>,
    pub permutation: Option<Vec<usize>>,
}

/// Prior constants; anything unset keeps the library default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperSection {
    pub theta_gamma: Option<f64>,
    /// `logistic(θγ)`, as an alternative to `theta_gamma`.
    pub prob_gamma: Option<f64>,
    pub theta_omega: Option<f64>,
    pub eta: Option<f64>,
    /// Phase-scan result whose selected η is used when `eta` is unset.
    pub eta_from: Option<PathBuf>,
    pub v_sq: Option<Fill>,
    pub psi_sq: Option<Fill>,
    pub h0: Option<f64>,
    pub c0: Option<f64>,
    pub s0: Option<f64>,
    pub t0: Option<f64>,
    pub k0: Option<f64>,
    pub nu0: Option<f64>,
    pub nu1: Option<f64>,
    pub sigma0_sq: Option<f64>,
    pub sigma1_sq: Option<f64>,
    pub mu_lambda: Option<f64>,
    pub h_lambda: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainsSection {
    #[serde(default = "default_chain_count")]
    pub count: usize,
    /// Chain `k` runs with seed `template.seed + k`.
    #[serde(flatten)]
    pub template: ChainConfig,
}

fn default_chain_count() -> usize {
    3
}

impl Default for ChainsSection {
    fn default() -> Self {
        ChainsSection { count: default_chain_count(), template: ChainConfig::default() }
    }
}

impl ChainsSection {
    pub fn configs(&self, variant: ModelVariant) -> Vec<ChainConfig> {
        (0..self.count as u64)
            .map(|k| ChainConfig {
                seed: self.template.seed.wrapping_add(k),
                model_variant: variant,
                ..self.template.clone()
            })
            .collect()
    }
}

/// Explicit exposure levels, or two exposure percentiles of the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastSection {
    pub a: Option<f64>,
    pub a_prime: Option<f64>,
    /// `[lower, upper]`: a′ at the lower and a at the upper percentile.
    pub percentiles: Option<[f64; 2]>,
}

impl Default for ContrastSection {
    fn default() -> Self {
        ContrastSection { a: Some(1.0), a_prime: Some(-1.0), percentiles: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    /// Explicit grid; otherwise `start..=stop` in steps of `step`.
    pub grid: Option<Vec<f64>>,
    #[serde(default)]
    pub start: f64,
    #[serde(default = "default_stop")]
    pub stop: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_m_pt")]
    pub m_pt: usize,
    #[serde(default = "default_scan_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_jump")]
    pub jump_threshold: f64,
}

fn default_stop() -> f64 {
    20.0
}

fn default_step() -> f64 {
    0.5
}

fn default_m_pt() -> usize {
    1000
}

fn default_scan_burn_in() -> usize {
    1000
}

fn default_jump() -> f64 {
    0.05
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection {
            grid: None,
            start: 0.0,
            stop: default_stop(),
            step: default_step(),
            m_pt: default_m_pt(),
            burn_in: default_scan_burn_in(),
            jump_threshold: default_jump(),
        }
    }
}

impl ScanSection {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if let Some(g) = &self.grid {
            return Ok(g.clone());
        }
        ensure!(self.step > 0.0 && self.stop >= self.start, "scan range needs step > 0 and stop >= start");
        let points = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..points).map(|g| self.start + g as f64 * self.step).collect())
    }

    pub fn config(&self, chains: &ChainsSection) -> Result<PhaseScanConfig> {
        let cfg = PhaseScanConfig {
            eta_grid: self.grid()?,
            m_pt: self.m_pt,
            jump_threshold: self.jump_threshold,
            chain_template: ChainConfig {
                burn_in: self.burn_in,
                model_variant: ModelVariant::MvnMrfSsb,
                ..chains.template.clone()
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.data.is_some() != self.scenario.is_some(),
            "exactly one of [data] and [scenario] must be given"
        );
        ensure!(self.fdr_target > 0.0 && self.fdr_target < 1.0, "fdr_target must lie in (0, 1)");
        ensure!(self.chains.count > 0, "chains.count must be positive");
        self.chains.template.validate()?;
        ensure!(
            !(self.hyper.theta_gamma.is_some() && self.hyper.prob_gamma.is_some()),
            "give theta_gamma or prob_gamma, not both"
        );
        if let Some(p) = self.hyper.prob_gamma {
            ensure!(p > 0.0 && p < 1.0, "prob_gamma must lie in (0, 1)");
        }
        let c = &self.contrast;
        match (c.a, c.a_prime, c.percentiles) {
            (Some(a), Some(a_prime), None) => {
                EffectContrast::new(a, a_prime)?;
            }
            (None, None, Some([lo, hi])) => {
                ensure!((0.0..=100.0).contains(&lo) && (0.0..=100.0).contains(&hi) && lo < hi, "percentiles must satisfy 0 <= lower < upper <= 100");
            }
            _ => bail!("contrast needs either a and a_prime, or percentiles"),
        }
        if let Some(s) = &self.scenario {
            ensure!(
                (s.id == ScenarioId::IvLike) == s.covariance.is_some(),
                "a covariance file is required for, and only for, the IV-like scenario"
            );
        }
        Ok(())
    }

    pub fn scenario_spec(&self) -> Result<Option<ScenarioSpec<f64>>> {
        let Some(s) = &self.scenario else { return Ok(None) };
        let spec = match &s.covariance {
            Some(path) => {
                let cov = load_matrix(path).with_context(|| format!("loading covariance {}", path.display()))?;
                ScenarioSpec::iv_like(cov, s.permutation.clone(), s.seed)
            }
            None => ScenarioSpec::preset(s.id, s.size, s.seed)?,
        };
        spec.validate()?;
        Ok(Some(spec))
    }

    /// The dataset to fit, with the generating truth for simulated data.
    pub fn dataset(&self) -> Result<LoadedData> {
        if let Some(spec) = self.scenario_spec()? {
            let (data, truth) = generate_scenario(&spec)?;
            return Ok(LoadedData { data, truth: Some(truth), transforms: None });
        }
        let src = self.data.as_ref().expect("validated");
        let schema = Schema {
            exposure: src.exposure.clone(),
            outcome: src.outcome.clone(),
            mediators: src.mediators.clone(),
            covariates: src.covariates.clone(),
        };
        let data = load_dataset(&src.path, &schema).with_context(|| format!("loading {}", src.path.display()))?;
        Ok(match &src.preprocess {
            Some(opts) => {
                let (data, report) = preprocess(&data, opts)?;
                LoadedData { data, truth: None, transforms: Some(report) }
            }
            None => LoadedData { data, truth: None, transforms: None },
        })
    }

    /// Library defaults overridden by `[hyper]`; η comes from `eta`, then
    /// `eta_from`, and must be resolvable for the MRF variant.
    pub fn hyperparameters(&self, q: usize) -> Result<Hyper> {
        let h = &self.hyper;
        let mut hp = Hyper::defaults(q);
        if let Some(v) = h.theta_gamma {
            hp.theta_gamma = v;
        }
        if let Some(p) = h.prob_gamma {
            hp.theta_gamma = logit(p);
        }
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut hp.theta_omega, h.theta_omega);
        set(&mut hp.h0, h.h0);
        set(&mut hp.c0, h.c0);
        set(&mut hp.s0, h.s0);
        set(&mut hp.t0, h.t0);
        set(&mut hp.k0, h.k0);
        set(&mut hp.nu0, h.nu0);
        set(&mut hp.nu1, h.nu1);
        set(&mut hp.sigma0_sq, h.sigma0_sq);
        set(&mut hp.sigma1_sq, h.sigma1_sq);
        set(&mut hp.mu_lambda, h.mu_lambda);
        set(&mut hp.h_lambda, h.h_lambda);
        if let Some(v) = &h.v_sq {
            hp.v_sq = expand(v, q, "v_sq")?;
        }
        if let Some(v) = &h.psi_sq {
            hp.psi_sq = expand(v, q, "psi_sq")?;
        }
        hp.eta = match (h.eta, &h.eta_from) {
            (Some(eta), _) => eta,
            (None, Some(path)) => read_scan(path)?.eta_selected,
            (None, None) if self.model_variant.uses_mrf() => {
                bail!("{} needs eta: set hyper.eta or supply a phase-scan result", self.model_variant)
            }
            (None, None) => 0.0,
        };
        hp.validate(q)?;
        check_variant(self.model_variant, &hp)?;
        Ok(hp)
    }

    pub fn contrast(&self, data: &Dataset) -> Result<EffectContrast> {
        let c = &self.contrast;
        Ok(match c.percentiles {
            Some([lo, hi]) => EffectContrast::new(percentile(data.a(), hi), percentile(data.a(), lo))
                .context("percentile contrast levels coincide")?,
            None => EffectContrast::new(c.a.unwrap(), c.a_prime.unwrap())?,
        })
    }
}

pub struct LoadedData {
    pub data: Dataset,
    pub truth: Option<TrueActiveSets>,
    pub transforms: Option<TransformReport>,
}

fn expand(fill: &Fill, q: usize, what: &str) -> Result<Vec<f64>> {
    match fill {
        Fill::Scalar(v) => Ok(vec![*v; q]),
        Fill::Vector(v) if v.len() == q => Ok(v.clone()),
        Fill::Vector(v) => bail!("{what} has {} entries, expected {q}", v.len()),
    }
}

pub fn read_scan(path: &Path) -> Result<PhaseScanResult> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing phase-scan result {}", path.display()))
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(xs: &[f64], pct: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * pct / 100.0;
    let (lo, frac) = (h.floor() as usize, h - h.floor());
    if lo + 1 < v.len() {
        v[lo] + frac * (v[lo + 1] - v[lo])
    } else {
        v[lo]
    }
}
