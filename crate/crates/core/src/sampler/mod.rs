//! MCMC for the joint mediator/outcome selection model.
//!
//! One sweep updates, in order: fixed effects, (γ, τ), refinement of the
//! active τ, λ, σΣ², (ω, δ), refinement of the active δ and σ². The mediator
//! blocks draw from one RNG stream and the outcome blocks from another, so
//! under cut feedback the mediator-side path never depends on `Y`.

mod kernel;
mod normalizer;
mod output;

pub use kernel::{ChainRng, KernelOptions, Sampler};
pub use output::{read_draws, write_draws, DrawsManifest};

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::MediationDataset;
use crate::error::{Error, Result};
use crate::model::{Hyperparameters, ModelVariant, ParameterState};
use crate::scalar::Real;

/// How the γ update treats the outcome-model indicators.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feedback {
    /// γ sees only the mediator model; switching γ_j off forces (ω_j, δ_j) to
    /// (false, 0).
    #[default]
    Cut,
    /// γ_j is drawn from its exact full conditional, which includes the SSB
    /// factor `p(ω_j | γ_j)`.
    Full,
}

/// A scalar broadcast to every mediator, or one value per mediator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Fill {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Fill {
    fn expand(&self, q: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            Fill::Scalar(v) => Ok(vec![*v; q]),
            Fill::Vector(v) if v.len() == q => Ok(v.clone()),
            Fill::Vector(v) => {
                Err(Error::InvalidInput(format!("{what} init has {} entries, expected {q}", v.len())))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndicatorInit {
    AllOff,
    AllOn,
    Random(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitSpec {
    pub tau: Fill,
    pub delta: Fill,
    pub lambda: Fill,
    pub gamma: IndicatorInit,
    pub omega: IndicatorInit,
    pub sigma_sq_sigma: f64,
    pub sigma_sq: f64,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec {
            tau: Fill::Scalar(0.0),
            delta: Fill::Scalar(0.0),
            lambda: Fill::Scalar(0.0),
            gamma: IndicatorInit::AllOff,
            omega: IndicatorInit::AllOff,
            sigma_sq_sigma: 1.0,
            sigma_sq: 1.0,
        }
    }
}

impl InitSpec {
    /// Builds the starting state. Random indicators use their own RNG stream.
    pub fn build<T: Real>(&self, q: usize, p: usize, variant: ModelVariant, seed: u64) -> Result<ParameterState<T>> {
        if !(self.sigma_sq_sigma > 0.0) || !(self.sigma_sq > 0.0) {
            return Err(Error::InvalidInput("initial variances must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(2);
        let mut draw = |init: IndicatorInit, allowed: &[bool]| -> Result<Vec<bool>> {
            allowed
                .iter()
                .map(|&ok| {
                    Ok(ok
                        && match init {
                            IndicatorInit::AllOff => false,
                            IndicatorInit::AllOn => true,
                            IndicatorInit::Random(prob) if (0.0..=1.0).contains(&prob) => rng.random::<f64>() < prob,
                            IndicatorInit::Random(prob) => {
                                return Err(Error::InvalidInput(format!("indicator init probability {prob}")))
                            }
                        })
                })
                .collect()
        };
        let gamma = draw(self.gamma, &vec![true; q])?;
        let omega = draw(self.omega, &gamma)?;
        let tau = self.tau.expand(q, "tau")?;
        let delta = self.delta.expand(q, "delta")?;
        let lambda = self.lambda.expand(q, "lambda")?;
        let mut s = ParameterState::zeros(q, p);
        for j in 0..q {
            s.gamma[j] = gamma[j];
            s.omega[j] = omega[j];
            s.tau[j] = if gamma[j] { T::lit(tau[j]) } else { T::zero() };
            s.delta[j] = if omega[j] { T::lit(delta[j]) } else { T::zero() };
            s.lambda[j] = if variant.pins_lambda() { T::zero() } else { T::lit(lambda[j]) };
        }
        s.sigma_sq_sigma = T::lit(self.sigma_sq_sigma);
        s.sigma_sq = T::lit(self.sigma_sq);
        s.check_invariants()?;
        Ok(s)
    }
}

/// Robbins–Monro tuning of the per-coordinate λ random-walk scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptSpec {
    pub initial_proposal_var_lambda: f64,
    pub target_accept: f64,
    /// Iterations per adaptation batch.
    pub adapt_window: usize,
}

impl Default for AdaptSpec {
    fn default() -> Self {
        AdaptSpec { initial_proposal_var_lambda: 0.01, target_accept: 0.44, adapt_window: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub model_variant: ModelVariant,
    pub init: InitSpec,
    pub adapt: AdaptSpec,
    pub feedback: Feedback,
    /// Include `log p(γ | λ)`, normalizer and all, in the λ Metropolis target.
    pub lambda_mrf_term: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_iter: 20_000,
            burn_in: 10_000,
            thin: 1,
            seed: 1,
            model_variant: ModelVariant::MvnMrfSsb,
            init: InitSpec::default(),
            adapt: AdaptSpec::default(),
            feedback: Feedback::Cut,
            lambda_mrf_term: true,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n_iter == 0 || self.thin == 0 {
            return bad("n_iter and thin must be positive".into());
        }
        if self.burn_in >= self.n_iter {
            return bad(format!("burn_in ({}) must be below n_iter ({})", self.burn_in, self.n_iter));
        }
        let a = &self.adapt;
        if !(a.initial_proposal_var_lambda > 0.0) || !(a.target_accept > 0.0 && a.target_accept < 1.0) {
            return bad("adaptation settings out of range".into());
        }
        if a.adapt_window == 0 {
            return bad("adapt_window must be positive".into());
        }
        Ok(())
    }

    /// Number of states `run_chain` keeps.
    pub fn kept(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }

    fn keeps(&self, t: usize) -> bool {
        t > self.burn_in && (t - self.burn_in) % self.thin == 0
    }

    fn options<T: Real>(&self) -> KernelOptions<T> {
        KernelOptions {
            variant: self.model_variant,
            feedback: self.feedback,
            lambda_mrf_term: self.lambda_mrf_term,
            proposal_sd: T::lit(self.adapt.initial_proposal_var_lambda.sqrt()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcceptRates {
    /// Post-burn-in acceptance of λ proposals, averaged over coordinates;
    /// absent when λ is pinned.
    pub lambda: Option<f64>,
    pub lambda_per_coordinate: Vec<f64>,
    /// λ proposal standard deviations in force after burn-in.
    pub lambda_proposal_sd: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainDraws<T> {
    pub states: Vec<ParameterState<T>>,
    pub accept_rates: AcceptRates,
    pub eta_used: T,
    pub wall_time_secs: f64,
    pub seed: u64,
    pub model_variant: ModelVariant,
}

impl<T: Real> ChainDraws<T> {
    pub fn q(&self) -> usize {
        self.states.first().map_or(0, ParameterState::q)
    }
}

/// Checks the variant contract: IB variants need η = 0.
pub fn check_variant<T: Real>(variant: ModelVariant, hp: &Hyperparameters<T>) -> Result<()> {
    if !variant.uses_mrf() && hp.eta != T::zero() {
        return Err(Error::InvalidInput(format!("eta must be 0 for IB variants ({variant} given eta = {})", hp.eta)));
    }
    Ok(())
}

pub fn run_chain<T: Real>(
    config: &ChainConfig,
    data: &MediationDataset<T>,
    hp: &Hyperparameters<T>,
) -> Result<ChainDraws<T>> {
    config.validate()?;
    hp.validate(data.q())?;
    check_variant(config.model_variant, hp)?;
    let start = Instant::now();
    let mut state = config.init.build(data.q(), data.p(), config.model_variant, config.seed)?;
    let mut sampler = Sampler::new(data, hp.clone(), config.options())?;
    let mut rng = ChainRng::new(config.seed);
    let q = data.q();
    let mut accepted = vec![0usize; q];
    let mut proposed = 0usize;
    let mut window = vec![0usize; q];
    let mut batches = 0usize;
    let mut states = Vec::with_capacity(config.kept());
    for t in 1..=config.n_iter {
        let acc = sampler.sweep(&mut state, &mut rng).map_err(|e| Error::AtIteration { iteration: t, source: Box::new(e) })?;
        if let Some(acc) = acc {
            if t <= config.burn_in {
                for (w, &a) in window.iter_mut().zip(&acc) {
                    *w += a as usize;
                }
                if t % config.adapt.adapt_window == 0 {
                    batches += 1;
                    let step = T::lit(2.0 / (batches as f64).sqrt());
                    let len = config.adapt.adapt_window as f64;
                    let target = config.adapt.target_accept;
                    sampler.adapt_proposals(|j, log_sd| {
                        log_sd + step * T::lit(window[j] as f64 / len - target)
                    });
                    window.iter_mut().for_each(|w| *w = 0);
                }
            } else {
                proposed += 1;
                for (c, &a) in accepted.iter_mut().zip(&acc) {
                    *c += a as usize;
                }
            }
        }
        if config.keeps(t) {
            state.check_invariants().map_err(|e| Error::AtIteration { iteration: t, source: Box::new(e) })?;
            states.push(state.clone());
        }
    }
    let per: Vec<f64> = if proposed > 0 { accepted.iter().map(|&a| a as f64 / proposed as f64).collect() } else { Vec::new() };
    let lambda = (!per.is_empty()).then(|| per.iter().sum::<f64>() / per.len() as f64);
    Ok(ChainDraws {
        states,
        accept_rates: AcceptRates {
            lambda,
            lambda_per_coordinate: per,
            lambda_proposal_sd: sampler.proposal_sd().iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
        },
        eta_used: hp.eta,
        wall_time_secs: start.elapsed().as_secs_f64(),
        seed: config.seed,
        model_variant: config.model_variant,
    })
}

/// Runs independent chains on the rayon pool; output order matches `configs`
/// and one chain failing does not stop the others.
pub fn run_chains<T: Real>(
    configs: &[ChainConfig],
    data: &MediationDataset<T>,
    hp: &Hyperparameters<T>,
) -> Vec<Result<ChainDraws<T>>> {
    configs.par_iter().map(|c| run_chain(c, data, hp)).collect()
}
