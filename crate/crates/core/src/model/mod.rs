//! Model densities: the factor-analytic mediator covariance, the mediator and
//! outcome likelihoods, and the spike-and-slab / MRF / SSB priors.

mod covariance;
mod likelihood;
mod prior;

pub use covariance::{fa_correlation, FactorCovariance};
pub use likelihood::{mediator_loglik, outcome_loglik};
pub use prior::{
    mrf_inclusion_prob, mrf_log_odds, mrf_log_potential, normal_log_pdf, spike_slab_log_prior_delta,
    spike_slab_log_prior_tau, ssb_log_prior,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{logit, Real};

/// The three fitted models: mediator covariance (independent normal or
/// factor-analytic MVN) × prior on γ (independent Bernoulli or MRF).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelVariant {
    #[serde(rename = "Normal-IB-SSB", alias = "normal-ib-ssb")]
    NormalIbSsb,
    #[serde(rename = "MVN-IB-SSB", alias = "mvn-ib-ssb")]
    MvnIbSsb,
    #[serde(rename = "MVN-MRF-SSB", alias = "mvn-mrf-ssb")]
    MvnMrfSsb,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 3] = [ModelVariant::NormalIbSsb, ModelVariant::MvnIbSsb, ModelVariant::MvnMrfSsb];

    /// λ is held at zero, so Σ = σΣ² I.
    pub fn pins_lambda(self) -> bool {
        self == ModelVariant::NormalIbSsb
    }

    pub fn uses_mrf(self) -> bool {
        self == ModelVariant::MvnMrfSsb
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::NormalIbSsb => "Normal-IB-SSB",
            ModelVariant::MvnIbSsb => "MVN-IB-SSB",
            ModelVariant::MvnMrfSsb => "MVN-MRF-SSB",
        }
    }
}

impl std::fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown model variant {s:?}")))
    }
}

/// Fixed prior constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters<T> {
    /// MRF baseline, on the log-odds scale.
    pub theta_gamma: T,
    /// Prior probability of ω_j = 1 given γ_j = 1.
    pub theta_omega: T,
    /// MRF coupling; zero gives independent Bernoulli(logistic(θγ)) indicators.
    pub eta: T,
    /// Slab scales v_j² for τ_j (relative to Σ_jj).
    pub v_sq: Vec<T>,
    /// Slab scales ψ_j² for δ_j (relative to σ²).
    pub psi_sq: Vec<T>,
    /// Prior variance of each β0 entry.
    pub h0: T,
    /// Prior variance of each B entry.
    pub c0: T,
    /// Prior variance of α0.
    pub s0: T,
    /// Prior variance of each α entry.
    pub t0: T,
    /// Prior variance of α_{p+1}.
    pub k0: T,
    pub nu0: T,
    pub nu1: T,
    pub sigma0_sq: T,
    pub sigma1_sq: T,
    pub mu_lambda: T,
    pub h_lambda: T,
}

impl<T: Real> Hyperparameters<T> {
    /// The relatively non-informative settings of the simulation study:
    /// logistic(θγ) = θω = 0.1, v² = ψ² = 9, all Gaussian prior variances 100,
    /// ν0 = ν1 = 6, σ0² = σ1² = 1/3, μλ = 0, hλ = 100 and η = 0.
    pub fn defaults(q: usize) -> Self {
        let hundred = T::lit(100.0);
        Hyperparameters {
            theta_gamma: logit(T::lit(0.1)),
            theta_omega: T::lit(0.1),
            eta: T::zero(),
            v_sq: vec![T::lit(9.0); q],
            psi_sq: vec![T::lit(9.0); q],
            h0: hundred,
            c0: hundred,
            s0: hundred,
            t0: hundred,
            k0: hundred,
            nu0: T::lit(6.0),
            nu1: T::lit(6.0),
            sigma0_sq: T::lit(1.0 / 3.0),
            sigma1_sq: T::lit(1.0 / 3.0),
            mu_lambda: T::zero(),
            h_lambda: hundred,
        }
    }

    pub fn with_eta(mut self, eta: T) -> Self {
        self.eta = eta;
        self
    }

    pub fn q(&self) -> usize {
        self.v_sq.len()
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_owned()));
        if self.v_sq.len() != q || self.psi_sq.len() != q {
            return bad("v_sq and psi_sq must have one entry per mediator");
        }
        let positive = [
            self.h0, self.c0, self.s0, self.t0, self.k0, self.nu0, self.nu1, self.sigma0_sq, self.sigma1_sq,
            self.h_lambda,
        ];
        if positive.iter().chain(&self.v_sq).chain(&self.psi_sq).any(|&v| !(v > T::zero() && v.is_finite())) {
            return bad("all prior variances and degrees of freedom must be positive and finite");
        }
        if !(self.theta_omega > T::zero() && self.theta_omega < T::one()) {
            return bad("theta_omega must lie in (0, 1)");
        }
        if !(self.eta >= T::zero()) || !self.eta.is_finite() {
            return bad("eta must be nonnegative");
        }
        if !self.theta_gamma.is_finite() || !self.mu_lambda.is_finite() {
            return bad("theta_gamma and mu_lambda must be finite");
        }
        Ok(())
    }
}

/// One state of the Markov chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterState<T> {
    pub beta0: Vec<T>,
    /// p×q covariate effects on the mediators.
    pub b: Matrix<T>,
    pub tau: Vec<T>,
    pub gamma: Vec<bool>,
    pub lambda: Vec<T>,
    pub sigma_sq_sigma: T,
    pub alpha0: T,
    pub alpha: Vec<T>,
    pub alpha_p1: T,
    pub delta: Vec<T>,
    pub omega: Vec<bool>,
    pub sigma_sq: T,
}

impl<T: Real> ParameterState<T> {
    /// All coefficients zero, all indicators off, unit variances.
    pub fn zeros(q: usize, p: usize) -> Self {
        ParameterState {
            beta0: vec![T::zero(); q],
            b: Matrix::zeros(p, q),
            tau: vec![T::zero(); q],
            gamma: vec![false; q],
            lambda: vec![T::zero(); q],
            sigma_sq_sigma: T::one(),
            alpha0: T::zero(),
            alpha: vec![T::zero(); p],
            alpha_p1: T::zero(),
            delta: vec![T::zero(); q],
            omega: vec![false; q],
            sigma_sq: T::one(),
        }
    }

    pub fn q(&self) -> usize {
        self.tau.len()
    }

    pub fn p(&self) -> usize {
        self.alpha.len()
    }

    pub fn covariance(&self) -> FactorCovariance<T> {
        FactorCovariance::new(self.lambda.clone(), self.sigma_sq_sigma)
    }

    /// Checks the spike/SSB support constraints and variance positivity.
    pub fn check_invariants(&self) -> Result<()> {
        let q = self.q();
        let p = self.p();
        let dims_ok = self.beta0.len() == q
            && self.gamma.len() == q
            && self.lambda.len() == q
            && self.delta.len() == q
            && self.omega.len() == q
            && self.b.rows() == p
            && self.b.cols() == q;
        if !dims_ok {
            return Err(Error::InvalidInput("parameter state has inconsistent dimensions".into()));
        }
        for j in 0..q {
            if !self.gamma[j] && self.tau[j] != T::zero() {
                return Err(Error::InvalidInput(format!("gamma[{j}] is off but tau[{j}] is nonzero")));
            }
            if self.omega[j] && !self.gamma[j] {
                return Err(Error::InvalidInput(format!("omega[{j}] is on while gamma[{j}] is off")));
            }
            if !self.omega[j] && self.delta[j] != T::zero() {
                return Err(Error::InvalidInput(format!("omega[{j}] is off but delta[{j}] is nonzero")));
            }
        }
        if !(self.sigma_sq_sigma > T::zero()) || !(self.sigma_sq > T::zero()) {
            return Err(Error::InvalidInput("variances must be positive".into()));
        }
        Ok(())
    }
}
