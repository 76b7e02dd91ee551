use super::{FactorCovariance, Hyperparameters};
use crate::scalar::{logistic, Real};

/// `log N(x; 0, var)`.
pub fn normal_log_pdf<T: Real>(x: T, var: T) -> T {
    -T::lit(0.5) * ((T::TAU() * var).ln() + x * x / var)
}

/// Log-odds `θγ + η Σ_{r≠j} |c_rj| γ_r` of the MRF conditional for γ_j.
pub fn mrf_log_odds<T: Real>(gamma: &[bool], cov: &FactorCovariance<T>, j: usize, hp: &Hyperparameters<T>) -> T {
    if hp.eta == T::zero() {
        return hp.theta_gamma;
    }
    let neighbours: T = (0..gamma.len())
        .filter(|&r| r != j && gamma[r])
        .map(|r| cov.corr_root(r))
        .sum();
    hp.theta_gamma + hp.eta * cov.corr_root(j) * neighbours
}

/// MRF conditional inclusion probability `p_j(γ, Σ)`.
pub fn mrf_inclusion_prob<T: Real>(
    gamma: &[bool],
    cov: &FactorCovariance<T>,
    j: usize,
    hp: &Hyperparameters<T>,
) -> T {
    logistic(mrf_log_odds(gamma, cov, j, hp))
}

/// Unnormalized log mass `θγ Σ_j γ_j + η Σ_{r<j} |c_rj| γ_r γ_j` of the joint
/// MRF whose full conditionals are [`mrf_inclusion_prob`].
pub fn mrf_log_potential<T: Real>(gamma: &[bool], cov: &FactorCovariance<T>, hp: &Hyperparameters<T>) -> T {
    let mut total = T::zero();
    let mut running = T::zero();
    for (j, &g) in gamma.iter().enumerate() {
        if g {
            let rho = cov.corr_root(j);
            total = total + hp.theta_gamma + hp.eta * rho * running;
            running = running + rho;
        }
    }
    total
}

/// Log prior mass of ω_j under the sequential subsetting Bernoulli prior:
/// Bernoulli(θω) when γ_j is on, a point mass at zero otherwise.
pub fn ssb_log_prior<T: Real>(omega_j: bool, gamma_j: bool, hp: &Hyperparameters<T>) -> T {
    match (gamma_j, omega_j) {
        (true, true) => hp.theta_omega.ln(),
        (true, false) => (T::one() - hp.theta_omega).ln(),
        (false, false) => T::zero(),
        (false, true) => T::neg_infinity(),
    }
}

fn spike_or_slab<T: Real>(value: T, active: bool, var: T) -> T {
    if active {
        normal_log_pdf(value, var)
    } else if value == T::zero() {
        T::zero()
    } else {
        T::neg_infinity()
    }
}

/// `γ_j N(0, v_j² Σ_jj) + (1 − γ_j) δ₀` evaluated at τ_j.
pub fn spike_slab_log_prior_tau<T: Real>(
    tau_j: T,
    gamma_j: bool,
    cov: &FactorCovariance<T>,
    hp: &Hyperparameters<T>,
    j: usize,
) -> T {
    spike_or_slab(tau_j, gamma_j, hp.v_sq[j] * cov.diag(j))
}

/// `ω_j N(0, ψ_j² σ²) + (1 − ω_j) δ₀` evaluated at δ_j.
pub fn spike_slab_log_prior_delta<T: Real>(
    delta_j: T,
    omega_j: bool,
    sigma_sq: T,
    hp: &Hyperparameters<T>,
    j: usize,
) -> T {
    spike_or_slab(delta_j, omega_j, hp.psi_sq[j] * sigma_sq)
}
