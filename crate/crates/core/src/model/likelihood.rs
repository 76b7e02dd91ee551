use super::ParameterState;
use crate::data::MediationDataset;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// `Σ_i log MVN(M_i; β0 + τ A_i + Bᵀ X_i, Σ)` with `Σ = σΣ²(λλᵀ + I)`, in O(nq).
pub fn mediator_loglik<T: Real>(data: &MediationDataset<T>, state: &ParameterState<T>) -> Result<T> {
    if !(state.sigma_sq_sigma > T::zero()) {
        return Err(Error::InvalidInput("sigma_sq_sigma must be positive".into()));
    }
    let (n, p, q) = (data.n(), data.p(), data.q());
    let cov = state.covariance();
    let x = data.x();
    let mut resid = vec![T::zero(); q];
    let mut quad = T::zero();
    for i in 0..n {
        for (j, r) in resid.iter_mut().enumerate() {
            let mut mean = state.beta0[j] + state.tau[j] * data.a()[i];
            for l in 0..p {
                mean = mean + state.b[(l, j)] * x[(i, l)];
            }
            *r = data.m()[(i, j)] - mean;
        }
        quad = quad + cov.quad_form(&resid);
    }
    let nf = T::from_usize_lossy(n);
    let qf = T::from_usize_lossy(q);
    let half = T::lit(0.5);
    Ok(-half * (nf * qf * T::TAU().ln() + nf * cov.log_det() + quad))
}

/// `Σ_i log N(Y_i; α0 + δᵀ M_i + αᵀ X_i + α_{p+1} A_i, σ²)`.
pub fn outcome_loglik<T: Real>(data: &MediationDataset<T>, state: &ParameterState<T>) -> Result<T> {
    if !(state.sigma_sq > T::zero()) {
        return Err(Error::InvalidInput("sigma_sq must be positive".into()));
    }
    let (n, p, q) = (data.n(), data.p(), data.q());
    let mut ss = T::zero();
    for i in 0..n {
        let mut mean = state.alpha0 + state.alpha_p1 * data.a()[i];
        for j in 0..q {
            mean = mean + state.delta[j] * data.m()[(i, j)];
        }
        for l in 0..p {
            mean = mean + state.alpha[l] * data.x()[(i, l)];
        }
        let r = data.y()[i] - mean;
        ss = ss + r * r;
    }
    let nf = T::from_usize_lossy(n);
    Ok(-T::lit(0.5) * (nf * (T::TAU() * state.sigma_sq).ln() + ss / state.sigma_sq))
}
