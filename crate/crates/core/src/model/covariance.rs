use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Real;

/// Rank-one-plus-diagonal mediator covariance `Σ = σΣ² (λλᵀ + I)`.
///
/// `Σ⁻¹ = σΣ⁻² (I − λλᵀ / (1 + ‖λ‖²))` and
/// `log|Σ| = q log σΣ² + log(1 + ‖λ‖²)`, so nothing here is worse than O(q).
#[derive(Clone, Debug, PartialEq)]
pub struct FactorCovariance<T> {
    lambda: Vec<T>,
    sigma_sq: T,
    lambda_norm_sq: T,
    log_det: T,
}

impl<T: Real> FactorCovariance<T> {
    pub fn new(lambda: Vec<T>, sigma_sq: T) -> Self {
        let lambda_norm_sq = dot(&lambda, &lambda);
        let q = T::from_usize_lossy(lambda.len());
        let log_det = q * sigma_sq.ln() + lambda_norm_sq.ln_1p();
        FactorCovariance { lambda, sigma_sq, lambda_norm_sq, log_det }
    }

    pub fn q(&self) -> usize {
        self.lambda.len()
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn sigma_sq(&self) -> T {
        self.sigma_sq
    }

    pub fn lambda_norm_sq(&self) -> T {
        self.lambda_norm_sq
    }

    pub fn log_det(&self) -> T {
        self.log_det
    }

    /// `1 / (1 + ‖λ‖²)`, the Woodbury shrinkage factor.
    pub fn shrink(&self) -> T {
        T::one() / (T::one() + self.lambda_norm_sq)
    }

    /// `Σ_jj = σΣ² (λ_j² + 1)`.
    pub fn diag(&self, j: usize) -> T {
        self.sigma_sq * (self.lambda[j] * self.lambda[j] + T::one())
    }

    /// `(Σ⁻¹)_jj`.
    pub fn inv_diag(&self, j: usize) -> T {
        (T::one() - self.shrink() * self.lambda[j] * self.lambda[j]) / self.sigma_sq
    }

    /// `Σ⁻¹ v`.
    pub fn inv_apply(&self, v: &[T]) -> Vec<T> {
        let proj = self.shrink() * dot(&self.lambda, v);
        v.iter().zip(&self.lambda).map(|(&vi, &li)| (vi - li * proj) / self.sigma_sq).collect()
    }

    /// `vᵀ Σ⁻¹ v`.
    pub fn quad_form(&self, v: &[T]) -> T {
        let proj = dot(&self.lambda, v);
        (dot(v, v) - self.shrink() * proj * proj) / self.sigma_sq
    }

    /// `|λ_j| / √(λ_j² + 1)`; the correlation magnitude factorizes as `|c_rj| = ρ_r ρ_j`.
    pub fn corr_root(&self, j: usize) -> T {
        let l = self.lambda[j];
        l.abs() / (l * l + T::one()).sqrt()
    }

    pub fn dense(&self) -> Matrix<T> {
        let q = self.q();
        Matrix::from_fn(q, q, |r, c| {
            let id = if r == c { T::one() } else { T::zero() };
            self.sigma_sq * (self.lambda[r] * self.lambda[c] + id)
        })
    }

    pub fn dense_inverse(&self) -> Matrix<T> {
        let q = self.q();
        let k = self.shrink();
        Matrix::from_fn(q, q, |r, c| {
            let id = if r == c { T::one() } else { T::zero() };
            (id - k * self.lambda[r] * self.lambda[c]) / self.sigma_sq
        })
    }
}

/// Correlation `λ_r λ_j / √((λ_r² + 1)(λ_j² + 1))` between mediators `r ≠ j`.
pub fn fa_correlation<T: Real>(cov: &FactorCovariance<T>, r: usize, j: usize) -> Result<T> {
    if r == j {
        return Err(Error::InvalidInput("correlation needs two distinct mediators".into()));
    }
    if r >= cov.q() || j >= cov.q() {
        return Err(Error::InvalidInput(format!("mediator index out of range for q = {}", cov.q())));
    }
    let (lr, lj) = (cov.lambda[r], cov.lambda[j]);
    Ok(lr * lj / ((lr * lr + T::one()) * (lj * lj + T::one())).sqrt())
}
