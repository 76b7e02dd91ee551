use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MediationDataset;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioId {
    /// Correlated mediators (λ = 0.35·1), active pathways.
    I,
    /// Independent mediators (λ = 0), active pathways.
    II,
    /// Correlated mediators, no exposure effects (null).
    III,
    /// User-supplied mediator covariance.
    #[serde(rename = "IV-like")]
    IvLike,
}

impl std::str::FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(ScenarioId::I),
            "II" | "2" => Ok(ScenarioId::II),
            "III" | "3" => Ok(ScenarioId::III),
            "IV" | "IV-LIKE" | "4" => Ok(ScenarioId::IvLike),
            _ => Err(Error::InvalidInput(format!("unknown scenario {s:?}"))),
        }
    }
}

/// Full-scale settings (n = 1000, q = 300) or the reduced desk-scale variant
/// (n = 400, q = 60, twelve exposure-affected mediators).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioSize {
    #[default]
    Full,
    Small,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MediatorCovariance<T> {
    /// `σΣ² (λλᵀ + I)` with this scenario's `sigma_sq_sigma`.
    Factor(Vec<T>),
    /// Residual covariance used as-is.
    Explicit(Matrix<T>),
}

/// Parameters of the data-generating process.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec<T> {
    pub id: ScenarioId,
    pub n: usize,
    pub q: usize,
    pub p: usize,
    /// Loadings of the exposure on the covariates.
    pub l: Vec<T>,
    pub tau: Vec<T>,
    pub delta: Vec<T>,
    pub beta0: Vec<T>,
    /// p×q covariate effects on the mediators.
    pub b: Matrix<T>,
    pub sigma_sq_sigma: T,
    pub covariance: MediatorCovariance<T>,
    /// Optional symmetric reordering applied to an explicit covariance.
    pub permutation: Option<Vec<usize>>,
    pub alpha0: T,
    pub alpha: Vec<T>,
    pub alpha_p1: T,
    pub sigma_sq: T,
    pub seed: u64,
}

/// Ground-truth pathway indicators of a generated dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrueActiveSets {
    /// `τ_j ≠ 0`.
    pub gamma_true: Vec<bool>,
    /// `τ_j δ_j ≠ 0`.
    pub joint_true: Vec<bool>,
}

impl TrueActiveSets {
    pub fn from_effects<T: Real>(tau: &[T], delta: &[T]) -> Self {
        TrueActiveSets {
            gamma_true: tau.iter().map(|t| *t != T::zero()).collect(),
            joint_true: tau.iter().zip(delta).map(|(t, d)| *t * *d != T::zero()).collect(),
        }
    }
}

const TAU_LEVELS: [f64; 6] = [-0.12, -0.08, -0.04, 0.04, 0.08, 0.12];
const DELTA_CYCLE: [f64; 5] = [0.5, 1.0, 1.5, 0.0, 0.0];

fn full_effects<T: Real>(q: usize) -> (Vec<T>, Vec<T>) {
    let tau = (0..q).map(|j| if j < 30 { T::lit(TAU_LEVELS[j / 5]) } else { T::zero() }).collect();
    let delta = (0..q).map(|j| if j < 30 { T::lit(DELTA_CYCLE[j % 5]) } else { T::zero() }).collect();
    (tau, delta)
}

/// Twelve exposure-affected mediators: each τ level appears twice, and the
/// first of each pair carries δ = 1.5, the second δ = 0.
fn small_effects<T: Real>(q: usize) -> (Vec<T>, Vec<T>) {
    let tau = (0..q).map(|j| if j < 12 { T::lit(TAU_LEVELS[j / 2]) } else { T::zero() }).collect();
    let delta = (0..q)
        .map(|j| if j < 12 && j % 2 == 0 { T::lit(1.5) } else { T::zero() })
        .collect();
    (tau, delta)
}

impl<T: Real> ScenarioSpec<T> {
    /// Scenarios I–III with the generating values used throughout the simulation study.
    pub fn preset(id: ScenarioId, size: ScenarioSize, seed: u64) -> Result<Self> {
        let (n, q) = match size {
            ScenarioSize::Full => (1000, 300),
            ScenarioSize::Small => (400, 60),
        };
        let lambda = match id {
            ScenarioId::I | ScenarioId::III => T::lit(0.35),
            ScenarioId::II => T::zero(),
            ScenarioId::IvLike => {
                return Err(Error::InvalidInput(
                    "the IV-like scenario needs a covariance matrix; use ScenarioSpec::iv_like".into(),
                ))
            }
        };
        let (mut tau, delta) = match size {
            ScenarioSize::Full => full_effects(q),
            ScenarioSize::Small => small_effects(q),
        };
        if id == ScenarioId::III {
            tau.iter_mut().for_each(|t| *t = T::zero());
        }
        Ok(Self::base(id, n, q, &[0.5, 0.2, 0.7, 0.4, 0.6], tau, delta, MediatorCovariance::Factor(vec![lambda; q]), seed))
    }

    /// Misspecified-covariance scenario: application-sized dimensions
    /// (n = 466, p = 3, q from the covariance) and an explicit residual covariance.
    pub fn iv_like(covariance: Matrix<T>, permutation: Option<Vec<usize>>, seed: u64) -> Self {
        let q = covariance.rows();
        let (tau, delta) = full_effects(q);
        let mut spec = Self::base(
            ScenarioId::IvLike,
            466,
            q,
            &[0.5, 0.2, 0.7],
            tau,
            delta,
            MediatorCovariance::Explicit(covariance),
            seed,
        );
        spec.permutation = permutation;
        spec
    }

    #[allow(clippy::too_many_arguments)]
    fn base(
        id: ScenarioId,
        n: usize,
        q: usize,
        l: &[f64],
        tau: Vec<T>,
        delta: Vec<T>,
        covariance: MediatorCovariance<T>,
        seed: u64,
    ) -> Self {
        let p = l.len();
        ScenarioSpec {
            id,
            n,
            q,
            p,
            l: l.iter().map(|&v| T::lit(v)).collect(),
            tau,
            delta,
            beta0: vec![T::lit(0.1); q],
            b: Matrix::fill(p, q, T::lit(0.1)),
            sigma_sq_sigma: T::lit(0.5),
            covariance,
            permutation: None,
            alpha0: T::lit(2.0),
            alpha: vec![T::lit(2.0); p],
            alpha_p1: T::lit(2.0),
            sigma_sq: T::lit(0.5),
            seed,
        }
    }

    pub fn truth(&self) -> TrueActiveSets {
        TrueActiveSets::from_effects(&self.tau, &self.delta)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.n == 0 || self.q == 0 {
            return bad("n and q must be positive".into());
        }
        let q = self.q;
        let p = self.p;
        if self.l.len() != p || self.alpha.len() != p {
            return bad(format!("l and alpha must have length p = {p}"));
        }
        if self.tau.len() != q || self.delta.len() != q || self.beta0.len() != q {
            return bad(format!("tau, delta and beta0 must have length q = {q}"));
        }
        if self.b.rows() != p || self.b.cols() != q {
            return bad(format!("B must be {p}×{q}"));
        }
        if !(self.sigma_sq_sigma > T::zero()) || !(self.sigma_sq > T::zero()) {
            return bad("variances must be positive".into());
        }
        match &self.covariance {
            MediatorCovariance::Factor(lambda) => {
                if lambda.len() != q {
                    return bad(format!("lambda must have length q = {q}"));
                }
                if self.permutation.is_some() {
                    return bad("a permutation applies only to an explicit covariance".into());
                }
            }
            MediatorCovariance::Explicit(cov) => {
                if cov.rows() != q || cov.cols() != q {
                    return bad(format!("covariance must be {q}×{q}"));
                }
                let scale = cov.as_slice().iter().fold(T::zero(), |m, v| m.max(v.abs()));
                if !cov.is_symmetric(scale * T::lit(1e-10)) {
                    return bad("covariance is not symmetric".into());
                }
                cholesky(cov)?;
            }
        }
        if let Some(perm) = &self.permutation {
            let mut seen = vec![false; q];
            for &i in perm {
                if i >= q || std::mem::replace(&mut seen[i], true) {
                    return bad("permutation is not a permutation of 0..q".into());
                }
            }
            if perm.len() != q {
                return bad("permutation must have length q".into());
            }
        }
        Ok(())
    }

    /// Mediator residual covariance used by the generator.
    pub fn generating_covariance(&self) -> Matrix<T> {
        match &self.covariance {
            MediatorCovariance::Factor(lambda) => Matrix::from_fn(self.q, self.q, |r, c| {
                let id = if r == c { T::one() } else { T::zero() };
                self.sigma_sq_sigma * (lambda[r] * lambda[c] + id)
            }),
            MediatorCovariance::Explicit(cov) => match &self.permutation {
                Some(perm) => cov.permute_symmetric(perm),
                None => cov.clone(),
            },
        }
    }
}

/// Draws `(X, A, M, Y)` from the mediator and outcome models.
///
/// Deterministic in `spec.seed`; variates are drawn in the order X, A, M, Y.
pub fn generate_scenario<T: Real>(spec: &ScenarioSpec<T>) -> Result<(MediationDataset<T>, TrueActiveSets)> {
    spec.validate()?;
    let (n, p, q) = (spec.n, spec.p, spec.q);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut x = Matrix::zeros(n, p);
    for i in 0..n {
        for l in 0..p {
            x[(i, l)] = T::std_normal(&mut rng);
        }
    }
    let a: Vec<T> = (0..n)
        .map(|i| (0..p).map(|l| spec.l[l] * x[(i, l)]).sum::<T>() + T::std_normal(&mut rng))
        .collect();

    let chol = match &spec.covariance {
        MediatorCovariance::Explicit(_) => Some(cholesky(&spec.generating_covariance())?),
        MediatorCovariance::Factor(_) => None,
    };
    let sd_sigma = spec.sigma_sq_sigma.sqrt();
    let mut m = Matrix::zeros(n, q);
    let mut z = vec![T::zero(); q];
    for i in 0..n {
        let mean = |j: usize| {
            spec.beta0[j] + spec.tau[j] * a[i] + (0..p).map(|l| spec.b[(l, j)] * x[(i, l)]).sum::<T>()
        };
        match (&spec.covariance, &chol) {
            (MediatorCovariance::Factor(lambda), _) => {
                let f = T::std_normal(&mut rng);
                for j in 0..q {
                    let e = sd_sigma * (lambda[j] * f + T::std_normal(&mut rng));
                    m[(i, j)] = mean(j) + e;
                }
            }
            (MediatorCovariance::Explicit(_), Some(l)) => {
                z.iter_mut().for_each(|v| *v = T::std_normal(&mut rng));
                for j in 0..q {
                    let e = (0..=j).map(|k| l[(j, k)] * z[k]).sum::<T>();
                    m[(i, j)] = mean(j) + e;
                }
            }
            (MediatorCovariance::Explicit(_), None) => unreachable!(),
        }
    }

    let sd_y = spec.sigma_sq.sqrt();
    let y: Vec<T> = (0..n)
        .map(|i| {
            spec.alpha0
                + (0..q).map(|j| spec.delta[j] * m[(i, j)]).sum::<T>()
                + (0..p).map(|l| spec.alpha[l] * x[(i, l)]).sum::<T>()
                + spec.alpha_p1 * a[i]
                + sd_y * T::std_normal(&mut rng)
        })
        .collect();

    Ok((MediationDataset::new(x, a, m, y)?, spec.truth()))
}
