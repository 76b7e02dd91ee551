//! Observed data `(X, A, M, Y)`, CSV ingestion, preprocessing and the synthetic
//! scenario generator.

mod io;
mod preprocess;
mod scenario;

pub use io::{load_dataset, load_matrix, read_header, save_dataset, save_matrix, Schema};
pub use preprocess::{inverse_normal_ranks, preprocess, sample_skewness, PreprocessOptions, TransformReport};
pub use scenario::{
    generate_scenario, MediatorCovariance, ScenarioId, ScenarioSize, ScenarioSpec, TrueActiveSets,
};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Covariates `X` (n×p), exposure `A`, mediators `M` (n×q) and outcome `Y`.
///
/// Immutable once built: every constructor validates dimensions and rejects
/// non-finite values.
#[derive(Clone, Debug, PartialEq)]
pub struct MediationDataset<T> {
    x: Matrix<T>,
    a: Vec<T>,
    m: Matrix<T>,
    y: Vec<T>,
    mediator_names: Vec<String>,
    covariate_names: Vec<String>,
    exposure_name: String,
    outcome_name: String,
}

impl<T: Real> MediationDataset<T> {
    pub fn new(x: Matrix<T>, a: Vec<T>, m: Matrix<T>, y: Vec<T>) -> Result<Self> {
        let p = x.cols();
        let q = m.cols();
        let mediator_names = (1..=q).map(|j| format!("M{j}")).collect();
        let covariate_names = (1..=p).map(|l| format!("X{l}")).collect();
        Self::with_names(x, a, m, y, mediator_names, covariate_names)
    }

    pub fn with_names(
        x: Matrix<T>,
        a: Vec<T>,
        m: Matrix<T>,
        y: Vec<T>,
        mediator_names: Vec<String>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = a.len();
        if n == 0 {
            return Err(Error::InvalidInput("dataset needs at least one row".into()));
        }
        if m.cols() == 0 {
            return Err(Error::InvalidInput("dataset needs at least one mediator".into()));
        }
        if x.rows() != n || m.rows() != n || y.len() != n {
            return Err(Error::InvalidInput(format!(
                "row counts disagree: A={n}, X={}, M={}, Y={}",
                x.rows(),
                m.rows(),
                y.len()
            )));
        }
        if mediator_names.len() != m.cols() || covariate_names.len() != x.cols() {
            return Err(Error::InvalidInput("column name count does not match data".into()));
        }
        let finite = |v: &[T]| v.iter().all(|x| x.is_finite());
        if !(finite(x.as_slice()) && finite(&a) && finite(m.as_slice()) && finite(&y)) {
            return Err(Error::InvalidInput("dataset contains non-finite values".into()));
        }
        Ok(MediationDataset {
            x,
            a,
            m,
            y,
            mediator_names,
            covariate_names,
            exposure_name: "A".into(),
            outcome_name: "Y".into(),
        })
    }

    /// Zero-row dataset, for prior-recovery checks of the sampler blocks.
    #[cfg(test)]
    pub(crate) fn empty(p: usize, q: usize) -> Self {
        MediationDataset {
            x: Matrix::zeros(0, p),
            a: Vec::new(),
            m: Matrix::zeros(0, q),
            y: Vec::new(),
            mediator_names: (1..=q).map(|j| format!("M{j}")).collect(),
            covariate_names: (1..=p).map(|l| format!("X{l}")).collect(),
            exposure_name: "A".into(),
            outcome_name: "Y".into(),
        }
    }

    pub(crate) fn with_role_names(mut self, exposure: String, outcome: String) -> Self {
        self.exposure_name = exposure;
        self.outcome_name = outcome;
        self
    }

    /// Same covariates and exposure with new mediators and outcome.
    pub fn with_responses(&self, m: Matrix<T>, y: Vec<T>) -> Result<Self> {
        let out = Self::with_names(
            self.x.clone(),
            self.a.clone(),
            m,
            y,
            self.mediator_names.clone(),
            self.covariate_names.clone(),
        )?;
        Ok(out.with_role_names(self.exposure_name.clone(), self.outcome_name.clone()))
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn q(&self) -> usize {
        self.m.cols()
    }

    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn a(&self) -> &[T] {
        &self.a
    }

    pub fn m(&self) -> &Matrix<T> {
        &self.m
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn mediator_names(&self) -> &[String] {
        &self.mediator_names
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn exposure_name(&self) -> &str {
        &self.exposure_name
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome_name
    }

    /// Column roles matching this dataset's names.
    pub fn schema(&self) -> Schema {
        Schema {
            exposure: self.exposure_name.clone(),
            outcome: self.outcome_name.clone(),
            mediators: self.mediator_names.clone(),
            covariates: self.covariate_names.clone(),
        }
    }
}
