//! Log partition function of the MRF prior on γ as a function of λ.
//!
//! With `ρ_j = |λ_j|/√(λ_j²+1)` the MRF log mass is
//! `Σ_j γ_j a_j + (η/2)(Σ_j ρ_j γ_j)²` where `a_j = θγ − η ρ_j²/2`.
//! Writing `exp(η S²/2) = E[exp(√η S z)]` for standard normal `z` gives
//! `Z = E_z Π_j (1 + exp(a_j + √η ρ_j z))`, a one-dimensional integral whose
//! log-integrand has curvature at least −1. The trapezoid rule on a grid of
//! spacing 1/4 is then accurate to far below double precision.

use std::ops::Range;

use crate::scalar::Real;

const STEP: f64 = 0.25;
const MARGIN: f64 = 12.0;
/// Nodes further than this below the peak log-integrand contribute less than
/// the rounding error of the sum and are skipped when peeking.
const WINDOW: f64 = 60.0;

fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn log_sum_exp<T: Real>(values: impl Iterator<Item = T> + Clone) -> T {
    let max = values.clone().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<T>().ln()
}

#[derive(Clone, Debug)]
pub(crate) struct MrfNormalizer<T> {
    theta: T,
    eta: T,
    sqrt_eta: T,
    rho: Vec<T>,
    nodes: Vec<T>,
    /// `softplus(a_j + b_j z_k)`, row j.
    terms: Vec<T>,
    /// `log φ(z_k) + log h + Σ_j terms[j][k]`.
    log_terms: Vec<T>,
    window: Range<usize>,
    upper: T,
    sum_b: T,
    /// Window terms of the last peeked replacement.
    scratch: Vec<T>,
    peeked: Option<(usize, T)>,
}

impl<T: Real> MrfNormalizer<T> {
    pub(crate) fn new(theta: T, eta: T, rho: &[T]) -> Self {
        let mut norm = MrfNormalizer {
            theta,
            eta,
            sqrt_eta: eta.sqrt(),
            rho: rho.to_vec(),
            nodes: Vec::new(),
            terms: Vec::new(),
            log_terms: Vec::new(),
            window: 0..0,
            upper: T::zero(),
            sum_b: T::zero(),
            scratch: Vec::new(),
            peeked: None,
        };
        norm.rebuild();
        norm
    }

    fn rebuild(&mut self) {
        let margin = T::lit(MARGIN);
        self.sum_b = self.sqrt_eta * self.rho.iter().copied().sum::<T>();
        self.upper = self.sum_b + margin + self.sqrt_eta * T::lit(4.0);
        let h = T::lit(STEP);
        let count = ((self.upper + margin) / h).ceil().to_usize().unwrap_or(0) + 1;
        let log_h = h.ln() - T::lit(0.5) * T::TAU().ln();
        self.nodes = (0..count).map(|k| -margin + h * T::from_usize_lossy(k)).collect();
        self.terms = Vec::with_capacity(count * self.rho.len());
        for j in 0..self.rho.len() {
            for k in 0..count {
                let t = self.term(self.rho[j], self.nodes[k]);
                self.terms.push(t);
            }
        }
        self.log_terms = self.nodes.iter().map(|&z| log_h - T::lit(0.5) * z * z).collect();
        for j in 0..self.rho.len() {
            for (acc, &t) in self.log_terms.iter_mut().zip(&self.terms[j * count..(j + 1) * count]) {
                *acc = *acc + t;
            }
        }
        self.set_window();
        self.peeked = None;
    }

    fn set_window(&mut self) {
        let max = self.log_terms.iter().copied().fold(T::neg_infinity(), T::max);
        let keep = |t: &T| *t >= max - T::lit(WINDOW);
        let lo = self.log_terms.iter().position(keep).unwrap_or(0);
        let hi = self.log_terms.iter().rposition(keep).map_or(self.nodes.len(), |k| k + 1);
        self.window = lo..hi;
    }

    fn term(&self, rho: T, z: T) -> T {
        softplus(self.theta - T::lit(0.5) * self.eta * rho * rho + self.sqrt_eta * rho * z)
    }

    fn row(&self, j: usize) -> &[T] {
        let count = self.nodes.len();
        &self.terms[j * count..(j + 1) * count]
    }

    pub(crate) fn log_z(&self) -> T {
        log_sum_exp(self.log_terms[self.window.clone()].iter().copied())
    }

    fn fits(&self, j: usize, new: T) -> bool {
        self.sum_b + self.sqrt_eta * (new - self.rho[j]) + T::lit(MARGIN) <= self.upper
    }

    /// `log Z` after replacing `ρ_j` by `new`.
    pub(crate) fn log_z_replacing(&mut self, j: usize, new: T) -> T {
        if !self.fits(j, new) {
            let mut r = self.rho.clone();
            r[j] = new;
            self.peeked = None;
            return MrfNormalizer::new(self.theta, self.eta, &r).log_z();
        }
        let w = self.window.clone();
        self.scratch.clear();
        for k in w.clone() {
            let t = self.term(new, self.nodes[k]);
            self.scratch.push(t);
        }
        self.peeked = Some((j, new));
        let row = &self.row(j)[w.clone()];
        log_sum_exp(self.log_terms[w].iter().zip(row).zip(&self.scratch).map(|((&l, &o), &n)| l - o + n))
    }

    /// Commits `ρ_j = new`, reusing the last peek when it matches.
    pub(crate) fn replace(&mut self, j: usize, new: T) {
        if !self.fits(j, new) {
            self.rho[j] = new;
            self.rebuild();
            return;
        }
        let count = self.nodes.len();
        let reuse = self.peeked == Some((j, new));
        let w = self.window.clone();
        for k in 0..count {
            let t = if reuse && w.contains(&k) { self.scratch[k - w.start] } else { self.term(new, self.nodes[k]) };
            let slot = &mut self.terms[j * count + k];
            self.log_terms[k] = self.log_terms[k] - *slot + t;
            *slot = t;
        }
        self.sum_b = self.sum_b + self.sqrt_eta * (new - self.rho[j]);
        self.rho[j] = new;
        self.peeked = None;
        self.set_window();
    }
}
