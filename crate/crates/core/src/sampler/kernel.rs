use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::normalizer::MrfNormalizer;
use super::Feedback;
use crate::data::MediationDataset;
use crate::error::{Error, Result};
use crate::linalg::{dot, sample_canonical, sample_diag_minus_rank_one, Matrix};
use crate::model::{FactorCovariance, Hyperparameters, ModelVariant, ParameterState};
use crate::scalar::{bernoulli_logit, inv_gamma, logit, Real};

/// The two per-chain random streams.
#[derive(Clone, Debug)]
pub struct ChainRng {
    pub mediator: ChaCha8Rng,
    pub outcome: ChaCha8Rng,
}

impl ChainRng {
    pub fn new(seed: u64) -> Self {
        let mediator = ChaCha8Rng::seed_from_u64(seed);
        let mut outcome = ChaCha8Rng::seed_from_u64(seed);
        outcome.set_stream(1);
        ChainRng { mediator, outcome }
    }
}

#[derive(Clone, Debug)]
pub struct KernelOptions<T> {
    pub variant: ModelVariant,
    pub feedback: Feedback,
    pub lambda_mrf_term: bool,
    /// Initial λ random-walk standard deviation, shared by every coordinate.
    pub proposal_sd: T,
}

/// Gibbs/Metropolis kernel bound to one dataset.
///
/// The public block methods resynchronize the residual caches with the state
/// they are handed, so they can be called in any order. [`Sampler::sweep`]
/// does that once and then keeps the caches current incrementally.
pub struct Sampler<'a, T: Real> {
    data: &'a MediationDataset<T>,
    hp: Hyperparameters<T>,
    opts: KernelOptions<T>,
    s_aa: T,
    x_sq: Vec<T>,
    m_sq: Vec<T>,
    m_gram: Matrix<T>,
    /// Gram matrix of `Z = (1, X, A)`.
    z_gram: Matrix<T>,
    /// `M − 1β0ᵀ − Aτᵀ − XB`, n×q.
    resid_m: Matrix<T>,
    /// `Y − α0 − Xα − α_{p+1}A − Mδ`.
    resid_y: Vec<T>,
    log_sd: Vec<T>,
}

fn numerical(block: &'static str, what: &str, value: impl std::fmt::Display) -> Error {
    Error::numerical(block, format!("{what} = {value}"))
}

impl<'a, T: Real> Sampler<'a, T> {
    pub fn new(data: &'a MediationDataset<T>, hp: Hyperparameters<T>, opts: KernelOptions<T>) -> Result<Self> {
        hp.validate(data.q())?;
        if !(opts.proposal_sd > T::zero()) {
            return Err(Error::InvalidInput("lambda proposal scale must be positive".into()));
        }
        let (n, p, q) = (data.n(), data.p(), data.q());
        let a = data.a();
        let x = data.x();
        let m_gram = data.m().gram();
        let m_sq = (0..q).map(|j| m_gram[(j, j)]).collect();
        let z_col = |c: usize| -> Vec<T> {
            match c {
                0 => vec![T::one(); n],
                c if c <= p => x.col(c - 1).to_vec(),
                _ => a.to_vec(),
            }
        };
        let z = Matrix::from_columns(n, (0..p + 2).map(z_col).collect());
        Ok(Sampler {
            data,
            s_aa: dot(a, a),
            x_sq: (0..p).map(|l| dot(x.col(l), x.col(l))).collect(),
            m_sq,
            m_gram,
            z_gram: z.gram(),
            resid_m: Matrix::zeros(n, q),
            resid_y: vec![T::zero(); n],
            log_sd: vec![opts.proposal_sd.ln(); q],
            hp,
            opts,
        })
    }

    pub fn hyperparameters(&self) -> &Hyperparameters<T> {
        &self.hp
    }

    pub fn proposal_sd(&self) -> Vec<T> {
        self.log_sd.iter().map(|v| v.exp()).collect()
    }

    pub fn set_proposal_sd(&mut self, sd: &[T]) {
        self.log_sd = sd.iter().map(|v| v.ln()).collect();
    }

    /// Maps `(coordinate, log sd)` to a new log sd for every λ coordinate.
    pub fn adapt_proposals(&mut self, mut f: impl FnMut(usize, T) -> T) {
        for (j, v) in self.log_sd.iter_mut().enumerate() {
            *v = f(j, *v);
        }
    }

    fn refresh_mediator_resid(&mut self, s: &ParameterState<T>) {
        let data = self.data;
        let (a, x) = (data.a(), data.x());
        for j in 0..data.q() {
            let (b0, tj) = (s.beta0[j], s.tau[j]);
            let col = self.resid_m.col_mut(j);
            for ((r, &m), &ai) in col.iter_mut().zip(data.m().col(j)).zip(a) {
                *r = m - b0 - tj * ai;
            }
            for l in 0..data.p() {
                let blj = s.b[(l, j)];
                if blj != T::zero() {
                    for (r, &xi) in col.iter_mut().zip(x.col(l)) {
                        *r = *r - blj * xi;
                    }
                }
            }
        }
    }

    fn refresh_outcome_resid(&mut self, s: &ParameterState<T>) {
        let data = self.data;
        for ((r, &y), &ai) in self.resid_y.iter_mut().zip(data.y()).zip(data.a()) {
            *r = y - s.alpha0 - s.alpha_p1 * ai;
        }
        for l in 0..data.p() {
            axpy(&mut self.resid_y, -s.alpha[l], data.x().col(l));
        }
        for j in 0..data.q() {
            if s.delta[j] != T::zero() {
                axpy(&mut self.resid_y, -s.delta[j], data.m().col(j));
            }
        }
    }

    /// One full sweep. Returns per-coordinate λ acceptance, or `None` when λ
    /// is pinned.
    pub fn sweep(&mut self, s: &mut ParameterState<T>, rng: &mut ChainRng) -> Result<Option<Vec<bool>>> {
        self.refresh_mediator_resid(s);
        self.refresh_outcome_resid(s);
        self.mediator_fixed(s, &mut rng.mediator)?;
        self.outcome_fixed(s, &mut rng.outcome)?;
        self.gamma_tau(s, &mut rng.mediator)?;
        self.refine_tau(s, &mut rng.mediator)?;
        let acc = self.lambda(s, &mut rng.mediator)?;
        self.sigma_sq_sigma(s, &mut rng.mediator)?;
        self.omega_delta(s, &mut rng.outcome)?;
        self.refine_delta(s, &mut rng.outcome)?;
        self.sigma_sq(s, &mut rng.outcome)?;
        Ok(acc)
    }

    /// β0 and B (mediator stream) then (α0, α, α_{p+1}) (outcome stream).
    pub fn update_fixed_effects(&mut self, s: &mut ParameterState<T>, rng: &mut ChainRng) -> Result<()> {
        self.refresh_mediator_resid(s);
        self.mediator_fixed(s, &mut rng.mediator)?;
        self.refresh_outcome_resid(s);
        self.outcome_fixed(s, &mut rng.outcome)
    }

    pub fn update_gamma_tau<R: Rng + ?Sized>(&mut self, s: &mut ParameterState<T>, rng: &mut R) -> Result<()> {
        self.refresh_mediator_resid(s);
        self.refresh_outcome_resid(s);
        self.gamma_tau(s, rng)
    }

    pub fn refine_tau<R: Rng + ?Sized>(&mut self, s: &mut ParameterState<T>, rng: &mut R) -> Result<()> {
        self.refresh_mediator_resid(s);
        self.refine_tau_inner(s, rng)
    }

    pub fn refine_delta<R: Rng + ?Sized>(&mut self, s: &mut ParameterState<T>, rng: &mut R) -> Result<()> {
        self.refresh_outcome_resid(s);
        self.refine_delta_inner(s, rng)
    }

    /// Refines both active blocks: τ from the mediator stream, δ from the outcome stream.
    pub fn refine_active(&mut self, s: &mut ParameterState<T>, rng: &mut ChainRng) -> Result<()> {
        self.refine_tau(s, &mut rng.mediator)?;
        self.refine_delta(s, &mut rng.outcome)
    }

    pub fn update_lambda<R: Rng + ?Sized>(&mut self, s: &mut ParameterState<T>, rng: &mut R) -> Result<Option<Vec<bool>>> {
        self.refresh_mediator_resid(s);
        self.lambda(s, rng)
    }

    /// σΣ² (mediator stream) then σ² (outcome stream).
    pub fn update_variances(&mut self, s: &mut ParameterState<T>, rng: &mut ChainRng) -> Result<()> {
        self.refresh_mediator_resid(s);
        self.sigma_sq_sigma(s, &mut rng.mediator)?;
        self.refresh_outcome_resid(s);
        self.sigma_sq(s, &mut rng.outcome)
    }

    pub fn update_omega_delta<R: Rng + ?Sized>(&mut self, s: &mut ParameterState<T>, rng: &mut R) -> Result<()> {
        self.refresh_outcome_resid(s);
        self.omega_delta(s, rng)
    }

    /// Inverse-gamma (shape, rate) of the σΣ² full conditional.
    pub fn sigma_sq_sigma_conditional(&mut self, s: &ParameterState<T>) -> (T, T) {
        self.refresh_mediator_resid(s);
        self.sigma_sq_sigma_params(s)
    }

    /// Inverse-gamma (shape, rate) of the σ² full conditional.
    pub fn sigma_sq_conditional(&mut self, s: &ParameterState<T>) -> (T, T) {
        self.refresh_outcome_resid(s);
        self.sigma_sq_params(s)
    }

    fn mediator_fixed<R: Rng + ?Sized>(&mut self, s: &mut ParameterState<T>, rng: &mut R) -> Result<()> {
        let data = self.data;
        let (n, p, q) = (data.n(), data.p(), data.q());
        let cov = s.covariance();
        let sig = s.sigma_sq_sigma;
        let k = cov.shrink();
        let nf = T::from_usize_lossy(n);

        let u: Vec<T> = (0..q).map(|j| self.resid_m.col(j).iter().copied().sum::<T>() + nf * s.beta0[j]).collect();
        let d = vec![nf / sig + T::one() / self.hp.h0; q];
        let draw = sample_diag_minus_rank_one(&d, nf * k / sig, cov.lambda(), &cov.inv_apply(&u), rng)
            .map_err(|_| numerical("beta0", "precision", "not positive definite"))?;
        for j in 0..q {
            let delta = draw[j] - s.beta0[j];
            if delta != T::zero() {
                self.resid_m.col_mut(j).iter_mut().for_each(|r| *r = *r - delta);
            }
            s.beta0[j] = draw[j];
        }

        for l in 0..p {
            let xl = data.x().col(l);
            let sll = self.x_sq[l];
            let u: Vec<T> = (0..q).map(|j| dot(self.resid_m.col(j), xl) + sll * s.b[(l, j)]).collect();
            let d = vec![sll / sig + T::one() / self.hp.c0; q];
            let draw = sample_diag_minus_rank_one(&d, sll * k / sig, cov.lambda(), &cov.inv_apply(&u), rng)
                .map_err(|_| numerical("B", "precision", "not positive definite"))?;
            for j in 0..q {
                let delta = draw[j] - s.b[(l, j)];
                if delta != T::zero() {
                    axpy(self.resid_m.col_mut(j), -delta, xl);
                }
                s.b[(l, j)] = draw[j];
            }
        }
        Ok(())
    }

    fn outcome_fixed<R: Rng + ?Sized>(&mut self, s: &mut ParameterState<T>, rng: &mut R) -> Result<()> {
        let data = self.data;
        let p = data.p();
        let dim = p + 2;
        let mut coef = Vec::with_capacity(dim);
        coef.push(s.alpha0);
        coef.extend_from_slice(&s.alpha);
        coef.push(s.alpha_p1);
        let zcol = |c: usize| -> Option<&[T]> {
            match c {
                0 => None,
                c if c <= p => Some(data.x().col(c - 1)),
                _ => Some(data.a()),
            }
        };
        let z_t_f = |c: usize, f: &[T]| match zcol(c) {
            None => f.iter().copied().sum::<T>(),
            Some(col) => dot(col, f),
        };
        let inv_s2 = T::one() / s.sigma_sq;
        let mut prec = Matrix::zeros(dim, dim);
        let mut linear = vec![T::zero(); dim];
        for r in 0..dim {
            let mut g_coef = T::zero();
            for c in 0..dim {
                prec[(r, c)] = self.z_gram[(r, c)] * inv_s2;
                g_coef = g_coef + self.z_gram[(r, c)] * coef[c];
            }
            let prior = match r {
                0 => self.hp.s0,
                r if r <= p => self.hp.t0,
                _ => self.hp.k0,
            };
            prec[(r, r)] = prec[(r, r)] + T::one() / prior;
            linear[r] = (z_t_f(r, &self.resid_y) + g_coef) * inv_s2;
        }
        let draw = sample_canonical(&prec, &linear, rng)
            .map_err(|_| numerical("alpha", "precision", "not positive definite (collinear covariates?)"))?;
        for c in 0..dim {
            let delta = draw[c] - coef[c];
            match zcol(c) {
                None => self.resid_y.iter_mut().for_each(|r| *r = *r - delta),
                Some(col) => axpy(&mut self.resid_y, -delta, col),
            }
        }
        s.alpha0 = draw[0];
        s.alpha.copy_from_slice(&draw[1..=p]);
        s.alpha_p1 = draw[p + 1];
        Ok(())
    }

    fn gamma_tau<R: Rng + ?Sized>(&mut self, s: &mut ParameterState<T>, rng: &mut R) -> Result<()> {
        let data = self.data;
        let q = data.q();
        let a = data.a();
        let cov = s.covariance();
        let sig = s.sigma_sq_sigma;
        let k = cov.shrink();
        let lambda = cov.lambda();
        let mut v: Vec<T> = (0..q).map(|j| dot(a, self.resid_m.col(j))).collect();
        let mut lv = dot(lambda, &v);
        let mrf = self.opts.variant.uses_mrf() && self.hp.eta != T::zero();
        let rho: Vec<T> = if mrf { (0..q).map(|j| cov.corr_root(j)).collect() } else { Vec::new() };
        let mut neighbours = if mrf { (0..q).filter(|&j| s.gamma[j]).map(|j| rho[j]).sum() } else { T::zero() };
        let ssb_off = (T::one() - self.hp.theta_omega).ln();
        let half = T::lit(0.5);
        for j in 0..q {
            let lj = lambda[j];
            let lik_prec = self.s_aa * cov.inv_diag(j);
            let slab_prec = T::one() / (self.hp.v_sq[j] * cov.diag(j));
            let prec = lik_prec + slab_prec;
            if !(prec > T::zero()) || !prec.is_finite() {
                return Err(numerical("gamma/tau", "posterior precision", prec));
            }
            let lin = (v[j] - k * lj * lv) / sig + lik_prec * s.tau[j];
            let mut log_odds = self.hp.theta_gamma + half * (slab_prec / prec).ln() + half * lin * lin / prec;
            if mrf {
                let own = if s.gamma[j] { rho[j] } else { T::zero() };
                log_odds = log_odds + self.hp.eta * rho[j] * (neighbours - own);
            }
            let on = match self.opts.feedback {
                Feedback::Full if s.omega[j] => true,
                Feedback::Full => bernoulli_logit(log_odds + ssb_off, rng),
                Feedback::Cut => bernoulli_logit(log_odds, rng),
            };
            if !log_odds.is_finite() {
                return Err(numerical("gamma/tau", "log odds", log_odds));
            }
            let new_tau = if on { lin / prec + T::std_normal(rng) / prec.sqrt() } else { T::zero() };
            let delta = new_tau - s.tau[j];
            if delta != T::zero() {
                v[j] = v[j] - self.s_aa * delta;
                lv = lv - lj * self.s_aa * delta;
                axpy(self.resid_m.col_mut(j), -delta, a);
            }
            s.tau[j] = new_tau;
            if s.gamma[j] != on {
                if mrf {
                    neighbours = if on { neighbours + rho[j] } else { neighbours - rho[j] };
                }
                if !on && s.omega[j] {
                    axpy(&mut self.resid_y, s.delta[j], data.m().col(j));
                    s.omega[j] = false;
                    s.delta[j] = T::zero();
                }
                s.gamma[j] = on;
            }
        }
        Ok(())
    }

    fn refine_tau_inner<R: Rng + ?Sized>(&mut self, s: &mut ParameterState<T>, rng: &mut R) -> Result<()> {
        let data = self.data;
        let active: Vec<usize> = (0..data.q()).filter(|&j| s.gamma[j]).collect();
        if active.is_empty() {
            return Ok(());
        }
        let a = data.a();
        let cov = s.covariance();
        let sig = s.sigma_sq_sigma;
        let u: Vec<T> = (0..data.q()).map(|j| dot(a, self.resid_m.col(j)) + self.s_aa * s.tau[j]).collect();
        let sinv_u = cov.inv_apply(&u);
        let d: Vec<T> =
            active.iter().map(|&j| self.s_aa / sig + T::one() / (self.hp.v_sq[j] * cov.diag(j))).collect();
        let lam: Vec<T> = active.iter().map(|&j| cov.lambda()[j]).collect();
        let lin: Vec<T> = active.iter().map(|&j| sinv_u[j]).collect();
        let draw = sample_diag_minus_rank_one(&d, self.s_aa * cov.shrink() / sig, &lam, &lin, rng)
            .map_err(|_| numerical("refine tau", "precision", "not positive definite"))?;
        for (&j, &t) in active.iter().zip(&draw) {
            let delta = t - s.tau[j];
            if delta != T::zero() {
                axpy(self.resid_m.col_mut(j), -delta, a);
            }
            s.tau[j] = t;
        }
        Ok(())
    }

    fn lambda<R: Rng + ?Sized>(&mut self, s: &mut ParameterState<T>, rng: &mut R) -> Result<Option<Vec<bool>>> {
        if self.opts.variant.pins_lambda() {
            return Ok(None);
        }
        let data = self.data;
        let (n, q) = (data.n(), data.q());
        let sig = s.sigma_sq_sigma;
        let half = T::lit(0.5);
        let nf = T::from_usize_lossy(n);
        let mut w = vec![T::zero(); n];
        for j in 0..q {
            axpy(&mut w, s.lambda[j], self.resid_m.col(j));
        }
        let mut sw2 = dot(&w, &w);
        let mut norm_sq = dot(&s.lambda, &s.lambda);
        let loglik = |norm_sq: T, sw2: T| -half * nf * norm_sq.ln_1p() + sw2 / (T::lit(2.0) * sig * (T::one() + norm_sq));
        let prior_var = self.hp.h_lambda * sig;
        let log_prior = |l: T| {
            let d = l - self.hp.mu_lambda;
            -d * d / (T::lit(2.0) * prior_var)
        };
        let rho = |l: T| l.abs() / (l * l + T::one()).sqrt();

        let mrf = self.opts.lambda_mrf_term && self.opts.variant.uses_mrf() && self.hp.eta != T::zero();
        let mut norm = mrf.then(|| {
            let r: Vec<T> = s.lambda.iter().map(|&l| rho(l)).collect();
            MrfNormalizer::new(self.hp.theta_gamma, self.hp.eta, &r)
        });
        let mut neighbours: T = if mrf { (0..q).filter(|&j| s.gamma[j]).map(|j| rho(s.lambda[j])).sum() } else { T::zero() };
        let mut log_z = norm.as_ref().map_or(T::zero(), MrfNormalizer::log_z);

        let mut accepted = vec![false; q];
        for j in 0..q {
            let col = self.resid_m.col(j);
            let aj = dot(&w, col);
            let bj = dot(col, col);
            let old = s.lambda[j];
            let new = old + self.log_sd[j].exp() * T::std_normal(rng);
            let step = new - old;
            let norm_new = norm_sq - old * old + new * new;
            let sw2_new = sw2 + T::lit(2.0) * step * aj + step * step * bj;
            let mut log_ratio = loglik(norm_new, sw2_new) - loglik(norm_sq, sw2) + log_prior(new) - log_prior(old);
            if s.gamma[j] {
                let slab = |l: T| {
                    let d = l * l + T::one();
                    -half * d.ln() - s.tau[j] * s.tau[j] / (T::lit(2.0) * self.hp.v_sq[j] * sig * d)
                };
                log_ratio = log_ratio + slab(new) - slab(old);
            }
            let mut log_z_new = log_z;
            if let Some(nz) = norm.as_mut() {
                let (ro, rn) = (rho(old), rho(new));
                if s.gamma[j] {
                    log_ratio = log_ratio + self.hp.eta * (rn - ro) * (neighbours - ro);
                }
                log_z_new = nz.log_z_replacing(j, rn);
                log_ratio = log_ratio - (log_z_new - log_z);
            }
            if log_ratio.is_nan() {
                return Err(numerical("lambda", "log acceptance ratio", log_ratio));
            }
            if T::open01(rng).ln() < log_ratio {
                accepted[j] = true;
                axpy(&mut w, step, col);
                sw2 = sw2_new;
                norm_sq = norm_new;
                s.lambda[j] = new;
                if let Some(nz) = norm.as_mut() {
                    let (ro, rn) = (rho(old), rho(new));
                    nz.replace(j, rn);
                    if s.gamma[j] {
                        neighbours = neighbours - ro + rn;
                    }
                    log_z = log_z_new;
                }
            }
        }
        Ok(Some(accepted))
    }

    fn sigma_sq_sigma_params(&self, s: &ParameterState<T>) -> (T, T) {
        let data = self.data;
        let (n, q) = (data.n(), data.q());
        let half = T::lit(0.5);
        let cov = FactorCovariance::new(s.lambda.clone(), T::one());
        let mut quad = T::zero();
        let mut w = vec![T::zero(); n];
        for j in 0..q {
            let col = self.resid_m.col(j);
            quad = quad + dot(col, col);
            axpy(&mut w, s.lambda[j], col);
        }
        quad = quad - cov.shrink() * dot(&w, &w);
        let mut count = n * q;
        if !self.opts.variant.pins_lambda() {
            count += q;
            let dev: T = s.lambda.iter().map(|&l| (l - self.hp.mu_lambda) * (l - self.hp.mu_lambda)).sum();
            quad = quad + dev / self.hp.h_lambda;
        }
        for j in (0..q).filter(|&j| s.gamma[j]) {
            count += 1;
            quad = quad + s.tau[j] * s.tau[j] / (self.hp.v_sq[j] * (s.lambda[j] * s.lambda[j] + T::one()));
        }
        let shape = half * (self.hp.nu0 + T::from_usize_lossy(count));
        let rate = half * (self.hp.nu0 * self.hp.sigma0_sq + quad);
        (shape, rate)
    }

    fn sigma_sq_sigma<R: Rng + ?Sized>(&mut self, s: &mut ParameterState<T>, rng: &mut R) -> Result<()> {
        let (shape, rate) = self.sigma_sq_sigma_params(s);
        if !(rate > T::zero()) || !rate.is_finite() {
            return Err(numerical("sigma_sq_Sigma", "rate", rate));
        }
        s.sigma_sq_sigma = inv_gamma(shape, rate, rng);
        Ok(())
    }

    fn omega_delta<R: Rng + ?Sized>(&mut self, s: &mut ParameterState<T>, rng: &mut R) -> Result<()> {
        let data = self.data;
        let half = T::lit(0.5);
        let prior_lo = logit(self.hp.theta_omega);
        let s2 = s.sigma_sq;
        for j in (0..data.q()).filter(|&j| s.gamma[j]) {
            let col = data.m().col(j);
            let slab_prec = T::one() / (self.hp.psi_sq[j] * s2);
            let prec = self.m_sq[j] / s2 + slab_prec;
            if !(prec > T::zero()) || !prec.is_finite() {
                return Err(numerical("omega/delta", "posterior precision", prec));
            }
            let lin = (dot(col, &self.resid_y) + s.delta[j] * self.m_sq[j]) / s2;
            let log_odds = prior_lo + half * (slab_prec / prec).ln() + half * lin * lin / prec;
            if !log_odds.is_finite() {
                return Err(numerical("omega/delta", "log odds", log_odds));
            }
            let on = bernoulli_logit(log_odds, rng);
            let new_delta = if on { lin / prec + T::std_normal(rng) / prec.sqrt() } else { T::zero() };
            let delta = new_delta - s.delta[j];
            if delta != T::zero() {
                axpy(&mut self.resid_y, -delta, col);
            }
            s.omega[j] = on;
            s.delta[j] = new_delta;
        }
        Ok(())
    }

    fn refine_delta_inner<R: Rng + ?Sized>(&mut self, s: &mut ParameterState<T>, rng: &mut R) -> Result<()> {
        let data = self.data;
        let active: Vec<usize> = (0..data.q()).filter(|&j| s.omega[j]).collect();
        if active.is_empty() {
            return Ok(());
        }
        let m = active.len();
        let inv_s2 = T::one() / s.sigma_sq;
        let mut prec = Matrix::zeros(m, m);
        let mut linear = vec![T::zero(); m];
        for (r, &jr) in active.iter().enumerate() {
            let mut g_delta = T::zero();
            for (c, &jc) in active.iter().enumerate() {
                prec[(r, c)] = self.m_gram[(jr, jc)] * inv_s2;
                g_delta = g_delta + self.m_gram[(jr, jc)] * s.delta[jc];
            }
            prec[(r, r)] = prec[(r, r)] + inv_s2 / self.hp.psi_sq[jr];
            linear[r] = (dot(data.m().col(jr), &self.resid_y) + g_delta) * inv_s2;
        }
        let draw = sample_canonical(&prec, &linear, rng)
            .map_err(|_| numerical("refine delta", "precision", "not positive definite (collinear mediators?)"))?;
        for (&j, &d) in active.iter().zip(&draw) {
            let delta = d - s.delta[j];
            if delta != T::zero() {
                axpy(&mut self.resid_y, -delta, data.m().col(j));
            }
            s.delta[j] = d;
        }
        Ok(())
    }

    fn sigma_sq_params(&self, s: &ParameterState<T>) -> (T, T) {
        let half = T::lit(0.5);
        let mut count = self.data.n();
        let mut quad = dot(&self.resid_y, &self.resid_y);
        for j in (0..self.data.q()).filter(|&j| s.omega[j]) {
            count += 1;
            quad = quad + s.delta[j] * s.delta[j] / self.hp.psi_sq[j];
        }
        (half * (self.hp.nu1 + T::from_usize_lossy(count)), half * (self.hp.nu1 * self.hp.sigma1_sq + quad))
    }

    fn sigma_sq<R: Rng + ?Sized>(&mut self, s: &mut ParameterState<T>, rng: &mut R) -> Result<()> {
        let (shape, rate) = self.sigma_sq_params(s);
        if !(rate > T::zero()) || !rate.is_finite() {
            return Err(numerical("sigma_sq", "rate", rate));
        }
        s.sigma_sq = inv_gamma(shape, rate, rng);
        Ok(())
    }
}

#[inline]
fn axpy<T: Real>(y: &mut [T], alpha: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}
