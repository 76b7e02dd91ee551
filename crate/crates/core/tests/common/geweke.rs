//! Geweke joint-distribution test: the marginal-conditional simulator draws
//! (θ, data) from prior × likelihood; the successive-conditional simulator
//! alternates one MCMC sweep with a fresh data draw. Both must produce the
//! same law for θ.

use medsel::linalg::Matrix;
use medsel::model::{mrf_log_potential, FactorCovariance, Hyperparameters, ModelVariant, ParameterState};
use medsel::sampler::{ChainRng, Feedback, KernelOptions, Sampler};
use medsel::scalar::{logistic, Real};
use medsel::MediationDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const N: usize = 20;
pub const Q: usize = 5;
pub const P: usize = 2;

pub fn hyperparameters(eta: f64) -> Hyperparameters<f64> {
    let mut hp = Hyperparameters::defaults(Q);
    hp.theta_gamma = 0.0;
    hp.theta_omega = 0.5;
    hp.eta = eta;
    hp.v_sq = vec![1.0; Q];
    hp.psi_sq = vec![1.0; Q];
    hp.h0 = 1.0;
    hp.c0 = 1.0;
    hp.s0 = 1.0;
    hp.t0 = 1.0;
    hp.k0 = 1.0;
    hp.h_lambda = 1.0;
    // τ² scales like σΣ⁴ through the λ prior; twelve degrees of freedom keep
    // every monitored functional's variance finite.
    hp.nu0 = 12.0;
    hp.nu1 = 12.0;
    hp
}

fn normal(rng: &mut ChaCha8Rng, var: f64) -> f64 {
    var.sqrt() * f64::std_normal(rng)
}

fn inv_gamma(rng: &mut ChaCha8Rng, shape: f64, rate: f64) -> f64 {
    rate / <f64 as Real>::gamma(shape, rng)
}

/// γ from the MRF given λ, by enumerating all 2^q configurations.
fn draw_gamma(rng: &mut ChaCha8Rng, lambda: &[f64], hp: &Hyperparameters<f64>) -> Vec<bool> {
    let cov = FactorCovariance::new(lambda.to_vec(), 1.0);
    let configs: Vec<Vec<bool>> = (0..1u32 << Q).map(|m| (0..Q).map(|b| m >> b & 1 == 1).collect()).collect();
    let logw: Vec<f64> = configs.iter().map(|g| mrf_log_potential(g, &cov, hp)).collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let mut u = rng.random::<f64>() * w.iter().sum::<f64>();
    for (g, wi) in configs.iter().zip(&w) {
        if u < *wi {
            return g.clone();
        }
        u -= wi;
    }
    configs.last().unwrap().clone()
}

pub fn prior_draw(rng: &mut ChaCha8Rng, hp: &Hyperparameters<f64>) -> ParameterState<f64> {
    let mut s = ParameterState::zeros(Q, P);
    s.sigma_sq_sigma = inv_gamma(rng, hp.nu0 / 2.0, hp.nu0 * hp.sigma0_sq / 2.0);
    s.lambda = (0..Q).map(|_| hp.mu_lambda + normal(rng, hp.h_lambda * s.sigma_sq_sigma)).collect();
    s.gamma = if hp.eta == 0.0 {
        (0..Q).map(|_| rng.random::<f64>() < logistic(hp.theta_gamma)).collect()
    } else {
        draw_gamma(rng, &s.lambda, hp)
    };
    for j in 0..Q {
        if s.gamma[j] {
            s.tau[j] = normal(rng, hp.v_sq[j] * s.sigma_sq_sigma * (s.lambda[j] * s.lambda[j] + 1.0));
        }
        s.beta0[j] = normal(rng, hp.h0);
        for l in 0..P {
            s.b[(l, j)] = normal(rng, hp.c0);
        }
    }
    s.sigma_sq = inv_gamma(rng, hp.nu1 / 2.0, hp.nu1 * hp.sigma1_sq / 2.0);
    for j in 0..Q {
        s.omega[j] = s.gamma[j] && rng.random::<f64>() < hp.theta_omega;
        if s.omega[j] {
            s.delta[j] = normal(rng, hp.psi_sq[j] * s.sigma_sq);
        }
    }
    s.alpha0 = normal(rng, hp.s0);
    s.alpha = (0..P).map(|_| normal(rng, hp.t0)).collect();
    s.alpha_p1 = normal(rng, hp.k0);
    s
}

pub fn design(seed: u64) -> (Matrix<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Matrix::from_fn(N, P, |_, _| f64::std_normal(&mut rng));
    let a = (0..N).map(|_| f64::std_normal(&mut rng)).collect();
    (x, a)
}

pub fn data_draw(rng: &mut ChaCha8Rng, x: &Matrix<f64>, a: &[f64], s: &ParameterState<f64>) -> MediationDataset<f64> {
    let root = s.sigma_sq_sigma.sqrt();
    let mut m = Matrix::zeros(N, Q);
    let mut y = vec![0.0; N];
    for i in 0..N {
        let f = f64::std_normal(rng);
        for j in 0..Q {
            let mut mean = s.beta0[j] + s.tau[j] * a[i];
            for l in 0..P {
                mean += s.b[(l, j)] * x[(i, l)];
            }
            m[(i, j)] = mean + root * (s.lambda[j] * f + f64::std_normal(rng));
        }
        let mut mean = s.alpha0 + s.alpha_p1 * a[i];
        for l in 0..P {
            mean += s.alpha[l] * x[(i, l)];
        }
        for j in 0..Q {
            mean += s.delta[j] * m[(i, j)];
        }
        y[i] = mean + s.sigma_sq.sqrt() * f64::std_normal(rng);
    }
    MediationDataset::new(x.clone(), a.to_vec(), m, y).unwrap()
}

/// Whether a functional depends only on mediator-model parameters.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Side {
    Mediator,
    Outcome,
}

pub struct Functional {
    pub name: &'static str,
    pub side: Side,
    pub f: fn(&ParameterState<f64>) -> f64,
}

pub fn functionals() -> Vec<Functional> {
    use Side::*;
    vec![
        Functional { name: "tau_1", side: Mediator, f: |s| s.tau[0] },
        Functional { name: "tau_1^2", side: Mediator, f: |s| s.tau[0] * s.tau[0] },
        Functional { name: "gamma_1", side: Mediator, f: |s| s.gamma[0] as u8 as f64 },
        Functional { name: "gamma_1*gamma_2", side: Mediator, f: |s| (s.gamma[0] && s.gamma[1]) as u8 as f64 },
        Functional { name: "sum gamma", side: Mediator, f: |s| s.gamma.iter().filter(|&&g| g).count() as f64 },
        Functional { name: "lambda_1", side: Mediator, f: |s| s.lambda[0] },
        Functional { name: "lambda_1^2", side: Mediator, f: |s| s.lambda[0] * s.lambda[0] },
        Functional { name: "sigma_sq_Sigma", side: Mediator, f: |s| s.sigma_sq_sigma },
        Functional { name: "beta0_1", side: Mediator, f: |s| s.beta0[0] },
        Functional { name: "delta_1", side: Outcome, f: |s| s.delta[0] },
        Functional { name: "delta_1^2", side: Outcome, f: |s| s.delta[0] * s.delta[0] },
        Functional { name: "omega_1", side: Outcome, f: |s| s.omega[0] as u8 as f64 },
        Functional { name: "sum omega", side: Outcome, f: |s| s.omega.iter().filter(|&&g| g).count() as f64 },
        Functional { name: "sigma_sq", side: Outcome, f: |s| s.sigma_sq },
        Functional { name: "alpha_p1", side: Outcome, f: |s| s.alpha_p1 },
    ]
}

pub struct ZScore {
    pub name: &'static str,
    pub side: Side,
    pub z: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean of an autocorrelated series by batch means.
fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| mean(&xs[b * size..(b + 1) * size])).collect();
    let m = mean(&means);
    let var = means.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

pub struct GewekeSettings {
    pub eta: f64,
    pub feedback: Feedback,
    pub lambda_mrf_term: bool,
    pub samples: usize,
    pub seed: u64,
}

pub fn run(settings: &GewekeSettings) -> Vec<ZScore> {
    let hp = hyperparameters(settings.eta);
    let fs = functionals();
    let (x, a) = design(settings.seed);
    let variant = if settings.eta > 0.0 { ModelVariant::MvnMrfSsb } else { ModelVariant::MvnIbSsb };
    let opts = KernelOptions {
        variant,
        feedback: settings.feedback,
        lambda_mrf_term: settings.lambda_mrf_term,
        proposal_sd: 0.6,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5eed);
    let mut marginal = vec![Vec::with_capacity(settings.samples); fs.len()];
    for _ in 0..settings.samples {
        let s = prior_draw(&mut rng, &hp);
        for (k, f) in fs.iter().enumerate() {
            marginal[k].push((f.f)(&s));
        }
    }

    let mut chain_rng = ChainRng::new(settings.seed);
    let mut state = prior_draw(&mut rng, &hp);
    let mut data = data_draw(&mut rng, &x, &a, &state);
    let mut successive = vec![Vec::with_capacity(settings.samples); fs.len()];
    for _ in 0..settings.samples {
        {
            let mut sampler = Sampler::new(&data, hp.clone(), opts.clone()).unwrap();
            sampler.sweep(&mut state, &mut chain_rng).unwrap();
        }
        for (k, f) in fs.iter().enumerate() {
            successive[k].push((f.f)(&state));
        }
        data = data_draw(&mut rng, &x, &a, &state);
    }

    fs.iter()
        .enumerate()
        .map(|(k, f)| {
            let mc = &marginal[k];
            let sc = &successive[k];
            let m1 = mean(mc);
            let v1 = mc.iter().map(|v| (v - m1) * (v - m1)).sum::<f64>() / (mc.len() - 1) as f64;
            let se = (v1 / mc.len() as f64 + batch_means_se(sc, 100).powi(2)).sqrt();
            ZScore { name: f.name, side: f.side, z: (mean(sc) - m1) / se }
        })
        .collect()
}
