//! Criteria that need fitted replicates. Fits are shared between criteria and
//! computed on first use.

use std::sync::OnceLock;

use medsel::data::{generate_scenario, ScenarioId, ScenarioSize, ScenarioSpec, TrueActiveSets};
use medsel::inference::{operating_characteristics, ppi, psr_report, selection_summary, OperatingCharacteristics};
use medsel::tuning::{median_gamma, phase_transition_scan};
use medsel::{
    run_chain, run_chains, ChainConfig, EffectContrast, FactorCovariance, Hyperparameters, ModelVariant,
    PhaseScanConfig, PhaseScanResult,
};
use rayon::prelude::*;

use crate::oracles::psr_example;
use crate::Outcome;

const REPLICATES: u64 = 20;
const N_ITER: usize = 20_000;
const BURN_IN: usize = 10_000;
const FDR_TARGET: f64 = 0.05;
const CONTRAST: (f64, f64) = (1.0, -1.0);

const SCAN_STEP: f64 = 0.5;
const SCAN_POINTS: usize = 41;
const SCAN_M_PT: usize = 1_000;
const SCAN_BURN_IN: usize = 1_000;
/// The scan runs on its own dataset, not on any replicate.
const PILOT_SEED: u64 = 1_000;

fn spec(id: ScenarioId, seed: u64) -> ScenarioSpec<f64> {
    ScenarioSpec::preset(id, ScenarioSize::Small, seed).unwrap()
}

fn chain(variant: ModelVariant, seed: u64) -> ChainConfig {
    ChainConfig { n_iter: N_ITER, burn_in: BURN_IN, seed, model_variant: variant, ..ChainConfig::default() }
}

fn hyper(q: usize, variant: ModelVariant, eta: f64) -> Hyperparameters<f64> {
    Hyperparameters::defaults(q).with_eta(if variant.uses_mrf() { eta } else { 0.0 })
}

static SCANS: [OnceLock<PhaseScanResult>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];

fn slot(id: ScenarioId) -> usize {
    match id {
        ScenarioId::I => 0,
        ScenarioId::II => 1,
        _ => 2,
    }
}

fn scan(id: ScenarioId) -> &'static PhaseScanResult {
    SCANS[slot(id)].get_or_init(|| {
        let (data, _) = generate_scenario(&spec(id, PILOT_SEED)).unwrap();
        let cfg = PhaseScanConfig {
            eta_grid: (0..SCAN_POINTS).map(|g| g as f64 * SCAN_STEP).collect(),
            m_pt: SCAN_M_PT,
            jump_threshold: 0.05,
            chain_template: ChainConfig {
                burn_in: SCAN_BURN_IN,
                seed: 77,
                model_variant: ModelVariant::MvnMrfSsb,
                ..ChainConfig::default()
            },
        };
        let r = phase_transition_scan(&cfg, &data, &Hyperparameters::defaults(data.q())).unwrap();
        eprintln!(
            "  scenario {id:?}: eta scan selected {} (transition at {:?}, warning {})",
            r.eta_selected, r.eta_pt, r.warning
        );
        r
    })
}

struct Fit {
    ppi_joint: Vec<f64>,
    selected: Vec<usize>,
    oc: OperatingCharacteristics,
    /// Conditional posterior mean of IE_j, when defined.
    ie_mean: Vec<Option<f64>>,
    alpha_p1: f64,
    lambda_accept: Option<f64>,
}

struct Replicate {
    /// True IE_j under the study contrast.
    ie_true: Vec<f64>,
    fits: Vec<Fit>,
}

struct Study {
    eta: f64,
    variants: Vec<ModelVariant>,
    reps: Vec<Replicate>,
}

impl Study {
    fn column(&self, variant: ModelVariant) -> usize {
        self.variants.iter().position(|&v| v == variant).unwrap()
    }

    fn fits(&self, variant: ModelVariant) -> impl Iterator<Item = &Fit> {
        let k = self.column(variant);
        self.reps.iter().map(move |r| &r.fits[k])
    }
}

fn fit(data: &medsel::Dataset, truth: &TrueActiveSets, variant: ModelVariant, eta: f64, seed: u64) -> Fit {
    let draws = run_chain(&chain(variant, seed), data, &hyper(data.q(), variant, eta)).unwrap();
    let contrast = EffectContrast::new(CONTRAST.0, CONTRAST.1).unwrap();
    let s = selection_summary(&[draws.clone()], data.mediator_names(), contrast, FDR_TARGET).unwrap();
    Fit {
        oc: operating_characteristics(&s.selected, &truth.joint_true).unwrap(),
        ie_mean: s.effects.ie_per_mediator.iter().map(|e| e.map(|e| e.mean)).collect(),
        alpha_p1: s.effects.de.mean / contrast.multiplier(),
        lambda_accept: draws.accept_rates.lambda,
        ppi_joint: s.ppi_joint,
        selected: s.selected,
    }
}

fn run_study(id: ScenarioId, variants: &[ModelVariant]) -> Study {
    let eta = scan(id).eta_selected;
    let reps = (1..=REPLICATES)
        .into_par_iter()
        .map(|r| {
            let spec = spec(id, r);
            let (data, truth) = generate_scenario(&spec).unwrap();
            let fits = variants.iter().map(|&v| fit(&data, &truth, v, eta, 100 + r)).collect();
            let ie_true = spec.tau.iter().zip(&spec.delta).map(|(t, d)| (CONTRAST.0 - CONTRAST.1) * t * d).collect();
            eprintln!("  scenario {id:?}: replicate {r} fitted");
            Replicate { ie_true, fits }
        })
        .collect();
    Study { eta, variants: variants.to_vec(), reps }
}

static STUDIES: [OnceLock<Study>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];

fn study(id: ScenarioId) -> &'static Study {
    use ModelVariant::*;
    STUDIES[slot(id)].get_or_init(|| match id {
        ScenarioId::III => run_study(id, &[NormalIbSsb, MvnIbSsb, MvnMrfSsb]),
        _ => run_study(id, &[MvnIbSsb, MvnMrfSsb]),
    })
}

fn median(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(f64::total_cmp);
    let k = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[k]
    } else {
        0.5 * (xs[k - 1] + xs[k])
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn effect_recovery() -> Outcome {
    let st = study(ScenarioId::I);
    let mrf: Vec<&Fit> = st.fits(ModelVariant::MvnMrfSsb).collect();
    let ie_true = &st.reps[0].ie_true;
    let targets: Vec<usize> = (0..ie_true.len()).filter(|&j| (ie_true[j].abs() - 0.36).abs() < 1e-9).collect();
    let mut pass = !targets.is_empty();
    let mut parts = vec![format!("eta {}", st.eta)];
    for &j in &targets {
        let defined: Vec<f64> = mrf.iter().filter_map(|f| f.ie_mean[j]).collect();
        let ppi_med = median(mrf.iter().map(|f| f.ppi_joint[j]).collect());
        // A replicate that never includes the pathway has no conditional mean;
        // at least half of the replicates must provide one.
        let enough = 2 * defined.len() >= mrf.len();
        let ie_med = if defined.is_empty() { f64::NAN } else { median(defined.clone()) };
        let ok = enough && (ie_med - ie_true[j]).abs() <= 0.10 && ppi_med > 0.9;
        pass &= ok;
        parts.push(format!(
            "M{}: true IE {:+.2}, median PM {:+.3} ({} of {} replicates defined), median PPI {:.3}",
            j + 1,
            ie_true[j],
            ie_med,
            defined.len(),
            mrf.len(),
            ppi_med
        ));
    }
    let alpha_bias = mean(&mrf.iter().map(|f| f.alpha_p1 - 2.0).collect::<Vec<_>>());
    let accept: Vec<f64> = mrf.iter().filter_map(|f| f.lambda_accept).collect();
    parts.push(format!(
        "info: mean alpha_p1 bias {alpha_bias:+.3}, lambda acceptance {:.2}..{:.2}",
        accept.iter().cloned().fold(f64::INFINITY, f64::min),
        accept.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    ));
    Outcome::new(pass, parts.join("; "))
}

/// `P(Binom(n, 1/2) ≥ k)`.
fn binomial_upper_tail(k: usize, n: usize) -> f64 {
    let mut c = 1.0f64;
    let mut total = 0.0;
    for i in 0..=n {
        if i >= k {
            total += c;
        }
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    total / 2f64.powi(n as i32)
}

pub fn improvement() -> Outcome {
    let st = study(ScenarioId::I);
    let rates = |v: ModelVariant| -> (Vec<f64>, Vec<f64>) {
        st.fits(v).map(|f| (f.oc.tpr.unwrap(), f.oc.fpr.unwrap())).unzip()
    };
    let (tpr_mrf, fpr_mrf) = rates(ModelVariant::MvnMrfSsb);
    let (tpr_ib, fpr_ib) = rates(ModelVariant::MvnIbSsb);
    let wins = tpr_mrf.iter().zip(&tpr_ib).filter(|(m, i)| m > i).count();
    let losses = tpr_mrf.iter().zip(&tpr_ib).filter(|(m, i)| m < i).count();
    let p = binomial_upper_tail(wins, wins + losses);
    let tpr_ok = mean(&tpr_mrf) >= mean(&tpr_ib);
    let fpr_ok = mean(&fpr_mrf) <= 2.0 * mean(&fpr_ib);
    let sign_ok = p < 0.05;
    Outcome::new(
        tpr_ok && fpr_ok && sign_ok,
        format!(
            "eta {}; mean TPR MRF {:.3} vs IB {:.3}; mean FPR MRF {:.4} vs IB {:.4}; sign test {wins} wins, {losses} losses, p = {p:.4}",
            st.eta,
            mean(&tpr_mrf),
            mean(&tpr_ib),
            mean(&fpr_mrf),
            mean(&fpr_ib)
        ),
    )
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

pub fn equivalence() -> Outcome {
    let st = study(ScenarioId::II);
    let pairs: Vec<(&Fit, &Fit)> = st.fits(ModelVariant::MvnMrfSsb).zip(st.fits(ModelVariant::MvnIbSsb)).collect();
    let corr: Vec<f64> = pairs.iter().map(|(m, i)| pearson(&m.ppi_joint, &i.ppi_joint)).collect();
    let undefined = corr.iter().filter(|c| c.is_nan()).count();
    // An undefined correlation counts as no agreement.
    let corr_med = median(corr.iter().map(|c| if c.is_nan() { 0.0 } else { *c }).collect());
    let diff_med = median(
        pairs
            .iter()
            .map(|(m, i)| {
                let only_m = m.selected.iter().filter(|j| !i.selected.contains(j)).count();
                let only_i = i.selected.iter().filter(|j| !m.selected.contains(j)).count();
                (only_m + only_i) as f64
            })
            .collect(),
    );
    Outcome::new(
        corr_med > 0.95 && diff_med <= 2.0,
        format!(
            "eta {}; median PPI correlation {corr_med:.4} (min {:.4}, {undefined} undefined); median selection difference {diff_med}",
            st.eta,
            corr.iter().cloned().fold(f64::INFINITY, f64::min)
        ),
    )
}

pub fn null_control() -> Outcome {
    let st = study(ScenarioId::III);
    let mut pass = true;
    let mut parts = vec![format!("eta {}", st.eta)];
    for &v in &st.variants {
        let fpr = median(st.fits(v).map(|f| f.oc.fpr.unwrap()).collect());
        let nvs = median(st.fits(v).map(|f| f.oc.nvs as f64).collect());
        pass &= fpr <= 0.02 && nvs <= 1.0;
        parts.push(format!("{v}: median FPR {fpr:.4}, median NVS {nvs}"));
    }
    Outcome::new(pass, parts.join("; "))
}

pub fn convergence() -> Outcome {
    let eta = scan(ScenarioId::II).eta_selected;
    let (data, _) = generate_scenario(&spec(ScenarioId::II, 1)).unwrap();
    let variant = ModelVariant::MvnMrfSsb;
    let configs: Vec<ChainConfig> = (201..=203).map(|s| chain(variant, s)).collect();
    let chains: Vec<_> =
        run_chains(&configs, &data, &hyper(data.q(), variant, eta)).into_iter().map(Result::unwrap).collect();
    let p = ppi(&chains).unwrap();
    let report = psr_report(&chains, &p.joint).unwrap();
    let worst = report
        .entries
        .iter()
        .filter_map(|e| e.psr.map(|v| (v, e.name.as_str())))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    let (example_ok, example) = psr_example();
    let medians: Vec<f64> = chains.iter().map(|c| median_gamma(c).unwrap()).collect();
    Outcome::new(
        report.converged && example_ok,
        format!(
            "eta {eta}; {} monitored scalars, max PSR {:.4} ({}); worked example {example:.15} vs sqrt(3/4); info: median gamma per chain {medians:?}",
            report.entries.len(),
            worst.map_or(f64::NAN, |w| w.0),
            worst.map_or("-", |w| w.1)
        ),
    )
}

pub fn throughput() -> Outcome {
    let q = 298;
    let cov = FactorCovariance::new(vec![0.35; q], 0.5).dense();
    let (data, _) = generate_scenario(&ScenarioSpec::iv_like(cov, None, 11)).unwrap();
    assert_eq!((data.n(), data.q(), data.p()), (466, 298, 3));
    let cfg = ChainConfig {
        n_iter: 10_000,
        burn_in: 5_000,
        thin: 100,
        seed: 11,
        model_variant: ModelVariant::MvnMrfSsb,
        ..ChainConfig::default()
    };
    let draws = run_chain(&cfg, &data, &Hyperparameters::defaults(q).with_eta(1.0)).unwrap();
    let secs = draws.wall_time_secs;
    Outcome::new(secs <= 1800.0, format!("10000 MVN-MRF-SSB sweeps in {secs:.1} s (limit 1800 s)"))
}
