use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, ensure, Context};
use medsel::data::{generate_scenario, save_dataset, TrueActiveSets};
use medsel::inference::{
    operating_characteristics, ppi, psr_report, selection_summary, write_ppi_csv, write_psr_csv, write_summary_csv,
    OperatingCharacteristics, PsrReport,
};
use medsel::sampler::{read_draws, write_draws};
use medsel::tuning::write_phase_scan_csv;
use medsel::{phase_transition_scan, run_chains, Draws, EffectContrast, ModelVariant, SelectionSummary};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::manifest::{write_json, ContrastRecord, Manifest};

pub enum Status {
    Ok,
    Unconverged,
}

/// Failures split by exit code: bad input (2) or a failure while running (4).
pub enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

pub type Outcome = Result<Status, Failure>;

pub trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).runtime()
}

/// `summary.json`: the selection summary plus its convergence status.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitSummary {
    pub status: String,
    pub psr: PsrReport,
    #[serde(flatten)]
    pub selection: SelectionSummary,
}

fn write_truth(path: &Path, names: &[String], truth: &TrueActiveSets, tau: &[f64], delta: &[f64]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["mediator", "gamma_true", "joint_true", "tau", "delta"])?;
    for (j, name) in names.iter().enumerate() {
        let flag = |b: bool| if b { "1" } else { "0" };
        w.write_record([
            name.as_str(),
            flag(truth.gamma_true[j]),
            flag(truth.joint_true[j]),
            &tau[j].to_string(),
            &delta[j].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn read_truth(path: &Path) -> anyhow::Result<(Vec<String>, TrueActiveSets)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let (mut names, mut gamma_true, mut joint_true) = (Vec::new(), Vec::new(), Vec::new());
    let flag = |s: &str| match s {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        _ => Err(anyhow!("bad indicator {s:?} in {}", path.display())),
    };
    for rec in r.records() {
        let rec = rec?;
        names.push(rec.get(0).unwrap_or_default().to_owned());
        gamma_true.push(flag(rec.get(1).unwrap_or_default())?);
        joint_true.push(flag(rec.get(2).unwrap_or_default())?);
    }
    Ok((names, TrueActiveSets { gamma_true, joint_true }))
}

pub fn simulate(cfg: &RunConfig) -> Outcome {
    let spec = cfg.scenario_spec().config()?.ok_or_else(|| Failure::Config(anyhow!("simulate needs a [scenario] section")))?;
    let out = &cfg.output_dir;
    create_dir(out)?;
    let (data, truth) = generate_scenario(&spec).runtime()?;
    save_dataset(out.join("data.csv"), &data).runtime()?;
    write_truth(&out.join("truth.csv"), data.mediator_names(), &truth, &spec.tau, &spec.delta).runtime()?;
    Manifest::new("simulate", cfg, vec![spec.seed]).runtime()?.write(out).runtime()?;
    log::info!("wrote {} rows to {}", data.n(), out.display());
    Ok(Status::Ok)
}

/// Pools the chains and writes summary, PPI and PSR files into `out`.
fn report(out: &Path, chains: &[Draws], names: &[String], contrast: EffectContrast, fdr: f64) -> anyhow::Result<bool> {
    let p = ppi(chains)?;
    let psr = psr_report(chains, &p.joint)?;
    let selection = selection_summary(chains, names, contrast, fdr)?;
    write_summary_csv(&out.join("summary.csv"), &selection)?;
    write_ppi_csv(&out.join("ppi.csv"), &selection)?;
    write_psr_csv(&out.join("psr.csv"), &psr)?;
    let converged = psr.converged;
    if !converged {
        log::warn!("some monitored PSR is at or above {}; results are flagged unconverged", psr.threshold);
    }
    let status = if converged { "converged" } else { "unconverged" }.to_owned();
    write_json(&out.join("summary.json"), &FitSummary { status, psr, selection })?;
    Ok(converged)
}

pub fn fit(cfg: &RunConfig, keep_draws: bool) -> Outcome {
    let loaded = cfg.dataset().config()?;
    let data = &loaded.data;
    let hp = cfg.hyperparameters(data.q()).config()?;
    let contrast = cfg.contrast(data).config()?;
    let out = &cfg.output_dir;
    create_dir(out)?;

    let configs = cfg.chains.configs(cfg.model_variant);
    let chains = run_chains(&configs, data, &hp).into_iter().collect::<Result<Vec<_>, _>>().runtime()?;
    if keep_draws {
        for (k, c) in chains.iter().enumerate() {
            write_draws(&out.join(format!("chain_{}", k + 1)), c, data.mediator_names(), data.covariate_names())
                .runtime()?;
        }
    }
    let converged = report(out, &chains, data.mediator_names(), contrast, cfg.fdr_target).runtime()?;
    if let (Some(truth), Some(spec)) = (&loaded.truth, cfg.scenario_spec().runtime()?) {
        write_truth(&out.join("truth.csv"), data.mediator_names(), truth, &spec.tau, &spec.delta).runtime()?;
    }

    let mut manifest = Manifest::new("fit", cfg, configs.iter().map(|c| c.seed).collect())
        .runtime()?
        .with_model(cfg.model_variant, &hp);
    manifest.contrast =
        Some(ContrastRecord { a_prime: contrast.a_prime, a: contrast.a, multiplier: contrast.multiplier() });
    manifest.transforms = loaded.transforms.as_ref();
    manifest.converged = Some(converged);
    manifest.write(out).runtime()?;
    Ok(if converged { Status::Ok } else { Status::Unconverged })
}

pub fn phase_scan(cfg: &RunConfig) -> Outcome {
    let loaded = cfg.dataset().config()?;
    // The scan sets η itself; resolve the remaining constants as for an MRF fit.
    let mut mrf = cfg.clone();
    mrf.model_variant = ModelVariant::MvnMrfSsb;
    mrf.hyper.eta = Some(0.0);
    let hp = mrf.hyperparameters(loaded.data.q()).config()?;
    let scan_cfg = cfg.scan.config(&cfg.chains).config()?;
    let out = &cfg.output_dir;
    create_dir(out)?;

    let result = phase_transition_scan(&scan_cfg, &loaded.data, &hp).runtime()?;
    if result.warning {
        log::warn!("no phase transition on the grid; selected the largest eta, {}", result.eta_selected);
    }
    write_json(&out.join("phase_scan.json"), &result).runtime()?;
    write_phase_scan_csv(&out.join("phase_scan.csv"), &result).runtime()?;
    let seeds = (0..scan_cfg.eta_grid.len()).map(|g| scan_cfg.chain_for(g).seed).collect();
    let mut manifest = Manifest::new("phase-scan", cfg, seeds).runtime()?.with_model(ModelVariant::MvnMrfSsb, &hp);
    manifest.eta = Some(result.eta_selected);
    manifest.write(out).runtime()?;
    Ok(Status::Ok)
}

/// Chain directories: each argument is either a chain directory or a fit
/// output holding `chain_*` subdirectories.
fn chain_dirs(inputs: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut dirs = Vec::new();
    for input in inputs {
        if input.join("draws.json").exists() {
            dirs.push(input.clone());
            continue;
        }
        let mut found: Vec<PathBuf> = fs::read_dir(input)
            .with_context(|| format!("reading {}", input.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("draws.json").exists())
            .collect();
        ensure!(!found.is_empty(), "{} holds no chain draws", input.display());
        found.sort();
        dirs.extend(found);
    }
    Ok(dirs)
}

#[derive(Serialize)]
struct SummarizeManifest<'a> {
    command: &'static str,
    version: &'static str,
    git_describe: &'static str,
    inputs: &'a [PathBuf],
    seeds: Vec<u64>,
    fdr_target: f64,
    contrast: ContrastRecord,
    converged: bool,
}

pub fn summarize(inputs: &[PathBuf], fdr: f64, contrast: EffectContrast, out: &Path) -> Outcome {
    let dirs = chain_dirs(inputs).config()?;
    let mut chains = Vec::new();
    let mut names: Option<Vec<String>> = None;
    for d in &dirs {
        let (draws, m) = read_draws::<f64>(d).config()?;
        match &names {
            Some(n) if *n != m.mediators => return Err(Failure::Config(anyhow!("{} has different mediators", d.display()))),
            Some(_) => {}
            None => names = Some(m.mediators),
        }
        chains.push(draws);
    }
    let names = names.unwrap_or_default();
    create_dir(out)?;
    let converged = report(out, &chains, &names, contrast, fdr).config()?;
    let manifest = SummarizeManifest {
        command: "summarize",
        version: env!("CARGO_PKG_VERSION"),
        git_describe: option_env!("MEDSEL_GIT_DESCRIBE").unwrap_or("unknown"),
        inputs: &dirs,
        seeds: chains.iter().map(|c| c.seed).collect(),
        fdr_target: fdr,
        contrast: ContrastRecord { a_prime: contrast.a_prime, a: contrast.a, multiplier: contrast.multiplier() },
        converged,
    };
    write_json(&out.join("manifest.json"), &manifest).runtime()?;
    Ok(if converged { Status::Ok } else { Status::Unconverged })
}

/// Operating characteristics of γ-selection and of joint selection.
#[derive(Debug, Serialize, Deserialize)]
pub struct Evaluation {
    pub gamma: OperatingCharacteristics,
    pub joint: OperatingCharacteristics,
}

const EVAL_HEADER: [&str; 7] = ["label", "selection", "tpr", "fpr", "ppv", "npv", "nvs"];

fn rate(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn eval_rows(label: &str, e: &Evaluation) -> [[String; 7]; 2] {
    [("gamma", &e.gamma), ("joint", &e.joint)].map(|(sel, oc)| {
        [label.into(), sel.into(), rate(oc.tpr), rate(oc.fpr), rate(oc.ppv), rate(oc.npv), oc.nvs.to_string()]
    })
}

pub fn eval(summary: &Path, truth: &Path, out: &Path) -> Outcome {
    let text = fs::read_to_string(summary).with_context(|| format!("reading {}", summary.display())).config()?;
    let fit: FitSummary = serde_json::from_str(&text).with_context(|| format!("parsing {}", summary.display())).config()?;
    let (names, truth) = read_truth(truth).config()?;
    let s = &fit.selection;
    if names.len() != s.mediators.len() {
        return Err(Failure::Config(anyhow!(
            "summary has {} mediators but the truth file has {}",
            s.mediators.len(),
            names.len()
        )));
    }
    if names != s.mediators {
        return Err(Failure::Config(anyhow!("mediator names differ between summary and truth")));
    }
    let e = Evaluation {
        gamma: operating_characteristics(&s.selected_gamma, &truth.gamma_true).config()?,
        joint: operating_characteristics(&s.selected, &truth.joint_true).config()?,
    };
    create_dir(out)?;
    write_json(&out.join("eval.json"), &e).runtime()?;
    let write_csv = || -> anyhow::Result<()> {
        let mut w = csv::Writer::from_path(out.join("eval.csv"))?;
        w.write_record(EVAL_HEADER)?;
        for row in eval_rows("run", &e) {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    };
    write_csv().runtime()?;
    Ok(Status::Ok)
}

/// Parses `1-20`, `3,5,8` or a mix such as `1-3,10`.
pub fn parse_seeds(spec: &str) -> anyhow::Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
                ensure!(a <= b, "empty seed range {part}");
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse()?),
        }
    }
    ensure!(!seeds.is_empty(), "no seeds given");
    Ok(seeds)
}

fn mean_sd(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = (xs.len() > 1).then(|| (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(m), sd)
}

/// Simulate, fit and evaluate one replicate per seed, each in its own
/// directory, then tabulate. Seeds with an existing `eval.json` are reused.
pub fn replicate(cfg: &RunConfig, seeds: &[u64], keep_draws: bool) -> Outcome {
    if cfg.scenario.is_none() {
        return Err(Failure::Config(anyhow!("replicate needs a [scenario] section")));
    }
    let root = &cfg.output_dir;
    create_dir(root)?;
    let mut all_converged = true;
    let mut evals = Vec::new();
    for &seed in seeds {
        let dir = root.join(format!("seed_{seed}"));
        let eval_path = dir.join("eval.json");
        if !eval_path.exists() {
            let mut c = cfg.clone();
            c.output_dir = dir.clone();
            c.scenario.as_mut().unwrap().seed = seed;
            c.chains.template.seed = cfg.chains.template.seed.wrapping_add(1000 * seed);
            if let Status::Unconverged = fit(&c, keep_draws)? {
                all_converged = false;
            }
            eval(&dir.join("summary.json"), &dir.join("truth.csv"), &dir)?;
            log::info!("replicate {seed} done");
        } else {
            let fit: FitSummary = serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).runtime()?).runtime()?;
            all_converged &= fit.status == "converged";
        }
        let e: Evaluation = serde_json::from_str(&fs::read_to_string(&eval_path).runtime()?).runtime()?;
        evals.push((seed, e));
    }
    write_table(&root.join("replicates.csv"), &evals).runtime()?;
    Ok(if all_converged { Status::Ok } else { Status::Unconverged })
}

/// Per-seed rows followed by mean and SD rows for each selection type.
fn write_table(path: &Path, evals: &[(u64, Evaluation)]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(EVAL_HEADER)?;
    for (seed, e) in evals {
        for row in eval_rows(&format!("seed {seed}"), e) {
            w.write_record(row)?;
        }
    }
    for (sel, pick) in [
        ("gamma", (|e: &Evaluation| e.gamma) as fn(&Evaluation) -> OperatingCharacteristics),
        ("joint", |e: &Evaluation| e.joint),
    ] {
        let ocs: Vec<OperatingCharacteristics> = evals.iter().map(|(_, e)| pick(e)).collect();
        let col = |f: fn(&OperatingCharacteristics) -> Option<f64>| mean_sd(&ocs.iter().filter_map(f).collect::<Vec<_>>());
        let stats = [
            col(|o| o.tpr),
            col(|o| o.fpr),
            col(|o| o.ppv),
            col(|o| o.npv),
            col(|o| Some(o.nvs as f64)),
        ];
        for (label, k) in [("mean", 0), ("sd", 1)] {
            let mut row = vec![label.to_owned(), sel.to_owned()];
            row.extend(stats.iter().map(|s| rate(if k == 0 { s.0 } else { s.1 })));
            w.write_record(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn parse_contrast(a: f64, a_prime: f64) -> anyhow::Result<EffectContrast> {
    if a == a_prime {
        bail!("contrast levels must differ");
    }
    Ok(EffectContrast::new(a, a_prime)?)
}
