use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AcceptRates, ChainDraws};
use crate::error::{Error, Result};
use crate::model::{ModelVariant, ParameterState};
use crate::scalar::Real;

/// Sidecar describing one chain's draw files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DrawsManifest {
    pub seed: u64,
    pub model_variant: ModelVariant,
    pub eta: f64,
    pub kept: usize,
    pub mediators: Vec<String>,
    pub covariates: Vec<String>,
    pub accept_rates: AcceptRates,
    pub wall_time_secs: f64,
}

const GROUPS: [&str; 9] = ["beta0", "b", "tau", "gamma", "lambda", "alpha", "delta", "omega", "scalars"];
const SCALARS: [&str; 4] = ["sigma_sq_sigma", "alpha0", "alpha_p1", "sigma_sq"];

fn header(group: &str, mediators: &[String], covariates: &[String]) -> Vec<String> {
    match group {
        "b" => covariates.iter().flat_map(|c| mediators.iter().map(move |m| format!("{c}:{m}"))).collect(),
        "alpha" => covariates.to_vec(),
        "scalars" => SCALARS.iter().map(|s| s.to_string()).collect(),
        _ => mediators.to_vec(),
    }
}

fn row<T: Real>(group: &str, s: &ParameterState<T>) -> Vec<String> {
    let nums = |v: &[T]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let flags = |v: &[bool]| v.iter().map(|&b| if b { "1" } else { "0" }.to_string()).collect::<Vec<_>>();
    match group {
        "beta0" => nums(&s.beta0),
        "b" => (0..s.b.rows()).flat_map(|l| (0..s.b.cols()).map(move |j| s.b[(l, j)].to_string())).collect(),
        "tau" => nums(&s.tau),
        "gamma" => flags(&s.gamma),
        "lambda" => nums(&s.lambda),
        "alpha" => nums(&s.alpha),
        "delta" => nums(&s.delta),
        "omega" => flags(&s.omega),
        _ => nums(&[s.sigma_sq_sigma, s.alpha0, s.alpha_p1, s.sigma_sq]),
    }
}

/// Writes one CSV per parameter group plus `draws.json` into `dir`.
pub fn write_draws<T: Real>(
    dir: &Path,
    draws: &ChainDraws<T>,
    mediators: &[String],
    covariates: &[String],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for group in GROUPS {
        let path = dir.join(format!("{group}.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header(group, mediators, covariates))?;
        for s in &draws.states {
            w.write_record(row(group, s))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    let manifest = DrawsManifest {
        seed: draws.seed,
        model_variant: draws.model_variant,
        eta: draws.eta_used.to_f64().unwrap_or(f64::NAN),
        kept: draws.states.len(),
        mediators: mediators.to_vec(),
        covariates: covariates.to_vec(),
        accept_rates: draws.accept_rates.clone(),
        wall_time_secs: draws.wall_time_secs,
    };
    let path = dir.join("draws.json");
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

fn read_group(dir: &Path, group: &str, width: usize, kept: usize) -> Result<Vec<Vec<String>>> {
    let path = dir.join(format!("{group}.csv"));
    let mut r = csv::Reader::from_path(&path)?;
    let rows: Vec<Vec<String>> =
        r.records().map(|rec| rec.map(|r| r.iter().map(str::to_owned).collect())).collect::<Result<_, _>>()?;
    if rows.len() != kept || rows.iter().any(|r| r.len() != width) {
        return Err(Error::Schema(format!("{} does not match draws.json", path.display())));
    }
    Ok(rows)
}

/// Reads back a directory written by [`write_draws`].
pub fn read_draws<T: Real>(dir: &Path) -> Result<(ChainDraws<T>, DrawsManifest)> {
    let path = dir.join("draws.json");
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: DrawsManifest = serde_json::from_reader(std::io::BufReader::new(file))?;
    let (q, p, kept) = (manifest.mediators.len(), manifest.covariates.len(), manifest.kept);
    let mut states = vec![ParameterState::<T>::zeros(q, p); kept];
    for group in GROUPS {
        let width = header(group, &manifest.mediators, &manifest.covariates).len();
        let rows = read_group(dir, group, width, kept)?;
        for (t, (cells, s)) in rows.iter().zip(states.iter_mut()).enumerate() {
            let num = |c: usize| -> Result<T> {
                cells[c].parse::<T>().map_err(|_| Error::BadCell {
                    row: t + 1,
                    column: format!("{group}[{c}]"),
                    value: cells[c].clone(),
                })
            };
            let flag = |c: usize| cells[c] == "1";
            match group {
                "beta0" => s.beta0 = (0..q).map(num).collect::<Result<_>>()?,
                "b" => {
                    for l in 0..p {
                        for j in 0..q {
                            s.b[(l, j)] = num(l * q + j)?;
                        }
                    }
                }
                "tau" => s.tau = (0..q).map(num).collect::<Result<_>>()?,
                "gamma" => s.gamma = (0..q).map(flag).collect(),
                "lambda" => s.lambda = (0..q).map(num).collect::<Result<_>>()?,
                "alpha" => s.alpha = (0..p).map(num).collect::<Result<_>>()?,
                "delta" => s.delta = (0..q).map(num).collect::<Result<_>>()?,
                "omega" => s.omega = (0..q).map(flag).collect(),
                _ => {
                    s.sigma_sq_sigma = num(0)?;
                    s.alpha0 = num(1)?;
                    s.alpha_p1 = num(2)?;
                    s.sigma_sq = num(3)?;
                }
            }
        }
    }
    for s in &states {
        s.check_invariants()?;
    }
    Ok((
        ChainDraws {
            states,
            accept_rates: manifest.accept_rates.clone(),
            eta_used: T::lit(manifest.eta),
            wall_time_secs: manifest.wall_time_secs,
            seed: manifest.seed,
            model_variant: manifest.model_variant,
        },
        manifest,
    ))
}
