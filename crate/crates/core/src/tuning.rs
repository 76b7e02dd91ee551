//! Selection of the MRF coupling η by a phase-transition scan, and of the
//! PPI threshold κ by Bayesian false discovery rate control.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::MediationDataset;
use crate::error::{Error, Result};
use crate::model::Hyperparameters;
use crate::sampler::{run_chain, ChainConfig, ChainDraws};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseScanConfig {
    /// Strictly increasing, starting at 0.
    pub eta_grid: Vec<f64>,
    /// Kept draws per grid point.
    pub m_pt: usize,
    #[serde(default = "default_jump")]
    pub jump_threshold: f64,
    pub chain_template: ChainConfig,
}

fn default_jump() -> f64 {
    0.05
}

impl PhaseScanConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_owned()));
        if self.eta_grid.first() != Some(&0.0) {
            return bad("eta grid must start at 0");
        }
        if self.eta_grid.windows(2).any(|w| !(w[1] > w[0])) || self.eta_grid.iter().any(|e| !e.is_finite()) {
            return bad("eta grid must be finite and strictly increasing");
        }
        if self.m_pt == 0 {
            return bad("m_pt must be positive");
        }
        if self.jump_threshold.is_nan() {
            return bad("jump threshold is NaN");
        }
        Ok(())
    }

    /// Chain settings for grid point `g`: the template's burn-in and thinning,
    /// `m_pt` kept draws and seed `template.seed + g`.
    pub fn chain_for(&self, g: usize) -> ChainConfig {
        let mut c = self.chain_template.clone();
        c.n_iter = c.burn_in + self.m_pt * c.thin;
        c.seed = c.seed.wrapping_add(g as u64);
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseScanResult {
    pub eta_grid: Vec<f64>,
    pub medians: Vec<f64>,
    pub eta_pt: Option<f64>,
    pub eta_selected: f64,
    pub transition_index: Option<usize>,
    /// Set when no grid point triggered the jump rule.
    pub warning: bool,
}

/// Applies the jump rule to a median curve: the transition is the first grid
/// point whose median exceeds the η = 0 median by more than `threshold`, and
/// the grid point before it is selected. Without a transition the last grid
/// value is selected and `warning` is set.
pub fn detect_phase_transition(grid: &[f64], medians: &[f64], threshold: f64) -> Result<PhaseScanResult> {
    if grid.is_empty() || grid.len() != medians.len() {
        return Err(Error::InvalidInput("grid and medians must be nonempty and of equal length".into()));
    }
    let base = medians[0];
    let hit = (1..grid.len()).find(|&g| medians[g] - base > threshold);
    Ok(PhaseScanResult {
        eta_grid: grid.to_vec(),
        medians: medians.to_vec(),
        eta_pt: hit.map(|g| grid[g]),
        eta_selected: hit.map_or(grid[grid.len() - 1], |g| grid[g - 1]),
        transition_index: hit,
        warning: hit.is_none(),
    })
}

/// Median across mediators of the per-mediator posterior mean of γ_j.
/// Even q averages the two middle order statistics.
pub fn median_gamma<T: Real>(draws: &ChainDraws<T>) -> Result<f64> {
    if draws.states.is_empty() {
        return Err(Error::InvalidInput("no kept draws".into()));
    }
    let n = draws.states.len() as f64;
    let means: Vec<f64> = (0..draws.q())
        .map(|j| draws.states.iter().filter(|s| s.gamma[j]).count() as f64 / n)
        .collect();
    median(means).ok_or_else(|| Error::InvalidInput("no mediators".into()))
}

pub(crate) fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let k = xs.len() / 2;
    Some(if xs.len() % 2 == 1 { xs[k] } else { 0.5 * (xs[k - 1] + xs[k]) })
}

/// Runs one independent chain per grid point (in parallel) and applies
/// [`detect_phase_transition`] to the resulting medians.
pub fn phase_transition_scan<T: Real>(
    cfg: &PhaseScanConfig,
    data: &MediationDataset<T>,
    hp: &Hyperparameters<T>,
) -> Result<PhaseScanResult> {
    cfg.validate()?;
    let medians: Vec<Result<f64>> = cfg
        .eta_grid
        .par_iter()
        .enumerate()
        .map(|(g, &eta)| {
            let hp = hp.clone().with_eta(T::lit(eta));
            run_chain(&cfg.chain_for(g), data, &hp)
                .and_then(|d| median_gamma(&d))
                .map_err(|e| Error::GridPoint { index: g, eta, source: Box::new(e) })
        })
        .collect();
    let medians = medians.into_iter().collect::<Result<Vec<_>>>()?;
    detect_phase_transition(&cfg.eta_grid, &medians, cfg.jump_threshold)
}

/// Writes `eta,median,transition` rows for plotting.
pub fn write_phase_scan_csv(path: &Path, result: &PhaseScanResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["eta", "median", "transition"])?;
    for (g, (eta, m)) in result.eta_grid.iter().zip(&result.medians).enumerate() {
        let flag = if result.transition_index == Some(g) { "1" } else { "0" };
        w.write_record([eta.to_string(), m.to_string(), flag.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `Σ_j (1 − PPI_j) I(PPI_j > κ) / Σ_j I(PPI_j > κ)`; `None` when nothing
/// exceeds κ.
pub fn fdr_at<T: Real>(ppi: &[T], kappa: T) -> Option<T> {
    let (mass, count) = ppi
        .iter()
        .filter(|&&p| p > kappa)
        .fold((T::zero(), 0usize), |(m, c), &p| (m + (T::one() - p), c + 1));
    (count > 0).then(|| mass / T::from_usize_lossy(count))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdrSelection<T> {
    pub kappa: T,
    /// Indices with PPI > κ, ascending.
    pub selected: Vec<usize>,
    /// Estimated FDR of the selection; `None` when nothing is selected.
    pub fdr: Option<T>,
    /// Set when no threshold meets the target.
    pub warning: bool,
}

/// Smallest threshold κ whose selection `{j : PPI_j > κ}` has FDR below
/// `target`.
///
/// Candidates are the distinct PPI values, each selecting the strictly larger
/// ones, plus the value just below the smallest PPI, which selects everything.
/// Because selections are strict, a block of tied PPIs enters together.
pub fn bayesian_fdr_threshold<T: Real>(ppi: &[T], target: T) -> Result<FdrSelection<T>> {
    if ppi.is_empty() {
        return Err(Error::InvalidInput("empty PPI vector".into()));
    }
    if let Some(p) = ppi.iter().find(|&&p| !(p >= T::zero() && p <= T::one())) {
        return Err(Error::InvalidInput(format!("PPI {p} outside [0, 1]")));
    }
    if !(target > T::zero() && target < T::one()) {
        return Err(Error::InvalidInput(format!("FDR target {target} outside (0, 1)")));
    }
    let mut order: Vec<usize> = (0..ppi.len()).collect();
    order.sort_by(|&a, &b| ppi[b].partial_cmp(&ppi[a]).unwrap());

    // Walk tie blocks in descending order; after block k the selection is
    // everything above the next distinct value (or everything at the end).
    let mut best: Option<(T, usize, T)> = None;
    let (mut mass, mut i) = (T::zero(), 0);
    while i < order.len() {
        let v = ppi[order[i]];
        while i < order.len() && ppi[order[i]] == v {
            mass = mass + (T::one() - ppi[order[i]]);
            i += 1;
        }
        let fdr = mass / T::from_usize_lossy(i);
        if fdr < target {
            let kappa = order.get(i).map_or_else(|| v.next_below(), |&next| ppi[next]);
            best = Some((kappa, i, fdr));
        }
    }
    let max = ppi[order[0]];
    Ok(match best {
        Some((kappa, len, fdr)) => {
            let mut selected = order[..len].to_vec();
            selected.sort_unstable();
            FdrSelection { kappa, selected, fdr: Some(fdr), warning: false }
        }
        None => {
            log::warn!("no PPI threshold reaches FDR below {target}");
            FdrSelection { kappa: max, selected: Vec::new(), fdr: None, warning: true }
        }
    })
}

/// Writes the selection report: κ, target, and per-pathway PPI with names.
pub fn write_selection_json<T: Real>(
    path: &Path,
    selection: &FdrSelection<T>,
    target: f64,
    names: &[String],
    ppi: &[T],
) -> Result<()> {
    let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
    let report = serde_json::json!({
        "kappa": f(selection.kappa),
        "target": target,
        "fdr": selection.fdr.map(f),
        "warning": selection.warning,
        "selected": selection.selected,
        "selected_names": selection.selected.iter().map(|&j| &names[j]).collect::<Vec<_>>(),
        "ppi": names.iter().zip(ppi).map(|(n, &p)| serde_json::json!({"mediator": n, "ppi": f(p)})).collect::<Vec<_>>(),
    });
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut file, &report)?;
    file.write_all(b"\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use num_traits::{FromPrimitive, One, Zero};
    use proptest::prelude::*;

    #[test]
    fn fdr_examples() {
        let s = bayesian_fdr_threshold(&[0.99f64, 0.95, 0.60, 0.40], 0.05).unwrap();
        assert_eq!(s.kappa, 0.60);
        assert_eq!(s.selected, vec![0, 1]);
        assert!((s.fdr.unwrap() - 0.03).abs() < 1e-15);
        assert!((fdr_at(&[0.99f64, 0.95, 0.60, 0.40], 0.40).unwrap() - 0.46 / 3.0).abs() < 1e-15);

        let s = bayesian_fdr_threshold(&[1.0; 4], 0.05).unwrap();
        assert_eq!(s.kappa, 1.0 - f64::EPSILON / 2.0);
        assert_eq!(s.selected, vec![0, 1, 2, 3]);
        assert_eq!(s.fdr, Some(0.0));

        let s = bayesian_fdr_threshold(&[0.3, 0.2], 0.05).unwrap();
        assert!(s.warning && s.selected.is_empty());
        assert_eq!(s.kappa, 0.3);
    }

    #[test]
    fn fdr_rejects_out_of_range() {
        assert!(bayesian_fdr_threshold(&[0.5, 1.2], 0.05).is_err());
        assert!(bayesian_fdr_threshold(&[f64::NAN], 0.05).is_err());
        assert!(bayesian_fdr_threshold::<f64>(&[], 0.05).is_err());
    }

    #[test]
    fn ties_enter_as_a_block() {
        let s = bayesian_fdr_threshold(&[0.97, 0.99, 0.97, 0.5], 0.05).unwrap();
        assert_eq!(s.selected, vec![0, 1, 2]);
        assert_eq!(s.kappa, 0.5);
    }

    fn exact(x: f64) -> BigRational {
        BigRational::from_float(x).unwrap()
    }

    /// Prefix of the PPI-descending order of largest size (whole tie blocks)
    /// with FDR < target, by exact rational enumeration.
    fn oracle(ppi: &[f64], target: f64) -> Option<Vec<usize>> {
        let t = exact(target);
        let mut cands: Vec<f64> = ppi.to_vec();
        cands.sort_by(|a, b| b.total_cmp(a));
        cands.dedup();
        let mut best = None;
        for k in 0..=cands.len() {
            let sel: Vec<usize> = (0..ppi.len()).filter(|&j| k == cands.len() || ppi[j] > cands[k]).collect();
            if sel.is_empty() {
                continue;
            }
            let mass = sel.iter().fold(BigRational::zero(), |m, &j| m + (BigRational::one() - exact(ppi[j])));
            if mass / BigRational::from_usize(sel.len()).unwrap() < t {
                best = Some(sel);
            }
        }
        best
    }

    proptest! {
        #[test]
        fn threshold_matches_exact_enumeration(
            ppi in prop::collection::vec(prop_oneof![0.0..=1.0f64, (0..=20u32).prop_map(|k| k as f64 / 20.0)], 1..=20),
            target in 0.01..0.5f64,
        ) {
            let s = bayesian_fdr_threshold(&ppi, target).unwrap();
            match oracle(&ppi, target) {
                Some(sel) => {
                    prop_assert_eq!(&s.selected, &sel);
                    prop_assert!(!s.warning);
                    let brute = fdr_at(&ppi, s.kappa).unwrap();
                    prop_assert!((brute - s.fdr.unwrap()).abs() < 1e-12);
                }
                None => prop_assert!(s.warning && s.selected.is_empty()),
            }
        }

        #[test]
        fn appending_below_average_never_lowers_fdr(
            mut ppi in prop::collection::vec(0.0..=1.0f64, 2..=20),
        ) {
            ppi.sort_by(|a, b| b.total_cmp(a));
            for k in 1..ppi.len() {
                let avg = ppi[..k].iter().sum::<f64>() / k as f64;
                if ppi[k] < avg {
                    let before = ppi[..k].iter().map(|p| 1.0 - p).sum::<f64>() / k as f64;
                    let after = ppi[..=k].iter().map(|p| 1.0 - p).sum::<f64>() / (k + 1) as f64;
                    prop_assert!(after >= before - 1e-15);
                }
            }
        }
    }

    #[test]
    fn phase_rule_examples() {
        let r = detect_phase_transition(&[0.0, 0.2, 0.4], &[0.02, 0.04, 0.10], 0.05).unwrap();
        assert_eq!((r.eta_pt, r.eta_selected, r.transition_index, r.warning), (Some(0.4), 0.2, Some(2), false));

        let r = detect_phase_transition(&[0.0, 0.2, 0.4], &[0.02, 0.02, 0.03], 0.05).unwrap();
        assert_eq!((r.eta_pt, r.eta_selected, r.warning), (None, 0.4, true));

        let r = detect_phase_transition(&[0.0, 0.1], &[0.02, 0.09], 0.05).unwrap();
        assert_eq!((r.eta_selected, r.transition_index), (0.0, Some(1)));

        let r = detect_phase_transition(&[0.0], &[0.3], 0.05).unwrap();
        assert_eq!((r.eta_selected, r.warning), (0.0, true));

        let r = detect_phase_transition(&[0.0, 1.0, 2.0], &[0.0, 0.5, 1.0], f64::INFINITY).unwrap();
        assert_eq!((r.eta_selected, r.warning), (2.0, true));
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median(vec![0.0, 0.2, 1.0]), Some(0.2));
        assert!((median(vec![0.0, 0.1, 0.3, 1.0]).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(median(vec![]), None);
    }

    #[test]
    fn grid_validation() {
        let mut cfg = PhaseScanConfig {
            eta_grid: vec![0.0, 0.5, 0.5],
            m_pt: 10,
            jump_threshold: 0.05,
            chain_template: ChainConfig::default(),
        };
        assert!(cfg.validate().is_err());
        cfg.eta_grid = vec![0.1, 0.5];
        assert!(cfg.validate().is_err());
        cfg.eta_grid = vec![0.0, 0.5];
        cfg.validate().unwrap();
        let c = cfg.chain_for(1);
        assert_eq!((c.kept(), c.seed), (10, 2));
    }
}
