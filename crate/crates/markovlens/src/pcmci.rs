//! PCMCI causal discovery: PC1 condition selection per variable, momentary
//! conditional independence (MCI) tests for every lagged pair, and multi-run
//! aggregation via Fisher's method.
//!
//! Links are indexed `[i, j, k]`: source variable i at time t−k, target
//! variable j at time t. All tests within one analysis share the common
//! sample window `2·tau_max..T`, so every link sees the same effective n
//! and MCI condition sets can include source parents shifted by up to
//! tau_max (reaching back 2·tau_max) without truncation.

use ndarray::{s, Array2, Array3, ArrayView1};

use crate::citest::parcorr;
use crate::error::{Error, Result};
use crate::special::chi_square_survival;

/// Downstream −ln p must stay finite, so p-values are floored here.
pub const P_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    /// T×N: rows are time steps, columns are variables.
    pub data: Array2<f64>,
    pub var_names: Vec<String>,
}

impl TimeSeriesPanel {
    pub fn new(data: Array2<f64>, var_names: Vec<String>) -> Result<TimeSeriesPanel> {
        let (t, n) = data.dim();
        if n < 2 {
            return Err(Error::Contract(format!(
                "panel: need at least 2 variables, got {n}"
            )));
        }
        if var_names.len() != n {
            return Err(Error::Contract(format!(
                "panel: {} names for {n} variables",
                var_names.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("panel: non-finite entry".into()));
        }
        if t == 0 {
            return Err(Error::Contract("panel: empty".into()));
        }
        Ok(TimeSeriesPanel { data, var_names })
    }

    pub fn n_steps(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.data.ncols()
    }

    /// Column `var` lagged by `lag`, restricted to the common window
    /// `cut..T` (a series of length T − cut, with cut = 2·tau_max).
    fn lagged(&self, var: usize, lag: usize, cut: usize) -> ArrayView1<'_, f64> {
        let t = self.n_steps();
        self.data.slice(s![cut - lag..t - lag, var])
    }

    fn check_tau(&self, tau_max: usize) -> Result<()> {
        let t = self.n_steps();
        if tau_max < 1 {
            return Err(Error::Contract("pcmci: tau_max must be ≥ 1".into()));
        }
        if t <= 10 * (tau_max + 1) {
            return Err(Error::Contract(format!(
                "pcmci: panel too short (T = {t}, need > {})",
                10 * (tau_max + 1)
            )));
        }
        Ok(())
    }
}

/// A lagged parent (variable, lag ≥ 1) with the PC1 statistic that kept it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Parent {
    pub var: usize,
    pub lag: usize,
    pub statistic: f64,
}

/// PC1 survivors for one target, ordered by descending |statistic|.
#[derive(Debug, Clone, PartialEq)]
pub struct ParentSet {
    pub target: usize,
    pub parents: Vec<Parent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcmciResult {
    /// N×N×(tau_max+1) MCI partial correlations; `[i, j, k]` is i→j at lag k.
    pub val: Array3<f64>,
    /// Same shape; p ∈ [P_FLOOR, 1].
    pub p: Array3<f64>,
    pub alpha: f64,
    pub tau_max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedResult {
    /// Elementwise mean of the per-run val matrices.
    pub val: Array3<f64>,
    /// Fisher-combined p-values.
    pub p: Array3<f64>,
    pub alpha: f64,
    pub tau_max: usize,
    pub runs: usize,
}

fn sort_by_strength(parents: &mut [Parent]) {
    parents.sort_by(|a, b| {
        b.statistic
            .abs()
            .partial_cmp(&a.statistic.abs())
            .unwrap()
            .then(a.var.cmp(&b.var))
            .then(a.lag.cmp(&b.lag))
    });
}

fn column_is_constant(panel: &TimeSeriesPanel, var: usize) -> bool {
    let col = panel.data.column(var);
    let first = col[0];
    col.iter().all(|v| (v - first).abs() <= 1e-15 * first.abs().max(1.0))
}

/// PC1 parent selection for one target variable.
///
/// Starts from every (variable, lag) candidate with lag ∈ [1, tau_max]. For
/// condition-set sizes q = 0, 1, 2, … each surviving candidate is tested
/// against the q strongest other survivors (ranked by |statistic| from the
/// previous sweep); candidates with p > alpha_pc are removed after the full
/// sweep. Stops once q exceeds the surviving-set size − 1.
pub fn pc1_select_parents(
    panel: &TimeSeriesPanel,
    target: usize,
    tau_max: usize,
    alpha_pc: f64,
) -> Result<ParentSet> {
    panel.check_tau(tau_max)?;
    let n_vars = panel.n_vars();
    if target >= n_vars {
        return Err(Error::Contract(format!(
            "pc1: target {target} out of range for {n_vars} variables"
        )));
    }
    if column_is_constant(panel, target) {
        log::warn!(
            "pc1: target column {} ({}) is constant; no parents selected",
            target,
            panel.var_names[target]
        );
        return Ok(ParentSet {
            target,
            parents: vec![],
        });
    }

    let cut = 2 * tau_max;
    let n = panel.n_steps() - cut;
    let y = panel.lagged(target, 0, cut);
    let mut survivors: Vec<Parent> = (0..n_vars)
        .flat_map(|var| {
            (1..=tau_max).map(move |lag| Parent {
                var,
                lag,
                statistic: 0.0,
            })
        })
        .collect();

    let mut q = 0usize;
    while !survivors.is_empty() && q <= survivors.len() - 1 && n >= q + 3 {
        sort_by_strength(&mut survivors);
        let mut keep = vec![true; survivors.len()];
        let mut stats = vec![0.0; survivors.len()];
        for idx in 0..survivors.len() {
            let cand = survivors[idx];
            let conds: Vec<ArrayView1<f64>> = survivors
                .iter()
                .enumerate()
                .filter(|(other, _)| *other != idx)
                .take(q)
                .map(|(_, p)| panel.lagged(p.var, p.lag, cut))
                .collect();
            let x = panel.lagged(cand.var, cand.lag, cut);
            let res = parcorr(x, y, &conds)?;
            stats[idx] = res.statistic;
            if res.p_value > alpha_pc {
                keep[idx] = false;
            }
        }
        survivors = survivors
            .into_iter()
            .zip(stats)
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|((mut p, s), _)| {
                p.statistic = s;
                p
            })
            .collect();
        q += 1;
    }

    sort_by_strength(&mut survivors);
    Ok(ParentSet {
        target,
        parents: survivors,
    })
}

/// MCI tests for every ordered pair (i → j) and lag k ∈ [0, tau_max]
/// (k ≥ 1 when i = j). The condition set is parents(j) \ {(i, k)} plus
/// parents(i) shifted forward by k (reaching lags up to 2·tau_max, which the
/// common window accommodates), deduplicated; the source-parent block is
/// capped at tau_max·N entries.
pub fn mci(
    panel: &TimeSeriesPanel,
    parents: &[ParentSet],
    tau_max: usize,
    alpha: f64,
) -> Result<PcmciResult> {
    panel.check_tau(tau_max)?;
    let n_vars = panel.n_vars();
    if parents.len() != n_vars {
        return Err(Error::Contract(format!(
            "mci: {} parent sets for {n_vars} variables",
            parents.len()
        )));
    }
    for (j, set) in parents.iter().enumerate() {
        if set.target != j {
            return Err(Error::Contract(format!(
                "mci: parent set {j} targets variable {}",
                set.target
            )));
        }
    }

    let max_conds_px = tau_max * n_vars;
    let cut = 2 * tau_max;
    let n = panel.n_steps() - cut;
    let mut val = Array3::zeros((n_vars, n_vars, tau_max + 1));
    let mut p = Array3::ones((n_vars, n_vars, tau_max + 1));

    for j in 0..n_vars {
        let y = panel.lagged(j, 0, cut);
        for i in 0..n_vars {
            for k in 0..=tau_max {
                if i == j && k == 0 {
                    continue;
                }
                let mut cond_keys: Vec<(usize, usize)> = Vec::new();
                for par in &parents[j].parents {
                    if (par.var, par.lag) == (i, k) {
                        continue;
                    }
                    if !cond_keys.contains(&(par.var, par.lag)) {
                        cond_keys.push((par.var, par.lag));
                    }
                }
                let mut px = 0usize;
                for par in &parents[i].parents {
                    if px >= max_conds_px {
                        break;
                    }
                    let shifted = (par.var, par.lag + k);
                    if !cond_keys.contains(&shifted) {
                        cond_keys.push(shifted);
                        px += 1;
                    }
                }

                if n < cond_keys.len() + 3 {
                    log::warn!(
                        "mci: link ({i} → {j}, lag {k}) has n = {n} < |conditions| + 3 = {}; recorded as independent",
                        cond_keys.len() + 3
                    );
                    val[[i, j, k]] = 0.0;
                    p[[i, j, k]] = 1.0;
                    continue;
                }

                let conds: Vec<ArrayView1<f64>> = cond_keys
                    .iter()
                    .map(|&(var, lag)| panel.lagged(var, lag, cut))
                    .collect();
                let x = panel.lagged(i, k, cut);
                let res = parcorr(x, y, &conds)?;
                val[[i, j, k]] = res.statistic;
                p[[i, j, k]] = res.p_value.clamp(P_FLOOR, 1.0);
            }
        }
    }

    Ok(PcmciResult {
        val,
        p,
        alpha,
        tau_max,
    })
}

/// Full PCMCI pass: PC1 for every variable (alpha_pc = alpha), then MCI.
/// Deterministic given the panel; the seed is accepted for interface parity
/// with stochastic CI tests but unused by ParCorr.
pub fn run_pcmci(
    panel: &TimeSeriesPanel,
    tau_max: usize,
    alpha: f64,
    _seed: u64,
) -> Result<PcmciResult> {
    panel.check_tau(tau_max)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Contract(format!(
            "pcmci: alpha must be in [0, 1], got {alpha}"
        )));
    }
    let parents: Vec<ParentSet> = (0..panel.n_vars())
        .map(|j| pc1_select_parents(panel, j, tau_max, alpha))
        .collect::<Result<_>>()?;
    mci(panel, &parents, tau_max, alpha)
}

/// Combines independent runs: val by elementwise mean, p by Fisher's method
/// (X² = −2·Σ ln p_r against the χ²(2R) upper tail).
pub fn aggregate_runs(results: &[PcmciResult]) -> Result<AggregatedResult> {
    let first = results
        .first()
        .ok_or_else(|| Error::Contract("aggregate_runs: no results".into()))?;
    for r in results {
        if r.val.dim() != first.val.dim() || r.tau_max != first.tau_max || r.alpha != first.alpha {
            return Err(Error::Contract(
                "aggregate_runs: results differ in shape, tau_max, or alpha".into(),
            ));
        }
    }
    let runs = results.len();
    let mut val = Array3::zeros(first.val.dim());
    let mut p = Array3::ones(first.p.dim());
    let (n_i, n_j, n_k) = first.val.dim();
    for i in 0..n_i {
        for j in 0..n_j {
            for k in 0..n_k {
                let mean =
                    results.iter().map(|r| r.val[[i, j, k]]).sum::<f64>() / runs as f64;
                let x2 = -2.0
                    * results
                        .iter()
                        .map(|r| r.p[[i, j, k]].clamp(P_FLOOR, 1.0).ln())
                        .sum::<f64>();
                val[[i, j, k]] = mean;
                p[[i, j, k]] = chi_square_survival(x2, 2.0 * runs as f64).clamp(P_FLOOR, 1.0);
            }
        }
    }
    Ok(AggregatedResult {
        val,
        p,
        alpha: first.alpha,
        tau_max: first.tau_max,
        runs,
    })
}
