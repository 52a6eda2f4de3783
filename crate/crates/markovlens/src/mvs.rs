//! Markov Violation Score: a lag-weighted sum of significant lag-≥2 MCI
//! links, normalized so scores are comparable across panel sizes.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::pcmci::{AggregatedResult, PcmciResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvsConfig {
    pub tau_max: usize,
    pub alpha_level: f64,
    pub p_floor: f64,
}

impl Default for MvsConfig {
    fn default() -> MvsConfig {
        MvsConfig {
            tau_max: 5,
            alpha_level: 0.05,
            p_floor: 1e-10,
        }
    }
}

impl MvsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_max < 2 {
            return Err(Error::Contract("mvs: tau_max must be ≥ 2".into()));
        }
        if !(self.alpha_level > 0.0 && self.alpha_level < 1.0) {
            return Err(Error::Contract("mvs: alpha_level must be in (0, 1)".into()));
        }
        if !(self.p_floor > 0.0 && self.p_floor < self.alpha_level) {
            return Err(Error::Contract(
                "mvs: p_floor must satisfy 0 < p_floor < alpha_level".into(),
            ));
        }
        Ok(())
    }
}

/// One indicator-selected link and its term in the MVS numerator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    pub source: usize,
    pub target: usize,
    pub lag: usize,
    pub abs_val: f64,
    pub neg_ln_p: f64,
    /// Lag weight k − 1.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MvsReport {
    pub score: f64,
    pub contributions: Vec<Contribution>,
    /// Variable count of the analyzed panel (the N in the normalizer).
    pub n_vars: usize,
}

/// Anything carrying an N×N×(tau_max+1) field of link strengths and
/// p-values: a single PCMCI run or a Fisher-combined aggregate.
pub trait LinkField {
    fn val(&self) -> &Array3<f64>;
    fn p(&self) -> &Array3<f64>;
    fn tau_max(&self) -> usize;
}

impl LinkField for PcmciResult {
    fn val(&self) -> &Array3<f64> {
        &self.val
    }
    fn p(&self) -> &Array3<f64> {
        &self.p
    }
    fn tau_max(&self) -> usize {
        self.tau_max
    }
}

impl LinkField for AggregatedResult {
    fn val(&self) -> &Array3<f64> {
        &self.val
    }
    fn p(&self) -> &Array3<f64> {
        &self.p
    }
    fn tau_max(&self) -> usize {
        self.tau_max
    }
}

/// MVS = Σ_{k=2}^{τ} (k−1) Σ_{i,j} |ρ_ij(k)|·[−ln p_ij(k)]·1[p ≤ α]
///       ───────────────────────────────────────────────────────────
///                     N² · Σ_{k=2}^{τ} (k−1)
///
/// Lags 0 and 1 never contribute; self-links do. p-values are floored at
/// `config.p_floor` before the logarithm.
pub fn compute_mvs<R: LinkField>(result: &R, config: &MvsConfig) -> Result<MvsReport> {
    config.validate()?;
    if config.tau_max > result.tau_max() {
        return Err(Error::Contract(format!(
            "mvs: config tau_max {} exceeds the result's {}",
            config.tau_max,
            result.tau_max()
        )));
    }
    let (n_i, n_j, n_k) = result.val().dim();
    if n_i != n_j || n_k != result.tau_max() + 1 {
        return Err(Error::Contract(format!(
            "mvs: malformed link field {n_i}×{n_j}×{n_k}"
        )));
    }
    let n_vars = n_i;

    let mut contributions = Vec::new();
    let mut numerator = 0.0;
    for k in 2..=config.tau_max {
        let weight = (k - 1) as f64;
        for i in 0..n_vars {
            for j in 0..n_vars {
                let p = result.p()[[i, j, k]];
                if p > config.alpha_level {
                    continue;
                }
                let abs_val = result.val()[[i, j, k]].abs();
                let neg_ln_p = -p.max(config.p_floor).ln();
                numerator += weight * abs_val * neg_ln_p;
                contributions.push(Contribution {
                    source: i,
                    target: j,
                    lag: k,
                    abs_val,
                    neg_ln_p,
                    weight,
                });
            }
        }
    }

    let lag_weight_sum: f64 = (2..=config.tau_max).map(|k| (k - 1) as f64).sum();
    let denominator = (n_vars * n_vars) as f64 * lag_weight_sum;
    Ok(MvsReport {
        score: numerator / denominator,
        contributions,
        n_vars,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn empty_result(n: usize, tau_max: usize) -> PcmciResult {
        PcmciResult {
            val: Array3::zeros((n, n, tau_max + 1)),
            p: Array3::ones((n, n, tau_max + 1)),
            alpha: 0.05,
            tau_max,
        }
    }

    #[test]
    fn no_significant_links_scores_zero() {
        let report = compute_mvs(&empty_result(4, 5), &MvsConfig::default()).unwrap();
        assert_eq!(report.score, 0.0);
        assert!(report.contributions.is_empty());
        assert_eq!(report.n_vars, 4);
    }

    #[test]
    fn single_link_fixture() {
        let mut r = empty_result(4, 5);
        r.val[[1, 2, 2]] = 0.5;
        r.p[[1, 2, 2]] = 0.01;
        let report = compute_mvs(&r, &MvsConfig::default()).unwrap();
        assert!((report.score - 0.014391156831212785).abs() < 1e-12);
        assert!((report.score - 0.01439116).abs() < 1e-8);
        assert_eq!(report.contributions.len(), 1);
        let c = report.contributions[0];
        assert_eq!((c.source, c.target, c.lag), (1, 2, 2));
        assert_eq!(c.weight, 1.0);
    }

    #[test]
    fn two_link_fixture() {
        let mut r = empty_result(4, 5);
        r.val[[1, 2, 2]] = 0.5;
        r.p[[1, 2, 2]] = 0.01;
        r.val[[0, 3, 3]] = -0.2;
        r.p[[0, 3, 3]] = 0.001;
        let report = compute_mvs(&r, &MvsConfig::default()).unwrap();
        assert!((report.score - 0.031660545028668126).abs() < 1e-12);
        assert!((report.score - 0.03166054).abs() < 1e-8);
        assert_eq!(report.contributions.len(), 2);
    }

    #[test]
    fn lags_zero_and_one_never_contribute() {
        let mut r = empty_result(3, 5);
        r.val[[0, 1, 0]] = 0.9;
        r.p[[0, 1, 0]] = 1e-10;
        r.val[[2, 1, 1]] = 0.9;
        r.p[[2, 1, 1]] = 1e-10;
        let report = compute_mvs(&r, &MvsConfig::default()).unwrap();
        assert_eq!(report.score, 0.0);
    }

    #[test]
    fn p_equal_to_alpha_contributes() {
        let mut r = empty_result(2, 5);
        r.val[[0, 1, 2]] = 0.3;
        r.p[[0, 1, 2]] = 0.05;
        let report = compute_mvs(&r, &MvsConfig::default()).unwrap();
        assert!(report.score > 0.0);
        assert_eq!(report.contributions.len(), 1);
    }

    #[test]
    fn self_links_are_included() {
        let mut r = empty_result(3, 5);
        r.val[[1, 1, 4]] = 0.6;
        r.p[[1, 1, 4]] = 0.002;
        let report = compute_mvs(&r, &MvsConfig::default()).unwrap();
        assert!(report.score > 0.0);
        assert_eq!(report.contributions[0].source, 1);
        assert_eq!(report.contributions[0].target, 1);
    }

    #[test]
    fn adding_a_link_strictly_increases_the_score() {
        let mut r = empty_result(4, 5);
        r.val[[1, 2, 2]] = 0.5;
        r.p[[1, 2, 2]] = 0.01;
        let base = compute_mvs(&r, &MvsConfig::default()).unwrap().score;
        r.val[[3, 0, 5]] = 0.05;
        r.p[[3, 0, 5]] = 0.04;
        let more = compute_mvs(&r, &MvsConfig::default()).unwrap().score;
        assert!(more > base);
    }

    #[test]
    fn lowering_a_contributing_p_increases_the_score() {
        let mut r = empty_result(4, 5);
        r.val[[1, 2, 2]] = 0.5;
        r.p[[1, 2, 2]] = 0.05;
        let base = compute_mvs(&r, &MvsConfig::default()).unwrap().score;
        r.p[[1, 2, 2]] = 0.01;
        let lower = compute_mvs(&r, &MvsConfig::default()).unwrap().score;
        assert!(lower > base);
    }

    #[test]
    fn score_is_bounded_by_the_p_floor_logarithm() {
        let n = 4;
        let mut r = empty_result(n, 5);
        r.val.fill(1.0);
        r.p.fill(1e-10);
        let report = compute_mvs(&r, &MvsConfig::default()).unwrap();
        let bound = -(1e-10f64).ln();
        assert!((report.score - bound).abs() < 1e-9);
        assert!(report.score <= 23.026);
    }

    #[test]
    fn denominator_uses_the_analyzed_panel_width() {
        // N = 3: denominator is 9·(1+2+3+4) = 90
        let mut r = empty_result(3, 5);
        r.val[[0, 1, 2]] = 0.5;
        r.p[[0, 1, 2]] = 0.01;
        let report = compute_mvs(&r, &MvsConfig::default()).unwrap();
        let want = 0.5 * -(0.01f64.ln()) / 90.0;
        assert!((report.score - want).abs() < 1e-15);
        assert_eq!(report.n_vars, 3);
    }

    #[test]
    fn aggregated_results_are_accepted() {
        let mut r = empty_result(4, 5);
        r.val[[1, 2, 2]] = 0.5;
        r.p[[1, 2, 2]] = 0.01;
        let agg = crate::pcmci::aggregate_runs(std::slice::from_ref(&r)).unwrap();
        let a = compute_mvs(&agg, &MvsConfig::default()).unwrap();
        let b = compute_mvs(&r, &MvsConfig::default()).unwrap();
        assert!((a.score - b.score).abs() < 1e-9);
    }

    #[test]
    fn matches_a_naive_reimplementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let config = MvsConfig::default();
        for _ in 0..1000 {
            let n = rng.random_range(2..=5usize);
            let mut r = empty_result(n, 5);
            for v in r.val.iter_mut() {
                *v = rng.random_range(-1.0..1.0);
            }
            for p in r.p.iter_mut() {
                *p = 10f64.powf(rng.random_range(-10.0..0.0));
            }
            let got = compute_mvs(&r, &config).unwrap().score;

            let mut num = 0.0;
            for k in 2..=5usize {
                for i in 0..n {
                    for j in 0..n {
                        if r.p[[i, j, k]] <= 0.05 {
                            num += (k - 1) as f64
                                * r.val[[i, j, k]].abs()
                                * -(r.p[[i, j, k]].max(1e-10).ln());
                        }
                    }
                }
            }
            let want = num / ((n * n) as f64 * 10.0);
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_configs_and_mismatched_tau_are_rejected() {
        let r = empty_result(3, 3);
        let config = MvsConfig {
            tau_max: 5,
            ..MvsConfig::default()
        };
        assert!(matches!(
            compute_mvs(&r, &config),
            Err(Error::Contract(_))
        ));
        let bad = MvsConfig {
            tau_max: 1,
            ..MvsConfig::default()
        };
        assert!(compute_mvs(&empty_result(3, 5), &bad).is_err());
        let bad = MvsConfig {
            p_floor: 0.5,
            ..MvsConfig::default()
        };
        assert!(compute_mvs(&empty_result(3, 5), &bad).is_err());
    }
}
