//! Monte Carlo uncertainty estimation.
//!
//! Counts are resampled Poisson-centered on the observed values, the full
//! reconstruction pipeline is rerun per resample, and the sample standard
//! deviation of each derived metric is reported. Resamples are independent
//! substreams of the master seed, so the result is deterministic and
//! insensitive to execution order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{derive_seed, CoincidenceRecord, CountSampler};
use crate::error::{Error, Result};

/// Samples and spread of one derived metric across resamples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricUncertainty {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
}

/// Per-metric uncertainties plus resample bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UncertaintyReport {
    pub metrics: BTreeMap<String, MetricUncertainty>,
    pub n_resamples: usize,
    /// Resamples whose pipeline failed; excluded from the statistics.
    pub failed_resamples: usize,
}

impl UncertaintyReport {
    pub fn std_dev(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).map(|m| m.std_dev)
    }
}

/// Label under which resample streams are derived from the master seed.
const RESAMPLE_STREAM: u64 = 0x4d43; // "MC"

/// Resample counts, rerun `pipeline`, report per-metric standard
/// deviations.
///
/// `pipeline` maps a record set to named metric values. Failures on
/// individual resamples are recorded and excluded rather than aborting the
/// whole estimate.
pub fn monte_carlo_uncertainty<F>(
    records: &[CoincidenceRecord],
    n_resamples: usize,
    master_seed: u64,
    pipeline: F,
) -> Result<UncertaintyReport>
where
    F: Fn(&[CoincidenceRecord]) -> Result<Vec<(String, f64)>> + Sync,
{
    if n_resamples < 2 {
        return Err(Error::InsufficientData(format!(
            "Monte Carlo uncertainty needs at least 2 resamples, got {n_resamples}"
        )));
    }

    let outcomes: Vec<Option<Vec<(String, f64)>>> = (0..n_resamples)
        .into_par_iter()
        .map(|resample| {
            let seed = derive_seed(master_seed, &[RESAMPLE_STREAM, resample as u64]);
            let mut sampler = CountSampler::from_seed(seed);
            let resampled: Result<Vec<CoincidenceRecord>> = records
                .iter()
                .map(|r| {
                    Ok(CoincidenceRecord {
                        setting: r.setting,
                        counts: sampler.sample(r.counts as f64)?,
                        expected_rate_hz: r.expected_rate_hz,
                    })
                })
                .collect();
            match resampled.and_then(|rec| pipeline(&rec)) {
                Ok(metrics) => Some(metrics),
                Err(_) => None,
            }
        })
        .collect();

    let mut per_metric: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut failed = 0;
    for outcome in outcomes {
        match outcome {
            Some(metrics) => {
                for (name, value) in metrics {
                    per_metric.entry(name).or_default().push(value);
                }
            }
            None => failed += 1,
        }
    }
    if n_resamples - failed < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} of {n_resamples} resamples succeeded",
            n_resamples - failed
        )));
    }

    let metrics = per_metric
        .into_iter()
        .map(|(name, samples)| {
            let n = samples.len() as f64;
            let mean = samples.iter().sum::<f64>() / n;
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (
                name,
                MetricUncertainty {
                    mean,
                    std_dev: var.sqrt(),
                    samples,
                },
            )
        })
        .collect();

    Ok(UncertaintyReport {
        metrics,
        n_resamples,
        failed_resamples: failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomography::{MeasurementSetting, Polarization};

    fn records_with_counts(counts: &[u64]) -> Vec<CoincidenceRecord> {
        counts
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                let pol = Polarization::ALL[k % 6];
                CoincidenceRecord::new(MeasurementSetting::single(pol, 0.0, 1.0), n)
            })
            .collect()
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let records = records_with_counts(&[100, 50, 75, 75, 60, 90]);
        let pipeline = |recs: &[CoincidenceRecord]| {
            Ok(vec![(
                "total".to_string(),
                recs.iter().map(|r| r.counts as f64).sum(),
            )])
        };
        let a = monte_carlo_uncertainty(&records, 2, 99, pipeline).unwrap();
        let b = monte_carlo_uncertainty(&records, 2, 99, pipeline).unwrap();
        assert_eq!(a.metrics["total"].samples, b.metrics["total"].samples);
        let c = monte_carlo_uncertainty(&records, 2, 100, pipeline).unwrap();
        assert_ne!(a.metrics["total"].samples, c.metrics["total"].samples);
    }

    #[test]
    fn uncertainty_shrinks_with_counts() {
        // relative spread of a Poisson total scales as 1/√N
        let pipeline = |recs: &[CoincidenceRecord]| {
            Ok(vec![(
                "total".to_string(),
                recs.iter().map(|r| r.counts as f64).sum(),
            )])
        };
        let small = records_with_counts(&[100; 6]);
        let large = records_with_counts(&[1_000_000; 6]);
        let small_rel = {
            let r = monte_carlo_uncertainty(&small, 200, 7, pipeline).unwrap();
            r.metrics["total"].std_dev / r.metrics["total"].mean
        };
        let large_rel = {
            let r = monte_carlo_uncertainty(&large, 200, 7, pipeline).unwrap();
            r.metrics["total"].std_dev / r.metrics["total"].mean
        };
        assert!(large_rel < small_rel / 10.0);
    }

    #[test]
    fn failures_are_excluded_and_counted() {
        let records = records_with_counts(&[40, 60, 50, 50, 45, 55]);
        let pipeline = |recs: &[CoincidenceRecord]| {
            let total: u64 = recs.iter().map(|r| r.counts).sum();
            if total % 2 == 0 {
                Err(crate::error::Error::Domain("even total".into()))
            } else {
                Ok(vec![("total".to_string(), total as f64)])
            }
        };
        let report = monte_carlo_uncertainty(&records, 64, 3, pipeline).unwrap();
        assert!(report.failed_resamples > 0);
        assert_eq!(
            report.metrics["total"].samples.len(),
            64 - report.failed_resamples
        );
    }

    #[test]
    fn too_few_resamples_is_an_error() {
        let records = records_with_counts(&[10; 6]);
        let pipeline = |_: &[CoincidenceRecord]| Ok(vec![("x".to_string(), 1.0)]);
        assert!(monte_carlo_uncertainty(&records, 1, 1, pipeline).is_err());
    }
}
