//! Seeded occupancy scenarios.
//!
//! Every scenario is drawn from its own ChaCha stream, keyed by the run seed
//! and a [`Stream`] label and selected by the scenario index. Scenario `i`
//! is therefore the same whether it is generated alone, as part of a batch,
//! or on another thread.

use alloc::vec::Vec;
use core::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Correlation {
    /// One independent count per zone per step.
    #[default]
    PerStepIid,
    /// One count per zone, held for the whole horizon.
    ConstantOverHorizon,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OccupantDistribution {
    Poisson {
        lambda: f64,
    },
    /// Degenerate distribution: always exactly `count` occupants.
    Fixed {
        count: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyModel {
    pub distribution: OccupantDistribution,
    pub correlation: Correlation,
    /// Sensible heat per occupant, W.
    pub watts_per_person: f64,
    /// One entry per zone, m².
    pub floor_areas_m2: Vec<f64>,
}

impl OccupancyModel {
    pub fn poisson(lambda: f64, correlation: Correlation, watts_per_person: f64, floor_areas_m2: Vec<f64>) -> Self {
        OccupancyModel {
            distribution: OccupantDistribution::Poisson { lambda },
            correlation,
            watts_per_person,
            floor_areas_m2,
        }
    }

    pub fn n_zones(&self) -> usize {
        self.floor_areas_m2.len()
    }

    pub fn validate(&self) -> Result<()> {
        if let OccupantDistribution::Poisson { lambda } = self.distribution {
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(Error::validation("occupancy.lambda", "must be positive and finite"));
            }
        }
        if !(self.watts_per_person.is_finite() && self.watts_per_person >= 0.0) {
            return Err(Error::validation(
                "occupancy.watts_per_person",
                "must be non-negative and finite",
            ));
        }
        if self.floor_areas_m2.is_empty() || self.floor_areas_m2.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::validation(
                "occupancy.floor_areas_m2",
                "need one positive area per zone",
            ));
        }
        Ok(())
    }

    /// Expected occupancy flux over `horizon` steps, step-major.
    pub fn expected_flux(&self, horizon: usize) -> Vec<f64> {
        let mean = match self.distribution {
            OccupantDistribution::Poisson { lambda } => lambda,
            OccupantDistribution::Fixed { count } => f64::from(count),
        };
        (0..horizon)
            .flat_map(|_| {
                self.floor_areas_m2
                    .iter()
                    .map(move |a| mean * self.watts_per_person / a)
            })
            .collect()
    }

    /// Heat flux (W/m²) of `count` occupants in `zone`.
    pub fn flux(&self, zone: usize, count: u32) -> f64 {
        f64::from(count) * self.watts_per_person / self.floor_areas_m2[zone]
    }
}

/// Independent random streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Scenarios entering the scenario programs.
    Training,
    /// Samples averaged into the deterministic forecast.
    Nominal,
    /// The `k`-th validation set.
    Validation(u64),
}

/// Anything that provides a stacked occupancy flux `δ`.
pub trait FluxProfile {
    fn flux(&self) -> &[f64];
}

impl FluxProfile for Vec<f64> {
    fn flux(&self) -> &[f64] {
        self
    }
}

/// Occupant counts and the resulting heat flux, both stacked step-major:
/// entry `k * zones + z` belongs to zone `z` during step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyScenario {
    pub counts: Vec<u32>,
    pub flux: Vec<f64>,
}

impl FluxProfile for OccupancyScenario {
    fn flux(&self) -> &[f64] {
        &self.flux
    }
}

/// Mean flux over `scenarios`: the empirical-expectation forecast.
pub fn mean_flux<S: FluxProfile>(scenarios: &[S]) -> Result<Vec<f64>> {
    let first = scenarios
        .first()
        .ok_or_else(|| Error::validation("scenarios", "need at least one scenario to average"))?;
    let mut mean = alloc::vec![0.0; first.flux().len()];
    for s in scenarios {
        Error::check_dim("scenario flux", mean.len(), s.flux().len())?;
        for (m, v) in mean.iter_mut().zip(s.flux()) {
            *m += v;
        }
    }
    let n = scenarios.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_key(seed: u64, stream: Stream) -> [u8; 32] {
    let (tag, sub) = match stream {
        Stream::Training => (1u64, 0u64),
        Stream::Nominal => (2, 0),
        Stream::Validation(k) => (3, k),
    };
    let mut state = seed ^ splitmix64(&mut tag.wrapping_mul(0xA24B_AED4_963E_E407)) ^ sub.rotate_left(17);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

fn scenario_rng(seed: u64, stream: Stream, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(stream_key(seed, stream));
    rng.set_stream(index as u64);
    rng
}

/// Scenario number `index` of `stream`.
pub fn scenario_at(
    seed: u64,
    stream: Stream,
    index: usize,
    horizon: usize,
    model: &OccupancyModel,
) -> OccupancyScenario {
    let zones = model.n_zones();
    let mut rng = scenario_rng(seed, stream, index);
    let mut draw = || match model.distribution {
        // Poisson::new only fails for non-positive or non-finite λ, which
        // `validate` excludes.
        OccupantDistribution::Poisson { lambda } => {
            let d: f64 = Poisson::new(lambda).expect("validated lambda").sample(&mut rng);
            d as u32
        }
        OccupantDistribution::Fixed { count } => count,
    };
    let counts: Vec<u32> = match model.correlation {
        Correlation::PerStepIid => (0..horizon * zones).map(|_| draw()).collect(),
        Correlation::ConstantOverHorizon => {
            let per_zone: Vec<u32> = (0..zones).map(|_| draw()).collect();
            (0..horizon).flat_map(|_| per_zone.iter().copied()).collect()
        }
    };
    let flux = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| model.flux(i % zones, c))
        .collect();
    OccupancyScenario { counts, flux }
}

/// Scenarios `range` of `stream`.
pub fn sample_occupancy(
    seed: u64,
    stream: Stream,
    range: Range<usize>,
    horizon: usize,
    model: &OccupancyModel,
) -> Result<Vec<OccupancyScenario>> {
    model.validate()?;
    Ok(range.map(|i| scenario_at(seed, stream, i, horizon, model)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn model(correlation: Correlation) -> OccupancyModel {
        OccupancyModel::poisson(3.0, correlation, 100.0, vec![16.0, 16.0, 32.0])
    }

    #[test]
    fn poisson_moments() {
        let m = OccupancyModel::poisson(3.0, Correlation::PerStepIid, 100.0, vec![1.0; 10]);
        let draws: Vec<f64> = sample_occupancy(7, Stream::Training, 0..10_000, 1, &m)
            .unwrap()
            .iter()
            .flat_map(|s| s.counts.iter().map(|&c| f64::from(c)))
            .collect();
        assert_eq!(draws.len(), 100_000);
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        assert!((mean - 3.0).abs() < 0.05, "mean {mean}");
        assert!((var - 3.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn same_seed_same_scenarios() {
        let m = model(Correlation::PerStepIid);
        let a = sample_occupancy(42, Stream::Training, 0..20, 48, &m).unwrap();
        let b = sample_occupancy(42, Stream::Training, 0..20, 48, &m).unwrap();
        assert_eq!(a, b);
        let c = sample_occupancy(43, Stream::Training, 0..20, 48, &m).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn batches_and_single_draws_agree() {
        let m = model(Correlation::PerStepIid);
        let batch = sample_occupancy(5, Stream::Validation(3), 10..15, 12, &m).unwrap();
        for (k, s) in batch.iter().enumerate() {
            assert_eq!(*s, scenario_at(5, Stream::Validation(3), 10 + k, 12, &m));
        }
    }

    #[test]
    fn streams_are_distinct() {
        let m = model(Correlation::PerStepIid);
        let t = scenario_at(1, Stream::Training, 0, 48, &m);
        assert_ne!(t, scenario_at(1, Stream::Nominal, 0, 48, &m));
        assert_ne!(t, scenario_at(1, Stream::Validation(0), 0, 48, &m));
        assert_ne!(
            scenario_at(1, Stream::Validation(0), 0, 48, &m),
            scenario_at(1, Stream::Validation(1), 0, 48, &m)
        );
        assert_ne!(t, scenario_at(1, Stream::Training, 1, 48, &m));
    }

    #[test]
    fn flux_is_counts_times_conversion() {
        let m = model(Correlation::PerStepIid);
        let s = scenario_at(9, Stream::Training, 0, 4, &m);
        assert_eq!(s.counts.len(), 12);
        for (i, (&c, &f)) in s.counts.iter().zip(&s.flux).enumerate() {
            let area = [16.0, 16.0, 32.0][i % 3];
            assert_eq!(f, f64::from(c) * 100.0 / area);
        }
    }

    #[test]
    fn constant_over_horizon_repeats_counts() {
        let m = model(Correlation::ConstantOverHorizon);
        for i in 0..10 {
            let s = scenario_at(3, Stream::Training, i, 6, &m);
            for k in 1..6 {
                assert_eq!(s.counts[k * 3..k * 3 + 3], s.counts[0..3]);
            }
        }
    }

    #[test]
    fn invalid_lambda_is_rejected() {
        let mut m = model(Correlation::PerStepIid);
        m.distribution = OccupantDistribution::Poisson { lambda: 0.0 };
        assert!(sample_occupancy(0, Stream::Training, 0..1, 1, &m).is_err());
        m.distribution = OccupantDistribution::Poisson { lambda: f64::NAN };
        assert!(sample_occupancy(0, Stream::Training, 0..1, 1, &m).is_err());
    }

    #[test]
    fn mean_flux_averages() {
        let a = vec![1.0, 2.0];
        let b = vec![3.0, 6.0];
        assert_eq!(mean_flux(&[a, b]).unwrap(), vec![2.0, 4.0]);
        assert!(mean_flux::<Vec<f64>>(&[]).is_err());
    }
}
