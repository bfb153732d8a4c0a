use serde::{Deserialize, Serialize};

use crate::data::dataset::{Dataset, Frequency};
use crate::numerics::Rng;

/// One sinusoidal term: `amplitude * sin(2*pi*t / period + phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

impl Wave {
    pub fn new(amplitude: f64, period: f64, phase: f64) -> Self {
        Wave { amplitude, period, phase }
    }

    fn eval(&self, t: f64) -> f64 {
        self.amplitude * (std::f64::consts::TAU * t / self.period + self.phase).sin()
    }
}

/// Recipe for synthetic non-stationary series: a trend shared by every
/// channel, per-channel seasonal waves, and per-channel Gaussian noise.
/// Channel entries cycle when a list is shorter than the channel count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthRecipe {
    /// Linear drift per timestep, shared across channels.
    pub trend_slope: f64,
    /// Slow waves shared across channels.
    pub trend_waves: Vec<Wave>,
    /// Seasonal stack per channel.
    pub channel_waves: Vec<Vec<Wave>>,
    /// Noise standard deviation per channel.
    pub noise_std: Vec<f64>,
    pub frequency: Frequency,
}

impl SynthRecipe {
    /// Shared trend only: every channel comes out identical.
    pub fn trend_only() -> Self {
        SynthRecipe {
            trend_slope: 0.01,
            trend_waves: vec![Wave::new(2.0, 240.0, 0.0)],
            channel_waves: vec![Vec::new()],
            noise_std: vec![0.0],
            frequency: Frequency::Hourly,
        }
    }

    /// The failure-mode scenario: identical global trends, distinct local
    /// variation per channel. Each channel carries its own fundamental
    /// period with harmonics (sharp, non-sinusoidal shapes), one seasonal
    /// component shared across channels so cross-channel mixing has signal
    /// to exploit, and moderate noise.
    pub fn local_variation(channels: usize) -> Self {
        let fundamentals = [24.0, 16.0, 12.0, 32.0, 20.0, 8.0];
        let mut channel_waves = Vec::with_capacity(channels);
        for c in 0..channels {
            let p = fundamentals[c % fundamentals.len()];
            let phase = std::f64::consts::TAU * 0.618 * (c as f64 + 1.0);
            channel_waves.push(vec![
                Wave::new(1.0, p, phase),
                Wave::new(0.5, p / 2.0, 2.0 * phase),
                Wave::new(0.25, p / 4.0, 3.0 * phase),
                // Shared component, same period and phase in every channel.
                Wave::new(0.6, 48.0, 0.8),
            ]);
        }
        SynthRecipe {
            trend_slope: 0.002,
            trend_waves: vec![Wave::new(2.0, 400.0, 0.3)],
            channel_waves,
            noise_std: vec![0.2],
            frequency: Frequency::Hourly,
        }
    }
}

/// Generate a deterministic synthetic dataset:
/// `channel c = trend(t) + sum_k wave_{c,k}(t) + sigma_c * noise`.
pub fn synth_generate(channels: usize, length: usize, seed: u64, recipe: &SynthRecipe) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut values = Vec::with_capacity(length * channels);
    for t in 0..length {
        let tf = t as f64;
        let mut trend = recipe.trend_slope * tf;
        for w in &recipe.trend_waves {
            trend += w.eval(tf);
        }
        for c in 0..channels {
            let mut v = trend;
            if !recipe.channel_waves.is_empty() {
                for w in &recipe.channel_waves[c % recipe.channel_waves.len()] {
                    v += w.eval(tf);
                }
            }
            let sigma = if recipe.noise_std.is_empty() {
                0.0
            } else {
                recipe.noise_std[c % recipe.noise_std.len()]
            };
            if sigma > 0.0 {
                v += sigma * rng.normal(0.0, 1.0);
            }
            values.push(v);
        }
    }
    let minutes = recipe.frequency.minutes().unwrap_or(60);
    let timestamps = (0..length).map(|t| fake_timestamp(t as u64 * minutes)).collect();
    Dataset {
        name: format!("synth-{seed}"),
        channels,
        rows: length,
        values,
        frequency: recipe.frequency,
        timestamps,
        channel_names: (0..channels).map(|c| format!("ch{c}")).collect(),
    }
}

/// Render minutes-since-origin as a calendar timestamp starting at
/// 2016-07-01 00:00. Thirty-day months keep the arithmetic trivial; the
/// stamps only need to be monotone and well-formed.
fn fake_timestamp(total_minutes: u64) -> String {
    let minute = total_minutes % 60;
    let total_hours = total_minutes / 60;
    let hour = total_hours % 24;
    let total_days = total_hours / 24;
    let day = total_days % 30 + 1;
    let total_months = total_days / 30;
    let month = (6 + total_months) % 12 + 1;
    let year = 2016 + (6 + total_months) / 12;
    format!("{year:04}-{month:02}-{day:02} {hour:02}:{minute:02}:00")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_only_channels_are_identical() {
        let ds = synth_generate(3, 100, 7, &SynthRecipe::trend_only());
        for r in 0..ds.rows {
            assert_eq!(ds.value(r, 0), ds.value(r, 1));
            assert_eq!(ds.value(r, 0), ds.value(r, 2));
        }
    }

    #[test]
    fn equal_seeds_equal_data() {
        let recipe = SynthRecipe::local_variation(4);
        let a = synth_generate(4, 256, 9, &recipe);
        let b = synth_generate(4, 256, 9, &recipe);
        assert_eq!(a.values, b.values);
        let c = synth_generate(4, 256, 10, &recipe);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn channels_have_distinct_dominant_periods() {
        // After removing the shared trend, the strongest spectral line of
        // each channel should sit at that channel's own fundamental.
        let mut recipe = SynthRecipe::local_variation(2);
        recipe.noise_std = vec![0.0];
        for waves in &mut recipe.channel_waves {
            waves.retain(|w| w.amplitude >= 1.0); // fundamental only
        }
        let n = 480;
        let ds = synth_generate(2, n, 3, &recipe);
        let trend: Vec<f64> = (0..n)
            .map(|t| {
                let tf = t as f64;
                recipe.trend_slope * tf
                    + recipe.trend_waves.iter().map(|w| w.eval(tf)).sum::<f64>()
            })
            .collect();
        let candidates = [24.0, 16.0, 12.0, 32.0];
        for c in 0..2 {
            let resid: Vec<f64> = (0..n).map(|t| ds.value(t, c) - trend[t]).collect();
            let mut best = (0.0, 0.0);
            for &p in &candidates {
                // Naive single-frequency DFT magnitude.
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &v) in resid.iter().enumerate() {
                    let ang = std::f64::consts::TAU * t as f64 / p;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                let mag = (re * re + im * im).sqrt();
                if mag > best.1 {
                    best = (p, mag);
                }
            }
            let expected = [24.0, 16.0][c];
            assert_eq!(best.0, expected, "channel {c} dominant period");
        }
    }

    #[test]
    fn timestamps_are_monotone_and_well_formed() {
        let ds = synth_generate(1, 50, 1, &SynthRecipe::trend_only());
        assert!(ds.timestamps.windows(2).all(|w| w[0] < w[1]));
        assert!(ds.timestamps[0].starts_with("2016-07-01 00:00"));
    }
}
