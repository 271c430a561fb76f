//! Confidence intervals for binomial proportions and a multinomial bootstrap
//! over joint syndrome counts.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Result};
use crate::frame::JointCounts;
use crate::parallel::map_chunks;
use crate::rng::{Domain, StreamFamily};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn half_width(&self) -> f64 {
        (self.high - self.low) / 2.0
    }

    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

fn check_level(confidence: f64) -> Result<()> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid(
            "confidence",
            format!("{confidence} outside (0, 1)"),
        ));
    }
    Ok(())
}

fn wilson(successes: u64, n: u64, z: f64) -> Result<Interval> {
    if n == 0 {
        return Err(invalid(
            "n_samples",
            "cannot form an interval from zero samples",
        ));
    }
    if successes > n {
        return Err(invalid("successes", format!("{successes} > {n}")));
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Ok(Interval {
        low: (centre - spread).max(0.0),
        high: (centre + spread).min(1.0),
    })
}

/// Two-sided Wilson score interval at the given confidence level.
pub fn wilson_interval(successes: u64, n: u64, confidence: f64) -> Result<Interval> {
    check_level(confidence)?;
    wilson(successes, n, normal_quantile(0.5 + confidence / 2.0))
}

/// One-sided Wilson lower bound: the true proportion exceeds it with
/// probability `confidence`.
pub fn wilson_lower_bound(successes: u64, n: u64, confidence: f64) -> Result<f64> {
    check_level(confidence)?;
    Ok(wilson(successes, n, normal_quantile(confidence))?.low)
}

/// Draw a multinomial resample of the same size as `counts`.
pub fn resample_counts<R: Rng>(counts: &JointCounts, rng: &mut R) -> JointCounts {
    let mut out = JointCounts::new(counts.basis, counts.params, counts.seed);
    let mut remaining = counts.total();
    let mut mass = remaining as f64;
    for s in 0..=255u8 {
        for flip in [false, true] {
            let c = counts.get(s)[flip as usize];
            if c == 0 || remaining == 0 {
                continue;
            }
            let p = (c as f64 / mass).min(1.0);
            let draw = Binomial::new(remaining, p).map_or(remaining, |b| b.sample(rng));
            out.add_count(s, flip, draw);
            remaining -= draw;
            mass -= c as f64;
        }
    }
    out
}

/// Bootstrap distribution of `statistic`, resampling each data set
/// independently. Replicate `r` uses bootstrap stream `r`, so the result
/// depends only on `seed`. Replicates where the statistic is undefined
/// (`None`) are dropped. Returned sorted.
pub fn bootstrap<F>(data: &[&JointCounts], replicates: usize, seed: u64, statistic: F) -> Vec<f64>
where
    F: Fn(&[JointCounts]) -> Option<f64> + Sync + Send,
{
    let family = StreamFamily::new(seed, Domain::Bootstrap);
    let mut values = map_chunks(
        replicates as u64,
        None,
        |range| {
            range
                .filter_map(|r| {
                    let mut rng = family.stream(r);
                    let resampled: Vec<JointCounts> =
                        data.iter().map(|c| resample_counts(c, &mut rng)).collect();
                    statistic(&resampled)
                })
                .collect::<Vec<f64>>()
        },
        |mut a, b| {
            a.extend(b);
            a
        },
    );
    values.sort_by(f64::total_cmp);
    values
}

/// Linear-interpolated quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] * (1.0 - frac) + sorted[hi] * frac)
}

/// Two-sided percentile interval of a sorted bootstrap distribution.
pub fn percentile_interval(sorted: &[f64], confidence: f64) -> Option<Interval> {
    let tail = (1.0 - confidence) / 2.0;
    Some(Interval {
        low: quantile(sorted, tail)?,
        high: quantile(sorted, 1.0 - tail)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseParams;
    use crate::pauli::Basis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wilson_reference_values() {
        // 81 of 263 at 95%: the textbook example gives [0.2553, 0.3662].
        let iv = wilson_interval(81, 263, 0.95).unwrap();
        assert!((iv.low - 0.2553).abs() < 1e-4, "{iv:?}");
        assert!((iv.high - 0.3662).abs() < 1e-4, "{iv:?}");
        let all = wilson_interval(10, 10, 0.99).unwrap();
        assert_eq!(all.high, 1.0);
        assert!(all.low < 1.0);
        assert!(wilson_interval(0, 0, 0.9).is_err());
    }

    #[test]
    fn one_sided_bound_is_tighter_than_two_sided() {
        let two = wilson_interval(900, 1000, 0.98).unwrap();
        let one = wilson_lower_bound(900, 1000, 0.99).unwrap();
        assert!((one - two.low).abs() < 1e-12);
    }

    #[test]
    fn resample_preserves_total() {
        let mut c = JointCounts::new(Basis::Z, NoiseParams::noiseless(), 0);
        c.add_count(0, false, 700);
        c.add_count(3, true, 200);
        c.add_count(200, false, 100);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = resample_counts(&c, &mut rng);
        assert_eq!(r.total(), 1000);
        assert_eq!(r.get(1), [0, 0]);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.5), Some(3.0));
        assert_eq!(quantile(&v, 0.125), Some(1.5));
        assert_eq!(quantile(&[], 0.5), None);
    }
}
