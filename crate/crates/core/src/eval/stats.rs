use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("samples have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two matched pairs, got {0}")]
    TooFewSamples(usize),
    #[error("all paired differences are equal")]
    DegenerateVariance,
    #[error("samples contain non-finite values")]
    NonFinite,
    #[error("fraction must be in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("iterations must be at least 1")]
    ZeroIterations,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub df: f64,
    pub n: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
}

const DEGENERATE_REL: f64 = 1e-12;

/// Paired t-test on `a[i] - b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples(n));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.iter().all(|d| *d == diffs[0]) {
        return Err(StatsError::DegenerateVariance);
    }
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    // Differences that agree up to rounding of the inputs count as constant.
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    if sd <= DEGENERATE_REL * scale || var <= 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let t = mean / (sd / nf.sqrt());
    let df = nf - 1.0;
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1 is valid");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest {
        t,
        p,
        df,
        n,
        mean_diff: mean,
        sd_diff: sd,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub mean_t: f64,
    pub mean_p: f64,
    pub iterations: usize,
    /// Iterations whose subsample had constant differences and was left out
    /// of the averages.
    pub skipped: usize,
    pub sample_size: usize,
}

/// Averages paired t-tests over `iterations` subsamples of
/// `floor(fraction * n)` matched pairs drawn without replacement. Iteration
/// `i` uses ChaCha8 stream `i` of `seed`, so results do not depend on
/// thread scheduling.
pub fn bootstrap_t(
    a: &[f64],
    b: &[f64],
    fraction: f64,
    iterations: usize,
    seed: u64,
) -> Result<BootstrapResult, StatsError> {
    paired_t_test(a, b)?;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(StatsError::InvalidFraction(fraction));
    }
    if iterations == 0 {
        return Err(StatsError::ZeroIterations);
    }
    let n = a.len();
    let m = (fraction * n as f64).floor() as usize;
    if m < 2 {
        return Err(StatsError::TooFewSamples(m));
    }
    let results: Vec<Option<TTest>> = (0..iterations)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
            idx.sort_unstable();
            let sa: Vec<f64> = idx.iter().map(|&j| a[j]).collect();
            let sb: Vec<f64> = idx.iter().map(|&j| b[j]).collect();
            match paired_t_test(&sa, &sb) {
                Ok(t) => Some(t),
                Err(StatsError::DegenerateVariance) => None,
                Err(e) => unreachable!("subsample of a valid pair set failed: {e}"),
            }
        })
        .collect();
    let kept: Vec<TTest> = results.iter().flatten().copied().collect();
    if kept.is_empty() {
        return Err(StatsError::DegenerateVariance);
    }
    let k = kept.len() as f64;
    Ok(BootstrapResult {
        mean_t: kept.iter().map(|t| t.t).sum::<f64>() / k,
        mean_p: kept.iter().map(|t| t.p).sum::<f64>() / k,
        iterations,
        skipped: iterations - kept.len(),
        sample_size: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Box-Muller, enough for building test data.
    fn normal(rng: &mut impl Rng, mean: f64, sd: f64) -> f64 {
        let u1: f64 = rng.random_range(f64::EPSILON..1.0);
        let u2: f64 = rng.random();
        mean + sd * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    #[test]
    fn hand_case() {
        let a = [2.0, 4.0, 6.0, 8.0, 10.0];
        let b = [1.0, 2.0, 3.0, 4.0, 5.0];
        let r = paired_t_test(&a, &b).unwrap();
        assert!((r.mean_diff - 3.0).abs() < 1e-12);
        assert!((r.sd_diff - 1.5811388300841898).abs() < 1e-12);
        assert!((r.t - 4.242640687119285).abs() < 1e-9);
        assert_eq!(r.df, 4.0);
        assert!((r.p - 0.013235599563682695).abs() < 1e-6);
    }

    #[test]
    fn antisymmetry() {
        let a = [1.0, 3.0, 2.0, 5.0];
        let b = [0.5, 1.0, 2.5, 3.0];
        let x = paired_t_test(&a, &b).unwrap();
        let y = paired_t_test(&b, &a).unwrap();
        assert_eq!(x.t, -y.t);
        assert_eq!(x.p, y.p);
    }

    #[test]
    fn errors() {
        assert_eq!(paired_t_test(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::DegenerateVariance));
        assert_eq!(paired_t_test(&[1.0], &[1.0, 2.0]), Err(StatsError::LengthMismatch(1, 2)));
        assert_eq!(paired_t_test(&[1.0], &[2.0]), Err(StatsError::TooFewSamples(1)));
        assert_eq!(bootstrap_t(&[1.0, 2.0, 4.0], &[0.0; 3], 0.8, 0, 1), Err(StatsError::ZeroIterations));
        assert_eq!(bootstrap_t(&[1.0, 2.0, 4.0], &[0.0; 3], 1.5, 1, 1), Err(StatsError::InvalidFraction(1.5)));
    }

    #[test]
    fn degenerate_bootstrap_is_the_plain_test() {
        let a = [3.1, 2.2, 5.0, 4.4, 1.9, 3.3];
        let b = [2.0, 2.5, 3.9, 4.0, 1.0, 3.0];
        let t = paired_t_test(&a, &b).unwrap();
        let bt = bootstrap_t(&a, &b, 1.0, 1, 99).unwrap();
        assert_eq!((bt.mean_t, bt.mean_p), (t.t, t.p));
    }

    #[test]
    fn seeded_and_significant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b: Vec<f64> = (0..30).map(|_| normal(&mut rng, 3.0, 0.5)).collect();
        let a: Vec<f64> = b.iter().map(|x| x + normal(&mut rng, 1.0, 0.3)).collect();
        let r1 = bootstrap_t(&a, &b, 0.8, 200, 42).unwrap();
        let r2 = bootstrap_t(&a, &b, 0.8, 200, 42).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.sample_size, 24);
        assert!(r1.mean_p < 0.05);
        assert!(r1.mean_t > 0.0);
    }
}
