use herdsense::eval::{bootstrap_t, paired_t_test, StatsError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-sided p for Student's t with 4 degrees of freedom, closed form.
fn p_df4(t: f64) -> f64 {
    let u = 1.0 + t * t / 4.0;
    let cdf = 0.5 + 0.375 * (t.abs() / u.sqrt()) * (1.0 - t * t / (12.0 * u));
    2.0 * (1.0 - cdf)
}

pub fn t_tests() -> String {
    // Differences 1..5.
    let b = [10.0, 20.0, 30.0, 40.0, 50.0];
    let a: Vec<f64> = b.iter().zip(1..=5).map(|(x, d)| x + d as f64).collect();
    let r = paired_t_test(&a, &b).unwrap();
    let t_oracle = 3.0 / (2.5f64.sqrt() / 5f64.sqrt());
    assert!((r.t - 4.2426).abs() < 1e-3, "t = {}", r.t);
    assert!((r.t - t_oracle).abs() < 1e-12);
    assert_eq!(r.df, 4.0);
    let p_oracle = p_df4(t_oracle);
    assert!((r.p - p_oracle).abs() < 1e-9, "p = {} vs {p_oracle}", r.p);

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..100 {
        let n = rng.random_range(3..40);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let fwd = paired_t_test(&x, &y).unwrap();
        let rev = paired_t_test(&y, &x).unwrap();
        assert!((fwd.t + rev.t).abs() < 1e-12, "antisymmetry, dataset {i}");
        assert!((fwd.p - rev.p).abs() < 1e-12);

        let shift = rng.random_range(-2.0..2.0);
        let z: Vec<f64> = x.iter().map(|v| v + shift).collect();
        assert_eq!(paired_t_test(&z, &x), Err(StatsError::DegenerateVariance), "dataset {i}");

        let boot = bootstrap_t(&x, &y, 1.0, 1, rng.random()).unwrap();
        assert_eq!(boot.mean_t, fwd.t, "bootstrap t, dataset {i}");
        assert_eq!(boot.mean_p, fwd.p, "bootstrap p, dataset {i}");
        assert_eq!(boot.skipped, 0);
    }
    format!("t={:.4} p={:.5}; 100 datasets antisymmetric, degenerate and bootstrap-equivalent", r.t, r.p)
}
