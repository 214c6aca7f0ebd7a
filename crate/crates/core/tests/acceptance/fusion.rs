use std::collections::{BTreeMap, BTreeSet};

use herdsense::disease::{DiseaseId, DiseaseRegistry};
use herdsense::fusion::{fuse, predict_with, AgentOpinion, ConfidenceTier, TierBands};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INSTANCES: usize = 10_000;

fn random_opinions(rng: &mut ChaCha8Rng, registry: &DiseaseRegistry) -> Vec<AgentOpinion> {
    let n = rng.random_range(1..=6);
    (0..n)
        .map(|i| {
            let conf: BTreeMap<DiseaseId, f64> = registry
                .ids()
                .map(|d| (d.clone(), rng.random_range(0.0..=1.0)))
                .collect();
            let w = rng.random_range(0.01..10.0);
            AgentOpinion::new(format!("agent-{i}"), w, conf, registry).unwrap()
        })
        .collect()
}

fn brute_force(opinions: &[AgentOpinion], d: &DiseaseId) -> f64 {
    let total: f64 = opinions.iter().map(|o| o.weight).sum();
    opinions.iter().map(|o| o.weight * o.confidences[d]).sum::<f64>() / total
}

/// Independent tier rule: lower edges inclusive.
fn tier_oracle(c: f64, b: &TierBands) -> ConfidenceTier {
    match c {
        c if c >= b.very_high => ConfidenceTier::VeryHigh,
        c if c >= b.high => ConfidenceTier::High,
        c if c >= b.medium => ConfidenceTier::Medium,
        _ => ConfidenceTier::Low,
    }
}

pub fn properties() -> String {
    let registry = DiseaseRegistry::default();
    let bands = TierBands::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for i in 0..INSTANCES {
        let opinions = random_opinions(&mut rng, &registry);
        let fused = fuse(&opinions).unwrap();
        for d in registry.ids() {
            let diff = (fused[d] - brute_force(&opinions, d)).abs();
            worst = worst.max(diff);
            assert!(diff <= 1e-12, "instance {i}, {d}: off by {diff}");
        }

        let tau = rng.random_range(0.0..=1.0);
        let outcome = predict_with(&fused, tau, &bands);
        let naive: BTreeSet<DiseaseId> = fused
            .iter()
            .filter(|(_, c)| **c >= tau)
            .map(|(d, _)| d.clone())
            .collect();
        assert_eq!(outcome.fused.prediction_set, naive, "instance {i}");
        assert_eq!(outcome.ood, naive.is_empty());
        for (d, c) in &fused {
            assert_eq!(outcome.fused.tiers[d], tier_oracle(*c, &bands), "instance {i}, {d}");
        }

        // Raising one agent's confidence for one disease never lowers it.
        let agent = rng.random_range(0..opinions.len());
        let d = registry.ids().nth(rng.random_range(0..registry.len())).unwrap().clone();
        let mut raised = opinions.clone();
        let c = raised[agent].confidences.get_mut(&d).unwrap();
        *c = rng.random_range(*c..=1.0);
        assert!(fuse(&raised).unwrap()[&d] >= fused[&d] - 1e-15, "monotonicity, instance {i}");

        // Scaling all raw weights by the same factor changes nothing.
        let k = rng.random_range(0.001..1000.0);
        let mut scaled = opinions.clone();
        for o in &mut scaled {
            o.weight *= k;
        }
        let rescaled = fuse(&scaled).unwrap();
        for d in registry.ids() {
            assert!((rescaled[d] - fused[d]).abs() <= 1e-12, "scale invariance, instance {i}");
        }
    }

    let probes = [
        (bands.very_high - 1e-9, ConfidenceTier::High),
        (bands.very_high + 1e-9, ConfidenceTier::VeryHigh),
        (bands.high - 1e-9, ConfidenceTier::Medium),
        (bands.high + 1e-9, ConfidenceTier::High),
        (bands.medium - 1e-9, ConfidenceTier::Low),
        (bands.medium + 1e-9, ConfidenceTier::Medium),
    ];
    for (c, want) in probes {
        assert_eq!(bands.tier(c).unwrap(), want, "probe {c}");
    }
    format!("{INSTANCES} instances, max fusion error {worst:.1e}, 6 edge probes")
}
