use megopolis::resample::PartitionConfig;
use megopolis::warpsim::measure_traffic;
use megopolis::weights::{gen_gaussian_weights, GaussianWeightParams};
use megopolis::{Algorithm, Precision, WarpConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn traffic_ordering(log_n in 10u32..=13, y in 0.0f64..4.0, b in 1usize..16, seed in any::<u64>()) {
        let w = gen_gaussian_weights(GaussianWeightParams { y, n: 1 << log_n }, Precision::Single, seed).unwrap();
        let warp = WarpConfig::default();
        let mean = |alg| measure_traffic(alg, &w, b, warp, seed, None).unwrap().per_iteration_mean;
        let mego = mean(Algorithm::Megopolis);
        let metro = mean(Algorithm::Metropolis);
        prop_assert_eq!(mego, 4.0);
        for part in [Algorithm::MetropolisC1, Algorithm::MetropolisC2] {
            let small = mean(part(PartitionConfig::new(128)));
            let large = mean(part(PartitionConfig::new(2048)));
            prop_assert!(small <= large && large <= metro, "{small} {large} {metro}");
            prop_assert!(mego < large);
            prop_assert!(small <= mego && mego - small < 0.01, "{small}");
        }
    }
}
