mod common;

use common::*;
use opennas::arch::LayerSpec;
use opennas::rng::substream;
use opennas::space::Rule;
use opennas::{sample_random, validate, AcoConfig, Architecture, Shape, SpaceConfig};
use proptest::prelude::*;

fn cifar() -> Shape {
    Shape::new(32, 32, 3)
}

proptest! {
    #[test]
    fn documents_round_trip(seed in any::<u64>(), cifar_input in any::<bool>()) {
        let shape = if cifar_input { cifar() } else { MNIST };
        let arch = sample_random(&SpaceConfig::pso_default(), shape, 10, &mut substream(seed, &[]));
        let doc = arch.to_document();
        let back = Architecture::from_document(&doc).unwrap();
        prop_assert_eq!(&back, &arch);
        prop_assert_eq!(back.to_document(), doc);
    }

    #[test]
    fn walks_round_trip(seed in any::<u64>()) {
        let arch = opennas::baseline::random_walk(&AcoConfig::preset_a(), MNIST, 10, &mut substream(seed, &[]));
        let back = Architecture::from_document(&arch.to_document()).unwrap();
        prop_assert_eq!(back, arch);
    }

    #[test]
    fn materialized_samples_stay_shape_safe(seed in any::<u64>()) {
        let space = SpaceConfig::pso_default();
        let arch = sample_random(&space, cifar(), 10, &mut substream(seed, &[]));
        let wide = space.materialize(&arch);
        prop_assert!(wide.shape_infer().is_ok());
        prop_assert_eq!(wide.shape_infer().unwrap().head_input, arch.shape_infer().unwrap().head_input);
    }

    #[test]
    fn param_count_is_additive(c1 in 1u32..64, c2 in 1u32..64, k in prop::sample::select(vec![1u32, 3, 5, 7]), units in 1u32..300) {
        let arch = arch(vec![LayerSpec::conv(c1, k), LayerSpec::MaxPool, LayerSpec::conv(c2, 3), LayerSpec::fc(units)]);
        let expected = (u64::from(k * k) + 1) * u64::from(c1)
            + (9 * u64::from(c1) + 1) * u64::from(c2)
            + (14 * 14 * u64::from(c2) + 1) * u64::from(units)
            + (u64::from(units) + 1) * 10;
        prop_assert_eq!(arch.param_count().unwrap(), expected);
    }
}

#[test]
fn ten_thousand_samples_validate() {
    for space in [SpaceConfig::pso_default(), SpaceConfig::aco_default()] {
        for seed in 0..10_000 {
            let arch = sample_random(&space, MNIST, 10, &mut substream(seed, &[7]));
            let report = validate(&arch, &space);
            assert!(report.valid, "seed {seed}: {:?}", report.violations);
        }
    }
}

#[test]
fn table_violations_are_each_reported() {
    let doc = include_str!("fixtures/table1_violating.json");
    let arch = Architecture::from_document(doc).unwrap();
    let report = validate(&arch, &SpaceConfig::pso_default());
    assert!(!report.valid);
    assert_eq!(report.violations.len(), 3, "{:?}", report.violations);
    assert!(report.has(Rule::ConvChannels, Some(0)));
    assert!(report.has(Rule::ConvKernel, Some(2)));
    assert!(report.has(Rule::FcUnits, Some(3)));
}

#[test]
fn tiny_spaces_enumerate_to_their_sizes() {
    let pso = enumerate_tiny_pso();
    assert_eq!(pso.len(), 64);
    let aco = enumerate_tiny_aco();
    assert_eq!(aco.len(), 34);
    for a in &pso {
        assert!(validate(a, &tiny_pso_config().space).valid);
    }
    for a in &aco {
        assert!(validate(a, &tiny_aco_config().space).valid);
    }
    let mut docs: Vec<String> = aco.iter().map(Architecture::to_document).collect();
    docs.sort();
    docs.dedup();
    assert_eq!(docs.len(), 34);
}
