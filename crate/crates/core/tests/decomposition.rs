use interleave_core::decompose::{build_error_systems, control_tables, decompose};
use interleave_core::divergence::{sup_hockey_stick, Method, SweepOptions};
use interleave_core::engine::Setting;
use interleave_core::fixtures::{random_pair, FixtureSpec};
use interleave_core::engine::AdversaryEnumeration;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_pairs_decompose_at_their_exact_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..30 {
        let spec = FixtureSpec {
            zero_prob: if i % 3 == 0 { 0.25 } else { 0.0 },
            closeness: 0.6,
            ..FixtureSpec::new(1 + i % 3, 2 + i % 2, 1 + i % 2)
        };
        let pair = random_pair(&mut rng, &spec).unwrap();
        let eps = 0.3;
        let setting = Setting::single(&pair);
        let exact = sup_hockey_stick(&setting, pair.horizon(), eps, SweepOptions::default()).unwrap();
        let dp = sup_hockey_stick(
            &setting,
            pair.horizon(),
            eps,
            SweepOptions {
                method: Method::Induction,
                ..SweepOptions::default()
            },
        )
        .unwrap();
        assert!((exact.delta - dp.delta).abs() < 1e-12);
        let tables = control_tables(&pair, eps).unwrap();
        assert!((tables.start_level() - exact.delta).abs() < 1e-12);
        if exact.delta >= 1.0 - 1e-12 {
            continue;
        }
        let errors = build_error_systems(&pair, eps, exact.delta).unwrap();
        assert!(errors.requirement_violation() < 1e-9);
        let d = decompose(&pair, eps, exact.delta).unwrap();
        let en = AdversaryEnumeration::new(setting.clone(), pair.horizon(), u128::MAX).unwrap();
        for adv in en {
            let gap = d.identity_gap(&adv).unwrap();
            assert!(gap <= 1e-9, "fixture {i}: gap {gap}");
        }
    }
}
