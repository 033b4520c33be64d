mod common;

use common::*;
use proptest::prelude::*;
use tsinfer::Method;

fn method() -> impl Strategy<Value = Method> {
    prop::sample::select(Method::ALL.to_vec())
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![Just(Op::Ask), Just(Op::Tell), Just(Op::TellWrongLength)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn alternation_violations_rejected(m in method(), seed in any::<u64>(), ops in prop::collection::vec(op(), 1..40)) {
        prop_assert_eq!(alternation(m, seed, &ops), Ok(()));
    }

    #[test]
    fn best_so_far_is_monotone(m in method(), seed in any::<u64>()) {
        prop_assert_eq!(monotone_best(m, seed, 60), Ok(()));
    }

    #[test]
    fn proposals_invariant_under_monotone_transforms(m in method(), seed in any::<u64>(), t in 0..TRANSFORMS.len()) {
        prop_assert_eq!(rank_invariance(m, seed, t, 40), Ok(()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn search_distributions_stay_spd_on_banana(seed in any::<u64>()) {
        prop_assert_eq!(spd_on_banana(seed, 1000), Ok(()));
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn controllers_deterministic_across_workers(seed in any::<u64>()) {
        prop_assert_eq!(controller_determinism(seed), Ok(()));
    }
}

#[test]
fn pso_identical_under_tenfold_scores() {
    for seed in 0..10 {
        assert_eq!(rank_invariance(Method::Pso, seed, 0, 200), Ok(()));
    }
}
