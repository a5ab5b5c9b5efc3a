mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tieflow::qp::{check_kkt, solve_qp};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_active_set_enumeration(seed in any::<u64>(), n in 1usize..=6, m in 0usize..=8, p in 0usize..=2) {
        let p = p.min(n - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qp = common::random_qp(&mut rng, n, p, m);
        let sol = solve_qp(&qp).unwrap();
        prop_assert!(sol.is_optimal());
        let (_, f) = common::enumerate_qp(&qp).expect("feasible by construction");
        prop_assert!((sol.objective - f).abs() <= 1e-7 * f.abs().max(1.0), "{} vs {}", sol.objective, f);
        let kkt = check_kkt(&qp, &sol);
        prop_assert!(kkt.passes(1e-8), "{kkt:?}");
    }

    #[test]
    fn objective_is_consistent(seed in any::<u64>(), n in 1usize..=6, m in 0usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let qp = common::random_qp(&mut rng, n, 0, m);
        let sol = solve_qp(&qp).unwrap();
        prop_assert!((common::objective(&qp, &sol.x) - sol.objective).abs() <= 1e-9 * sol.objective.abs().max(1.0));
    }
}
