use proptest::prelude::*;
use stfbc::channel::Deployment;
use stfbc::clustering::{
    cluster_users, objective_worst_quartile, step2_merge, step3_add_antennas, ClusteringTrace,
};
use stfbc::rates::RateEngine;

fn engine() -> RateEngine {
    RateEngine::new(0.2, 6.3e-12, 1)
}

fn gains() -> impl Strategy<Value = (usize, Vec<Vec<f64>>, usize)> {
    (2usize..=8, 1usize..=6, 1usize..=2).prop_flat_map(|(m, k, l)| {
        let k = k.min(m * l);
        (
            Just(m),
            prop::collection::vec(prop::collection::vec(-10.0f64..-6.5, k), m)
                .prop_map(|rows| rows.iter().map(|r| r.iter().map(|e| 10f64.powf(*e)).collect()).collect()),
            Just(l),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn assignments_are_valid_and_traced((_m, beta, l) in gains()) {
        let dep = Deployment::from_gains(&beta, l, 1, 0.5, 0.5).unwrap();
        let (a, trace) = cluster_users(&dep, &engine()).unwrap();
        a.validate(dep.total_antennas(), dep.k_ues()).unwrap();
        for c in &a.clusters {
            prop_assert!(c.is_feasible());
            prop_assert!(c.type_id().is_some());
        }
        let k = dep.k_ues();
        prop_assert!(trace.merge_trials <= ClusteringTrace::merge_bound(k, trace.clusters_after_merge));
        prop_assert!(trace.add_trials <= ClusteringTrace::add_bound(dep.total_antennas(), k, a.clusters.len()));
        for w in trace.objective.windows(2) {
            prop_assert!(w[1] > w[0]);
        }
        let se: Vec<f64> = engine().ergodic_se_all(&a, &dep).unwrap().iter().map(|r| r.se).collect();
        let last = *trace.objective.last().unwrap();
        prop_assert!((objective_worst_quartile(&se) - last).abs() <= 1e-12 * last.abs().max(1.0));
    }

    #[test]
    fn second_pass_never_worsens((_m, beta, l) in gains()) {
        let dep = Deployment::from_gains(&beta, l, 1, 0.5, 0.5).unwrap();
        let e = engine();
        let (a, _) = cluster_users(&dep, &e).unwrap();
        let mut t = ClusteringTrace::default();
        let again = step3_add_antennas(step2_merge(a.clone(), &dep, &e, &mut t).unwrap(), &dep, &e, &mut t).unwrap();
        let se = |x| -> f64 {
            objective_worst_quartile(&e.ergodic_se_all(x, &dep).unwrap().iter().map(|r| r.se).collect::<Vec<_>>())
        };
        // not a strict fixed point: step 3 can open new merges
        again.validate(dep.total_antennas(), dep.k_ues()).unwrap();
        prop_assert!(se(&again) >= se(&a));
    }
}
