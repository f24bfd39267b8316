use stfbc::config::{Method, Scheme, SimConfig};
use stfbc::harness::{
    self, aggregate, read_records, run, run_drop, write_report, RATES_FILE, SUMMARY_FILE,
};

fn small(drops: usize) -> SimConfig {
    SimConfig {
        n_drops: drops,
        n_trial: 4000,
        ..SimConfig::default()
    }
}

#[test]
fn coded_only_gives_one_row_per_user() {
    let cfg = SimConfig {
        methods: vec![Method::perfect(Scheme::Alamouti)],
        ..small(1)
    };
    let r = run_drop(&cfg, 0).unwrap();
    assert_eq!(r.rows.len(), cfg.k_ues);
    let a = r.assignment.unwrap();
    a.validate(cfg.m_rus * cfg.l_per_ru, cfg.k_ues).unwrap();
}

#[test]
fn report_round_trip_and_determinism() {
    let cfg = small(6);
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let s1 = write_report(d1.path(), &cfg, &run(&cfg).unwrap()).unwrap();
    write_report(d2.path(), &cfg, &run(&cfg).unwrap()).unwrap();
    for f in [RATES_FILE, SUMMARY_FILE] {
        assert_eq!(
            std::fs::read(d1.path().join(f)).unwrap(),
            std::fs::read(d2.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let back = read_records(d1.path().join(RATES_FILE)).unwrap();
    let again = aggregate(&back).unwrap();
    assert_eq!(again, s1.percentiles);
    let summary = harness::read_summary(d1.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(summary.seed, cfg.seed);
    assert_eq!(summary.config, cfg);
}

#[test]
fn outage_never_exceeds_ergodic() {
    let cfg = small(5);
    for r in run(&cfg).unwrap() {
        assert!(r.ordering_violations().is_empty(), "drop {}", r.drop);
    }
}
