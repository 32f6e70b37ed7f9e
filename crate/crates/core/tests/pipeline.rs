mod common;

use cellsync::pipeline::{analyze, AnalysisConfig, DetrendScope};
use cellsync::simulator::simulate;
use common::{analysis, sim, wave};

fn scenario() -> cellsync::ingest::Session {
    let mut cfg = sim(8, 7000);
    cfg.events = vec![wave(2400, (0..8).collect(), 4.0), wave(5300, (0..8).collect(), 4.0)];
    simulate(&cfg, 21).unwrap().0
}

#[test]
fn thread_count_does_not_change_results() {
    let s = scenario();
    let many = analyze(&s, &analysis()).unwrap();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| analyze(&s, &analysis()).unwrap());
    assert_eq!(serde_json::to_string(&many.metrics).unwrap(), serde_json::to_string(&one.metrics).unwrap());
    assert_eq!(many.events, one.events);
    assert_eq!(many.rates, one.rates);
}

#[test]
fn frames_tile_the_session_with_undefined_seams() {
    let s = scenario();
    let r = analyze(&s, &analysis()).unwrap();
    assert_eq!(r.frames, vec![(0, 2000), (2000, 4000), (4000, 6000), (6000, 7000)]);
    let m = &r.metrics;
    assert_eq!(m.start, 99);
    assert_eq!(m.end(), 7000);
    // Windows reaching back across a frame start are never formed.
    for seam in [2000, 4000, 6000] {
        for t in seam..seam + 99 {
            assert!(m.r_mean[t - m.start].is_nan(), "t={t}");
        }
        assert!(!m.r_mean[seam + 99 - m.start].is_nan());
    }
    assert_eq!(r.events.len(), 2);
}

#[test]
fn session_scope_detrending_also_finds_events() {
    let s = scenario();
    let cfg = AnalysisConfig {
        detrend_scope: DetrendScope::Session,
        ..analysis()
    };
    let r = analyze(&s, &cfg).unwrap();
    assert_eq!(r.fits.len(), 8 + 8);
    assert!(r.events.iter().any(|e| e.overlaps(2400..2700)));
}

#[test]
fn initial_rejection_shifts_indices() {
    let mut cfg = sim(4, 9000);
    cfg.sample_period = 5.0;
    cfg.events = vec![wave(7000, (0..4).collect(), 5.0)];
    let (s, _) = simulate(&cfg, 2).unwrap();
    let a = AnalysisConfig {
        skip_hours: 5.0,
        ..AnalysisConfig::default()
    };
    let r = analyze(&s, &a).unwrap();
    assert_eq!(r.skipped_samples, 3600);
    assert_eq!(r.n_samples, 5400);
    assert_eq!(r.rates.t_exp, 5400.0 * 5.0);
    assert!(r.events.iter().any(|e| e.overlaps(3400..3700)));

    let too_long = AnalysisConfig {
        skip_hours: 24.0,
        ..AnalysisConfig::default()
    };
    assert!(analyze(&s, &too_long).is_err());
}
