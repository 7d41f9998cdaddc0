use ququad::prelude::*;
use ququad::scenarios::fig3_levels;

#[test]
fn oscillation_visibilities_match_shipped_calibration() {
    let cfg = ExperimentConfig::calibrated();
    let r = run_fig3(&cfg).unwrap();
    for (t, target) in [(Fig3Trace::Internal, 0.65), (Fig3Trace::External, 0.67)] {
        let v = r.trace(t).visibility_fit.value;
        assert!((v - target).abs() < 0.04, "{t:?}: {v}");
        let noiseless = fig3_levels(t, &cfg).unwrap().visibility();
        assert!((noiseless - target).abs() < 0.01, "{t:?}: {noiseless}");
    }
}

#[test]
fn raw_extremes_overstate_fringe_contrast() {
    let mut cfg = ExperimentConfig::calibrated();
    cfg.fig3.acquisitions = 400;
    let r = run_fig3(&cfg).unwrap();
    let t = r.trace(Fig3Trace::Internal);
    assert!(t.visibility_fringe.value > t.visibility_fit.value);
}

#[test]
fn seeds_change_counts_but_not_levels() {
    let mut cfg = ExperimentConfig::calibrated();
    cfg.fig3.acquisitions = 30;
    let a = run_fig3(&cfg).unwrap();
    cfg.seed = Some(1);
    let b = run_fig3(&cfg).unwrap();
    assert_ne!(a.trace(Fig3Trace::Full).counts(), b.trace(Fig3Trace::Full).counts());
    assert_eq!(a.trace(Fig3Trace::Full).levels, b.trace(Fig3Trace::Full).levels);
}

#[test]
fn missing_seed_is_reported() {
    let mut cfg = ExperimentConfig::calibrated();
    cfg.seed = None;
    assert!(run_fig3(&cfg).is_err());
    assert!(run_fig2(Fig2Variant::A, &cfg).is_ok());
}
