use pwdg_harness::run::{run_compare, run_sweep, SweepKind};
use pwdg_harness::{HarnessError, RunConfig};

#[test]
fn identical_methods_give_identical_columns() {
    let cfg = RunConfig::from_pairs(&[("h", "3"), ("p_range", "3..4")]).unwrap();
    let rows = run_compare(&cfg, &cfg).unwrap();
    for r in rows {
        assert_eq!(r.first.l2_rel, r.second.l2_rel);
        assert_eq!(r.first.h1_rel, r.second.h1_rel);
    }
}

#[test]
fn mismatched_geometry_is_rejected() {
    let a = RunConfig::from_pairs(&[("h", "3"), ("p_range", "3..4")]).unwrap();
    let b = RunConfig::from_pairs(&[("h", "1.5"), ("p_range", "3..4"), ("method", "impedance")]).unwrap();
    assert!(matches!(run_compare(&a, &b), Err(HarnessError::Config(_))));
}

#[test]
fn failed_points_become_nan_rows() {
    // α₁ = k cos θ + 1 = k at k = 2, θ = −π/3: every DtN point hits the Wood anomaly.
    let cfg = RunConfig::from_pairs(&[("k", "2"), ("theta", "-pi/3"), ("h", "3"), ("p_range", "3..4")]).unwrap();
    let rows = run_sweep(&cfg, SweepKind::P).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.l2_rel.is_nan() && r.note.is_some()));
}

#[test]
fn sweeps_follow_their_lists() {
    let cfg = RunConfig::from_pairs(&[("h", "3"), ("p", "3"), ("m_list", "5,20"), ("h_list", "3,1.5")]).unwrap();
    let m = run_sweep(&cfg, SweepKind::M).unwrap();
    assert_eq!(m.iter().map(|r| r.sweep).collect::<Vec<_>>(), vec![5.0, 20.0]);
    let h = run_sweep(&cfg, SweepKind::H).unwrap();
    assert_eq!(h.iter().map(|r| r.sweep).collect::<Vec<_>>(), vec![3.0, 1.5]);
    assert!(h[1].n > h[0].n);
    assert!(h.iter().all(|r| r.l2_rel.is_finite()));
}
