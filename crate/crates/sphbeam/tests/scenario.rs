//! Checks on the full-size default link (8×8 BS volume, 2×2 UE volume).

use sphbeam::angular_profile::{DirectionGrid, JointProfile, ProfileParams};
use sphbeam::capacity::rank_adapt;
use sphbeam::conventional::{element_correlation_for_ue, full_codebook, select, selection_det_db, PlanarArray, SelectionMetric};
use sphbeam::obpb::{self, Link, ObpbConfig};
use sphbeam::spherical_modes::ModeSet;

fn link() -> Link {
    let profile = JointProfile::new(ProfileParams::default()).unwrap();
    Link::new(
        &profile,
        ModeSet::for_radius(4.0 / 2f64.sqrt()),
        ModeSet::for_radius(1.0 / 2f64.sqrt()),
        DirectionGrid::new(96, 192).unwrap(),
        DirectionGrid::new(48, 96).unwrap(),
    )
}

#[test]
fn default_link_scenario() {
    let link = link();
    assert_eq!(link.bs.mode_count(), 646);
    assert_eq!(link.ue.mode_count(), 48);

    // rank adaptation is unchanged once M_max passes the capacity peak
    let family: Vec<_> = (1..=14)
        .map(|m| {
            let st = obpb::run(&link, &ObpbConfig::default(), m).unwrap();
            assert!(st.converged, "M={m}");
            link.beam_correlation(&st.q_bs, &st.q_ue).unwrap()
        })
        .collect();
    let snr = 0.0291785;
    let short = rank_adapt(&mut |m| Ok(family[m - 1].clone()), 12, snr).unwrap();
    let long = rank_adapt(&mut |m| Ok(family[m - 1].clone()), 14, snr).unwrap();
    assert!(short.m_opt < 12);
    assert_eq!(short.m_opt, long.m_opt);
    assert_eq!(short.total, long.total);

    // power selection packs correlated beams: its determinant trails the
    // determinant rule by roughly 46 dB at four streams
    let arr = PlanarArray::new(8, 8, 0.5).unwrap();
    let cb = full_codebook(&arr, 4).unwrap();
    let r = element_correlation_for_ue(&arr, &link.kernel, 4).unwrap();
    let p = select(&cb, &r, 4, SelectionMetric::Power).unwrap();
    let d = select(&cb, &r, 4, SelectionMetric::Determinant).unwrap();
    let gap = selection_det_db(&cb, &r, &d.chosen).unwrap() - selection_det_db(&cb, &r, &p.chosen).unwrap();
    assert!((gap - 46.5).abs() < 2.0, "gap {gap}");
}
