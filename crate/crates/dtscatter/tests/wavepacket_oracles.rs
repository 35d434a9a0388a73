use std::f64::consts::PI;

use dtscatter::wavepacket::{
    build_packet, evolve, extract_smatrix, transmission_reflection, traversal_steps, GaussianPacketSpec, LatticeState,
    PacketChannel, WalkModel,
};
use dtscatter_core::lippmann_schwinger::{default_eps_schedule, transmission_reflection_amplitudes, w_operator, OnSitePhase};
use dtscatter_core::spectral::{Band, DiracWalk};
use dtscatter_core::thirring::{amplitude_pp_value, ThirringParams};

fn pair_spec(sigma: f64) -> GaussianPacketSpec {
    GaussianPacketSpec {
        k0: 0.7,
        sigma_x: sigma,
        x0: 0,
        channel: PacketChannel::Pair {
            s1: Band::Plus,
            s2: Band::Plus,
        },
    }
}

#[test]
fn thirring_pair_packet_matches_closed_form() {
    let (nu, p, chi) = (0.8, 0.3, PI / 2.0);
    let c = amplitude_pp_value(&ThirringParams::new(nu, chi).unwrap(), p, 0.7).unwrap();
    let model = WalkModel::thirring(nu, p, chi).unwrap();
    let mut errs = Vec::new();
    for sigma in [64.0, 128.0] {
        let spec = pair_spec(sigma);
        let m = extract_smatrix(&model, &spec, 4096, traversal_steps(&model, &spec)).unwrap();
        assert!(!m.contaminated, "leakage {}", m.leakage);
        let diag = m.bins[0].amplitude;
        let umklapp = m.bins[1].amplitude;
        let e = (diag - c).norm() / c.norm();
        eprintln!("sigma {sigma}: diag {diag:.6} umklapp {umklapp:.6} closed {c:.6} rel.err {e:.3e}");
        assert!(e < 0.02);
        assert!((umklapp + c).norm() / c.norm() < 0.02);
        assert!((umklapp.norm_sqr() / c.norm_sqr() - 1.0).abs() < 0.02);
        errs.push(e);
    }
    assert!(errs[1] / errs[0] <= 0.6, "ratio {}", errs[1] / errs[0]);
}

#[test]
fn single_site_walk_matches_lippmann_schwinger() {
    let (nu, k0, chi) = (0.8, 0.5, 1.0);
    let walk = DiracWalk::new(nu).unwrap();
    let w = w_operator(&walk, &OnSitePhase::single_site(chi, 0)).unwrap();
    let (t, r, flagged) = transmission_reflection_amplitudes(&w, &walk, k0, Band::Plus, &default_eps_schedule()).unwrap();
    assert!(!flagged);
    let model = WalkModel::single_site(nu, chi).unwrap();
    let spec = GaussianPacketSpec {
        k0,
        sigma_x: 64.0,
        x0: 0,
        channel: PacketChannel::Band(Band::Plus),
    };
    let m = extract_smatrix(&model, &spec, 4096, traversal_steps(&model, &spec)).unwrap();
    let tr = transmission_reflection(&model, &m.outgoing, spec.channel, k0);
    eprintln!("packet T {} R {} | LS |t|^2 {} |r|^2 {}", tr.transmission, tr.reflection, t.norm_sqr(), r.norm_sqr());
    assert!((tr.transmission + tr.reflection + tr.leakage - 1.0).abs() < 1e-6);
    assert!(tr.leakage.abs() < 1e-6);
    assert!((tr.transmission - t.norm_sqr()).abs() < 1e-3);
    assert!((tr.reflection - r.norm_sqr()).abs() < 1e-3);
    let fwd = m.bins[0].amplitude + 1.0;
    let bwd = m.bins[1].amplitude;
    eprintln!("forward {fwd:.6} vs t {t:.6}; backward {bwd:.6} vs r {r:.6}");
    assert!((fwd - t).norm() < 1e-2);
    assert!((bwd - r).norm() < 1e-2);
}

fn centroid(s: &LatticeState) -> f64 {
    (0..s.extent).map(|i| s.coordinate(i) as f64 * s.site_mass(i)).sum()
}

#[test]
fn free_packet_moves_at_group_velocity() {
    let model = WalkModel::single_site(0.7, 0.0).unwrap();
    for (k0, band) in [(0.6, Band::Plus), (-1.1, Band::Plus), (0.9, Band::Minus)] {
        let spec = GaussianPacketSpec {
            k0,
            sigma_x: 24.0,
            x0: 0,
            channel: PacketChannel::Band(band),
        };
        let s = build_packet(&model, &spec, 1024).unwrap();
        let v = model.channel_velocity(spec.channel, k0);
        let moved = (centroid(&evolve(&s, &model, 100).state) - centroid(&s)) / 100.0;
        assert!((moved - v).abs() <= 0.05 * v.abs(), "{moved} vs {v}");
    }
}

#[test]
fn norm_drift_over_ten_thousand_steps() {
    let model = WalkModel::thirring(0.6, 0.2, 2.1).unwrap();
    let s = build_packet(&model, &pair_spec(16.0), 512).unwrap();
    let out = evolve(&s, &model, 10_000);
    assert!((out.state.norm() - 1.0).abs() < 1e-9);
    assert!(out.contaminated, "a packet wrapping a small ring must be flagged");
}
