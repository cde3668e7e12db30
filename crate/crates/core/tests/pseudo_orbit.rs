use lorenz_shadow::model::*;
use lorenz_shadow::pseudo_orbit::*;
use lorenz_shadow::{Error, Vec3};
use proptest::prelude::*;
use std::sync::OnceLock;

fn orbit(case: Case) -> &'static PseudoOrbit {
    static CACHE: OnceLock<Vec<PseudoOrbit>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        Case::ALL
            .iter()
            .map(|&c| PseudoOrbit::build(&ModelParams::for_case(c), 8).unwrap())
            .collect()
    });
    &all[Case::ALL.iter().position(|&c| c == case).unwrap()]
}

#[test]
fn gap_law_for_every_index() {
    for case in Case::ALL {
        let o = orbit(case);
        let g = o.params().gamma;
        let (lo, hi) = o.index_range();
        assert!(lo <= -32 && hi >= 36);
        for m in lo..hi {
            let k = m.div_euclid(4);
            let want = g / 2f64.powi(k.abs() as i32);
            let got = o.gap(m).unwrap();
            assert!((got - want).abs() <= 1e-9, "{case} m={m}: {got} vs {want}");
        }
        assert!(o.gap_law_error().unwrap() < 1e-15);
    }
}

#[test]
fn gap_examples() {
    let o = orbit(Case::C);
    let g = o.params().gamma;
    assert!((o.gap(0).unwrap() - g).abs() < 1e-15);
    assert!((o.gap(13).unwrap() - g / 8.0).abs() < 1e-15);
    assert!((o.gap(-4).unwrap() - g / 2.0).abs() < 1e-15);
    assert!(o.gap(o.index_range().1).is_err());
}

#[test]
fn unstable_points_and_their_first_returns() {
    for case in Case::ALL {
        let o = orbit(case);
        let g = o.params().gamma;
        for k in -9i64..=8 {
            let off = g / (2f64.sqrt() * 2f64.powi(k.abs().max((k - 1).abs()) as i32));
            let p0 = o.point(4 * k).unwrap().position();
            assert_eq!((p0.y, p0.z), (0.0, 0.0));
            assert!(p0.x < 0.0);
            if k >= 0 {
                assert!((p0.x + off).abs() < 1e-18, "{case} k={k}");
            }
            let p2 = o.point(4 * k + 2).unwrap().position();
            let want = g / (2f64.sqrt() * 2f64.powi(k.abs() as i32));
            assert!((p2.x - want).abs() < 1e-18 && p2.y == 0.0 && p2.z == 0.0);
        }
        let back = first_return(o.point(0).unwrap(), o.params(), 1).unwrap();
        assert_eq!(back.position(), Vec3::new(0.5, 0.0, 1.0));
    }
}

#[test]
fn section_points_sit_in_their_bands() {
    for case in Case::ALL {
        let o = orbit(case);
        let p = o.params();
        let g = p.gamma;
        let fl = p.image_of_left_leaf();
        let fr = p.image_of_right_leaf();
        for b in o.blocks() {
            let gk = g / 2f64.powi(b.k.abs() as i32);
            let x1 = o.point(4 * b.k + 1).unwrap().position();
            let x3 = o.point(4 * b.k + 3).unwrap().position();
            assert_eq!(x1.z, 1.0);
            assert_eq!(x3.z, 1.0);
            assert!(x1.x > 0.0 && x1.x < 0.5, "{case} k={}", b.k);
            assert!(x3.x < 0.0 && x3.x > -0.5);
            match case {
                Case::A => assert!(x1.x > 0.5 - gk),
                Case::B | Case::C => assert!(x1.x > fr.max(0.5 - gk)),
            }
            match case {
                Case::A | Case::C => assert!(x3.x < fl && x3.x > (fl - gk).max(-0.5)),
                Case::B => assert!(x3.x < -0.5 + gk),
            }
            // exact distance: y is the remaining Euclidean budget
            let y1 = (gk * gk - (x1.x - 0.5).powi(2)).sqrt();
            assert!((x1.y.abs() - y1).abs() < 1e-15);
            // forward orbit reaches the singular leaf at the recorded depth
            for (x, d) in [(x1.x, b.depth1), (x3.x, b.depth3)] {
                let mut w = x;
                for _ in 0..d - 1 {
                    w = one_d_map(w, p).unwrap();
                }
                let last = one_d_map(w, p).unwrap();
                assert!(last.abs() <= 1e-10, "{case} k={} depth {d}: {last}", b.k);
            }
        }
    }
}

#[test]
fn times_exceed_one_and_sums_increase() {
    for case in Case::ALL {
        let o = orbit(case);
        let (lo, hi) = o.index_range();
        assert_eq!(o.s(0), Some(0.0));
        for n in lo..=hi {
            assert!(o.time(n).unwrap() > 1.0, "{case} t_{n}");
            assert!(o.s(n + 1).unwrap() > o.s(n).unwrap());
        }
    }
}

#[test]
fn descents_stop_at_the_target_distance() {
    let o = orbit(Case::A);
    let p = o.params();
    for b in o.blocks().iter().filter(|b| b.k >= 0) {
        for (n, d) in [(4 * b.k + 1, b.d1), (4 * b.k + 3, b.d3)] {
            let end = flow(o.time(n).unwrap(), o.point(n).unwrap(), p).unwrap();
            assert!((end.position().norm() - d).abs() < 1e-12, "n={n}");
        }
        let d1 = p.gamma / (2f64.sqrt() * 2f64.powi(b.k as i32));
        assert!((b.d1 - d1).abs() < 1e-18);
    }
}

#[test]
fn negative_blocks_reuse_the_mirrored_template() {
    for case in Case::ALL {
        let o = orbit(case);
        let rep = o.mirror_report();
        // block -9 only has its first point mirrored inside the window
        assert_eq!(rep.len(), 4 * 8 + 1);
        for r in &rep {
            let i = r.n.rem_euclid(4);
            if i == 1 || i == 2 || i == 3 {
                assert!(r.point_equal, "{case} n={} vs {}", r.n, r.mirror);
            }
            if i == 1 || i == 2 {
                assert!(r.time_equal, "{case} n={} vs {}", r.n, r.mirror);
            }
        }
    }
}

#[test]
fn class_report_numbers() {
    let o = orbit(Case::C);
    let g = o.params().gamma;
    let r = verify_classes(o, 32, 1e-3, 1.0).unwrap();
    assert!((r.mass - 12.0 * g).abs() < 1e-15);
    assert!(r.limit_ratio <= 1.0);
    // the two-sided sum carries 12 gamma of mass, so the 8 gamma / n bound
    // is first exceeded once the negative blocks are summed in
    assert_eq!(r.first_eight_gamma_violation, Some(7));
    assert!(!r.eight_gamma_cesaro_holds());
    for row in &r.cesaro {
        assert!(row.average <= row.mass_bound);
    }
    assert_eq!(r.n_delta, Some(35));
    assert_eq!(r.n_delta_bound, 37);
    assert!((r.eight_gamma_n_delta_bound - 24.0).abs() < 1e-9);
    assert!(!r.eight_gamma_n_delta_holds());
    let coarse = verify_classes(o, 32, 1e-2, 1.0).unwrap();
    assert_eq!(coarse.n_delta, Some(1));
    assert!(coarse.eight_gamma_n_delta_holds());
}

#[test]
fn class_report_rejects_bad_arguments() {
    let o = orbit(Case::B);
    assert!(matches!(verify_classes(o, 0, 1e-3, 1.0), Err(Error::InvalidArgument(_))));
    assert!(matches!(verify_classes(o, 1000, 1e-3, 1.0), Err(Error::InvalidArgument(_))));
    assert!(matches!(verify_classes(o, 8, 0.0, 1.0), Err(Error::InvalidArgument(_))));
}

#[test]
fn pseudo_state_examples() {
    let o = orbit(Case::C);
    assert_eq!(o.pseudo_state_at(0.0).unwrap(), *o.point(0).unwrap());
    for n in [1i64, 5, 17, 30] {
        let s = o.s(n).unwrap();
        assert_eq!(o.pseudo_state_at(s).unwrap(), *o.point(n).unwrap());
        assert_eq!(o.segment_at(s).unwrap(), n as usize);
    }
    let end = o.s(o.index_range().1 + 1).unwrap();
    assert!(matches!(o.pseudo_state_at(end), Err(Error::HorizonExceeded(_))));
    assert!(o.pseudo_state_at(-1.0).is_err());
}

#[test]
fn case_mismatch_is_rejected() {
    let mut p = ModelParams::for_case(Case::A);
    p.case = Case::C;
    assert!(matches!(PseudoOrbit::build(&p, 2), Err(Error::CaseMismatch { .. })));
}

#[test]
fn true_orbit_has_no_gaps() {
    let p = ModelParams::for_case(Case::C);
    let o = PseudoOrbit::true_orbit(&HybridState::on_section(0.2137, 0.1).unwrap(), 12, &p).unwrap();
    assert_eq!(o.kind(), OrbitKind::True);
    for (_, a) in o.gaps().unwrap() {
        assert!(a < 1e-12);
    }
    assert!(verify_classes(&o, 4, 1e-3, 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pseudo_state_is_lipschitz_inside_segments(u in 0.0f64..1.0, eps in 0.0f64..0.05) {
        let o = orbit(Case::C);
        let end = o.s(o.horizon() as i64 + 1).unwrap();
        let t = u * (end - 0.1);
        let n = o.segment_at(t).unwrap();
        prop_assume!(t + eps < o.s(n as i64 + 1).unwrap());
        let a = o.pseudo_state_at(t).unwrap();
        let b = o.pseudo_state_at(t + eps).unwrap();
        prop_assert!(a.dist(&b) <= speed_bound(o.params()) * eps * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn small_builds_obey_the_gap_law(k in 1usize..4, c in 0usize..3) {
        let o = PseudoOrbit::build(&ModelParams::for_case(Case::ALL[c]), k).unwrap();
        prop_assert!(o.gap_law_error().unwrap() <= 1e-9);
        prop_assert_eq!(o.index_range(), (-4 * k as i64 - 4, 4 * k as i64 + 4));
    }
}
