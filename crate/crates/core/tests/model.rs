use lorenz_shadow::model::regions::{exit_y_bound, exit_z_bound};
use lorenz_shadow::model::*;
use lorenz_shadow::{Error, Vec3};
use proptest::prelude::*;

fn params(case: Case) -> ModelParams {
    ModelParams::for_case(case)
}

fn any_case() -> impl Strategy<Value = Case> {
    prop_oneof![Just(Case::A), Just(Case::B), Just(Case::C)]
}

/// States of the trapping region: section, cube below it, or mid-tube.
fn any_state(p: ModelParams) -> impl Strategy<Value = HybridState> {
    let ym = exit_y_bound(&p);
    let zm = exit_z_bound(&p);
    prop_oneof![
        (-0.5f64..0.5, -0.5f64..0.5).prop_map(|(x, y)| HybridState::on_section(x, y).unwrap()),
        (-0.5f64..0.5, -0.5f64..0.5, 0.0f64..1.0)
            .prop_map(|(x, y, z)| HybridState::cube(Vec3::new(x, y, z)).unwrap()),
        (any::<bool>(), -ym..ym, 0.0..zm, 0.0f64..1.0).prop_map(move |(plus, y, z, q)| {
            let sx = if plus { 1.0 } else { -1.0 };
            HybridState::in_tube(Vec3::new(sx, y, z), q, &p).unwrap()
        }),
    ]
}

fn case_and_state() -> impl Strategy<Value = (Case, HybridState)> {
    any_case().prop_flat_map(|c| any_state(params(c)).prop_map(move |s| (c, s)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn semigroup((case, s) in case_and_state(), t1 in 0.0f64..5.0, t2 in 0.0f64..5.0) {
        let p = params(case);
        let whole = flow(t1 + t2, &s, &p).unwrap();
        let split = flow(t2, &flow(t1, &s, &p).unwrap(), &p).unwrap();
        prop_assert!(whole.dist(&split) <= 1e-10, "{:?} vs {:?}", whole, split);
    }

    #[test]
    fn return_matches_poincare(case in any_case(), x in -0.5f64..0.5, y in -0.5f64..0.5) {
        prop_assume!(x != 0.0);
        let p = params(case);
        let r = first_return(&HybridState::on_section(x, y).unwrap(), &p, 1).unwrap();
        let (fx, gy) = poincare(x, y, &p).unwrap();
        let fx = if fx.abs() <= LEAF_SNAP_TOL { 0.0 } else { fx };
        prop_assert!((r.position().x - fx).abs() <= 1e-10);
        prop_assert!((r.position().y - gy).abs() <= 1e-10);
        prop_assert_eq!(r.position().z, 1.0);
    }

    #[test]
    fn same_leaf_same_return_leaf(case in any_case(), x in -0.5f64..0.5, y1 in -0.5f64..0.5, y2 in -0.5f64..0.5) {
        prop_assume!(x.abs() > 1e-6);
        let p = params(case);
        let a = first_return(&HybridState::on_section(x, y1).unwrap(), &p, 1).unwrap();
        let b = first_return(&HybridState::on_section(x, y2).unwrap(), &p, 1).unwrap();
        prop_assert!((a.position().x - b.position().x).abs() <= 1e-12);
    }

    #[test]
    fn speed_is_bounded((case, s) in case_and_state(), t in 0.0f64..20.0, dt in 0.0f64..0.5) {
        let p = params(case);
        let mut tr = Trajectory::new(&s, &p).unwrap();
        let a = tr.position_at(t).unwrap();
        let b = tr.position_at(t + dt).unwrap();
        prop_assert!(a.dist(b) <= speed_bound(&p) * dt * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn symmetric_case_is_odd(x in -0.5f64..0.5, y in -0.5f64..0.5) {
        prop_assume!(x != 0.0);
        let p = params(Case::C);
        let (a, b) = poincare(x, y, &p).unwrap();
        let (c, d) = poincare(-x, -y, &p).unwrap();
        prop_assert_eq!(a, -c);
        prop_assert_eq!(b, -d);
    }
}

#[test]
fn expansion_on_a_grid() {
    for case in Case::ALL {
        let p = params(case);
        let lam = p.lambda_exp();
        assert!(lam > 2f64.sqrt());
        let n = 10_000;
        let grid: Vec<f64> = (0..n)
            .map(|i| -0.5 + (i as f64 + 0.5) / n as f64)
            .filter(|x| *x != 0.0)
            .collect();
        for w in grid.windows(2) {
            if w[0] < 0.0 && w[1] > 0.0 {
                continue;
            }
            let slope = (one_d_map(w[1], &p).unwrap() - one_d_map(w[0], &p).unwrap()) / (w[1] - w[0]);
            assert!(slope >= lam * (1.0 - 1e-9), "{case}: slope {slope} at {}", w[0]);
        }
        // slope blows up toward the singular leaf
        let slope_near = |h: f64| (one_d_map(2.0 * h, &p).unwrap() - one_d_map(h, &p).unwrap()) / h;
        let mut prev = 0.0;
        for e in 1..12 {
            let s = slope_near(10f64.powi(-e));
            assert!(s > prev);
            prev = s;
        }
    }
}

#[test]
fn contraction_on_a_grid() {
    let p = params(Case::C);
    let bound = p.contraction_bound();
    assert!(bound < 1.0);
    for i in 1..=1000 {
        let x = -0.5 + i as f64 / 1000.0;
        if x == 0.0 {
            continue;
        }
        let (_, g1) = poincare(x, 0.1, &p).unwrap();
        let (_, g0) = poincare(x, -0.1, &p).unwrap();
        let dg = (g1 - g0) / 0.2;
        assert!(dg > 0.0 && dg <= bound * (1.0 + 1e-12), "x = {x}: {dg}");
        assert!((dg - contraction_rate(x, &p)).abs() < 1e-12);
    }
    assert!(contraction_rate(1e-8, &p) < 1e-15);
    // kappa 2^-s, checked by a finite difference at x = 1/2
    let (_, a) = poincare(0.5, 1e-3, &p).unwrap();
    assert!((a / 1e-3 - 0.125).abs() < 1e-12);
}

#[test]
fn unstable_branches_land_on_lateral_leaves() {
    for case in Case::ALL {
        let p = params(case);
        let g = p.gamma;
        let minus = first_return(&HybridState::on_unstable_axis(-g / 2f64.sqrt()).unwrap(), &p, 1).unwrap();
        let plus = first_return(&HybridState::on_unstable_axis(g / 2f64.sqrt()).unwrap(), &p, 1).unwrap();
        assert_eq!(minus.position(), Vec3::new(0.5, 0.0, 1.0));
        assert_eq!(plus.position(), Vec3::new(-0.5, 0.0, 1.0));
    }
}

#[test]
fn return_time_oracle() {
    // integrate the piecewise field with small explicit steps and detect the
    // crossing of z = 1 from above in the tube descent
    let p = params(Case::C);
    let s = HybridState::on_section(0.5, 0.0).unwrap();
    let tau = time_to_section(&s, &p).unwrap();
    let dt = 1e-5;
    let (mut x, mut t) = (0.5f64, 0.0f64);
    while x < 1.0 {
        x += p.lambda1 * x * dt;
        t += dt;
    }
    let oracle = t + p.tube_time();
    assert!((tau - oracle).abs() < 1e-4, "{tau} vs {oracle}");
}

#[test]
fn nth_return_follows_iterates() {
    let p = params(Case::A);
    let x0 = 0.123;
    let r = first_return(&HybridState::on_section(x0, 0.0).unwrap(), &p, 5).unwrap();
    assert!((r.position().x - iterate_one_d(x0, 5, &p).unwrap()).abs() < 1e-12);
}

#[test]
fn preimages_are_dense_at_depth_20() {
    let p = params(Case::C);
    let pre = one_d_preimages(0.0, 20, &p);
    let xs: Vec<f64> = pre.iter().map(|q| q.x).collect();
    let width = 1e-3;
    let mut a = -0.5;
    while a + width <= 0.5 {
        let i = xs.partition_point(|&x| x < a);
        assert!(i < xs.len() && xs[i] <= a + width, "gap at [{a}, {}]", a + width);
        a += width;
    }
}

#[test]
fn leaf_order_matches_coordinates() {
    let mut leaves = vec![Leaf(0.3), Leaf::RIGHT, Leaf::LEFT, Leaf::SINGULAR];
    leaves.sort();
    assert_eq!(leaves, vec![Leaf::LEFT, Leaf::SINGULAR, Leaf(0.3), Leaf::RIGHT]);
}

#[test]
fn singular_leaf_errors() {
    let p = params(Case::B);
    assert_eq!(one_d_map(0.0, &p), Err(Error::SingularLeaf));
    assert_eq!(poincare(0.0, 0.2, &p), Err(Error::SingularLeaf));
    let on_l0 = HybridState::on_section(0.0, 0.2).unwrap();
    assert_eq!(time_to_section(&on_l0, &p), Err(Error::NeverReturns));
    assert_eq!(classify_region(on_l0.position(), &p), RegionTag::L0);
    let later = flow(3.0, &on_l0, &p).unwrap();
    assert_eq!(classify_region(later.position(), &p), RegionTag::V);
}

#[test]
fn separations_exceed_three_gamma() {
    for case in Case::ALL {
        let p = params(case);
        let table = region_separations(&p).unwrap();
        assert_eq!(table.len(), 4);
        assert!(table.iter().all(|s| s.lower_bound > 3.0 * p.gamma));
        let mut big = p;
        big.gamma = 0.2;
        assert!(matches!(region_separations(&big), Err(Error::SeparationViolated(_))));
    }
}

#[test]
fn tube_orbits_classify_as_their_tube() {
    let p = params(Case::C);
    let s = HybridState::on_section(0.3, 0.1).unwrap();
    let tau = time_to_section(&s, &p).unwrap();
    let mut tr = Trajectory::new(&s, &p).unwrap();
    let exit = tau - p.tube_time();
    for i in 1..20 {
        let q = tr.position_at(exit + i as f64 / 20.0).unwrap();
        let tag = classify_region(q, &p);
        // the descent column is shared; there x decides
        assert!(
            tag == RegionTag::UPlus || (tag == RegionTag::UMinus && q.x < 0.0),
            "{q:?} -> {tag}"
        );
    }
}
