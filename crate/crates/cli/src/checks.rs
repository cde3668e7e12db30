//! Numerical property suite for model parameters.

use std::fmt;

use lorenz_shadow::geometry::Vec3;
use lorenz_shadow::model::regions::{exit_y_bound, exit_z_bound};
use lorenz_shadow::model::{
    first_return, flow, one_d_map, poincare, separation_table, speed_bound, HybridState, Trajectory,
};
use lorenz_shadow::{ModelParams, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GRID_POINTS: usize = 10_000;
pub const SEMIGROUP_TRIPLES: usize = 10_000;
pub const SEMIGROUP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl PropertyCheck {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail,
        }
    }

    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

impl fmt::Display for PropertyCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn grid() -> impl Iterator<Item = f64> {
    (0..GRID_POINTS).map(|i| -0.5 + (i as f64 + 0.5) / GRID_POINTS as f64)
}

/// Smallest finite-difference slope of `f` over neighbouring grid points on
/// the same branch.
pub fn min_fd_slope(p: &ModelParams) -> Result<f64> {
    let xs: Vec<f64> = grid().collect();
    let mut min = f64::INFINITY;
    for w in xs.windows(2) {
        if w[0] < 0.0 && w[1] > 0.0 {
            continue;
        }
        let s = (one_d_map(w[1], p)? - one_d_map(w[0], p)?) / (w[1] - w[0]);
        min = min.min(s);
    }
    Ok(min)
}

fn expansion(p: &ModelParams) -> Result<(bool, String)> {
    let min = min_fd_slope(p)?;
    // slopes next to the singular leaf must keep growing
    let mut prev = 0.0;
    let mut grows = true;
    for e in 2..10 {
        let h = 10f64.powi(-e);
        let s = (one_d_map(2.0 * h, p)? - one_d_map(h, p)?) / h;
        grows &= s > prev;
        prev = s;
    }
    Ok((
        min > 2f64.sqrt() && grows,
        format!("min finite-difference f' = {min:.6} on {GRID_POINTS} points, unbounded near 0: {grows}"),
    ))
}

fn contraction(p: &ModelParams) -> Result<(bool, String)> {
    let bound = p.contraction_bound();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for x in grid() {
        let (_, a) = poincare(x, 0.25, p)?;
        let (_, b) = poincare(x, -0.25, p)?;
        let d = (a - b) / 0.5;
        lo = lo.min(d);
        hi = hi.max(d);
    }
    let (_, near) = poincare(1e-9, 0.25, p)?;
    let vanishes = near.abs() / 0.25 < 1e-6;
    Ok((
        lo > 0.0 && hi <= bound * (1.0 + 1e-12) && bound < 1.0 && vanishes,
        format!("dg/dy in [{lo:.3e}, {hi:.6}], bound {bound:.6}, -> 0 near x = 0: {vanishes}"),
    ))
}

fn symmetry(p: &ModelParams) -> Result<(bool, String)> {
    if p.c_plus != p.c_minus {
        return Ok((true, "not applicable (c+ != c-)".into()));
    }
    let mut worst: f64 = 0.0;
    for (j, x) in grid().enumerate() {
        let y = -0.5 + (j * 7919 % GRID_POINTS) as f64 / GRID_POINTS as f64;
        let (a, b) = poincare(x, y, p)?;
        let (c, d) = poincare(-x, -y, p)?;
        worst = worst.max((a + c).abs()).max((b + d).abs());
    }
    Ok((worst == 0.0, format!("max |P(-x,-y) + P(x,y)| = {worst:e}")))
}

fn random_state(rng: &mut ChaCha8Rng, p: &ModelParams) -> Result<HybridState> {
    match rng.gen_range(0..3) {
        0 => HybridState::on_section(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)),
        1 => HybridState::cube(Vec3::new(
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(0.0..1.0),
        )),
        _ => {
            let (ym, zm) = (exit_y_bound(p), exit_z_bound(p));
            let sx = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let entry = Vec3::new(sx, rng.gen_range(-ym..ym), rng.gen_range(0.0..zm));
            HybridState::in_tube(entry, rng.gen_range(0.0..1.0), p)
        }
    }
}

/// Largest `d(flow(t1 + t2, p), flow(t2, flow(t1, p)))` over random triples.
pub fn semigroup_defect(p: &ModelParams, triples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..triples {
        let s = random_state(&mut rng, p)?;
        let t1 = rng.gen_range(0.0..5.0);
        let t2 = rng.gen_range(0.0..5.0);
        let a = flow(t1 + t2, &s, p)?;
        let b = flow(t2, &flow(t1, &s, p)?, p)?;
        worst = worst.max(a.dist(&b));
    }
    Ok(worst)
}

fn semigroup(p: &ModelParams, seed: u64) -> Result<(bool, String)> {
    let worst = semigroup_defect(p, SEMIGROUP_TRIPLES, seed)?;
    Ok((
        worst <= SEMIGROUP_TOL,
        format!("max defect {worst:e} over {SEMIGROUP_TRIPLES} triples"),
    ))
}

fn foliation(p: &ModelParams, seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF01);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x: f64 = rng.gen_range(-0.5..0.5);
        if x.abs() < 1e-6 {
            continue;
        }
        let a = first_return(&HybridState::on_section(x, rng.gen_range(-0.5..0.5))?, p, 1)?;
        let b = first_return(&HybridState::on_section(x, rng.gen_range(-0.5..0.5))?, p, 1)?;
        worst = worst.max((a.position().x - b.position().x).abs());
    }
    Ok((worst <= 1e-12, format!("max leaf mismatch {worst:e}")))
}

fn lipschitz(p: &ModelParams, seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11F);
    let v = speed_bound(p);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut tr = Trajectory::new(&random_state(&mut rng, p)?, p)?;
        let t = rng.gen_range(0.0..20.0);
        let dt = rng.gen_range(1e-6..0.5);
        let d = tr.position_at(t)?.dist(tr.position_at(t + dt)?);
        worst = worst.max(d / dt);
    }
    Ok((
        worst <= v * (1.0 + 1e-9),
        format!("max speed {worst:.6}, V_max {v:.6}"),
    ))
}

fn separations(p: &ModelParams) -> Vec<PropertyCheck> {
    if p.gamma.is_nan() || p.gamma <= 0.0 {
        return vec![PropertyCheck::new("separations", false, "no gamma available".into())];
    }
    separation_table(p)
        .into_iter()
        .map(|s| {
            PropertyCheck::new(
                &format!("separation {}", s.name),
                s.lower_bound > 3.0 * p.gamma,
                format!(
                    "lower bound {:.6}, sampled {:.6}, 3 gamma = {}",
                    s.lower_bound,
                    s.sampled,
                    3.0 * p.gamma
                ),
            )
        })
        .collect()
}

/// Axioms plus grid, sampling and separation checks.
pub fn model_properties(p: &ModelParams, seed: u64) -> Vec<PropertyCheck> {
    let mut out: Vec<PropertyCheck> = p
        .check_axioms()
        .into_iter()
        .map(|a| PropertyCheck::new(a.name, a.passed, a.detail))
        .collect();
    out.push(PropertyCheck::from_result("expansion grid", expansion(p)));
    out.push(PropertyCheck::from_result("contraction grid", contraction(p)));
    out.push(PropertyCheck::from_result("symmetry", symmetry(p)));
    out.push(PropertyCheck::from_result("foliation", foliation(p, seed)));
    out.push(PropertyCheck::from_result("semigroup", semigroup(p, seed)));
    out.push(PropertyCheck::from_result("speed bound", lipschitz(p, seed)));
    out.extend(separations(p));
    out
}
