//! Named regions of phase space and the distances between them.

use std::fmt;

use super::flow::TubePath;
use super::map::Branch;
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::geometry::{segment_box_distance, Aabb, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionTag {
    /// The whole cross-section; only used as a name, points get a finer tag.
    S,
    SPlus,
    SMinus,
    L0,
    SigmaPlus,
    SigmaMinus,
    V,
    UPlus,
    UMinus,
    CubeInterior,
    Outside,
}

impl RegionTag {
    pub fn name(self) -> &'static str {
        match self {
            RegionTag::S => "S",
            RegionTag::SPlus => "S+",
            RegionTag::SMinus => "S-",
            RegionTag::L0 => "L0",
            RegionTag::SigmaPlus => "Sigma+",
            RegionTag::SigmaMinus => "Sigma-",
            RegionTag::V => "V",
            RegionTag::UPlus => "U+",
            RegionTag::UMinus => "U-",
            RegionTag::CubeInterior => "cube",
            RegionTag::Outside => "outside",
        }
    }
}

impl fmt::Display for RegionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Largest `|y|` on an exit face reachable from `S`: `(1/2) (1/2)^s`.
pub fn exit_y_bound(p: &ModelParams) -> f64 {
    0.5 * 0.5f64.powf(p.s_exp())
}

/// Largest exit height reachable from `S` or the unstable axis: `(1/2)^r`.
pub fn exit_z_bound(p: &ModelParams) -> f64 {
    0.5f64.powf(p.r())
}

/// Range of landing x-coordinates of tube `b` for exit heights in `[0, exit_z_bound]`.
fn landing_x_range(b: Branch, p: &ModelParams) -> (f64, f64) {
    let zmax = exit_z_bound(p);
    match b {
        Branch::Plus => (-0.5, (p.c_plus * zmax - 0.5).min(0.5)),
        Branch::Minus => ((0.5 - p.c_minus * zmax).max(-0.5), 0.5),
    }
}

/// Axis-aligned boxes, one per tube leg, covering every reachable tube path.
pub fn tube_hull(b: Branch, p: &ModelParams) -> [Aabb; 4] {
    let sx = b.sign();
    let ym = exit_y_bound(p);
    let zm = exit_z_bound(p);
    let (lx0, lx1) = landing_x_range(b, p);
    let ox = TubePath::OUTER_X;
    let top = TubePath::TOP_Z;
    let span = |a: f64, c: f64| (a.min(c), a.max(c));
    let (ax0, ax1) = span(sx, sx * ox);
    let (cx0, cx1) = span(sx * ox, if sx > 0.0 { lx0 } else { lx1 });
    let yl = p.kappa * ym;
    [
        Aabb::new(Vec3::new(ax0, -ym, 0.0), Vec3::new(ax1, ym, zm)),
        Aabb::new(Vec3::new(sx * ox, -ym, 0.0), Vec3::new(sx * ox, ym, top)),
        Aabb::new(Vec3::new(cx0, -ym, top), Vec3::new(cx1, ym, top)),
        Aabb::new(Vec3::new(lx0, -yl, 1.0), Vec3::new(lx1, yl, top)),
    ]
}

fn in_box(b: &Aabb, q: Vec3) -> bool {
    b.distance_to(q) == 0.0
}

/// Classifies an ambient point.
///
/// The descent columns of the two tubes overlap above `S`; there `x >= 0`
/// counts as `U+` and `x < 0` as `U-`.
pub fn classify_region(q: Vec3, p: &ModelParams) -> RegionTag {
    if !q.is_finite() {
        return RegionTag::Outside;
    }
    if q.z == 1.0 && q.x.abs() <= 0.5 && q.y.abs() <= 0.5 {
        return if q.x > 0.0 {
            RegionTag::SPlus
        } else if q.x < 0.0 {
            RegionTag::SMinus
        } else {
            RegionTag::L0
        };
    }
    if q.x.abs() <= 1.0 && q.y.abs() <= 1.0 && (0.0..=1.0).contains(&q.z) {
        if q.x == 1.0 {
            return RegionTag::SigmaPlus;
        }
        if q.x == -1.0 {
            return RegionTag::SigmaMinus;
        }
        // the curtain swept by L0: |y| <= (1/2) z^(l2/l3)
        if q.x == 0.0 && q.y.abs() <= 0.5 * q.z.powf(p.lambda2 / p.lambda3) {
            return RegionTag::V;
        }
        return RegionTag::CubeInterior;
    }
    let plus = tube_hull(Branch::Plus, p).iter().any(|b| in_box(b, q));
    let minus = tube_hull(Branch::Minus, p).iter().any(|b| in_box(b, q));
    match (plus, minus) {
        (true, true) if q.x >= 0.0 => RegionTag::UPlus,
        (true, true) => RegionTag::UMinus,
        (true, false) => RegionTag::UPlus,
        (false, true) => RegionTag::UMinus,
        _ => RegionTag::Outside,
    }
}

fn v_hull() -> Aabb {
    Aabb::new(Vec3::new(0.0, -0.5, 0.0), Vec3::new(0.0, 0.5, 1.0))
}

fn sigma_face(sign: f64) -> Aabb {
    Aabb::new(Vec3::new(sign, -1.0, 0.0), Vec3::new(sign, 1.0, 1.0))
}

fn aabb_distance(a: &Aabb, b: &Aabb) -> f64 {
    let gap = |lo1: f64, hi1: f64, lo2: f64, hi2: f64| (lo2 - hi1).max(lo1 - hi2).max(0.0);
    let dx = gap(a.min.x, a.max.x, b.min.x, b.max.x);
    let dy = gap(a.min.y, a.max.y, b.min.y, b.max.y);
    let dz = gap(a.min.z, a.max.z, b.min.z, b.max.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// One row of the separation table.
#[derive(Debug, Clone, PartialEq)]
pub struct Separation {
    pub name: &'static str,
    /// Certified: distance between covering boxes of the two sets.
    pub lower_bound: f64,
    /// Smallest distance seen over sampled members of the sets.
    pub sampled: f64,
}

const SAMPLES: usize = 24;

/// Minimum over sampled tube paths of the distance from path to `face`.
fn sampled_tube_distance(b: Branch, face: &Aabb, p: &ModelParams) -> f64 {
    let ym = exit_y_bound(p);
    let zm = exit_z_bound(p);
    let mut best = f64::INFINITY;
    for i in 0..=SAMPLES {
        for j in 0..=SAMPLES {
            let y = -ym + 2.0 * ym * i as f64 / SAMPLES as f64;
            let z = zm * j as f64 / SAMPLES as f64;
            let entry = Vec3::new(b.sign(), y, z);
            let Ok(path) = TubePath::new(entry, p) else {
                continue;
            };
            let w = path.waypoints();
            for k in 0..4 {
                best = best.min(segment_box_distance(w[k], w[k + 1], face));
            }
        }
    }
    best
}

fn sampled_curtain_distance(face: &Aabb) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..=SAMPLES {
        for j in 0..=SAMPLES {
            let q = Vec3::new(
                0.0,
                -0.5 + i as f64 / SAMPLES as f64,
                j as f64 / SAMPLES as f64,
            );
            best = best.min(face.distance_to(q));
        }
    }
    best
}

/// Distances `d(V, Σ±)` and `d(Σ±, U∓)`; independent of `gamma`.
pub fn separation_table(p: &ModelParams) -> Vec<Separation> {
    let plus = sigma_face(1.0);
    let minus = sigma_face(-1.0);
    let hull_dist = |b: Branch, face: &Aabb| {
        tube_hull(b, p)
            .iter()
            .map(|h| aabb_distance(h, face))
            .fold(f64::INFINITY, f64::min)
    };
    vec![
        Separation {
            name: "d(V,Sigma+)",
            lower_bound: aabb_distance(&v_hull(), &plus),
            sampled: sampled_curtain_distance(&plus),
        },
        Separation {
            name: "d(V,Sigma-)",
            lower_bound: aabb_distance(&v_hull(), &minus),
            sampled: sampled_curtain_distance(&minus),
        },
        Separation {
            name: "d(Sigma+,U-)",
            lower_bound: hull_dist(Branch::Minus, &plus),
            sampled: sampled_tube_distance(Branch::Minus, &plus, p),
        },
        Separation {
            name: "d(Sigma-,U+)",
            lower_bound: hull_dist(Branch::Plus, &minus),
            sampled: sampled_tube_distance(Branch::Plus, &minus, p),
        },
    ]
}

/// The separation table, failing unless every bound exceeds `3 gamma`.
pub fn region_separations(p: &ModelParams) -> Result<Vec<Separation>> {
    let table = separation_table(p);
    let bad: Vec<String> = table
        .iter()
        .filter(|s| !(s.lower_bound > 3.0 * p.gamma))
        .map(|s| format!("{} = {} <= 3 gamma = {}", s.name, s.lower_bound, 3.0 * p.gamma))
        .collect();
    if bad.is_empty() {
        Ok(table)
    } else {
        Err(Error::SeparationViolated(bad))
    }
}

/// Smallest of the four separations.
pub fn min_separation(p: &ModelParams) -> f64 {
    separation_table(p)
        .iter()
        .map(|s| s.lower_bound)
        .fold(f64::INFINITY, f64::min)
}
