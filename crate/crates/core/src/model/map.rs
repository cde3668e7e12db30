//! The one-dimensional map `f` on leaves and the Poincaré map `P = (f, g)`.

use std::cmp::Ordering;

use super::params::ModelParams;
use crate::error::{Error, Result};

/// A leaf `F_x = {(x, y, 1) : |y| <= 1/2}` of the vertical foliation of `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leaf(pub f64);

impl Leaf {
    pub const LEFT: Leaf = Leaf(-0.5);
    pub const SINGULAR: Leaf = Leaf(0.0);
    pub const RIGHT: Leaf = Leaf(0.5);

    pub fn x(self) -> f64 {
        self.0
    }
}

impl Eq for Leaf {}

impl PartialOrd for Leaf {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Leaf {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// One of the two monotone branches of `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn of(x: f64) -> Option<Branch> {
        if x > 0.0 {
            Some(Branch::Plus)
        } else if x < 0.0 {
            Some(Branch::Minus)
        } else {
            None
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Leaf coordinate reached from a cube exit height `z_exit` on branch `b`.
///
/// Shared by the flow's tube landing and by [`one_d_map`] so both agree bitwise.
pub(crate) fn branch_image(b: Branch, z_exit: f64, p: &ModelParams) -> f64 {
    match b {
        Branch::Plus => p.c_plus * z_exit - 0.5,
        Branch::Minus => 0.5 - p.c_minus * z_exit,
    }
}

/// `f(x)`; undefined on the singular leaf.
pub fn one_d_map(x: f64, p: &ModelParams) -> Result<f64> {
    let b = Branch::of(x).ok_or(Error::SingularLeaf)?;
    Ok(branch_image(b, 1.0 * x.abs().powf(p.r()), p))
}

/// `f^n(x)`, failing if an intermediate iterate hits the singular leaf.
pub fn iterate_one_d(x: f64, n: usize, p: &ModelParams) -> Result<f64> {
    (0..n).try_fold(x, |v, _| one_d_map(v, p))
}

/// Inverse of branch `b` at `w`, if the preimage lies in `[-1/2, 1/2]`.
pub fn branch_inverse(w: f64, b: Branch, p: &ModelParams) -> Option<f64> {
    let inv_r = 1.0 / p.r();
    let u = match b {
        Branch::Plus => (w + 0.5) / p.c_plus,
        Branch::Minus => (0.5 - w) / p.c_minus,
    };
    if !(0.0..=0.5f64.powf(p.r())).contains(&u) {
        return None;
    }
    let x = u.powf(inv_r);
    if x == 0.0 || x > 0.5 {
        return None;
    }
    Some(b.sign() * x)
}

/// `P(x, y) = (f(x), g(x, y))` with `g(x, y) = kappa |x|^s y`.
pub fn poincare(x: f64, y: f64, p: &ModelParams) -> Result<(f64, f64)> {
    let fx = one_d_map(x, p)?;
    Ok((fx, contract_y(x, y, p)))
}

/// `g(x, y)` computed the same way the tube landing does.
pub(crate) fn contract_y(x: f64, y: f64, p: &ModelParams) -> f64 {
    p.kappa * (y * x.abs().powf(p.s_exp()))
}

/// `dg/dy` at leaf `x`.
pub fn contraction_rate(x: f64, p: &ModelParams) -> f64 {
    p.kappa * x.abs().powf(p.s_exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preimage {
    pub x: f64,
    /// Number of applications of `f` that map `x` to the target.
    pub depth: usize,
}

/// All `x` in `[-1/2, 1/2]` with `f^i(x) = target` for some `1 <= i <= depth`,
/// sorted by `x`.
pub fn one_d_preimages(target: f64, depth: usize, p: &ModelParams) -> Vec<Preimage> {
    let mut out = Vec::new();
    let mut level = vec![target];
    for d in 1..=depth {
        let mut next = Vec::with_capacity(level.len() * 2);
        for &w in &level {
            for b in [Branch::Minus, Branch::Plus] {
                if let Some(x) = branch_inverse(w, b, p) {
                    next.push(x);
                }
            }
        }
        out.extend(next.iter().map(|&x| Preimage { x, depth: d }));
        level = next;
    }
    out.sort_by(|a, b| a.x.total_cmp(&b.x));
    out
}

/// Minimal-depth preimage of `target` inside the open band `(lo, hi)`.
///
/// Pushes the band forward under `f` until some image interval covers `target`,
/// then pulls `target` back along the recorded itinerary. Among solutions of
/// the same depth (possible once a band straddles the singular leaf) the one
/// nearest to `anchor` wins.
pub fn preimage_in_band(
    target: f64,
    lo: f64,
    hi: f64,
    anchor: f64,
    max_depth: usize,
    p: &ModelParams,
) -> Option<Preimage> {
    const MAX_PIECES: usize = 4096;
    if !(lo < hi) {
        return None;
    }
    let limit = |x: f64, b: Branch| -> f64 {
        if x == 0.0 {
            -0.5 * b.sign()
        } else {
            branch_image(b, x.abs().powf(p.r()), p)
        }
    };
    // (interval, itinerary of branches from the band outwards)
    let mut pieces: Vec<((f64, f64), Vec<Branch>)> = vec![((lo, hi), Vec::new())];
    for depth in 0..=max_depth {
        if depth > 0 {
            let mut hits: Vec<f64> = pieces
                .iter()
                .filter(|((a, b), _)| *a < target && target < *b)
                .filter_map(|(_, itinerary)| {
                    itinerary
                        .iter()
                        .rev()
                        .try_fold(target, |w, &br| branch_inverse(w, br, p))
                })
                .filter(|x| lo < *x && *x < hi)
                .collect();
            if !hits.is_empty() {
                hits.sort_by(|a, b| (a - anchor).abs().total_cmp(&(b - anchor).abs()));
                return Some(Preimage { x: hits[0], depth });
            }
        }
        let mut next = Vec::new();
        for ((a, b), itinerary) in pieces {
            let mut push = |a: f64, b: f64, br: Branch| {
                if a < b {
                    let mut it = itinerary.clone();
                    it.push(br);
                    next.push(((limit(a, br), limit(b, br)), it));
                }
            };
            if b <= 0.0 {
                push(a, b, Branch::Minus);
            } else if a >= 0.0 {
                push(a, b, Branch::Plus);
            } else {
                push(a, 0.0, Branch::Minus);
                push(0.0, b, Branch::Plus);
            }
        }
        if next.is_empty() || next.len() > MAX_PIECES {
            return None;
        }
        pieces = next;
    }
    None
}
