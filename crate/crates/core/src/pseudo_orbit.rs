//! The explicit two-sided pseudo-orbit and its class certificates.
//!
//! Block `k` holds four points: `x_{4k}` on the left unstable branch, `x_{4k+1}`
//! on a preimage leaf of `L0` near `L+`, `x_{4k+2}` on the right unstable
//! branch and `x_{4k+3}` on a preimage leaf of `L0` near `f(L-)`. Every jump
//! `A_m = d(φ(t_m, x_m), x_{m+1})` in block `k` equals `gamma / 2^|k|`.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::model::regions::{classify_region, min_separation, RegionTag};
use crate::model::{
    flow, iterate_one_d, one_d_map, preimage_in_band, Case, HybridState, ModelParams, Trajectory,
};
use crate::model::params::CASE_TOL;

pub const DEFAULT_MAX_DEPTH: usize = 40;
/// Accuracy demanded of the descent-time root.
pub const DESCENT_TOL: f64 = 1e-12;
/// Residual allowed for `f^depth(x*)` at a selected preimage.
pub const PREIMAGE_TOL: f64 = 1e-10;

/// Default `gamma`: a tenth of the smallest length scale the construction
/// must resolve, rounded down to one significant digit.
pub fn choose_gamma(p: &ModelParams) -> Result<f64> {
    let right_band = 0.5 - p.image_of_right_leaf();
    let left_band = p.image_of_left_leaf() + 0.5;
    let mut scales = vec![("d(L-,L+)", 1.0), ("separation/3", min_separation(p) / 3.0)];
    if matches!(p.case, Case::B | Case::C) {
        scales.push(("L+ - f(L+)", right_band));
    }
    if matches!(p.case, Case::A | Case::C) {
        scales.push(("f(L-) - L-", left_band));
    }
    if let Some((name, w)) = scales.iter().find(|(_, w)| !(*w > CASE_TOL)) {
        return Err(Error::NoValidGamma(format!("{name} = {w} leaves an empty band")));
    }
    let m = scales.iter().map(|(_, w)| *w).fold(f64::INFINITY, f64::min) / 10.0;
    let e = m.log10().floor() as i32;
    // exact decimal rounding: digit / 10^-e
    let g = if e < 0 {
        (m * 10f64.powi(-e)).floor() / 10f64.powi(-e)
    } else {
        (m / 10f64.powi(e)).floor() * 10f64.powi(e)
    };
    if g > 0.0 {
        Ok(g)
    } else {
        Err(Error::NoValidGamma(format!("scale {m} rounds to zero")))
    }
}

/// Block index and position within the block of index `m`.
pub fn block_of(m: i64) -> (i64, i64) {
    (m.div_euclid(4), m.rem_euclid(4))
}

/// `gamma / 2^|k|` for the block containing `m`.
pub fn expected_gap(m: i64, gamma: f64) -> f64 {
    let (k, _) = block_of(m);
    gamma / 2f64.powi(k.unsigned_abs() as i32)
}

/// Distance of `x_{4k}` from the singularity.
///
/// Scaled by `2^max(|k|, |k-1|)` so that the jump into `x_{4k}` from the
/// descent of block `k - 1` has the size that block requires.
fn type0_offset(k: i64, gamma: f64) -> f64 {
    let e = k.unsigned_abs().max((k - 1).unsigned_abs());
    gamma / (SQRT_2 * 2f64.powi(e as i32))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub max_depth: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// Per-block bookkeeping of the two descending points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockAux {
    pub k: i64,
    /// Time for `x_{4k+1}` to reach `L0`.
    pub s1: f64,
    /// Descent time from `L0` to distance `d1` from the singularity.
    pub s1_tilde: f64,
    pub depth1: usize,
    pub d1: f64,
    pub s3: f64,
    pub s3_tilde: f64,
    pub depth3: usize,
    pub d3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitKind {
    /// The constructed counterexample with blocks `-K-1..=K`.
    Blocks { k_max: usize },
    /// Consecutive returns of a single true orbit (zero gaps).
    True,
}

/// A bi-sequence `(x_n, t_n)` for `n` in `lo..=hi`.
///
/// Segments `n >= 0` carry the cached forward orbit of `x_n` up to `t_n`.
#[derive(Debug, Clone)]
pub struct PseudoOrbit {
    params: ModelParams,
    kind: OrbitKind,
    lo: i64,
    points: Vec<HybridState>,
    times: Vec<f64>,
    /// `s_n` for `n` in `lo..=hi + 1`.
    sums: Vec<f64>,
    blocks: Vec<BlockAux>,
    segments: Vec<Trajectory>,
}

struct Descender {
    state: HybridState,
    depth: usize,
    landing_time: f64,
    landing_y: f64,
}

fn descender(
    x_star: f64,
    anchor: f64,
    g: f64,
    depth: usize,
    p: &ModelParams,
) -> Result<Descender> {
    let residual = iterate_one_d(x_star, depth, p).map_or(f64::NAN, |v| v.abs());
    if !(residual <= PREIMAGE_TOL) {
        return Err(Error::PreimageInaccurate { depth, residual });
    }
    let dx = x_star - anchor;
    let y = (g * g - dx * dx).sqrt();
    let state = HybridState::on_section(x_star, y)?;
    let landing = Trajectory::new(&state, p)?
        .landing(depth)?
        .ok_or(Error::PreimageInaccurate { depth, residual })?;
    if landing.point.x != 0.0 {
        return Err(Error::PreimageInaccurate {
            depth,
            residual: landing.point.x.abs(),
        });
    }
    Ok(Descender {
        state,
        depth,
        landing_time: landing.time,
        landing_y: landing.point.y,
    })
}

/// Time after which the orbit of `(0, y, 1)` is at distance `d` from the origin.
pub fn descent_time(y: f64, d: f64, p: &ModelParams) -> Result<f64> {
    let dist = |t: f64| {
        let a = y * (p.lambda2 * t).exp();
        let b = (p.lambda3 * t).exp();
        (a * a + b * b).sqrt()
    };
    if !(d > 0.0 && dist(0.0) > d) {
        return Err(Error::BisectionFailed(format!(
            "target {d} not below the starting distance {}",
            dist(0.0)
        )));
    }
    let mut hi = 1.0;
    while dist(hi) >= d {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::BisectionFailed(format!("no bracket for {d}")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dist(mid) > d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = if (dist(lo) - d).abs() <= (dist(hi) - d).abs() { lo } else { hi };
    if (dist(t) - d).abs() > DESCENT_TOL {
        return Err(Error::BisectionFailed(format!(
            "residual {:e} at t = {t}",
            (dist(t) - d).abs()
        )));
    }
    Ok(t)
}

impl PseudoOrbit {
    /// Builds blocks `-k_max-1..=k_max` plus the first point of block `k_max + 1`.
    pub fn build(params: &ModelParams, k_max: usize) -> Result<Self> {
        Self::build_with(params, k_max, BuildOptions::default())
    }

    pub fn build_with(params: &ModelParams, k_max: usize, opts: BuildOptions) -> Result<Self> {
        if k_max < 1 {
            return Err(Error::InvalidArgument("block horizon K must be >= 1".into()));
        }
        params.check_case()?;
        if !(params.gamma > 0.0) {
            return Err(Error::InvalidParams("gamma must be positive".into()));
        }
        let p = params;
        let gamma = p.gamma;
        let k_hi = k_max as i64;
        let right_anchor = 0.5;
        let left_anchor = one_d_map(-0.5, p)?;

        // point templates for every exponent |k| in 0..=K+1
        let mut right = Vec::new();
        let mut left = Vec::new();
        for e in 0..=k_hi + 1 {
            let g = gamma / 2f64.powi(e as i32);
            let (lo1, hi1) = match p.case {
                Case::A => (0.5 - g, 0.5),
                Case::B | Case::C => ((0.5 - g).max(p.image_of_right_leaf()), 0.5),
            };
            let q1 = preimage_in_band(0.0, lo1, hi1, right_anchor, opts.max_depth, p)
                .ok_or(Error::BandEmpty(e))?;
            right.push(descender(q1.x, right_anchor, g, q1.depth, p)?);
            let (lo3, hi3) = match p.case {
                Case::A | Case::C => ((left_anchor - g).max(-0.5), left_anchor),
                Case::B => (-0.5, -0.5 + g),
            };
            let q3 = preimage_in_band(0.0, lo3, hi3, left_anchor, opts.max_depth, p)
                .ok_or(Error::BandEmpty(e))?;
            left.push(descender(q3.x, left_anchor, g, q3.depth, p)?);
        }

        let lo = -4 * (k_hi + 1);
        let hi = 4 * k_hi + 4;
        let mut points = Vec::new();
        let mut times = Vec::new();
        let mut blocks = Vec::new();
        let return_time = |s: &HybridState, n: usize| -> Result<f64> {
            Ok(Trajectory::new(s, p)?
                .landing(n)?
                .ok_or(Error::NeverReturns)?
                .time)
        };
        for k in -(k_hi + 1)..=k_hi {
            let e = k.unsigned_abs() as usize;
            let g = gamma / 2f64.powi(e as i32);
            let x0 = HybridState::on_unstable_axis(-type0_offset(k, gamma))?;
            let x2 = HybridState::on_unstable_axis(g / SQRT_2)?;
            let d1 = g / SQRT_2;
            let a_next = type0_offset(k + 1, gamma);
            let d3 = (g * g - a_next * a_next).sqrt();
            let r = &right[e];
            let l = &left[e];
            let s1_tilde = descent_time(r.landing_y, d1, p)?;
            let s3_tilde = descent_time(l.landing_y, d3, p)?;
            points.extend([x0, r.state, x2, l.state]);
            times.extend([
                return_time(&x0, 1)?,
                r.landing_time + s1_tilde,
                return_time(&x2, 2)?,
                l.landing_time + s3_tilde,
            ]);
            blocks.push(BlockAux {
                k,
                s1: r.landing_time,
                s1_tilde,
                depth1: r.depth,
                d1,
                s3: l.landing_time,
                s3_tilde,
                depth3: l.depth,
                d3,
            });
        }
        let last = HybridState::on_unstable_axis(-type0_offset(k_hi + 1, gamma))?;
        points.push(last);
        times.push(return_time(&last, 1)?);
        debug_assert_eq!(points.len() as i64, hi - lo + 1);

        if let Some(i) = times.iter().position(|t| !(*t > 1.0)) {
            return Err(Error::ClassViolated {
                class: "t_n > 1",
                index: lo + i as i64,
            });
        }
        let orbit = Self::assemble(*p, OrbitKind::Blocks { k_max }, lo, points, times, blocks)?;
        orbit.check_bands(left_anchor)?;
        Ok(orbit)
    }

    /// The returns of one true orbit, `x_i = π^i(start)`, as a zero-gap pseudo-orbit.
    pub fn true_orbit(start: &HybridState, segments: usize, params: &ModelParams) -> Result<Self> {
        if segments < 1 {
            return Err(Error::InvalidArgument("need at least one segment".into()));
        }
        let mut traj = Trajectory::new(start, params)?;
        let mut points = vec![*start];
        let mut landing_times = vec![0.0];
        for i in 1..=segments + 1 {
            let l = traj.landing(i)?.ok_or(Error::NeverReturns)?;
            landing_times.push(l.time);
            if i <= segments {
                points.push(HybridState::cube(l.point)?);
            }
        }
        let times = landing_times.windows(2).map(|w| w[1] - w[0]).collect();
        Self::assemble(*params, OrbitKind::True, 0, points, times, Vec::new())
    }

    fn assemble(
        params: ModelParams,
        kind: OrbitKind,
        lo: i64,
        points: Vec<HybridState>,
        times: Vec<f64>,
        blocks: Vec<BlockAux>,
    ) -> Result<Self> {
        let len = points.len();
        let zero = (-lo) as usize;
        let mut sums = vec![0.0; len + 1];
        for j in zero + 1..=len {
            sums[j] = sums[j - 1] + times[j - 1];
        }
        for j in (0..zero).rev() {
            sums[j] = sums[j + 1] - times[j];
        }
        let mut segments = Vec::with_capacity(len - zero);
        for j in zero..len {
            let mut tr = Trajectory::new(&points[j], &params)?;
            tr.extend_to(times[j])?;
            segments.push(tr);
        }
        Ok(Self {
            params,
            kind,
            lo,
            points,
            times,
            sums,
            blocks,
            segments,
        })
    }

    fn check_bands(&self, left_anchor: f64) -> Result<()> {
        let p = &self.params;
        for b in &self.blocks {
            let g = self.params.gamma / 2f64.powi(b.k.unsigned_abs() as i32);
            let x1 = self.point(4 * b.k + 1).expect("in window").position().x;
            let x3 = self.point(4 * b.k + 3).expect("in window").position().x;
            let ok1 = match p.case {
                Case::A => x1 < 0.5 && x1 > 0.5 - g,
                Case::B | Case::C => p.image_of_right_leaf() < x1 && x1 < 0.5 && x1 > 0.5 - g,
            };
            let ok3 = match p.case {
                Case::A | Case::C => -0.5 < x3 && x3 < left_anchor && x3 > left_anchor - g,
                Case::B => -0.5 < x3 && x3 < -0.5 + g,
            };
            if !ok1 {
                return Err(Error::ClassViolated {
                    class: "leaf band",
                    index: 4 * b.k + 1,
                });
            }
            if !ok3 {
                return Err(Error::ClassViolated {
                    class: "leaf band",
                    index: 4 * b.k + 3,
                });
            }
        }
        Ok(())
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Same orbit with a different reparametrization bound; the construction
    /// does not depend on it.
    pub fn with_delta_rep(&self, delta_rep: f64) -> Self {
        let mut o = self.clone();
        o.params.delta_rep = delta_rep;
        o
    }

    pub fn kind(&self) -> OrbitKind {
        self.kind
    }

    pub fn k_max(&self) -> Option<usize> {
        match self.kind {
            OrbitKind::Blocks { k_max } => Some(k_max),
            OrbitKind::True => None,
        }
    }

    /// First and last point index.
    pub fn index_range(&self) -> (i64, i64) {
        (self.lo, self.lo + self.points.len() as i64 - 1)
    }

    /// Largest segment index used by the functionals.
    pub fn horizon(&self) -> usize {
        let (_, hi) = self.index_range();
        (hi - 1).max(0) as usize
    }

    fn slot(&self, n: i64) -> Option<usize> {
        let j = n - self.lo;
        (j >= 0 && (j as usize) < self.points.len()).then_some(j as usize)
    }

    pub fn point(&self, n: i64) -> Option<&HybridState> {
        self.slot(n).map(|j| &self.points[j])
    }

    pub fn time(&self, n: i64) -> Option<f64> {
        self.slot(n).map(|j| self.times[j])
    }

    /// Partial sum `s_n`, defined for `n` up to one past the last index.
    pub fn s(&self, n: i64) -> Option<f64> {
        let j = n - self.lo;
        (j >= 0 && (j as usize) < self.sums.len()).then(|| self.sums[j as usize])
    }

    pub fn blocks(&self) -> &[BlockAux] {
        &self.blocks
    }

    pub fn block(&self, k: i64) -> Option<&BlockAux> {
        self.blocks.iter().find(|b| b.k == k)
    }

    /// Cached forward orbit of `x_n`, `n >= 0`.
    pub fn segment(&self, n: usize) -> Option<&Trajectory> {
        self.segments.get(n)
    }

    pub fn region_tag(&self, n: i64) -> Option<RegionTag> {
        self.point(n).map(|s| classify_region(s.position(), &self.params))
    }

    /// `A_m = d(φ(t_m, x_m), x_{m+1})`.
    pub fn gap(&self, m: i64) -> Result<f64> {
        let (x, t, next) = match (self.point(m), self.time(m), self.point(m + 1)) {
            (Some(x), Some(t), Some(n)) => (x, t, n),
            _ => return Err(Error::InvalidArgument(format!("gap index {m} outside the window"))),
        };
        Ok(flow(t, x, &self.params)?.dist(next))
    }

    /// Every defined gap, `(m, A_m)`.
    pub fn gaps(&self) -> Result<Vec<(i64, f64)>> {
        let (lo, hi) = self.index_range();
        (lo..hi).map(|m| Ok((m, self.gap(m)?))).collect()
    }

    /// Largest deviation of `A_m` from `gamma / 2^|k|` over the window.
    pub fn gap_law_error(&self) -> Result<f64> {
        Ok(self
            .gaps()?
            .iter()
            .map(|&(m, a)| (a - expected_gap(m, self.params.gamma)).abs())
            .fold(0.0, f64::max))
    }

    /// Segment containing `t >= 0`: the `n` with `s_n <= t < s_{n+1}`.
    pub fn segment_at(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("time {t} must be >= 0")));
        }
        let zero = (-self.lo) as usize;
        let sums = &self.sums[zero..];
        if t >= *sums.last().expect("nonempty") {
            return Err(Error::HorizonExceeded(t));
        }
        Ok(sums.partition_point(|&s| s <= t) - 1)
    }

    /// Position of the pseudo-orbit at global time `t`, for `t` inside segment `n`.
    pub fn position_in(&self, n: usize, t: f64, hint: &mut usize) -> Vec3 {
        let s = self.sums[(n as i64 - self.lo) as usize];
        self.segments[n].position_with_hint(t - s, hint)
    }

    /// `φ(t - s_n, x_n)` for the segment containing `t`.
    pub fn pseudo_state_at(&self, t: f64) -> Result<HybridState> {
        let n = self.segment_at(t)?;
        let s = self.s(n as i64).expect("segment in window");
        self.segments[n].clone().state_at(t - s)
    }

    /// Compares each negative block with the block `|k|` it mirrors.
    pub fn mirror_report(&self) -> Vec<MirrorCheck> {
        let mut out = Vec::new();
        for b in self.blocks.iter().filter(|b| b.k < 0) {
            let k = b.k;
            let kk = -k;
            for i in 0..4 {
                let (n, m) = (4 * k + i, 4 * kk + i);
                let (Some(a), Some(c)) = (self.point(n), self.point(m)) else {
                    continue;
                };
                out.push(MirrorCheck {
                    n,
                    mirror: m,
                    point_equal: a == c,
                    time_equal: self.time(n) == self.time(m),
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MirrorCheck {
    pub n: i64,
    pub mirror: i64,
    pub point_equal: bool,
    pub time_equal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CesaroRow {
    pub n: usize,
    /// `(1/n) Σ_{i=-n}^{n} A_i`
    pub average: f64,
    /// `8 gamma / n`
    pub eight_gamma_bound: f64,
    /// `M / n` with `M` the total two-sided gap mass
    pub mass_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub gamma: f64,
    /// Bound on the total gap mass: `4 Σ_{k>=0} gamma/2^k + 4 Σ_{k>=1} gamma/2^k`.
    pub mass: f64,
    /// `max_m A_m / (2 gamma 2^{-|m|/4})`; at most 1 for the limit class.
    pub limit_ratio: f64,
    pub cesaro: Vec<CesaroRow>,
    /// First `n` with average above `8 gamma / n`, if any.
    pub first_eight_gamma_violation: Option<usize>,
    pub final_average: f64,
    pub within_tol: bool,
    pub delta: f64,
    /// Smallest `N` such that every window of length `>= N` averages below `delta`.
    pub n_delta: Option<usize>,
    /// `floor(M / delta) + 1`
    pub n_delta_bound: usize,
    /// `8 gamma / delta`
    pub eight_gamma_n_delta_bound: f64,
}

impl ClassReport {
    pub fn eight_gamma_cesaro_holds(&self) -> bool {
        self.first_eight_gamma_violation.is_none()
    }

    pub fn eight_gamma_n_delta_holds(&self) -> bool {
        self.n_delta
            .is_some_and(|n| n as f64 <= self.eight_gamma_n_delta_bound)
    }
}

/// Checks the limit, asymptotic-average and `delta`-average classes.
///
/// Errors only on violations of bounds implied by the gap law itself, which
/// would mean the construction is broken.
pub fn verify_classes(orbit: &PseudoOrbit, n_max: usize, delta: f64, tol: f64) -> Result<ClassReport> {
    if orbit.kind() == OrbitKind::True {
        return Err(Error::InvalidArgument("class checks need the block construction".into()));
    }
    let (lo, hi) = orbit.index_range();
    if n_max == 0 || n_max as i64 > (hi - 1).min(-lo) {
        return Err(Error::InvalidArgument(format!(
            "n_max = {n_max} outside 1..={}",
            (hi - 1).min(-lo)
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    let gamma = orbit.params().gamma;
    let mass = 12.0 * gamma;
    let gaps = orbit.gaps()?;
    let a = |m: i64| gaps[(m - lo) as usize].1;

    let mut limit_ratio: f64 = 0.0;
    for &(m, v) in &gaps {
        let bound = 2.0 * gamma * 2f64.powf(-(m.unsigned_abs() as f64) / 4.0);
        limit_ratio = limit_ratio.max(v / bound);
        if v > bound * (1.0 + 1e-9) {
            return Err(Error::ClassViolated { class: "limit", index: m });
        }
    }

    let mut cesaro = Vec::with_capacity(n_max);
    let mut first_eight_gamma_violation = None;
    for n in 1..=n_max {
        let sum: f64 = (-(n as i64)..=n as i64).map(a).sum();
        let row = CesaroRow {
            n,
            average: sum / n as f64,
            eight_gamma_bound: 8.0 * gamma / n as f64,
            mass_bound: mass / n as f64,
        };
        if row.average > row.mass_bound * (1.0 + 1e-12) {
            return Err(Error::ClassViolated {
                class: "asymptotic-average",
                index: n as i64,
            });
        }
        if first_eight_gamma_violation.is_none() && row.average > row.eight_gamma_bound * (1.0 + 1e-12) {
            first_eight_gamma_violation = Some(n);
        }
        cesaro.push(row);
    }
    let final_average = cesaro.last().map_or(0.0, |r| r.average);

    // window sums over the data; prefix[j] = Σ of the first j gaps
    let vals: Vec<f64> = gaps.iter().map(|g| g.1).collect();
    let mut prefix = vec![0.0];
    for v in &vals {
        prefix.push(prefix.last().unwrap() + v);
    }
    let len = vals.len();
    let max_avg = |w: usize| {
        (0..=len - w)
            .map(|i| (prefix[i + w] - prefix[i]) / w as f64)
            .fold(0.0, f64::max)
    };
    let mut n_delta = None;
    for w in (1..=len).rev() {
        if max_avg(w) < delta {
            n_delta = Some(w);
        } else {
            break;
        }
    }
    let n_delta_bound = (mass / delta).floor() as usize + 1;
    match n_delta {
        Some(n) if n <= n_delta_bound => {}
        _ if n_delta_bound > len => {}
        _ => {
            return Err(Error::ClassViolated {
                class: "delta-average",
                index: n_delta.map_or(-1, |n| n as i64),
            })
        }
    }

    Ok(ClassReport {
        gamma,
        mass,
        limit_ratio,
        cesaro,
        first_eight_gamma_violation,
        final_average,
        within_tol: final_average <= tol,
        delta,
        n_delta,
        n_delta_bound,
        eight_gamma_n_delta_bound: 8.0 * gamma / delta,
    })
}
