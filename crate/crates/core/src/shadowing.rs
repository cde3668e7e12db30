//! Time reparametrizations and finite-horizon shadowing functionals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::model::{speed_bound, HybridState, ModelParams, Trajectory};
use crate::pseudo_orbit::PseudoOrbit;

/// Slack allowed when comparing slopes against `1 ± delta`.
pub const SLOPE_TOL: f64 = 1e-12;
pub const COARSE_STEP: f64 = 0.01;
const CHORD_SAMPLES: usize = 10_000;
const MAX_REFINED_CELLS: usize = 64;

/// Increasing piecewise-linear `h` with `h(0) = 0`.
///
/// Slope `slopes[j]` applies on `[breakpoints[j], breakpoints[j+1])`; the last
/// slope continues to infinity and the first one to negative times.
#[derive(Debug, Clone, PartialEq)]
pub struct Reparam {
    breakpoints: Vec<f64>,
    slopes: Vec<f64>,
    values: Vec<f64>,
}

impl Reparam {
    pub fn identity() -> Self {
        Self {
            breakpoints: vec![0.0],
            slopes: vec![1.0],
            values: vec![0.0],
        }
    }

    pub fn new(breakpoints: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() || breakpoints.len() != slopes.len() {
            return Err(Error::InvalidArgument(
                "reparametrization needs one slope per breakpoint".into(),
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidArgument("first breakpoint must be 0".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("breakpoints must increase".into()));
        }
        if slopes.iter().any(|s| !s.is_finite()) || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidArgument("non-finite reparametrization".into()));
        }
        let mut values = vec![0.0; breakpoints.len()];
        for j in 1..breakpoints.len() {
            values[j] = values[j - 1] + slopes[j - 1] * (breakpoints[j] - breakpoints[j - 1]);
        }
        Ok(Self {
            breakpoints,
            slopes,
            values,
        })
    }

    /// Breakpoints on the partial sums `s_0, ..., s_{len-1}` of `orbit`.
    pub fn on_grid(orbit: &PseudoOrbit, slopes: Vec<f64>) -> Result<Self> {
        let breaks = (0..slopes.len() as i64)
            .map(|n| orbit.s(n).ok_or(Error::HorizonExceeded(n as f64)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(breaks, slopes)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn is_identity(&self) -> bool {
        self.slopes.iter().all(|&s| s == 1.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return self.slopes[0] * t;
        }
        let j = self.breakpoints.partition_point(|&b| b <= t) - 1;
        self.values[j] + self.slopes[j] * (t - self.breakpoints[j])
    }

    /// `h^{-1}(u)`; requires positive slopes.
    pub fn inverse(&self, u: f64) -> f64 {
        if u < 0.0 {
            return u / self.slopes[0];
        }
        let j = self.values.partition_point(|&v| v <= u) - 1;
        self.breakpoints[j] + (u - self.values[j]) / self.slopes[j]
    }

    /// Compact text form: `id` or `pl[n](min..max)`.
    pub fn describe(&self) -> String {
        if self.is_identity() {
            return "id".to_string();
        }
        let lo = self.slopes.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        format!("pl[{}]({lo:.6}..{hi:.6})", self.slopes.len())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReparamViolation {
    #[error("h(0) = {0}, expected 0")]
    Origin(f64),
    #[error("slope {slope} on piece {index} is not positive")]
    NotIncreasing { index: usize, slope: f64 },
    #[error("slope {slope} on piece {index} is outside [1 - delta, 1 + delta]")]
    Slope { index: usize, slope: f64 },
    #[error("chord ({s}, {t}) has quotient {quotient}")]
    Chord { s: f64, t: f64, quotient: f64 },
}

/// Checks `h` against `Rep(delta)`: `h(0) = 0`, increasing, and every
/// difference quotient within `delta` of 1.
pub fn reparam_validate(h: &Reparam, delta: f64) -> std::result::Result<(), ReparamViolation> {
    let h0 = h.eval(0.0);
    if h0 != 0.0 {
        return Err(ReparamViolation::Origin(h0));
    }
    for (index, &slope) in h.slopes.iter().enumerate() {
        if !(slope > 0.0) {
            return Err(ReparamViolation::NotIncreasing { index, slope });
        }
        if (slope - 1.0).abs() > delta + SLOPE_TOL {
            return Err(ReparamViolation::Slope { index, slope });
        }
    }
    let span = h.breakpoints.last().copied().unwrap_or(0.0) + 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..CHORD_SAMPLES {
        let s: f64 = rng.gen_range(-1.0..span);
        let t: f64 = rng.gen_range(-1.0..span);
        if s == t {
            continue;
        }
        let quotient = (h.eval(s) - h.eval(t)) / (s - t);
        // rounding in the chord itself scales with the magnitude of h
        let slack = SLOPE_TOL + 1e-12 * (s.abs() + t.abs()) / (s - t).abs();
        if (quotient - 1.0).abs() > delta + slack {
            return Err(ReparamViolation::Chord { s, t, quotient });
        }
    }
    Ok(())
}

/// `beta = gamma / (2 V_max (1 + delta)) / 2`: reparametrized motion over
/// `|t| <= beta` stays below `gamma / 4`.
pub fn beta_for(p: &ModelParams) -> f64 {
    p.gamma / (2.0 * speed_bound(p) * (1.0 + p.delta_rep)) / 2.0
}

/// Lipschitz constant in `t` of `d(φ(h(t), y), φ(t - s_i, x_i))`.
pub fn integrand_lipschitz(p: &ModelParams) -> f64 {
    2.0 * speed_bound(p) * (1.0 + p.delta_rep)
}

/// The shadowing floor `beta gamma / 5`.
pub fn floor_for(p: &ModelParams) -> f64 {
    beta_for(p) * p.gamma / 5.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentIntegral {
    pub i: usize,
    /// Midpoint-rule estimate.
    pub value: f64,
    /// Certified bound on `|value - exact|`.
    pub error_bound: f64,
    /// Certified lower bound on the exact integral.
    pub lower_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningRow {
    pub n: usize,
    pub average: f64,
    pub error_bound: f64,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowFunctionalResult {
    pub value: f64,
    pub horizon: usize,
    pub segments: Vec<SegmentIntegral>,
    pub error_bound: f64,
    pub lower_bound: f64,
    /// Running averages for every `n' <= horizon`.
    pub running: Vec<RunningRow>,
}

impl ShadowFunctionalResult {
    /// `max` of the running averages over `n' >= n_min`, the finite stand-in for a limsup.
    pub fn running_sup(&self, n_min: usize) -> f64 {
        self.running
            .iter()
            .filter(|r| r.n >= n_min)
            .map(|r| r.average)
            .fold(0.0, f64::max)
    }
}

/// Which index range a functional sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `(1/n) Σ_{i=1}^{n}`
    Average,
    /// `(1/n) Σ_{i=0}^{n}`
    Asymptotic,
}

fn assemble(mode: Mode, all: &[SegmentIntegral], n: usize) -> ShadowFunctionalResult {
    let first = match mode {
        Mode::Average => 1,
        Mode::Asymptotic => 0,
    };
    let mut running = Vec::with_capacity(n);
    let (mut v, mut e, mut l) = (0.0, 0.0, 0.0);
    if first == 0 {
        v += all[0].value;
        e += all[0].error_bound;
        l += all[0].lower_bound;
    }
    for (k, seg) in all.iter().enumerate().take(n + 1).skip(1) {
        v += seg.value;
        e += seg.error_bound;
        l += seg.lower_bound;
        let nf = k as f64;
        running.push(RunningRow {
            n: k,
            average: v / nf,
            error_bound: e / nf,
            lower_bound: l / nf,
        });
    }
    let last = running.last().copied().unwrap_or(RunningRow {
        n,
        average: 0.0,
        error_bound: 0.0,
        lower_bound: 0.0,
    });
    ShadowFunctionalResult {
        value: last.average,
        horizon: n,
        segments: all[first..=n].to_vec(),
        error_bound: last.error_bound,
        lower_bound: last.lower_bound,
        running,
    }
}

/// A candidate `(y, h)` against a pseudo-orbit, with the orbit of `y` cached
/// over the whole horizon.
#[derive(Debug, Clone)]
pub struct Shadower<'a> {
    orbit: &'a PseudoOrbit,
    y: HybridState,
    h: Reparam,
    traj: Trajectory,
    lipschitz: f64,
    coarse: f64,
    fine: f64,
}

impl<'a> Shadower<'a> {
    pub fn new(orbit: &'a PseudoOrbit, y: HybridState, h: Reparam) -> Result<Self> {
        let p = orbit.params();
        let (_, hi) = orbit.index_range();
        let end = orbit.s(hi + 1).expect("window end");
        let mut traj = Trajectory::new(&y, p)?;
        traj.extend_to(h.eval(end) + 1.0)?;
        Ok(Self {
            orbit,
            y,
            h,
            traj,
            lipschitz: integrand_lipschitz(p),
            coarse: COARSE_STEP,
            fine: beta_for(p) / 4.0,
        })
    }

    pub fn with_coarse_step(mut self, step: f64) -> Self {
        self.coarse = step;
        self
    }

    pub fn orbit(&self) -> &PseudoOrbit {
        self.orbit
    }

    pub fn y(&self) -> &HybridState {
        &self.y
    }

    pub fn h(&self) -> &Reparam {
        &self.h
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    /// Lipschitz constant of the integrand.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Distance at global time `t` inside segment `n`, with leg cursors.
    pub fn distance_in(&self, n: usize, t: f64, hy: &mut usize, hx: &mut usize) -> f64 {
        let a = self.traj.position_with_hint(self.h.eval(t), hy);
        let b = self.orbit.position_in(n, t, hx);
        a.dist(b)
    }

    /// `d(φ(h(t), y), φ(t - s_n, x_n))` for the segment containing `t`.
    pub fn distance(&self, t: f64) -> Result<f64> {
        let n = self.orbit.segment_at(t)?;
        Ok(self.distance_in(n, t, &mut 0, &mut 0))
    }

    fn check_segment(&self, i: usize) -> Result<(f64, f64)> {
        let (_, hi) = self.orbit.index_range();
        if i as i64 > hi {
            return Err(Error::HorizonExceeded(i as f64));
        }
        let s0 = self.orbit.s(i as i64).expect("in window");
        let s1 = self.orbit.s(i as i64 + 1).expect("in window");
        Ok((s0, s1))
    }

    /// Midpoint values on the coarse grid of segment `i`: `(width, values)`.
    fn cells(&self, i: usize) -> Result<(f64, f64, Vec<f64>)> {
        let (s0, s1) = self.check_segment(i)?;
        let len = s1 - s0;
        let count = ((len / self.coarse).ceil() as usize).max(1);
        let w = len / count as f64;
        let (mut hy, mut hx) = (0, 0);
        let vals = (0..count)
            .map(|c| self.distance_in(i, s0 + (c as f64 + 0.5) * w, &mut hy, &mut hx))
            .collect();
        Ok((s0, w, vals))
    }

    fn cell_lower(&self, f: f64, w: f64) -> f64 {
        (f - self.lipschitz * w / 2.0).max(0.0) * w
    }

    /// Lower bound for one coarse cell using sub-cells fine enough to see `f`.
    fn refine_cell(&self, i: usize, start: f64, w: f64, f: f64) -> f64 {
        let target = (f / self.lipschitz).clamp(self.fine, w);
        let count = ((w / target).ceil() as usize).clamp(1, (w / self.fine).ceil() as usize);
        let sw = w / count as f64;
        let (mut hy, mut hx) = (0, 0);
        (0..count)
            .map(|c| {
                let v = self.distance_in(i, start + (c as f64 + 0.5) * sw, &mut hy, &mut hx);
                self.cell_lower(v, sw)
            })
            .sum()
    }

    /// Integral over segment `i`. With `want_lower`, cells are refined until
    /// the certified lower bound reaches it (or the refinement cap is hit).
    pub fn segment_integral_with(&self, i: usize, want_lower: Option<f64>) -> Result<SegmentIntegral> {
        let (s0, w, vals) = self.cells(i)?;
        let value: f64 = vals.iter().map(|f| f * w).sum();
        let error_bound = vals.len() as f64 * self.lipschitz * w * w / 4.0;
        let mut lower: Vec<f64> = vals.iter().map(|&f| self.cell_lower(f, w)).collect();
        let mut lower_bound: f64 = lower.iter().sum();
        if let Some(goal) = want_lower {
            if lower_bound < goal {
                let mut order: Vec<usize> = (0..vals.len()).collect();
                order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
                for &c in order.iter().take(MAX_REFINED_CELLS) {
                    if vals[c] <= 0.0 {
                        break;
                    }
                    let refined = self.refine_cell(i, s0 + c as f64 * w, w, vals[c]);
                    if refined > lower[c] {
                        lower[c] = refined;
                        lower_bound = lower.iter().sum();
                    }
                    if lower_bound >= goal {
                        break;
                    }
                }
            }
        }
        Ok(SegmentIntegral {
            i,
            value,
            error_bound,
            lower_bound,
        })
    }

    pub fn segment_integral(&self, i: usize) -> Result<SegmentIntegral> {
        self.segment_integral_with(i, None)
    }

    /// Integrals for segments `0..=n`. With `floor`, refinement aims for a
    /// certified average lower bound of at least `floor`.
    pub fn integrals(&self, n: usize, floor: Option<f64>) -> Result<Vec<SegmentIntegral>> {
        let mut all = (0..=n)
            .map(|i| self.segment_integral(i))
            .collect::<Result<Vec<_>>>()?;
        if let Some(floor) = floor {
            let goal = floor * n as f64;
            let have = |all: &[SegmentIntegral]| all[1..].iter().map(|s| s.lower_bound).sum::<f64>();
            if have(&all) < goal {
                let mut order: Vec<usize> = (1..=n).collect();
                order.sort_by(|&a, &b| all[b].value.total_cmp(&all[a].value).then(a.cmp(&b)));
                for i in order {
                    let missing = goal - have(&all);
                    if missing <= 0.0 {
                        break;
                    }
                    let target = all[i].lower_bound + missing;
                    all[i] = self.segment_integral_with(i, Some(target))?;
                }
            }
        }
        Ok(all)
    }

    pub fn functional(&self, mode: Mode, n: usize) -> Result<ShadowFunctionalResult> {
        Ok(assemble(mode, &self.integrals(n, None)?, n))
    }
}

fn check_horizon(orbit: &PseudoOrbit, n: usize) -> Result<()> {
    if n == 0 || n > orbit.horizon() {
        return Err(Error::InvalidArgument(format!(
            "horizon {n} outside 1..={}",
            orbit.horizon()
        )));
    }
    Ok(())
}

/// `∫_{s_i}^{s_{i+1}} d(φ(h(t), y), φ(t - s_i, x_i)) dt`.
pub fn segment_integral(y: &HybridState, h: &Reparam, orbit: &PseudoOrbit, i: usize) -> Result<SegmentIntegral> {
    Shadower::new(orbit, *y, h.clone())?.segment_integral(i)
}

/// `(1/n) Σ_{i=1}^{n}` of the segment integrals.
pub fn avg_shadow_functional(y: &HybridState, h: &Reparam, orbit: &PseudoOrbit, n: usize) -> Result<ShadowFunctionalResult> {
    check_horizon(orbit, n)?;
    Shadower::new(orbit, *y, h.clone())?.functional(Mode::Average, n)
}

/// `(1/n) Σ_{i=0}^{n}` of the segment integrals.
pub fn asymp_avg_functional(y: &HybridState, h: &Reparam, orbit: &PseudoOrbit, n: usize) -> Result<ShadowFunctionalResult> {
    check_horizon(orbit, n)?;
    Shadower::new(orbit, *y, h.clone())?.functional(Mode::Asymptotic, n)
}

/// Per-segment integrals for `i` in `range`.
pub fn limit_shadow_gaps(
    y: &HybridState,
    h: &Reparam,
    orbit: &PseudoOrbit,
    range: std::ops::RangeInclusive<usize>,
) -> Result<Vec<SegmentIntegral>> {
    let s = Shadower::new(orbit, *y, h.clone())?;
    range.map(|i| s.segment_integral(i)).collect()
}

/// Both functionals from one pass over the segments.
pub fn evaluate_both(
    s: &Shadower<'_>,
    n: usize,
    floor: Option<f64>,
) -> Result<(ShadowFunctionalResult, ShadowFunctionalResult)> {
    check_horizon(s.orbit(), n)?;
    let all = s.integrals(n, floor)?;
    Ok((assemble(Mode::Average, &all, n), assemble(Mode::Asymptotic, &all, n)))
}
