//! Separation witnesses, the escape dichotomy, and a multi-start search for
//! candidates `(y, h)` that beat the shadowing floor.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::model::regions::{classify_region, exit_y_bound, exit_z_bound, RegionTag};
use crate::model::{HybridState, ModelParams};
use crate::pseudo_orbit::PseudoOrbit;
use crate::shadowing::{beta_for, evaluate_both, floor_for, Reparam, Shadower};

pub const THREADS_ENV: &str = "LORENZ_SHADOW_THREADS";
pub const DEFAULT_LOCAL_EVALS: usize = 12;
pub const DEFAULT_FLOOR_TOL: f64 = 1e-6;
/// Candidates exactly on the stable curtain are pushed off it by this much.
pub const CURTAIN_NUDGE: f64 = 1e-12;
/// Crossings this close to a block end belong to the next block.
const CROSSING_SLACK: f64 = 1e-9;

/// A time where the candidate is at least `2 gamma` from the pseudo-orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub k: i64,
    /// Segment offset within the block; 4 is the first segment of block `k + 1`.
    pub u: usize,
    pub t: f64,
    pub distance: f64,
    /// Smallest distance over `[max(t - beta, s_n), t + beta]`.
    pub persistence: f64,
    /// Whether the window was cut at the segment start.
    pub clipped: bool,
}

impl Witness {
    pub fn segment(&self) -> usize {
        (4 * self.k) as usize + self.u
    }
}

/// Piece of `S` hit at a crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Piece {
    Plus,
    Minus,
    Singular,
}

impl Piece {
    fn of(p: Vec3, params: &ModelParams) -> Piece {
        match classify_region(p, params) {
            RegionTag::SPlus => Piece::Plus,
            RegionTag::SMinus => Piece::Minus,
            _ => Piece::Singular,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingSignature {
    /// `(t, piece)` for crossings of the reparametrized candidate, `t` in pseudo-orbit time.
    pub candidate: Vec<(f64, Piece)>,
    pub pseudo: Vec<(f64, Piece)>,
    /// First index where the two piece sequences differ (including length).
    pub first_disagreement: Option<usize>,
    /// Largest sampled distance over the block.
    pub max_distance: f64,
    pub within_3gamma: bool,
}

fn check_block(orbit: &PseudoOrbit, k: i64, extra: i64) -> Result<()> {
    let (_, hi) = orbit.index_range();
    if k < 0 || 4 * k + extra > hi {
        return Err(Error::InvalidArgument(format!("block {k} outside the forward window")));
    }
    Ok(())
}

/// Sampled maximum of the distance over `[a, b)` inside segment `n`.
fn sampled_max(s: &Shadower<'_>, n: usize, a: f64, b: f64, step: f64) -> f64 {
    let (mut hy, mut hx) = (0, 0);
    let mut t = a;
    let mut best: f64 = 0.0;
    while t < b {
        best = best.max(s.distance_in(n, t, &mut hy, &mut hx));
        t += step;
    }
    best
}

/// Compares the pieces of `S` visited by candidate and pseudo-orbit in block `k`.
pub fn crossing_signature(s: &Shadower<'_>, k: i64) -> Result<CrossingSignature> {
    let orbit = s.orbit();
    check_block(orbit, k, 3)?;
    let p = orbit.params();
    let a = orbit.s(4 * k).expect("in window");
    let b = orbit.s(4 * k + 4).expect("in window");

    let mut candidate = Vec::new();
    if a == 0.0 && s.y().is_on_section() {
        candidate.push((0.0, Piece::of(s.y().position(), p)));
    }
    for l in s.trajectory().cached_landings() {
        let t = s.h().inverse(l.time);
        if t >= b - CROSSING_SLACK {
            break;
        }
        if t >= a {
            candidate.push((t, Piece::of(l.point, p)));
        }
    }

    let mut pseudo = Vec::new();
    let mut max_distance: f64 = 0.0;
    for n in 4 * k..4 * k + 4 {
        let x = orbit.point(n).expect("in window");
        let sn = orbit.s(n).expect("in window");
        let tn = orbit.time(n).expect("in window");
        if x.is_on_section() {
            pseudo.push((sn, Piece::of(x.position(), p)));
        }
        let seg = orbit.segment(n as usize).expect("forward segment");
        for l in seg.cached_landings() {
            if l.time < tn - CROSSING_SLACK {
                pseudo.push((sn + l.time, Piece::of(l.point, p)));
            }
        }
        max_distance = max_distance.max(sampled_max(s, n as usize, sn, sn + tn, 0.01));
    }
    let first_disagreement = candidate
        .iter()
        .zip(&pseudo)
        .position(|(c, q)| c.1 != q.1)
        .or((candidate.len() != pseudo.len()).then(|| candidate.len().min(pseudo.len())));
    Ok(CrossingSignature {
        candidate,
        pseudo,
        first_disagreement,
        max_distance,
        within_3gamma: max_distance < 3.0 * p.gamma,
    })
}

/// First `t` in the truncated segments of block `k` with distance `>= 2 gamma`.
///
/// Scans `[s_{4k+u}, s_{4k+u+1} - beta)` for `u = 0..=4` with step `beta / 2`,
/// jumping further where the Lipschitz bound rules out reaching `2 gamma`.
pub fn find_witness_in(s: &Shadower<'_>, k: i64) -> Result<Witness> {
    let orbit = s.orbit();
    check_block(orbit, k, 4)?;
    let p = orbit.params();
    let beta = beta_for(p);
    let target = 2.0 * p.gamma;
    let lip = s.lipschitz();
    for u in 0..=4usize {
        let n = 4 * k as usize + u;
        let s0 = orbit.s(n as i64).expect("in window");
        let end = orbit.s(n as i64 + 1).expect("in window") - beta;
        let (mut hy, mut hx) = (0, 0);
        let mut t = s0;
        while t < end {
            let d = s.distance_in(n, t, &mut hy, &mut hx);
            if d >= target {
                let lo = (t - beta).max(s0);
                let clipped = t - beta < s0;
                let persistence = sampled_min(s, n, lo, t + beta, beta / 16.0);
                return Ok(Witness {
                    k,
                    u,
                    t,
                    distance: d,
                    persistence,
                    clipped,
                });
            }
            t += (beta / 2.0).max((target - d) / lip);
        }
    }
    Err(Error::NoWitnessFound(k))
}

fn sampled_min(s: &Shadower<'_>, n: usize, a: f64, b: f64, step: f64) -> f64 {
    let (mut hy, mut hx) = (0, 0);
    let mut best = f64::INFINITY;
    let mut t = a;
    loop {
        let tt = t.min(b);
        best = best.min(s.distance_in(n, tt, &mut hy, &mut hx));
        if tt >= b {
            break;
        }
        t += step;
    }
    best
}

pub fn find_witness(y: &HybridState, h: &Reparam, orbit: &PseudoOrbit, k: i64) -> Result<Witness> {
    find_witness_in(&Shadower::new(orbit, *y, h.clone())?, k)
}

/// Recomputes a witness distance from scratch; returns the absolute discrepancy.
pub fn recheck_witness(w: &Witness, y: &HybridState, h: &Reparam, orbit: &PseudoOrbit) -> Result<f64> {
    let a = crate::model::flow(h.eval(w.t), y, orbit.params())?;
    let b = orbit.pseudo_state_at(w.t)?;
    Ok((a.dist(&b) - w.distance).abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DichotomyPiece {
    pub u: usize,
    /// Distance stayed below `2 gamma` on `[s_n, s_{n+1} - beta)`.
    pub hypothesis: bool,
    /// Distance stayed below `3 gamma` on `[s_n, s_{n+1})`; only checked under the hypothesis.
    pub conclusion: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DichotomyReport {
    pub k: i64,
    pub pieces: Vec<DichotomyPiece>,
}

/// Scans `[a, b)` for the first sample with distance `>= level`; samples are
/// at most `step` apart unless the Lipschitz bound allows a longer jump.
fn first_at_least(s: &Shadower<'_>, n: usize, a: f64, b: f64, level: f64, step: f64) -> Option<f64> {
    let (mut hy, mut hx) = (0, 0);
    let lip = s.lipschitz();
    let mut t = a;
    while t < b {
        let d = s.distance_in(n, t, &mut hy, &mut hx);
        if d >= level {
            return Some(t);
        }
        t += step.max((level - d) / lip);
    }
    None
}

/// Checks that staying within `2 gamma` on each truncated segment of block
/// `k` forces staying within `3 gamma` on the full segment.
pub fn check_escape_dichotomy_in(s: &Shadower<'_>, k: i64) -> Result<DichotomyReport> {
    let orbit = s.orbit();
    check_block(orbit, k, 3)?;
    let p = orbit.params();
    let beta = beta_for(p);
    let mut pieces = Vec::with_capacity(4);
    for u in 0..4usize {
        let n = 4 * k as usize + u;
        let s0 = orbit.s(n as i64).expect("in window");
        let s1 = orbit.s(n as i64 + 1).expect("in window");
        let cut = s1 - beta;
        let hypothesis = first_at_least(s, n, s0, cut, 2.0 * p.gamma, beta / 4.0).is_none();
        let mut conclusion = true;
        if hypothesis {
            if let Some(t) = first_at_least(s, n, cut.max(s0), s1, 3.0 * p.gamma, beta / 4.0) {
                return Err(Error::DichotomyViolated(t));
            }
        } else {
            conclusion = first_at_least(s, n, s0, s1, 3.0 * p.gamma, 0.01).is_none();
        }
        pieces.push(DichotomyPiece {
            u,
            hypothesis,
            conclusion,
        });
    }
    Ok(DichotomyReport { k, pieces })
}

pub fn check_escape_dichotomy(y: &HybridState, h: &Reparam, orbit: &PseudoOrbit, k: i64) -> Result<DichotomyReport> {
    check_escape_dichotomy_in(&Shadower::new(orbit, *y, h.clone())?, k)
}

/// Where a candidate starting point lives; all variants stay in the trapping region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Seat {
    Section { x: f64, y: f64 },
    Cube { x: f64, y: f64, z: f64 },
    Tube { plus: bool, y: f64, z: f64, progress: f64 },
}

impl Seat {
    pub fn state(&self, p: &ModelParams) -> Result<HybridState> {
        let nudge = |x: f64| if x == 0.0 { CURTAIN_NUDGE } else { x };
        match *self {
            Seat::Section { x, y } => HybridState::on_section(nudge(x), y),
            Seat::Cube { x, y, z } => HybridState::cube(Vec3::new(nudge(x), y, z)),
            Seat::Tube { plus, y, z, progress } => {
                let sx = if plus { 1.0 } else { -1.0 };
                HybridState::in_tube(Vec3::new(sx, y, z), progress, p)
            }
        }
    }

    fn coords(&self) -> Vec<f64> {
        match *self {
            Seat::Section { x, y } => vec![x, y],
            Seat::Cube { x, y, z } => vec![x, y, z],
            Seat::Tube { y, z, progress, .. } => vec![y, z, progress],
        }
    }

    fn bounds(&self, p: &ModelParams) -> Vec<(f64, f64)> {
        match self {
            Seat::Section { .. } => vec![(-0.5, 0.5), (-0.5, 0.5)],
            Seat::Cube { .. } => vec![(-0.5, 0.5), (-0.5, 0.5), (0.0, 1.0)],
            Seat::Tube { .. } => vec![
                (-exit_y_bound(p), exit_y_bound(p)),
                (0.0, exit_z_bound(p)),
                (0.0, 1.0 - 1e-9),
            ],
        }
    }

    fn with_coords(&self, c: &[f64]) -> Seat {
        match *self {
            Seat::Section { .. } => Seat::Section { x: c[0], y: c[1] },
            Seat::Cube { .. } => Seat::Cube {
                x: c[0],
                y: c[1],
                z: c[2],
            },
            Seat::Tube { plus, .. } => Seat::Tube {
                plus,
                y: c[0],
                z: c[1],
                progress: c[2],
            },
        }
    }
}

impl fmt::Display for Seat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Seat::Section { x, y } => write!(f, "S({x:.9};{y:.9})"),
            Seat::Cube { x, y, z } => write!(f, "cube({x:.9};{y:.9};{z:.9})"),
            Seat::Tube { plus, y, z, progress } => {
                let side = if plus { '+' } else { '-' };
                write!(f, "tube{side}({y:.9};{z:.9};{progress:.9})")
            }
        }
    }
}

/// A point `y` and reparametrization `h` under test.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub seat: Seat,
    pub y: HybridState,
    pub h: Reparam,
}

impl Candidate {
    pub fn new(seat: Seat, h: Reparam, p: &ModelParams) -> Result<Self> {
        Ok(Self {
            seat,
            y: seat.state(p)?,
            h,
        })
    }
}

/// One functional evaluation in the search log.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub eval_id: usize,
    pub start_id: usize,
    pub value: f64,
    pub error_bound: f64,
    pub lower_bound: f64,
    pub asymp_value: f64,
    pub asymp_error_bound: f64,
    pub asymp_lower_bound: f64,
    pub y_descr: String,
    pub h_descr: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Falsified,
    Undetermined,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Falsified => "FALSIFIED",
            Verdict::Undetermined => "UNDETERMINED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdicts {
    pub asp: Verdict,
    pub lsp: Verdict,
    pub aasp: Verdict,
}

impl Verdicts {
    pub const UNDETERMINED: Verdicts = Verdicts {
        asp: Verdict::Undetermined,
        lsp: Verdict::Undetermined,
        aasp: Verdict::Undetermined,
    };

    pub fn all_falsified(&self) -> bool {
        [self.asp, self.lsp, self.aasp].iter().all(|v| *v == Verdict::Falsified)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub budget: usize,
    pub seed: u64,
    pub local_evals: usize,
    pub floor_tol: f64,
    /// Functional horizon; defaults to the orbit's.
    pub horizon: Option<usize>,
    /// Witness blocks `0..=witness_last`; defaults to `K - 2`.
    pub witness_last: Option<i64>,
    pub threads: Option<usize>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            budget: 200,
            seed: 42,
            local_evals: DEFAULT_LOCAL_EVALS,
            floor_tol: DEFAULT_FLOOR_TOL,
            horizon: None,
            witness_last: None,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowReport {
    pub delta_rep: f64,
    pub horizon: usize,
    pub beta: f64,
    pub floor: f64,
    pub best_eval_id: Option<usize>,
    pub best_value: f64,
    pub best_asymp_value: f64,
    pub best_candidate: Option<Candidate>,
    pub evaluations: usize,
    pub log: Vec<EvalRecord>,
    pub witnesses: Vec<Witness>,
    pub witness_failures: Vec<i64>,
    /// Each witness segment's certified integral reaches `2 beta gamma`
    /// (`beta gamma` when the window is clipped).
    pub witness_integrals_ok: bool,
    pub verdicts: Verdicts,
}

/// Thread count from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|n| *n > 0)
}

#[derive(Debug, Clone)]
struct Space {
    seat: Seat,
    slopes: Vec<f64>,
}

fn random_seat(stratum: usize, rng: &mut ChaCha8Rng, p: &ModelParams) -> Seat {
    match stratum {
        0 => Seat::Section {
            x: rng.gen_range(-0.5..0.5),
            y: rng.gen_range(-0.5..0.5),
        },
        1 => Seat::Cube {
            x: rng.gen_range(-0.5..0.5),
            y: rng.gen_range(-0.5..0.5),
            z: rng.gen_range(0.0..1.0),
        },
        _ => Seat::Tube {
            plus: rng.gen_bool(0.5),
            y: rng.gen_range(-exit_y_bound(p)..exit_y_bound(p)),
            z: rng.gen_range(0.0..exit_z_bound(p)),
            progress: rng.gen_range(0.0..1.0),
        },
    }
}

struct Searcher<'a> {
    orbit: &'a PseudoOrbit,
    n: usize,
    floor_goal: f64,
    delta: f64,
    slope_count: usize,
}

impl Searcher<'_> {
    fn reparam(&self, slopes: &[f64]) -> Result<Reparam> {
        if self.delta == 0.0 || slopes.iter().all(|&s| s == 1.0) {
            Ok(Reparam::identity())
        } else {
            Reparam::on_grid(self.orbit, slopes.to_vec())
        }
    }

    fn evaluate(&self, start_id: usize, space: &Space) -> Result<EvalRecord> {
        let p = self.orbit.params();
        let h = self.reparam(&space.slopes)?;
        let y = space.seat.state(p)?;
        let s = Shadower::new(self.orbit, y, h)?;
        let (avg, asymp) = evaluate_both(&s, self.n, Some(self.floor_goal))?;
        Ok(EvalRecord {
            eval_id: 0,
            start_id,
            value: avg.value,
            error_bound: avg.error_bound,
            lower_bound: avg.lower_bound,
            asymp_value: asymp.value,
            asymp_error_bound: asymp.error_bound,
            asymp_lower_bound: asymp.lower_bound,
            y_descr: space.seat.to_string(),
            h_descr: s.h().describe(),
        })
    }

    fn initial(&self, start_id: usize, rng: &mut ChaCha8Rng) -> Space {
        let p = self.orbit.params();
        if start_id == 0 {
            let x0 = self.orbit.point(0).expect("x_0").position();
            return Space {
                seat: Seat::Cube {
                    x: x0.x,
                    y: x0.y,
                    z: x0.z,
                },
                slopes: vec![1.0; self.slope_count],
            };
        }
        let seat = random_seat((start_id - 1) % 3, rng, p);
        let slopes = if self.delta > 0.0 && rng.gen_bool(0.5) {
            (0..self.slope_count)
                .map(|_| rng.gen_range(1.0 - self.delta..=1.0 + self.delta))
                .collect()
        } else {
            vec![1.0; self.slope_count]
        };
        Space { seat, slopes }
    }

    /// One start: evaluate the initial point, then golden-section line searches
    /// over single coordinates until `local_evals` more evaluations are spent.
    fn run_start(&self, start_id: usize, seed: u64, local_evals: usize) -> Result<Vec<(EvalRecord, Space)>> {
        let p = self.orbit.params();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(start_id as u64);
        let mut space = self.initial(start_id, &mut rng);
        let mut log = vec![(self.evaluate(start_id, &space)?, space.clone())];
        let mut best = log[0].0.value;

        let seat_bounds = space.seat.bounds(p);
        let dims = seat_bounds.len() + if self.delta > 0.0 { self.slope_count } else { 0 };
        let bound = |c: usize| -> (f64, f64) {
            if c < seat_bounds.len() {
                seat_bounds[c]
            } else {
                (1.0 - self.delta, 1.0 + self.delta)
            }
        };
        let get = |sp: &Space, c: usize| -> f64 {
            if c < seat_bounds.len() {
                sp.seat.coords()[c]
            } else {
                sp.slopes[c - seat_bounds.len()]
            }
        };
        let set = |sp: &Space, c: usize, v: f64| -> Space {
            let mut slopes = sp.slopes.clone();
            let mut coords = sp.seat.coords();
            if c < coords.len() {
                coords[c] = v;
            } else {
                slopes[c - coords.len()] = v;
            }
            Space {
                seat: sp.seat.with_coords(&coords),
                slopes,
            }
        };
        let mut width: Vec<f64> = (0..dims).map(|c| (bound(c).1 - bound(c).0) / 8.0).collect();
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut used = 0;
        while used < local_evals && dims > 0 {
            let c = rng.gen_range(0..dims);
            let (lo_b, hi_b) = bound(c);
            let v = get(&space, c);
            let (mut a, mut b) = ((v - width[c]).max(lo_b), (v + width[c]).min(hi_b));
            let mut improved = false;
            // two interior probes, then one more after shrinking the bracket
            let mut probes = vec![b - inv_phi * (b - a), a + inv_phi * (b - a)];
            let mut vals = Vec::new();
            while let Some(x) = probes.pop() {
                if used >= local_evals {
                    break;
                }
                let trial = set(&space, c, x);
                let rec = self.evaluate(start_id, &trial)?;
                used += 1;
                vals.push((x, rec.value));
                let value = rec.value;
                log.push((rec, trial.clone()));
                if value < best {
                    best = value;
                    space = trial;
                    improved = true;
                }
                if vals.len() == 2 {
                    let (x1, f1) = vals[0];
                    let (x2, f2) = vals[1];
                    let (l, r) = (x1.min(x2), x1.max(x2));
                    let fl = if x1 < x2 { f1 } else { f2 };
                    let fr = if x1 < x2 { f2 } else { f1 };
                    if fl <= fr {
                        b = r;
                        probes.push(a + inv_phi * (b - a) * inv_phi);
                    } else {
                        a = l;
                        probes.push(b - inv_phi * (b - a) * inv_phi);
                    }
                }
            }
            if !improved {
                width[c] /= 2.0;
            }
        }
        Ok(log)
    }
}

/// Multi-start derivative-free minimization of the average functional over
/// candidates `(y, h)` with `h` in `Rep(delta_rep)`.
pub fn minimize_functional(orbit: &PseudoOrbit, delta_rep: f64, opts: &SearchOptions) -> Result<ShadowReport> {
    if !(delta_rep >= 0.0) {
        return Err(Error::InvalidArgument("delta_rep must be >= 0".into()));
    }
    let orbit = orbit.with_delta_rep(delta_rep);
    let p = *orbit.params();
    let n = opts.horizon.unwrap_or(orbit.horizon());
    let floor = floor_for(&p);
    let (_, hi) = orbit.index_range();
    let searcher = Searcher {
        orbit: &orbit,
        n,
        floor_goal: floor * (1.0 - opts.floor_tol),
        delta: delta_rep,
        slope_count: hi as usize + 1,
    };

    let run = || -> Result<Vec<Vec<(EvalRecord, Space)>>> {
        (0..opts.budget)
            .into_par_iter()
            .map(|j| searcher.run_start(j, opts.seed, opts.local_evals))
            .collect()
    };
    let per_start = match opts.threads.or_else(threads_from_env) {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    let (mut log, spaces): (Vec<EvalRecord>, Vec<Space>) = per_start.into_iter().flatten().unzip();
    for (i, r) in log.iter_mut().enumerate() {
        r.eval_id = i;
    }

    let mut report = ShadowReport {
        delta_rep,
        horizon: n,
        beta: beta_for(&p),
        floor,
        best_eval_id: None,
        best_value: f64::INFINITY,
        best_asymp_value: f64::INFINITY,
        best_candidate: None,
        evaluations: log.len(),
        log: Vec::new(),
        witnesses: Vec::new(),
        witness_failures: Vec::new(),
        witness_integrals_ok: false,
        verdicts: Verdicts::UNDETERMINED,
    };
    let Some(best) = log
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value).then(a.eval_id.cmp(&b.eval_id)))
        .cloned()
    else {
        report.log = log;
        return Ok(report);
    };
    let space = &spaces[best.eval_id];
    let candidate = Candidate::new(space.seat, searcher.reparam(&space.slopes)?, &p)?;
    report.best_eval_id = Some(best.eval_id);
    report.best_value = best.value;
    report.best_asymp_value = best.asymp_value;
    report.log = log;

    let k_max = orbit.k_max().unwrap_or(1) as i64;
    let last = opts.witness_last.unwrap_or(k_max - 2).min(k_max - 1);
    let s = Shadower::new(&orbit, candidate.y, candidate.h.clone())?;
    let mut integrals_ok = true;
    for k in 0..=last {
        match find_witness_in(&s, k) {
            Ok(w) => {
                let need = if w.clipped { 1.0 } else { 2.0 } * report.beta * p.gamma;
                let seg = s.segment_integral_with(w.segment(), Some(need))?;
                integrals_ok &= seg.lower_bound >= need;
                report.witnesses.push(w);
            }
            Err(Error::NoWitnessFound(k)) => report.witness_failures.push(k),
            Err(e) => return Err(e),
        }
    }
    report.witness_integrals_ok = integrals_ok && !report.witnesses.is_empty();
    report.best_candidate = Some(candidate);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloorVerdict {
    pub floor: f64,
    pub tol: f64,
    /// Smallest certified lower bound of the average functional over the log.
    pub min_lower: f64,
    pub min_asymp_lower: f64,
    /// Smallest `value - error_bound` over the log.
    pub min_value_minus_error: f64,
    pub passed: bool,
    pub verdicts: Verdicts,
}

/// Compares every evaluated candidate against `beta gamma / 5`.
///
/// A candidate whose estimate plus error bound still lies below the floor
/// contradicts the theory and is returned as [`Error::FloorBreached`].
pub fn verify_floor(report: &ShadowReport, tol: f64) -> Result<FloorVerdict> {
    let goal = report.floor * (1.0 - tol);
    let mut v = FloorVerdict {
        floor: report.floor,
        tol,
        min_lower: f64::INFINITY,
        min_asymp_lower: f64::INFINITY,
        min_value_minus_error: f64::INFINITY,
        passed: false,
        verdicts: Verdicts::UNDETERMINED,
    };
    for r in &report.log {
        for (value, error) in [(r.value, r.error_bound), (r.asymp_value, r.asymp_error_bound)] {
            if value + error < goal {
                return Err(Error::FloorBreached {
                    eval_id: r.eval_id,
                    value,
                    error,
                    floor: report.floor,
                });
            }
        }
        v.min_lower = v.min_lower.min(r.lower_bound);
        v.min_asymp_lower = v.min_asymp_lower.min(r.asymp_lower_bound);
        v.min_value_minus_error = v
            .min_value_minus_error
            .min(r.value - r.error_bound)
            .min(r.asymp_value - r.asymp_error_bound);
    }
    if report.log.is_empty() {
        return Ok(v);
    }
    let witnesses_ok = report.witness_failures.is_empty()
        && !report.witnesses.is_empty()
        && report.witnesses.iter().all(|w| {
            w.distance >= 2.0 * report.floor_gamma() && w.persistence >= report.floor_gamma()
        });
    let avg_ok = v.min_lower >= goal;
    let asymp_ok = v.min_asymp_lower >= goal;
    v.passed = avg_ok && asymp_ok;
    let pick = |ok: bool| if ok { Verdict::Falsified } else { Verdict::Undetermined };
    v.verdicts = Verdicts {
        asp: pick(avg_ok && witnesses_ok),
        lsp: pick(witnesses_ok && report.witness_integrals_ok),
        aasp: pick(asymp_ok && witnesses_ok),
    };
    Ok(v)
}

impl ShadowReport {
    /// `gamma`, recovered from `floor = beta gamma / 5`.
    fn floor_gamma(&self) -> f64 {
        5.0 * self.floor / self.beta
    }
}

/// Functional of a true orbit shadowing itself; should vanish.
pub fn positive_control(params: &ModelParams, segments: usize) -> Result<f64> {
    let start = HybridState::on_section(0.2137, 0.1)?;
    let orbit = PseudoOrbit::true_orbit(&start, segments + 1, params)?;
    let s = Shadower::new(&orbit, start, Reparam::identity())?;
    let (avg, _) = evaluate_both(&s, segments, None)?;
    Ok(avg.value)
}
