//! Closed-form hybrid flow: a linear saddle in the unit cube plus two
//! constant-time return tubes from the exit faces `x = ±1` back to `S`.

use super::map::{branch_image, Branch};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Tube landings with `|x|` at or below this are placed on the singular leaf.
///
/// Points built as preimages of `L0` reach it only up to rounding, and the
/// saddle amplifies any leftover offset by `e^t` on the way down the stable
/// curtain. Snapping the landing point keeps the flow continuous in time.
pub const LEAF_SNAP_TOL: f64 = 1e-9;

const EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Cube,
    TubePlus,
    TubeMinus,
}

/// A point of the phase space together with the hybrid mode it is in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridState {
    region: Region,
    position: Vec3,
    tube_entry: Option<Vec3>,
    tube_progress: Option<f64>,
}

impl HybridState {
    /// A state inside the linear cube `|x|, |y| <= 1, 0 <= z <= 1`.
    pub fn cube(position: Vec3) -> Result<Self> {
        check_cube(position)?;
        Ok(Self {
            region: Region::Cube,
            position,
            tube_entry: None,
            tube_progress: None,
        })
    }

    /// The point `(x, y, 1)` of the cross-section.
    pub fn on_section(x: f64, y: f64) -> Result<Self> {
        if x.abs() > 0.5 || y.abs() > 0.5 {
            return Err(Error::OutOfDomain(format!("({x}, {y}) is not on S")));
        }
        Self::cube(Vec3::new(x, y, 1.0))
    }

    /// A point on the unstable manifold of the saddle, `x` on the x-axis.
    pub fn on_unstable_axis(x: f64) -> Result<Self> {
        Self::cube(Vec3::new(x, 0.0, 0.0))
    }

    /// A state inside a tube, `progress` in `[0, 1)` of the traversal that
    /// started at `entry` on the exit face.
    pub fn in_tube(entry: Vec3, progress: f64, params: &ModelParams) -> Result<Self> {
        if !(0.0..1.0).contains(&progress) {
            return Err(Error::OutOfDomain(format!("tube progress {progress} not in [0, 1)")));
        }
        let path = TubePath::new(entry, params)?;
        Ok(Self {
            region: path.region(),
            position: path.point_at(progress),
            tube_entry: Some(entry),
            tube_progress: Some(progress),
        })
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    pub fn tube_entry(&self) -> Option<Vec3> {
        self.tube_entry
    }

    pub fn tube_progress(&self) -> Option<f64> {
        self.tube_progress
    }

    /// True for cube states lying on `S`.
    pub fn is_on_section(&self) -> bool {
        self.region == Region::Cube
            && self.position.z == 1.0
            && self.position.x.abs() <= 0.5
            && self.position.y.abs() <= 0.5
    }

    pub fn dist(&self, other: &HybridState) -> f64 {
        self.position.dist(other.position)
    }
}

fn check_cube(p: Vec3) -> Result<()> {
    let ok = p.is_finite()
        && p.x.abs() <= 1.0
        && p.y.abs() <= 1.0
        && (0.0..=1.0).contains(&p.z);
    if ok {
        Ok(())
    } else {
        Err(Error::OutOfDomain(format!("{p:?} is outside the cube")))
    }
}

/// Piecewise-linear path of one tube traversal, walked at constant speed.
///
/// Waypoints: exit point on `Σ±`, out to `|x| = 3`, up to `z = 3`, across to
/// above the landing point, down onto `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TubePath {
    branch: Branch,
    waypoints: [Vec3; 5],
    cumulative: [f64; 5],
}

impl TubePath {
    pub const OUTER_X: f64 = 3.0;
    pub const TOP_Z: f64 = 3.0;

    pub fn new(entry: Vec3, params: &ModelParams) -> Result<Self> {
        let branch = if entry.x == 1.0 {
            Branch::Plus
        } else if entry.x == -1.0 {
            Branch::Minus
        } else {
            return Err(Error::OutOfDomain(format!("{entry:?} is not on an exit face")));
        };
        if entry.y.abs() > 1.0 || !(0.0..=1.0).contains(&entry.z) {
            return Err(Error::OutOfDomain(format!("{entry:?} is off the exit face")));
        }
        let (lx, ly) = landing(branch, entry, params);
        if lx.abs() > 0.5 + EDGE_TOL || ly.abs() > 0.5 + EDGE_TOL {
            return Err(Error::OutOfDomain(format!(
                "tube from {entry:?} lands at ({lx}, {ly}) outside S"
            )));
        }
        let sx = branch.sign();
        let waypoints = [
            entry,
            Vec3::new(sx * Self::OUTER_X, entry.y, entry.z),
            Vec3::new(sx * Self::OUTER_X, entry.y, Self::TOP_Z),
            Vec3::new(lx, ly, Self::TOP_Z),
            Vec3::new(lx, ly, 1.0),
        ];
        let mut cumulative = [0.0; 5];
        for i in 1..5 {
            cumulative[i] = cumulative[i - 1] + waypoints[i].dist(waypoints[i - 1]);
        }
        Ok(Self {
            branch,
            waypoints,
            cumulative,
        })
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn region(&self) -> Region {
        match self.branch {
            Branch::Plus => Region::TubePlus,
            Branch::Minus => Region::TubeMinus,
        }
    }

    pub fn waypoints(&self) -> &[Vec3; 5] {
        &self.waypoints
    }

    pub fn length(&self) -> f64 {
        self.cumulative[4]
    }

    pub fn landing_point(&self) -> Vec3 {
        self.waypoints[4]
    }

    /// Point at fraction `progress` of the arc length.
    pub fn point_at(&self, progress: f64) -> Vec3 {
        let s = progress.clamp(0.0, 1.0) * self.length();
        for i in 1..5 {
            if s <= self.cumulative[i] || i == 4 {
                let seg = self.cumulative[i] - self.cumulative[i - 1];
                if seg == 0.0 {
                    return self.waypoints[i];
                }
                let t = ((s - self.cumulative[i - 1]) / seg).clamp(0.0, 1.0);
                return self.waypoints[i - 1].lerp(self.waypoints[i], t);
            }
        }
        self.waypoints[4]
    }
}

/// Landing coordinates on `S` for a tube entered at `entry`.
fn landing(branch: Branch, entry: Vec3, params: &ModelParams) -> (f64, f64) {
    let mut lx = branch_image(branch, entry.z, params);
    if lx.abs() <= LEAF_SNAP_TOL {
        lx = 0.0;
    }
    (lx, params.kappa * entry.y)
}

/// Exit point on `Σ±` of the cube orbit through `p` (`p.x != 0`).
fn cube_exit(p: Vec3, params: &ModelParams) -> Vec3 {
    let ax = p.x.abs();
    if ax == 1.0 {
        return p;
    }
    Vec3::new(
        p.x.signum(),
        p.y * ax.powf(params.s_exp()),
        p.z * ax.powf(params.r()),
    )
}

fn cube_exit_time(p: Vec3, params: &ModelParams) -> f64 {
    if p.x == 0.0 {
        f64::INFINITY
    } else {
        -p.x.abs().ln() / params.lambda1
    }
}

#[derive(Debug, Clone, Copy)]
enum LegKind {
    Cube { start: Vec3, landed: bool },
    Tube { path: TubePath, progress0: f64 },
}

/// One mode segment of an orbit, occupying `[t0, t0 + duration)`.
#[derive(Debug, Clone, Copy)]
struct Leg {
    t0: f64,
    duration: f64,
    kind: LegKind,
}

impl Leg {
    fn end(&self) -> f64 {
        self.t0 + self.duration
    }
}

/// A landing of an orbit on the cross-section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Landing {
    pub time: f64,
    pub point: Vec3,
}

/// Forward orbit of one state, extended leg by leg on demand.
///
/// [`flow`] is defined through this type, so positions read from a cached
/// trajectory agree bitwise with fresh `flow` calls.
#[derive(Debug, Clone)]
pub struct Trajectory {
    params: ModelParams,
    legs: Vec<Leg>,
}

impl Trajectory {
    pub fn new(state: &HybridState, params: &ModelParams) -> Result<Self> {
        let first = match state.region {
            Region::Cube => {
                check_cube(state.position)?;
                Leg {
                    t0: 0.0,
                    duration: cube_exit_time(state.position, params),
                    kind: LegKind::Cube {
                        start: state.position,
                        landed: false,
                    },
                }
            }
            Region::TubePlus | Region::TubeMinus => {
                let entry = state
                    .tube_entry
                    .ok_or_else(|| Error::OutOfDomain("tube state without entry".into()))?;
                let progress0 = state.tube_progress.unwrap_or(0.0);
                Leg {
                    t0: 0.0,
                    duration: (1.0 - progress0) * params.tube_time(),
                    kind: LegKind::Tube {
                        path: TubePath::new(entry, params)?,
                        progress0,
                    },
                }
            }
        };
        Ok(Self {
            params: *params,
            legs: vec![first],
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn push_next(&mut self) -> Result<bool> {
        let last = *self.legs.last().expect("trajectory has a first leg");
        if !last.duration.is_finite() {
            return Ok(false);
        }
        let t0 = last.end();
        let leg = match last.kind {
            LegKind::Cube { start, .. } => {
                let entry = cube_exit(start, &self.params);
                Leg {
                    t0,
                    duration: self.params.tube_time(),
                    kind: LegKind::Tube {
                        path: TubePath::new(entry, &self.params)?,
                        progress0: 0.0,
                    },
                }
            }
            LegKind::Tube { path, .. } => {
                let start = path.landing_point();
                Leg {
                    t0,
                    duration: cube_exit_time(start, &self.params),
                    kind: LegKind::Cube {
                        start,
                        landed: true,
                    },
                }
            }
        };
        self.legs.push(leg);
        Ok(true)
    }

    /// Makes sure legs cover `[0, t]`.
    pub fn extend_to(&mut self, t: f64) -> Result<()> {
        while self.legs.last().is_some_and(|l| l.end() <= t) {
            if !self.push_next()? {
                break;
            }
        }
        Ok(())
    }

    fn leg_index(&self, t: f64, hint: usize) -> usize {
        let mut i = hint.min(self.legs.len() - 1);
        while i > 0 && self.legs[i].t0 > t {
            i -= 1;
        }
        while i + 1 < self.legs.len() && self.legs[i].end() <= t {
            i += 1;
        }
        i
    }

    /// Position at time `t`, for `t` already covered by [`Self::extend_to`].
    ///
    /// `hint` is a leg cursor; monotone sweeps reuse it to avoid searching.
    pub fn position_with_hint(&self, t: f64, hint: &mut usize) -> Vec3 {
        let i = self.leg_index(t, *hint);
        *hint = i;
        leg_position(&self.legs[i], t - self.legs[i].t0, &self.params)
    }

    pub fn position_at(&mut self, t: f64) -> Result<Vec3> {
        check_time(t)?;
        self.extend_to(t)?;
        let mut hint = 0;
        Ok(self.position_with_hint(t, &mut hint))
    }

    pub fn state_at(&mut self, t: f64) -> Result<HybridState> {
        check_time(t)?;
        self.extend_to(t)?;
        let leg = &self.legs[self.leg_index(t, 0)];
        let tau = t - leg.t0;
        Ok(match leg.kind {
            LegKind::Cube { .. } => HybridState {
                region: Region::Cube,
                position: leg_position(leg, tau, &self.params),
                tube_entry: None,
                tube_progress: None,
            },
            LegKind::Tube { path, progress0 } => {
                let progress = progress0 + tau / self.params.tube_time();
                HybridState {
                    region: path.region(),
                    position: path.point_at(progress),
                    tube_entry: Some(path.waypoints[0]),
                    tube_progress: Some(progress),
                }
            }
        })
    }

    /// The `n`-th landing on `S` (1-based), if the orbit gets there.
    pub fn landing(&mut self, n: usize) -> Result<Option<Landing>> {
        let mut seen = 0;
        let mut i = 0;
        loop {
            while i >= self.legs.len() {
                if !self.push_next()? {
                    return Ok(None);
                }
            }
            if let LegKind::Cube {
                start,
                landed: true,
            } = self.legs[i].kind
            {
                seen += 1;
                if seen == n {
                    return Ok(Some(Landing {
                        time: self.legs[i].t0,
                        point: start,
                    }));
                }
            }
            i += 1;
        }
    }

    /// Landings among the legs built so far.
    pub fn cached_landings(&self) -> impl Iterator<Item = Landing> + '_ {
        self.legs.iter().filter_map(|l| match l.kind {
            LegKind::Cube {
                start,
                landed: true,
            } => Some(Landing {
                time: l.t0,
                point: start,
            }),
            _ => None,
        })
    }

    /// All landings with time in `(from, to]`.
    pub fn landings_between(&mut self, from: f64, to: f64) -> Result<Vec<Landing>> {
        self.extend_to(to)?;
        Ok(self
            .legs
            .iter()
            .filter_map(|l| match l.kind {
                LegKind::Cube {
                    start,
                    landed: true,
                } if l.t0 > from && l.t0 <= to => Some(Landing {
                    time: l.t0,
                    point: start,
                }),
                _ => None,
            })
            .collect())
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("flow time {t} must be finite and >= 0")))
    }
}

fn leg_position(leg: &Leg, tau: f64, params: &ModelParams) -> Vec3 {
    match leg.kind {
        LegKind::Cube { start, .. } => Vec3::new(
            start.x * (params.lambda1 * tau).exp(),
            start.y * (params.lambda2 * tau).exp(),
            start.z * (params.lambda3 * tau).exp(),
        ),
        LegKind::Tube { path, progress0 } => path.point_at(progress0 + tau / params.tube_time()),
    }
}

/// `φ(t, state)` for `t >= 0`.
pub fn flow(t: f64, state: &HybridState, params: &ModelParams) -> Result<HybridState> {
    Trajectory::new(state, params)?.state_at(t)
}

/// Time until the orbit next lands on `S`.
pub fn time_to_section(state: &HybridState, params: &ModelParams) -> Result<f64> {
    match state.region {
        Region::Cube => {
            check_cube(state.position)?;
            if state.position.x == 0.0 {
                Err(Error::NeverReturns)
            } else {
                Ok(cube_exit_time(state.position, params) + params.tube_time())
            }
        }
        Region::TubePlus | Region::TubeMinus => {
            let p = state.tube_progress.unwrap_or(0.0);
            Ok((1.0 - p) * params.tube_time())
        }
    }
}

/// `π^n(state)`: the `n`-th landing on `S`.
pub fn first_return(state: &HybridState, params: &ModelParams, n: usize) -> Result<HybridState> {
    if n == 0 {
        return Ok(*state);
    }
    let landing = Trajectory::new(state, params)?
        .landing(n)?
        .ok_or(Error::NeverReturns)?;
    HybridState::cube(landing.point)
}

/// Certified upper bound `V_max` on the speed of the flow.
///
/// Cube speed is largest at a corner. Tube speed is the path length over the
/// tube time; the longest path runs from a corner of the exit face at `z = 0`
/// to the far corner of `S`.
pub fn speed_bound(params: &ModelParams) -> f64 {
    let cube = (params.lambda1.powi(2) + params.lambda2.powi(2) + params.lambda3.powi(2)).sqrt();
    let out = TubePath::OUTER_X - 1.0;
    let up = TubePath::TOP_Z;
    let across = ((TubePath::OUTER_X + 0.5).powi(2) + 1.5f64.powi(2)).sqrt();
    let down = TubePath::TOP_Z - 1.0;
    let tube = (out + up + across + down) / params.tube_time();
    cube.max(tube)
}
