//! θ-psh envelopes by Gauss–Seidel sweeps over directional convexity constraints.
//!
//! A grid function `u` is directionally θ-convex when for every node `x` and
//! every axis or diagonal direction `e` with step `s`,
//! `u(x) <= ½(u(x+e) + u(x-e) + sᵀG(x)s)`. In one dimension this is exactly
//! `G + D²u >= 0`.

use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::geometry::BackgroundForm;
use crate::ma::ma;
use crate::qpsh::{stencil_closure, QPshFunction};
use crate::scalar::{ordered_sum, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EnvelopeStatus {
    Converged,
    /// Iterates drift to `-∞`: no θ-psh function lies below the obstacle.
    Infeasible,
    /// The obstacle imposes no upper bound.
    Unbounded,
    /// Sweep budget exhausted before convergence.
    MaxSweeps,
}

#[derive(Clone, Debug)]
pub struct EnvelopeResult<T> {
    pub env: QPshFunction<T>,
    pub status: EnvelopeStatus,
    pub sweeps: usize,
    pub final_update: T,
    /// `(sweep, max update)`; every sweep up to 100, then every 100th, plus the last.
    pub trace: Vec<(usize, f64)>,
}

impl<T: Scalar> EnvelopeResult<T> {
    pub fn is_converged(&self) -> bool {
        self.status == EnvelopeStatus::Converged
    }
}

/// Per-node constraint data: the two neighbors and the cost `sᵀG(x)s` of each direction.
struct Constraints<T> {
    nd: usize,
    nb: Vec<[usize; 2]>,
    cost: Vec<T>,
}

impl<T: Scalar> Constraints<T> {
    fn new(form: &BackgroundForm<T>) -> Self {
        let grid = form.grid();
        let dirs = grid.directions();
        let nd = dirs.len();
        let mut nb = Vec::with_capacity(grid.len() * nd);
        let mut cost = Vec::with_capacity(grid.len() * nd);
        for x in 0..grid.len() {
            let g = form.at(x);
            for &e in &dirs {
                nb.push(grid.direction_neighbors(x, e));
                let s = grid.direction_step::<T>(e);
                cost.push(g.quad(&s[..grid.dim()]));
            }
        }
        Self { nd, nb, cost }
    }

    /// `min_e ½(u(x+e) + u(x-e) + c_e)` over directions avoiding poles.
    #[inline]
    fn bound(&self, u: &[T], x: usize) -> T {
        let half = T::of(0.5);
        let mut best = T::infinity();
        for k in x * self.nd..(x + 1) * self.nd {
            let [a, b] = self.nb[k];
            let (ua, ub) = (u[a], u[b]);
            if ua == T::neg_infinity() || ub == T::neg_infinity() {
                continue;
            }
            best = best.min(half * (ua + ub + self.cost[k]));
        }
        best
    }
}

/// Per node `min_e ½(u(x+e) + u(x-e) + sᵀGs) - u(x)`; `None` at poles and where
/// every direction touches a pole.
pub fn directional_slack<T: Scalar>(
    form: &BackgroundForm<T>,
    u: &QPshFunction<T>,
) -> Result<Vec<Option<T>>> {
    if form.grid() != u.grid() {
        return Err(Error::DimensionMismatch("form and function on different grids".into()));
    }
    let c = Constraints::new(form);
    let vals = u.values();
    Ok((0..vals.len())
        .map(|x| {
            if u.is_pole(x) {
                return None;
            }
            let b = c.bound(vals, x);
            b.is_finite().then(|| b - vals[x])
        })
        .collect())
}

/// Largest directionally θ-convex `u <= f`. `f` may contain `±∞`; `-∞` nodes
/// become poles of the result.
pub fn envelope<T: Scalar>(
    form: &BackgroundForm<T>,
    f: &[T],
    tol: &Tolerances,
) -> Result<EnvelopeResult<T>> {
    let grid = form.grid();
    if f.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "obstacle has {} values, grid has {} nodes",
            f.len(),
            grid.len()
        )));
    }
    if f.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("obstacle contains NaN".into()));
    }
    if f.iter().all(|&v| v == T::neg_infinity()) {
        return Err(Error::Precondition("obstacle is identically -inf".into()));
    }
    let finite: Vec<T> = f.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        // Only +∞ and poles: decide between "no admissible function" and
        // "admissible functions of every height".
        let reduced: Vec<T> = f
            .iter()
            .map(|&v| if v == T::neg_infinity() { v } else { T::zero() })
            .collect();
        let mut r = envelope(form, &reduced, tol)?;
        if r.status != EnvelopeStatus::Infeasible {
            r.status = EnvelopeStatus::Unbounded;
        }
        return Ok(r);
    }
    let fmax = finite.iter().copied().fold(T::neg_infinity(), T::max);
    let fmin = finite.iter().copied().fold(T::infinity(), T::min);
    let gnorm = form.sup_norm();
    let d = T::of(grid.dim() as f64);
    let cap = fmax + d * (T::one() + gnorm);
    let floor = fmin - (fmax - fmin) - T::of(100.0) * d * (T::one() + gnorm);

    let cons = Constraints::new(form);
    let n = grid.len();
    let mut u: Vec<T> = f
        .iter()
        .map(|&v| if v == T::infinity() { cap } else { v })
        .collect();
    let live: Vec<usize> = (0..n).filter(|&x| f[x] != T::neg_infinity()).collect();
    let stop = T::of(tol.envelope_update);

    let mut trace = Vec::new();
    let mut prev_dec: Vec<T> = vec![T::zero(); n];
    let mut dec: Vec<T> = vec![T::zero(); n];
    let mut drift_run = 0usize;
    let mut status = EnvelopeStatus::MaxSweeps;
    let mut sweeps = 0usize;
    let mut last_update = T::infinity();
    let mut before = u.clone();
    let mut noise = T::zero();
    let mut polish_last = T::infinity();
    let mut polish_end = usize::MAX;

    while sweeps < tol.envelope_max_sweeps || status == EnvelopeStatus::Converged {
        before.copy_from_slice(&u);
        sweeps += 1;
        for &x in &live {
            let b = cons.bound(&u, x);
            let cand = f[x].min(b);
            if cand.is_finite() {
                u[x] = cand;
            }
        }
        let mut upd = T::zero();
        let mut dmin = T::infinity();
        let mut dmax = T::zero();
        let mut lowest = T::infinity();
        for &x in &live {
            let dx = before[x] - u[x];
            dec[x] = dx;
            upd = upd.max(dx.abs());
            dmin = dmin.min(dx);
            dmax = dmax.max(dx);
            lowest = lowest.min(u[x]);
        }
        last_update = upd;
        if sweeps <= 100 || sweeps.is_multiple_of(100) {
            trace.push((sweeps, upd.as_f64()));
        }
        if status == EnvelopeStatus::Converged {
            // Polishing: keep sweeping while the update still shrinks above round-off.
            if upd <= noise || upd >= polish_last || sweeps >= polish_end {
                u.copy_from_slice(&before);
                break;
            }
            polish_last = upd;
            continue;
        }
        if upd < stop {
            status = EnvelopeStatus::Converged;
            let top = live.iter().fold(T::zero(), |m, &x| m.max(u[x].abs()));
            noise = T::of(1e-15) * (T::one() + top + gnorm * T::of(grid.min_spacing().powi(2)));
            if upd <= noise || sweeps == 1 {
                u.copy_from_slice(&before);
                break;
            }
            polish_last = upd;
            polish_end = sweeps.saturating_mul(20).max(sweeps + 1000).min(tol.envelope_max_sweeps);
            continue;
        }
        if lowest < floor {
            status = EnvelopeStatus::Infeasible;
            break;
        }
        let steady = dmin > T::zero()
            && live
                .iter()
                .all(|&x| (dec[x] - prev_dec[x]).abs() <= T::of(1e-6) * dmax);
        drift_run = if steady { drift_run + 1 } else { 0 };
        if drift_run >= 25 {
            status = EnvelopeStatus::Infeasible;
            break;
        }
        std::mem::swap(&mut prev_dec, &mut dec);
    }
    if trace.last().map(|t| t.0) != Some(sweeps) {
        trace.push((sweeps, last_update.as_f64()));
    }
    Ok(EnvelopeResult {
        env: QPshFunction::new(grid, u)?,
        status,
        sweeps,
        final_update: last_update,
        trace,
    })
}

/// The minimal-singularity potential `V_θ = env(0)`.
pub fn v_theta<T: Scalar>(form: &BackgroundForm<T>, tol: &Tolerances) -> Result<EnvelopeResult<T>> {
    envelope(form, &vec![T::zero(); form.grid().len()], tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ContactReport<T> {
    /// Signed mass of `ma(F, env)` on nodes whose whole stencil avoids the contact set.
    pub offside_mass: T,
    pub offside_abs_mass: T,
    pub offside_nodes: usize,
    pub total_mass: T,
    /// `10 h² · |total mass|`.
    pub tolerance: T,
}

impl<T: Scalar> ContactReport<T> {
    pub fn holds(&self) -> bool {
        self.offside_mass <= self.tolerance
    }
}

/// Mass of the envelope's Monge–Ampère measure away from `{env >= f - δ}`.
pub fn contact_concentration<T: Scalar>(
    form: &BackgroundForm<T>,
    f: &[T],
    result: &EnvelopeResult<T>,
    delta: T,
) -> Result<ContactReport<T>> {
    if !result.is_converged() {
        return Err(Error::Precondition("envelope did not converge".into()));
    }
    if !(delta > T::zero()) {
        return Err(Error::InvalidArgument("delta must be positive".into()));
    }
    let grid = form.grid();
    if f.len() != grid.len() {
        return Err(Error::DimensionMismatch("obstacle does not match grid".into()));
    }
    let env = &result.env;
    let off: Vec<bool> = (0..grid.len())
        .map(|x| env.get(x).is_finite() && env.get(x) < f[x] - delta)
        .collect();
    let offside = stencil_closure(grid, &off);
    let m = ma(form, env)?;
    let cv = grid.cell_volume::<T>();
    let total = m.total_mass();
    let h = T::of(grid.min_spacing());
    Ok(ContactReport {
        offside_mass: m.mass_on(&offside),
        offside_abs_mass: ordered_sum(
            (0..grid.len()).map(|x| if offside[x] { m.weight(x).abs() } else { T::zero() }),
        ) * cv,
        offside_nodes: offside.iter().filter(|&&b| b).count(),
        total_mass: total,
        tolerance: T::of(10.0) * h * h * total.abs(),
    })
}

#[derive(Clone, Debug)]
pub struct RooftopResult<T> {
    pub envelope: EnvelopeResult<T>,
    /// Mass of `ma(F, rooftop)` over the stencil-pure nodes.
    pub lhs_mass: T,
    /// `1_{v<=u} MA(v) + 1_{u<v} MA(u)` over the same nodes.
    pub rhs_mass: T,
    pub pure_nodes: usize,
    pub bound_holds: bool,
}

/// `env(min(u, v))` together with the minimum-principle mass bound on nodes
/// whose stencils lie in a single piece of `{r = v <= u}`, `{r = u < v}`,
/// `{r < min(u, v)}`.
pub fn rooftop<T: Scalar>(
    form: &BackgroundForm<T>,
    u: &QPshFunction<T>,
    v: &QPshFunction<T>,
    tol: &Tolerances,
) -> Result<RooftopResult<T>> {
    if u.grid() != form.grid() || v.grid() != form.grid() {
        return Err(Error::DimensionMismatch("potentials and form on different grids".into()));
    }
    for (name, w) in [("u", u), ("v", v)] {
        let s = directional_slack(form, w)?;
        let worst = s.iter().flatten().copied().fold(T::infinity(), T::min);
        if worst.as_f64() < -tol.tol_psh {
            return Err(Error::Precondition(format!(
                "{name} is not θ-psh (directional slack {worst})"
            )));
        }
    }
    let lo: Vec<T> = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(&a, &b)| a.min(b))
        .collect();
    let res = envelope(form, &lo, tol)?;
    let grid = form.grid();
    let r = &res.env;
    // 0: r = v <= u, 1: r = u < v, 2: r below both
    let piece: Vec<u8> = (0..grid.len())
        .map(|x| {
            let (rx, ux, vx) = (r.get(x), u.get(x), v.get(x));
            if rx == vx && vx <= ux {
                0
            } else if rx == ux && ux < vx {
                1
            } else {
                2
            }
        })
        .collect();
    let pure: Vec<bool> = (0..grid.len())
        .map(|x| grid.stencil(x).all(|y| piece[y] == piece[x]))
        .collect();
    let mr = ma(form, r)?;
    let mu = ma(form, u)?;
    let mv = ma(form, v)?;
    let cv = grid.cell_volume::<T>();
    let lhs = ordered_sum((0..grid.len()).map(|x| if pure[x] { mr.weight(x) } else { T::zero() })) * cv;
    let rhs = ordered_sum((0..grid.len()).map(|x| {
        if !pure[x] {
            T::zero()
        } else {
            match piece[x] {
                0 => mv.weight(x),
                1 => mu.weight(x),
                _ => T::zero(),
            }
        }
    })) * cv;
    let bound_holds = lhs <= rhs + T::of(tol.tol_mono(lhs.as_f64(), rhs.as_f64()));
    Ok(RooftopResult {
        envelope: res,
        lhs_mass: lhs,
        rhs_mass: rhs,
        pure_nodes: pure.iter().filter(|&&b| b).count(),
        bound_holds,
    })
}

/// Nodewise `u <= v`.
#[cfg(test)]
fn le_nodewise<T: Scalar>(u: &[T], v: &[T]) -> bool {
    u.iter().zip(v).all(|(a, b)| a <= b)
}
