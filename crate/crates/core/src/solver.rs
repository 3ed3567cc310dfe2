//! Degenerate Monge–Ampère equations: the twisted equation
//! `d! det(G + D²φ) = e^{λφ} f dV`, its `λ → 0` continuation to
//! `d! det(G + D²φ) = c f dV`, subsolutions and domination checks.

use serde::Serialize;

use crate::config::Tolerances;
use crate::envelope::{v_theta, EnvelopeStatus};
use crate::error::{Error, Result};
use crate::geometry::{
    big_certificate, discrete_hessian, hessian_taps, BackgroundForm, HessianTap, ReferenceMetric,
    VolumeForm,
};
use crate::linalg::{DenseMatrix, SymMat};
use crate::ma::ma;
use crate::qpsh::{sublevel_mask, truncate, QPshFunction};
use crate::scalar::{factorial, ordered_sum, Scalar};

/// Data of a twisted or normalized equation.
#[derive(Clone, Debug)]
pub struct SolverSetup<T> {
    pub form: BackgroundForm<T>,
    pub rho: QPshFunction<T>,
    /// `Ω`: nodes whose whole stencil avoids the poles of `ρ`.
    pub omega: Vec<bool>,
    pub f: Vec<T>,
    pub dv: VolumeForm<T>,
    pub lambda: T,
    /// Exponent of the norm `‖f‖_p` required to be positive.
    pub p: T,
}

impl<T: Scalar> SolverSetup<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        form: BackgroundForm<T>,
        rho: QPshFunction<T>,
        f: Vec<T>,
        dv: VolumeForm<T>,
        lambda: T,
        p: T,
        metric: &ReferenceMetric<T>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let grid = form.grid().clone();
        if rho.grid() != &grid || dv.grid() != &grid || metric.grid() != &grid || f.len() != grid.len() {
            return Err(Error::DimensionMismatch("solver data on different grids".into()));
        }
        if !big_certificate(&form, &rho, T::one(), metric, tol) {
            return Err(Error::InvalidSetup(
                "G + D²ρ >= W fails off the poles of ρ".into(),
            ));
        }
        if f.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
            return Err(Error::InvalidSetup("density must be finite and nonnegative".into()));
        }
        if !(p > T::one()) {
            return Err(Error::InvalidSetup("norm exponent must exceed 1".into()));
        }
        if !(dv.lp_norm(&f, p) > T::zero()) {
            return Err(Error::InvalidSetup("density has zero norm".into()));
        }
        if !(lambda >= T::zero()) {
            return Err(Error::InvalidSetup("lambda must be nonnegative".into()));
        }
        let omega = sublevel_mask(&[&rho], rho.truncation_level())?.stencil_inside;
        if !omega.iter().any(|&b| b) {
            return Err(Error::InvalidSetup("Ω is empty".into()));
        }
        Ok(Self {
            form,
            rho,
            omega,
            f,
            dv,
            lambda,
            p,
        })
    }

    /// Bounded setup: `ρ ≡ 0`, uniform volume, `p = 2`, identity metric.
    pub fn simple(form: BackgroundForm<T>, f: Vec<T>, lambda: T, tol: &Tolerances) -> Result<Self> {
        let grid = form.grid().clone();
        Self::new(
            form,
            QPshFunction::zeros(&grid),
            f,
            VolumeForm::uniform(&grid),
            lambda,
            T::of(2.0),
            &ReferenceMetric::identity(&grid),
            tol,
        )
    }

    pub fn with_lambda(&self, lambda: T) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    /// `tol_solve = solve_rel (1 + ‖f‖_∞)`.
    pub fn tol_solve(&self, tol: &Tolerances) -> T {
        let fmax = self.f.iter().copied().fold(T::zero(), T::max);
        T::of(tol.solve_rel) * (T::one() + fmax)
    }

    /// `∫ f dV`.
    pub fn f_mass(&self) -> T {
        self.dv.integrate(&self.f)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveResult<T> {
    #[serde(skip)]
    pub phi: Option<QPshFunction<T>>,
    pub c: Option<T>,
    pub residual_inf: T,
    pub iterations: usize,
    pub converged: bool,
    /// `max |φ - V_θ|`.
    #[serde(rename = "C_report")]
    pub c_report: T,
    /// `V_θ - C_report <= φ <= V_θ + 1e-8` nodewise.
    pub bounds_hold: bool,
    /// `(λ_j, sup u_j, c_j)`.
    pub continuation_trace: Vec<(T, T, T)>,
}

impl<T: Scalar> SolveResult<T> {
    pub fn phi(&self) -> &QPshFunction<T> {
        self.phi.as_ref().expect("solution present")
    }
}

struct Newton<'a, T: Scalar> {
    setup: &'a SolverSetup<T>,
    /// Ω nodes in increasing order, and node → unknown index.
    unknowns: Vec<usize>,
    slot: Vec<Option<usize>>,
    taps: Vec<Vec<HessianTap<T>>>,
    rhs: Vec<T>,
    dfact: T,
}

#[derive(Clone)]
struct Eval<T> {
    /// transformed residual per unknown
    res: Vec<T>,
    /// untransformed residual sup norm
    raw_inf: T,
    merit: T,
    admissible: bool,
    mats: Vec<SymMat<T>>,
}

impl<'a, T: Scalar> Newton<'a, T> {
    fn new(setup: &'a SolverSetup<T>) -> Self {
        let grid = setup.form.grid();
        let unknowns: Vec<usize> = (0..grid.len()).filter(|&x| setup.omega[x]).collect();
        let mut slot = vec![None; grid.len()];
        for (k, &x) in unknowns.iter().enumerate() {
            slot[x] = Some(k);
        }
        let taps = unknowns.iter().map(|&x| hessian_taps(grid, x)).collect();
        let rhs = (0..grid.len())
            .map(|x| setup.f[x] * setup.dv.weights()[x])
            .collect();
        Self {
            setup,
            unknowns,
            slot,
            taps,
            rhs,
            dfact: T::of(factorial(grid.dim()) as f64),
        }
    }

    fn eval(&self, phi: &[T]) -> Eval<T> {
        let grid = self.setup.form.grid();
        let lam = self.setup.lambda;
        let mut res = Vec::with_capacity(self.unknowns.len());
        let mut mats = Vec::with_capacity(self.unknowns.len());
        let mut raw_inf = T::zero();
        let mut admissible = true;
        for &x in &self.unknowns {
            let m = self.setup.form.at(x) + discrete_hessian(grid, phi, x);
            let w = self.dfact * m.det();
            let target = (lam * phi[x]).exp() * self.rhs[x];
            raw_inf = raw_inf.max((w - target).abs());
            if self.rhs[x] > T::zero() {
                if !(m.min_eigenvalue() > T::zero()) || !(w > T::zero()) {
                    admissible = false;
                    res.push(T::zero());
                } else {
                    res.push(w.ln() - lam * phi[x] - self.rhs[x].ln());
                }
            } else {
                res.push(w - target);
            }
            mats.push(m);
        }
        let merit = ordered_sum(res.iter().map(|r| *r * *r));
        Eval {
            res,
            raw_inf,
            merit,
            admissible,
            mats,
        }
    }

    fn jacobian(&self, phi: &[T], ev: &Eval<T>) -> DenseMatrix<T> {
        let lam = self.setup.lambda;
        let n = self.unknowns.len();
        let mut j = DenseMatrix::zeros(n);
        for (k, &x) in self.unknowns.iter().enumerate() {
            let m = ev.mats[k];
            let adj = m.adjugate();
            let transformed = self.rhs[x] > T::zero();
            let scale = if transformed { T::one() / m.det() } else { self.dfact };
            for t in &self.taps[k] {
                if let Some(col) = self.slot[t.node] {
                    let mult = if t.i == t.j { T::one() } else { T::of(2.0) };
                    j.add_to(k, col, scale * mult * adj.get(t.i, t.j) * t.coef);
                }
            }
            if transformed {
                j.add_to(k, k, -lam);
            } else {
                j.add_to(k, k, -lam * (lam * phi[x]).exp() * self.rhs[x]);
            }
        }
        j
    }

    fn apply(&self, phi: &[T], delta: &[T], alpha: T) -> Vec<T> {
        let mut out = phi.to_vec();
        for (k, &x) in self.unknowns.iter().enumerate() {
            out[x] = phi[x] + alpha * delta[k];
        }
        out
    }

    fn solve(&self, init: Vec<T>, tol: &Tolerances) -> (Vec<T>, T, usize, bool) {
        let target = self.setup.tol_solve(tol);
        let h2 = T::of(self.setup.form.grid().min_spacing().powi(2));
        let mut phi = init;
        let mut ev = self.eval(&phi);
        let mut failures = 0usize;
        let mut iter = 0usize;
        while iter < tol.solve_max_iter {
            if ev.admissible && ev.raw_inf <= target {
                return (phi, ev.raw_inf, iter, true);
            }
            iter += 1;
            let mut accepted = false;
            if ev.admissible && failures < 3 {
                let jac = self.jacobian(&phi, &ev);
                let rhs: Vec<T> = ev.res.iter().map(|&r| -r).collect();
                if let Ok(delta) = jac.solve(rhs) {
                    let mut alpha = T::one();
                    for _ in 0..40 {
                        let trial = self.apply(&phi, &delta, alpha);
                        let tev = self.eval(&trial);
                        if tev.admissible
                            && (tev.merit <= (T::one() - T::of(1e-4) * alpha) * ev.merit
                                || tev.raw_inf <= target)
                        {
                            phi = trial;
                            ev = tev;
                            accepted = true;
                            break;
                        }
                        alpha *= T::of(0.5);
                    }
                }
                if accepted {
                    failures = 0;
                    continue;
                }
                failures += 1;
                if failures < 3 {
                    continue;
                }
            }
            // Pseudo-time relaxation φ ← φ + dt R, dt = 0.1 h² λ_min(M).
            if !ev.admissible {
                break;
            }
            let lmin = ev
                .mats
                .iter()
                .map(|m| m.min_eigenvalue())
                .fold(T::infinity(), T::min)
                .max(T::of(1e-12));
            let mut dt = T::of(0.1) * h2 * lmin;
            for _ in 0..40 {
                let trial = self.apply(&phi, &ev.res, dt);
                let tev = self.eval(&trial);
                if tev.admissible {
                    phi = trial;
                    ev = tev;
                    break;
                }
                dt *= T::of(0.5);
            }
            if iter.is_multiple_of(20) {
                failures = 0;
            }
        }
        let ok = ev.admissible && ev.raw_inf <= target;
        (phi, ev.raw_inf, iter, ok)
    }
}

fn admissible_on<T: Scalar>(setup: &SolverSetup<T>, phi: &[T]) -> bool {
    let grid = setup.form.grid();
    (0..grid.len()).all(|x| {
        !setup.omega[x]
            || setup.f[x] == T::zero()
            || (setup.form.at(x) + discrete_hessian(grid, phi, x)).min_eigenvalue() > T::zero()
    })
}

/// `V_θ`, or `NonConvergence`/`Infeasible` errors from the envelope.
pub fn minimal_potential<T: Scalar>(form: &BackgroundForm<T>, tol: &Tolerances) -> Result<QPshFunction<T>> {
    let r = v_theta(form, tol)?;
    match r.status {
        EnvelopeStatus::Converged => Ok(r.env),
        EnvelopeStatus::Infeasible => Err(Error::InvalidSetup("V_θ does not exist".into())),
        _ => Err(Error::NonConvergence {
            iterations: r.sweeps,
            residual: r.final_update.as_f64(),
        }),
    }
}

fn initial_iterate<T: Scalar>(setup: &SolverSetup<T>, vt: &QPshFunction<T>) -> Vec<T> {
    if admissible_on(setup, vt.values()) {
        return vt.values().to_vec();
    }
    truncate(&setup.rho, setup.rho.truncation_level()).into_values()
}

fn bounds<T: Scalar>(phi: &[T], vt: &QPshFunction<T>) -> (T, bool) {
    let c = phi
        .iter()
        .zip(vt.values())
        .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
    let upper = phi
        .iter()
        .zip(vt.values())
        .all(|(&a, &b)| a <= b + T::of(1e-8));
    (c, upper)
}

fn twisted_from<T: Scalar>(
    setup: &SolverSetup<T>,
    init: Vec<T>,
    vt: &QPshFunction<T>,
    tol: &Tolerances,
) -> Result<SolveResult<T>> {
    let newton = Newton::new(setup);
    let (phi, res, iters, ok) = newton.solve(init, tol);
    let (c_report, bounds_hold) = bounds(&phi, vt);
    let phi = QPshFunction::new(setup.form.grid(), phi)?;
    Ok(SolveResult {
        phi: Some(phi),
        c: None,
        residual_inf: res,
        iterations: iters,
        converged: ok,
        c_report,
        bounds_hold,
        continuation_trace: Vec::new(),
    })
}

/// Solves `d! det(G + D²φ) = e^{λφ} f dV` on `Ω`, starting from `V_θ`.
/// A non-converged run is returned with `converged = false`.
pub fn solve_twisted<T: Scalar>(setup: &SolverSetup<T>, tol: &Tolerances) -> Result<SolveResult<T>> {
    let vt = minimal_potential(&setup.form, tol)?;
    solve_twisted_from(setup, initial_iterate(setup, &vt), tol)
}

/// [`solve_twisted`] from an explicit initial iterate (values off `Ω` stay fixed).
pub fn solve_twisted_from<T: Scalar>(
    setup: &SolverSetup<T>,
    init: Vec<T>,
    tol: &Tolerances,
) -> Result<SolveResult<T>> {
    if !(setup.lambda > T::zero()) {
        return Err(Error::InvalidSetup("twisted solve needs lambda > 0".into()));
    }
    if init.len() != setup.form.grid().len() || init.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial iterate must be finite on every node".into()));
    }
    let vt = minimal_potential(&setup.form, tol)?;
    twisted_from(setup, init, &vt, tol)
}

/// Solves `d! det(G + D²φ) = c f dV`, `max φ = 0`, through the twisted equations
/// with `λ_j = 2^{-j}`.
pub fn solve_normalized<T: Scalar>(setup: &SolverSetup<T>, tol: &Tolerances) -> Result<SolveResult<T>> {
    let vt = minimal_potential(&setup.form, tol)?;
    let mut w = initial_iterate(setup, &vt);
    let mut kappa = T::zero(); // log c_{j-1}
    let mut prev: Option<(T, Vec<T>)> = None;
    let mut trace = Vec::new();
    let mut total_iters = 0usize;
    for j in 0..tol.continuation_max_steps {
        let lam = T::of(0.5f64.powi(j as i32));
        let shifted = SolverSetup {
            f: setup.f.iter().map(|&x| x * kappa.exp()).collect(),
            lambda: lam,
            ..setup.clone()
        };
        let r = twisted_from(&shifted, w.clone(), &vt, tol)?;
        total_iters += r.iterations;
        if !r.converged {
            return Ok(SolveResult {
                continuation_trace: trace,
                iterations: total_iters,
                converged: false,
                ..r
            });
        }
        let sol = r.phi.expect("twisted solution").into_values();
        let top = sol.iter().copied().fold(T::neg_infinity(), T::max);
        let sup_u = top + kappa / lam;
        let c = (lam * top + kappa).exp();
        let v: Vec<T> = sol.iter().map(|&x| x - top).collect();
        trace.push((lam, sup_u, c));
        let done = prev.as_ref().is_some_and(|(cp, vp)| {
            let dv = v
                .iter()
                .zip(vp)
                .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
            (c - *cp).abs().as_f64() <= tol.continuation_c * c.as_f64()
                && dv.as_f64() <= tol.continuation_v
        });
        kappa = c.ln();
        w = v.clone();
        prev = Some((c, v));
        if done {
            break;
        }
    }
    let (c, v) = prev.ok_or_else(|| Error::InvalidArgument("no continuation steps".into()))?;
    let converged = trace.len() >= 2 && trace.len() < tol.continuation_max_steps + 1 && {
        let n = trace.len();
        let (cj, cp) = (trace[n - 1].2, trace[n - 2].2);
        (cj - cp).abs().as_f64() <= tol.continuation_c * cj.as_f64()
    };
    let residual = normalized_residual(setup, &v, c);
    let (c_report, bounds_hold) = bounds(&v, &vt);
    Ok(SolveResult {
        phi: Some(QPshFunction::new(setup.form.grid(), v)?),
        c: Some(c),
        residual_inf: residual,
        iterations: total_iters,
        converged,
        c_report,
        bounds_hold,
        continuation_trace: trace,
    })
}

/// `max_Ω |d! det(G + D²φ) - c f dV|`.
pub fn normalized_residual<T: Scalar>(setup: &SolverSetup<T>, phi: &[T], c: T) -> T {
    let grid = setup.form.grid();
    let dfact = T::of(factorial(grid.dim()) as f64);
    (0..grid.len())
        .filter(|&x| setup.omega[x])
        .map(|x| {
            let m = setup.form.at(x) + discrete_hessian(grid, phi, x);
            (dfact * m.det() - c * setup.f[x] * setup.dv.weights()[x]).abs()
        })
        .fold(T::zero(), T::max)
}

#[derive(Clone, Debug)]
pub struct Subsolution<T> {
    pub v: QPshFunction<T>,
    /// Largest `m` with `MA(v) >= m g dV - tol` on `Ω`; `+∞` when `g ≡ 0`.
    pub m: T,
    pub degenerate: bool,
    /// The auxiliary reference-metric potential (`max u = 0`, oscillation ≤ 1).
    pub aux: QPshFunction<T>,
}

/// `v = η + 1/(1 + η - u₁)` with `u₁ = ρ + u`, where `u` solves a reference
/// metric equation with density built from `g (2 - ρ)^{2d}`.
pub fn subsolution<T: Scalar>(
    setup: &SolverSetup<T>,
    eta: &QPshFunction<T>,
    g: &[T],
    q: T,
    metric: &ReferenceMetric<T>,
    tol: &Tolerances,
) -> Result<Subsolution<T>> {
    let grid = setup.form.grid();
    if eta.grid() != grid || g.len() != grid.len() || metric.grid() != grid {
        return Err(Error::DimensionMismatch("subsolution data on different grids".into()));
    }
    let rho = setup.rho.values();
    if (0..grid.len()).any(|x| !(rho[x] <= eta.get(x)) && !(eta.is_pole(x) && setup.rho.is_pole(x)))
        || eta.max_value() > T::zero()
    {
        return Err(Error::Precondition("need ρ <= η <= 0".into()));
    }
    if g.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
        return Err(Error::Precondition("g must be finite and nonnegative".into()));
    }
    if !(q > T::one()) || setup.dv.lp_norm(g, q).as_f64() > 1.0 + 1e-12 {
        return Err(Error::Precondition("need q > 1 and ‖g‖_q <= 1".into()));
    }
    let d = grid.dim() as i32;
    let degenerate = g.iter().all(|&x| x == T::zero());

    let u: Vec<T> = if degenerate {
        vec![T::zero(); grid.len()]
    } else {
        let h: Vec<T> = (0..grid.len())
            .map(|x| {
                if setup.omega[x] {
                    g[x] * (T::of(2.0) - rho[x]).powi(2 * d)
                } else {
                    T::zero()
                }
            })
            .collect();
        let mean = ordered_sum(h.iter().copied()) / T::of(grid.len() as f64);
        let raw: Vec<T> = h.iter().map(|&x| x + T::of(0.1) * mean).collect();
        let wform = metric.as_form();
        let target = ma(&wform, &QPshFunction::zeros(grid))?.total_mass();
        let norm = target / setup.dv.integrate(&raw);
        let dens: Vec<T> = raw.iter().map(|&x| x * norm).collect();
        let aux = SolverSetup::new(
            wform,
            QPshFunction::zeros(grid),
            dens,
            setup.dv.clone(),
            T::one(),
            T::of(2.0),
            metric,
            tol,
        )?;
        let r = solve_twisted(&aux, tol)?;
        if !r.converged {
            return Err(Error::NonConvergence {
                iterations: r.iterations,
                residual: r.residual_inf.as_f64(),
            });
        }
        let u = r.phi.expect("solution").into_values();
        let top = u.iter().copied().fold(T::neg_infinity(), T::max);
        let low = u.iter().copied().fold(T::infinity(), T::min);
        let s = if top - low > T::one() { T::one() / (top - low) } else { T::one() };
        u.iter().map(|&x| (x - top) * s).collect()
    };

    let v: Vec<T> = (0..grid.len())
        .map(|x| {
            let e = eta.get(x);
            if e == T::neg_infinity() {
                return e;
            }
            let u1 = rho[x] + u[x];
            if u1 == T::neg_infinity() {
                return e;
            }
            e + T::one() / (T::one() + (e - u1))
        })
        .collect();
    let v = QPshFunction::new(grid, v)?;
    let aux = QPshFunction::new(grid, u)?;
    let m = if degenerate {
        T::infinity()
    } else {
        let mv = ma(&setup.form, &v)?;
        let slack = T::of(tol.tol_psh);
        (0..grid.len())
            .filter(|&x| setup.omega[x] && g[x] > T::zero())
            .map(|x| (mv.weight(x) + slack) / (g[x] * setup.dv.weights()[x]))
            .fold(T::infinity(), T::min)
            .max(T::zero())
    };
    Ok(Subsolution {
        v,
        m,
        degenerate,
        aux,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DominationCheck {
    /// `MA(u) <= c MA(v)` on `Ω ∩ {u < v}` and `c < 1`.
    pub lemma_hypothesis: bool,
    /// `MA(u) <= c MA(v)` on all of `Ω`.
    pub full_domination: bool,
    pub consistent: bool,
}

fn dominated<T: Scalar>(a: T, b: T, c: T) -> bool {
    a <= c * b + T::of(1e-9) * (T::one() + a.abs() + (c * b).abs())
}

/// Domination principle: `MA(u) <= c MA(v)` on `{u < v}` with `c < 1` forces
/// `u >= v`; full domination forces `c >= 1`.
pub fn domination_check<T: Scalar>(
    form: &BackgroundForm<T>,
    u: &QPshFunction<T>,
    v: &QPshFunction<T>,
    c: T,
    omega: &[bool],
    tol: &Tolerances,
) -> Result<DominationCheck> {
    let grid = form.grid();
    if u.grid() != grid || v.grid() != grid || omega.len() != grid.len() {
        return Err(Error::DimensionMismatch("domination data on different grids".into()));
    }
    if (0..grid.len()).any(|x| omega[x] && !(u.get(x).is_finite() && v.get(x).is_finite())) {
        return Err(Error::Precondition("u - v must be bounded on Ω".into()));
    }
    let mu = ma(form, u)?;
    let mv = ma(form, v)?;
    let nodes: Vec<usize> = (0..grid.len()).filter(|&x| omega[x]).collect();
    let full = nodes.iter().all(|&x| dominated(mu.weight(x), mv.weight(x), c));
    let lemma = c < T::one()
        && nodes
            .iter()
            .filter(|&&x| u.get(x) < v.get(x))
            .all(|&x| dominated(mu.weight(x), mv.weight(x), c));
    let t = T::of(tol.tol_psh);
    let mut consistent = true;
    if lemma {
        consistent &= nodes.iter().all(|&x| u.get(x) >= v.get(x) - t);
    }
    if full {
        consistent &= c.as_f64() >= 1.0 - tol.tol_psh;
    }
    Ok(DominationCheck {
        lemma_hypothesis: lemma,
        full_domination: full,
        consistent,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalComparison {
    pub hypothesis: bool,
    pub holds: bool,
}

/// Comparison on a region: `u >= v` on its stencil boundary and
/// `MA(u) <= MA(v)` on `region ∩ {u < v}` give `u >= v` on the region.
pub fn local_comparison_check<T: Scalar>(
    form: &BackgroundForm<T>,
    u: &QPshFunction<T>,
    v: &QPshFunction<T>,
    region: &[bool],
    tol: &Tolerances,
) -> Result<LocalComparison> {
    let grid = form.grid();
    if u.grid() != grid || v.grid() != grid || region.len() != grid.len() {
        return Err(Error::DimensionMismatch("comparison data on different grids".into()));
    }
    let mut boundary = vec![false; grid.len()];
    for x in (0..grid.len()).filter(|&x| region[x]) {
        for y in grid.stencil(x) {
            if !region[y] {
                boundary[y] = true;
            }
        }
    }
    if !boundary.iter().any(|&b| b) {
        return Err(Error::InvalidArgument("region has no boundary".into()));
    }
    if (0..grid.len()).any(|x| boundary[x] && u.get(x) < v.get(x)) {
        return Err(Error::Precondition("u < v somewhere on the region boundary".into()));
    }
    let mu = ma(form, u)?;
    let mv = ma(form, v)?;
    let hypothesis = (0..grid.len())
        .filter(|&x| region[x] && u.get(x) < v.get(x))
        .all(|x| dominated(mu.weight(x), mv.weight(x), T::one()));
    let t = T::of(tol.tol_psh);
    let holds = !hypothesis || (0..grid.len()).all(|x| !region[x] || u.get(x) >= v.get(x) - t);
    Ok(LocalComparison { hypothesis, holds })
}
