//! Seeded invariant suites, one per module, run by `pluripot verify`.
//!
//! Every check draws its instances from a generator seeded by the suite seed,
//! so a report is a pure function of `(suite, seed, tolerances)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Tolerances;
use crate::envelope::{contact_concentration, envelope, EnvelopeStatus};
use crate::error::{Error, Result};
use crate::geometry::{
    big_certificate, class_equivalent, discrete_hessian, hessian_taps, make_closed_form,
    psef_probe, BackgroundForm, FormKind, ReferenceMetric, VolumeForm,
};
use crate::grid::GridTorus;
use crate::linalg::SymMat;
use crate::ma::{ma, npp_mixed, npp_mixed_at_level};
use crate::qpsh::{chi_eps, sublevel_mask, theta_convex_slack, truncate, QPshFunction};
use crate::sampling::{max_admissible_scale, ConvexSampler};
use crate::solver::{
    domination_check, local_comparison_check, minimal_potential, solve_normalized,
    solve_twisted, solve_twisted_from, subsolution, SolverSetup,
};
use crate::volumes::{current_volume_bounds, vol_big, vol_class, VolumeStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Geometry,
    Qpsh,
    Ma,
    Envelope,
    Volumes,
    Solver,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Geometry,
        Suite::Qpsh,
        Suite::Ma,
        Suite::Envelope,
        Suite::Volumes,
        Suite::Solver,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Qpsh => "qpsh",
            Suite::Ma => "ma",
            Suite::Envelope => "envelope",
            Suite::Volumes => "volumes",
            Suite::Solver => "solver",
        }
    }

    /// A suite name, or `all`.
    pub fn parse(name: &str) -> Result<Vec<Suite>> {
        if name == "all" {
            return Ok(Self::ALL.to_vec());
        }
        Self::ALL
            .iter()
            .copied()
            .find(|s| s.name() == name)
            .map(|s| vec![s])
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite '{name}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckReport>,
}

impl SuiteReport {
    /// `suite/check: detail` for every failed check.
    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}/{}: {}", self.suite, c.name, c.detail))
            .collect()
    }
}

type Check = std::result::Result<(usize, String), String>;

fn fail<T>(msg: impl Into<String>) -> std::result::Result<T, String> {
    Err(msg.into())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

trait OrFail<T> {
    fn or_fail(self) -> std::result::Result<T, String>;
}

impl<T> OrFail<T> for Result<T> {
    fn or_fail(self) -> std::result::Result<T, String> {
        self.map_err(|e| e.to_string())
    }
}

struct Runner {
    rng: ChaCha8Rng,
    checks: Vec<CheckReport>,
}

impl Runner {
    fn run(&mut self, name: &str, f: impl FnOnce(&mut ChaCha8Rng) -> Check) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng.random());
        let (passed, cases, detail) = match f(&mut rng) {
            Ok((cases, detail)) => (true, cases, detail),
            Err(detail) => (false, 0, detail),
        };
        self.checks.push(CheckReport {
            name: name.into(),
            passed,
            cases,
            detail,
        });
    }
}

/// Runs one suite.
pub fn run_suite(suite: Suite, seed: u64, tol: &Tolerances) -> SuiteReport {
    let mut r = Runner {
        rng: ChaCha8Rng::seed_from_u64(seed ^ (suite as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
        checks: Vec::new(),
    };
    match suite {
        Suite::Geometry => geometry_suite(&mut r, tol),
        Suite::Qpsh => qpsh_suite(&mut r, tol),
        Suite::Ma => ma_suite(&mut r, tol),
        Suite::Envelope => envelope_suite(&mut r, tol),
        Suite::Volumes => volumes_suite(&mut r, tol),
        Suite::Solver => solver_suite(&mut r, tol),
    }
    SuiteReport {
        suite: suite.name().into(),
        seed,
        passed: r.checks.iter().all(|c| c.passed),
        checks: r.checks,
    }
}

/// Runs several suites in order.
pub fn run_suites(suites: &[Suite], seed: u64, tol: &Tolerances) -> Vec<SuiteReport> {
    suites.iter().map(|&s| run_suite(s, seed, tol)).collect()
}

// ---------------------------------------------------------------- generators

fn grid(sizes: &[usize]) -> GridTorus {
    GridTorus::new(sizes).expect("valid grid")
}

fn random_spd(r: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> SymMat<f64> {
    let mut m = SymMat::zeros(d);
    for i in 0..d {
        m.set(i, i, r.random_range(lo..hi));
    }
    for i in 0..d {
        for j in i + 1..d {
            let b = 0.4 * (m.get(i, i) * m.get(j, j)).sqrt() / d as f64;
            m.set(i, j, r.random_range(-b..b));
        }
    }
    m
}

fn direction(r: &mut ChaCha8Rng, g: &GridTorus) -> Vec<f64> {
    ConvexSampler::new(r.random()).direction(g)
}

/// A positive non-closed form `a I + b (smooth perturbation)`.
fn general_form(r: &mut ChaCha8Rng, g: &GridTorus) -> BackgroundForm<f64> {
    let d = g.dim();
    let a = r.random_range(1.0..2.0);
    let b = r.random_range(0.05..0.2);
    let p = direction(r, g);
    let q = direction(r, g);
    let field = (0..g.len())
        .map(|x| {
            let mut m = SymMat::scalar(d, a);
            m.set(0, 0, a + b * p[x]);
            if d > 1 {
                m.set(1, 1, a + b * q[x]);
                m.set(0, 1, 0.5 * b * p[x] * q[x]);
            }
            m
        })
        .collect();
    BackgroundForm::general(g, field).expect("positive field")
}

/// `A + D²τ` with `τ` at a fraction of its admissible scale, so the field stays positive.
fn closed_form(r: &mut ChaCha8Rng, g: &GridTorus) -> BackgroundForm<f64> {
    let a = random_spd(r, g.dim(), 0.5, 2.0);
    let tau = theta_sample(r, &BackgroundForm::constant(g, a).expect("constant"), 0.5);
    make_closed_form(g, a, tau.values()).expect("closed form")
}

fn some_form(r: &mut ChaCha8Rng, g: &GridTorus, k: usize) -> BackgroundForm<f64> {
    match k % 3 {
        0 => BackgroundForm::constant(g, random_spd(r, g.dim(), 0.5, 2.0)).expect("constant"),
        1 => closed_form(r, g),
        _ => general_form(r, g),
    }
}

/// A θ-psh sample at `frac` of the largest admissible multiple of a random direction.
fn theta_sample(r: &mut ChaCha8Rng, form: &BackgroundForm<f64>, frac: f64) -> QPshFunction<f64> {
    let g = form.grid();
    loop {
        let p = direction(r, g);
        if let Some(s) = max_admissible_scale(g, form.field(), 1.0, &p) {
            let v = p.iter().map(|x| x * s * frac).collect();
            return QPshFunction::new(g, v).expect("finite");
        }
    }
}

fn with_poles(r: &mut ChaCha8Rng, u: &QPshFunction<f64>, count: usize) -> QPshFunction<f64> {
    let mut v = u.values().to_vec();
    for _ in 0..count {
        let i = r.random_range(0..v.len());
        v[i] = f64::NEG_INFINITY;
    }
    QPshFunction::new_allow_empty(u.grid(), v).expect("no NaN")
}

fn min_eig(form: &BackgroundForm<f64>) -> f64 {
    form.field()
        .iter()
        .map(|m| m.min_eigenvalue())
        .fold(f64::INFINITY, f64::min)
}

/// Bounded setup certified against half the smallest eigenvalue of the form.
fn bounded_setup(
    form: &BackgroundForm<f64>,
    f: Vec<f64>,
    lambda: f64,
    tol: &Tolerances,
) -> Result<(SolverSetup<f64>, ReferenceMetric<f64>)> {
    let g = form.grid();
    let w = SymMat::scalar(g.dim(), 0.5 * min_eig(form));
    let metric = ReferenceMetric::new(g, vec![w; g.len()], tol)?;
    let s = SolverSetup::new(
        form.clone(),
        QPshFunction::zeros(g),
        f,
        VolumeForm::uniform(g),
        lambda,
        2.0,
        &metric,
        tol,
    )?;
    Ok((s, metric))
}

fn positive_density(r: &mut ChaCha8Rng, g: &GridTorus, amp: f64) -> Vec<f64> {
    direction(r, g).iter().map(|v| (1.0 + amp * v).max(0.05)).collect()
}

fn sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn le_within(a: &[f64], b: &[f64], eps: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| *x <= *y + eps)
}

/// Largest `u <= f` with `u(x) <= (u(x+1) + u(x-1) + h² g(x)) / 2` on a periodic
/// line: the lower convex hull of `f + P + ḡ i²/2` over three periods, where
/// `P` is periodic with second differences `h²(g - ḡ)`.
pub fn envelope_1d_hull(g: &[f64], f: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    let h2 = 1.0 / (n * n) as f64;
    let a: Vec<f64> = g.iter().map(|v| v * h2).collect();
    let abar = a.iter().sum::<f64>() / n as f64;
    if abar < 0.0 {
        return None;
    }
    let mut delta = vec![0.0; n];
    for i in 1..n {
        delta[i] = delta[i - 1] + (a[i] - abar);
    }
    let shift = delta.iter().sum::<f64>() / n as f64;
    delta.iter_mut().for_each(|v| *v -= shift);
    let mut p = vec![0.0; n];
    for i in 1..n {
        p[i] = p[i - 1] + delta[i - 1];
    }
    let q = |i: i64| 0.5 * abar * (i * i) as f64;
    let pts: Vec<(i64, f64)> = (-(n as i64)..2 * n as i64)
        .map(|i| {
            let k = i.rem_euclid(n as i64) as usize;
            (i, f[k] + p[k] + q(i))
        })
        .collect();
    let mut hull: Vec<(i64, f64)> = Vec::new();
    for &pt in &pts {
        while hull.len() >= 2 {
            let (x1, y1) = hull[hull.len() - 2];
            let (x2, y2) = hull[hull.len() - 1];
            let cross = (y2 - y1) * (pt.0 - x1) as f64 - (pt.1 - y1) * (x2 - x1) as f64;
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(pt);
    }
    let mut out = vec![0.0; n];
    let mut seg = 0;
    for (i, o) in out.iter_mut().enumerate() {
        let x = i as i64;
        while hull[seg + 1].0 < x {
            seg += 1;
        }
        let (x1, y1) = hull[seg];
        let (x2, y2) = hull[seg + 1];
        let z = y1 + (y2 - y1) * (x - x1) as f64 / (x2 - x1) as f64;
        *o = z - p[i] - q(x);
    }
    Some(out)
}

// ------------------------------------------------------------------ geometry

fn geometry_suite(r: &mut Runner, tol: &Tolerances) {
    r.run("hessian_telescoping", |rng| {
        let mut cases = 0;
        let mut worst: f64 = 0.0;
        for sizes in [vec![16], vec![8, 8], vec![8, 6], vec![4, 4, 4]] {
            let g = grid(&sizes);
            let d = g.dim();
            // Coefficient of every node in Σ_x D²u(x), per entry: exactly zero.
            let mut coef = vec![0.0f64; g.len() * d * d];
            for x in 0..g.len() {
                for t in hessian_taps::<f64>(&g, x) {
                    coef[(t.node * d + t.i) * d + t.j] += t.coef;
                }
            }
            ensure(coef.iter().all(|&c| c == 0.0), || {
                format!("stencil coefficients do not cancel on {sizes:?}")
            })?;
            for _ in 0..5 {
                let u = direction(rng, &g);
                let mut sum = vec![0.0; d * d];
                let mut scale = 0.0;
                for x in 0..g.len() {
                    let h = discrete_hessian(&g, &u, x);
                    for i in 0..d {
                        for j in 0..d {
                            sum[i * d + j] += h.get(i, j);
                            scale += h.get(i, j).abs();
                        }
                    }
                }
                let s = sum.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                worst = worst.max(s / scale);
                ensure(s <= 1e-12 * scale, || format!("Σ D²u = {s:e} on {sizes:?}"))?;
                cases += 1;
            }
        }
        Ok((cases, format!("coefficients cancel exactly; sampled sums ≤ {worst:.1e} relative")))
    });

    r.run("class_equivalence_relation", |rng| {
        let g = grid(&[8, 8]);
        let a1 = random_spd(rng, 2, 0.5, 2.0);
        let a2 = random_spd(rng, 2, 0.5, 2.0);
        let mut forms = Vec::new();
        for a in [a1, a1, a1, a2, a2] {
            let tau: Vec<f64> = direction(rng, &g).iter().map(|v| 0.01 * v).collect();
            forms.push(make_closed_form(&g, a, &tau).or_fail()?);
        }
        forms.push(BackgroundForm::constant(&g, a1).or_fail()?);
        let n = forms.len();
        let mut eq = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                eq[i][j] = class_equivalent(&forms[i], &forms[j], tol).or_fail()?;
            }
        }
        for i in 0..n {
            ensure(eq[i][i], || format!("form {i} not equivalent to itself"))?;
            for j in 0..n {
                ensure(eq[i][j] == eq[j][i], || format!("asymmetric at ({i},{j})"))?;
                for k in 0..n {
                    ensure(!(eq[i][j] && eq[j][k]) || eq[i][k], || {
                        format!("not transitive at ({i},{j},{k})")
                    })?;
                }
            }
        }
        ensure(eq[0][1] && eq[0][5] && !eq[0][3], || "unexpected classes".into())?;
        Ok((n * n, format!("{n} closed forms, two classes")))
    });

    r.run("certificate_implies_psef", |rng| {
        let mut certified = 0;
        for k in 0..8 {
            let g = if k % 2 == 0 { grid(&[16]) } else { grid(&[8, 8]) };
            let form = some_form(rng, &g, k);
            let rho = theta_sample(rng, &form, 0.3);
            let w = SymMat::scalar(g.dim(), 0.25 * min_eig(&form));
            let metric = ReferenceMetric::new(&g, vec![w; g.len()], tol).or_fail()?;
            if big_certificate(&form, &rho, 1.0, &metric, tol) {
                certified += 1;
                let probe = psef_probe(&form, 2000, tol);
                ensure(probe.feasible, || format!("instance {k}: certified but probe fails"))?;
            }
        }
        ensure(certified > 0, || "no instance was certified".into())?;
        Ok((certified, format!("{certified} certified instances all psef")))
    });
}

// ---------------------------------------------------------------------- qpsh

fn qpsh_suite(r: &mut Runner, tol: &Tolerances) {
    r.run("truncate_composition", |rng| {
        for k in 0..50 {
            let g = if k % 2 == 0 { grid(&[16]) } else { grid(&[6, 6]) };
            let u = QPshFunction::new(&g, direction(rng, &g)).or_fail()?;
            let c = rng.random_range(0..4);
            let u = with_poles(rng, &u, c);
            let (t, s) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
            ensure(truncate(&truncate(&u, t), s) == truncate(&u, t.min(s)), || {
                format!("case {k}: t={t}, s={s}")
            })?;
        }
        Ok((50, "bit-exact".into()))
    });

    r.run("sublevel_mask_monotone", |rng| {
        for k in 0..50 {
            let g = if k % 2 == 0 { grid(&[16]) } else { grid(&[6, 6]) };
            let u = QPshFunction::new(&g, direction(rng, &g)).or_fail()?;
            let v = QPshFunction::new(&g, direction(rng, &g)).or_fail()?;
            let c = rng.random_range(0..3);
            let u = with_poles(rng, &u, c);
            let t = rng.random_range(0.0..2.0);
            let t2 = t + rng.random_range(0.0..1.0);
            let a = sublevel_mask(&[&u, &v], t).or_fail()?;
            let b = sublevel_mask(&[&u, &v], t2).or_fail()?;
            let sub = |x: &[bool], y: &[bool]| x.iter().zip(y).all(|(p, q)| !p || *q);
            ensure(sub(&a.inside, &b.inside) && sub(&a.stencil_inside, &b.stencil_inside), || {
                format!("case {k}: mask at {t} not inside mask at {t2}")
            })?;
        }
        Ok((50, "nested".into()))
    });

    r.run("chi_monotone_in_eps", |rng| {
        for k in 0..50 {
            let g = grid(&[16]);
            let u = QPshFunction::new(&g, direction(rng, &g)).or_fail()?;
            let u = with_poles(rng, &u, k % 3);
            let e1 = rng.random_range(0.01..1.0);
            let e2 = e1 + rng.random_range(0.0..1.0);
            let (a, b) = (chi_eps(&u, e1).or_fail()?, chi_eps(&u, e2).or_fail()?);
            ensure(a.iter().zip(&b).all(|(x, y)| x >= y), || format!("case {k}"))?;
        }
        Ok((50, "χ decreasing in ε".into()))
    });

    r.run("max_slack_crossing_free", |rng| {
        let mut nodes = 0;
        for k in 0..20 {
            let g = if k % 2 == 0 { grid(&[32]) } else { grid(&[10, 10]) };
            let form = some_form(rng, &g, k);
            let u = theta_sample(rng, &form, 0.8);
            let v0 = theta_sample(rng, &form, 0.8);
            let v = v0.add_constant(0.5 * (u.max_value() - v0.max_value() + u.min_finite() - v0.min_finite()));
            let m = u.max_with(&v).or_fail()?;
            let slack = theta_convex_slack(&m, &form).or_fail()?;
            for x in 0..g.len() {
                let pure_u = std::iter::once(x).chain(g.stencil(x)).all(|y| u.get(y) >= v.get(y));
                let pure_v = std::iter::once(x).chain(g.stencil(x)).all(|y| v.get(y) > u.get(y));
                if pure_u || pure_v {
                    let s = slack[x].unwrap_or(f64::NEG_INFINITY);
                    ensure(s >= -tol.tol_psh, || format!("case {k}: slack {s:e} at node {x}"))?;
                    nodes += 1;
                }
            }
        }
        Ok((nodes, format!("{nodes} crossing-free nodes")))
    });
}

// ------------------------------------------------------------------------ ma

fn ma_slots(
    rng: &mut ChaCha8Rng,
    g: &GridTorus,
) -> (Vec<BackgroundForm<f64>>, Vec<QPshFunction<f64>>) {
    let d = g.dim();
    let forms: Vec<_> = (0..d)
        .map(|i| {
            let k = i + rng.random_range(0..3);
            some_form(rng, g, k)
        })
        .collect();
    let us = forms
        .iter()
        .map(|f| {
            let frac = rng.random_range(0.2..1.0);
            theta_sample(rng, f, frac)
        })
        .collect();
    (forms, us)
}

fn refs<T>(v: &[T]) -> Vec<&T> {
    v.iter().collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n <= 1 {
        return vec![(0..n).collect()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..n {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

fn ma_suite(r: &mut Runner, tol: &Tolerances) {
    r.run("symmetry", |rng| {
        let mut cases = 0;
        for k in 0..12 {
            let g = if k % 3 == 2 { grid(&[5, 5, 5]) } else { grid(&[8, 8]) };
            let (forms, us) = ma_slots(rng, &g);
            let base = npp_mixed(&refs(&forms), &refs(&us)).or_fail()?;
            for p in permutations(g.dim()) {
                let f: Vec<_> = p.iter().map(|&i| &forms[i]).collect();
                let u: Vec<_> = p.iter().map(|&i| &us[i]).collect();
                let m = npp_mixed(&f, &u).or_fail()?;
                ensure(m.weights() == base.weights(), || format!("case {k}: permutation {p:?}"))?;
                cases += 1;
            }
        }
        Ok((cases, "bit-exact".into()))
    });

    r.run("multilinearity", |rng| {
        let mut worst: f64 = 0.0;
        for k in 0..12 {
            let g = grid(&[8, 8]);
            let (forms, us) = ma_slots(rng, &g);
            let f2 = some_form(rng, &g, k);
            let u2 = theta_sample(rng, &f2, 0.5);
            let (a, b) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
            let fc = BackgroundForm::combine(a, &forms[0], b, &f2).or_fail()?;
            let uc = QPshFunction::new(
                &g,
                us[0].values().iter().zip(u2.values()).map(|(x, y)| a * x + b * y).collect(),
            )
            .or_fail()?;
            let m1 = npp_mixed(&refs(&forms), &refs(&us)).or_fail()?;
            let m2 = npp_mixed(&[&f2, &forms[1]], &[&u2, &us[1]]).or_fail()?;
            let mc = npp_mixed(&[&fc, &forms[1]], &[&uc, &us[1]]).or_fail()?;
            let (w1, w2, wc) = (m1.weights(), m2.weights(), mc.weights());
            let scale = (0..g.len()).fold(0.0f64, |m, x| m.max((a * w1[x]).abs() + (b * w2[x]).abs()));
            let err = (0..g.len()).fold(0.0f64, |m, x| m.max((wc[x] - a * w1[x] - b * w2[x]).abs()));
            worst = worst.max(err / scale);
        }
        ensure(worst <= 1e-10, || format!("relative error {worst:e}"))?;
        Ok((12, format!("relative error {worst:.1e}")))
    });

    r.run("truncation_level_independence", |rng| {
        for k in 0..20 {
            let g = if k % 2 == 0 { grid(&[24]) } else { grid(&[10, 10]) };
            let (forms, us) = ma_slots(rng, &g);
            let us: Vec<_> = us
                .iter()
                .map(|u| {
                    let c = rng.random_range(1..4);
                    with_poles(rng, u, c)
                })
                .collect();
            let base = npp_mixed(&refs(&forms), &refs(&us)).or_fail()?;
            let t_star = us.iter().map(|u| u.truncation_level()).fold(1.0, f64::max);
            for t in [t_star, 2.0 * t_star + 1.0, 1e9] {
                let m = npp_mixed_at_level(&refs(&forms), &refs(&us), t).or_fail()?;
                ensure(m.weights() == base.weights(), || format!("case {k}: level {t}"))?;
            }
        }
        Ok((20, "bit-exact for t >= t*".into()))
    });

    r.run("stencil_locality", |rng| {
        let mut nodes = 0;
        for k in 0..20 {
            let g = if k % 2 == 0 { grid(&[24]) } else { grid(&[10, 10]) };
            let form = some_form(rng, &g, k);
            let u = theta_sample(rng, &form, 0.7);
            let mut v = u.values().to_vec();
            for _ in 0..3 {
                let i = rng.random_range(0..g.len());
                v[i] = if rng.random_bool(0.5) { f64::NEG_INFINITY } else { v[i] - 0.5 };
            }
            let v = QPshFunction::new(&g, v).or_fail()?;
            let (mu, mv) = (ma(&form, &u).or_fail()?, ma(&form, &v).or_fail()?);
            for x in 0..g.len() {
                let same = std::iter::once(x).chain(g.stencil(x)).all(|y| u.get(y) == v.get(y));
                if same && mu.support()[x] && mv.support()[x] {
                    ensure(mu.weight(x) == mv.weight(x), || format!("case {k}: node {x}"))?;
                    nodes += 1;
                }
            }
        }
        Ok((nodes, format!("{nodes} nodes agree exactly")))
    });

    r.run("positivity", |rng| {
        let mut worst = f64::INFINITY;
        for k in 0..20 {
            let g = if k % 2 == 0 { grid(&[24]) } else { grid(&[10, 10]) };
            let d = g.dim();
            let (forms, us) = ma_slots(rng, &g);
            let c = k % 3;
            let us: Vec<_> = us.iter().map(|u| with_poles(rng, u, c)).collect();
            let m = npp_mixed(&refs(&forms), &refs(&us)).or_fail()?;
            let entry = forms
                .iter()
                .zip(&us)
                .flat_map(|(f, u)| {
                    let t = truncate(u, u.truncation_level());
                    (0..g.len())
                        .map(move |x| (f.at(x) + discrete_hessian(f.grid(), t.values(), x)).max_abs())
                        .collect::<Vec<_>>()
                })
                .fold(0.0f64, f64::max);
            let fact: f64 = (1..=d).map(|i| i as f64).product();
            let floor = -fact * (d as f64 + 1.0) * tol.tol_psh * entry.powi(d as i32 - 1);
            let lo = m.min_weight();
            ensure(lo >= floor, || format!("case {k}: weight {lo:e} below {floor:e}"))?;
            worst = worst.min(lo);
        }
        Ok((20, format!("smallest weight {worst:.3e}")))
    });

    r.run("mass_lower_semicontinuity", |rng| {
        let mut cases = 0;
        for k in 0..10 {
            let g = if k % 2 == 0 { grid(&[24]) } else { grid(&[10, 10]) };
            let form = some_form(rng, &g, 2 * k);
            let u = theta_sample(rng, &form, 0.7);
            let u = u.add_constant(-u.max_value());
            let c = k % 3;
            let u = with_poles(rng, &u, c);
            let limit = ma(&form, &u).or_fail()?.total_mass();
            // u_j = (1 - 2^-j) u decreases to u.
            let tail: Vec<f64> = (30..=40)
                .map(|j| {
                    let s = 1.0 - 0.5f64.powi(j);
                    ma(&form, &u.map(|x| s * x)?).map(|m| m.total_mass())
                })
                .collect::<Result<_>>()
                .or_fail()?;
            let liminf = tail.iter().copied().fold(f64::INFINITY, f64::min);
            ensure(limit <= liminf + tol.tol_mono(limit, liminf), || {
                format!("case {k}: {limit} > liminf {liminf}")
            })?;
            cases += 1;
        }
        // Truncations max(u, -j) of a d=1 potential with poles decrease to it.
        for k in 0..5 {
            let g = grid(&[24]);
            let form = some_form(rng, &g, k);
            let u = theta_sample(rng, &form, 0.7);
            let u = with_poles(rng, &u, 1 + k % 3);
            let limit = ma(&form, &u).or_fail()?.total_mass();
            let tail: Vec<f64> = (0..10)
                .map(|j| {
                    let t = u.truncation_level() * 2f64.powi(j);
                    ma(&form, &truncate(&u, t)).map(|m| m.total_mass())
                })
                .collect::<Result<_>>()
                .or_fail()?;
            let liminf = tail.iter().copied().fold(f64::INFINITY, f64::min);
            ensure(limit <= liminf + tol.tol_mono(limit, liminf), || {
                format!("truncation case {k}: {limit} > liminf {liminf}")
            })?;
            cases += 1;
        }
        Ok((cases, "limit mass below liminf".into()))
    });

    r.run("max_principle", |rng| {
        let mut nodes = 0;
        for k in 0..20 {
            let g = if k % 2 == 0 { grid(&[24]) } else { grid(&[10, 10]) };
            let form = some_form(rng, &g, k);
            let u = theta_sample(rng, &form, 0.8);
            let v0 = theta_sample(rng, &form, 0.8);
            let v = v0.add_constant(0.5 * (u.max_value() - v0.max_value() + u.min_finite() - v0.min_finite()));
            let w = u.max_with(&v).or_fail()?;
            let (mw, mu, mv) = (
                ma(&form, &w).or_fail()?,
                ma(&form, &u).or_fail()?,
                ma(&form, &v).or_fail()?,
            );
            for x in 0..g.len() {
                let st = || std::iter::once(x).chain(g.stencil(x));
                if st().all(|y| u.get(y) > v.get(y)) {
                    ensure(mw.weight(x) == mu.weight(x), || format!("case {k}: node {x}"))?;
                    nodes += 1;
                } else if st().all(|y| v.get(y) > u.get(y)) {
                    ensure(mw.weight(x) == mv.weight(x), || format!("case {k}: node {x}"))?;
                    nodes += 1;
                }
            }
        }
        Ok((nodes, format!("{nodes} stencil-pure nodes exact")))
    });
}

// ------------------------------------------------------------------ envelope

fn obstacle(rng: &mut ChaCha8Rng, g: &GridTorus) -> Vec<f64> {
    let amp = rng.random_range(0.2..2.0);
    direction(rng, g).iter().map(|v| amp * v).collect()
}

fn converged(form: &BackgroundForm<f64>, f: &[f64], tol: &Tolerances) -> std::result::Result<Vec<f64>, String> {
    let r = envelope(form, f, tol).or_fail()?;
    if r.status != EnvelopeStatus::Converged {
        return fail(format!("envelope status {:?}", r.status));
    }
    Ok(r.env.into_values())
}

fn envelope_suite(r: &mut Runner, tol: &Tolerances) {
    let slack = 1e-10;
    r.run("idempotence", |rng| {
        for k in 0..12 {
            let g = if k % 2 == 0 { grid(&[32]) } else { grid(&[10, 10]) };
            let form = some_form(rng, &g, k).scaled(10.0);
            let env = converged(&form, &obstacle(rng, &g), tol)?;
            let again = envelope(&form, &env, tol).or_fail()?;
            ensure(again.env.values() == env.as_slice() && again.sweeps == 1, || {
                format!("case {k}: second envelope differs")
            })?;
        }
        Ok((12, "bit-exact after one sweep".into()))
    });

    r.run("monotone_in_obstacle", |rng| {
        for k in 0..12 {
            let g = if k % 2 == 0 { grid(&[32]) } else { grid(&[10, 10]) };
            let form = some_form(rng, &g, k).scaled(10.0);
            let f = obstacle(rng, &g);
            let bump = obstacle(rng, &g);
            let f2: Vec<f64> = f.iter().zip(&bump).map(|(a, b)| a + b.abs()).collect();
            let (e1, e2) = (converged(&form, &f, tol)?, converged(&form, &f2, tol)?);
            ensure(le_within(&e1, &e2, slack), || format!("case {k}"))?;
        }
        Ok((12, format!("nodewise within {slack:e}")))
    });

    r.run("concave_under_min", |rng| {
        for k in 0..12 {
            let g = if k % 2 == 0 { grid(&[32]) } else { grid(&[10, 10]) };
            let form = some_form(rng, &g, k).scaled(10.0);
            let (f1, f2) = (obstacle(rng, &g), obstacle(rng, &g));
            let lo: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| a.min(*b)).collect();
            let (e1, e2, e) = (
                converged(&form, &f1, tol)?,
                converged(&form, &f2, tol)?,
                converged(&form, &lo, tol)?,
            );
            let m: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| a.min(*b)).collect();
            ensure(le_within(&e, &m, slack), || format!("case {k}"))?;
        }
        Ok((12, format!("nodewise within {slack:e}")))
    });

    r.run("one_dimensional_exactness", |rng| {
        let mut worst: f64 = 0.0;
        for k in 0..12 {
            let n = [16, 32, 64][k % 3];
            let g = grid(&[n]);
            let form = some_form(rng, &g, k).scaled(rng.random_range(1.0..50.0));
            let f = obstacle(rng, &g);
            let env = converged(&form, &f, tol)?;
            let gv: Vec<f64> = form.field().iter().map(|m| m.get(0, 0)).collect();
            let oracle = envelope_1d_hull(&gv, &f).ok_or("hull oracle infeasible")?;
            worst = worst.max(sup_gap(&env, &oracle));
        }
        ensure(worst <= 1e-8, || format!("gap to convex hull {worst:e}"))?;
        Ok((12, format!("gap to convex hull {worst:.1e}")))
    });

    r.run("contact_concentration", |rng| {
        for k in 0..12 {
            let g = grid(&[[16, 32, 64][k % 3]]);
            let form = some_form(rng, &g, k).scaled(20.0);
            let f = obstacle(rng, &g);
            let res = envelope(&form, &f, tol).or_fail()?;
            let c = contact_concentration(&form, &f, &res, 1e-6).or_fail()?;
            ensure(c.holds(), || format!("case {k}: offside {:e} > {:e}", c.offside_mass, c.tolerance))?;
        }
        Ok((12, "offside mass within 10h²·total".into()))
    });
}

// ------------------------------------------------------------------- volumes

fn volumes_suite(r: &mut Runner, tol: &Tolerances) {
    r.run("boundary_continuity", |_| {
        let eps: Vec<f64> = (1..=8).map(|j| 0.5f64.powi(j)).collect();
        for (g, a) in [
            (grid(&[12, 12]), SymMat::diag(&[1.0, 0.0])),
            (grid(&[32]), SymMat::scalar(1, 0.0)),
        ] {
            let d = g.dim();
            let rep = vol_class(
                &BackgroundForm::constant(&g, a).or_fail()?,
                &ReferenceMetric::identity(&g),
                &eps,
                tol,
            )
            .or_fail()?;
            let vals: Vec<f64> = rep.eps_trace.iter().map(|(_, v)| v.unwrap_or(f64::NAN)).collect();
            ensure(vals.windows(2).all(|w| w[1] <= w[0] + tol.tol_mono(w[0], w[1])), || {
                format!("d={d}: not monotone {vals:?}")
            })?;
            ensure(rep.vol_big.abs() <= 1e-12, || format!("d={d}: limit {}", rep.vol_big))?;
        }
        for g in [grid(&[16]), grid(&[8, 8])] {
            let d = g.dim();
            let rep = vol_class(
                &BackgroundForm::constant(&g, SymMat::scalar(d, -1.0)).or_fail()?,
                &ReferenceMetric::identity(&g),
                &[0.5, 0.25],
                tol,
            )
            .or_fail()?;
            ensure(rep.vol_big == 0.0 && rep.status == VolumeStatus::NotPsef, || {
                format!("d={d}: -I gives {} {:?}", rep.vol_big, rep.status)
            })?;
        }
        Ok((4, "monotone to 0; non-psef exactly 0".into()))
    });

    r.run("constant_closed_volume", |rng| {
        for k in 0..10 {
            let g = if k % 2 == 0 { grid(&[32]) } else { grid(&[10, 10]) };
            let a = random_spd(rng, g.dim(), 0.2, 3.0);
            let v = vol_big(&BackgroundForm::constant(&g, a).or_fail()?, tol).or_fail()?;
            ensure((v - a.det()).abs() <= 1e-14 * a.det(), || format!("case {k}: {v} vs {}", a.det()))?;
        }
        let mut ratios = Vec::new();
        for _ in 0..3 {
            let a = random_spd(rng, 2, 0.5, 2.0);
            let errs: Vec<f64> = [16, 32]
                .iter()
                .map(|&n| {
                    let g = grid(&[n, n]);
                    let p: Vec<f64> = (0..g.len())
                        .map(|i| {
                            let x = g.position(i);
                            ((std::f64::consts::TAU * x[0]).sin() * (std::f64::consts::TAU * x[1]).cos()) * 0.01
                        })
                        .collect();
                    let form = make_closed_form(&g, a, &p)?;
                    vol_big(&form, tol).map(|v| (v - a.det()).abs() / a.det())
                })
                .collect::<Result<_>>()
                .or_fail()?;
            if errs[0] > 1e-10 {
                ensure(errs[0] / errs[1] >= 2f64.powf(1.8), || format!("errors {errs:?} not O(h²)"))?;
                ratios.push(errs[0] / errs[1]);
            }
        }
        Ok((13, format!("constant exact; closed refinement ratios {ratios:.2?}")))
    });

    r.run("current_bounds_collapse_1d", |rng| {
        for k in 0..6 {
            let g = grid(&[32]);
            let form = closed_form(rng, &g);
            let phi = theta_sample(rng, &form, 0.5);
            let (lo, hi) = current_volume_bounds(&form, &phi, 6, 0.2, k, tol).or_fail()?;
            ensure((hi - lo).abs() <= 1e-12, || format!("case {k}: [{lo}, {hi}]"))?;
        }
        Ok((6, "lower = upper".into()))
    });

    r.run("bounds_ordered", |rng| {
        for k in 0..6 {
            let g = grid(&[8, 8]);
            let form = general_form(rng, &g);
            let phi = theta_sample(rng, &form, 0.5);
            let (lo, hi) = current_volume_bounds(&form, &phi, 4, 0.1, k, tol).or_fail()?;
            ensure(0.0 <= lo && lo <= hi, || format!("case {k}: [{lo}, {hi}]"))?;
            let rep = vol_class(&form, &ReferenceMetric::identity(&g), &[0.2, 0.1], tol).or_fail()?;
            ensure(0.0 <= rep.lower_est && rep.lower_est <= rep.upper_est, || {
                format!("case {k}: class estimates [{}, {}]", rep.lower_est, rep.upper_est)
            })?;
        }
        Ok((12, "0 <= lower <= upper".into()))
    });
}

// -------------------------------------------------------------------- solver

fn solver_suite(r: &mut Runner, tol: &Tolerances) {
    r.run("twisted_uniqueness", |rng| {
        let mut worst: f64 = 0.0;
        for k in 0..4 {
            let g = if k % 2 == 0 { grid(&[48]) } else { grid(&[8, 8]) };
            let form = some_form(rng, &g, k);
            let f = positive_density(rng, &g, 0.3);
            let (s, _) = bounded_setup(&form, f, 1.0, tol).or_fail()?;
            let vt = minimal_potential(&form, tol).or_fail()?;
            let a = solve_twisted_from(&s, vt.values().to_vec(), tol).or_fail()?;
            let b = solve_twisted_from(&s, vt.add_constant(-1.0).into_values(), tol).or_fail()?;
            ensure(a.converged && b.converged, || format!("case {k}: no convergence"))?;
            worst = worst.max(a.phi().sup_distance(b.phi()));
        }
        ensure(worst <= 1e-6, || format!("initializations differ by {worst:e}"))?;
        Ok((4, format!("sup gap {worst:.1e}")))
    });

    r.run("a_priori_bound", |rng| {
        // In d = 1 with constant G = a the maximum principle pins φ between the
        // extremes of log(a / f).
        let g = grid(&[48]);
        let mut worst = f64::INFINITY;
        for k in 0..6 {
            let a = rng.random_range(0.5..2.0);
            let form = BackgroundForm::constant(&g, SymMat::scalar(1, a)).or_fail()?;
            let amp = rng.random_range(0.0..0.9);
            let f = positive_density(rng, &g, amp);
            let (s, _) = bounded_setup(&form, f.clone(), 1.0, tol).or_fail()?;
            let res = solve_twisted(&s, tol).or_fail()?;
            ensure(res.converged, || format!("case {k}: no convergence"))?;
            let logs: Vec<f64> = f.iter().map(|v| (a / v).ln()).collect();
            let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let bound = lo.abs().max(hi.abs());
            let phi = res.phi().values();
            ensure(phi.iter().all(|&p| lo - 1e-8 <= p && p <= hi + 1e-8), || {
                format!("case {k}: φ leaves [{lo}, {hi}]")
            })?;
            ensure(res.c_report <= bound + 1e-8, || {
                format!("case {k}: C_report {} above {bound}", res.c_report)
            })?;
            worst = worst.min(bound - res.c_report);
        }
        Ok((6, format!("C_report below max|log(a/f)|, smallest margin {worst:.2e}")))
    });

    r.run("mass_identity_closed", |rng| {
        let mut worst: f64 = 0.0;
        for k in 0..4 {
            let d = 1 + k % 2;
            let n = if d == 1 { 48 } else { 10 };
            let g = grid(&vec![n; d]);
            let form = closed_form(rng, &g);
            let FormKind::Closed { constant, .. } = form.kind() else {
                return fail("closed form expected");
            };
            let class_mass = (1..=d).map(|i| i as f64).product::<f64>() * constant.det();
            let f = positive_density(rng, &g, 0.4);
            let (s, _) = bounded_setup(&form, f, 1.0, tol).or_fail()?;
            let res = solve_normalized(&s, tol).or_fail()?;
            ensure(res.converged, || format!("case {k}: continuation failed"))?;
            let c = res.c.unwrap_or(f64::NAN);
            let mass = ma(&form, res.phi()).or_fail()?.total_mass();
            let rhs = c * s.f_mass();
            ensure((mass - rhs).abs() <= 1e-6 * rhs, || format!("case {k}: mass {mass} vs c∫f {rhs}"))?;
            let rel = (rhs - class_mass).abs() / class_mass;
            let h2 = 1.0 / (n * n) as f64;
            ensure(rel <= 10.0 * h2, || format!("case {k}: c∫f {rhs} vs class mass {class_mass}"))?;
            worst = worst.max(rel / h2);
        }
        Ok((4, format!("within {worst:.2}h² of the class mass")))
    });

    r.run("continuation_trace", |rng| {
        let g = grid(&[48]);
        let form = general_form(rng, &g);
        let f = positive_density(rng, &g, 0.4);
        let (s, _) = bounded_setup(&form, f, 1.0, tol).or_fail()?;
        let res = solve_normalized(&s, tol).or_fail()?;
        ensure(res.converged && res.bounds_hold, || "continuation failed".into())?;
        let sups: Vec<f64> = res.continuation_trace.iter().map(|t| t.1).collect();
        let rising = sups.windows(2).filter(|w| w[1] > w[0]).count();
        Ok((
            sups.len(),
            format!("{} steps, sup u_λ increased on {rising} of them", sups.len()),
        ))
    });

    r.run("subsolution_range", |rng| {
        let mut smallest = f64::INFINITY;
        for k in 0..6 {
            let g = if k % 2 == 0 { grid(&[32]) } else { grid(&[8, 8]) };
            let form = some_form(rng, &g, k);
            let gv: Vec<f64> = direction(rng, &g).iter().map(|v| v.max(0.0)).collect();
            let (s, metric) = bounded_setup(&form, vec![1.0; g.len()], 1.0, tol).or_fail()?;
            let norm = s.dv.lp_norm(&gv, 2.0);
            let gv: Vec<f64> = gv.iter().map(|v| 0.9 * v / norm).collect();
            let eta = QPshFunction::zeros(&g);
            let sub = subsolution(&s, &eta, &gv, 2.0, &metric, tol).or_fail()?;
            ensure(
                (0..g.len()).all(|x| eta.get(x) <= sub.v.get(x) && sub.v.get(x) <= eta.get(x) + 1.0),
                || format!("case {k}: v leaves [η, η+1]"),
            )?;
            ensure(sub.m > 0.0, || format!("case {k}: m = {}", sub.m))?;
            smallest = smallest.min(sub.m);
        }
        Ok((6, format!("η <= v <= η+1; smallest m {smallest:.3}")))
    });

    r.run("domination", |rng| {
        let mut cases = 0;
        for k in 0..4 {
            let g = grid(&[32]);
            let form = some_form(rng, &g, k);
            let f1 = positive_density(rng, &g, 0.3);
            let f2: Vec<f64> = f1.iter().map(|v| 2.0 * v).collect();
            let (s1, _) = bounded_setup(&form, f1, 1.0, tol).or_fail()?;
            let (s2, _) = bounded_setup(&form, f2, 1.0, tol).or_fail()?;
            let u = solve_twisted(&s1, tol).or_fail()?;
            let v = solve_twisted(&s2, tol).or_fail()?;
            for c in [0.5, 0.9, 1.0, 2.0] {
                let res = domination_check(&form, u.phi(), v.phi(), c, &s1.omega, tol).or_fail()?;
                ensure(res.consistent, || format!("case {k}, c={c}: inconsistent"))?;
                cases += 1;
            }
            let same = domination_check(&form, u.phi(), u.phi(), 1.0, &s1.omega, tol).or_fail()?;
            ensure(same.consistent && same.full_domination, || format!("case {k}: u = v"))?;
            let region: Vec<bool> = (0..g.len()).map(|x| (8..24).contains(&x)).collect();
            let shifted = u.phi().add_constant(0.1);
            let lc = local_comparison_check(&form, &shifted, u.phi(), &region, tol).or_fail()?;
            ensure(lc.holds, || format!("case {k}: local comparison"))?;
            cases += 2;
        }
        Ok((cases, "all consistent".into()))
    });
}
