//! Independent oracles and instance generators shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use pluripot::SymMat;
use pluripot::{BackgroundForm, GridTorus, QPshFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Directional constraints `(x, x+e, x-e, sᵀG(x)s)` written out from scratch.
fn constraints(form: &BackgroundForm, grid: &GridTorus) -> Vec<(usize, usize, usize, f64)> {
    let d = grid.dim();
    let h: Vec<f64> = grid.sizes().iter().map(|&n| 1.0 / n as f64).collect();
    let mut steps: Vec<Vec<i64>> = Vec::new();
    for i in 0..d {
        let mut s = vec![0; d];
        s[i] = 1;
        steps.push(s);
    }
    for i in 0..d {
        for j in i + 1..d {
            for sign in [1, -1] {
                let mut s = vec![0; d];
                s[i] = 1;
                s[j] = sign;
                steps.push(s);
            }
        }
    }
    let shift = |x: usize, s: &[i64], sign: i64| {
        let c = grid.coords(x);
        let moved: Vec<usize> = (0..d)
            .map(|k| {
                let n = grid.sizes()[k] as i64;
                ((c[k] as i64 + sign * s[k]).rem_euclid(n)) as usize
            })
            .collect();
        grid.index(&moved)
    };
    let mut out = Vec::new();
    for x in 0..grid.len() {
        let g = form.at(x);
        for s in &steps {
            let mut q = 0.0;
            for a in 0..d {
                for b in 0..d {
                    q += g.get(a, b) * (s[a] as f64 * h[a]) * (s[b] as f64 * h[b]);
                }
            }
            out.push((x, shift(x, s, 1), shift(x, s, -1), q));
        }
    }
    out
}

/// Envelope by linear programming: maximize `Σu` subject to the directional
/// inequalities and `u <= f`, then refined by solving the active equality system.
pub fn lp_envelope(form: &BackgroundForm, f: &[f64]) -> Option<Vec<f64>> {
    let grid = form.grid().clone();
    let n = grid.len();
    let cons = constraints(form, &grid);
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..n).map(|x| lp.add_var(1.0, (f64::NEG_INFINITY, f[x]))).collect();
    for &(x, p, m, q) in &cons {
        let mut coef = std::collections::BTreeMap::new();
        *coef.entry(x).or_insert(0.0) += 1.0;
        *coef.entry(p).or_insert(0.0) -= 0.5;
        *coef.entry(m).or_insert(0.0) -= 0.5;
        let terms: Vec<_> = coef
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(k, c)| (vars[k], c))
            .collect();
        if terms.is_empty() {
            if q < 0.0 {
                return None;
            }
            continue;
        }
        lp.add_constraint(&terms[..], ComparisonOp::Le, 0.5 * q);
    }
    let sol = lp.solve().ok()?;
    let u: Vec<f64> = vars.iter().map(|&v| sol[v]).collect();
    Some(refine_vertex(&grid, &cons, f, u))
}

/// Re-solves the LP vertex exactly: each node keeps whichever of its
/// constraints is tightest as an equation.
fn refine_vertex(
    grid: &GridTorus,
    cons: &[(usize, usize, usize, f64)],
    f: &[f64],
    u: Vec<f64>,
) -> Vec<f64> {
    let n = grid.len();
    let per = cons.len() / n;
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for x in 0..n {
        let obstacle_gap = f[x] - u[x];
        let mut best = (obstacle_gap, None);
        for k in x * per..(x + 1) * per {
            let (_, p, m, q) = cons[k];
            let gap = 0.5 * (u[p] + u[m] + q) - u[x];
            if gap < best.0 {
                best = (gap, Some(k));
            }
        }
        match best.1 {
            None => {
                a[x][x] = 1.0;
                b[x] = f[x];
            }
            Some(k) => {
                let (_, p, m, q) = cons[k];
                a[x][x] += 1.0;
                a[x][p] -= 0.5;
                a[x][m] -= 0.5;
                b[x] = 0.5 * q;
            }
        }
    }
    match gauss_solve(a, b) {
        Some(v) if v.iter().zip(&u).all(|(r, s)| (r - s).abs() < 1e-6) => v,
        _ => u,
    }
}

/// Dense Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-14 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let k = a[r][c] / a[c][c];
            if k != 0.0 {
                for j in c..n {
                    a[r][j] -= k * a[c][j];
                }
                b[r] -= k * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| a[r][j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// True iff some function satisfies the directional inequalities (LP feasibility).
pub fn lp_feasible(form: &BackgroundForm) -> bool {
    let n = form.grid().len();
    lp_envelope(form, &vec![0.0; n]).is_some()
}

/// Solves the cyclic tridiagonal system `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = r_i`.
pub fn cyclic_tridiagonal(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Vec<f64> {
    let n = b.len();
    let thomas = |bb: &[f64], rr: &[f64]| {
        let mut cp = vec![0.0; n];
        let mut dp = vec![0.0; n];
        cp[0] = c[0] / bb[0];
        dp[0] = rr[0] / bb[0];
        for i in 1..n {
            let m = bb[i] - a[i] * cp[i - 1];
            cp[i] = if i + 1 < n { c[i] / m } else { 0.0 };
            dp[i] = (rr[i] - a[i] * dp[i - 1]) / m;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = dp[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = dp[i] - cp[i] * x[i + 1];
        }
        x
    };
    // Sherman–Morrison on the corner entries a_0 (row 0, col n-1) and c_{n-1}.
    let gamma = -b[0];
    let mut bb = b.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= c[n - 1] * a[0] / gamma;
    let y = thomas(&bb, r);
    let mut uvec = vec![0.0; n];
    uvec[0] = gamma;
    uvec[n - 1] = c[n - 1];
    let z = thomas(&bb, &uvec);
    let vy = y[0] + a[0] / gamma * y[n - 1];
    let vz = z[0] + a[0] / gamma * z[n - 1];
    y.iter().zip(&z).map(|(yi, zi)| yi - vy / (1.0 + vz) * zi).collect()
}

/// One-dimensional twisted equation `G + φ'' = e^{λφ} f w` by Newton on the
/// untransformed residual with a cyclic tridiagonal solve per step.
pub fn twisted_oracle_1d(g: &[f64], f: &[f64], w: &[f64], lambda: f64, start: f64) -> Vec<f64> {
    let n = g.len();
    let h2 = 1.0 / (n * n) as f64;
    let mut phi = vec![start; n];
    for _ in 0..200 {
        let mut res = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let l = phi[(i + n - 1) % n];
            let r = phi[(i + 1) % n];
            let e = (lambda * phi[i]).exp() * f[i] * w[i];
            res[i] = g[i] + (l - 2.0 * phi[i] + r) / h2 - e;
            diag[i] = -2.0 / h2 - lambda * e;
            worst = worst.max(res[i].abs());
        }
        if worst < 1e-13 {
            break;
        }
        let off = vec![1.0 / h2; n];
        let rhs: Vec<f64> = res.iter().map(|x| -x).collect();
        let delta = cyclic_tridiagonal(&off, &diag, &off, &rhs);
        for i in 0..n {
            phi[i] += delta[i];
        }
    }
    phi
}

/// `log2(e_coarse / e_fine)`.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Random trigonometric polynomial with modes `|k_i| <= 2`.
pub fn trig_poly(grid: &GridTorus, r: &mut ChaCha8Rng, terms: usize) -> impl Fn([f64; 3]) -> f64 {
    let d = grid.dim();
    let mut modes = Vec::new();
    while modes.len() < terms {
        let k: Vec<i64> = (0..d).map(|_| r.random_range(-2..=2)).collect();
        if k.iter().all(|&v| v == 0) {
            continue;
        }
        modes.push((k, r.random_range(-1.0..1.0), r.random_range(0.0..TAU)));
    }
    move |x: [f64; 3]| {
        modes
            .iter()
            .map(|(k, a, p)| {
                let arg: f64 = k.iter().enumerate().map(|(j, &kj)| kj as f64 * x[j]).sum();
                a * (TAU * arg + p).cos()
            })
            .sum()
    }
}

pub fn sample(grid: &GridTorus, p: &impl Fn([f64; 3]) -> f64) -> Vec<f64> {
    (0..grid.len()).map(|i| p(grid.position(i))).collect()
}

/// Discrete Hessian written directly from the neighbor formulas.
pub fn hessian_oracle(grid: &GridTorus, u: &[f64], x: usize) -> Vec<Vec<f64>> {
    let d = grid.dim();
    let c = grid.coords(x);
    let at = |off: &[i64]| {
        let moved: Vec<usize> = (0..d)
            .map(|k| {
                let n = grid.sizes()[k] as i64;
                (c[k] as i64 + off[k]).rem_euclid(n) as usize
            })
            .collect();
        u[grid.index(&moved)]
    };
    let h: Vec<f64> = grid.sizes().iter().map(|&n| 1.0 / n as f64).collect();
    let mut m = vec![vec![0.0; d]; d];
    for i in 0..d {
        let mut p = vec![0; d];
        p[i] = 1;
        let q: Vec<i64> = p.iter().map(|v| -v).collect();
        m[i][i] = (at(&p) - 2.0 * u[x] + at(&q)) / (h[i] * h[i]);
        for j in i + 1..d {
            let mut pp = vec![0; d];
            pp[i] = 1;
            pp[j] = 1;
            let mm: Vec<i64> = pp.iter().map(|v| -v).collect();
            let mut pm = vec![0; d];
            pm[i] = 1;
            pm[j] = -1;
            let mp: Vec<i64> = pm.iter().map(|v| -v).collect();
            let v = (at(&pp) + at(&mm) - at(&pm) - at(&mp)) / (4.0 * h[i] * h[j]);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

fn det(m: &[Vec<f64>]) -> f64 {
    match m.len() {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
    }
}

/// `d! Σ det(G + D²u) ∏h` by direct summation.
pub fn mass_oracle(form: &BackgroundForm, u: &[f64]) -> f64 {
    let grid = form.grid();
    let d = grid.dim();
    let fact: f64 = (1..=d).map(|k| k as f64).product();
    let cv: f64 = grid.sizes().iter().map(|&n| 1.0 / n as f64).product();
    (0..grid.len())
        .map(|x| {
            let hess = hessian_oracle(grid, u, x);
            let g = form.at(x);
            let m: Vec<Vec<f64>> = (0..d)
                .map(|i| (0..d).map(|j| g.get(i, j) + hess[i][j]).collect())
                .collect();
            fact * det(&m)
        })
        .sum::<f64>()
        * cv
}

/// Smallest eigenvalue of `G + D²u` over all nodes (independent 2x2 formula).
pub fn min_eig_oracle(form: &BackgroundForm, u: &[f64]) -> f64 {
    let grid = form.grid();
    let d = grid.dim();
    (0..grid.len())
        .map(|x| {
            let h = hessian_oracle(grid, u, x);
            let g = form.at(x);
            if d == 1 {
                g.get(0, 0) + h[0][0]
            } else {
                let a = g.get(0, 0) + h[0][0];
                let b = g.get(0, 1) + h[0][1];
                let c = g.get(1, 1) + h[1][1];
                0.5 * (a + c) - (0.25 * (a - c).powi(2) + b * b).sqrt()
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Largest `s` with `min eig(G + s D²p) >= 0`, by bisection on the oracle.
pub fn admissible_scale(form: &BackgroundForm, p: &[f64]) -> f64 {
    let scaled = |s: f64| p.iter().map(|v| v * s).collect::<Vec<f64>>();
    let (mut lo, mut hi) = (0.0, 1.0);
    while min_eig_oracle(form, &scaled(hi)) >= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return lo;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if min_eig_oracle(form, &scaled(mid)) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// A θ-psh potential: random trig polynomial at `frac` of its admissible scale.
pub fn theta_psh(form: &BackgroundForm, r: &mut ChaCha8Rng, frac: f64) -> QPshFunction {
    let grid = form.grid().clone();
    let p = sample(&grid, &trig_poly(&grid, r, 3));
    let s = admissible_scale(form, &p) * frac;
    QPshFunction::new(&grid, p.iter().map(|v| v * s).collect()).unwrap()
}

/// `G = diag(1 + 0.3 sin(2πy), 1)` in 2D, `1 + 0.3 sin(2πx)` in 1D.
pub fn general_form(grid: &GridTorus, amp: f64) -> BackgroundForm {
    let d = grid.dim();
    BackgroundForm::from_fn(grid, |x| {
        let mut m = SymMat::identity(d);
        let axis = d - 1;
        m.set(0, 0, 1.0 + amp * (TAU * x[axis]).sin());
        m
    })
    .unwrap()
}

/// Random non-closed positive form with smooth entries.
pub fn random_general_form(grid: &GridTorus, r: &mut ChaCha8Rng) -> BackgroundForm {
    let d = grid.dim();
    let p = trig_poly(grid, r, 2);
    let q = trig_poly(grid, r, 2);
    let a: f64 = r.random_range(1.0..2.0);
    let b: f64 = r.random_range(0.05..0.25);
    BackgroundForm::from_fn(grid, |x| {
        let mut m = SymMat::scalar(d, a);
        m.set(0, 0, a + b * p(x));
        if d > 1 {
            m.set(1, 1, a + b * q(x));
            m.set(0, 1, 0.5 * b * p(x) * q(x));
        }
        m
    })
    .unwrap()
}

/// [`theta_psh`] at a uniform fraction in `[lo, hi)` of the admissible scale.
pub fn theta_psh_in(form: &BackgroundForm, r: &mut ChaCha8Rng, lo: f64, hi: f64) -> QPshFunction {
    let frac = r.random_range(lo..hi);
    theta_psh(form, r, frac)
}

/// Least-squares slope of `log e` against `log(1/n)`.
pub fn fitted_order(sizes: &[usize], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = sizes.iter().map(|&n| -(n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
