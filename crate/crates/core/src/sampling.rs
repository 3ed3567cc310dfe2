//! Seeded generators of periodic potentials that are convex relative to a
//! positive matrix field.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::geometry::discrete_hessian;
use crate::grid::GridTorus;
use crate::linalg::SymMat;
use crate::qpsh::QPshFunction;
use crate::scalar::Scalar;

/// Random trigonometric polynomials `Σ a_k cos(2π k·x + φ_k)` with `|k_i| <= max_mode`,
/// scaled so that `C·W + D²u >= 0` at every node.
pub struct ConvexSampler {
    rng: ChaCha8Rng,
    pub max_mode: i64,
    pub terms: usize,
}

impl ConvexSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            max_mode: 2,
            terms: 4,
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// A random nonconstant trigonometric polynomial with unit-ish coefficients.
    pub fn direction<T: Scalar>(&mut self, grid: &GridTorus) -> Vec<T> {
        let d = grid.dim();
        let mut modes: Vec<([i64; 3], f64, f64)> = Vec::with_capacity(self.terms);
        while modes.len() < self.terms {
            let mut k = [0i64; 3];
            for ki in k.iter_mut().take(d) {
                *ki = self.rng.random_range(-self.max_mode..=self.max_mode);
            }
            if k.iter().all(|&x| x == 0) {
                continue;
            }
            let amp = self.rng.random_range(-1.0..1.0);
            let phase = self.rng.random_range(0.0..std::f64::consts::TAU);
            modes.push((k, amp, phase));
        }
        (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                let v: f64 = modes
                    .iter()
                    .map(|(k, a, p)| {
                        let arg = (0..d).map(|j| k[j] as f64 * x[j]).sum::<f64>();
                        a * (std::f64::consts::TAU * arg + p).cos()
                    })
                    .sum();
                T::of(v)
            })
            .collect()
    }

    /// A random potential on the boundary of the admissible cone: the largest
    /// multiple `s p` of a random direction with `C W + s D²p >= 0`.
    pub fn extremal<T: Scalar>(
        &mut self,
        grid: &GridTorus,
        metric: &[SymMat<T>],
        c: T,
        tol: &Tolerances,
    ) -> Result<QPshFunction<T>> {
        self.scaled(grid, metric, c, tol, T::one())
    }

    /// As [`ConvexSampler::extremal`] with the scale multiplied by a uniform
    /// factor in `[lo, hi]`.
    pub fn fractional<T: Scalar>(
        &mut self,
        grid: &GridTorus,
        metric: &[SymMat<T>],
        c: T,
        lo: f64,
        hi: f64,
        tol: &Tolerances,
    ) -> Result<QPshFunction<T>> {
        let frac = if hi > lo { self.rng.random_range(lo..hi) } else { lo };
        self.scaled(grid, metric, c, tol, T::of(frac))
    }

    fn scaled<T: Scalar>(
        &mut self,
        grid: &GridTorus,
        metric: &[SymMat<T>],
        c: T,
        tol: &Tolerances,
        frac: T,
    ) -> Result<QPshFunction<T>> {
        if !(c > T::zero()) || metric.len() != grid.len() {
            return Err(Error::InvalidArgument(
                "sampler needs a positive bound and a matching metric field".into(),
            ));
        }
        for _ in 0..tol.sampler_retries.max(1) {
            let p = self.direction::<T>(grid);
            if let Some(s) = max_admissible_scale(grid, metric, c, &p) {
                let s = s * frac;
                return QPshFunction::new(grid, p.iter().map(|&v| v * s).collect());
            }
        }
        Err(Error::SamplingExhausted(tol.sampler_retries.max(1)))
    }
}

/// Largest `s >= 0` with `λ_min(C W(x) + s D²p(x)) >= 0` at every node,
/// found by bisection (the constraint is concave in `s`). Returns `None` when
/// the direction is degenerate or the base field is not positive.
pub fn max_admissible_scale<T: Scalar>(
    grid: &GridTorus,
    metric: &[SymMat<T>],
    c: T,
    p: &[T],
) -> Option<T> {
    let hess: Vec<SymMat<T>> = (0..grid.len()).map(|i| discrete_hessian(grid, p, i)).collect();
    let base: Vec<SymMat<T>> = metric.iter().map(|w| w.scale(c)).collect();
    let lo_base = base.iter().map(|b| b.min_eigenvalue()).fold(T::infinity(), T::min);
    let hi_base = base
        .iter()
        .map(|b| -b.scale(-T::one()).min_eigenvalue())
        .fold(T::zero(), T::max);
    let worst = hess
        .iter()
        .map(|h| -h.min_eigenvalue())
        .fold(T::zero(), T::max);
    if !(lo_base > T::zero()) || !(worst > T::zero()) {
        return None;
    }
    let ok = |s: T| {
        base.iter()
            .zip(&hess)
            .all(|(b, h)| (*b + h.scale(s)).min_eigenvalue() >= T::zero())
    };
    let mut lo = T::of(0.5) * lo_base / worst;
    let mut hi = hi_base / worst;
    if !ok(lo) {
        return None;
    }
    if ok(hi) {
        return Some(hi);
    }
    for _ in 0..60 {
        let mid = (lo + hi) * T::of(0.5);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}
