//! Background forms, reference metrics, volume forms and positivity probes.
//!
//! A background form assigns a symmetric `d x d` matrix to every node. Closed
//! forms are generated as `A + D²τ` with `A` constant and `τ` periodic; their
//! class is the constant part `A`.

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::grid::GridTorus;
use crate::linalg::SymMat;
use crate::qpsh::{sublevel_mask, QPshFunction};
use crate::sampling::ConvexSampler;
use crate::scalar::Scalar;

/// Discrete Hessian of a finite grid function at one node.
///
/// Diagonal entries are central second differences; off-diagonal entries use
/// the four-point formula
/// `(u(x+ei+ej) + u(x-ei-ej) - u(x+ei-ej) - u(x-ei+ej)) / (4 h_i h_j)`.
pub fn discrete_hessian<T: Scalar>(grid: &GridTorus, u: &[T], idx: usize) -> SymMat<T> {
    let d = grid.dim();
    let mut m = SymMat::zeros(d);
    let ux = u[idx];
    for k in 0..d {
        let [p, q] = grid.axis_neighbors(idx, k);
        let h = grid.spacing::<T>(k);
        m.set(k, k, ((u[p] - ux) - (ux - u[q])) / (h * h));
    }
    let four = T::of(4.0);
    for (pi, &(i, j)) in grid.pairs().iter().enumerate() {
        let [pp, mm, pm, mp] = grid.diagonal_neighbors(idx, pi);
        let hij = grid.spacing::<T>(i) * grid.spacing::<T>(j);
        m.set(i, j, ((u[pp] + u[mm]) - (u[pm] + u[mp])) / (four * hij));
    }
    m
}

/// One term of the linearization of [`discrete_hessian`]: entry `(i, j)` at
/// the evaluation node depends on `u[node]` with coefficient `coef`.
#[derive(Clone, Copy, Debug)]
pub struct HessianTap<T> {
    pub node: usize,
    pub i: usize,
    pub j: usize,
    pub coef: T,
}

/// Coefficients of `u ↦ D²u(x)`; every nonzero entry dependence is listed once
/// per upper-triangular `(i, j)`.
pub fn hessian_taps<T: Scalar>(grid: &GridTorus, idx: usize) -> Vec<HessianTap<T>> {
    let d = grid.dim();
    let mut taps = Vec::with_capacity(3 * d + 4 * grid.pairs().len());
    for k in 0..d {
        let [p, q] = grid.axis_neighbors(idx, k);
        let h = grid.spacing::<T>(k);
        let c = T::one() / (h * h);
        taps.push(HessianTap { node: p, i: k, j: k, coef: c });
        taps.push(HessianTap { node: q, i: k, j: k, coef: c });
        taps.push(HessianTap { node: idx, i: k, j: k, coef: -(c + c) });
    }
    for (pi, &(i, j)) in grid.pairs().iter().enumerate() {
        let [pp, mm, pm, mp] = grid.diagonal_neighbors(idx, pi);
        let c = T::one() / (T::of(4.0) * grid.spacing::<T>(i) * grid.spacing::<T>(j));
        taps.push(HessianTap { node: pp, i, j, coef: c });
        taps.push(HessianTap { node: mm, i, j, coef: c });
        taps.push(HessianTap { node: pm, i, j, coef: -c });
        taps.push(HessianTap { node: mp, i, j, coef: -c });
    }
    taps
}

#[derive(Clone, Debug, PartialEq)]
pub enum FormKind<T> {
    /// `G = A + D²τ`; the class is determined by `constant`.
    Closed { constant: SymMat<T>, potential: Vec<T> },
    General,
}

/// Smooth real (1,1)-form avatar: a symmetric matrix per node.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundForm<T> {
    grid: GridTorus,
    field: Vec<SymMat<T>>,
    kind: FormKind<T>,
}

impl<T: Scalar> BackgroundForm<T> {
    /// Closed form with zero potential.
    pub fn constant(grid: &GridTorus, a: SymMat<T>) -> Result<Self> {
        make_closed_form(grid, a, &vec![T::zero(); grid.len()])
    }

    /// Non-closed form from an explicit per-node field.
    pub fn general(grid: &GridTorus, field: Vec<SymMat<T>>) -> Result<Self> {
        if field.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "form has {} nodes, grid has {}",
                field.len(),
                grid.len()
            )));
        }
        if let Some(m) = field.iter().find(|m| m.dim() != grid.dim()) {
            return Err(Error::DimensionMismatch(format!(
                "matrix of size {} on a {}-dimensional grid",
                m.dim(),
                grid.dim()
            )));
        }
        if field.iter().any(|m| !m.max_abs().is_finite()) {
            return Err(Error::InvalidArgument("form entries must be finite".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            field,
            kind: FormKind::General,
        })
    }

    /// General form evaluated from node positions.
    pub fn from_fn(grid: &GridTorus, f: impl Fn([f64; 3]) -> SymMat<T>) -> Result<Self> {
        let field = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self::general(grid, field)
    }

    #[inline]
    pub fn grid(&self) -> &GridTorus {
        &self.grid
    }

    #[inline]
    pub fn at(&self, idx: usize) -> SymMat<T> {
        self.field[idx]
    }

    pub fn field(&self) -> &[SymMat<T>] {
        &self.field
    }

    pub fn kind(&self) -> &FormKind<T> {
        &self.kind
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.kind, FormKind::Closed { .. })
    }

    /// Largest entry magnitude over all nodes.
    pub fn sup_norm(&self) -> T {
        self.field.iter().fold(T::zero(), |m, g| m.max(g.max_abs()))
    }

    /// Smallest `C >= 0` with `-C W <= G <= C W` at every node, for `W` the identity.
    pub fn spectral_bound(&self) -> T {
        self.field.iter().fold(T::zero(), |m, g| {
            let lo = g.min_eigenvalue();
            let hi = -g.scale(-T::one()).min_eigenvalue();
            m.max(lo.abs()).max(hi.abs())
        })
    }

    /// `t G`; closed forms stay closed with `(tA, tτ)`.
    pub fn scaled(&self, t: T) -> Self {
        let field = self.field.iter().map(|g| g.scale(t)).collect();
        let kind = match &self.kind {
            FormKind::Closed { constant, potential } => FormKind::Closed {
                constant: constant.scale(t),
                potential: potential.iter().map(|&x| x * t).collect(),
            },
            FormKind::General => FormKind::General,
        };
        Self {
            grid: self.grid.clone(),
            field,
            kind,
        }
    }

    /// `a G + b G'`; closed when both inputs are.
    pub fn combine(a: T, f1: &Self, b: T, f2: &Self) -> Result<Self> {
        if f1.grid != f2.grid {
            return Err(Error::DimensionMismatch("forms live on different grids".into()));
        }
        let field = f1
            .field
            .iter()
            .zip(&f2.field)
            .map(|(g1, g2)| g1.scale(a) + g2.scale(b))
            .collect();
        let kind = match (&f1.kind, &f2.kind) {
            (
                FormKind::Closed { constant: a1, potential: t1 },
                FormKind::Closed { constant: a2, potential: t2 },
            ) => FormKind::Closed {
                constant: a1.scale(a) + a2.scale(b),
                potential: t1.iter().zip(t2).map(|(&x, &y)| a * x + b * y).collect(),
            },
            _ => FormKind::General,
        };
        Ok(Self {
            grid: f1.grid.clone(),
            field,
            kind,
        })
    }

    /// `G + eps W`. Stays closed when `W` is constant.
    pub fn plus_metric(&self, eps: T, metric: &ReferenceMetric<T>) -> Result<Self> {
        if metric.grid != self.grid {
            return Err(Error::DimensionMismatch("metric lives on a different grid".into()));
        }
        let shifted = |g: &SymMat<T>, w: &SymMat<T>| *g + w.scale(eps);
        let field = self
            .field
            .iter()
            .zip(&metric.field)
            .map(|(g, w)| shifted(g, w))
            .collect();
        let kind = match (&self.kind, metric.constant_value()) {
            (FormKind::Closed { constant, potential }, Some(w)) => FormKind::Closed {
                constant: shifted(constant, &w),
                potential: potential.clone(),
            },
            _ => FormKind::General,
        };
        Ok(Self {
            grid: self.grid.clone(),
            field,
            kind,
        })
    }

    /// Nodewise Loewner comparison `G <= G'` up to `tol`.
    pub fn loewner_le(&self, other: &Self, tol: T) -> bool {
        self.grid == other.grid
            && self
                .field
                .iter()
                .zip(&other.field)
                .all(|(g1, g2)| (*g2 - *g1).min_eigenvalue() >= -tol)
    }
}

/// `G = A + D²τ`.
pub fn make_closed_form<T: Scalar>(
    grid: &GridTorus,
    a: SymMat<T>,
    tau: &[T],
) -> Result<BackgroundForm<T>> {
    if a.dim() != grid.dim() {
        return Err(Error::DimensionMismatch(format!(
            "constant part is {}x{}, grid dimension is {}",
            a.dim(),
            a.dim(),
            grid.dim()
        )));
    }
    if tau.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "potential has {} values, grid has {} nodes",
            tau.len(),
            grid.len()
        )));
    }
    if tau.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("closed-form potential must be finite".into()));
    }
    let field = (0..grid.len())
        .map(|i| a + discrete_hessian(grid, tau, i))
        .collect();
    Ok(BackgroundForm {
        grid: grid.clone(),
        field,
        kind: FormKind::Closed {
            constant: a,
            potential: tau.to_vec(),
        },
    })
}

/// Decides `{θ₁} = {θ₂}` for closed forms by comparing constant parts.
pub fn class_equivalent<T: Scalar>(
    f1: &BackgroundForm<T>,
    f2: &BackgroundForm<T>,
    tol: &Tolerances,
) -> Result<bool> {
    if f1.grid != f2.grid {
        return Err(Error::DimensionMismatch("forms live on different grids".into()));
    }
    match (&f1.kind, &f2.kind) {
        (FormKind::Closed { constant: a1, .. }, FormKind::Closed { constant: a2, .. }) => {
            Ok((*a1 - *a2).max_abs().as_f64() <= tol.tol_class)
        }
        _ => Err(Error::Unsupported(
            "class equality is only decidable for closed forms".into(),
        )),
    }
}

/// Reference Hermitian metric: a positive definite matrix per node.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceMetric<T> {
    grid: GridTorus,
    field: Vec<SymMat<T>>,
}

impl<T: Scalar> ReferenceMetric<T> {
    pub fn identity(grid: &GridTorus) -> Self {
        Self {
            grid: grid.clone(),
            field: vec![SymMat::identity(grid.dim()); grid.len()],
        }
    }

    pub fn new(grid: &GridTorus, field: Vec<SymMat<T>>, tol: &Tolerances) -> Result<Self> {
        if field.len() != grid.len() || field.iter().any(|m| m.dim() != grid.dim()) {
            return Err(Error::DimensionMismatch("metric field does not match grid".into()));
        }
        if let Some((i, m)) = field
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.min_eigenvalue().as_f64() >= tol.eps_pd))
        {
            return Err(Error::InvalidArgument(format!(
                "metric not positive definite at node {i} (min eigenvalue {})",
                m.min_eigenvalue()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            field,
        })
    }

    pub fn grid(&self) -> &GridTorus {
        &self.grid
    }

    #[inline]
    pub fn at(&self, idx: usize) -> SymMat<T> {
        self.field[idx]
    }

    pub fn field(&self) -> &[SymMat<T>] {
        &self.field
    }

    /// Smallest eigenvalue over all nodes.
    pub fn min_eigenvalue(&self) -> T {
        self.field
            .iter()
            .map(|w| w.min_eigenvalue())
            .fold(T::infinity(), T::min)
    }

    /// The common value when the metric is the same at every node.
    pub fn constant_value(&self) -> Option<SymMat<T>> {
        let w0 = self.field[0];
        self.field.iter().all(|w| *w == w0).then_some(w0)
    }

    /// The metric viewed as a background form (closed when constant).
    pub fn as_form(&self) -> BackgroundForm<T> {
        match self.constant_value() {
            Some(w) => BackgroundForm::constant(&self.grid, w).expect("dimensions agree"),
            None => BackgroundForm::general(&self.grid, self.field.clone()).expect("valid field"),
        }
    }
}

/// Positive per-node volume weights; `mass = Σ weights · ∏h_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeForm<T> {
    grid: GridTorus,
    weights: Vec<T>,
}

impl<T: Scalar> VolumeForm<T> {
    pub fn uniform(grid: &GridTorus) -> Self {
        Self {
            grid: grid.clone(),
            weights: vec![T::one(); grid.len()],
        }
    }

    pub fn new(grid: &GridTorus, weights: Vec<T>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::DimensionMismatch("volume weights do not match grid".into()));
        }
        if weights.iter().any(|&w| !(w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidArgument(
                "volume weights must be positive and finite".into(),
            ));
        }
        Ok(Self {
            grid: grid.clone(),
            weights,
        })
    }

    pub fn grid(&self) -> &GridTorus {
        &self.grid
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn mass(&self) -> T {
        crate::scalar::ordered_sum(self.weights.iter().copied()) * self.grid.cell_volume()
    }

    /// `∫ g dV` for a per-node function.
    pub fn integrate(&self, g: &[T]) -> T {
        crate::scalar::ordered_sum(self.weights.iter().zip(g).map(|(&w, &x)| w * x))
            * self.grid.cell_volume()
    }

    /// `(∫ |g|^p dV)^{1/p}`.
    pub fn lp_norm(&self, g: &[T], p: T) -> T {
        let s: Vec<T> = g.iter().map(|x| x.abs().powf(p)).collect();
        self.integrate(&s).powf(T::one() / p)
    }
}

#[derive(Clone, Debug)]
pub struct PsefProbe<T> {
    pub feasible: bool,
    pub witness: Option<QPshFunction<T>>,
    /// Smallest eigenvalue of `G + D²u` reached by the search.
    pub best_min_eigenvalue: T,
    pub iterations: usize,
}

/// Searches for a periodic `u` with `G + D²u >= -tol_psh` by gradient descent on
/// `Σ max(0, m - λ_min(G + D²u))²`, where the margin `m` is half the smallest
/// eigenvalue of the averaged form (clamped at 0). A negative answer is only
/// "not found".
pub fn psef_probe<T: Scalar>(form: &BackgroundForm<T>, iters: usize, tol: &Tolerances) -> PsefProbe<T> {
    let grid = form.grid();
    let n = grid.len();
    let d = grid.dim();
    let thresh = T::of(tol.tol_psh);
    let taps: Vec<Vec<HessianTap<T>>> = (0..n).map(|i| hessian_taps(grid, i)).collect();
    let mut mean = SymMat::zeros(d);
    for g in form.field() {
        mean = mean + *g;
    }
    let margin = (mean.scale(T::one() / T::of(n as f64)).min_eigenvalue() * T::of(0.5)).max(T::zero());

    let mut op = T::zero();
    for k in 0..d {
        op += T::of(4.0) / grid.spacing::<T>(k).powi(2);
    }
    for &(i, j) in grid.pairs() {
        op += T::of(2.0) / (grid.spacing::<T>(i) * grid.spacing::<T>(j));
    }
    let mut step = T::one() / (T::of(2.0) * op * op);

    // penalty, worst eigenvalue and gradient at u
    let eval = |u: &[T]| {
        let mut grad = vec![T::zero(); n];
        let mut worst = T::infinity();
        let mut pen = T::zero();
        for x in 0..n {
            let m = form.at(x) + discrete_hessian(grid, u, x);
            let (lam, v) = m.min_eigen();
            worst = worst.min(lam);
            let gap = (margin - lam).max(T::zero());
            if gap > T::zero() {
                pen += gap * gap;
                for t in &taps[x] {
                    let w = if t.i == t.j { T::one() } else { T::of(2.0) };
                    grad[t.node] -= T::of(2.0) * gap * t.coef * w * v[t.i] * v[t.j];
                }
            }
        }
        (pen, worst, grad)
    };

    let mut u = vec![T::zero(); n];
    let (mut pen, mut worst, mut grad) = eval(&u);
    let mut best = worst;
    for it in 0..=iters {
        best = best.max(worst);
        if worst >= -thresh {
            return PsefProbe {
                feasible: true,
                witness: Some(QPshFunction::new(grid, u).expect("finite witness")),
                best_min_eigenvalue: worst,
                iterations: it,
            };
        }
        if it == iters {
            break;
        }
        let mut trial: Vec<T> = u.iter().zip(&grad).map(|(&a, &g)| a - step * g).collect();
        let avg = crate::scalar::ordered_sum(trial.iter().copied()) / T::of(n as f64);
        trial.iter_mut().for_each(|x| *x -= avg);
        let (p2, w2, g2) = eval(&trial);
        if p2 <= pen {
            u = trial;
            pen = p2;
            worst = w2;
            grad = g2;
            step *= T::of(1.2);
        } else {
            step *= T::of(0.5);
        }
    }
    PsefProbe {
        feasible: false,
        witness: None,
        best_min_eigenvalue: best,
        iterations: iters,
    }
}

/// True iff `G + D²ρ - eps W >= -tol_big` at every node of `{ρ > -∞}` whose full
/// stencil avoids the poles of `ρ` (and at least one such node exists).
pub fn big_certificate<T: Scalar>(
    form: &BackgroundForm<T>,
    rho: &QPshFunction<T>,
    eps: T,
    metric: &ReferenceMetric<T>,
    tol: &Tolerances,
) -> bool {
    let grid = form.grid();
    if rho.grid() != grid || metric.grid() != grid {
        return false;
    }
    let mask = sublevel_mask(&[rho], rho.truncation_level()).expect("one function");
    let thresh = -T::of(tol.tol_big);
    let mut any = false;
    for x in 0..grid.len() {
        if !mask.stencil_inside[x] {
            continue;
        }
        any = true;
        let m = form.at(x) + discrete_hessian(grid, rho.values(), x) - metric.at(x).scale(eps);
        if m.min_eigenvalue() < thresh {
            return false;
        }
    }
    any
}

/// Largest total Monge–Ampère mass over `samples` random `W`-convex periodic
/// potentials; a lower estimate of the discrete upper volume of `W`.
pub fn upper_volume_probe<T: Scalar>(
    metric: &ReferenceMetric<T>,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<T> {
    if samples == 0 {
        return Err(Error::InvalidArgument("upper_volume_probe needs samples >= 1".into()));
    }
    let form = metric.as_form();
    let mut sampler = ConvexSampler::new(seed);
    let mut best = T::neg_infinity();
    for _ in 0..samples {
        let u = sampler.extremal(metric.grid(), metric.field(), T::one(), tol)?;
        let mass = crate::ma::ma(&form, &u)?.total_mass();
        best = best.max(mass);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sin_tau(grid: &GridTorus, amp: f64) -> Vec<f64> {
        (0..grid.len())
            .map(|i| amp * (2.0 * std::f64::consts::PI * grid.position(i)[0]).sin())
            .collect()
    }

    #[test]
    fn closed_form_examples() {
        let g = GridTorus::new(&[8]).unwrap();
        let f = make_closed_form(&g, SymMat::<f64>::identity(1), &[0.0; 8]).unwrap();
        assert!(f.field().iter().all(|m| m.get(0, 0) == 1.0));

        let g2 = GridTorus::new(&[8, 8]).unwrap();
        let a = SymMat::<f64>::diag(&[2.0, 3.0]);
        let f = BackgroundForm::constant(&g2, a).unwrap();
        assert!(f.field().iter().all(|m| *m == a));

        // G(x) = 1 + central second difference of 0.1 sin(2πx)
        let g = GridTorus::new(&[64]).unwrap();
        let tau = sin_tau(&g, 0.1);
        let f = make_closed_form(&g, SymMat::<f64>::identity(1), &tau).unwrap();
        let h = 1.0 / 64.0;
        for i in 0..64 {
            let want = 1.0 + (tau[(i + 1) % 64] - 2.0 * tau[i] + tau[(i + 63) % 64]) / (h * h);
            assert!((f.at(i).get(0, 0) - want).abs() < 1e-9);
        }
        let flat = BackgroundForm::constant(&g, SymMat::<f64>::identity(1)).unwrap();
        assert!(class_equivalent(&f, &flat, &Tolerances::default()).unwrap());
    }

    #[test]
    fn closed_form_rejects_dimension_mismatch() {
        let g = GridTorus::new(&[8, 8]).unwrap();
        assert!(matches!(
            make_closed_form(&g, SymMat::<f64>::identity(1), &vec![0.0; 64]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(make_closed_form(&g, SymMat::<f64>::identity(2), &[0.0; 3]).is_err());
    }

    #[test]
    fn class_equivalence_contract() {
        let g = GridTorus::new(&[16]).unwrap();
        let tol = Tolerances::default();
        let f1 = BackgroundForm::constant(&g, SymMat::<f64>::identity(1)).unwrap();
        let f2 = BackgroundForm::constant(&g, SymMat::<f64>::scalar(1, 2.0)).unwrap();
        assert!(!class_equivalent(&f1, &f2, &tol).unwrap());
        let gen = BackgroundForm::general(&g, f1.field().to_vec()).unwrap();
        assert!(matches!(
            class_equivalent(&gen, &gen, &tol),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn psef_probe_examples() {
        let tol = Tolerances::default();
        let g = GridTorus::new(&[8, 8]).unwrap();
        let id = BackgroundForm::constant(&g, SymMat::<f64>::identity(2)).unwrap();
        let p = psef_probe(&id, 10, &tol);
        assert!(p.feasible);
        assert!(p.witness.unwrap().values().iter().all(|&x| x == 0.0));

        let zero = BackgroundForm::constant(&g, SymMat::<f64>::zeros(2)).unwrap();
        assert!(psef_probe(&zero, 10, &tol).feasible);

        let neg = BackgroundForm::constant(&g, SymMat::<f64>::scalar(2, -1.0)).unwrap();
        let p = psef_probe(&neg, 200, &tol);
        assert!(!p.feasible && p.witness.is_none());
    }

    #[test]
    fn psef_probe_fixes_an_exact_hessian_defect() {
        // G = I + D²τ' with τ' = -τ is fixed by u = τ.
        let tol = Tolerances::default();
        let g = GridTorus::new(&[16]).unwrap();
        let tau: Vec<f64> = sin_tau(&g, -0.04);
        let f = make_closed_form(&g, SymMat::<f64>::scalar(1, 0.2), &tau).unwrap();
        assert!(f.field().iter().any(|m| m.get(0, 0) < 0.0));
        let p = psef_probe(&f, 20_000, &tol);
        assert!(p.feasible, "best {}", p.best_min_eigenvalue);
    }

    #[test]
    fn big_certificate_examples() {
        let tol = Tolerances::default();
        let g = GridTorus::new(&[8, 8]).unwrap();
        let w = ReferenceMetric::identity(&g);
        let zero = QPshFunction::zeros(&g);
        let two = BackgroundForm::constant(&g, SymMat::<f64>::scalar(2, 2.0)).unwrap();
        let half = BackgroundForm::constant(&g, SymMat::<f64>::scalar(2, 0.5)).unwrap();
        assert!(big_certificate(&two, &zero, 1.0, &w, &tol));
        assert!(!big_certificate(&half, &zero, 1.0, &w, &tol));
    }

    #[test]
    fn reference_metric_and_volume_form_validation() {
        let g = GridTorus::new(&[4]).unwrap();
        let tol = Tolerances::default();
        assert!(ReferenceMetric::new(&g, vec![SymMat::<f64>::scalar(1, 1e-12); 4], &tol).is_err());
        assert!(ReferenceMetric::new(&g, vec![SymMat::<f64>::scalar(1, 2.0); 4], &tol).is_ok());
        assert!(VolumeForm::new(&g, vec![1.0, 0.0, 1.0, 1.0]).is_err());
        let v = VolumeForm::new(&g, vec![1.0, 2.0, 3.0, 2.0]).unwrap();
        assert_eq!(v.mass(), 2.0);
    }

    #[test]
    fn upper_volume_probe_contract() {
        let tol = Tolerances::default();
        let g1 = GridTorus::new(&[32]).unwrap();
        let v = upper_volume_probe(&ReferenceMetric::<f64>::identity(&g1), 10, 1, &tol).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "{v}");
        let g2 = GridTorus::new(&[8, 8]).unwrap();
        assert!(matches!(
            upper_volume_probe(&ReferenceMetric::<f64>::identity(&g2), 0, 1, &tol),
            Err(Error::InvalidArgument(_))
        ));
    }
}
