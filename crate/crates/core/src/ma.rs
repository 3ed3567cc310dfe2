//! Mixed discrete Monge–Ampère products, their non-pluripolar restriction and
//! total masses.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::geometry::{discrete_hessian, BackgroundForm, ReferenceMetric};
use crate::grid::GridTorus;
use crate::linalg::SymMat;
use crate::qpsh::{sublevel_mask, truncate, QPshFunction};
use crate::sampling::ConvexSampler;
use crate::scalar::{ordered_sum, Scalar};

/// Signed per-node weights. Nodes outside `support` carry an exact zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure<T> {
    grid: GridTorus,
    weights: Vec<T>,
    support: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeasureSummary {
    pub total_mass: f64,
    pub min_weight: f64,
    pub support_size: usize,
}

impl<T: Scalar> DiscreteMeasure<T> {
    pub fn new(grid: &GridTorus, weights: Vec<T>, support: Vec<bool>) -> Result<Self> {
        if weights.len() != grid.len() || support.len() != grid.len() {
            return Err(Error::DimensionMismatch("measure does not match grid".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("measure weights must be finite".into()));
        }
        let weights = weights
            .into_iter()
            .zip(&support)
            .map(|(w, &s)| if s { w } else { T::zero() })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            weights,
            support,
        })
    }

    pub fn grid(&self) -> &GridTorus {
        &self.grid
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, idx: usize) -> T {
        self.weights[idx]
    }

    pub fn support(&self) -> &[bool] {
        &self.support
    }

    /// `Σ weights · ∏h_k`, summed in node order.
    pub fn total_mass(&self) -> T {
        ordered_sum(self.weights.iter().copied()) * self.grid.cell_volume()
    }

    /// Mass of the restriction to the nodes where `mask` holds.
    pub fn mass_on(&self, mask: &[bool]) -> T {
        ordered_sum(
            self.weights
                .iter()
                .zip(mask)
                .map(|(&w, &m)| if m { w } else { T::zero() }),
        ) * self.grid.cell_volume()
    }

    pub fn min_weight(&self) -> T {
        self.weights.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn support_size(&self) -> usize {
        self.support.iter().filter(|&&s| s).count()
    }

    pub fn summary(&self) -> MeasureSummary {
        MeasureSummary {
            total_mass: self.total_mass().as_f64(),
            min_weight: self.min_weight().as_f64(),
            support_size: self.support_size(),
        }
    }
}

/// `total_mass` as a free function.
pub fn total_mass<T: Scalar>(m: &DiscreteMeasure<T>) -> T {
    m.total_mass()
}

/// `Σ_{∅≠S⊆[d]} (-1)^{d-|S|} det(Σ_{i∈S} M_i)`, i.e. `d!` times the mixed
/// determinant. Slots are sorted first so the value does not depend on their order.
pub fn mixed_weight<T: Scalar>(ms: &mut [SymMat<T>]) -> T {
    let d = ms.len();
    ms.sort_by(|a, b| a.canonical_cmp(b));
    let mut acc = T::zero();
    for s in 1usize..(1 << d) {
        let mut sum = SymMat::zeros(ms[0].dim());
        for (i, m) in ms.iter().enumerate() {
            if s & (1 << i) != 0 {
                sum = sum + *m;
            }
        }
        let det = sum.det();
        if (d - s.count_ones() as usize).is_multiple_of(2) {
            acc += det;
        } else {
            acc -= det;
        }
    }
    acc
}

fn check_slots<T: Scalar>(forms: &[&BackgroundForm<T>], us: &[&QPshFunction<T>]) -> Result<GridTorus> {
    if forms.len() != us.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} forms but {} potentials",
            forms.len(),
            us.len()
        )));
    }
    let grid = forms
        .first()
        .map(|f| f.grid().clone())
        .ok_or_else(|| Error::InvalidArgument("product needs at least one slot".into()))?;
    if forms.len() != grid.dim() {
        return Err(Error::Unsupported(format!(
            "only top-degree products: {} slots on a {}-dimensional grid",
            forms.len(),
            grid.dim()
        )));
    }
    if forms.iter().any(|f| *f.grid() != grid) || us.iter().any(|u| *u.grid() != grid) {
        return Err(Error::DimensionMismatch("slots live on different grids".into()));
    }
    Ok(grid)
}

fn raw_weights<T: Scalar>(
    grid: &GridTorus,
    forms: &[&BackgroundForm<T>],
    us: &[&[T]],
    active: Option<&[bool]>,
) -> Vec<T> {
    let d = grid.dim();
    (0..grid.len())
        .into_par_iter()
        .map(|x| {
            if active.is_some_and(|a| !a[x]) {
                return T::zero();
            }
            let mut ms = [SymMat::zeros(d); 3];
            for i in 0..d {
                ms[i] = forms[i].at(x) + discrete_hessian(grid, us[i], x);
            }
            mixed_weight(&mut ms[..d])
        })
        .collect()
}

/// Mixed product of bounded potentials: `weight(x) = d! MixedDet(G_i + D²u_i)`.
pub fn bt_mixed<T: Scalar>(
    forms: &[&BackgroundForm<T>],
    us: &[&QPshFunction<T>],
) -> Result<DiscreteMeasure<T>> {
    let grid = check_slots(forms, us)?;
    if let Some(i) = us.iter().position(|u| !u.is_pole_free()) {
        return Err(Error::InvalidArgument(format!(
            "bt_mixed needs bounded potentials; slot {i} has poles"
        )));
    }
    let vals: Vec<&[T]> = us.iter().map(|u| u.values()).collect();
    let w = raw_weights(&grid, forms, &vals, None);
    DiscreteMeasure::new(&grid, w, vec![true; grid.len()])
}

/// Non-pluripolar product: truncate at `t* = 1 + max|u_i|`, then keep only nodes
/// whose full stencil lies in `∩{u_i > -t*}`.
pub fn npp_mixed<T: Scalar>(
    forms: &[&BackgroundForm<T>],
    us: &[&QPshFunction<T>],
) -> Result<DiscreteMeasure<T>> {
    let t_star = us
        .iter()
        .map(|u| u.truncation_level())
        .fold(T::one(), T::max);
    npp_mixed_at_level(forms, us, t_star)
}

/// [`npp_mixed`] with an explicit truncation level `t >= t*`.
pub fn npp_mixed_at_level<T: Scalar>(
    forms: &[&BackgroundForm<T>],
    us: &[&QPshFunction<T>],
    t: T,
) -> Result<DiscreteMeasure<T>> {
    let grid = check_slots(forms, us)?;
    let t_star = us
        .iter()
        .map(|u| u.truncation_level())
        .fold(T::one(), T::max);
    if !(t >= t_star) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "truncation level {t} below t* = {t_star}"
        )));
    }
    let mask = sublevel_mask(us, t)?;
    let truncated: Vec<QPshFunction<T>> = us.iter().map(|u| truncate(u, t)).collect();
    let vals: Vec<&[T]> = truncated.iter().map(|u| u.values()).collect();
    let w = raw_weights(&grid, forms, &vals, Some(&mask.stencil_inside));
    DiscreteMeasure::new(&grid, w, mask.stencil_inside)
}

/// `(θ + dd^c u)^d`: [`npp_mixed`] with every slot equal to `(F, u)`.
pub fn ma<T: Scalar>(form: &BackgroundForm<T>, u: &QPshFunction<T>) -> Result<DiscreteMeasure<T>> {
    let d = form.grid().dim();
    npp_mixed(&vec![form; d], &vec![u; d])
}

/// Sampled lower estimate of the mass defect of a form.
#[derive(Clone, Debug)]
pub struct MassDefect<T> {
    pub form: BackgroundForm<T>,
    pub estimate: T,
    pub samples: usize,
    pub seed: u64,
    pub masses: Vec<T>,
}

/// Largest pairwise mass difference of `ma(F, u)` over `samples` potentials on
/// the boundary of the `C W`-convex cone.
pub fn delta_theta_estimate<T: Scalar>(
    form: &BackgroundForm<T>,
    metric: &ReferenceMetric<T>,
    c_bound: T,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<MassDefect<T>> {
    if samples < 2 {
        return Err(Error::InvalidArgument("delta_theta_estimate needs samples >= 2".into()));
    }
    if metric.grid() != form.grid() {
        return Err(Error::DimensionMismatch("metric and form on different grids".into()));
    }
    let mut sampler = ConvexSampler::new(seed);
    let mut masses = Vec::with_capacity(samples);
    for _ in 0..samples {
        let u = sampler.extremal(form.grid(), metric.field(), c_bound, tol)?;
        masses.push(ma(form, &u)?.total_mass());
    }
    let hi = masses.iter().copied().fold(T::neg_infinity(), T::max);
    let lo = masses.iter().copied().fold(T::infinity(), T::min);
    Ok(MassDefect {
        form: form.clone(),
        estimate: hi - lo,
        samples,
        seed,
        masses,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonotonicityCheck<T> {
    pub holds: bool,
    pub lhs: T,
    pub rhs: T,
}

/// `∫ MA(φ) <= ∫ MA(ψ) + Δ + tol_mono` for `φ <= ψ + O(1)`.
pub fn mass_monotonicity_check<T: Scalar>(
    form: &BackgroundForm<T>,
    phi: &QPshFunction<T>,
    psi: &QPshFunction<T>,
    defect: &MassDefect<T>,
    tol: &Tolerances,
) -> Result<MonotonicityCheck<T>> {
    if phi.grid() != form.grid() || psi.grid() != form.grid() {
        return Err(Error::DimensionMismatch("potentials and form on different grids".into()));
    }
    if let Some(i) = (0..phi.values().len()).find(|&i| psi.is_pole(i) && !phi.is_pole(i)) {
        return Err(Error::InvalidComparison(format!(
            "psi has a pole at node {i} where phi is finite"
        )));
    }
    let lhs = ma(form, phi)?.total_mass();
    let psi_mass = ma(form, psi)?.total_mass();
    let rhs = psi_mass + defect.estimate + T::of(tol.tol_mono(lhs.as_f64(), psi_mass.as_f64()));
    Ok(MonotonicityCheck {
        holds: lhs <= rhs,
        lhs,
        rhs,
    })
}
