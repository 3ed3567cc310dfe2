//! Possibly singular quasi-psh grid functions, truncations and sublevel masks.

use crate::error::{Error, Result};
use crate::geometry::{discrete_hessian, BackgroundForm};
use crate::grid::GridTorus;
use crate::scalar::Scalar;

/// Node values in `ℝ ∪ {-∞}`; the pole set is exactly the `-∞` nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct QPshFunction<T> {
    grid: GridTorus,
    values: Vec<T>,
}

impl<T: Scalar> QPshFunction<T> {
    /// Rejects NaN, `+∞`, and functions that are identically `-∞`.
    pub fn new(grid: &GridTorus, values: Vec<T>) -> Result<Self> {
        let f = Self::new_allow_empty(grid, values)?;
        if f.values.iter().all(|v| *v == T::neg_infinity()) {
            return Err(Error::InvalidArgument("function is identically -inf".into()));
        }
        Ok(f)
    }

    /// As [`QPshFunction::new`] but accepts the identically `-∞` function.
    pub fn new_allow_empty(grid: &GridTorus, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values
            .iter()
            .position(|v| v.is_nan() || *v == T::infinity())
        {
            return Err(Error::InvalidArgument(format!(
                "value at node {i} is {}",
                values[i]
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &GridTorus) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: &GridTorus, c: T) -> Self {
        Self::new(grid, vec![c; grid.len()]).expect("finite constant")
    }

    pub fn from_fn(grid: &GridTorus, f: impl Fn([f64; 3]) -> T) -> Result<Self> {
        Self::new(grid, (0..grid.len()).map(|i| f(grid.position(i))).collect())
    }

    pub fn grid(&self) -> &GridTorus {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, idx: usize) -> T {
        self.values[idx]
    }

    #[inline]
    pub fn is_pole(&self, idx: usize) -> bool {
        self.values[idx] == T::neg_infinity()
    }

    pub fn poles(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.is_pole(i)).collect()
    }

    pub fn is_pole_free(&self) -> bool {
        !self.values.iter().any(|v| *v == T::neg_infinity())
    }

    /// Largest finite value, or `-∞` when every node is a pole.
    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Smallest finite value (poles ignored).
    pub fn min_finite(&self) -> T {
        self.values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(T::infinity(), T::min)
    }

    /// Level `t* = 1 + max |u|` over non-pole nodes.
    pub fn truncation_level(&self) -> T {
        T::one()
            + self
                .values
                .iter()
                .filter(|v| v.is_finite())
                .fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Nodewise map; poles are passed through the closure as `-∞`.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn add_constant(&self, c: T) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| v + c).collect(),
        }
    }

    pub fn max_with(&self, other: &Self) -> Result<Self> {
        self.zip(other, T::max)
    }

    pub fn min_with(&self, other: &Self) -> Result<Self> {
        self.zip(other, T::min)
    }

    fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("functions on different grids".into()));
        }
        Self::new(
            &self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    /// `max |u - v|` over nodes where both are finite.
    pub fn sup_distance(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

/// `max(u, -t)`; the result has no poles.
pub fn truncate<T: Scalar>(u: &QPshFunction<T>, t: T) -> QPshFunction<T> {
    let floor = -t;
    QPshFunction {
        grid: u.grid.clone(),
        values: u.values.iter().map(|&v| v.max(floor)).collect(),
    }
}

/// Nodes where every function exceeds `-t`, and those whose whole stencil does.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationMask<T> {
    pub grid: GridTorus,
    pub level: T,
    pub inside: Vec<bool>,
    pub stencil_inside: Vec<bool>,
}

impl<T> TruncationMask<T> {
    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn stencil_inside_count(&self) -> usize {
        self.stencil_inside.iter().filter(|&&b| b).count()
    }
}

pub fn sublevel_mask<T: Scalar>(us: &[&QPshFunction<T>], t: T) -> Result<TruncationMask<T>> {
    let first = us
        .first()
        .ok_or_else(|| Error::InvalidArgument("sublevel_mask needs at least one function".into()))?;
    let grid = first.grid.clone();
    if us.iter().any(|u| u.grid != grid) {
        return Err(Error::DimensionMismatch("functions on different grids".into()));
    }
    let floor = -t;
    let inside: Vec<bool> = (0..grid.len())
        .map(|i| us.iter().all(|u| u.values[i] > floor))
        .collect();
    let stencil_inside = stencil_closure(&grid, &inside);
    Ok(TruncationMask {
        grid,
        level: t,
        inside,
        stencil_inside,
    })
}

/// Nodes that lie in `set` together with all their stencil neighbors.
pub fn stencil_closure(grid: &GridTorus, set: &[bool]) -> Vec<bool> {
    (0..grid.len())
        .map(|i| set[i] && grid.stencil(i).all(|j| set[j]))
        .collect()
}

/// `χ_ε = max(u,0) / (max(u,0) + ε)` with `-∞ ↦ 0`.
pub fn chi_eps<T: Scalar>(u: &QPshFunction<T>, eps: T) -> Result<Vec<T>> {
    if !(eps > T::zero()) {
        return Err(Error::InvalidArgument("chi_eps needs eps > 0".into()));
    }
    Ok(u.values
        .iter()
        .map(|&v| {
            let p = v.max(T::zero());
            p / (p + eps)
        })
        .collect())
}

/// Minimal eigenvalue of `G + D²u` per node; `None` where the stencil touches a pole.
pub fn theta_convex_slack<T: Scalar>(
    u: &QPshFunction<T>,
    form: &BackgroundForm<T>,
) -> Result<Vec<Option<T>>> {
    if u.grid() != form.grid() {
        return Err(Error::DimensionMismatch("function and form on different grids".into()));
    }
    let grid = u.grid();
    let finite: Vec<bool> = u.values.iter().map(|v| v.is_finite()).collect();
    let evaluated = stencil_closure(grid, &finite);
    Ok((0..grid.len())
        .map(|i| {
            evaluated[i]
                .then(|| (form.at(i) + discrete_hessian(grid, u.values(), i)).min_eigenvalue())
        })
        .collect())
}

/// Smallest evaluated slack, `+∞` when nothing is evaluated.
pub fn min_slack<T: Scalar>(slack: &[Option<T>]) -> T {
    slack
        .iter()
        .flatten()
        .copied()
        .fold(T::infinity(), T::min)
}

/// Accepts `u` as θ-psh when every evaluated slack is at least `-tol_psh`.
pub fn is_theta_psh<T: Scalar>(
    u: &QPshFunction<T>,
    form: &BackgroundForm<T>,
    tol_psh: f64,
) -> Result<bool> {
    Ok(min_slack(&theta_convex_slack(u, form)?).as_f64() >= -tol_psh)
}
