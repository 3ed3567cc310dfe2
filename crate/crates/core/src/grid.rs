//! Periodic lattices discretizing the flat torus `[0,1)^d`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest supported dimension.
pub const MAX_DIM: usize = 3;

struct Inner {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
    /// `axis[node * d + k] = [x + e_k, x - e_k]`
    axis: Vec<[usize; 2]>,
    /// For each pair `i < j` (in `pairs` order):
    /// `[x+ei+ej, x-ei-ej, x+ei-ej, x-ei+ej]`.
    diag: Vec<[usize; 4]>,
    pairs: Vec<(usize, usize)>,
}

/// Periodic `d`-dimensional lattice with `N_k >= 4` nodes per axis and
/// spacing `h_k = 1/N_k`. Nodes are numbered row-major (last axis fastest).
///
/// Cloning is cheap; neighbor tables are shared.
#[derive(Clone)]
pub struct GridTorus(Arc<Inner>);

impl PartialEq for GridTorus {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.sizes == other.0.sizes
    }
}

impl fmt::Debug for GridTorus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridTorus").field("sizes", &self.0.sizes).finish()
    }
}

impl GridTorus {
    pub fn new(sizes: &[usize]) -> Result<Self> {
        let d = sizes.len();
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "grid dimension must be in 1..={MAX_DIM}, got {d}"
            )));
        }
        if let Some(&n) = sizes.iter().find(|&&n| n < 4) {
            return Err(Error::InvalidArgument(format!(
                "every axis needs at least 4 nodes, got {n}"
            )));
        }
        let mut strides = vec![1usize; d];
        for k in (0..d.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * sizes[k + 1];
        }
        let len: usize = sizes.iter().product();
        let pairs: Vec<(usize, usize)> = (0..d)
            .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
            .collect();

        let shift = |idx: usize, offs: &[isize]| -> usize {
            let mut out = 0;
            for k in 0..d {
                let c = (idx / strides[k]) % sizes[k];
                let n = sizes[k] as isize;
                let c2 = (c as isize + offs[k]).rem_euclid(n) as usize;
                out += c2 * strides[k];
            }
            out
        };

        let mut axis = Vec::with_capacity(len * d);
        let mut diag = Vec::with_capacity(len * pairs.len());
        let mut offs = [0isize; MAX_DIM];
        for idx in 0..len {
            for k in 0..d {
                offs[k] = 1;
                let p = shift(idx, &offs[..d]);
                offs[k] = -1;
                let m = shift(idx, &offs[..d]);
                offs[k] = 0;
                axis.push([p, m]);
            }
            for &(i, j) in &pairs {
                let mut at = |si: isize, sj: isize| {
                    offs[i] = si;
                    offs[j] = sj;
                    let r = shift(idx, &offs[..d]);
                    offs[i] = 0;
                    offs[j] = 0;
                    r
                };
                diag.push([at(1, 1), at(-1, -1), at(1, -1), at(-1, 1)]);
            }
        }
        Ok(Self(Arc::new(Inner {
            sizes: sizes.to_vec(),
            strides,
            len,
            axis,
            diag,
            pairs,
        })))
    }

    /// Cubic grid `N^d`.
    pub fn cubic(dim: usize, n: usize) -> Result<Self> {
        Self::new(&vec![n; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.sizes.len()
    }

    #[inline]
    pub fn sizes(&self) -> &[usize] {
        &self.0.sizes
    }

    /// Number of nodes.
    #[inline]
    pub fn len(&self) -> usize {
        self.0.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.len == 0
    }

    /// Spacing `h_k = 1/N_k`.
    #[inline]
    pub fn spacing<T: Scalar>(&self, k: usize) -> T {
        T::one() / T::of(self.0.sizes[k] as f64)
    }

    /// Smallest spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|k| self.spacing::<f64>(k))
            .fold(f64::INFINITY, f64::min)
    }

    /// Volume of one cell, `∏ h_k`.
    pub fn cell_volume<T: Scalar>(&self) -> T {
        (0..self.dim()).fold(T::one(), |acc, k| acc * self.spacing::<T>(k))
    }

    /// Lattice coordinates of a node.
    pub fn coords(&self, idx: usize) -> [usize; MAX_DIM] {
        let mut c = [0; MAX_DIM];
        for (k, ck) in c.iter_mut().enumerate().take(self.dim()) {
            *ck = (idx / self.0.strides[k]) % self.0.sizes[k];
        }
        c
    }

    /// Physical position `x_k = i_k h_k` of a node.
    pub fn position(&self, idx: usize) -> [f64; MAX_DIM] {
        let c = self.coords(idx);
        let mut x = [0.0; MAX_DIM];
        for k in 0..self.dim() {
            x[k] = c[k] as f64 / self.0.sizes[k] as f64;
        }
        x
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.0.sizes)
            .zip(&self.0.strides)
            .map(|((&c, &n), &s)| (c % n) * s)
            .sum()
    }

    /// `[x + e_k, x - e_k]`.
    #[inline]
    pub fn axis_neighbors(&self, idx: usize, k: usize) -> [usize; 2] {
        self.0.axis[idx * self.dim() + k]
    }

    /// Axis pairs `(i, j)`, `i < j`, in the order used by [`Self::diagonal_neighbors`].
    #[inline]
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0.pairs
    }

    /// `[x+ei+ej, x-ei-ej, x+ei-ej, x-ei+ej]` for the `p`-th pair.
    #[inline]
    pub fn diagonal_neighbors(&self, idx: usize, p: usize) -> [usize; 4] {
        self.0.diag[idx * self.0.pairs.len() + p]
    }

    /// All `2d + 2d(d-1)` stencil neighbors of a node (the node itself excluded).
    pub fn stencil(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let d = self.dim();
        let np = self.0.pairs.len();
        self.0.axis[idx * d..(idx + 1) * d]
            .iter()
            .flat_map(|a| a.iter().copied())
            .chain(
                self.0.diag[idx * np..(idx + 1) * np]
                    .iter()
                    .flat_map(|q| q.iter().copied()),
            )
    }

    /// Number of stencil neighbors per node.
    pub fn stencil_size(&self) -> usize {
        let d = self.dim();
        2 * d + 2 * d * (d - 1)
    }

    /// Directions used for directional convexity: every axis, then for each
    /// pair `(i, j)` the diagonals `e_i + e_j` and `e_i - e_j`.
    pub fn directions(&self) -> Vec<Direction> {
        let mut out: Vec<Direction> = (0..self.dim()).map(Direction::Axis).collect();
        for p in 0..self.0.pairs.len() {
            out.push(Direction::Diagonal { pair: p, anti: false });
            out.push(Direction::Diagonal { pair: p, anti: true });
        }
        out
    }

    /// The two nodes `x ± e` for a direction.
    #[inline]
    pub fn direction_neighbors(&self, idx: usize, dir: Direction) -> [usize; 2] {
        match dir {
            Direction::Axis(k) => self.axis_neighbors(idx, k),
            Direction::Diagonal { pair, anti } => {
                let q = self.diagonal_neighbors(idx, pair);
                if anti {
                    [q[2], q[3]]
                } else {
                    [q[0], q[1]]
                }
            }
        }
    }

    /// Physical step vector of a direction.
    pub fn direction_step<T: Scalar>(&self, dir: Direction) -> [T; MAX_DIM] {
        let mut s = [T::zero(); MAX_DIM];
        match dir {
            Direction::Axis(k) => s[k] = self.spacing(k),
            Direction::Diagonal { pair, anti } => {
                let (i, j) = self.0.pairs[pair];
                s[i] = self.spacing(i);
                s[j] = if anti { -self.spacing::<T>(j) } else { self.spacing(j) };
            }
        }
        s
    }
}

/// A lattice direction `e` with its opposite `-e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Axis(usize),
    Diagonal { pair: usize, anti: bool },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_axes_and_bad_dims() {
        assert!(GridTorus::new(&[3]).is_err());
        assert!(GridTorus::new(&[]).is_err());
        assert!(GridTorus::new(&[4, 4, 4, 4]).is_err());
        assert!(GridTorus::new(&[4, 5]).is_ok());
    }

    #[test]
    fn neighbor_counts_and_wraparound() {
        for dims in [vec![8], vec![4, 6], vec![4, 5, 6]] {
            let g = GridTorus::new(&dims).unwrap();
            let d = g.dim();
            assert_eq!(g.len(), dims.iter().product::<usize>());
            for idx in 0..g.len() {
                let st: Vec<usize> = g.stencil(idx).collect();
                assert_eq!(st.len(), 2 * d + 2 * d * (d - 1));
                assert!(!st.contains(&idx));
                for k in 0..d {
                    let [p, m] = g.axis_neighbors(idx, k);
                    assert_eq!(g.axis_neighbors(p, k)[1], idx);
                    assert_eq!(g.axis_neighbors(m, k)[0], idx);
                }
            }
        }
        let g = GridTorus::new(&[8]).unwrap();
        assert_eq!(g.axis_neighbors(0, 0), [1, 7]);
        assert_eq!(g.axis_neighbors(7, 0), [0, 6]);
    }

    #[test]
    fn index_roundtrip() {
        let g = GridTorus::new(&[4, 5, 6]).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.index(&g.coords(idx)[..3]), idx);
        }
        assert_eq!(g.direction_neighbors(0, Direction::Axis(2)), [1, 5]);
    }
}
