use super::{lp_mean, FieldError, Grid, ScalarField};
use crate::real::Real;

/// Position of `(i, j)` in the packed upper triangle of an `n x n` symmetric matrix.
#[inline]
pub fn sym_index(i: usize, j: usize, n: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * (a + 1) / 2 + b
}

/// `n` scalar components on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T: Real> {
    grid: Grid<T>,
    comps: Vec<ScalarField<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn new(grid: &Grid<T>, comps: Vec<ScalarField<T>>) -> Result<Self, FieldError> {
        if comps.len() != grid.n() {
            return Err(FieldError::ComponentMismatch { expected: grid.n(), got: comps.len() });
        }
        if comps.iter().any(|c| c.grid() != grid) {
            return Err(FieldError::GridMismatch);
        }
        Ok(Self { grid: grid.clone(), comps })
    }

    pub(crate) fn from_components(grid: &Grid<T>, comps: Vec<ScalarField<T>>) -> Self {
        debug_assert_eq!(comps.len(), grid.n());
        Self { grid: grid.clone(), comps }
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self::from_components(grid, vec![ScalarField::zeros(grid); grid.n()])
    }

    pub fn constant(grid: &Grid<T>, v: &[T]) -> Self {
        assert_eq!(v.len(), grid.n());
        Self::from_components(grid, v.iter().map(|&c| ScalarField::constant(grid, c)).collect())
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(usize, &[T]) -> T) -> Self {
        let comps = (0..grid.n()).map(|a| ScalarField::from_fn(grid, |x| f(a, x))).collect();
        Self::from_components(grid, comps)
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn component(&self, i: usize) -> &ScalarField<T> {
        &self.comps[i]
    }

    #[inline]
    pub fn component_mut(&mut self, i: usize) -> &mut ScalarField<T> {
        &mut self.comps[i]
    }

    pub fn components(&self) -> &[ScalarField<T>] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<ScalarField<T>> {
        self.comps
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(ScalarField::is_finite)
    }

    pub fn map_components(&self, f: impl Fn(&ScalarField<T>) -> ScalarField<T>) -> Self {
        Self::from_components(&self.grid, self.comps.iter().map(f).collect())
    }

    pub fn zip_components(&self, other: &Self, f: impl Fn(&ScalarField<T>, &ScalarField<T>) -> ScalarField<T>) -> Self {
        assert_eq!(self.grid, other.grid, "fields on different grids");
        Self::from_components(&self.grid, self.comps.iter().zip(&other.comps).map(|(a, b)| f(a, b)).collect())
    }

    pub fn scale(&self, s: T) -> Self {
        self.map_components(|c| c.scale(s))
    }

    /// Multiplies each component pointwise by `f`.
    pub fn mul_scalar_field(&self, f: &ScalarField<T>) -> Self {
        self.map_components(|c| c * f)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_components(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_components(other, |a, b| a - b)
    }

    /// Component means, i.e. the projection onto constant vector fields.
    pub fn means(&self) -> Vec<T> {
        self.comps.iter().map(ScalarField::mean).collect()
    }

    pub fn zero_mean(&self) -> Self {
        self.map_components(ScalarField::zero_mean)
    }

    /// Pointwise Euclidean length.
    pub fn pointwise_norm(&self) -> ScalarField<T> {
        let len = self.grid.len();
        let values = (0..len)
            .map(|i| self.comps.iter().map(|c| c.values()[i] * c.values()[i]).sum::<T>().sqrt())
            .collect();
        ScalarField::from_raw(&self.grid, values)
    }

    /// Pointwise `<self, other>`.
    pub fn dot(&self, other: &Self) -> ScalarField<T> {
        let len = self.grid.len();
        let values = (0..len)
            .map(|i| self.comps.iter().zip(&other.comps).map(|(a, b)| a.values()[i] * b.values()[i]).sum())
            .collect();
        ScalarField::from_raw(&self.grid, values)
    }

    /// `integrate(<self, other>)`.
    pub fn inner(&self, other: &Self) -> T {
        self.dot(other).integrate()
    }

    pub fn norm_l2(&self) -> T {
        lp_mean(
            (0..self.grid.len()).map(move |i| {
                let s = self.comps.iter().fold(T::zero(), |acc, c| acc.max(c.values()[i].abs()));
                if s == T::zero() {
                    s
                } else {
                    s * self.comps.iter().map(|c| (c.values()[i] / s).powi(2)).sum::<T>().sqrt()
                }
            }),
            T::lit(2.0),
        )
    }

    pub fn norm_linf(&self) -> T {
        self.comps.iter().fold(T::zero(), |acc, c| acc.max(c.norm_linf()))
    }

    pub fn reflect(&self) -> Self {
        self.map_components(ScalarField::reflect)
    }
}

/// Symmetric 2-tensor field; only the upper triangle is stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorField<T: Real> {
    grid: Grid<T>,
    comps: Vec<ScalarField<T>>,
}

impl<T: Real> SymTensorField<T> {
    pub fn component_count(n: usize) -> usize {
        n * (n + 1) / 2
    }

    /// Components in packed upper-triangle order, see [`sym_index`].
    pub fn new(grid: &Grid<T>, comps: Vec<ScalarField<T>>) -> Result<Self, FieldError> {
        let expected = Self::component_count(grid.n());
        if comps.len() != expected {
            return Err(FieldError::ComponentMismatch { expected, got: comps.len() });
        }
        if comps.iter().any(|c| c.grid() != grid) {
            return Err(FieldError::GridMismatch);
        }
        Ok(Self { grid: grid.clone(), comps })
    }

    pub(crate) fn from_components(grid: &Grid<T>, comps: Vec<ScalarField<T>>) -> Self {
        debug_assert_eq!(comps.len(), Self::component_count(grid.n()));
        Self { grid: grid.clone(), comps }
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self::from_components(grid, vec![ScalarField::zeros(grid); Self::component_count(grid.n())])
    }

    /// Constant field from a full `n x n` matrix; the lower triangle is ignored.
    pub fn constant(grid: &Grid<T>, matrix: &[Vec<T>]) -> Self {
        let n = grid.n();
        let mut comps = Vec::with_capacity(Self::component_count(n));
        for (i, row) in matrix.iter().enumerate().take(n) {
            for &v in &row[i..n] {
                comps.push(ScalarField::constant(grid, v));
            }
        }
        Self::from_components(grid, comps)
    }

    pub fn from_fn(grid: &Grid<T>, f: impl Fn(usize, usize, &[T]) -> T) -> Self {
        let n = grid.n();
        let mut comps = Vec::with_capacity(Self::component_count(n));
        for i in 0..n {
            for j in i..n {
                comps.push(ScalarField::from_fn(grid, |x| f(i, j, x)));
            }
        }
        Self::from_components(grid, comps)
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &ScalarField<T> {
        &self.comps[sym_index(i, j, self.grid.n())]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut ScalarField<T> {
        let n = self.grid.n();
        &mut self.comps[sym_index(i, j, n)]
    }

    pub fn components(&self) -> &[ScalarField<T>] {
        &self.comps
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(ScalarField::is_finite)
    }

    pub fn map_components(&self, f: impl Fn(&ScalarField<T>) -> ScalarField<T>) -> Self {
        Self::from_components(&self.grid, self.comps.iter().map(f).collect())
    }

    pub fn zip_components(&self, other: &Self, f: impl Fn(&ScalarField<T>, &ScalarField<T>) -> ScalarField<T>) -> Self {
        assert_eq!(self.grid, other.grid, "fields on different grids");
        Self::from_components(&self.grid, self.comps.iter().zip(&other.comps).map(|(a, b)| f(a, b)).collect())
    }

    pub fn scale(&self, s: T) -> Self {
        self.map_components(|c| c.scale(s))
    }

    pub fn mul_scalar_field(&self, f: &ScalarField<T>) -> Self {
        self.map_components(|c| c * f)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_components(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_components(other, |a, b| a - b)
    }

    pub fn trace(&self) -> ScalarField<T> {
        let n = self.grid.n();
        let mut out = self.get(0, 0).clone();
        for i in 1..n {
            out = &out + self.get(i, i);
        }
        out
    }

    /// Removes `(tr S / n) I`.
    pub fn trace_free(&self) -> Self {
        let n = self.grid.n();
        let tr = self.trace().scale(T::one() / T::from_count(n));
        let mut out = self.clone();
        for i in 0..n {
            let d = out.get(i, i) - &tr;
            *out.get_mut(i, i) = d;
        }
        out
    }

    /// Pointwise `S_ij T_ij` summed over all `i, j`.
    pub fn dot(&self, other: &Self) -> ScalarField<T> {
        assert_eq!(self.grid, other.grid, "fields on different grids");
        let n = self.grid.n();
        let two = T::lit(2.0);
        let mut values = vec![T::zero(); self.grid.len()];
        for i in 0..n {
            for j in i..n {
                let w = if i == j { T::one() } else { two };
                let a = self.get(i, j).values();
                let b = other.get(i, j).values();
                for (v, (&x, &y)) in values.iter_mut().zip(a.iter().zip(b)) {
                    *v += w * x * y;
                }
            }
        }
        ScalarField::from_raw(&self.grid, values)
    }

    /// Pointwise `|S|^2` with off-diagonal entries counted twice.
    pub fn norm_sq(&self) -> ScalarField<T> {
        self.dot(self)
    }

    pub fn inner(&self, other: &Self) -> T {
        self.dot(other).integrate()
    }

    /// L2 norm of the pointwise Frobenius norm.
    pub fn norm_l2(&self) -> T {
        let s = self.norm_linf();
        if s == T::zero() || !s.is_finite() {
            return s;
        }
        (self.scale(T::one() / s).norm_sq().integrate()).sqrt() * s
    }

    pub fn norm_linf(&self) -> T {
        self.comps.iter().fold(T::zero(), |acc, c| acc.max(c.norm_linf()))
    }

    pub fn reflect(&self) -> Self {
        self.map_components(ScalarField::reflect)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_indices_cover_triangle() {
        for n in 3..6 {
            let mut seen = vec![false; n * (n + 1) / 2];
            for i in 0..n {
                for j in i..n {
                    let k = sym_index(i, j, n);
                    assert!(!seen[k]);
                    seen[k] = true;
                    assert_eq!(k, sym_index(j, i, n));
                }
            }
            assert!(seen.into_iter().all(|s| s));
        }
    }

    #[test]
    fn off_diagonals_count_twice() {
        let g = Grid::<f64>::new(3, 4).unwrap();
        let mut m = vec![vec![0.0; 3]; 3];
        m[0][1] = 1.0;
        let s = SymTensorField::constant(&g, &m);
        assert!((s.norm_sq().mean() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn trace_free_part() {
        let g = Grid::<f64>::new(3, 4).unwrap();
        let s = SymTensorField::from_fn(&g, |i, j, x| (i + 2 * j) as f64 + x[0]);
        assert!(s.trace_free().trace().norm_linf() < 1e-14);
    }
}
