//! Seeded random band-limited fields for probes and property tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fields::{Grid, ScalarField, SymTensorField, VectorField};
use crate::real::Real;

/// Random trigonometric polynomial with modes `|k_a| <= kmax`.
///
/// Coefficients are uniform in `[-1, 1]` damped by `1/(1 + |k|^2)`; the
/// constant mode is omitted. With `even` only cosines are used, so the field
/// is invariant under `x -> -x`.
#[derive(Debug, Clone)]
pub struct BandLimited {
    pub kmax: usize,
    pub even: bool,
}

impl Default for BandLimited {
    fn default() -> Self {
        Self { kmax: 2, even: false }
    }
}

impl BandLimited {
    pub fn sample<T: Real>(&self, grid: &Grid<T>, seed: u64) -> ScalarField<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(grid, &mut rng)
    }

    pub fn sample_with<T: Real>(&self, grid: &Grid<T>, rng: &mut impl Rng) -> ScalarField<T> {
        let n = grid.n();
        let kmax = self.kmax.min(grid.m() / 2 - 1) as i64;
        let mut modes = Vec::new();
        let side = (2 * kmax + 1) as usize;
        for code in 0..side.pow(n as u32) {
            let mut rem = code;
            let mut k = vec![0i64; n];
            for slot in k.iter_mut() {
                *slot = (rem % side) as i64 - kmax;
                rem /= side;
            }
            // one representative per +-k pair
            if k.iter().find(|&&v| v != 0).is_none_or(|&v| v < 0) {
                continue;
            }
            let damp = 1.0 / (1.0 + k.iter().map(|v| (v * v) as f64).sum::<f64>());
            let a = rng.random_range(-1.0..1.0) * damp;
            let b = if self.even { 0.0 } else { rng.random_range(-1.0..1.0) * damp };
            modes.push((k, a, b));
        }
        let two_pi = 2.0 * std::f64::consts::PI;
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.coords(i);
                let mut acc = 0.0;
                for (k, a, b) in &modes {
                    let phase: f64 = two_pi * k.iter().zip(&x).map(|(&kk, xx)| kk as f64 * xx.to_f64_lossy()).sum::<f64>();
                    acc += a * phase.cos() + b * phase.sin();
                }
                T::lit(acc)
            })
            .collect();
        ScalarField::from_raw(grid, values)
    }

    /// `mean + amplitude * g / max|g|`, strictly positive when `amplitude < mean`.
    pub fn positive<T: Real>(&self, grid: &Grid<T>, seed: u64, mean: T, amplitude: T) -> ScalarField<T> {
        let g = self.sample(grid, seed);
        let s = g.norm_linf();
        if s == T::zero() {
            return ScalarField::constant(grid, mean);
        }
        g.map(|v| mean + amplitude * v / s)
    }

    pub fn vector<T: Real>(&self, grid: &Grid<T>, seed: u64) -> VectorField<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comps = (0..grid.n()).map(|_| self.sample_with(grid, &mut rng)).collect();
        VectorField::new(grid, comps).expect("component count matches grid")
    }

    pub fn sym_tensor<T: Real>(&self, grid: &Grid<T>, seed: u64) -> SymTensorField<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = SymTensorField::<T>::component_count(grid.n());
        let comps = (0..count).map(|_| self.sample_with(grid, &mut rng)).collect();
        SymTensorField::new(grid, comps).expect("component count matches grid")
    }
}
