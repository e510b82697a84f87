use std::fmt::Debug;

use num_traits::{FromPrimitive, Num, ToPrimitive};
use serde::Serialize;

use crate::error::{Result, SolveError};

/// Field of numbers the exponent recursion can be run in: `f64` or exact rationals.
pub trait Exact: Clone + PartialOrd + Num + FromPrimitive + ToPrimitive + Debug {}

impl<S: Clone + PartialOrd + Num + FromPrimitive + ToPrimitive + Debug> Exact for S {}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapRow<S> {
    pub i: usize,
    pub q: S,
    /// `k_i = (N-1) q_i - N (q_i/t + 1)`.
    pub k: S,
    /// `1/c_i = 1/q_i + 1/t`.
    pub c: S,
    /// `1/r_i = 1/q_i + 1/t - 1/n`; `None` when the right side is not positive.
    pub r: Option<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapTable<S> {
    pub n: usize,
    pub t: S,
    pub t0: S,
    pub big_n: S,
    /// `N - 1 - N/t`.
    pub ratio: S,
    /// Fixed point of the recursion, `None` when `(N-2) t = N`.
    pub qbar: Option<S>,
    pub p0: Option<S>,
    pub rows: Vec<BootstrapRow<S>>,
    /// First `i` with `q_{i+1} > max(p0, N)`.
    pub escape: Option<usize>,
}

fn int<S: Exact>(v: usize) -> S {
    S::from_usize(v).expect("small integers are representable")
}

/// Step cap when searching for the escape index beyond the tabulated rows.
const ESCAPE_SEARCH: usize = 10_000;

/// Tabulates `q_{i+1} = (N - 1 - N/t) q_i - 2/(n-2)` for `i = 0..=i_max`.
///
/// `q0` defaults to `N/2 + 1`. For `t < t0` the sequence decreases; the
/// table stops before the first `q_i <= 0`.
pub fn bootstrap_exponents<S: Exact>(n: usize, p: S, t: S, q0: Option<S>, i_max: usize) -> Result<BootstrapTable<S>> {
    if n < 3 {
        return Err(SolveError::InvalidArgument(format!("dimension {n} must be at least 3")));
    }
    if !(t > S::one()) {
        return Err(SolveError::InvalidArgument("t must exceed 1".into()));
    }
    let one = S::one();
    let two: S = int(2);
    let nn: S = int(n);
    let big_n = two.clone() * nn.clone() / int(n - 2);
    let t0 = two.clone() * nn.clone() * (nn.clone() - one.clone()) / (int::<S>(3) * nn.clone() - two.clone());
    let ratio = big_n.clone() - one.clone() - big_n.clone() / t.clone();
    let shift = two.clone() / int(n - 2);
    let denom = (big_n.clone() - two.clone()) * t.clone() - big_n.clone();
    let qbar = (denom != S::zero()).then(|| shift.clone() * t.clone() / denom);
    let inv_p0 = two.clone() / p - one.clone() / t.clone();
    let p0 = (inv_p0 > S::zero()).then(|| one.clone() / inv_p0);

    let row = |i: usize, q: &S| {
        let k = (big_n.clone() - one.clone()) * q.clone() - big_n.clone() * (q.clone() / t.clone() + one.clone());
        let inv_c = one.clone() / q.clone() + one.clone() / t.clone();
        let inv_r = inv_c.clone() - one.clone() / nn.clone();
        BootstrapRow {
            i,
            q: q.clone(),
            k,
            c: one.clone() / inv_c,
            r: (inv_r > S::zero()).then(|| one.clone() / inv_r),
        }
    };
    let step = |q: &S| ratio.clone() * q.clone() - shift.clone();

    let mut q = q0.unwrap_or_else(|| big_n.clone() / two.clone() + one.clone());
    let mut rows = Vec::with_capacity(i_max + 1);
    for i in 0..=i_max {
        if q <= S::zero() {
            break;
        }
        rows.push(row(i, &q));
        q = step(&q);
    }

    if rows.is_empty() {
        return Err(SolveError::InvalidArgument("q0 must be positive".into()));
    }
    let escape = p0.as_ref().and_then(|p0| {
        let threshold = if *p0 > big_n { p0.clone() } else { big_n.clone() };
        let mut q = rows[0].q.clone();
        for i in 0..ESCAPE_SEARCH {
            let next = step(&q);
            if next > threshold {
                return Some(i);
            }
            if next <= q {
                return None;
            }
            q = next;
        }
        None
    });

    Ok(BootstrapTable { n, t, t0, big_n, ratio, qbar, p0, rows, escape })
}

impl<S: Exact> BootstrapTable<S> {
    pub fn is_strictly_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].q > w[0].q)
    }

    pub fn is_constant(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].q == w[0].q)
    }

    /// The escape index, or [`SolveError::NonEscaping`] when `t <= t0`.
    ///
    /// Fails with [`SolveError::InvalidArgument`] when `p0` is infinite.
    pub fn require_escape(&self) -> Result<usize> {
        let f = |s: &S| s.to_f64().unwrap_or(f64::NAN);
        if self.t <= self.t0 {
            return Err(SolveError::NonEscaping { t: f(&self.t), t0: f(&self.t0) });
        }
        if self.p0.is_none() {
            return Err(SolveError::InvalidArgument(format!(
                "2/p - 1/t is not positive at t = {}, so there is no finite escape threshold",
                f(&self.t)
            )));
        }
        self.escape.ok_or_else(|| SolveError::NonEscaping { t: f(&self.t), t0: f(&self.t0) })
    }

    pub fn to_f64(&self) -> BootstrapTable<f64> {
        let f = |s: &S| s.to_f64().unwrap_or(f64::NAN);
        BootstrapTable {
            n: self.n,
            t: f(&self.t),
            t0: f(&self.t0),
            big_n: f(&self.big_n),
            ratio: f(&self.ratio),
            qbar: self.qbar.as_ref().map(f),
            p0: self.p0.as_ref().map(f),
            rows: self
                .rows
                .iter()
                .map(|r| BootstrapRow { i: r.i, q: f(&r.q), k: f(&r.k), c: f(&r.c), r: r.r.as_ref().map(f) })
                .collect(),
            escape: self.escape,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn rat(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn threshold_exponent_is_twelve_sevenths() {
        let tab = bootstrap_exponents(3, rat(7, 2), rat(2, 1), None, 3).unwrap();
        assert_eq!(tab.t0, rat(12, 7));
        assert_eq!(tab.big_n, rat(6, 1));
        assert_eq!(tab.rows[0].q, rat(4, 1));
    }

    #[test]
    fn t_equal_two_doubles() {
        let tab = bootstrap_exponents(3, rat(7, 2), rat(2, 1), None, 10).unwrap();
        for row in &tab.rows {
            assert_eq!(row.q, BigRational::from_integer((2i64.pow(row.i as u32 + 1) + 2).into()));
        }
        assert_eq!(tab.qbar, Some(rat(2, 1)));
    }

    #[test]
    fn threshold_is_constant() {
        let tab = bootstrap_exponents(3, rat(7, 2), rat(12, 7), None, 20).unwrap();
        assert!(tab.is_constant());
        assert!(matches!(tab.require_escape(), Err(SolveError::NonEscaping { .. })));
    }
}
