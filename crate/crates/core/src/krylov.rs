//! Krylov iterations on flat coefficient vectors with a caller-supplied inner product.

use crate::error::{Result, SolveError};
use crate::real::Real;

pub(crate) struct KrylovOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Final residual norm relative to `|b|`.
    pub relative_residual: T,
}

fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn residual<T: Real>(b: &[T], ax: &[T]) -> Vec<T> {
    b.iter().zip(ax).map(|(&bi, &ai)| bi - ai).collect()
}

/// Preconditioned conjugate gradients for a symmetric positive definite operator.
#[allow(clippy::too_many_arguments)]
pub(crate) fn pcg<T: Real>(
    name: &'static str,
    b: &[T],
    x0: Vec<T>,
    apply: impl Fn(&[T]) -> Vec<T>,
    precond: impl Fn(&[T]) -> Vec<T>,
    dot: impl Fn(&[T], &[T]) -> T,
    tol: T,
    max_iter: usize,
) -> Result<KrylovOutcome<T>> {
    let b_norm = dot(b, b).sqrt();
    if b_norm == T::zero() {
        return Ok(KrylovOutcome { x: vec![T::zero(); b.len()], iterations: 0, relative_residual: T::zero() });
    }
    let mut x = x0;
    let mut r = residual(b, &apply(&x));
    let mut rel = dot(&r, &r).sqrt() / b_norm;
    if rel <= tol {
        return Ok(KrylovOutcome { x, iterations: 0, relative_residual: rel });
    }
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(SolveError::NoConvergence { solver: name, iterations: it, residual: rel.to_f64_lossy() });
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        if it % 50 == 0 {
            r = residual(b, &apply(&x));
        } else {
            axpy(&mut r, -alpha, &ap);
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= tol {
            let true_r = residual(b, &apply(&x));
            rel = dot(&true_r, &true_r).sqrt() / b_norm;
            if rel <= tol * T::lit(10.0) {
                return Ok(KrylovOutcome { x, iterations: it, relative_residual: rel });
            }
            r = true_r;
        }
        if !rel.is_finite() {
            break;
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(SolveError::NoConvergence { solver: name, iterations: max_iter, residual: rel.to_f64_lossy() })
}

/// Right-preconditioned flexible GMRES with restarts.
#[allow(clippy::too_many_arguments)]
pub(crate) fn fgmres<T: Real>(
    name: &'static str,
    b: &[T],
    x0: Vec<T>,
    mut apply: impl FnMut(&[T]) -> Result<Vec<T>>,
    mut precond: impl FnMut(&[T]) -> Result<Vec<T>>,
    dot: impl Fn(&[T], &[T]) -> T,
    tol: T,
    restart: usize,
    max_iter: usize,
) -> Result<KrylovOutcome<T>> {
    let b_norm = dot(b, b).sqrt();
    if b_norm == T::zero() {
        return Ok(KrylovOutcome { x: vec![T::zero(); b.len()], iterations: 0, relative_residual: T::zero() });
    }
    let mut x = x0;
    let mut total = 0;
    let mut rel;
    loop {
        let r = residual(b, &apply(&x)?);
        let beta = dot(&r, &r).sqrt();
        rel = beta / b_norm;
        if rel <= tol || total >= max_iter || !rel.is_finite() {
            break;
        }
        let mut v: Vec<Vec<T>> = vec![r.iter().map(|&ri| ri / beta).collect()];
        let mut z: Vec<Vec<T>> = Vec::new();
        let mut h: Vec<Vec<T>> = Vec::new();
        let mut cs: Vec<T> = Vec::new();
        let mut sn: Vec<T> = Vec::new();
        let mut g = vec![beta];
        let mut k = 0;
        while k < restart && total < max_iter {
            let zk = precond(&v[k])?;
            let mut w = apply(&zk)?;
            z.push(zk);
            let mut col = Vec::with_capacity(k + 2);
            for vi in &v {
                let hij = dot(&w, vi);
                axpy(&mut w, -hij, vi);
                col.push(hij);
            }
            // second Gram-Schmidt pass
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(&w, vi);
                axpy(&mut w, -hij, vi);
                col[i] += hij;
            }
            let wn = dot(&w, &w).sqrt();
            col.push(wn);
            for i in 0..k {
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = cs[i] * a + sn[i] * bb;
                col[i + 1] = -sn[i] * a + cs[i] * bb;
            }
            let (a, bb) = (col[k], col[k + 1]);
            let d = a.hypot(bb);
            let (c, s) = if d == T::zero() { (T::one(), T::zero()) } else { (a / d, bb / d) };
            col[k] = d;
            col[k + 1] = T::zero();
            cs.push(c);
            sn.push(s);
            g.push(-s * g[k]);
            g[k] = c * g[k];
            h.push(col);
            total += 1;
            k += 1;
            rel = g[k].abs() / b_norm;
            if rel <= tol || wn == T::zero() {
                break;
            }
            v.push(w.iter().map(|&wi| wi / wn).collect());
        }
        let mut y = vec![T::zero(); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            axpy(&mut x, *yi, zi);
        }
    }
    if rel <= tol {
        Ok(KrylovOutcome { x, iterations: total, relative_residual: rel })
    } else {
        Err(SolveError::NoConvergence { solver: name, iterations: total, residual: rel.to_f64_lossy() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn tridiag(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut v = 4.0 * x[i];
                if i > 0 {
                    v -= x[i - 1];
                }
                if i + 1 < n {
                    v -= 2.0 * x[i + 1] / 2.0;
                }
                v
            })
            .collect()
    }

    #[test]
    fn pcg_solves_spd() {
        let b: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let out = pcg("t", &b, vec![0.0; 20], tridiag, |r| r.to_vec(), dot, 1e-12, 100).unwrap();
        let ax = tridiag(&out.x);
        assert!(ax.iter().zip(&b).all(|(a, c)| (a - c).abs() < 1e-10));
    }

    #[test]
    fn fgmres_solves_nonsymmetric() {
        let op = |x: &[f64]| -> Result<Vec<f64>> {
            Ok((0..x.len()).map(|i| 3.0 * x[i] + if i > 0 { x[i - 1] } else { 0.0 }).collect())
        };
        let b: Vec<f64> = (0..15).map(|i| 1.0 + i as f64).collect();
        let out = fgmres("t", &b, vec![0.0; 15], op, |r| Ok(r.to_vec()), dot, 1e-12, 10, 200).unwrap();
        let ax = op(&out.x).unwrap();
        assert!(ax.iter().zip(&b).all(|(a, c)| (a - c).abs() < 1e-9));
    }
}
