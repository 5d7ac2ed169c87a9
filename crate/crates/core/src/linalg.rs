//! Numerical kernels: action of the matrix exponential, a commutator-free
//! Magnus step for time-dependent generators, and eigensolvers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::model::CsrMatrix;
use crate::{Error, Result};

type C = Complex64;

pub fn norm(v: &[C]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn axpy(alpha: C, x: &[C], y: &mut [C]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// exp(t·A) v for a linear map `apply(x, out): out = A x` with ‖A‖ ≤ `bound`.
///
/// Truncated Taylor series on substeps with t·bound ≤ ½ per substep,
/// summed until two consecutive terms fall below 1e-17 relative.
pub fn expmv<F>(apply: F, bound: f64, t: f64, v: &[C]) -> Vec<C>
where
    F: Fn(&[C], &mut [C]),
{
    let mut out = v.to_vec();
    if t == 0.0 || bound == 0.0 || v.is_empty() {
        return out;
    }
    let steps = ((t.abs() * bound) / 0.5).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut term = vec![C::new(0.0, 0.0); v.len()];
    let mut next = vec![C::new(0.0, 0.0); v.len()];
    for _ in 0..steps {
        term.copy_from_slice(&out);
        let mut small = 0;
        for k in 1..200 {
            apply(&term, &mut next);
            let f = C::new(h / k as f64, 0.0);
            for (tv, nv) in term.iter_mut().zip(&next) {
                *tv = f * nv;
            }
            axpy(C::new(1.0, 0.0), &term, &mut out);
            if norm(&term) <= 1e-17 * norm(&out).max(f64::MIN_POSITIVE) {
                small += 1;
                if small == 2 {
                    break;
                }
            } else {
                small = 0;
            }
        }
    }
    out
}

/// exp(−i t H) v for a sparse (possibly non-hermitian) H.
pub fn propagate(h: &CsrMatrix, t: f64, v: &[C]) -> Vec<C> {
    let minus_i = C::new(0.0, -1.0);
    expmv(
        |x, out| {
            h.matvec_into(x, out);
            out.iter_mut().for_each(|z| *z *= minus_i);
        },
        h.norm_bound(),
        t,
        v,
    )
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// One fourth-order commutator-free Magnus step for y' = A(t) y:
///
/// y(t+h) ≈ exp(h(α₁A₁ + α₂A₂)) exp(h(α₂A₁ + α₁A₂)) y(t),
/// A_k = A(t + c_k h), c = ½ ∓ √3/6, α₁ = (3 − 2√3)/12, α₂ = (3 + 2√3)/12.
///
/// `apply(t, x, out)` evaluates out = A(t) x and `bound(t)` bounds ‖A(t)‖.
pub fn cf4_step<F, B>(apply: &F, bound: &B, t: f64, h: f64, y: &[C]) -> Vec<C>
where
    F: Fn(f64, &[C], &mut [C]),
    B: Fn(f64) -> f64,
{
    let t1 = t + (0.5 - SQRT3 / 6.0) * h;
    let t2 = t + (0.5 + SQRT3 / 6.0) * h;
    let a1 = (3.0 - 2.0 * SQRT3) / 12.0;
    let a2 = (3.0 + 2.0 * SQRT3) / 12.0;
    let b = bound(t1).max(bound(t2));
    let mut tmp = vec![C::new(0.0, 0.0); y.len()];
    let stage = |w1: f64, w2: f64, x: &[C]| {
        expmv(
            |v, out| {
                apply(t1, v, out);
                let mut second = vec![C::new(0.0, 0.0); v.len()];
                apply(t2, v, &mut second);
                for (o, s) in out.iter_mut().zip(&second) {
                    *o = *o * w1 + s * w2;
                }
            },
            b * (w1.abs() + w2.abs()),
            h,
            x,
        )
    };
    let first = stage(a2, a1, y);
    tmp.copy_from_slice(&first);
    stage(a1, a2, &tmp)
}

/// Adaptive CF4 integration from `t0` to `t1` with step doubling; local
/// error per step ≤ `tol` relative to ‖y‖. Returns the state and step count.
pub fn cf4_integrate<F, B>(apply: &F, bound: &B, t0: f64, t1: f64, y0: &[C], tol: f64) -> Result<(Vec<C>, usize)>
where
    F: Fn(f64, &[C], &mut [C]),
    B: Fn(f64) -> f64,
{
    let mut t = t0;
    let mut y = y0.to_vec();
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok((y, 0));
    }
    let mut h = span.min(0.5 / bound(t0).max(1e-300));
    let min_step = span * 1e-14;
    let mut steps = 0;
    while t < t1 {
        let h_try = h.min(t1 - t);
        let full = cf4_step(apply, bound, t, h_try, &y);
        let half = cf4_step(apply, bound, t, 0.5 * h_try, &y);
        let two = cf4_step(apply, bound, t + 0.5 * h_try, 0.5 * h_try, &half);
        let diff: Vec<C> = full.iter().zip(&two).map(|(a, b)| a - b).collect();
        let err = norm(&diff) / 15.0 / norm(&two).max(1e-300);
        if err <= tol {
            // Richardson-corrected fifth-order update.
            y = two.iter().zip(&diff).map(|(b, d)| b - d / 15.0).collect();
            t += h_try;
            steps += 1;
        } else if h_try <= min_step {
            return Err(Error::Tolerance(format!("step size underflow at t = {t}")));
        }
        let fac = if err > 0.0 { 0.9 * (tol / err).powf(0.2) } else { 2.0 };
        h = h_try * fac.clamp(0.2, 2.0);
    }
    Ok((y, steps))
}

/// Dense hermitian eigendecomposition, eigenvalues ascending.
pub fn hermitian_eigen(m: &DMatrix<C>) -> (Vec<f64>, DMatrix<C>) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Fix the global phase: largest-modulus component real and positive.
pub fn canonical_phase(v: &mut [C]) {
    let Some(k) = (0..v.len()).max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm()).then(b.cmp(&a))) else {
        return;
    };
    let p = v[k] / v[k].norm();
    if p.is_finite() {
        v.iter_mut().for_each(|z| *z /= p);
    }
}

/// Result of a Lanczos run for the lowest eigenpair.
#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub energy: f64,
    pub vector: Vec<C>,
    pub residual: f64,
    /// Second Ritz value, when the Krylov space has at least two.
    pub next: Option<f64>,
    pub iterations: usize,
}

/// Lanczos with full reorthogonalization for the lowest eigenpair of a
/// hermitian sparse matrix. Deterministic start vector; converged when
/// ‖Hv − λv‖ ≤ tol · max(1, |λ|).
pub fn lanczos_lowest(h: &CsrMatrix, tol: f64, max_iter: usize) -> Result<LanczosResult> {
    let dim = h.nrows();
    let m = max_iter.min(dim).max(1);
    let mut q: Vec<C> = (0..dim).map(|i| C::new(((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5, 0.0)).collect();
    let n0 = norm(&q);
    q.iter_mut().for_each(|z| *z /= n0);
    let mut basis: Vec<Vec<C>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![C::new(0.0, 0.0); dim];
    let mut last_residual = f64::INFINITY;
    for j in 0..m {
        h.matvec_into(&basis[j], &mut w);
        let a = dot(&basis[j], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for qi in &basis {
                let ov = dot(qi, &w);
                axpy(-ov, qi, &mut w);
            }
        }
        let b = norm(&w);
        let check = (j + 1) % 5 == 0 || j + 1 == m || b < 1e-13;
        if check {
            let k = alpha.len();
            let t = DMatrix::from_fn(k, k, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = t.symmetric_eigen();
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
            let lo = order[0];
            let energy = eig.eigenvalues[lo];
            let mut vector = vec![C::new(0.0, 0.0); dim];
            for (i, qi) in basis.iter().enumerate().take(k) {
                axpy(C::new(eig.eigenvectors[(i, lo)], 0.0), qi, &mut vector);
            }
            let nv = norm(&vector);
            vector.iter_mut().for_each(|z| *z /= nv);
            let hv = h.matvec(&vector);
            let r: Vec<C> = hv.iter().zip(&vector).map(|(x, v)| x - energy * v).collect();
            let residual = norm(&r);
            last_residual = residual;
            if residual <= tol * energy.abs().max(1.0) {
                canonical_phase(&mut vector);
                return Ok(LanczosResult {
                    energy,
                    vector,
                    residual,
                    next: order.get(1).map(|&i| eig.eigenvalues[i]),
                    iterations: j + 1,
                });
            }
        }
        if b < 1e-13 || j + 1 == m {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|z| z / b).collect());
    }
    Err(Error::NoConvergence { iterations: alpha.len(), residual: last_residual })
}

/// Eigenvalues and right eigenvectors of a general complex matrix via the
/// complex Schur form A = Q T Q†.
pub fn general_eigen(m: &DMatrix<C>) -> Result<(Vec<C>, DMatrix<C>)> {
    let n = m.nrows();
    let schur = m
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or(Error::NoConvergence { iterations: 10_000, residual: f64::NAN })?;
    let (q, t) = schur.unpack();
    let vals: Vec<C> = (0..n).map(|i| t[(i, i)]).collect();
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut vecs = DMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = vals[k];
        let mut y = DVector::<C>::zeros(n);
        y[k] = C::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = C::new(0.0, 0.0);
            for j in (i + 1)..=k {
                s += t[(i, j)] * y[j];
            }
            let mut d = t[(i, i)] - lambda;
            if d.norm() < 1e-14 * scale {
                d = C::new(1e-14 * scale, 0.0);
            }
            y[i] = -s / d;
        }
        let v = &q * y;
        let nv = v.norm();
        vecs.set_column(k, &(v / C::new(nv, 0.0)));
    }
    Ok((vals, vecs))
}
