//! Selective optimization on the final-state manifold.
//!
//! With `M = S S†`, the functional `p_target - Σ_{k≠target} p_k` restricted
//! to M-normalized coefficient vectors becomes the Rayleigh quotient of the
//! Hermitian matrix `S† D S`, `D = diag(±1)`. That matrix is congruent to
//! `D`, so it has exactly one positive eigenvalue, which is the optimum.

use nalgebra::{Cholesky, ComplexField, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::response::OverlapMatrix;
use crate::scalar::{complex_pairs, scaled_tol, Cplx, Real};

/// Cholesky pivots below this trigger the eigen-square-root fallback.
pub const CHOLESKY_PIVOT_FLOOR: f64 = 1e-12;

/// An eigenvalue counts as positive above this fraction of the spectral radius.
pub const POSITIVITY_TOLERANCE: f64 = 1e-10;

/// Optimal coefficients of the selective state and what they achieve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SelectiveSolution<T: Real> {
    pub target: usize,
    /// Achieved value of the selective functional.
    pub lambda: T,
    /// Coefficients over the normalized response states, with `ṽ† M ṽ = 1`
    /// and the phase fixed so that `(M ṽ)_target` is real and positive.
    #[serde(with = "complex_pairs")]
    pub coefficients: Vec<Cplx<T>>,
    /// `p_k = |(M ṽ)_k|²`, in units of `N_{f_k}`.
    pub populations: Vec<T>,
}

impl<T: Real> SelectiveSolution<T> {
    /// `Σ_k D_kk p_k`.
    pub fn functional(&self) -> T {
        signed_sum(&self.populations, self.target)
    }
}

fn signed_sum<T: Real>(p: &[T], target: usize) -> T {
    p.iter()
        .enumerate()
        .fold(T::zero(), |acc, (k, &x)| if k == target { acc + x } else { acc - x })
}

fn zero<T: Real>() -> Cplx<T> {
    Cplx::new(T::zero(), T::zero())
}

/// Square-root factor `S` with `M = S S†`.
fn square_root_factor<T: Real>(m: &OverlapMatrix<T>) -> Result<DMatrix<Cplx<T>>> {
    let floor = scaled_tol::<T>(CHOLESKY_PIVOT_FLOOR);
    if let Some(chol) = Cholesky::new(m.matrix.clone()) {
        let l = chol.l();
        if l.diagonal().iter().all(|d| d.re > floor) {
            return Ok(l);
        }
    }
    // Eigen square root: M = U Λ U†  =>  S = U Λ^{1/2}.
    let eig = SymmetricEigen::new(m.matrix.clone());
    let n = m.dim();
    if eig.eigenvalues.iter().any(|&l| l <= T::zero()) {
        let (mut first, mut second, mut worst) = (0, n.min(2).saturating_sub(1), T::zero());
        for j in 0..n {
            for k in (j + 1)..n {
                if m.get(j, k).modulus() > worst {
                    (first, second, worst) = (j, k, m.get(j, k).modulus());
                }
            }
        }
        return Err(Error::DegenerateTargets {
            first,
            second,
            overlap: worst.as_f64(),
        });
    }
    let mut s = eig.eigenvectors;
    for (c, &l) in eig.eigenvalues.iter().enumerate() {
        let r = l.sqrt();
        for v in s.column_mut(c).iter_mut() {
            *v = v.scale(r);
        }
    }
    Ok(s)
}

/// Solves the selective problem for final state `target`.
pub fn solve_selective<T: Real>(m: &OverlapMatrix<T>, target: usize) -> Result<SelectiveSolution<T>> {
    let n = m.dim();
    if target >= n {
        return Err(Error::IndexOutOfRange {
            what: "final levels",
            index: target,
            len: n,
        });
    }
    let s = square_root_factor(m)?;
    let d = DVector::from_fn(n, |k, _| if k == target { T::one() } else { -T::one() });

    // A = S† D S, Hermitian.
    let mut ds = s.clone();
    for (r, &sign) in d.iter().enumerate() {
        for c in 0..n {
            ds[(r, c)] = ds[(r, c)].scale(sign);
        }
    }
    let a = s.adjoint() * ds;
    let a = (&a + a.adjoint()).map(|z| z.scale(T::lit(0.5)));
    let eig = SymmetricEigen::new(a);

    let radius = eig.eigenvalues.iter().fold(T::zero(), |acc, l| acc.max(l.abs()));
    let threshold = T::lit(POSITIVITY_TOLERANCE) * radius;
    let positive: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > threshold).collect();
    if positive.len() != 1 {
        return Err(Error::InertiaViolation {
            positive: positive.len(),
        });
    }
    let top = positive[0];
    let lambda = eig.eigenvalues[top];
    let w = eig.eigenvectors.column(top).into_owned();

    // ṽ = (S†)^{-1} w; S† is upper triangular for the Cholesky branch but
    // the general solve covers the eigen-square-root branch as well.
    let v = s.adjoint().lu().solve(&w).ok_or(Error::DegenerateTargets {
        first: 0,
        second: n.saturating_sub(1),
        overlap: f64::NAN,
    })?;

    // Normalize in the M metric and fix the global phase.
    let mv = &m.matrix * &v;
    let metric = v.dotc(&mv).re;
    let mut scale = Cplx::new(T::one() / metric.sqrt(), T::zero());
    let anchor = mv[target];
    if anchor.modulus() > T::zero() {
        scale *= anchor.conj() / anchor.modulus();
    }
    let coefficients: Vec<Cplx<T>> = v.iter().map(|z| z * scale).collect();
    let populations = populations(m, &coefficients);

    Ok(SelectiveSolution {
        target,
        lambda,
        coefficients,
        populations,
    })
}

/// `p_k = |(M v)_k|²`.
pub fn populations<T: Real>(m: &OverlapMatrix<T>, v: &[Cplx<T>]) -> Vec<T> {
    let n = m.dim();
    (0..n)
        .map(|k| (0..n).fold(zero::<T>(), |acc, j| acc + m.get(k, j) * v[j]).norm_sqr())
        .collect()
}

/// M-norm `v† M v` of a coefficient vector.
pub fn metric_norm<T: Real>(m: &OverlapMatrix<T>, v: &[Cplx<T>]) -> T {
    let n = m.dim();
    let mut acc = zero::<T>();
    for j in 0..n {
        for k in 0..n {
            acc += v[j].conj() * m.get(j, k) * v[k];
        }
    }
    acc.re
}

/// Populations excited by the normalized response state of `target` alone:
/// `p_k = |M_{k,target}|²`.
pub fn indistinctive_populations<T: Real>(m: &OverlapMatrix<T>, target: usize) -> Result<Vec<T>> {
    if target >= m.dim() {
        return Err(Error::IndexOutOfRange {
            what: "final levels",
            index: target,
            len: m.dim(),
        });
    }
    Ok((0..m.dim()).map(|k| m.get(k, target).norm_sqr()).collect())
}

/// Population contrast `|p_a - p_b| / (p_a + p_b)`.
pub fn selectivity<T: Real>(p: &[T], a: usize, b: usize) -> Result<T> {
    for &i in &[a, b] {
        if i >= p.len() {
            return Err(Error::IndexOutOfRange {
                what: "populations",
                index: i,
                len: p.len(),
            });
        }
    }
    let sum = p[a] + p[b];
    if sum <= T::zero() {
        return Err(Error::UndefinedSelectivity { a, b });
    }
    Ok((p[a] - p[b]).abs() / sum)
}
