//! Two-photon matter response and the closed-form overlaps between
//! response states.
//!
//! Working units: ħ = 1, field amplitude = 1, energies in units of the
//! cavity frequency. The field prefactor of the response function is then
//! `(i)^2 = -1` and drops out of every normalized quantity.

use std::f64::consts::PI;

use nalgebra::{Cholesky, ComplexField, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::FrequencyGrid;
use crate::scalar::{cplx, scaled_tol, Cplx, Real};

/// Ground, `n_e` intermediate and `n_f` final levels. Energies are measured
/// from the ground state. `dipoles_ef[j][k]` couples `e_j` to `f_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LevelScheme<T: Real> {
    pub energies_e: Vec<T>,
    pub energies_f: Vec<T>,
    pub widths_e: Vec<T>,
    pub widths_f: Vec<T>,
    pub dipoles_ge: Vec<T>,
    pub dipoles_ef: Vec<Vec<T>>,
}

impl<T: Real> LevelScheme<T> {
    pub fn n_e(&self) -> usize {
        self.energies_e.len()
    }

    pub fn n_f(&self) -> usize {
        self.energies_f.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (n_e, n_f) = (self.n_e(), self.n_f());
        if n_e == 0 || n_f == 0 {
            return Err(Error::invalid(
                "level_scheme",
                "needs at least one intermediate and one final level",
            ));
        }
        let check_len = |field: &str, len: usize, want: usize| {
            if len == want {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("expected {want} entries, got {len}")))
            }
        };
        check_len("widths_e", self.widths_e.len(), n_e)?;
        check_len("widths_f", self.widths_f.len(), n_f)?;
        check_len("dipoles_ge", self.dipoles_ge.len(), n_e)?;
        check_len("dipoles_ef", self.dipoles_ef.len(), n_e)?;
        for row in &self.dipoles_ef {
            check_len("dipoles_ef", row.len(), n_f)?;
        }
        let positive = |field: &str, v: &[T]| {
            for (i, x) in v.iter().enumerate() {
                if !(x.is_finite() && *x > T::zero()) {
                    return Err(Error::invalid(
                        field,
                        format!("entry {i} must be finite and positive, got {x}"),
                    ));
                }
            }
            Ok(())
        };
        positive("energies_e", &self.energies_e)?;
        positive("energies_f", &self.energies_f)?;
        positive("widths_e", &self.widths_e)?;
        positive("widths_f", &self.widths_f)?;
        let finite = self
            .dipoles_ge
            .iter()
            .chain(self.dipoles_ef.iter().flatten())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::invalid("dipoles", "must be finite"));
        }
        Ok(())
    }

    /// Complex pole `ω - iγ` of intermediate level `j`.
    pub fn pole_e(&self, j: usize) -> Cplx<T> {
        cplx(self.energies_e[j], -self.widths_e[j])
    }

    /// Complex pole `ω - iγ` of final level `k`.
    pub fn pole_f(&self, k: usize) -> Cplx<T> {
        cplx(self.energies_f[k], -self.widths_f[k])
    }

    /// Path amplitude `μ_{g e_j} μ_{e_j f_k}`.
    #[inline]
    pub fn path_weight(&self, j: usize, k: usize) -> T {
        self.dipoles_ge[j] * self.dipoles_ef[j][k]
    }

    /// Same scheme with every linewidth replaced.
    pub fn with_widths(&self, gamma_e: T, gamma_f: T) -> Self {
        Self {
            widths_e: vec![gamma_e; self.n_e()],
            widths_f: vec![gamma_f; self.n_f()],
            ..self.clone()
        }
    }

    /// Same scheme with final levels reordered: new level `i` is old level
    /// `order[i]`.
    pub fn permute_finals(&self, order: &[usize]) -> Self {
        Self {
            energies_f: order.iter().map(|&k| self.energies_f[k]).collect(),
            widths_f: order.iter().map(|&k| self.widths_f[k]).collect(),
            dipoles_ef: self
                .dipoles_ef
                .iter()
                .map(|row| order.iter().map(|&k| row[k]).collect())
                .collect(),
            ..self.clone()
        }
    }

    /// Largest linewidth in the scheme.
    pub fn max_width(&self) -> T {
        self.widths_e
            .iter()
            .chain(&self.widths_f)
            .fold(T::zero(), |a, &b| a.max(b))
    }

    /// Smallest linewidth in the scheme.
    pub fn min_width(&self) -> T {
        self.widths_e
            .iter()
            .chain(&self.widths_f)
            .fold(T::max_value().unwrap_or(T::one()), |a, &b| a.min(b))
    }

    /// Single-photon frequencies a pulse must reach: every `ω_e`, every
    /// `ω_f - ω_e` and every `ω_f / 2`, with a label for diagnostics.
    pub fn resonances(&self) -> Vec<(String, T)> {
        let mut out = Vec::new();
        for (j, &e) in self.energies_e.iter().enumerate() {
            out.push((format!("ω_e{}", j + 1), e));
        }
        for (k, &f) in self.energies_f.iter().enumerate() {
            for (j, &e) in self.energies_e.iter().enumerate() {
                out.push((format!("ω_f{} - ω_e{}", k + 1, j + 1), f - e));
            }
        }
        for (k, &f) in self.energies_f.iter().enumerate() {
            out.push((format!("ω_f{}/2", k + 1), f * T::lit(0.5)));
        }
        out
    }

    fn check_final(&self, k: usize) -> Result<()> {
        if k < self.n_f() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "final levels",
                index: k,
                len: self.n_f(),
            })
        }
    }
}

/// Lorentzian line shape `1 / (ω - ω_s + iγ_s)`.
#[inline]
pub fn lorentzian<T: Real>(omega: T, omega_s: T, gamma_s: T) -> Cplx<T> {
    cplx(omega - omega_s, gamma_s).inv()
}

/// Matter response `T_{f_k}(ω1, ω2)` at `t = 0`:
/// `-Σ_j μ_{g e_j} μ_{e_j f_k} [L_{e_j}(ω1) + L_{e_j}(ω2)] L_{f_k}(ω1 + ω2)`.
///
/// Panics if `k` is out of range.
pub fn response<T: Real>(scheme: &LevelScheme<T>, k: usize, w1: T, w2: T) -> Cplx<T> {
    let mut paths = Cplx::new(T::zero(), T::zero());
    for j in 0..scheme.n_e() {
        let (we, ge) = (scheme.energies_e[j], scheme.widths_e[j]);
        let l = lorentzian(w1, we, ge) + lorentzian(w2, we, ge);
        paths += l * scheme.path_weight(j, k);
    }
    -paths * lorentzian(w1 + w2, scheme.energies_f[k], scheme.widths_f[k])
}

/// Closed-form overlap `Σ_{jk} = <T_{f_j}|T_{f_k}>`:
/// `-8π² Σ_{m,n} a_{mj} a_{nk} / ((z_{e_m} - z*_{e_n})(z_{f_j} - z*_{f_k}))`
/// with `a_{mj} = μ_{g e_m} μ_{e_m f_j}`, summed over all ordered pairs.
pub fn overlap<T: Real>(scheme: &LevelScheme<T>, j: usize, k: usize) -> Result<Cplx<T>> {
    scheme.check_final(j)?;
    scheme.check_final(k)?;
    Ok(match j.cmp(&k) {
        std::cmp::Ordering::Less => overlap_unchecked(scheme, j, k),
        std::cmp::Ordering::Greater => overlap_unchecked(scheme, k, j).conj(),
        std::cmp::Ordering::Equal => Cplx::new(overlap_unchecked(scheme, j, j).re, T::zero()),
    })
}

fn overlap_unchecked<T: Real>(scheme: &LevelScheme<T>, j: usize, k: usize) -> Cplx<T> {
    let final_denominator = scheme.pole_f(j) - scheme.pole_f(k).conj();
    let mut sum = Cplx::new(T::zero(), T::zero());
    for m in 0..scheme.n_e() {
        let a_mj = scheme.path_weight(m, j);
        if a_mj == T::zero() {
            continue;
        }
        let zm = scheme.pole_e(m);
        for n in 0..scheme.n_e() {
            let a_nk = scheme.path_weight(n, k);
            sum += (zm - scheme.pole_e(n).conj()).inv() * (a_mj * a_nk);
        }
    }
    sum / final_denominator * (-T::lit(8.0 * PI * PI))
}

/// Normalization `N_{f_k} = <T_{f_k}|T_{f_k}>`, the real part of the
/// diagonal overlap.
pub fn norm<T: Real>(scheme: &LevelScheme<T>, k: usize) -> Result<T> {
    let value = overlap(scheme, k, k)?.re;
    if value > T::zero() && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonPositiveNorm {
            state: k,
            value: value.as_f64(),
        })
    }
}

/// Real form of the normalization: diagonal path terms
/// `2π² a_m² / (γ_{e_m} γ_f)` plus, for each unordered pair `m < n`,
/// `8π² a_m a_n (γ_m + γ_n) / (γ_f ((ω_m - ω_n)² + (γ_m + γ_n)²))`.
/// Used as an algebraic cross-check of [`norm`].
pub fn norm_reduced_form<T: Real>(scheme: &LevelScheme<T>, k: usize) -> Result<T> {
    scheme.check_final(k)?;
    let two_pi2 = T::lit(2.0 * PI * PI);
    let gf = scheme.widths_f[k];
    let mut total = T::zero();
    for m in 0..scheme.n_e() {
        let am = scheme.path_weight(m, k);
        total += two_pi2 * am * am / (scheme.widths_e[m] * gf);
        for n in (m + 1)..scheme.n_e() {
            let an = scheme.path_weight(n, k);
            let gsum = scheme.widths_e[m] + scheme.widths_e[n];
            let dw = scheme.energies_e[m] - scheme.energies_e[n];
            total += two_pi2 * T::lit(4.0) * am * an * gsum / (gf * (dw * dw + gsum * gsum));
        }
    }
    Ok(total)
}

/// Gram matrix of normalized response states, `M_{jk} = Σ_{jk} / sqrt(N_j N_k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct OverlapMatrix<T: Real> {
    pub matrix: DMatrix<Cplx<T>>,
    pub norms: Vec<T>,
}

impl<T: Real> OverlapMatrix<T> {
    pub fn dim(&self) -> usize {
        self.norms.len()
    }

    pub fn get(&self, j: usize, k: usize) -> Cplx<T> {
        self.matrix[(j, k)]
    }

    /// Builds from an already-normalized Hermitian matrix (norms set to 1).
    /// Checks positive definiteness the same way [`overlap_matrix`] does.
    pub fn from_normalized(matrix: DMatrix<Cplx<T>>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n {
            return Err(Error::invalid("overlap matrix", "must be square"));
        }
        let out = Self {
            matrix,
            norms: vec![T::one(); n],
        };
        out.check_positive_definite()?;
        Ok(out)
    }

    /// Largest `|M_{jk} - conj(M_{kj})|`.
    pub fn hermiticity_error(&self) -> T {
        let m = &self.matrix;
        (&m.adjoint() - m).iter().fold(T::zero(), |a, z| a.max(z.modulus()))
    }

    fn check_positive_definite(&self) -> Result<()> {
        let n = self.dim();
        let min_pivot = scaled_tol::<T>(1e-12);
        let ok = Cholesky::new(self.matrix.clone())
            .map(|c| c.l().diagonal().iter().all(|d| d.re > min_pivot))
            .unwrap_or(false);
        if ok {
            return Ok(());
        }
        let (mut first, mut second, mut worst) = (0, n.min(2).saturating_sub(1), T::zero());
        for j in 0..n {
            for k in (j + 1)..n {
                let v = self.matrix[(j, k)].modulus();
                if v > worst {
                    (first, second, worst) = (j, k, v);
                }
            }
        }
        Err(Error::DegenerateTargets {
            first,
            second,
            overlap: worst.as_f64(),
        })
    }
}

/// Closed-form overlap matrix with unit diagonal and exact Hermiticity.
pub fn overlap_matrix<T: Real>(scheme: &LevelScheme<T>) -> Result<OverlapMatrix<T>> {
    scheme.validate()?;
    let n = scheme.n_f();
    let norms = (0..n).map(|k| norm(scheme, k)).collect::<Result<Vec<T>>>()?;
    let mut matrix = DMatrix::from_element(n, n, Cplx::new(T::zero(), T::zero()));
    for j in 0..n {
        matrix[(j, j)] = Cplx::new(T::one(), T::zero());
        for k in (j + 1)..n {
            let m = overlap_unchecked(scheme, j, k) / (norms[j] * norms[k]).sqrt();
            matrix[(j, k)] = m;
            matrix[(k, j)] = m.conj();
        }
    }
    let out = OverlapMatrix { matrix, norms };
    out.check_positive_definite()?;
    Ok(out)
}

/// Samples `T_{f_k}` on every grid point, row index `ω1`, column index `ω2`.
pub fn sample_response<T: Real>(scheme: &LevelScheme<T>, k: usize, grid: &FrequencyGrid<T>) -> DMatrix<Cplx<T>> {
    let w = grid.points();
    DMatrix::from_fn(w.len(), w.len(), |a, b| response(scheme, k, w[a], w[b]))
}

/// Independent check of [`overlap`]: the uniform-grid quadrature
/// `Σ_ab T_{f_j}(ω_a, ω_b) conj(T_{f_k}(ω_a, ω_b)) Δω²`, which is
/// `<T_{f_j}|T_{f_k}>` since the wavefunction of `|T_f>` is `T_f^*`.
pub fn quadrature_overlap_oracle<T: Real>(
    scheme: &LevelScheme<T>,
    j: usize,
    k: usize,
    grid: &FrequencyGrid<T>,
) -> Result<Cplx<T>> {
    scheme.check_final(j)?;
    scheme.check_final(k)?;
    grid.check_coverage(scheme)?;
    let tj = sample_response(scheme, j, grid);
    let tk = if j == k {
        tj.clone()
    } else {
        sample_response(scheme, k, grid)
    };
    Ok(grid_inner(&tj, &tk, grid.spacing()))
}

/// Quadrature overlaps for all pairs at once.
pub fn quadrature_overlap_matrix<T: Real>(
    scheme: &LevelScheme<T>,
    grid: &FrequencyGrid<T>,
) -> Result<DMatrix<Cplx<T>>> {
    grid.check_coverage(scheme)?;
    let samples: Vec<_> = (0..scheme.n_f()).map(|k| sample_response(scheme, k, grid)).collect();
    let n = scheme.n_f();
    let h = grid.spacing();
    Ok(DMatrix::from_fn(n, n, |j, k| grid_inner(&samples[j], &samples[k], h)))
}

fn grid_inner<T: Real>(a: &DMatrix<Cplx<T>>, b: &DMatrix<Cplx<T>>, h: T) -> Cplx<T> {
    let sum = a
        .iter()
        .zip(b.iter())
        .fold(Cplx::new(T::zero(), T::zero()), |acc, (x, y)| acc + x * y.conj());
    sum * (h * h)
}
