//! Gridded two-photon wavefunctions, their Schmidt decomposition and the
//! separable pulse built from the leading Schmidt pair.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::{ComplexField, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::response::{norm, response, LevelScheme};
use crate::scalar::{Cplx, Real};

/// Minimum points per axis.
pub const MIN_GRID_POINTS: usize = 64;

/// Required distance between every resonance and the grid edge, in units
/// of the largest linewidth.
pub const COVERAGE_MARGIN_WIDTHS: f64 = 10.0;

/// Uniform frequency axis shared by both photons.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FrequencyGrid<T: Real> {
    pub omega_min: T,
    pub omega_max: T,
    pub n_points: usize,
}

impl<T: Real> FrequencyGrid<T> {
    pub fn new(omega_min: T, omega_max: T, n_points: usize) -> Result<Self> {
        let grid = Self {
            omega_min,
            omega_max,
            n_points,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < MIN_GRID_POINTS {
            return Err(Error::invalid(
                "grid_points",
                format!("need at least {MIN_GRID_POINTS} points, got {}", self.n_points),
            ));
        }
        if !(self.omega_min.is_finite() && self.omega_max.is_finite() && self.omega_max > self.omega_min) {
            return Err(Error::invalid("grid", "omega_max must exceed omega_min"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> T {
        (self.omega_max - self.omega_min) / T::lit((self.n_points - 1) as f64)
    }

    pub fn point(&self, i: usize) -> T {
        self.omega_min + self.spacing() * T::lit(i as f64)
    }

    pub fn points(&self) -> Vec<T> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Resonances closer than `10 × max γ` to either edge (or outside).
    pub fn uncovered(&self, scheme: &LevelScheme<T>) -> Vec<String> {
        let margin = T::lit(COVERAGE_MARGIN_WIDTHS) * scheme.max_width();
        scheme
            .resonances()
            .into_iter()
            .filter(|(_, w)| *w - margin < self.omega_min || *w + margin > self.omega_max)
            .map(|(label, w)| format!("{label} = {w}"))
            .collect()
    }

    pub fn check_coverage(&self, scheme: &LevelScheme<T>) -> Result<()> {
        self.validate()?;
        let uncovered = self.uncovered(scheme);
        if uncovered.is_empty() {
            Ok(())
        } else {
            Err(Error::GridCoverage { uncovered })
        }
    }
}

/// Two-photon amplitude `Φ(ω1_a, ω2_b)` on a square grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GriddedWavefunction<T: Real> {
    pub grid: FrequencyGrid<T>,
    /// Row index is `ω1`, column index is `ω2`.
    pub amplitudes: DMatrix<Cplx<T>>,
}

/// Local maximum of `|Φ|²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Peak<T: Real> {
    pub omega1: T,
    pub omega2: T,
    pub intensity: T,
}

impl<T: Real> GriddedWavefunction<T> {
    /// `Σ_ab |Φ_ab|² Δω²`.
    pub fn norm_sqr(&self) -> T {
        let h = self.grid.spacing();
        self.amplitudes.iter().fold(T::zero(), |a, z| a + z.norm_sqr()) * h * h
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > T::zero() {
            let inv = T::one() / n;
            self.amplitudes.apply(|z| *z = z.scale(inv));
        }
    }

    /// Largest `|Φ_ab - Φ_ba|`.
    pub fn transposition_asymmetry(&self) -> T {
        let a = &self.amplitudes;
        (a - a.transpose()).iter().fold(T::zero(), |m, z| m.max(z.modulus()))
    }

    /// `|Φ|²` at every grid point.
    pub fn intensity(&self) -> DMatrix<T> {
        self.amplitudes.map(|z| z.norm_sqr())
    }

    /// Strict local maxima of `|Φ|²` over the 8-neighbourhood, strongest
    /// first, at most `limit` of them and none below `floor` × the global
    /// maximum.
    pub fn peaks(&self, limit: usize, floor: T) -> Vec<Peak<T>> {
        let i = self.intensity();
        let n = self.grid.n_points;
        let global = i.max();
        let mut out = Vec::new();
        for a in 1..n - 1 {
            for b in 1..n - 1 {
                let v = i[(a, b)];
                if v < floor * global {
                    continue;
                }
                let is_max = (a - 1..=a + 1)
                    .flat_map(|x| (b - 1..=b + 1).map(move |y| (x, y)))
                    .filter(|&(x, y)| (x, y) != (a, b))
                    .all(|(x, y)| i[(x, y)] < v);
                if is_max {
                    out.push(Peak {
                        omega1: self.grid.point(a),
                        omega2: self.grid.point(b),
                        intensity: v,
                    });
                }
            }
        }
        out.sort_by(|p, q| {
            q.intensity
                .partial_cmp(&p.intensity)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        out.truncate(limit);
        out
    }

    /// Delimited text export: `#` header lines with grid metadata, then one
    /// `omega1,omega2,re,im,abs2` row per grid point, `ω1` major.
    pub fn write_csv<W: Write>(&self, mut out: W, title: &str) -> std::io::Result<()> {
        let g = &self.grid;
        writeln!(out, "# {title}")?;
        writeln!(
            out,
            "# grid: omega_min={} omega_max={} n_points={} spacing={}",
            g.omega_min,
            g.omega_max,
            g.n_points,
            g.spacing()
        )?;
        writeln!(out, "# normalization: sum |phi|^2 * spacing^2 = 1")?;
        writeln!(out, "# columns: omega1, omega2, Re phi, Im phi, |phi|^2")?;
        writeln!(out, "omega1,omega2,re,im,abs2")?;
        let w = g.points();
        let mut line = String::with_capacity(128);
        for a in 0..g.n_points {
            for b in 0..g.n_points {
                let z = self.amplitudes[(a, b)];
                line.clear();
                let _ = writeln!(line, "{},{},{},{},{}", w[a], w[b], z.re, z.im, z.norm_sqr());
                out.write_all(line.as_bytes())?;
            }
        }
        Ok(())
    }
}

fn response_samples<T: Real>(scheme: &LevelScheme<T>, k: usize, w: &[T]) -> Vec<Cplx<T>> {
    let n = w.len();
    // Column-major to match nalgebra storage: index = a + b * n.
    (0..n)
        .into_par_iter()
        .flat_map_iter(|b| w.iter().map(move |&wa| response(scheme, k, wa, w[b])))
        .collect()
}

/// `Φ_ab = Σ_j c_j conj(T_{f_j}(ω_a, ω_b)) / sqrt(N_{f_j})`, grid-normalized.
pub fn sample_wavefunction<T: Real>(
    scheme: &LevelScheme<T>,
    coefficients: &[Cplx<T>],
    grid: &FrequencyGrid<T>,
) -> Result<GriddedWavefunction<T>> {
    if coefficients.len() != scheme.n_f() {
        return Err(Error::invalid(
            "coefficients",
            format!("expected {} entries, got {}", scheme.n_f(), coefficients.len()),
        ));
    }
    grid.check_coverage(scheme)?;
    let n = grid.n_points;
    let w = grid.points();
    let mut data = vec![Cplx::new(T::zero(), T::zero()); n * n];
    for (k, &c) in coefficients.iter().enumerate() {
        if c.modulus() == T::zero() {
            continue;
        }
        let weight = c / norm(scheme, k)?.sqrt();
        let t = response_samples(scheme, k, &w);
        data.par_iter_mut()
            .zip(t.par_iter())
            .for_each(|(d, tk)| *d += tk.conj() * weight);
    }
    let mut psi = GriddedWavefunction {
        grid: *grid,
        amplitudes: DMatrix::from_vec(n, n, data),
    };
    psi.normalize();
    Ok(psi)
}

/// `|Σ_ab T_{f_k}(ω_a, ω_b) Φ_ab Δω²|² / N_{f_k}`.
pub fn population_of<T: Real>(scheme: &LevelScheme<T>, k: usize, psi: &GriddedWavefunction<T>) -> Result<T> {
    if k >= scheme.n_f() {
        return Err(Error::IndexOutOfRange {
            what: "final levels",
            index: k,
            len: scheme.n_f(),
        });
    }
    psi.grid.check_coverage(scheme)?;
    let w = psi.grid.points();
    let h = psi.grid.spacing();
    let n = psi.grid.n_points;
    // Column partial sums are combined serially so the result does not
    // depend on the thread schedule.
    let columns: Vec<Cplx<T>> = (0..n)
        .into_par_iter()
        .map(|b| {
            let col = psi.amplitudes.column(b);
            w.iter()
                .zip(col.iter())
                .fold(Cplx::new(T::zero(), T::zero()), |acc, (&wa, phi)| {
                    acc + response(scheme, k, wa, w[b]) * phi
                })
        })
        .collect();
    let amp = columns.into_iter().fold(Cplx::new(T::zero(), T::zero()), |a, b| a + b);
    Ok((amp * (h * h)).norm_sqr() / norm(scheme, k)?)
}

/// Populations of every final state, see [`population_of`].
pub fn populations_of<T: Real>(scheme: &LevelScheme<T>, psi: &GriddedWavefunction<T>) -> Result<Vec<T>> {
    (0..scheme.n_f()).map(|k| population_of(scheme, k, psi)).collect()
}

/// Schmidt weights and mode pairs. Modes are orthonormal under the
/// `Δω`-weighted inner product.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtDecomposition<T: Real> {
    /// Descending, non-negative.
    pub weights: Vec<T>,
    /// Column `j` is `φ_j(ω1)`.
    pub modes_1: DMatrix<Cplx<T>>,
    /// Column `j` is `ψ_j(ω2)`.
    pub modes_2: DMatrix<Cplx<T>>,
    pub spacing: T,
}

impl<T: Real> SchmidtDecomposition<T> {
    /// `Σ_j r_j²`.
    pub fn weight_sum(&self) -> T {
        self.weights.iter().fold(T::zero(), |a, &r| a + r * r)
    }

    /// Effective number of modes `1 / Σ r⁴`.
    pub fn schmidt_number(&self) -> T {
        let p4 = self.weights.iter().fold(T::zero(), |a, &r| a + r * r * r * r);
        T::one() / p4
    }

    /// Largest deviation of the mode Gram matrices from the identity, over
    /// the first `count` modes.
    pub fn orthonormality_error(&self, count: usize) -> T {
        let h = self.spacing;
        let count = count.min(self.weights.len());
        let mut worst = T::zero();
        for modes in [&self.modes_1, &self.modes_2] {
            let m = modes.columns(0, count);
            let gram = m.adjoint() * m;
            for r in 0..count {
                for c in 0..count {
                    let want = if r == c { T::one() } else { T::zero() };
                    worst = worst.max((gram[(r, c)].scale(h) - Cplx::new(want, T::zero())).modulus());
                }
            }
        }
        worst
    }
}

/// Schmidt decomposition through the SVD of `Φ Δω`.
///
/// Each mode pair's phase is fixed so the largest-magnitude component of
/// `φ_j` is real and positive.
pub fn schmidt<T: Real>(psi: &GriddedWavefunction<T>) -> SchmidtDecomposition<T> {
    let h = psi.grid.spacing();
    let scaled = psi.amplitudes.map(|z| z.scale(h));
    let svd = scaled.svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let n = svd.singular_values.len();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let inv_sqrt_h = T::one() / h.sqrt();
    let rows = psi.grid.n_points;
    let mut modes_1 = DMatrix::from_element(rows, n, Cplx::new(T::zero(), T::zero()));
    let mut modes_2 = modes_1.clone();
    let mut weights = Vec::with_capacity(n);
    for (col, &i) in order.iter().enumerate() {
        weights.push(svd.singular_values[i]);
        let phi: DVector<Cplx<T>> = u.column(i).map(|z| z.scale(inv_sqrt_h));
        // Φ Δω = Σ s_i u_i v_i†, so ψ_i(ω2) = conj(v_i) = row i of V†.
        let psi2: DVector<Cplx<T>> = v_t.row(i).transpose().map(|z| z.scale(inv_sqrt_h));
        let pivot = phi.iter().copied().fold(Cplx::new(T::zero(), T::zero()), |best, z| {
            if z.norm_sqr() > best.norm_sqr() {
                z
            } else {
                best
            }
        });
        let phase = if pivot.modulus() > T::zero() {
            pivot.conj() / pivot.modulus()
        } else {
            Cplx::new(T::one(), T::zero())
        };
        modes_1.set_column(col, &(phi * phase));
        modes_2.set_column(col, &(psi2 * phase.conj()));
    }

    SchmidtDecomposition {
        weights,
        modes_1,
        modes_2,
        spacing: h,
    }
}

/// Separable pulse `φ_1(ω1) ψ_1(ω2)` from the leading Schmidt pair.
pub fn classical_pulse<T: Real>(
    sd: &SchmidtDecomposition<T>,
    grid: &FrequencyGrid<T>,
) -> Result<GriddedWavefunction<T>> {
    if sd.modes_1.nrows() != grid.n_points || (sd.spacing - grid.spacing()).abs() > T::default_epsilon() * T::lit(16.0)
    {
        return Err(Error::invalid("grid", "does not match the Schmidt decomposition"));
    }
    let phi = sd.modes_1.column(0);
    let psi = sd.modes_2.column(0);
    let amplitudes = phi * psi.transpose();
    Ok(GriddedWavefunction {
        grid: *grid,
        amplitudes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_scheme() -> LevelScheme<f64> {
        LevelScheme {
            energies_e: vec![1.0],
            energies_f: vec![2.1],
            widths_e: vec![0.01],
            widths_f: vec![0.02],
            dipoles_ge: vec![1.0],
            dipoles_ef: vec![vec![1.0]],
        }
    }

    fn grid() -> FrequencyGrid<f64> {
        FrequencyGrid::new(0.5, 1.7, 128).unwrap()
    }

    #[test]
    fn grid_spacing_and_points() {
        let g = FrequencyGrid::new(0.0, 1.0, 101).unwrap();
        assert!((g.spacing() - 0.01).abs() < 1e-15);
        assert!((g.point(100) - 1.0).abs() < 1e-14);
        assert!(FrequencyGrid::new(0.0, 1.0, 32).is_err());
        assert!(FrequencyGrid::new(1.0, 1.0, 128).is_err());
    }

    #[test]
    fn coverage_failure_lists_resonances() {
        let g = FrequencyGrid::new(0.95, 1.7, 128).unwrap();
        match g.check_coverage(&toy_scheme()) {
            Err(Error::GridCoverage { uncovered }) => {
                assert!(uncovered.iter().any(|s| s.starts_with("ω_e1")));
            }
            other => panic!("expected coverage error, got {other:?}"),
        }
    }

    #[test]
    fn sampled_state_is_normalized_and_symmetric() {
        let psi = sample_wavefunction(&toy_scheme(), &[Cplx::new(1.0, 0.0)], &grid()).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        assert_eq!(psi.transposition_asymmetry(), 0.0);
    }

    #[test]
    fn single_path_has_two_mirror_peaks() {
        let psi = sample_wavefunction(&toy_scheme(), &[Cplx::new(1.0, 0.0)], &grid()).unwrap();
        // The ridge crossing at ω1 = ω2 = ω_e is a weaker local maximum.
        let all = psi.peaks(4, 0.05);
        assert_eq!(all.len(), 3, "{all:?}");
        assert!((all[2].omega1 - all[2].omega2).abs() < 1e-12);
        let peaks = psi.peaks(4, 0.3);
        assert_eq!(peaks.len(), 2, "{peaks:?}");
        let h = grid().spacing();
        for p in &peaks {
            assert!((p.omega1 + p.omega2 - 2.1).abs() < 2.0 * h);
            let near_e = (p.omega1 - 1.0).abs() < 2.0 * h || (p.omega2 - 1.0).abs() < 2.0 * h;
            assert!(near_e);
        }
    }

    #[test]
    fn separable_input_has_rank_one() {
        let g = grid();
        let w = g.points();
        let f: Vec<Cplx<f64>> = w
            .iter()
            .map(|&x| Cplx::new((-(x - 1.0f64).powi(2) / 0.01).exp(), x))
            .collect();
        let k: Vec<Cplx<f64>> = w
            .iter()
            .map(|&x| Cplx::new(0.0, (-(x - 1.2f64).powi(2) / 0.02).exp()))
            .collect();
        let mut psi = GriddedWavefunction {
            grid: g,
            amplitudes: DMatrix::from_fn(g.n_points, g.n_points, |a, b| f[a] * k[b]),
        };
        psi.normalize();
        let sd = schmidt(&psi);
        assert!((sd.weights[0] - 1.0).abs() < 1e-10);
        assert!(sd.weights[1] < 1e-10);
        let cl = classical_pulse(&sd, &g).unwrap();
        // Equal up to a global phase.
        let overlap = cl
            .amplitudes
            .iter()
            .zip(psi.amplitudes.iter())
            .fold(Cplx::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b)
            * g.spacing()
            * g.spacing();
        assert!((overlap.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn schmidt_weights_ignore_global_phase() {
        let psi = sample_wavefunction(&toy_scheme(), &[Cplx::new(1.0, 0.0)], &grid()).unwrap();
        let rotated = GriddedWavefunction {
            grid: psi.grid,
            amplitudes: psi.amplitudes.map(|z| z * Cplx::from_polar(1.0, 0.7)),
        };
        let a = schmidt(&psi);
        let b = schmidt(&rotated);
        for (x, y) in a.weights.iter().zip(&b.weights).take(10) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.weight_sum() - 1.0).abs() < 1e-10);
        assert!(a.orthonormality_error(5) < 1e-10);
    }

    #[test]
    fn far_off_resonant_pulse_excites_nothing() {
        let s = toy_scheme();
        // A normalized Gaussian pulse pair centred far from every resonance,
        // sampled on a window that still covers them.
        let g = FrequencyGrid::new(0.5, 4.0, 256).unwrap();
        let w = g.points();
        let env: Vec<f64> = w.iter().map(|&x| (-(x - 3.7f64).powi(2) / 0.002).exp()).collect();
        let mut psi = GriddedWavefunction {
            grid: g,
            amplitudes: DMatrix::from_fn(g.n_points, g.n_points, |a, b| Cplx::new(env[a] * env[b], 0.0)),
        };
        psi.normalize();
        assert!(population_of(&s, 0, &psi).unwrap() < 1e-6);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let psi = sample_wavefunction(&toy_scheme(), &[Cplx::new(1.0, 0.0)], &grid()).unwrap();
        let mut buf = Vec::new();
        psi.write_csv(&mut buf, "toy").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data[0], "omega1,omega2,re,im,abs2");
        assert_eq!(data.len(), 1 + 128 * 128);
    }
}
