//! Lyapunov spectra: the eigenvalue oracle at periodic points, finite-time
//! estimates along orbits, Monte Carlo ergodic estimates and the truncated
//! Kingman integrals.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cocycle::{MatrixCocycle, ScaledProduct};
use crate::error::{LabError, Result};
use crate::exterior::induced_cocycle;
use crate::linalg::{det, eigenvalues, op_norm, Mat};
use crate::symbolic::{Law, PeriodicOrbit, Subshift, SymbolicPoint};

/// Eigenvalues of a unit-scale period product below this (relative to its norm) count as zero.
pub const ZERO_EIGEN_REL_TOL: f64 = 64.0 * f64::EPSILON;

/// A column whose one-step log growth falls below this is frozen at `−∞`.
pub const DEFLATION_LOG_FLOOR: f64 = -700.0;

/// Fraction of deflated samples at which an index is reported as `−∞`.
pub const DEFLATION_MAJORITY: f64 = 0.9;

/// Two exponents are grouped when they differ by less than this.
pub fn group_tol(value: f64) -> f64 {
    1e-6 * value.abs().max(1.0)
}

/// Sort non-increasing, `−∞` last.
fn sort_desc(values: &mut [f64]) {
    values.sort_by(|a, b| b.total_cmp(a));
}

/// `d` extended-real exponents sorted non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSpectrum {
    values: Vec<f64>,
}

/// A distinct exponent with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentGroup {
    pub value: f64,
    pub multiplicity: usize,
    /// First index of the group in the sorted list.
    pub start: usize,
}

impl LyapunovSpectrum {
    pub fn new(mut values: Vec<f64>) -> Self {
        assert!(values.iter().all(|v| !v.is_nan()), "NaN exponent");
        sort_desc(&mut values);
        LyapunovSpectrum { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn top(&self) -> f64 {
        self.values[0]
    }

    pub fn bottom(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Distinct exponents λ₁ > … > λ_l with multiplicities.
    pub fn groups(&self) -> Vec<ExponentGroup> {
        let mut out: Vec<ExponentGroup> = Vec::new();
        let mut sum = 0.0;
        for (i, &v) in self.values.iter().enumerate() {
            let joins = out.last().is_some_and(|g| {
                let head = self.values[g.start];
                if head == f64::NEG_INFINITY || v == f64::NEG_INFINITY {
                    head == v
                } else {
                    head - v < group_tol(head)
                }
            });
            if joins {
                let g = out.last_mut().expect("group exists");
                g.multiplicity += 1;
                if v.is_finite() {
                    sum += v;
                    g.value = sum / g.multiplicity as f64;
                }
            } else {
                sum = if v.is_finite() { v } else { 0.0 };
                out.push(ExponentGroup {
                    value: v,
                    multiplicity: 1,
                    start: i,
                });
            }
        }
        out
    }

    /// Same `−∞` pattern and finite entries within `tol`.
    pub fn agrees_with(&self, other: &[f64], tol: f64) -> bool {
        self.values.len() == other.len()
            && self.values.iter().zip(other).all(|(&a, &b)| {
                if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
                    a == b
                } else {
                    (a - b).abs() <= tol
                }
            })
    }

    /// Largest finite difference to `other` (`∞` if the `−∞` patterns differ).
    pub fn max_error(&self, other: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .map(|(&a, &b)| {
                if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
                    if a == b {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    (a - b).abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Monte Carlo spectrum estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEstimate {
    pub values: Vec<f64>,
    /// Standard error of the finite samples; `None` for `−∞` entries.
    pub std_err: Vec<Option<f64>>,
    /// Number of samples deflated at each index.
    pub deflated: Vec<usize>,
    pub deflation_floor: f64,
    pub n_steps: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl SpectrumEstimate {
    pub fn spectrum(&self) -> LyapunovSpectrum {
        LyapunovSpectrum::new(self.values.clone())
    }
}

/// Per-sample seed derived from `(seed, index)`.
pub fn sample_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Exponents `(log_scale + log|η_i|)/n` from a scaled period product.
///
/// `log_abs_det` is `Σ log|det A(f^j p)|` over the period (`−∞` when some factor
/// is singular). Eigenvalues only map to `−∞` when the product is singular, and then
/// the smallest one always does; for
/// `d = 2` the smaller modulus is taken from `|η₁η₂| = |det P|`, which avoids the
/// cancellation in `ad − bc` of the unit part.
pub fn spectrum_from_scaled(sp: &ScaledProduct, n: usize, log_abs_det: f64) -> LyapunovSpectrum {
    let d = sp.unit.nrows();
    if sp.is_zero() {
        return LyapunovSpectrum::new(vec![f64::NEG_INFINITY; d]);
    }
    let nf = n as f64;
    let eig = eigenvalues(&sp.unit);
    if d == 2 && log_abs_det.is_finite() {
        let top = eig[0].norm().max(eig[1].norm());
        if eig[0].im != 0.0 {
            return LyapunovSpectrum::new(vec![log_abs_det / (2.0 * nf); 2]);
        }
        let g1 = (sp.log_scale + top.ln()) / nf;
        return LyapunovSpectrum::new(vec![g1, log_abs_det / nf - g1]);
    }
    let singular = log_abs_det == f64::NEG_INFINITY;
    let scale = op_norm(&sp.unit);
    let mut mods: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
    if singular {
        // det P = 0 exactly, so one eigenvalue is exactly zero.
        if d == 2 {
            mods = vec![sp.unit.trace().abs(), 0.0];
        } else {
            let (imin, _) = mods
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty");
            mods[imin] = 0.0;
        }
    }
    let vals = mods
        .iter()
        .map(|&m| {
            if m == 0.0 || (singular && m <= ZERO_EIGEN_REL_TOL * scale) {
                f64::NEG_INFINITY
            } else {
                (sp.log_scale + m.ln()) / nf
            }
        })
        .collect();
    LyapunovSpectrum::new(vals)
}

/// Scaled period product and `Σ log|det|` of its factors.
pub fn period_product(a: &MatrixCocycle, x: &SymbolicPoint, n: usize) -> Result<(ScaledProduct, f64)> {
    let mut sp = ScaledProduct::identity(a.dim());
    let mut log_det = 0.0;
    a.walk(x, n, |_, m| {
        sp.push(m);
        log_det += det(m).abs().ln();
        true
    })?;
    Ok((sp, log_det))
}

/// Exact spectrum at a periodic orbit from the eigenvalues of the period product.
pub fn periodic_spectrum(a: &MatrixCocycle, p: &PeriodicOrbit) -> Result<LyapunovSpectrum> {
    periodic_spectrum_at(a, p, 0)
}

/// Same at an arbitrary phase of the orbit.
pub fn periodic_spectrum_at(a: &MatrixCocycle, p: &PeriodicOrbit, phase: usize) -> Result<LyapunovSpectrum> {
    let n = p.period();
    let (sp, log_det) = period_product(a, &p.point_at(phase), n)?;
    Ok(spectrum_from_scaled(&sp, n, log_det))
}

/// Finite-time spectrum with deflation bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteTime {
    /// `(1/n) log σ_i`, sorted non-increasing.
    pub values: Vec<f64>,
    /// Columns frozen at `−∞`.
    pub deflated: usize,
}

/// `(1/n) log σ_i(A^n(x))` by staged Gram–Schmidt along the orbit.
pub fn finite_time_spectrum(a: &MatrixCocycle, x: &SymbolicPoint, n: usize) -> Result<Vec<f64>> {
    Ok(finite_time_detail(a, x, n)?.values)
}

pub fn finite_time_detail(a: &MatrixCocycle, x: &SymbolicPoint, n: usize) -> Result<FiniteTime> {
    if n == 0 {
        return Err(LabError::InvalidArgument("finite-time spectrum needs n >= 1".into()));
    }
    let d = a.dim();
    let mut q = Mat::identity(d, d);
    let mut live = vec![true; d];
    let mut acc = vec![0.0f64; d];
    a.walk(x, n, |_, m| {
        let z = m * &q;
        // at an exactly singular factor, round-off residuals of killed directions count as zero
        let cutoff = if det(m) == 0.0 { ZERO_EIGEN_REL_TOL * op_norm(m) } else { 0.0 };
        let mut next = Mat::zeros(d, d);
        for c in 0..d {
            if !live[c] {
                continue;
            }
            let mut v = z.column(c).into_owned();
            // two MGS passes keep the frame orthonormal to working precision
            for _ in 0..2 {
                for p in 0..c {
                    if live[p] {
                        let qp = next.column(p);
                        let h = qp.dot(&v);
                        v -= qp * h;
                    }
                }
            }
            let r = v.norm();
            if r <= cutoff || r.ln() < DEFLATION_LOG_FLOOR {
                live[c] = false;
                acc[c] = f64::NEG_INFINITY;
                continue;
            }
            acc[c] += r.ln();
            next.set_column(c, &(v / r));
        }
        q = next;
        live.iter().any(|&l| l)
    })?;
    let mut values: Vec<f64> = acc
        .iter()
        .zip(&live)
        .map(|(&s, &l)| if l { s / n as f64 } else { f64::NEG_INFINITY })
        .collect();
    sort_desc(&mut values);
    Ok(FiniteTime {
        values,
        deflated: live.iter().filter(|&&l| !l).count(),
    })
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Median and standard error per index; `−∞` when at least 90% of samples deflate there.
pub fn aggregate_samples(samples: &[Vec<f64>], n_steps: usize, seed: u64) -> SpectrumEstimate {
    let d = samples.first().map_or(0, |s| s.len());
    let total = samples.len();
    let mut rows: Vec<(f64, Option<f64>, usize)> = (0..d)
        .map(|i| {
            let mut finite: Vec<f64> = samples.iter().map(|s| s[i]).filter(|v| v.is_finite()).collect();
            let deflated = total - finite.len();
            if finite.is_empty() || deflated as f64 >= DEFLATION_MAJORITY * total as f64 {
                return (f64::NEG_INFINITY, None, deflated);
            }
            finite.sort_by(f64::total_cmp);
            let m = finite.len() as f64;
            let mean = finite.iter().sum::<f64>() / m;
            let se = if finite.len() > 1 {
                let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
                (var / m).sqrt()
            } else {
                0.0
            };
            (median(&finite), Some(se), deflated)
        })
        .collect();
    rows.sort_by(|a, b| b.0.total_cmp(&a.0));
    SpectrumEstimate {
        values: rows.iter().map(|r| r.0).collect(),
        std_err: rows.iter().map(|r| r.1).collect(),
        deflated: rows.iter().map(|r| r.2).collect(),
        deflation_floor: DEFLATION_LOG_FLOOR,
        n_steps,
        n_samples: total,
        seed,
    }
}

/// The seeded Monte Carlo points used by every estimator (index `s` uses `sample_seed(seed, s)`).
pub fn sample_points(law: &Law, samples: usize, seed: u64) -> Vec<SymbolicPoint> {
    (0..samples as u64)
        .map(|s| SymbolicPoint::seeded(sample_seed(seed, s), law.clone()))
        .collect()
}

/// Monte Carlo estimate of the ergodic spectrum of `law`.
pub fn ergodic_spectrum_estimate(
    a: &MatrixCocycle,
    shift: &Subshift,
    law: &Law,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<SpectrumEstimate> {
    law.check_compatible(shift)?;
    if samples == 0 {
        return Err(LabError::InvalidArgument("need at least one sample".into()));
    }
    let per: Result<Vec<Vec<f64>>> = sample_points(law, samples, seed)
        .par_iter()
        .map(|x| finite_time_spectrum(a, x, n))
        .collect();
    Ok(aggregate_samples(&per?, n, seed))
}

/// `φ_n(x) = (1/n) log ‖A^n(x)‖` for each seeded sample.
pub fn phi_samples(
    a: &MatrixCocycle,
    shift: &Subshift,
    law: &Law,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    law.check_compatible(shift)?;
    if n == 0 {
        return Err(LabError::InvalidArgument("φ_n needs n >= 1".into()));
    }
    sample_points(law, samples, seed)
        .par_iter()
        .map(|x| Ok(a.product_scaled(x, n)?.log_norm() / n as f64))
        .collect()
}

/// Mean of `max(φ, −m)`.
pub fn truncated_mean(phis: &[f64], m: f64) -> f64 {
    phis.iter().map(|&p| p.max(-m)).sum::<f64>() / phis.len() as f64
}

/// Monte Carlo estimate of `∫ φ_{n,m} dμ`.
pub fn kingman_upper(
    a: &MatrixCocycle,
    shift: &Subshift,
    law: &Law,
    n: usize,
    m: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(m > 0.0) {
        return Err(LabError::InvalidArgument("truncation level m must be positive".into()));
    }
    Ok(truncated_mean(&phi_samples(a, shift, law, n, samples, seed)?, m))
}

/// Top exponent of a scaled period product (`log_abs_det` as in [`spectrum_from_scaled`]).
fn top_from_scaled(sp: &ScaledProduct, n: usize, log_abs_det: f64) -> f64 {
    if sp.is_zero() {
        return f64::NEG_INFINITY;
    }
    let scale = op_norm(&sp.unit);
    let singular = log_abs_det == f64::NEG_INFINITY;
    let top = if singular && sp.unit.nrows() == 2 {
        sp.unit.trace().abs()
    } else {
        eigenvalues(&sp.unit).iter().map(|z| z.norm()).fold(0.0, f64::max)
    };
    if top == 0.0 || (singular && top <= ZERO_EIGEN_REL_TOL * scale) {
        f64::NEG_INFINITY
    } else {
        (sp.log_scale + top.ln()) / n as f64
    }
}

/// `γ_i = S_i − S_{i−1}` from running sums `S_i`, with `−∞` propagating.
pub fn telescope(sums: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(sums.len());
    let mut prev = 0.0;
    let mut dead = false;
    for &s in sums {
        if dead || s == f64::NEG_INFINITY {
            dead = true;
            out.push(f64::NEG_INFINITY);
        } else {
            out.push(s - prev);
            prev = s;
        }
    }
    out
}

/// Periodic spectrum via the top exponents `S_i` of the exterior powers.
pub fn full_spectrum_via_exterior(a: &MatrixCocycle, p: &PeriodicOrbit) -> Result<LyapunovSpectrum> {
    let n = p.period();
    let x = p.representative();
    let mut sums = Vec::with_capacity(a.dim());
    for i in 1..=a.dim() {
        let b = induced_cocycle(a, i)?;
        let (sp, log_det) = period_product(&b, &x, n)?;
        sums.push(top_from_scaled(&sp, n, log_det));
    }
    Ok(LyapunovSpectrum::new(telescope(&sums)))
}

/// Measure version: `S_i` are finite-time top exponents `φ_n` of the exterior powers.
pub fn full_spectrum_via_exterior_measure(
    a: &MatrixCocycle,
    shift: &Subshift,
    law: &Law,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<SpectrumEstimate> {
    law.check_compatible(shift)?;
    let powers: Result<Vec<MatrixCocycle>> = (1..=a.dim()).map(|i| induced_cocycle(a, i)).collect();
    let powers = powers?;
    let per: Result<Vec<Vec<f64>>> = sample_points(law, samples, seed)
        .par_iter()
        .map(|x| {
            let sums: Result<Vec<f64>> = powers
                .iter()
                .map(|b| Ok(b.product_scaled(x, n)?.log_norm() / n as f64))
                .collect();
            let mut g = telescope(&sums?);
            sort_desc(&mut g);
            Ok(g)
        })
        .collect();
    Ok(aggregate_samples(&per?, n, seed))
}
