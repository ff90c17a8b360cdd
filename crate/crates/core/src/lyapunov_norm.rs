//! δ-Lyapunov inner products and norms at periodic points.
//!
//! At a periodic point the Oseledets splitting is the generalized-eigenspace
//! decomposition of the period product, grouped by eigenvalue modulus, so every
//! series in the definition can be summed with a certified truncation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cocycle::MatrixCocycle;
use crate::error::{LabError, Result};
use crate::linalg::{
    det, eigenvalues, min_principal_angle, near_null_space, op_norm, subspace_residual, sym_extremes,
    sym_sqrt_pair, Mat, Vector,
};
use crate::spectrum::{period_product, periodic_spectrum, LyapunovSpectrum};
use crate::symbolic::PeriodicOrbit;

/// Splittings whose blocks meet at a smaller principal angle are rejected.
pub const MIN_SPLITTING_ANGLE: f64 = 1e-8;

/// Truncated series must have a certified tail below this (relative to the n = 0 term).
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// Hard cap on the number of series terms on each side.
pub const MAX_SERIES_TERMS: usize = 100_000;

/// Relative slack used by the property checks.
pub const PROPERTY_SLACK: f64 = 1e-8;

/// One Oseledets block along the orbit.
#[derive(Debug, Clone)]
pub struct SplitBlock {
    /// `λ_i`, or `−∞`.
    pub exponent: f64,
    pub dim: usize,
    /// Orthonormal basis (`d × dim`) of `E^i` at each phase.
    pub bases: Vec<Mat>,
    /// `A(f^j p)` restricted to `E^i`, in the stored bases (`dim × dim`), for each phase `j`.
    pub maps: Vec<Mat>,
}

impl SplitBlock {
    pub fn is_infinite(&self) -> bool {
        self.exponent == f64::NEG_INFINITY
    }
}

/// Oseledets splitting at every phase of a periodic orbit.
#[derive(Debug, Clone)]
pub struct OseledetsSplittingAtPeriodic {
    pub orbit: PeriodicOrbit,
    pub dim: usize,
    pub spectrum: LyapunovSpectrum,
    pub blocks: Vec<SplitBlock>,
    /// `A(f^j p)`.
    pub matrices: Vec<Mat>,
    /// Worst `‖A·E^i_j − proj_{E^i_{j+1}}‖` (relative).
    pub invariance_residual: f64,
    /// Smallest principal angle between distinct blocks at any phase.
    pub min_angle: f64,
}

impl OseledetsSplittingAtPeriodic {
    pub fn period(&self) -> usize {
        self.orbit.period()
    }

    /// All block bases side by side at `phase` (`d × d`).
    pub fn basis_matrix(&self, phase: usize) -> Mat {
        let cols: Vec<Vector> = self
            .blocks
            .iter()
            .flat_map(|b| b.bases[phase].column_iter().map(|c| c.into_owned()).collect::<Vec<_>>())
            .collect();
        Mat::from_columns(&cols)
    }

    /// Block coordinates of `u` at `phase`.
    pub fn decompose(&self, phase: usize, u: &Vector) -> Result<Vec<Vector>> {
        let b = self.basis_matrix(phase);
        let c = b.lu().solve(u).ok_or(LabError::IllConditionedSplitting { angle: 0.0 })?;
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut off = 0;
        for blk in &self.blocks {
            out.push(c.rows(off, blk.dim).into_owned());
            off += blk.dim;
        }
        Ok(out)
    }

    /// `A^n_i` at `phase` in block coordinates; negative `n` inverts the restriction.
    pub fn restricted_power(&self, block: usize, phase: usize, n: i64) -> Result<Mat> {
        let blk = &self.blocks[block];
        let np = self.period() as i64;
        let mut prod = Mat::identity(blk.dim, blk.dim);
        if n >= 0 {
            for t in 0..n {
                prod = &blk.maps[(phase as i64 + t).rem_euclid(np) as usize] * prod;
            }
            return Ok(prod);
        }
        if blk.is_infinite() {
            return Err(LabError::NonInvertibleRestriction { block });
        }
        // (M_{j-1} ⋯ M_{j-m})⁻¹ = M_{j-m}⁻¹ ⋯ M_{j-1}⁻¹, one factor at a time so long
        // powers do not underflow before the inversion
        for t in 1..=-n {
            let m = &blk.maps[(phase as i64 - t).rem_euclid(np) as usize];
            let inv = m.clone().try_inverse().ok_or(LabError::NonInvertibleRestriction { block })?;
            prod = inv * prod;
        }
        Ok(prod)
    }
}

/// Generalized eigenspaces of the period products, grouped by modulus.
pub fn splitting_at_periodic(a: &MatrixCocycle, p: &PeriodicOrbit) -> Result<OseledetsSplittingAtPeriodic> {
    let d = a.dim();
    let np = p.period();
    let spectrum = periodic_spectrum(a, p)?;
    let groups = spectrum.groups();
    let rep = p.representative();
    let mut matrices = Vec::with_capacity(np);
    a.walk(&rep, np, |_, m| {
        matrices.push(m.clone());
        true
    })?;

    let mut bases: Vec<Vec<Mat>> = vec![Vec::with_capacity(np); groups.len()];
    for phase in 0..np {
        let (sp, _) = period_product(a, &p.point_at(phase), np)?;
        let u = &sp.unit;
        let mut eig = eigenvalues(u);
        eig.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
        for (gi, g) in groups.iter().enumerate() {
            let poly = if g.value == f64::NEG_INFINITY || sp.is_zero() {
                let mut m = Mat::identity(d, d);
                for _ in 0..g.multiplicity {
                    m = u * m;
                }
                m
            } else {
                let mut m = Mat::identity(d, d);
                for z in &eig[g.start..g.start + g.multiplicity] {
                    if z.im > 0.0 {
                        let q = u * u - u * (2.0 * z.re) + Mat::identity(d, d) * z.norm_sqr();
                        m = q * m;
                    } else if z.im == 0.0 {
                        m = (u - Mat::identity(d, d) * z.re) * m;
                    }
                }
                m
            };
            bases[gi].push(near_null_space(&poly, g.multiplicity));
        }
    }

    let mut blocks = Vec::with_capacity(groups.len());
    let mut residual: f64 = 0.0;
    for (gi, g) in groups.iter().enumerate() {
        let bs = &bases[gi];
        let mut maps = Vec::with_capacity(np);
        for j in 0..np {
            let next = &bs[(j + 1) % np];
            let image = &matrices[j] * &bs[j];
            residual = residual.max(subspace_residual(&image, next));
            maps.push(next.transpose() * image);
        }
        // for a single-modulus block |det| of the restricted period product is modulus^dim
        let exponent = if g.value == f64::NEG_INFINITY {
            g.value
        } else {
            let log_det: f64 = maps.iter().map(|m| det(m).abs().ln()).sum();
            log_det / (np * g.multiplicity) as f64
        };
        blocks.push(SplitBlock {
            exponent,
            dim: g.multiplicity,
            bases: bs.clone(),
            maps,
        });
    }

    let mut min_angle = std::f64::consts::FRAC_PI_2;
    for j in 0..np {
        for a_i in 0..blocks.len() {
            for b_i in (a_i + 1)..blocks.len() {
                min_angle = min_angle.min(min_principal_angle(&blocks[a_i].bases[j], &blocks[b_i].bases[j]));
            }
        }
    }
    if min_angle < MIN_SPLITTING_ANGLE {
        return Err(LabError::IllConditionedSplitting { angle: min_angle });
    }
    let spectrum = LyapunovSpectrum::new(
        blocks
            .iter()
            .flat_map(|b| std::iter::repeat_n(b.exponent, b.dim))
            .collect(),
    );
    Ok(OseledetsSplittingAtPeriodic {
        orbit: p.clone(),
        dim: d,
        spectrum,
        blocks,
        matrices,
        invariance_residual: residual,
        min_angle,
    })
}

/// δ and the certified truncation of the series.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapNormParams {
    pub delta: f64,
    /// Largest number of terms used on one side of any series.
    pub n_trunc: usize,
    /// Largest certified tail, relative to the `n = 0` term.
    pub tail_bound: f64,
}

/// Validity gate for δ relative to a spectrum.
pub fn check_delta(spectrum: &LyapunovSpectrum, delta: f64) -> Result<()> {
    let bad = |reason: String| Err(LabError::InvalidDelta { delta, reason });
    if !(delta > 0.0 && delta.is_finite()) {
        return bad("delta must be positive".into());
    }
    let groups = spectrum.groups();
    let finite: Vec<f64> = groups.iter().map(|g| g.value).filter(|v| v.is_finite()).collect();
    if let Some(gap) = finite.windows(2).map(|w| w[0] - w[1]).reduce(f64::min) {
        if delta >= gap / 4.0 {
            return bad(format!("delta must be below a quarter of the smallest gap {gap}"));
        }
    }
    let has_inf = groups.last().is_some_and(|g| g.value == f64::NEG_INFINITY);
    if let Some(&last_finite) = finite.last() {
        // written as delta >= -1/λ so that the bound agrees with `delta_gate` bit for bit
        if has_inf && last_finite < 0.0 && delta >= -1.0 / last_finite {
            return bad(format!("-1/delta must lie below the last finite exponent {last_finite}"));
        }
        if finite[0] < 0.0 && delta >= -1.0 / finite[0] {
            return bad(format!("-1/delta must lie below the top exponent {}", finite[0]));
        }
    }
    Ok(())
}

/// Largest admissible δ (exclusive) for a spectrum: `min gap/4` and the `−1/δ` gates.
pub fn delta_gate(spectrum: &LyapunovSpectrum) -> f64 {
    let groups = spectrum.groups();
    let finite: Vec<f64> = groups.iter().map(|g| g.value).filter(|v| v.is_finite()).collect();
    let mut gate = f64::INFINITY;
    if let Some(gap) = finite.windows(2).map(|w| w[0] - w[1]).reduce(f64::min) {
        gate = gate.min(gap / 4.0);
    }
    let has_inf = groups.last().is_some_and(|g| g.value == f64::NEG_INFINITY);
    if let (Some(&last), Some(&top)) = (finite.last(), finite.first()) {
        if has_inf && last < 0.0 {
            gate = gate.min(-1.0 / last);
        }
        if top < 0.0 {
            gate = gate.min(-1.0 / top);
        }
    }
    gate
}

/// Weighted restricted powers of one block at one phase: `W_n = A^n_i e^{−λ_i n − δ|n|}`
/// (finite block) or `A^n e^{n/δ}` (the `−∞` block), `n` in the truncation window.
#[derive(Debug, Clone)]
struct SeriesTerms {
    terms: Vec<Mat>,
    tail_gram: f64,
    tail_sum: f64,
    sides: usize,
}

impl SeriesTerms {
    fn gram(&self, dim: usize) -> Mat {
        let mut g = Mat::zeros(dim, dim);
        for w in &self.terms {
            g += w.transpose() * w;
        }
        g
    }

    /// `Σ ‖W_n c‖` without allocating per term.
    fn sum_norm(&self, c: &Vector) -> f64 {
        let k = c.len();
        let cs = c.as_slice();
        let mut total = 0.0;
        for w in &self.terms {
            let ws = w.as_slice();
            let mut sq = 0.0;
            for r in 0..k {
                let mut acc = 0.0;
                for (col, &cv) in cs.iter().enumerate() {
                    acc += ws[col * k + r] * cv;
                }
                sq += acc * acc;
            }
            total += sq.sqrt();
        }
        total
    }
}

/// The δ-Lyapunov structure of an orbit: block Gram matrices at every phase.
#[derive(Debug, Clone)]
pub struct LyapunovNorm {
    pub split: OseledetsSplittingAtPeriodic,
    pub params: LyapNormParams,
    series: Vec<Vec<SeriesTerms>>,
    /// `grams[phase][block]` in block coordinates.
    grams: Vec<Vec<Mat>>,
    /// Full Gram in Euclidean coordinates at each phase.
    full: Vec<Mat>,
    k_opt: Vec<f64>,
}

fn scaled_maps(blk: &SplitBlock) -> (Vec<Mat>, Vec<Option<Mat>>) {
    let lam = blk.exponent;
    let fwd: Vec<Mat> = blk.maps.iter().map(|m| m * (-lam).exp()).collect();
    let inv = fwd.iter().map(|m| m.clone().try_inverse()).collect();
    (fwd, inv)
}

/// Number of full `s`-period windows needed so that `W κ^{pQ}/(1 − κ^p) < tol`.
fn windows_needed(w: f64, kappa: f64, p: i32) -> usize {
    if w == 0.0 || kappa == 0.0 {
        return 0;
    }
    let kp = kappa.powi(p);
    // four tails (two sides, two forms) share the tolerance
    let target = 0.25 * TAIL_TOLERANCE * (1.0 - kp) / w;
    if target >= 1.0 {
        return 0;
    }
    (target.ln() / kp.ln()).ceil().max(0.0) as usize
}

fn finite_series(blk: &SplitBlock, block: usize, phase: usize, np: usize, delta: f64) -> Result<SeriesTerms> {
    let dim = blk.dim;
    let (fwd, inv) = scaled_maps(blk);
    let inv: Vec<Mat> = inv
        .into_iter()
        .map(|m| m.ok_or(LabError::NonInvertibleRestriction { block }))
        .collect::<Result<_>>()?;
    // one-period normalized products at this phase
    let mut qf = Mat::identity(dim, dim);
    let mut qb = Mat::identity(dim, dim);
    for t in 0..np {
        qf = &fwd[(phase + t) % np] * qf;
        qb = &inv[(phase + np - 1 - t) % np] * qb;
    }
    let period_weight = (-delta * np as f64).exp();
    // smallest s with κ = ‖Q^s‖ e^{−δ s np} ≤ 1/2 on both sides
    let mut s = 1usize;
    let (mut pf, mut pb) = (qf.clone(), qb.clone());
    let (kf, kb) = loop {
        let w = period_weight.powi(s as i32);
        let (kf, kb) = (op_norm(&pf) * w, op_norm(&pb) * w);
        if kf <= 0.5 && kb <= 0.5 {
            break (kf, kb);
        }
        s += 1;
        if s * np > MAX_SERIES_TERMS {
            return Err(LabError::TailNotCertified {
                tail: kf.max(kb),
                tolerance: TAIL_TOLERANCE,
                n_trunc: s * np,
            });
        }
        pf = &qf * pf;
        pb = &qb * pb;
    };
    let window = s * np;
    // walk both sides; first window gives W for the tail bound
    let mut terms = vec![Mat::identity(dim, dim)];
    let mut rf = Mat::identity(dim, dim);
    let mut rb = Mat::identity(dim, dim);
    let (mut wf2, mut wb2, mut wf1, mut wb1) = (1.0, 1.0, 1.0, 1.0);
    let mut n = 0usize;
    let side_terms = |n: usize, rf: &Mat, rb: &Mat, terms: &mut Vec<Mat>| {
        let w = (-delta * n as f64).exp();
        terms.push(rf * w);
        terms.push(rb * w);
    };
    while n + 1 < window {
        rf = &fwd[(phase + n) % np] * rf;
        rb = &inv[(phase + np - 1 - (n % np)) % np] * rb;
        n += 1;
        let w = (-delta * n as f64).exp();
        let (a, b) = (op_norm(&rf) * w, op_norm(&rb) * w);
        wf2 += a * a;
        wb2 += b * b;
        wf1 += a;
        wb1 += b;
        side_terms(n, &rf, &rb, &mut terms);
    }
    // windows for the Gram (κ²) and the sum form (κ)
    let q_needed = windows_needed(wf2, kf, 2)
        .max(windows_needed(wb2, kb, 2))
        .max(windows_needed(wf1, kf, 1))
        .max(windows_needed(wb1, kb, 1))
        .max(1);
    let total = q_needed * window;
    if total > MAX_SERIES_TERMS {
        return Err(LabError::TailNotCertified {
            tail: (wf1 * kf.powi(q_needed as i32)).max(wb1 * kb.powi(q_needed as i32)),
            tolerance: TAIL_TOLERANCE,
            n_trunc: total,
        });
    }
    while n + 1 < total {
        rf = &fwd[(phase + n) % np] * rf;
        rb = &inv[(phase + np - 1 - (n % np)) % np] * rb;
        n += 1;
        side_terms(n, &rf, &rb, &mut terms);
    }
    let q = q_needed as i32;
    let tail_gram = wf2 * kf.powi(2 * q) / (1.0 - kf * kf) + wb2 * kb.powi(2 * q) / (1.0 - kb * kb);
    let tail_sum = wf1 * kf.powi(q) / (1.0 - kf) + wb1 * kb.powi(q) / (1.0 - kb);
    Ok(SeriesTerms {
        terms,
        tail_gram,
        tail_sum,
        sides: total,
    })
}

fn infinite_series(blk: &SplitBlock, phase: usize, np: usize, delta: f64) -> SeriesTerms {
    // the block is nilpotent over the period: A^n vanishes on it for n ≥ dim·np
    let dim = blk.dim;
    let len = dim * np;
    let mut terms = Vec::with_capacity(len);
    let mut r = Mat::identity(dim, dim);
    for n in 0..len {
        if n > 0 {
            r = &blk.maps[(phase + n - 1) % np] * r;
        }
        terms.push(&r * (n as f64 / delta).exp());
    }
    SeriesTerms {
        terms,
        tail_gram: 0.0,
        tail_sum: 0.0,
        sides: len,
    }
}

fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

impl LyapunovNorm {
    /// Validate δ against the orbit spectrum and sum every series with a certified tail.
    pub fn new(split: OseledetsSplittingAtPeriodic, delta: f64) -> Result<Self> {
        check_delta(&split.spectrum, delta)?;
        let np = split.period();
        let mut series = Vec::with_capacity(np);
        let mut grams = Vec::with_capacity(np);
        let mut full = Vec::with_capacity(np);
        let mut k_opt = Vec::with_capacity(np);
        let mut n_trunc = 0;
        let mut tail: f64 = 0.0;
        for phase in 0..np {
            let mut per_block = Vec::with_capacity(split.blocks.len());
            for (bi, blk) in split.blocks.iter().enumerate() {
                let s = if blk.is_infinite() {
                    infinite_series(blk, phase, np, delta)
                } else {
                    finite_series(blk, bi, phase, np, delta)?
                };
                n_trunc = n_trunc.max(s.sides);
                tail = tail.max(s.tail_gram).max(s.tail_sum);
                per_block.push(s);
            }
            let g: Vec<Mat> = per_block
                .iter()
                .zip(&split.blocks)
                .map(|(s, b)| symmetrize(&s.gram(b.dim)))
                .collect();
            let b = split.basis_matrix(phase);
            let binv = b
                .clone()
                .try_inverse()
                .ok_or(LabError::IllConditionedSplitting { angle: split.min_angle })?;
            let mut gb = Mat::zeros(split.dim, split.dim);
            let mut off = 0;
            for (gi, blk) in g.iter().zip(&split.blocks) {
                gb.view_mut((off, off), (blk.dim, blk.dim)).copy_from(gi);
                off += blk.dim;
            }
            let gf = symmetrize(&(binv.transpose() * gb * &binv));
            let (_, hi) = sym_extremes(&gf);
            k_opt.push(hi.max(0.0).sqrt());
            full.push(gf);
            grams.push(g);
            series.push(per_block);
        }
        if tail > TAIL_TOLERANCE {
            return Err(LabError::TailNotCertified {
                tail,
                tolerance: TAIL_TOLERANCE,
                n_trunc,
            });
        }
        Ok(LyapunovNorm {
            split,
            params: LyapNormParams {
                delta,
                n_trunc,
                tail_bound: tail,
            },
            series,
            grams,
            full,
            k_opt,
        })
    }

    pub fn delta(&self) -> f64 {
        self.params.delta
    }

    pub fn period(&self) -> usize {
        self.split.period()
    }

    /// Block Gram matrix `⟨·,·⟩_{x,δ,i}` at `phase`, in block coordinates.
    pub fn block_gram(&self, phase: usize, block: usize) -> &Mat {
        &self.grams[phase][block]
    }

    /// Lyapunov Gram matrix in Euclidean coordinates at `phase`.
    pub fn gram(&self, phase: usize) -> &Mat {
        &self.full[phase]
    }

    /// `⟨u, v⟩_{x,δ}` at `f^phase(p)`.
    pub fn inner_product(&self, phase: usize, u: &Vector, v: &Vector) -> f64 {
        (u.transpose() * &self.full[phase] * v)[(0, 0)]
    }

    /// `‖u‖_{x,δ}`.
    pub fn norm(&self, phase: usize, u: &Vector) -> f64 {
        self.inner_product(phase, u, u).max(0.0).sqrt()
    }

    /// `‖c‖_{x,δ,i}` for block coordinates `c`.
    pub fn block_norm(&self, phase: usize, block: usize, c: &Vector) -> f64 {
        (c.transpose() * &self.grams[phase][block] * c)[(0, 0)].max(0.0).sqrt()
    }

    /// Sum-form block norm `Σ_n ‖A^n_i c‖ e^{−λ_i n − δ|n|}`.
    pub fn block_norm_sum_form(&self, phase: usize, block: usize, c: &Vector) -> f64 {
        self.series[phase][block].sum_norm(c)
    }

    /// Sum-form norm `Σ_i ‖u_i‖_{x,δ,i}`.
    pub fn norm_sum_form(&self, phase: usize, u: &Vector) -> Result<f64> {
        let parts = self.split.decompose(phase, u)?;
        Ok(parts
            .iter()
            .enumerate()
            .map(|(b, c)| self.block_norm_sum_form(phase, b, c))
            .sum())
    }

    /// `‖B‖_{y←x} = σ_max(G_y^{1/2} B G_x^{−1/2})`.
    pub fn operator_norm(&self, phase_x: usize, phase_y: usize, b: &Mat) -> f64 {
        let (_, gx_inv_sqrt) = sym_sqrt_pair(&self.full[phase_x]);
        let (gy_sqrt, _) = sym_sqrt_pair(&self.full[phase_y]);
        op_norm(&(gy_sqrt * b * gx_inv_sqrt))
    }

    /// Optimal `K` with `‖u‖_x ≤ K ‖u‖`: `sqrt(λ_max(G))`.
    pub fn k_delta(&self, phase: usize) -> f64 {
        self.k_opt[phase]
    }

    /// `max_m K(f^{j+m} p) e^{−δ|m|}`: still dominates the norm and grows by at most `e^{δ}` per step.
    pub fn tempered_k_delta(&self, phase: usize) -> f64 {
        let np = self.period();
        (0..np)
            .map(|ph| {
                let r = (ph + np - phase) % np;
                let dist = r.min(np - r) as f64;
                self.k_opt[ph] * (-self.delta() * dist).exp()
            })
            .fold(0.0, f64::max)
    }

    /// Smallest `‖u‖_x / ‖u‖` (the lower comparison constant).
    pub fn lower_constant(&self, phase: usize) -> f64 {
        sym_extremes(&self.full[phase]).0.max(0.0).sqrt()
    }

    /// `A^n(f^phase p)` in Euclidean coordinates.
    pub fn cocycle_power(&self, phase: usize, n: usize) -> Mat {
        let np = self.period();
        let d = self.split.dim;
        let mut p = Mat::identity(d, d);
        for t in 0..n {
            p = &self.split.matrices[(phase + t) % np] * p;
        }
        p
    }
}

/// Named property outcome with its worst relative margin (positive means slack left).
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub worst_margin: f64,
    pub checks: usize,
    /// Reported for information; not part of the pass verdict.
    pub informational: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormPropertyReport {
    pub word: Vec<u8>,
    pub delta: f64,
    pub n_trunc: usize,
    pub tail_bound: f64,
    pub invariance_residual: f64,
    pub min_angle: f64,
    pub properties: Vec<PropertyResult>,
}

impl NormPropertyReport {
    pub fn all_pass(&self) -> bool {
        self.properties.iter().filter(|p| !p.informational).all(|p| p.passed)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }
}

struct Tracker {
    name: &'static str,
    worst: f64,
    checks: usize,
    informational: bool,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Tracker {
            name,
            worst: f64::INFINITY,
            checks: 0,
            informational: false,
        }
    }

    /// Record `lhs ≤ rhs` with relative slack.
    fn le(&mut self, lhs: f64, rhs: f64) {
        self.checks += 1;
        let scale = rhs.abs().max(lhs.abs()).max(f64::MIN_POSITIVE);
        let margin = if lhs <= rhs { (rhs - lhs) / scale } else { -(lhs - rhs) / scale };
        self.worst = self.worst.min(margin);
    }

    fn finish(self, slack: f64) -> PropertyResult {
        let worst = if self.checks == 0 { 0.0 } else { self.worst };
        PropertyResult {
            name: self.name.to_string(),
            passed: worst >= -slack,
            worst_margin: worst,
            checks: self.checks,
            informational: self.informational,
        }
    }
}

fn apply_block(split: &OseledetsSplittingAtPeriodic, block: usize, phase: usize, n: usize, c: &Vector) -> Vector {
    let np = split.period();
    let mut v = c.clone();
    for t in 0..n {
        v = &split.blocks[block].maps[(phase + t) % np] * v;
    }
    v
}

/// Check items i–iv, the K growth bound, and the sum-form items i–iii at every
/// phase for `n = 1..period`, on block bases and `random_vectors` seeded vectors.
pub fn verify_norm_properties(norm: &LyapunovNorm, random_vectors: usize, seed: u64) -> NormPropertyReport {
    let split = &norm.split;
    let np = split.period();
    let d = split.dim;
    let delta = norm.delta();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors: Vec<Vector> = (0..d).map(|k| Vector::from_fn(d, |i, _| if i == k { 1.0 } else { 0.0 })).collect();
    for _ in 0..random_vectors {
        vectors.push(Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)));
    }
    let randoms: Vec<Mat> = (0..3).map(|_| Mat::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0))).collect();

    let lam1 = split.spectrum.top();
    let has_inf = split.blocks.iter().any(|b| b.is_infinite());
    let growth_bound = |n: usize| -> f64 {
        let nf = n as f64;
        let mut b: f64 = 0.0;
        if lam1.is_finite() {
            b = b.max(((lam1 + delta) * nf).exp());
        }
        if has_inf {
            b = b.max((-nf / delta).exp());
        }
        b
    };

    let mut i_lo = Tracker::new("i_lower");
    let mut i_hi = Tracker::new("i_upper");
    let mut ii = Tracker::new("ii");
    let mut iii = Tracker::new("iii");
    let mut iv_lo = Tracker::new("iv_lower");
    let mut iv_hi = Tracker::new("iv_upper");
    let mut iv_op = Tracker::new("iv_operator");
    let mut k_growth = Tracker::new("k_growth");
    let mut k_opt_growth = Tracker::new("k_growth_optimal");
    k_opt_growth.informational = true;
    let mut s_i_lo = Tracker::new("sum_i_lower");
    let mut s_i_hi = Tracker::new("sum_i_upper");
    let mut s_ii = Tracker::new("sum_ii");
    let mut s_iii = Tracker::new("sum_iii");
    let mut s_iv_lo = Tracker::new("sum_iv_lower");

    let kt: Vec<f64> = (0..np).map(|j| norm.tempered_k_delta(j)).collect();

    for j in 0..np {
        let parts: Vec<Vec<Vector>> = vectors
            .iter()
            .map(|u| split.decompose(j, u).unwrap_or_else(|_| vec![Vector::zeros(0); split.blocks.len()]))
            .collect();
        for u in &vectors {
            let nu = u.norm();
            let nx = norm.norm(j, u);
            iv_lo.le(nu, nx);
            if let Ok(ns) = norm.norm_sum_form(j, u) {
                s_iv_lo.le(nu, ns);
            }
            iv_hi.le(nx, kt[j] * nu);
        }
        iv_lo.le(1.0, norm.lower_constant(j));
        for n in 1..=np {
            let y = (j + n) % np;
            let nf = n as f64;
            let an = norm.cocycle_power(j, n);
            // iii exactly: block-diagonal in block coordinates
            let mut opn: f64 = 0.0;
            for (bi, blk) in split.blocks.iter().enumerate() {
                let (_, gx_is) = sym_sqrt_pair(norm.block_gram(j, bi));
                let (gy_s, _) = sym_sqrt_pair(norm.block_gram(y, bi));
                let mut m = Mat::identity(blk.dim, blk.dim);
                for t in 0..n {
                    m = &blk.maps[(j + t) % np] * m;
                }
                opn = opn.max(op_norm(&(gy_s * m * gx_is)));
            }
            iii.le(opn, growth_bound(n));
            // iv consequence on A^n and on fixed random matrices
            for b in std::iter::once(&an).chain(randoms.iter()) {
                let bn = op_norm(b);
                let bl = norm.operator_norm(j, y, b);
                iv_op.le(bn / kt[j], bl);
                iv_op.le(bl, kt[y] * bn);
            }
            for (u, cs) in vectors.iter().zip(&parts) {
                let mut sum_u = 0.0;
                let mut sum_img = 0.0;
                for (bi, blk) in split.blocks.iter().enumerate() {
                    if cs[bi].is_empty() || cs[bi].norm() == 0.0 {
                        continue;
                    }
                    let c = &cs[bi];
                    let img = apply_block(split, bi, j, n, c);
                    let before = norm.block_norm(j, bi, c);
                    let after = norm.block_norm(y, bi, &img);
                    let s_before = norm.block_norm_sum_form(j, bi, c);
                    let s_after = norm.block_norm_sum_form(y, bi, &img);
                    sum_u += s_before;
                    sum_img += s_after;
                    if blk.is_infinite() {
                        let f = (-nf / delta).exp();
                        ii.le(after, f * before);
                        s_ii.le(s_after, f * s_before);
                    } else {
                        let lam = blk.exponent;
                        i_lo.le(((lam - delta) * nf).exp() * before, after);
                        i_hi.le(after, ((lam + delta) * nf).exp() * before);
                        s_i_lo.le(((lam - delta) * nf).exp() * s_before, s_after);
                        s_i_hi.le(s_after, ((lam + delta) * nf).exp() * s_before);
                    }
                }
                if u.norm() > 0.0 {
                    s_iii.le(sum_img, growth_bound(n) * sum_u);
                }
            }
            k_growth.le(kt[y], kt[j] * (delta * nf).exp());
            k_growth.le(kt[j] * (-delta * nf).exp(), kt[y]);
            k_opt_growth.le(norm.k_opt[y], norm.k_opt[j] * (delta * nf).exp());
            k_opt_growth.le(norm.k_opt[j] * (-delta * nf).exp(), norm.k_opt[y]);
        }
    }
    let slack = PROPERTY_SLACK + norm.params.tail_bound;
    let properties = vec![
        i_lo.finish(slack),
        i_hi.finish(slack),
        ii.finish(slack),
        iii.finish(slack),
        iv_lo.finish(slack),
        iv_hi.finish(slack),
        iv_op.finish(slack),
        k_growth.finish(slack),
        k_opt_growth.finish(slack),
        s_i_lo.finish(slack),
        s_i_hi.finish(slack),
        s_ii.finish(slack),
        s_iii.finish(slack),
        s_iv_lo.finish(slack),
    ];
    NormPropertyReport {
        word: split.orbit.word().to_vec(),
        delta,
        n_trunc: norm.params.n_trunc,
        tail_bound: norm.params.tail_bound,
        invariance_residual: split.invariance_residual,
        min_angle: split.min_angle,
        properties,
    }
}
