//! Matrix cocycles over shift spaces and their products.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::exterior::compound;
use crate::linalg::{op_norm, Mat, MAX_DIM};
use crate::symbolic::{
    agreement_radius, anchor_point_q, cylinder_distance, Law, Subshift, SymbolicPoint,
    DEFAULT_SCAN_CAP,
};

/// How the generator depends on the point.
#[derive(Debug, Clone)]
pub enum Locality {
    /// `A(x)` depends only on `x_{-r} .. x_r`.
    Window(usize),
    /// `A(x)` depends on `x` only through `d(x, q)`.
    Metric(SymbolicPoint),
}

#[derive(Debug, Clone)]
pub enum CocycleKind {
    Constant(Mat),
    /// Lookup by the central word `x_{-r} .. x_r`, read as a base-`k` number.
    LocallyConstant {
        k: usize,
        window: usize,
        table: Vec<Option<Mat>>,
    },
    /// Scalar `(a/θ³)·d(x, q)` near `q`, `a` elsewhere, followed by constant diagonal entries.
    PaperExample {
        theta: f64,
        a: f64,
        extra_diagonal: Vec<f64>,
        anchor: SymbolicPoint,
    },
    BlockDiagonal(Vec<MatrixCocycle>),
    Compound {
        base: Arc<MatrixCocycle>,
        degree: usize,
    },
    Scaled {
        base: Arc<MatrixCocycle>,
        factor: f64,
    },
}

/// A map from points of a shift space to `d×d` real matrices.
#[derive(Debug, Clone)]
pub struct MatrixCocycle {
    dim: usize,
    kind: CocycleKind,
    holder_alpha: f64,
    holder_c2: Option<f64>,
}

/// `unit · e^{log_scale}` represents `A^n(x)`.
#[derive(Debug, Clone)]
pub struct ScaledProduct {
    pub unit: Mat,
    pub log_scale: f64,
    pub steps: usize,
}

impl ScaledProduct {
    pub fn identity(d: usize) -> Self {
        ScaledProduct {
            unit: Mat::identity(d, d),
            log_scale: 0.0,
            steps: 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.log_scale == f64::NEG_INFINITY
    }

    /// `log ‖A^n(x)‖`, `-inf` for the zero product.
    pub fn log_norm(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.log_scale + op_norm(&self.unit).ln()
        }
    }

    /// Reconstruct the product (may overflow for long products).
    pub fn to_matrix(&self) -> Mat {
        if self.is_zero() {
            return Mat::zeros(self.unit.nrows(), self.unit.ncols());
        }
        &self.unit * self.log_scale.exp()
    }

    /// Left-multiply by one more factor and renormalize when the norm leaves [1/2, 2].
    pub fn push(&mut self, factor: &Mat) {
        self.steps += 1;
        if self.is_zero() {
            return;
        }
        self.unit = factor * &self.unit;
        if self.unit.iter().all(|&v| v == 0.0) {
            self.unit.fill(0.0);
            self.log_scale = f64::NEG_INFINITY;
            return;
        }
        let big = self.unit.amax();
        let d = self.unit.nrows().max(self.unit.ncols()) as f64;
        // op ∈ [amax, d·amax]; only take the SVD when the band test is ambiguous
        if big >= 0.5 && d * big <= 2.0 {
            return;
        }
        let s = op_norm(&self.unit);
        if !(0.5..=2.0).contains(&s) {
            self.unit /= s;
            self.log_scale += s.ln();
        }
    }
}

/// Symbols of a point, materialized on a range and evaluated lazily outside it.
pub(crate) struct OrbitSymbols<'a> {
    point: &'a SymbolicPoint,
    lo: i64,
    buf: Vec<u8>,
}

impl<'a> OrbitSymbols<'a> {
    pub(crate) fn new(point: &'a SymbolicPoint, lo: i64, hi: i64) -> Self {
        let buf = if hi >= lo { point.window(lo, hi) } else { Vec::new() };
        OrbitSymbols { point, lo, buf }
    }

    #[inline]
    pub(crate) fn symbol(&self, i: i64) -> u8 {
        let rel = i - self.lo;
        if rel >= 0 && (rel as usize) < self.buf.len() {
            self.buf[rel as usize]
        } else {
            self.point.symbol(i)
        }
    }
}

fn diag(values: &[f64]) -> Mat {
    let d = values.len();
    let mut m = Mat::zeros(d, d);
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] = v;
    }
    m
}

impl MatrixCocycle {
    fn with_kind(dim: usize, kind: CocycleKind) -> Self {
        MatrixCocycle {
            dim,
            kind,
            holder_alpha: 1.0,
            holder_c2: None,
        }
    }

    fn check_dim(d: usize) -> Result<()> {
        if d == 0 || d > MAX_DIM {
            return Err(LabError::InvalidArgument(format!(
                "cocycle dimension must be in 1..={MAX_DIM}, got {d}"
            )));
        }
        Ok(())
    }

    pub fn constant(m: Mat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(LabError::InvalidArgument("constant matrix must be square".into()));
        }
        Self::check_dim(m.nrows())?;
        Ok(Self::with_kind(m.nrows(), CocycleKind::Constant(m)))
    }

    pub fn constant_diagonal(values: &[f64]) -> Result<Self> {
        Self::constant(diag(values))
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::constant(Mat::identity(d, d))
    }

    /// Locally constant cocycle over `k` symbols: `table` maps central words of
    /// length `2·window+1` to matrices.
    pub fn locally_constant<I>(k: usize, window: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u8>, Mat)>,
    {
        let len = 2 * window + 1;
        let size = k.checked_pow(len as u32).filter(|&s| s <= 1 << 20).ok_or_else(|| {
            LabError::InvalidArgument(format!("window {window} over {k} symbols is too large"))
        })?;
        let mut table: Vec<Option<Mat>> = vec![None; size];
        let mut dim = None;
        for (word, m) in entries {
            if word.len() != len || word.iter().any(|&s| s as usize >= k) {
                return Err(LabError::InvalidArgument(format!(
                    "table word of length {} does not fit window {window} over {k} symbols",
                    word.len()
                )));
            }
            if m.nrows() != m.ncols() || dim.is_some_and(|d| d != m.nrows()) {
                return Err(LabError::InvalidArgument(
                    "table matrices must be square and share one dimension".into(),
                ));
            }
            dim = Some(m.nrows());
            let idx = word.iter().fold(0usize, |acc, &s| acc * k + s as usize);
            table[idx] = Some(m);
        }
        let dim = dim.ok_or_else(|| LabError::InvalidArgument("empty matrix table".into()))?;
        Self::check_dim(dim)?;
        Ok(Self::with_kind(dim, CocycleKind::LocallyConstant { k, window, table }))
    }

    /// Window-0 cocycle with one matrix per symbol.
    pub fn one_step(mats: Vec<Mat>) -> Result<Self> {
        let k = mats.len();
        Self::locally_constant(k, 0, mats.into_iter().enumerate().map(|(s, m)| (vec![s as u8], m)))
    }

    /// Seeded random locally constant cocycle with entries uniform in `[lo, hi]`.
    pub fn random_locally_constant(k: usize, window: usize, dim: usize, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        if !(lo < hi) {
            return Err(LabError::InvalidArgument("entry range must satisfy lo < hi".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = 2 * window + 1;
        let words = crate::symbolic::all_words(k, len);
        let entries: Vec<(Vec<u8>, Mat)> = words
            .into_iter()
            .map(|w| {
                let m = Mat::from_fn(dim, dim, |_, _| rng.random_range(lo..=hi));
                (w, m)
            })
            .collect();
        Self::locally_constant(k, window, entries)
    }

    /// The scalar example cocycle (plus optional constant diagonal entries).
    pub fn paper_example(theta: f64, a: f64, extra_diagonal: Vec<f64>) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(LabError::InvalidArgument(format!("theta must lie in (0, 1), got {theta}")));
        }
        if !(a > 1.0 && a * theta > 1.0) {
            return Err(LabError::InvalidArgument(format!(
                "example requires a > 1 and a·θ > 1, got a = {a}, θ = {theta}"
            )));
        }
        let dim = 1 + extra_diagonal.len();
        Self::check_dim(dim)?;
        Ok(Self::with_kind(
            dim,
            CocycleKind::PaperExample {
                theta,
                a,
                extra_diagonal,
                anchor: anchor_point_q(),
            },
        ))
    }

    pub fn block_diagonal(entries: Vec<MatrixCocycle>) -> Result<Self> {
        if entries.is_empty() {
            return Err(LabError::InvalidArgument("block_diagonal needs at least one entry".into()));
        }
        let thetas: Vec<f64> = entries.iter().filter_map(|e| e.metric_theta()).collect();
        if thetas.windows(2).any(|w| w[0] != w[1]) {
            return Err(LabError::InvalidArgument(
                "block entries use different metric bases θ".into(),
            ));
        }
        let dim = entries.iter().map(|e| e.dim).sum();
        Self::check_dim(dim)?;
        let alpha = entries.iter().map(|e| e.holder_alpha).fold(1.0, f64::min);
        let mut c = Self::with_kind(dim, CocycleKind::BlockDiagonal(entries));
        c.holder_alpha = alpha;
        Ok(c)
    }

    /// `x ↦ Λ^degree A(x)`; dimension may exceed [`MAX_DIM`].
    pub(crate) fn compound_of(base: &MatrixCocycle, degree: usize, dim: usize) -> Self {
        let mut c = Self::with_kind(
            dim,
            CocycleKind::Compound {
                base: Arc::new(base.clone()),
                degree,
            },
        );
        c.holder_alpha = base.holder_alpha;
        c
    }

    /// `x ↦ c·A(x)`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut c = Self::with_kind(
            self.dim,
            CocycleKind::Scaled {
                base: Arc::new(self.clone()),
                factor,
            },
        );
        c.holder_alpha = self.holder_alpha;
        c
    }

    pub fn with_holder_alpha(mut self, alpha: f64) -> Self {
        self.holder_alpha = alpha;
        self
    }

    pub fn with_holder_c2(mut self, c2: f64) -> Self {
        self.holder_c2 = Some(c2);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &CocycleKind {
        &self.kind
    }

    pub fn holder_alpha(&self) -> f64 {
        self.holder_alpha
    }

    pub fn holder_c2(&self) -> Option<f64> {
        self.holder_c2
    }

    fn metric_theta(&self) -> Option<f64> {
        match &self.kind {
            CocycleKind::PaperExample { theta, .. } => Some(*theta),
            CocycleKind::BlockDiagonal(es) => es.iter().find_map(|e| e.metric_theta()),
            CocycleKind::Compound { base, .. } | CocycleKind::Scaled { base, .. } => base.metric_theta(),
            _ => None,
        }
    }

    /// Radius of the symbol window read by the generator (0 for metric-local parts).
    pub fn window_radius(&self) -> usize {
        match &self.kind {
            CocycleKind::Constant(_) | CocycleKind::PaperExample { .. } => 0,
            CocycleKind::LocallyConstant { window, .. } => *window,
            CocycleKind::BlockDiagonal(es) => es.iter().map(|e| e.window_radius()).max().unwrap_or(0),
            CocycleKind::Compound { base, .. } | CocycleKind::Scaled { base, .. } => base.window_radius(),
        }
    }

    pub fn locality(&self) -> Locality {
        match self.metric_anchor() {
            Some(q) => Locality::Metric(q),
            None => Locality::Window(self.window_radius()),
        }
    }

    fn metric_anchor(&self) -> Option<SymbolicPoint> {
        match &self.kind {
            CocycleKind::PaperExample { anchor, .. } => Some(anchor.clone()),
            CocycleKind::BlockDiagonal(es) => es.iter().find_map(|e| e.metric_anchor()),
            CocycleKind::Compound { base, .. } | CocycleKind::Scaled { base, .. } => base.metric_anchor(),
            _ => None,
        }
    }

    /// `A(x)`.
    pub fn evaluate(&self, x: &SymbolicPoint) -> Result<Mat> {
        let r = self.window_radius() as i64;
        let syms = OrbitSymbols::new(x, -r, r);
        self.eval_at(&syms, 0)
    }

    /// `A(f^j x)` read from a symbol view of `x`.
    pub(crate) fn eval_at(&self, syms: &OrbitSymbols<'_>, j: i64) -> Result<Mat> {
        match &self.kind {
            CocycleKind::Constant(m) => Ok(m.clone()),
            CocycleKind::LocallyConstant { k, window, table } => {
                let r = *window as i64;
                let mut idx = 0usize;
                for i in (j - r)..=(j + r) {
                    let s = syms.symbol(i) as usize;
                    if s >= *k {
                        return Err(LabError::InvalidArgument(format!(
                            "symbol {s} outside the cocycle table alphabet"
                        )));
                    }
                    idx = idx * k + s;
                }
                table[idx].clone().ok_or_else(|| {
                    let word: Vec<u8> = ((j - r)..=(j + r)).map(|i| syms.symbol(i)).collect();
                    LabError::InvalidArgument(format!(
                        "no matrix for central word {}",
                        crate::symbolic::word_string(&word)
                    ))
                })
            }
            CocycleKind::PaperExample {
                theta,
                a,
                extra_diagonal,
                anchor,
            } => {
                let value = match metric_radius(syms, j, anchor)? {
                    None => 0.0,
                    Some(n) if n >= 3 => a * theta.powi(n as i32 - 3),
                    Some(_) => *a,
                };
                let mut vals = Vec::with_capacity(self.dim);
                vals.push(value);
                vals.extend_from_slice(extra_diagonal);
                Ok(diag(&vals))
            }
            CocycleKind::BlockDiagonal(es) => {
                let mut m = Mat::zeros(self.dim, self.dim);
                let mut off = 0;
                for e in es {
                    let b = e.eval_at(syms, j)?;
                    m.view_mut((off, off), (e.dim, e.dim)).copy_from(&b);
                    off += e.dim;
                }
                Ok(m)
            }
            CocycleKind::Compound { base, degree } => Ok(compound(&base.eval_at(syms, j)?, *degree)),
            CocycleKind::Scaled { base, factor } => Ok(base.eval_at(syms, j)? * *factor),
        }
    }

    /// Calls `visit(j, A(f^j x))` for `j = 0..n` in order; stops early when `visit` returns false.
    pub fn walk<F>(&self, x: &SymbolicPoint, n: usize, mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &Mat) -> bool,
    {
        let r = self.window_radius() as i64;
        let syms = OrbitSymbols::new(x, -r, n as i64 - 1 + r);
        for j in 0..n {
            let m = self.eval_at(&syms, j as i64)?;
            if !visit(j, &m) {
                break;
            }
        }
        Ok(())
    }

    /// `A^n(x) = A(f^{n-1}x) ⋯ A(x)`, identity for `n = 0`.
    pub fn product(&self, x: &SymbolicPoint, n: usize) -> Result<Mat> {
        let mut p = Mat::identity(self.dim, self.dim);
        let mut risk = None;
        self.walk(x, n, |j, m| {
            p = m * &p;
            let s = p.amax();
            if s != 0.0 && !(1e-300..=1e300).contains(&s) {
                risk = Some(j + 1);
                return false;
            }
            true
        })?;
        match risk {
            Some(step) => Err(LabError::OverflowRisk { step }),
            None => Ok(p),
        }
    }

    /// `A^n(x)` as a renormalized product.
    pub fn product_scaled(&self, x: &SymbolicPoint, n: usize) -> Result<ScaledProduct> {
        let mut sp = ScaledProduct::identity(self.dim);
        self.walk(x, n, |_, m| {
            sp.push(m);
            !sp.is_zero()
        })?;
        sp.steps = n;
        Ok(sp)
    }
}

/// `N(f^j x, q)` using the symbol view, `None` when `f^j x = q`.
fn metric_radius(syms: &OrbitSymbols<'_>, j: i64, anchor: &SymbolicPoint) -> Result<Option<u64>> {
    const QUICK: i64 = 64;
    for r in 0..QUICK {
        if syms.symbol(j + r) != anchor.symbol(r) || syms.symbol(j - r) != anchor.symbol(-r) {
            return Ok(Some(r as u64));
        }
    }
    agreement_radius(&syms.point.shift(j), anchor, DEFAULT_SCAN_CAP)
}

/// Result of [`holder_estimate`].
#[derive(Debug, Clone)]
pub struct HolderEstimate {
    pub c2_hat: f64,
    pub alpha: f64,
    pub witness: (SymbolicPoint, SymbolicPoint),
    pub witness_distance: f64,
    pub pairs_used: usize,
}

fn flip_at(x: &SymbolicPoint, i: i64, shift: &Subshift, rng: &mut ChaCha8Rng) -> Option<SymbolicPoint> {
    let k = shift.k() as u8;
    let cur = x.symbol(i);
    let prev = x.symbol(i - 1);
    let next = x.symbol(i + 1);
    let choices: Vec<u8> = (0..k)
        .filter(|&s| s != cur && shift.allows(prev, s) && shift.allows(s, next))
        .collect();
    if choices.is_empty() {
        return None;
    }
    let s = choices[rng.random_range(0..choices.len())];
    Some(SymbolicPoint::patched(x.clone(), i, &[s]))
}

/// Uniform-successor Markov law supported on the subshift.
pub fn uniform_markov(shift: &Subshift) -> Law {
    let k = shift.k();
    let matrix = (0..k)
        .map(|a| {
            let succ = (0..k).filter(|&b| shift.allows(a as u8, b as u8)).count() as f64;
            (0..k)
                .map(|b| if shift.allows(a as u8, b as u8) { 1.0 / succ } else { 0.0 })
                .collect()
        })
        .collect();
    Law::Markov { matrix }
}

/// `max ‖A(x) − A(y)‖ / d(x, y)^α` over seeded pairs: random points with one
/// symbol changed at radius `0..=12`, and for metric-local cocycles also
/// perturbations of the anchor point.
pub fn holder_estimate(a: &MatrixCocycle, shift: &Subshift, sample_pairs: usize, seed: u64) -> Result<HolderEstimate> {
    let alpha = a.holder_alpha;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let law = if shift.is_full() {
        Law::uniform(shift.k())
    } else {
        uniform_markov(shift)
    };
    let anchor = match a.locality() {
        Locality::Metric(q) => Some(q),
        Locality::Window(_) => None,
    };
    let mut best: Option<HolderEstimate> = None;
    let mut used = 0usize;
    for s in 0..sample_pairs {
        let radius = (s % 13) as i64;
        let base = match (&anchor, s % 2) {
            (Some(q), 1) => q.clone(),
            _ => SymbolicPoint::seeded(rng.random(), law.clone()),
        };
        let side = if rng.random::<bool>() { radius } else { -radius };
        let Some(y) = flip_at(&base, side, shift, &mut rng) else {
            continue;
        };
        let x = base;
        let d = cylinder_distance(&x, &y, shift)?;
        if d == 0.0 {
            continue;
        }
        used += 1;
        let diff = op_norm(&(a.evaluate(&x)? - a.evaluate(&y)?));
        let ratio = diff / d.powf(alpha);
        if best.as_ref().is_none_or(|b| ratio > b.c2_hat) {
            best = Some(HolderEstimate {
                c2_hat: ratio,
                alpha,
                witness: (x, y),
                witness_distance: d,
                pairs_used: 0,
            });
        }
    }
    let mut est = best.ok_or(LabError::DegenerateSample)?;
    est.pairs_used = used;
    Ok(est)
}
