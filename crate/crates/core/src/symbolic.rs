//! Shift spaces over finite alphabets.
//!
//! Points are finitely described two-sided sequences: periodic words,
//! eventually periodic sequences, counter-seeded random sequences, and
//! finite patches over any of those. The metric is the cylinder ultrametric
//! `d(x, y) = θ^N(x, y)` where `N` is the radius of central agreement.

use std::fmt;
use std::sync::{Arc, Mutex};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Default cap on the agreement scan in [`cylinder_distance`].
pub const DEFAULT_SCAN_CAP: u64 = 1 << 20;

/// Default enumeration budget: number of words `k^max_period`.
pub const DEFAULT_ENUM_BUDGET: u128 = 1 << 16;

/// Alphabet `{0, .., size-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    size: u8,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if !(2..=255).contains(&size) {
            return Err(LabError::InvalidArgument(format!(
                "alphabet size must be in 2..=255, got {size}"
            )));
        }
        Ok(Alphabet { size: size as u8 })
    }

    pub fn size(&self) -> usize {
        self.size as usize
    }
}

/// A subshift of finite type given by an adjacency table, with the metric base θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subshift {
    alphabet: Alphabet,
    transitions: Vec<Vec<bool>>,
    theta: f64,
}

impl Subshift {
    pub fn new(alphabet: Alphabet, transitions: Vec<Vec<bool>>, theta: f64) -> Result<Self> {
        let k = alphabet.size();
        if !(theta > 0.0 && theta < 1.0) {
            return Err(LabError::InvalidArgument(format!(
                "theta must lie in (0, 1), got {theta}"
            )));
        }
        if transitions.len() != k || transitions.iter().any(|r| r.len() != k) {
            return Err(LabError::InvalidArgument(format!(
                "adjacency table must be {k}x{k}"
            )));
        }
        for a in 0..k {
            if !transitions[a].iter().any(|&t| t) {
                return Err(LabError::InvalidArgument(format!(
                    "symbol {a} has no allowed successor"
                )));
            }
            if !(0..k).any(|b| transitions[b][a]) {
                return Err(LabError::InvalidArgument(format!(
                    "symbol {a} has no allowed predecessor"
                )));
            }
        }
        Ok(Subshift {
            alphabet,
            transitions,
            theta,
        })
    }

    /// Full shift on `k` symbols.
    pub fn full(k: usize, theta: f64) -> Result<Self> {
        let alphabet = Alphabet::new(k)?;
        Self::new(alphabet, vec![vec![true; k]; k], theta)
    }

    /// Golden-mean shift: binary sequences without the word "11".
    pub fn golden_mean(theta: f64) -> Result<Self> {
        Self::new(
            Alphabet::new(2)?,
            vec![vec![true, true], vec![true, false]],
            theta,
        )
    }

    /// Adjacency rows given as bit strings, e.g. `["11", "10"]`.
    pub fn from_bit_rows(rows: &[String], theta: f64) -> Result<Self> {
        let k = rows.len();
        let alphabet = Alphabet::new(k)?;
        let mut table = Vec::with_capacity(k);
        for (a, row) in rows.iter().enumerate() {
            let bits: Result<Vec<bool>> = row
                .chars()
                .map(|c| match c {
                    '1' => Ok(true),
                    '0' => Ok(false),
                    other => Err(LabError::InvalidArgument(format!(
                        "adjacency row {a} contains {other:?}; expected '0' or '1'"
                    ))),
                })
                .collect();
            table.push(bits?);
        }
        Self::new(alphabet, table, theta)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn k(&self) -> usize {
        self.alphabet.size()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn allows(&self, from: u8, to: u8) -> bool {
        self.transitions[from as usize][to as usize]
    }

    pub fn is_full(&self) -> bool {
        self.transitions.iter().all(|r| r.iter().all(|&t| t))
    }

    pub fn bit_rows(&self) -> Vec<String> {
        self.transitions
            .iter()
            .map(|r| r.iter().map(|&t| if t { '1' } else { '0' }).collect())
            .collect()
    }

    /// First forbidden transition in a linear word, if any.
    pub fn check_word(&self, word: &[u8]) -> Result<()> {
        for w in word {
            if (*w as usize) >= self.k() {
                return Err(LabError::InvalidArgument(format!(
                    "symbol {w} outside alphabet of size {}",
                    self.k()
                )));
            }
        }
        for pair in word.windows(2) {
            if !self.allows(pair[0], pair[1]) {
                return Err(LabError::InadmissibleWrap {
                    from: pair[0],
                    to: pair[1],
                });
            }
        }
        Ok(())
    }

    /// Admissibility of the bi-infinite repetition of `word`.
    pub fn check_cyclic(&self, word: &[u8]) -> Result<()> {
        self.check_word(word)?;
        if let (Some(&last), Some(&first)) = (word.last(), word.first()) {
            if !self.allows(last, first) {
                return Err(LabError::InadmissibleWrap {
                    from: last,
                    to: first,
                });
            }
        }
        Ok(())
    }
}

/// A shift-invariant measure: Bernoulli product or stationary first-order Markov.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Law {
    Bernoulli { probs: Vec<f64> },
    Markov { matrix: Vec<Vec<f64>> },
}

impl Law {
    pub fn fair_coin() -> Self {
        Law::Bernoulli {
            probs: vec![0.5, 0.5],
        }
    }

    pub fn uniform(k: usize) -> Self {
        Law::Bernoulli {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Law::Bernoulli { probs } => probs.len(),
            Law::Markov { matrix } => matrix.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_row = |row: &[f64], what: &str| -> Result<()> {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(LabError::InvalidArgument(format!(
                    "{what}: probabilities must lie in [0, 1]"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(LabError::InvalidArgument(format!(
                    "{what}: probabilities sum to {s}, not 1"
                )));
            }
            Ok(())
        };
        match self {
            Law::Bernoulli { probs } => check_row(probs, "bernoulli"),
            Law::Markov { matrix } => {
                let k = matrix.len();
                for (a, row) in matrix.iter().enumerate() {
                    if row.len() != k {
                        return Err(LabError::InvalidArgument(
                            "markov matrix must be square".into(),
                        ));
                    }
                    check_row(row, &format!("markov row {a}"))?;
                }
                Ok(())
            }
        }
    }

    /// Stationary distribution (the probability vector itself for Bernoulli).
    pub fn stationary(&self) -> Vec<f64> {
        match self {
            Law::Bernoulli { probs } => probs.clone(),
            Law::Markov { matrix } => {
                let k = matrix.len();
                // lazy power iteration handles periodic chains
                let mut pi = vec![1.0 / k as f64; k];
                for _ in 0..100_000 {
                    let mut next = vec![0.0; k];
                    for a in 0..k {
                        for b in 0..k {
                            next[b] += pi[a] * matrix[a][b];
                        }
                    }
                    let mut delta: f64 = 0.0;
                    for b in 0..k {
                        let v = 0.5 * (pi[b] + next[b]);
                        delta = delta.max((v - pi[b]).abs());
                        pi[b] = v;
                    }
                    if delta < 1e-16 {
                        break;
                    }
                }
                let s: f64 = pi.iter().sum();
                pi.iter().map(|p| p / s).collect()
            }
        }
    }

    /// Measure of the cylinder `[w_0 w_1 .. w_{L-1}]`.
    pub fn cylinder_mass(&self, word: &[u8]) -> f64 {
        match self {
            Law::Bernoulli { probs } => word.iter().map(|&s| probs[s as usize]).product(),
            Law::Markov { matrix } => {
                let Some(&first) = word.first() else {
                    return 1.0;
                };
                let pi = self.stationary();
                let mut m = pi[first as usize];
                for pair in word.windows(2) {
                    m *= matrix[pair[0] as usize][pair[1] as usize];
                }
                m
            }
        }
    }

    /// Every word of positive mass must be admissible in `shift`.
    pub fn check_compatible(&self, shift: &Subshift) -> Result<()> {
        self.validate()?;
        if self.k() != shift.k() {
            return Err(LabError::IncompatibleLaw(format!(
                "law has {} symbols, subshift has {}",
                self.k(),
                shift.k()
            )));
        }
        match self {
            Law::Bernoulli { probs } => {
                for a in 0..probs.len() {
                    for b in 0..probs.len() {
                        if probs[a] > 0.0 && probs[b] > 0.0 && !shift.allows(a as u8, b as u8) {
                            return Err(LabError::IncompatibleLaw(format!(
                                "bernoulli law charges the forbidden word {a}{b}"
                            )));
                        }
                    }
                }
            }
            Law::Markov { matrix } => {
                for (a, row) in matrix.iter().enumerate() {
                    for (b, &p) in row.iter().enumerate() {
                        if p > 0.0 && !shift.allows(a as u8, b as u8) {
                            return Err(LabError::IncompatibleLaw(format!(
                                "markov support contains the forbidden transition {a} -> {b}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn pick(u: f64, probs: &[f64]) -> u8 {
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (s, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = s;
        }
        acc += p;
        if u < acc && p > 0.0 {
            return s as u8;
        }
    }
    last_positive as u8
}

fn zigzag(i: i64) -> u64 {
    ((i << 1) ^ (i >> 63)) as u64
}

/// Uniform in [0, 1) drawn from the counter-addressed ChaCha stream at `index`.
fn counter_uniform(key: &[u8; 32], index: i64) -> f64 {
    let mut rng = ChaCha8Rng::from_seed(*key);
    rng.set_word_pos(zigzag(index) as u128 * 2);
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn key_from_seed(seed: u64) -> [u8; 32] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut key = [0u8; 32];
    rng.fill_bytes(&mut key);
    key
}

/// Lazily realized Markov path. Symbol `i` depends on the counter uniforms
/// `u_0 .. u_i` (or `u_i .. u_{-1}` for negative `i`) only, so the path is a
/// pure function of `(seed, i)`.
#[derive(Debug)]
struct MarkovTape {
    forward: Vec<u8>,
    backward: Vec<u8>,
}

#[derive(Debug)]
pub struct SeededSource {
    seed: u64,
    key: [u8; 32],
    law: Law,
    stationary: Vec<f64>,
    tape: Mutex<MarkovTape>,
}

impl SeededSource {
    fn new(seed: u64, law: Law) -> Self {
        let stationary = law.stationary();
        SeededSource {
            seed,
            key: key_from_seed(seed),
            law,
            stationary,
            tape: Mutex::new(MarkovTape {
                forward: Vec::new(),
                backward: Vec::new(),
            }),
        }
    }

    fn symbol(&self, i: i64) -> u8 {
        match &self.law {
            Law::Bernoulli { probs } => pick(counter_uniform(&self.key, i), probs),
            Law::Markov { matrix } => {
                let mut tape = self.tape.lock().expect("tape lock poisoned");
                if tape.forward.is_empty() {
                    let s0 = pick(counter_uniform(&self.key, 0), &self.stationary);
                    tape.forward.push(s0);
                }
                if i >= 0 {
                    let i = i as usize;
                    while tape.forward.len() <= i {
                        let idx = tape.forward.len();
                        let prev = tape.forward[idx - 1] as usize;
                        let u = counter_uniform(&self.key, idx as i64);
                        tape.forward.push(pick(u, &matrix[prev]));
                    }
                    tape.forward[i]
                } else {
                    let j = (-i - 1) as usize;
                    while tape.backward.len() <= j {
                        let idx = tape.backward.len();
                        let next = if idx == 0 {
                            tape.forward[0]
                        } else {
                            tape.backward[idx - 1]
                        } as usize;
                        // time reversal: P(prev = b | next = a) = pi_b P_ba / pi_a
                        let k = matrix.len();
                        let weights: Vec<f64> = (0..k)
                            .map(|b| self.stationary[b] * matrix[b][next])
                            .collect();
                        let total: f64 = weights.iter().sum();
                        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
                        let u = counter_uniform(&self.key, -(idx as i64) - 1);
                        tape.backward.push(pick(u, &probs));
                    }
                    tape.backward[j]
                }
            }
        }
    }
}

/// A finitely described point of a two-sided shift space.
#[derive(Clone)]
pub enum SymbolicPoint {
    /// `x_i = word[(i + phase) mod |word|]`.
    Periodic { word: Arc<[u8]>, phase: i64 },
    /// `core` occupies indices `offset .. offset+|core|`; `left` repeats to the
    /// left of it (its last symbol at `offset-1`), `right` repeats to the right.
    EventuallyPeriodic {
        left: Arc<[u8]>,
        core: Arc<[u8]>,
        right: Arc<[u8]>,
        offset: i64,
    },
    /// Counter-seeded sample of a law, shifted by `shift`.
    Seeded { source: Arc<SeededSource>, shift: i64 },
    /// `base` with indices `start .. start+|symbols|` overwritten.
    Patched {
        base: Arc<SymbolicPoint>,
        start: i64,
        symbols: Arc<[u8]>,
    },
}

impl fmt::Debug for SymbolicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymbolicPoint::Periodic { word, phase } => f
                .debug_struct("Periodic")
                .field("word", &word_string(word))
                .field("phase", phase)
                .finish(),
            SymbolicPoint::EventuallyPeriodic {
                left,
                core,
                right,
                offset,
            } => f
                .debug_struct("EventuallyPeriodic")
                .field("left", &word_string(left))
                .field("core", &word_string(core))
                .field("right", &word_string(right))
                .field("offset", offset)
                .finish(),
            SymbolicPoint::Seeded { source, shift } => f
                .debug_struct("Seeded")
                .field("seed", &source.seed)
                .field("law", &source.law)
                .field("shift", shift)
                .finish(),
            SymbolicPoint::Patched {
                base,
                start,
                symbols,
            } => f
                .debug_struct("Patched")
                .field("base", base)
                .field("start", start)
                .field("symbols", &word_string(symbols))
                .finish(),
        }
    }
}

/// Render a word over a small alphabet as a digit string.
pub fn word_string(word: &[u8]) -> String {
    word.iter()
        .map(|&s| char::from_digit(s as u32, 36).unwrap_or('?'))
        .collect()
}

/// Parse a digit string into a word.
pub fn parse_word(s: &str) -> Result<Vec<u8>> {
    s.chars()
        .map(|c| {
            c.to_digit(36)
                .map(|d| d as u8)
                .ok_or_else(|| LabError::InvalidArgument(format!("bad symbol {c:?} in word {s:?}")))
        })
        .collect()
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Eventual-periodicity data: the sequence is periodic with `left_period`
/// on indices `<= left_edge` and with `right_period` on indices `>= right_edge`.
#[derive(Debug, Clone, Copy)]
struct TailShape {
    left_edge: i64,
    left_period: u64,
    right_edge: i64,
    right_period: u64,
}

impl SymbolicPoint {
    pub fn periodic(word: &[u8], phase: i64) -> Result<Self> {
        if word.is_empty() {
            return Err(LabError::InvalidArgument("periodic word must be non-empty".into()));
        }
        Ok(SymbolicPoint::Periodic {
            word: word.into(),
            phase,
        })
    }

    /// Fixed point `... s s s ...`.
    pub fn constant(symbol: u8) -> Self {
        SymbolicPoint::Periodic {
            word: vec![symbol].into(),
            phase: 0,
        }
    }

    pub fn eventually_periodic(left: &[u8], core: &[u8], right: &[u8], offset: i64) -> Result<Self> {
        if left.is_empty() || right.is_empty() {
            return Err(LabError::InvalidArgument(
                "eventually periodic tails must be non-empty".into(),
            ));
        }
        Ok(SymbolicPoint::EventuallyPeriodic {
            left: left.into(),
            core: core.into(),
            right: right.into(),
            offset,
        })
    }

    /// A sample of `law` addressed by `seed`; symbol `i` is a pure function of `(seed, i)`.
    pub fn seeded(seed: u64, law: Law) -> Self {
        SymbolicPoint::Seeded {
            source: Arc::new(SeededSource::new(seed, law)),
            shift: 0,
        }
    }

    pub fn patched(base: SymbolicPoint, start: i64, symbols: &[u8]) -> Self {
        SymbolicPoint::Patched {
            base: Arc::new(base),
            start,
            symbols: symbols.into(),
        }
    }

    /// Symbol at signed index `i`.
    pub fn symbol(&self, i: i64) -> u8 {
        match self {
            SymbolicPoint::Periodic { word, phase } => {
                let n = word.len() as i64;
                word[(i + phase).rem_euclid(n) as usize]
            }
            SymbolicPoint::EventuallyPeriodic {
                left,
                core,
                right,
                offset,
            } => {
                let rel = i - offset;
                if rel < 0 {
                    let n = left.len() as i64;
                    left[(rel).rem_euclid(n) as usize]
                } else if (rel as usize) < core.len() {
                    core[rel as usize]
                } else {
                    let n = right.len() as i64;
                    right[(rel - core.len() as i64).rem_euclid(n) as usize]
                }
            }
            SymbolicPoint::Seeded { source, shift } => source.symbol(i + shift),
            SymbolicPoint::Patched {
                base,
                start,
                symbols,
            } => {
                let rel = i - start;
                if rel >= 0 && (rel as usize) < symbols.len() {
                    symbols[rel as usize]
                } else {
                    base.symbol(i)
                }
            }
        }
    }

    /// Symbols on indices `lo..=hi`.
    pub fn window(&self, lo: i64, hi: i64) -> Vec<u8> {
        (lo..=hi).map(|i| self.symbol(i)).collect()
    }

    /// Whether the point carries a finite description from which equality is decidable.
    pub fn is_finitely_described(&self) -> bool {
        self.tail_shape().is_some()
    }

    fn tail_shape(&self) -> Option<TailShape> {
        match self {
            SymbolicPoint::Periodic { word, .. } => Some(TailShape {
                left_edge: 0,
                left_period: word.len() as u64,
                right_edge: 0,
                right_period: word.len() as u64,
            }),
            SymbolicPoint::EventuallyPeriodic {
                left,
                core,
                right,
                offset,
            } => Some(TailShape {
                left_edge: offset - 1,
                left_period: left.len() as u64,
                right_edge: offset + core.len() as i64,
                right_period: right.len() as u64,
            }),
            SymbolicPoint::Seeded { .. } => None,
            SymbolicPoint::Patched {
                base,
                start,
                symbols,
            } => {
                let b = base.tail_shape()?;
                Some(TailShape {
                    left_edge: b.left_edge.min(start - 1),
                    left_period: b.left_period,
                    right_edge: b.right_edge.max(start + symbols.len() as i64),
                    right_period: b.right_period,
                })
            }
        }
    }

    /// `(shift(x, m))_i = x_{i+m}`.
    pub fn shift(&self, m: i64) -> SymbolicPoint {
        if m == 0 {
            return self.clone();
        }
        match self {
            SymbolicPoint::Periodic { word, phase } => SymbolicPoint::Periodic {
                word: word.clone(),
                phase: (phase + m).rem_euclid(word.len() as i64),
            },
            SymbolicPoint::EventuallyPeriodic {
                left,
                core,
                right,
                offset,
            } => SymbolicPoint::EventuallyPeriodic {
                left: left.clone(),
                core: core.clone(),
                right: right.clone(),
                offset: offset - m,
            },
            SymbolicPoint::Seeded { source, shift } => SymbolicPoint::Seeded {
                source: source.clone(),
                shift: shift + m,
            },
            SymbolicPoint::Patched {
                base,
                start,
                symbols,
            } => SymbolicPoint::Patched {
                base: Arc::new(base.shift(m)),
                start: start - m,
                symbols: symbols.clone(),
            },
        }
    }

    /// Check that every transition on indices `lo..=hi` is allowed.
    pub fn check_admissible_window(&self, shift: &Subshift, lo: i64, hi: i64) -> Result<()> {
        shift.check_word(&self.window(lo, hi))
    }
}

/// The anchor point `q`: all ones except a zero at index −1.
pub fn anchor_point_q() -> SymbolicPoint {
    SymbolicPoint::patched(SymbolicPoint::constant(1), -1, &[0])
}

/// Radius of central agreement `N(x, y)`; `None` when the points are provably equal.
pub fn agreement_radius(x: &SymbolicPoint, y: &SymbolicPoint, cap: u64) -> Result<Option<u64>> {
    if let (
        SymbolicPoint::Seeded { source: s1, shift: a },
        SymbolicPoint::Seeded { source: s2, shift: b },
    ) = (x, y)
    {
        if Arc::ptr_eq(s1, s2) && a == b {
            return Ok(None);
        }
        if s1.seed == s2.seed && s1.law == s2.law && a == b {
            return Ok(None);
        }
    }
    let exact_bound = match (x.tail_shape(), y.tail_shape()) {
        (Some(tx), Some(ty)) => {
            let right = tx.right_edge.max(ty.right_edge) + lcm(tx.right_period, ty.right_period) as i64;
            let left = tx.left_edge.min(ty.left_edge) - lcm(tx.left_period, ty.left_period) as i64;
            Some(right.unsigned_abs().max(left.unsigned_abs()))
        }
        _ => None,
    };
    let limit = exact_bound.map_or(cap, |b| b.min(cap));
    for r in 0..=limit {
        let ri = r as i64;
        if x.symbol(ri) != y.symbol(ri) || x.symbol(-ri) != y.symbol(-ri) {
            return Ok(Some(r));
        }
    }
    match exact_bound {
        Some(b) if b <= cap => Ok(None),
        _ => Err(LabError::ScanCapExceeded { cap }),
    }
}

/// `d(x, y) = θ^N(x, y)`, `0` for provably equal points.
pub fn cylinder_distance(x: &SymbolicPoint, y: &SymbolicPoint, shift: &Subshift) -> Result<f64> {
    cylinder_distance_capped(x, y, shift, DEFAULT_SCAN_CAP)
}

pub fn cylinder_distance_capped(
    x: &SymbolicPoint,
    y: &SymbolicPoint,
    shift: &Subshift,
    cap: u64,
) -> Result<f64> {
    Ok(match agreement_radius(x, y, cap)? {
        Some(n) => shift.theta().powi(n as i32),
        None => 0.0,
    })
}

/// A periodic orbit, represented by `Periodic(word, 0)` with `word` of least period.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PeriodicOrbit {
    word: Arc<[u8]>,
}

impl fmt::Debug for PeriodicOrbit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PeriodicOrbit({})", word_string(&self.word))
    }
}

/// Least period of the cyclic word.
pub fn least_period(word: &[u8]) -> usize {
    let n = word.len();
    (1..=n)
        .filter(|p| n.is_multiple_of(*p))
        .find(|&p| (0..n).all(|i| word[i] == word[i % p]))
        .unwrap_or(n)
}

/// Start index of the lexicographically least rotation (Booth's algorithm).
pub fn least_rotation(word: &[u8]) -> usize {
    let n = word.len();
    if n == 0 {
        return 0;
    }
    let s: Vec<u8> = word.iter().chain(word.iter()).copied().collect();
    let mut f = vec![-1i64; 2 * n];
    let mut k: usize = 0;
    for j in 1..2 * n {
        let sj = s[j];
        let mut i = f[j - k - 1];
        while i != -1 && sj != s[k + i as usize + 1] {
            if sj < s[k + i as usize + 1] {
                k = j - i as usize - 1;
            }
            i = f[i as usize];
        }
        if i == -1 && sj != s[k] {
            if sj < s[k] {
                k = j;
            }
            f[j - k] = -1;
        } else {
            f[j - k] = i + 1;
        }
    }
    k % n
}

impl PeriodicOrbit {
    /// Orbit of the periodic repetition of `word` (reduced to its least period).
    pub fn from_word(word: &[u8]) -> Result<Self> {
        if word.is_empty() {
            return Err(LabError::InvalidArgument("orbit word must be non-empty".into()));
        }
        let p = least_period(word);
        Ok(PeriodicOrbit {
            word: word[..p].into(),
        })
    }

    pub fn word(&self) -> &[u8] {
        &self.word
    }

    pub fn period(&self) -> usize {
        self.word.len()
    }

    pub fn representative(&self) -> SymbolicPoint {
        SymbolicPoint::Periodic {
            word: self.word.clone(),
            phase: 0,
        }
    }

    /// `f^j(p)` for the representative `p`.
    pub fn point_at(&self, phase: usize) -> SymbolicPoint {
        SymbolicPoint::Periodic {
            word: self.word.clone(),
            phase: (phase % self.period()) as i64,
        }
    }

    /// Lexicographically least rotation of the word.
    pub fn canonical_word(&self) -> Vec<u8> {
        let r = least_rotation(&self.word);
        self.word[r..].iter().chain(self.word[..r].iter()).copied().collect()
    }

    pub fn same_orbit(&self, other: &PeriodicOrbit) -> bool {
        self.canonical_word() == other.canonical_word()
    }

    /// Cyclic frequency of `w` among the `period` positions of the orbit.
    pub fn word_frequency(&self, w: &[u8]) -> f64 {
        let n = self.period();
        let hits = (0..n)
            .filter(|&s| w.iter().enumerate().all(|(t, &c)| self.word[(s + t) % n] == c))
            .count();
        hits as f64 / n as f64
    }
}

/// Orbit of `Periodic(x_0 .. x_{n-1}, 0)`.
pub fn periodize(x: &SymbolicPoint, n: usize, shift: &Subshift) -> Result<PeriodicOrbit> {
    if n == 0 {
        return Err(LabError::InvalidArgument("period must be positive".into()));
    }
    let word = x.window(0, n as i64 - 1);
    shift.check_cyclic(&word)?;
    PeriodicOrbit::from_word(&word)
}

/// Shadowing certificate produced by [`anosov_close`].
#[derive(Debug, Clone)]
pub struct ClosingCertificate {
    pub source: SymbolicPoint,
    pub n: usize,
    pub orbit: PeriodicOrbit,
    /// `N(f^n x, x)`; `None` when `f^n x = x`.
    pub recurrence_radius: Option<u64>,
    pub recurrence_distance: f64,
    /// Agreement radii `N(f^j x, f^j p)` for `j = 0..=n`; `None` means equal.
    pub radii: Vec<Option<u64>>,
    /// `d_j = d(f^j x, f^j p)`.
    pub distances: Vec<f64>,
    pub c1: f64,
    pub theta_close: f64,
}

impl ClosingCertificate {
    /// Right-hand side `C₁ e^{-θ min(j, n-j)} d(f^n x, x)`.
    pub fn bound(&self, j: usize) -> f64 {
        let m = j.min(self.n - j) as f64;
        self.c1 * (-self.theta_close * m).exp() * self.recurrence_distance
    }

    /// Worst ratio `d_j / bound_j` (0 when every distance vanishes).
    pub fn worst_ratio(&self) -> f64 {
        (0..=self.n)
            .map(|j| {
                let d = self.distances[j];
                if d == 0.0 {
                    0.0
                } else {
                    d / self.bound(j)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Every stored inequality holds (relative slack 1e-12 for the exp/pow round-off).
    pub fn holds(&self) -> bool {
        (0..=self.n).all(|j| self.distances[j] <= self.bound(j) * (1.0 + 1e-12))
    }

    /// Integer form: `N_j >= N + min(j, n-j)`, exact for `C₁ = 1`, `θ_close = log(1/θ)`.
    pub fn holds_exact(&self) -> bool {
        (0..=self.n).all(|j| match (self.radii[j], self.recurrence_radius) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(nj), Some(nrec)) => nj >= nrec + j.min(self.n - j) as u64,
        })
    }
}

/// Distances from every index in `0..=n` to the nearest index where `x` and `p` differ.
fn shadow_radii(x: &SymbolicPoint, p: &SymbolicPoint, n: usize, cap: u64) -> Result<Vec<Option<u64>>> {
    // beyond these indices both sequences are periodic, so agreement there is final
    let (left_limit, right_limit) = match (x.tail_shape(), p.tail_shape()) {
        (Some(tx), Some(tp)) => (
            Some(tx.left_edge.min(tp.left_edge) - lcm(tx.left_period, tp.left_period) as i64),
            Some(tx.right_edge.max(tp.right_edge) + lcm(tx.right_period, tp.right_period) as i64),
        ),
        _ => (None, None),
    };
    // nearest mismatch scanning from `from` in direction `dir`
    let find = |dir: i64, from: i64, limit: Option<i64>| -> Result<Option<i64>> {
        let mut i = from;
        for _ in 0..=cap {
            if x.symbol(i) != p.symbol(i) {
                return Ok(Some(i));
            }
            if limit.is_some_and(|l| (i - l) * dir >= 0) {
                return Ok(None);
            }
            i += dir;
        }
        Err(LabError::ScanCapExceeded { cap })
    };
    let mut mismatches: Vec<i64> = (0..=n as i64).filter(|&i| x.symbol(i) != p.symbol(i)).collect();
    if mismatches.first().is_none_or(|&m| m > 0) {
        if let Some(m) = find(-1, -1, left_limit)? {
            mismatches.insert(0, m);
        }
    }
    if mismatches.last().is_none_or(|&m| m < n as i64) {
        if let Some(m) = find(1, n as i64 + 1, right_limit)? {
            mismatches.push(m);
        }
    }
    let mut radii = Vec::with_capacity(n + 1);
    let mut next_idx = 0usize;
    for j in 0..=n as i64 {
        while next_idx < mismatches.len() && mismatches[next_idx] < j {
            next_idx += 1;
        }
        let right = mismatches.get(next_idx).map(|&m| m - j);
        let left = if next_idx > 0 {
            Some(j - mismatches[next_idx - 1])
        } else {
            None
        };
        let r = match (left, right) {
            (Some(a), Some(b)) => Some(a.min(b) as u64),
            (Some(a), None) => Some(a as u64),
            (None, Some(b)) => Some(b as u64),
            (None, None) => None,
        };
        radii.push(r);
    }
    Ok(radii)
}

/// Close the recurrent segment `x, f x, .., f^n x` into a periodic orbit and
/// certify the exponential shadowing with `C₁ = 1`, `θ_close = log(1/θ)`.
pub fn anosov_close(x: &SymbolicPoint, n: usize, shift: &Subshift) -> Result<ClosingCertificate> {
    if n == 0 {
        return Err(LabError::InvalidArgument("closing time must be positive".into()));
    }
    let theta = shift.theta();
    let fnx = x.shift(n as i64);
    let rec = agreement_radius(&fnx, x, DEFAULT_SCAN_CAP)?;
    if rec == Some(0) {
        return Err(LabError::NotRecurrent { n: n as u64 });
    }
    let orbit = periodize(x, n, shift)?;
    // p = Periodic(x_0..x_{n-1}, 0) evaluated with period n (least period divides n)
    let p = orbit.representative();
    let radii = shadow_radii(x, &p, n, DEFAULT_SCAN_CAP)?;
    let distances = radii
        .iter()
        .map(|r| r.map_or(0.0, |nj| theta.powi(nj as i32)))
        .collect();
    Ok(ClosingCertificate {
        source: x.clone(),
        n,
        orbit,
        recurrence_radius: rec,
        recurrence_distance: rec.map_or(0.0, |r| theta.powi(r as i32)),
        radii,
        distances,
        c1: 1.0,
        theta_close: (1.0 / theta).ln(),
    })
}

/// Lyndon words of length `<= max_len` over `k` symbols (Fredricksen–Kessler–Maiorana).
pub fn lyndon_words(k: usize, max_len: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    if max_len == 0 {
        return out;
    }
    let mut w: Vec<i64> = vec![-1];
    while !w.is_empty() {
        let last = w.len() - 1;
        w[last] += 1;
        out.push(w.iter().map(|&c| c as u8).collect());
        let m = w.len();
        while w.len() < max_len {
            let c = w[w.len() - m];
            w.push(c);
        }
        while w.last().is_some_and(|&c| c == k as i64 - 1) {
            w.pop();
        }
    }
    out
}

/// One representative per periodic orbit of least period `<= max_period`.
pub fn enumerate_periodic_orbits(shift: &Subshift, max_period: usize) -> Result<Vec<PeriodicOrbit>> {
    enumerate_periodic_orbits_with_budget(shift, max_period, DEFAULT_ENUM_BUDGET)
}

pub fn enumerate_periodic_orbits_with_budget(
    shift: &Subshift,
    max_period: usize,
    budget: u128,
) -> Result<Vec<PeriodicOrbit>> {
    let requested = (shift.k() as u128).checked_pow(max_period as u32).unwrap_or(u128::MAX);
    if requested > budget {
        return Err(LabError::BudgetExceeded { requested, budget });
    }
    let mut orbits: Vec<PeriodicOrbit> = lyndon_words(shift.k(), max_period)
        .into_iter()
        .filter(|w| shift.check_cyclic(w).is_ok())
        .map(|w| PeriodicOrbit { word: w.into() })
        .collect();
    orbits.sort_by(|a, b| a.period().cmp(&b.period()).then_with(|| a.word.cmp(&b.word)));
    Ok(orbits)
}

/// All `n <= max_n` with `d(f^n x, x) < rho`.
pub fn recurrence_times(x: &SymbolicPoint, rho: f64, max_n: u64, shift: &Subshift) -> Result<Vec<u64>> {
    if rho <= 0.0 {
        return Err(LabError::InvalidArgument("rho must be positive".into()));
    }
    let needed = required_agreement(rho, shift.theta());
    Ok((1..=max_n).filter(|&n| returns_within(x, n, needed)).collect())
}

/// Smallest `N` with `θ^N < rho`.
pub fn required_agreement(rho: f64, theta: f64) -> u64 {
    let mut n = 0u64;
    while theta.powi(n as i32) >= rho {
        n += 1;
    }
    n
}

/// `x_{n+i} = x_i` for all `|i| < needed`.
pub fn returns_within(x: &SymbolicPoint, n: u64, needed: u64) -> bool {
    let n = n as i64;
    (0..needed as i64).all(|i| x.symbol(n + i) == x.symbol(i) && x.symbol(n - i) == x.symbol(-i))
}

/// First `n` in `from..=max_n` with `d(f^n x, x) < rho`.
pub fn first_recurrence(x: &SymbolicPoint, rho: f64, from: u64, max_n: u64, shift: &Subshift) -> Option<u64> {
    let needed = required_agreement(rho, shift.theta());
    (from.max(1)..=max_n).find(|&n| returns_within(x, n, needed))
}

/// All words of length `len` over `k` symbols in lexicographic order.
pub fn all_words(k: usize, len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                (0..k as u8).map(move |s| {
                    let mut v = w.clone();
                    v.push(s);
                    v
                })
            })
            .collect();
    }
    out
}

/// `max_{|w| <= L} |freq_p(w) - μ[w]|`, a computable proxy for the weak* distance
/// between the periodic measure of `orbit` and `law`.
pub fn weakstar_discrepancy(orbit: &PeriodicOrbit, law: &Law, word_length: usize) -> Result<f64> {
    if word_length == 0 {
        return Err(LabError::InvalidArgument("word length must be at least 1".into()));
    }
    let k = law.k();
    let n = orbit.period();
    let mut worst: f64 = 0.0;
    for len in 1..=word_length {
        // count every cyclic occurrence once
        let mut counts = std::collections::HashMap::<Vec<u8>, usize>::new();
        for s in 0..n {
            let w: Vec<u8> = (0..len).map(|t| orbit.word[(s + t) % n]).collect();
            *counts.entry(w).or_default() += 1;
        }
        for w in all_words(k, len) {
            let freq = counts.get(&w).copied().unwrap_or(0) as f64 / n as f64;
            worst = worst.max((freq - law.cylinder_mass(&w)).abs());
        }
    }
    Ok(worst)
}

/// De Bruijn word of the given order over `k` symbols (concatenated Lyndon words).
pub fn de_bruijn(k: usize, order: usize) -> Vec<u8> {
    lyndon_words(k, order)
        .into_iter()
        .filter(|w| order % w.len() == 0)
        .flatten()
        .collect()
}
