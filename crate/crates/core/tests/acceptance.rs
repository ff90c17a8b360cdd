//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p lyaplab-core --test acceptance`; the lines go to stderr.
//! Criteria listed in `KNOWN_FAILURES` are reported but do not fail the build.

use std::io::Write;
use std::time::{Duration, Instant};

use lyaplab::exterior::compound;
use lyaplab::harness::{run, run_with_workers, CocycleSpec, ExperimentConfig, ExperimentKind, ExperimentReport};
use lyaplab::linalg::{op_norm, Mat};
use lyaplab::spectrum::{finite_time_spectrum, full_spectrum_via_exterior, periodic_spectrum};
use lyaplab::symbolic::{
    anosov_close, enumerate_periodic_orbits, first_recurrence, Law, Subshift, SymbolicPoint,
};
use lyaplab::MatrixCocycle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria whose measured outcome is a documented failure (see README).
const KNOWN_FAILURES: &[u8] = &[3, 5];

struct Outcome {
    criterion: u8,
    passed: bool,
    detail: String,
    elapsed: Duration,
    limit: Option<Duration>,
}

impl Outcome {
    fn line(&self) -> String {
        let in_time = self.limit.is_none_or(|l| self.elapsed <= l);
        let verdict = if self.passed && in_time { "PASS" } else { "FAIL" };
        let limit = self.limit.map_or(String::new(), |l| format!(" (limit {:.0}s)", l.as_secs_f64()));
        format!(
            "criterion {}: {verdict}  {}  [{:.2}s{limit}]",
            self.criterion,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }

    fn ok(&self) -> bool {
        self.passed && self.limit.is_none_or(|l| self.elapsed <= l)
    }
}

/// Written to the process stderr directly so the lines survive libtest's capture.
fn report(line: &str) {
    let _ = writeln!(std::io::stderr().lock(), "{line}");
}

fn timed(criterion: u8, limit: Option<u64>, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (passed, detail) = f();
    let outcome = Outcome {
        criterion,
        passed,
        detail,
        elapsed: start.elapsed(),
        limit: limit.map(Duration::from_secs),
    };
    report(&outcome.line());
    outcome
}

fn verdicts_for(report: &ExperimentReport, criterion: u8) -> (bool, String) {
    let vs: Vec<_> = report.verdicts.iter().filter(|v| v.criterion == criterion).collect();
    assert!(!vs.is_empty(), "no verdict for criterion {criterion}");
    let passed = vs.iter().all(|v| v.passed);
    let detail = vs
        .iter()
        .map(|v| format!("{}={} margin {}", v.name, if v.passed { "ok" } else { "FAILED" }, v.margin.to_text()))
        .collect::<Vec<_>>()
        .join("; ");
    (passed, detail)
}

fn example_config(max_period: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(
        ExperimentKind::ExampleBound,
        7,
        CocycleSpec::PaperExample { a: 3.0, extra_diagonal: vec![] },
    );
    c.knobs.max_period = max_period;
    c.knobs.family_max = 8;
    c
}

fn criterion_1() -> (bool, String) {
    let report = run(&example_config(4)).expect("example run");
    verdicts_for(&report, 1)
}

fn criterion_2() -> (bool, String) {
    let report = run(&example_config(12)).expect("example run");
    let (passed, detail) = verdicts_for(&report, 2);
    (passed, format!("{} orbits; {detail}", report.orbits.len()))
}

fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> Mat {
    Mat::from_fn(d, d, |_, _| rng.random_range(-1.0..=1.0))
}

/// Random cocycles with entries in [-1, 1]; every other pair gets a singular symbol
/// so that `−∞` patterns are exercised.
fn oracle_cocycle(i: u64) -> MatrixCocycle {
    let d = if i % 2 == 0 { 2 } else { 3 };
    let window = if i % 3 == 2 { 1 } else { 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(0x0ac1e + i);
    let words = 1usize << (2 * window + 1);
    let mut mats: Vec<Mat> = (0..words).map(|_| random_matrix(&mut rng, d)).collect();
    if i % 4 >= 2 {
        for j in 0..d {
            mats[0][(d - 1, j)] = 0.0;
        }
    }
    let entries = lyaplab::symbolic::all_words(2, 2 * window + 1).into_iter().zip(mats);
    MatrixCocycle::locally_constant(2, window, entries).expect("cocycle")
}

fn criterion_3() -> (bool, String) {
    const TOL: f64 = 5e-3;
    let shift = Subshift::full(2, 0.5).unwrap();
    let orbits = enumerate_periodic_orbits(&shift, 6).unwrap();
    let (mut comparisons, mut over, mut pattern_mismatch) = (0usize, 0usize, 0usize);
    let (mut worst_exterior, mut worst_finite) = (0.0f64, 0.0f64);
    for i in 0..240u64 {
        let a = oracle_cocycle(i);
        for p in &orbits {
            let per = periodic_spectrum(&a, p).unwrap();
            let ext = full_spectrum_via_exterior(&a, p).unwrap();
            let ft = finite_time_spectrum(&a, &p.representative(), 200 * p.period()).unwrap();
            for k in 0..a.dim() {
                let (x, y, z) = (per.values()[k], ext.values()[k], ft[k]);
                let infs = [x, y, z].map(|v| v == f64::NEG_INFINITY);
                if infs[0] != infs[1] || infs[0] != infs[2] {
                    pattern_mismatch += 1;
                    continue;
                }
                if infs[0] {
                    continue;
                }
                comparisons += 1;
                worst_exterior = worst_exterior.max((x - y).abs());
                worst_finite = worst_finite.max((x - z).abs());
                if (x - y).abs() > TOL || (x - z).abs() > TOL {
                    over += 1;
                }
            }
        }
    }
    let passed = over == 0 && pattern_mismatch == 0;
    let detail = format!(
        "240 cocycles x {} orbits: {comparisons} finite comparisons, {over} above {TOL:e}, \
         {pattern_mismatch} -inf pattern mismatches; worst periodic-vs-exterior {worst_exterior:.2e}, \
         worst periodic-vs-finite-time {worst_finite:.2e}",
        orbits.len()
    );
    (passed, detail)
}

fn criterion_4() -> (bool, String) {
    let mut c = ExperimentConfig::new(
        ExperimentKind::MainTheorem,
        1,
        CocycleSpec::RandomLocallyConstant { window: 0, dim: 2, lo: 0.5, hi: 1.5, seed: 1 },
    );
    c.measure = Some(Law::fair_coin());
    c.knobs.levels = 5;
    let report = run(&c).expect("main theorem run");
    let last = report.convergence.last().expect("convergence rows");
    let (passed, detail) = verdicts_for(&report, 4);
    (passed, format!("final period {}; {detail}", last.return_time))
}

fn criterion_5() -> (bool, String) {
    let specs = vec![
        ("diag(2,1/2)", CocycleSpec::diagonal(&[2.0, 0.5])),
        ("diag(2,0)", CocycleSpec::diagonal(&[2.0, 0.0])),
        ("identity", CocycleSpec::diagonal(&[1.0, 1.0])),
        (
            "diag(3,1)|rot90",
            CocycleSpec::OneStep {
                matrices: vec![vec![vec![3.0, 0.0], vec![0.0, 1.0]], vec![vec![0.0, -1.0], vec![1.0, 0.0]]],
            },
        ),
        ("random 2x2", CocycleSpec::RandomLocallyConstant { window: 0, dim: 2, lo: -1.0, hi: 1.0, seed: 5 }),
        ("random 3x3", CocycleSpec::RandomLocallyConstant { window: 0, dim: 3, lo: -1.0, hi: 1.0, seed: 5 }),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (label, spec) in specs {
        let mut c = ExperimentConfig::new(ExperimentKind::NormProperties, 11, spec);
        c.knobs.max_period = 8;
        let report = run(&c).expect("norm run");
        let failed: Vec<String> = report
            .verdicts
            .iter()
            .filter(|v| v.criterion == 5 && !v.passed)
            .map(|v| format!("{} (margin {})", v.name, v.margin.to_text()))
            .collect();
        passed &= failed.is_empty();
        let scanned = report.orbits.len();
        if failed.is_empty() {
            parts.push(format!("{label}: ok over {scanned} orbit rows"));
        } else {
            parts.push(format!("{label}: {} over {scanned} orbit rows", failed.join(", ")));
        }
    }
    (passed, parts.join("; "))
}

fn criterion_6() -> (bool, String) {
    let c = ExperimentConfig::new(
        ExperimentKind::Semicontinuity,
        7,
        CocycleSpec::OneStep {
            matrices: vec![vec![vec![0.0, 1.0], vec![0.0, 0.0]], vec![vec![2.0, 0.0], vec![0.0, 2.0]]],
        },
    );
    let report = run(&c).expect("semicontinuity run");
    verdicts_for(&report, 6)
}

fn criterion_7() -> (bool, String) {
    let shift = Subshift::full(2, 0.5).unwrap();
    let rho = 0.5f64.powi(3);
    let (mut certified, mut worst) = (0usize, 0.0f64);
    for seed in 0..1000u64 {
        let x = SymbolicPoint::seeded(seed, Law::fair_coin());
        let n = first_recurrence(&x, rho, 1, 1 << 16, &shift).expect("recurrence");
        let cert = anosov_close(&x, n as usize, &shift).expect("closing");
        worst = worst.max(cert.worst_ratio());
        if cert.holds() && cert.holds_exact() {
            certified += 1;
        }
    }
    let mut periodic_zero = 0usize;
    let orbits = enumerate_periodic_orbits(&shift, 8).unwrap();
    for p in &orbits {
        let x = p.representative();
        let cert = anosov_close(&x, p.period(), &shift).expect("closing");
        if cert.distances.iter().all(|d| *d == 0.0) && cert.orbit.same_orbit(p) {
            periodic_zero += 1;
        }
    }
    let passed = certified == 1000 && periodic_zero == orbits.len();
    let detail = format!(
        "{certified}/1000 certificates hold (worst ratio {worst:.3}); \
         {periodic_zero}/{} periodic inputs shadowed at distance 0",
        orbits.len()
    );
    (passed, detail)
}

/// Leibniz expansion, independent of the LU path used by the library.
fn leibniz_det(m: &Mat) -> f64 {
    fn perms(k: usize) -> Vec<(Vec<usize>, f64)> {
        if k == 1 {
            return vec![(vec![0], 1.0)];
        }
        let mut out = Vec::new();
        for (p, s) in perms(k - 1) {
            for pos in 0..k {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                let sign = if (k - 1 - pos) % 2 == 0 { s } else { -s };
                out.push((q, sign));
            }
        }
        out
    }
    let d = m.nrows();
    perms(d)
        .into_iter()
        .map(|(p, s)| s * (0..d).map(|i| m[(i, p[i])]).product::<f64>())
        .sum()
}

fn criterion_8() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_mult, mut worst_det) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let a = random_matrix(&mut rng, 4);
        let b = random_matrix(&mut rng, 4);
        let (ca, cb) = (compound(&a, 2), compound(&b, 2));
        let scale = (op_norm(&ca) * op_norm(&cb)).max(f64::MIN_POSITIVE);
        let diff = &compound(&(&a * &b), 2) - &ca * &cb;
        worst_mult = worst_mult.max(op_norm(&diff) / scale);
        let oracle = leibniz_det(&a);
        let top = compound(&a, 4)[(0, 0)];
        worst_det = worst_det.max((top - oracle).abs() / oracle.abs());
    }
    let passed = worst_mult <= 1e-10 && worst_det <= 1e-12;
    (
        passed,
        format!("200 pairs: worst relative multiplicativity defect {worst_mult:.2e}, worst det defect {worst_det:.2e}"),
    )
}

fn criterion_9() -> (bool, String) {
    let mut main = ExperimentConfig::new(
        ExperimentKind::MainTheorem,
        3,
        CocycleSpec::RandomLocallyConstant { window: 0, dim: 2, lo: 0.5, hi: 1.5, seed: 3 },
    );
    main.measure = Some(Law::fair_coin());
    main.knobs.levels = 4;
    main.knobs.samples = 16;
    main.knobs.n = 500;
    let mut norms = ExperimentConfig::new(ExperimentKind::NormProperties, 3, CocycleSpec::diagonal(&[2.0, 0.5]));
    norms.knobs.max_period = 5;
    let semi = ExperimentConfig::new(
        ExperimentKind::Semicontinuity,
        3,
        CocycleSpec::OneStep {
            matrices: vec![vec![vec![0.0, 1.0], vec![0.0, 0.0]], vec![vec![2.0, 0.0], vec![0.0, 2.0]]],
        },
    );
    let mut scan = ExperimentConfig::new(
        ExperimentKind::CorollaryScan,
        3,
        CocycleSpec::PaperExample { a: 3.0, extra_diagonal: vec![] },
    );
    scan.knobs.max_period = 6;
    let configs = [main, example_config(6), semi, norms, scan];
    let mut same = 0usize;
    let mut across_workers = 0usize;
    for c in &configs {
        let h1 = run_with_workers(c, Some(2)).unwrap().determinism_hash();
        let h2 = run_with_workers(c, Some(2)).unwrap().determinism_hash();
        let h4 = run_with_workers(c, Some(4)).unwrap().determinism_hash();
        same += usize::from(h1 == h2);
        across_workers += usize::from(h1 == h4);
    }
    let passed = same == configs.len();
    (
        passed,
        format!(
            "{same}/{} kinds hash-identical on repeat with 2 workers; {across_workers}/{} identical between 2 and 4 workers",
            configs.len(),
            configs.len()
        ),
    )
}

#[test]
fn acceptance() {
    let outcomes = vec![
        timed(1, Some(1), criterion_1),
        timed(2, Some(10), criterion_2),
        timed(3, Some(60), criterion_3),
        timed(4, Some(120), criterion_4),
        timed(5, Some(60), criterion_5),
        timed(6, Some(30), criterion_6),
        timed(7, Some(10), criterion_7),
        timed(8, Some(5), criterion_8),
        timed(9, None, criterion_9),
    ];
    let unexpected: Vec<u8> = outcomes
        .iter()
        .filter(|o| !o.ok() && !KNOWN_FAILURES.contains(&o.criterion))
        .map(|o| o.criterion)
        .collect();
    let fixed: Vec<u8> = outcomes
        .iter()
        .filter(|o| o.ok() && KNOWN_FAILURES.contains(&o.criterion))
        .map(|o| o.criterion)
        .collect();
    if !fixed.is_empty() {
        report(&format!("note: criteria {fixed:?} now pass; remove them from KNOWN_FAILURES"));
    }
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}
