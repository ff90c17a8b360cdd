use lyaplab::linalg::{op_norm, Vector};
use lyaplab::lyapunov_norm::{delta_gate, splitting_at_periodic, verify_norm_properties, LyapunovNorm};
use lyaplab::symbolic::{enumerate_periodic_orbits, PeriodicOrbit, Subshift};
use lyaplab::MatrixCocycle;
use proptest::prelude::*;

fn orbit() -> impl Strategy<Value = PeriodicOrbit> {
    prop::collection::vec(0u8..2, 1..=6).prop_map(|w| PeriodicOrbit::from_word(&w).unwrap())
}

fn cocycle(d: usize) -> impl Strategy<Value = MatrixCocycle> {
    any::<u64>().prop_map(move |s| MatrixCocycle::random_locally_constant(2, 0, d, -1.0, 1.0, s).unwrap())
}

/// Euclidean norm that survives entries near the underflow threshold.
fn scaled_norm(v: &Vector) -> f64 {
    let s = v.amax();
    if s == 0.0 {
        0.0
    } else {
        s * (v / s).norm()
    }
}

fn rel_diff(a: &lyaplab::Mat, b: &lyaplab::Mat) -> f64 {
    op_norm(&(a - b)) / op_norm(a).max(op_norm(b)).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn restricted_powers_compose(a in cocycle(3), p in orbit(), m in -12i64..12, n in -12i64..12) {
        let Ok(split) = splitting_at_periodic(&a, &p) else { return Ok(()) };
        let np = p.period() as i64;
        for (b, blk) in split.blocks.iter().enumerate() {
            if blk.is_infinite() && (m < 0 || n < 0) {
                continue;
            }
            for phase in 0..p.period() {
                let first = split.restricted_power(b, phase, m).unwrap();
                let later = (phase as i64 + m).rem_euclid(np) as usize;
                let second = split.restricted_power(b, later, n).unwrap();
                let whole = split.restricted_power(b, phase, m + n).unwrap();
                prop_assert!(rel_diff(&whole, &(&second * &first)) <= 1e-12);
            }
        }
    }

    /// |(1/n) log‖Aⁿ_i u‖ − λ_i| ≤ log C / |n| + 1e-9, with C the measured growth of the
    /// normalized restricted period product over the tested range.
    #[test]
    fn block_growth_rates(a in cocycle(2), p in orbit(), coords in prop::collection::vec(-1.0f64..1.0, 2)) {
        let Ok(split) = splitting_at_periodic(&a, &p) else { return Ok(()) };
        let np = p.period() as i64;
        for (b, blk) in split.blocks.iter().enumerate() {
            if blk.is_infinite() {
                continue;
            }
            let c = Vector::from_iterator(blk.dim, coords.iter().take(blk.dim).copied());
            if c.norm() < 1e-3 {
                continue;
            }
            let ks = [10i64, 20, 40];
            let mut cond: f64 = 1.0;
            for k in 1..=40 {
                for s in [k, -k] {
                    let q = split.restricted_power(b, 0, s * np).unwrap() * (-(blk.exponent) * (s * np) as f64).exp();
                    cond = cond.max(op_norm(&q));
                }
            }
            prop_assume!(cond <= 1e6);
            for k in ks {
                for n in [k * np, -k * np] {
                    let v = split.restricted_power(b, 0, n).unwrap() * &c;
                    let rate = (scaled_norm(&v) / c.norm()).ln() / n as f64;
                    prop_assert!((rate - blk.exponent).abs() <= cond.ln() / n.abs() as f64 + 1e-9,
                        "block {} n {} rate {} exponent {}", b, n, rate, blk.exponent);
                }
            }
        }
    }

    #[test]
    fn sum_form_dominates_inner_form(a in cocycle(2), p in orbit(), u in prop::collection::vec(-1.0f64..1.0, 2)) {
        let Ok(split) = splitting_at_periodic(&a, &p) else { return Ok(()) };
        let gate = delta_gate(&split.spectrum).min(0.2);
        let Ok(norm) = LyapunovNorm::new(split, 0.5 * gate) else { return Ok(()) };
        let u = Vector::from_vec(u);
        for phase in 0..p.period() {
            let inner = norm.norm(phase, &u);
            let sum = norm.norm_sum_form(phase, &u).unwrap();
            prop_assert!(inner <= sum * (1.0 + 1e-10) + 1e-12, "inner {} sum {}", inner, sum);
        }
    }
}

#[test]
fn two_dimensional_property_suite() {
    // items i–iii, k growth and the sum form on random 2×2 cocycles
    let shift = Subshift::full(2, 0.5).unwrap();
    let orbits = enumerate_periodic_orbits(&shift, 6).unwrap();
    let mut checked = 0;
    for seed in 0..12u64 {
        let a = MatrixCocycle::random_locally_constant(2, 0, 2, -1.0, 1.0, seed).unwrap();
        for p in &orbits {
            let Ok(split) = splitting_at_periodic(&a, p) else { continue };
            let gate = delta_gate(&split.spectrum);
            for f in [0.25, 0.5, 0.75] {
                let delta = f * gate.min(0.2);
                let Ok(norm) = LyapunovNorm::new(split.clone(), delta) else { continue };
                let report = verify_norm_properties(&norm, 4, seed);
                for prop in &report.properties {
                    if prop.informational {
                        continue;
                    }
                    assert!(prop.passed, "{} failed on {:?} delta {delta}: {}", prop.name, p, prop.worst_margin);
                }
                assert!(report.tail_bound < 1e-10);
                checked += 1;
            }
        }
    }
    assert!(checked > 200, "only {checked} reports");
}

#[test]
fn splittings_are_invariant() {
    let shift = Subshift::full(2, 0.5).unwrap();
    let orbits = enumerate_periodic_orbits(&shift, 8).unwrap();
    for (d, seed) in [(2usize, 1u64), (2, 2), (3, 1), (3, 2)] {
        let a = MatrixCocycle::random_locally_constant(2, 0, d, -1.0, 1.0, seed).unwrap();
        for p in &orbits {
            let Ok(split) = splitting_at_periodic(&a, p) else { continue };
            assert!(split.invariance_residual < 1e-8, "{p:?}: {}", split.invariance_residual);
        }
    }
}
