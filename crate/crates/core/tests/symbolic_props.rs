use std::collections::BTreeSet;

use lyaplab::symbolic::{
    agreement_radius, all_words, anosov_close, cylinder_distance, enumerate_periodic_orbits, first_recurrence,
    least_period, periodize, Law, PeriodicOrbit, Subshift, SymbolicPoint,
};
use proptest::prelude::*;

fn word(k: u8, max_len: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0..k, 1..=max_len)
}

/// Periodic or eventually periodic point over `k` symbols.
fn finite_point(k: u8) -> impl Strategy<Value = SymbolicPoint> {
    prop_oneof![
        (word(k, 5), -6i64..6).prop_map(|(w, ph)| SymbolicPoint::periodic(&w, ph).unwrap()),
        (word(k, 3), prop::collection::vec(0..k, 0..6), word(k, 3), -4i64..4)
            .prop_map(|(l, c, r, off)| SymbolicPoint::eventually_periodic(&l, &c, &r, off).unwrap()),
    ]
}

/// Brute-force count of orbits of least period `n`.
fn brute_orbits(k: usize, n: usize) -> usize {
    let mut seen = BTreeSet::new();
    for w in all_words(k, n) {
        if least_period(&w) != n {
            continue;
        }
        let canon = (0..n)
            .map(|r| w[r..].iter().chain(&w[..r]).copied().collect::<Vec<u8>>())
            .min()
            .unwrap();
        seen.insert(canon);
    }
    seen.len()
}

fn mobius(n: usize) -> i64 {
    let (mut m, mut n, mut p) = (1i64, n, 2);
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            m = -m;
        }
        p += 1;
    }
    if n > 1 {
        m = -m;
    }
    m
}

/// Primitive necklaces: `(1/n) Σ_{d|n} μ(d) k^{n/d}`.
fn necklaces(k: usize, n: usize) -> usize {
    let s: i64 = (1..=n)
        .filter(|d| n % d == 0)
        .map(|d| mobius(d) * (k as i64).pow((n / d) as u32))
        .sum();
    (s / n as i64) as usize
}

#[test]
fn orbit_counts_match_brute_force_and_necklaces() {
    for (k, max_n) in [(2usize, 8usize), (3, 6)] {
        let shift = Subshift::full(k, 0.5).unwrap();
        let orbits = enumerate_periodic_orbits(&shift, max_n).unwrap();
        for n in 1..=max_n {
            let got = orbits.iter().filter(|p| p.period() == n).count();
            assert_eq!(got, brute_orbits(k, n), "k={k} n={n}");
            assert_eq!(got, necklaces(k, n), "k={k} n={n}");
        }
    }
}

#[test]
fn golden_mean_orbits_avoid_forbidden_words() {
    let shift = Subshift::golden_mean(0.5).unwrap();
    for p in enumerate_periodic_orbits(&shift, 8).unwrap() {
        assert!(shift.check_cyclic(p.word()).is_ok(), "{p:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ultrametric(x in finite_point(2), y in finite_point(2), z in finite_point(2)) {
        let shift = Subshift::full(2, 0.5).unwrap();
        let dxz = cylinder_distance(&x, &z, &shift).unwrap();
        let dxy = cylinder_distance(&x, &y, &shift).unwrap();
        let dyz = cylinder_distance(&y, &z, &shift).unwrap();
        prop_assert!(dxz <= dxy.max(dyz));
    }

    #[test]
    fn distance_is_symmetric_and_vanishes_only_on_equal(x in finite_point(3), y in finite_point(3)) {
        let shift = Subshift::full(3, 0.25).unwrap();
        let dxy = cylinder_distance(&x, &y, &shift).unwrap();
        prop_assert_eq!(dxy, cylinder_distance(&y, &x, &shift).unwrap());
        let equal = (-60..60).all(|i| x.symbol(i) == y.symbol(i));
        prop_assert_eq!(dxy == 0.0, equal);
    }

    #[test]
    fn expansivity(x in finite_point(2), y in finite_point(2)) {
        let shift = Subshift::full(2, 0.5).unwrap();
        if let Some(n) = agreement_radius(&x, &y, 1 << 12).unwrap() {
            let n = n as i64;
            let hit = (-n..=n).any(|m| cylinder_distance(&x.shift(m), &y.shift(m), &shift).unwrap() == 1.0);
            prop_assert!(hit);
        }
    }

    #[test]
    fn closing_certificates_hold(seed in any::<u64>(), level in 1i32..6) {
        let shift = Subshift::full(2, 0.5).unwrap();
        let x = SymbolicPoint::seeded(seed, Law::fair_coin());
        let n = first_recurrence(&x, 0.5f64.powi(level), 1, 1 << 18, &shift).unwrap();
        let cert = anosov_close(&x, n as usize, &shift).unwrap();
        prop_assert!(cert.holds());
        prop_assert!(cert.holds_exact());
        prop_assert!(cert.distances[0].max(cert.distances[n as usize]) <= cert.recurrence_distance);
    }

    #[test]
    fn closing_commutes_with_shift(seed in any::<u64>(), level in 2i32..6) {
        let shift = Subshift::full(2, 0.5).unwrap();
        let x = SymbolicPoint::seeded(seed, Law::fair_coin());
        let n = first_recurrence(&x, 0.5f64.powi(level), 1, 1 << 18, &shift).unwrap() as usize;
        let p = periodize(&x, n, &shift).unwrap();
        let q = periodize(&x.shift(1), n, &shift).unwrap();
        prop_assert!(p.same_orbit(&q));
    }

    #[test]
    fn orbit_words_are_rotation_invariant(w in word(3, 9), r in 0usize..9) {
        let r = r % w.len();
        let rotated: Vec<u8> = w[r..].iter().chain(&w[..r]).copied().collect();
        let a = PeriodicOrbit::from_word(&w).unwrap();
        let b = PeriodicOrbit::from_word(&rotated).unwrap();
        prop_assert!(a.same_orbit(&b));
        prop_assert_eq!(a.canonical_word(), b.canonical_word());
        prop_assert_eq!(a.period(), least_period(&w));
    }
}
