use lyaplab::exterior::{exponent_sums, induced_cocycle};
use lyaplab::spectrum::{
    full_spectrum_via_exterior, periodic_spectrum, periodic_spectrum_at, phi_samples, truncated_mean,
};
use lyaplab::symbolic::{enumerate_periodic_orbits, Law, PeriodicOrbit, Subshift, SymbolicPoint};
use lyaplab::{LyapunovSpectrum, MatrixCocycle};
use proptest::prelude::*;

/// Absolute accuracy of an exponent read off Schur eigenvalues of a period product:
/// the eigenvalue error is ε·‖P‖, which costs ε·e^{n(γ₁−γᵢ)}/n in the exponent.
fn schur_tol(base: f64, s: &LyapunovSpectrum, i: usize, period: usize) -> f64 {
    let (top, v) = (s.top(), s.values()[i]);
    if !top.is_finite() || !v.is_finite() {
        return base;
    }
    let n = period as f64;
    base + 1e3 * f64::EPSILON * ((n * (top - v)).min(700.0)).exp() / n
}

fn assert_spectra_agree(a: &[f64], b: &[f64], tol: impl Fn(usize) -> f64) -> Result<(), TestCaseError> {
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        prop_assert_eq!(*x == f64::NEG_INFINITY, *y == f64::NEG_INFINITY, "pattern {:?} vs {:?}", a, b);
        if x.is_finite() {
            prop_assert!((x - y).abs() <= tol(i), "index {} {:?} vs {:?}", i, a, b);
        }
    }
    Ok(())
}

/// Random locally constant cocycle, optionally with a singular symbol.
fn cocycle() -> impl Strategy<Value = MatrixCocycle> {
    (0usize..2, 2usize..4, any::<u64>(), any::<bool>()).prop_map(|(w, d, s, singular)| {
        let a = MatrixCocycle::random_locally_constant(2, w, d, -1.0, 1.0, s).unwrap();
        if !singular {
            return a;
        }
        let zero_row = MatrixCocycle::constant_diagonal(&{
            let mut v = vec![1.0; d];
            v[d - 1] = 0.0;
            v
        })
        .unwrap();
        // the first symbol's matrix loses its last row
        let words = lyaplab::symbolic::all_words(2, 2 * w + 1);
        let entries: Vec<_> = words
            .into_iter()
            .map(|word| {
                let x = SymbolicPoint::periodic(&word, -(w as i64)).unwrap();
                let m = a.evaluate(&x).unwrap();
                let m = if word[w] == 0 { zero_row.evaluate(&x).unwrap() * m } else { m };
                (word, m)
            })
            .collect();
        MatrixCocycle::locally_constant(2, w, entries).unwrap()
    })
}

fn orbits(max_period: usize) -> Vec<PeriodicOrbit> {
    enumerate_periodic_orbits(&Subshift::full(2, 0.5).unwrap(), max_period).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn periodic_and_exterior_oracles_agree(a in cocycle()) {
        for p in orbits(8) {
            let per = periodic_spectrum(&a, &p).unwrap();
            let ext = full_spectrum_via_exterior(&a, &p).unwrap();
            assert_spectra_agree(per.values(), ext.values(), |i| schur_tol(1e-9, &per, i, p.period()))?;
        }
    }

    #[test]
    fn exterior_top_is_sum_of_exponents(a in cocycle()) {
        for p in orbits(6) {
            let per = periodic_spectrum(&a, &p).unwrap();
            for i in 2..=a.dim() {
                let top = periodic_spectrum(&induced_cocycle(&a, i).unwrap(), &p).unwrap().top();
                let sum = exponent_sums(&per, i);
                prop_assert_eq!(top == f64::NEG_INFINITY, sum == f64::NEG_INFINITY);
                if sum.is_finite() {
                    prop_assert!((top - sum).abs() <= schur_tol(1e-9, &per, i - 1, p.period()));
                }
            }
        }
    }

    #[test]
    fn spectrum_does_not_depend_on_the_phase(a in cocycle()) {
        for p in orbits(6) {
            let s0 = periodic_spectrum_at(&a, &p, 0).unwrap();
            for phase in 1..p.period() {
                let s = periodic_spectrum_at(&a, &p, phase).unwrap();
                assert_spectra_agree(s0.values(), s.values(), |i| schur_tol(1e-12, &s0, i, p.period()))?;
            }
        }
    }

    #[test]
    fn scaling_shifts_finite_exponents(a in cocycle(), c in 0.1f64..10.0) {
        let scaled = a.scaled(c);
        for p in orbits(5) {
            let s = periodic_spectrum(&a, &p).unwrap();
            let t = periodic_spectrum(&scaled, &p).unwrap();
            let shifted: Vec<f64> = s.values().iter().map(|v| v + c.ln()).collect();
            assert_spectra_agree(&shifted, t.values(), |i| schur_tol(1e-9, &s, i, p.period()))?;
        }
    }

    #[test]
    fn subadditivity(a in cocycle(), seed in any::<u64>(), m in 1usize..=50, n in 1usize..=50) {
        let x = SymbolicPoint::seeded(seed, Law::fair_coin());
        let whole = a.product_scaled(&x, m + n).unwrap().log_norm();
        let head = a.product_scaled(&x, m).unwrap().log_norm();
        let tail = a.product_scaled(&x.shift(m as i64), n).unwrap().log_norm();
        prop_assert!(whole <= head + tail + 1e-10 || whole == f64::NEG_INFINITY);
    }

    #[test]
    fn truncation_is_monotone(a in cocycle(), seed in any::<u64>(), n in 1usize..30) {
        let shift = Subshift::full(2, 0.5).unwrap();
        let phis = phi_samples(&a, &shift, &Law::fair_coin(), n, 16, seed).unwrap();
        let means: Vec<f64> = (1..20).map(|m| truncated_mean(&phis, m as f64)).collect();
        prop_assert!(means.windows(2).all(|w| w[1] <= w[0]));
    }
}
