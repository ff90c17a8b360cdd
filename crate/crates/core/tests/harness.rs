use lyaplab::harness::{
    run, run_with_workers, CocycleSpec, ExperimentConfig, ExperimentKind, ExperimentReport, ExtReal, Table, SCHEMA,
};
use lyaplab::{LabError, Law};

fn nilpotent_pair() -> CocycleSpec {
    CocycleSpec::OneStep {
        matrices: vec![vec![vec![0.0, 1.0], vec![0.0, 0.0]], vec![vec![2.0, 0.0], vec![0.0, 2.0]]],
    }
}

fn small(kind: ExperimentKind) -> ExperimentConfig {
    let cocycle = match kind {
        ExperimentKind::MainTheorem => {
            CocycleSpec::RandomLocallyConstant { window: 0, dim: 2, lo: 0.5, hi: 1.5, seed: 4 }
        }
        ExperimentKind::ExampleBound | ExperimentKind::CorollaryScan => {
            CocycleSpec::PaperExample { a: 3.0, extra_diagonal: vec![] }
        }
        ExperimentKind::Semicontinuity => nilpotent_pair(),
        ExperimentKind::NormProperties => CocycleSpec::diagonal(&[2.0, 0.5]),
    };
    let mut c = ExperimentConfig::new(kind, 42, cocycle);
    c.knobs.max_period = 5;
    c.knobs.levels = 3;
    c.knobs.samples = 8;
    c.knobs.n = 300;
    c.knobs.kingman_samples = 2000;
    c
}

fn finite(v: &ExtReal) -> f64 {
    assert!(v.0.is_finite(), "expected a finite value, got {}", v.to_text());
    v.0
}

#[test]
fn reports_are_deterministic_for_every_kind() {
    for kind in ExperimentKind::ALL {
        let c = small(kind);
        let a = run_with_workers(&c, Some(3)).unwrap();
        let b = run_with_workers(&c, Some(3)).unwrap();
        assert_eq!(a.determinism_hash(), b.determinism_hash(), "{}", kind.name());
        let mut a0 = a.clone();
        let mut b0 = b.clone();
        a0.wall_clock_s = 0.0;
        b0.wall_clock_s = 0.0;
        assert_eq!(a0.to_json(), b0.to_json());
    }
}

#[test]
fn every_verdict_names_a_criterion() {
    for kind in ExperimentKind::ALL {
        let r = run(&small(kind)).unwrap();
        assert!(!r.verdicts.is_empty(), "{}", kind.name());
        for v in &r.verdicts {
            assert!((1..=9).contains(&v.criterion), "{} -> {}", v.name, v.criterion);
        }
    }
}

#[test]
fn emissions_round_trip() {
    for kind in ExperimentKind::ALL {
        let r = run(&small(kind)).unwrap();
        let json = r.to_json();
        assert!(json.contains(SCHEMA));
        let back = ExperimentReport::from_json(&json).unwrap();
        assert_eq!(back.to_json(), json);
        let csv = r.to_csv();
        assert!(csv.starts_with("section,key,field,value\n"));
        assert!(csv.contains("meta,seed,,42"));
        assert_eq!(Table::from_csv(&csv).unwrap().to_csv(), csv);
    }
}

#[test]
fn minus_infinity_is_written_as_a_string() {
    let r = run(&small(ExperimentKind::Semicontinuity)).unwrap();
    let json = r.to_json();
    assert!(json.contains("\"-inf\""));
    assert!(!json.contains("Infinity") && !json.contains("NaN"));
}

#[test]
fn config_echo_spells_out_defaults_and_round_trips() {
    let c = small(ExperimentKind::NormProperties);
    let text = c.to_toml();
    for key in ["delta_fractions", "max_period", "kingman_samples", "theta", "alphabet"] {
        assert!(text.contains(key), "{key} missing from\n{text}");
    }
    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
}

#[test]
fn malformed_configs_carry_diagnostics() {
    let unknown = "kind = \"example_bound\"\nseed = 1\n[cocycle]\ntype = \"paper_example\"\na = 3.0\nbogus = 2\n";
    match ExperimentConfig::from_toml(unknown) {
        Err(LabError::Config(msg)) => assert!(msg.contains("line 3") && msg.contains("bogus"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
    let no_seed = "kind = \"example_bound\"\n[cocycle]\ntype = \"paper_example\"\na = 3.0\n";
    match ExperimentConfig::from_toml(no_seed) {
        Err(LabError::Config(msg)) => assert!(msg.contains("seed"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
    let budget = "kind = \"norm_properties\"\nseed = 1\n[cocycle]\ntype = \"constant\"\nmatrix = [[1.0]]\n[knobs]\nmax_period = 400\n";
    match ExperimentConfig::from_toml(budget) {
        Err(LabError::Config(msg)) => assert!(msg.contains("knobs.max_period"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn constant_cocycle_is_converged_from_the_start() {
    let mut c = ExperimentConfig::new(ExperimentKind::MainTheorem, 5, CocycleSpec::diagonal(&[2.0, 0.5]));
    c.measure = Some(Law::fair_coin());
    c.knobs.levels = 3;
    c.knobs.samples = 4;
    c.knobs.n = 100;
    let r = run(&c).unwrap();
    let erg = &r.ergodic.as_ref().unwrap().values;
    for row in &r.convergence {
        for (g, e) in row.spectrum.iter().zip(erg) {
            assert!((finite(g) - finite(e)).abs() < 1e-12);
        }
    }
    assert!(r.verdict("final_error").unwrap().passed);
}

#[test]
fn constant_block_stays_at_log_two() {
    let mut c = ExperimentConfig::new(
        ExperimentKind::MainTheorem,
        5,
        CocycleSpec::BlockDiagonal {
            blocks: vec![
                CocycleSpec::PaperExample { a: 3.0, extra_diagonal: vec![] },
                CocycleSpec::diagonal(&[2.0]),
            ],
        },
    );
    c.measure = Some(Law::fair_coin());
    c.knobs.levels = 3;
    c.knobs.samples = 8;
    c.knobs.n = 300;
    let r = run(&c).unwrap();
    let ln2 = 2f64.ln();
    for row in &r.convergence {
        assert!(row.spectrum.iter().any(|g| (finite(g) - ln2).abs() < 1e-12), "{:?}", row.spectrum);
    }
    let erg = &r.ergodic.as_ref().unwrap().values;
    assert!(erg.iter().any(|g| (finite(g) - ln2).abs() < 1e-9), "{erg:?}");
}

#[test]
fn example_bound_and_anchor() {
    let r = run(&small(ExperimentKind::ExampleBound)).unwrap();
    assert!(r.all_pass(), "{:?}", r.verdicts);
    let bound = 1.5f64.ln();
    for o in &r.orbits {
        assert!(finite(&o.spectrum[0]) >= bound - 1e-9, "{}", o.word);
    }
}

#[test]
fn semicontinuity_reference_orbit_is_finite() {
    let r = run(&small(ExperimentKind::Semicontinuity)).unwrap();
    let ones = r.orbits.iter().find(|o| o.word == "1").unwrap();
    assert!((finite(&ones.spectrum[0]) - 2f64.ln()).abs() < 1e-12);
    assert_eq!(ones.discrepancy, Some(0.5));
    for o in r.orbits.iter().filter(|o| o.word != "1") {
        assert_eq!(o.spectrum[0].0, f64::NEG_INFINITY, "{}", o.word);
    }
}

#[test]
fn gate_violations_are_reported() {
    let mut c = small(ExperimentKind::NormProperties);
    c.knobs.delta = Some(1.0);
    let r = run(&c).unwrap();
    let v = r.verdict("norms_constructed").unwrap();
    assert!(!v.passed);
    assert!(r.witnesses.iter().any(|w| w.contains("delta")), "{:?}", r.witnesses);
}

#[test]
fn corollary_scan_cases() {
    let r = run(&small(ExperimentKind::CorollaryScan)).unwrap();
    assert!(r.witnesses.iter().any(|w| w.contains("anchor")), "{:?}", r.witnesses);
    assert!(r.all_pass());

    let mut singular = small(ExperimentKind::CorollaryScan);
    singular.cocycle = CocycleSpec::diagonal(&[2.0, 0.0]);
    let r = run(&singular).unwrap();
    assert!(r.orbits.iter().all(|o| o.spectrum[1].0 == f64::NEG_INFINITY));

    let mut invertible = small(ExperimentKind::CorollaryScan);
    invertible.cocycle = CocycleSpec::RandomLocallyConstant { window: 1, dim: 2, lo: 0.5, hi: 1.5, seed: 9 };
    let r = run(&invertible).unwrap();
    assert!(r.witnesses.is_empty(), "{:?}", r.witnesses);
    assert!(r.all_pass());
}
