use std::path::Path;

use bernlab::initial::InitialData;
use bernlab::scenario::{parse_str, CutoffConfig, ManifoldConfig, Scenario, SuiteKind, DEFAULT_SEED};
use bernlab::LabError;
use bernlab_core::constants::TheoremId;
use bernlab_core::dynamics::{Flow, Stepper};
use bernlab_core::manifold::{build_manifold, ManifoldSpec, Shape, WeightKind};

fn parse(text: &str) -> Result<Scenario, LabError> {
    parse_str(text, Path::new("inline.toml"))
}

fn invalid_message(text: &str) -> String {
    match parse(text) {
        Err(LabError::Invalid(m)) => m,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

#[test]
fn minimal_file_takes_documented_defaults() {
    let s = parse("name = \"t1\"\ntheorem = \"T1\"\n").unwrap();
    assert_eq!(s.theorem, Some(TheoremId::T1));
    assert_eq!(s.flow, Flow::None);
    assert_eq!(s.seed, DEFAULT_SEED);
    match s.manifold {
        ManifoldConfig::Torus { resolution, side, synthetic_dimension } => {
            assert_eq!(resolution, [128, 128]);
            assert_eq!(side, [std::f64::consts::TAU; 2]);
            assert_eq!(synthetic_dimension, 4.0);
        }
        other => panic!("default manifold {other:?}"),
    }
    assert_eq!(s.system.stepper, Stepper::ExplicitRk4);
    assert_eq!(s.system.snapshots, 64);
    assert_eq!(s.tolerances.slack, 0.05);
    assert_eq!(s.cutoff, CutoffConfig::Whole { power: 3 });
    assert_eq!(s.weight, WeightKind::Zero);
}

#[test]
fn resolved_scenario_round_trips() {
    let text = r#"
name = "t4"
theorem = "T4"
flow = "local-ricci"
[manifold]
kind = "sphere"
[cutoff]
region = "ball"
center = [1.0, 2.0]
radius = 0.5
[system]
kind = "exponential"
a = -1.0
b = -2.0
[initial]
u = { kind = "band-limited", seed = 4 }
"#;
    let s = parse(text).unwrap();
    let echoed = s.to_toml();
    assert_eq!(parse(&echoed).unwrap(), s);
    assert!(echoed.contains("resolution = [32, 64]"));
    assert!(echoed.contains("slack = 0.05"));
}

#[test]
fn evolving_theorems_need_the_flow() {
    let m = invalid_message("name = \"x\"\ntheorem = \"T3\"\nflow = \"none\"\n");
    assert!(m.contains("T3 requires local Ricci flow"), "{m}");
    let m = invalid_message("name = \"x\"\ntheorem = \"T1\"\nflow = \"local-ricci\"\n");
    assert!(m.contains("static"), "{m}");
}

#[test]
fn exponential_theorems_need_negative_coefficients() {
    let m = invalid_message("name = \"x\"\ntheorem = \"T2\"\n[system]\nkind = \"exponential\"\na = 1.0\nb = -1.0\n");
    assert!(m.contains("a < 0 and b < 0"), "{m}");
    let m = invalid_message("name = \"x\"\ntheorem = \"T2\"\n");
    assert!(m.contains("exponential system"), "{m}");
    let m = invalid_message("name = \"x\"\ntheorem = \"T1\"\n[system]\nkind = \"exponential\"\na = -1.0\nb = -1.0\n");
    assert!(m.contains("linear system"), "{m}");
    let m = invalid_message("name = \"x\"\ntheorem = \"T2\"\n[system]\nkind = \"exponential\"\na = -1.0\n");
    assert!(m.contains("both coefficients"), "{m}");
}

#[test]
fn unknown_keys_are_fatal() {
    for text in [
        "name = \"x\"\ntheorem = \"T1\"\nslak = 0.1\n",
        "name = \"x\"\ntheorem = \"T1\"\n[tolerances]\nslak = 0.1\n",
        "name = \"x\"\ntheorem = \"T1\"\n[manifold]\nkind = \"torus\"\nresolutoin = [8, 8]\n",
        "name = \"x\"\ntheorem = \"T1\"\n[weight]\nkind = \"sine\"\naxis = 0\namplitude = 1.0\nwavenumber = 1.0\nphase = 0.0\n",
        "name = \"x\"\ntheorem = \"T1\"\n[cutoff]\nregion = \"ball\"\ncenter = [0.0, 0.0]\nradius = 1.0\nwidth = 2.0\n",
        "name = \"x\"\ntheorem = \"T1\"\n[initial]\nu = { kind = \"constant\", value = 1.0, scale = 2.0 }\n",
    ] {
        assert!(matches!(parse(text), Err(LabError::Parse { .. })), "{text}");
    }
}

#[test]
fn theorem_and_suite_are_exclusive() {
    assert!(invalid_message("name = \"x\"\n").contains("required"));
    assert!(invalid_message("name = \"x\"\ntheorem = \"T1\"\nsuite = \"identities\"\n").contains("not both"));
    let s = parse("name = \"x\"\nsuite = \"inequalities\"\n").unwrap();
    assert_eq!(s.suite, Some(SuiteKind::Inequalities));
}

#[test]
fn other_validation_rules() {
    assert!(invalid_message("name = \"a b\"\ntheorem = \"T1\"\n").contains("name"));
    assert!(invalid_message("name = \"x\"\ntheorem = \"T1\"\n[study]\nlevels = [32, 48, 64]\n").contains("dyadic"));
    assert!(invalid_message("name = \"x\"\ntheorem = \"T1\"\n[tolerances]\nslack = -0.1\n").contains("slack"));
    let graph = "name = \"x\"\ntheorem = \"T3\"\nflow = \"local-ricci\"\n[manifold]\nkind = \"graph\"\ntopology = { graph = \"cycle\", nodes = 8 }\n";
    assert!(invalid_message(graph).contains("grid manifold"));
}

#[test]
fn suite_scenarios_are_valid() {
    for kind in [SuiteKind::Identities, SuiteKind::Inequalities, SuiteKind::Convergence] {
        let s = Scenario::for_suite(kind, 9);
        s.validate().unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!(s.name, format!("suite-{kind}"));
    }
}

#[test]
fn output_directory_env_override() {
    let s = parse("name = \"x\"\ntheorem = \"T1\"\noutput_dir = \"from-file\"\n").unwrap();
    std::env::remove_var(bernlab::OUTPUT_DIR_ENV);
    assert_eq!(s.resolve_output_dir(), Path::new("from-file"));
    std::env::set_var(bernlab::OUTPUT_DIR_ENV, "/tmp/override");
    assert_eq!(s.resolve_output_dir(), Path::new("/tmp/override"));
    std::env::remove_var(bernlab::OUTPUT_DIR_ENV);
}

fn torus(n: usize) -> bernlab_core::manifold::DiscreteManifold {
    build_manifold(&ManifoldSpec {
        shape: Shape::Torus { side: [std::f64::consts::TAU; 2], resolution: [n, n] },
        synthetic_dimension: 4.0,
        weight: WeightKind::Zero,
    })
    .unwrap()
}

#[test]
fn initial_data_catalog() {
    let man = torus(16);
    let c = InitialData::Cosine { offset: 1.0, amplitude: 0.5, axis: 0, wavenumber: 1.0 }.sample(&man, 0).unwrap();
    assert_eq!(c[0], 1.5);
    assert!(c.iter().all(|&x| (0.5..=1.5).contains(&x)));
    let s = InitialData::Sine { offset: 0.0, amplitude: 1.0, axis: 1, wavenumber: 2.0 }.sample(&man, 0).unwrap();
    assert_eq!(s[0], 0.0);
    assert!(matches!(InitialData::Height { offset: 0.0, amplitude: 1.0 }.sample(&man, 0), Err(LabError::Invalid(_))));
    assert!(matches!(
        InitialData::Cosine { offset: 0.0, amplitude: 1.0, axis: 2, wavenumber: 1.0 }.sample(&man, 0),
        Err(LabError::Invalid(_))
    ));
    let band = |seed| InitialData::BandLimited { offset: 0.0, amplitude: 1.0, modes: 5, max_wavenumber: 3, seed }.sample(&man, 7).unwrap();
    assert_eq!(band(None), band(Some(7)));
    assert_ne!(band(Some(8)), band(Some(7)));
}

#[test]
fn height_is_the_embedded_z_coordinate() {
    let man = build_manifold(&ManifoldSpec {
        shape: Shape::Sphere { radius: 2.0, resolution: [16, 32] },
        synthetic_dimension: 4.0,
        weight: WeightKind::Zero,
    })
    .unwrap();
    let h = InitialData::Height { offset: 1.0, amplitude: 0.5 }.sample(&man, 0).unwrap();
    for (k, &x) in h.iter().enumerate() {
        assert_eq!(x, 1.0 + 0.5 * man.coords(k)[0].cos());
    }
}
