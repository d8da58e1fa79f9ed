use proptest::prelude::*;
use wedge_core::config::{presets, BoundaryCondition, BoundaryKind, ProblemConfig};
use wedge_core::linalg::{c, CMat};
use wedge_core::WedgeError;

fn round_trip(cfg: &ProblemConfig) {
    let text = cfg.to_toml().unwrap();
    let back = ProblemConfig::parse(&text).unwrap();
    assert_eq!(&back, cfg);
    assert_eq!(back.to_toml().unwrap(), text);
}

#[test]
fn presets_round_trip() {
    round_trip(&presets::dbar(BoundaryKind::Identity));
    round_trip(&presets::dbar(BoundaryKind::Aps));
    round_trip(&presets::shifted(c(0.0, -0.5)));
    round_trip(&presets::jordan());
    round_trip(&presets::dirac(3, true));
    round_trip(&presets::flat_counterexample());
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().and_then(|e| e.to_str()) == Some("toml") {
            let cfg = ProblemConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            round_trip(&cfg);
            n += 1;
        }
    }
    assert!(n >= 5);
}

#[test]
fn handwritten_config() {
    let text = r#"
[fiber]
kind = "point"
rank = 1

[operator]
rank = 1
edge_dim = 1
a_x = [{ matrix = [[[1.0, 0.0]]] }]
a_y = [[{ matrix = [[[0.0, 1.0]]] }]]

[boundary_condition]
kind = "aps"

[grids]
edge_samples = 4

[tolerances]
iso = 1e-5
"#;
    let cfg = ProblemConfig::parse(text).unwrap();
    assert_eq!(cfg, {
        let mut p = presets::dbar(BoundaryKind::Aps);
        p.grids.edge_samples = 4;
        p.tolerances.iso = 1e-5;
        p
    });
}

fn expect_config_error(text: &str) {
    match ProblemConfig::parse(text) {
        Err(WedgeError::Config(_)) => {}
        other => panic!("expected a configuration error, got {other:?}"),
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let base = presets::dbar(BoundaryKind::Identity).to_toml().unwrap();
    expect_config_error(&base.replace("rank = 1", "rank = 2"));
    expect_config_error(&format!("{base}\n[extra]\nx = 1\n"));
    expect_config_error(&base.replace("[grids]", "[grids]\nunknown = 3"));
    expect_config_error("not toml at all [");

    let mut cfg = presets::dirac(2, false);
    cfg.boundary_condition.as_mut().unwrap().b = vec![CMat::zeros(1, 3)];
    expect_config_error(&cfg.to_toml().unwrap());

    let mut cfg = presets::dirac(2, false);
    cfg.boundary_condition.as_mut().unwrap().pi = vec![CMat::from_element(1, 1, c(2.0, 0.0))];
    expect_config_error(&cfg.to_toml().unwrap());

    let mut cfg = presets::dbar(BoundaryKind::Aps);
    cfg.tolerances.iso = -1.0;
    expect_config_error(&cfg.to_toml().unwrap());

    let mut cfg = presets::dbar(BoundaryKind::Aps);
    cfg.boundary_condition =
        Some(BoundaryCondition { kind: BoundaryKind::Identity, mu: 0.0, b: vec![CMat::identity(1, 1)], pi: vec![], a: None });
    expect_config_error(&cfg.to_toml().unwrap());
}

#[test]
fn edge_points_cover_the_torus() {
    let mut cfg = presets::dbar(BoundaryKind::Aps);
    cfg.grids.edge_samples = 4;
    let p = cfg.edge_points();
    assert_eq!(p.len(), 4);
    assert_eq!(p[2], vec![std::f64::consts::PI]);
    cfg.operator.edge_dim = 2;
    assert_eq!(cfg.edge_points().len(), 16);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matrices_round_trip_bit_exactly(
        entries in prop::collection::vec((any::<f64>().prop_filter("finite", |v| v.is_finite()),
                                          any::<f64>().prop_filter("finite", |v| v.is_finite())), 14),
        mu in -3.0f64..3.0,
    ) {
        let mut cfg = presets::dirac(3, true);
        let b = CMat::from_fn(1, 14, |_, j| c(entries[j].0, entries[j].1));
        let bc = cfg.boundary_condition.as_mut().unwrap();
        bc.b = vec![b];
        bc.mu = mu;
        let text = cfg.to_toml().unwrap();
        let back = ProblemConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        let bb = &back.boundary_condition.as_ref().unwrap().b[0];
        for j in 0..14 {
            prop_assert_eq!(bb[(0, j)].re.to_bits(), entries[j].0.to_bits());
            prop_assert_eq!(bb[(0, j)].im.to_bits(), entries[j].1.to_bits());
        }
    }
}
