use supg_dlr::coefficients::{AdvectionKind, ConstantAdrParams};
use supg_dlr::integrator::Scheme;
use supg_dlr::operator::Stabilization;
use supg_dlr::runner::checks::decay_config;
use supg_dlr::runner::config::*;
use supg_dlr::runner::dump::FieldDump;
use supg_dlr::runner::presets::{preset_boundary_layer, preset_rotating_body, Scale};
use supg_dlr::runner::*;
use supg_dlr::stochastic::SampleSpace;
use supg_dlr::Error;

#[test]
fn configs_round_trip_through_toml() {
    for cfg in [preset_rotating_body(Scale::Desk), preset_boundary_layer(Scale::Paper)] {
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back.to_toml().unwrap(), text);
        assert_eq!(back.scheme.dt, cfg.scheme.dt);
    }
}

#[test]
fn malformed_configs_are_rejected() {
    let text = preset_rotating_body(Scale::Desk).to_toml().unwrap();
    let unknown = text.replacen("[mesh]", "[mesh]\nbogus = 1", 1);
    assert!(matches!(RunConfig::from_toml(&unknown), Err(Error::Config(_))));

    let mut cfg = preset_rotating_body(Scale::Desk);
    cfg.scheme.dt = 0.0;
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    cfg.scheme.dt = -1.0;
    assert!(matches!(RunConfig::from_toml(&cfg.to_toml().unwrap()), Err(Error::Config(_))));
}

#[test]
fn desk_presets_have_expected_sizes() {
    let s = setup(&preset_rotating_body(Scale::Desk)).unwrap();
    assert_eq!(s.problem.ndofs(), 1089);
    assert_eq!(s.problem.n_samples(), 200);
    assert_eq!(s.initial.rank(), 2);
    let s = setup(&preset_boundary_layer(Scale::Desk)).unwrap();
    assert_eq!(s.problem.ndofs(), 441);
    assert_eq!(s.problem.n_samples(), 256);
    assert!(s.problem.samples.orthonormality_defect(&s.initial.y) < 1e-12);
}

#[test]
fn field_dump_round_trips() {
    let dump = FieldDump {
        t: 0.125,
        rank: 2,
        n_per_side: 1,
        n_samples: 7,
        indices: vec![0, 5],
        fields: vec![vec![0.0, 1.0, -2.5, 1e-17], vec![3.0, 0.1, 0.2, 0.3]],
    };
    let mut buf = Vec::new();
    dump.write(&mut buf).unwrap();
    let back = FieldDump::read(buf.as_slice()).unwrap();
    assert_eq!(back, dump);
}

#[test]
fn boundary_layer_inflow_geometry() {
    assert_eq!(boundary_layer_tag([0.5, 0.0]), "inflow");
    assert_eq!(boundary_layer_tag([0.0, 0.1]), "inflow");
    assert_eq!(boundary_layer_tag([0.0, 0.3]), "outflow");
    assert_eq!(boundary_layer_tag([1.0, 0.01]), "inflow");
    assert_eq!(boundary_layer_tag([1.0, 0.05]), "outflow");
    assert_eq!(boundary_layer_tag([0.5, 1.0]), "outflow");
}

#[test]
fn nearest_sample_uses_euclidean_distance() {
    let samples = SampleSpace::new(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.9, -1.0]], vec![1.0 / 3.0; 3]).unwrap();
    assert_eq!(nearest_sample(&samples, &[0.8, 0.6]).unwrap(), 1);
    assert_eq!(nearest_sample(&samples, &[0.6, -0.6]).unwrap(), 2);
    assert!(nearest_sample(&samples, &[0.0]).is_err());
}

#[test]
fn decay_runs_are_reproducible_and_pass_case_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for k in 0..2 {
        let mut cfg = decay_config(Scheme::SemiImplicit, &dir.path().join(format!("run{k}")));
        cfg.scheme.t_final = 0.5;
        let out = run_from_config(&cfg);
        assert_eq!(out.status, RunStatus::Ok, "{:?}", out.message);
        let case_two = out.bounds.iter().find(|b| b.csv_row().contains(",ii,")).unwrap();
        assert!(case_two.passed(), "{}", case_two.csv_row());
        assert!(out.bounds.iter().all(|b| !b.is_applicable() || b.passed()));
        for name in ["norms.csv", "ledger.csv", "run.json", "final_state.txt"] {
            assert!(cfg.output.dir.join(name).exists(), "{name}");
        }
        csvs.push(std::fs::read(cfg.output.dir.join("norms.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn implicit_scheme_with_random_model_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = decay_config(Scheme::ImplicitEulerDeterministic, dir.path());
    cfg.model = ModelConfig::ConstantAdr {
        params: ConstantAdrParams {
            eps: 1e-2,
            eps_fluct: 5e-3,
            advection: AdvectionKind::Rotating,
            ..Default::default()
        },
    };
    let out = run_from_config(&cfg);
    assert_eq!(out.status, RunStatus::ConfigError);
    assert_eq!(out.exit_code(), 1);
}

#[test]
fn blow_up_is_recorded_with_its_step() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = decay_config(Scheme::Explicit, dir.path());
    cfg.model = ModelConfig::ConstantAdr {
        params: ConstantAdrParams {
            eps: 1.0,
            advection: AdvectionKind::Rotating,
            ..Default::default()
        },
    };
    cfg.scheme.stabilization = Stabilization::None;
    cfg.scheme.dt = 0.5;
    cfg.scheme.t_final = 50.0;
    cfg.scheme.blowup_factor = 1e6;
    cfg.diagnostics.bounds = false;
    let out = run_from_config(&cfg);
    assert_eq!(out.status, RunStatus::NumericalFailure);
    assert_eq!(out.exit_code(), 2);
    let step = out.failing_step.expect("failing step");
    assert!(step > 0 && step <= 100);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "numerical_failure");
    assert_eq!(manifest["failing_step"], step);
    assert_eq!(manifest["exit_code"], 2);
}

#[test]
fn fom_solver_runs_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = decay_config(Scheme::SemiImplicit, dir.path());
    cfg.scheme.solver = Solver::Fom;
    cfg.scheme.t_final = 0.1;
    let out = run_from_config(&cfg);
    assert_eq!(out.status, RunStatus::Ok, "{:?}", out.message);
    assert_eq!(out.summary.steps_completed, 10);
}
