use super::*;

const SAC: &str = r#"
ensemble = 40
dt = 1.0
t_max = 20.0
stride = 5
seed = 3
output_dir = "OUT"

[model]
kind = "tully"
variant = "sac"
p0 = 10.0

[method]
method = "naf-tw"

[[estimators]]
kind = "population"
representation = "adiabatic"

[[estimators]]
kind = "scattering"

[[estimators]]
kind = "momentum-histogram"
bins = { min = 0.0, max = 20.0, n = 20 }
"#;

fn config(dir: &Path) -> RunConfig {
    let text = SAC.replace("OUT", &dir.to_string_lossy());
    RunConfig::parse(&text).unwrap()
}

#[test]
fn unknown_keys_are_errors() {
    let text = format!("{SAC}\nbogus = 1\n");
    assert!(RunConfig::parse(&text).is_err());
    let text = SAC.replace("stride = 5", "strde = 5");
    assert!(RunConfig::parse(&text).is_err());
}

#[test]
fn validation_rejects_bad_values() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path());
    c.ensemble = 0;
    assert!(c.validate().is_err());
    let mut c = config(dir.path());
    c.t_max = 0.5;
    assert!(c.validate().is_err());
    let mut c = config(dir.path());
    c.dt = -1.0;
    assert!(c.validate().is_err());
}

#[test]
fn time_grid_includes_final_step() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config(dir.path());
    c.t_max = 12.0;
    assert_eq!(c.time_grid(), vec![0.0, 5.0, 10.0, 12.0]);
    c.t_max = c.dt;
    c.stride = 1;
    assert_eq!(c.time_grid().len(), 2);
}

#[test]
fn hash_ignores_output_and_workers_only() {
    let dir = tempfile::tempdir().unwrap();
    let a = config(dir.path());
    let mut b = a.clone();
    b.output_dir = "elsewhere".into();
    b.workers = Some(3);
    assert_eq!(a.hash().unwrap(), b.hash().unwrap());
    b.seed += 1;
    assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    let mut c = a.clone();
    c.method.gamma = 0.4;
    assert_ne!(a.hash().unwrap(), c.hash().unwrap());
}

#[test]
fn run_writes_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let rep = run(&cfg).unwrap();
    rep.check().unwrap();
    let m = Manifest::load(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(m.schema_version, SCHEMA_VERSION);
    assert_eq!(m.ensemble, 40);
    assert_eq!(m.outputs.len(), 2 + 4 + 1);
    for o in &m.outputs {
        assert!(dir.path().join(&o.file).exists(), "{}", o.file);
    }
    let total: f64 = m.scattering.iter().map(|s| s.probability).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let p = EstimateSeries::load(&dir.path().join("population_naf-tw_k1_l1_adia.csv")).unwrap();
    assert_eq!(p.len(), 5);
}

#[test]
fn single_trajectory_single_step() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.ensemble = 1;
    cfg.t_max = cfg.dt;
    cfg.stride = 1;
    cfg.estimators.truncate(1);
    let rep = run(&cfg).unwrap();
    assert_eq!(rep.series[0].len(), 2);
    let text = std::fs::read_to_string(dir.path().join(&rep.manifest.outputs[0].file)).unwrap();
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let mut a = config(d1.path());
    a.workers = Some(1);
    let mut b = config(d2.path());
    b.workers = Some(3);
    let ra = run(&a).unwrap();
    run(&b).unwrap();
    for o in &ra.manifest.outputs {
        let x = std::fs::read(d1.path().join(&o.file)).unwrap();
        let y = std::fs::read(d2.path().join(&o.file)).unwrap();
        assert_eq!(x, y, "{}", o.file);
    }
}

#[test]
fn populations_need_population_start() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "ensemble = 5\ndt = 0.1\nt_max = 0.2\noutput_dir = {:?}\n[model]\nkind = \"constant\"\nh = [[0.0, 0.1], [0.1, 0.0]]\ninitial_coherence = [1, 2]\n[[estimators]]\nkind = \"population\"\n",
        dir.path()
    );
    let cfg = RunConfig::parse(&text).unwrap();
    assert!(matches!(run(&cfg), Err(Error::Config(_))));
}

#[test]
fn dotted_parameters() {
    let mut doc: toml::Table = toml::from_str(SAC).unwrap();
    set_dotted(&mut doc, "model.p0", toml::Value::Float(25.0)).unwrap();
    assert_eq!(doc["model"]["p0"].as_float(), Some(25.0));
    assert!(set_dotted(&mut doc, "nothing.here", toml::Value::Integer(1)).is_err());
}

#[test]
fn sweep_writes_one_row_per_value_and_series() {
    let dir = tempfile::tempdir().unwrap();
    let text = SAC.replace("OUT", &dir.path().to_string_lossy()).replace("ensemble = 40", "ensemble = 8");
    let values = [toml::Value::Float(10.0), toml::Value::Float(20.0)];
    let rep = sweep(&text, None, SweepJob::Ensemble, "model.p0", &values, None).unwrap();
    assert_eq!(rep.points.len(), 2);
    assert_eq!(rep.rows, 2 * 6);
    let body = std::fs::read_to_string(&rep.combined).unwrap();
    assert_eq!(body.lines().count(), 2 + 12);
}

#[test]
fn dvr_job_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "t_max = 200.0\ndt_out = 100.0\noutput_dir = {:?}\n[model]\nkind = \"tully\"\nvariant = \"sac\"\np0 = 10.0\n[grid]\nr_min = -30.0\nr_max = 30.0\nn = 512\n",
        dir.path()
    );
    let cfg = DvrConfig::parse(&text).unwrap();
    let rep = run_dvr(&cfg).unwrap();
    assert!(rep.manifest.max_norm_error < 1e-8);
    let total: f64 = rep.manifest.transmission.iter().chain(&rep.manifest.reflection).sum();
    assert!((total - 1.0).abs() < 1e-8);
    assert_eq!(rep.series.len(), 8);
    assert!(dir.path().join("population_dvr_k1_l1_dia.csv").exists());
}

#[test]
fn dvr_sanity_suite_passes() {
    let rep = verify(VerifySuite::DvrSanity, VerifyOptions::default()).unwrap();
    assert!(rep.pass(), "{:?}", rep.checks);
}

#[test]
fn suite_names_parse() {
    for s in VerifySuite::ALL {
        assert_eq!(s.label().parse::<VerifySuite>().unwrap(), s);
    }
    assert!("nope".parse::<VerifySuite>().is_err());
}
