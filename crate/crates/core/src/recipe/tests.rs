use super::*;

fn small(experiment: Experiment, dir: &Path) -> RecipeConfig {
    let mut c = RecipeConfig::preset(experiment);
    c.out_dir = dir.to_path_buf();
    if c.samples > 0 {
        c.samples = 2000;
    }
    match experiment {
        Experiment::Fig1 | Experiment::Fig2 => c.grid = "square:half=2.5,n=21".into(),
        Experiment::Fig4 | Experiment::Fig5 => c.grid = "radial:r_max=2,n=11".into(),
        _ => {}
    }
    c
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn presets_validate() {
    for e in [Experiment::Fig1, Experiment::Fig2, Experiment::Fig3, Experiment::Fig4, Experiment::Fig5, Experiment::Custom] {
        RecipeConfig::preset(e).validate().unwrap();
        assert_eq!(e.to_string().parse::<Experiment>().unwrap(), e);
    }
    assert_eq!(RecipeConfig::preset(Experiment::Fig4).amplitudes.len(), 13);
}

#[test]
fn toml_overrides_preset() {
    let c = RecipeConfig::from_toml("experiment = \"fig3\"\nwidth = 1.0\nsamples = 500\n", None).unwrap();
    assert_eq!(c.experiment, Experiment::Fig3);
    assert_eq!(c.width, 1.0);
    assert_eq!(c.samples, 500);
    assert_eq!(c.amplitudes, vec![0.0, 0.46, 1.12]);
    let c = RecipeConfig::from_toml("seed = 9", Some(Experiment::Fig1)).unwrap();
    assert_eq!((c.experiment, c.seed, c.width), (Experiment::Fig1, 9, 1.5));
    assert!(matches!(RecipeConfig::from_toml("colour = 1", Some(Experiment::Fig1)), Err(Error::Parameter(_))));
    assert!(RecipeConfig::from_toml("seed = 9", None).is_err());
    assert!(matches!(RecipeConfig::from_toml("width = [", None), Err(Error::Format(_))));
}

#[test]
fn invalid_configs_fail_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let base = RecipeConfig { out_dir: out.clone(), ..RecipeConfig::preset(Experiment::Fig3) };
    let bad = [
        RecipeConfig { width: -1.0, ..base.clone() },
        RecipeConfig { samples: 2001, ..base.clone() },
        RecipeConfig { amplitudes: vec![0.1, 0.1], ..base.clone() },
        RecipeConfig { eta: 0.0, ..base.clone() },
        RecipeConfig { grid: "hexagon:n=3".into(), ..base.clone() },
        RecipeConfig { process: "teleport".into(), ..base.clone() },
        RecipeConfig { grid: "square:half=2,n=21".into(), phases: 3, samples: 300, ..base.clone() },
        RecipeConfig { experiment: Experiment::Fig5, grid: "square:half=2,n=21".into(), ..base.clone() },
    ];
    for c in bad {
        assert!(matches!(run_recipe(&c), Err(Error::Parameter(_))), "{c:?}");
    }
    assert!(!out.exists());
}

#[test]
fn fig1_direct_recipe() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_recipe(&small(Experiment::Fig1, dir.path())).unwrap();
    assert_eq!(m.stages.len(), 1);
    assert_eq!(m.stages[0].artifacts, vec!["fig1_nqd.csv"]);
    assert!(m.verdicts().all(|v| v.nonclassical));
    let text = fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["config"]["experiment"], "fig1");
    assert!(v["stages"][0]["runtime_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn fig3_recipe_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let m = run_recipe(&small(Experiment::Fig3, a.path())).unwrap();
    run_recipe(&small(Experiment::Fig3, b.path())).unwrap();
    let names: Vec<_> = m.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["simulate", "sample", "direct"]);
    let fa = csv_files(a.path());
    assert_eq!(fa.len(), 8);
    assert_eq!(fa, csv_files(b.path()));
    let table = PnqdTable::read(&a.path().join("fig3_sampled_index.csv")).unwrap();
    assert_eq!(table.amplitudes(), vec![0.0, 0.46, 1.12]);
}

#[test]
fn fig5_recipe_writes_prediction_and_references() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Experiment::Fig5, dir.path());
    c.samples = 20_000;
    let m = run_recipe(&c).unwrap();
    let names: Vec<_> = m.stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["simulate", "sample", "direct", "curve", "predict", "reference"]);
    for f in ["fig5_curve.csv", "fig5_predicted.csv", "fig5_direct.csv", "fig5_parseval.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let curve = fs::read_to_string(dir.path().join("fig5_curve.csv")).unwrap();
    assert_eq!(curve.lines().filter(|l| !l.starts_with('#')).count(), 14);
    let g = QuasiprobGrid::read_csv(std::io::BufReader::new(File::open(dir.path().join("fig5_predicted.csv")).unwrap()))
        .unwrap();
    assert!(g.sys_err.is_some() && g.stat_err.is_some());
}

#[test]
fn failing_stage_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(Experiment::Custom, dir.path());
    // coarse enough to violate the resolution check only once the filter exists
    c.grid = "square:half=3,n=5".into();
    match run_recipe(&c) {
        Err(Error::Stage { stage, source }) => {
            assert_eq!(stage, "nqd");
            assert!(matches!(*source, Error::Resolution(_)));
        }
        other => panic!("{other:?}"),
    }
}
