use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adaptbound::complexity::rademacher_empirical;
use adaptbound::concentration::verify_deviation_multi;
use adaptbound::divergences::{discrepancy_distance, ipm, q_quantity, DivergenceMode, DivergenceReport};
use adaptbound::domains::{sample_linear_gaussian, BetaMode, Dataset, LinearGaussianDomainSpec, Point};
use adaptbound::fixtures::{bernoulli_domain, indistinguishable_domains, IndistinguishableDomains};
use adaptbound::hypotheses::{fit_combined_least_squares, EvaluationMatrix, MixCoefficient, SimplexWeights};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adaptbound"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], cfg: &Path, extra: &[&str]) -> Output {
    bin().args(args).arg("--config").arg(cfg).args(extra).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

const GAUSSIAN: &str = "domain_kind=linear_gaussian\ndomain_input_dim=3\ndomain_x_mean=0.5\ndomain_x_std=2\nn=25\nseed=4\n";

#[test]
fn gen_is_deterministic_and_matches_library() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "domains.cfg", GAUSSIAN);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for out in [&a, &b] {
        let o = run(&["gen"], &cfg, &["--out", out.to_str().unwrap(), "--seed", "7"]);
        assert!(o.status.success());
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());

    let spec = LinearGaussianDomainSpec {
        input_dim: 3,
        x_mean: 0.5,
        x_std: 2.0,
        beta_mean: 1.0,
        beta_std: 5.0,
        noise_std: 0.5,
        beta_mode: BetaMode::PerSample,
    };
    let mut expected = Vec::new();
    sample_linear_gaussian(&spec, 25, 7).unwrap().write_csv(&mut expected).unwrap();
    assert_eq!(bytes, expected, "the --seed flag overrides the config seed");

    let from_config = stdout(&run(&["gen"], &cfg, &[]));
    let mut expected = Vec::new();
    sample_linear_gaussian(&spec, 25, 4).unwrap().write_csv(&mut expected).unwrap();
    assert_eq!(from_config.into_bytes(), expected);
}

#[test]
fn bound_prints_unit_total() {
    let dir = TempDir::new().unwrap();
    // ε = 8 e^(-100), so the radical is √(100 · 32 / 3200) = 1.
    let cfg = write(
        dir.path(),
        "thm1.cfg",
        "theorem=multi_uen\ndivergence=0\nln_uen=0\nweights=1\nsizes=3200\nrange_width=1\nepsilon=2.976060780816669e-43\n",
    );
    let out = stdout(&run(&["bound"], &cfg, &[]));
    assert!(out.lines().any(|l| l == "total=1.0"), "{out}");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.cfg", &format!("{GAUSSIAN}mystery_key=3\n"));
    let o = run(&["gen"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mystery_key"));

    let o = run(&["gen"], &dir.path().join("missing.cfg"), &[]);
    assert_eq!(o.status.code(), Some(3));

    let sym = "check=symmetrization_combined\nhypotheses=0\nloss=absolute\nclip=0,1\ntrials=100\n\
               source_kind=discrete\nsource_support=0 0 ; 0 1\nsource_probs=0.8,0.2\n\
               target_kind=discrete\ntarget_support=0 0 ; 0 1\ntarget_probs=0.3,0.7\n\
               tau=0\nn_source=4\nn_target=4\nxi=0.4\n";
    let cfg = write(dir.path(), "sym.cfg", sym);
    assert_eq!(run(&["verify"], &cfg, &[]).status.code(), Some(2), "ξ below the divergence");

    let gaussian_source = sym.replace(
        "source_kind=discrete\nsource_support=0 0 ; 0 1\nsource_probs=0.8,0.2\n",
        "source_kind=linear_gaussian\nsource_input_dim=1\n",
    );
    let cfg = write(dir.path(), "gauss.cfg", &gaussian_source);
    let o = run(&["verify"], &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsupported"));

    let o = bin().arg("--help").output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("experiment"));
}

#[test]
fn experiment_default_grid_has_forty_rows() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "fig1.cfg", "experiment=multi_source\nrepeats=1\n");
    let out = dir.path().join("fig1.csv");
    let o = run(&["experiment"], &cfg, &["--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("param,n_total,mean_gap,std_gap,repeats"));
    assert_eq!(lines.count(), 40);
    let parsed = adaptbound::experiments::load_csv(&out).unwrap();
    assert_eq!(parsed.rows.first().unwrap().n_total, 400);
    assert_eq!(parsed.rows.last().unwrap().n_total, 4000);
}

#[test]
fn divergence_matches_library() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "div.cfg",
        "mode=exact_discrete\nhypotheses=0 ; 2\nloss=absolute\nclip=0,3\n\
         source_labeler=1\ntarget_labeler=1\n\
         source_kind=discrete\nsource_support=1 1\n\
         target_kind=discrete\ntarget_support=0 1\n",
    );
    let out = stdout(&run(&["divergence"], &cfg, &[]));
    let fx = indistinguishable_domains();
    let class = fx.class();
    // Linear labelers carry no intercept, so both sides use `g(x) = x` here.
    let report = DivergenceReport::new(
        ipm(&class, &fx.source, &fx.target),
        discrepancy_distance(&fx.hypotheses, &fx.loss, &fx.source, &fx.target),
        q_quantity(&fx.hypotheses, &fx.loss, &fx.target, IndistinguishableDomains::label_source, |x: &[f64]| x[0]),
        DivergenceMode::ExactDiscrete,
    )
    .unwrap();
    assert_eq!(out, report.to_kv());
}

#[test]
fn fit_and_complexity_match_library() {
    let dir = TempDir::new().unwrap();
    let mk = |seed: u64, n: usize| sample_linear_gaussian(&LinearGaussianDomainSpec::regression_default(0.0, 1.0), n, seed).unwrap();
    let (s, t) = (mk(1, 300), mk(2, 150));
    s.save_csv(&dir.path().join("s.csv")).unwrap();
    t.save_csv(&dir.path().join("t.csv")).unwrap();
    let cfg = write(dir.path(), "fit.cfg", "method=combined\nsource=s.csv\ntarget=t.csv\ntau=0.3\n");
    let out = stdout(&run(&["fit"], &cfg, &[]));
    let s = Dataset::load_csv(&dir.path().join("s.csv"), "s").unwrap();
    let t = Dataset::load_csv(&dir.path().join("t.csv"), "t").unwrap();
    let model = fit_combined_least_squares(&s, &t, MixCoefficient::new(0.3).unwrap()).unwrap();
    assert_eq!(out, format!("{}\n", model.to_csv_row()));

    let small = Dataset::from_points(
        &(0..40).map(|i| Point::new(vec![(i % 7) as f64 / 7.0], (i % 3) as f64 / 3.0)).collect::<Vec<_>>(),
        "small",
    )
    .unwrap();
    small.save_csv(&dir.path().join("small.csv")).unwrap();
    let cfg = write(
        dir.path(),
        "rad.cfg",
        "measure=rademacher_empirical\nhypotheses=0 ; 0.5 ; 1\nloss=squared\nclip=0,1\ndata=small.csv\nmc_trials=500\nseed=3\n",
    );
    let out = stdout(&run(&["complexity"], &cfg, &["--threads", "1"]));
    let class = adaptbound::hypotheses::FiniteFunctionClass::new(
        [0.0, 0.5, 1.0].iter().map(|t| adaptbound::hypotheses::LinearModel::new(vec![*t]).unwrap()).collect(),
        adaptbound::hypotheses::LossFunction::squared().clipped(0.0, 1.0).unwrap(),
    )
    .unwrap();
    let small = Dataset::load_csv(&dir.path().join("small.csv"), "small").unwrap();
    let est = rademacher_empirical(&EvaluationMatrix::from_dataset(&class, &small).unwrap(), 500, 3).unwrap();
    assert!(out.contains(&format!("value={:?}\n", est.value)), "{out}");
    assert!(out.contains(&format!("std_error={:?}\n", est.std_error)), "{out}");
}

#[test]
fn verify_matches_library_and_ignores_thread_count() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "dev.cfg",
        "check=deviation_multi\nhypotheses=0\nloss=absolute\nclip=0,1\nfunction_index=0\ntrials=4000\n\
         sources=a,b\na_kind=discrete\na_support=0 0 ; 0 1\na_probs=0.7,0.3\n\
         b_kind=discrete\nb_support=0 0 ; 0 1\nb_probs=0.2,0.8\n\
         weights=0.25,0.75\nsizes=10,30\nxi_grid=0.05,0.1,0.2\nseed=12\n",
    );
    let one = stdout(&run(&["verify"], &cfg, &["--threads", "1"]));
    let many = stdout(&run(&["verify"], &cfg, &["--threads", "8"]));
    assert_eq!(one, many);
    let curve = verify_deviation_multi(
        |p: &Point| p.y,
        (0.0, 1.0),
        &[bernoulli_domain(0.3), bernoulli_domain(0.8)],
        &SimplexWeights::new(vec![0.25, 0.75]).unwrap(),
        &[10, 30],
        &[0.05, 0.1, 0.2],
        4000,
        12,
    )
    .unwrap();
    let mut expected = Vec::new();
    curve.write_csv(&mut expected).unwrap();
    assert_eq!(one.into_bytes(), expected);
}
