mod config;
mod error;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use venuerec::bias::{pairwise_bias_report, DEFAULT_PERMUTATIONS, MIN_PERMUTATIONS};
use venuerec::dataset::{build_features, ingest_path, stratified_split, Dataset, IngestConfig};
use venuerec::eval::{eval_suite, evaluate_factual, factual_scores, suite_table, SplitEvaluation};
use venuerec::io::write_json;
use venuerec::learners::{train, LearnerKind, TargetTransform, TrainConfig, Weighting};
use venuerec::store::{check_feature_space, load_model, save_model};
use venuerec::synth::{generate, oracle_recommendations, run_bench, BenchConfig, SynthParams};

use crate::config::{load_overrides, parse_list, parse_seeds, resolve};
use crate::error::CliError;

/// Recommend publication venues by counterfactual citation impact.
#[derive(Debug, Parser)]
#[command(name = "venuerec", version)]
struct Cli {
    /// JSON file whose keys override the command's resolved config.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Print results on stdout as JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read dblp-style records and write a bag-of-fields dataset.
    Ingest(IngestArgs),
    /// Split a dataset per venue into train and test files.
    Split(SplitArgs),
    /// Fit propensities and base learners, then write a model file.
    Train(TrainArgs),
    /// Spearman correlation of factual predictions on a test set.
    Eval(EvalArgs),
    /// Compare all methods over repeated stratified splits.
    EvalSuite(EvalSuiteArgs),
    /// Pairwise MMD² between venue feature distributions.
    Mmd(MmdArgs),
    /// Generate a synthetic dataset with both potential outcomes.
    Synth(SynthArgs),
    /// Counterfactual accuracy of all methods on synthetic data.
    SynthBench(SynthBenchArgs),
    /// Predicted citations per venue for a list of fields.
    Recommend(RecommendArgs),
    /// Largest venue-specific coefficients.
    Coefficients(CoefficientsArgs),
    /// Serve a model over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LearnerArg {
    T,
    S,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WeightingArg {
    Ipw,
    Uniform,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TargetArg {
    Log1p,
    Log,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// JSON array or JSON-lines file of raw records.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Comma-separated canonical venues [default: AAAI,IJCAI,KDD,NeurIPS,ICML]
    #[arg(long, value_name = "LIST")]
    venues: Option<String>,
    /// Publication year to keep [default: 2015]
    #[arg(long, value_name = "N")]
    year: Option<i64>,
    /// Minimum relevance weight for a field to count [default: 0]
    #[arg(long, value_name = "W")]
    field_weight_threshold: Option<f64>,
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    /// Share of each venue assigned to train [default: 0.7]
    #[arg(long, value_name = "F")]
    train_fraction: Option<f64>,
    /// [default: 0]
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "PATH")]
    out_train: PathBuf,
    #[arg(long, value_name = "PATH")]
    out_test: PathBuf,
}

/// Flags shared by every command that trains models.
#[derive(Debug, Args)]
struct TrainFlags {
    /// Number of CV folds for the ridge and propensity grids [default: 5]
    #[arg(long, value_name = "K")]
    folds: Option<usize>,
    /// Outcome transform fitted by the base learners [default: log1p; log for synth-bench]
    #[arg(long, value_enum)]
    target_transform: Option<TargetArg>,
}

const GRID_HELP: &str = "Ridge lambda and propensity C are chosen by cross-validation over the same \
45-value default grid: 0.001..0.009 step 0.001, 0.01..0.09 step 0.01, 0.1..0.9 step 0.1, \
1..9 step 1, 10..90 step 10. Replace either with --config, e.g. {\"lambda_grid\": [0.1, 1, 10]}.";

#[derive(Debug, Args)]
#[command(after_help = GRID_HELP)]
struct TrainArgs {
    #[arg(long, value_name = "PATH")]
    train: PathBuf,
    /// [default: t]
    #[arg(long, value_enum)]
    learner: Option<LearnerArg>,
    /// [default: ipw]
    #[arg(long, value_enum)]
    weighting: Option<WeightingArg>,
    /// [default: 0]
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[command(flatten)]
    flags: TrainFlags,
    #[arg(long, value_name = "MODEL")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_name = "MODEL")]
    model: PathBuf,
    #[arg(long, value_name = "PATH")]
    test: PathBuf,
    /// Also write the JSON report here.
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(after_help = GRID_HELP)]
struct EvalSuiteArgs {
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    /// Split seeds, e.g. `0..9` (inclusive) or `1,4,7` [default: 0..9]
    #[arg(long, value_name = "SEEDS", value_parser = seed_list)]
    seeds: Option<Seeds>,
    /// [default: 0.7]
    #[arg(long, value_name = "F")]
    train_fraction: Option<f64>,
    #[command(flatten)]
    flags: TrainFlags,
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MmdArgs {
    #[arg(long, value_name = "PATH")]
    data: PathBuf,
    /// Permutations per venue pair, at least 100 [default: 1000]
    #[arg(long, value_name = "B")]
    permutations: Option<usize>,
    /// Significance level for the `*` marker [default: 0.01]
    #[arg(long, value_name = "A")]
    alpha: Option<f64>,
    /// [default: 0]
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthShape {
    /// [default: 10000]
    #[arg(long, value_name = "N")]
    n: Option<usize>,
    /// [default: 16]
    #[arg(long, value_name = "D")]
    d: Option<usize>,
    /// Covariate mean shift between the two venues [default: 1]
    #[arg(long, value_name = "X")]
    mean_offset: Option<f64>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// [default: 0]
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[command(flatten)]
    shape: SynthShape,
    /// Instances with both potential outcomes.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Also write the factual dataset accepted by `train` and `split`.
    #[arg(long, value_name = "PATH")]
    dataset: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(after_help = GRID_HELP)]
struct SynthBenchArgs {
    /// [default: 0..9]
    #[arg(long, value_name = "SEEDS", value_parser = seed_list)]
    seeds: Option<Seeds>,
    #[command(flatten)]
    shape: SynthShape,
    /// [default: 0.7]
    #[arg(long, value_name = "F")]
    train_fraction: Option<f64>,
    #[command(flatten)]
    flags: TrainFlags,
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RecommendArgs {
    #[arg(long, value_name = "MODEL")]
    model: PathBuf,
    /// Comma-separated fields of study.
    #[arg(long, value_name = "LIST")]
    fields: String,
}

#[derive(Debug, Args)]
struct CoefficientsArgs {
    #[arg(long, value_name = "MODEL")]
    model: PathBuf,
    #[arg(long, value_name = "V")]
    venue: String,
    /// [default: 30]
    #[arg(long, value_name = "K")]
    top: Option<usize>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, value_name = "MODEL")]
    model: PathBuf,
    /// [default: 127.0.0.1:8080]
    #[arg(long, value_name = "ADDR")]
    bind: Option<String>,
}

#[derive(Debug, Clone)]
struct Seeds(Vec<u64>);

fn seed_list(text: &str) -> Result<Seeds, String> {
    parse_seeds(text).map(Seeds)
}

impl TrainFlags {
    fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(k) = self.folds {
            cfg.cv_folds = k;
        }
        if let Some(t) = self.target_transform {
            cfg.target_transform = match t {
                TargetArg::Log1p => TargetTransform::Log1p,
                TargetArg::Log => TargetTransform::Log,
            };
        }
    }
}

impl SynthShape {
    fn apply(&self, p: &mut SynthParams) {
        if let Some(n) = self.n {
            p.n = n;
        }
        if let Some(d) = self.d {
            p.d = d;
        }
        if let Some(m) = self.mean_offset {
            p.mean_offset = m;
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitConfig {
    train_fraction: f64,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SuiteConfig {
    seeds: Vec<u64>,
    train_fraction: f64,
    train: TrainConfig,
}

#[derive(Debug, Serialize, Deserialize)]
struct MmdConfig {
    permutations: usize,
    alpha: f64,
    seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TopConfig {
    top: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ServeConfig {
    bind: String,
}

struct Ctx {
    overrides: Option<Value>,
    json: bool,
}

impl Ctx {
    /// Resolve a command's config, print it on stderr, and hand it back.
    fn resolve<T: Serialize + for<'de> Deserialize<'de>>(
        &self,
        command: &str,
        base: T,
        flags: impl FnOnce(&mut T) -> Result<(), CliError>,
    ) -> Result<T, CliError> {
        let cfg = resolve(base, self.overrides.as_ref(), flags)?;
        eprintln!("{}", json!({ "command": command, "resolved_config": &cfg }));
        Ok(cfg)
    }

    fn emit<T: Serialize>(&self, value: &T, text: impl FnOnce() -> String) -> Result<(), CliError> {
        if self.json {
            let line = serde_json::to_string(value).map_err(|e| CliError::new(error::Kind::Runtime, e.to_string()))?;
            println!("{line}");
        } else {
            print!("{}", text());
        }
        Ok(())
    }
}

fn check_fraction(f: f64) -> Result<(), CliError> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(CliError::config(format!("train fraction must be in (0, 1), got {f}")))
    }
}

fn check_seeds(seeds: &[u64]) -> Result<(), CliError> {
    if seeds.is_empty() {
        Err(CliError::config("seed list is empty"))
    } else {
        Ok(())
    }
}

fn write_report<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    if let Some(p) = path {
        write_json(p, value)?;
    }
    Ok(())
}

fn rho_text(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_string(), |r| format!("{r:.4}"))
}

fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn ingest_cmd(ctx: &Ctx, a: &IngestArgs) -> Result<(), CliError> {
    let cfg = ctx.resolve("ingest", IngestConfig::dblp_2015(), |c| {
        if let Some(v) = &a.venues {
            c.venues = parse_list(v);
        }
        if a.year.is_some() {
            c.year = a.year;
        }
        if let Some(w) = a.field_weight_threshold {
            c.field_weight_threshold = w;
        }
        let mut sorted = c.venues.clone();
        sorted.sort();
        sorted.dedup();
        if c.venues.is_empty() || sorted.len() != c.venues.len() {
            return Err(CliError::config("venue list must be non-empty and free of duplicates"));
        }
        Ok(())
    })?;
    let report = ingest_path(&a.input, &cfg)?;
    let ds = build_features(&report.papers, &cfg.venues)?;
    ds.save(&a.out)?;
    let per_venue: BTreeMap<&str, usize> = ds
        .venues
        .iter()
        .zip(ds.indices_by_venue())
        .map(|(v, idx)| (v.as_str(), idx.len()))
        .collect();
    let summary = json!({
        "papers": ds.len(),
        "malformed": report.malformed,
        "filtered": report.filtered,
        "vocabulary": ds.vocabulary.len(),
        "per_venue": per_venue,
    });
    ctx.emit(&summary, || {
        let mut s = format!(
            "{} papers kept, {} filtered, {} malformed; {} fields\n",
            ds.len(),
            report.filtered,
            report.malformed,
            ds.vocabulary.len()
        );
        for (v, n) in &per_venue {
            s.push_str(&format!("  {v}: {n}\n"));
        }
        s
    })
}

fn split_cmd(ctx: &Ctx, a: &SplitArgs) -> Result<(), CliError> {
    let cfg = ctx.resolve("split", SplitConfig { train_fraction: 0.7, seed: 0 }, |c| {
        if let Some(f) = a.train_fraction {
            c.train_fraction = f;
        }
        if let Some(s) = a.seed {
            c.seed = s;
        }
        check_fraction(c.train_fraction)
    })?;
    let ds = Dataset::load(&a.data)?;
    let (tr, te) = stratified_split(&ds, cfg.train_fraction, cfg.seed)?;
    tr.save(&a.out_train)?;
    te.save(&a.out_test)?;
    let summary = json!({ "train": tr.len(), "test": te.len(), "vocabulary": tr.vocabulary.len() });
    ctx.emit(&summary, || format!("{} train, {} test papers\n", tr.len(), te.len()))
}

fn train_cmd(ctx: &Ctx, a: &TrainArgs) -> Result<(), CliError> {
    let cfg = ctx.resolve("train", TrainConfig::default(), |c| {
        if let Some(l) = a.learner {
            c.learner = match l {
                LearnerArg::T => LearnerKind::T,
                LearnerArg::S => LearnerKind::S,
            };
        }
        if let Some(w) = a.weighting {
            c.weighting = match w {
                WeightingArg::Ipw => Weighting::Ipw,
                WeightingArg::Uniform => Weighting::Uniform,
            };
        }
        if let Some(s) = a.seed {
            c.seed = s;
        }
        a.flags.apply(c);
        c.validate().map_err(CliError::from)
    })?;
    let ds = Dataset::load(&a.train)?;
    let model = train(&ds, &cfg)?;
    save_model(&model, &a.out)?;
    let summary = json!({
        "papers": ds.len(),
        "per_venue_lambda": model.per_venue_lambda,
        "propensity_c": model.propensity.as_ref().map(|p| p.selected_c),
        "dataset_fingerprint": model.dataset_fingerprint,
    });
    ctx.emit(&summary, || {
        let mut rows = vec![vec!["venue".to_string(), "lambda".into()]];
        for (v, l) in &model.per_venue_lambda {
            rows.push(vec![v.clone(), format!("{l}")]);
        }
        let c = model.propensity.as_ref().map_or("-".to_string(), |p| p.selected_c.to_string());
        format!("trained on {} papers, propensity C = {c}\n{}", ds.len(), table(&rows))
    })
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    model: PathBuf,
    test: PathBuf,
    feature_space_warning: Option<String>,
    evaluation: SplitEvaluation,
}

fn eval_cmd(ctx: &Ctx, a: &EvalArgs) -> Result<(), CliError> {
    ctx.resolve("eval", json!({}), |_| Ok(()))?;
    let file = load_model(&a.model)?;
    let test = Dataset::load(&a.test)?;
    if test.venues != file.model.venues {
        return Err(CliError::new(
            error::Kind::Data,
            format!("test venues {:?} differ from model venues {:?}", test.venues, file.model.venues),
        ));
    }
    let warning = check_feature_space(&file, &test)?;
    let evaluation = evaluate_factual(&factual_scores(&file.model, &test)?, &test)?;
    let out = EvalOutput {
        model: a.model.clone(),
        test: a.test.clone(),
        feature_space_warning: warning,
        evaluation,
    };
    write_report(a.report.as_deref(), &out)?;
    ctx.emit(&out, || {
        let mut rows = vec![vec!["venue".to_string(), "rho".into()]];
        for (v, r) in &out.evaluation.per_venue_rho {
            rows.push(vec![v.clone(), rho_text(*r)]);
        }
        rows.push(vec!["total".into(), rho_text(out.evaluation.total_rho)]);
        table(&rows)
    })
}

fn eval_suite_cmd(ctx: &Ctx, a: &EvalSuiteArgs) -> Result<(), CliError> {
    let base = SuiteConfig {
        seeds: (0..10).collect(),
        train_fraction: 0.7,
        train: TrainConfig::default(),
    };
    let cfg = ctx.resolve("eval-suite", base, |c| {
        if let Some(s) = &a.seeds {
            c.seeds = s.0.clone();
        }
        if let Some(f) = a.train_fraction {
            c.train_fraction = f;
        }
        a.flags.apply(&mut c.train);
        check_seeds(&c.seeds)?;
        check_fraction(c.train_fraction)?;
        c.train.validate().map_err(CliError::from)
    })?;
    let ds = Dataset::load(&a.data)?;
    let suite = eval_suite(&ds, &cfg.seeds, cfg.train_fraction, &cfg.train)?;
    write_report(a.report.as_deref(), &suite)?;
    ctx.emit(&suite, || suite_table(&suite))
}

fn mmd_cmd(ctx: &Ctx, a: &MmdArgs) -> Result<(), CliError> {
    let base = MmdConfig {
        permutations: DEFAULT_PERMUTATIONS,
        alpha: 0.01,
        seed: 0,
    };
    let cfg = ctx.resolve("mmd", base, |c| {
        if let Some(b) = a.permutations {
            c.permutations = b;
        }
        if let Some(x) = a.alpha {
            c.alpha = x;
        }
        if let Some(s) = a.seed {
            c.seed = s;
        }
        if c.permutations < MIN_PERMUTATIONS {
            return Err(CliError::config(format!("at least {MIN_PERMUTATIONS} permutations are needed")));
        }
        if !(c.alpha > 0.0 && c.alpha < 1.0) {
            return Err(CliError::config(format!("alpha must lie in (0, 1), got {}", c.alpha)));
        }
        Ok(())
    })?;
    let ds = Dataset::load(&a.data)?;
    let report = pairwise_bias_report(&ds, cfg.permutations, cfg.alpha, cfg.seed)?;
    write_report(a.report.as_deref(), &report)?;
    ctx.emit(&report, || report.to_text())
}

fn check_shape(p: &SynthParams) -> Result<(), CliError> {
    if p.n < 2 || p.d == 0 || !p.mean_offset.is_finite() {
        return Err(CliError::config("synthetic data needs n >= 2, d >= 1 and a finite mean offset"));
    }
    Ok(())
}

fn synth_cmd(ctx: &Ctx, a: &SynthArgs) -> Result<(), CliError> {
    let params = ctx.resolve("synth", SynthParams::default(), |p| {
        if let Some(s) = a.seed {
            p.seed = s;
        }
        a.shape.apply(p);
        check_shape(p)
    })?;
    let set = generate(&params)?;
    write_json(&a.out, &set)?;
    if let Some(path) = &a.dataset {
        set.to_dataset()?.save(path)?;
    }
    let assigned = set.instances.iter().filter(|s| s.t == 1).count();
    let better = oracle_recommendations(&set.instances).values().filter(|&&r| r == 1).count();
    let summary = json!({ "instances": set.instances.len(), "assigned_plus": assigned, "oracle_plus": better });
    ctx.emit(&summary, || {
        format!(
            "{} instances; {} assigned to +1; +1 is the better venue for {}\n",
            set.instances.len(),
            assigned,
            better
        )
    })
}

fn synth_bench_cmd(ctx: &Ctx, a: &SynthBenchArgs) -> Result<(), CliError> {
    let cfg = ctx.resolve("synth-bench", BenchConfig::default(), |c| {
        if let Some(s) = &a.seeds {
            c.seeds = s.0.clone();
        }
        if let Some(f) = a.train_fraction {
            c.train_fraction = f;
        }
        a.shape.apply(&mut c.params);
        a.flags.apply(&mut c.train);
        check_seeds(&c.seeds)?;
        check_fraction(c.train_fraction)?;
        check_shape(&c.params)?;
        c.train.validate().map_err(CliError::from)
    })?;
    let board = run_bench(&cfg)?;
    write_report(a.report.as_deref(), &board)?;
    ctx.emit(&board, || board.to_text())
}

fn recommend_cmd(ctx: &Ctx, a: &RecommendArgs) -> Result<(), CliError> {
    let fields = parse_list(&a.fields);
    ctx.resolve("recommend", json!({ "fields": &fields }), |_| Ok(()))?;
    let file = load_model(&a.model)?;
    let resp = venuerec_service::recommend_fields(&file.model, &fields)?;
    ctx.emit(&resp, || {
        let r = &resp.recommendation;
        let mut rows = vec![vec!["venue".to_string(), "score".into(), "citations".into()]];
        for v in &r.ranking {
            rows.push(vec![v.clone(), format!("{:.4}", r.scores[v]), format!("{:.2}", r.predicted_citations[v])]);
        }
        let mut s = format!("recommended: {}\n{}", r.recommended, table(&rows));
        if !resp.ignored_fields.is_empty() {
            s.push_str(&format!("ignored (not in vocabulary): {}\n", resp.ignored_fields.join(", ")));
        }
        s
    })
}

fn coefficients_cmd(ctx: &Ctx, a: &CoefficientsArgs) -> Result<(), CliError> {
    let cfg = ctx.resolve("coefficients", TopConfig { top: venuerec_service::DEFAULT_TOP }, |c| {
        if let Some(k) = a.top {
            c.top = k;
        }
        Ok(())
    })?;
    let file = load_model(&a.model)?;
    let report = venuerec_service::coefficient_report(&file.model, &a.venue, cfg.top)?;
    ctx.emit(&report, || {
        let mut rows = vec![vec!["field".to_string(), "weight".into()]];
        for c in report["coefficients"].as_array().into_iter().flatten() {
            let w = c["weight"].as_f64().unwrap_or(f64::NAN);
            rows.push(vec![c["field"].as_str().unwrap_or_default().to_string(), format!("{w:+.4}")]);
        }
        table(&rows)
    })
}

fn serve_cmd(ctx: &Ctx, a: &ServeArgs) -> Result<(), CliError> {
    let cfg = ctx.resolve("serve", ServeConfig { bind: "127.0.0.1:8080".into() }, |c| {
        if let Some(b) = &a.bind {
            c.bind = b.clone();
        }
        Ok(())
    })?;
    venuerec_service::serve(&a.model, &cfg.bind)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let overrides = cli.config.as_deref().map(load_overrides).transpose()?;
    let ctx = Ctx { overrides, json: cli.json };
    match &cli.command {
        Command::Ingest(a) => ingest_cmd(&ctx, a),
        Command::Split(a) => split_cmd(&ctx, a),
        Command::Train(a) => train_cmd(&ctx, a),
        Command::Eval(a) => eval_cmd(&ctx, a),
        Command::EvalSuite(a) => eval_suite_cmd(&ctx, a),
        Command::Mmd(a) => mmd_cmd(&ctx, a),
        Command::Synth(a) => synth_cmd(&ctx, a),
        Command::SynthBench(a) => synth_bench_cmd(&ctx, a),
        Command::Recommend(a) => recommend_cmd(&ctx, a),
        Command::Coefficients(a) => coefficients_cmd(&ctx, a),
        Command::Serve(a) => serve_cmd(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn,venuerec_service=info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let msg = rendered.lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            return CliError::usage(msg).report();
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
