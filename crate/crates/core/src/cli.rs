//! `flowpix <subcommand> [--flag value]…`
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error. Data goes to
//! files or stdout, diagnostics to stderr. Every output directory receives a
//! `metadata.txt` holding the command line and the effective settings.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{count_report, load_csv, make_balanced_subset, stratified_sample, LabeledTable, LoadOptions, Quota, SubsetPlan};
use crate::encode::encode_dataset;
use crate::error::{Error, Result};
use crate::eval::{render_report, ReportFormat};
use crate::forest::{importance, ForestModel};
use crate::layout::save_manifest;
use crate::pipeline::{
    ablate_shuffle, fit_encoding, write_echo, ClassifierKind, FeatureSpace, PipelineConfig, Task, TrainedRun,
    FOREST_FILE,
};
use crate::record::Split;
use crate::schema::SchemaOptions;
use crate::seeds::derive_seed;

pub const METADATA_FILE: &str = "metadata.txt";

#[derive(Debug, Parser)]
#[command(name = "flowpix", version, about = "Flow-feature thumbnails, random forest and pixel baseline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Infer the feature schema and the default layout from a training table.
    Schema {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Encode train and test tables into PNG thumbnails plus an index.
    Encode {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Per-class record counts for train and test tables.
    Counts {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        table: TableArgs,
    },
    /// Per-class capped subset with a stratified holdout.
    Subset {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Records kept per class before the holdout split.
        #[arg(long)]
        cap: usize,
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Train a classifier and save the run (schema, layout, model).
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a saved run on a test table.
    Eval {
        /// Directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        report: ReportArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Ranked mean-decrease-Gini importances of a forest.
    Importance {
        /// Forest file, or a directory written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 14)]
        top: usize,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the default layout with a seeded random permutation of cells.
    AblateShuffle {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        report: ReportArgs,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Clone, Args)]
struct TableArgs {
    #[arg(long, default_value = "attack_cat")]
    label_column: String,
    /// 0/1 attack flag checked against the label; `none` disables the check.
    #[arg(long, default_value = "label")]
    binary_column: String,
    #[arg(long, value_delimiter = ',', default_value = "proto,service,state")]
    categorical: Vec<String>,
    /// Columns that are neither features nor the label.
    #[arg(long, value_delimiter = ',', default_value = "id,label")]
    ignore: Vec<String>,
}

impl TableArgs {
    fn load_options(&self) -> LoadOptions {
        LoadOptions {
            label_column: self.label_column.clone(),
            binary_column: (self.binary_column != "none").then(|| self.binary_column.clone()),
        }
    }

    fn schema_options(&self) -> SchemaOptions {
        SchemaOptions::new(self.categorical.iter().cloned(), self.label_column.clone())
            .ignoring(self.ignore.iter().cloned())
    }

    fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("label_column".into(), self.label_column.clone()),
            ("binary_column".into(), self.binary_column.clone()),
            ("categorical".into(), self.categorical.join("|")),
            ("ignored".into(), self.ignore.join("|")),
        ]
    }
}

#[derive(Debug, Clone, Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Byte written to cells that carry no feature.
    #[arg(long, default_value_t = 255)]
    pad_value: u8,
    #[arg(long, default_value = "multiclass")]
    task: Task,
    /// Seed of a random cell permutation applied to the layout.
    #[arg(long)]
    layout_shuffle: Option<u64>,
    #[command(flatten)]
    table: TableArgs,
}

#[derive(Debug, Clone, Args)]
struct ModelArgs {
    #[arg(long, default_value = "forest")]
    classifier: ClassifierKind,
    /// Forest input: scaled thumbnail bytes or unscaled feature values.
    #[arg(long, default_value = "pixels")]
    feature_space: FeatureSpace,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    /// Features tried per split (default ⌈√d⌉).
    #[arg(long)]
    mtry: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    min_samples_leaf: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 0.001)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
}

#[derive(Debug, Clone, Args)]
struct ReportArgs {
    #[arg(long, default_value = "text")]
    format: ReportFormat,
    /// Stratified test subsample, e.g. `Normal=500,Attack=542`.
    #[arg(long, conflicts_with = "per_class")]
    quota: Option<String>,
    /// Stratified test subsample with the same quota for every class.
    #[arg(long)]
    per_class: Option<usize>,
}

impl ReportArgs {
    fn quota(&self) -> Result<Option<Quota>> {
        if let Some(n) = self.per_class {
            return Ok(Some(Quota::PerClass(n)));
        }
        self.quota.as_deref().map(parse_quota).transpose()
    }

    fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("format".into(), format!("{:?}", self.format).to_lowercase()),
            ("quota".into(), self.quota.clone().unwrap_or_else(|| "none".into())),
            (
                "per_class".into(),
                self.per_class.map_or_else(|| "none".into(), |n| n.to_string()),
            ),
        ]
    }
}

/// `Class=count` pairs separated by commas.
pub fn parse_quota(text: &str) -> Result<Quota> {
    let mut map = BTreeMap::new();
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (class, n) = part
            .split_once('=')
            .ok_or_else(|| Error::InvalidParam(format!("quota entry {part:?} is not Class=count")))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParam(format!("quota count {n:?} is not a number")))?;
        if map.insert(class.trim().to_string(), n).is_some() {
            return Err(Error::InvalidParam(format!("class `{}` listed twice", class.trim())));
        }
    }
    if map.is_empty() {
        return Err(Error::InvalidParam("empty quota".into()));
    }
    Ok(Quota::Explicit(map))
}

fn pipeline_config(model: &ModelArgs, common: &Common) -> PipelineConfig {
    let mut c = PipelineConfig::new(model.classifier, common.task)
        .with_seed(common.seed)
        .with_workers(common.workers);
    c.feature_space = model.feature_space;
    c.pad_value = common.pad_value;
    c.layout_shuffle = common.layout_shuffle;
    c.schema = common.table.schema_options();
    c.forest.n_trees = model.trees;
    c.forest.mtry = model.mtry;
    c.forest.max_depth = model.max_depth;
    c.forest.min_samples_leaf = model.min_samples_leaf;
    c.pixel.epochs = model.epochs;
    c.pixel.batch_size = model.batch_size;
    c.pixel.learning_rate = model.learning_rate;
    c.pixel.l2 = model.l2;
    c
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let command_line = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    match execute(cli.command, &format!("flowpix {command_line}")) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("flowpix: {e}");
            match e {
                Error::InvalidParam(_) => 1,
                _ => 2,
            }
        }
    }
}

fn write_metadata(dir: &Path, command: &str, echo: Vec<(String, String)>) -> Result<()> {
    let mut all = vec![("command".to_string(), command.to_string())];
    all.extend(echo);
    write_echo(dir.join(METADATA_FILE), &all)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::at_path(dir))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(Error::at_path(path))
}

fn load(path: &Path, split: Split, table: &TableArgs) -> Result<LabeledTable> {
    let t = load_csv(path, split, &table.load_options())?;
    if !t.malformed_rows.is_empty() {
        eprintln!(
            "flowpix: {}: skipped {} malformed rows",
            path.display(),
            t.malformed_rows.len()
        );
    }
    Ok(t)
}

fn common_echo(common: &Common) -> Vec<(String, String)> {
    let mut echo = vec![
        ("seed".to_string(), common.seed.to_string()),
        ("pad_value".to_string(), common.pad_value.to_string()),
        ("task".to_string(), common.task.to_string()),
        (
            "layout_shuffle".to_string(),
            common.layout_shuffle.map_or_else(|| "none".into(), |s| s.to_string()),
        ),
    ];
    echo.extend(common.table.echo());
    echo
}

/// Stratified test subsample when a quota is given.
fn maybe_subsample(table: LabeledTable, task: Task, quota: Option<Quota>, seed: u64) -> Result<LabeledTable> {
    match quota {
        None => Ok(table),
        Some(q) => stratified_sample(&task.apply(&table), &q, derive_seed(seed, "eval/subsample")),
    }
}

fn execute(command: Command, command_line: &str) -> Result<()> {
    match command {
        Command::Schema { train, out, common } => {
            let table = common.task.apply(&load(&train, Split::Train, &common.table)?);
            let mut config = PipelineConfig::new(ClassifierKind::Forest, common.task);
            config.schema = common.table.schema_options();
            config.pad_value = common.pad_value;
            config.layout_shuffle = common.layout_shuffle;
            let enc = fit_encoding(&table, &config)?;
            create_dir(&out)?;
            enc.schema.save(out.join("schema.txt"))?;
            save_manifest(&enc.layout, out.join("layout.txt"))?;
            write_metadata(&out, command_line, common_echo(&common))?;
            println!(
                "{} features, {} encoded columns, {} padding cells, schema {}",
                enc.schema.features().len(),
                enc.layout.column_count(),
                enc.layout.pad_count(),
                enc.schema.digest()
            );
        }
        Command::Encode {
            train,
            test,
            out,
            common,
        } => {
            let train_t = common.task.apply(&load(&train, Split::Train, &common.table)?);
            let test_t = common.task.apply(&load(&test, Split::Test, &common.table)?);
            let mut config = PipelineConfig::new(ClassifierKind::Forest, common.task);
            config.schema = common.table.schema_options();
            config.pad_value = common.pad_value;
            config.layout_shuffle = common.layout_shuffle;
            let enc = fit_encoding(&train_t, &config)?;
            create_dir(&out)?;
            enc.schema.save(out.join("schema.txt"))?;
            save_manifest(&enc.layout, out.join("layout.txt"))?;
            let images = out.join("images");
            let index = encode_dataset(&train_t.records, Split::Train, &enc.encoder, &images, common.workers)?
                .merge(encode_dataset(&test_t.records, Split::Test, &enc.encoder, &images, common.workers)?);
            index.save(out.join("index.csv"))?;
            write_metadata(&out, command_line, common_echo(&common))?;
            println!(
                "encoded {} thumbnails ({} skipped), index {}",
                index.entries.len(),
                index.skipped,
                index.digest()
            );
        }
        Command::Counts {
            train,
            test,
            out,
            table,
        } => {
            let tr = load(&train, Split::Train, &table)?.class_counts();
            let te = load(&test, Split::Test, &table)?.class_counts();
            let mut report = count_report(&tr, &te);
            let (tn, ta) = tr.binary();
            let (sn, sa) = te.binary();
            report.push_str(&format!("# train total={} normal={tn} attack={ta}\n", tr.total()));
            report.push_str(&format!("# test total={} normal={sn} attack={sa}\n", te.total()));
            match out {
                Some(path) => write_file(&path, &report)?,
                None => print!("{report}"),
            }
        }
        Command::Subset {
            input,
            out,
            cap,
            holdout,
            common,
        } => {
            let table = common.task.apply(&load(&input, Split::Train, &common.table)?);
            let plan = SubsetPlan::new(cap, holdout, derive_seed(common.seed, "subset"))?;
            let subset = make_balanced_subset(&table, &plan)?;
            create_dir(&out)?;
            subset.train.write_csv(out.join("train.csv"))?;
            subset.holdout.write_csv(out.join("holdout.csv"))?;
            for class in &subset.flagged {
                eprintln!("flowpix: class `{class}` has fewer than 2 records; kept in train only");
            }
            let mut echo = common_echo(&common);
            echo.push(("cap".into(), cap.to_string()));
            echo.push(("holdout".into(), holdout.to_string()));
            write_metadata(&out, command_line, echo)?;
            print!("{}", count_report(&subset.train.class_counts(), &subset.holdout.class_counts()));
        }
        Command::Train {
            train,
            out,
            model,
            common,
        } => {
            let table = load(&train, Split::Train, &common.table)?;
            let config = pipeline_config(&model, &common);
            let run = crate::pipeline::train(&table, &config)?;
            run.save(&out)?;
            write_metadata(&out, command_line, config.echo())?;
            println!("model {} trained on {} records ({} skipped)", run.model.digest(), table.len() - run.skipped, run.skipped);
        }
        Command::Eval {
            model,
            test,
            out,
            report,
            common,
        } => {
            let mut run = TrainedRun::load(&model)?;
            run.config.workers = common.workers;
            let table = load(&test, Split::Test, &common.table)?;
            let table = maybe_subsample(table, run.config.task, report.quota()?, common.seed)?;
            let result = run.evaluate(&table)?;
            create_dir(&out)?;
            let rendered = render_report(&result, report.format);
            write_file(&out.join(report_name(report.format)), &rendered)?;
            let mut echo = run.config.echo();
            echo.push(("eval_seed".into(), common.seed.to_string()));
            echo.extend(report.echo());
            write_metadata(&out, command_line, echo)?;
            print!("{rendered}");
        }
        Command::Importance { model, top, out } => {
            let path = if model.is_dir() { model.join(FOREST_FILE) } else { model };
            let forest = ForestModel::load(&path)?;
            let text = importance(&forest).to_text(top);
            match out {
                Some(p) => write_file(&p, &text)?,
                None => print!("{text}"),
            }
        }
        Command::AblateShuffle {
            train,
            test,
            out,
            model,
            report,
            common,
        } => {
            let train_t = load(&train, Split::Train, &common.table)?;
            let test_t = load(&test, Split::Test, &common.table)?;
            let test_t = maybe_subsample(test_t, common.task, report.quota()?, common.seed)?;
            let config = pipeline_config(&model, &common);
            let shuffle_seed = common
                .layout_shuffle
                .unwrap_or_else(|| derive_seed(common.seed, "layout/shuffle"));
            let ablation = ablate_shuffle(&train_t, &test_t, &config, shuffle_seed)?;
            for (name, r) in [("default", &ablation.default), ("shuffled", &ablation.shuffled)] {
                let dir = out.join(name);
                create_dir(&dir)?;
                write_file(&dir.join(report_name(report.format)), &render_report(r, report.format))?;
            }
            let summary = ablation.to_text();
            write_file(&out.join("ablation.csv"), &summary)?;
            let mut echo = config.echo();
            echo.push(("shuffle_seed".into(), shuffle_seed.to_string()));
            echo.extend(report.echo());
            write_metadata(&out, command_line, echo)?;
            print!("{summary}");
        }
    }
    Ok(())
}

fn report_name(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Text => "report.txt",
        ReportFormat::Csv => "report.csv",
        ReportFormat::Json => "report.json",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quota_parses_pairs() {
        let Quota::Explicit(m) = parse_quota("Normal=500, Attack=542").unwrap() else { panic!() };
        assert_eq!(m["Normal"], 500);
        assert_eq!(m["Attack"], 542);
        assert!(parse_quota("Normal").is_err());
        assert!(parse_quota("A=1,A=2").is_err());
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(["flowpix", "counts", "--trian", "x.csv"]), 1);
        assert_eq!(run(["flowpix", "frobnicate"]), 1);
    }

    #[test]
    fn missing_file_is_data_error() {
        assert_eq!(run(["flowpix", "counts", "--train", "/nonexistent/a.csv", "--test", "/nonexistent/b.csv"]), 2);
    }
}
