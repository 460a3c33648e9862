//! End-to-end glue: fit an encoding on a training table, train a classifier
//! on its thumbnails, evaluate on another table, and persist the run.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::dataset::LabeledTable;
use crate::encode::{raw_features, with_workers, Encoder, Thumbnail, DEFAULT_PAD_VALUE};
use crate::error::{Error, Result};
use crate::eval::{confusion, EvalReport, RunMetadata};
use crate::forest::{train_forest, ForestModel, ForestParams, TrainingSet};
use crate::layout::{load_manifest_for, permute_layout, save_manifest, LayoutManifest};
use crate::pixelclf::{train_pixel_model, LinearModel, TrainConfig, TrainingHistory};
use crate::record::FlowRecord;
use crate::schema::{expand_columns, infer_schema, FeatureSchema, SchemaOptions};

pub const SCHEMA_FILE: &str = "schema.txt";
pub const LAYOUT_FILE: &str = "layout.txt";
pub const FOREST_FILE: &str = "model.forest";
pub const LINEAR_FILE: &str = "model.linear";
pub const RUN_FILE: &str = "run.txt";

macro_rules! keyword_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::InvalidParam(format!(
                        concat!("unknown ", stringify!($name), " `{}` (expected one of: ", $($text, " "),+, ")"),
                        other
                    ))),
                }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    /// Normal vs Attack.
    Binary,
    /// One class per attack family.
    Multiclass,
}

keyword_enum!(Task { Binary => "binary", Multiclass => "multiclass" });

impl Task {
    pub fn apply(self, table: &LabeledTable) -> LabeledTable {
        match self {
            Task::Binary => table.to_binary(),
            Task::Multiclass => table.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Forest,
    Pixel,
}

keyword_enum!(ClassifierKind { Forest => "forest", Pixel => "pixel" });

/// What the forest sees: the scaled bytes of the thumbnail, or the unscaled
/// feature values with 0/1 one-hot indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSpace {
    Pixels,
    Raw,
}

keyword_enum!(FeatureSpace { Pixels => "pixels", Raw => "raw" });

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub classifier: ClassifierKind,
    pub task: Task,
    pub feature_space: FeatureSpace,
    pub forest: ForestParams,
    pub pixel: TrainConfig,
    pub pad_value: u8,
    pub seed: u64,
    /// Thread count; 0 uses every core. Never changes results.
    pub workers: usize,
    /// Seed of a random cell permutation applied to the default layout.
    pub layout_shuffle: Option<u64>,
    pub schema: SchemaOptions,
}

impl PipelineConfig {
    pub fn new(classifier: ClassifierKind, task: Task) -> Self {
        PipelineConfig {
            classifier,
            task,
            feature_space: FeatureSpace::Pixels,
            forest: ForestParams::default(),
            pixel: TrainConfig::default(),
            pad_value: DEFAULT_PAD_VALUE,
            seed: 0,
            workers: 0,
            layout_shuffle: None,
            schema: SchemaOptions::unsw(),
        }
    }

    /// Sets the run seed and hands it to every stochastic stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.forest.seed = seed;
        self.pixel.seed = seed;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    /// Every setting that can influence the result, as key/value pairs.
    pub fn echo(&self) -> Vec<(String, String)> {
        let opt = |v: Option<usize>| v.map_or_else(|| "auto".to_string(), |v| v.to_string());
        let mut out = vec![
            ("classifier", self.classifier.to_string()),
            ("task", self.task.to_string()),
            ("seed", self.seed.to_string()),
            ("pad_value", self.pad_value.to_string()),
            (
                "layout_shuffle",
                self.layout_shuffle.map_or_else(|| "none".to_string(), |s| s.to_string()),
            ),
            ("label_column", self.schema.label_column.clone()),
            ("categorical", join(&self.schema.categorical)),
            ("ignored", join(&self.schema.ignored)),
        ];
        match self.classifier {
            ClassifierKind::Forest => out.extend([
                ("feature_space", self.feature_space.to_string()),
                ("trees", self.forest.n_trees.to_string()),
                ("mtry", opt(self.forest.mtry)),
                ("max_depth", opt(self.forest.max_depth)),
                ("min_samples_leaf", self.forest.min_samples_leaf.to_string()),
                ("bootstrap", self.forest.bootstrap.to_string()),
            ]),
            ClassifierKind::Pixel => out.extend([
                ("epochs", self.pixel.epochs.to_string()),
                ("batch_size", self.pixel.batch_size.to_string()),
                ("learning_rate", self.pixel.learning_rate.to_string()),
                ("l2", self.pixel.l2.to_string()),
            ]),
        }
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Inverse of [`PipelineConfig::echo`]. `workers` is not recorded and
    /// comes back as 0.
    pub fn from_echo(echo: &[(String, String)]) -> Result<Self> {
        let get = |key: &str| {
            echo.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Format(format!("settings lack `{key}`")))
        };
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Format(format!("setting `{key}` has bad value {v:?}")))
        }
        let auto = |key: &str| -> Result<Option<usize>> {
            match get(key)? {
                "auto" => Ok(None),
                v => num(key, v).map(Some),
            }
        };
        let list = |v: &str| -> Vec<String> { v.split('|').filter(|s| !s.is_empty()).map(str::to_string).collect() };

        let classifier: ClassifierKind = get("classifier")?.parse()?;
        let mut c = PipelineConfig::new(classifier, get("task")?.parse()?).with_seed(num("seed", get("seed")?)?);
        c.pad_value = num("pad_value", get("pad_value")?)?;
        c.layout_shuffle = match get("layout_shuffle")? {
            "none" => None,
            v => Some(num("layout_shuffle", v)?),
        };
        c.schema = SchemaOptions::new(list(get("categorical")?), get("label_column")?)
            .ignoring(list(get("ignored")?));
        match classifier {
            ClassifierKind::Forest => {
                c.feature_space = get("feature_space")?.parse()?;
                c.forest.n_trees = num("trees", get("trees")?)?;
                c.forest.mtry = auto("mtry")?;
                c.forest.max_depth = auto("max_depth")?;
                c.forest.min_samples_leaf = num("min_samples_leaf", get("min_samples_leaf")?)?;
                c.forest.bootstrap = num("bootstrap", get("bootstrap")?)?;
            }
            ClassifierKind::Pixel => {
                c.pixel.epochs = num("epochs", get("epochs")?)?;
                c.pixel.batch_size = num("batch_size", get("batch_size")?)?;
                c.pixel.learning_rate = num("learning_rate", get("learning_rate")?)?;
                c.pixel.l2 = num("l2", get("l2")?)?;
            }
        }
        Ok(c)
    }
}

fn join<'a>(items: impl IntoIterator<Item = &'a String>) -> String {
    items.into_iter().map(String::as_str).collect::<Vec<_>>().join("|")
}

/// Fitted schema, layout and the encoder built from them.
#[derive(Debug, Clone)]
pub struct Encoding {
    pub schema: FeatureSchema,
    pub layout: LayoutManifest,
    pub encoder: Encoder,
}

impl Encoding {
    pub fn new(schema: FeatureSchema, layout: LayoutManifest, pad_value: u8) -> Result<Self> {
        let encoder = Encoder::new(&schema, &layout, pad_value)?;
        Ok(Encoding {
            schema,
            layout,
            encoder,
        })
    }
}

/// Infers the schema from `train` (labels already mapped for the task) and
/// builds the default layout, permuted if the config asks for it.
pub fn fit_encoding(train: &LabeledTable, config: &PipelineConfig) -> Result<Encoding> {
    let schema = infer_schema(&train.records, &config.schema)?;
    let mut layout = LayoutManifest::for_schema(&schema)?;
    if let Some(seed) = config.layout_shuffle {
        layout = permute_layout(&layout, seed);
    }
    Encoding::new(schema, layout, config.pad_value)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Forest {
        model: ForestModel,
        space: FeatureSpace,
    },
    Pixel(LinearModel),
}

impl Model {
    pub fn class_names(&self) -> &[String] {
        match self {
            Model::Forest { model, .. } => &model.class_names,
            Model::Pixel(m) => &m.class_names,
        }
    }

    pub fn digest(&self) -> String {
        match self {
            Model::Forest { model, .. } => model.digest(),
            Model::Pixel(m) => m.digest(),
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Model::Forest { .. } => ClassifierKind::Forest,
            Model::Pixel(_) => ClassifierKind::Pixel,
        }
    }

    /// Predicted class for an already-encoded record.
    pub fn predict(&self, encoding: &Encoding, record: &FlowRecord, thumb: &Thumbnail) -> Result<usize> {
        match self {
            Model::Forest {
                model,
                space: FeatureSpace::Pixels,
            } => model.predict_bytes(&encoding.encoder.feature_vector(&thumb.pixels)),
            Model::Forest {
                model,
                space: FeatureSpace::Raw,
            } => model.predict(&raw_features(record, &encoding.schema)?),
            Model::Pixel(m) => Ok(m.predict_class(&thumb.pixels)),
        }
    }
}

/// Content checksum over record ids, labels and pixels.
pub fn dataset_digest(thumbnails: &[Thumbnail]) -> String {
    let mut h = Sha256::new();
    for t in thumbnails {
        h.update(t.record_id.to_string().as_bytes());
        h.update([0]);
        h.update((t.label as u64).to_le_bytes());
        h.update(t.pixels);
    }
    hex::encode(&h.finalize()[..8])
}

/// Records paired with their thumbnails; records that fail to encode are
/// dropped and counted.
fn encode_table<'a>(
    encoder: &Encoder,
    table: &'a LabeledTable,
    workers: usize,
) -> Result<(Vec<(&'a FlowRecord, Thumbnail)>, usize)> {
    let encoded: Vec<Option<(&FlowRecord, Thumbnail)>> = with_workers(workers, || {
        table
            .records
            .par_iter()
            .map(|r| encoder.encode(r).ok().map(|t| (r, t)))
            .collect()
    })?;
    let total = encoded.len();
    let kept: Vec<_> = encoded.into_iter().flatten().collect();
    let skipped = total - kept.len();
    Ok((kept, skipped))
}

#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub config: PipelineConfig,
    pub encoding: Encoding,
    pub model: Model,
    pub train_digest: String,
    pub skipped: usize,
    /// Loss trace for the pixel baseline.
    pub history: Option<TrainingHistory>,
}

pub fn train(train: &LabeledTable, config: &PipelineConfig) -> Result<TrainedRun> {
    let table = config.task.apply(train);
    let encoding = fit_encoding(&table, config)?;
    let (pairs, skipped) = encode_table(&encoding.encoder, &table, config.workers)?;
    let thumbs: Vec<Thumbnail> = pairs.iter().map(|(_, t)| t.clone()).collect();
    let class_names = encoding.schema.class_names().to_vec();
    let labels: Vec<usize> = thumbs.iter().map(|t| t.label).collect();

    let (model, history) = match config.classifier {
        ClassifierKind::Forest => {
            let (data, names) = match config.feature_space {
                FeatureSpace::Pixels => {
                    let rows: Vec<Vec<u8>> = thumbs
                        .iter()
                        .map(|t| encoding.encoder.feature_vector(&t.pixels))
                        .collect();
                    (
                        TrainingSet::from_byte_rows(&rows, labels, class_names.len())?,
                        encoding.layout.column_names(),
                    )
                }
                FeatureSpace::Raw => {
                    let rows = pairs
                        .iter()
                        .map(|(r, _)| raw_features(r, &encoding.schema))
                        .collect::<Result<Vec<_>>>()?;
                    let names = expand_columns(&encoding.schema).into_iter().map(|c| c.name).collect();
                    (TrainingSet::from_real_rows(&rows, labels, class_names.len())?, names)
                }
            };
            let mut model = train_forest(&data, &config.forest, class_names, names, config.workers)?;
            model.schema_digest = Some(encoding.schema.digest());
            (
                Model::Forest {
                    model,
                    space: config.feature_space,
                },
                None,
            )
        }
        ClassifierKind::Pixel => {
            let (model, history) = train_pixel_model(&thumbs, class_names, &config.pixel)?;
            (Model::Pixel(model), Some(history))
        }
    };
    Ok(TrainedRun {
        config: config.clone(),
        encoding,
        model,
        train_digest: dataset_digest(&thumbs),
        skipped,
        history,
    })
}

impl TrainedRun {
    /// Scores `test` (raw labels; the task mapping is applied here).
    /// Records whose class or values the encoding cannot represent are skipped.
    pub fn evaluate(&self, test: &LabeledTable) -> Result<EvalReport> {
        let table = self.config.task.apply(test);
        let (pairs, _) = encode_table(&self.encoding.encoder, &table, self.config.workers)?;
        let predicted: Vec<usize> = with_workers(self.config.workers, || {
            pairs
                .par_iter()
                .map(|(r, t)| self.model.predict(&self.encoding, r, t))
                .collect::<Result<Vec<_>>>()
        })??;
        let truth: Vec<usize> = pairs.iter().map(|(_, t)| t.label).collect();
        let thumbs: Vec<Thumbnail> = pairs.into_iter().map(|(_, t)| t).collect();
        let matrix = confusion(&truth, &predicted, self.model.class_names())?;
        let metadata = RunMetadata {
            model_digest: self.model.digest(),
            dataset_digest: dataset_digest(&thumbs),
            seed: self.config.seed,
            config: self.config.echo(),
        };
        Ok(EvalReport::from_matrix(matrix, metadata))
    }

    /// Writes schema, layout, model and the config echo into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(Error::at_path(dir))?;
        self.encoding.schema.save(dir.join(SCHEMA_FILE))?;
        save_manifest(&self.encoding.layout, dir.join(LAYOUT_FILE))?;
        match &self.model {
            Model::Forest { model, .. } => model.save(dir.join(FOREST_FILE))?,
            Model::Pixel(m) => m.save(dir.join(LINEAR_FILE))?,
        }
        let mut echo = self.config.echo();
        echo.push(("model_digest".into(), self.model.digest()));
        echo.push(("train_digest".into(), self.train_digest.clone()));
        echo.push(("skipped".into(), self.skipped.to_string()));
        write_echo(dir.join(RUN_FILE), &echo)
    }

    /// Reloads a run written by [`TrainedRun::save`].
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let echo = read_echo(dir.join(RUN_FILE))?;
        let get = |key: &str| {
            echo.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Format(format!("{RUN_FILE} lacks `{key}`")))
        };
        let bad = |key: &str| Error::Format(format!("{RUN_FILE} has a bad `{key}`"));
        let config = PipelineConfig::from_echo(&echo)?;
        let classifier = config.classifier;
        let schema = FeatureSchema::load(dir.join(SCHEMA_FILE))?;
        let layout = load_manifest_for(dir.join(LAYOUT_FILE), &schema)?;
        let model = match classifier {
            ClassifierKind::Forest => {
                let model = ForestModel::load(dir.join(FOREST_FILE))?;
                if model.schema_digest.as_deref() != Some(schema.digest().as_str()) {
                    return Err(Error::StaleManifest {
                        expected: schema.digest(),
                        found: model.schema_digest.clone().unwrap_or_default(),
                    });
                }
                Model::Forest {
                    model,
                    space: config.feature_space,
                }
            }
            ClassifierKind::Pixel => Model::Pixel(LinearModel::load(dir.join(LINEAR_FILE))?),
        };
        if model.class_names() != schema.class_names() {
            return Err(Error::InvalidManifest(
                "model classes differ from the schema classes".into(),
            ));
        }
        Ok(TrainedRun {
            encoding: Encoding::new(schema, layout, config.pad_value)?,
            config,
            model,
            train_digest: get("train_digest")?.to_string(),
            skipped: get("skipped")?.parse().map_err(|_| bad("skipped"))?,
            history: None,
        })
    }
}

/// `key=value` lines, one setting each.
pub fn write_echo(path: impl AsRef<Path>, echo: &[(String, String)]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for (k, v) in echo {
        let _ = writeln!(out, "{k}={v}");
    }
    fs::write(path, out).map_err(Error::at_path(path))
}

pub fn read_echo(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(Error::at_path(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Format(format!("bad settings line {l:?}")))
        })
        .collect()
}

/// Accuracy of the default layout against a random cell permutation.
#[derive(Debug, Clone)]
pub struct ShuffleAblation {
    pub shuffle_seed: u64,
    pub default: EvalReport,
    pub shuffled: EvalReport,
}

impl ShuffleAblation {
    /// Shuffled minus default overall accuracy, as a ratio.
    pub fn delta(&self) -> Option<f64> {
        Some(self.shuffled.overall_accuracy? - self.default.overall_accuracy?)
    }

    pub fn to_text(&self) -> String {
        let pct = |a: Option<f64>| a.map_or_else(|| "-".to_string(), |a| format!("{:.2}%", a * 100.0));
        let mut out = String::new();
        let _ = writeln!(out, "layout,overall_accuracy,records");
        let _ = writeln!(out, "default,{},{}", pct(self.default.overall_accuracy), self.default.matrix.total());
        let _ = writeln!(
            out,
            "shuffled({}),{},{}",
            self.shuffle_seed,
            pct(self.shuffled.overall_accuracy),
            self.shuffled.matrix.total()
        );
        let delta = self
            .delta()
            .map_or_else(|| "-".to_string(), |d| format!("{:+.2}", d * 100.0));
        let _ = writeln!(out, "delta_points,{delta}");
        out
    }
}

/// Trains and evaluates the same configuration twice: once on the default
/// layout and once with every cell permuted by `shuffle_seed`.
pub fn ablate_shuffle(
    train_table: &LabeledTable,
    test_table: &LabeledTable,
    config: &PipelineConfig,
    shuffle_seed: u64,
) -> Result<ShuffleAblation> {
    let mut base = config.clone();
    base.layout_shuffle = None;
    let default = train(train_table, &base)?.evaluate(test_table)?;
    let mut shuffled_cfg = config.clone();
    shuffled_cfg.layout_shuffle = Some(shuffle_seed);
    let shuffled = train(train_table, &shuffled_cfg)?.evaluate(test_table)?;
    Ok(ShuffleAblation {
        shuffle_seed,
        default,
        shuffled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_fixture, FixtureShape};

    fn quick(classifier: ClassifierKind) -> PipelineConfig {
        let mut c = PipelineConfig::new(classifier, Task::Multiclass).with_seed(3);
        c.schema = SchemaOptions::new(["proto", "service"], "attack_cat");
        c.forest.n_trees = 10;
        c.pixel.epochs = 5;
        c
    }

    #[test]
    fn forest_run_round_trips_through_disk() {
        let train_t = synth_fixture(1, 30, 3, &FixtureShape::small()).unwrap();
        let test_t = synth_fixture(2, 10, 3, &FixtureShape::small()).unwrap();
        let run = train(&train_t, &quick(ClassifierKind::Forest)).unwrap();
        let before = run.evaluate(&test_t).unwrap();
        let dir = tempfile::tempdir().unwrap();
        run.save(dir.path()).unwrap();
        let loaded = TrainedRun::load(dir.path()).unwrap();
        let after = loaded.evaluate(&test_t).unwrap();
        assert_eq!(before.matrix, after.matrix);
        assert_eq!(before.metadata.model_digest, after.metadata.model_digest);
        assert_eq!(loaded.config.echo(), run.config.echo());
    }

    #[test]
    fn echo_round_trips_for_both_classifiers() {
        for kind in [ClassifierKind::Forest, ClassifierKind::Pixel] {
            let mut c = PipelineConfig::new(kind, Task::Binary).with_seed(9);
            c.layout_shuffle = Some(4);
            c.forest.mtry = Some(3);
            c.pixel.learning_rate = 0.05;
            c.pad_value = 0;
            let back = PipelineConfig::from_echo(&c.echo()).unwrap();
            match kind {
                ClassifierKind::Forest => assert_eq!(back.forest, c.forest),
                ClassifierKind::Pixel => assert_eq!(back.pixel, c.pixel),
            }
            assert_eq!((back.seed, back.pad_value, back.layout_shuffle), (9, 0, Some(4)));
            assert_eq!(back.schema, c.schema);
        }
    }

    #[test]
    fn raw_space_uses_expanded_column_names() {
        let train_t = synth_fixture(1, 20, 2, &FixtureShape::small()).unwrap();
        let mut cfg = quick(ClassifierKind::Forest);
        cfg.feature_space = FeatureSpace::Raw;
        let run = train(&train_t, &cfg).unwrap();
        let Model::Forest { model, .. } = &run.model else { panic!() };
        let expected: Vec<String> =
            expand_columns(&run.encoding.schema).into_iter().map(|c| c.name).collect();
        assert_eq!(model.feature_names, expected);
        assert!(run.evaluate(&train_t).unwrap().overall_accuracy.unwrap() > 0.9);
    }

    #[test]
    fn keywords_parse_and_reject() {
        assert_eq!("binary".parse::<Task>().unwrap(), Task::Binary);
        assert_eq!("pixel".parse::<ClassifierKind>().unwrap(), ClassifierKind::Pixel);
        assert!("trees".parse::<ClassifierKind>().is_err());
    }

    #[test]
    fn binary_task_collapses_classes() {
        let train_t = synth_fixture(5, 20, 3, &FixtureShape::small()).unwrap();
        let mut cfg = quick(ClassifierKind::Pixel);
        cfg.task = Task::Binary;
        let run = train(&train_t, &cfg).unwrap();
        assert_eq!(run.model.class_names(), ["Normal", "Attack"]);
    }
}
