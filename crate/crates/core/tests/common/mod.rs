//! Oracles and fixtures shared by the integration suites.
#![allow(dead_code)]

use std::path::PathBuf;

use flowpix::dataset::{load_csv, LabeledTable, LoadOptions};
use flowpix::forest::TrainingSet;
use flowpix::record::Split;
use flowpix::schema::{FeatureKind, FeatureSchema};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A random split-search problem, row-major so the oracle never touches the
/// column store under test.
pub struct SplitCase {
    pub values: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub rows: Vec<usize>,
    pub candidates: Vec<usize>,
    pub min_leaf: usize,
    pub data: TrainingSet,
}

pub fn random_split_case(seed: u64, bytes: bool) -> SplitCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=200);
    let d = rng.gen_range(1..=5);
    let k = rng.gen_range(2..=4);
    // a few distinct levels per feature forces ties between thresholds
    let levels: Vec<u32> = (0..d).map(|_| rng.gen_range(2..=40)).collect();
    let mut byte_rows = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        if bytes {
            let r: Vec<u8> = levels
                .iter()
                .map(|&l| (rng.gen_range(0..l) * 255 / l) as u8)
                .collect();
            values.push(r.iter().map(|&b| f64::from(b)).collect());
            byte_rows.push(r);
        } else {
            values.push(
                levels
                    .iter()
                    .map(|&l| f64::from(rng.gen_range(0..l)) * 0.37 - 3.0 + if rng.gen_bool(0.3) { rng.gen::<f64>() } else { 0.0 })
                    .collect(),
            );
        }
    }
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let data = if bytes {
        TrainingSet::from_byte_rows(&byte_rows, labels.clone(), k).unwrap()
    } else {
        TrainingSet::from_real_rows(&values, labels.clone(), k).unwrap()
    };
    // bootstrap-style rows with repeats
    let m = rng.gen_range(2..=n.max(2));
    let rows: Vec<usize> = (0..m).map(|_| rng.gen_range(0..n)).collect();
    let n_cand = rng.gen_range(1..=d);
    let candidates = rand::seq::index::sample(&mut rng, d, n_cand).into_vec();
    let min_leaf = rng.gen_range(1..=3);
    SplitCase {
        values,
        labels,
        n_classes: k,
        rows,
        candidates,
        min_leaf,
        data,
    }
}

/// Exhaustive answer: (feature, sorted left-row multiset, ΣcL²/nL + ΣcR²/nR
/// as num/den). Every candidate feature and every cut between distinct
/// values is tried; the strictly largest positive decrease wins, ties going
/// to the lower feature and then the lower cut.
pub fn brute_force_split(case: &SplitCase) -> Option<(usize, Vec<usize>, (u128, u128))> {
    let k = case.n_classes;
    let counts = |rows: &[usize]| {
        let mut c = vec![0u64; k];
        rows.iter().for_each(|&r| c[case.labels[r]] += 1);
        c
    };
    let sum_sq = |c: &[u64]| c.iter().map(|&x| u128::from(x * x)).sum::<u128>();
    let n = case.rows.len() as u128;
    let parent_sq = sum_sq(&counts(&case.rows));

    let mut features = case.candidates.clone();
    features.sort_unstable();
    let mut best: Option<(usize, Vec<usize>, (u128, u128))> = None;
    for &f in &features {
        let mut distinct: Vec<f64> = case.rows.iter().map(|&r| case.values[r][f]).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        // cut after each distinct value except the last
        for &cut in distinct.iter().take(distinct.len().saturating_sub(1)) {
            let (left, right): (Vec<usize>, Vec<usize>) =
                case.rows.iter().partition(|&&r| case.values[r][f] <= cut);
            if left.len() < case.min_leaf || right.len() < case.min_leaf {
                continue;
            }
            let (nl, nr) = (left.len() as u128, right.len() as u128);
            let num = sum_sq(&counts(&left)) * nr + sum_sq(&counts(&right)) * nl;
            let den = nl * nr;
            if num * n <= parent_sq * den {
                continue; // no decrease
            }
            let better = match &best {
                None => true,
                Some((_, _, (bn, bd))) => num * bd > bn * den,
            };
            if better {
                let mut sorted = left.clone();
                sorted.sort_unstable();
                best = Some((f, sorted, (num, den)));
            }
        }
    }
    best
}

/// Nearest-centroid classifier scored on `eval`, centroids from `fit`, on
/// min-max scaled numeric features.
pub fn nearest_centroid_accuracy(
    schema: &FeatureSchema,
    fit: &LabeledTable,
    eval: &LabeledTable,
) -> f64 {
    let ranges: Vec<(&str, f64, f64)> = schema
        .features()
        .iter()
        .filter_map(|f| match f.kind {
            FeatureKind::Numeric { min, max } => Some((f.name.as_str(), min, max)),
            _ => None,
        })
        .collect();
    let vector = |r: &flowpix::record::FlowRecord| -> Vec<f64> {
        ranges
            .iter()
            .map(|(name, lo, hi)| {
                let v: f64 = r.get(name).unwrap().parse().unwrap();
                if hi > lo { (v - lo) / (hi - lo) } else { 0.0 }
            })
            .collect()
    };
    let classes = schema.class_names();
    let mut sums = vec![vec![0.0; ranges.len()]; classes.len()];
    let mut counts = vec![0usize; classes.len()];
    for r in &fit.records {
        let k = schema.class_index(&r.label).unwrap();
        for (s, v) in sums[k].iter_mut().zip(vector(r)) {
            *s += v;
        }
        counts[k] += 1;
    }
    let centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| s.into_iter().map(|x| x / c.max(1) as f64).collect())
        .collect();
    let correct = eval
        .records
        .iter()
        .filter(|r| {
            let x = vector(r);
            let dist = |c: &Vec<f64>| c.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let nearest = (0..centroids.len())
                .min_by(|&a, &b| dist(&centroids[a]).total_cmp(&dist(&centroids[b])))
                .unwrap();
            schema.class_index(&r.label) == Some(nearest)
        })
        .count();
    correct as f64 / eval.len() as f64
}

/// The UNSW-NB15 feature CSVs, if present: `(train, test)`.
///
/// Looks in `$FLOWPIX_UNSW_DIR` or `<workspace>/data/`. The official file
/// names are swapped relative to their sizes, so the tables are told apart
/// by row count: the 82,332-row table is the training split.
pub fn unsw_tables() -> Option<(LabeledTable, LabeledTable)> {
    let dir = std::env::var_os("FLOWPIX_UNSW_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    let a = dir.join("UNSW_NB15_training-set.csv");
    let b = dir.join("UNSW_NB15_testing-set.csv");
    if !a.exists() || !b.exists() {
        return None;
    }
    let opts = LoadOptions::unsw();
    let ta = load_csv(&a, Split::Train, &opts).expect("load UNSW table");
    let tb = load_csv(&b, Split::Train, &opts).expect("load UNSW table");
    let (mut train, mut test) = if ta.len() <= tb.len() { (ta, tb) } else { (tb, ta) };
    train.split = Split::Train;
    test.split = Split::Test;
    Some((train, test))
}

/// A random schema (numeric ranges, vocabularies, classes) and `n` records
/// drawn inside it. Numeric values hit the range ends now and then.
pub fn random_schema_records(seed: u64, n: usize) -> (FeatureSchema, Vec<flowpix::record::FlowRecord>) {
    use flowpix::record::{FlowRecord, Header, RecordId};
    use flowpix::schema::FeatureSpec;
    use std::sync::Arc;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_numeric = rng.gen_range(1..=40);
    let mut features = Vec::new();
    for i in 0..n_numeric {
        let lo: f64 = rng.gen_range(-1e4..1e4);
        let span = if rng.gen_bool(0.1) { 0.0 } else { 10f64.powf(rng.gen_range(-3.0..6.0)) };
        features.push(FeatureSpec::numeric(format!("n{i}"), lo, lo + span));
    }
    for (g, name) in ["proto", "service", "state", "flag"].iter().enumerate().take(rng.gen_range(1..=4)) {
        let size = rng.gen_range(1..=30);
        let mut vocab: Vec<String> = (0..size).map(|j| format!("{name}{g}v{j:02}")).collect();
        vocab.sort();
        features.push(FeatureSpec::categorical(*name, vocab));
    }
    let classes = vec!["Normal".to_string(), "Exploits".to_string(), "Worms".to_string()];
    let schema = FeatureSchema::new(features, "attack_cat", classes.clone()).unwrap();

    let mut names: Vec<String> = schema.features().iter().map(|f| f.name.clone()).collect();
    names.push("attack_cat".into());
    let header = Arc::new(Header::new(names));
    let records = (0..n)
        .map(|row| {
            let mut values: Vec<String> = schema
                .features()
                .iter()
                .map(|f| match &f.kind {
                    FeatureKind::Numeric { min, max } => {
                        let v = match rng.gen_range(0..10) {
                            0 => *min,
                            1 => *max,
                            _ => min + (max - min) * rng.gen::<f64>(),
                        };
                        format!("{v}")
                    }
                    FeatureKind::Categorical { vocab } => vocab[rng.gen_range(0..vocab.len())].clone(),
                })
                .collect();
            let label = classes[rng.gen_range(0..classes.len())].clone();
            values.push(label.clone());
            FlowRecord {
                header: header.clone(),
                values,
                label,
                record_id: RecordId::new("rand", row),
            }
        })
        .collect();
    (schema, records)
}

/// Checks encode→decode on every record: categories exact, numerics within
/// one quantization step. Returns the number of mismatches.
pub fn round_trip_mismatches(schema: &FeatureSchema, records: &[flowpix::record::FlowRecord]) -> usize {
    use flowpix::encode::{decode_thumbnail, Encoder};
    use flowpix::layout::LayoutManifest;

    let layout = LayoutManifest::for_schema(schema).unwrap();
    let encoder = Encoder::new(schema, &layout, 255).unwrap();
    let mut bad = 0;
    for r in records {
        let thumb = encoder.encode(r).unwrap();
        let decoded = decode_thumbnail(&thumb, schema, &layout).unwrap();
        for f in schema.features() {
            let raw = r.get(&f.name).unwrap();
            let ok = match &f.kind {
                FeatureKind::Numeric { min, max } => {
                    let v: f64 = raw.parse().unwrap();
                    let got = decoded.numeric_value(&f.name).unwrap();
                    (got - v).abs() <= (max - min) / 255.0 + 1e-9 * v.abs().max(1.0)
                }
                FeatureKind::Categorical { .. } => decoded.category(&f.name) == Some(Some(raw)),
            };
            if !ok {
                bad += 1;
            }
        }
    }
    bad
}

/// Everything a full encode + train + eval run leaves behind, for
/// byte-level comparison between runs.
#[derive(Debug, PartialEq, Eq)]
pub struct RunArtifacts {
    pub index_csv: String,
    pub png_bytes: Vec<(String, Vec<u8>)>,
    pub model_digests: Vec<String>,
    pub reports: Vec<String>,
}

pub fn run_artifacts(
    train: &LabeledTable,
    test: &LabeledTable,
    schema_options: &flowpix::schema::SchemaOptions,
    workers: usize,
    out: &std::path::Path,
) -> RunArtifacts {
    use flowpix::encode::encode_dataset;
    use flowpix::eval::{render_report, ReportFormat};
    use flowpix::pipeline::{fit_encoding, train as fit, ClassifierKind, PipelineConfig, Task};

    let mut base = PipelineConfig::new(ClassifierKind::Forest, Task::Multiclass)
        .with_seed(5)
        .with_workers(workers);
    base.schema = schema_options.clone();
    let enc = fit_encoding(train, &base).unwrap();
    let index = encode_dataset(&train.records, Split::Train, &enc.encoder, out, workers)
        .unwrap()
        .merge(encode_dataset(&test.records, Split::Test, &enc.encoder, out, workers).unwrap());
    let png_bytes = index
        .entries
        .iter()
        .map(|e| (e.path.clone(), std::fs::read(out.join(&e.path)).unwrap()))
        .collect();

    let mut model_digests = Vec::new();
    let mut reports = Vec::new();
    for kind in [ClassifierKind::Forest, ClassifierKind::Pixel] {
        let mut cfg = base.clone();
        cfg.classifier = kind;
        cfg.forest.n_trees = 40;
        let run = fit(train, &cfg).unwrap();
        model_digests.push(run.model.digest());
        let report = run.evaluate(test).unwrap();
        for f in [ReportFormat::Text, ReportFormat::Csv, ReportFormat::Json] {
            reports.push(render_report(&report, f));
        }
    }
    RunArtifacts {
        index_csv: index.to_csv(),
        png_bytes,
        model_digests,
        reports,
    }
}

/// Compares `best_split` with [`brute_force_split`] on one random case;
/// `None` when they agree on feature, left partition and decrease.
pub fn split_mismatch(seed: u64, bytes: bool) -> Option<String> {
    let case = random_split_case(seed, bytes);
    let got = flowpix::forest::best_split(&case.data, &case.rows, &case.candidates, case.min_leaf);
    match (got, brute_force_split(&case)) {
        (None, None) => None,
        (Some(g), Some((feature, left, (num, den)))) => {
            if g.feature != feature {
                return Some(format!("seed {seed}: feature {} vs {feature}", g.feature));
            }
            let mut got_left: Vec<usize> = case
                .rows
                .iter()
                .copied()
                .filter(|&r| case.values[r][g.feature] <= g.threshold)
                .collect();
            got_left.sort_unstable();
            if got_left != left || g.n_left != left.len() || g.n_left + g.n_right != case.rows.len() {
                return Some(format!("seed {seed}: left partition differs"));
            }
            let n = case.rows.len() as f64;
            let mut c = vec![0f64; case.n_classes];
            case.rows.iter().for_each(|&r| c[case.labels[r]] += 1.0);
            let parent = c.iter().map(|x| x * x).sum::<f64>() / n;
            let want = (num as f64 / den as f64 - parent) / n;
            ((g.impurity_decrease - want).abs() >= 1e-12)
                .then(|| format!("seed {seed}: decrease {} vs {want}", g.impurity_decrease))
        }
        (g, w) => Some(format!("seed {seed}: got {:?}, brute force {:?}", g.map(|g| g.feature), w.map(|w| w.0))),
    }
}
