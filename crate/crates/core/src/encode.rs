//! Flow record → thumbnail encoding.
//!
//! Numeric features are min-max scaled onto 0..=255 with the training range,
//! one-hot cells are 0 or 255, and padding cells carry a uniform pad value.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::layout::{cell_lookup, LayoutManifest, CELLS};
use crate::pngio::{self, PixelGrid};
use crate::record::{FlowRecord, RecordId, Split};
use crate::schema::{parse_numeric, FeatureKind, FeatureSchema};

pub const DEFAULT_PAD_VALUE: u8 = 255;
pub const HOT: u8 = 255;

/// Min-max scale onto a byte. Values outside the range are clamped, a
/// degenerate range maps to 0, and ties round half away from zero.
pub fn scale_numeric(value: f64, min: f64, max: f64) -> Result<u8> {
    if !value.is_finite() {
        return Err(Error::NonFinite(value));
    }
    debug_assert!(min <= max);
    if min == max {
        return Ok(0);
    }
    let t = (value.clamp(min, max) - min) / (max - min);
    Ok((255.0 * t).round().clamp(0.0, 255.0) as u8)
}

/// Affine inverse of [`scale_numeric`].
pub fn descale(byte: u8, min: f64, max: f64) -> f64 {
    if min == max {
        return min;
    }
    min + (byte as f64 / 255.0) * (max - min)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thumbnail {
    pub pixels: PixelGrid,
    pub label: usize,
    pub record_id: RecordId,
}

#[derive(Debug, Clone)]
enum FeaturePlan {
    Numeric {
        column: String,
        min: f64,
        max: f64,
        cell: usize,
    },
    Categorical {
        column: String,
        vocab: Vec<String>,
        cells: Vec<usize>,
    },
}

/// Precomputed cell assignment for one (schema, layout) pair.
#[derive(Debug, Clone)]
pub struct Encoder {
    schema: FeatureSchema,
    layout: LayoutManifest,
    pad_value: u8,
    plan: Vec<FeaturePlan>,
    template: PixelGrid,
}

impl Encoder {
    pub fn new(schema: &FeatureSchema, layout: &LayoutManifest, pad_value: u8) -> Result<Self> {
        layout.check_schema(schema)?;
        let cells = cell_lookup(layout);
        let cell = |name: &str| {
            cells.get(name).copied().ok_or_else(|| {
                Error::InvalidManifest(format!("column `{name}` has no cell"))
            })
        };
        let mut plan = Vec::with_capacity(schema.features().len());
        for f in schema.features() {
            plan.push(match &f.kind {
                FeatureKind::Numeric { min, max } => FeaturePlan::Numeric {
                    column: f.name.clone(),
                    min: *min,
                    max: *max,
                    cell: cell(&f.name)?,
                },
                FeatureKind::Categorical { vocab } => FeaturePlan::Categorical {
                    column: f.name.clone(),
                    vocab: vocab.clone(),
                    cells: vocab
                        .iter()
                        .map(|c| cell(&format!("{}_{}", f.name, c)))
                        .collect::<Result<_>>()?,
                },
            });
        }
        let mut template = [0u8; CELLS];
        for (i, c) in layout.cells().iter().enumerate() {
            if c.is_none() {
                template[i] = pad_value;
            }
        }
        Ok(Encoder {
            schema: schema.clone(),
            layout: layout.clone(),
            pad_value,
            plan,
            template,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn layout(&self) -> &LayoutManifest {
        &self.layout
    }

    pub fn pad_value(&self) -> u8 {
        self.pad_value
    }

    /// Pixel grid for a record, without resolving its label.
    pub fn encode_pixels(&self, record: &FlowRecord) -> Result<PixelGrid> {
        let mut pixels = self.template;
        let missing = |column: &str| Error::MalformedRecord {
            record_id: record.record_id.to_string(),
            reason: format!("missing column `{column}`"),
        };
        for f in &self.plan {
            match f {
                FeaturePlan::Numeric {
                    column,
                    min,
                    max,
                    cell,
                } => {
                    let raw = record.get(column).ok_or_else(|| missing(column))?;
                    let v = parse_numeric(raw, record.record_id.row, column)?;
                    pixels[*cell] = scale_numeric(v, *min, *max)?;
                }
                FeaturePlan::Categorical {
                    column,
                    vocab,
                    cells,
                } => {
                    let raw = record.get(column).ok_or_else(|| missing(column))?.trim();
                    // unseen categories leave the whole group at 0
                    if let Ok(k) = vocab.binary_search_by(|c| c.as_str().cmp(raw)) {
                        pixels[cells[k]] = HOT;
                    }
                }
            }
        }
        Ok(pixels)
    }

    pub fn encode(&self, record: &FlowRecord) -> Result<Thumbnail> {
        let label = self
            .schema
            .class_index(&record.label)
            .ok_or_else(|| Error::MalformedRecord {
                record_id: record.record_id.to_string(),
                reason: format!("class `{}` is not in the schema", record.label),
            })?;
        Ok(Thumbnail {
            pixels: self.encode_pixels(record)?,
            label,
            record_id: record.record_id.clone(),
        })
    }

    /// Encodes every record on `workers` threads. Malformed records are
    /// skipped and counted; output order follows input order.
    pub fn encode_all(&self, records: &[FlowRecord], workers: usize) -> Result<(Vec<Thumbnail>, usize)> {
        let results: Vec<Result<Thumbnail>> =
            with_workers(workers, || records.par_iter().map(|r| self.encode(r)).collect())?;
        let total = results.len();
        let thumbs: Vec<Thumbnail> = results.into_iter().filter_map(Result::ok).collect();
        let skipped = total - thumbs.len();
        Ok((thumbs, skipped))
    }

    /// Non-padding pixel values in row-major cell order.
    pub fn feature_vector(&self, pixels: &PixelGrid) -> Vec<u8> {
        feature_vector(&self.layout, pixels)
    }
}

pub fn feature_vector(layout: &LayoutManifest, pixels: &PixelGrid) -> Vec<u8> {
    layout
        .cells()
        .iter()
        .zip(pixels.iter())
        .filter_map(|(c, &p)| c.as_ref().map(|_| p))
        .collect()
}

/// Unscaled feature vector in encoded-column order: raw numeric values
/// followed by 0/1 one-hot indicators.
pub fn raw_features(record: &FlowRecord, schema: &FeatureSchema) -> Result<Vec<f64>> {
    let mut numeric = Vec::new();
    let mut onehot: Vec<(u8, usize, Vec<f64>)> = Vec::new();
    for (pos, f) in schema.features().iter().enumerate() {
        let raw = record.get(&f.name).ok_or_else(|| Error::MalformedRecord {
            record_id: record.record_id.to_string(),
            reason: format!("missing column `{}`", f.name),
        })?;
        match &f.kind {
            FeatureKind::Numeric { .. } => {
                numeric.push(parse_numeric(raw, record.record_id.row, &f.name)?)
            }
            FeatureKind::Categorical { vocab } => {
                let raw = raw.trim();
                let group = vocab.iter().map(|c| f64::from(u8::from(c == raw))).collect();
                onehot.push((crate::schema::group_rank(&f.name), pos, group));
            }
        }
    }
    onehot.sort_by_key(|(rank, pos, _)| (*rank, *pos));
    numeric.extend(onehot.into_iter().flat_map(|(_, _, g)| g));
    Ok(numeric)
}

pub fn encode_record(
    record: &FlowRecord,
    schema: &FeatureSchema,
    layout: &LayoutManifest,
    pad_value: u8,
) -> Result<Thumbnail> {
    Encoder::new(schema, layout, pad_value)?.encode(record)
}

/// Feature values recovered from a thumbnail.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedRecord {
    pub numeric: Vec<(String, f64)>,
    /// `None` when no cell of the group is active (unseen category).
    pub categorical: Vec<(String, Option<String>)>,
}

impl DecodedRecord {
    pub fn numeric_value(&self, name: &str) -> Option<f64> {
        self.numeric.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn category(&self, name: &str) -> Option<Option<&str>> {
        self.categorical
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_deref())
    }
}

pub fn decode_thumbnail(
    thumbnail: &Thumbnail,
    schema: &FeatureSchema,
    layout: &LayoutManifest,
) -> Result<DecodedRecord> {
    layout.check_schema(schema)?;
    let cells = cell_lookup(layout);
    let px = |name: &str| -> Result<u8> {
        cells
            .get(name)
            .map(|&i| thumbnail.pixels[i])
            .ok_or_else(|| Error::InvalidManifest(format!("column `{name}` has no cell")))
    };
    let mut numeric = Vec::new();
    let mut categorical = Vec::new();
    for f in schema.features() {
        match &f.kind {
            FeatureKind::Numeric { min, max } => {
                numeric.push((f.name.clone(), descale(px(&f.name)?, *min, *max)));
            }
            FeatureKind::Categorical { vocab } => {
                let mut hot = Vec::new();
                for c in vocab {
                    match px(&format!("{}_{}", f.name, c))? {
                        HOT => hot.push(c),
                        0 => {}
                        other => {
                            return Err(Error::Format(format!(
                                "one-hot cell {}_{c} holds {other}",
                                f.name
                            )))
                        }
                    }
                }
                if hot.len() > 1 {
                    return Err(Error::AmbiguousDecode {
                        feature: f.name.clone(),
                        hot: hot.len(),
                    });
                }
                categorical.push((f.name.clone(), hot.first().map(|c| c.to_string())));
            }
        }
    }
    Ok(DecodedRecord {
        numeric,
        categorical,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexEntry {
    pub path: String,
    pub record_id: String,
    pub class: String,
    pub split: Split,
}

/// Listing of an encoded image dataset. Authoritative over file names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetIndex {
    pub entries: Vec<IndexEntry>,
    pub skipped: usize,
}

impl DatasetIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn merge(mut self, other: DatasetIndex) -> DatasetIndex {
        self.entries.extend(other.entries);
        self.skipped += other.skipped;
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# skipped={}", self.skipped);
        out.push_str("path,record_id,class,split\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{},{}", e.path, e.record_id, e.class, e.split);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let skipped = lines
            .next()
            .and_then(|l| l.strip_prefix("# skipped="))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| Error::Format("index lacks `# skipped=<n>` line".into()))?;
        if lines.next() != Some("path,record_id,class,split") {
            return Err(Error::Format("index header mismatch".into()));
        }
        let mut entries = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::Format(format!("bad index line {line:?}")));
            }
            entries.push(IndexEntry {
                path: parts[0].to_string(),
                record_id: parts[1].to_string(),
                class: parts[2].to_string(),
                split: parts[3].parse().map_err(Error::Format)?,
            });
        }
        Ok(DatasetIndex { entries, skipped })
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv().as_bytes()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(Error::at_path(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_csv(&fs::read_to_string(path).map_err(Error::at_path(path))?)
    }
}

pub fn thumbnail_file_name(split: Split, record_id: &RecordId, class: &str) -> String {
    format!("{split}_{record_id}_{class}.png")
}

/// Writes one PNG per record into `output_dir` and returns the index,
/// sorted by (split, record id) regardless of worker count.
pub fn encode_dataset(
    records: &[FlowRecord],
    split: Split,
    encoder: &Encoder,
    output_dir: impl AsRef<Path>,
    workers: usize,
) -> Result<DatasetIndex> {
    let dir: PathBuf = output_dir.as_ref().to_path_buf();
    fs::create_dir_all(&dir).map_err(Error::at_path(&dir))?;
    let classes = encoder.schema().class_names();

    let results: Vec<Option<(RecordId, IndexEntry)>> = with_workers(workers, || {
        records
            .par_iter()
            .map(|r| -> Result<Option<(RecordId, IndexEntry)>> {
                let Ok(thumb) = encoder.encode(r) else {
                    return Ok(None);
                };
                let class = &classes[thumb.label];
                let name = thumbnail_file_name(split, &thumb.record_id, class);
                pngio::write_png(&thumb.pixels, dir.join(&name))?;
                Ok(Some((
                    thumb.record_id.clone(),
                    IndexEntry {
                        path: name,
                        record_id: thumb.record_id.to_string(),
                        class: class.clone(),
                        split,
                    },
                )))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let skipped = results.iter().filter(|r| r.is_none()).count();
    let mut keyed: Vec<(RecordId, IndexEntry)> = results.into_iter().flatten().collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(DatasetIndex {
        entries: keyed.into_iter().map(|(_, e)| e).collect(),
        skipped,
    })
}

/// Runs `f` inside a dedicated pool of `workers` threads (0 = rayon default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParam(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::Header;
    use crate::schema::FeatureSpec;
    use std::sync::Arc;

    #[test]
    fn scale_endpoints_and_midpoint() {
        assert_eq!(scale_numeric(2.0, 2.0, 12.0).unwrap(), 0);
        assert_eq!(scale_numeric(12.0, 2.0, 12.0).unwrap(), 255);
        assert_eq!(scale_numeric(7.0, 2.0, 12.0).unwrap(), 128);
        assert_eq!(scale_numeric(7.0, 7.0, 7.0).unwrap(), 0);
    }

    #[test]
    fn scale_clamps() {
        assert_eq!(scale_numeric(-5.0, 0.0, 1.0).unwrap(), 0);
        assert_eq!(scale_numeric(50.0, 0.0, 1.0).unwrap(), 255);
    }

    #[test]
    fn scale_rejects_non_finite() {
        assert!(matches!(scale_numeric(f64::NAN, 0.0, 1.0), Err(Error::NonFinite(_))));
        assert!(scale_numeric(f64::INFINITY, 0.0, 1.0).is_err());
    }

    #[test]
    fn scale_is_monotone_and_bounded() {
        let (min, max) = (-3.5, 1234.25);
        let mut prev = 0u8;
        for i in 0..=10_000 {
            let v = -10.0 + 1300.0 * i as f64 / 10_000.0;
            let b = scale_numeric(v, min, max).unwrap();
            assert!(b >= prev);
            prev = b;
            let err = (descale(b, min, max) - v.clamp(min, max)).abs();
            assert!(err <= (max - min) / 255.0 * 0.5 + 1e-9, "v={v} err={err}");
        }
    }

    fn small_schema() -> FeatureSchema {
        FeatureSchema::new(
            vec![
                FeatureSpec::numeric("a", 0.0, 10.0),
                FeatureSpec::categorical("service", ["dns", "http"]),
            ],
            "y",
            vec!["Normal".into(), "DoS".into()],
        )
        .unwrap()
    }

    fn rec(a: &str, service: &str) -> FlowRecord {
        FlowRecord {
            header: Arc::new(Header::new(["a", "service", "y"])),
            values: vec![a.into(), service.into(), "DoS".into()],
            label: "DoS".into(),
            record_id: RecordId::new("t", 0),
        }
    }

    #[test]
    fn encode_places_one_hot_and_pad() {
        let schema = small_schema();
        let layout = LayoutManifest::for_schema(&schema).unwrap();
        let t = encode_record(&rec("0", "http"), &schema, &layout, 255).unwrap();
        assert_eq!(&t.pixels[..3], &[0, 0, 255]);
        assert!(t.pixels[3..].iter().all(|&p| p == 255));
        assert_eq!(t.label, 1);

        let t = encode_record(&rec("10", "ssh"), &schema, &layout, 7).unwrap();
        assert_eq!(&t.pixels[..3], &[255, 0, 0]);
        assert!(t.pixels[3..].iter().all(|&p| p == 7));
    }

    #[test]
    fn missing_column_is_malformed() {
        let schema = small_schema();
        let layout = LayoutManifest::for_schema(&schema).unwrap();
        let mut r = rec("1", "dns");
        r.header = Arc::new(Header::new(["a", "svc", "y"]));
        assert!(matches!(
            encode_record(&r, &schema, &layout, 255),
            Err(Error::MalformedRecord { .. })
        ));
    }

    #[test]
    fn stale_layout_is_rejected() {
        let schema = small_schema();
        let other = FeatureSchema::new(
            vec![FeatureSpec::numeric("a", 0.0, 11.0)],
            "y",
            vec![],
        )
        .unwrap();
        let layout = LayoutManifest::for_schema(&other).unwrap();
        assert!(matches!(
            Encoder::new(&schema, &layout, 255),
            Err(Error::StaleManifest { .. })
        ));
    }

    #[test]
    fn decode_reports_unseen_and_ambiguous() {
        let schema = small_schema();
        let layout = LayoutManifest::for_schema(&schema).unwrap();
        let t = encode_record(&rec("5", "ftp"), &schema, &layout, 255).unwrap();
        let d = decode_thumbnail(&t, &schema, &layout).unwrap();
        assert_eq!(d.category("service"), Some(None));
        assert!((d.numeric_value("a").unwrap() - 5.0).abs() <= 10.0 / 255.0);

        let mut both = t.clone();
        both.pixels[1] = 255;
        both.pixels[2] = 255;
        assert!(matches!(
            decode_thumbnail(&both, &schema, &layout),
            Err(Error::AmbiguousDecode { hot: 2, .. })
        ));
    }

    #[test]
    fn index_text_round_trip() {
        let idx = DatasetIndex {
            entries: vec![IndexEntry {
                path: "train_t-0_DoS.png".into(),
                record_id: "t-0".into(),
                class: "DoS".into(),
                split: Split::Train,
            }],
            skipped: 3,
        };
        assert_eq!(DatasetIndex::from_csv(&idx.to_csv()).unwrap(), idx);
        assert!(idx.to_csv().starts_with("# skipped=3\npath,record_id,class,split\n"));
    }
}
