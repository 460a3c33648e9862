//! Placement of encoded columns on the 16×16 canvas.
//!
//! A [`LayoutManifest`] binds every one of the 256 cells either to an encoded
//! column name or to padding. The default layout fills the canvas row-major in
//! encoded-column order and leaves a padded suffix; [`permute_layout`] shuffles
//! all cells, padding included, for the layout-order ablation.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::schema::{expand_columns, EncodedColumn, FeatureSchema};

pub const WIDTH: usize = 16;
pub const HEIGHT: usize = 16;
pub const CELLS: usize = WIDTH * HEIGHT;
pub const PAD: &str = "PAD";

const MANIFEST_MAGIC: &str = "flowpix-layout v1";

/// 1-based (row, col) of a row-major cell index.
pub fn cell_position(index: usize) -> (usize, usize) {
    (index / WIDTH + 1, index % WIDTH + 1)
}

pub fn cell_index(row: usize, col: usize) -> usize {
    (row - 1) * WIDTH + (col - 1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellBinding<'a> {
    pub row: usize,
    pub col: usize,
    /// `None` for padding.
    pub content: Option<&'a str>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayoutManifest {
    cells: Vec<Option<String>>,
    schema_digest: String,
}

impl LayoutManifest {
    /// Default row-major layout for a schema.
    pub fn for_schema(schema: &FeatureSchema) -> Result<Self> {
        build_layout(&expand_columns(schema), &schema.digest())
    }

    fn from_cells(cells: Vec<Option<String>>, schema_digest: String) -> Result<Self> {
        if cells.len() != CELLS {
            return Err(Error::InvalidManifest(format!(
                "expected {CELLS} cells, found {}",
                cells.len()
            )));
        }
        let mut names = HashSet::new();
        for name in cells.iter().flatten() {
            if name == PAD {
                return Err(Error::InvalidManifest(format!("`{PAD}` is reserved")));
            }
            if !names.insert(name.as_str()) {
                return Err(Error::InvalidManifest(format!(
                    "column `{name}` bound to more than one cell"
                )));
            }
        }
        Ok(LayoutManifest {
            cells,
            schema_digest,
        })
    }

    pub fn schema_digest(&self) -> &str {
        &self.schema_digest
    }

    /// Cell contents in row-major order; `None` marks padding.
    pub fn cells(&self) -> &[Option<String>] {
        &self.cells
    }

    pub fn bindings(&self) -> impl Iterator<Item = CellBinding<'_>> {
        self.cells.iter().enumerate().map(|(i, c)| {
            let (row, col) = cell_position(i);
            CellBinding {
                row,
                col,
                content: c.as_deref(),
            }
        })
    }

    pub fn position_of(&self, column: &str) -> Option<(usize, usize)> {
        self.cells
            .iter()
            .position(|c| c.as_deref() == Some(column))
            .map(cell_position)
    }

    pub fn pad_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_none()).count()
    }

    pub fn column_count(&self) -> usize {
        CELLS - self.pad_count()
    }

    /// Row-major indices of the non-padding cells.
    pub fn column_cells(&self) -> Vec<usize> {
        (0..CELLS).filter(|&i| self.cells[i].is_some()).collect()
    }

    /// Names of the non-padding cells in row-major order.
    pub fn column_names(&self) -> Vec<String> {
        self.cells.iter().flatten().cloned().collect()
    }

    /// Rejects a manifest that was not built from `schema`.
    pub fn check_schema(&self, schema: &FeatureSchema) -> Result<()> {
        let expected = schema.digest();
        if self.schema_digest != expected {
            return Err(Error::StaleManifest {
                expected,
                found: self.schema_digest.clone(),
            });
        }
        let columns: HashSet<String> = expand_columns(schema).into_iter().map(|c| c.name).collect();
        let bound: HashSet<String> = self.cells.iter().flatten().cloned().collect();
        if columns != bound {
            return Err(Error::InvalidManifest(
                "manifest columns differ from the schema's encoded columns".into(),
            ));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(CELLS * 24);
        let _ = writeln!(out, "{MANIFEST_MAGIC} {}", self.schema_digest);
        for b in self.bindings() {
            let _ = writeln!(out, "{},{},{}", b.row, b.col, b.content.unwrap_or(PAD));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidManifest(msg);
        let mut lines = text.lines();
        let digest = lines
            .next()
            .and_then(|l| l.strip_prefix(MANIFEST_MAGIC))
            .and_then(|l| l.strip_prefix(' '))
            .filter(|d| !d.is_empty() && !d.contains(' '))
            .ok_or_else(|| bad("missing `flowpix-layout v1 <digest>` header".into()))?;

        let mut cells: Vec<Option<Option<String>>> = vec![None; CELLS];
        for (n, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, ',');
            let (row, col, name) = match (parts.next(), parts.next(), parts.next()) {
                (Some(r), Some(c), Some(name)) => (r, c, name),
                _ => return Err(bad(format!("line {} is not `row,col,name`", n + 2))),
            };
            let parse = |s: &str, limit: usize| {
                s.parse::<usize>()
                    .ok()
                    .filter(|v| (1..=limit).contains(v))
                    .ok_or_else(|| bad(format!("line {}: coordinate {s:?} out of range", n + 2)))
            };
            let idx = cell_index(parse(row, HEIGHT)?, parse(col, WIDTH)?);
            if cells[idx].is_some() {
                return Err(bad(format!("cell ({row},{col}) appears twice")));
            }
            cells[idx] = Some((name != PAD).then(|| name.to_string()));
        }
        let cells = cells
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| {
                    let (r, c) = cell_position(i);
                    bad(format!("cell ({r},{c}) is missing"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LayoutManifest::from_cells(cells, digest.to_string())
    }
}

/// Row-major placement: cell `i` gets column `i`, the rest are padding.
pub fn build_layout(columns: &[EncodedColumn], schema_digest: &str) -> Result<LayoutManifest> {
    if columns.len() > CELLS {
        return Err(Error::LayoutOverflow(columns.len()));
    }
    let mut cells: Vec<Option<String>> = columns.iter().map(|c| Some(c.name.clone())).collect();
    cells.resize(CELLS, None);
    LayoutManifest::from_cells(cells, schema_digest.to_string())
}

/// Seeded uniform permutation of all 256 cells, padding included.
pub fn permute_layout(manifest: &LayoutManifest, seed: u64) -> LayoutManifest {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = manifest.cells.clone();
    cells.shuffle(&mut rng);
    LayoutManifest {
        cells,
        schema_digest: manifest.schema_digest.clone(),
    }
}

pub fn save_manifest(manifest: &LayoutManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, manifest.to_text()).map_err(Error::at_path(path))
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<LayoutManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(Error::at_path(path))?;
    LayoutManifest::from_text(&text)
}

/// Loads a manifest and checks it against the schema it must belong to.
pub fn load_manifest_for(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<LayoutManifest> {
    let manifest = load_manifest(path)?;
    manifest.check_schema(schema)?;
    Ok(manifest)
}

/// Name → cell index for the bound cells.
pub(crate) fn cell_lookup(manifest: &LayoutManifest) -> HashMap<&str, usize> {
    manifest
        .cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.as_deref().map(|n| (n, i)))
        .collect()
}
