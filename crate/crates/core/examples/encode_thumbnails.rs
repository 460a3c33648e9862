//! Encodes a table into 16x16 grayscale PNGs, then reads one back and
//! decodes it into feature values.

use flowpix::dataset::{synth_fixture, FixtureShape};
use flowpix::encode::{decode_thumbnail, encode_dataset, Encoder, Thumbnail, DEFAULT_PAD_VALUE};
use flowpix::layout::LayoutManifest;
use flowpix::pngio::read_png;
use flowpix::schema::{infer_schema, SchemaOptions};

fn main() -> flowpix::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("flowpix-thumbnails"));
    let table = synth_fixture(3, 20, 3, &FixtureShape::small())?;
    let schema = infer_schema(&table.records, &SchemaOptions::new(["proto", "service"], "attack_cat"))?;
    let layout = LayoutManifest::for_schema(&schema)?;
    let encoder = Encoder::new(&schema, &layout, DEFAULT_PAD_VALUE)?;

    let index = encode_dataset(&table.records, table.split, &encoder, &out, 0)?;
    println!("{} PNGs in {} (index digest {})", index.entries.len(), out.display(), index.digest());

    let first = &index.entries[0];
    let pixels = read_png(out.join(&first.path))?;
    let thumb = Thumbnail {
        pixels,
        label: schema.class_index(&first.class).unwrap_or(0),
        record_id: table.records[0].record_id.clone(),
    };
    let decoded = decode_thumbnail(&thumb, &schema, &layout)?;
    println!("{} decodes to:", first.path);
    for (name, value) in decoded.numeric.iter().take(4) {
        println!("  {name} ≈ {value:.3}   (source {})", table.records[0].get(name).unwrap_or("?"));
    }
    for (name, cat) in &decoded.categorical {
        println!("  {name} = {}", cat.as_deref().unwrap_or("<unseen>"));
    }
    Ok(())
}
