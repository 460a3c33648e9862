//! Infers a schema, builds the default 16x16 layout and shows where columns land.
//!
//! With a path argument the schema comes from that CSV (e.g. the UNSW-NB15
//! training table); otherwise from a synthetic table with the same columns.

use flowpix::dataset::{load_csv, synth_fixture, FixtureShape, LoadOptions};
use flowpix::layout::LayoutManifest;
use flowpix::record::Split;
use flowpix::schema::{infer_schema, SchemaOptions};

fn main() -> flowpix::Result<()> {
    let table = match std::env::args().nth(1) {
        Some(path) => load_csv(path, Split::Train, &LoadOptions::unsw())?,
        None => synth_fixture(0, 50, 10, &FixtureShape::unsw_like())?,
    };
    let schema = infer_schema(&table.records, &SchemaOptions::unsw())?;
    let layout = LayoutManifest::for_schema(&schema)?;

    println!("{} encoded columns, {} padding cells", layout.column_count(), layout.pad_count());
    for name in ["dur", "sttl", "service_-", "service_http", "state_INT"] {
        match layout.position_of(name) {
            Some((row, col)) => println!("{name:>14} -> row {row}, col {col}"),
            None => println!("{name:>14} -> (not in schema)"),
        }
    }
    print!("{}", layout.to_text().lines().take(6).map(|l| format!("{l}\n")).collect::<String>());
    Ok(())
}
