//! Writes UNSW-shaped synthetic train/test CSVs for trying the CLI.
//!
//! cargo run --example write_fixture -- fixture/

use flowpix::dataset::{synth_fixture_sized, FixtureShape};

fn main() -> flowpix::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "fixture".to_string());
    std::fs::create_dir_all(&out)?;
    let shape = FixtureShape::unsw_like().with_separation(3.0);
    // roughly the class proportions of the real tables, scaled down
    let train = synth_fixture_sized(0, &[370, 7, 6, 41, 111, 61, 189, 35, 4, 2], &shape)?;
    let test = synth_fixture_sized(1, &[560, 20, 17, 123, 334, 182, 400, 105, 11, 3], &shape)?;
    train.write_csv(format!("{out}/train.csv"))?;
    test.write_csv(format!("{out}/test.csv"))?;
    println!("wrote {} train and {} test records to {out}/", train.len(), test.len());
    Ok(())
}
