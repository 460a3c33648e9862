//! Per-class counts for a train/test pair of CSVs (or a synthetic pair).

use flowpix::dataset::{count_report, load_csv, synth_fixture_sized, FixtureShape, LoadOptions};
use flowpix::record::Split;

fn main() -> flowpix::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (train, test) = match args.as_slice() {
        [train, test] => (
            load_csv(train, Split::Train, &LoadOptions::unsw())?,
            load_csv(test, Split::Test, &LoadOptions::unsw())?,
        ),
        _ => {
            let shape = FixtureShape::unsw_like();
            (
                synth_fixture_sized(0, &[370, 7, 6, 41, 111, 61, 189, 35, 4, 2], &shape)?,
                synth_fixture_sized(1, &[560, 20, 17, 123, 334, 182, 400, 105, 11, 3], &shape)?,
            )
        }
    };
    let (tr, te) = (train.class_counts(), test.class_counts());
    print!("{}", count_report(&tr, &te));
    let (normal, attack) = tr.binary();
    println!("train total {} (Normal {normal}, Attack {attack}); test total {}", tr.total(), te.total());
    Ok(())
}
