//! Caps every class and holds out 20% per class, as a remedy for class imbalance.

use flowpix::dataset::{count_report, make_balanced_subset, synth_fixture_sized, FixtureShape, SubsetPlan};

fn main() -> flowpix::Result<()> {
    let table = synth_fixture_sized(0, &[3000, 40, 35, 400, 900, 500, 1500, 300, 30, 1], &FixtureShape::unsw_like())?;
    let subset = make_balanced_subset(&table, &SubsetPlan::new(390, 0.2, 7)?)?;
    print!("{}", count_report(&subset.train.class_counts(), &subset.holdout.class_counts()));
    println!("total {} records; too small to hold out: {:?}", subset.total(), subset.flagged);
    Ok(())
}
