//! Trains the random forest on thumbnail bytes and ranks features by mean
//! decrease in Gini impurity.

use flowpix::dataset::{synth_fixture, FixtureShape};
use flowpix::forest::importance;
use flowpix::pipeline::{train, ClassifierKind, Model, PipelineConfig, Task};

fn main() -> flowpix::Result<()> {
    let table = synth_fixture(0, 150, 4, &FixtureShape::unsw_like().with_separation(2.0))?;
    let config = PipelineConfig::new(ClassifierKind::Forest, Task::Multiclass);
    let run = train(&table, &config)?;
    let Model::Forest { model, .. } = &run.model else { unreachable!() };
    println!("{} trees, model digest {}", model.trees.len(), model.digest());
    print!("{}", importance(model).to_text(14));
    Ok(())
}
