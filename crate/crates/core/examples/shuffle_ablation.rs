//! Default layout versus a seeded random permutation of all 256 cells.

use flowpix::dataset::{synth_fixture, FixtureShape};
use flowpix::pipeline::{ablate_shuffle, ClassifierKind, PipelineConfig, Task};

fn main() -> flowpix::Result<()> {
    let shape = FixtureShape::unsw_like().with_separation(1.5);
    let train_t = synth_fixture(0, 100, 4, &shape)?;
    let test_t = synth_fixture(1, 50, 4, &shape)?;
    for kind in [ClassifierKind::Forest, ClassifierKind::Pixel] {
        let config = PipelineConfig::new(kind, Task::Multiclass);
        let ablation = ablate_shuffle(&train_t, &test_t, &config, 7)?;
        println!("[{kind}]");
        print!("{}", ablation.to_text());
    }
    Ok(())
}
