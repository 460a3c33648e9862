//! Evaluation output: overall accuracy, per-class recall and the
//! row-normalized confusion matrix, as text, CSV and JSON.

use flowpix::dataset::{synth_fixture, FixtureShape};
use flowpix::eval::{render_report, ReportFormat};
use flowpix::pipeline::{train, ClassifierKind, PipelineConfig, Task};

fn main() -> flowpix::Result<()> {
    let shape = FixtureShape::unsw_like().with_separation(1.0);
    let train_t = synth_fixture(0, 60, 10, &shape)?;
    let test_t = synth_fixture(1, 30, 10, &shape)?;
    let mut config = PipelineConfig::new(ClassifierKind::Forest, Task::Multiclass);
    config.forest.n_trees = 30;
    let report = train(&train_t, &config)?.evaluate(&test_t)?;
    for format in [ReportFormat::Text, ReportFormat::Csv, ReportFormat::Json] {
        println!("--- {format:?}");
        print!("{}", render_report(&report, format));
    }
    Ok(())
}
