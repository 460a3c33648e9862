//! The pixel-space softmax baseline: training loss trace and a finite
//! difference check of the analytic gradient.

use flowpix::dataset::{synth_fixture, FixtureShape};
use flowpix::pipeline::{train, ClassifierKind, PipelineConfig, Task};
use flowpix::pixelclf::{grad_check, Example, LinearModel};
use flowpix::schema::SchemaOptions;
use flowpix::seeds::stream;

fn main() -> flowpix::Result<()> {
    let table = synth_fixture(0, 100, 3, &FixtureShape::small())?;
    let mut config = PipelineConfig::new(ClassifierKind::Pixel, Task::Multiclass);
    config.schema = SchemaOptions::new(["proto", "service"], "attack_cat");
    let run = train(&table, &config)?;
    let history = run.history.as_ref().expect("pixel runs record a loss trace");
    println!("loss {:.4} before training", history.initial_loss);
    for (epoch, loss) in history.epoch_losses.iter().enumerate().step_by(10) {
        println!("loss {loss:.4} after epoch {}", epoch + 1);
    }
    let acc = run.evaluate(&table)?.overall_accuracy.unwrap_or(0.0);
    println!("training accuracy {:.1}%", acc * 100.0);

    let mut rng = stream(1, "example/gradcheck");
    let model = LinearModel::initialized(256, vec!["a".into(), "b".into(), "c".into()], &mut rng);
    let batch: Vec<Example> = (0..8)
        .map(|i| Example {
            x: (0..256).map(|p| ((p * 7 + i * 13) % 256) as f64 / 255.0).collect(),
            y: i % 3,
        })
        .collect();
    let check = grad_check(&model, &batch, 1e-5, 0.0)?;
    println!("gradient check: max relative error {:.2e}", check.max_relative_error);
    Ok(())
}
