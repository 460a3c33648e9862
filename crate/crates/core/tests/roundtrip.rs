mod common;

use common::{random_schema_records, round_trip_mismatches};
use flowpix::encode::{scale_numeric, Encoder};
use flowpix::eval::{confusion, parse_report_csv, render_report, EvalReport, ReportFormat, RunMetadata};
use flowpix::layout::{permute_layout, LayoutManifest};
use flowpix::pngio::{encode_png, read_png, read_png_from, write_png};
use flowpix::schema::FeatureSchema;
use proptest::prelude::*;

#[test]
fn encode_decode_recovers_1000_random_records() {
    let mut total = 0;
    for seed in 0..10 {
        let (schema, records) = random_schema_records(seed, 100);
        total += records.len();
        assert_eq!(round_trip_mismatches(&schema, &records), 0, "schema seed {seed}");
    }
    assert_eq!(total, 1000);
}

#[test]
fn png_files_round_trip_byte_exact() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..50u32 {
        let pixels: [u8; 256] = std::array::from_fn(|p| ((p as u32 * (i + 1) * 7 + i) % 256) as u8);
        let path = dir.path().join(format!("{i}.png"));
        write_png(&pixels, &path).unwrap();
        assert_eq!(read_png(&path).unwrap(), pixels);
        // re-encoding the decoded grid reproduces the file
        assert_eq!(encode_png(&read_png(&path).unwrap()).unwrap(), std::fs::read(&path).unwrap());
    }
}

#[test]
fn schema_and_manifest_text_round_trip() {
    for seed in 0..20 {
        let (schema, _) = random_schema_records(seed, 1);
        let back = FeatureSchema::from_text(&schema.to_text()).unwrap();
        assert_eq!(back, schema);
        assert_eq!(back.digest(), schema.digest());
        let layout = permute_layout(&LayoutManifest::for_schema(&schema).unwrap(), seed);
        assert_eq!(LayoutManifest::from_text(&layout.to_text()).unwrap(), layout);
    }
}

#[test]
fn report_csv_round_trips_the_matrix() {
    let names: Vec<String> = ["Normal", "DoS", "Worms"].map(String::from).to_vec();
    let truth = [0, 0, 1, 1, 2, 2, 2, 0, 1];
    let pred = [0, 1, 1, 1, 2, 0, 2, 0, 2];
    let m = confusion(&truth, &pred, &names).unwrap();
    let report = EvalReport::from_matrix(m.clone(), RunMetadata::default());
    assert_eq!(parse_report_csv(&render_report(&report, ReportFormat::Csv)).unwrap(), m);
}

#[test]
fn stale_manifest_is_rejected() {
    let (a, _) = random_schema_records(1, 1);
    let (b, _) = random_schema_records(2, 1);
    let layout = LayoutManifest::for_schema(&a).unwrap();
    assert!(Encoder::new(&b, &layout, 255).is_err());
}

proptest! {
    #[test]
    fn png_bytes_round_trip(pixels in prop::collection::vec(any::<u8>(), 256)) {
        let grid: [u8; 256] = pixels.try_into().unwrap();
        let bytes = encode_png(&grid).unwrap();
        prop_assert_eq!(read_png_from(&bytes[..]).unwrap(), grid);
    }

    #[test]
    fn scaling_is_monotone_and_bounded(lo in -1e6f64..1e6, span in 0.0f64..1e6, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let hi = lo + span;
        let (x, y) = (lo + span * a.min(b), lo + span * a.max(b));
        let (bx, by) = (scale_numeric(x, lo, hi).unwrap(), scale_numeric(y, lo, hi).unwrap());
        prop_assert!(bx <= by);
        prop_assert_eq!(scale_numeric(lo - 1.0, lo, hi).unwrap(), 0);
        if span > 0.0 {
            prop_assert_eq!(scale_numeric(hi + 1.0, lo, hi).unwrap(), 255);
        }
    }
}
