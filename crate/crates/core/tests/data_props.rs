use std::io::Write;

use mixbasis::data::{cdf_transform, likert_map, load_csv, rescale_mean_half, Dataset, TransformSpec};
use mixbasis::Error;
use proptest::prelude::*;

proptest! {
    #[test]
    fn cdf_preserves_order(column in prop::collection::vec(-1e6f64..1e6, 1..200)) {
        let out = cdf_transform(&column);
        for a in 0..column.len() {
            prop_assert!(out[a] > 0.0 && out[a] < 1.0);
            for b in 0..column.len() {
                if column[a] < column[b] {
                    prop_assert!(out[a] < out[b]);
                } else if column[a] == column[b] {
                    prop_assert_eq!(out[a], out[b]);
                }
            }
        }
    }

    #[test]
    fn cdf_is_idempotent(column in prop::collection::vec(-100i32..100, 1..100)) {
        let column: Vec<f64> = column.into_iter().map(f64::from).collect();
        let once = cdf_transform(&column);
        prop_assert_eq!(cdf_transform(&once), once);
    }

    #[test]
    fn cdf_mean_is_one_half(column in prop::collection::vec(-50i32..50, 1..100)) {
        let column: Vec<f64> = column.into_iter().map(f64::from).collect();
        let out = cdf_transform(&column);
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        prop_assert!((mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mean_half_rescale(column in prop::collection::vec(0.0f64..1e4, 1..100)) {
        prop_assume!(column.iter().any(|&v| v > 0.0));
        let out = rescale_mean_half(&column).unwrap();
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        prop_assert!((mean - 0.5).abs() < 1e-12);
    }
}

#[test]
fn likert_midpoints() {
    assert_eq!(likert_map(&[1.0, 3.0, 5.0], 5).unwrap(), vec![0.1, 0.5, 0.9]);
    assert!(likert_map(&[6.0], 5).is_err());
    assert!(likert_map(&[2.5], 5).is_err());
}

fn write_temp(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

#[test]
fn load_with_header_and_comments() {
    let f = write_temp("# produced elsewhere\na,b\n0.1,0.2\n# note\n0.3,0.4\n");
    let d = load_csv(f.path(), true).unwrap();
    assert_eq!(d.item_names(), ["a", "b"]);
    assert_eq!(d.n_obs(), 2);
    assert_eq!(d.row(1), [0.3, 0.4]);
}

#[test]
fn load_without_header_names_items() {
    let f = write_temp("1,2,3\n4,5,6\n");
    let d = load_csv(f.path(), false).unwrap();
    assert_eq!(d.item_names(), ["item_1", "item_2", "item_3"]);
    assert_eq!(d.column(2), vec![3.0, 6.0]);
}

#[test]
fn bad_cell_reports_row_and_column() {
    let f = write_temp("a,b\n1,2\n3,x\n");
    match load_csv(f.path(), true) {
        Err(Error::Parse { row, col, .. }) => assert_eq!((row, col), (3, 2)),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn ragged_rows_are_rejected() {
    let f = write_temp("1,2\n3\n");
    assert!(matches!(load_csv(f.path(), false), Err(Error::Malformed { .. })));
}

#[test]
fn per_item_transforms() {
    let d = Dataset::from_columns(&[vec![3.0, 1.0, 2.0], vec![1.0, 2.0, 3.0]]).unwrap();
    let spec: TransformSpec = "item_1=cdf".parse().unwrap();
    let t = d.transformed(&spec).unwrap();
    assert_eq!(t.column(0), cdf_transform(&[3.0, 1.0, 2.0]));
    assert_eq!(t.column(1), vec![1.0, 2.0, 3.0]);
    assert!("nope=cdf".parse::<TransformSpec>().and_then(|s| d.transformed(&s)).is_err());
}
