#![allow(dead_code)]

use factorbt::{build_dataset, Dataset, RawComparison, Side};
use proptest::prelude::*;

/// Small random datasets: up to 10 items, 5 workers, 3 features.
pub fn small_dataset() -> impl Strategy<Value = Dataset> {
    (2usize..=10, 1usize..=5, 0usize..=3).prop_flat_map(|(n, k, m)| {
        let row = (
            0..k,
            0..n,
            1..n,
            any::<bool>(),
            prop::collection::vec(prop_oneof![Just(-1.0), Just(0.0), Just(1.0), -1.0f64..1.0], m),
        );
        prop::collection::vec(row, 1..30).prop_map(move |rows| {
            let rows: Vec<RawComparison> = rows
                .into_iter()
                .map(|(w, l, offset, left_wins, features)| RawComparison {
                    worker: format!("w{w}").into(),
                    left: format!("i{l}").into(),
                    right: format!("i{}", (l + offset) % n).into(),
                    winner: if left_wins { Side::Left } else { Side::Right },
                    features,
                })
                .collect();
            build_dataset(&rows, None).unwrap()
        })
    })
}

/// Every worker ranks `items` in index order, on alternating sides.
pub fn unanimous(items: usize, workers: usize) -> Dataset {
    let mut rows = Vec::new();
    for w in 0..workers {
        for i in 0..items {
            for j in i + 1..items {
                let left_is_better = (i + j + w) % 2 == 0;
                let (left, right) = if left_is_better { (i, j) } else { (j, i) };
                rows.push(RawComparison {
                    worker: format!("w{w}").into(),
                    left: format!("i{left}").into(),
                    right: format!("i{right}").into(),
                    winner: if left_is_better { Side::Left } else { Side::Right },
                    features: vec![1.0, if (i * 7 + j) % 3 == 0 { 1.0 } else { -1.0 }],
                });
            }
        }
    }
    build_dataset(&rows, None).unwrap()
}
