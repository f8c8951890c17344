//! Connectivity of the item co-occurrence graph.

use crate::data::Dataset;

/// Connected components of the graph whose edges are compared item pairs.
#[derive(Clone, Debug)]
pub struct Components {
    /// Component label per item, numbered in order of first appearance.
    pub label: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn of(dataset: &Dataset) -> Self {
        let n = dataset.n_items();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for c in dataset.comparisons() {
            let (a, b) = (find(&mut parent, c.winner), find(&mut parent, c.loser));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut root_label = vec![usize::MAX; n];
        let mut label = vec![0; n];
        let mut sizes = Vec::new();
        for i in 0..n {
            let r = find(&mut parent, i);
            if root_label[r] == usize::MAX {
                root_label[r] = sizes.len();
                sizes.push(0);
            }
            label[i] = root_label[r];
            sizes[label[i]] += 1;
        }
        Self { label, sizes }
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Shifts `scores` so each component sums to zero.
    pub fn center(&self, scores: &mut [f64]) {
        let mut sums = vec![0.0; self.count()];
        for (s, &l) in scores.iter().zip(&self.label) {
            sums[l] += s;
        }
        for (s, &l) in scores.iter_mut().zip(&self.label) {
            *s -= sums[l] / self.sizes[l] as f64;
        }
    }

    /// Largest absolute per-component sum.
    pub fn max_gauge_violation(&self, scores: &[f64]) -> f64 {
        let mut sums = vec![0.0f64; self.count()];
        for (s, &l) in scores.iter().zip(&self.label) {
            sums[l] += s;
        }
        sums.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}
