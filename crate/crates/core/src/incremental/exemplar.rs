use std::collections::BTreeMap;

use rand::Rng;

use crate::data::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::tensor::Matrix;

/// Fixed-budget per-class sample memory. Samples are stored as feature rows
/// keyed by global class id; every class holds the same count after a
/// shrink (floor rule).
#[derive(Debug, Clone)]
pub struct ExemplarStore {
    budget: usize,
    per_class: BTreeMap<u32, Vec<Vec<f32>>>,
}

impl ExemplarStore {
    pub fn new(budget: usize) -> Self {
        ExemplarStore {
            budget,
            per_class: BTreeMap::new(),
        }
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn total(&self) -> usize {
        self.per_class.values().map(Vec::len).sum()
    }

    pub fn class_count(&self, class: u32) -> usize {
        self.per_class.get(&class).map_or(0, Vec::len)
    }

    pub fn classes(&self) -> Vec<u32> {
        self.per_class.keys().copied().collect()
    }

    /// Store `count` random samples of `class` drawn from `data` without
    /// replacement.
    pub fn add_random(
        &mut self,
        class: u32,
        data: &LabeledDataset,
        count: usize,
        seed: u64,
    ) -> Result<()> {
        if count == 0 {
            return Err(Error::config(
                "exemplar budget exhausted: zero samples per class",
            ));
        }
        let idx: Vec<usize> = (0..data.len())
            .filter(|&i| data.labels[i] == class)
            .collect();
        if idx.is_empty() {
            return Err(Error::input(format!("no samples of class {} to store", class)));
        }
        let take = count.min(idx.len());
        let mut order = idx;
        let mut rng = rng_from(seed);
        for i in 0..take {
            let j = rng.gen_range(i..order.len());
            order.swap(i, j);
        }
        let rows: Vec<Vec<f32>> = order[..take]
            .iter()
            .map(|&i| data.features.row(i).to_vec())
            .collect();
        self.per_class.entry(class).or_default().extend(rows);
        Ok(())
    }

    /// Keep a random subset of `per_class` samples for every class.
    pub fn shrink_to(&mut self, per_class: usize, seed: u64) -> Result<()> {
        if per_class == 0 {
            return Err(Error::config(
                "exemplar budget exhausted: zero samples per class after shrink",
            ));
        }
        for (stream, (_, samples)) in self.per_class.iter_mut().enumerate() {
            if samples.len() <= per_class {
                continue;
            }
            let mut rng = rng_from(crate::rng::derive_seed(seed, stream as u64, 0x5E));
            for i in 0..per_class {
                let j = rng.gen_range(i..samples.len());
                samples.swap(i, j);
            }
            samples.truncate(per_class);
        }
        Ok(())
    }

    /// All stored samples as a labeled dataset.
    pub fn as_dataset(&self) -> Result<LabeledDataset> {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (&class, samples) in &self.per_class {
            for s in samples {
                rows.push(s.clone());
                labels.push(class);
            }
        }
        if rows.is_empty() {
            return Err(Error::input("exemplar store is empty"));
        }
        LabeledDataset::new(Matrix::from_rows(&rows)?, labels, Split::Train)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(classes: &[u32], per_class: usize) -> LabeledDataset {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for &c in classes {
            for i in 0..per_class {
                rows.push(vec![c as f32, i as f32]);
                labels.push(c);
            }
        }
        LabeledDataset::new(Matrix::from_rows(&rows).unwrap(), labels, Split::Train).unwrap()
    }

    #[test]
    fn fill_and_shrink_floor_arithmetic() {
        // K=20, g=2: initial fill 10 per class; after the first incremental
        // session's shrink, 5 per class
        let data = dataset(&[0, 1], 30);
        let mut store = ExemplarStore::new(20);
        for c in [0, 1] {
            store.add_random(c, &data, 20 / 2, c as u64).unwrap();
            assert_eq!(store.class_count(c), 10);
        }
        let later = dataset(&[2, 3], 30);
        for c in [2, 3] {
            store.add_random(c, &later, 20 / 2, c as u64).unwrap();
        }
        store.shrink_to(20 / 4, 7).unwrap();
        for c in [0, 1, 2, 3] {
            assert_eq!(store.class_count(c), 5);
        }
        assert!(store.total() <= store.budget());
    }

    #[test]
    fn zero_count_is_a_configuration_error() {
        let data = dataset(&[0], 5);
        let mut store = ExemplarStore::new(4);
        assert!(store.add_random(0, &data, 0, 0).is_err());
        assert!(store.shrink_to(0, 0).is_err());
    }

    #[test]
    fn stored_samples_come_from_the_dataset() {
        let data = dataset(&[3], 10);
        let mut store = ExemplarStore::new(10);
        store.add_random(3, &data, 4, 9).unwrap();
        let ds = store.as_dataset().unwrap();
        assert_eq!(ds.len(), 4);
        for i in 0..ds.len() {
            assert_eq!(ds.labels[i], 3);
            let row = ds.features.row(i);
            assert!((0..data.len()).any(|j| data.features.row(j) == row));
        }
    }
}
