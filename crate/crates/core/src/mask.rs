use serde::{Deserialize, Serialize};

/// Binary inclusion pattern over a flattened parameter vector.
///
/// `false` pins the coordinate to zero: the mask selects the coordinate
/// subspace `{θ : θ_j = 0 for every dropped j}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DropoutMask {
    kept: Vec<bool>,
}

impl DropoutMask {
    /// Keeps every coordinate.
    pub fn full(len: usize) -> Self {
        Self { kept: vec![true; len] }
    }

    pub fn from_kept(kept: Vec<bool>) -> Self {
        Self { kept }
    }

    /// Keeps exactly the listed coordinates.
    pub fn from_indices(len: usize, kept: &[usize]) -> Self {
        let mut mask = vec![false; len];
        for &i in kept {
            mask[i] = true;
        }
        Self { kept: mask }
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn kept(&self) -> &[bool] {
        &self.kept
    }

    pub fn is_kept(&self, i: usize) -> bool {
        self.kept[i]
    }

    pub fn set(&mut self, i: usize, keep: bool) {
        self.kept[i] = keep;
    }

    pub fn kept_count(&self) -> usize {
        self.kept.iter().filter(|&&k| k).count()
    }

    pub fn dropped_count(&self) -> usize {
        self.len() - self.kept_count()
    }

    pub fn is_full(&self) -> bool {
        self.kept.iter().all(|&k| k)
    }

    pub fn kept_indices(&self) -> Vec<usize> {
        self.kept
            .iter()
            .enumerate()
            .filter_map(|(i, &k)| k.then_some(i))
            .collect()
    }

    /// Zeroes every dropped coordinate of `values`.
    pub fn apply(&self, values: &mut [f64]) {
        debug_assert_eq!(values.len(), self.kept.len());
        for (v, &k) in values.iter_mut().zip(&self.kept) {
            if !k {
                *v = 0.0;
            }
        }
    }

    pub fn applied(&self, values: &[f64]) -> Vec<f64> {
        let mut out = values.to_vec();
        self.apply(&mut out);
        out
    }
}
