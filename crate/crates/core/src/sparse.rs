use crate::error::{Error, Result};

/// Feature vector stored as strictly increasing `(index, value)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    dim: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Builds a vector from entries already sorted by index. Explicit zeros are dropped.
    pub fn new(dim: usize, entries: Vec<(usize, f64)>) -> Result<Self> {
        let mut prev: Option<usize> = None;
        for &(idx, value) in &entries {
            if idx >= dim {
                return Err(Error::Shape(format!("index {idx} outside dimension {dim}")));
            }
            if let Some(p) = prev {
                if idx <= p {
                    return Err(Error::Shape(format!(
                        "indices must be strictly increasing ({p} then {idx})"
                    )));
                }
            }
            if !value.is_finite() {
                return Err(Error::Shape(format!("non-finite value at index {idx}")));
            }
            prev = Some(idx);
        }
        let entries = entries.into_iter().filter(|&(_, v)| v != 0.0).collect();
        Ok(SparseVector { dim, entries })
    }

    /// Sorts the entries first; repeated indices are summed.
    pub fn from_unsorted(dim: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        SparseVector::new(dim, merged)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    /// Value at `index`, zero when absent.
    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            dense[i] = v;
        }
        dense
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_and_out_of_range() {
        assert!(SparseVector::new(3, vec![(1, 1.0), (0, 1.0)]).is_err());
        assert!(SparseVector::new(3, vec![(1, 1.0), (1, 2.0)]).is_err());
        assert!(SparseVector::new(3, vec![(3, 1.0)]).is_err());
        assert!(SparseVector::new(3, vec![(0, f64::NAN)]).is_err());
    }

    #[test]
    fn drops_explicit_zeros() {
        let x = SparseVector::new(4, vec![(0, 0.0), (2, 1.5)]).unwrap();
        assert_eq!(x.entries(), &[(2, 1.5)]);
        assert_eq!(x.get(0), 0.0);
        assert_eq!(x.get(2), 1.5);
    }

    #[test]
    fn from_unsorted_merges_duplicates() {
        let x = SparseVector::from_unsorted(5, vec![(3, 1.0), (1, 2.0), (3, 0.5)]).unwrap();
        assert_eq!(x.entries(), &[(1, 2.0), (3, 1.5)]);
        assert_eq!(x.to_dense(), vec![0.0, 2.0, 0.0, 1.5, 0.0]);
    }
}
