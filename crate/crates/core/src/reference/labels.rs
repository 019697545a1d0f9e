//! Neuron-to-class assignment and spike-count voting.

use crate::error::{Error, Result};

/// One class label per output neuron, with the responses it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    labels: Vec<u8>,
    n_classes: usize,
    /// Neurons that responded to no class at all (label is a tie-break).
    flagged: Vec<bool>,
}

/// Result of voting over per-neuron spike counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Vote {
    pub label: usize,
    /// Spikes summed over the neurons assigned to each label.
    pub totals: Vec<u64>,
    /// No neuron fired.
    pub silent: bool,
}

impl LabelMap {
    pub fn new(labels: Vec<u8>, n_classes: usize) -> Result<Self> {
        if n_classes == 0 || n_classes > 256 {
            return Err(Error::contract(format!("n_classes {n_classes} outside 1..=256")));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= n_classes) {
            return Err(Error::contract(format!("label {bad} >= n_classes {n_classes}")));
        }
        let flagged = vec![false; labels.len()];
        Ok(LabelMap { labels, n_classes, flagged })
    }

    /// Label map with explicit silent-neuron flags.
    pub fn with_flags(labels: Vec<u8>, n_classes: usize, flagged: Vec<bool>) -> Result<Self> {
        if flagged.len() != labels.len() {
            return Err(Error::contract("one flag per neuron required"));
        }
        let mut map = LabelMap::new(labels, n_classes)?;
        map.flagged = flagged;
        Ok(map)
    }

    /// Assigns each neuron the class with the largest mean response.
    /// `responses` is neuron-major `[neuron][class]`. Ties go to the lowest
    /// class index; an all-zero row is flagged.
    pub fn from_responses(responses: &[f64], n_neurons: usize, n_classes: usize) -> Result<Self> {
        if responses.len() != n_neurons * n_classes {
            return Err(Error::contract("response matrix has the wrong size"));
        }
        let mut labels = Vec::with_capacity(n_neurons);
        let mut flagged = Vec::with_capacity(n_neurons);
        for row in responses.chunks(n_classes) {
            labels.push(argmax(row) as u8);
            flagged.push(row.iter().all(|&r| r == 0.0));
        }
        LabelMap::with_flags(labels, n_classes, flagged)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n_neurons(&self) -> usize {
        self.labels.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn flagged(&self) -> &[bool] {
        &self.flagged
    }

    /// Votes with per-label spike totals; the predicted label is the argmax
    /// of the totals, ties to the lowest label.
    pub fn classify(&self, neuron_counts: &[u32]) -> Vote {
        debug_assert_eq!(neuron_counts.len(), self.labels.len());
        let mut totals = vec![0u64; self.n_classes];
        for (&l, &c) in self.labels.iter().zip(neuron_counts) {
            totals[l as usize] += c as u64;
        }
        let silent = totals.iter().all(|&t| t == 0);
        let label = argmax(&totals);
        Vote { label, totals, silent }
    }
}

/// Index of the first maximum.
pub fn argmax<T: PartialOrd + Copy>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Accumulates per-class responses of every neuron over a labelled set.
#[derive(Debug, Clone)]
pub struct ResponseAccumulator {
    n_neurons: usize,
    n_classes: usize,
    sums: Vec<f64>,
    class_counts: Vec<u64>,
}

impl ResponseAccumulator {
    pub fn new(n_neurons: usize, n_classes: usize) -> Self {
        ResponseAccumulator {
            n_neurons,
            n_classes,
            sums: vec![0.0; n_neurons * n_classes],
            class_counts: vec![0; n_classes],
        }
    }

    pub fn add(&mut self, label: u8, counts: &[u32]) {
        let c = label as usize;
        self.class_counts[c] += 1;
        for (i, &k) in counts.iter().enumerate() {
            self.sums[i * self.n_classes + c] += k as f64;
        }
    }

    /// Mean response per `[neuron][class]`; classes never seen give 0.
    pub fn mean_responses(&self) -> Vec<f64> {
        let mut out = self.sums.clone();
        for row in out.chunks_mut(self.n_classes) {
            for (c, r) in row.iter_mut().enumerate() {
                if self.class_counts[c] > 0 {
                    *r /= self.class_counts[c] as f64;
                }
            }
        }
        out
    }

    pub fn finish(&self) -> Result<LabelMap> {
        LabelMap::from_responses(&self.mean_responses(), self.n_neurons, self.n_classes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_class_neuron_gets_that_label() {
        let mut acc = ResponseAccumulator::new(2, 10);
        acc.add(3, &[5, 0]);
        acc.add(7, &[0, 2]);
        acc.add(1, &[0, 0]);
        let map = acc.finish().unwrap();
        assert_eq!(map.labels(), &[3, 7]);
        assert_eq!(map.flagged(), &[false, false]);
    }

    #[test]
    fn uniform_or_silent_neurons_tie_to_zero() {
        let map = LabelMap::from_responses(&[1.0, 1.0, 1.0, 0.0, 0.0, 0.0], 2, 3).unwrap();
        assert_eq!(map.labels(), &[0, 0]);
        assert_eq!(map.flagged(), &[false, true]);
    }

    #[test]
    fn labels_invariant_under_positive_scaling() {
        let resp = [0.2, 3.0, 1.0, 4.0, 4.0, 0.5];
        let a = LabelMap::from_responses(&resp, 2, 3).unwrap();
        let scaled: Vec<f64> = resp.iter().map(|r| r * 17.5).collect();
        let b = LabelMap::from_responses(&scaled, 2, 3).unwrap();
        assert_eq!(a.labels(), b.labels());
    }

    #[test]
    fn vote_uses_totals_and_flags_silence() {
        let map = LabelMap::new(vec![2, 0, 2, 1], 3).unwrap();
        let v = map.classify(&[1, 3, 1, 0]);
        assert_eq!(v.totals, vec![3, 0, 2]);
        assert_eq!(v.label, 0);
        assert!(!v.silent);
        let v = map.classify(&[0, 0, 0, 0]);
        assert_eq!(v.label, 0);
        assert!(v.silent);
    }

    #[test]
    fn rejects_out_of_range_labels() {
        assert!(LabelMap::new(vec![10], 10).is_err());
        assert!(LabelMap::new(vec![], 0).is_err());
    }
}
