//! Prefix-sum tree over bond rates.

/// Complete binary tree of partial sums; leaf `j` holds the rate of bond `j`.
/// Internal nodes are always recomputed from their children, so the root
/// never drifts away from the sum of the leaves by more than the rounding of
/// one pass.
#[derive(Debug, Clone)]
pub struct RateIndex {
    len: usize,
    leaves: usize,
    tree: Vec<f64>,
}

impl RateIndex {
    pub fn new(rates: &[f64]) -> Self {
        assert!(!rates.is_empty(), "rate index needs at least one bond");
        let leaves = rates.len().next_power_of_two();
        let mut tree = vec![0.0; 2 * leaves];
        tree[leaves..leaves + rates.len()].copy_from_slice(rates);
        let mut index = Self {
            len: rates.len(),
            leaves,
            tree,
        };
        index.rebuild();
        index
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Recomputes every internal node from the leaves.
    pub fn rebuild(&mut self) {
        for node in (1..self.leaves).rev() {
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1];
        }
    }

    #[inline]
    pub fn total(&self) -> f64 {
        self.tree[1]
    }

    #[inline]
    pub fn get(&self, bond: usize) -> f64 {
        self.tree[self.leaves + bond]
    }

    #[inline]
    pub fn set(&mut self, bond: usize, rate: f64) {
        debug_assert!(
            rate >= 0.0 && rate.is_finite(),
            "bad rate {rate} at bond {bond}"
        );
        let mut node = self.leaves + bond;
        self.tree[node] = rate;
        while node > 1 {
            node /= 2;
            self.tree[node] = self.tree[2 * node] + self.tree[2 * node + 1];
        }
    }

    /// Bond `j` with `Σ_{i<j} w_i <= target < Σ_{i<=j} w_i`, for `target` in
    /// `[0, total)`. Never returns a zero-rate bond while the total is positive.
    #[inline]
    pub fn find(&self, mut target: f64) -> usize {
        let mut node = 1;
        while node < self.leaves {
            let left = self.tree[2 * node];
            let right = self.tree[2 * node + 1];
            if (target < left && left > 0.0) || right <= 0.0 {
                node *= 2;
            } else {
                target -= left;
                node = 2 * node + 1;
            }
        }
        node - self.leaves
    }

    /// Sum of the leaves computed from scratch.
    pub fn leaf_sum(&self) -> f64 {
        self.tree[self.leaves..self.leaves + self.len].iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn finds_proportional_bonds() {
        let index = RateIndex::new(&[1.0, 0.0, 2.0, 1.0, 0.0]);
        assert_eq!(index.total(), 4.0);
        assert_eq!(index.find(0.0), 0);
        assert_eq!(index.find(0.999), 0);
        assert_eq!(index.find(1.0), 2);
        assert_eq!(index.find(2.9), 2);
        assert_eq!(index.find(3.5), 3);
        // rounding past the end never lands on the zero-rate padding
        assert_eq!(index.find(4.0), 3);
    }

    proptest! {
        #[test]
        fn updates_track_leaf_sum(
            rates in prop::collection::vec(0.0f64..5.0, 1..200),
            updates in prop::collection::vec((0usize..200, 0.0f64..5.0), 0..500),
        ) {
            let mut index = RateIndex::new(&rates);
            for (bond, rate) in updates {
                index.set(bond % rates.len(), rate);
            }
            let exact = index.leaf_sum();
            prop_assert!((index.total() - exact).abs() <= rates.len() as f64 * 2f64.powi(-40) * exact.max(1.0));
            if index.total() > 0.0 {
                let j = index.find(index.total() * 0.999_999);
                prop_assert!(index.get(j) > 0.0);
            }
        }
    }
}
