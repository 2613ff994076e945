use serde::{Deserialize, Serialize};

/// Binary decision tree. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Class-1 probability for classification trees, raw score for boosted trees.
        value: f64,
        n_samples: usize,
    },
}

impl TreeNode {
    pub fn leaf(value: f64, n_samples: usize) -> Self {
        TreeNode::Leaf { value, n_samples }
    }

    #[inline]
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn n_leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.n_leaves() + right.n_leaves(),
        }
    }

    /// Depth of the deepest leaf; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// `(feature, threshold)` of every split in pre-order.
    pub fn splits(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if let TreeNode::Split {
                feature, threshold, ..
            } = n
            {
                out.push((*feature, *threshold));
            }
        });
        out
    }

    /// Leaf values in pre-order.
    pub fn leaf_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.walk(&mut |n| {
            if let TreeNode::Leaf { value, .. } = n {
                out.push(*value);
            }
        });
        out
    }

    pub fn walk<F: FnMut(&TreeNode)>(&self, f: &mut F) {
        f(self);
        if let TreeNode::Split { left, right, .. } = self {
            left.walk(f);
            right.walk(f);
        }
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.splits().iter().map(|s| s.0).max()
    }
}
