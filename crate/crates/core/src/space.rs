//! Finite state and action spaces with integer-vector labels.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An integer-vector label of a state or an action.
pub type Label = Vec<i64>;

/// Ordered list of distinct labels of equal dimension with a dense index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Label>", into = "Vec<Label>")]
pub struct LabelSpace {
    labels: Vec<Label>,
    #[serde(skip)]
    index: HashMap<Label, usize>,
}

impl LabelSpace {
    pub fn new(labels: Vec<Label>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Structure("label space must be nonempty".into()));
        }
        let dim = labels[0].len();
        let mut index = HashMap::with_capacity(labels.len());
        for (i, label) in labels.iter().enumerate() {
            if label.len() != dim {
                return Err(Error::Dimension {
                    what: "label dimension",
                    expected: dim,
                    actual: label.len(),
                });
            }
            if index.insert(label.clone(), i).is_some() {
                return Err(Error::Structure(format!("duplicate label {label:?}")));
            }
        }
        Ok(Self { labels, index })
    }

    /// One-dimensional labels `values[0]`, `values[1]`, ...
    pub fn scalar(values: impl IntoIterator<Item = i64>) -> Result<Self> {
        Self::new(values.into_iter().map(|v| vec![v]).collect())
    }

    /// Labels `[0], [1], ..., [n-1]`.
    pub fn range(n: usize) -> Result<Self> {
        Self::scalar(0..n as i64)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.labels[0].len()
    }

    pub fn label(&self, i: usize) -> &Label {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn index_of(&self, label: &[i64]) -> Option<usize> {
        self.index.get(label).copied()
    }
}

impl TryFrom<Vec<Label>> for LabelSpace {
    type Error = Error;

    fn try_from(labels: Vec<Label>) -> Result<Self> {
        Self::new(labels)
    }
}

impl From<LabelSpace> for Vec<Label> {
    fn from(space: LabelSpace) -> Self {
        space.labels
    }
}

/// The state space 𝒳.
pub type FiniteStateSpace = LabelSpace;
/// The action space A.
pub type FiniteActionSpace = LabelSpace;
