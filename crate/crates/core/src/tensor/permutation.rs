use serde::{Deserialize, Serialize};

use crate::error::{LipError, Result};

/// A permutation of `{0, ..., n-1}` stored as its image list.
///
/// Acting on tensors, `σ` sends `x_1 ⊗ ... ⊗ x_n` to `x_{σ(1)} ⊗ ... ⊗ x_{σ(n)}`.
/// This is a right action: applying `a.compose(&b)` equals applying `a` first and
/// then `b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &i in &images {
            if i >= images.len() || std::mem::replace(&mut seen[i], true) {
                return Err(LipError::invalid(format!("{images:?} is not a permutation")));
            }
        }
        Ok(Self { images })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            images: (0..n).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.images.len()
    }

    pub fn image(&self, m: usize) -> usize {
        self.images[m]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// Function composition `self ∘ other`, i.e. `m ↦ self(other(m))`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.size() != other.size() {
            return Err(LipError::dims("composing permutations of different sizes"));
        }
        Ok(Self {
            images: other.images.iter().map(|&m| self.images[m]).collect(),
        })
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.size()];
        for (m, &i) in self.images.iter().enumerate() {
            inv[i] = m;
        }
        Self { images: inv }
    }

    /// All of `S_n` in lexicographic order of image lists.
    pub fn all(n: usize) -> Result<Vec<Self>> {
        super::check_order(n)?;
        let mut cur: Vec<usize> = (0..n).collect();
        let mut out = vec![Self { images: cur.clone() }];
        // next lexicographic permutation
        loop {
            let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
                break;
            };
            let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("pivot exists");
            cur.swap(i - 1, j);
            cur[i..].reverse();
            out.push(Self { images: cur.clone() });
        }
        Ok(out)
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = LipError;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.images
    }
}
