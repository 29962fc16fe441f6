//! Choosing which frames of a sequence become training examples.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub trait FrameSelector: Send + Sync {
    /// Returns `n` distinct indices below `total`.
    fn select(&self, total: usize, n: usize, seed: u64) -> Result<Vec<usize>>;
}

/// Uniform sampling without replacement, sorted ascending.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomSelector;

/// A fixed, hand-picked list, returned as given.
#[derive(Clone, Debug)]
pub struct ManifestSelector {
    pub indices: Vec<usize>,
}

impl FrameSelector for RandomSelector {
    fn select(&self, total: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
        if n > total {
            return Err(Error::InvalidArgument(format!("cannot select {n} of {total} frames")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, total, n).into_vec();
        picked.sort_unstable();
        Ok(picked)
    }
}

impl FrameSelector for ManifestSelector {
    fn select(&self, total: usize, _n: usize, _seed: u64) -> Result<Vec<usize>> {
        let mut seen = HashSet::new();
        for &i in &self.indices {
            if i >= total {
                return Err(Error::InvalidArgument(format!("manifest index {i} outside 0..{total}")));
            }
            if !seen.insert(i) {
                return Err(Error::InvalidArgument(format!("manifest index {i} repeated")));
            }
        }
        Ok(self.indices.clone())
    }
}

/// Uses `focus` verbatim when given, otherwise samples `n` at random.
pub fn select_frames(total: usize, n: usize, seed: u64, focus: Option<&[usize]>) -> Result<Vec<usize>> {
    match focus {
        Some(f) => ManifestSelector { indices: f.to_vec() }.select(total, n, seed),
        None => RandomSelector.select(total, n, seed),
    }
}

/// One integer per line; blank lines and `#` comments are skipped.
pub fn parse_manifest(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line = line.split('#').next().unwrap_or("").trim();
            (!line.is_empty()).then(|| {
                line.parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("manifest line {}: `{line}` is not a frame number", i + 1)))
            })
        })
        .collect()
}
