//! Assignment of training samples to participants, without replacement.

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Per-participant sample indices (sorted) for one group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub group: usize,
    pub participants: Vec<Vec<usize>>,
}

impl Partition {
    pub fn counts(&self) -> Vec<usize> {
        self.participants.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.participants.iter().map(Vec::len).sum()
    }
}

const STREAM_COUNTS: u64 = 0xC0;
const STREAM_INDICES: u64 = 0x1D;

fn assign(train_size: usize, counts: &[usize], group: usize, seed: u64) -> Partition {
    let mut rng = rng::stream(seed, &[STREAM_INDICES, group as u64]);
    let mut order: Vec<usize> = (0..train_size).collect();
    order.shuffle(&mut rng);
    let mut start = 0;
    let participants = counts
        .iter()
        .map(|&c| {
            let mut chunk = order[start..start + c].to_vec();
            chunk.sort_unstable();
            start += c;
            chunk
        })
        .collect();
    Partition { group, participants }
}

fn check(train_size: usize, n: usize, min_count: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::config("need at least one participant"));
    }
    if train_size < n * min_count.max(1) {
        return Err(Error::config(format!(
            "{train_size} samples cannot give {n} participants at least {} each",
            min_count.max(1)
        )));
    }
    Ok(())
}

/// Equal shares of `floor(N/n)`, the first `N mod n` participants taking one extra.
pub fn partition_balanced(train_size: usize, participants: usize, group: usize, seed: u64) -> Result<Partition> {
    check(train_size, participants, 1)?;
    let base = train_size / participants;
    let extra = train_size % participants;
    let counts: Vec<usize> = (0..participants).map(|k| base + usize::from(k < extra)).collect();
    Ok(assign(train_size, &counts, group, seed))
}

/// A uniformly random composition of `total` into `parts` summands, each at
/// least `min_count`: the surplus over the floor is cut at `parts - 1` distinct
/// random positions (stars and bars).
pub fn composition(total: usize, parts: usize, min_count: usize, rng: &mut impl Rng) -> Result<Vec<usize>> {
    check(total, parts, min_count)?;
    let surplus = total - parts * min_count;
    let slots = surplus + parts - 1;
    let mut cuts: Vec<usize> = index::sample(rng, slots, parts - 1).into_vec();
    cuts.sort_unstable();
    let mut counts = Vec::with_capacity(parts);
    let mut prev = 0;
    for (i, &c) in cuts.iter().enumerate() {
        // Position c among the slots; bars before it are i, stars before it c - i.
        let stars = c - i;
        counts.push(min_count + stars - prev);
        prev = stars;
    }
    counts.push(min_count + surplus - prev);
    Ok(counts)
}

/// One random count vector shared by the three groups; indices are drawn
/// independently for each group.
pub fn partition_unbalanced_paired(
    train_sizes: [usize; 3],
    participants: usize,
    min_count: usize,
    seed: u64,
) -> Result<[Partition; 3]> {
    let n = train_sizes[0];
    if train_sizes.iter().any(|&s| s != n) {
        return Err(Error::config(format!(
            "paired partition needs equal group sizes, got {train_sizes:?}"
        )));
    }
    let mut rng = rng::stream(seed, &[STREAM_COUNTS]);
    let counts = composition(n, participants, min_count, &mut rng)?;
    Ok([0, 1, 2].map(|g| assign(n, &counts, g, seed)))
}

/// Independent random count vectors per group.
pub fn partition_unbalanced_random(
    train_size: usize,
    participants: usize,
    min_count: usize,
    seed: u64,
) -> Result<[Partition; 3]> {
    check(train_size, participants, min_count)?;
    let mut out = Vec::with_capacity(3);
    for g in 0..3 {
        let mut rng = rng::stream(seed, &[STREAM_COUNTS, g as u64]);
        let counts = composition(train_size, participants, min_count, &mut rng)?;
        out.push(assign(train_size, &counts, g, seed));
    }
    Ok(out.try_into().expect("three groups"))
}
