use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predicate `feature == code`, where the code is a categorical value index or
/// a continuous bin index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Item {
    pub feature: usize,
    pub code: usize,
}

impl Item {
    pub fn new(feature: usize, code: usize) -> Self {
        Item { feature, code }
    }
}

/// Conjunction of items over distinct features, sorted by feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Itemset {
    pub items: Vec<Item>,
    pub support: f64,
}

impl Itemset {
    pub fn features(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.feature).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Codes per row and feature; transactions are rows, one item per feature.
pub(crate) fn transactions_of(codes: &[Vec<usize>]) -> Vec<Vec<Item>> {
    codes
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(f, &c)| Item::new(f, c))
                .collect()
        })
        .collect()
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Level-wise apriori over transactions holding at most one item per feature.
///
/// Returns every itemset with support at least `p` and at most `max_len`
/// items, ordered by support descending, then lexicographically.
pub fn mine_transactions(
    transactions: &[Vec<Item>],
    p: f64,
    max_len: usize,
) -> Result<Vec<Itemset>> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "support threshold {p} not in (0, 1]"
        )));
    }
    if max_len == 0 {
        return Err(Error::InvalidArgument(
            "maximum itemset length must be at least 1".into(),
        ));
    }
    let n = transactions.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let min_count = |count: usize| count as f64 / n as f64 >= p - 1e-9;

    let mut tid: HashMap<Item, Bits> = HashMap::new();
    for (t, row) in transactions.iter().enumerate() {
        let mut seen = HashSet::new();
        for item in row {
            if !seen.insert(item.feature) {
                return Err(Error::InvalidArgument(format!(
                    "transaction {t} has two items on feature {}",
                    item.feature
                )));
            }
            tid.entry(*item).or_insert_with(|| Bits::new(n)).set(t);
        }
    }
    let mut level: Vec<(Vec<Item>, Bits)> = tid
        .into_iter()
        .filter(|(_, b)| min_count(b.count()))
        .map(|(i, b)| (vec![i], b))
        .collect();
    level.sort_by(|a, b| a.0.cmp(&b.0));

    let mut out: Vec<Itemset> = Vec::new();
    let mut size = 1;
    while !level.is_empty() {
        out.extend(level.iter().map(|(items, bits)| Itemset {
            items: items.clone(),
            support: bits.count() as f64 / n as f64,
        }));
        if size == max_len {
            break;
        }
        let frequent: HashSet<&[Item]> = level.iter().map(|(i, _)| i.as_slice()).collect();
        let mut next = Vec::new();
        for a in 0..level.len() {
            for b in a + 1..level.len() {
                let (ia, ib) = (&level[a].0, &level[b].0);
                if ia[..size - 1] != ib[..size - 1] {
                    // sorted level: later b cannot share the prefix either
                    break;
                }
                let (la, lb) = (ia[size - 1], ib[size - 1]);
                if la.feature == lb.feature {
                    continue;
                }
                let mut cand = ia.clone();
                cand.push(lb);
                let pruned = (0..cand.len() - 2).any(|drop| {
                    let sub: Vec<Item> = cand
                        .iter()
                        .enumerate()
                        .filter(|&(i, _)| i != drop)
                        .map(|(_, &it)| it)
                        .collect();
                    !frequent.contains(sub.as_slice())
                });
                if pruned {
                    continue;
                }
                let bits = level[a].1.and(&level[b].1);
                if min_count(bits.count()) {
                    next.push((cand, bits));
                }
            }
        }
        next.sort_by(|a, b| a.0.cmp(&b.0));
        level = next;
        size += 1;
    }
    out.sort_by(|a, b| {
        b.support
            .total_cmp(&a.support)
            .then_with(|| a.items.cmp(&b.items))
    });
    Ok(out)
}
