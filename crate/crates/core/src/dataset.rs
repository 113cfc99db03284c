//! Users, items and their graded interaction lists.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::rng::RngHandle;
use crate::sparse::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
    pub relevance: u32,
}

/// Immutable interaction table with dense user and item ids.
///
/// Each user's list is kept sorted by item id so membership tests are a
/// binary search.
#[derive(Debug, Clone)]
pub struct InteractionDataset {
    user_tokens: Vec<String>,
    item_tokens: Vec<String>,
    lists: Vec<Vec<(usize, u32)>>,
    grades: BTreeSet<u32>,
    popularity_rank: Vec<usize>,
    entries: usize,
}

impl InteractionDataset {
    /// `lists[u]` holds `(item, grade)` pairs of user `u`, in any order.
    pub fn new(
        user_tokens: Vec<String>,
        item_tokens: Vec<String>,
        lists: Vec<Vec<(usize, u32)>>,
    ) -> Result<Self> {
        if lists.len() != user_tokens.len() {
            return Err(Error::Shape(format!(
                "{} interaction lists for {} users",
                lists.len(),
                user_tokens.len()
            )));
        }
        let n_items = item_tokens.len();
        let mut grades = BTreeSet::new();
        let mut sorted_lists = Vec::with_capacity(lists.len());
        let mut entries = 0;
        for (user, mut list) in lists.into_iter().enumerate() {
            list.sort_unstable_by_key(|&(item, _)| item);
            for pair in list.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(Error::Shape(format!(
                        "user {user} lists item {} twice",
                        pair[0].0
                    )));
                }
            }
            for &(item, grade) in &list {
                if item >= n_items {
                    return Err(Error::IdRange {
                        kind: "item",
                        id: item,
                        limit: n_items,
                    });
                }
                grades.insert(grade);
            }
            entries += list.len();
            sorted_lists.push(list);
        }
        let mut ds = InteractionDataset {
            user_tokens,
            item_tokens,
            lists: sorted_lists,
            grades,
            popularity_rank: Vec::new(),
            entries,
        };
        ds.popularity_rank = build_popularity_index(&ds);
        Ok(ds)
    }

    /// Dataset with numeric tokens `0..n`, mostly for tests and synthetic data.
    pub fn from_lists(n_users: usize, n_items: usize, lists: Vec<Vec<(usize, u32)>>) -> Result<Self> {
        InteractionDataset::new(
            (0..n_users).map(|u| u.to_string()).collect(),
            (0..n_items).map(|i| i.to_string()).collect(),
            lists,
        )
    }

    /// Same id tables, different interaction lists.
    pub fn with_lists(&self, lists: Vec<Vec<(usize, u32)>>) -> Result<Self> {
        InteractionDataset::new(self.user_tokens.clone(), self.item_tokens.clone(), lists)
    }

    pub fn n_users(&self) -> usize {
        self.user_tokens.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_tokens.len()
    }

    pub fn n_entries(&self) -> usize {
        self.entries
    }

    pub fn user_token(&self, user: usize) -> &str {
        &self.user_tokens[user]
    }

    pub fn item_token(&self, item: usize) -> &str {
        &self.item_tokens[item]
    }

    pub fn user_tokens(&self) -> &[String] {
        &self.user_tokens
    }

    pub fn item_tokens(&self) -> &[String] {
        &self.item_tokens
    }

    pub fn user_id(&self, token: &str) -> Option<usize> {
        self.user_tokens.iter().position(|t| t == token)
    }

    pub fn grades(&self) -> &BTreeSet<u32> {
        &self.grades
    }

    /// `(item, grade)` pairs of `user`, sorted by item id.
    pub fn user_items(&self, user: usize) -> &[(usize, u32)] {
        &self.lists[user]
    }

    pub fn lists(&self) -> &[Vec<(usize, u32)>] {
        &self.lists
    }

    pub fn interactions(&self) -> impl Iterator<Item = Interaction> + '_ {
        self.lists.iter().enumerate().flat_map(|(user, list)| {
            list.iter().map(move |&(item, relevance)| Interaction {
                user,
                item,
                relevance,
            })
        })
    }

    pub fn grade_of(&self, user: usize, item: usize) -> Option<u32> {
        let list = &self.lists[user];
        list.binary_search_by_key(&item, |&(i, _)| i)
            .ok()
            .map(|pos| list[pos].1)
    }

    /// Highest grade in the user's list, if any.
    pub fn top_grade(&self, user: usize) -> Option<u32> {
        self.lists[user].iter().map(|&(_, g)| g).max()
    }

    /// Items carrying the user's highest positive grade.
    pub fn top_items(&self, user: usize) -> Vec<usize> {
        match self.top_grade(user) {
            Some(top) if top > 0 => self.lists[user]
                .iter()
                .filter(|&&(_, g)| g == top)
                .map(|&(i, _)| i)
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Rank of every item by descending interaction count (0 = most popular).
    pub fn popularity_rank(&self) -> &[usize] {
        &self.popularity_rank
    }

    pub fn feature_encoder(&self) -> FeatureEncoder {
        FeatureEncoder::new(self.n_users(), self.n_items())
    }
}

/// One-hot user block followed by one-hot item block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureEncoder {
    n_users: usize,
    n_items: usize,
}

impl FeatureEncoder {
    pub fn new(n_users: usize, n_items: usize) -> Self {
        FeatureEncoder { n_users, n_items }
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn user_offset(&self) -> usize {
        0
    }

    pub fn item_offset(&self) -> usize {
        self.n_users
    }

    pub fn dim(&self) -> usize {
        self.n_users + self.n_items
    }

    pub fn user_feature(&self, user: usize) -> usize {
        user
    }

    pub fn item_feature(&self, item: usize) -> usize {
        self.n_users + item
    }

    pub fn encode(&self, user: usize, item: usize) -> Result<SparseVector> {
        encode_pair(user, item, self)
    }

    /// Inverse of [`encode`](Self::encode) for vectors it produced.
    pub fn decode(&self, x: &SparseVector) -> Option<(usize, usize)> {
        match x.entries() {
            [(u, _), (i, _)] if *u < self.n_users && *i >= self.n_users && *i < self.dim() => {
                Some((*u, *i - self.n_users))
            }
            _ => None,
        }
    }
}

pub fn encode_pair(user: usize, item: usize, enc: &FeatureEncoder) -> Result<SparseVector> {
    if user >= enc.n_users {
        return Err(Error::IdRange {
            kind: "user",
            id: user,
            limit: enc.n_users,
        });
    }
    if item >= enc.n_items {
        return Err(Error::IdRange {
            kind: "item",
            id: item,
            limit: enc.n_items,
        });
    }
    SparseVector::new(
        enc.dim(),
        vec![(enc.user_feature(user), 1.0), (enc.item_feature(item), 1.0)],
    )
}

/// Lower-grade candidates for one `(user, anchor)` pair.
///
/// Holds the observed items graded strictly below the anchor plus every
/// unobserved item (implicit grade 0). The unobserved part is never
/// materialized; draws use rejection against the user's sorted list.
#[derive(Debug, Clone, Copy)]
pub struct NegativePool<'a> {
    user_items: &'a [(usize, u32)],
    anchor_grade: u32,
    n_items: usize,
    len: usize,
}

impl<'a> NegativePool<'a> {
    pub fn new(ds: &'a InteractionDataset, user: usize, anchor_grade: u32) -> Self {
        let user_items = ds.user_items(user);
        let excluded = user_items.iter().filter(|&&(_, g)| g >= anchor_grade).count();
        NegativePool {
            user_items,
            anchor_grade,
            n_items: ds.n_items(),
            len: ds.n_items() - excluded,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Size of the whole catalog the pool is carved from.
    pub fn catalog_size(&self) -> usize {
        self.n_items
    }

    pub fn contains(&self, item: usize) -> bool {
        if item >= self.n_items {
            return false;
        }
        match self.user_items.binary_search_by_key(&item, |&(i, _)| i) {
            Ok(pos) => self.user_items[pos].1 < self.anchor_grade,
            Err(_) => true,
        }
    }

    pub fn to_vec(&self) -> Vec<usize> {
        (0..self.n_items).filter(|&i| self.contains(i)).collect()
    }

    /// Uniform draw over the pool.
    pub fn sample(&self, rng: &mut RngHandle) -> Result<usize> {
        if self.is_empty() {
            return Err(Error::Sampling("negative pool is empty".into()));
        }
        // rejection is exact; fall back to enumeration when the pool is a small fraction
        for _ in 0..64 {
            let item = rng.uniform_usize(self.n_items);
            if self.contains(item) {
                return Ok(item);
            }
        }
        let all = self.to_vec();
        Ok(all[rng.uniform_usize(all.len())])
    }
}

/// Same-grade items `I_ab` and the lower-grade pool `I^-_ab` for an observed pair.
pub fn positive_and_negative_sets(
    ds: &InteractionDataset,
    user: usize,
    anchor_item: usize,
) -> Result<(Vec<usize>, NegativePool<'_>)> {
    if user >= ds.n_users() {
        return Err(Error::Lookup(format!("unknown user {user}")));
    }
    let grade = ds
        .grade_of(user, anchor_item)
        .ok_or_else(|| Error::Lookup(format!("user {user} has no interaction with item {anchor_item}")))?;
    let same = ds
        .user_items(user)
        .iter()
        .filter(|&&(_, g)| g == grade)
        .map(|&(i, _)| i)
        .collect();
    Ok((same, NegativePool::new(ds, user, grade)))
}

/// Ranks items by descending interaction count, ties by ascending id.
pub fn build_popularity_index(ds: &InteractionDataset) -> Vec<usize> {
    let mut counts = vec![0usize; ds.n_items()];
    for list in &ds.lists {
        for &(item, _) in list {
            counts[item] += 1;
        }
    }
    popularity_rank_from_counts(&counts)
}

pub fn popularity_rank_from_counts(counts: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let mut rank = vec![0; counts.len()];
    for (r, item) in order.into_iter().enumerate() {
        rank[item] = r;
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> InteractionDataset {
        // user 0: i1=1, i2=1, i3=0 ; user 1: i0=1
        InteractionDataset::from_lists(
            2,
            5,
            vec![vec![(1, 1), (2, 1), (3, 0)], vec![(0, 1)]],
        )
        .unwrap()
    }

    #[test]
    fn encode_first_and_last_ids() {
        let enc = FeatureEncoder::new(3, 2);
        let x = encode_pair(0, 0, &enc).unwrap();
        assert_eq!(x.entries(), &[(0, 1.0), (3, 1.0)]);
        assert_eq!(x.dim(), 5);
        let x = encode_pair(2, 1, &enc).unwrap();
        assert_eq!(x.entries(), &[(2, 1.0), (4, 1.0)]);
    }

    #[test]
    fn encode_out_of_range() {
        let enc = FeatureEncoder::new(3, 2);
        assert!(matches!(encode_pair(3, 0, &enc), Err(Error::IdRange { kind: "user", .. })));
        assert!(matches!(encode_pair(0, 2, &enc), Err(Error::IdRange { kind: "item", .. })));
    }

    #[test]
    fn same_and_lower_grade_sets() {
        let ds = toy();
        let (same, pool) = positive_and_negative_sets(&ds, 0, 1).unwrap();
        assert_eq!(same, vec![1, 2]);
        assert!(pool.contains(3));
        assert!(!pool.contains(1));
        assert!(!pool.contains(2));
        // unobserved items 0 and 4 count as implicit negatives
        assert_eq!(pool.to_vec(), vec![0, 3, 4]);
    }

    #[test]
    fn uniform_grades_leave_only_unobserved() {
        let ds = toy();
        let (same, pool) = positive_and_negative_sets(&ds, 1, 0).unwrap();
        assert_eq!(same, vec![0]);
        assert_eq!(pool.to_vec(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn lowest_grade_anchor_uses_unobserved_only() {
        let ds = toy();
        let (same, pool) = positive_and_negative_sets(&ds, 0, 3).unwrap();
        assert_eq!(same, vec![3]);
        assert_eq!(pool.to_vec(), vec![0, 4]);
    }

    #[test]
    fn unknown_pair_is_a_lookup_error() {
        let ds = toy();
        assert!(matches!(positive_and_negative_sets(&ds, 0, 4), Err(Error::Lookup(_))));
        assert!(matches!(positive_and_negative_sets(&ds, 9, 0), Err(Error::Lookup(_))));
    }

    #[test]
    fn popularity_examples() {
        assert_eq!(popularity_rank_from_counts(&[5, 2, 9]), vec![1, 2, 0]);
        assert_eq!(popularity_rank_from_counts(&[3, 3]), vec![0, 1]);
        assert_eq!(popularity_rank_from_counts(&[4]), vec![0]);
    }

    #[test]
    fn duplicate_items_rejected() {
        assert!(InteractionDataset::from_lists(1, 3, vec![vec![(1, 1), (1, 0)]]).is_err());
    }

    #[test]
    fn pool_sampling_stays_inside_pool() {
        let ds = toy();
        let pool = NegativePool::new(&ds, 0, 1);
        let mut rng = RngHandle::new(5);
        for _ in 0..1000 {
            assert!(pool.contains(pool.sample(&mut rng).unwrap()));
        }
    }

    proptest! {
        #[test]
        fn encode_roundtrip(n_users in 1usize..50, n_items in 1usize..50, u in 0usize..50, i in 0usize..50) {
            prop_assume!(u < n_users && i < n_items);
            let enc = FeatureEncoder::new(n_users, n_items);
            let x = enc.encode(u, i).unwrap();
            prop_assert_eq!(x.nnz(), 2);
            prop_assert_eq!(enc.decode(&x), Some((u, i)));
        }

        #[test]
        fn popularity_rank_is_permutation(counts in proptest::collection::vec(0usize..20, 1..60)) {
            let mut ranks = popularity_rank_from_counts(&counts);
            for w in 0..counts.len() {
                for v in 0..counts.len() {
                    if counts[w] > counts[v] {
                        prop_assert!(ranks[w] < ranks[v]);
                    }
                }
            }
            ranks.sort_unstable();
            prop_assert_eq!(ranks, (0..counts.len()).collect::<Vec<_>>());
        }
    }
}
