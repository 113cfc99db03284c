//! Loading, filtering and splitting interaction files.
//!
//! Input is UTF-8, one `user<TAB>item<TAB>grade` record per line, `#` lines
//! ignored. Tokens get dense ids in first-seen order.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use log::{info, warn};

use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::rng::RngHandle;

#[derive(Default)]
struct Vocabulary {
    users: Vec<String>,
    items: Vec<String>,
    user_ids: HashMap<String, usize>,
    item_ids: HashMap<String, usize>,
}

impl Vocabulary {
    fn intern(ids: &mut HashMap<String, usize>, tokens: &mut Vec<String>, tok: &str) -> usize {
        if let Some(&id) = ids.get(tok) {
            return id;
        }
        let id = tokens.len();
        tokens.push(tok.to_string());
        ids.insert(tok.to_string(), id);
        id
    }

    fn user(&mut self, tok: &str) -> usize {
        Vocabulary::intern(&mut self.user_ids, &mut self.users, tok)
    }

    fn item(&mut self, tok: &str) -> usize {
        Vocabulary::intern(&mut self.item_ids, &mut self.items, tok)
    }
}

type Triples = Vec<(usize, usize, u32)>;

fn read_triples<R: BufRead>(reader: R, vocab: &mut Vocabulary) -> Result<Triples> {
    let mut triples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::Parse {
                line: lineno,
                msg: "empty user or item token".into(),
            });
        }
        let grade: u32 = fields[2].trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("grade {:?} is not a non-negative integer", fields[2]),
        })?;
        let user = vocab.user(fields[0]);
        let item = vocab.item(fields[1]);
        triples.push((user, item, grade));
    }
    Ok(triples)
}

/// Groups triples per user, keeping the maximum grade of repeated pairs.
fn collapse(n_users: usize, triples: &Triples) -> Vec<Vec<(usize, u32)>> {
    let mut per_user: Vec<HashMap<usize, u32>> = vec![HashMap::new(); n_users];
    for &(u, i, g) in triples {
        let slot = per_user[u].entry(i).or_insert(g);
        *slot = (*slot).max(g);
    }
    per_user
        .into_iter()
        .map(|m| {
            let mut list: Vec<(usize, u32)> = m.into_iter().collect();
            list.sort_unstable();
            list
        })
        .collect()
}

pub fn parse_interactions<R: BufRead>(reader: R) -> Result<InteractionDataset> {
    let mut vocab = Vocabulary::default();
    let triples = read_triples(reader, &mut vocab)?;
    if triples.is_empty() {
        return Err(Error::EmptyDataset("no interactions in input".into()));
    }
    let lists = collapse(vocab.users.len(), &triples);
    let ds = InteractionDataset::new(vocab.users, vocab.items, lists)?;
    info!(
        "loaded {} users, {} items, {} entries ({} lines)",
        ds.n_users(),
        ds.n_items(),
        ds.n_entries(),
        triples.len()
    );
    Ok(ds)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<InteractionDataset> {
    parse_interactions(BufReader::new(File::open(path)?))
}

/// Loads a train/test pair into one shared id space (train tokens first).
pub fn load_split(
    train_path: impl AsRef<Path>,
    test_path: impl AsRef<Path>,
) -> Result<(InteractionDataset, InteractionDataset)> {
    let mut vocab = Vocabulary::default();
    let train = read_triples(BufReader::new(File::open(train_path)?), &mut vocab)?;
    let test = read_triples(BufReader::new(File::open(test_path)?), &mut vocab)?;
    if train.is_empty() {
        return Err(Error::EmptyDataset("training split is empty".into()));
    }
    let n_users = vocab.users.len();
    let train_lists = collapse(n_users, &train);
    let test_lists = collapse(n_users, &test);
    let train = InteractionDataset::new(vocab.users, vocab.items, train_lists)?;
    let test = train.with_lists(test_lists)?;
    Ok((train, test))
}

/// Writes `user<TAB>item<TAB>grade` lines in user-id, then item-id order.
pub fn write_interactions<W: Write>(ds: &InteractionDataset, mut out: W) -> Result<()> {
    for it in ds.interactions() {
        writeln!(
            out,
            "{}\t{}\t{}",
            ds.user_token(it.user),
            ds.item_token(it.item),
            it.relevance
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_interactions(ds: &InteractionDataset, path: impl AsRef<Path>) -> Result<()> {
    write_interactions(ds, BufWriter::new(File::create(path)?))
}

/// Removes users with fewer than `threshold` interactions, then items left
/// without any, and re-densifies both id ranges in their original order.
pub fn filter_min_interactions(ds: &InteractionDataset, threshold: usize) -> Result<InteractionDataset> {
    if threshold == 0 {
        return Ok(ds.clone());
    }
    let kept_users: Vec<usize> = (0..ds.n_users())
        .filter(|&u| ds.user_items(u).len() >= threshold)
        .collect();
    if kept_users.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no user has at least {threshold} interactions"
        )));
    }
    let mut item_used = vec![false; ds.n_items()];
    for &u in &kept_users {
        for &(i, _) in ds.user_items(u) {
            item_used[i] = true;
        }
    }
    let mut item_map = vec![usize::MAX; ds.n_items()];
    let mut item_tokens = Vec::new();
    for (i, used) in item_used.iter().enumerate() {
        if *used {
            item_map[i] = item_tokens.len();
            item_tokens.push(ds.item_token(i).to_string());
        }
    }
    let user_tokens = kept_users.iter().map(|&u| ds.user_token(u).to_string()).collect();
    let lists = kept_users
        .iter()
        .map(|&u| ds.user_items(u).iter().map(|&(i, g)| (item_map[i], g)).collect())
        .collect();
    InteractionDataset::new(user_tokens, item_tokens, lists)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitMethod {
    LeaveOneOut,
    RandomHoldout(f64),
}

impl fmt::Display for SplitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitMethod::LeaveOneOut => write!(f, "loo"),
            SplitMethod::RandomHoldout(frac) => write!(f, "holdout:{frac}"),
        }
    }
}

impl FromStr for SplitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "loo" || s == "leave-one-out" {
            return Ok(SplitMethod::LeaveOneOut);
        }
        let frac = s
            .strip_prefix("holdout:")
            .and_then(|f| f.parse::<f64>().ok())
            .ok_or_else(|| Error::Config(format!("unknown split {s:?} (expected loo or holdout:<fraction>)")))?;
        let method = SplitMethod::RandomHoldout(frac);
        SplitSpec {
            method,
            seed: 0,
            min_user_interactions: 0,
        }
        .validate()?;
        Ok(method)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub method: SplitMethod,
    pub seed: u64,
    pub min_user_interactions: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            method: SplitMethod::RandomHoldout(0.2),
            seed: 42,
            min_user_interactions: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if let SplitMethod::RandomHoldout(f) = self.method {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Config(format!("holdout fraction {f} must lie in (0, 1)")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: InteractionDataset,
    pub test: InteractionDataset,
    /// Users kept entirely in the training split because they had too few items.
    pub flagged: Vec<usize>,
}

/// Per-user train/test split sharing one id space.
pub fn split(ds: &InteractionDataset, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let filtered;
    let ds = if spec.min_user_interactions > 0 {
        filtered = filter_min_interactions(ds, spec.min_user_interactions)?;
        &filtered
    } else {
        ds
    };
    let mut train_lists = Vec::with_capacity(ds.n_users());
    let mut test_lists = Vec::with_capacity(ds.n_users());
    let mut flagged = Vec::new();
    for u in 0..ds.n_users() {
        let mut rng = RngHandle::derive(spec.seed, u as u64);
        let items = ds.user_items(u).to_vec();
        let (train, test) = match spec.method {
            SplitMethod::LeaveOneOut => {
                let positives: Vec<usize> = (0..items.len()).filter(|&j| items[j].1 > 0).collect();
                if items.len() < 2 || positives.is_empty() {
                    flagged.push(u);
                    (items, Vec::new())
                } else {
                    let held = positives[rng.uniform_usize(positives.len())];
                    let test = vec![items[held]];
                    let train = items
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != held)
                        .map(|(_, &p)| p)
                        .collect();
                    (train, test)
                }
            }
            SplitMethod::RandomHoldout(frac) => {
                let n_a = items.len();
                let want = (frac * n_a as f64).ceil() as usize;
                let held = want.min(n_a.saturating_sub(1));
                if held == 0 {
                    flagged.push(u);
                    (items, Vec::new())
                } else {
                    let mut order: Vec<usize> = (0..n_a).collect();
                    rng.shuffle(&mut order);
                    let mut is_test = vec![false; n_a];
                    for &j in &order[..held] {
                        is_test[j] = true;
                    }
                    let (test, train): (Vec<_>, Vec<_>) =
                        items.iter().enumerate().partition(|&(j, _)| is_test[j]);
                    (
                        train.into_iter().map(|(_, &p)| p).collect(),
                        test.into_iter().map(|(_, &p)| p).collect(),
                    )
                }
            }
        };
        train_lists.push(train);
        test_lists.push(test);
    }
    if !flagged.is_empty() {
        warn!("{} users had too few interactions to hold any out", flagged.len());
    }
    Ok(Split {
        train: ds.with_lists(train_lists)?,
        test: ds.with_lists(test_lists)?,
        flagged,
    })
}

/// Per-user `folds`-way partition: fold `f` tests on every `folds`-th item of
/// each user's shuffled list and trains on the rest.
pub fn k_fold(ds: &InteractionDataset, folds: usize, seed: u64) -> Result<Vec<Split>> {
    if folds < 2 {
        return Err(Error::Config(format!("k-fold needs at least 2 folds, got {folds}")));
    }
    let orders: Vec<Vec<usize>> = (0..ds.n_users())
        .map(|u| {
            let mut rng = RngHandle::derive(seed, u as u64);
            let mut order: Vec<usize> = (0..ds.user_items(u).len()).collect();
            rng.shuffle(&mut order);
            order
        })
        .collect();
    (0..folds)
        .map(|f| {
            let mut train_lists = Vec::with_capacity(ds.n_users());
            let mut test_lists = Vec::with_capacity(ds.n_users());
            for (u, order) in orders.iter().enumerate() {
                let items = ds.user_items(u);
                let mut fold_of = vec![0; items.len()];
                for (pos, &j) in order.iter().enumerate() {
                    fold_of[j] = pos % folds;
                }
                let mut train = Vec::new();
                let mut test = Vec::new();
                for (j, &p) in items.iter().enumerate() {
                    if fold_of[j] == f {
                        test.push(p);
                    } else {
                        train.push(p);
                    }
                }
                train_lists.push(train);
                test_lists.push(test);
            }
            Ok(Split {
                train: ds.with_lists(train_lists)?,
                test: ds.with_lists(test_lists)?,
                flagged: Vec::new(),
            })
        })
        .collect()
}
