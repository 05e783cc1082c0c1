//! Distributed frequent-itemset generation: local Apriori per site,
//! maximal-itemset reduction, and a top-down global collection phase that
//! needs far fewer communication passes than level-wise exchange.
//!
//! The top-down phase is exact under the standard premise that every
//! globally frequent itemset is locally frequent at some site, which holds
//! when local thresholds are proportional to the local transaction counts.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Item = u32;
/// Sorted, duplicate-free item-id tuple.
pub type Itemset = Vec<Item>;

/// A list of transactions, each a sorted set of item ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionDB {
    transactions: Vec<Vec<Item>>,
}

impl TransactionDB {
    pub fn new(raw: Vec<Vec<Item>>) -> Self {
        let transactions = raw
            .into_iter()
            .map(|mut t| {
                t.sort_unstable();
                t.dedup();
                t
            })
            .collect();
        TransactionDB { transactions }
    }

    pub fn transactions(&self) -> &[Vec<Item>] {
        &self.transactions
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn items(&self) -> BTreeSet<Item> {
        self.transactions.iter().flatten().copied().collect()
    }

    /// Exact support count of an itemset by scanning all transactions.
    pub fn support(&self, itemset: &[Item]) -> u64 {
        self.transactions
            .iter()
            .filter(|t| is_subset(itemset, t))
            .count() as u64
    }

    /// Concatenation of several databases (the centralized view).
    pub fn union(dbs: &[&TransactionDB]) -> TransactionDB {
        TransactionDB {
            transactions: dbs
                .iter()
                .flat_map(|db| db.transactions.iter().cloned())
                .collect(),
        }
    }

    /// One transaction per line, space-separated item ids.
    pub fn write_text<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        for t in &self.transactions {
            let line: Vec<String> = t.iter().map(u32::to_string).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: std::io::Read>(r: R) -> Result<Self> {
        use std::io::BufRead;
        let reader = std::io::BufReader::new(r);
        let mut raw = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let txn = line
                .split_whitespace()
                .map(|f| {
                    f.parse::<Item>()
                        .map_err(|e| Error::Parse(format!("bad item id {f}: {e}")))
                })
                .collect::<Result<Vec<Item>>>()?;
            raw.push(txn);
        }
        Ok(TransactionDB::new(raw))
    }

    pub fn read_text_file<P: AsRef<std::path::Path>>(path: P) -> Result<Self> {
        Self::read_text(std::fs::File::open(path)?)
    }
}

/// Both slices sorted ascending.
fn is_subset(needle: &[Item], hay: &[Item]) -> bool {
    let mut it = hay.iter();
    'outer: for x in needle {
        for y in it.by_ref() {
            match y.cmp(x) {
                std::cmp::Ordering::Less => continue,
                std::cmp::Ordering::Equal => continue 'outer,
                std::cmp::Ordering::Greater => return false,
            }
        }
        return false;
    }
    true
}

/// Per-itemset support counts and status flags, indexed by site column.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ItemsetEntry {
    pub counts: Vec<Option<u64>>,
    pub locally_frequent: Vec<bool>,
    pub maximal: Vec<bool>,
    pub globally_frequent: Option<bool>,
}

/// itemset -> per-site counts and flags. A single-site table is one site's
/// columns of the distributed view.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ItemsetTable {
    site_count: usize,
    entries: BTreeMap<Itemset, ItemsetEntry>,
    /// Itemsets whose support this table's mining run computed, frequent
    /// or not (the candidate-count currency of the run).
    candidates_computed: usize,
}

impl ItemsetTable {
    pub fn new(site_count: usize) -> Self {
        ItemsetTable {
            site_count,
            entries: BTreeMap::new(),
            candidates_computed: 0,
        }
    }

    pub fn site_count(&self) -> usize {
        self.site_count
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<Itemset, ItemsetEntry> {
        &self.entries
    }

    pub fn candidates_computed(&self) -> usize {
        self.candidates_computed
    }

    fn entry_mut(&mut self, itemset: &[Item]) -> &mut ItemsetEntry {
        let sites = self.site_count;
        self.entries
            .entry(itemset.to_vec())
            .or_insert_with(|| ItemsetEntry {
                counts: vec![None; sites],
                locally_frequent: vec![false; sites],
                maximal: vec![false; sites],
                globally_frequent: None,
            })
    }

    pub fn record_count(&mut self, itemset: &[Item], site: usize, count: u64) {
        self.entry_mut(itemset).counts[site] = Some(count);
    }

    pub fn mark_locally_frequent(&mut self, itemset: &[Item], site: usize) {
        self.entry_mut(itemset).locally_frequent[site] = true;
    }

    pub fn mark_maximal(&mut self, itemset: &[Item], site: usize) {
        self.entry_mut(itemset).maximal[site] = true;
    }

    pub fn count(&self, itemset: &[Item], site: usize) -> Option<u64> {
        self.entries.get(itemset).and_then(|e| e.counts[site])
    }

    pub fn is_locally_frequent(&self, itemset: &[Item], site: usize) -> bool {
        self.entries
            .get(itemset)
            .map_or(false, |e| e.locally_frequent[site])
    }

    pub fn locally_frequent(&self, site: usize) -> impl Iterator<Item = &Itemset> {
        self.entries
            .iter()
            .filter(move |(_, e)| e.locally_frequent[site])
            .map(|(k, _)| k)
    }
}

/// Level-wise Apriori over one site's transactions: returns exactly the
/// itemsets with support >= min_support, with exact counts.
pub fn apriori_local(db: &TransactionDB, min_support: u64) -> Result<ItemsetTable> {
    if min_support == 0 {
        return Err(Error::InvalidParameter("min_support must be >= 1".into()));
    }
    let mut table = ItemsetTable::new(1);
    if db.is_empty() {
        return Ok(table);
    }
    // Level 1: every distinct item is a candidate.
    let mut level: Vec<Itemset> = Vec::new();
    for item in db.items() {
        table.candidates_computed += 1;
        let count = db.support(&[item]);
        if count >= min_support {
            table.record_count(&[item], 0, count);
            table.mark_locally_frequent(&[item], 0);
            level.push(vec![item]);
        }
    }
    // Higher levels by join + subset pruning.
    while !level.is_empty() {
        let candidates = apriori_gen(&level);
        let mut next = Vec::new();
        for cand in candidates {
            table.candidates_computed += 1;
            let count = db.support(&cand);
            if count >= min_support {
                table.record_count(&cand, 0, count);
                table.mark_locally_frequent(&cand, 0);
                next.push(cand);
            }
        }
        level = next;
    }
    Ok(table)
}

/// Candidate generation: joins frequent (k-1)-itemsets sharing their first
/// k-2 items and prunes candidates with an infrequent (k-1)-subset.
pub fn apriori_gen(level: &[Itemset]) -> Vec<Itemset> {
    let have: BTreeSet<&Itemset> = level.iter().collect();
    let mut out = Vec::new();
    for (i, a) in level.iter().enumerate() {
        for b in &level[i + 1..] {
            let k = a.len();
            if a[..k - 1] != b[..k - 1] {
                continue;
            }
            let mut cand = a.clone();
            cand.push(b[k - 1]);
            cand.sort_unstable();
            let pruned = (0..cand.len()).any(|skip| {
                let mut sub = cand.clone();
                sub.remove(skip);
                !have.contains(&sub)
            });
            if !pruned {
                out.push(cand);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Locally frequent itemsets with no locally frequent proper superset.
/// With Apriori closure it suffices to check one-item extensions.
pub fn maximal_itemsets(table: &ItemsetTable) -> BTreeSet<Itemset> {
    let site = 0;
    let frequent: Vec<&Itemset> = table.locally_frequent(site).collect();
    let by_size: BTreeMap<usize, Vec<&Itemset>> = {
        let mut m: BTreeMap<usize, Vec<&Itemset>> = BTreeMap::new();
        for i in &frequent {
            m.entry(i.len()).or_default().push(i);
        }
        m
    };
    frequent
        .iter()
        .filter(|i| {
            by_size
                .get(&(i.len() + 1))
                .map_or(true, |bigger| !bigger.iter().any(|sup| is_subset(i, sup)))
        })
        .map(|i| (*i).clone())
        .collect()
}

/// One mining site: raw transactions plus its local Apriori table.
#[derive(Clone, Debug)]
pub struct SiteNode {
    pub site: usize,
    pub db: TransactionDB,
    pub table: ItemsetTable,
    pub min_support: u64,
    rescans: usize,
}

impl SiteNode {
    pub fn mine(site: usize, db: TransactionDB, min_support: u64) -> Result<Self> {
        let mut table = apriori_local(&db, min_support)?;
        for itemset in maximal_itemsets(&table) {
            table.mark_maximal(&itemset, 0);
        }
        Ok(SiteNode {
            site,
            db,
            table,
            min_support,
            rescans: 0,
        })
    }

    /// The itemsets this site volunteers in the first pass: locally
    /// frequent itemsets of size k plus maximal smaller ones, with counts.
    pub fn broadcast_set(&self, k: usize) -> Vec<(Itemset, u64)> {
        let maximal = maximal_itemsets(&self.table);
        let mut out = Vec::new();
        for itemset in self.table.locally_frequent(0) {
            let include = itemset.len() == k || (itemset.len() < k && maximal.contains(itemset));
            if include {
                out.push((
                    itemset.clone(),
                    self.table.count(itemset, 0).expect("frequent has count"),
                ));
            }
        }
        out
    }

    /// Answers a support-count request. Itemsets missing from the local
    /// table are recounted from the raw transactions.
    pub fn count_request(&mut self, itemsets: &[Itemset]) -> Vec<u64> {
        itemsets
            .iter()
            .map(|i| match self.table.count(i, 0) {
                Some(c) => c,
                None => {
                    self.rescans += 1;
                    self.db.support(i)
                }
            })
            .collect()
    }

    /// Support computations done for remote requests.
    pub fn rescans(&self) -> usize {
        self.rescans
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reply {
    pub site: usize,
    pub counted: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassRecord {
    pub pass: usize,
    pub broadcast: Vec<Itemset>,
    pub replies: Vec<Reply>,
    /// Per-site payloads behind the pass, kept out of the wire schema:
    /// pass 1 holds each site's volunteered itemsets, later passes the
    /// per-site count requests.
    #[serde(skip)]
    pub per_site_itemsets: Vec<Vec<Itemset>>,
    /// Support counts each site returned, aligned with its itemsets.
    #[serde(skip)]
    pub per_site_counts: Vec<Vec<u64>>,
}

/// Record of the communication passes of one distributed run. Serializes
/// as the bare array of pass records.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PassTrace {
    pub passes: Vec<PassRecord>,
    /// Support computations performed during local mining.
    pub local_candidates: usize,
    /// Support computations performed to answer remote requests.
    pub remote_rescans: usize,
}

impl Serialize for PassTrace {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.passes.len()))?;
        for p in &self.passes {
            seq.serialize_element(p)?;
        }
        seq.end()
    }
}

impl PassTrace {
    pub fn pass_count(&self) -> usize {
        self.passes.len()
    }

    /// Total itemsets whose support some site computed during the run,
    /// local or remote.
    pub fn total_candidates(&self) -> usize {
        self.local_candidates + self.remote_rescans
    }
}

#[derive(Clone, Debug, Default)]
pub struct TopdownResult {
    /// All globally frequent itemsets of size <= k.
    pub frequent: BTreeSet<Itemset>,
    /// Exact global counts for the itemsets that were explicitly counted.
    pub counts: BTreeMap<Itemset, u64>,
    pub trace: PassTrace,
}

/// All nonempty proper subsets obtained by dropping one item.
fn immediate_subsets(itemset: &[Item]) -> Vec<Itemset> {
    if itemset.len() <= 1 {
        return Vec::new();
    }
    (0..itemset.len())
        .map(|skip| {
            let mut sub = itemset.to_vec();
            sub.remove(skip);
            sub
        })
        .collect()
}

fn all_nonempty_subsets(itemset: &[Item]) -> Vec<Itemset> {
    let n = itemset.len();
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let sub: Itemset = (0..n)
            .filter(|&i| mask & (1 << i) != 0)
            .map(|i| itemset[i])
            .collect();
        out.push(sub);
    }
    out
}

/// Top-down global collection. Pass 1 gathers each site's size-k and
/// maximal itemsets with their local counts; pass 2 completes the count
/// matrix; further passes descend one subset-size level into the itemsets
/// that failed the global test. The result is the downward closure of
/// everything that passed.
pub fn global_topdown(
    sites: &mut [SiteNode],
    k: usize,
    min_support_global: u64,
) -> Result<TopdownResult> {
    if k < 1 {
        return Err(Error::InvalidParameter(
            "requested size k must be >= 1".into(),
        ));
    }
    if sites.is_empty() {
        return Err(Error::InvalidParameter("no sites".into()));
    }
    let m = sites.len();
    let mut trace = PassTrace {
        local_candidates: sites.iter().map(|s| s.table.candidates_computed()).sum(),
        ..PassTrace::default()
    };

    // Pass 1: gather candidate itemsets with the owners' counts.
    let mut matrix: BTreeMap<Itemset, Vec<Option<u64>>> = BTreeMap::new();
    let mut replies = Vec::new();
    let mut per_site_itemsets = vec![Vec::new(); m];
    let mut per_site_counts = vec![Vec::new(); m];
    for site in sites.iter() {
        let b = site.broadcast_set(k);
        replies.push(Reply {
            site: site.site,
            counted: b.len(),
        });
        for (itemset, count) in b {
            per_site_itemsets[site.site].push(itemset.clone());
            per_site_counts[site.site].push(count);
            matrix.entry(itemset).or_insert_with(|| vec![None; m])[site.site] = Some(count);
        }
    }
    trace.passes.push(PassRecord {
        pass: 1,
        broadcast: Vec::new(),
        replies,
        per_site_itemsets,
        per_site_counts,
    });

    let mut frequent: BTreeSet<Itemset> = BTreeSet::new();
    let mut closure: BTreeSet<Itemset> = BTreeSet::new();
    let mut counts: BTreeMap<Itemset, u64> = BTreeMap::new();
    let mut counted: BTreeSet<Itemset> = matrix.keys().cloned().collect();
    let mut pending: Vec<Itemset> = matrix.keys().cloned().collect();
    let mut pass = 1;

    loop {
        // Complete the count matrix for pending itemsets.
        let mut requests: Vec<Vec<Itemset>> = vec![Vec::new(); m];
        for itemset in &pending {
            let row = &matrix[itemset];
            for (site, cell) in row.iter().enumerate() {
                if cell.is_none() {
                    requests[site].push(itemset.clone());
                }
            }
        }
        if requests.iter().any(|r| !r.is_empty()) {
            pass += 1;
            let mut broadcast: Vec<Itemset> = requests.iter().flatten().cloned().collect();
            broadcast.sort();
            broadcast.dedup();
            let mut replies = Vec::new();
            let mut per_site_counts = vec![Vec::new(); m];
            for site in sites.iter_mut() {
                let req = &requests[site.site];
                let answers = site.count_request(req);
                for (itemset, count) in req.iter().zip(&answers) {
                    matrix.get_mut(itemset).unwrap()[site.site] = Some(*count);
                }
                per_site_counts[site.site] = answers;
                replies.push(Reply {
                    site: site.site,
                    counted: req.len(),
                });
            }
            trace.passes.push(PassRecord {
                pass,
                broadcast,
                replies,
                per_site_itemsets: requests.clone(),
                per_site_counts,
            });
        }

        // Global frequency test over the pending itemsets.
        let mut failed: Vec<Itemset> = Vec::new();
        for itemset in pending.drain(..) {
            let total: u64 = matrix[&itemset].iter().map(|c| c.unwrap_or(0)).sum();
            counts.insert(itemset.clone(), total);
            if total >= min_support_global {
                for sub in all_nonempty_subsets(&itemset) {
                    closure.insert(sub);
                }
                frequent.insert(itemset);
            } else {
                failed.push(itemset);
            }
        }

        // Descend one subset-size level into the failures, skipping
        // itemsets already counted or already known frequent by closure.
        let mut next: BTreeSet<Itemset> = BTreeSet::new();
        for itemset in &failed {
            for sub in immediate_subsets(itemset) {
                if !counted.contains(&sub) && !closure.contains(&sub) {
                    next.insert(sub);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        for itemset in &next {
            counted.insert(itemset.clone());
            matrix
                .entry(itemset.clone())
                .or_insert_with(|| vec![None; m]);
        }
        pending = next.into_iter().collect();
    }

    trace.remote_rescans = sites.iter().map(SiteNode::rescans).sum();
    counts.retain(|itemset, _| closure.contains(itemset));
    Ok(TopdownResult {
        frequent: closure,
        counts,
        trace,
    })
}

/// Classical level-wise distributed Apriori: one global exchange per
/// itemset size with global pruning each level. Exact, like the top-down
/// phase, but needs one pass per level up to k.
pub fn classical_baseline(
    dbs: &[TransactionDB],
    k: usize,
    min_support_global: u64,
) -> Result<(BTreeSet<Itemset>, PassTrace)> {
    if k < 1 {
        return Err(Error::InvalidParameter(
            "requested size k must be >= 1".into(),
        ));
    }
    if dbs.is_empty() {
        return Err(Error::InvalidParameter("no sites".into()));
    }
    let mut trace = PassTrace::default();
    let mut result: BTreeSet<Itemset> = BTreeSet::new();

    // Level 1: sites report their own item counts.
    let mut totals: BTreeMap<Itemset, u64> = BTreeMap::new();
    let mut replies = Vec::new();
    let mut per_site_itemsets = vec![Vec::new(); dbs.len()];
    let mut per_site_counts = vec![Vec::new(); dbs.len()];
    for (site, db) in dbs.iter().enumerate() {
        let items = db.items();
        replies.push(Reply {
            site,
            counted: items.len(),
        });
        trace.remote_rescans += items.len();
        for item in items {
            let count = db.support(&[item]);
            per_site_itemsets[site].push(vec![item]);
            per_site_counts[site].push(count);
            *totals.entry(vec![item]).or_insert(0) += count;
        }
    }
    trace.passes.push(PassRecord {
        pass: 1,
        broadcast: Vec::new(),
        replies,
        per_site_itemsets,
        per_site_counts,
    });
    let mut level: Vec<Itemset> = totals
        .into_iter()
        .filter(|(_, c)| *c >= min_support_global)
        .map(|(i, _)| i)
        .collect();
    result.extend(level.iter().cloned());

    for size in 2..=k {
        let candidates = apriori_gen(&level);
        if candidates.is_empty() {
            break;
        }
        let mut replies = Vec::new();
        let mut totals: BTreeMap<Itemset, u64> = BTreeMap::new();
        let mut per_site_counts = vec![Vec::new(); dbs.len()];
        for (site, db) in dbs.iter().enumerate() {
            replies.push(Reply {
                site,
                counted: candidates.len(),
            });
            trace.remote_rescans += candidates.len();
            for cand in &candidates {
                let count = db.support(cand);
                per_site_counts[site].push(count);
                *totals.entry(cand.clone()).or_insert(0) += count;
            }
        }
        trace.passes.push(PassRecord {
            pass: size,
            broadcast: candidates.clone(),
            replies,
            per_site_itemsets: vec![candidates.clone(); dbs.len()],
            per_site_counts,
        });
        level = totals
            .into_iter()
            .filter(|(_, c)| *c >= min_support_global)
            .map(|(i, _)| i)
            .collect();
        level.sort();
        result.extend(level.iter().cloned());
        if level.is_empty() {
            break;
        }
    }
    Ok((result, trace))
}

/// Centralized oracle: Apriori over the union of all transactions,
/// restricted to itemsets of size <= k.
pub fn centralized_apriori(
    dbs: &[TransactionDB],
    k: usize,
    min_support_global: u64,
) -> Result<BTreeSet<Itemset>> {
    let refs: Vec<&TransactionDB> = dbs.iter().collect();
    let union = TransactionDB::union(&refs);
    let table = apriori_local(&union, min_support_global)?;
    Ok(table
        .locally_frequent(0)
        .filter(|i| i.len() <= k)
        .cloned()
        .collect())
}

/// Ratio of candidate counts between two runs.
pub fn candidate_ratio(run_a: &PassTrace, run_b: &PassTrace) -> Result<f64> {
    let b = run_b.total_candidates();
    if b == 0 {
        return Err(Error::InvalidParameter(
            "denominator run computed no candidates".into(),
        ));
    }
    Ok(run_a.total_candidates() as f64 / b as f64)
}

/// Synthetic market-basket generator: transactions draw one of the planted
/// patterns with the given probability, then add uniformly random items.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasketSpec {
    pub transactions: usize,
    pub items: u32,
    pub patterns: Vec<Vec<Item>>,
    pub pattern_prob: f64,
    pub noise_items: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub fn gen_baskets(spec: &BasketSpec, seed: u64) -> Result<TransactionDB> {
    if spec.items == 0 {
        return Err(Error::InvalidParameter("item universe must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&spec.pattern_prob) {
        return Err(Error::InvalidParameter(
            "pattern_prob must lie in [0, 1]".into(),
        ));
    }
    for p in &spec.patterns {
        if p.iter().any(|&i| i >= spec.items) {
            return Err(Error::InvalidParameter(
                "pattern references an item outside the universe".into(),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Vec::with_capacity(spec.transactions);
    for _ in 0..spec.transactions {
        let mut txn: BTreeSet<Item> = BTreeSet::new();
        if !spec.patterns.is_empty() && rng.random::<f64>() < spec.pattern_prob {
            let p = &spec.patterns[rng.random_range(0..spec.patterns.len())];
            txn.extend(p.iter().copied());
        }
        for _ in 0..spec.noise_items {
            txn.insert(rng.random_range(0..spec.items));
        }
        if txn.is_empty() {
            txn.insert(rng.random_range(0..spec.items));
        }
        raw.push(txn.into_iter().collect());
    }
    Ok(TransactionDB::new(raw))
}
