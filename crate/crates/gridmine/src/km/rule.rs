//! Rule-based knowledge representatives: a rule table plus an inverted
//! item index whose posting lists are intersected to answer item queries.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type RuleId = u64;

/// An IF/THEN production rule with its quality attributes (support and
/// confidence for association rules, coverage and accuracy for
/// classification rules) and creation info.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub id: RuleId,
    pub if_items: Vec<String>,
    pub then_items: Vec<String>,
    #[serde(default)]
    pub attributes: BTreeMap<String, f64>,
    #[serde(default)]
    pub creation: String,
}

impl Rule {
    /// Distinct items appearing anywhere in the rule.
    pub fn items(&self) -> Vec<&str> {
        let mut items: Vec<&str> = self
            .if_items
            .iter()
            .chain(&self.then_items)
            .map(String::as_str)
            .collect();
        items.sort_unstable();
        items.dedup();
        items
    }
}

/// Rule table plus inverted item index. Posting lists are kept sorted and
/// duplicate-free; deletions compact them eagerly.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleRepresentative {
    #[serde(with = "rules_as_seq")]
    rules: BTreeMap<RuleId, Rule>,
    index: BTreeMap<String, Vec<RuleId>>,
}

/// The rule table persists as a flat array; ids live inside the rules.
mod rules_as_seq {
    use super::{Rule, RuleId};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<RuleId, Rule>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let rules: Vec<&Rule> = map.values().collect();
        rules.serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<BTreeMap<RuleId, Rule>, D::Error> {
        let rules = Vec::<Rule>::deserialize(deserializer)?;
        Ok(rules.into_iter().map(|r| (r.id, r)).collect())
    }
}

impl RuleRepresentative {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.values()
    }

    pub fn rule(&self, id: RuleId) -> Option<&Rule> {
        self.rules.get(&id)
    }

    pub fn posting_list(&self, item: &str) -> &[RuleId] {
        self.index.get(item).map_or(&[], Vec::as_slice)
    }

    pub fn add_rule(&mut self, rule: Rule) -> Result<()> {
        if self.rules.contains_key(&rule.id) {
            return Err(Error::InvalidParameter(format!(
                "rule id {} already present",
                rule.id
            )));
        }
        for item in rule.items() {
            let list = self.index.entry(item.to_string()).or_default();
            match list.binary_search(&rule.id) {
                Ok(_) => {}
                Err(pos) => list.insert(pos, rule.id),
            }
        }
        self.rules.insert(rule.id, rule);
        Ok(())
    }

    pub fn remove_rule(&mut self, id: RuleId) -> Result<Rule> {
        let rule = self.rules.remove(&id).ok_or_else(|| {
            Error::InvalidParameter(format!("rule id {id} not present"))
        })?;
        for item in rule.items() {
            if let Some(list) = self.index.get_mut(item) {
                if let Ok(pos) = list.binary_search(&id) {
                    list.remove(pos);
                }
                if list.is_empty() {
                    self.index.remove(item);
                }
            }
        }
        Ok(rule)
    }

    /// Rebuilds the inverted index from the rule table alone.
    pub fn rebuild_index(&self) -> BTreeMap<String, Vec<RuleId>> {
        let mut index: BTreeMap<String, Vec<RuleId>> = BTreeMap::new();
        for rule in self.rules.values() {
            for item in rule.items() {
                index.entry(item.to_string()).or_default().push(rule.id);
            }
        }
        for list in index.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        index
    }

    /// Checks that the stored index is exactly consistent with the table.
    pub fn validate(&self) -> Result<()> {
        if self.index != self.rebuild_index() {
            return Err(Error::InvalidParameter(
                "item index inconsistent with rule table".into(),
            ));
        }
        Ok(())
    }
}

/// Rules containing every queried item: the sorted intersection of the
/// items' posting lists.
pub fn rule_lookup(rep: &RuleRepresentative, items: &[&str]) -> Result<Vec<RuleId>> {
    lookup_counting(rep, items).map(|(ids, _)| ids)
}

/// Like [`rule_lookup`] but also reports the number of posting-list probes
/// performed (one galloping search per candidate per non-driving list),
/// the measured cost currency of the intersection.
pub fn lookup_counting(
    rep: &RuleRepresentative,
    items: &[&str],
) -> Result<(Vec<RuleId>, usize)> {
    if items.is_empty() {
        return Err(Error::InvalidParameter("no items to look up".into()));
    }
    let mut lists: Vec<&[RuleId]> = items.iter().map(|i| rep.posting_list(i)).collect();
    lists.sort_by_key(|l| l.len());
    if lists[0].is_empty() {
        return Ok((Vec::new(), 0));
    }
    let mut probes = 0usize;
    let mut result: Vec<RuleId> = Vec::new();
    let mut cursors = vec![0usize; lists.len()];
    'candidates: for &candidate in lists[0] {
        for (list, cursor) in lists[1..].iter().zip(cursors[1..].iter_mut()) {
            probes += 1;
            match gallop(&list[*cursor..], candidate) {
                Some(offset) => *cursor += offset + 1,
                None => continue 'candidates,
            }
        }
        result.push(candidate);
    }
    Ok((result, probes))
}

/// Galloping search for `target` in a sorted slice: doubles the probe step
/// then binary-searches the bracketed range. Returns the position if found.
fn gallop(list: &[RuleId], target: RuleId) -> Option<usize> {
    if list.is_empty() {
        return None;
    }
    if list[0] >= target {
        return (list[0] == target).then_some(0);
    }
    // Invariant: list[lo] < target. Grow the step until it brackets.
    let mut lo = 0usize;
    let mut step = 1usize;
    while lo + step < list.len() && list[lo + step] < target {
        lo += step;
        step *= 2;
    }
    let hi = (lo + step + 1).min(list.len());
    match list[lo..hi].binary_search(&target) {
        Ok(pos) => Some(lo + pos),
        Err(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rule(id: RuleId, if_items: &[&str], then_items: &[&str]) -> Rule {
        Rule {
            id,
            if_items: if_items.iter().map(|s| s.to_string()).collect(),
            then_items: then_items.iter().map(|s| s.to_string()).collect(),
            attributes: BTreeMap::new(),
            creation: String::new(),
        }
    }

    /// The worked weather example: cloud -> {25, 171, 360},
    /// pressure -> {20, 171}.
    fn weather_rep() -> RuleRepresentative {
        let mut rep = RuleRepresentative::new();
        rep.add_rule(rule(20, &["pressure"], &["rain"])).unwrap();
        rep.add_rule(rule(25, &["cloud"], &["rain"])).unwrap();
        rep.add_rule(rule(171, &["cloud", "pressure"], &["storm"]))
            .unwrap();
        rep.add_rule(rule(360, &["cloud"], &["sun"])).unwrap();
        rep
    }

    #[test]
    fn single_item_returns_its_posting_list() {
        let rep = weather_rep();
        assert_eq!(rule_lookup(&rep, &["cloud"]).unwrap(), vec![25, 171, 360]);
        assert_eq!(rep.posting_list("pressure"), &[20, 171]);
    }

    #[test]
    fn intersection_finds_the_shared_rule() {
        let rep = weather_rep();
        assert_eq!(
            rule_lookup(&rep, &["cloud", "pressure"]).unwrap(),
            vec![171]
        );
    }

    #[test]
    fn absent_item_yields_empty_not_error() {
        let rep = weather_rep();
        assert_eq!(
            rule_lookup(&rep, &["cloud", "wind"]).unwrap(),
            Vec::<RuleId>::new()
        );
        assert!(rule_lookup(&rep, &[]).is_err());
    }

    #[test]
    fn lookup_is_order_invariant() {
        let rep = weather_rep();
        let a = rule_lookup(&rep, &["cloud", "pressure"]).unwrap();
        let b = rule_lookup(&rep, &["pressure", "cloud"]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn index_consistent_after_add_remove_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let vocab = ["a", "b", "c", "d", "e", "f"];
        let mut rep = RuleRepresentative::new();
        let mut live: Vec<RuleId> = Vec::new();
        for id in 0..200u64 {
            if !live.is_empty() && rng.random_bool(0.4) {
                let idx = rng.random_range(0..live.len());
                let victim = live.swap_remove(idx);
                rep.remove_rule(victim).unwrap();
            } else {
                let n_if = rng.random_range(1..3);
                let n_then = rng.random_range(1..3);
                let pick = |rng: &mut ChaCha8Rng, n: usize| -> Vec<&str> {
                    (0..n).map(|_| vocab[rng.random_range(0..vocab.len())]).collect()
                };
                let if_items = pick(&mut rng, n_if);
                let then_items = pick(&mut rng, n_then);
                rep.add_rule(rule(id, &if_items, &then_items)).unwrap();
                live.push(id);
            }
            rep.validate().unwrap();
        }
    }

    #[test]
    fn lookup_matches_full_scan_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let vocab: Vec<String> = (0..10).map(|i| format!("item{i}")).collect();
        for _ in 0..50 {
            let mut rep = RuleRepresentative::new();
            for id in 0..rng.random_range(1..40u64) {
                let items: Vec<&str> = (0..rng.random_range(1..4))
                    .map(|_| vocab[rng.random_range(0..vocab.len())].as_str())
                    .collect();
                rep.add_rule(rule(id, &items, &[vocab[0].as_str()])).unwrap();
            }
            let q: Vec<&str> = (0..rng.random_range(1..3))
                .map(|_| vocab[rng.random_range(0..vocab.len())].as_str())
                .collect();
            let got = rule_lookup(&rep, &q).unwrap();
            let expected: Vec<RuleId> = rep
                .rules()
                .filter(|r| {
                    let items = r.items();
                    q.iter().all(|needle| items.contains(needle))
                })
                .map(|r| r.id)
                .collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn probe_count_scales_with_shortest_list() {
        // Skewed index: a tiny posting list against two huge ones.
        let mut rep = RuleRepresentative::new();
        for id in 0..3000u64 {
            let mut items = vec!["common_a", "common_b"];
            if id % 100 == 0 {
                items.push("rare");
            }
            rep.add_rule(rule(id, &items, &["out"])).unwrap();
        }
        let min_len = rep.posting_list("rare").len();
        assert_eq!(min_len, 30);
        let items = ["rare", "common_a", "common_b"];
        let (result, probes) = lookup_counting(&rep, &items).unwrap();
        assert_eq!(result.len(), 30);
        assert!(
            probes <= 2 * min_len * items.len(),
            "{probes} probes for min list {min_len}"
        );
    }
}
