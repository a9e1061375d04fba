//! Discretization, transactional encoding, FP-Growth frequent-itemset mining,
//! and association-rule generation.
//!
//! Continuous clinical variables are binned into categorical tokens
//! (`age_group=Middle`), categorical variables pass through as
//! `feature=value` tokens, and the resulting transactions feed a classic
//! two-pass FP-Growth with conditional pattern bases. Mined rules carry the
//! full ⟨X, Φ, Θ, Y, μ, Ω, Σ⟩ tuple.

use crate::error::{Error, Result};
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

// ── items, transactions, vocabulary ─────────────────────────────────────

/// One categorical token: a feature name and a category value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Item {
    pub feature: String,
    pub value: String,
}

impl Item {
    pub fn token(&self) -> String {
        if self.value.is_empty() {
            self.feature.clone()
        } else {
            format!("{}={}", self.feature, self.value)
        }
    }

    /// Split a `feature=value` token; a bare token becomes a value-less item.
    pub fn from_token(token: &str) -> Item {
        match token.split_once('=') {
            Some((feature, value)) => {
                Item { feature: feature.to_string(), value: value.to_string() }
            }
            None => Item { feature: token.to_string(), value: String::new() },
        }
    }
}

/// Sorted, deduplicated token set built during discretization. Item ids are
/// indices into this list, so encodings are deterministic given the corpus.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Vocabulary {
    tokens: Vec<String>,
}

impl Vocabulary {
    pub fn from_tokens(mut tokens: Vec<String>) -> Self {
        tokens.sort();
        tokens.dedup();
        Vocabulary { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Result<u32> {
        self.tokens
            .binary_search_by(|t| t.as_str().cmp(token))
            .map(|i| i as u32)
            .map_err(|_| Error::UnknownToken { token: token.to_string() })
    }

    /// Feature-name part of a token.
    pub fn feature_of(&self, id: u32) -> &str {
        let t = self.token(id);
        t.split_once('=').map(|(f, _)| f).unwrap_or(t)
    }

    /// Ids of every token whose feature name matches.
    pub fn ids_for_feature(&self, feature: &str) -> Vec<u32> {
        (0..self.tokens.len() as u32).filter(|&i| self.feature_of(i) == feature).collect()
    }
}

/// An itemized row: at most one item per feature, stored as sorted vocabulary
/// ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    items: Vec<u32>,
}

impl Transaction {
    pub fn new(mut items: Vec<u32>) -> Self {
        items.sort_unstable();
        items.dedup();
        Transaction { items }
    }

    pub fn items(&self) -> &[u32] {
        &self.items
    }

    pub fn contains(&self, id: u32) -> bool {
        self.items.binary_search(&id).is_ok()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

// ── discretization ──────────────────────────────────────────────────────

/// One ordered bin: first bin whose bound accepts the value wins; a `None`
/// bound is the open-ended catch-all.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bin {
    pub label: String,
    /// Upper bound; value matches when `value < upper` (or `<=` when
    /// `inclusive`).
    pub upper: Option<f64>,
    pub inclusive: bool,
}

impl Bin {
    fn accepts(&self, value: f64) -> bool {
        match self.upper {
            None => true,
            Some(u) => {
                if self.inclusive {
                    value <= u
                } else {
                    value < u
                }
            }
        }
    }
}

/// Binning of one continuous source feature into a categorical output
/// feature.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContinuousBinning {
    pub source: String,
    pub output: String,
    pub bins: Vec<Bin>,
}

/// Binning specification covering every continuous feature of the corpus.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinningSpec {
    pub continuous: Vec<ContinuousBinning>,
}

fn bin(label: &str, upper: Option<f64>, inclusive: bool) -> Bin {
    Bin { label: label.to_string(), upper, inclusive }
}

impl BinningSpec {
    /// Standard clinical cutoffs for the heart-disease variables.
    pub fn clinical_default() -> Self {
        let b = |source: &str, output: &str, bins: Vec<Bin>| ContinuousBinning {
            source: source.to_string(),
            output: output.to_string(),
            bins,
        };
        BinningSpec {
            continuous: vec![
                b(
                    "age",
                    "age_group",
                    vec![
                        bin("Young", Some(45.0), false),
                        bin("Middle", Some(60.0), false),
                        bin("Senior", None, false),
                    ],
                ),
                b(
                    "trestbps",
                    "trestbps_level",
                    vec![
                        bin("Normal", Some(130.0), false),
                        bin("Elevated", Some(160.0), false),
                        bin("High", None, false),
                    ],
                ),
                b(
                    "chol",
                    "chol_level",
                    vec![
                        bin("Normal", Some(200.0), false),
                        bin("Borderline", Some(240.0), false),
                        bin("High", None, false),
                    ],
                ),
                b(
                    "thalach",
                    "thalach_level",
                    vec![
                        bin("Low", Some(120.0), false),
                        bin("Medium", Some(160.0), false),
                        bin("High", None, false),
                    ],
                ),
                b(
                    "oldpeak",
                    "oldpeak_level",
                    vec![
                        bin("None", Some(0.0), true),
                        bin("Mild", Some(2.0), true),
                        bin("Severe", None, false),
                    ],
                ),
            ],
        }
    }

    fn for_source(&self, feature: &str) -> Option<&ContinuousBinning> {
        self.continuous.iter().find(|c| c.source == feature)
    }

    /// Token for a continuous value, e.g. age 50 → `age_group=Middle`.
    pub fn tokenize_continuous(&self, feature: &str, value: f64) -> Result<Item> {
        let binning = self.for_source(feature).ok_or_else(|| Error::InvalidConfig {
            what: "binning_spec",
            detail: format!("no binning for continuous feature '{feature}'"),
        })?;
        for b in &binning.bins {
            if b.accepts(value) {
                return Ok(Item { feature: binning.output.clone(), value: b.label.clone() });
            }
        }
        Err(Error::Binning { feature: feature.to_string(), value })
    }
}

/// One raw record to itemize: categorical values pass through as
/// `feature=value` tokens (`%.1` formatting, matching the corpus encoding),
/// continuous values go through the binning spec.
#[derive(Debug, Clone)]
pub enum FeatureValue {
    Continuous(f64),
    Categorical(f64),
}

pub type RawRow = Vec<(String, FeatureValue)>;

/// Itemize raw rows into transactions plus the vocabulary of all tokens.
pub fn discretize(rows: &[RawRow], spec: &BinningSpec) -> Result<(Vec<Transaction>, Vocabulary)> {
    let mut token_rows: Vec<Vec<String>> = Vec::with_capacity(rows.len());
    let mut all_tokens: Vec<String> = Vec::new();
    for row in rows {
        let mut tokens = Vec::with_capacity(row.len());
        let mut seen_features: BTreeSet<String> = BTreeSet::new();
        for (feature, value) in row {
            let item = match value {
                FeatureValue::Continuous(v) => spec.tokenize_continuous(feature, *v)?,
                FeatureValue::Categorical(v) => {
                    Item { feature: feature.clone(), value: format!("{v:.1}") }
                }
            };
            // one item per feature; later duplicates are dropped
            if !seen_features.insert(item.feature.clone()) {
                continue;
            }
            tokens.push(item.token());
        }
        all_tokens.extend(tokens.iter().cloned());
        token_rows.push(tokens);
    }
    let vocab = Vocabulary::from_tokens(all_tokens);
    let mut transactions = Vec::with_capacity(token_rows.len());
    for tokens in &token_rows {
        let ids = tokens.iter().map(|t| vocab.id(t)).collect::<Result<Vec<_>>>()?;
        transactions.push(Transaction::new(ids));
    }
    Ok((transactions, vocab))
}

// ── FP-tree ─────────────────────────────────────────────────────────────

const ROOT_ITEM: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct FpNode {
    pub item: u32,
    pub count: u64,
    pub parent: usize,
    pub children: BTreeMap<u32, usize>,
    /// Next node holding the same item (the node-link chain).
    pub next: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct HeaderEntry {
    pub item: u32,
    pub total: u64,
    pub first: Option<usize>,
}

/// Compressed prefix tree over frequency-ordered transactions.
#[derive(Debug, Clone)]
pub struct FpTree {
    pub nodes: Vec<FpNode>,
    /// Ordered by descending item frequency (ties by ascending id).
    pub header: Vec<HeaderEntry>,
    header_index: BTreeMap<u32, usize>,
}

impl FpTree {
    /// Build from (item-list, count) pairs; items must already be filtered to
    /// frequent ones. `totals` carries each item's total support count.
    fn build(paths: &[(Vec<u32>, u64)], totals: &BTreeMap<u32, u64>) -> FpTree {
        let mut order: Vec<(u32, u64)> = totals.iter().map(|(&i, &c)| (i, c)).collect();
        order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let rank: BTreeMap<u32, usize> =
            order.iter().enumerate().map(|(r, &(i, _))| (i, r)).collect();

        let header: Vec<HeaderEntry> =
            order.iter().map(|&(item, total)| HeaderEntry { item, total, first: None }).collect();
        let header_index: BTreeMap<u32, usize> =
            header.iter().enumerate().map(|(i, h)| (h.item, i)).collect();

        let mut tree = FpTree {
            nodes: vec![FpNode {
                item: ROOT_ITEM,
                count: 0,
                parent: 0,
                children: BTreeMap::new(),
                next: None,
            }],
            header,
            header_index,
        };

        for (items, count) in paths {
            let mut sorted: Vec<u32> = items.clone();
            sorted.sort_by_key(|i| rank[i]);
            tree.insert(&sorted, *count);
        }
        tree
    }

    fn insert(&mut self, items: &[u32], count: u64) {
        let mut cur = 0usize;
        for &item in items {
            cur = match self.nodes[cur].children.get(&item) {
                Some(&child) => {
                    self.nodes[child].count += count;
                    child
                }
                None => {
                    let idx = self.nodes.len();
                    self.nodes.push(FpNode {
                        item,
                        count,
                        parent: cur,
                        children: BTreeMap::new(),
                        next: None,
                    });
                    self.nodes[cur].children.insert(item, idx);
                    // push onto the node-link chain
                    let h = self.header_index[&item];
                    let prev = self.header[h].first;
                    self.nodes[idx].next = prev;
                    self.header[h].first = Some(idx);
                    idx
                }
            };
        }
    }

    /// Sum of counts along the node-link chain of an item.
    pub fn link_support(&self, item: u32) -> u64 {
        let Some(&h) = self.header_index.get(&item) else { return 0 };
        let mut total = 0;
        let mut cur = self.header[h].first;
        while let Some(idx) = cur {
            total += self.nodes[idx].count;
            cur = self.nodes[idx].next;
        }
        total
    }

    /// Conditional pattern base for an item: (prefix path, count) pairs.
    fn pattern_base(&self, item: u32) -> Vec<(Vec<u32>, u64)> {
        let mut base = Vec::new();
        let Some(&h) = self.header_index.get(&item) else { return base };
        let mut cur = self.header[h].first;
        while let Some(idx) = cur {
            let count = self.nodes[idx].count;
            let mut path = Vec::new();
            let mut p = self.nodes[idx].parent;
            while self.nodes[p].item != ROOT_ITEM {
                path.push(self.nodes[p].item);
                p = self.nodes[p].parent;
            }
            if !path.is_empty() {
                path.reverse();
                base.push((path, count));
            }
            cur = self.nodes[idx].next;
        }
        base
    }
}

// ── FP-Growth ───────────────────────────────────────────────────────────

/// A frequent itemset with its exact absolute and relative support.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequentItemset {
    /// Sorted ascending vocabulary ids.
    pub items: Vec<u32>,
    pub count: u64,
    pub support: f64,
}

/// Shared support predicate: relative support ≥ min_support (with a hair of
/// float slack so exact ratios are never dropped by rounding).
pub fn support_meets(count: u64, n_transactions: usize, min_support: f64) -> bool {
    count as f64 / n_transactions as f64 + 1e-12 >= min_support
}

fn validate_min_support(min_support: f64) -> Result<()> {
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(Error::InvalidConfig {
            what: "min_support",
            detail: format!("must be in (0, 1], got {min_support}"),
        });
    }
    Ok(())
}

/// Classic FP-Growth: exactly the itemsets whose relative support meets
/// `min_support`, each with its exact support. `max_len` optionally caps the
/// itemset size (used to bound rule explosion). Results are ordered
/// lexicographically by item ids.
pub fn fp_growth(
    transactions: &[Transaction],
    min_support: f64,
    max_len: Option<usize>,
) -> Result<Vec<FrequentItemset>> {
    validate_min_support(min_support)?;
    let n = transactions.len();
    if n == 0 {
        return Ok(Vec::new());
    }

    // pass 1: item frequencies
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for t in transactions {
        for &i in t.items() {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    counts.retain(|_, &mut c| support_meets(c, n, min_support));

    // pass 2: tree over filtered transactions
    let paths: Vec<(Vec<u32>, u64)> = transactions
        .iter()
        .map(|t| {
            (t.items().iter().copied().filter(|i| counts.contains_key(i)).collect::<Vec<_>>(), 1)
        })
        .filter(|(items, _)| !items.is_empty())
        .collect();
    let tree = FpTree::build(&paths, &counts);

    let mut results = Vec::new();
    mine(&tree, n, min_support, max_len, &mut Vec::new(), &mut results);
    for r in &mut results {
        r.items.sort_unstable();
    }
    results.sort_by(|a, b| a.items.cmp(&b.items));
    Ok(results)
}

fn mine(
    tree: &FpTree,
    n_transactions: usize,
    min_support: f64,
    max_len: Option<usize>,
    suffix: &mut Vec<u32>,
    results: &mut Vec<FrequentItemset>,
) {
    // least-frequent first: walk the header from the bottom
    for h in tree.header.iter().rev() {
        let count = tree.link_support(h.item);
        if !support_meets(count, n_transactions, min_support) {
            continue;
        }
        suffix.push(h.item);
        results.push(FrequentItemset {
            items: suffix.clone(),
            count,
            support: count as f64 / n_transactions as f64,
        });

        let can_grow = max_len.map_or(true, |m| suffix.len() < m);
        if can_grow {
            let base = tree.pattern_base(h.item);
            if !base.is_empty() {
                let mut cond_counts: BTreeMap<u32, u64> = BTreeMap::new();
                for (path, c) in &base {
                    for &i in path {
                        *cond_counts.entry(i).or_insert(0) += c;
                    }
                }
                cond_counts.retain(|_, &mut c| support_meets(c, n_transactions, min_support));
                if !cond_counts.is_empty() {
                    let filtered: Vec<(Vec<u32>, u64)> = base
                        .iter()
                        .map(|(path, c)| {
                            (
                                path.iter()
                                    .copied()
                                    .filter(|i| cond_counts.contains_key(i))
                                    .collect::<Vec<_>>(),
                                *c,
                            )
                        })
                        .filter(|(p, _)| !p.is_empty())
                        .collect();
                    if !filtered.is_empty() {
                        let cond_tree = FpTree::build(&filtered, &cond_counts);
                        mine(&cond_tree, n_transactions, min_support, max_len, suffix, results);
                    }
                }
            }
        }
        suffix.pop();
    }
}

// ── rules ───────────────────────────────────────────────────────────────

/// Relational condition on an antecedent feature. Mined rules always use
/// equality on a categorical token; the other predicates exist so decoded or
/// hand-written rules can carry numeric thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Predicate {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LogicalOp {
    And,
    Or,
    Not,
}

/// Σ: statistical rule strength.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RuleStats {
    pub support: f64,
    pub confidence: f64,
    pub lift: f64,
}

/// The structured rule tuple ⟨X, Φ, Θ, Y, μ, Ω, Σ⟩.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RuleTuple {
    /// X: antecedent feature names.
    pub features: Vec<String>,
    /// Φ: one predicate per antecedent entry.
    pub predicates: Vec<Predicate>,
    /// Θ: thresholds / categorical states, parallel to `features`.
    pub thresholds: Vec<String>,
    /// Y: consequent (feature, value) pairs; mined rules have exactly one.
    pub consequents: Vec<(String, String)>,
    /// μ: optional fuzzy membership degrees (carried, never produced here).
    pub membership: Option<Vec<f64>>,
    /// Ω: |X|−1 connectives; mined rules are pure conjunctions.
    pub operators: Vec<LogicalOp>,
    /// Σ.
    pub stats: RuleStats,
}

impl RuleTuple {
    /// Conjunctive rule from antecedent/consequent items.
    pub fn conjunction(antecedent: &[Item], consequent: Item, stats: RuleStats) -> Self {
        let n = antecedent.len();
        RuleTuple {
            features: antecedent.iter().map(|i| i.feature.clone()).collect(),
            predicates: vec![Predicate::Eq; n],
            thresholds: antecedent.iter().map(|i| i.value.clone()).collect(),
            consequents: vec![(consequent.feature, consequent.value)],
            membership: None,
            operators: vec![LogicalOp::And; n.saturating_sub(1)],
            stats,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.features.len();
        if self.predicates.len() != n || self.thresholds.len() != n {
            return Err(Error::InvalidConfig {
                what: "rule_tuple",
                detail: "|X|, |Φ|, |Θ| must match".to_string(),
            });
        }
        if self.operators.len() != n.saturating_sub(1) {
            return Err(Error::InvalidConfig {
                what: "rule_tuple",
                detail: "Ω must have |X|−1 entries".to_string(),
            });
        }
        let s = &self.stats;
        if !(0.0..=1.0).contains(&s.support) || !(0.0..=1.0).contains(&s.confidence) {
            return Err(Error::InvalidConfig {
                what: "rule_tuple",
                detail: "support and confidence must lie in [0, 1]".to_string(),
            });
        }
        Ok(())
    }

    /// Antecedent tokens in `feature=value` form.
    pub fn antecedent_tokens(&self) -> Vec<String> {
        self.features
            .iter()
            .zip(&self.thresholds)
            .map(|(f, v)| Item { feature: f.clone(), value: v.clone() }.token())
            .collect()
    }

    /// Single-consequent token; mined rules always have exactly one.
    pub fn consequent_token(&self) -> String {
        let (f, v) = &self.consequents[0];
        Item { feature: f.clone(), value: v.clone() }.token()
    }

    /// Risk pole of a `target_risk` consequent, if it has one.
    pub fn risk_consequent(&self) -> Option<bool> {
        let (f, v) = self.consequents.first()?;
        if f != "target_risk" {
            return None;
        }
        match v.as_str() {
            "1.0" => Some(true),
            "0.0" => Some(false),
            _ => None,
        }
    }
}

/// Which single-item consequents are eligible for rule generation.
#[derive(Debug, Clone)]
pub struct ConsequentFilter {
    eligible: BTreeSet<u32>,
}

impl ConsequentFilter {
    pub fn from_ids(ids: impl IntoIterator<Item = u32>) -> Self {
        ConsequentFilter { eligible: ids.into_iter().collect() }
    }

    /// All tokens of a feature, e.g. `target_risk` → {target_risk=0.0, =1.0}.
    pub fn for_feature(vocab: &Vocabulary, feature: &str) -> Self {
        Self::from_ids(vocab.ids_for_feature(feature))
    }

    pub fn matches(&self, id: u32) -> bool {
        self.eligible.contains(&id)
    }
}

/// All rules A→C with a single eligible consequent, confidence =
/// sup(A∪C)/sup(A) ≥ min_confidence. Σ carries support of the full itemset,
/// confidence, and lift (= confidence / consequent base support). Ordered by
/// confidence desc, support desc, then antecedent tokens.
pub fn generate_rules(
    itemsets: &[FrequentItemset],
    min_confidence: f64,
    filter: &ConsequentFilter,
    vocab: &Vocabulary,
) -> Result<Vec<RuleTuple>> {
    if !(min_confidence > 0.0 && min_confidence <= 1.0) {
        return Err(Error::InvalidConfig {
            what: "min_confidence",
            detail: format!("must be in (0, 1], got {min_confidence}"),
        });
    }
    let lookup: BTreeMap<&[u32], (u64, f64)> =
        itemsets.iter().map(|s| (s.items.as_slice(), (s.count, s.support))).collect();

    let mut rules = Vec::new();
    for set in itemsets {
        if set.items.len() < 2 {
            continue;
        }
        let consequent_ids: Vec<u32> =
            set.items.iter().copied().filter(|&i| filter.matches(i)).collect();
        // a single transaction never holds two tokens of one feature, so at
        // most one eligible consequent can be present in a frequent itemset
        for &c in &consequent_ids {
            let antecedent: Vec<u32> = set.items.iter().copied().filter(|&i| i != c).collect();
            let Some(&(a_count, _)) = lookup.get(antecedent.as_slice()) else { continue };
            let confidence = set.count as f64 / a_count as f64;
            if confidence + 1e-12 < min_confidence {
                continue;
            }
            let Some(&(_, c_support)) = lookup.get(&[c][..]) else { continue };
            let lift = confidence / c_support;
            let items: Vec<Item> =
                antecedent.iter().map(|&i| Item::from_token(vocab.token(i))).collect();
            let consequent = Item::from_token(vocab.token(c));
            let rule = RuleTuple::conjunction(
                &items,
                consequent,
                RuleStats { support: set.support, confidence: confidence.min(1.0), lift },
            );
            rule.validate()?;
            rules.push(rule);
        }
    }
    rules.sort_by(|a, b| {
        b.stats
            .confidence
            .total_cmp(&a.stats.confidence)
            .then(b.stats.support.total_cmp(&a.stats.support))
            .then_with(|| a.antecedent_tokens().cmp(&b.antecedent_tokens()))
    });
    Ok(rules)
}

/// Structure-preserving corruption: flip the `target_risk` consequent to the
/// opposite pole, antecedent unchanged. An involution by construction.
pub fn corrupt_rule(rule: &RuleTuple) -> Result<RuleTuple> {
    let Some(high) = rule.risk_consequent() else {
        return Err(Error::Unsupported { what: "corrupt_rule on a non target_risk consequent" });
    };
    let mut corrupted = rule.clone();
    corrupted.consequents[0].1 = if high { "0.0".to_string() } else { "1.0".to_string() };
    corrupted
        .validate()
        .expect("flipping the consequent preserves tuple invariants");
    Ok(corrupted)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tx(vocab: &Vocabulary, tokens: &[&str]) -> Transaction {
        Transaction::new(tokens.iter().map(|t| vocab.id(t).unwrap()).collect())
    }

    fn named_sets(sets: &[FrequentItemset], vocab: &Vocabulary) -> BTreeMap<Vec<String>, f64> {
        sets.iter()
            .map(|s| {
                (s.items.iter().map(|&i| vocab.token(i).to_string()).collect::<Vec<_>>(), s.support)
            })
            .collect()
    }

    #[test]
    fn binning_spec_examples() {
        let spec = BinningSpec::clinical_default();
        assert_eq!(spec.tokenize_continuous("age", 35.0).unwrap().token(), "age_group=Young");
        assert_eq!(spec.tokenize_continuous("age", 50.0).unwrap().token(), "age_group=Middle");
        assert_eq!(
            spec.tokenize_continuous("thalach", 180.0).unwrap().token(),
            "thalach_level=High"
        );
        assert_eq!(
            spec.tokenize_continuous("oldpeak", 0.0).unwrap().token(),
            "oldpeak_level=None"
        );
        assert_eq!(
            spec.tokenize_continuous("oldpeak", 2.3).unwrap().token(),
            "oldpeak_level=Severe"
        );
        assert!(matches!(
            spec.tokenize_continuous("nope", 1.0),
            Err(Error::InvalidConfig { .. })
        ));
    }

    #[test]
    fn binning_error_names_the_feature() {
        let spec = BinningSpec {
            continuous: vec![ContinuousBinning {
                source: "x".into(),
                output: "x_level".into(),
                bins: vec![bin("Low", Some(1.0), false)],
            }],
        };
        match spec.tokenize_continuous("x", 5.0) {
            Err(Error::Binning { feature, value }) => {
                assert_eq!(feature, "x");
                assert_eq!(value, 5.0);
            }
            other => panic!("expected binning error, got {other:?}"),
        }
    }

    #[test]
    fn discretize_builds_sorted_vocabulary() {
        let spec = BinningSpec::clinical_default();
        let rows: Vec<RawRow> = vec![
            vec![
                ("age".into(), FeatureValue::Continuous(35.0)),
                ("cp".into(), FeatureValue::Categorical(4.0)),
            ],
            vec![
                ("age".into(), FeatureValue::Continuous(62.0)),
                ("cp".into(), FeatureValue::Categorical(1.0)),
            ],
        ];
        let (txs, vocab) = discretize(&rows, &spec).unwrap();
        assert_eq!(vocab.tokens(), &["age_group=Senior", "age_group=Young", "cp=1.0", "cp=4.0"]);
        assert_eq!(txs[0].len(), 2);
        assert!(txs[0].contains(vocab.id("cp=4.0").unwrap()));
    }

    #[test]
    fn fp_growth_three_transaction_example() {
        // T = {AB, AB, AC}, min_sup 0.6 → {A:1, B:2/3, AB:2/3}
        let vocab = Vocabulary::from_tokens(vec!["A".into(), "B".into(), "C".into()]);
        let txs = vec![tx(&vocab, &["A", "B"]), tx(&vocab, &["A", "B"]), tx(&vocab, &["A", "C"])];
        let sets = fp_growth(&txs, 0.6, None).unwrap();
        let named = named_sets(&sets, &vocab);
        assert_eq!(named.len(), 3);
        assert_eq!(named[&vec!["A".to_string()]], 1.0);
        assert!((named[&vec!["B".to_string()]] - 2.0 / 3.0).abs() < 1e-12);
        assert!((named[&vec!["A".to_string(), "B".to_string()]] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fp_growth_full_support_and_empty_results() {
        let vocab = Vocabulary::from_tokens(vec!["A".into(), "B".into()]);
        let txs = vec![tx(&vocab, &["A", "B"]), tx(&vocab, &["A", "B"])];
        let sets = fp_growth(&txs, 1.0, None).unwrap();
        assert_eq!(sets.len(), 3);
        for s in &sets {
            assert_eq!(s.support, 1.0);
        }
        // threshold just above the max single-item support → empty
        let one_of_two = vec![tx(&vocab, &["A"]), tx(&vocab, &["B"])];
        assert!(fp_growth(&one_of_two, 0.51, None).unwrap().is_empty());
        assert!(fp_growth(&[], 0.5, None).unwrap().is_empty());
    }

    #[test]
    fn fp_growth_rejects_bad_support() {
        assert!(fp_growth(&[], 0.0, None).is_err());
        assert!(fp_growth(&[], 1.01, None).is_err());
    }

    #[test]
    fn max_len_caps_itemset_size() {
        let vocab = Vocabulary::from_tokens(vec!["A".into(), "B".into(), "C".into()]);
        let txs = vec![tx(&vocab, &["A", "B", "C"]); 4];
        let sets = fp_growth(&txs, 0.5, Some(2)).unwrap();
        assert!(sets.iter().all(|s| s.items.len() <= 2));
        assert_eq!(sets.len(), 6); // 3 singles + 3 pairs
    }

    #[test]
    fn generate_rules_confidence_definition() {
        // sup(A)=1.0, sup(AB)=2/3 → A→B confidence 2/3
        let vocab = Vocabulary::from_tokens(vec!["A".into(), "B".into(), "C".into()]);
        let txs = vec![tx(&vocab, &["A", "B"]), tx(&vocab, &["A", "B"]), tx(&vocab, &["A", "C"])];
        let sets = fp_growth(&txs, 0.3, None).unwrap();
        let filter = ConsequentFilter::from_ids([vocab.id("B").unwrap()]);
        let rules = generate_rules(&sets, 0.5, &filter, &vocab).unwrap();
        assert_eq!(rules.len(), 1);
        let r = &rules[0];
        assert_eq!(r.antecedent_tokens(), vec!["A".to_string()]);
        assert!((r.stats.confidence - 2.0 / 3.0).abs() < 1e-12);
        // lift = conf / sup(B) = (2/3) / (2/3) = 1
        assert!((r.stats.lift - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corrupt_rule_is_a_forced_involution() {
        let rule = RuleTuple::conjunction(
            &[Item { feature: "cp".into(), value: "4.0".into() }],
            Item { feature: "target_risk".into(), value: "1.0".into() },
            RuleStats { support: 0.1, confidence: 0.9, lift: 1.5 },
        );
        let flipped = corrupt_rule(&rule).unwrap();
        assert_eq!(flipped.consequent_token(), "target_risk=0.0");
        assert_eq!(flipped.antecedent_tokens(), rule.antecedent_tokens());
        let back = corrupt_rule(&flipped).unwrap();
        assert_eq!(back, rule);

        let no_risk = RuleTuple::conjunction(
            &[Item { feature: "a".into(), value: "1".into() }],
            Item { feature: "b".into(), value: "2".into() },
            RuleStats { support: 0.1, confidence: 0.9, lift: 1.0 },
        );
        assert!(corrupt_rule(&no_risk).is_err());
    }

    #[test]
    fn corrupted_rule_never_matches_a_mined_rule() {
        // mined rules all map this antecedent to risk=1.0; the corruption
        // must not collide with any of them
        let mined = vec![RuleTuple::conjunction(
            &[Item { feature: "slope".into(), value: "3.0".into() }],
            Item { feature: "target_risk".into(), value: "1.0".into() },
            RuleStats { support: 0.05, confidence: 1.0, lift: 2.0 },
        )];
        let corrupted = corrupt_rule(&mined[0]).unwrap();
        assert!(mined.iter().all(|r| {
            r.antecedent_tokens() != corrupted.antecedent_tokens()
                || r.consequent_token() != corrupted.consequent_token()
        }));
    }

    #[test]
    fn rule_tuple_validation() {
        let mut rule = RuleTuple::conjunction(
            &[
                Item { feature: "a".into(), value: "1".into() },
                Item { feature: "b".into(), value: "2".into() },
            ],
            Item { feature: "y".into(), value: "0".into() },
            RuleStats { support: 0.5, confidence: 0.7, lift: 1.0 },
        );
        assert!(rule.validate().is_ok());
        assert_eq!(rule.operators.len(), 1);
        rule.stats.confidence = 1.5;
        assert!(rule.validate().is_err());
    }
}
