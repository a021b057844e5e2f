//! Resolve raw (name, email) pairs into canonical developers.
//!
//! Two matching variants are supported: exact partial string matching (name,
//! email or email local-part equality) and a Levenshtein-threshold rule.
//! Merging is transitively closed with a union-find; block ids are stable
//! hashes of the sorted member set, so output is independent of input order.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

/// A raw identity as it appears in the git log.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RawIdentity {
    pub name: String,
    pub email: String,
}

impl RawIdentity {
    pub fn new(name: impl Into<String>, email: impl Into<String>) -> Self {
        RawIdentity {
            name: name.into(),
            email: email.into(),
        }
    }
}

/// Which identity columns feed the matcher.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityScope {
    AuthorOnly,
    AuthorAndCommitter,
}

/// Matching variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum IdentityMode {
    Exact,
    EditDistance { threshold: u32 },
}

/// Stable canonical developer id ("d" + 16 hex digits).
pub type DevId = String;

/// One canonical developer: a block of merged raw identities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalDeveloper {
    pub id: DevId,
    /// Lexicographically smallest normalized member name.
    pub display_name: String,
    pub members: BTreeSet<RawIdentity>,
}

/// A partition of the raw identity universe into canonical developers.
#[derive(Debug, Clone, Default)]
pub struct IdentityPartition {
    pub developers: Vec<CanonicalDeveloper>,
    by_member: BTreeMap<RawIdentity, usize>,
}

impl IdentityPartition {
    pub fn resolve(&self, raw: &RawIdentity) -> Option<&CanonicalDeveloper> {
        self.by_member.get(raw).map(|&i| &self.developers[i])
    }

    /// Resolve a raw pair seen outside the original universe (e.g. a blame
    /// owner from an ancestor commit): fall back to exact normalized lookup,
    /// else mint a deterministic singleton id without touching the partition.
    pub fn resolve_or_external(&self, raw: &RawIdentity) -> DevId {
        if let Some(dev) = self.resolve(raw) {
            return dev.id.clone();
        }
        let norm = normalize_name(&raw.name);
        for dev in &self.developers {
            if dev
                .members
                .iter()
                .any(|m| normalize_name(&m.name) == norm && !norm.is_empty())
            {
                return dev.id.clone();
            }
        }
        block_id(std::iter::once(raw))
    }

    pub fn len(&self) -> usize {
        self.developers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.developers.is_empty()
    }
}

/// Case-fold, trim and collapse internal whitespace.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Lowercase, strip angle brackets and trailing comments from an email.
pub fn normalize_email(email: &str) -> String {
    let mut e = email.trim().to_lowercase();
    if let Some(start) = e.find('<') {
        if let Some(end) = e.rfind('>') {
            if end > start {
                e = e[start + 1..end].to_string();
            }
        }
    }
    if let Some(paren) = e.find('(') {
        e.truncate(paren);
    }
    e.trim().to_string()
}

fn email_local_part(normalized_email: &str) -> &str {
    normalized_email
        .split_once('@')
        .map(|(local, _)| local)
        .unwrap_or(normalized_email)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn block_id<'a>(members: impl Iterator<Item = &'a RawIdentity>) -> DevId {
    let mut keys: Vec<String> = members
        .map(|m| format!("{}\u{1f}{}", m.name, m.email))
        .collect();
    keys.sort();
    format!("d{:016x}", fnv1a64(keys.join("\u{1e}").as_bytes()))
}

/// Exact partial string matching: two raw pairs merge iff normalized full
/// names are equal, emails are equal, or email local parts are equal.
/// Empty normalized keys never match anything.
pub fn canonicalize_exact(identities: &BTreeSet<RawIdentity>) -> IdentityPartition {
    let items: Vec<&RawIdentity> = identities.iter().collect();
    let mut uf = UnionFind::new(items.len());
    let mut by_name: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_email: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_local: BTreeMap<String, usize> = BTreeMap::new();
    for (i, raw) in items.iter().enumerate() {
        let name = normalize_name(&raw.name);
        let email = normalize_email(&raw.email);
        let local = email_local_part(&email).to_string();
        if !name.is_empty() {
            match by_name.get(&name) {
                Some(&j) => uf.union(i, j),
                None => {
                    by_name.insert(name, i);
                }
            }
        }
        if !email.is_empty() {
            match by_email.get(&email) {
                Some(&j) => uf.union(i, j),
                None => {
                    by_email.insert(email, i);
                }
            }
        }
        if !local.is_empty() {
            match by_local.get(&local) {
                Some(&j) => uf.union(i, j),
                None => {
                    by_local.insert(local, i);
                }
            }
        }
    }
    build_partition(items, uf)
}

/// Levenshtein distance over unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> u32 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len() as u32;
    }
    let mut prev: Vec<u32> = (0..=b.len() as u32).collect();
    let mut cur = vec![0u32; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i as u32 + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + u32::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit-distance matching: pairs merge iff the minimum of the name distance
/// and the email local-part distance is within the threshold. Threshold 0
/// degenerates to exact equality on those fields.
pub fn canonicalize_edit_distance(
    identities: &BTreeSet<RawIdentity>,
    threshold: u32,
) -> IdentityPartition {
    let items: Vec<&RawIdentity> = identities.iter().collect();
    let keys: Vec<(String, String)> = items
        .iter()
        .map(|raw| {
            let email = normalize_email(&raw.email);
            (
                normalize_name(&raw.name),
                email_local_part(&email).to_string(),
            )
        })
        .collect();
    let mut uf = UnionFind::new(items.len());
    for i in 0..items.len() {
        for j in (i + 1)..items.len() {
            let (ni, li) = &keys[i];
            let (nj, lj) = &keys[j];
            let name_d = if ni.is_empty() || nj.is_empty() {
                u32::MAX
            } else {
                levenshtein(ni, nj)
            };
            let local_d = if li.is_empty() || lj.is_empty() {
                u32::MAX
            } else {
                levenshtein(li, lj)
            };
            if name_d.min(local_d) <= threshold {
                uf.union(i, j);
            }
        }
    }
    build_partition(items, uf)
}

/// Dispatch on the configured matching variant.
pub fn canonicalize(identities: &BTreeSet<RawIdentity>, mode: &IdentityMode) -> IdentityPartition {
    match mode {
        IdentityMode::Exact => canonicalize_exact(identities),
        IdentityMode::EditDistance { threshold } => {
            canonicalize_edit_distance(identities, *threshold)
        }
    }
}

fn build_partition(items: Vec<&RawIdentity>, mut uf: UnionFind) -> IdentityPartition {
    let mut blocks: BTreeMap<usize, BTreeSet<RawIdentity>> = BTreeMap::new();
    for (i, raw) in items.iter().enumerate() {
        blocks
            .entry(uf.find(i))
            .or_default()
            .insert((*raw).clone());
    }
    let mut developers: Vec<CanonicalDeveloper> = blocks
        .into_values()
        .map(|members| {
            let display_name = members
                .iter()
                .map(|m| normalize_name(&m.name))
                .filter(|n| !n.is_empty())
                .min()
                .unwrap_or_else(|| {
                    members
                        .iter()
                        .map(|m| normalize_email(&m.email))
                        .min()
                        .unwrap_or_default()
                });
            CanonicalDeveloper {
                id: block_id(members.iter()),
                display_name,
                members,
            }
        })
        .collect();
    developers.sort_by(|a, b| (&a.display_name, &a.id).cmp(&(&b.display_name, &b.id)));
    let mut by_member = BTreeMap::new();
    for (i, dev) in developers.iter().enumerate() {
        for m in &dev.members {
            by_member.insert(m.clone(), i);
        }
    }
    IdentityPartition {
        developers,
        by_member,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(pairs: &[(&str, &str)]) -> BTreeSet<RawIdentity> {
        pairs
            .iter()
            .map(|(n, e)| RawIdentity::new(*n, *e))
            .collect()
    }

    #[test]
    fn exact_merges_on_casefolded_name() {
        let p = canonicalize_exact(&set(&[("John Doe", "j@x"), ("john doe", "john@y")]));
        assert_eq!(p.len(), 1);
        assert_eq!(p.developers[0].display_name, "john doe");
    }

    #[test]
    fn exact_merges_on_email() {
        let p = canonicalize_exact(&set(&[("John Doe", "j@x"), ("Jane", "j@x")]));
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn exact_is_transitively_closed() {
        // A~B by name, B~C by email local part.
        let p = canonicalize_exact(&set(&[
            ("Ann Lee", "ann@a.org"),
            ("ann lee", "al@b.org"),
            ("A. Lee", "al@c.org"),
        ]));
        assert_eq!(p.len(), 1);
        assert_eq!(p.developers[0].members.len(), 3);
    }

    #[test]
    fn exact_keeps_distinct_devs_apart() {
        let p = canonicalize_exact(&set(&[("Ann", "ann@a.org"), ("Bob", "bob@b.org")]));
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn empty_input_gives_empty_partition() {
        let p = canonicalize_exact(&BTreeSet::new());
        assert!(p.is_empty());
    }

    #[test]
    fn empty_names_do_not_merge_everything() {
        let p = canonicalize_exact(&set(&[("", "a@x.org"), ("", "b@y.org")]));
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn levenshtein_hand_cases() {
        assert_eq!(levenshtein("jon smith", "jon smyth"), 1);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("same", "same"), 0);
    }

    #[test]
    fn edit_distance_threshold_one_merges_near_names() {
        let ids = set(&[("jon smith", "js@a.org"), ("jon smyth", "j2@b.org")]);
        assert_eq!(canonicalize_edit_distance(&ids, 1).len(), 1);
        assert_eq!(canonicalize_edit_distance(&ids, 0).len(), 2);
    }

    #[test]
    fn edit_distance_zero_equals_exact_field_equality() {
        let ids = set(&[
            ("Ann Lee", "ann@a.org"),
            ("ann  lee", "other@b.org"),
            ("Bob", "bob@c.org"),
        ]);
        let p = canonicalize_edit_distance(&ids, 0);
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn email_normalization_strips_brackets_and_comments() {
        assert_eq!(normalize_email(" <A@B.ORG> "), "a@b.org");
        assert_eq!(normalize_email("ann@x.org (work)"), "ann@x.org");
    }

    #[test]
    fn ids_and_display_names_are_input_order_independent() {
        let a = set(&[("Zed", "z@z.org"), ("ann lee", "ann@a.org"), ("Ann Lee", "x@q.org")]);
        let p1 = canonicalize_exact(&a);
        // BTreeSet iteration already fixes order, so shuffle through a Vec.
        let mut v: Vec<RawIdentity> = a.iter().cloned().collect();
        v.reverse();
        let b: BTreeSet<RawIdentity> = v.into_iter().collect();
        let p2 = canonicalize_exact(&b);
        let ids1: Vec<_> = p1.developers.iter().map(|d| d.id.clone()).collect();
        let ids2: Vec<_> = p2.developers.iter().map(|d| d.id.clone()).collect();
        assert_eq!(ids1, ids2);
    }

    proptest! {
        #[test]
        fn output_is_a_partition(
            raw in proptest::collection::vec(("[a-c]{0,4} ?[a-c]{0,4}", "[a-d]{1,4}@[a-b]{1,3}"), 0..12),
            threshold in 0u32..3,
        ) {
            let ids: BTreeSet<RawIdentity> =
                raw.iter().map(|(n, e)| RawIdentity::new(n.clone(), e.clone())).collect();
            for p in [canonicalize_exact(&ids), canonicalize_edit_distance(&ids, threshold)] {
                let mut seen = BTreeSet::new();
                for dev in &p.developers {
                    for m in &dev.members {
                        prop_assert!(seen.insert(m.clone()), "blocks overlap on {m:?}");
                    }
                }
                prop_assert_eq!(seen, ids.clone());
            }
        }

        #[test]
        fn raising_threshold_never_splits_blocks(
            raw in proptest::collection::vec(("[a-c]{1,5}", "[a-d]{1,5}@x"), 1..10),
            t in 0u32..3,
        ) {
            let ids: BTreeSet<RawIdentity> =
                raw.iter().map(|(n, e)| RawIdentity::new(n.clone(), e.clone())).collect();
            let low = canonicalize_edit_distance(&ids, t);
            let high = canonicalize_edit_distance(&ids, t + 1);
            // every low block is contained in exactly one high block
            for dev in &low.developers {
                let mut first = dev.members.iter().next().unwrap();
                let target = high.resolve(first).unwrap().id.clone();
                for m in &dev.members {
                    prop_assert_eq!(&high.resolve(m).unwrap().id, &target);
                    first = m;
                }
                let _ = first;
            }
        }
    }
}
