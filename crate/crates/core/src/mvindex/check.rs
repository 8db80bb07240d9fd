//! Structural invariant checker. Reads pages without I/O accounting.

use std::collections::BTreeSet;
use std::fmt;

use super::node::{MvPage, Versioned};
use super::MvIndex;
use crate::pagestore::PageId;
use crate::types::{Timestamp, OPEN};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    WeakVersion { page: PageId, at: Timestamp, live: usize },
    PostRestructure { page: PageId, live: usize },
    KeyBelowSeparator { parent: PageId, child: PageId },
    MissingSuccessor { page: PageId },
    LiveRecordInDeadNode { page: PageId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl MvIndex {
    pub fn check_invariants(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let cfg = self.config;
        for id in self.store.page_ids() {
            let Some(page) = self.store.inspect(id) else { continue };
            let died = page.died();
            if died != OPEN && page.live_count() > 0 {
                out.push(Violation::LiveRecordInDeadNode { page: id });
            }
            if let MvPage::Leaf(leaf) = page {
                if died != OPEN && !(1..=2).contains(&leaf.successors.len()) {
                    out.push(Violation::MissingSuccessor { page: id });
                }
            }

            if let MvPage::Internal(n) = page {
                for r in &n.records {
                    let Some(child) = self.store.inspect(r.child) else { continue };
                    let below = match child {
                        MvPage::Leaf(c) => c.records.iter().any(|x| x.meets(r.start, r.end.saturating_sub(1)) && x.key < r.key),
                        MvPage::Internal(c) => c.records.iter().any(|x| x.meets(r.start, r.end.saturating_sub(1)) && x.key < r.key),
                    };
                    if r.start < r.end && below {
                        out.push(Violation::KeyBelowSeparator { parent: id, child: r.child });
                    }
                }
            }
        }

        // Live counts only change at record boundaries, so checking each
        // version named by such an instant covers every version.
        let mut instants: BTreeSet<Timestamp> = BTreeSet::new();
        for id in self.store.page_ids() {
            match self.store.inspect(id) {
                Some(MvPage::Leaf(n)) => n.records.iter().for_each(|r| {
                    instants.insert(r.start);
                    instants.insert(r.end);
                }),
                Some(MvPage::Internal(n)) => n.records.iter().for_each(|r| {
                    instants.insert(r.start);
                    instants.insert(r.end);
                }),
                None => {}
            }
        }
        instants.remove(&OPEN);
        for &t in &instants {
            self.check_version(t, &mut out);
        }

        for b in &self.births {
            if b.is_root || b.merge_exhausted {
                continue;
            }
            if b.live < cfg.split_low || b.live > cfg.split_high {
                out.push(Violation::PostRestructure { page: b.page, live: b.live });
            }
        }
        out
    }

    /// Weak version condition for every non-root node of the version at `t`.
    fn check_version(&self, t: Timestamp, out: &mut Vec<Violation>) {
        let Some(root) = self.roots.lookup(t) else { return };
        let Some(MvPage::Internal(top)) = self.store.inspect(root.root) else { return };
        let kids: Vec<PageId> = top.records.iter().filter(|r| r.alive_at(t)).map(|r| r.child).collect();
        let lone = kids.len() == 1;
        let mut stack: Vec<(PageId, bool)> = kids.into_iter().map(|k| (k, lone)).collect();
        while let Some((id, exempt)) = stack.pop() {
            let Some(page) = self.store.inspect(id) else { continue };
            let live = page.count_alive_at(t);
            if !exempt && live < self.config.d {
                out.push(Violation::WeakVersion { page: id, at: t, live });
            }
            if let MvPage::Internal(n) = page {
                stack.extend(n.records.iter().filter(|r| r.alive_at(t)).map(|r| (r.child, false)));
            }
        }
    }
}
