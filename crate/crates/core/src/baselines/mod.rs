//! Comparison backends: the per-cell sorted list and the two-structure
//! primitive index.

pub mod bptree;
pub mod list;
pub mod primitive;

use crate::error::Result;
use crate::pagestore::{PageContent, PageId, PageKind, PageStore};

pub use list::{list_eval_order, ListEntry, ListIndex};
pub use primitive::PrimitiveIndex;

/// One page of a singly linked page chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPage<E> {
    pub items: Vec<E>,
    pub next: Option<PageId>,
}

impl<E> PageContent for ChainPage<E> {
    fn empty(_kind: PageKind) -> Self {
        ChainPage { items: Vec::new(), next: None }
    }

    fn record_count(&self) -> usize {
        self.items.len()
    }

    fn kind(&self) -> PageKind {
        PageKind::ListNode
    }
}

/// Store `items` packed into freshly allocated pages; returns the head.
pub(crate) fn write_chain<E: Clone>(store: &mut PageStore<ChainPage<E>>, items: &[E]) -> Result<Option<PageId>> {
    let b = store.capacity();
    let ids: Vec<PageId> = items.chunks(b).map(|_| store.allocate(PageKind::ListNode)).collect();
    for (i, chunk) in items.chunks(b).enumerate() {
        let page = ChainPage { items: chunk.to_vec(), next: ids.get(i + 1).copied() };
        store.write(ids[i], page)?;
    }
    Ok(ids.first().copied())
}

/// Visit every item of the chain starting at `head`, one read per page.
pub(crate) fn walk_chain<E>(store: &PageStore<ChainPage<E>>, head: Option<PageId>, mut f: impl FnMut(&E)) -> Result<()>
where
    ChainPage<E>: PageContent,
{
    let mut next = head;
    while let Some(id) = next {
        let page = store.read(id)?;
        page.items.iter().for_each(&mut f);
        next = page.next;
    }
    Ok(())
}
