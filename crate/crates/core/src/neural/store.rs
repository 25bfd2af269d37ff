//! Flat named-block parameter storage shared by every network in this module.
//!
//! Models allocate their weights as named blocks in one store; training,
//! freezing, checkpointing, and hashing all address parameters through it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Handle of one parameter block inside the store that allocated it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockId(usize);

/// One named tensor of parameters. Shape is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Ordered collection of parameter blocks with name lookup.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    blocks: Vec<ParamBlock>,
    index: BTreeMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    /// Register a block. Names must be unique; shape must match the value count.
    pub fn alloc(&mut self, name: String, shape: Vec<usize>, values: Vec<f64>) -> BlockId {
        let expect: usize = shape.iter().product();
        assert_eq!(
            expect,
            values.len(),
            "block {name:?}: shape {shape:?} holds {expect} values, got {}",
            values.len()
        );
        assert!(
            !self.index.contains_key(&name),
            "duplicate parameter block {name:?}"
        );
        let id = self.blocks.len();
        self.index.insert(name.clone(), id);
        self.blocks.push(ParamBlock { name, shape, values });
        BlockId(id)
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_params(&self) -> usize {
        self.blocks.iter().map(|b| b.values.len()).sum()
    }

    pub fn block(&self, id: BlockId) -> &ParamBlock {
        &self.blocks[id.0]
    }

    pub fn values(&self, id: BlockId) -> &[f64] {
        &self.blocks[id.0].values
    }

    pub fn values_mut(&mut self, id: BlockId) -> &mut [f64] {
        &mut self.blocks[id.0].values
    }

    pub fn id_of(&self, name: &str) -> Option<BlockId> {
        self.index.get(name).copied().map(BlockId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (BlockId, &ParamBlock)> {
        self.blocks.iter().enumerate().map(|(i, b)| (BlockId(i), b))
    }

    /// Per-block boolean mask from a name predicate, indexed like [`Gradients`].
    pub fn mask_where(&self, pred: impl Fn(&str) -> bool) -> Vec<bool> {
        self.blocks.iter().map(|b| pred(&b.name)).collect()
    }

    /// Snapshot of every block, for checkpoints.
    pub fn export(&self) -> Vec<ParamBlock> {
        self.blocks.clone()
    }

    /// Restore values from a checkpoint snapshot.
    ///
    /// The snapshot must cover exactly the blocks this store declares, with
    /// matching shapes; anything else means the checkpoint belongs to a
    /// different architecture.
    pub fn load_values(&mut self, saved: &[ParamBlock]) -> Result<()> {
        if saved.len() != self.blocks.len() {
            return Err(Error::format(format!(
                "checkpoint holds {} parameter blocks, architecture declares {}",
                saved.len(),
                self.blocks.len()
            )));
        }
        for block in saved {
            let id = self.index.get(&block.name).copied().ok_or_else(|| {
                Error::format(format!("checkpoint block {:?} not in architecture", block.name))
            })?;
            let target = &mut self.blocks[id];
            if target.shape != block.shape {
                return Err(Error::format(format!(
                    "checkpoint block {:?} has shape {:?}, architecture declares {:?}",
                    block.name, block.shape, target.shape
                )));
            }
            target.values.copy_from_slice(&block.values);
        }
        Ok(())
    }

    /// Copy values from another store for every block both stores declare
    /// under the same name. Shapes of shared names must agree.
    pub fn copy_matching(&mut self, src: &ParamStore) -> Result<()> {
        for block in &mut self.blocks {
            if let Some(&i) = src.index.get(&block.name) {
                let from = &src.blocks[i];
                if from.shape != block.shape {
                    return Err(Error::format(format!(
                        "block {:?}: source shape {:?} vs target {:?}",
                        block.name, from.shape, block.shape
                    )));
                }
                block.values.copy_from_slice(&from.values);
            }
        }
        Ok(())
    }

    pub fn set_all_zero(&mut self) {
        for block in &mut self.blocks {
            block.values.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// SHA-256 over name, shape, and exact value bits of the selected blocks,
    /// in name order. Bit-identical parameters give identical digests.
    pub fn hash_blocks(&self, pred: impl Fn(&str) -> bool) -> String {
        let mut names: Vec<&ParamBlock> =
            self.blocks.iter().filter(|b| pred(&b.name)).collect();
        names.sort_by(|a, b| a.name.cmp(&b.name));
        let mut hasher = Sha256::new();
        for block in names {
            hasher.update(block.name.as_bytes());
            hasher.update([0u8]);
            for &dim in &block.shape {
                hasher.update((dim as u64).to_le_bytes());
            }
            for &v in &block.values {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hex(&hasher.finalize())
    }

    pub fn hash_all(&self) -> String {
        self.hash_blocks(|_| true)
    }
}

fn hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Per-block gradient buffers parallel to a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Gradients {
    blocks: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Gradients {
            blocks: store.blocks.iter().map(|b| vec![0.0; b.values.len()]).collect(),
        }
    }

    pub fn slice(&self, id: BlockId) -> &[f64] {
        &self.blocks[id.0]
    }

    pub fn slice_mut(&mut self, id: BlockId) -> &mut [f64] {
        &mut self.blocks[id.0]
    }

    /// Elementwise accumulate another gradient set.
    pub fn add_assign(&mut self, other: &Gradients) {
        assert_eq!(self.blocks.len(), other.blocks.len(), "gradient layout mismatch");
        for (a, b) in self.blocks.iter_mut().zip(&other.blocks) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub(crate) fn by_index(&self, block: usize) -> &[f64] {
        &self.blocks[block]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> (ParamStore, BlockId, BlockId) {
        let mut s = ParamStore::new();
        let a = s.alloc("a".into(), vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let b = s.alloc("b".into(), vec![3], vec![0.5, -0.5, 0.0]);
        (s, a, b)
    }

    #[test]
    fn alloc_and_lookup_round_trip() {
        let (s, a, b) = store();
        assert_eq!(s.n_blocks(), 2);
        assert_eq!(s.n_params(), 7);
        assert_eq!(s.values(a), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.id_of("b"), Some(b));
        assert_eq!(s.id_of("missing"), None);
    }

    #[test]
    #[should_panic(expected = "duplicate parameter block")]
    fn duplicate_names_panic() {
        let (mut s, _, _) = store();
        s.alloc("a".into(), vec![1], vec![0.0]);
    }

    #[test]
    fn load_values_restores_exact_bits() {
        let (mut s, a, _) = store();
        let saved = s.export();
        s.values_mut(a)[0] = 9.0;
        s.load_values(&saved).unwrap();
        assert_eq!(s.values(a)[0], 1.0);
    }

    #[test]
    fn load_values_rejects_wrong_architecture() {
        let (mut s, _, _) = store();
        let mut saved = s.export();
        saved[0].shape = vec![4];
        assert!(s.load_values(&saved).is_err());
        saved.truncate(1);
        assert!(s.load_values(&saved).is_err());
    }

    #[test]
    fn copy_matching_takes_shared_names_only() {
        let (mut dst, a, _) = store();
        let mut src = ParamStore::new();
        src.alloc("a".into(), vec![2, 2], vec![9.0; 4]);
        src.alloc("c".into(), vec![1], vec![7.0]);
        dst.copy_matching(&src).unwrap();
        assert_eq!(dst.values(a), &[9.0; 4]);
        assert_eq!(dst.values(dst.id_of("b").unwrap()), &[0.5, -0.5, 0.0]);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let (mut s, a, _) = store();
        let h0 = s.hash_all();
        assert_eq!(h0, store().0.hash_all());
        assert_eq!(h0.len(), 64);
        s.values_mut(a)[3] = f64::from_bits(s.values(a)[3].to_bits() ^ 1);
        assert_ne!(s.hash_all(), h0, "hash must see the smallest bit flip");
        // Prefix selection ignores the changed block.
        assert_eq!(
            s.hash_blocks(|n| n == "b"),
            store().0.hash_blocks(|n| n == "b")
        );
    }

    #[test]
    fn gradients_accumulate() {
        let (s, a, b) = store();
        let mut g = Gradients::zeros_like(&s);
        g.slice_mut(a)[1] = 2.0;
        let mut h = Gradients::zeros_like(&s);
        h.slice_mut(a)[1] = 0.5;
        h.slice_mut(b)[2] = 1.0;
        g.add_assign(&h);
        assert_eq!(g.slice(a), &[0.0, 2.5, 0.0, 0.0]);
        assert_eq!(g.slice(b), &[0.0, 0.0, 1.0]);
    }
}
