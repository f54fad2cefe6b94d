//! Binary snapshot of one partition's six permutation arrays.
//!
//! Layout (little-endian): magic `PJIX`, u32 version, u32 partition, then for
//! each permutation in storage order a u8 tag, a u64 row count and the rows
//! as `3 x u32` in permutation order.

use std::io::{Read, Write};

use super::{PartitionIndexes, Permutation, PermutationIndex, Position};
use crate::codec::*;
use crate::error::{Error, Result};
use crate::rdf::{EncodedTriple, TermId};

const MAGIC: &[u8; 4] = b"PJIX";
const VERSION: u32 = 1;

pub fn write_partition<W: Write>(w: &mut W, idx: &PartitionIndexes) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(w, VERSION)?;
    put_u32(w, idx.partition() as u32)?;
    for perm in idx.permutations() {
        put_u8(w, perm.order() as u8)?;
        let mut flat = Vec::with_capacity(perm.len() * 3);
        for t in perm.rows() {
            flat.extend(perm.order().key(t).map(|id| id.0));
        }
        put_u32s(w, &flat)?;
    }
    Ok(())
}

pub fn read_partition<R: Read>(r: &mut R) -> Result<PartitionIndexes> {
    expect_magic(r, MAGIC, VERSION)?;
    let partition = get_u32(r)? as usize;
    let mut perms = Vec::with_capacity(6);
    for expected in Permutation::ALL {
        let tag = get_u8(r)?;
        if tag != expected as u8 {
            return Err(Error::Snapshot(format!("expected permutation {expected}, found tag {tag}")));
        }
        let flat = get_u32s(r)?;
        if flat.len() % 3 != 0 {
            return Err(Error::Snapshot("row data is not a multiple of 3".into()));
        }
        let order = expected.order();
        let rows: Vec<EncodedTriple> = flat
            .chunks_exact(3)
            .map(|c| {
                let mut t = EncodedTriple::from_raw(0, 0, 0);
                for (pos, v) in order.iter().zip(c) {
                    match pos {
                        Position::S => t.s = TermId(*v),
                        Position::P => t.p = TermId(*v),
                        Position::O => t.o = TermId(*v),
                    }
                }
                t
            })
            .collect();
        let idx = PermutationIndex::from_sorted(expected, rows);
        if !idx.is_strictly_sorted() {
            return Err(Error::Snapshot(format!("{expected} rows are not strictly sorted")));
        }
        perms.push(idx);
    }
    let perms: [PermutationIndex; 6] = perms.try_into().expect("six permutations");
    Ok(PartitionIndexes::from_parts(partition, perms))
}
