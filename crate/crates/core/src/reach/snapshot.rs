//! Binary snapshot of the reach indexes held by one partition.
//!
//! Layout (little-endian): magic `PJRX`, u32 version, u32 partition, u32
//! property count, then per property its id, the real vertex list, the
//! component map, the DAG and entry CSR arrays, entry owners and the size
//! figures.

use std::io::{Read, Write};

use super::compound::{CompoundDag, CompoundStats};
use super::scc::Csr;
use crate::codec::*;
use crate::error::{Error, Result};
use crate::rdf::TermId;

const MAGIC: &[u8; 4] = b"PJRX";
const VERSION: u32 = 1;

pub(crate) fn write_partition<'a, W: Write>(
    w: &mut W,
    partition: usize,
    dags: impl ExactSizeIterator<Item = &'a CompoundDag>,
) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(w, VERSION)?;
    put_u32(w, partition as u32)?;
    put_u32(w, dags.len() as u32)?;
    for d in dags {
        put_u32(w, d.property.0)?;
        put_u32s(w, &d.real.iter().map(|t| t.0).collect::<Vec<_>>())?;
        put_u32s(w, &d.comp_of)?;
        put_u32s(w, &d.dag.offsets)?;
        put_u32s(w, &d.dag.targets)?;
        put_u32s(w, &d.entries.offsets)?;
        put_u32s(w, &d.entries.targets)?;
        put_u32s(w, &d.entry_owner.iter().map(|&o| o as u32).collect::<Vec<_>>())?;
        let s = d.stats;
        let figures = [
            s.local_edges,
            s.cut_edges,
            s.in_boundaries,
            s.out_boundaries,
            s.local_virtuals,
            s.remote_virtuals,
            s.components,
        ];
        put_u32s(w, &figures.map(|x| x as u32))?;
    }
    Ok(())
}

pub(crate) fn read_partition<R: Read>(r: &mut R) -> Result<(usize, Vec<CompoundDag>)> {
    expect_magic(r, MAGIC, VERSION)?;
    let partition = get_u32(r)? as usize;
    let n = get_u32(r)?;
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let property = TermId(get_u32(r)?);
        let real: Vec<TermId> = get_u32s(r)?.into_iter().map(TermId).collect();
        let comp_of = get_u32s(r)?;
        let dag = Csr { offsets: get_u32s(r)?, targets: get_u32s(r)? };
        let entries = Csr { offsets: get_u32s(r)?, targets: get_u32s(r)? };
        let entry_owner: Vec<u16> = get_u32s(r)?.into_iter().map(|o| o as u16).collect();
        let f = get_u32s(r)?;
        if f.len() != 7 {
            return Err(Error::Snapshot("bad size figures".into()));
        }
        let comps = dag.node_count();
        let consistent = real.windows(2).all(|w| w[0] < w[1])
            && comp_of.len() >= real.len()
            && comp_of.iter().all(|&c| (c as usize) < comps)
            && dag.targets.iter().all(|&c| (c as usize) < comps)
            && entries.node_count() == comps
            && entries.targets.iter().all(|&e| (e as usize) < real.len())
            && entry_owner.len() == real.len()
            && f[6] as usize == comps;
        if !consistent {
            return Err(Error::Snapshot(format!("inconsistent reach index for property {property}")));
        }
        let stats = CompoundStats {
            local_edges: f[0] as usize,
            cut_edges: f[1] as usize,
            in_boundaries: f[2] as usize,
            out_boundaries: f[3] as usize,
            local_virtuals: f[4] as usize,
            remote_virtuals: f[5] as usize,
            components: f[6] as usize,
        };
        out.push(CompoundDag { property, partition, real, comp_of, dag, entries, entry_owner, stats });
    }
    Ok((partition, out))
}
