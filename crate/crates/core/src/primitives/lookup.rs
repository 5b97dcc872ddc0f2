//! Batched key lookup: every query record learns the payload of the
//! directory record carrying its label.
//!
//! Directory and queries are co-sorted by `(label, role, home)`, so each
//! label's directory record leads its run; a forward segmented broadcast
//! hands the payload to the rest of the run, and a second sort on `home`
//! puts every record back where it started.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use super::scan::{dec_word, segmented_scan, ScanDir, ScanOp};
use super::{mesh_sort, scan_steps, set_homes, settle, sort_steps};
use crate::error::{MeshError, Result};
use crate::mesh::{ExecMode, MeshMachine, Tiling};
use crate::record::{Lanes, Record, Word, NONE};

/// Looks up every query among the records of `lanes`, block by block.
///
/// `dir` turns a record into a directory entry `(label, payload)`; `query`
/// gives the label a record asks for. A record that is a directory entry is
/// never also a query. `deliver` receives each query with its payload, or
/// `None` when no entry has the label. Labels and payloads must be below
/// `NONE`.
pub fn batched_lookup(
    m: &mut MeshMachine,
    t: &Tiling,
    lanes: Lanes,
    dir: impl Fn(&Record) -> Option<(Word, Word)>,
    query: impl Fn(&Record) -> Option<Word>,
    deliver: impl FnMut(&mut Record, Option<Word>),
) -> Result<()> {
    match m.exec() {
        ExecMode::Fused => fused(m, t, lanes, &dir, &query, deliver),
        ExecMode::Stepwise => stepwise(m, t, lanes, &dir, &query, deliver),
    }
}

fn fused(
    m: &mut MeshMachine,
    t: &Tiling,
    lanes: Lanes,
    dir: &impl Fn(&Record) -> Option<(Word, Word)>,
    query: &impl Fn(&Record) -> Option<Word>,
    mut deliver: impl FnMut(&mut Record, Option<Word>),
) -> Result<()> {
    let len = t.block_len();
    let mut map: HashMap<Word, Word> = HashMap::new();
    {
        let cells = m.cells_mut();
        for &start in t.starts() {
            map.clear();
            for c in &cells[start..start + len] {
                for l in lanes.iter() {
                    if let Some((k, v)) = dir(&c.slots[l]) {
                        match map.entry(k) {
                            Entry::Occupied(_) => return Err(MeshError::DuplicateDirectoryLabel(k)),
                            Entry::Vacant(e) => {
                                e.insert(v);
                            }
                        }
                    }
                }
            }
            for c in &mut cells[start..start + len] {
                for l in lanes.iter() {
                    let r = &mut c.slots[l];
                    if dir(r).is_none() {
                        if let Some(k) = query(r) {
                            let found = map.get(&k).copied();
                            deliver(r, found);
                        }
                    }
                }
            }
        }
    }
    settle(m, t, lanes, 0);
    let b = t.side();
    m.charge(2 * sort_steps(b) + scan_steps(b, ScanDir::Forward));
    Ok(())
}

fn stepwise(
    m: &mut MeshMachine,
    t: &Tiling,
    lanes: Lanes,
    dir: &impl Fn(&Record) -> Option<(Word, Word)>,
    query: &impl Fn(&Record) -> Option<Word>,
    mut deliver: impl FnMut(&mut Record, Option<Word>),
) -> Result<()> {
    set_homes(m, t, lanes);
    let key = |r: &Record| match dir(r) {
        Some((k, _)) => Some((k, 0, 0)),
        None => query(r).map(|k| (k, 1, r.home)),
    };
    mesh_sort(m, t, lanes, key)?;
    let out = segmented_scan(
        m,
        t,
        lanes,
        ScanDir::Forward,
        ScanOp::Latest,
        |r| key(r).map(|k| [k.0, 0]),
        |r, _| dir(r).map(|d| d.1),
    )?;
    if out.repeated {
        return Err(MeshError::DuplicateDirectoryLabel(duplicate_label(m, t, lanes, dir)));
    }
    super::for_each_slot(m, t, lanes, |r, w| {
        if dir(r).is_none() && query(r).is_some() {
            let found = dec_word(*w);
            deliver(r, found);
        }
        *w = NONE;
    });
    mesh_sort(m, t, lanes, |r: &Record| Some(r.home))?;
    settle(m, t, lanes, 0);
    Ok(())
}

fn duplicate_label(m: &MeshMachine, t: &Tiling, lanes: Lanes, dir: &impl Fn(&Record) -> Option<(Word, Word)>) -> Word {
    let len = t.block_len();
    for &start in t.starts() {
        let mut seen = std::collections::HashSet::new();
        for c in &m.cells()[start..start + len] {
            for l in lanes.iter() {
                if let Some((k, _)) = dir(&c.slots[l]) {
                    if !seen.insert(k) {
                        return k;
                    }
                }
            }
        }
    }
    NONE
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::testutil::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const L: Lanes = Lanes::of(&[2, 3, 4, 5]);

    fn load_instance(m: &mut MeshMachine, seed: u64, queries: usize, keys: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = m.processors();
        let mut slots: Vec<(usize, usize)> = (0..n).flat_map(|r| L.iter().map(move |l| (r, l))).collect();
        slots.shuffle(&mut rng);
        let mut it = slots.into_iter();
        let mut labels: Vec<u64> = (0..keys).collect();
        labels.shuffle(&mut rng);
        for &k in labels.iter().take(keys as usize / 2) {
            let (r, l) = it.next().unwrap();
            let mut v = Record::vertex(k);
            v.b = k * 10 + 1;
            m.load(r, l, v);
        }
        for _ in 0..queries {
            let Some((r, l)) = it.next() else { break };
            let mut q = Record::edge(rng.gen_range(0..keys), 0, 0, 0);
            q.kind = crate::record::Kind::Query;
            m.load(r, l, q);
        }
    }

    fn run(m: &mut MeshMachine, t: &Tiling) -> Result<()> {
        batched_lookup(
            m,
            t,
            L,
            |r| (r.kind == crate::record::Kind::Vertex).then_some((r.a, r.b)),
            |r| (r.kind == crate::record::Kind::Query).then_some(r.a),
            |r, found| match found {
                Some(p) => {
                    r.aux = p;
                    r.set(crate::record::flags::FOUND, true);
                }
                None => r.aux = NONE,
            },
        )
    }

    #[test]
    fn stepwise_matches_fused() {
        for side in [2usize, 4, 8] {
            for tile in [side, side / 2] {
                assert_modes_agree(side, |m| load_instance(m, side as u64, side * side, 2 * (side * side) as u64), |m| {
                    let t = m.root_tiling().refine(tile);
                    run(m, &t)
                });
            }
        }
    }

    #[test]
    fn matches_map_oracle() {
        let mut m = machine(32, ExecMode::Fused);
        load_instance(&mut m, 9, 1000, 3000);
        let before: Vec<_> = m.cells().to_vec();
        let t = m.root_tiling();
        run(&mut m, &t).unwrap();
        let dir: HashMap<u64, u64> = before
            .iter()
            .flat_map(|c| c.slots.iter())
            .filter(|r| r.kind == crate::record::Kind::Vertex)
            .map(|r| (r.a, r.b))
            .collect();
        let mut queries = 0;
        for (old, new) in before.iter().zip(m.cells()) {
            for l in L.iter() {
                let (o, n) = (old.slots[l], new.slots[l]);
                if o.kind == crate::record::Kind::Query {
                    queries += 1;
                    match dir.get(&o.a) {
                        Some(&p) => assert_eq!(n.aux, p),
                        None => assert_eq!(n.aux, NONE),
                    }
                } else {
                    assert_eq!(o, n);
                }
            }
        }
        assert_eq!(queries, 1000);
    }

    #[test]
    fn empty_queries_change_nothing() {
        let mut m = machine(4, ExecMode::Stepwise);
        m.load(3, 2, Record::vertex(4));
        let before: Vec<_> = m.cells().to_vec();
        let t = m.root_tiling();
        run(&mut m, &t).unwrap();
        assert_eq!(before, m.cells());
    }

    #[test]
    fn duplicate_labels_rejected() {
        for exec in [ExecMode::Fused, ExecMode::Stepwise] {
            let mut m = machine(4, exec);
            m.load(3, 2, Record::vertex(4));
            m.load(9, 3, Record::vertex(4));
            let t = m.root_tiling();
            assert!(matches!(run(&mut m, &t), Err(MeshError::DuplicateDirectoryLabel(4))));
        }
    }
}
