//! The fixed-width record every processor slot holds.
//!
//! A [`Record`] is eight words. Its fields are generic; each [`Kind`] gives
//! them a meaning:
//!
//! | kind       | `a`        | `b`          | `ord`                 | `idx`      | `aux`             | `aux2`      |
//! |------------|------------|--------------|-----------------------|------------|-------------------|-------------|
//! | `Edge`     | endpoint   | endpoint     | rank in the edge order| input index| weight (at load)  | scratch     |
//! | `SelfLoop` | vertex     | vertex       | –                     | –          | –                 | –           |
//! | `Vertex`   | label `v`  | pointer      | –                     | –          | smallest neighbor | root label  |
//! | `Query`    | label      | –            | –                     | –          | delivered payload | –           |
//!
//! `home` is scratch used to put records back where they came from after a
//! co-sort.

use std::fmt;

use serde::{Deserialize, Serialize};

/// One machine word.
pub type Word = u64;

/// Sentinel for "no value". Real labels and weights are strictly smaller.
pub const NONE: Word = Word::MAX;

/// Words occupied by one non-null record.
pub const RECORD_WORDS: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Kind {
    #[default]
    Null = 0,
    Edge = 1,
    SelfLoop = 2,
    Vertex = 3,
    Query = 4,
}

impl Kind {
    fn from_word(w: Word) -> Kind {
        match w & 0xff {
            1 => Kind::Edge,
            2 => Kind::SelfLoop,
            3 => Kind::Vertex,
            4 => Kind::Query,
            _ => Kind::Null,
        }
    }
}

/// Flag bits carried in the record's tag word.
pub mod flags {
    /// Edge chosen as some vertex's minimum this round.
    pub const SELECTED: u16 = 1 << 0;
    /// Half-edge winning its endpoint's segmented minimum.
    pub const WIN: u16 = 1 << 1;
    /// Edge belongs to the spanning forest of the current call's input.
    pub const MSF: u16 = 1 << 2;
    /// Query answered by a directory entry.
    pub const FOUND: u16 = 1 << 3;
    /// Temporary role markers used inside a lookup.
    pub const DIR: u16 = 1 << 4;
    pub const QUERY: u16 = 1 << 5;
    /// Vertex with no tree neighbors; its label is final.
    pub const FINISHED: u16 = 1 << 6;
    /// Some other vertex points at this one.
    pub const HAS_IN: u16 = 1 << 7;
    /// Swapped half-edge copy of an edge record.
    pub const COPY: u16 = 1 << 8;
    /// Marker record used when counting in-pointers.
    pub const MARKER: u16 = 1 << 9;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Record {
    pub kind: Kind,
    pub flags: u16,
    pub a: Word,
    pub b: Word,
    pub ord: Word,
    pub idx: Word,
    pub aux: Word,
    pub aux2: Word,
    pub home: Word,
}

impl Record {
    pub const NULL: Record = Record {
        kind: Kind::Null,
        flags: 0,
        a: 0,
        b: 0,
        ord: 0,
        idx: 0,
        aux: 0,
        aux2: 0,
        home: 0,
    };

    pub fn edge(u: Word, v: Word, w: Word, idx: Word) -> Record {
        Record { kind: Kind::Edge, a: u, b: v, aux: w, idx, ..Record::NULL }
    }

    pub fn self_loop(v: Word) -> Record {
        Record { kind: Kind::SelfLoop, a: v, b: v, ..Record::NULL }
    }

    pub fn vertex(v: Word) -> Record {
        Record { kind: Kind::Vertex, a: v, b: v, aux: NONE, aux2: v, ..Record::NULL }
    }

    #[inline]
    pub fn is_null(&self) -> bool {
        self.kind == Kind::Null
    }

    #[inline]
    pub fn has(&self, f: u16) -> bool {
        self.flags & f != 0
    }

    #[inline]
    pub fn set(&mut self, f: u16, on: bool) {
        if on {
            self.flags |= f;
        } else {
            self.flags &= !f;
        }
    }

    /// Turns the slot into a null but keeps `home`, so a pending restore
    /// still knows where this slot belongs.
    #[inline]
    pub fn vacate(&mut self) {
        let home = self.home;
        *self = Record::NULL;
        self.home = home;
    }

    // vertex view
    #[inline]
    pub fn v(&self) -> Word {
        self.a
    }
    #[inline]
    pub fn ptr(&self) -> Word {
        self.b
    }
    #[inline]
    pub fn nbr(&self) -> Word {
        self.aux
    }
    #[inline]
    pub fn root(&self) -> Word {
        self.aux2
    }

    pub fn to_words(&self) -> [Word; RECORD_WORDS] {
        let tag = self.kind as Word | (Word::from(self.flags) << 8);
        [tag, self.a, self.b, self.ord, self.idx, self.aux, self.aux2, self.home]
    }

    pub fn from_words(w: &[Word]) -> Record {
        Record {
            kind: Kind::from_word(w[0]),
            flags: (w[0] >> 8) as u16,
            a: w[1],
            b: w[2],
            ord: w[3],
            idx: w[4],
            aux: w[5],
            aux2: w[6],
            home: w[7],
        }
    }
}

/// A weighted edge (or self-loop) with provenance back to its input edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub a: Word,
    pub b: Word,
    pub w: Word,
    /// Canonical origin: `(min(u, v), max(u, v), input index)`.
    pub origin: (Word, Word, Word),
    pub kind: EdgeKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    Edge,
    SelfLoop,
    Null,
}

/// A vertex's pointer state during tree labeling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub v: Word,
    pub ptr: Word,
    pub finished: bool,
    pub component: Word,
}

impl From<&Record> for VertexRecord {
    fn from(r: &Record) -> Self {
        VertexRecord { v: r.v(), ptr: r.ptr(), finished: r.has(flags::FINISHED), component: r.root() }
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            Kind::Null => write!(f, "-"),
            Kind::Edge => write!(f, "E({},{};#{})", self.a, self.b, self.idx),
            Kind::SelfLoop => write!(f, "L({})", self.a),
            Kind::Vertex => write!(f, "V({}->{})", self.a, self.b),
            Kind::Query => write!(f, "Q({})", self.a),
        }
    }
}

/// A set of slot indices within a processor, iterated in ascending order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Lanes(pub u8);

impl Lanes {
    pub const fn of(lanes: &[usize]) -> Lanes {
        let mut m = 0u8;
        let mut i = 0;
        while i < lanes.len() {
            m |= 1 << lanes[i];
            i += 1;
        }
        Lanes(m)
    }

    pub const fn union(self, other: Lanes) -> Lanes {
        Lanes(self.0 | other.0)
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn contains(self, lane: usize) -> bool {
        self.0 & (1 << lane) != 0
    }

    pub const fn disjoint(self, other: Lanes) -> bool {
        self.0 & other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> + Clone {
        (0..8).filter(move |&l| self.contains(l))
    }

    /// Position of `lane` among this set's lanes.
    pub fn index_of(self, lane: usize) -> Option<usize> {
        self.contains(lane).then(|| (self.0 & ((1u8 << lane) - 1)).count_ones() as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn words_round_trip(a in any::<u64>(), b in any::<u64>(), ord in any::<u64>(), f in any::<u16>(), k in 0u8..5) {
            let kind = Kind::from_word(Word::from(k));
            let r = Record { kind, flags: f, a, b, ord, idx: a ^ b, aux: 7, aux2: 9, home: ord / 3 };
            prop_assert_eq!(Record::from_words(&r.to_words()), r);
        }
    }

    #[test]
    fn lanes_index() {
        let l = Lanes::of(&[1, 3, 4]);
        assert_eq!(l.len(), 3);
        assert_eq!(l.iter().collect::<Vec<_>>(), vec![1, 3, 4]);
        assert_eq!(l.index_of(3), Some(1));
        assert_eq!(l.index_of(2), None);
    }
}
