//! Measurements collected while the graph algorithms run.
//!
//! Everything here is read off the machine by the host between steps; none
//! of it feeds back into the computation.

use serde::Serialize;

use crate::record::Word;

/// Live-vertex counts around one coarsening round or one labeling pass, for
/// one block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct HalvingEvent {
    pub block_side: usize,
    pub block: usize,
    pub before: usize,
    pub after: usize,
}

impl HalvingEvent {
    pub fn holds(&self) -> bool {
        self.after <= self.before / 2
    }
}

/// Live vertices of one block before its coarsening rounds and after the
/// last of them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RoundsSummary {
    pub block_side: usize,
    pub block: usize,
    pub rounds: usize,
    pub initial: usize,
    pub remaining: usize,
}

/// One packing check performed ahead of a route into a submesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RouteEvent {
    pub block_side: usize,
    pub target_side: usize,
    pub block: usize,
    pub count: usize,
    pub capacity: usize,
}

/// Child-to-parent label entries recorded by one labeling pass.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ContractionMap {
    pub level: usize,
    pub entries: Vec<(Word, Word)>,
}

impl ContractionMap {
    /// Text form: one `level child parent` line per entry.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (c, p) in &self.entries {
            out.push_str(&format!("{} {} {}\n", self.level, c, p));
        }
        out
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Trace {
    pub coarsen_rounds: Vec<HalvingEvent>,
    pub rounds_summaries: Vec<RoundsSummary>,
    pub label_passes: Vec<HalvingEvent>,
    pub routes: Vec<RouteEvent>,
    /// Filled only when contraction capture is enabled on the machine.
    pub contraction: Vec<ContractionMap>,
    pub capture_contraction: bool,
}

impl Trace {
    pub fn halving_violations(&self) -> usize {
        self.coarsen_rounds.iter().filter(|e| !e.holds()).count()
    }

    pub fn subtree_violations(&self) -> usize {
        self.label_passes.iter().filter(|e| !e.holds()).count()
    }

    pub fn packing_violations(&self) -> usize {
        self.routes.iter().filter(|e| e.count > e.capacity).count()
    }
}
