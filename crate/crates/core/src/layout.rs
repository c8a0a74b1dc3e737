//! Chutes, conveyor geometry and capacity arithmetic.
//!
//! All times are integer milliseconds. Seconds only appear at the file
//! boundary, see [`crate::scenario`].

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChuteKind {
    Spiral,
    Direct,
    Rejection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChuteSpec {
    pub id: usize,
    pub kind: ChuteKind,
    /// Parcels the chute holds at once without blocking.
    pub capacity: u32,
    /// Per-parcel processing time at nominal efficiency with one worker.
    pub process_ms: u64,
    /// Travel time from the OCR reader to the chute mouth.
    pub travel_ms: u64,
    pub cage_slots: u32,
    /// Optional per-wave processing bound.
    pub wave_cap: Option<u32>,
    /// Every parcel needs at least two handlers.
    pub two_handler: bool,
}

impl ChuteSpec {
    pub fn spiral(id: usize, capacity: u32, process_ms: u64, travel_ms: u64) -> Self {
        Self {
            id,
            kind: ChuteKind::Spiral,
            capacity,
            process_ms,
            travel_ms,
            cage_slots: 1,
            wave_cap: None,
            two_handler: false,
        }
    }

    pub fn direct(id: usize, process_ms: u64, travel_ms: u64) -> Self {
        Self {
            id,
            kind: ChuteKind::Direct,
            capacity: 1,
            process_ms,
            travel_ms,
            cage_slots: 1,
            wave_cap: None,
            two_handler: false,
        }
    }

    pub fn rejection(travel_ms: u64) -> Self {
        Self {
            id: usize::MAX,
            kind: ChuteKind::Rejection,
            capacity: u32::MAX,
            process_ms: 0,
            travel_ms,
            cage_slots: 1,
            wave_cap: None,
            two_handler: false,
        }
    }

    /// Per-parcel service time given the efficiencies of the assigned workers.
    /// `None` means the chute cannot process anything (unstaffed spiral, or a
    /// two-handler chute with fewer than two workers). Direct chutes are
    /// unstaffed and always run at `process_ms`.
    pub fn service_ms(&self, efficiencies: &[f64]) -> Option<u64> {
        match self.kind {
            ChuteKind::Direct => Some(self.process_ms),
            ChuteKind::Rejection => Some(0),
            ChuteKind::Spiral => {
                let needed = if self.two_handler { 2 } else { 1 };
                let total: f64 = efficiencies.iter().sum();
                if efficiencies.len() < needed || total <= 0.0 {
                    None
                } else {
                    Some(((self.process_ms as f64 / total).round() as u64).max(1))
                }
            }
        }
    }
}

/// The `k` sortable chutes plus the single rejection chute, the ring, and the
/// matching limits used by the planner.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub chutes: Vec<ChuteSpec>,
    pub rejection: ChuteSpec,
    pub lap_ms: u64,
    pub destinations: usize,
    /// M_i: chutes a destination may be matched to.
    pub max_chutes_per_dest: Vec<u32>,
    /// N_j: destinations a chute may serve.
    pub max_dests_per_chute: Vec<u32>,
    /// A_ij, `destinations × chutes`. `None` means unrestricted.
    pub admissible: Option<Vec<Vec<bool>>>,
    /// Extra laps a parcel may make before it is rejected.
    pub max_reattempts: u32,
    /// Parcels per roller cage; only drives cage-swap counts.
    pub cage_size: u32,
}

impl Layout {
    pub fn k(&self) -> usize {
        self.chutes.len()
    }

    pub fn n(&self) -> usize {
        self.destinations
    }

    pub fn is_admissible(&self, i: usize, j: usize) -> bool {
        self.admissible.as_ref().is_none_or(|a| a[i][j])
    }

    pub fn direct_chutes(&self) -> impl Iterator<Item = usize> + '_ {
        self.chutes
            .iter()
            .filter(|c| c.kind == ChuteKind::Direct)
            .map(|c| c.id)
    }

    pub fn spiral_chutes(&self) -> impl Iterator<Item = usize> + '_ {
        self.chutes
            .iter()
            .filter(|c| c.kind == ChuteKind::Spiral)
            .map(|c| c.id)
    }

    /// Chute ids in the order a parcel passes their mouths.
    pub fn ring_order(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.k()).collect();
        ids.sort_by_key(|&j| (self.chutes[j].travel_ms, j));
        ids
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Reports every broken layout invariant; an empty list means valid.
pub fn validate_layout(layout: &Layout) -> Vec<Violation> {
    let mut v = Vec::new();
    let k = layout.k();
    let n = layout.n();
    if k == 0 {
        v.push(Violation::new("chutes", "at least one sortable chute"));
    }
    for (j, c) in layout.chutes.iter().enumerate() {
        let f = |name: &str| format!("chutes[{j}].{name}");
        if c.id != j {
            v.push(Violation::new(f("id"), format!("must equal position {j}")));
        }
        match c.kind {
            ChuteKind::Rejection => v.push(Violation::new(
                f("kind"),
                "exactly one rejection chute per layout, declared separately",
            )),
            ChuteKind::Direct => {
                if c.cage_slots != 1 {
                    v.push(Violation::new(
                        f("cage_slots"),
                        "direct chute has exactly 1 cage",
                    ));
                }
                if c.two_handler {
                    v.push(Violation::new(
                        f("two_handler"),
                        "direct chutes are unstaffed",
                    ));
                }
            }
            ChuteKind::Spiral => {
                if c.cage_slots < 1 {
                    v.push(Violation::new(
                        f("cage_slots"),
                        "spiral chute has at least 1 cage",
                    ));
                }
            }
        }
        if c.capacity < 1 {
            v.push(Violation::new(f("capacity"), "capacity >= 1"));
        }
        if c.process_ms == 0 {
            v.push(Violation::new(f("process_time"), "processing time > 0"));
        }
        if c.travel_ms >= layout.lap_ms {
            v.push(Violation::new(f("travel_time"), "travel time < lap time"));
        }
    }
    if layout.rejection.kind != ChuteKind::Rejection {
        v.push(Violation::new(
            "rejection.kind",
            "must be a rejection chute",
        ));
    }
    if layout.rejection.travel_ms >= layout.lap_ms {
        v.push(Violation::new(
            "rejection.travel_time",
            "travel time < lap time",
        ));
    }
    if n == 0 {
        v.push(Violation::new("destinations", "at least one destination"));
    }
    if layout.max_chutes_per_dest.len() != n {
        v.push(Violation::new(
            "max_chutes_per_dest",
            format!(
                "needs {n} entries, has {}",
                layout.max_chutes_per_dest.len()
            ),
        ));
    }
    for (i, &m) in layout.max_chutes_per_dest.iter().enumerate() {
        if m < 1 {
            v.push(Violation::new(
                format!("max_chutes_per_dest[{i}]"),
                "M_i >= 1",
            ));
        }
    }
    if layout.max_dests_per_chute.len() != k {
        v.push(Violation::new(
            "max_dests_per_chute",
            format!(
                "needs {k} entries, has {}",
                layout.max_dests_per_chute.len()
            ),
        ));
    }
    for (j, &m) in layout.max_dests_per_chute.iter().enumerate() {
        if m < 1 {
            v.push(Violation::new(
                format!("max_dests_per_chute[{j}]"),
                "N_j >= 1",
            ));
        }
    }
    if let Some(a) = &layout.admissible {
        if a.len() != n || a.iter().any(|row| row.len() != k) {
            v.push(Violation::new("admissible", format!("must be {n} x {k}")));
        } else {
            for (i, row) in a.iter().enumerate() {
                if !row.iter().any(|&x| x) {
                    v.push(Violation::new(
                        format!("admissible[{i}]"),
                        "destination unmatchable: row has no admissible chute",
                    ));
                }
            }
        }
    }
    if layout.cage_size == 0 {
        v.push(Violation::new("cage_size", "cage size >= 1"));
    }
    v
}

/// ⌊T / t_j⌋: parcels one chute can process in a horizon of `horizon_ms`.
pub fn chute_shift_capacity(spec: &ChuteSpec, horizon_ms: u64) -> u64 {
    if spec.process_ms == 0 {
        return 0;
    }
    horizon_ms / spec.process_ms
}

/// Sum of per-chute capacities over the sortable chutes.
pub fn system_peak_capacity(layout: &Layout, horizon_ms: u64) -> u64 {
    layout
        .chutes
        .iter()
        .map(|c| chute_shift_capacity(c, horizon_ms))
        .sum()
}

pub fn secs_to_ms(s: f64) -> u64 {
    (s * 1000.0).round().max(0.0) as u64
}

pub fn ms_to_secs(ms: u64) -> f64 {
    ms as f64 / 1000.0
}
