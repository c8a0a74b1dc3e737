//! Shift forecast and per-wave parcel streams.

use crate::layout::Violation;

#[derive(Debug, Clone, PartialEq)]
pub struct DemandForecast {
    /// B_i, projected parcels per destination over the shift.
    pub loads: Vec<u64>,
    pub shift_ms: u64,
}

impl DemandForecast {
    pub fn total(&self) -> u64 {
        self.loads.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parcel {
    pub id: usize,
    pub destination: usize,
    /// Time the parcel crosses the OCR reader.
    pub arrival_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wave {
    pub parcels: Vec<Parcel>,
    pub length_ms: u64,
}

impl Wave {
    pub fn len(&self) -> usize {
        self.parcels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parcels.is_empty()
    }

    /// Builds a wave from `(destination, arrival)` pairs, sorting by arrival
    /// (stable, so equal times keep their order) and numbering from 0.
    pub fn from_arrivals(mut items: Vec<(usize, u64)>, length_ms: u64) -> Self {
        items.sort_by_key(|&(_, t)| t);
        Self {
            parcels: items
                .into_iter()
                .enumerate()
                .map(|(id, (destination, arrival_ms))| Parcel {
                    id,
                    destination,
                    arrival_ms,
                })
                .collect(),
            length_ms,
        }
    }

    pub fn validate(&self, destinations: usize) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut prev = 0;
        for (m, p) in self.parcels.iter().enumerate() {
            if p.id != m {
                v.push(violation(m, "id", format!("must equal position {m}")));
            }
            if p.destination >= destinations {
                v.push(violation(
                    m,
                    "destination",
                    format!("must be < {destinations}"),
                ));
            }
            if p.arrival_ms < prev {
                v.push(violation(m, "arrival", "arrivals must be non-decreasing"));
            }
            if p.arrival_ms > self.length_ms {
                v.push(violation(m, "arrival", "arrival must lie within the wave"));
            }
            prev = p.arrival_ms;
        }
        v
    }
}

fn violation(m: usize, field: &str, rule: impl Into<String>) -> Violation {
    Violation {
        field: format!("parcels[{m}].{field}"),
        rule: rule.into(),
    }
}
