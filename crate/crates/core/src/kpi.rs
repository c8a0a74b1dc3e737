//! Run KPIs and their CSV rendering.

use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KpiReport {
    pub parcels: u64,
    /// Parcels that entered a sortable chute.
    pub processed: u64,
    /// Parcels that made at least one extra lap before leaving the ring.
    pub recirculated: u64,
    pub rejected: u64,
    pub blockages: u64,
    /// Extra laps summed over all parcels.
    pub laps: u64,
    pub in_system: u64,
    /// Sum over parcels of (chute or rejection entry − ring entry).
    pub sort_time_ms: u64,
    pub elapsed_ms: u64,
    pub cage_swaps: u64,
}

impl KpiReport {
    /// Mean sorting time in minutes over parcels that left the ring.
    pub fn st_min(&self) -> f64 {
        let done = self.processed + self.rejected;
        if done == 0 {
            return 0.0;
        }
        self.sort_time_ms as f64 / done as f64 / 60_000.0
    }

    pub fn pph(&self) -> f64 {
        if self.elapsed_ms == 0 {
            return 0.0;
        }
        self.processed as f64 * 3_600_000.0 / self.elapsed_ms as f64
    }

    /// Sums counts over consecutive, independently simulated waves.
    pub fn merge(&mut self, o: &KpiReport) {
        self.parcels += o.parcels;
        self.processed += o.processed;
        self.recirculated += o.recirculated;
        self.rejected += o.rejected;
        self.blockages += o.blockages;
        self.laps += o.laps;
        self.in_system += o.in_system;
        self.sort_time_ms += o.sort_time_ms;
        self.elapsed_ms += o.elapsed_ms;
        self.cage_swaps += o.cage_swaps;
    }

    pub fn is_conserved(&self) -> bool {
        self.parcels == self.processed + self.rejected + self.in_system
    }

    /// Element-wise worst case: max of the failure counts and sorting time.
    pub fn worst(a: &KpiReport, b: &KpiReport) -> KpiReport {
        let mut w = if a.st_min() >= b.st_min() { *a } else { *b };
        w.recirculated = a.recirculated.max(b.recirculated);
        w.rejected = a.rejected.max(b.rejected);
        w.blockages = a.blockages.max(b.blockages);
        w.laps = a.laps.max(b.laps);
        w
    }
}

pub const KPI_HEADER: &str = "algo,scenario,cap_bar,Rc,Rj,St_min,pph,blockages";

#[derive(Debug, Clone, PartialEq)]
pub struct KpiRow {
    pub algo: String,
    pub scenario: String,
    /// Empty for policies without a window cap.
    pub cap_bar: Option<u32>,
    pub kpis: KpiReport,
}

impl KpiRow {
    pub fn to_csv_line(&self) -> String {
        let k = &self.kpis;
        format!(
            "{},{},{},{},{},{:.4},{:.1},{}",
            self.algo,
            self.scenario,
            self.cap_bar.map(|c| c.to_string()).unwrap_or_default(),
            k.recirculated,
            k.rejected,
            k.st_min(),
            k.pph(),
            k.blockages
        )
    }
}

pub fn kpi_csv(rows: &[KpiRow]) -> String {
    let mut s = String::from(KPI_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.to_csv_line());
    }
    s
}
