//! Scenario files and the synthetic generator.
//!
//! Files are TOML with times in seconds; everything is converted to integer
//! milliseconds on load.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::demand::{DemandForecast, Wave};
use crate::error::{CoreError, Result};
use crate::labor::PenaltyShape;
use crate::layout::{
    ms_to_secs, secs_to_ms, system_peak_capacity, validate_layout, ChuteKind, ChuteSpec, Layout,
};
use crate::planner::{DirectRule, ObjectiveKind};

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerPool {
    pub count: usize,
    pub efficiency_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub layout: Layout,
    pub forecast: DemandForecast,
    pub waves: Vec<Wave>,
    pub workers: WorkerPool,
    pub objective: ObjectiveKind,
    pub direct_rule: DirectRule,
    pub penalty_shape: PenaltyShape,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    seed: u64,
    layout: LayoutFile,
    demand: DemandFile,
    #[serde(default)]
    waves: Vec<WaveFile>,
    workers: WorkersFile,
    #[serde(default)]
    planning: PlanningFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutFile {
    lap_time: f64,
    max_reattempts: u32,
    cage_size: u32,
    rejection_travel_time: f64,
    destinations: usize,
    max_chutes_per_dest: Vec<u32>,
    max_dests_per_chute: Vec<u32>,
    /// Admissible chute ids per destination; absent means unrestricted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    admissible: Option<Vec<Vec<usize>>>,
    chutes: Vec<ChuteFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChuteFile {
    kind: ChuteKind,
    capacity: u32,
    process_time: f64,
    travel_time: f64,
    #[serde(default = "one")]
    cage_slots: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    wave_cap: Option<u32>,
    #[serde(default)]
    two_handler: bool,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandFile {
    shift_length: f64,
    loads: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WaveFile {
    length: f64,
    destinations: Vec<usize>,
    arrivals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorkersFile {
    count: usize,
    efficiency_range: [f64; 2],
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanningFile {
    #[serde(default)]
    objective: ObjectiveKind,
    #[serde(default)]
    direct_rule: DirectRule,
    #[serde(default)]
    penalty: PenaltyFile,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum PenaltyFile {
    #[default]
    Linear,
    NormalizedSquare,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: ScenarioFile =
            toml::from_str(text).map_err(|e| CoreError::config(format!("scenario: {e}")))?;
        let s = Self::from_file(f)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            CoreError::Config(m) => CoreError::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_file()).expect("scenario serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    /// All layout, forecast and wave violations joined into one config error.
    pub fn validate(&self) -> Result<()> {
        let mut msgs: Vec<String> = validate_layout(&self.layout)
            .iter()
            .map(|v| v.to_string())
            .collect();
        let n = self.layout.n();
        if self.forecast.loads.len() != n {
            msgs.push(format!(
                "demand.loads: needs {n} entries, has {}",
                self.forecast.loads.len()
            ));
        }
        if self.forecast.shift_ms == 0 {
            msgs.push("demand.shift_length: must be > 0".into());
        }
        for (w, wave) in self.waves.iter().enumerate() {
            msgs.extend(wave.validate(n).iter().map(|v| format!("waves[{w}].{v}")));
        }
        let (lo, hi) = self.workers.efficiency_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            msgs.push(format!(
                "workers.efficiency_range: [{lo}, {hi}] must satisfy 0 < lo <= hi"
            ));
        }
        if msgs.is_empty() {
            Ok(())
        } else {
            Err(CoreError::config(msgs.join("; ")))
        }
    }

    fn from_file(f: ScenarioFile) -> Result<Self> {
        let l = f.layout;
        let k = l.chutes.len();
        let admissible = match l.admissible {
            None => None,
            Some(lists) => {
                let mut a = vec![vec![false; k]; lists.len()];
                for (i, list) in lists.iter().enumerate() {
                    for &j in list {
                        if j >= k {
                            return Err(CoreError::config(format!(
                                "layout.admissible[{i}]: chute {j} out of range (k = {k})"
                            )));
                        }
                        a[i][j] = true;
                    }
                }
                Some(a)
            }
        };
        let chutes = l
            .chutes
            .iter()
            .enumerate()
            .map(|(j, c)| ChuteSpec {
                id: j,
                kind: c.kind,
                capacity: c.capacity,
                process_ms: secs_to_ms(c.process_time),
                travel_ms: secs_to_ms(c.travel_time),
                cage_slots: c.cage_slots,
                wave_cap: c.wave_cap,
                two_handler: c.two_handler,
            })
            .collect();
        let layout = Layout {
            chutes,
            rejection: ChuteSpec::rejection(secs_to_ms(l.rejection_travel_time)),
            lap_ms: secs_to_ms(l.lap_time),
            destinations: l.destinations,
            max_chutes_per_dest: l.max_chutes_per_dest,
            max_dests_per_chute: l.max_dests_per_chute,
            admissible,
            max_reattempts: l.max_reattempts,
            cage_size: l.cage_size,
        };
        let mut waves = Vec::with_capacity(f.waves.len());
        for (w, wf) in f.waves.into_iter().enumerate() {
            if wf.destinations.len() != wf.arrivals.len() {
                return Err(CoreError::config(format!(
                    "waves[{w}]: {} destinations but {} arrivals",
                    wf.destinations.len(),
                    wf.arrivals.len()
                )));
            }
            let items = wf
                .destinations
                .into_iter()
                .zip(wf.arrivals.iter().map(|&t| secs_to_ms(t)))
                .collect();
            waves.push(Wave::from_arrivals(items, secs_to_ms(wf.length)));
        }
        Ok(Self {
            name: f.name,
            seed: f.seed,
            layout,
            forecast: DemandForecast {
                loads: f.demand.loads,
                shift_ms: secs_to_ms(f.demand.shift_length),
            },
            waves,
            workers: WorkerPool {
                count: f.workers.count,
                efficiency_range: (f.workers.efficiency_range[0], f.workers.efficiency_range[1]),
            },
            objective: f.planning.objective,
            direct_rule: f.planning.direct_rule,
            penalty_shape: match f.planning.penalty {
                PenaltyFile::Linear => PenaltyShape::Linear,
                PenaltyFile::NormalizedSquare => PenaltyShape::NormalizedSquare,
            },
        })
    }

    fn to_file(&self) -> ScenarioFile {
        let l = &self.layout;
        ScenarioFile {
            name: self.name.clone(),
            seed: self.seed,
            layout: LayoutFile {
                lap_time: ms_to_secs(l.lap_ms),
                max_reattempts: l.max_reattempts,
                cage_size: l.cage_size,
                rejection_travel_time: ms_to_secs(l.rejection.travel_ms),
                destinations: l.destinations,
                max_chutes_per_dest: l.max_chutes_per_dest.clone(),
                max_dests_per_chute: l.max_dests_per_chute.clone(),
                admissible: l.admissible.as_ref().map(|a| {
                    a.iter()
                        .map(|row| (0..row.len()).filter(|&j| row[j]).collect())
                        .collect()
                }),
                chutes: l
                    .chutes
                    .iter()
                    .map(|c| ChuteFile {
                        kind: c.kind,
                        capacity: c.capacity,
                        process_time: ms_to_secs(c.process_ms),
                        travel_time: ms_to_secs(c.travel_ms),
                        cage_slots: c.cage_slots,
                        wave_cap: c.wave_cap,
                        two_handler: c.two_handler,
                    })
                    .collect(),
            },
            demand: DemandFile {
                shift_length: ms_to_secs(self.forecast.shift_ms),
                loads: self.forecast.loads.clone(),
            },
            waves: self
                .waves
                .iter()
                .map(|w| WaveFile {
                    length: ms_to_secs(w.length_ms),
                    destinations: w.parcels.iter().map(|p| p.destination).collect(),
                    arrivals: w.parcels.iter().map(|p| ms_to_secs(p.arrival_ms)).collect(),
                })
                .collect(),
            workers: WorkersFile {
                count: self.workers.count,
                efficiency_range: [
                    self.workers.efficiency_range.0,
                    self.workers.efficiency_range.1,
                ],
            },
            planning: PlanningFile {
                objective: self.objective,
                direct_rule: self.direct_rule,
                penalty: match self.penalty_shape {
                    PenaltyShape::Linear => PenaltyFile::Linear,
                    PenaltyShape::NormalizedSquare => PenaltyFile::NormalizedSquare,
                },
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LayoutKind {
    #[default]
    Unrestricted,
    /// Destinations and chutes split into equal zones; a destination may only
    /// use chutes of its own zone.
    Restricted,
    /// Restricted, with the last chute of every zone made direct.
    DirectRestricted,
}

impl LayoutKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Unrestricted => "unrestricted",
            Self::Restricted => "restricted",
            Self::DirectRestricted => "direct-restricted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unrestricted" => Some(Self::Unrestricted),
            "restricted" => Some(Self::Restricted),
            "direct-restricted" | "direct+restricted" => Some(Self::DirectRestricted),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateOptions {
    pub name: String,
    pub destinations: usize,
    pub chutes: usize,
    pub load: u64,
    pub kind: LayoutKind,
    pub seed: u64,
    pub waves: usize,
    pub wave_size: usize,
    pub wave_ms: u64,
    /// Arrivals are uniform on [0, span].
    pub arrival_span_ms: u64,
    pub shift_ms: u64,
    pub max_chutes_per_dest: u32,
    pub max_dests_per_chute: u32,
    pub capacity: u32,
    pub process_ms: u64,
    /// τ̄_j = (j + 1) · spacing.
    pub travel_spacing_ms: u64,
    pub rejection_travel_ms: u64,
    pub zones: usize,
    pub direct_process_ms: u64,
    pub workers: Option<usize>,
    pub max_reattempts: u32,
    pub objective: ObjectiveKind,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            name: "generated".into(),
            destinations: 300,
            chutes: 30,
            load: 29_335,
            kind: LayoutKind::Unrestricted,
            seed: 1,
            waves: 10,
            wave_size: 2523,
            wave_ms: 3_000_000,
            arrival_span_ms: 2_400_000,
            shift_ms: 30_000_000,
            max_chutes_per_dest: 5,
            max_dests_per_chute: 15,
            capacity: 50,
            process_ms: 30_000,
            travel_spacing_ms: 2_000,
            rejection_travel_ms: 1_000,
            zones: 5,
            direct_process_ms: 2_000,
            workers: None,
            max_reattempts: 0,
            objective: ObjectiveKind::ParcelsThenMatches,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub scenario: Scenario,
    /// Set when the load exceeds the system peak capacity.
    pub warning: Option<String>,
}

/// Synthetic scenario: multinomial-uniform forecast over destinations, waves
/// drawn in proportion to the forecast with uniform arrival times.
pub fn generate(o: &GenerateOptions) -> Result<Generated> {
    let (n, k) = (o.destinations, o.chutes);
    if n == 0 || k == 0 || o.wave_ms == 0 || o.shift_ms == 0 || o.process_ms == 0 {
        return Err(CoreError::config(
            "destinations, chutes, times must be positive",
        ));
    }
    if o.arrival_span_ms > o.wave_ms {
        return Err(CoreError::config(
            "arrival span must not exceed the wave length",
        ));
    }
    let zones = match o.kind {
        LayoutKind::Unrestricted => 1,
        _ => o.zones.clamp(1, n.min(k)),
    };
    let zone_of = |x: usize, total: usize| x * zones / total;
    let mut chutes: Vec<ChuteSpec> = (0..k)
        .map(|j| {
            ChuteSpec::spiral(
                j,
                o.capacity,
                o.process_ms,
                o.travel_spacing_ms * (j as u64 + 1),
            )
        })
        .collect();
    if o.kind == LayoutKind::DirectRestricted {
        // A zone keeps at least one spiral chute for its other destinations.
        for z in 0..zones {
            let members: Vec<usize> = (0..k).filter(|&j| zone_of(j, k) == z).collect();
            if let [_, .., last] = members[..] {
                let travel = chutes[last].travel_ms;
                chutes[last] = ChuteSpec::direct(last, o.direct_process_ms, travel);
            }
        }
    }
    let max_travel = chutes
        .iter()
        .map(|c| c.travel_ms)
        .max()
        .unwrap_or(0)
        .max(o.rejection_travel_ms);
    let admissible = (o.kind != LayoutKind::Unrestricted).then(|| {
        (0..n)
            .map(|i| (0..k).map(|j| zone_of(i, n) == zone_of(j, k)).collect())
            .collect()
    });
    let spirals = chutes
        .iter()
        .filter(|c| c.kind == ChuteKind::Spiral)
        .count();
    let layout = Layout {
        chutes,
        rejection: ChuteSpec::rejection(o.rejection_travel_ms),
        lap_ms: 2 * max_travel.max(1),
        destinations: n,
        max_chutes_per_dest: vec![o.max_chutes_per_dest; n],
        max_dests_per_chute: vec![o.max_dests_per_chute; k],
        admissible,
        max_reattempts: o.max_reattempts,
        cage_size: 40,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let mut loads = vec![0u64; n];
    for _ in 0..o.load {
        loads[rng.random_range(0..n)] += 1;
    }
    let warning = (o.load > system_peak_capacity(&layout, o.shift_ms)).then(|| {
        format!(
            "load {} exceeds system capacity {}",
            o.load,
            system_peak_capacity(&layout, o.shift_ms)
        )
    });
    let weights: Vec<u64> = if loads.iter().all(|&b| b == 0) {
        vec![1; n]
    } else {
        loads.clone()
    };
    let pick = WeightedIndex::new(&weights)
        .map_err(|e| CoreError::config(format!("demand weights: {e}")))?;
    let waves = (0..o.waves)
        .map(|_| {
            let items = (0..o.wave_size)
                .map(|_| {
                    (
                        pick.sample(&mut rng),
                        rng.random_range(0..=o.arrival_span_ms),
                    )
                })
                .collect();
            Wave::from_arrivals(items, o.wave_ms)
        })
        .collect();
    let scenario = Scenario {
        name: o.name.clone(),
        seed: o.seed,
        layout,
        forecast: DemandForecast {
            loads,
            shift_ms: o.shift_ms,
        },
        waves,
        workers: WorkerPool {
            count: o.workers.unwrap_or(spirals),
            efficiency_range: (1.0, 1.0),
        },
        objective: o.objective,
        direct_rule: DirectRule::SpiralRemainder,
        penalty_shape: PenaltyShape::Linear,
    };
    scenario.validate()?;
    Ok(Generated { scenario, warning })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: LayoutKind) -> GenerateOptions {
        GenerateOptions {
            destinations: 20,
            chutes: 10,
            load: 500,
            kind,
            waves: 2,
            wave_size: 50,
            ..Default::default()
        }
    }

    #[test]
    fn round_trip_is_identity() {
        for kind in [
            LayoutKind::Unrestricted,
            LayoutKind::Restricted,
            LayoutKind::DirectRestricted,
        ] {
            let s = generate(&small(kind)).unwrap().scenario;
            let back = Scenario::from_toml(&s.to_toml()).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn default_options() {
        let g = generate(&GenerateOptions {
            waves: 1,
            ..Default::default()
        })
        .unwrap();
        assert!(g.warning.is_none());
        let s = g.scenario;
        assert_eq!(s.layout.k(), 30);
        assert_eq!(s.layout.n(), 300);
        assert_eq!(s.forecast.total(), 29_335);
        assert_eq!(system_peak_capacity(&s.layout, s.forecast.shift_ms), 30_000);
        assert_eq!(s.waves[0].len(), 2523);
        assert_eq!(s.workers.count, 30);
    }

    #[test]
    fn restricted_blocks() {
        let s = generate(&GenerateOptions {
            kind: LayoutKind::Restricted,
            waves: 0,
            ..Default::default()
        })
        .unwrap()
        .scenario;
        let l = &s.layout;
        assert!(l.is_admissible(0, 0) && l.is_admissible(59, 5));
        assert!(!l.is_admissible(59, 6) && !l.is_admissible(60, 5));
        assert!(l.is_admissible(240, 24) && l.is_admissible(299, 29));
        assert!(!l.is_admissible(240, 23));
    }

    #[test]
    fn minimal_scenario_validates() {
        let g = generate(&GenerateOptions {
            destinations: 1,
            chutes: 1,
            load: 10,
            waves: 1,
            wave_size: 3,
            ..Default::default()
        });
        assert!(g.is_ok());
    }

    #[test]
    fn over_capacity_is_a_warning() {
        let g = generate(&GenerateOptions {
            load: 31_000,
            waves: 0,
            ..Default::default()
        })
        .unwrap();
        assert!(g.warning.is_some());
    }

    #[test]
    fn unknown_field_is_named() {
        let s = generate(&small(LayoutKind::Unrestricted)).unwrap().scenario;
        let text = s
            .to_toml()
            .replace("cage_size = 40", "cage_size = 40\ncage_sise = 3");
        let err = Scenario::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("cage_sise"), "{err}");
    }

    #[test]
    fn bad_capacity_is_reported() {
        let s = generate(&small(LayoutKind::Unrestricted)).unwrap().scenario;
        let text = s.to_toml().replacen("capacity = 50", "capacity = 0", 1);
        let err = Scenario::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("chutes[0].capacity"), "{err}");
    }
}
