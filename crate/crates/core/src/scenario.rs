//! Monte Carlo experiment harness: seeded runs, scenario presets A–E,
//! federation-vs-baseline aggregation and CSV emission.
//!
//! Every run is reproducible from `(master_seed, run_index)`: the pair is
//! mixed into a run seed, which in turn derives independent sub-seeds for
//! constellation geometry, the evaluation epoch, task generation and the
//! task-ownership draw. The two policies of one run therefore see exactly
//! the same sky and the same workload.

use crate::allocator::{
    allocate, allocate_no_federation, uniform_owner_draw, AssignmentEntry, OwnedTask,
    VisibilitySnapshot,
};
use crate::catalog::{
    build_constellation, generate_tasks, CatalogError, Constellation, Homogeneity, SensingTask,
    SensingTypeId, TypeMix, SENSING_TYPE_COUNT,
};
use crate::federation::{Coalition, FederationGame, GameConfig, GameError, Player};
use crate::orbit::{orbital_period, remaining_visibility, GroundStation, OrbitError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScenarioError {
    #[error("{0}")]
    Config(String),
    #[error("no results to emit")]
    EmptyResults,
    #[error("configuration parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Which allocation policies a run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Federation,
    NoFederation,
    Both,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Policy::Federation => "federation",
            Policy::NoFederation => "no_federation",
            Policy::Both => "both",
        };
        f.write_str(name)
    }
}

impl FromStr for Policy {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "federation" => Ok(Policy::Federation),
            "no_federation" => Ok(Policy::NoFederation),
            "both" => Ok(Policy::Both),
            other => Err(ScenarioError::Config(format!(
                "unknown policy {other:?} (expected federation, no_federation or both)"
            ))),
        }
    }
}

/// Full description of one simulated configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub constellation_count: u32,
    pub sats_per_constellation: u32,
    pub altitude_km: f64,
    pub task_load: u32,
    pub type_mix: TypeMix,
    pub homogeneity: Homogeneity,
    pub runs: u32,
    pub master_seed: u64,
    /// Utility/cost weight α of the federation game.
    pub compromise_factor: f64,
    pub gs: GroundStation,
    pub policy: Policy,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            constellation_count: 20,
            sats_per_constellation: 40,
            altitude_km: 500.0,
            task_load: 200,
            type_mix: TypeMix::equal(),
            homogeneity: Homogeneity::Homogeneous,
            runs: 500,
            master_seed: 42,
            compromise_factor: 0.5,
            gs: GroundStation {
                latitude_deg: 0.0,
                longitude_deg: 0.0,
                min_elevation_deg: 0.0,
            },
            policy: Policy::Both,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let check = |name: &str, value: f64, lo: f64, hi: f64| {
            if (lo..=hi).contains(&value) {
                Ok(())
            } else {
                Err(ScenarioError::Config(format!(
                    "{name} = {value} outside [{lo}, {hi}]"
                )))
            }
        };
        check(
            "constellation_count",
            f64::from(self.constellation_count),
            5.0,
            20.0,
        )?;
        check(
            "sats_per_constellation",
            f64::from(self.sats_per_constellation),
            10.0,
            60.0,
        )?;
        check("altitude_km", self.altitude_km, 500.0, 1000.0)?;
        // Zero is the explicit empty-workload case; anything else follows
        // the standard range.
        if self.task_load != 0 {
            check("task_load", f64::from(self.task_load), 50.0, 500.0)?;
        }
        if self.runs == 0 {
            return Err(ScenarioError::Config("runs must be at least 1".into()));
        }
        check("compromise_factor", self.compromise_factor, 0.0, 1.0)?;
        // Re-run the constructor checks on deserialized values.
        TypeMix::new(*self.type_mix.fractions())?;
        GroundStation::new(
            self.gs.latitude_deg,
            self.gs.longitude_deg,
            self.gs.min_elevation_deg,
        )?;
        Ok(())
    }
}

/// Parse the contents of a TOML configuration file whose keys mirror
/// [`ScenarioConfig`] field names; missing keys take the defaults.
pub fn parse_config_file(contents: &str) -> Result<ScenarioConfig, ScenarioError> {
    let cfg: ScenarioConfig =
        toml::from_str(contents).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Success metrics of one policy in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyMetrics {
    pub requested: u32,
    pub completed: u32,
    /// Overall completion percentage (100 for an empty workload).
    pub success_pct: f64,
    /// Completion percentage per sensing type (100 where none requested).
    pub per_type_success_pct: [f64; SENSING_TYPE_COUNT],
}

/// Everything observed in one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_index: u32,
    /// Run seed derived from (master_seed, run_index).
    pub seed: u64,
    /// Visible satellites per constellation at the evaluation epoch.
    pub avg_sats_visible: f64,
    /// True when the run had no tasks (success reported as 100 by
    /// convention).
    pub empty_workload: bool,
    pub federation: Option<PolicyMetrics>,
    pub no_federation: Option<PolicyMetrics>,
    /// Sizes of the coalitions the federation policy formed.
    pub coalition_sizes: Vec<usize>,
}

/// Mean/std/min/max of one policy's success over a batch of runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyStats {
    pub mean_success_pct: f64,
    pub std_success_pct: f64,
    pub min_success_pct: f64,
    pub max_success_pct: f64,
}

/// Aggregated outcome of all runs at one sweep value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// The swept parameter's value at this point.
    pub value: f64,
    pub runs: u32,
    pub master_seed: u64,
    pub federation: Option<PolicyStats>,
    pub no_federation: Option<PolicyStats>,
    pub mean_sats_visible: f64,
}

/// Numeric [`ScenarioConfig`] fields a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    ConstellationCount,
    SatsPerConstellation,
    AltitudeKm,
    TaskLoad,
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SweepParam::ConstellationCount => "constellation_count",
            SweepParam::SatsPerConstellation => "sats_per_constellation",
            SweepParam::AltitudeKm => "altitude_km",
            SweepParam::TaskLoad => "task_load",
        };
        f.write_str(name)
    }
}

impl FromStr for SweepParam {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constellation_count" => Ok(SweepParam::ConstellationCount),
            "sats_per_constellation" => Ok(SweepParam::SatsPerConstellation),
            "altitude_km" => Ok(SweepParam::AltitudeKm),
            "task_load" => Ok(SweepParam::TaskLoad),
            other => Err(ScenarioError::Config(format!(
                "unknown sweep parameter {other:?}"
            ))),
        }
    }
}

impl SweepParam {
    fn apply(self, cfg: &mut ScenarioConfig, value: f64) -> Result<(), ScenarioError> {
        let as_count = |value: f64| -> Result<u32, ScenarioError> {
            if value.fract() != 0.0 || !(0.0..=u32::MAX as f64).contains(&value) {
                return Err(ScenarioError::Config(format!(
                    "sweep value {value} is not a non-negative integer"
                )));
            }
            Ok(value as u32)
        };
        match self {
            SweepParam::ConstellationCount => cfg.constellation_count = as_count(value)?,
            SweepParam::SatsPerConstellation => cfg.sats_per_constellation = as_count(value)?,
            SweepParam::AltitudeKm => cfg.altitude_km = value,
            SweepParam::TaskLoad => cfg.task_load = as_count(value)?,
        }
        Ok(())
    }
}

/// One preset configuration point, labeled for CSV grouping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetPoint {
    /// Row label, e.g. `"A-60-homogeneous"` or `"B"`.
    pub scenario: String,
    /// Name of the varied parameter, e.g. `"altitude_km"` or `"mix"`.
    pub swept_param: String,
    /// Value of the varied parameter at this point.
    pub swept_value: f64,
    pub config: ScenarioConfig,
}

/// A batch of sweep results sharing one scenario label, ready for CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvGroup {
    pub scenario: String,
    pub swept_param: String,
    pub results: Vec<SweepResult>,
}

/// splitmix64-style finalizer combining two words into a well-mixed seed.
fn mix64(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn build_run_constellations(
    cfg: &ScenarioConfig,
    geometry_seed: u64,
) -> Result<Vec<Constellation>, ScenarioError> {
    let mut rng = ChaCha8Rng::seed_from_u64(geometry_seed);
    (1..=cfg.constellation_count)
        .map(|id| {
            let raan_deg = rng.gen::<f64>() * 360.0;
            let phase_offset_deg = rng.gen::<f64>() * 360.0;
            let type_assignment = match cfg.homogeneity {
                // Constellations cycle through the four types so every type
                // is owned by someone.
                Homogeneity::Homogeneous => {
                    Some((1 + ((id - 1) % SENSING_TYPE_COUNT as u32)) as SensingTypeId)
                }
                Homogeneity::Heterogeneous => None,
            };
            let mut c = build_constellation(
                id,
                &format!("tenant-{id}"),
                cfg.sats_per_constellation,
                cfg.altitude_km,
                cfg.homogeneity,
                type_assignment,
                0.0,
                raan_deg,
            )?;
            c.offset_phases(phase_offset_deg);
            Ok(c)
        })
        .collect()
}

/// Capture which satellites the ground station sees at `t_s` and for how
/// much longer.
pub fn snapshot_at(
    constellations: &[Constellation],
    gs: &GroundStation,
    t_s: f64,
) -> VisibilitySnapshot {
    let mut snapshot = VisibilitySnapshot::new(t_s);
    for c in constellations {
        for sat in &c.satellites {
            let remaining_s = remaining_visibility(gs, &sat.elements, t_s);
            if remaining_s > 0.0 {
                snapshot.insert(sat.key(), remaining_s, sat.payload.clone());
            }
        }
    }
    snapshot
}

fn metrics_from_entries<'e>(entries: impl Iterator<Item = &'e AssignmentEntry>) -> PolicyMetrics {
    let mut requested_by_type = [0u32; SENSING_TYPE_COUNT];
    let mut completed_by_type = [0u32; SENSING_TYPE_COUNT];
    for entry in entries {
        let idx = usize::from(entry.type_id.saturating_sub(1)).min(SENSING_TYPE_COUNT - 1);
        requested_by_type[idx] += 1;
        if entry.sat.is_some() {
            completed_by_type[idx] += 1;
        }
    }
    let requested: u32 = requested_by_type.iter().sum();
    let completed: u32 = completed_by_type.iter().sum();
    let pct = |done: u32, asked: u32| {
        if asked == 0 {
            100.0
        } else {
            100.0 * f64::from(done) / f64::from(asked)
        }
    };
    let mut per_type_success_pct = [0.0; SENSING_TYPE_COUNT];
    for (i, slot) in per_type_success_pct.iter_mut().enumerate() {
        *slot = pct(completed_by_type[i], requested_by_type[i]);
    }
    PolicyMetrics {
        requested,
        completed,
        success_pct: pct(completed, requested),
        per_type_success_pct,
    }
}

/// Execute one seeded run: build the sky, draw the workload, and evaluate
/// the configured policies on identical inputs.
pub fn run_once(cfg: &ScenarioConfig, run_index: u32) -> Result<RunResult, ScenarioError> {
    cfg.validate()?;
    let run_seed = mix64(cfg.master_seed, u64::from(run_index));
    let constellations = build_run_constellations(cfg, mix64(run_seed, 1))?;

    let period_s = orbital_period(cfg.altitude_km)?;
    let mut epoch_rng = ChaCha8Rng::seed_from_u64(mix64(run_seed, 2));
    let epoch_s = epoch_rng.gen::<f64>() * period_s;

    let snapshot = snapshot_at(&constellations, &cfg.gs, epoch_s);
    let tasks = generate_tasks(cfg.task_load, &cfg.type_mix, mix64(run_seed, 3));
    let assignment_seed = mix64(run_seed, 4);

    let refs: Vec<&Constellation> = constellations.iter().collect();
    let mut result = RunResult {
        run_index,
        seed: run_seed,
        avg_sats_visible: snapshot.visible_count() as f64 / f64::from(cfg.constellation_count),
        empty_workload: tasks.is_empty(),
        federation: None,
        no_federation: None,
        coalition_sizes: Vec::new(),
    };

    if cfg.policy != Policy::NoFederation {
        // The ownership draw defines each player's edge-assigned workload.
        let owners = uniform_owner_draw(tasks.len(), refs.len(), assignment_seed);
        let mut buckets: Vec<Vec<SensingTask>> = vec![Vec::new(); refs.len()];
        for (task, &owner_idx) in tasks.iter().zip(&owners) {
            buckets[owner_idx].push(task.clone());
        }
        let players: Vec<Player> = refs
            .iter()
            .zip(buckets)
            .map(|(c, assigned_tasks)| Player {
                constellation_id: c.id,
                assigned_tasks,
                constellation: c,
            })
            .collect();
        let game_cfg = GameConfig {
            compromise_factor: cfg.compromise_factor,
            ..GameConfig::default()
        };
        let game = FederationGame::new(players, &snapshot, game_cfg)?;
        let partition = game.form_partition();
        result.coalition_sizes = partition.coalitions().iter().map(Coalition::len).collect();

        let mut entries: Vec<AssignmentEntry> = Vec::with_capacity(tasks.len());
        for coalition in partition.coalitions() {
            let member_players: Vec<&Player> = game
                .players()
                .iter()
                .filter(|p| coalition.contains(p.constellation_id))
                .collect();
            let pooled: Vec<OwnedTask> = member_players
                .iter()
                .flat_map(|p| {
                    p.assigned_tasks.iter().map(|task| OwnedTask {
                        owner: p.constellation_id,
                        task: task.clone(),
                    })
                })
                .collect();
            let members: Vec<&Constellation> =
                member_players.iter().map(|p| p.constellation).collect();
            let outcome = allocate(&pooled, &members, &snapshot);
            entries.extend(outcome.assignment.entries);
        }
        result.federation = Some(metrics_from_entries(entries.iter()));
    }

    if cfg.policy != Policy::Federation {
        // Same seed as the ownership draw above, so both policies dispatch
        // the identical task-to-constellation mapping.
        let outcome = allocate_no_federation(&tasks, &refs, &snapshot, assignment_seed);
        result.no_federation = Some(metrics_from_entries(outcome.assignment.entries.iter()));
    }

    Ok(result)
}

#[derive(Default)]
struct StatAcc {
    n: u32,
    sum: f64,
    sum_sq: f64,
    min: f64,
    max: f64,
}

impl StatAcc {
    fn push(&mut self, x: f64) {
        if self.n == 0 {
            self.min = x;
            self.max = x;
        } else {
            self.min = self.min.min(x);
            self.max = self.max.max(x);
        }
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / f64::from(self.n)
        }
    }

    fn stats(&self) -> Option<PolicyStats> {
        if self.n == 0 {
            return None;
        }
        let mean = self.mean();
        // Population variance; the guard absorbs negative rounding dust.
        let var = (self.sum_sq / f64::from(self.n) - mean * mean).max(0.0);
        Some(PolicyStats {
            mean_success_pct: mean,
            std_success_pct: var.sqrt(),
            min_success_pct: self.min,
            max_success_pct: self.max,
        })
    }
}

/// Run `cfg.runs` seeded runs and fold them into one sweep point labeled
/// with `swept_value`.
pub fn aggregate_runs(cfg: &ScenarioConfig, swept_value: f64) -> Result<SweepResult, ScenarioError> {
    cfg.validate()?;
    let mut federation = StatAcc::default();
    let mut no_federation = StatAcc::default();
    let mut visible = StatAcc::default();
    for run_index in 0..cfg.runs {
        let run = run_once(cfg, run_index)?;
        if let Some(m) = &run.federation {
            federation.push(m.success_pct);
        }
        if let Some(m) = &run.no_federation {
            no_federation.push(m.success_pct);
        }
        visible.push(run.avg_sats_visible);
    }
    Ok(SweepResult {
        value: swept_value,
        runs: cfg.runs,
        master_seed: cfg.master_seed,
        federation: federation.stats(),
        no_federation: no_federation.stats(),
        mean_sats_visible: visible.mean(),
    })
}

/// Sweep one numeric parameter over `values`, aggregating `cfg.runs` runs
/// at each point.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<SweepResult>, ScenarioError> {
    values
        .iter()
        .map(|&value| {
            let mut point_cfg = cfg.clone();
            param.apply(&mut point_cfg, value)?;
            aggregate_runs(&point_cfg, value)
        })
        .collect()
}

/// The preset experiment grids.
///
/// * A — altitude sweep 500–1000 km at 20 constellations and 100 tasks,
///   for 20 and 60 satellites per constellation in both homogeneity modes;
/// * B — constellation-count sweep {5, 10, 15, 20} at 40 sats, 200 tasks;
/// * C — satellites-per-constellation sweep 10–60 at 20 constellations;
/// * D — task-load sweep 50–300 at 5 constellations of 40 satellites;
/// * E — three task-type mixes at 20 constellations, 40 sats, 200 tasks.
pub fn scenario_presets(name: &str) -> Result<Vec<PresetPoint>, ScenarioError> {
    let base = ScenarioConfig::default();
    let mut points = Vec::new();
    match name.to_ascii_uppercase().as_str() {
        "A" => {
            for &sats in &[20u32, 60] {
                for homogeneity in [Homogeneity::Homogeneous, Homogeneity::Heterogeneous] {
                    let label = format!(
                        "A-{sats}-{}",
                        match homogeneity {
                            Homogeneity::Homogeneous => "homogeneous",
                            Homogeneity::Heterogeneous => "heterogeneous",
                        }
                    );
                    for altitude in (500..=1000).step_by(100) {
                        points.push(PresetPoint {
                            scenario: label.clone(),
                            swept_param: "altitude_km".into(),
                            swept_value: f64::from(altitude),
                            config: ScenarioConfig {
                                constellation_count: 20,
                                sats_per_constellation: sats,
                                altitude_km: f64::from(altitude),
                                task_load: 100,
                                homogeneity,
                                ..base.clone()
                            },
                        });
                    }
                }
            }
        }
        "B" => {
            for count in [5u32, 10, 15, 20] {
                points.push(PresetPoint {
                    scenario: "B".into(),
                    swept_param: "constellation_count".into(),
                    swept_value: f64::from(count),
                    config: ScenarioConfig {
                        constellation_count: count,
                        sats_per_constellation: 40,
                        task_load: 200,
                        ..base.clone()
                    },
                });
            }
        }
        "C" => {
            for sats in (10..=60).step_by(10) {
                points.push(PresetPoint {
                    scenario: "C".into(),
                    swept_param: "sats_per_constellation".into(),
                    swept_value: f64::from(sats),
                    config: ScenarioConfig {
                        constellation_count: 20,
                        sats_per_constellation: sats,
                        task_load: 100,
                        ..base.clone()
                    },
                });
            }
        }
        "D" => {
            for load in (50..=300).step_by(50) {
                points.push(PresetPoint {
                    scenario: "D".into(),
                    swept_param: "task_load".into(),
                    swept_value: f64::from(load),
                    config: ScenarioConfig {
                        constellation_count: 5,
                        sats_per_constellation: 40,
                        task_load: load,
                        ..base.clone()
                    },
                });
            }
        }
        "E" => {
            let mixes = [
                [0.25, 0.25, 0.25, 0.25],
                [0.05, 0.25, 0.25, 0.45],
                [0.45, 0.25, 0.25, 0.05],
            ];
            for (i, fractions) in mixes.iter().enumerate() {
                points.push(PresetPoint {
                    scenario: "E".into(),
                    swept_param: "mix".into(),
                    swept_value: (i + 1) as f64,
                    config: ScenarioConfig {
                        constellation_count: 20,
                        sats_per_constellation: 40,
                        task_load: 200,
                        type_mix: TypeMix::new(*fractions).expect("preset mixes are valid"),
                        ..base.clone()
                    },
                });
            }
        }
        other => {
            return Err(ScenarioError::Config(format!(
                "unknown scenario {other:?} (expected A, B, C, D or E)"
            )))
        }
    }
    Ok(points)
}

/// Execute preset points in order and group the outcomes by scenario label
/// for CSV emission.
pub fn run_preset_points(points: &[PresetPoint]) -> Result<Vec<CsvGroup>, ScenarioError> {
    let mut groups: Vec<CsvGroup> = Vec::new();
    for point in points {
        let result = aggregate_runs(&point.config, point.swept_value)?;
        match groups.last_mut() {
            Some(g) if g.scenario == point.scenario && g.swept_param == point.swept_param => {
                g.results.push(result);
            }
            _ => groups.push(CsvGroup {
                scenario: point.scenario.clone(),
                swept_param: point.swept_param.clone(),
                results: vec![result],
            }),
        }
    }
    Ok(groups)
}

/// Render sweep results as CSV: a header plus one row per (point, policy),
/// floats with four decimal places.
pub fn emit_csv(groups: &[CsvGroup]) -> Result<String, ScenarioError> {
    let mut out = String::from(
        "scenario,swept_param,value,policy,mean_success_pct,std_success_pct,mean_sats_visible,runs,master_seed\n",
    );
    let mut rows = 0usize;
    for group in groups {
        for result in &group.results {
            for (policy, stats) in [
                ("federation", &result.federation),
                ("no_federation", &result.no_federation),
            ] {
                let Some(stats) = stats else { continue };
                writeln!(
                    out,
                    "{},{},{:.4},{},{:.4},{:.4},{:.4},{},{}",
                    group.scenario,
                    group.swept_param,
                    result.value,
                    policy,
                    stats.mean_success_pct,
                    stats.std_success_pct,
                    result.mean_sats_visible,
                    result.runs,
                    result.master_seed,
                )
                .expect("writing to a String cannot fail");
                rows += 1;
            }
        }
    }
    if rows == 0 {
        return Err(ScenarioError::EmptyResults);
    }
    Ok(out)
}

// ===== Tests =====
