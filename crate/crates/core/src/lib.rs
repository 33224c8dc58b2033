//! Deterministic simulator of opportunistic federation among virtualized
//! CubeSat constellations served by a ground-station edge node.
//!
//! The crate is organized bottom-up:
//!
//! * [`orbit`] — circular-LEO geometry: periods, coverage cones, pass
//!   durations, two-body propagation and ground-station visibility windows;
//! * [`link`] — registration and data-delivery timing over the
//!   ground-satellite link;
//! * [`catalog`] — tenants, constellations, satellites, sensing resources
//!   and task generation;
//! * [`vo`] — LwM2M-style virtual objects mirroring CubeSats at the ground
//!   station (registration lifecycle, resource tree, migration);
//! * [`allocator`] — greedy task-to-satellite mapping inside a coalition
//!   plus the no-federation baseline and small-instance oracles;
//! * [`federation`] — the NTU coalitional game over constellations and
//!   merge-and-split coalition formation;
//! * [`scenario`] — the Monte Carlo experiment harness, presets A–E and
//!   CSV emission.
//!
//! Everything is seeded and deterministic: identical seeds produce
//! byte-identical results, including the emitted CSV.

pub mod allocator;
pub mod catalog;
pub mod federation;
pub mod link;
pub mod orbit;
pub mod scenario;
pub mod vo;

pub use allocator::{
    allocate, allocate_no_federation, brute_force_optimal, uniform_owner_draw, verify_assignment,
    AllocationOutcome, Assignment, AssignmentEntry, OwnedTask, SatelliteLedger,
    VisibilitySnapshot,
};
pub use catalog::{
    build_constellation, generate_tasks, resource_type, Constellation, CubeSat, Homogeneity,
    ResourceType, SatKey, SensingTask, SensingTypeId, TypeMix, SENSING_TYPE_COUNT,
};
pub use federation::{
    player_value, Coalition, FederationGame, GameConfig, Partition, PayoffVector, Player,
};
pub use link::{
    access_report, deliverable_data, registration_load, registration_overhead, standard_report,
    AccessReport, LinkConfig, TABLE_ALTITUDES_KM,
};
pub use orbit::{
    coverage_half_angle, elevation_angle, max_pass_duration, orbital_period, propagate,
    remaining_visibility, visibility_windows, EciPosition, GroundStation, OrbitElements,
    VisibilityWindow, EARTH_MU_KM3_S2, EARTH_RADIUS_KM, EARTH_ROTATION_RAD_S,
};
pub use scenario::{
    aggregate_runs, emit_csv, parse_config_file, run_once, run_preset_points, run_scenario,
    scenario_presets, snapshot_at, CsvGroup, Policy, PolicyMetrics, PolicyStats, PresetPoint,
    RunResult, ScenarioConfig, SweepParam, SweepResult,
};
pub use vo::{LwObjectTree, MigrationEvent, VirtualObject, VoConfig, VoState};
