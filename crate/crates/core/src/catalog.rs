//! Tenants, constellations, satellites, sensing resources and task
//! generation — the players and workload of the federation game.

use crate::orbit::{OrbitElements, OrbitError};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of sensing types (and of per-type execution-time entries).
pub const SENSING_TYPE_COUNT: usize = 4;
/// Execution time [ms] of sensing types 1–4, in order.
pub const EXECUTION_TIME_MS: [f64; SENSING_TYPE_COUNT] = [50.0, 100.0, 150.0, 200.0];

/// Sensing-type identifier, 1-based (1..=[`SENSING_TYPE_COUNT`]).
pub type SensingTypeId = u8;

/// Globally unique satellite key: (constellation id, satellite id).
pub type SatKey = (u32, u32);

#[derive(Debug, Error, PartialEq)]
pub enum CatalogError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

/// One of the four sensing-resource types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceType {
    pub id: SensingTypeId,
    pub execution_time_ms: f64,
}

/// Look up a sensing type by its 1-based id.
pub fn resource_type(id: SensingTypeId) -> Result<ResourceType, CatalogError> {
    let idx = usize::from(id).wrapping_sub(1);
    let execution_time_ms = *EXECUTION_TIME_MS
        .get(idx)
        .ok_or_else(|| CatalogError::Config(format!("unknown sensing type {id}")))?;
    Ok(ResourceType {
        id,
        execution_time_ms,
    })
}

/// A satellite: one payload resource on a circular orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeSat {
    /// Satellite id, unique within its constellation.
    pub id: u32,
    pub constellation_id: u32,
    /// Carried sensing types (a single one in the default model).
    pub payload: Vec<SensingTypeId>,
    pub elements: OrbitElements,
}

impl CubeSat {
    /// Globally unique key of this satellite.
    pub fn key(&self) -> SatKey {
        (self.constellation_id, self.id)
    }

    pub fn carries(&self, type_id: SensingTypeId) -> bool {
        self.payload.contains(&type_id)
    }
}

/// Whether all satellites of a constellation carry the same type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Homogeneity {
    Homogeneous,
    Heterogeneous,
}

/// A tenant-owned set of satellites sharing one orbital plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    pub id: u32,
    pub tenant: String,
    pub satellites: Vec<CubeSat>,
    pub homogeneity: Homogeneity,
    pub altitude_km: f64,
}

impl Constellation {
    /// Rotate every satellite's in-plane phase by `offset_deg` (used by the
    /// harness to randomize geometry per run while keeping even spacing).
    pub fn offset_phases(&mut self, offset_deg: f64) {
        for sat in &mut self.satellites {
            sat.elements.phase_deg = (sat.elements.phase_deg + offset_deg).rem_euclid(360.0);
        }
    }
}

/// Build a constellation of `count` satellites evenly phased in one plane
/// (`phase_k = 360·k/count`).
///
/// Homogeneous constellations require `type_assignment`; heterogeneous ones
/// cycle satellite `k` through type `1 + (k mod 4)` and reject an explicit
/// assignment.
#[allow(clippy::too_many_arguments)]
pub fn build_constellation(
    id: u32,
    tenant: &str,
    count: u32,
    altitude_km: f64,
    homogeneity: Homogeneity,
    type_assignment: Option<SensingTypeId>,
    inclination_deg: f64,
    raan_deg: f64,
) -> Result<Constellation, CatalogError> {
    if !(1..=200).contains(&count) {
        return Err(CatalogError::Config(format!(
            "satellite count {count} outside [1, 200]"
        )));
    }
    match (homogeneity, type_assignment) {
        (Homogeneity::Homogeneous, None) => {
            return Err(CatalogError::Config(
                "homogeneous constellation needs a type assignment".into(),
            ))
        }
        (Homogeneity::Heterogeneous, Some(t)) => {
            return Err(CatalogError::Config(format!(
                "heterogeneous constellation cycles all types; unexpected assignment {t}"
            )))
        }
        (Homogeneity::Homogeneous, Some(t)) => {
            resource_type(t)?; // reject unknown type ids
        }
        (Homogeneity::Heterogeneous, None) => {}
    }

    let satellites = (0..count)
        .map(|k| {
            let phase_deg = 360.0 * f64::from(k) / f64::from(count);
            let elements =
                OrbitElements::new(altitude_km, inclination_deg, raan_deg, phase_deg, 0.0)?;
            let payload = match homogeneity {
                Homogeneity::Homogeneous => vec![type_assignment.expect("checked above")],
                Homogeneity::Heterogeneous => {
                    vec![(1 + (k as usize % SENSING_TYPE_COUNT)) as SensingTypeId]
                }
            };
            Ok(CubeSat {
                id: k,
                constellation_id: id,
                payload,
                elements,
            })
        })
        .collect::<Result<Vec<_>, CatalogError>>()?;

    Ok(Constellation {
        id,
        tenant: tenant.to_string(),
        satellites,
        homogeneity,
        altitude_km,
    })
}

/// A typed sensing request with an execution-time demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingTask {
    pub id: u32,
    pub type_id: SensingTypeId,
    pub execution_time_ms: f64,
    /// Position in the arrival order at the ground station.
    pub arrival_index: u32,
}

/// Per-type task fractions summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeMix {
    fractions: [f64; SENSING_TYPE_COUNT],
}

impl TypeMix {
    pub fn new(fractions: [f64; SENSING_TYPE_COUNT]) -> Result<Self, CatalogError> {
        if fractions.iter().any(|&f| f < 0.0) {
            return Err(CatalogError::Config(format!(
                "mix fractions must be non-negative: {fractions:?}"
            )));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CatalogError::Config(format!(
                "mix fractions must sum to 1, got {sum}"
            )));
        }
        Ok(Self { fractions })
    }

    /// The equal mix (¼ per type).
    pub fn equal() -> Self {
        Self {
            fractions: [0.25; SENSING_TYPE_COUNT],
        }
    }

    pub fn fractions(&self) -> &[f64; SENSING_TYPE_COUNT] {
        &self.fractions
    }
}

/// Generate `load` tasks with per-type counts from the mix
/// (largest-remainder rounding, so counts always sum to `load`) in an order
/// shuffled by the seeded RNG. Ids are stable per (load, mix); the shuffle
/// only permutes arrival positions.
pub fn generate_tasks(load: u32, mix: &TypeMix, rng_seed: u64) -> Vec<SensingTask> {
    // Largest-remainder apportionment of `load` over the type fractions.
    let quotas: Vec<f64> = mix
        .fractions
        .iter()
        .map(|f| f * f64::from(load))
        .collect();
    let mut counts: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let assigned: u32 = counts.iter().sum();
    let mut order: Vec<usize> = (0..SENSING_TYPE_COUNT).collect();
    // Largest fractional remainder first; ties favor the lower type id.
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for i in 0..(load - assigned) as usize {
        counts[order[i % SENSING_TYPE_COUNT]] += 1;
    }

    let mut tasks = Vec::with_capacity(load as usize);
    let mut next_id = 0u32;
    for (idx, &count) in counts.iter().enumerate() {
        let rt = resource_type((idx + 1) as SensingTypeId).expect("types 1..=4 exist");
        for _ in 0..count {
            tasks.push(SensingTask {
                id: next_id,
                type_id: rt.id,
                execution_time_ms: rt.execution_time_ms,
                arrival_index: 0,
            });
            next_id += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    tasks.shuffle(&mut rng);
    for (pos, task) in tasks.iter_mut().enumerate() {
        task.arrival_index = pos as u32;
    }
    tasks
}

// ===== Tests =====
