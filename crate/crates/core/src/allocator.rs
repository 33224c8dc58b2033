//! Greedy task-to-satellite mapping inside a coalition, the no-federation
//! baseline, and small-instance oracles for testing.
//!
//! Tasks are processed in arrival order. A task can run on a satellite iff
//! the satellite is visible at the allocation epoch, carries the task's
//! sensing type, and still has enough of its visibility window left to
//! execute the task serially after everything already queued on it. Among
//! the candidates the allocator picks the least-busy satellite, breaking
//! ties toward the longest remaining visibility and then the lowest
//! satellite key.

use crate::catalog::{Constellation, SatKey, SensingTask, SensingTypeId};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Queue-feasibility slack [s] absorbing accumulated rounding in busy-time
/// sums; far below the 50 ms minimum task length.
const CAPACITY_SLACK_S: f64 = 1e-9;

/// Queue-feasibility test shared by the greedy allocator, the exhaustive
/// oracle and the verifier: a task fits when the residual window covers its
/// execution time up to rounding slack, so exact fills stay feasible.
fn fits(residual_s: f64, exec_s: f64) -> bool {
    exec_s <= residual_s + CAPACITY_SLACK_S
}

#[derive(Debug, Error, PartialEq)]
pub enum AllocError {
    #[error("instance too large for exhaustive search: {tasks} tasks (max {max_tasks}), {sats} satellites (max {max_sats})")]
    TooLarge {
        tasks: usize,
        max_tasks: usize,
        sats: usize,
        max_sats: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SatView {
    remaining_s: f64,
    payload: Vec<SensingTypeId>,
}

/// Ground-station view of the sky at one allocation epoch: which satellites
/// are visible, for how much longer, and what they carry. Satellites below
/// the horizon are simply absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilitySnapshot {
    epoch_s: f64,
    sats: BTreeMap<SatKey, SatView>,
}

impl VisibilitySnapshot {
    pub fn new(epoch_s: f64) -> Self {
        Self {
            epoch_s,
            sats: BTreeMap::new(),
        }
    }

    /// Record a visible satellite. Entries with no window left are dropped,
    /// keeping the "present ⇔ visible with positive remaining time"
    /// invariant.
    pub fn insert(&mut self, key: SatKey, remaining_s: f64, payload: Vec<SensingTypeId>) {
        if remaining_s > 0.0 {
            self.sats.insert(
                key,
                SatView {
                    remaining_s,
                    payload,
                },
            );
        }
    }

    pub fn epoch_s(&self) -> f64 {
        self.epoch_s
    }

    pub fn is_visible(&self, key: SatKey) -> bool {
        self.sats.contains_key(&key)
    }

    /// Remaining visibility [s] of a satellite, 0 when below the horizon.
    pub fn remaining_s(&self, key: SatKey) -> f64 {
        self.sats.get(&key).map_or(0.0, |v| v.remaining_s)
    }

    pub fn payload(&self, key: SatKey) -> &[SensingTypeId] {
        self.sats.get(&key).map_or(&[], |v| &v.payload)
    }

    /// Keys of all visible satellites in ascending order.
    pub fn visible_keys(&self) -> impl Iterator<Item = SatKey> + '_ {
        self.sats.keys().copied()
    }

    pub fn visible_count(&self) -> usize {
        self.sats.len()
    }

    pub fn visible_count_of(&self, constellation_id: u32) -> usize {
        self.sats.keys().filter(|k| k.0 == constellation_id).count()
    }

    /// Summed remaining visibility [s] of one constellation's visible
    /// satellites — the resource pool its owner brings to a coalition.
    pub fn total_remaining_of(&self, constellation_id: u32) -> f64 {
        self.sats
            .iter()
            .filter(|(k, _)| k.0 == constellation_id)
            .map(|(_, v)| v.remaining_s)
            .sum()
    }
}

/// Per-satellite serial queue: busy time consumed out of the visibility
/// capacity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SatelliteLedger {
    entries: BTreeMap<SatKey, (f64, f64)>, // (busy_s, capacity_s)
}

impl SatelliteLedger {
    fn track(&mut self, key: SatKey, capacity_s: f64) {
        self.entries.entry(key).or_insert((0.0, capacity_s));
    }

    fn debit(&mut self, key: SatKey, exec_s: f64) {
        let (busy, capacity) = self
            .entries
            .get_mut(&key)
            .expect("debit of an untracked satellite");
        *busy += exec_s;
        debug_assert!(*busy <= *capacity + CAPACITY_SLACK_S);
    }

    pub fn busy_s(&self, key: SatKey) -> f64 {
        self.entries.get(&key).map_or(0.0, |e| e.0)
    }

    pub fn capacity_s(&self, key: SatKey) -> f64 {
        self.entries.get(&key).map_or(0.0, |e| e.1)
    }

    /// Busy time summed over one constellation's satellites.
    pub fn busy_of(&self, constellation_id: u32) -> f64 {
        self.entries
            .iter()
            .filter(|(k, _)| k.0 == constellation_id)
            .map(|(_, e)| e.0)
            .sum()
    }
}

/// A task tagged with the constellation that requested it at the edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OwnedTask {
    pub owner: u32,
    pub task: SensingTask,
}

/// One task's placement (or failure to place).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignmentEntry {
    pub task_id: u32,
    pub owner: u32,
    pub type_id: SensingTypeId,
    pub execution_time_ms: f64,
    /// Chosen satellite, or `None` when no candidate could take the task.
    pub sat: Option<SatKey>,
}

/// Placements for a whole task list, in processing order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub entries: Vec<AssignmentEntry>,
}

impl Assignment {
    pub fn completed(&self) -> u32 {
        self.entries.iter().filter(|e| e.sat.is_some()).count() as u32
    }
}

/// Everything the game layer needs from one allocation: per-player demand,
/// completions, utility/cost components, and the raw placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationOutcome {
    /// Tasks requested per constellation.
    pub requested: BTreeMap<u32, u32>,
    /// Tasks completed per constellation.
    pub completed: BTreeMap<u32, u32>,
    /// completed/requested per constellation (1 when nothing was asked).
    pub utility: BTreeMap<u32, f64>,
    /// Execution time consumed serving a constellation's own completed
    /// workload over its satellites' pooled visible time (0 when none are
    /// visible, capped at 1). For a constellation serving itself this equals
    /// the busy time drawn from its satellites over the pool.
    pub cost: BTreeMap<u32, f64>,
    pub assignment: Assignment,
    pub ledger: SatelliteLedger,
}

impl AllocationOutcome {
    pub fn total_requested(&self) -> u32 {
        self.requested.values().sum()
    }

    pub fn total_completed(&self) -> u32 {
        self.completed.values().sum()
    }

    /// Overall success percentage (100 when no tasks were requested).
    pub fn success_pct(&self) -> f64 {
        let requested = self.total_requested();
        if requested == 0 {
            return 100.0;
        }
        100.0 * f64::from(self.total_completed()) / f64::from(requested)
    }
}

fn exec_seconds(task: &SensingTask) -> f64 {
    task.execution_time_ms / 1_000.0
}

fn member_ids(members: &[&Constellation]) -> BTreeSet<u32> {
    members.iter().map(|c| c.id).collect()
}

fn payload_mask(payload: &[SensingTypeId]) -> u8 {
    payload
        .iter()
        .fold(0u8, |mask, &ty| mask | type_bit(ty))
}

fn type_bit(ty: SensingTypeId) -> u8 {
    1u8 << ty.saturating_sub(1).min(7)
}

/// Order tasks for processing: arrival order, ties by id.
fn processing_order(tasks: &[OwnedTask]) -> Vec<&OwnedTask> {
    let mut ordered: Vec<&OwnedTask> = tasks.iter().collect();
    ordered.sort_by_key(|t| (t.task.arrival_index, t.task.id));
    ordered
}

fn run_greedy(
    tasks: &[OwnedTask],
    members: &[&Constellation],
    snapshot: &VisibilitySnapshot,
    own_resources_only: bool,
) -> AllocationOutcome {
    let ids = member_ids(members);
    // Flat candidate table in ascending-key order; the per-task scan is the
    // hot loop of every coalition evaluation.
    struct Candidate {
        key: SatKey,
        remaining_s: f64,
        busy_s: f64,
        mask: u8,
    }
    let mut candidates: Vec<Candidate> = snapshot
        .sats
        .iter()
        .filter(|(key, _)| ids.contains(&key.0))
        .map(|(key, view)| Candidate {
            key: *key,
            remaining_s: view.remaining_s,
            busy_s: 0.0,
            mask: payload_mask(&view.payload),
        })
        .collect();

    let mut requested: BTreeMap<u32, u32> = ids.iter().map(|&id| (id, 0)).collect();
    let mut completed: BTreeMap<u32, u32> = ids.iter().map(|&id| (id, 0)).collect();
    let mut entries = Vec::with_capacity(tasks.len());

    for owned in processing_order(tasks) {
        debug_assert!(ids.contains(&owned.owner), "task owner is not a member");
        *requested.entry(owned.owner).or_insert(0) += 1;
        let exec_s = exec_seconds(&owned.task);
        let type_bit = type_bit(owned.task.type_id);

        // Minimum busy time, then maximum remaining visibility; ascending
        // key order makes "first found" the lowest-key tie-break.
        let mut best: Option<(usize, f64, f64)> = None;
        for (i, c) in candidates.iter().enumerate() {
            if own_resources_only && c.key.0 != owned.owner {
                continue;
            }
            if c.mask & type_bit == 0 || !fits(c.remaining_s - c.busy_s, exec_s) {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, best_busy, best_remaining)) => {
                    c.busy_s < best_busy
                        || (c.busy_s == best_busy && c.remaining_s > best_remaining)
                }
            };
            if better {
                best = Some((i, c.busy_s, c.remaining_s));
            }
        }

        let sat = best.map(|(i, ..)| {
            candidates[i].busy_s += exec_s;
            candidates[i].key
        });
        if sat.is_some() {
            *completed.entry(owned.owner).or_insert(0) += 1;
        }
        entries.push(AssignmentEntry {
            task_id: owned.task.id,
            owner: owned.owner,
            type_id: owned.task.type_id,
            execution_time_ms: owned.task.execution_time_ms,
            sat,
        });
    }

    let mut ledger = SatelliteLedger::default();
    for c in &candidates {
        ledger.track(c.key, c.remaining_s);
        if c.busy_s > 0.0 {
            ledger.debit(c.key, c.busy_s);
        }
    }

    let utility = requested
        .iter()
        .map(|(&id, &req)| {
            let done = f64::from(completed[&id]);
            let value = if req == 0 { 1.0 } else { done / f64::from(req) };
            (id, value)
        })
        .collect();
    // Served time per owner, accumulated in processing order so the sum is
    // bit-stable across coalitions that complete the same task set.
    let mut served_s: BTreeMap<u32, f64> = ids.iter().map(|&id| (id, 0.0)).collect();
    for entry in &entries {
        if entry.sat.is_some() {
            *served_s.get_mut(&entry.owner).expect("owner is a member") +=
                entry.execution_time_ms / 1_000.0;
        }
    }
    let cost = ids
        .iter()
        .map(|&id| {
            let pool = snapshot.total_remaining_of(id);
            let value = if pool > 0.0 {
                (served_s[&id] / pool).min(1.0)
            } else {
                0.0
            };
            (id, value)
        })
        .collect();

    AllocationOutcome {
        requested,
        completed,
        utility,
        cost,
        assignment: Assignment { entries },
        ledger,
    }
}

/// Allocate pooled coalition tasks onto the members' visible satellites.
/// Failures are recorded in the assignment, never raised. Pure function of
/// its inputs.
pub fn allocate(
    tasks: &[OwnedTask],
    members: &[&Constellation],
    snapshot: &VisibilitySnapshot,
) -> AllocationOutcome {
    run_greedy(tasks, members, snapshot, false)
}

/// Uniform seeded draw mapping each of `task_count` tasks to one of
/// `player_count` players (indices into the player list). This is both the
/// no-federation dispatch rule and the edge's task-ownership draw, so both
/// policies of a run can share one draw by sharing the seed.
pub fn uniform_owner_draw(task_count: usize, player_count: usize, rng_seed: u64) -> Vec<usize> {
    assert!(player_count > 0, "owner draw needs at least one player");
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..task_count)
        .map(|_| rng.gen_range(0..player_count))
        .collect()
}

/// The no-federation baseline: every task goes to a uniformly drawn
/// constellation, which may only use its own satellites.
pub fn allocate_no_federation(
    tasks: &[SensingTask],
    players: &[&Constellation],
    snapshot: &VisibilitySnapshot,
    rng_seed: u64,
) -> AllocationOutcome {
    let owners = uniform_owner_draw(tasks.len(), players.len(), rng_seed);
    let owned: Vec<OwnedTask> = tasks
        .iter()
        .zip(owners)
        .map(|(task, idx)| OwnedTask {
            owner: players[idx].id,
            task: task.clone(),
        })
        .collect();
    run_greedy(&owned, players, snapshot, true)
}

/// Check every assignment invariant: assigned satellites belong to members,
/// are visible, carry the task's type; no task id is placed twice; and each
/// satellite's queue fits its window.
pub fn verify_assignment(
    assignment: &Assignment,
    snapshot: &VisibilitySnapshot,
    members: &[&Constellation],
) -> bool {
    let ids = member_ids(members);
    let mut seen_tasks = BTreeSet::new();
    let mut queued: BTreeMap<SatKey, f64> = BTreeMap::new();

    for entry in &assignment.entries {
        if !seen_tasks.insert(entry.task_id) {
            return false;
        }
        let key = match entry.sat {
            Some(key) => key,
            None => continue,
        };
        if !ids.contains(&key.0)
            || !snapshot.is_visible(key)
            || !snapshot.payload(key).contains(&entry.type_id)
        {
            return false;
        }
        *queued.entry(key).or_insert(0.0) += entry.execution_time_ms / 1_000.0;
    }

    queued
        .iter()
        .all(|(&key, &total)| total <= snapshot.remaining_s(key) + CAPACITY_SLACK_S)
}

/// Largest instance sizes [`brute_force_optimal`] will enumerate.
pub const BRUTE_FORCE_MAX_TASKS: usize = 10;
pub const BRUTE_FORCE_MAX_SATS: usize = 12;

/// Maximum number of completable tasks over all feasible assignments,
/// by exhaustive search. Only for small instances; the greedy allocator's
/// completed count can never exceed this.
pub fn brute_force_optimal(
    tasks: &[OwnedTask],
    members: &[&Constellation],
    snapshot: &VisibilitySnapshot,
) -> Result<u32, AllocError> {
    let sat_count: usize = members.iter().map(|c| c.satellites.len()).sum();
    if tasks.len() > BRUTE_FORCE_MAX_TASKS || sat_count > BRUTE_FORCE_MAX_SATS {
        return Err(AllocError::TooLarge {
            tasks: tasks.len(),
            max_tasks: BRUTE_FORCE_MAX_TASKS,
            sats: sat_count,
            max_sats: BRUTE_FORCE_MAX_SATS,
        });
    }

    let ids = member_ids(members);
    let sats: Vec<(SatKey, f64, Vec<SensingTypeId>)> = snapshot
        .sats
        .iter()
        .filter(|(k, _)| ids.contains(&k.0))
        .map(|(k, v)| (*k, v.remaining_s, v.payload.clone()))
        .collect();
    let ordered = processing_order(tasks);

    fn search(
        idx: usize,
        ordered: &[&OwnedTask],
        sats: &[(SatKey, f64, Vec<SensingTypeId>)],
        busy: &mut Vec<f64>,
        done: u32,
        best: &mut u32,
    ) {
        if done + (ordered.len() - idx) as u32 <= *best {
            return; // even completing everything left cannot beat the best
        }
        if idx == ordered.len() {
            *best = (*best).max(done);
            return;
        }
        let task = &ordered[idx].task;
        let exec_s = exec_seconds(task);
        // Symmetric satellites (same payload, same residual) explore
        // identically; try only the first of each class.
        let mut tried: Vec<(u64, &[SensingTypeId])> = Vec::new();
        for (i, (_, remaining, payload)) in sats.iter().enumerate() {
            let residual = remaining - busy[i];
            if !payload.contains(&task.type_id) || !fits(residual, exec_s) {
                continue;
            }
            let class = (residual.to_bits(), payload.as_slice());
            if tried.contains(&class) {
                continue;
            }
            tried.push(class);
            busy[i] += exec_s;
            search(idx + 1, ordered, sats, busy, done + 1, best);
            busy[i] -= exec_s;
        }
        search(idx + 1, ordered, sats, busy, done, best);
    }

    let mut best = 0;
    let mut busy = vec![0.0; sats.len()];
    search(0, &ordered, &sats, &mut busy, 0, &mut best);
    Ok(best)
}

// ===== Tests =====
