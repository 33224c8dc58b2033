//! The NTU coalitional game over constellations and the merge-and-split
//! procedure that produces the partition used for allocation.
//!
//! Each player is one constellation with its edge-assigned tasks. A
//! coalition's payoff vector is induced by running the greedy allocator on
//! the pooled member tasks: every member gets `α·utility − (1−α)·cost`,
//! where utility is the member's completed-over-requested ratio and cost is
//! the execution time consumed serving the member's own completed workload
//! over its satellites' pooled visible time (for a player serving itself,
//! exactly the busy time drawn from its satellites over the pool). Payoffs
//! are non-transferable, so a merge is accepted only when it is a Pareto
//! improvement for everyone involved.

use crate::allocator::{allocate, AllocationOutcome, OwnedTask, VisibilitySnapshot};
use crate::catalog::{Constellation, SensingTask};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("player list is empty")]
    EmptyPlayers,
    #[error("duplicate player {0}")]
    DuplicatePlayer(u32),
    #[error("task {0} is assigned to more than one player")]
    SharedTask(u32),
    #[error("{name} = {value} outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("max_rounds must be at least 1")]
    ZeroRounds,
    #[error("coalition needs at least one member")]
    EmptyCoalition,
    #[error("unknown player {0} in coalition")]
    UnknownPlayer(u32),
    #[error("coalitions do not partition the player set")]
    NotAPartition,
}

/// One constellation acting in the game, with the workload the edge
/// assigned to it.
#[derive(Debug, Clone)]
pub struct Player<'a> {
    pub constellation_id: u32,
    pub assigned_tasks: Vec<SensingTask>,
    pub constellation: &'a Constellation,
}

/// Non-empty set of player ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coalition {
    members: BTreeSet<u32>,
}

impl Coalition {
    pub fn new(members: impl IntoIterator<Item = u32>) -> Result<Self, GameError> {
        let members: BTreeSet<u32> = members.into_iter().collect();
        if members.is_empty() {
            return Err(GameError::EmptyCoalition);
        }
        Ok(Self { members })
    }

    pub fn singleton(id: u32) -> Self {
        Self {
            members: BTreeSet::from([id]),
        }
    }

    pub fn members(&self) -> &BTreeSet<u32> {
        &self.members
    }

    pub fn contains(&self, id: u32) -> bool {
        self.members.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        false // by construction
    }

    /// Smallest member id — the deterministic scan key.
    pub fn min_member(&self) -> u32 {
        *self.members.iter().next().expect("coalition is non-empty")
    }

    pub fn union(&self, other: &Coalition) -> Coalition {
        Coalition {
            members: self.members.union(&other.members).copied().collect(),
        }
    }
}

/// Disjoint coalitions covering the whole player set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    coalitions: Vec<Coalition>,
}

impl Partition {
    /// Build a partition, verifying disjointness and exhaustiveness over
    /// `universe`. Coalitions are stored sorted by smallest member.
    pub fn new(
        mut coalitions: Vec<Coalition>,
        universe: &BTreeSet<u32>,
    ) -> Result<Self, GameError> {
        let mut seen = BTreeSet::new();
        for c in &coalitions {
            for &m in c.members() {
                if !seen.insert(m) {
                    return Err(GameError::NotAPartition);
                }
            }
        }
        if &seen != universe {
            return Err(GameError::NotAPartition);
        }
        coalitions.sort_by_key(Coalition::min_member);
        Ok(Self { coalitions })
    }

    pub fn coalitions(&self) -> &[Coalition] {
        &self.coalitions
    }

    pub fn len(&self) -> usize {
        self.coalitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coalitions.is_empty()
    }

    pub fn coalition_of(&self, id: u32) -> Option<&Coalition> {
        self.coalitions.iter().find(|c| c.contains(id))
    }
}

/// Per-member payoff of one coalition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffVector {
    values: BTreeMap<u32, f64>,
}

impl PayoffVector {
    pub fn get(&self, id: u32) -> Option<f64> {
        self.values.get(&id).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.values.iter().map(|(&id, &v)| (id, v))
    }
}

/// Game parameters: the utility/cost compromise and the formation budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    /// Weight α of utility against cost, in [0, 1].
    pub compromise_factor: f64,
    /// Upper bound on merge-and-split rounds.
    pub max_rounds: u32,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            compromise_factor: 0.5,
            max_rounds: 1_000,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<(), GameError> {
        check_unit_range("compromise_factor", self.compromise_factor)?;
        if self.max_rounds == 0 {
            return Err(GameError::ZeroRounds);
        }
        Ok(())
    }
}

fn check_unit_range(name: &'static str, value: f64) -> Result<(), GameError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(GameError::OutOfRange { name, value });
    }
    Ok(())
}

/// A player's payoff from (utility, cost) at compromise factor `alpha`:
/// `α·utility − (1−α)·cost`. All three arguments must lie in [0, 1], which
/// bounds the result to [−(1−α), α].
pub fn player_value(utility: f64, cost: f64, alpha: f64) -> Result<f64, GameError> {
    check_unit_range("utility", utility)?;
    check_unit_range("cost", cost)?;
    check_unit_range("alpha", alpha)?;
    Ok(alpha * utility - (1.0 - alpha) * cost)
}

/// One game instance: players, the sky snapshot they share, and the
/// configuration. Coalition evaluations are cached, so re-evaluating the
/// same member set is free.
#[derive(Debug)]
pub struct FederationGame<'a> {
    players: Vec<Player<'a>>,
    index: BTreeMap<u32, usize>,
    snapshot: &'a VisibilitySnapshot,
    cfg: GameConfig,
    cache: RefCell<HashMap<Vec<u32>, PayoffVector>>,
}

impl<'a> FederationGame<'a> {
    pub fn new(
        players: Vec<Player<'a>>,
        snapshot: &'a VisibilitySnapshot,
        cfg: GameConfig,
    ) -> Result<Self, GameError> {
        cfg.validate()?;
        if players.is_empty() {
            return Err(GameError::EmptyPlayers);
        }
        let mut index = BTreeMap::new();
        let mut task_ids = BTreeSet::new();
        for (i, p) in players.iter().enumerate() {
            if index.insert(p.constellation_id, i).is_some() {
                return Err(GameError::DuplicatePlayer(p.constellation_id));
            }
            for task in &p.assigned_tasks {
                if !task_ids.insert(task.id) {
                    return Err(GameError::SharedTask(task.id));
                }
            }
        }
        Ok(Self {
            players,
            index,
            snapshot,
            cfg,
            cache: RefCell::new(HashMap::new()),
        })
    }

    pub fn players(&self) -> &[Player<'a>] {
        &self.players
    }

    pub fn cfg(&self) -> &GameConfig {
        &self.cfg
    }

    pub fn player_ids(&self) -> BTreeSet<u32> {
        self.index.keys().copied().collect()
    }

    /// Run the allocator on the coalition's pooled tasks and convert the
    /// outcome into per-member payoffs.
    pub fn evaluate_coalition(&self, coalition: &Coalition) -> Result<PayoffVector, GameError> {
        let key: Vec<u32> = coalition.members().iter().copied().collect();
        if let Some(cached) = self.cache.borrow().get(&key) {
            return Ok(cached.clone());
        }

        let mut member_players = Vec::with_capacity(key.len());
        for &id in &key {
            let &i = self.index.get(&id).ok_or(GameError::UnknownPlayer(id))?;
            member_players.push(&self.players[i]);
        }
        let outcome = self.allocate_for(&member_players);

        let alpha = self.cfg.compromise_factor;
        let values = key
            .iter()
            .map(|&id| {
                let value = player_value(outcome.utility[&id], outcome.cost[&id], alpha)
                    .expect("allocator outcomes stay within [0, 1]");
                (id, value)
            })
            .collect();
        let payoff = PayoffVector { values };
        self.cache.borrow_mut().insert(key, payoff.clone());
        Ok(payoff)
    }

    fn allocate_for(&self, member_players: &[&Player<'a>]) -> AllocationOutcome {
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
        allocate(&pooled, &members, self.snapshot)
    }

    /// Merge-and-split coalition formation from singletons.
    ///
    /// Each round first merges pairs (scanned in ascending smallest-member
    /// order, restarting after every accepted merge) whenever every member
    /// of both coalitions weakly improves and at least one strictly
    /// improves, then splits out any player whose singleton value strictly
    /// beats its current payoff. Rounds repeat until a full round changes
    /// nothing or `max_rounds` is reached. Deterministic for fixed inputs.
    pub fn form_partition(&self) -> Partition {
        let mut coalitions: Vec<Coalition> = self
            .index
            .keys()
            .map(|&id| Coalition::singleton(id))
            .collect();

        for _round in 0..self.cfg.max_rounds {
            let mut changed = false;

            // Merge phase: scan pairs ascending, restart after a merge.
            'merge: loop {
                coalitions.sort_by_key(Coalition::min_member);
                for i in 0..coalitions.len() {
                    for j in (i + 1)..coalitions.len() {
                        if let Some(merged) = self.try_merge(&coalitions[i], &coalitions[j]) {
                            coalitions[i] = merged;
                            coalitions.remove(j);
                            changed = true;
                            continue 'merge;
                        }
                    }
                }
                break;
            }

            // Split phase: peel off strictly-better-alone players one at a
            // time, rescanning because the remainder's payoff shifts.
            loop {
                coalitions.sort_by_key(Coalition::min_member);
                let mut split_at: Option<(usize, u32)> = None;
                'scan: for (i, coalition) in coalitions.iter().enumerate() {
                    if coalition.len() < 2 {
                        continue;
                    }
                    let payoff = self
                        .evaluate_coalition(coalition)
                        .expect("members are known players");
                    for &m in coalition.members() {
                        let alone_value = self
                            .evaluate_coalition(&Coalition::singleton(m))
                            .expect("members are known players")
                            .get(m)
                            .expect("singleton payoff covers its member");
                        if alone_value > payoff.get(m).expect("member payoff present") {
                            split_at = Some((i, m));
                            break 'scan;
                        }
                    }
                }
                let Some((i, m)) = split_at else { break };
                let rest: BTreeSet<u32> = coalitions[i]
                    .members()
                    .iter()
                    .copied()
                    .filter(|&x| x != m)
                    .collect();
                coalitions[i] = Coalition { members: rest };
                coalitions.push(Coalition::singleton(m));
                changed = true;
            }

            if !changed {
                break;
            }
        }

        coalitions.sort_by_key(Coalition::min_member);
        Partition::new(coalitions, &self.player_ids()).expect("formation preserves the partition")
    }

    /// The merged coalition if it Pareto-improves on the two parts.
    fn try_merge(&self, a: &Coalition, b: &Coalition) -> Option<Coalition> {
        let merged = a.union(b);
        let merged_payoff = self
            .evaluate_coalition(&merged)
            .expect("members are known players");
        let mut strict = false;
        for part in [a, b] {
            let current = self
                .evaluate_coalition(part)
                .expect("members are known players");
            for (id, value) in current.iter() {
                let new_value = merged_payoff.get(id).expect("merged covers both parts");
                if new_value < value {
                    return None;
                }
                if new_value > value {
                    strict = true;
                }
            }
        }
        strict.then_some(merged)
    }
}

// ===== Tests =====

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::brute_force_optimal;
    use crate::catalog::{build_constellation, Homogeneity, SensingTypeId};
    use approx::assert_relative_eq;

    #[test]
    fn player_value_matches_the_compromise_formula() {
        assert_eq!(player_value(1.0, 0.0, 0.5).unwrap(), 0.5);
        assert_eq!(player_value(0.0, 1.0, 0.5).unwrap(), -0.5);
        assert_relative_eq!(player_value(0.8, 0.4, 0.5).unwrap(), 0.2, epsilon = 1e-15);
        assert!(player_value(1.2, 0.0, 0.5).is_err());
        assert!(player_value(0.5, -0.1, 0.5).is_err());
        assert!(player_value(0.5, 0.0, 1.5).is_err());
    }

    fn homogeneous(
        id: u32,
        count: u32,
        type_id: SensingTypeId,
        remaining_s: f64,
        snapshot: &mut VisibilitySnapshot,
    ) -> Constellation {
        let c = build_constellation(
            id,
            &format!("tenant-{id}"),
            count,
            500.0,
            Homogeneity::Homogeneous,
            Some(type_id),
            0.0,
            0.0,
        )
        .unwrap();
        for sat in &c.satellites {
            snapshot.insert(sat.key(), remaining_s, sat.payload.clone());
        }
        c
    }

    fn tasks_of(type_id: SensingTypeId, ids: std::ops::Range<u32>, exec_ms: f64) -> Vec<SensingTask> {
        ids.map(|id| SensingTask {
            id,
            type_id,
            execution_time_ms: exec_ms,
            arrival_index: id,
        })
        .collect()
    }

    /// Two homogeneous players of complementary types, each holding only
    /// tasks the other can run.
    fn complementary<'a>(
        c1: &'a Constellation,
        c2: &'a Constellation,
    ) -> Vec<Player<'a>> {
        vec![
            Player {
                constellation_id: 1,
                assigned_tasks: tasks_of(2, 0..4, 100.0),
                constellation: c1,
            },
            Player {
                constellation_id: 2,
                assigned_tasks: tasks_of(1, 4..8, 50.0),
                constellation: c2,
            },
        ]
    }

    #[test]
    fn complementary_players_gain_exactly_by_merging() {
        let mut snapshot = VisibilitySnapshot::new(0.0);
        let c1 = homogeneous(1, 2, 1, 600.0, &mut snapshot);
        let c2 = homogeneous(2, 2, 2, 600.0, &mut snapshot);
        let game =
            FederationGame::new(complementary(&c1, &c2), &snapshot, GameConfig::default())
                .unwrap();

        // Alone, neither can run a single task: utility 0, cost 0, value 0.
        for id in [1, 2] {
            let alone = game.evaluate_coalition(&Coalition::singleton(id)).unwrap();
            assert_eq!(alone.get(id), Some(0.0));
        }

        // Together everything completes; the exhaustive oracle confirms all
        // eight tasks are feasible.
        let grand = Coalition::new([1, 2]).unwrap();
        let payoff = game.evaluate_coalition(&grand).unwrap();
        for id in [1, 2] {
            let value = payoff.get(id).unwrap();
            assert!(value > 0.49 && value <= 0.5, "player {id}: {value}");
        }
        let pooled: Vec<OwnedTask> = game
            .players()
            .iter()
            .flat_map(|p| {
                p.assigned_tasks.iter().map(move |t| OwnedTask {
                    owner: p.constellation_id,
                    task: t.clone(),
                })
            })
            .collect();
        assert_eq!(
            brute_force_optimal(&pooled, &[&c1, &c2], &snapshot).unwrap(),
            8
        );

        let partition = game.form_partition();
        assert_eq!(partition.len(), 1);
        assert_eq!(partition.coalitions()[0], grand);
    }

    #[test]
    fn self_sufficient_identical_players_stay_alone() {
        let mut snapshot = VisibilitySnapshot::new(0.0);
        let c1 = homogeneous(1, 2, 1, 600.0, &mut snapshot);
        let c2 = homogeneous(2, 2, 1, 600.0, &mut snapshot);
        let players = vec![
            Player {
                constellation_id: 1,
                assigned_tasks: tasks_of(1, 0..2, 100.0),
                constellation: &c1,
            },
            Player {
                constellation_id: 2,
                assigned_tasks: tasks_of(1, 2..4, 100.0),
                constellation: &c2,
            },
        ];
        let game = FederationGame::new(players, &snapshot, GameConfig::default()).unwrap();

        // Both finish everything alone; merging balances the same load over
        // the same pools, so nobody strictly improves.
        let partition = game.form_partition();
        assert_eq!(partition.len(), 2);
        assert_eq!(partition.coalitions()[0], Coalition::singleton(1));
        assert_eq!(partition.coalitions()[1], Coalition::singleton(2));
    }

    #[test]
    fn a_single_player_forms_its_own_partition() {
        let mut snapshot = VisibilitySnapshot::new(0.0);
        let c1 = homogeneous(1, 2, 1, 600.0, &mut snapshot);
        let players = vec![Player {
            constellation_id: 1,
            assigned_tasks: tasks_of(1, 0..2, 50.0),
            constellation: &c1,
        }];
        let game = FederationGame::new(players, &snapshot, GameConfig::default()).unwrap();
        let partition = game.form_partition();
        assert_eq!(partition.len(), 1);
        assert_eq!(partition.coalitions()[0], Coalition::singleton(1));
    }

    #[test]
    fn matching_tasks_and_ample_visibility_yield_full_utility() {
        let mut snapshot = VisibilitySnapshot::new(0.0);
        let c1 = homogeneous(1, 3, 2, 600.0, &mut snapshot);
        let players = vec![Player {
            constellation_id: 1,
            assigned_tasks: tasks_of(2, 0..6, 100.0),
            constellation: &c1,
        }];
        let game = FederationGame::new(players, &snapshot, GameConfig::default()).unwrap();
        let payoff = game
            .evaluate_coalition(&Coalition::singleton(1))
            .unwrap();
        // utility 1, cost 0.6 s / 1800 s.
        let expected = 0.5 - 0.5 * (0.6 / 1800.0);
        assert_relative_eq!(payoff.get(1).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn payoffs_stay_inside_the_theoretical_bounds() {
        let mut snapshot = VisibilitySnapshot::new(0.0);
        let cs: Vec<Constellation> = (1..=4)
            .map(|id| homogeneous(id, 2, ((id - 1) % 4 + 1) as u8, 1.0, &mut snapshot))
            .collect();
        // Overloaded: far more work than the 1-second windows can host.
        let players: Vec<Player> = cs
            .iter()
            .map(|c| Player {
                constellation_id: c.id,
                assigned_tasks: tasks_of(
                    ((c.id % 4) + 1) as u8,
                    (c.id * 100)..(c.id * 100 + 20),
                    200.0,
                ),
                constellation: c,
            })
            .collect();
        let cfg = GameConfig::default();
        let game = FederationGame::new(players, &snapshot, cfg).unwrap();

        let partition = game.form_partition();
        let ids = game.player_ids();
        assert!(Partition::new(partition.coalitions().to_vec(), &ids).is_ok());
        for coalition in partition.coalitions() {
            let payoff = game.evaluate_coalition(coalition).unwrap();
            for (_, value) in payoff.iter() {
                assert!(value >= -(1.0 - cfg.compromise_factor) - 1e-12);
                assert!(value <= cfg.compromise_factor + 1e-12);
            }
        }
    }

    #[test]
    fn formation_is_deterministic() {
        let mut snapshot = VisibilitySnapshot::new(0.0);
        let c1 = homogeneous(1, 2, 1, 600.0, &mut snapshot);
        let c2 = homogeneous(2, 2, 2, 600.0, &mut snapshot);
        let game1 =
            FederationGame::new(complementary(&c1, &c2), &snapshot, GameConfig::default())
                .unwrap();
        let game2 =
            FederationGame::new(complementary(&c1, &c2), &snapshot, GameConfig::default())
                .unwrap();
        assert_eq!(game1.form_partition(), game2.form_partition());
    }

    #[test]
    fn formation_respects_a_one_round_budget() {
        let mut snapshot = VisibilitySnapshot::new(0.0);
        let c1 = homogeneous(1, 2, 1, 600.0, &mut snapshot);
        let c2 = homogeneous(2, 2, 2, 600.0, &mut snapshot);
        let cfg = GameConfig {
            max_rounds: 1,
            ..GameConfig::default()
        };
        let game = FederationGame::new(complementary(&c1, &c2), &snapshot, cfg).unwrap();
        let ids = game.player_ids();
        let partition = game.form_partition();
        assert!(Partition::new(partition.coalitions().to_vec(), &ids).is_ok());
    }

    #[test]
    fn invalid_games_are_rejected() {
        let mut snapshot = VisibilitySnapshot::new(0.0);
        let c1 = homogeneous(1, 2, 1, 600.0, &mut snapshot);

        assert_eq!(
            FederationGame::new(vec![], &snapshot, GameConfig::default()).unwrap_err(),
            GameError::EmptyPlayers
        );

        let twice = vec![
            Player {
                constellation_id: 1,
                assigned_tasks: vec![],
                constellation: &c1,
            },
            Player {
                constellation_id: 1,
                assigned_tasks: vec![],
                constellation: &c1,
            },
        ];
        assert_eq!(
            FederationGame::new(twice, &snapshot, GameConfig::default()).unwrap_err(),
            GameError::DuplicatePlayer(1)
        );

        let shared = vec![
            Player {
                constellation_id: 1,
                assigned_tasks: tasks_of(1, 0..2, 50.0),
                constellation: &c1,
            },
            Player {
                constellation_id: 2,
                assigned_tasks: tasks_of(1, 1..3, 50.0),
                constellation: &c1,
            },
        ];
        assert!(matches!(
            FederationGame::new(shared, &snapshot, GameConfig::default()).unwrap_err(),
            GameError::SharedTask(1)
        ));

        let bad_alpha = GameConfig {
            compromise_factor: 1.5,
            ..GameConfig::default()
        };
        assert!(bad_alpha.validate().is_err());
        let zero_rounds = GameConfig {
            max_rounds: 0,
            ..GameConfig::default()
        };
        assert_eq!(zero_rounds.validate().unwrap_err(), GameError::ZeroRounds);
    }

    #[test]
    fn partitions_validate_their_shape() {
        let universe: BTreeSet<u32> = [1, 2, 3].into_iter().collect();
        let good = Partition::new(
            vec![Coalition::new([1, 3]).unwrap(), Coalition::singleton(2)],
            &universe,
        )
        .unwrap();
        assert_eq!(good.len(), 2);
        assert_eq!(good.coalition_of(3), Some(&Coalition::new([1, 3]).unwrap()));
        assert_eq!(good.coalition_of(9), None);

        // Overlap.
        assert_eq!(
            Partition::new(
                vec![Coalition::new([1, 2]).unwrap(), Coalition::singleton(2)],
                &universe,
            )
            .unwrap_err(),
            GameError::NotAPartition
        );
        // Missing player.
        assert_eq!(
            Partition::new(vec![Coalition::new([1, 2]).unwrap()], &universe).unwrap_err(),
            GameError::NotAPartition
        );
        // Empty coalitions cannot exist at all.
        assert_eq!(
            Coalition::new(std::iter::empty()).unwrap_err(),
            GameError::EmptyCoalition
        );
    }
}
