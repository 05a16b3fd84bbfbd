//! Weight-driven cluster election.
//!
//! Every agent is either a central or a member. Members talk only to their
//! central, which collects their messages and broadcasts back. Elections
//! run in synchronous rounds until no role changes:
//!
//! * a member becomes central when no agent within the radius outranks it
//!   and no central is within the radius;
//! * a central becomes a member when an outranking central is within the
//!   radius.
//!
//! Members left without a central in range are then promoted, strongest
//! first, and every member attaches to the strongest central in range.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mapf::{Action, Cell};

pub const DEFAULT_RADIUS: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentWeight {
    pub agent_id: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Central,
    Member,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterTopology {
    pub role: Vec<Role>,
    /// Central of each agent's cluster; centrals point to themselves.
    pub central_of: Vec<usize>,
    pub radius: f64,
    pub rounds_used: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payload {
    pub position: Cell,
    pub goal_direction: (f64, f64),
    pub weight: f64,
    pub intended_action: Action,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub sender: usize,
    pub payload: Payload,
}

/// Chebyshev distance: a radius `d` covers a `(2d + 1)²` square.
pub fn distance(a: Cell, b: Cell) -> f64 {
    a.x.abs_diff(b.x).max(a.y.abs_diff(b.y)) as f64
}

/// Strength order from weights: heavier first, equal weights by a seeded
/// permutation of agent ids (identity, i.e. lower id first, for seed 0).
/// Returns `rank[agent]`, 0 being the strongest.
pub fn rank_by_weight(weights: &[AgentWeight], tie_seed: u64) -> Result<Vec<usize>> {
    let n = weights.len();
    let mut by_agent = vec![None; n];
    for w in weights {
        if w.agent_id >= n || by_agent[w.agent_id].is_some() {
            return Err(Error::contract(format!("weight list has bad agent id {}", w.agent_id)));
        }
        if w.weight.is_nan() {
            return Err(Error::contract(format!("weight of agent {} is NaN", w.agent_id)));
        }
        by_agent[w.agent_id] = Some(w.weight);
    }
    let weight: Vec<f64> = by_agent.into_iter().map(Option::unwrap).collect();
    let mut tie: Vec<usize> = (0..n).collect();
    if tie_seed != 0 {
        tie.shuffle(&mut ChaCha8Rng::seed_from_u64(tie_seed));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| weight[b].total_cmp(&weight[a]).then(tie[a].cmp(&tie[b])));
    Ok(ranks_from_order(&order))
}

/// Inverts a strongest-first agent order into per-agent ranks.
pub fn ranks_from_order(order: &[usize]) -> Vec<usize> {
    let mut rank = vec![0; order.len()];
    for (r, &a) in order.iter().enumerate() {
        rank[a] = r;
    }
    rank
}

pub fn form_clusters(
    positions: &[Cell],
    weights: &[AgentWeight],
    radius: f64,
    tie_seed: u64,
) -> Result<ClusterTopology> {
    if positions.len() != weights.len() {
        return Err(Error::contract(format!(
            "{} positions but {} weights",
            positions.len(),
            weights.len()
        )));
    }
    let rank = rank_by_weight(weights, tie_seed)?;
    form_clusters_ranked(positions, &rank, radius)
}

/// Election over an explicit strength order (`rank[agent]`, 0 strongest).
pub fn form_clusters_ranked(positions: &[Cell], rank: &[usize], radius: f64) -> Result<ClusterTopology> {
    let n = positions.len();
    if n == 0 {
        return Err(Error::contract("cluster election needs at least one agent"));
    }
    if rank.len() != n {
        return Err(Error::contract("rank list length differs from positions"));
    }
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::contract(format!("radius must be positive, got {radius}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&a| rank[a]);
    if ranks_from_order(&order) != rank {
        return Err(Error::contract("rank is not a permutation"));
    }

    let mut role = vec![Role::Member; n];
    let mut rounds_used = 0;
    while rounds_used < n as u32 {
        let next = election_round(positions, rank, radius, &role);
        rounds_used += 1;
        if next == role {
            break;
        }
        role = next;
    }

    let near = |a: usize, b: usize| distance(positions[a], positions[b]) <= radius;
    // Repairs a capped run; a converged election passes through unchanged.
    let mut kept: Vec<usize> = Vec::new();
    for &a in &order {
        if role[a] == Role::Central {
            if kept.iter().any(|&c| near(a, c)) {
                role[a] = Role::Member;
            } else {
                kept.push(a);
            }
        }
    }
    for &a in &order {
        if role[a] == Role::Member && !kept.iter().any(|&c| near(a, c)) {
            role[a] = Role::Central;
            kept.push(a);
        }
    }

    let central_of = (0..n)
        .map(|a| match role[a] {
            Role::Central => a,
            Role::Member => *order
                .iter()
                .find(|&&c| role[c] == Role::Central && near(a, c))
                .expect("every member is covered"),
        })
        .collect();
    Ok(ClusterTopology {
        role,
        central_of,
        radius,
        rounds_used,
    })
}

/// One synchronous election round.
pub fn election_round(positions: &[Cell], rank: &[usize], radius: f64, role: &[Role]) -> Vec<Role> {
    let n = positions.len();
    let near = |a: usize, b: usize| a != b && distance(positions[a], positions[b]) <= radius;
    (0..n)
        .map(|a| match role[a] {
            Role::Member => {
                let blocked = (0..n)
                    .any(|b| near(a, b) && (rank[b] < rank[a] || role[b] == Role::Central));
                if blocked {
                    Role::Member
                } else {
                    Role::Central
                }
            }
            Role::Central => {
                let outranked = (0..n)
                    .any(|b| near(a, b) && role[b] == Role::Central && rank[b] < rank[a]);
                if outranked {
                    Role::Member
                } else {
                    Role::Central
                }
            }
        })
        .collect()
}

impl ClusterTopology {
    pub fn n_agents(&self) -> usize {
        self.role.len()
    }

    /// `(central, members)` per cluster, by ascending central id.
    pub fn clusters(&self) -> Vec<(usize, Vec<usize>)> {
        (0..self.n_agents())
            .filter(|&c| self.role[c] == Role::Central)
            .map(|c| {
                let members = (0..self.n_agents())
                    .filter(|&m| m != c && self.central_of[m] == c)
                    .collect();
                (c, members)
            })
            .collect()
    }

    /// One line per cluster: `central_id: member_id,member_id,...`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (c, members) in self.clusters() {
            let list: Vec<String> = members.iter().map(usize::to_string).collect();
            if list.is_empty() {
                writeln!(out, "{c}:").unwrap();
            } else {
                writeln!(out, "{c}: {}", list.join(",")).unwrap();
            }
        }
        out
    }

    /// Checks every structural invariant against the positions the
    /// topology was built from.
    pub fn check(&self, positions: &[Cell]) -> std::result::Result<(), String> {
        let n = self.n_agents();
        if positions.len() != n || self.central_of.len() != n {
            return Err("length mismatch".into());
        }
        for a in 0..n {
            let c = self.central_of[a];
            if c >= n || self.role[c] != Role::Central {
                return Err(format!("agent {a} attached to non-central {c}"));
            }
            match self.role[a] {
                Role::Central if c != a => return Err(format!("central {a} points to {c}")),
                Role::Member if distance(positions[a], positions[c]) > self.radius => {
                    return Err(format!("member {a} is out of range of central {c}"))
                }
                _ => {}
            }
        }
        for a in 0..n {
            for b in a + 1..n {
                if self.role[a] == Role::Central
                    && self.role[b] == Role::Central
                    && distance(positions[a], positions[b]) <= self.radius
                {
                    return Err(format!("centrals {a} and {b} are within radius"));
                }
            }
        }
        Ok(())
    }
}

/// Centrals receive all their members' messages; members receive their
/// central's message.
pub fn route(topology: &ClusterTopology, outboxes: &[Message]) -> Result<Vec<Vec<Message>>> {
    let n = topology.n_agents();
    if outboxes.len() != n {
        return Err(Error::contract(format!("{} outboxes for {n} agents", outboxes.len())));
    }
    let mut inboxes = vec![Vec::new(); n];
    for a in 0..n {
        let c = topology.central_of[a];
        if c != a {
            inboxes[c].push(outboxes[a]);
            inboxes[a].push(outboxes[c]);
        }
    }
    Ok(inboxes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn weights(w: &[f64]) -> Vec<AgentWeight> {
        w.iter()
            .enumerate()
            .map(|(agent_id, &weight)| AgentWeight { agent_id, weight })
            .collect()
    }

    fn message(sender: usize) -> Message {
        Message {
            sender,
            payload: Payload {
                position: Cell::new(sender as i32, 0),
                goal_direction: (0.0, 0.0),
                weight: 0.0,
                intended_action: Action::Wait,
            },
        }
    }

    #[test]
    fn chebyshev_distance() {
        assert_eq!(distance(Cell::new(0, 0), Cell::new(0, 0)), 0.0);
        assert_eq!(distance(Cell::new(0, 0), Cell::new(3, 1)), 3.0);
        assert_eq!(distance(Cell::new(3, 1), Cell::new(0, 0)), 3.0);
    }

    #[test]
    fn lone_agent_is_singleton_central() {
        let t = form_clusters(&[Cell::new(4, 4)], &weights(&[0.3]), 5.0, 0).unwrap();
        assert_eq!(t.role, vec![Role::Central]);
        assert_eq!(t.central_of, vec![0]);
        assert_eq!(t.dump(), "0:\n");
    }

    #[test]
    fn heavier_agent_becomes_central() {
        let pos = [Cell::new(0, 0), Cell::new(2, 1)];
        let t = form_clusters(&pos, &weights(&[0.0, 1.0]), 5.0, 0).unwrap();
        assert_eq!(t.role, vec![Role::Member, Role::Central]);
        assert_eq!(t.central_of, vec![1, 1]);
        assert_eq!(t.dump(), "1: 0\n");
    }

    #[test]
    fn equal_weights_favour_lower_id_for_seed_zero() {
        let pos = [Cell::new(0, 0), Cell::new(1, 0)];
        let t = form_clusters(&pos, &weights(&[0.5, 0.5]), 2.0, 0).unwrap();
        assert_eq!(t.role, vec![Role::Central, Role::Member]);
    }

    #[test]
    fn chain_member_out_of_range_gets_promoted() {
        // 0 -- 1 -- 2 on a line with radius 2: 0 is strongest and covers 1
        // but not 2, and 1 outranks 2.
        let pos = [Cell::new(0, 0), Cell::new(2, 0), Cell::new(4, 0)];
        let t = form_clusters(&pos, &weights(&[3.0, 2.0, 1.0]), 2.0, 0).unwrap();
        assert_eq!(t.role, vec![Role::Central, Role::Member, Role::Central]);
        t.check(&pos).unwrap();
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let pos = [Cell::new(0, 0)];
        assert!(form_clusters(&pos, &weights(&[1.0]), 0.0, 0).is_err());
        assert!(form_clusters(&pos, &weights(&[1.0, 2.0]), 1.0, 0).is_err());
        assert!(form_clusters(&pos, &weights(&[f64::NAN]), 1.0, 0).is_err());
        assert!(form_clusters(&[], &[], 1.0, 0).is_err());
    }

    #[test]
    fn routing_singleton_and_small_cluster() {
        let pos = [Cell::new(0, 0), Cell::new(1, 0), Cell::new(0, 1), Cell::new(20, 20)];
        let t = form_clusters(&pos, &weights(&[9.0, 1.0, 2.0, 0.0]), 3.0, 0).unwrap();
        let out: Vec<Message> = (0..4).map(message).collect();
        let inbox = route(&t, &out).unwrap();
        assert_eq!(inbox[0].iter().map(|m| m.sender).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(inbox[1].iter().map(|m| m.sender).collect::<Vec<_>>(), vec![0]);
        assert_eq!(inbox[2].iter().map(|m| m.sender).collect::<Vec<_>>(), vec![0]);
        assert!(inbox[3].is_empty());
        assert!(route(&t, &out[..2]).is_err());
    }

    #[test]
    fn random_sixteen_agent_inbox_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..50 {
            let pos: Vec<Cell> = (0..16)
                .map(|_| Cell::new(rng.random_range(0..20), rng.random_range(0..20)))
                .collect();
            let w: Vec<f64> = (0..16).map(|_| rng.random()).collect();
            let t = form_clusters(&pos, &weights(&w), 3.0, 0).unwrap();
            let inbox = route(&t, &(0..16).map(message).collect::<Vec<_>>()).unwrap();
            // Enumerate clusters independently of `route`.
            let expected: usize = (0..16)
                .filter(|&c| t.central_of[c] == c)
                .map(|c| 2 * (0..16).filter(|&m| m != c && t.central_of[m] == c).count())
                .sum();
            assert_eq!(inbox.iter().map(Vec::len).sum::<usize>(), expected);
        }
    }

    #[test]
    fn eight_random_agents_pass_brute_force_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let pos: Vec<Cell> = (0..8)
                .map(|_| Cell::new(rng.random_range(0..20), rng.random_range(0..20)))
                .collect();
            let w: Vec<f64> = (0..8).map(|_| rng.random()).collect();
            let t = form_clusters(&pos, &weights(&w), 3.0, 0).unwrap();
            t.check(&pos).unwrap();
        }
    }

    fn arb_config() -> impl Strategy<Value = (Vec<Cell>, Vec<f64>, f64, u64)> {
        (1usize..24, 1u32..8, any::<u64>()).prop_flat_map(|(n, r, seed)| {
            (
                proptest::collection::vec((0i32..16, 0i32..16).prop_map(|(x, y)| Cell::new(x, y)), n),
                proptest::collection::vec(prop_oneof![Just(0.5), -1.0f64..1.0], n),
                Just(r as f64),
                Just(seed),
            )
        })
    }

    proptest! {
        #[test]
        fn election_reaches_fixed_point((pos, w, radius, seed) in arb_config()) {
            let t = form_clusters(&pos, &weights(&w), radius, seed).unwrap();
            prop_assert!(t.check(&pos).is_ok(), "{:?}", t.check(&pos));
            let rank = rank_by_weight(&weights(&w), seed).unwrap();
            prop_assert_eq!(election_round(&pos, &rank, radius, &t.role), t.role.clone());
            for c in 0..pos.len() {
                if t.role[c] == Role::Central {
                    prop_assert_eq!(t.central_of[c], c);
                }
            }
            let again = form_clusters(&pos, &weights(&w), radius, seed).unwrap();
            prop_assert_eq!(again, t);
        }

        #[test]
        fn relabeling_permutes_topology(pos in proptest::collection::vec((0i32..12, 0i32..12), 2..12),
                                        shift in 1usize..11) {
            let n = pos.len();
            let pos: Vec<Cell> = pos.into_iter().map(|(x, y)| Cell::new(x, y)).collect();
            // Distinct weights so no tie-breaking is involved.
            let w: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 + i as f64 / 1000.0).collect();
            let perm: Vec<usize> = (0..n).map(|k| (k + shift) % n).collect();
            let a = form_clusters(&pos, &weights(&w), 3.0, 0).unwrap();
            let pp: Vec<Cell> = perm.iter().map(|&i| pos[i]).collect();
            let pw: Vec<f64> = perm.iter().map(|&i| w[i]).collect();
            let b = form_clusters(&pp, &weights(&pw), 3.0, 0).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(a.role[i], b.role[k]);
                prop_assert_eq!(a.central_of[i], perm[b.central_of[k]]);
            }
        }
    }
}
