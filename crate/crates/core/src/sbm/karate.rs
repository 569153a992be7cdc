//! Zachary's karate club network.
//!
//! Agents 1 (the instructor) and 34 (the administrator) are stubborn with
//! opinions +1 and -1. The remaining 32 members are regular agents, reindexed
//! so that regular agents come first as everywhere else in the crate.

use super::{CommunityStructure, Edge, Network, SampledGraph};

/// The 78 friendship ties, 1-based member ids, sorted.
pub const KARATE_EDGES: [(u8, u8); 78] = [
    (1, 2), (1, 3), (1, 4), (1, 5), (1, 6), (1, 7), (1, 8), (1, 9), (1, 11), (1, 12),
    (1, 13), (1, 14), (1, 18), (1, 20), (1, 22), (1, 32), (2, 3), (2, 4), (2, 8), (2, 14),
    (2, 18), (2, 20), (2, 22), (2, 31), (3, 4), (3, 8), (3, 9), (3, 10), (3, 14), (3, 28),
    (3, 29), (3, 33), (4, 8), (4, 13), (4, 14), (5, 7), (5, 11), (6, 7), (6, 11), (6, 17),
    (7, 17), (9, 31), (9, 33), (9, 34), (10, 34), (14, 34), (15, 33), (15, 34), (16, 33), (16, 34),
    (19, 33), (19, 34), (20, 34), (21, 33), (21, 34), (23, 33), (23, 34), (24, 26), (24, 28), (24, 30),
    (24, 33), (24, 34), (25, 26), (25, 28), (25, 32), (26, 32), (27, 30), (27, 34), (28, 34), (29, 32),
    (29, 34), (30, 33), (30, 34), (31, 33), (31, 34), (32, 33), (32, 34), (33, 34),
];

/// FNV-1a over the member ids of [`KARATE_EDGES`] in order.
pub const KARATE_EDGE_CHECKSUM: u64 = 0x6e9c_739b_d8fd_d9bc;

/// Members siding with the instructor after the split. Member 9 follows the
/// usual convention and is placed with the instructor.
const INSTRUCTOR_FACTION: [u8; 17] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 11, 12, 13, 14, 17, 18, 20, 22];

const INSTRUCTOR: usize = 1;
const ADMINISTRATOR: usize = 34;

pub fn karate_edge_checksum(edges: &[(u8, u8)]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &(i, j) in edges {
        for b in [i, j] {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Internal agent index of a 1-based member id.
fn internal_index(member: usize) -> usize {
    match member {
        INSTRUCTOR => 32,
        ADMINISTRATOR => 33,
        m => m - 2,
    }
}

/// 1-based member id of an internal agent index.
pub fn karate_member_id(agent: usize) -> usize {
    match agent {
        32 => INSTRUCTOR,
        33 => ADMINISTRATOR,
        a => a + 2,
    }
}

/// The karate club as a network with two stubborn leaders and the instructor's
/// faction as community 1.
pub fn karate_club() -> Network {
    debug_assert_eq!(karate_edge_checksum(&KARATE_EDGES), KARATE_EDGE_CHECKSUM);
    let edges = KARATE_EDGES
        .iter()
        .map(|&(i, j)| Edge::new(internal_index(i.into()), internal_index(j.into())));
    let graph = SampledGraph::from_edges(32, 2, edges).expect("embedded karate edge list is simple");
    let labels = (0..32)
        .map(|a| {
            let member = karate_member_id(a) as u8;
            if INSTRUCTOR_FACTION.contains(&member) {
                1
            } else {
                2
            }
        })
        .collect();
    Network {
        graph,
        stubborn_opinions: vec![1.0, -1.0],
        truth: Some(CommunityStructure::new(labels).expect("labels are 1 or 2")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_list_matches_checksum() {
        assert_eq!(karate_edge_checksum(&KARATE_EDGES), KARATE_EDGE_CHECKSUM);
    }

    #[test]
    fn shape_and_leaders() {
        let net = karate_club();
        assert_eq!(net.graph.n_total(), 34);
        assert_eq!(net.graph.alpha(), 78);
        assert_eq!(net.graph.n_stubborn(), 2);
        assert_eq!(karate_member_id(32), 1);
        assert_eq!(karate_member_id(33), 34);
        assert_eq!(net.stubborn_opinions, vec![1.0, -1.0]);
        // the two leaders are not directly tied
        assert!(!net.graph.has_edge(32, 33));
        assert_eq!(net.graph.degree(32), 16);
        assert_eq!(net.graph.degree(33), 17);
    }

    #[test]
    fn factions_are_nonempty() {
        let truth = karate_club().truth.unwrap();
        assert_eq!(truth.len(), 32);
        assert_eq!(truth.members(1).count(), 16);
        assert_eq!(truth.members(2).count(), 16);
        // member 9 sits with the instructor, member 10 with the administrator
        assert_eq!(truth.labels()[internal_index(9)], 1);
        assert_eq!(truth.labels()[internal_index(10)], 2);
    }

    #[test]
    fn index_maps_are_inverse() {
        for m in 1..=34 {
            assert_eq!(karate_member_id(internal_index(m)), m);
        }
    }
}
