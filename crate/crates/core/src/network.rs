//! Static friendship graph built by preferential attachment, plus the degree
//! strata used to break metrics down by connectedness.

use std::collections::VecDeque;
use std::io::Write;

use crate::error::{Error, Result};
use crate::rng::RngStream;

pub type AgentId = u32;

/// Undirected simple graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    adjacency: Vec<Vec<AgentId>>,
}

/// Grows a graph from a complete nucleus; every later node links to `m`
/// distinct existing nodes chosen with probability proportional to degree.
pub fn generate_network(rng: &mut RngStream, agents: usize, nucleus_size: usize, m: usize) -> Result<Network> {
    if m == 0 {
        return Err(Error::invalid("m must be at least 1"));
    }
    if nucleus_size < 2 {
        return Err(Error::invalid("nucleus size must be at least 2"));
    }
    if nucleus_size < m {
        return Err(Error::invalid(format!(
            "nucleus size {nucleus_size} is smaller than m = {m}"
        )));
    }
    if agents < nucleus_size {
        return Err(Error::invalid(format!(
            "agent count {agents} is smaller than nucleus size {nucleus_size}"
        )));
    }
    if agents > AgentId::MAX as usize {
        return Err(Error::invalid(format!("agent count {agents} exceeds id range")));
    }

    let mut adjacency: Vec<Vec<AgentId>> = vec![Vec::new(); agents];
    // Each edge contributes both endpoints, so a uniform pick is degree-proportional.
    let mut endpoints: Vec<AgentId> =
        Vec::with_capacity(nucleus_size * (nucleus_size - 1) + 2 * m * (agents - nucleus_size));

    for a in 0..nucleus_size {
        for b in (a + 1)..nucleus_size {
            adjacency[a].push(b as AgentId);
            adjacency[b].push(a as AgentId);
            endpoints.push(a as AgentId);
            endpoints.push(b as AgentId);
        }
    }

    let mut targets: Vec<AgentId> = Vec::with_capacity(m);
    for node in nucleus_size..agents {
        targets.clear();
        while targets.len() < m {
            let candidate = endpoints[rng.below(endpoints.len())];
            if !targets.contains(&candidate) {
                targets.push(candidate);
            }
        }
        for &t in &targets {
            adjacency[node].push(t);
            adjacency[t as usize].push(node as AgentId);
            endpoints.push(node as AgentId);
            endpoints.push(t);
        }
    }

    for list in &mut adjacency {
        list.sort_unstable();
    }
    Ok(Network { adjacency })
}

impl Network {
    /// Builds a network from an explicit edge list. Mostly useful in tests.
    pub fn from_edges(agents: usize, edges: &[(AgentId, AgentId)]) -> Result<Network> {
        let mut adjacency: Vec<Vec<AgentId>> = vec![Vec::new(); agents];
        for &(a, b) in edges {
            if a == b {
                return Err(Error::invalid(format!("self-loop on {a}")));
            }
            if a as usize >= agents || b as usize >= agents {
                return Err(Error::invalid(format!("edge ({a}, {b}) out of range")));
            }
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            let before = list.len();
            list.dedup();
            if list.len() != before {
                return Err(Error::invalid("duplicate edge"));
            }
        }
        Ok(Network { adjacency })
    }

    pub fn agent_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn friends_of(&self, agent: AgentId) -> Result<&[AgentId]> {
        self.adjacency.get(agent as usize).map(Vec::as_slice).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "agent {agent} out of range (network has {} agents)",
                self.adjacency.len()
            ))
        })
    }

    pub fn degree(&self, agent: AgentId) -> usize {
        self.adjacency[agent as usize].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges as `(a, b)` with `a < b`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (AgentId, AgentId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(a, list)| {
            let a = a as AgentId;
            list.iter().copied().filter(move |&b| b > a).map(move |b| (a, b))
        })
    }

    pub fn is_connected(&self) -> bool {
        if self.adjacency.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.adjacency.len()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(a) = queue.pop_front() {
            for &b in &self.adjacency[a] {
                if !seen[b as usize] {
                    seen[b as usize] = true;
                    reached += 1;
                    queue.push_back(b as usize);
                }
            }
        }
        reached == self.adjacency.len()
    }

    /// Checks the simple-graph invariants: no self-loops, no duplicates, symmetry.
    pub fn is_simple(&self) -> bool {
        self.adjacency.iter().enumerate().all(|(a, list)| {
            list.windows(2).all(|w| w[0] < w[1])
                && list
                    .iter()
                    .all(|&b| b as usize != a && self.adjacency[b as usize].binary_search(&(a as AgentId)).is_ok())
        })
    }

    /// Writes the edge list as `agent_a,agent_b` rows, ascending.
    pub fn write_edge_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "agent_a,agent_b")?;
        for (a, b) in self.edges() {
            writeln!(out, "{a},{b}")?;
        }
        Ok(())
    }
}

/// Partition of agents into degree strata; stratum 0 is the best connected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StratumAssignment {
    stratum_of: Vec<u8>,
    num_strata: usize,
}

impl StratumAssignment {
    pub fn num_strata(&self) -> usize {
        self.num_strata
    }

    pub fn stratum_of(&self, agent: AgentId) -> usize {
        self.stratum_of[agent as usize] as usize
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.stratum_of
    }

    pub fn members(&self, stratum: usize) -> Vec<AgentId> {
        self.stratum_of
            .iter()
            .enumerate()
            .filter(|(_, &s)| s as usize == stratum)
            .map(|(a, _)| a as AgentId)
            .collect()
    }
}

/// Cuts the degree-descending agent order into `num_strata` contiguous groups,
/// each closing once the running degree total reaches its share of the sum.
pub fn stratify_by_degree(net: &Network, num_strata: usize) -> StratumAssignment {
    stratify_degrees(&net.degrees(), num_strata)
}

pub fn stratify_degrees(degrees: &[usize], num_strata: usize) -> StratumAssignment {
    let num_strata = num_strata.clamp(1, u8::MAX as usize + 1);
    let mut order: Vec<usize> = (0..degrees.len()).collect();
    order.sort_by(|&a, &b| degrees[b].cmp(&degrees[a]).then(a.cmp(&b)));

    let total: usize = degrees.iter().sum();
    let mut stratum_of = vec![0u8; degrees.len()];
    let mut current = 0usize;
    let mut cumulative = 0usize;
    for agent in order {
        stratum_of[agent] = current as u8;
        cumulative += degrees[agent];
        // cumulative / total >= (current + 1) / num_strata, in integers
        if current + 1 < num_strata && cumulative * num_strata >= (current + 1) * total {
            current += 1;
        }
    }
    StratumAssignment { stratum_of, num_strata }
}
