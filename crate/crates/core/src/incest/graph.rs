use std::collections::BTreeSet;

use super::IncestError;

/// `n = s + S(k - 1)` for agent `s ∈ 1..=S` at epoch `k ≥ 1`.
pub fn node_index(agent: usize, epoch: usize, agents: usize) -> Result<usize, IncestError> {
    if agent == 0 || agent > agents {
        return Err(IncestError::InvalidAgent { agent, agents });
    }
    if epoch == 0 {
        return Err(IncestError::InvalidEpoch);
    }
    Ok(agent + agents * (epoch - 1))
}

/// Growing causal DAG; edges only run from earlier to later nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InformationFlowGraph {
    agents: usize,
    /// `parents[n-1]` is the single-hop set `H_n`.
    parents: Vec<BTreeSet<usize>>,
}

impl InformationFlowGraph {
    pub fn new(agents: usize, nodes: usize) -> Self {
        assert!(agents > 0, "need at least one agent");
        InformationFlowGraph {
            agents,
            parents: vec![BTreeSet::new(); nodes],
        }
    }

    pub fn from_edges(
        agents: usize,
        nodes: usize,
        edges: &[(usize, usize)],
    ) -> Result<Self, IncestError> {
        let mut g = Self::new(agents, nodes);
        for &(from, to) in edges {
            g.add_edge(from, to)?;
        }
        Ok(g)
    }

    pub fn agent_count(&self) -> usize {
        self.agents
    }

    pub fn node_count(&self) -> usize {
        self.parents.len()
    }

    /// Agent and epoch of node `n`.
    pub fn coordinates(&self, node: usize) -> (usize, usize) {
        ((node - 1) % self.agents + 1, (node - 1) / self.agents + 1)
    }

    /// Appends a node with no incoming edges and returns its number.
    pub fn push_node(&mut self) -> usize {
        self.parents.push(BTreeSet::new());
        self.parents.len()
    }

    pub fn add_edge(&mut self, from: usize, to: usize) -> Result<(), IncestError> {
        if from == 0 || from >= to {
            return Err(IncestError::CausalityViolation { from, to });
        }
        self.check_node(to)?;
        self.parents[to - 1].insert(from);
        Ok(())
    }

    pub fn remove_edge(&mut self, from: usize, to: usize) -> bool {
        to >= 1 && to <= self.node_count() && self.parents[to - 1].remove(&from)
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        to >= 1 && to <= self.node_count() && self.parents[to - 1].contains(&from)
    }

    /// `H_n`, ascending.
    pub fn single_hop(&self, node: usize) -> Vec<usize> {
        self.parents[node - 1].iter().copied().collect()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(i, ps)| ps.iter().map(move |&m| (m, i + 1)))
    }

    /// `A_n` with `A(i, j) = 1` iff `i → j`.
    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        let n = self.node_count();
        let mut a = vec![vec![0u8; n]; n];
        for (m, to) in self.edges() {
            a[m - 1][to - 1] = 1;
        }
        a
    }

    /// The graph restricted to its first `nodes` nodes.
    pub fn prefix(&self, nodes: usize) -> Self {
        InformationFlowGraph {
            agents: self.agents,
            parents: self.parents[..nodes.min(self.node_count())].to_vec(),
        }
    }

    pub fn check_node(&self, node: usize) -> Result<(), IncestError> {
        if node == 0 || node > self.node_count() {
            return Err(IncestError::NodeOutOfRange {
                node,
                nodes: self.node_count(),
            });
        }
        Ok(())
    }

    fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.node_count()];
        for (m, to) in self.edges() {
            children[m - 1].push(to);
        }
        children
    }

    /// Reachability closure, cross-checked against `sgn((I - A)⁻¹)`.
    pub fn transitive_closure(&self) -> Result<ClosureView, IncestError> {
        let closure = self.reachability();
        let inverse = self.inverse_sign();
        for (i, (r, s)) in closure.iter().zip(&inverse).enumerate() {
            if let Some(j) = r.iter().zip(s).position(|(a, b)| a != b) {
                return Err(IncestError::ClosureMismatch {
                    row: i + 1,
                    col: j + 1,
                });
            }
        }
        Ok(ClosureView {
            closure,
            adjacency: self.adjacency_matrix(),
        })
    }

    /// Depth-first reachability in reverse node order (node order is topological).
    pub fn reachability(&self) -> Vec<Vec<u8>> {
        let n = self.node_count();
        let children = self.children();
        let mut reach = vec![vec![0u8; n]; n];
        for i in (0..n).rev() {
            reach[i][i] = 1;
            for &c in &children[i] {
                let (head, tail) = reach.split_at_mut(c - 1);
                for (r, &t) in head[i].iter_mut().zip(&tail[0]) {
                    *r |= t;
                }
            }
        }
        reach
    }

    /// `sgn((I - A)⁻¹)` by back substitution of `(I - A) M = I`.
    ///
    /// `M(i, j)` counts the paths from `i` to `j`; counts saturate at
    /// `u128::MAX`, which leaves their sign exact.
    pub fn inverse_sign(&self) -> Vec<Vec<u8>> {
        let n = self.node_count();
        let children = self.children();
        let mut paths = vec![vec![0u128; n]; n];
        for i in (0..n).rev() {
            let mut row = vec![0u128; n];
            row[i] = 1;
            for &c in &children[i] {
                for (r, &p) in row.iter_mut().zip(&paths[c - 1]) {
                    *r = r.saturating_add(p);
                }
            }
            paths[i] = row;
        }
        paths
            .into_iter()
            .map(|row| row.into_iter().map(|p| u8::from(p != 0)).collect())
            .collect()
    }
}

/// Transitive closure `T_n` together with the adjacency it was built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureView {
    closure: Vec<Vec<u8>>,
    adjacency: Vec<Vec<u8>>,
}

impl ClosureView {
    pub fn size(&self) -> usize {
        self.closure.len()
    }

    /// `T(i, j)`, 1-based.
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.closure[i - 1][j - 1]
    }

    pub fn matrix(&self) -> &[Vec<u8>] {
        &self.closure
    }

    /// Upper-left `nodes × nodes` block, i.e. `T_nodes`.
    pub fn prefix(&self, nodes: usize) -> Vec<Vec<u8>> {
        self.closure[..nodes]
            .iter()
            .map(|row| row[..nodes].to_vec())
            .collect()
    }

    /// `H_n = {m : A(m, n) = 1}`.
    pub fn single_hop(&self, node: usize) -> Vec<usize> {
        (1..node)
            .filter(|&m| self.adjacency[m - 1][node - 1] == 1)
            .collect()
    }

    /// `F_n = {m < n : T(m, n) = 1}`.
    pub fn multi_hop(&self, node: usize) -> Vec<usize> {
        (1..node).filter(|&m| self.get(m, node) == 1).collect()
    }

    /// `t_n`: the first `n - 1` entries of column `n`.
    pub fn column_prefix(&self, node: usize) -> Vec<u8> {
        (1..node).map(|m| self.get(m, node)).collect()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.adjacency[from - 1][to - 1] == 1
    }
}

/// Reads the plain-text edge list format:
///
/// ```text
/// S=2 N=6
/// 1 3
/// 2 3
/// ```
///
/// Blank lines and `#` comments are ignored.
pub fn parse_edge_list(text: &str) -> Result<InformationFlowGraph, IncestError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (header_line, header) = lines.next().ok_or(IncestError::Parse {
        line: 1,
        message: "missing `S=<agents> N=<nodes>` header".into(),
    })?;
    let mut agents = None;
    let mut nodes = None;
    for field in header.split_whitespace() {
        let parse_err = || IncestError::Parse {
            line: header_line,
            message: format!("bad header field `{field}`"),
        };
        let (key, value) = field.split_once('=').ok_or_else(parse_err)?;
        let value: usize = value.parse().map_err(|_| parse_err())?;
        match key {
            "S" => agents = Some(value),
            "N" => nodes = Some(value),
            _ => return Err(parse_err()),
        }
    }
    let (Some(agents), Some(nodes)) = (agents, nodes) else {
        return Err(IncestError::Parse {
            line: header_line,
            message: "header must define both S and N".into(),
        });
    };
    if agents == 0 {
        return Err(IncestError::Parse {
            line: header_line,
            message: "S must be positive".into(),
        });
    }
    let mut graph = InformationFlowGraph::new(agents, nodes);
    for (line, content) in lines {
        let fields: Vec<&str> = content.split_whitespace().collect();
        let parsed: Option<Vec<usize>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed.as_deref() {
            Some(&[from, to]) => graph.add_edge(from, to).map_err(|e| IncestError::Parse {
                line,
                message: e.to_string(),
            })?,
            _ => {
                return Err(IncestError::Parse {
                    line,
                    message: format!("expected `<from> <to>`, got `{content}`"),
                })
            }
        }
    }
    Ok(graph)
}
