//! Directed communication topology, its Laplacian, and the structural
//! checks that justify leader-follower consensus on a platoon chain.
//!
//! Agents are 0-indexed everywhere; agent 0 is the leader.

use nalgebra::{DMatrix, Vector2};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("a platoon needs at least one follower")]
    EmptyPlatoon,
    #[error("agent {agent} lists out-of-range neighbor {neighbor}")]
    InvalidNeighbor { agent: usize, neighbor: usize },
    #[error("agent {agent} lists itself as a neighbor")]
    SelfLoop { agent: usize },
}

/// Who receives from whom: `neighbors[i]` are the agents whose predictions
/// agent `i` consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(neighbors: Vec<Vec<usize>>) -> Result<Self, GraphError> {
        let n = neighbors.len();
        for (agent, list) in neighbors.iter().enumerate() {
            for &j in list {
                if j >= n {
                    return Err(GraphError::InvalidNeighbor { agent, neighbor: j });
                }
                if j == agent {
                    return Err(GraphError::SelfLoop { agent });
                }
            }
        }
        Ok(Self { neighbors })
    }

    /// Platoon chain with `follower_count` followers behind a leader that
    /// receives from nobody: follower i hears i-1 and i+1, the last
    /// follower hears only its predecessor.
    pub fn path_graph(follower_count: usize) -> Result<Self, GraphError> {
        if follower_count == 0 {
            return Err(GraphError::EmptyPlatoon);
        }
        let k = follower_count;
        let mut neighbors = vec![Vec::new()];
        for i in 1..=k {
            if i < k {
                neighbors.push(vec![i - 1, i + 1]);
            } else {
                neighbors.push(vec![i - 1]);
            }
        }
        Ok(Self { neighbors })
    }

    pub fn agent_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn follower_count(&self) -> usize {
        self.neighbors.len().saturating_sub(1)
    }

    pub fn neighbors(&self, agent: usize) -> &[usize] {
        &self.neighbors[agent]
    }

    pub fn neighbor_lists(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    /// Graph Laplacian L = D - A, with `A[i][j] = 1` iff agent i receives
    /// from agent j. Rows sum to zero by construction.
    pub fn laplacian(&self) -> LaplacianMatrix {
        let n = self.agent_count();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (i, list) in self.neighbors.iter().enumerate() {
            for &j in list {
                m[(i, j)] -= 1.0;
                m[(i, i)] += 1.0;
            }
        }
        LaplacianMatrix(m)
    }

    /// Per-follower consensus error ‖Σ_{j∈N_i} (ŷ_i - ŷ_j)‖ for followers
    /// 1..=K, given one predicted output per agent.
    pub fn local_consensus_errors(&self, predictions: &[Vector2<f64>]) -> Vec<f64> {
        assert_eq!(
            predictions.len(),
            self.agent_count(),
            "one prediction per agent required"
        );
        (1..self.agent_count())
            .map(|i| {
                let mut sum = Vector2::zeros();
                for &j in &self.neighbors[i] {
                    sum += predictions[i] - predictions[j];
                }
                sum.norm()
            })
            .collect()
    }
}

/// Dense Laplacian of a communication graph.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix(pub DMatrix<f64>);

impl LaplacianMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Numerical rank via singular values, relative tolerance 1e-9.
    pub fn rank(&self) -> usize {
        let svd = self.0.clone().svd(false, false);
        let max_sv = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        if max_sv == 0.0 {
            return 0;
        }
        svd.singular_values
            .iter()
            .filter(|&&s| s > 1e-9 * max_sv)
            .count()
    }

    /// True iff the graph contains a rooted out-branching, i.e. some agent
    /// reaches every other along directed edges: rank(L) = n - 1.
    pub fn has_rooted_out_branching(&self) -> bool {
        self.rank() == self.0.nrows().saturating_sub(1)
    }
}
