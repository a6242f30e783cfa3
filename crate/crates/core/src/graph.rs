//! Directed communication graphs and the Laplacian spectra that set the
//! observer and consensus gain floors.
//!
//! Adjacency uses the receiver-row convention: `W[i][j] = 1` iff node `j`
//! transmits to node `i`, so row `i` of `L = D - W` lists the in-neighbours of
//! `i`. Sensing graphs carry the target as leader node 0; actuation graphs are
//! leaderless and index pursuers from 0.

use std::collections::{HashSet, VecDeque};

use nalgebra::{Complex, DMatrix, DVector, Matrix4, SymmetricEigen};

use crate::error::{Error, Result};

pub mod random;

/// Relative tolerance used for positivity assertions on symmetric spectra.
pub const SPECTRAL_TOLERANCE: f64 = 1e-9;

/// A validated directed graph with unit edge weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
    has_leader: bool,
}

impl Topology {
    /// Builds a topology, rejecting self-loops, duplicates and out-of-range
    /// endpoints. Edges are `(from, to)`: information flows from `from` to `to`.
    pub fn new(n_nodes: usize, edges: &[(usize, usize)], has_leader: bool) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        for &(from, to) in edges {
            if from >= n_nodes || to >= n_nodes {
                return Err(Error::EdgeOutOfRange { from, to, n_nodes });
            }
            if from == to {
                return Err(Error::SelfLoop { node: from });
            }
            if !seen.insert((from, to)) {
                return Err(Error::DuplicateEdge { from, to });
            }
        }
        if has_leader && edges.iter().any(|&(_, to)| to == 0) {
            return Err(Error::InvalidTopology(
                "the leader (node 0) cannot receive information".into(),
            ));
        }
        Ok(Self {
            n_nodes,
            edges: edges.to_vec(),
            has_leader,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_leader(&self) -> bool {
        self.has_leader
    }

    /// Nodes that transmit to `node`.
    pub fn in_neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |&&(_, to)| to == node)
            .map(|&(from, _)| from)
    }

    fn out_lists(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_nodes];
        for &(from, to) in &self.edges {
            out[from].push(to);
        }
        out
    }

    fn reachable_from(&self, root: usize, out: &[Vec<usize>]) -> Vec<bool> {
        let mut seen = vec![false; self.n_nodes];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(node) = queue.pop_front() {
            for &next in &out[node] {
                if !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    /// True iff every node is reachable from `root` along directed edges.
    pub fn has_spanning_tree(&self, root: usize) -> Result<bool> {
        if root >= self.n_nodes {
            return Err(Error::NodeOutOfRange {
                node: root,
                n_nodes: self.n_nodes,
            });
        }
        let out = self.out_lists();
        Ok(self.reachable_from(root, &out).into_iter().all(|r| r))
    }

    /// True iff every ordered pair of nodes is mutually reachable.
    pub fn is_strongly_connected(&self) -> bool {
        if self.n_nodes <= 1 {
            return true;
        }
        let out = self.out_lists();
        if !self.reachable_from(0, &out).into_iter().all(|r| r) {
            return false;
        }
        let mut reversed = vec![Vec::new(); self.n_nodes];
        for &(from, to) in &self.edges {
            reversed[to].push(from);
        }
        self.reachable_from(0, &reversed).into_iter().all(|r| r)
    }

    /// The subgraph induced by `keep`, re-indexed in the order given.
    /// For leader graphs `keep` must start with node 0.
    pub fn induced(&self, keep: &[usize]) -> Result<Self> {
        let mut index = vec![None; self.n_nodes];
        for (new, &old) in keep.iter().enumerate() {
            if old >= self.n_nodes {
                return Err(Error::NodeOutOfRange {
                    node: old,
                    n_nodes: self.n_nodes,
                });
            }
            index[old] = Some(new);
        }
        if self.has_leader && keep.first() != Some(&0) {
            return Err(Error::InvalidTopology(
                "an induced leader graph must keep node 0 first".into(),
            ));
        }
        let edges: Vec<_> = self
            .edges
            .iter()
            .filter_map(|&(from, to)| Some((index[from]?, index[to]?)))
            .collect();
        Self::new(keep.len(), &edges, self.has_leader)
    }

    /// The same node set with every edge touching a node in `removed` dropped.
    /// Indices stay stable, which is what the simulator needs for excision.
    pub fn without_edges_of(&self, removed: &[usize]) -> Self {
        let edges = self
            .edges
            .iter()
            .copied()
            .filter(|(from, to)| !removed.contains(from) && !removed.contains(to))
            .collect();
        Self {
            n_nodes: self.n_nodes,
            edges,
            has_leader: self.has_leader,
        }
    }

    pub fn laplacian_bundle(&self) -> LaplacianBundle {
        LaplacianBundle::new(self)
    }
}

/// Adjacency, in-degree and Laplacian matrices of a [`Topology`].
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianBundle {
    pub adjacency: DMatrix<f64>,
    pub in_degree: DVector<f64>,
    pub laplacian: DMatrix<f64>,
    /// Pursuer block `L_PP` (leader graphs only).
    pub pursuer_block: Option<DMatrix<f64>>,
    /// Leader coupling column `L_EP` (leader graphs only).
    pub leader_coupling: Option<DVector<f64>>,
}

impl LaplacianBundle {
    fn new(topo: &Topology) -> Self {
        let n = topo.n_nodes;
        let mut adjacency = DMatrix::zeros(n, n);
        for &(from, to) in &topo.edges {
            adjacency[(to, from)] = 1.0;
        }
        let in_degree = DVector::from_iterator(n, adjacency.row_iter().map(|row| row.sum()));
        let laplacian = DMatrix::from_diagonal(&in_degree) - &adjacency;
        let (pursuer_block, leader_coupling) = if topo.has_leader && n > 0 {
            (
                Some(laplacian.view((1, 1), (n - 1, n - 1)).into_owned()),
                Some(laplacian.view((1, 0), (n - 1, 1)).column(0).into_owned()),
            )
        } else {
            (None, None)
        };
        Self {
            adjacency,
            in_degree,
            laplacian,
            pursuer_block,
            leader_coupling,
        }
    }
}

/// The diagonal weighting `R` and the symmetric matrix `Q = R L + L^T R`
/// built from a leader-follower pursuer block.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingSpectra {
    /// Diagonal of `R`, i.e. `(L_PP^T)^{-1} 1`.
    pub r_diag: DVector<f64>,
    pub q: DMatrix<f64>,
    pub lambda1_q: f64,
    pub lambda_max_r: f64,
    pub lambda_min_r: f64,
}

/// Builds `R` and `Q` for a pursuer block and checks both are positive definite.
pub fn sensing_spectra(pursuer_block: &DMatrix<f64>) -> Result<SensingSpectra> {
    let n = pursuer_block.nrows();
    if n == 0 || pursuer_block.ncols() != n {
        return Err(Error::InvalidTopology(
            "pursuer block must be a non-empty square matrix".into(),
        ));
    }
    let transpose = pursuer_block.transpose();
    let singular = transpose.clone().singular_values();
    let s_max = singular.max();
    if singular.min() <= 1e-12 * s_max.max(1.0) {
        return Err(Error::InvalidTopology(
            "pursuer block is singular: the target does not reach every pursuer".into(),
        ));
    }
    let r_diag = transpose
        .lu()
        .solve(&DVector::from_element(n, 1.0))
        .ok_or_else(|| Error::InvalidTopology("pursuer block is singular".into()))?;
    let lambda_max_r = r_diag.max();
    let lambda_min_r = r_diag.min();
    if !(lambda_min_r > 0.0) {
        return Err(Error::InvalidTopology(format!(
            "weighting R is not positive definite (min diagonal {lambda_min_r})"
        )));
    }
    let r = DMatrix::from_diagonal(&r_diag);
    let raw = &r * pursuer_block + pursuer_block.transpose() * &r;
    let q = (&raw + raw.transpose()) * 0.5;
    let lambda1_q = SymmetricEigen::new(q.clone()).eigenvalues.min();
    let scale = q.norm().max(1.0);
    if !(lambda1_q > SPECTRAL_TOLERANCE * scale) {
        return Err(Error::InvalidTopology(format!(
            "Q is not positive definite (smallest eigenvalue {lambda1_q})"
        )));
    }
    Ok(SensingSpectra {
        r_diag,
        q,
        lambda1_q,
        lambda_max_r,
        lambda_min_r,
    })
}

/// Second-smallest eigenvalue of the symmetric part `(L + L^T)/2`.
pub fn mirror_fiedler(laplacian: &DMatrix<f64>) -> Result<f64> {
    let n = laplacian.nrows();
    if n < 2 || laplacian.ncols() != n {
        return Err(Error::InvalidTopology(
            "the mirror Fiedler value needs a square Laplacian with at least two nodes".into(),
        ));
    }
    let mirror = (laplacian + laplacian.transpose()) * 0.5;
    let mut eigen: Vec<f64> = SymmetricEigen::new(mirror).eigenvalues.iter().copied().collect();
    eigen.sort_by(f64::total_cmp);
    Ok(eigen[1])
}

/// Smallest value of `x^T ((L + L^T)/2) x / ‖x‖²` over nonzero zero-mean `x`.
///
/// For balanced graphs the all-ones vector is an eigenvector of the symmetric
/// part and this equals [`mirror_fiedler`]. For unbalanced graphs it can be
/// strictly smaller, in which case the mirror bound does not hold.
pub fn zero_mean_floor(laplacian: &DMatrix<f64>) -> Result<f64> {
    let n = laplacian.nrows();
    if n < 2 || laplacian.ncols() != n {
        return Err(Error::InvalidTopology(
            "the zero-mean floor needs a square Laplacian with at least two nodes".into(),
        ));
    }
    let mirror = (laplacian + laplacian.transpose()) * 0.5;
    let mean = DMatrix::from_element(n, n, 1.0 / n as f64);
    let projector = DMatrix::identity(n, n) - &mean;
    // lift the all-ones direction above every other eigenvalue
    let lift = mirror.norm() + 1.0;
    let restricted = &projector * mirror * &projector + mean * lift;
    Ok(SymmetricEigen::new(restricted).eigenvalues.min())
}

/// Complex eigenvalues of a square matrix, sorted by real part.
pub fn eigenvalues(matrix: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut values: Vec<_> = matrix.complex_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| a.re.total_cmp(&b.re));
    values
}

/// The constant-velocity target drift matrix.
pub fn target_drift() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 0.0,
    )
}

/// Lower bounds on the observer gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverFloors {
    /// Strict bound: `K1` must exceed it.
    pub k1_min: f64,
    /// Inclusive bound: `K2` may equal it.
    pub k2_min: f64,
}

/// Observer gain floors. `‖R ⊗ A‖₂` is evaluated as `λmax(R) σmax(A)`, which
/// is exact for a positive diagonal `R`.
pub fn observer_gain_floors(spectra: &SensingSpectra, drift: &Matrix4<f64>) -> Result<ObserverFloors> {
    if !(spectra.lambda1_q > 0.0) {
        return Err(Error::InvalidTopology(format!(
            "smallest eigenvalue of Q is {} (must be positive)",
            spectra.lambda1_q
        )));
    }
    let sigma_max = drift.singular_values().max();
    Ok(ObserverFloors {
        k1_min: 2.0 * spectra.lambda_max_r * sigma_max / spectra.lambda1_q,
        k2_min: 2.0 * spectra.lambda_max_r / spectra.lambda1_q,
    })
}

/// Consensus gain floor `M2 >= 1 / λ2`.
pub fn controller_gain_floor(fiedler: f64) -> Result<f64> {
    if !(fiedler > 0.0) {
        return Err(Error::InvalidTopology(format!(
            "mirror Fiedler value {fiedler} is not positive"
        )));
    }
    Ok(1.0 / fiedler)
}

/// The sensing graph used in the four-pursuer engagements (target is node 0).
pub fn reference_sensing_graph() -> Topology {
    Topology::new(5, &[(0, 1), (1, 2), (1, 3), (2, 4), (3, 2), (4, 1)], true)
        .expect("reference sensing graph is valid")
}

/// The actuation graph used in the four-pursuer engagements, 0-based.
pub fn reference_actuation_graph() -> Topology {
    Topology::new(4, &[(0, 1), (0, 2), (1, 3), (3, 0), (2, 1)], false)
        .expect("reference actuation graph is valid")
}
