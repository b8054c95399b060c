//! Weighted digraphs with self-loops, per-agent switching signals and
//! connectivity tests.
//!
//! An edge `(i, j)` means that agent `j` belongs to the neighborhood of agent
//! `i`, so information flows from `j` to `i` and `a_ij > 0`.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for the null-space residual and PSD check of [`left_perron_weights`].
pub const PERRON_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("adjacency matrix must be square with {expected} rows, got {rows}x{cols}")]
    BadShape {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("adjacency entry ({0}, {1}) is negative or not finite")]
    BadWeight(usize, usize),
    #[error("node {0} has no self-loop")]
    MissingSelfLoop(usize),
    #[error("node index {index} out of range for {n} nodes")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("time {t} is outside the schedule horizon [{start}, {end}]")]
    OutOfHorizon { t: f64, start: f64, end: f64 },
    #[error("agent {0} has no neighborhood signal at the schedule start")]
    MissingSignal(usize),
    #[error("agent {agent} switches at {t1} and {t2}, violating the dwell floor {dwell}")]
    DwellViolation {
        agent: usize,
        t1: f64,
        t2: f64,
        dwell: f64,
    },
    #[error("weight table has no positive weight for edge ({0}, {1})")]
    MissingWeight(usize, usize),
    #[error("graphs disagree on the weight of edge ({0}, {1})")]
    InconsistentWeights(usize, usize),
    #[error("laplacian is not that of a strongly connected digraph")]
    NotStronglyConnected,
    #[error("invalid schedule: {0}")]
    Invalid(String),
}

/// Weighted digraph whose adjacency matrix always has a positive diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Digraph {
    a: DMatrix<f64>,
}

impl Digraph {
    /// Validates `a`: square, nonnegative, finite, positive diagonal.
    pub fn from_adjacency(a: DMatrix<f64>) -> Result<Self, TopologyError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(TopologyError::BadShape {
                expected: n,
                rows: n,
                cols: a.ncols(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let w = a[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(TopologyError::BadWeight(i, j));
                }
            }
            if a[(i, i)] <= 0.0 {
                return Err(TopologyError::MissingSelfLoop(i));
            }
        }
        Ok(Digraph { a })
    }

    /// Like [`Digraph::from_adjacency`], but a zero diagonal entry becomes 1.
    pub fn with_self_loops(mut a: DMatrix<f64>) -> Result<Self, TopologyError> {
        let n = a.nrows().min(a.ncols());
        for i in 0..n {
            if a[(i, i)] == 0.0 {
                a[(i, i)] = 1.0;
            }
        }
        Self::from_adjacency(a)
    }

    /// Unit-weight graph from an edge list; self-loops are added.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, TopologyError> {
        let mut a = DMatrix::identity(n, n);
        for &(i, j) in edges {
            for index in [i, j] {
                if index >= n {
                    return Err(TopologyError::NodeOutOfRange { index, n });
                }
            }
            a[(i, j)] = 1.0;
        }
        Self::from_adjacency(a)
    }

    pub fn complete(n: usize) -> Self {
        Digraph {
            a: DMatrix::from_element(n, n, 1.0),
        }
    }

    /// Directed cycle `i → i+1 mod n` with self-loops.
    pub fn directed_cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges).expect("valid cycle")
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.a[(i, j)]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.a[(i, j)] > 0.0
    }

    /// `(j, a_ij)` for every `j ∈ 𝒩_i`, ascending, self included.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.n()).filter_map(move |j| {
            let w = self.a[(i, j)];
            (w > 0.0).then_some((j, w))
        })
    }

    /// Neighbors of `i` other than `i` itself.
    pub fn neighbor_indices(&self, i: usize) -> Vec<usize> {
        self.neighbors(i)
            .map(|(j, _)| j)
            .filter(|&j| j != i)
            .collect()
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Bitmask over the non-self nodes in ascending order.
    pub fn neighborhood_index(&self, i: usize) -> u64 {
        let mut bits = 0u64;
        let mut pos = 0;
        for j in 0..self.n() {
            if j == i {
                continue;
            }
            if self.has_edge(i, j) {
                bits |= 1 << pos;
            }
            pos += 1;
        }
        bits
    }

    fn to_petgraph(&self) -> DiGraph<(), ()> {
        let n = self.n();
        let mut g = DiGraph::with_capacity(n, n * n);
        let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
        for (i, j) in self.edges() {
            if i != j {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
        g
    }
}

impl TryFrom<Vec<Vec<f64>>> for Digraph {
    type Error = TopologyError;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(TopologyError::BadShape {
                expected: n,
                rows: n,
                cols: bad.len(),
            });
        }
        Digraph::from_adjacency(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

impl From<Digraph> for Vec<Vec<f64>> {
    fn from(g: Digraph) -> Self {
        let n = g.n();
        (0..n)
            .map(|i| (0..n).map(|j| g.a[(i, j)]).collect())
            .collect()
    }
}

/// Strongly connected components, with the number of components having no
/// edge leaving them.
fn condensation_sinks(g: &Digraph) -> (usize, usize) {
    let pg = g.to_petgraph();
    let sccs = tarjan_scc(&pg);
    let mut component = vec![0usize; g.n()];
    for (c, members) in sccs.iter().enumerate() {
        for node in members {
            component[node.index()] = c;
        }
    }
    let mut has_exit = vec![false; sccs.len()];
    for (i, j) in g.edges() {
        if component[i] != component[j] {
            has_exit[component[i]] = true;
        }
    }
    (sccs.len(), has_exit.iter().filter(|&&e| !e).count())
}

/// Every ordered pair is joined by a directed path.
pub fn is_strongly_connected(g: &Digraph) -> bool {
    g.n() <= 1 || condensation_sinks(g).0 == 1
}

/// Some node is reachable from every node.
pub fn is_quasi_strongly_connected(g: &Digraph) -> bool {
    g.n() <= 1 || condensation_sinks(g).1 == 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    Strong,
    Quasi,
}

pub fn is_connected(g: &Digraph, mode: Connectivity) -> bool {
    match mode {
        Connectivity::Strong => is_strongly_connected(g),
        Connectivity::Quasi => is_quasi_strongly_connected(g),
    }
}

/// `L = D − A` with `d_i = Σ_j a_ij`.
pub fn laplacian(g: &Digraph) -> DMatrix<f64> {
    let a = g.adjacency();
    let mut l = -a.clone();
    for i in 0..g.n() {
        l[(i, i)] += a.row(i).sum();
    }
    l
}

/// Positive `ξ` with `Σ ξ = 1`, `ξᵀL = 0` and `sym(diag(ξ) L) ⪰ 0`.
pub fn left_perron_weights(l: &DMatrix<f64>) -> Result<DVector<f64>, TopologyError> {
    let n = l.nrows();
    if l.ncols() != n {
        return Err(TopologyError::BadShape {
            expected: n,
            rows: n,
            cols: l.ncols(),
        });
    }
    let adjacency = DMatrix::from_fn(
        n,
        n,
        |i, j| if i == j || l[(i, j)] < 0.0 { 1.0 } else { 0.0 },
    );
    let g = Digraph::from_adjacency(adjacency)?;
    if !is_strongly_connected(&g) {
        return Err(TopologyError::NotStronglyConnected);
    }
    let mut m = DMatrix::zeros(n + 1, n);
    m.view_mut((0, 0), (n, n)).copy_from(&l.transpose());
    m.row_mut(n).fill(1.0);
    let mut b = DVector::zeros(n + 1);
    b[n] = 1.0;
    let xi = m
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| TopologyError::Invalid(e.to_string()))?;
    if xi.iter().any(|&x| x <= 0.0) {
        return Err(TopologyError::NotStronglyConnected);
    }
    let scale = l.abs().max().max(1.0);
    if (xi.transpose() * l).norm() > PERRON_TOL * scale {
        return Err(TopologyError::NotStronglyConnected);
    }
    let d = DMatrix::from_diagonal(&xi) * l;
    let sym = 0.5 * (&d + d.transpose());
    if sym.symmetric_eigenvalues().min() < -PERRON_TOL * scale {
        return Err(TopologyError::NotStronglyConnected);
    }
    Ok(xi)
}

/// Random rooted tree plus an independent uniform {0, 1} mask.
///
/// Entries are in `{0, 1, 2}`. The tree points every node towards a random
/// center, so the result is quasi-strongly connected. Diagonal entries are
/// `1 + mask_ii`, which keeps the mandatory self-loop.
pub fn random_qsc_graph<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Digraph {
    assert!(n >= 1, "graph needs at least one node");
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut a = DMatrix::zeros(n, n);
    for k in 1..n {
        let parent = perm[rng.random_range(0..k)];
        a[(perm[k], parent)] += 1.0;
    }
    for i in 0..n {
        for j in 0..n {
            if rng.random_bool(0.5) {
                a[(i, j)] += 1.0;
            }
        }
        a[(i, i)] += 1.0;
    }
    Digraph::from_adjacency(a).expect("construction yields a valid digraph")
}

/// One entry of a schedule file: from `time` on, agent `agent` listens to `neighbors`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchRecord {
    pub agent: usize,
    pub time: f64,
    pub neighbors: Vec<usize>,
}

/// Per-agent piecewise-constant, right-continuous neighborhood signals.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchingSchedule {
    n: usize,
    start: f64,
    end: f64,
    dwell_floor: f64,
    weights: DMatrix<f64>,
    signals: Vec<Vec<(f64, Vec<usize>)>>,
}

impl SwitchingSchedule {
    /// Builds and validates a schedule. `weights` is the master table `A′`.
    pub fn new(
        n: usize,
        records: &[SwitchRecord],
        weights: DMatrix<f64>,
        dwell_floor: f64,
        start: f64,
        end: f64,
    ) -> Result<Self, TopologyError> {
        if weights.nrows() != n || weights.ncols() != n {
            return Err(TopologyError::BadShape {
                expected: n,
                rows: weights.nrows(),
                cols: weights.ncols(),
            });
        }
        if !(start.is_finite() && end.is_finite() && end > start) {
            return Err(TopologyError::Invalid(format!(
                "horizon [{start}, {end}] is empty"
            )));
        }
        if !(dwell_floor >= 0.0) {
            return Err(TopologyError::Invalid(
                "dwell floor must be nonnegative".into(),
            ));
        }
        for i in 0..n {
            if !(weights[(i, i)] > 0.0) {
                return Err(TopologyError::MissingSelfLoop(i));
            }
        }
        let mut signals: Vec<Vec<(f64, Vec<usize>)>> = vec![Vec::new(); n];
        for rec in records {
            if rec.agent >= n {
                return Err(TopologyError::NodeOutOfRange {
                    index: rec.agent,
                    n,
                });
            }
            if !rec.time.is_finite() {
                return Err(TopologyError::Invalid(format!(
                    "switch time {} is not finite",
                    rec.time
                )));
            }
            let mut nb: Vec<usize> = Vec::with_capacity(rec.neighbors.len());
            for &j in &rec.neighbors {
                if j >= n {
                    return Err(TopologyError::NodeOutOfRange { index: j, n });
                }
                if j != rec.agent {
                    if !(weights[(rec.agent, j)] > 0.0) || !weights[(rec.agent, j)].is_finite() {
                        return Err(TopologyError::MissingWeight(rec.agent, j));
                    }
                    nb.push(j);
                }
            }
            nb.sort_unstable();
            nb.dedup();
            signals[rec.agent].push((rec.time, nb));
        }
        for (agent, sig) in signals.iter_mut().enumerate() {
            sig.sort_by(|a, b| a.0.total_cmp(&b.0));
            match sig.first() {
                Some((t0, _)) if *t0 <= start => {}
                _ => return Err(TopologyError::MissingSignal(agent)),
            }
            for w in sig.windows(2) {
                if w[1].0 - w[0].0 <= dwell_floor {
                    return Err(TopologyError::DwellViolation {
                        agent,
                        t1: w[0].0,
                        t2: w[1].0,
                        dwell: dwell_floor,
                    });
                }
            }
        }
        Ok(SwitchingSchedule {
            n,
            start,
            end,
            dwell_floor,
            weights,
            signals,
        })
    }

    /// The same graph on the whole horizon.
    pub fn constant(g: &Digraph, start: f64, end: f64) -> Result<Self, TopologyError> {
        let records: Vec<_> = (0..g.n())
            .map(|i| SwitchRecord {
                agent: i,
                time: start,
                neighbors: g.neighbor_indices(i),
            })
            .collect();
        Self::new(
            g.n(),
            &records,
            master_table(&[g.clone()])?,
            0.0,
            start,
            end,
        )
    }

    /// Graphs `graphs[k mod m]` active on `[start + kP, start + (k+1)P)`.
    /// Every agent switches at every multiple of the period; the dwell floor is `P/2`.
    pub fn periodic(
        graphs: &[Digraph],
        period: f64,
        start: f64,
        end: f64,
    ) -> Result<Self, TopologyError> {
        if graphs.is_empty() {
            return Err(TopologyError::Invalid(
                "periodic schedule needs at least one graph".into(),
            ));
        }
        if !(period > 0.0) {
            return Err(TopologyError::Invalid("period must be positive".into()));
        }
        let n = graphs[0].n();
        if graphs.iter().any(|g| g.n() != n) {
            return Err(TopologyError::Invalid("graphs differ in node count".into()));
        }
        let weights = master_table(graphs)?;
        let mut records = Vec::new();
        let mut k = 0usize;
        loop {
            let t = start + k as f64 * period;
            if t > end && k > 0 {
                break;
            }
            let g = &graphs[k % graphs.len()];
            for i in 0..n {
                records.push(SwitchRecord {
                    agent: i,
                    time: t,
                    neighbors: g.neighbor_indices(i),
                });
            }
            k += 1;
        }
        Self::new(n, &records, weights, 0.5 * period, start, end)
    }

    /// A new random quasi-strongly connected pattern every `period` seconds.
    ///
    /// The master table has entries drawn uniformly from `{1, 2}`; each
    /// pattern is the edge set of [`random_qsc_graph`].
    pub fn random_qsc_switching<R: Rng + ?Sized>(
        n: usize,
        period: f64,
        start: f64,
        end: f64,
        rng: &mut R,
    ) -> Result<Self, TopologyError> {
        if !(period > 0.0) {
            return Err(TopologyError::Invalid("period must be positive".into()));
        }
        let weights = DMatrix::from_fn(n, n, |_, _| if rng.random_bool(0.5) { 2.0 } else { 1.0 });
        let mut records = Vec::new();
        let mut k = 0usize;
        loop {
            let t = start + k as f64 * period;
            if t > end && k > 0 {
                break;
            }
            let g = random_qsc_graph(n, rng);
            for i in 0..n {
                records.push(SwitchRecord {
                    agent: i,
                    time: t,
                    neighbors: g.neighbor_indices(i),
                });
            }
            k += 1;
        }
        Self::new(n, &records, weights, 0.5 * period, start, end)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn dwell_floor(&self) -> f64 {
        self.dwell_floor
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Records in agent-then-time order.
    pub fn records(&self) -> Vec<SwitchRecord> {
        let mut out = Vec::new();
        for (agent, sig) in self.signals.iter().enumerate() {
            for (time, nb) in sig {
                out.push(SwitchRecord {
                    agent,
                    time: *time,
                    neighbors: nb.clone(),
                });
            }
        }
        out
    }

    fn check_time(&self, t: f64) -> Result<(), TopologyError> {
        if t < self.start || t > self.end || !t.is_finite() {
            return Err(TopologyError::OutOfHorizon {
                t,
                start: self.start,
                end: self.end,
            });
        }
        Ok(())
    }

    fn signal_at(&self, agent: usize, t: f64) -> &[usize] {
        let sig = &self.signals[agent];
        let idx = sig.partition_point(|(time, _)| *time <= t);
        &sig[idx.saturating_sub(1)].1
    }

    /// `𝒩_i^{σ^i(t)}` without the self-loop.
    pub fn neighbors_at(&self, agent: usize, t: f64) -> Result<&[usize], TopologyError> {
        self.check_time(t)?;
        Ok(self.signal_at(agent, t))
    }

    /// The merged system graph at time `t` (right-continuous).
    pub fn graph_at(&self, t: f64) -> Result<Digraph, TopologyError> {
        self.check_time(t)?;
        let mut a = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            a[(i, i)] = self.weights[(i, i)];
            for &j in self.signal_at(i, t) {
                a[(i, j)] = self.weights[(i, j)];
            }
        }
        Ok(Digraph { a })
    }

    /// Union of all agents' switch times strictly after the start.
    pub fn switch_times(&self) -> Vec<f64> {
        let mut times: Vec<f64> = self
            .signals
            .iter()
            .flat_map(|sig| sig.iter().map(|(t, _)| *t))
            .filter(|&t| t > self.start && t <= self.end)
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
    }

    /// Union graph over `[t1, t2)`.
    pub fn union_graph(&self, t1: f64, t2: f64) -> Result<Digraph, TopologyError> {
        let mut a = self.graph_at(t1)?.a;
        for tau in self.switch_times() {
            if tau > t1 && tau < t2 {
                let g = self.graph_at(tau)?;
                a.zip_apply(&g.a, |x, y| *x = x.max(y));
            }
        }
        Ok(Digraph { a })
    }

    /// Checks the union graph of every window `[t, t + window)` anchored at
    /// the start and at each switch time that leaves a full window before the end.
    pub fn is_uniformly_connected(
        &self,
        window: f64,
        mode: Connectivity,
    ) -> Result<bool, TopologyError> {
        if !(window > 0.0) {
            return Err(TopologyError::Invalid("window must be positive".into()));
        }
        let mut anchors = vec![self.start];
        anchors.extend(
            self.switch_times()
                .into_iter()
                .filter(|&t| t + window <= self.end),
        );
        for t in anchors {
            let union = self.union_graph(t, (t + window).min(self.end.max(t + f64::EPSILON)))?;
            if !is_connected(&union, mode) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Master weight table shared by `graphs`; unused entries are 1.
fn master_table(graphs: &[Digraph]) -> Result<DMatrix<f64>, TopologyError> {
    let n = graphs[0].n();
    let mut m: DMatrix<f64> = DMatrix::zeros(n, n);
    for g in graphs {
        for i in 0..n {
            for j in 0..n {
                let w = g.weight(i, j);
                if w > 0.0 {
                    if m[(i, j)] > 0.0 && m[(i, j)] != w {
                        return Err(TopologyError::InconsistentWeights(i, j));
                    }
                    m[(i, j)] = w;
                }
            }
        }
    }
    m.apply(|w| {
        if *w == 0.0 {
            *w = 1.0
        }
    });
    Ok(m)
}
