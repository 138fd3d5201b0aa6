//! Graph matching objective over two structure graphs.
//!
//! The affinity tensor `K` is never formed in production. With edge `c1`
//! running from tail `t1` to head `h1` in the first graph and `c2` from `t2`
//! to `h2` in the second,
//!
//! ```text
//! K[(h1,h2),(h1,h2)] = kp[h1][h2]
//! K[(h1,h2),(t1,t2)] = kq[c1][c2]
//! ```
//!
//! so `xᵀKx = Σ kp·x² + Σ_{c1,c2} kq[c1][c2]·x[h1][h2]·x[t1][t2]`.
//! Assignment matrices are `n1 × n2`; the vectorized index of `(i1, i2)` is
//! `i1 + n1·i2` (column-major, as nalgebra stores them).

mod path;

pub use path::{fw_direction, fw_step, match_graphs, match_problem, AlphaTrace, MatchConfig, MatchResult, PathFollowingState};

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::affinity::{AffinityMode, AffinityPair};
use crate::geometry::Point3;
use crate::structure::StructureGraph;
use crate::{Error, Result};

/// Largest `n1·n2` for which [`MatchingProblem::dense_k`] materializes `K`.
pub const DENSE_K_LIMIT: usize = 4096;

/// A discrete assignment: `map[i1] = Some(i2)`.
pub type Mapping = [Option<usize>];

#[derive(Debug, Clone)]
pub struct MatchingProblem<'a> {
    pub g1: &'a StructureGraph,
    pub g2: &'a StructureGraph,
    pub affinities: AffinityPair,
    /// Gershgorin lower bound on the eigenvalues of `(K + Kᵀ)/2`.
    pub mu_min: f64,
    /// Gershgorin upper bound on the eigenvalues of `(K + Kᵀ)/2`.
    pub mu_max: f64,
    out1: Vec<Vec<usize>>,
    in1: Vec<Vec<usize>>,
    out2: Vec<Vec<usize>>,
    in2: Vec<Vec<usize>>,
    /// Edge lengths of the first graph in its own length unit.
    len1: Vec<f64>,
    /// Second graph's centroids in its own length unit.
    unit2: Vec<Point3>,
}

fn incident_edges(g: &StructureGraph) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
    let mut out = vec![Vec::new(); g.node_count()];
    let mut inc = vec![Vec::new(); g.node_count()];
    for (c, &(t, h)) in g.edges.iter().enumerate() {
        out[t].push(c);
        inc[h].push(c);
    }
    (out, inc)
}

impl<'a> MatchingProblem<'a> {
    pub fn new(g1: &'a StructureGraph, g2: &'a StructureGraph, mode: AffinityMode) -> Result<Self> {
        let affinities = AffinityPair::compute(g1, g2, mode)?;
        Self::with_affinities(g1, g2, affinities)
    }

    pub fn with_affinities(g1: &'a StructureGraph, g2: &'a StructureGraph, affinities: AffinityPair) -> Result<Self> {
        let (n1, n2) = (g1.node_count(), g2.node_count());
        let (m1, m2) = (g1.edge_count(), g2.edge_count());
        if m1 == 0 {
            return Err(Error::NoEdges { graph: "first".to_string() });
        }
        if m2 == 0 {
            return Err(Error::NoEdges { graph: "second".to_string() });
        }
        if affinities.kp.shape() != (n1, n2) || affinities.kq.shape() != (m1, m2) {
            return Err(Error::Dimension(format!(
                "affinities are {:?} and {:?}, graphs need ({n1}, {n2}) and ({m1}, {m2})",
                affinities.kp.shape(),
                affinities.kq.shape()
            )));
        }
        let (out1, in1) = incident_edges(g1);
        let (out2, in2) = incident_edges(g2);
        let len1 = g1.edges.iter().map(|&(t, h)| (g1.centroids[h] - g1.centroids[t]).norm() / g1.scale).collect();
        let unit2 = g2.centroids.iter().map(|p| Point3::from(p.coords / g2.scale)).collect();

        // Off-diagonal row sums of the symmetric part: half of the K row
        // (entries keyed by heads) plus half of the K column (keyed by tails).
        let mut by_head = vec![0.0; n1 * n2];
        let mut by_tail = vec![0.0; n1 * n2];
        for (c2, &(t2, h2)) in g2.edges.iter().enumerate() {
            let col = affinities.kq.column(c2);
            for (c1, &(t1, h1)) in g1.edges.iter().enumerate() {
                by_head[h1 + n1 * h2] += col[c1].abs();
                by_tail[t1 + n1 * t2] += col[c1].abs();
            }
        }
        let mut mu_min = f64::INFINITY;
        let mut mu_max = f64::NEG_INFINITY;
        for (r, kp) in affinities.kp.iter().enumerate() {
            let radius = 0.5 * (by_head[r] + by_tail[r]);
            mu_min = mu_min.min(kp - radius);
            mu_max = mu_max.max(kp + radius);
        }
        Ok(Self { g1, g2, affinities, mu_min, mu_max, out1, in1, out2, in2, len1, unit2 })
    }

    pub fn n1(&self) -> usize {
        self.g1.node_count()
    }

    pub fn n2(&self) -> usize {
        self.g2.node_count()
    }

    fn check(&self, x: &DMatrix<f64>) {
        assert_eq!(x.shape(), (self.n1(), self.n2()), "assignment matrix has the wrong shape");
    }

    /// `xᵀKx` for a relaxed assignment.
    pub fn score(&self, x: &DMatrix<f64>) -> f64 {
        self.check(x);
        let n1 = self.n1();
        let xs = x.as_slice();
        let node: f64 = self.affinities.kp.iter().zip(xs).map(|(k, v)| k * v * v).sum();
        let mut edge = 0.0;
        for (c2, &(t2, h2)) in self.g2.edges.iter().enumerate() {
            let col = self.affinities.kq.column(c2);
            for (c1, &(t1, h1)) in self.g1.edges.iter().enumerate() {
                edge += col[c1] * xs[h1 + n1 * h2] * xs[t1 + n1 * t2];
            }
        }
        node + edge
    }

    /// `(K + Kᵀ)x`, the gradient of [`Self::score`], reshaped to `n1 × n2`.
    pub fn gradient(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.check(x);
        let n1 = self.n1();
        let xs = x.as_slice();
        let mut g = self.affinities.kp.component_mul(x) * 2.0;
        let gs = g.as_mut_slice();
        for (c2, &(t2, h2)) in self.g2.edges.iter().enumerate() {
            let col = self.affinities.kq.column(c2);
            for (c1, &(t1, h1)) in self.g1.edges.iter().enumerate() {
                let (head, tail) = (h1 + n1 * h2, t1 + n1 * t2);
                gs[head] += col[c1] * xs[tail];
                gs[tail] += col[c1] * xs[head];
            }
        }
        g
    }

    /// Score of a discrete assignment in `O(m1 · max degree)`.
    pub fn discrete_score(&self, map: &Mapping) -> f64 {
        let kp = &self.affinities.kp;
        let mut s: f64 = map.iter().enumerate().filter_map(|(i, c)| c.map(|j| kp[(i, j)])).sum();
        for (c1, &(t1, h1)) in self.g1.edges.iter().enumerate() {
            if let (Some(t2), Some(h2)) = (map[t1], map[h1]) {
                for &c2 in &self.out2[t2] {
                    if self.g2.edges[c2].1 == h2 {
                        s += self.affinities.kq[(c1, c2)];
                    }
                }
            }
        }
        s
    }

    /// [`Self::gradient`] at a discrete assignment.
    pub fn discrete_gradient(&self, map: &Mapping) -> DMatrix<f64> {
        let kp = &self.affinities.kp;
        let kq = &self.affinities.kq;
        let mut g = DMatrix::zeros(self.n1(), self.n2());
        for (i, c) in map.iter().enumerate() {
            if let Some(j) = *c {
                g[(i, j)] += 2.0 * kp[(i, j)];
            }
        }
        for (c1, &(t1, h1)) in self.g1.edges.iter().enumerate() {
            if let Some(a) = map[t1] {
                for &c2 in &self.out2[a] {
                    g[(h1, self.g2.edges[c2].1)] += kq[(c1, c2)];
                }
            }
            if let Some(b) = map[h1] {
                for &c2 in &self.in2[b] {
                    g[(t1, self.g2.edges[c2].0)] += kq[(c1, c2)];
                }
            }
        }
        g
    }

    /// Spectral shift of the blended objective at `alpha`: the path starts
    /// at the concave surrogate (`mu_max`) and ends at the convex one
    /// (`mu_min`).
    pub fn shift(&self, alpha: f64) -> f64 {
        (1.0 - alpha) * self.mu_max + alpha * self.mu_min
    }

    /// `(J_vex, J_cav)`: `xᵀKx − μ_min·xᵀx` (convex) and `xᵀKx − μ_max·xᵀx`
    /// (concave).
    pub fn relaxations(&self, x: &DMatrix<f64>) -> (f64, f64) {
        let j = self.score(x);
        let xx = x.norm_squared();
        (j - self.mu_min * xx, j - self.mu_max * xx)
    }

    /// `J_α(x) = (1 − α)·J_cav(x) + α·J_vex(x)`.
    pub fn objective(&self, x: &DMatrix<f64>, alpha: f64) -> f64 {
        self.score(x) - self.shift(alpha) * x.norm_squared()
    }

    /// Distance distortion penalty of a discrete assignment, `≤ 0`.
    ///
    /// Sums `|‖p_i − p_j‖ − ‖q_π(i) − q_π(j)‖|` over the edges `i → j` of the
    /// first graph whose endpoints are both assigned, with lengths in each
    /// graph's own unit, and divides by `n1·n2`.
    pub fn smooth_term(&self, map: &Mapping) -> f64 {
        let mut s = 0.0;
        for (c, &(t, h)) in self.g1.edges.iter().enumerate() {
            if let (Some(a), Some(b)) = (map[t], map[h]) {
                s += (self.len1[c] - (self.unit2[b] - self.unit2[a]).norm()).abs();
            }
        }
        -s / (self.n1() * self.n2()) as f64
    }

    fn smooth_terms_at(&self, i: usize, i2: usize, base: &Mapping) -> f64 {
        let q = &self.unit2[i2];
        let mut s = 0.0;
        for &c in &self.out1[i] {
            if let Some(b) = base[self.g1.edges[c].1] {
                s += (self.len1[c] - (self.unit2[b] - q).norm()).abs();
            }
        }
        for &c in &self.in1[i] {
            if let Some(a) = base[self.g1.edges[c].0] {
                s += (self.len1[c] - (q - self.unit2[a]).norm()).abs();
            }
        }
        -s / (self.n1() * self.n2()) as f64
    }

    /// `gain[i][i2]`: change of [`Self::smooth_term`] when node `i` alone is
    /// reassigned to `i2` while every other node keeps its image in `base`.
    pub fn smooth_gain(&self, base: &Mapping) -> DMatrix<f64> {
        let mut gain = DMatrix::zeros(self.n1(), self.n2());
        for i in 0..self.n1() {
            let old = base[i].map_or(0.0, |a| self.smooth_terms_at(i, a, base));
            for i2 in 0..self.n2() {
                gain[(i, i2)] = self.smooth_terms_at(i, i2, base) - old;
            }
        }
        gain
    }

    /// The dense `(n1·n2)²` tensor, or `None` above [`DENSE_K_LIMIT`].
    pub fn dense_k(&self) -> Option<DMatrix<f64>> {
        let (n1, n2) = (self.n1(), self.n2());
        let n = n1 * n2;
        if n > DENSE_K_LIMIT {
            return None;
        }
        let mut k = DMatrix::zeros(n, n);
        for (r, &v) in self.affinities.kp.iter().enumerate() {
            k[(r, r)] = v;
        }
        for (c2, &(t2, h2)) in self.g2.edges.iter().enumerate() {
            for (c1, &(t1, h1)) in self.g1.edges.iter().enumerate() {
                k[(h1 + n1 * h2, t1 + n1 * t2)] = self.affinities.kq[(c1, c2)];
            }
        }
        Some(k)
    }
}
