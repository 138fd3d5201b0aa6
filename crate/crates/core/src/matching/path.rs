//! Convex–concave path following with Frank–Wolfe inner iterations.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::MatchingProblem;
use crate::affinity::AffinityMode;
use crate::assignment::{solve_lap, LapSolution};
use crate::structure::StructureGraph;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    /// Weight of the distortion penalty in the second direction stage; 0
    /// turns the second stage off.
    pub smooth_weight: f64,
    /// α runs over `0, 1/alpha_steps, ..., 1`.
    pub alpha_steps: usize,
    /// Frank–Wolfe iterations per α.
    pub max_inner: usize,
    /// Inner loop stops once the Frank–Wolfe gap drops below this.
    pub gap_tol: f64,
    /// Record trace values by evaluating the objective from scratch instead
    /// of from the incrementally updated gradient.
    pub exact_trace: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { smooth_weight: 1.0, alpha_steps: 100, max_inner: 100, gap_tol: 1e-8, exact_trace: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaTrace {
    pub alpha: f64,
    /// `J_α` at the start of the α stage and after every step.
    pub objectives: Vec<f64>,
    pub iterations: usize,
    /// Score plus weighted distortion penalty of the rounded iterate.
    pub candidate_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathFollowingState {
    pub x: DMatrix<f64>,
    pub alpha: f64,
    pub trace: Vec<AlphaTrace>,
}

impl PathFollowingState {
    pub fn objective_trace(&self) -> Vec<f64> {
        self.trace.iter().flat_map(|t| t.objectives.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub assignment: LapSolution,
    /// Graph matching score of the assignment.
    pub score: f64,
    /// Distortion penalty of the assignment.
    pub smooth: f64,
    pub state: PathFollowingState,
}

fn mapped_sum(m: &DMatrix<f64>, y: &LapSolution) -> f64 {
    y.pairs().map(|(i, j)| m[(i, j)]).sum()
}

fn directions(problem: &MatchingProblem, grad: &DMatrix<f64>, smooth_weight: f64) -> Result<(LapSolution, LapSolution)> {
    let y0 = solve_lap(grad)?;
    if smooth_weight == 0.0 {
        return Ok((y0.clone(), y0));
    }
    let profit = grad + problem.smooth_gain(&y0.row_to_col) * smooth_weight;
    let y = solve_lap(&profit)?;
    Ok((y0, y))
}

/// Both direction stages at `x`: `Y0` maximizes the linearized `J_α`, `Y`
/// additionally accounts for the distortion penalty around `Y0`.
pub fn fw_direction(problem: &MatchingProblem, x: &DMatrix<f64>, alpha: f64, smooth_weight: f64) -> Result<(LapSolution, LapSolution)> {
    let grad = problem.gradient(x) - x * (2.0 * problem.shift(alpha));
    directions(problem, &grad, smooth_weight)
}

/// Exact maximizer over `λ ∈ [0, 1]` of `J_α(x + λ(y − x))`, given
/// `g = (K + Kᵀ)x` and `jy = yᵀKy`.
fn line_search(x: &DMatrix<f64>, g: &DMatrix<f64>, y: &LapSolution, jy: f64, mu: f64) -> f64 {
    let gx = g.dot(x);
    let xx = x.norm_squared();
    let gy = mapped_sum(g, y);
    let xy = mapped_sum(x, y);
    let yy = y.pairs().count() as f64;
    let b = gy - gx - 2.0 * mu * (xy - xx);
    let a = jy - gy + 0.5 * gx - mu * (yy - 2.0 * xy + xx);
    if a < 0.0 {
        (-b / (2.0 * a)).clamp(0.0, 1.0)
    } else if a + b > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn move_towards(x: &mut DMatrix<f64>, y: &LapSolution, lambda: f64) {
    x.scale_mut(1.0 - lambda);
    for (i, j) in y.pairs() {
        x[(i, j)] += lambda;
    }
}

/// One exact line-search step from `x` towards `y`.
pub fn fw_step(problem: &MatchingProblem, x: &DMatrix<f64>, y: &LapSolution, alpha: f64) -> (DMatrix<f64>, f64) {
    let g = problem.gradient(x);
    let jy = problem.discrete_score(&y.row_to_col);
    let lambda = line_search(x, &g, y, jy, problem.shift(alpha));
    let mut next = x.clone();
    move_towards(&mut next, y, lambda);
    (next, lambda)
}

pub fn match_graphs(g1: &StructureGraph, g2: &StructureGraph, mode: AffinityMode, config: &MatchConfig) -> Result<MatchResult> {
    for (g, name) in [(g1, "first"), (g2, "second")] {
        if g.node_count() < 3 {
            return Err(Error::DegenerateGraph(alloc::format!("{name} graph has fewer than 3 nodes")));
        }
    }
    let problem = MatchingProblem::new(g1, g2, mode)?;
    match_problem(&problem, config)
}

/// Runs the α path from the uniform start and returns the best discrete
/// assignment seen: the rounded iterate at the end of each α stage or any
/// Frank–Wolfe vertex.
pub fn match_problem(problem: &MatchingProblem, config: &MatchConfig) -> Result<MatchResult> {
    let (n1, n2) = (problem.n1(), problem.n2());
    if n1 < 3 || n2 < 3 {
        return Err(Error::DegenerateGraph("matching needs at least 3 nodes per graph".to_string()));
    }
    if !(config.smooth_weight >= 0.0) || !config.smooth_weight.is_finite() {
        return Err(Error::InvalidParameter("smooth weight must be finite and non-negative".to_string()));
    }
    let w = config.smooth_weight;
    let steps = config.alpha_steps.max(1);
    let mut x = DMatrix::from_element(n1, n2, 1.0 / n1.max(n2) as f64);
    let mut best: Option<(f64, LapSolution)> = None;
    let mut trace = Vec::with_capacity(steps + 1);
    let mut alpha = 0.0;
    // every rounded iterate and every direction vertex is a candidate
    let consider = |best: &mut Option<(f64, LapSolution)>, score: f64, y: &LapSolution| {
        let v = score + w * problem.smooth_term(&y.row_to_col);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            *best = Some((v, y.clone()));
        }
        v
    };

    for s in 0..=steps {
        alpha = s as f64 / steps as f64;
        let mu = problem.shift(alpha);
        let mut g = problem.gradient(&x);
        let value = |x: &DMatrix<f64>, g: &DMatrix<f64>| {
            if config.exact_trace {
                problem.objective(x, alpha)
            } else {
                0.5 * g.dot(x) - mu * x.norm_squared()
            }
        };
        let mut objectives = vec![value(&x, &g)];
        let mut iterations = 0;
        for _ in 0..config.max_inner {
            let grad = &g - &x * (2.0 * mu);
            let (y0, y) = directions(problem, &grad, w)?;
            let base = grad.dot(&x);
            if mapped_sum(&grad, &y0) - base < config.gap_tol {
                break;
            }
            iterations += 1;
            let mut chosen = None;
            if y != y0 && mapped_sum(&grad, &y) - base > 0.0 {
                let jy = problem.discrete_score(&y.row_to_col);
                consider(&mut best, jy, &y);
                let lambda = line_search(&x, &g, &y, jy, mu);
                if lambda > 0.0 {
                    chosen = Some((y, lambda));
                }
            }
            if chosen.is_none() {
                let jy = problem.discrete_score(&y0.row_to_col);
                consider(&mut best, jy, &y0);
                let lambda = line_search(&x, &g, &y0, jy, mu);
                if lambda > 0.0 {
                    chosen = Some((y0, lambda));
                }
            }
            let Some((dir, lambda)) = chosen else {
                break;
            };
            let gy = problem.discrete_gradient(&dir.row_to_col);
            move_towards(&mut x, &dir, lambda);
            g.scale_mut(1.0 - lambda);
            g += gy * lambda;
            objectives.push(value(&x, &g));
        }

        let candidate = solve_lap(&x)?;
        let candidate_score = consider(&mut best, problem.discrete_score(&candidate.row_to_col), &candidate);
        trace.push(AlphaTrace { alpha, objectives, iterations, candidate_score });
    }

    let (_, mut assignment) = best.expect("at least one alpha stage runs");
    let score = problem.discrete_score(&assignment.row_to_col);
    assignment.value = score;
    let smooth = problem.smooth_term(&assignment.row_to_col);
    Ok(MatchResult { assignment, score, smooth, state: PathFollowingState { x, alpha, trace } })
}
