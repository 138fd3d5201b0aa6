//! Ensemble of Shape Functions descriptor.
//!
//! Random point triples are drawn from a point set. For every triple the
//! three pairwise distances (D2), one angle (A3) and the square root of the
//! triangle area (D3) are histogrammed. Each connecting line is traced
//! through an occupancy grid of the set and classified as lying on the
//! surface ("in"), off the surface ("out") or crossing it ("mixed"); the
//! histograms are split by that class. A tenth histogram collects the
//! on-surface ratio of every traced line.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{mean_point, Point3};
use crate::spatial::SpatialIndex;
use crate::{Error, Result};

pub const BINS: usize = 64;
pub const HISTOGRAMS: usize = 10;
pub const ESF_LEN: usize = BINS * HISTOGRAMS;
pub const GRID: usize = 64;
pub const DEFAULT_SAMPLES: usize = 20_000;

/// Above this many points the diameter is estimated by repeated farthest-point sweeps.
const EXACT_DIAMETER_LIMIT: usize = 4000;

/// Order of the 64-bin sub-histograms inside [`EsfDescriptor::bins`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Histogram {
    A3In = 0,
    A3Out,
    A3Mixed,
    D3In,
    D3Out,
    D3Mixed,
    D2In,
    D2Out,
    D2Mixed,
    D2Ratio,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsfDescriptor {
    pub bins: Vec<f64>,
}

impl EsfDescriptor {
    pub fn zeros() -> Self {
        Self { bins: vec![0.0; ESF_LEN] }
    }

    pub fn histogram(&self, h: Histogram) -> &[f64] {
        let k = h as usize;
        &self.bins[k * BINS..(k + 1) * BINS]
    }

    pub fn distance(&self, other: &EsfDescriptor) -> f64 {
        self.bins.iter().zip(&other.bins).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LineClass {
    In = 0,
    Out = 1,
    Mixed = 2,
}

struct Occupancy {
    bits: Vec<u64>,
    origin: Point3,
    cell: f64,
}

impl Occupancy {
    fn build(points: &[Point3]) -> Option<Self> {
        let lo = points.iter().fold(points[0], |a, p| a.inf(p));
        let hi = points.iter().fold(points[0], |a, p| a.sup(p));
        let side = (hi - lo).max();
        if !(side > 0.0) {
            return None;
        }
        let cell = side * (1.0 + 1e-9) / GRID as f64;
        let mut occ = Occupancy { bits: vec![0; GRID * GRID * GRID / 64], origin: lo, cell };

        // Splat every point as a ball of about half the typical sample spacing
        // so that sparse samples of a surface still read as a closed surface.
        let index = SpatialIndex::new(points);
        let mut spacing: Vec<f64> = points.iter().map(|p| index.knn(p, 2).last().map_or(0.0, |c| c.1)).collect();
        spacing.sort_unstable_by(f64::total_cmp);
        let median = spacing[spacing.len() / 2];
        let reach = ((0.75 * median / cell).ceil() as i64).clamp(1, 16);
        let reach2 = (reach * reach) as i64;
        for p in points {
            let c = occ.cell_of(p);
            for dx in -reach..=reach {
                for dy in -reach..=reach {
                    for dz in -reach..=reach {
                        if dx * dx + dy * dy + dz * dz <= reach2 {
                            occ.set([c[0] + dx, c[1] + dy, c[2] + dz]);
                        }
                    }
                }
            }
        }
        Some(occ)
    }

    fn cell_of(&self, p: &Point3) -> [i64; 3] {
        let v = (p - self.origin) / self.cell;
        let clamp = |x: f64| (x.floor() as i64).clamp(0, GRID as i64 - 1);
        [clamp(v.x), clamp(v.y), clamp(v.z)]
    }

    fn flat(c: [i64; 3]) -> Option<usize> {
        let g = GRID as i64;
        if c.iter().all(|&x| (0..g).contains(&x)) {
            Some(((c[0] * g + c[1]) * g + c[2]) as usize)
        } else {
            None
        }
    }

    fn set(&mut self, c: [i64; 3]) {
        if let Some(i) = Self::flat(c) {
            self.bits[i / 64] |= 1 << (i % 64);
        }
    }

    fn get(&self, c: [i64; 3]) -> bool {
        Self::flat(c).is_some_and(|i| self.bits[i / 64] >> (i % 64) & 1 == 1)
    }

    /// Fraction of occupied samples strictly between `a` and `b`, sampled at
    /// unit-cell steps. Segments without interior samples count as fully on
    /// the surface.
    fn trace(&self, a: &Point3, b: &Point3) -> f64 {
        let len_cells = (b - a).norm() / self.cell;
        let steps = len_cells.ceil() as usize;
        if steps < 2 {
            return 1.0;
        }
        let mut occupied = 0usize;
        for s in 1..steps {
            let t = s as f64 / steps as f64;
            if self.get(self.cell_of(&(a + (b - a) * t))) {
                occupied += 1;
            }
        }
        occupied as f64 / (steps - 1) as f64
    }
}

fn classify(ratio: f64) -> LineClass {
    if ratio >= 1.0 {
        LineClass::In
    } else if ratio <= 0.0 {
        LineClass::Out
    } else {
        LineClass::Mixed
    }
}

fn diameter(points: &[Point3]) -> f64 {
    if points.len() <= EXACT_DIAMETER_LIMIT {
        let mut best = 0.0f64;
        for (i, p) in points.iter().enumerate() {
            for q in &points[i + 1..] {
                best = best.max((p - q).norm_squared());
            }
        }
        return best.sqrt();
    }
    let farthest = |from: &Point3| {
        points
            .iter()
            .map(|p| (p - from).norm_squared())
            .enumerate()
            .fold((0, -1.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc })
    };
    let mut a = farthest(&mean_point(points)).0;
    let mut best = 0.0f64;
    for _ in 0..4 {
        let (b, d) = farthest(&points[a]);
        if d <= best {
            break;
        }
        best = d;
        a = b;
    }
    best.sqrt()
}

fn bin(v: f64) -> usize {
    ((v * BINS as f64).floor() as isize).clamp(0, BINS as isize - 1) as usize
}

fn angle(u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    let denom = u.norm() * v.norm();
    if denom > 0.0 {
        (u.dot(v) / denom).clamp(-1.0, 1.0).acos()
    } else {
        0.0
    }
}

/// ESF descriptor of `points` from `samples` random triples drawn with `seed`.
///
/// Needs at least three points. A set whose points all coincide yields the
/// all-zero descriptor. When no sample falls into some surface class, that
/// class's histogram is filled with the class-agnostic histogram of the same
/// shape function, so every sub-histogram of a non-degenerate set sums to one.
pub fn esf_of_points(points: &[Point3], samples: usize, seed: u64) -> Result<EsfDescriptor> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints { cloud: "supervoxel".into(), needed: 3, got: points.len() });
    }
    let Some(occ) = Occupancy::build(points) else {
        return Ok(EsfDescriptor::zeros());
    };
    let max_d = diameter(points);
    if !(max_d > 0.0) {
        return Ok(EsfDescriptor::zeros());
    }
    let max_area_root = (3f64.sqrt() / 4.0 * max_d * max_d).sqrt();

    let mut raw = [[0u32; BINS]; HISTOGRAMS];
    let mut any = [[0u32; BINS]; 3];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = points.len();
    for _ in 0..samples.max(1) {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let mut k = rng.random_range(0..n - 2);
        for skip in [i.min(j), i.max(j)] {
            if k >= skip {
                k += 1;
            }
        }
        let (p1, p2, p3) = (&points[i], &points[j], &points[k]);
        let lines = [(p1, p2), (p1, p3), (p2, p3)];
        let ratios = lines.map(|(a, b)| occ.trace(a, b));
        let classes = ratios.map(classify);

        for ((a, b), (&ratio, &class)) in lines.iter().zip(ratios.iter().zip(classes.iter())) {
            let d = bin((*b - *a).norm() / max_d);
            raw[Histogram::D2In as usize + class as usize][d] += 1;
            any[2][d] += 1;
            raw[Histogram::D2Ratio as usize][bin(ratio)] += 1;
        }

        // angle at p1, judged by the opposite side p2–p3
        let a = bin(angle(&(p2 - p1), &(p3 - p1)) / core::f64::consts::PI);
        raw[Histogram::A3In as usize + classes[2] as usize][a] += 1;
        any[0][a] += 1;

        let area = 0.5 * (p2 - p1).cross(&(p3 - p1)).norm();
        let d3 = bin(area.sqrt() / max_area_root);
        let d3_class = if classes.iter().all(|&c| c == LineClass::In) {
            LineClass::In
        } else if classes.iter().all(|&c| c == LineClass::Out) {
            LineClass::Out
        } else {
            LineClass::Mixed
        };
        raw[Histogram::D3In as usize + d3_class as usize][d3] += 1;
        any[1][d3] += 1;
    }

    let mut bins = Vec::with_capacity(ESF_LEN);
    for (h, counts) in raw.iter().enumerate() {
        let counts = if counts.iter().all(|&c| c == 0) && h < Histogram::D2Ratio as usize { &any[h / 3] } else { counts };
        let total: u32 = counts.iter().sum();
        bins.extend(counts.iter().map(|&c| if total > 0 { c as f64 / total as f64 } else { 0.0 }));
    }
    Ok(EsfDescriptor { bins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_zyx;

    fn sphere(seed: u64, n: usize) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let (u, v): (f64, f64) = (rng.random_range(0.0..core::f64::consts::TAU), rng.random_range(-1.0..1.0));
                let r = (1.0 - v * v).sqrt();
                Point3::new(r * u.cos(), r * u.sin(), v)
            })
            .collect()
    }

    fn plane(seed: u64, n: usize) -> Vec<Point3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0)).collect()
    }

    fn assert_normalized(d: &EsfDescriptor) {
        assert_eq!(d.bins.len(), ESF_LEN);
        for h in 0..HISTOGRAMS {
            let s: f64 = d.bins[h * BINS..(h + 1) * BINS].iter().sum();
            assert!((s - 1.0).abs() < 1e-6, "histogram {h} sums to {s}");
        }
        assert!(d.bins.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn every_sub_histogram_is_normalized() {
        assert_normalized(&esf_of_points(&sphere(1, 400), 5000, 7).unwrap());
        assert_normalized(&esf_of_points(&plane(1, 400), 5000, 7).unwrap());
        let tri = [Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)];
        assert_normalized(&esf_of_points(&tri, 500, 1).unwrap());
    }

    #[test]
    fn degenerate_inputs() {
        assert!(esf_of_points(&[Point3::origin(), Point3::new(1.0, 0.0, 0.0)], 10, 0).is_err());
        let same = [Point3::new(1.0, 2.0, 3.0); 5];
        assert_eq!(esf_of_points(&same, 100, 0).unwrap(), EsfDescriptor::zeros());
    }

    #[test]
    fn rotation_changes_descriptor_only_by_grid_noise() {
        let pts = sphere(2, 600);
        let r = rotation_zyx(0.6, -0.9, 1.3);
        let rotated: Vec<Point3> = pts.iter().map(|p| Point3::from(r * p.coords)).collect();
        let a = esf_of_points(&pts, DEFAULT_SAMPLES, 3).unwrap();
        let b = esf_of_points(&rotated, DEFAULT_SAMPLES, 3).unwrap();
        assert!(a.distance(&b) < 0.05, "{}", a.distance(&b));
    }

    #[test]
    fn sphere_and_plane_are_told_apart() {
        let s1 = esf_of_points(&sphere(3, 800), DEFAULT_SAMPLES, 1).unwrap();
        let s2 = esf_of_points(&sphere(4, 800), DEFAULT_SAMPLES, 2).unwrap();
        let p = esf_of_points(&plane(5, 800), DEFAULT_SAMPLES, 1).unwrap();
        assert!(s1.distance(&p) > s1.distance(&s2), "{} vs {}", s1.distance(&p), s1.distance(&s2));
    }
}
