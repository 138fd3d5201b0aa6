//! Points, clouds and similarity transforms.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::{Matrix3, Matrix4, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;

/// An ordered point set, optionally carrying triangle faces.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub faces: Option<Vec<[usize; 3]>>,
    pub id: String,
}

impl PointCloud {
    pub fn new(id: impl Into<String>, points: Vec<Point3>) -> Self {
        Self { points, faces: None, id: id.into() }
    }

    pub fn with_faces(id: impl Into<String>, points: Vec<Point3>, faces: Vec<[usize; 3]>) -> Self {
        Self { points, faces: Some(faces), id: id.into() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks finiteness of every coordinate and that faces index valid points.
    pub fn validate(&self) -> Result<()> {
        if let Some(index) = self.points.iter().position(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        if let Some(faces) = &self.faces {
            for (f, face) in faces.iter().enumerate() {
                if let Some(&v) = face.iter().find(|&&v| v >= self.points.len()) {
                    return Err(Error::FaceOutOfRange { face: f, vertex: v, count: self.points.len() });
                }
            }
        }
        Ok(())
    }

    pub(crate) fn require_len(&self, needed: usize) -> Result<()> {
        if self.points.is_empty() && needed > 0 {
            return Err(Error::EmptyCloud { cloud: self.id.clone() });
        }
        if self.points.len() < needed {
            return Err(Error::TooFewPoints { cloud: self.id.clone(), needed, got: self.points.len() });
        }
        Ok(())
    }

    /// Keeps the points at `indices`, in that order. Faces are dropped.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud::new(self.id.clone(), indices.iter().map(|&i| self.points[i]).collect())
    }

    pub fn bounding_box(&self) -> Option<(Point3, Point3)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
    }
}

/// `x ↦ scale · rotation · x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self { scale: 1.0, rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(scale: f64, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { scale, rotation, translation }
    }

    pub fn rigid(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self::new(1.0, rotation, translation)
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self::rigid(Matrix3::identity(), translation)
    }

    /// Uniform scaling by `scale` about `center`.
    pub fn scaling_about(scale: f64, center: &Point3) -> Self {
        Self::new(scale, Matrix3::identity(), center.coords * (1.0 - scale))
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords * self.scale + self.translation)
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v * self.scale
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn compose(&self, first: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            scale: self.scale * first.scale,
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation * self.scale + self.translation,
        }
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let rt = self.rotation.transpose();
        let inv_scale = 1.0 / self.scale;
        SimilarityTransform { scale: inv_scale, rotation: rt, translation: -(rt * self.translation) * inv_scale }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(self.rotation * self.scale));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Rotation orthonormal with determinant +1 (within `tol`), finite, positive scale.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let finite = self.scale.is_finite()
            && self.rotation.iter().all(|v| v.is_finite())
            && self.translation.iter().all(|v| v.is_finite());
        if !finite || self.scale <= 0.0 {
            return Err(Error::InvalidParameter("transform scale must be positive and finite".to_string()));
        }
        let orth = (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs().max();
        let det = self.rotation.determinant();
        if orth > tol || (det - 1.0).abs() > tol {
            return Err(Error::InvalidParameter("rotation is not a proper orthonormal matrix".to_string()));
        }
        Ok(())
    }
}

pub fn apply_transform(cloud: &PointCloud, t: &SimilarityTransform) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|p| t.apply(p)).collect(),
        faces: cloud.faces.clone(),
        id: cloud.id.clone(),
    }
}

/// Arithmetic mean of a non-empty point list.
pub fn mean_point(points: &[Point3]) -> Point3 {
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / points.len() as f64)
}

pub fn centroid(cloud: &PointCloud) -> Result<Point3> {
    cloud.require_len(1)?;
    Ok(mean_point(&cloud.points))
}

/// Largest distance from any point to the centroid.
pub fn cloud_radius(cloud: &PointCloud) -> Result<f64> {
    let c = centroid(cloud)?;
    Ok(cloud.points.iter().map(|p| (p - c).norm()).fold(0.0, f64::max))
}

/// Rotation by `angle` radians about the unit x, y or z axis.
pub fn axis_rotation(axis: usize, angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    match axis {
        0 => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        1 => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        _ => Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
    }
}

/// `Rz(z) · Ry(y) · Rx(x)`.
pub fn rotation_zyx(z: f64, y: f64, x: f64) -> Matrix3<f64> {
    axis_rotation(2, z) * axis_rotation(1, y) * axis_rotation(0, x)
}

/// Rotation angle of `r` in radians, accurate near zero and π.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let axis = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    axis.norm().atan2(r.trace() - 1.0)
}
