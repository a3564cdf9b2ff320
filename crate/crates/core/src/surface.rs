//! Local surface fitting: a PCA frame around a neighborhood and a
//! least-squares quadric height field `w = a u² + b uv + c v² + d u + e v + f`
//! expressed in that frame.

use nalgebra::{Matrix3, Matrix6, SymmetricEigen, Vector3, Vector6};

use crate::cloud::Point3;

/// Below this many points a quadric is not fitted; the PCA plane is used instead.
pub const MIN_QUADRIC_POINTS: usize = 6;

const COLLINEAR_RATIO: f64 = 1e-10;
const QUADRIC_CONDITION: f64 = 1e-12;

/// Orthonormal frame centered on a neighborhood centroid. `axes[2]` is the
/// direction of least variance (the plane normal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: Vector3<f64>,
    pub axes: [Vector3<f64>; 3],
}

impl LocalFrame {
    pub fn to_local(&self, p: &Point3) -> Vector3<f64> {
        let d = Vector3::from(*p) - self.origin;
        Vector3::new(d.dot(&self.axes[0]), d.dot(&self.axes[1]), d.dot(&self.axes[2]))
    }

    pub fn to_world(&self, l: &Vector3<f64>) -> Point3 {
        let w = self.origin + self.axes[0] * l.x + self.axes[1] * l.y + self.axes[2] * l.z;
        [w.x, w.y, w.z]
    }

    pub fn normal(&self) -> Point3 {
        let n = self.axes[2];
        [n.x, n.y, n.z]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalQuadric {
    pub frame: LocalFrame,
    /// `[a, b, c, d, e, f]`
    pub coeffs: [f64; 6],
}

impl LocalQuadric {
    pub fn height(&self, u: f64, v: f64) -> f64 {
        let [a, b, c, d, e, f] = self.coeffs;
        a * u * u + b * u * v + c * v * v + d * u + e * v + f
    }

    fn gradient(&self, u: f64, v: f64) -> (f64, f64) {
        let [a, b, c, d, e, _] = self.coeffs;
        (2.0 * a * u + b * v + d, b * u + 2.0 * c * v + e)
    }

    pub fn normal_at(&self, u: f64, v: f64) -> Point3 {
        let (fu, fv) = self.gradient(u, v);
        let n = (self.frame.axes[0] * -fu + self.frame.axes[1] * -fv + self.frame.axes[2]).normalize();
        [n.x, n.y, n.z]
    }

    /// Signed mean curvature of the height field at `(u, v)`.
    pub fn mean_curvature_at(&self, u: f64, v: f64) -> f64 {
        let [a, b, c, ..] = self.coeffs;
        let (fu, fv) = self.gradient(u, v);
        let (fuu, fuv, fvv) = (2.0 * a, b, 2.0 * c);
        let g = 1.0 + fu * fu + fv * fv;
        ((1.0 + fv * fv) * fuu - 2.0 * fu * fv * fuv + (1.0 + fu * fu) * fvv) / (2.0 * g.powf(1.5))
    }
}

/// Result of fitting a surface to a neighborhood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceFit {
    Quadric(LocalQuadric),
    /// Too few points or an ill-posed quadric; the PCA plane is used.
    Plane(LocalFrame),
    /// Fewer than three points, or all of them collinear.
    Degenerate,
}

impl SurfaceFit {
    pub fn is_degenerate(&self) -> bool {
        matches!(self, SurfaceFit::Degenerate)
    }

    /// Unit normal at the vertical projection of `p`.
    pub fn normal_near(&self, p: &Point3) -> Option<Point3> {
        match self {
            SurfaceFit::Quadric(q) => {
                let l = q.frame.to_local(p);
                Some(q.normal_at(l.x, l.y))
            }
            SurfaceFit::Plane(frame) => Some(frame.normal()),
            SurfaceFit::Degenerate => None,
        }
    }

    /// Absolute mean curvature at the vertical projection of `p`; planes and
    /// degenerate fits have zero curvature.
    pub fn curvature_near(&self, p: &Point3) -> f64 {
        match self {
            SurfaceFit::Quadric(q) => {
                let l = q.frame.to_local(p);
                q.mean_curvature_at(l.x, l.y).abs()
            }
            _ => 0.0,
        }
    }

    /// Vertical projection of `p` onto the fitted surface.
    pub fn project(&self, p: &Point3) -> Point3 {
        match self {
            SurfaceFit::Quadric(q) => {
                let l = q.frame.to_local(p);
                q.frame.to_world(&Vector3::new(l.x, l.y, q.height(l.x, l.y)))
            }
            SurfaceFit::Plane(frame) => {
                let l = frame.to_local(p);
                frame.to_world(&Vector3::new(l.x, l.y, 0.0))
            }
            SurfaceFit::Degenerate => *p,
        }
    }
}

/// PCA frame of a point set, or `None` when it has fewer than three points
/// or is collinear.
pub fn pca_frame<'a, I>(points: I) -> Option<LocalFrame>
where
    I: IntoIterator<Item = &'a Point3>,
    I::IntoIter: Clone,
{
    let iter = points.into_iter();
    let mut n = 0usize;
    let mut centroid = Vector3::zeros();
    for p in iter.clone() {
        centroid += Vector3::from(*p);
        n += 1;
    }
    if n < 3 {
        return None;
    }
    centroid /= n as f64;
    let mut cov = Matrix3::zeros();
    for p in iter {
        let d = Vector3::from(*p) - centroid;
        cov += d * d.transpose();
    }
    cov /= n as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[order[2]];
    let middle = eig.eigenvalues[order[1]];
    if !(largest > 0.0) || middle <= COLLINEAR_RATIO * largest {
        return None;
    }
    let x: Vector3<f64> = eig.eigenvectors.column(order[2]).into();
    let y: Vector3<f64> = eig.eigenvectors.column(order[1]).into();
    let x = x.normalize();
    let y = (y - x * x.dot(&y)).normalize();
    let z = x.cross(&y);
    Some(LocalFrame {
        origin: centroid,
        axes: [x, y, z],
    })
}

/// Fits a quadric height field when at least [`MIN_QUADRIC_POINTS`] points
/// are available, falling back to the PCA plane.
pub fn fit_surface(points: &[Point3]) -> SurfaceFit {
    fit_surface_iter(points.iter())
}

pub fn fit_surface_iter<'a, I>(points: I) -> SurfaceFit
where
    I: IntoIterator<Item = &'a Point3>,
    I::IntoIter: Clone,
{
    let iter = points.into_iter();
    let Some(frame) = pca_frame(iter.clone()) else {
        return SurfaceFit::Degenerate;
    };
    let locals: Vec<Vector3<f64>> = iter.map(|p| frame.to_local(p)).collect();
    if locals.len() < MIN_QUADRIC_POINTS {
        return SurfaceFit::Plane(frame);
    }
    // Normalize the tangent coordinates so the normal matrix is well scaled.
    let scale = locals
        .iter()
        .map(|l| l.x.abs().max(l.y.abs()))
        .fold(0.0f64, f64::max);
    if !(scale > 0.0) {
        return SurfaceFit::Plane(frame);
    }
    let mut ata = Matrix6::zeros();
    let mut atb = Vector6::zeros();
    for l in &locals {
        let (u, v) = (l.x / scale, l.y / scale);
        let row = Vector6::new(u * u, u * v, v * v, u, v, 1.0);
        ata += row * row.transpose();
        atb += row * (l.z / scale);
    }
    let eig = SymmetricEigen::new(ata);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min <= QUADRIC_CONDITION * max {
        return SurfaceFit::Plane(frame);
    }
    let projected = eig.eigenvectors.transpose() * atb;
    let scaled = projected.component_div(&eig.eigenvalues);
    let sol = eig.eigenvectors * scaled;
    let coeffs = [
        sol[0] / scale,
        sol[1] / scale,
        sol[2] / scale,
        sol[3],
        sol[4],
        sol[5] * scale,
    ];
    if coeffs.iter().any(|c| !c.is_finite()) {
        return SurfaceFit::Plane(frame);
    }
    SurfaceFit::Quadric(LocalQuadric { frame, coeffs })
}
