//! Closed polylines and the purely geometric estimators the flow needs.
//!
//! All index arithmetic on a curve is cyclic: node `N` is node `0`.

use crate::error::{Error, Result};

pub type Vec2 = nalgebra::Vector2<f64>;

/// Points closer than this to a polygon edge are not considered inside.
pub const EDGE_TOLERANCE: f64 = 1e-12;

/// Rotation by +90 degrees, the matrix `[[0, -1], [1, 0]]`.
#[inline]
pub fn rotate_quarter(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// Sum of cyclic segment lengths, including the closing segment.
pub fn perimeter(points: &[Vec2]) -> f64 {
    let n = points.len();
    (0..n).map(|j| (points[(j + 1) % n] - points[j]).norm()).sum()
}

/// Shoelace area, positive for counterclockwise ordering.
pub fn signed_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    let twice: f64 = (0..n)
        .map(|j| {
            let a = points[j];
            let b = points[(j + 1) % n];
            a.x * b.y - b.x * a.y
        })
        .sum();
    0.5 * twice
}

fn distance_to_segment(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Even-odd ray test. Points on (or within [`EDGE_TOLERANCE`] of) an edge
/// are reported as outside.
pub fn point_in_polygon(points: &[Vec2], p: Vec2) -> bool {
    let n = points.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    for j in 0..n {
        let a = points[j];
        let b = points[(j + 1) % n];
        if distance_to_segment(p, a, b) <= EDGE_TOLERANCE {
            return false;
        }
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Ordered, counterclockwise, closed polyline with at least
/// [`DiscreteCurve::MIN_POINTS`] nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    points: Vec<Vec2>,
}

impl DiscreteCurve {
    /// The curvature stencil reaches two nodes to each side.
    pub const MIN_POINTS: usize = 5;

    /// Validates the point list. Clockwise input is reversed to
    /// counterclockwise.
    pub fn new(mut points: Vec<Vec2>) -> Result<Self> {
        let n = points.len();
        if n < Self::MIN_POINTS {
            return Err(Error::InvalidCurve(format!(
                "need at least {} points, got {n}",
                Self::MIN_POINTS
            )));
        }
        if let Some(j) = points.iter().position(|p| !(p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::InvalidCurve(format!("non-finite coordinate at node {j}")));
        }
        for j in 0..n {
            if points[(j + 1) % n] == points[j] {
                return Err(Error::InvalidCurve(format!(
                    "nodes {j} and {} coincide",
                    (j + 1) % n
                )));
            }
        }
        let area = signed_area(&points);
        if area == 0.0 {
            return Err(Error::InvalidCurve("zero enclosed area".into()));
        }
        if area < 0.0 {
            points.reverse();
        }
        Ok(Self { points })
    }

    /// Output of an update step. Orientation is not corrected here: a flip
    /// during evolution is a symptom, not an input convention.
    pub(crate) fn from_evolved(points: Vec<Vec2>) -> Self {
        Self { points }
    }

    /// Regular `n`-gon inscribed in the circle, first node at angle zero.
    pub fn circle(center: Vec2, radius: f64, n: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidCurve(format!("circle radius {radius} must be positive")));
        }
        let points = (0..n)
            .map(|j| {
                let theta = std::f64::consts::TAU * j as f64 / n as f64;
                center + Vec2::new(radius * theta.cos(), radius * theta.sin())
            })
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec2> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `d_j = |φ_{j+1} - φ_j|` for every node.
    pub fn segment_lengths(&self) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|j| (self.points[(j + 1) % n] - self.points[j]).norm())
            .collect()
    }

    pub fn perimeter(&self) -> f64 {
        perimeter(&self.points)
    }

    pub fn enclosed_area(&self) -> f64 {
        signed_area(&self.points).abs()
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        point_in_polygon(&self.points, p)
    }

    /// Arithmetic mean of the nodes.
    pub fn centroid(&self) -> Vec2 {
        let sum = self.points.iter().fold(Vec2::zeros(), |acc, p| acc + p);
        sum / self.len() as f64
    }

    /// Mean distance of the nodes from their centroid.
    pub fn mean_radius(&self) -> f64 {
        let c = self.centroid();
        self.points.iter().map(|p| (p - c).norm()).sum::<f64>() / self.len() as f64
    }

    pub fn min_distance_to(&self, p: Vec2) -> f64 {
        self.points
            .iter()
            .map(|q| (q - p).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Resamples the polyline at `n` points equally spaced in arc length,
    /// starting from node 0.
    pub fn resample_uniform(&self, n: usize) -> Result<Self> {
        let lengths = self.segment_lengths();
        let total: f64 = lengths.iter().sum();
        let mut out = Vec::with_capacity(n);
        let mut seg = 0;
        let mut seg_start = 0.0;
        for k in 0..n {
            let s = total * k as f64 / n as f64;
            while seg + 1 < lengths.len() && seg_start + lengths[seg] <= s {
                seg_start += lengths[seg];
                seg += 1;
            }
            let a = self.points[seg];
            let b = self.points[(seg + 1) % self.len()];
            let t = ((s - seg_start) / lengths[seg]).clamp(0.0, 1.0);
            out.push(a + (b - a) * t);
        }
        Self::new(out)
    }
}

/// Stencil offsets in storage order for the per-node arrays below.
pub const STENCIL_OFFSETS: [isize; 4] = [-2, -1, 1, 2];

/// Per-node tangent, inward normal and curvature from the five-point
/// Kimura estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFrames {
    pub tangents: Vec<Vec2>,
    pub normals: Vec<Vec2>,
    /// Signed scalar curvature `<K_j, n_j>`; positive on convex CCW curves.
    pub curvature: Vec<f64>,
    pub curvature_vectors: Vec<Vec2>,
    /// `d_i = |φ_{j+i} - φ_j|` for offsets `-2, -1, 1, 2`.
    pub stencil_lengths: Vec<[f64; 4]>,
    /// `τ_i = sign(i) (φ_{j+i} - φ_j) / d_i` for offsets `-2, -1, 1, 2`.
    pub stencil_directions: Vec<[Vec2; 4]>,
}

impl LocalFrames {
    pub fn len(&self) -> usize {
        self.tangents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tangents.is_empty()
    }
}

/// Tangents, normals and curvature at every node.
///
/// `mu` blends the nearest-neighbour curvature stencil (weight `mu`) with
/// the two-apart stencil (weight `1 - mu`). The denominators are the sums
/// `d_1 + d_{-1}` and `d_2 + d_{-2}`, the central arc lengths of each
/// stencil.
pub fn local_frames(curve: &DiscreteCurve, mu: f64) -> Result<LocalFrames> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::InvalidConfig(format!("mu = {mu} outside [0, 1]")));
    }
    let pts = curve.points();
    let n = pts.len();
    if n < DiscreteCurve::MIN_POINTS {
        return Err(Error::InvalidCurve(format!("need at least 5 points, got {n}")));
    }

    let mut frames = LocalFrames {
        tangents: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
        curvature: Vec::with_capacity(n),
        curvature_vectors: Vec::with_capacity(n),
        stencil_lengths: Vec::with_capacity(n),
        stencil_directions: Vec::with_capacity(n),
    };

    for j in 0..n {
        let mut d = [0.0; 4];
        let mut tau = [Vec2::zeros(); 4];
        for (slot, &offset) in STENCIL_OFFSETS.iter().enumerate() {
            let other = (j as isize + offset).rem_euclid(n as isize) as usize;
            let chord = pts[other] - pts[j];
            let len = chord.norm();
            if len == 0.0 {
                return Err(Error::DegenerateStencil { node: j });
            }
            d[slot] = len;
            tau[slot] = chord * (offset.signum() as f64 / len);
        }
        let [tau_m2, tau_m1, tau_p1, tau_p2] = tau;
        let [d_m2, d_m1, d_p1, d_p2] = d;

        let raw = (-tau_p2 + tau_p1 * 4.0 + tau_m1 * 4.0 - tau_m2) / 6.0;
        let norm = raw.norm();
        if norm == 0.0 {
            return Err(Error::DegenerateStencil { node: j });
        }
        let tangent = raw / norm;
        let normal = rotate_quarter(tangent);

        let k_vec = (tau_p1 - tau_m1) * (mu * 2.0 / (d_p1 + d_m1))
            + (tau_p2 - tau_m2) * ((1.0 - mu) * 2.0 / (d_p2 + d_m2));

        frames.tangents.push(tangent);
        frames.normals.push(normal);
        frames.curvature.push(k_vec.dot(&normal));
        frames.curvature_vectors.push(k_vec);
        frames.stencil_lengths.push(d);
        frames.stencil_directions.push(tau);
    }
    Ok(frames)
}

/// Tangential speeds `a_j` that drive the nodes towards uniform spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentialCoefficients {
    pub values: Vec<f64>,
}

impl TangentialCoefficients {
    /// Solves `a_{j+1} - a_j = (ℓ/N - d_j)/Δt` cyclically with `Σ a_j = 0`.
    ///
    /// The difference system is consistent because its right-hand side sums
    /// to zero; the solution is a cumulative sum shifted to zero mean.
    pub fn from_segment_lengths(lengths: &[f64], dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("time step {dt} must be positive")));
        }
        let n = lengths.len();
        if n == 0 {
            return Ok(Self { values: Vec::new() });
        }
        let mean_len = lengths.iter().sum::<f64>() / n as f64;
        let mut values = Vec::with_capacity(n);
        let mut acc = 0.0;
        values.push(acc);
        for d in &lengths[..n - 1] {
            acc += (mean_len - d) / dt;
            values.push(acc);
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        for a in &mut values {
            *a -= mean;
        }
        Ok(Self { values })
    }

    /// Largest residual of the difference equations (including the closing
    /// one), relative to the largest of `max |rhs|`, `max |a|` and the term
    /// scale `(ℓ/N)/Δt`.
    ///
    /// The last one matters on nearly uniform curves, where both sides are
    /// rounding noise from `ℓ/N - d_j`.
    pub fn max_relative_residual(&self, lengths: &[f64], dt: f64) -> f64 {
        let n = lengths.len();
        let mean_len = lengths.iter().sum::<f64>() / n as f64;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = mean_len / dt;
        for j in 0..n {
            let rhs = (mean_len - lengths[j]) / dt;
            let lhs = self.values[(j + 1) % n] - self.values[j];
            worst = worst.max((lhs - rhs).abs());
            scale = scale.max(rhs.abs()).max(self.values[j].abs());
        }
        if scale == 0.0 {
            worst
        } else {
            worst / scale
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub fn tangential_coefficients(curve: &DiscreteCurve, dt: f64) -> Result<TangentialCoefficients> {
    TangentialCoefficients::from_segment_lengths(&curve.segment_lengths(), dt)
}
