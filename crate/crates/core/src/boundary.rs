//! Collocation boundary-element discretization of the Poisson
//! representation formulas on the evolving curve.
//!
//! Densities (`u`, `∂u/∂n`, `κ`) are nodal and vary linearly along each
//! chord panel; every panel is integrated with the 3-point Gauss–Legendre
//! rule, whose abscissae are interior to the panel so the logarithmic
//! kernel is never sampled at the collocation node.
//!
//! Two systems are solved in sequence:
//!
//! 1. `(D + C) u = -S κ*` for the boundary potential `u`;
//! 2. `-S q + Σ_i c_i Φ(x - p_i) = (D + C) u` for the normal derivative `q`,
//!    reported as the normal speed `v = m ∘ q` with the pixel mask `m`.
//!
//! `S` is the single layer, `D` the double layer taken with the inward
//! frame normals, and `C` the diagonal jump term. In the continuum `C = ½`;
//! here `C_jj` is the row sum of `D`, which makes the discrete identity exact
//! for constant densities and cancels the near-singular part of the
//! adjacent-panel double-layer integrals.
//!
//! With no charges, stage 2 reduces to `S q = S κ*`, i.e. `q = κ*`: the
//! isotropic curvature flow is recovered. The potential `u` cancels
//! algebraically between the stages; it is still solved for and reported.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::ChargeSet;
use crate::geometry::{DiscreteCurve, LocalFrames, Vec2};
use crate::linalg::{condition_inf, ConditionReport, LuFactors};

const INV_TWO_PI: f64 = 0.5 * std::f64::consts::FRAC_1_PI;

/// Gauss–Legendre abscissae on `[0, 1]`: `½ ∓ √15/10` and `½`.
pub const GAUSS_ABSCISSAE: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
pub const GAUSS_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// A charge must be farther than this many mean panel lengths `ℓ/N` from
/// every node.
pub const CHARGE_CLEARANCE_PANELS: f64 = 1.0;

/// `Φ(r) = (1/2π) log(1/r)`.
pub fn fundamental_solution(r: f64) -> Result<f64> {
    if r > 0.0 {
        Ok(-INV_TWO_PI * r.ln())
    } else {
        Err(Error::SingularEvaluation)
    }
}

/// Derivative of `Φ(x - y)` with respect to `y` along `n_y`:
/// `<x - y, n_y> / (2π |x - y|²)`.
pub fn kernel_dphi_dn(x: Vec2, y: Vec2, n_y: Vec2) -> Result<f64> {
    let r = x - y;
    let r2 = r.norm_squared();
    if r2 > 0.0 {
        Ok(INV_TWO_PI * r.dot(&n_y) / r2)
    } else {
        Err(Error::SingularEvaluation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraturePoint {
    pub position: Vec2,
    /// Gauss weight times the chord length.
    pub weight: f64,
    /// Linear interpolation of the endpoint normals.
    pub normal: Vec2,
    /// Local coordinate in `(0, 1)` from the start node.
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub start: usize,
    pub end: usize,
    pub length: f64,
    pub nodes: [QuadraturePoint; 3],
}

/// Chord panels between consecutive nodes, with their quadrature data.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDiscretization {
    pub panels: Vec<Panel>,
    pub collocation: Vec<Vec2>,
}

impl PanelDiscretization {
    pub fn new(curve: &DiscreteCurve, frames: &LocalFrames) -> Result<Self> {
        let pts = curve.points();
        let n = pts.len();
        if frames.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: frames.len(),
            });
        }
        let panels = (0..n)
            .map(|start| {
                let end = (start + 1) % n;
                let (a, b) = (pts[start], pts[end]);
                let length = (b - a).norm();
                let nodes = std::array::from_fn(|g| {
                    let t = GAUSS_ABSCISSAE[g];
                    QuadraturePoint {
                        position: a + (b - a) * t,
                        weight: GAUSS_WEIGHTS[g] * length,
                        normal: frames.normals[start] * (1.0 - t) + frames.normals[end] * t,
                        t,
                    }
                });
                Panel {
                    start,
                    end,
                    length,
                    nodes,
                }
            })
            .collect();
        Ok(Self {
            panels,
            collocation: pts.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.collocation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.collocation.is_empty()
    }
}

/// Assembled single layer, double layer and jump term.
#[derive(Debug, Clone)]
pub struct BoundaryOperators {
    pub single_layer: DMatrix<f64>,
    pub double_layer: DMatrix<f64>,
    pub free_term: DVector<f64>,
}

impl BoundaryOperators {
    pub fn assemble(disc: &PanelDiscretization) -> Result<Self> {
        let n = disc.len();
        let rows: Vec<(Vec<f64>, Vec<f64>)> = disc
            .collocation
            .par_iter()
            .map(|&x| {
                let mut s_row = vec![0.0; n];
                let mut d_row = vec![0.0; n];
                for panel in &disc.panels {
                    for q in &panel.nodes {
                        let r = (x - q.position).norm();
                        let phi = fundamental_solution(r)?;
                        let dphi = kernel_dphi_dn(x, q.position, q.normal)?;
                        let (w0, w1) = (q.weight * (1.0 - q.t), q.weight * q.t);
                        s_row[panel.start] += w0 * phi;
                        s_row[panel.end] += w1 * phi;
                        d_row[panel.start] += w0 * dphi;
                        d_row[panel.end] += w1 * dphi;
                    }
                }
                Ok((s_row, d_row))
            })
            .collect::<Result<_>>()?;

        let mut single_layer = DMatrix::zeros(n, n);
        let mut double_layer = DMatrix::zeros(n, n);
        for (j, (s_row, d_row)) in rows.iter().enumerate() {
            for k in 0..n {
                single_layer[(j, k)] = s_row[k];
                double_layer[(j, k)] = d_row[k];
            }
        }
        let free_term = DVector::from_iterator(n, double_layer.row_iter().map(|r| r.sum()));
        Ok(Self {
            single_layer,
            double_layer,
            free_term,
        })
    }

    /// `D + C`, the operator applied to `u` on the right of both identities.
    pub fn potential_operator(&self) -> DMatrix<f64> {
        let mut m = self.double_layer.clone();
        for j in 0..m.nrows() {
            m[(j, j)] += self.free_term[j];
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySolution {
    /// Boundary potential.
    pub u: Vec<f64>,
    /// Masked normal derivative `mask · ∂u/∂n` along the inward frame
    /// normals; the normal speed of the update.
    pub v: Vec<f64>,
}

/// Both stage systems for one curve configuration.
#[derive(Debug, Clone)]
pub struct BoundarySystem {
    pub discretization: PanelDiscretization,
    pub operators: BoundaryOperators,
    mean_panel: f64,
}

impl BoundarySystem {
    pub fn new(curve: &DiscreteCurve, frames: &LocalFrames) -> Result<Self> {
        let discretization = PanelDiscretization::new(curve, frames)?;
        let operators = BoundaryOperators::assemble(&discretization)?;
        Ok(Self {
            discretization,
            operators,
            mean_panel: curve.perimeter() / curve.len() as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.discretization.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discretization.is_empty()
    }

    fn check_len(&self, actual: usize) -> Result<()> {
        if actual == self.len() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.len(),
                actual,
            })
        }
    }

    pub fn stage1_matrix(&self) -> DMatrix<f64> {
        self.operators.potential_operator()
    }

    pub fn stage1_rhs(&self, kappa_masked: &[f64]) -> Result<DVector<f64>> {
        self.check_len(kappa_masked.len())?;
        let kappa = DVector::from_column_slice(kappa_masked);
        Ok(-(&self.operators.single_layer * kappa))
    }

    pub fn solve_stage1(&self, kappa_masked: &[f64]) -> Result<Vec<f64>> {
        let rhs = self.stage1_rhs(kappa_masked)?;
        let u = LuFactors::new(&self.stage1_matrix())?.solve(&rhs)?;
        Ok(u.iter().copied().collect())
    }

    /// Rejects charges within [`CHARGE_CLEARANCE_PANELS`] mean panel lengths
    /// of a node.
    pub fn check_charge_clearance(&self, charges: &ChargeSet) -> Result<()> {
        let limit = CHARGE_CLEARANCE_PANELS * self.mean_panel;
        for (i, charge) in charges.iter().enumerate() {
            let distance = self
                .discretization
                .collocation
                .iter()
                .map(|x| (x - charge.position).norm())
                .fold(f64::INFINITY, f64::min);
            if !(distance > limit) {
                return Err(Error::ChargeTooClose {
                    charge: i,
                    distance,
                    limit,
                });
            }
        }
        Ok(())
    }

    /// Stage-2 matrix bordered by one column per charge.
    ///
    /// Column `N + i` holds `c_i · Φ(x_j - p_i)` and its row is an identity
    /// row pinning the source multiplier to one, so the charges' positions
    /// enter the matrix whose conditioning is reported.
    pub fn stage2_matrix(&self, charges: &ChargeSet) -> Result<DMatrix<f64>> {
        let n = self.len();
        let m = charges.len();
        let mut a = DMatrix::zeros(n + m, n + m);
        a.view_mut((0, 0), (n, n))
            .copy_from(&(-&self.operators.single_layer));
        for (i, charge) in charges.iter().enumerate() {
            for (j, x) in self.discretization.collocation.iter().enumerate() {
                let phi = fundamental_solution((x - charge.position).norm())?;
                a[(j, n + i)] = charge.strength * phi;
            }
            a[(n + i, n + i)] = 1.0;
        }
        Ok(a)
    }

    pub fn stage2_rhs(&self, u: &[f64], charge_count: usize) -> Result<DVector<f64>> {
        self.check_len(u.len())?;
        let n = self.len();
        let du = self.operators.potential_operator() * DVector::from_column_slice(u);
        Ok(DVector::from_fn(n + charge_count, |r, _| if r < n { du[r] } else { 1.0 }))
    }

    /// Normal velocity `mask_j · q_j`, where `q` solves the stage-2 system.
    ///
    /// The mask scales each node's solved speed. Scaling the charge rows
    /// instead would not be local: `S⁻¹` spreads a row-wise 0/1 pattern over
    /// the whole curve as high-frequency forcing.
    pub fn solve_stage2(&self, u: &[f64], charges: &ChargeSet, mask: &[f64]) -> Result<Vec<f64>> {
        self.check_len(mask.len())?;
        self.check_charge_clearance(charges)?;
        let a = self.stage2_matrix(charges)?;
        let rhs = self.stage2_rhs(u, charges.len())?;
        let q = LuFactors::new(&a)?.solve(&rhs)?;
        Ok(q.iter().zip(mask).map(|(q, m)| q * m).collect())
    }

    pub fn solve(&self, kappa_masked: &[f64], charges: &ChargeSet, mask: &[f64]) -> Result<BoundarySolution> {
        let u = self.solve_stage1(kappa_masked)?;
        let v = self.solve_stage2(&u, charges, mask)?;
        Ok(BoundarySolution { u, v })
    }

    /// Infinity-norm condition numbers of the stage-1 and bordered stage-2
    /// matrices.
    pub fn conditions(&self, charges: &ChargeSet) -> Result<(ConditionReport, ConditionReport)> {
        let c1 = condition_inf(&self.stage1_matrix())?;
        let c2 = condition_inf(&self.stage2_matrix(charges)?)?;
        Ok((c1, c2))
    }

    /// Per-node defect of Green's boundary identity for a harmonic `u` with
    /// inward normal derivative `dudn`:
    /// `-(S ∂u/∂n)_j - (C_j u_j - (D u)_j)`.
    ///
    /// Unlike the stage systems this uses the textbook sign on the
    /// double layer, so it checks the assembled quadrature against exact
    /// harmonic data independently of the stage sign convention.
    pub fn representation_residual(&self, u: &[f64], dudn: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u.len())?;
        self.check_len(dudn.len())?;
        let u = DVector::from_column_slice(u);
        let q = DVector::from_column_slice(dudn);
        let s_q = &self.operators.single_layer * q;
        let d_u = &self.operators.double_layer * &u;
        Ok((0..self.len())
            .map(|j| -s_q[j] - (self.operators.free_term[j] * u[j] - d_u[j]))
            .collect())
    }
}

/// Solves the stage-1 system for the boundary potential.
pub fn solve_stage1_boundary_potential(
    curve: &DiscreteCurve,
    frames: &LocalFrames,
    kappa_masked: &[f64],
) -> Result<Vec<f64>> {
    BoundarySystem::new(curve, frames)?.solve_stage1(kappa_masked)
}

/// Solves the stage-2 system for the normal velocity `q = ∂u/∂n`.
pub fn solve_stage2_normal_velocity(
    curve: &DiscreteCurve,
    frames: &LocalFrames,
    u: &[f64],
    charges: &ChargeSet,
    mask: &[f64],
) -> Result<Vec<f64>> {
    BoundarySystem::new(curve, frames)?.solve_stage2(u, charges, mask)
}

pub fn representation_residual(
    curve: &DiscreteCurve,
    frames: &LocalFrames,
    u_exact: &[f64],
    dudn_exact: &[f64],
) -> Result<Vec<f64>> {
    BoundarySystem::new(curve, frames)?.representation_residual(u_exact, dudn_exact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::Charge;
    use crate::geometry::local_frames;
    use approx::assert_relative_eq;
    use std::f64::consts::{E, PI};

    fn circle_system(radius: f64, n: usize) -> (DiscreteCurve, LocalFrames, BoundarySystem) {
        let c = DiscreteCurve::circle(Vec2::zeros(), radius, n).unwrap();
        let f = local_frames(&c, 0.15).unwrap();
        let s = BoundarySystem::new(&c, &f).unwrap();
        (c, f, s)
    }

    fn spread(v: &[f64]) -> f64 {
        let max = v.iter().copied().fold(f64::MIN, f64::max);
        let min = v.iter().copied().fold(f64::MAX, f64::min);
        let scale = v.iter().map(|x| x.abs()).fold(0.0, f64::max);
        (max - min) / scale
    }

    #[test]
    fn fundamental_solution_values() {
        assert_eq!(fundamental_solution(1.0).unwrap(), 0.0);
        assert_relative_eq!(fundamental_solution(1.0 / E).unwrap(), 1.0 / (2.0 * PI), epsilon = 1e-15);
        assert!(fundamental_solution(2.0).unwrap() < 0.0);
        assert!(fundamental_solution(0.5).unwrap() > 0.0);
        assert_eq!(fundamental_solution(0.0), Err(Error::SingularEvaluation));
    }

    #[test]
    fn double_layer_kernel_values() {
        let k = kernel_dphi_dn(Vec2::zeros(), Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        assert_relative_eq!(k, -1.0 / (2.0 * PI), epsilon = 1e-15);
        let k = kernel_dphi_dn(Vec2::zeros(), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)).unwrap();
        assert_eq!(k, 0.0);
        let y = Vec2::new(0.3, -0.4);
        let n = Vec2::new(0.6, 0.8);
        let k1 = kernel_dphi_dn(Vec2::zeros(), y, n).unwrap();
        let k2 = kernel_dphi_dn(Vec2::zeros(), y * 2.0, n).unwrap();
        assert_relative_eq!(k2, 0.5 * k1, epsilon = 1e-15);
        assert_eq!(kernel_dphi_dn(y, y, n), Err(Error::SingularEvaluation));
    }

    #[test]
    fn kernel_matches_finite_difference_of_phi() {
        let x = Vec2::new(0.2, 0.7);
        let y = Vec2::new(-0.5, 0.1);
        let n = Vec2::new(1.0, 2.0).normalize();
        let h = 1e-6;
        let phi = |yy: Vec2| fundamental_solution((x - yy).norm()).unwrap();
        let fd = (phi(y + n * h) - phi(y - n * h)) / (2.0 * h);
        assert_relative_eq!(kernel_dphi_dn(x, y, n).unwrap(), fd, max_relative = 1e-7);
    }

    #[test]
    fn panel_quadrature_is_interior_and_weights_sum_to_chord() {
        let (c, f, _) = circle_system(1.3, 24);
        let disc = PanelDiscretization::new(&c, &f).unwrap();
        for p in &disc.panels {
            let total: f64 = p.nodes.iter().map(|q| q.weight).sum();
            assert_relative_eq!(total, p.length, max_relative = 1e-12);
            for q in &p.nodes {
                assert!(q.t > 0.0 && q.t < 1.0);
                for x in &disc.collocation {
                    assert!((x - q.position).norm() > 0.0);
                }
            }
        }
    }

    #[test]
    fn zero_curvature_gives_zero_potential() {
        let (_, _, sys) = circle_system(2.0, 32);
        let u = sys.solve_stage1(&[0.0; 32]).unwrap();
        assert!(u.iter().all(|&x| x == 0.0));
        let v = sys.solve_stage2(&u, &ChargeSet::default(), &[1.0; 32]).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn circle_potential_is_constant() {
        let (_, f, sys) = circle_system(2.0, 64);
        let u = sys.solve_stage1(&f.curvature).unwrap();
        assert!(spread(&u) < 1e-6, "spread {}", spread(&u));
    }

    #[test]
    fn recovers_curvature_without_charges() {
        let (_, f, sys) = circle_system(2.0, 64);
        let sol = sys.solve(&f.curvature, &ChargeSet::default(), &[1.0; 64]).unwrap();
        for v in &sol.v {
            assert!((v - 0.5).abs() / 0.5 <= 0.02);
        }
    }

    #[test]
    fn centred_charge_shifts_speed_uniformly() {
        let (_, f, sys) = circle_system(8.0, 64);
        let charges = ChargeSet::new(vec![Charge::new(-1.0, Vec2::zeros())]);
        let sol = sys.solve(&f.curvature, &charges, &[1.0; 64]).unwrap();
        assert!(spread(&sol.v) < 1e-6);
        for (v, k) in sol.v.iter().zip(&f.curvature) {
            assert!((v - k).abs() > 1e-3);
        }
    }

    #[test]
    fn charge_guard() {
        let (_, f, sys) = circle_system(1.0, 32);
        let near = ChargeSet::new(vec![Charge::new(1.0, Vec2::new(0.99, 0.0))]);
        let u = sys.solve_stage1(&f.curvature).unwrap();
        assert!(matches!(
            sys.solve_stage2(&u, &near, &[1.0; 32]),
            Err(Error::ChargeTooClose { charge: 0, .. })
        ));
    }

    #[test]
    fn residual_vanishes_for_constants() {
        let (_, _, sys) = circle_system(1.0, 64);
        let r = sys.representation_residual(&[3.0; 64], &[0.0; 64]).unwrap();
        assert!(r.iter().all(|x| x.abs() <= 1e-12));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (_, _, sys) = circle_system(1.0, 16);
        assert!(matches!(sys.solve_stage1(&[0.0; 15]), Err(Error::DimensionMismatch { .. })));
    }
}
