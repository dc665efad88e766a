//! Explicit update scheme and the contour-parametrization loop.

use crate::boundary::{BoundarySolution, BoundarySystem};
use crate::error::{Error, Result};
use crate::geometry::{local_frames, tangential_coefficients, DiscreteCurve, LocalFrames, TangentialCoefficients, Vec2};
use crate::image::PixelField;
use crate::linalg::ConditionReport;
use crate::stability::{dt_policy, eigen_bound, StabilityInputs};

/// Point charge `c · δ(y - p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Charge {
    pub strength: f64,
    pub position: Vec2,
}

impl Charge {
    pub fn new(strength: f64, position: Vec2) -> Self {
        Self { strength, position }
    }
}

/// Charges defining the source density. Empty means plain curvature flow.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChargeSet {
    charges: Vec<Charge>,
}

impl ChargeSet {
    pub fn new(charges: Vec<Charge>) -> Self {
        Self { charges }
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Charge> {
        self.charges.iter()
    }

    pub fn len(&self) -> usize {
        self.charges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charges.is_empty()
    }

    pub fn push(&mut self, charge: Charge) {
        self.charges.push(charge);
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.charges.iter().enumerate() {
            if !(c.strength.is_finite() && c.position.x.is_finite() && c.position.y.is_finite()) {
                return Err(Error::InvalidConfig(format!("charge {i} has non-finite data")));
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a ChargeSet {
    type Item = &'a Charge;
    type IntoIter = std::slice::Iter<'a, Charge>;

    fn into_iter(self) -> Self::IntoIter {
        self.charges.iter()
    }
}

/// Velocity clamp for plain curvature flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clamp {
    /// `v = min(κ, 0)`
    Min0,
    /// `v = max(κ, 0)`
    Max0,
}

impl Clamp {
    pub fn apply(self, kappa: f64) -> f64 {
        match self {
            Clamp::Min0 => kappa.min(0.0),
            Clamp::Max0 => kappa.max(0.0),
        }
    }
}

impl std::str::FromStr for Clamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min0" => Ok(Clamp::Min0),
            "max0" => Ok(Clamp::Max0),
            other => Err(Error::InvalidConfig(format!("unknown clamp mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    /// Number of curve nodes; the initial curve is resampled if it differs.
    pub n: usize,
    pub dt: f64,
    /// Weight of the nearest-neighbour curvature stencil.
    pub mu: f64,
    /// Fraction of nodes on the object that stops the run.
    pub match_threshold: f64,
    pub max_iterations: usize,
    /// Intensities at or below this count as the object.
    pub pixel_black_cutoff: u8,
    /// Record a snapshot every this many iterations.
    pub trace_every: usize,
    pub clamp: Option<Clamp>,
    /// Evaluate the error-amplification bound at every snapshot.
    pub stability: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self::with_points(64)
    }
}

impl FlowConfig {
    /// Defaults with `n` nodes and `dt = 1/n²`.
    pub fn with_points(n: usize) -> Self {
        Self {
            n,
            dt: dt_policy(n),
            mu: 0.15,
            match_threshold: 0.90,
            max_iterations: 50_000,
            pixel_black_cutoff: 0,
            trace_every: 100,
            clamp: None,
            stability: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < DiscreteCurve::MIN_POINTS {
            return Err(Error::InvalidConfig(format!("n = {} below {}", self.n, DiscreteCurve::MIN_POINTS)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt = {} must be positive", self.dt)));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(Error::InvalidConfig(format!("mu = {} outside [0, 1]", self.mu)));
        }
        if !(self.match_threshold > 0.0 && self.match_threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "match threshold {} outside (0, 1]",
                self.match_threshold
            )));
        }
        if self.trace_every == 0 {
            return Err(Error::InvalidConfig("trace cadence must be at least 1".into()));
        }
        Ok(())
    }
}

/// `φ_j + Δt (a_j T_j + v_j n_j)` for every node.
///
/// Fails with [`Error::BlowUp`] if any node moves farther than half the
/// curve length in one step.
pub fn step(
    curve: &DiscreteCurve,
    frames: &LocalFrames,
    tangential: &TangentialCoefficients,
    v: &[f64],
    dt: f64,
) -> Result<DiscreteCurve> {
    let n = curve.len();
    for len in [frames.len(), tangential.values.len(), v.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, actual: len });
        }
    }
    let limit = 0.5 * curve.perimeter();
    let mut next = Vec::with_capacity(n);
    for (j, p) in curve.points().iter().enumerate() {
        let disp = (frames.tangents[j] * tangential.values[j] + frames.normals[j] * v[j]) * dt;
        let len = disp.norm();
        if !(len <= limit) {
            return Err(Error::BlowUp {
                node: j,
                displacement: len,
                limit,
            });
        }
        next.push(p + disp);
    }
    Ok(DiscreteCurve::from_evolved(next))
}

/// Share of nodes whose intensity is at most `cutoff`.
pub fn matched_fraction(curve: &DiscreteCurve, field: &PixelField, cutoff: u8) -> f64 {
    let hits = curve.points().iter().filter(|p| field.pix(**p) <= cutoff).count();
    hits as f64 / curve.len() as f64
}

/// `100 · min(A_black, A_curve) / max(A_black, A_curve)` in percent.
pub fn area_accuracy(curve: &DiscreteCurve, field: &PixelField, cutoff: u8) -> f64 {
    let black = field.count_at_most(cutoff) as f64 * field.scale() * field.scale();
    let inside = curve.enclosed_area();
    let (lo, hi) = if black < inside { (black, inside) } else { (inside, black) };
    if hi == 0.0 {
        return 100.0;
    }
    100.0 * lo / hi
}

/// Node average, a reasonable charge position for convex targets.
pub fn centroid_charge(curve: &DiscreteCurve) -> Vec2 {
    curve.centroid()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminalReason {
    Matched,
    MaxIterations,
    ChargeExited,
    BlowUp,
    SingularSystem,
}

impl TerminalReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminalReason::Matched => "matched",
            TerminalReason::MaxIterations => "max_iterations",
            TerminalReason::ChargeExited => "charge_exited",
            TerminalReason::BlowUp => "blow_up",
            TerminalReason::SingularSystem => "singular_system",
        }
    }

    fn from_error(err: &Error) -> Self {
        match err {
            Error::ChargeExited { .. } | Error::ChargeTooClose { .. } => TerminalReason::ChargeExited,
            Error::BlowUp { .. } | Error::DegenerateStencil { .. } | Error::InvalidCurve(_) => TerminalReason::BlowUp,
            _ => TerminalReason::SingularSystem,
        }
    }
}

impl std::fmt::Display for TerminalReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Termination {
    pub reason: TerminalReason,
    /// Iteration at which the run stopped (the failing step for errors).
    pub iteration: usize,
    pub error: Option<Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub iteration: usize,
    pub time: f64,
    pub curve: DiscreteCurve,
    pub matched_fraction: f64,
    pub area: f64,
    /// `max |v_j|` of the step that produced this curve.
    pub max_speed: Option<f64>,
    pub cond_stage1: Option<f64>,
    pub cond_stage2: Option<f64>,
    pub stability_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub snapshots: Vec<Snapshot>,
    pub termination: Termination,
    pub final_curve: DiscreteCurve,
}

impl FlowTrace {
    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trace always holds the initial snapshot")
    }
}

/// Everything computed while taking one step.
#[derive(Debug, Clone)]
pub struct StepReport {
    /// Index of the step just taken, starting at 1.
    pub iteration: usize,
    pub previous: DiscreteCurve,
    pub curve: DiscreteCurve,
    pub frames: LocalFrames,
    pub tangential: TangentialCoefficients,
    pub mask: Vec<f64>,
    /// Normal speeds used in the update.
    pub velocity: Vec<f64>,
    pub solution: Option<BoundarySolution>,
    pub conditions: Option<(ConditionReport, ConditionReport)>,
}

impl StepReport {
    pub fn max_speed(&self) -> f64 {
        self.velocity.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Stateful stepper; [`run`] drives it to a terminal state.
#[derive(Debug, Clone)]
pub struct Evolution<'a> {
    curve: DiscreteCurve,
    charges: &'a ChargeSet,
    field: Option<&'a PixelField>,
    config: &'a FlowConfig,
    iteration: usize,
}

impl<'a> Evolution<'a> {
    pub fn new(
        initial: &DiscreteCurve,
        charges: &'a ChargeSet,
        field: Option<&'a PixelField>,
        config: &'a FlowConfig,
    ) -> Result<Self> {
        config.validate()?;
        charges.validate()?;
        if config.clamp.is_some() && !charges.is_empty() {
            return Err(Error::InvalidConfig("velocity clamp applies only without charges".into()));
        }
        let curve = if initial.len() == config.n {
            initial.clone()
        } else {
            initial.resample_uniform(config.n)?
        };
        Ok(Self {
            curve,
            charges,
            field,
            config,
            iteration: 0,
        })
    }

    pub fn curve(&self) -> &DiscreteCurve {
        &self.curve
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn mask(&self) -> Vec<f64> {
        match self.field {
            Some(f) => self.curve.points().iter().map(|p| f.mask_factor(*p)).collect(),
            None => vec![1.0; self.curve.len()],
        }
    }

    pub fn matched_fraction(&self) -> f64 {
        self.field
            .map(|f| matched_fraction(&self.curve, f, self.config.pixel_black_cutoff))
            .unwrap_or(0.0)
    }

    fn check_charges_inside(&self) -> Result<()> {
        match self.charges.iter().position(|c| !self.curve.contains(c.position)) {
            Some(charge) => Err(Error::ChargeExited { charge }),
            None => Ok(()),
        }
    }

    /// One pass of the loop body: containment check, frames, tangential
    /// coefficients, boundary solves, update.
    pub fn advance(&mut self, with_conditions: bool) -> Result<StepReport> {
        self.check_charges_inside()?;
        let mask = self.mask();
        let frames = local_frames(&self.curve, self.config.mu)?;
        let tangential = tangential_coefficients(&self.curve, self.config.dt)?;

        let kappa_masked: Vec<f64> = frames
            .curvature
            .iter()
            .zip(&mask)
            .map(|(k, m)| {
                let k = match self.config.clamp {
                    Some(c) => c.apply(*k),
                    None => *k,
                };
                k * m
            })
            .collect();

        let (velocity, solution, conditions) = if self.charges.is_empty() {
            // with no source the stage-2 system reduces to q = κ*
            (kappa_masked, None, None)
        } else {
            let system = BoundarySystem::new(&self.curve, &frames)?;
            let solution = system.solve(&kappa_masked, self.charges, &mask)?;
            let velocity = solution.v.clone();
            let conditions = if with_conditions {
                Some(system.conditions(self.charges)?)
            } else {
                None
            };
            (velocity, Some(solution), conditions)
        };

        let next = step(&self.curve, &frames, &tangential, &velocity, self.config.dt)?;
        let previous = std::mem::replace(&mut self.curve, next);
        self.iteration += 1;
        Ok(StepReport {
            iteration: self.iteration,
            previous,
            curve: self.curve.clone(),
            frames,
            tangential,
            mask,
            velocity,
            solution,
            conditions,
        })
    }
}

fn snapshot(
    evo: &Evolution<'_>,
    config: &FlowConfig,
    report: Option<&StepReport>,
    matched: f64,
) -> Snapshot {
    let max_speed = report.map(StepReport::max_speed);
    let stability_bound = match (config.stability, report) {
        (true, Some(r)) => Some(eigen_bound(&StabilityInputs {
            v_star: r.max_speed(),
            length: r.previous.perimeter(),
            n1: r.previous.len(),
            n2: r.previous.len(),
            dt: config.dt,
        })),
        _ => None,
    };
    let conds = report.and_then(|r| r.conditions);
    Snapshot {
        iteration: evo.iteration(),
        time: evo.iteration() as f64 * config.dt,
        curve: evo.curve().clone(),
        matched_fraction: matched,
        area: evo.curve().enclosed_area(),
        max_speed,
        cond_stage1: conds.map(|c| c.0.condition),
        cond_stage2: conds.map(|c| c.1.condition),
        stability_bound,
    }
}

/// Evolves `initial` until the matched fraction reaches the threshold, the
/// iteration budget runs out, a charge leaves the curve, or the step fails.
///
/// Configuration errors are returned as `Err`; everything that happens
/// during the loop ends up in [`FlowTrace::termination`].
pub fn run(
    initial: &DiscreteCurve,
    charges: &ChargeSet,
    field: Option<&PixelField>,
    config: &FlowConfig,
) -> Result<FlowTrace> {
    let mut evo = Evolution::new(initial, charges, field, config)?;
    let mut snapshots = vec![snapshot(&evo, config, None, evo.matched_fraction())];
    let mut last: Option<StepReport> = None;

    let termination = loop {
        if evo.iteration() >= config.max_iterations {
            break Termination {
                reason: TerminalReason::MaxIterations,
                iteration: evo.iteration(),
                error: None,
            };
        }
        let k = evo.iteration() + 1;
        let record = k % config.trace_every == 0;
        match evo.advance(record) {
            Ok(report) => {
                let matched = evo.matched_fraction();
                let done = field.is_some() && matched >= config.match_threshold;
                if record {
                    snapshots.push(snapshot(&evo, config, Some(&report), matched));
                }
                last = Some(report);
                if done {
                    break Termination {
                        reason: TerminalReason::Matched,
                        iteration: evo.iteration(),
                        error: None,
                    };
                }
            }
            Err(err) => {
                break Termination {
                    reason: TerminalReason::from_error(&err),
                    iteration: k,
                    error: Some(err),
                };
            }
        }
    };

    if snapshots.last().map(|s| s.iteration) != Some(evo.iteration()) {
        let matched = evo.matched_fraction();
        snapshots.push(snapshot(&evo, config, last.as_ref(), matched));
    }

    Ok(FlowTrace {
        snapshots,
        termination,
        final_curve: evo.curve().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::local_frames;

    #[test]
    fn zero_velocity_leaves_curve_unchanged() {
        let c = DiscreteCurve::circle(Vec2::new(1.0, 2.0), 1.0, 16).unwrap();
        let f = local_frames(&c, 0.15).unwrap();
        let a = TangentialCoefficients { values: vec![0.0; 16] };
        let next = step(&c, &f, &a, &[0.0; 16], 0.1).unwrap();
        assert_eq!(next, c);
    }

    #[test]
    fn curvature_step_shrinks_unit_circle() {
        let c = DiscreteCurve::circle(Vec2::zeros(), 1.0, 64).unwrap();
        let f = local_frames(&c, 0.15).unwrap();
        let a = tangential_coefficients(&c, 1e-3).unwrap();
        let next = step(&c, &f, &a, &f.curvature, 1e-3).unwrap();
        for p in next.points() {
            assert!((p.norm() - (1.0 - 1e-3)).abs() < 1e-5);
        }
    }

    #[test]
    fn step_commutes_with_translation() {
        let pts: Vec<Vec2> = (0..20)
            .map(|j| {
                let t = std::f64::consts::TAU * j as f64 / 20.0;
                Vec2::new(2.0 * t.cos() + 0.1 * (3.0 * t).sin(), t.sin())
            })
            .collect();
        let shift = Vec2::new(5.0, -3.0);
        let c = DiscreteCurve::new(pts.clone()).unwrap();
        let s = DiscreteCurve::new(pts.iter().map(|p| p + shift).collect()).unwrap();
        let adv = |c: &DiscreteCurve| {
            let f = local_frames(c, 0.3).unwrap();
            let a = tangential_coefficients(c, 1e-3).unwrap();
            step(c, &f, &a, &f.curvature, 1e-3).unwrap()
        };
        for (p, q) in adv(&c).points().iter().zip(adv(&s).points()) {
            assert!((p + shift - q).norm() < 1e-10);
        }
    }

    #[test]
    fn huge_step_blows_up() {
        let c = DiscreteCurve::circle(Vec2::zeros(), 1.0, 16).unwrap();
        let f = local_frames(&c, 0.15).unwrap();
        let a = TangentialCoefficients { values: vec![0.0; 16] };
        assert!(matches!(step(&c, &f, &a, &[1.0; 16], 10.0), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn matched_fraction_extremes() {
        let c = DiscreteCurve::circle(Vec2::zeros(), 0.01, 32).unwrap();
        let white = PixelField::uniform(64, 64, 0.001, 255).unwrap();
        let black = PixelField::uniform(64, 64, 0.001, 0).unwrap();
        assert_eq!(matched_fraction(&c, &white, 0), 0.0);
        assert_eq!(matched_fraction(&c, &black, 0), 1.0);
    }

    #[test]
    fn area_accuracy_ratio() {
        // black area 100 px * 0.01^2 = 0.01; a square of side 0.1*sqrt(2)
        // encloses twice that
        let field = PixelField::from_fn(20, 20, 0.01, |c, r| if c < 10 && r < 10 { 0 } else { 255 }).unwrap();
        let h = 0.1 * 2f64.sqrt() / 2.0;
        let sq = DiscreteCurve::new(vec![
            Vec2::new(-h, -h),
            Vec2::new(0.0, -h),
            Vec2::new(h, -h),
            Vec2::new(h, h),
            Vec2::new(-h, h),
        ])
        .unwrap();
        assert!((area_accuracy(&sq, &field, 0) - 50.0).abs() < 1e-9);
    }

    #[test]
    fn centroid_helper() {
        let c = DiscreteCurve::circle(Vec2::zeros(), 3.0, 12).unwrap();
        assert!(centroid_charge(&c).norm() < 1e-12);
    }

    #[test]
    fn clamp_parsing_and_config_validation() {
        assert_eq!("min0".parse::<Clamp>().unwrap(), Clamp::Min0);
        assert!("nope".parse::<Clamp>().is_err());
        let mut cfg = FlowConfig::default();
        assert_eq!(cfg.dt, 1.0 / 4096.0);
        cfg.validate().unwrap();
        cfg.match_threshold = 0.0;
        assert!(cfg.validate().is_err());
        let cfg = FlowConfig { n: 4, ..FlowConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn clamp_rejected_with_charges() {
        let c = DiscreteCurve::circle(Vec2::zeros(), 0.5, 32).unwrap();
        let charges = ChargeSet::new(vec![Charge::new(-1.0, Vec2::zeros())]);
        let cfg = FlowConfig {
            clamp: Some(Clamp::Min0),
            ..FlowConfig::with_points(32)
        };
        assert!(run(&c, &charges, None, &cfg).is_err());
    }

    #[test]
    fn charge_outside_stops_immediately() {
        let c = DiscreteCurve::circle(Vec2::zeros(), 0.5, 32).unwrap();
        let charges = ChargeSet::new(vec![Charge::new(-1.0, Vec2::new(2.0, 0.0))]);
        let trace = run(&c, &charges, None, &FlowConfig::with_points(32)).unwrap();
        assert_eq!(trace.termination.reason, TerminalReason::ChargeExited);
        assert_eq!(trace.termination.iteration, 1);
        assert_eq!(trace.snapshots.len(), 1);
    }
}
