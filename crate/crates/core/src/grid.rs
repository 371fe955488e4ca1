//! Domain description, uniform axes and the real grid function shared by
//! both solvers.
//!
//! Fields are stored row-major with `rho` as the outer index and `theta` as
//! the inner one, so every theta-line is a contiguous slice.

use std::f64::consts::PI;
use std::ops::Range;

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.lo >= self.lo && other.hi <= self.hi
    }
}

/// The four grid resolutions used throughout the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSet {
    Set1,
    Set2,
    Set3,
    Set4,
}

impl GridSet {
    pub const ALL: [GridSet; 4] = [GridSet::Set1, GridSet::Set2, GridSet::Set3, GridSet::Set4];

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            1 => Some(GridSet::Set1),
            2 => Some(GridSet::Set2),
            3 => Some(GridSet::Set3),
            4 => Some(GridSet::Set4),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            GridSet::Set1 => 1,
            GridSet::Set2 => 2,
            GridSet::Set3 => 3,
            GridSet::Set4 => 4,
        }
    }

    /// `(N_sigma, N_rho, N_theta)`.
    pub fn counts(self) -> (usize, usize, usize) {
        match self {
            GridSet::Set1 => (300, 1250, 7 * 64),
            GridSet::Set2 => (600, 2500, 7 * 128),
            GridSet::Set3 => (1200, 5000, 7 * 256),
            GridSet::Set4 => (2400, 10000, 7 * 512),
        }
    }
}

/// Boundary treatment along the transverse axis. The splitting solver uses
/// homogeneous Neumann conditions and stores both endpoints; the
/// exponential integrator is periodic and drops the right endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoBoundary {
    Periodic,
    Neumann,
}

impl RhoBoundary {
    pub fn node_count(self, n_rho: usize) -> usize {
        match self {
            RhoBoundary::Periodic => n_rho,
            RhoBoundary::Neumann => n_rho + 1,
        }
    }
}

/// Dimensionless computational domain and model coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainConfig {
    /// Final propagation distance `Sigma`.
    pub sigma_max: f64,
    pub rho: Interval,
    pub theta: Interval,
    pub n_sigma: usize,
    pub n_rho: usize,
    pub n_theta: usize,
    /// Absorption coefficient `A`.
    pub absorption: f64,
    /// Nonlinearity coefficient `B`.
    pub nonlinearity: f64,
    pub roi_rho: Interval,
    pub roi_theta: Interval,
}

impl Default for DomainConfig {
    /// The sonic-boom benchmark domain on the Set-1 grid.
    fn default() -> Self {
        let (n_sigma, n_rho, n_theta) = GridSet::Set1.counts();
        DomainConfig {
            sigma_max: 120.0,
            rho: Interval::new(0.0, 400.0),
            theta: Interval::new(-13.0 * PI, 15.0 * PI),
            n_sigma,
            n_rho,
            n_theta,
            absorption: 3.4e-4,
            nonlinearity: 0.05,
            roi_rho: Interval::new(133.0, 267.0),
            roi_theta: Interval::new(0.0, 15.0 * PI),
        }
    }
}

impl DomainConfig {
    pub fn with_set(mut self, set: GridSet) -> Self {
        let (s, r, t) = set.counts();
        self.n_sigma = s;
        self.n_rho = r;
        self.n_theta = t;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |key: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, "must be finite"))
            }
        };
        finite("sigma_max", self.sigma_max)?;
        finite("rho_min", self.rho.lo)?;
        finite("rho_max", self.rho.hi)?;
        finite("theta_min", self.theta.lo)?;
        finite("theta_max", self.theta.hi)?;
        finite("absorption", self.absorption)?;
        finite("nonlinearity", self.nonlinearity)?;
        if self.sigma_max <= 0.0 {
            return Err(Error::config("sigma_max", "must be positive"));
        }
        if self.rho.hi <= self.rho.lo {
            return Err(Error::config("rho_max", "must exceed rho_min"));
        }
        if self.theta.hi <= self.theta.lo {
            return Err(Error::config("theta_max", "must exceed theta_min"));
        }
        for (key, n) in [
            ("n_sigma", self.n_sigma),
            ("n_rho", self.n_rho),
            ("n_theta", self.n_theta),
        ] {
            if n < 1 {
                return Err(Error::config(key, "must be a positive integer"));
            }
        }
        if self.n_rho < 2 {
            return Err(Error::config("n_rho", "must be at least 2"));
        }
        if self.n_theta < 2 {
            return Err(Error::config("n_theta", "must be at least 2"));
        }
        if self.absorption < 0.0 {
            return Err(Error::config("absorption", "must be nonnegative"));
        }
        if self.nonlinearity < 0.0 {
            return Err(Error::config("nonlinearity", "must be nonnegative"));
        }
        for (key, step) in [
            ("n_sigma", self.d_sigma()),
            ("n_rho", self.d_rho()),
            ("n_theta", self.d_theta()),
        ] {
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::config(key, "grid spacing is not finite and positive"));
            }
        }
        if self.roi_rho.hi < self.roi_rho.lo || !self.rho.contains_interval(&self.roi_rho) {
            return Err(Error::config("roi_rho", "must be a subinterval of [rho_min, rho_max]"));
        }
        if self.roi_theta.hi < self.roi_theta.lo || !self.theta.contains_interval(&self.roi_theta) {
            return Err(Error::config(
                "roi_theta",
                "must be a subinterval of [theta_min, theta_max]",
            ));
        }
        Ok(())
    }

    pub fn d_sigma(&self) -> f64 {
        self.sigma_max / self.n_sigma as f64
    }

    pub fn d_rho(&self) -> f64 {
        self.rho.len() / self.n_rho as f64
    }

    pub fn d_theta(&self) -> f64 {
        self.theta.len() / self.n_theta as f64
    }

    /// `sigma^n`, computed as `Sigma * n / N_sigma` so that nodes of nested
    /// grids agree bitwise.
    pub fn sigma_at(&self, n: usize) -> f64 {
        self.sigma_max * n as f64 / self.n_sigma as f64
    }

    /// Index of the step whose node is closest to `sigma`.
    pub fn nearest_step(&self, sigma: f64) -> usize {
        let n = (sigma / self.d_sigma()).round();
        (n.max(0.0) as usize).min(self.n_sigma)
    }
}

/// Uniform node sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Axes {
    pub sigma: Vec<f64>,
    pub rho: Vec<f64>,
    pub theta: Vec<f64>,
}

/// `n` (or `n + 1` with `include_end`) uniform nodes on `iv`.
pub fn uniform_nodes(iv: Interval, n: usize, include_end: bool) -> Vec<f64> {
    let count = if include_end { n + 1 } else { n };
    (0..count)
        .map(|i| iv.lo + iv.len() * i as f64 / n as f64)
        .collect()
}

/// Sigma nodes `0..=N_sigma`, rho nodes per boundary type, periodic theta
/// nodes (right endpoint excluded).
pub fn build_axes(config: &DomainConfig, rho_bc: RhoBoundary) -> Result<Axes> {
    config.validate()?;
    Ok(Axes {
        sigma: (0..=config.n_sigma).map(|n| config.sigma_at(n)).collect(),
        rho: uniform_nodes(config.rho, config.n_rho, rho_bc == RhoBoundary::Neumann),
        theta: uniform_nodes(config.theta, config.n_theta, false),
    })
}

/// Real grid function `V(rho_j, theta_k)` at a fixed sigma.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    n_rho: usize,
    n_theta: usize,
    values: Vec<f64>,
}

impl Field2D {
    pub fn zeros(n_rho: usize, n_theta: usize) -> Self {
        Field2D {
            n_rho,
            n_theta,
            values: vec![0.0; n_rho * n_theta],
        }
    }

    pub fn from_fn(n_rho: usize, n_theta: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n_rho * n_theta);
        for j in 0..n_rho {
            for k in 0..n_theta {
                values.push(f(j, k));
            }
        }
        Field2D {
            n_rho,
            n_theta,
            values,
        }
    }

    pub fn from_vec(n_rho: usize, n_theta: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rho * n_theta {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {}x{} field",
                values.len(),
                n_rho,
                n_theta
            )));
        }
        Ok(Field2D {
            n_rho,
            n_theta,
            values,
        })
    }

    pub fn n_rho(&self) -> usize {
        self.n_rho
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rho, self.n_theta)
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.n_theta + k]
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, v: f64) {
        self.values[j * self.n_theta + k] = v;
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_theta..(j + 1) * self.n_theta]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.n_theta..(j + 1) * self.n_theta]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Exchange storage with a buffer of the same length.
    pub(crate) fn swap_values(&mut self, other: &mut Vec<f64>) {
        assert_eq!(other.len(), self.values.len());
        std::mem::swap(&mut self.values, other);
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `max |V|`; NaN if any entry is NaN.
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .fold(0.0_f64, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v.abs()) })
    }

    pub fn scaled(&self, c: f64) -> Field2D {
        Field2D {
            n_rho: self.n_rho,
            n_theta: self.n_theta,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    /// Sub-grid of rows `rows` and columns `cols`.
    pub fn slice(&self, rows: Range<usize>, cols: Range<usize>) -> Field2D {
        let n_theta = cols.len();
        let mut values = Vec::with_capacity(rows.len() * n_theta);
        for j in rows.clone() {
            values.extend_from_slice(&self.row(j)[cols.clone()]);
        }
        Field2D {
            n_rho: rows.len(),
            n_theta,
            values,
        }
    }

    /// Values along theta at row `j`.
    pub fn theta_trace(&self, j: usize) -> Vec<f64> {
        self.row(j).to_vec()
    }
}

/// Discrete norm `sqrt(d_rho d_theta sum u^2)`.
pub fn l2_norm(field: &Field2D, d_rho: f64, d_theta: f64) -> Result<f64> {
    if !field.is_finite() {
        return Err(Error::NonFinite("l2_norm input"));
    }
    let sum: f64 = field
        .values
        .chunks(field.n_theta.max(1))
        .map(|row| row.iter().map(|v| v * v).sum::<f64>())
        .sum();
    Ok((d_rho * d_theta * sum).sqrt())
}

/// `||reference - numerical|| / ||reference||`.
pub fn relative_error(
    reference: &Field2D,
    numerical: &Field2D,
    d_rho: f64,
    d_theta: f64,
) -> Result<f64> {
    if reference.shape() != numerical.shape() {
        return Err(Error::ShapeMismatch(format!(
            "reference {:?} vs numerical {:?}",
            reference.shape(),
            numerical.shape()
        )));
    }
    let denom = l2_norm(reference, d_rho, d_theta)?;
    if denom == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let diff = Field2D {
        n_rho: reference.n_rho,
        n_theta: reference.n_theta,
        values: reference
            .values
            .iter()
            .zip(&numerical.values)
            .map(|(a, b)| a - b)
            .collect(),
    };
    Ok(l2_norm(&diff, d_rho, d_theta)? / denom)
}

/// Range of node indices lying inside the closed interval `roi`.
///
/// The candidate bounds come from floor/ceil on the uniform spacing and are
/// then corrected against the actual node values.
pub fn node_range(nodes: &[f64], roi: Interval) -> Option<Range<usize>> {
    let n = nodes.len();
    if n == 0 || roi.hi < roi.lo {
        return None;
    }
    let (first, last) = (nodes[0], nodes[n - 1]);
    if roi.hi < first || roi.lo > last {
        return None;
    }
    let h = if n > 1 { (last - first) / (n - 1) as f64 } else { 1.0 };
    let clamp = |x: f64| x.max(0.0).min((n - 1) as f64) as usize;

    let mut start = clamp(((roi.lo - first) / h).ceil());
    while start > 0 && nodes[start - 1] >= roi.lo {
        start -= 1;
    }
    while start < n && nodes[start] < roi.lo {
        start += 1;
    }
    let mut end = clamp(((roi.hi - first) / h).floor()) + 1;
    while end < n && nodes[end] <= roi.hi {
        end += 1;
    }
    while end > 0 && nodes[end - 1] > roi.hi {
        end -= 1;
    }
    (start < end).then_some(start..end)
}

/// A field restricted to a rectangular region, with the index ranges used.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub field: Field2D,
    pub rho_range: Range<usize>,
    pub theta_range: Range<usize>,
}

/// Restrict `field` to the nodes inside `roi_rho x roi_theta`.
pub fn extract_region(
    field: &Field2D,
    rho_nodes: &[f64],
    theta_nodes: &[f64],
    roi_rho: Interval,
    roi_theta: Interval,
) -> Result<Region> {
    if rho_nodes.len() != field.n_rho || theta_nodes.len() != field.n_theta {
        return Err(Error::ShapeMismatch(format!(
            "{} rho / {} theta nodes for a {:?} field",
            rho_nodes.len(),
            theta_nodes.len(),
            field.shape()
        )));
    }
    let rho_range = node_range(rho_nodes, roi_rho).ok_or(Error::EmptyRegion("rho"))?;
    let theta_range = node_range(theta_nodes, roi_theta).ok_or(Error::EmptyRegion("theta"))?;
    Ok(Region {
        field: field.slice(rho_range.clone(), theta_range.clone()),
        rho_range,
        theta_range,
    })
}
