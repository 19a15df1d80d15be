//! Scenario geometry, movable-antenna layouts and the channels they induce.
//!
//! Antenna positions are one-dimensional offsets along each array measured in
//! wavelengths, so a field-response entry is `exp(-j 2 pi p sin(angle))`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::{Complex, Complex64};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cst, expj, CMatrix, CVec, Cx, Mat, Real};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Reference path gain at one meter (-30 dB).
pub const PATH_LOSS_REF: f64 = 1e-3;
/// Tolerance used by the layout feasibility test and repair.
pub const LAYOUT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub target: Point,
    pub taps: Vec<Point>,
    pub saps: Vec<Point>,
    pub ues: Vec<Point>,
}

/// Large-scale power gain `PL0 (d / 1 m)^-exponent`.
pub fn path_loss(d: f64, exponent: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::NonPositiveDistance(d));
    }
    Ok(PATH_LOSS_REF * d.powf(-exponent))
}

/// Direction from `node` to `target`, in `(-pi/2, 3pi/2)`.
pub fn angle_to(target: Point, node: Point) -> Result<f64> {
    let (dx, dy) = (target.x - node.x, target.y - node.y);
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::CoincidentPoints {
            x: node.x,
            y: node.y,
        });
    }
    if dx == 0.0 {
        return Ok(FRAC_PI_2.copysign(dy));
    }
    let base = (dy / dx).atan();
    Ok(if dx < 0.0 { base + PI } else { base })
}

/// Partial derivatives of [`angle_to`] with respect to the target's `x`
/// and `y` coordinates.
pub fn angle_gradient(target: Point, node: Point) -> Result<[f64; 2]> {
    let (dx, dy) = (target.x - node.x, target.y - node.y);
    let r2 = dx * dx + dy * dy;
    if r2 == 0.0 {
        return Err(Error::CoincidentPoints {
            x: node.x,
            y: node.y,
        });
    }
    Ok([-dy / r2, dx / r2])
}

pub fn steering<S: Real>(positions: &[S], angle: f64) -> CVec<S> {
    let k = -2.0 * PI * angle.sin();
    positions.iter().map(|&p| expj(p.scale(k))).collect()
}

/// Derivative of [`steering`] with respect to the angle.
pub fn steering_rate<S: Real>(positions: &[S], angle: f64) -> CVec<S> {
    let k = -2.0 * PI * angle.sin();
    let c = -2.0 * PI * angle.cos();
    positions
        .iter()
        .map(|&p| expj(p.scale(k)) * Complex::new(S::zero(), p.scale(c)))
        .collect()
}

/// Field-response column for an array at `positions` (wavelengths).
pub fn field_response(positions: &[f64], angle: f64) -> CMatrix {
    CMatrix::column_vector(steering(positions, angle))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommPath {
    pub gain: Complex64,
    pub delay: f64,
    pub aod: f64,
}

/// Multipath link from one tAP array to one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct CommLink {
    pub paths: Vec<CommPath>,
    pub path_gain: f64,
    pub carrier_hz: f64,
}

impl CommLink {
    pub fn channel<S: Real>(&self, positions: &[S]) -> Result<CVec<S>> {
        if self.paths.is_empty() {
            return Err(Error::EmptyPaths);
        }
        let amp = self.path_gain.sqrt();
        let mut h = vec![Complex::new(S::zero(), S::zero()); positions.len()];
        for path in &self.paths {
            let coef = cst::<S>(
                path.gain * Complex64::from_polar(amp, -2.0 * PI * self.carrier_hz * path.delay),
            );
            for (hi, si) in h.iter_mut().zip(steering(positions, path.aod)) {
                *hi = *hi + coef * si;
            }
        }
        Ok(h)
    }
}

pub fn comm_channel(link: &CommLink, positions: &[f64]) -> Result<CMatrix> {
    link.channel(positions).map(CMatrix::column_vector)
}

/// Bistatic reflection from a tAP array to an sAP array through the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensingLink {
    /// Reflection coefficient including both path gains.
    pub gain: Complex64,
    pub delay: f64,
    pub tx_angle: f64,
    pub rx_angle: f64,
    pub carrier_hz: f64,
}

impl SensingLink {
    pub fn new(
        geometry: &Geometry,
        tap: usize,
        sap: usize,
        rcs: f64,
        exponent: f64,
        carrier_hz: f64,
    ) -> Result<Self> {
        let (t, a, b) = (geometry.target, geometry.taps[tap], geometry.saps[sap]);
        let (la, lb) = (t.distance(a), t.distance(b));
        let gain = rcs * (path_loss(la, exponent)? * path_loss(lb, exponent)?).sqrt();
        Ok(Self {
            gain: Complex64::new(gain, 0.0),
            delay: (la + lb) / SPEED_OF_LIGHT,
            tx_angle: angle_to(t, a)?,
            rx_angle: angle_to(t, b)?,
            carrier_hz,
        })
    }

    /// Same gain and delay seen from a displaced target.
    pub fn with_target(&self, target: Point, tap: Point, sap: Point) -> Result<Self> {
        Ok(Self {
            tx_angle: angle_to(target, tap)?,
            rx_angle: angle_to(target, sap)?,
            ..*self
        })
    }

    fn coefficient(&self) -> Complex64 {
        self.gain * Complex64::from_polar(1.0, -2.0 * PI * self.carrier_hz * self.delay)
    }

    pub fn channel<S: Real>(&self, tx: &[S], rx: &[S]) -> Mat<S> {
        let g = cst::<S>(self.coefficient());
        outer(
            &steering(rx, self.rx_angle),
            &steering(tx, self.tx_angle),
            g,
        )
    }

    /// Derivatives of the channel with respect to target `x` and `y`.
    pub fn derivatives<S: Real>(&self, tx: &[S], rx: &[S], rates: [[f64; 2]; 2]) -> [Mat<S>; 2] {
        let g = cst::<S>(self.coefficient());
        let (gt, gr) = (steering(tx, self.tx_angle), steering(rx, self.rx_angle));
        let (dt, dr) = (
            steering_rate(tx, self.tx_angle),
            steering_rate(rx, self.rx_angle),
        );
        let [tx_rate, rx_rate] = rates;
        let one = |n: usize| {
            let a = outer(&dr, &gt, g.scale(S::from_f64(rx_rate[n])));
            let b = outer(&gr, &dt, g.scale(S::from_f64(tx_rate[n])));
            a.add(&b)
        };
        [one(0), one(1)]
    }
}

/// `scale * u v^H`.
fn outer<S: Real>(u: &[Cx<S>], v: &[Cx<S>], scale: Cx<S>) -> Mat<S> {
    Mat::from_fn(u.len(), v.len(), |i, j| scale * u[i] * v[j].conj())
}

pub fn sensing_channel(link: &SensingLink, tx: &[f64], rx: &[f64]) -> CMatrix {
    link.channel(tx, rx)
}

pub fn steering_derivatives(
    link: &SensingLink,
    target: Point,
    tap: Point,
    sap: Point,
    tx: &[f64],
    rx: &[f64],
) -> Result<(CMatrix, CMatrix)> {
    let rates = [angle_gradient(target, tap)?, angle_gradient(target, sap)?];
    let [dx, dy] = link.derivatives(tx, rx, rates);
    Ok((dx, dy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

pub fn check_spacing(count: usize, bounds: Interval, spacing: f64) -> Result<()> {
    let needed = count.saturating_sub(1) as f64 * spacing;
    if needed > bounds.width() + LAYOUT_TOL {
        return Err(Error::InfeasibleLayout {
            count,
            spacing,
            needed,
            range: bounds.width(),
        });
    }
    Ok(())
}

/// Clip into `bounds`, then enforce consecutive gaps of at least `spacing`
/// with a forward shift followed by a backward pull from the upper bound.
///
/// Element order is preserved so each position keeps its antenna index.
pub fn repair_positions<S: Real>(p: &[S], bounds: Interval, spacing: f64) -> Result<Vec<S>> {
    check_spacing(p.len(), bounds, spacing)?;
    let (lo, hi) = (S::from_f64(bounds.lo), S::from_f64(bounds.hi));
    let gap = S::from_f64(spacing);
    let mut out: Vec<S> = Vec::with_capacity(p.len());
    for &x in p {
        let mut v = x.max(lo).min(hi);
        if let Some(&prev) = out.last() {
            if v.value() < prev.value() + spacing - LAYOUT_TOL {
                v = prev + gap;
            }
        }
        out.push(v);
    }
    if let Some(last) = out.last_mut() {
        if last.value() > bounds.hi {
            *last = hi;
        }
    }
    for i in (0..out.len().saturating_sub(1)).rev() {
        if out[i].value() > out[i + 1].value() - spacing + LAYOUT_TOL {
            out[i] = out[i + 1] - gap;
        }
    }
    Ok(out)
}

/// Uniform positions centred in `bounds` with the given pitch.
pub fn uniform_positions(count: usize, bounds: Interval, pitch: f64) -> Vec<f64> {
    let start = bounds.center() - 0.5 * pitch * count.saturating_sub(1) as f64;
    (0..count).map(|i| start + pitch * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaLayout {
    pub tx: Vec<Vec<f64>>,
    pub rx: Vec<Vec<f64>>,
    pub tx_bounds: Interval,
    pub rx_bounds: Interval,
    pub min_spacing: f64,
}

impl MaLayout {
    /// Evenly spread layout with pitch `max(spacing, range / (N - 1))`.
    pub fn spread(
        taps: usize,
        n_t: usize,
        saps: usize,
        n_r: usize,
        tx_bounds: Interval,
        rx_bounds: Interval,
        min_spacing: f64,
    ) -> Result<Self> {
        check_spacing(n_t, tx_bounds, min_spacing)?;
        check_spacing(n_r, rx_bounds, min_spacing)?;
        let pitch = |n: usize, b: Interval| {
            if n > 1 {
                min_spacing.max(b.width() / (n - 1) as f64)
            } else {
                0.0
            }
        };
        let (pt, pr) = (pitch(n_t, tx_bounds), pitch(n_r, rx_bounds));
        Ok(Self {
            tx: vec![uniform_positions(n_t, tx_bounds, pt); taps],
            rx: vec![uniform_positions(n_r, rx_bounds, pr); saps],
            tx_bounds,
            rx_bounds,
            min_spacing,
        })
    }

    /// Conventional half-wavelength arrays centred in the bounds.
    pub fn half_wavelength(
        taps: usize,
        n_t: usize,
        saps: usize,
        n_r: usize,
        tx_bounds: Interval,
        rx_bounds: Interval,
        min_spacing: f64,
    ) -> Result<Self> {
        let layout = Self {
            tx: vec![uniform_positions(n_t, tx_bounds, 0.5); taps],
            rx: vec![uniform_positions(n_r, rx_bounds, 0.5); saps],
            tx_bounds,
            rx_bounds,
            min_spacing,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn project(&self) -> Result<Self> {
        let fix = |arrays: &[Vec<f64>], b: Interval| {
            arrays
                .iter()
                .map(|p| repair_positions(p, b, self.min_spacing))
                .collect::<Result<Vec<_>>>()
        };
        Ok(Self {
            tx: fix(&self.tx, self.tx_bounds)?,
            rx: fix(&self.rx, self.rx_bounds)?,
            ..self.clone()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let check = |arrays: &[Vec<f64>], b: Interval, what: &str| -> Result<()> {
            for p in arrays {
                check_spacing(p.len(), b, self.min_spacing)?;
                let in_bounds = p
                    .iter()
                    .all(|&x| x >= b.lo - LAYOUT_TOL && x <= b.hi + LAYOUT_TOL);
                let spaced = p
                    .windows(2)
                    .all(|w| w[1] - w[0] >= self.min_spacing - LAYOUT_TOL);
                if !in_bounds || !spaced {
                    return Err(Error::InvalidArgument(format!(
                        "{what} positions {p:?} violate bounds or spacing"
                    )));
                }
            }
            Ok(())
        };
        check(&self.tx, self.tx_bounds, "tx")?;
        check(&self.rx, self.rx_bounds, "rx")
    }

    pub fn is_feasible(&self) -> bool {
        self.validate().is_ok()
    }

    /// All positions flattened, tx arrays first.
    pub fn flatten(&self) -> Vec<f64> {
        self.tx.iter().chain(&self.rx).flatten().copied().collect()
    }

    /// Inverse of [`MaLayout::flatten`], without projection.
    pub fn with_flat(&self, flat: &[f64]) -> Self {
        let mut out = self.clone();
        let mut it = flat.iter().copied();
        for p in out.tx.iter_mut().chain(out.rx.iter_mut()) {
            for x in p.iter_mut() {
                *x = it.next().expect("flat layout too short");
            }
        }
        out
    }
}

/// Scenario geometry with its fixed large-scale and multipath parameters.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub geometry: Geometry,
    /// `comm[a][k]`
    pub comm: Vec<Vec<CommLink>>,
    /// `sensing[a][b]`
    pub sensing: Vec<Vec<SensingLink>>,
}

/// Channels for one layout; `S` carries position sensitivities when needed.
#[derive(Debug, Clone)]
pub struct ChannelSet<S = f64> {
    /// `comm[a][k]`, length `N_T`.
    pub comm: Vec<Vec<CVec<S>>>,
    /// `sensing[a][b]`, `N_R x N_T`.
    pub sensing: Vec<Vec<Mat<S>>>,
    /// `derivs[a][b][n]`: derivative of `sensing[a][b]` along target axis `n`.
    pub derivs: Vec<Vec<[Mat<S>; 2]>>,
}

impl Scenario {
    pub fn taps(&self) -> usize {
        self.geometry.taps.len()
    }

    pub fn saps(&self) -> usize {
        self.geometry.saps.len()
    }

    pub fn users(&self) -> usize {
        self.geometry.ues.len()
    }

    pub fn channels_for<S: Real>(&self, tx: &[Vec<S>], rx: &[Vec<S>]) -> Result<ChannelSet<S>> {
        let g = &self.geometry;
        let comm = self
            .comm
            .iter()
            .zip(tx)
            .map(|(links, p)| links.iter().map(|l| l.channel(p)).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        let mut sensing = Vec::with_capacity(self.taps());
        let mut derivs = Vec::with_capacity(self.taps());
        for (a, links) in self.sensing.iter().enumerate() {
            let mut hs = Vec::with_capacity(links.len());
            let mut ds = Vec::with_capacity(links.len());
            for (b, link) in links.iter().enumerate() {
                let rates = [
                    angle_gradient(g.target, g.taps[a])?,
                    angle_gradient(g.target, g.saps[b])?,
                ];
                hs.push(link.channel(&tx[a], &rx[b]));
                ds.push(link.derivatives(&tx[a], &rx[b], rates));
            }
            sensing.push(hs);
            derivs.push(ds);
        }
        Ok(ChannelSet {
            comm,
            sensing,
            derivs,
        })
    }

    pub fn channels(&self, layout: &MaLayout) -> Result<ChannelSet> {
        self.channels_for(&layout.tx, &layout.rx)
    }
}
