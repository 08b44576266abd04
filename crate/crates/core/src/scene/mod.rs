//! Scenario data model and exact geometric queries.
//!
//! A [`Scene`] is immutable once validated; every query here is a pure
//! function of it.

mod blocker;
mod format;
pub mod presets;

pub use blocker::{knife_edge_nu, occludes, Blocker, KnifeEdge, Occlusion};
pub use format::{load_scene, parse_scene, serialize_scene};

use crate::{Error, Result, Vec3, SPEED_OF_LIGHT};

/// Default element count of the virtual array.
pub const DEFAULT_ELEMENTS: usize = 64;
/// Default element pitch: half a wavelength at the 13 GHz band center.
pub const DEFAULT_SPACING: f64 = 0.011534;
/// Default array height above the floor.
pub const DEFAULT_HEIGHT: f64 = 2.5;
pub const DEFAULT_F_START: f64 = 11.0e9;
pub const DEFAULT_F_STOP: f64 = 15.0e9;
pub const DEFAULT_POINTS: usize = 801;

const AXIS_TOLERANCE: f64 = 1e-12;
const COINCIDENT_EPS: f64 = 1e-9;

/// Uniform linear array geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ArraySpec {
    pub n_elements: usize,
    /// Element pitch in meters.
    pub spacing_d: f64,
    /// Position of element 1.
    pub origin: Vec3,
    /// Unit vector along which element indices increase.
    pub axis: Vec3,
    pub height: f64,
}

impl Default for ArraySpec {
    fn default() -> Self {
        Self {
            n_elements: DEFAULT_ELEMENTS,
            spacing_d: DEFAULT_SPACING,
            origin: Vec3::new(0.0, 0.0, DEFAULT_HEIGHT),
            axis: Vec3::x(),
            height: DEFAULT_HEIGHT,
        }
    }
}

impl ArraySpec {
    /// Physical aperture, first to last element.
    pub fn aperture(&self) -> f64 {
        (self.n_elements.saturating_sub(1)) as f64 * self.spacing_d
    }

    fn validate(&self) -> Result<()> {
        if self.n_elements < 1 {
            return Err(Error::invalid("n_elements", "must be at least 1"));
        }
        if !(self.spacing_d > 0.0) || !self.spacing_d.is_finite() {
            return Err(Error::invalid(
                "spacing_d",
                format!("must be positive, got {}", self.spacing_d),
            ));
        }
        if (self.axis.norm() - 1.0).abs() > AXIS_TOLERANCE {
            return Err(Error::invalid("axis", "must have unit norm"));
        }
        if !finite3(&self.origin) {
            return Err(Error::invalid("origin", "must be finite"));
        }
        Ok(())
    }
}

/// Linear frequency sweep, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub f_start: f64,
    pub f_stop: f64,
    pub n_points: usize,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            f_start: DEFAULT_F_START,
            f_stop: DEFAULT_F_STOP,
            n_points: DEFAULT_POINTS,
        }
    }
}

impl Sweep {
    pub fn new(f_start: f64, f_stop: f64, n_points: usize) -> Result<Self> {
        let sweep = Self {
            f_start,
            f_stop,
            n_points,
        };
        sweep.validate()?;
        Ok(sweep)
    }

    fn validate(&self) -> Result<()> {
        if !(self.f_start > 0.0) || !self.f_stop.is_finite() {
            return Err(Error::invalid("f_start", "must be positive and finite"));
        }
        if !(self.f_start < self.f_stop) {
            return Err(Error::invalid("f_stop", "must exceed f_start"));
        }
        if self.n_points < 2 {
            return Err(Error::invalid("n_points", "must be at least 2"));
        }
        Ok(())
    }

    /// Swept bandwidth `f_stop - f_start`.
    pub fn bandwidth(&self) -> f64 {
        self.f_stop - self.f_start
    }

    pub fn step(&self) -> f64 {
        self.bandwidth() / (self.n_points - 1) as f64
    }

    /// Frequency of point `k` (0-based).
    pub fn frequency(&self, k: usize) -> f64 {
        self.f_start + k as f64 * self.step()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |k| self.frequency(k))
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.f_start + self.f_stop)
    }

    /// Wavelength at the band center.
    pub fn center_wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.center()
    }

    /// Width of one delay bin of the inverse transform, `1/(n_points·Δf)`.
    pub fn delay_bin(&self) -> f64 {
        1.0 / (self.n_points as f64 * self.step())
    }
}

/// Infinite planar reflector.
#[derive(Debug, Clone, PartialEq)]
pub struct Wall {
    pub point: Vec3,
    /// Unit normal.
    pub normal: Vec3,
    /// Amplitude reflection coefficient Γ in [0, 1].
    pub gamma: f64,
}

impl Wall {
    /// Mirror image of `p` across the wall plane.
    pub fn mirror(&self, p: &Vec3) -> Vec3 {
        p - 2.0 * (p - self.point).dot(&self.normal) * self.normal
    }

    /// Signed distance of `p` from the plane along the normal.
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        (p - self.point).dot(&self.normal)
    }
}

/// Isotropic point scatterer.
#[derive(Debug, Clone, PartialEq)]
pub struct PointScatterer {
    pub position: Vec3,
    /// Scattering amplitude in [0, 1].
    pub amplitude: f64,
}

/// Full scenario description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub array: ArraySpec,
    pub rx: Vec3,
    pub walls: Vec<Wall>,
    pub point_scatterers: Vec<PointScatterer>,
    pub blockers: Vec<Blocker>,
    pub sweep: Sweep,
    pub noise_floor_dbm: Option<f64>,
    pub seed: u64,
}

impl Scene {
    /// Scene with default array and sweep and no environment.
    pub fn free_space(rx: Vec3) -> Self {
        Self {
            array: ArraySpec::default(),
            rx,
            walls: Vec::new(),
            point_scatterers: Vec::new(),
            blockers: Vec::new(),
            sweep: Sweep::default(),
            noise_floor_dbm: None,
            seed: 0,
        }
    }

    /// Checks every invariant of the scene and its parts.
    pub fn validate(&self) -> Result<()> {
        self.array.validate()?;
        self.sweep.validate()?;
        if !finite3(&self.rx) {
            return Err(Error::invalid("rx", "must be finite"));
        }
        for n in 1..=self.array.n_elements {
            let p = self.element_position(n)?;
            if (p - self.rx).norm() < COINCIDENT_EPS {
                return Err(Error::invalid(
                    "rx",
                    format!("coincides with element {n}"),
                ));
            }
        }
        for wall in &self.walls {
            if !(0.0..=1.0).contains(&wall.gamma) {
                return Err(Error::invalid("gamma", "must lie in [0, 1]"));
            }
            if (wall.normal.norm() - 1.0).abs() > AXIS_TOLERANCE {
                return Err(Error::invalid("normal", "wall normal must have unit norm"));
            }
        }
        for s in &self.point_scatterers {
            if !(0.0..=1.0).contains(&s.amplitude) {
                return Err(Error::invalid("amplitude", "must lie in [0, 1]"));
            }
        }
        for b in &self.blockers {
            b.validate()?;
        }
        if let Some(floor) = self.noise_floor_dbm {
            if !floor.is_finite() {
                return Err(Error::invalid("floor_dbm", "must be finite"));
            }
        }
        Ok(())
    }

    pub fn n_elements(&self) -> usize {
        self.array.n_elements
    }

    /// Position of element `n` (1-based): `origin + (n-1)·d·axis`.
    pub fn element_position(&self, n: usize) -> Result<Vec3> {
        if n == 0 || n > self.array.n_elements {
            return Err(Error::IndexOutOfRange {
                index: n,
                len: self.array.n_elements,
            });
        }
        Ok(self.array.origin + ((n - 1) as f64 * self.array.spacing_d) * self.array.axis)
    }

    /// Distance from element `n` to `target` and the angle between the array
    /// axis and the element-to-target direction.
    pub fn true_geometry(&self, n: usize, target: &Vec3) -> Result<(f64, f64)> {
        let p = self.element_position(n)?;
        geometry_from(&p, &self.array.axis, target)
    }

    /// Element-to-rx distance and angle for every element.
    pub fn rx_geometry(&self) -> Vec<(f64, f64)> {
        (1..=self.n_elements())
            .map(|n| {
                self.true_geometry(n, &self.rx)
                    .expect("validated scene keeps rx off the elements")
            })
            .collect()
    }

    /// Noise power per CFR entry relative to the 0 dB amplitude reference.
    pub fn noise_power(&self) -> Option<f64> {
        self.noise_floor_dbm
            .map(|dbm| 10f64.powf((dbm - crate::TX_POWER_DBM) / 10.0))
    }

    /// Copy of the scene with the receiver moved along the ray from element 1
    /// to `distance` meters.
    pub fn with_rx_distance(&self, distance: f64) -> Result<Scene> {
        let origin = self.element_position(1)?;
        let dir = self.rx - origin;
        let norm = dir.norm();
        if norm < COINCIDENT_EPS {
            return Err(Error::CoincidentPoints);
        }
        let mut moved = self.clone();
        moved.rx = origin + dir * (distance / norm);
        moved.validate()?;
        Ok(moved)
    }
}

/// Distance and axis angle (in [0, π]) from point `from` to `target`.
pub fn geometry_from(from: &Vec3, axis: &Vec3, target: &Vec3) -> Result<(f64, f64)> {
    let v = target - from;
    let r = v.norm();
    if r < COINCIDENT_EPS {
        return Err(Error::CoincidentPoints);
    }
    // atan2 keeps precision near 0 and π where acos does not
    let along = v.dot(axis);
    let across = v.cross(axis).norm();
    Ok((r, across.atan2(along)))
}

pub(crate) fn finite3(v: &Vec3) -> bool {
    v.iter().all(|x| x.is_finite())
}
