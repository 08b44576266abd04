//! Closed-form spherical-wave path difference and phase across a linear
//! array, with its planar (far-field) limit.
//!
//! Angles are measured from the array axis. Element 1 is the reference and
//! `theta_1`, `theta_n` are the angles at which the target is seen from
//! elements 1 and n. All phases here are propagation phase lags
//! `k·(r_n − r_1)`, i.e. the negative of the argument of `e^{−jkr}`.

use std::f64::consts::PI;

use crate::scene::Scene;
use crate::{Result, Vec3, SPEED_OF_LIGHT};

/// Below this angular separation the analytic limit branch is used.
pub const ANGLE_EPS: f64 = 1e-9;

/// Inputs of the phase model for one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseModelInput {
    /// Element index, reference is 1.
    pub n: usize,
    /// Element pitch, meters.
    pub d: f64,
    /// Wavelength, meters.
    pub wavelength: f64,
    pub theta_1: f64,
    pub theta_n: f64,
}

/// Path difference `r_n − r_1` from the two observation angles.
///
/// Evaluates `(n−1)d·(sin θ1 − sin θn)/sin(θn − θ1)` in its half-angle form
/// `−(n−1)d·cos((θ1+θn)/2)/cos((θn−θ1)/2)`, which is the same expression
/// without the catastrophic cancellation near `θn = θ1`. When the angles
/// coincide to within [`ANGLE_EPS`] the limit `−(n−1)d·cos θ1` is returned.
pub fn path_difference(input: &PhaseModelInput) -> f64 {
    if input.n <= 1 {
        return 0.0;
    }
    let baseline = (input.n - 1) as f64 * input.d;
    let delta = input.theta_n - input.theta_1;
    if delta.abs() < ANGLE_EPS {
        return -baseline * input.theta_1.cos();
    }
    let mean = 0.5 * (input.theta_1 + input.theta_n);
    -baseline * mean.cos() / (0.5 * delta).cos()
}

/// Near-field phase `(2π/λ)·δ_n`.
pub fn near_field_phase(input: &PhaseModelInput) -> f64 {
    2.0 * PI / input.wavelength * path_difference(input)
}

/// Far-field phase magnitude `(2π/λ)·d·(n−1)·cos θ1`.
///
/// The signed planar phase that [`near_field_phase`] converges to is the
/// negative of this, see [`signed_far_field_phase`].
pub fn far_field_phase(n: usize, d: f64, wavelength: f64, theta_1: f64) -> f64 {
    2.0 * PI / wavelength * d * n.saturating_sub(1) as f64 * theta_1.cos()
}

/// Planar-wave phase lag with the same sign convention as
/// [`near_field_phase`].
pub fn signed_far_field_phase(n: usize, d: f64, wavelength: f64, theta_1: f64) -> f64 {
    -far_field_phase(n, d, wavelength, theta_1)
}

/// Rayleigh distance `2D²/λ`.
pub fn rayleigh_distance(aperture: f64, wavelength: f64) -> f64 {
    2.0 * aperture * aperture / wavelength
}

/// Phase lag of element `n` relative to element 1 from exact Euclidean
/// distances: `2πf·(r_n − r_1)/c`.
///
/// This is the independent ground truth for the closed-form model.
pub fn exact_phase_oracle(scene: &Scene, n: usize, target: &Vec3, frequency: f64) -> Result<f64> {
    let (r_n, _) = scene.true_geometry(n, target)?;
    let (r_1, _) = scene.true_geometry(1, target)?;
    Ok(2.0 * PI * frequency * (r_n - r_1) / SPEED_OF_LIGHT)
}

/// Phase model input for element `n` seen from `target`, with the true
/// angles taken from the scene geometry.
pub fn model_input(scene: &Scene, n: usize, target: &Vec3, wavelength: f64) -> Result<PhaseModelInput> {
    let (_, theta_1) = scene.true_geometry(1, target)?;
    let (_, theta_n) = scene.true_geometry(n, target)?;
    Ok(PhaseModelInput {
        n,
        d: scene.array.spacing_d,
        wavelength,
        theta_1,
        theta_n,
    })
}
