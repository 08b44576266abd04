//! Per-element channel characteristics extracted from a CFR: power delay
//! profiles, received power, RMS delay spread, LOS phase and LOS angle of
//! departure.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::scene::{Scene, Sweep};
use crate::synth::ChannelFrequencyResponse;
use crate::{Complex64, Error, Result, SPEED_OF_LIGHT};

/// Default dynamic range kept below the PDP peak for delay spread.
pub const DS_THRESHOLD_DB: f64 = 20.0;
/// Half-width of the LOS delay gate, bins.
pub const LOS_GATE_BINS: isize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    /// Window coefficients scaled to unit mean (unit coherent gain).
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => {
                if len < 2 {
                    return vec![1.0; len];
                }
                let raw: Vec<f64> = (0..len)
                    .map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / (len - 1) as f64).cos()))
                    .collect();
                let mean = raw.iter().sum::<f64>() / len as f64;
                raw.into_iter().map(|w| w / mean).collect()
            }
        }
    }
}

/// Power per delay bin of one element.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDelayProfile {
    /// Linear power per bin.
    pub powers: Vec<f64>,
    /// Seconds per bin.
    pub bin_width: f64,
    pub n_bins: usize,
    pub element: Option<usize>,
}

impl PowerDelayProfile {
    pub fn delay(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    /// Index of the strongest bin, the first one on ties.
    pub fn peak_bin(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.powers.iter().enumerate() {
            if p > self.powers[best] {
                best = i;
            }
        }
        best
    }
}

struct Transforms {
    inverse: Arc<dyn Fft<f64>>,
}

impl Transforms {
    fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            inverse: planner.plan_fft_inverse(len),
        }
    }

    /// Unitary inverse DFT of the windowed row.
    fn impulse(&self, row: &[Complex64], window: &[f64]) -> Vec<Complex64> {
        let scale = 1.0 / (row.len() as f64).sqrt();
        let mut buf: Vec<Complex64> = row
            .iter()
            .zip(window)
            .map(|(h, w)| h * (w * scale))
            .collect();
        self.inverse.process(&mut buf);
        buf
    }
}

/// Squared magnitude of the unitary inverse DFT of the windowed row.
///
/// Bin `k` corresponds to delay `k/(n·Δf)` where `n` is the row length and
/// `Δf` the sweep step; with the rectangular window the bin powers sum to
/// the row energy.
pub fn compute_pdp(row: &[Complex64], sweep: &Sweep, window: Window) -> Result<PowerDelayProfile> {
    check_row(row, sweep)?;
    let t = Transforms::new(row.len());
    Ok(pdp_with(&t, row, sweep, &window.coefficients(row.len()), None))
}

fn pdp_with(
    t: &Transforms,
    row: &[Complex64],
    sweep: &Sweep,
    window: &[f64],
    element: Option<usize>,
) -> PowerDelayProfile {
    let powers: Vec<f64> = t.impulse(row, window).iter().map(|h| h.norm_sqr()).collect();
    PowerDelayProfile {
        n_bins: powers.len(),
        powers,
        bin_width: sweep.delay_bin(),
        element,
    }
}

fn check_row(row: &[Complex64], sweep: &Sweep) -> Result<()> {
    if row.len() < 2 {
        return Err(Error::invalid("row", "needs at least 2 frequency points"));
    }
    if row.len() != sweep.n_points {
        return Err(Error::DimensionMismatch(format!(
            "row of {} points for a sweep of {}",
            row.len(),
            sweep.n_points
        )));
    }
    Ok(())
}

/// Mean power over the sweep in dB relative to the 0 dB amplitude
/// reference. An all-zero row gives `-inf`.
pub fn received_power(row: &[Complex64]) -> f64 {
    let energy: f64 = row.iter().map(|h| h.norm_sqr()).sum();
    10.0 * (energy / row.len() as f64).log10()
}

/// RMS delay spread of the bins within `threshold_db` of the peak.
pub fn rms_delay_spread(pdp: &PowerDelayProfile, threshold_db: f64) -> Result<f64> {
    let peak = pdp.powers.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::AllNoise);
    }
    let floor = peak * 10f64.powf(-threshold_db / 10.0);
    let kept = || {
        pdp.powers
            .iter()
            .enumerate()
            .filter(move |(_, &p)| p >= floor)
            .map(|(k, &p)| (pdp.delay(k), p))
    };
    let p0: f64 = kept().map(|(_, p)| p).sum();
    let mean = kept().map(|(t, p)| p * t).sum::<f64>() / p0;
    let var = kept().map(|(t, p)| p * (t - mean) * (t - mean)).sum::<f64>() / p0;
    Ok(var.sqrt())
}

/// LOS phase lag per element relative to element 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LosPhase {
    /// Radians, `NaN` where flagged.
    pub phase: Vec<f64>,
    /// LOS delay used for gating, seconds.
    pub tau: Vec<f64>,
    /// Gate carried no energy above the noise level.
    pub flagged: Vec<bool>,
}

/// Phase lag of the delay-gated LOS tap at the band center.
///
/// With a scene the gate is centered on the geometric LOS delay and the
/// result needs no unwrapping; without one the strongest tap is gated and
/// the phases are unwrapped along the array.
pub fn los_phase(cfr: &ChannelFrequencyResponse, scene: Option<&Scene>) -> Result<LosPhase> {
    let sweep = *cfr.sweep();
    let n_el = cfr.n_elements();
    if let Some(s) = scene {
        if s.n_elements() != n_el || s.sweep != sweep {
            return Err(Error::DimensionMismatch("scene and CFR disagree".into()));
        }
    }
    let n_pts = cfr.n_points();
    let t = Transforms::new(n_pts);
    let hann = Window::Hann.coefficients(n_pts);
    let noise_gate = scene
        .and_then(|s| s.noise_power())
        .map(|p| p * (2 * LOS_GATE_BINS + 1) as f64 * mean_square(&hann));
    let center = sweep.center();

    let taps: Vec<(f64, f64, bool)> = (1..=n_el)
        .into_par_iter()
        .map(|n| {
            let row = cfr.row(n);
            let tau = match scene {
                Some(s) => s.true_geometry(n, &s.rx).map(|(r, _)| r / SPEED_OF_LIGHT),
                None => {
                    let pdp = pdp_with(&t, row, &sweep, &hann, Some(n));
                    Ok(pdp.delay(pdp.peak_bin()))
                }
            }?;
            let (tap, energy) = gated_tap(&t, row, &sweep, &hann, tau);
            let flagged = !(energy > 0.0) || noise_gate.map_or(false, |g| energy <= g);
            let lag = 2.0 * PI * center * tau - tap.arg();
            Ok((lag, tau, flagged))
        })
        .collect::<Result<_>>()?;

    let tau: Vec<f64> = taps.iter().map(|t| t.1).collect();
    let flagged: Vec<bool> = taps.iter().map(|t| t.2).collect();
    if flagged[0] {
        return Err(Error::NoLosEnergy { element: 1 });
    }
    let reference = taps[0].0;
    let mut phase: Vec<f64> = taps
        .iter()
        .map(|(lag, _, f)| if *f { f64::NAN } else { lag - reference })
        .collect();
    if scene.is_none() {
        unwrap_in_place(&mut phase);
    }
    Ok(LosPhase {
        phase,
        tau,
        flagged,
    })
}

fn mean_square(w: &[f64]) -> f64 {
    w.iter().map(|x| x * x).sum::<f64>() / w.len() as f64
}

/// Delay-compensated, gated LOS tap reconstructed at the band center, and
/// the energy inside the gate.
fn gated_tap(t: &Transforms, row: &[Complex64], sweep: &Sweep, window: &[f64], tau: f64) -> (Complex64, f64) {
    let n = row.len();
    let compensated: Vec<Complex64> = row
        .iter()
        .enumerate()
        .map(|(k, h)| h * Complex64::from_polar(1.0, 2.0 * PI * sweep.frequency(k) * tau))
        .collect();
    let impulse = t.impulse(&compensated, window);
    // evaluating at fractional index (n-1)/2 keeps the kernel symmetric about
    // the band center, so a pure delay reconstructs with zero phase error
    let xc = 0.5 * (n - 1) as f64;
    let mut tap = Complex64::new(0.0, 0.0);
    let mut energy = 0.0;
    for m in -LOS_GATE_BINS..=LOS_GATE_BINS {
        let h = impulse[m.rem_euclid(n as isize) as usize];
        energy += h.norm_sqr();
        tap += h * Complex64::from_polar(1.0, -2.0 * PI * xc * m as f64 / n as f64);
    }
    (tap / (n as f64).sqrt(), energy)
}

/// Response of the LOS tap alone over the sweep: the rectangular-window
/// impulse response gated to ±[`LOS_GATE_BINS`] around `tau` and
/// transformed back.
pub fn gated_los_response(row: &[Complex64], sweep: &Sweep, tau: f64) -> Result<Vec<Complex64>> {
    check_row(row, sweep)?;
    let n = row.len();
    let t = Transforms::new(n);
    let mut impulse = t.impulse(row, &vec![1.0; n]);
    let center = (tau / sweep.delay_bin()).round() as isize;
    let keep = |m: usize| {
        (-LOS_GATE_BINS..=LOS_GATE_BINS).any(|o| (center + o).rem_euclid(n as isize) as usize == m)
    };
    for (m, h) in impulse.iter_mut().enumerate() {
        if !keep(m) {
            *h = Complex64::new(0.0, 0.0);
        }
    }
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut impulse);
    let scale = 1.0 / (n as f64).sqrt();
    Ok(impulse.into_iter().map(|h| h * scale).collect())
}

/// Wraps to (−π, π].
pub fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// 1-D unwrap with π jump tolerance; `NaN` entries are skipped.
pub fn unwrap_in_place(phase: &mut [f64]) {
    let mut last: Option<f64> = None;
    for p in phase.iter_mut() {
        if p.is_nan() {
            continue;
        }
        if let Some(prev) = last {
            *p = prev + wrap(*p - prev);
        }
        last = Some(*p);
    }
}

/// Per-element LOS angle of departure.
#[derive(Debug, Clone, PartialEq)]
pub struct Aod {
    /// Radians from the array axis, `NaN` when no estimate exists.
    pub angle: Vec<f64>,
    /// Estimate touched an aliased, clamped or occluded pair.
    pub flagged: Vec<bool>,
}

/// AoD from adjacent-pair LOS phase differences.
pub fn estimate_aod(cfr: &ChannelFrequencyResponse, scene: Option<&Scene>) -> Result<Aod> {
    let los = los_phase(cfr, scene)?;
    let wavelength = cfr.sweep().center_wavelength();
    Ok(aod_from_phase(&los.phase, &los.flagged, cfr.spacing_d(), wavelength))
}

/// `θ = arccos(−λ·Δφ/(2πd))` per adjacent pair, assigned to the pair
/// midpoint and interpolated to elements; end elements are extrapolated
/// linearly from the two nearest pairs.
pub fn aod_from_phase(phase: &[f64], flagged: &[bool], spacing: f64, wavelength: f64) -> Aod {
    let n = phase.len();
    if n < 2 {
        return Aod {
            angle: vec![f64::NAN; n],
            flagged: vec![true; n],
        };
    }
    let pairs: Vec<(f64, bool)> = (0..n - 1)
        .map(|i| {
            let dphi = wrap(phase[i + 1] - phase[i]);
            if dphi.is_nan() || flagged[i] || flagged[i + 1] {
                return (f64::NAN, true);
            }
            let x = -wavelength * dphi / (2.0 * PI * spacing);
            (x.clamp(-1.0, 1.0).acos(), x.abs() > 1.0)
        })
        .collect();
    let mut angle = Vec::with_capacity(n);
    let mut flags = Vec::with_capacity(n);
    for e in 0..n {
        let (value, flag) = if pairs.len() == 1 {
            pairs[0]
        } else if e == 0 {
            let (a, b) = (pairs[0], pairs[1]);
            (a.0 - 0.5 * (b.0 - a.0), a.1 || b.1)
        } else if e == n - 1 {
            let (a, b) = (pairs[n - 3], pairs[n - 2]);
            (b.0 + 0.5 * (b.0 - a.0), a.1 || b.1)
        } else {
            let (a, b) = (pairs[e - 1], pairs[e]);
            (0.5 * (a.0 + b.0), a.1 || b.1)
        };
        angle.push(value.clamp(0.0, PI));
        flags.push(flag);
    }
    Aod {
        angle,
        flagged: flags,
    }
}

/// Per-element characteristics. Angular spread, shadow fading, K-factor and
/// arrival angle are housed but not estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    /// Received power, dB.
    pub power_db: Vec<f64>,
    /// RMS delay spread, seconds; `None` for all-noise profiles.
    pub delay_spread: Vec<Option<f64>>,
    /// LOS phase lag relative to element 1, radians.
    pub los_phase: Vec<f64>,
    /// LOS angle of departure from the array axis, radians.
    pub aod: Vec<f64>,
    /// First-path delay, seconds.
    pub tau_los: Vec<f64>,
    pub phase_flagged: Vec<bool>,
    pub aod_flagged: Vec<bool>,
    pub angular_spread: Option<Vec<f64>>,
    pub shadow_fading: Option<Vec<f64>>,
    pub k_factor: Option<Vec<f64>>,
    pub arrival_angle: Option<Vec<f64>>,
}

impl ChannelStats {
    pub fn n_elements(&self) -> usize {
        self.power_db.len()
    }

    /// CSV with header `element,power_db,ds_ns,phase_rad,aod_deg,tau_ns`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "element,power_db,ds_ns,phase_rad,aod_deg,tau_ns")?;
        for i in 0..self.n_elements() {
            let ds = self.delay_spread[i]
                .map(|d| (d * 1e9).to_string())
                .unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{}",
                i + 1,
                self.power_db[i],
                ds,
                self.los_phase[i],
                self.aod[i].to_degrees(),
                self.tau_los[i] * 1e9
            )?;
        }
        Ok(())
    }
}

/// Hann-window PDPs of every element.
pub fn element_pdps(cfr: &ChannelFrequencyResponse, window: Window) -> Result<Vec<PowerDelayProfile>> {
    let sweep = *cfr.sweep();
    check_row(cfr.row(1), &sweep)?;
    let t = Transforms::new(cfr.n_points());
    let w = window.coefficients(cfr.n_points());
    Ok((1..=cfr.n_elements())
        .into_par_iter()
        .map(|n| pdp_with(&t, cfr.row(n), &sweep, &w, Some(n)))
        .collect())
}

/// CSV with header `element,bin,delay_ns,power_db`; empty bins are written
/// as −300 dB.
pub fn write_pdp_csv<W: std::io::Write>(pdps: &[PowerDelayProfile], mut out: W) -> Result<()> {
    writeln!(out, "element,bin,delay_ns,power_db")?;
    for (i, pdp) in pdps.iter().enumerate() {
        let element = pdp.element.unwrap_or(i + 1);
        for (k, &p) in pdp.powers.iter().enumerate() {
            let db = if p > 0.0 { (10.0 * p.log10()).max(-300.0) } else { -300.0 };
            writeln!(out, "{},{},{},{}", element, k, pdp.delay(k) * 1e9, db)?;
        }
    }
    Ok(())
}

/// Computes every populated characteristic for every element.
pub fn compute_stats(cfr: &ChannelFrequencyResponse, scene: Option<&Scene>) -> Result<ChannelStats> {
    let pdps = element_pdps(cfr, Window::Hann)?;
    let power_db: Vec<f64> = cfr.rows().map(received_power).collect();
    let delay_spread = pdps
        .iter()
        .map(|p| rms_delay_spread(p, DS_THRESHOLD_DB).ok())
        .collect();
    let los = los_phase(cfr, scene)?;
    let aod = aod_from_phase(
        &los.phase,
        &los.flagged,
        cfr.spacing_d(),
        cfr.sweep().center_wavelength(),
    );
    Ok(ChannelStats {
        power_db,
        delay_spread,
        los_phase: los.phase,
        aod: aod.angle,
        tau_los: los.tau,
        phase_flagged: los.flagged,
        aod_flagged: aod.flagged,
        angular_spread: None,
        shadow_fading: None,
        k_factor: None,
        arrival_angle: None,
    })
}
