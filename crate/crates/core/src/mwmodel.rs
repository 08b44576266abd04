//! Multiplanar-wave approximation: one planar wavefront per stationary
//! interval, expanded about the interval's center element.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::analysis::{gated_los_response, wrap, ChannelStats};
use crate::scene::Scene;
use crate::stationarity::StationaryPartition;
use crate::synth::{los_path_of, synthesize_cfr, synthesize_los, ChannelFrequencyResponse};
use crate::{Complex64, Error, Result, SPEED_OF_LIGHT};

/// Planar wavefront parameters of one interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarPatch {
    pub start: usize,
    pub end: usize,
    /// Expansion point, `floor((start+end)/2)` unless flagged.
    pub ref_element: usize,
    /// Departure angle from the array axis at the reference, radians.
    pub theta: f64,
    /// Reference-to-rx distance, meters.
    pub r_ref: f64,
    /// LOS response at the reference over the sweep, propagation phase
    /// included.
    pub gain_ref: Vec<Complex64>,
    /// LOS at the nominal reference was fully blocked.
    pub flagged: bool,
}

/// Patches with geometric angle and distance and the synthesized LOS
/// response at each reference.
///
/// A reference whose direct path passes through a blocker is replaced by the
/// nearest unblocked element of the same interval and the patch flagged.
pub fn build_mw_model(scene: &Scene, partition: &StationaryPartition) -> Result<Vec<PlanarPatch>> {
    scene.validate()?;
    check_partition(partition, scene.n_elements())?;
    partition
        .intervals
        .par_iter()
        .map(|iv| {
            let nominal = (iv.start + iv.end) / 2;
            let mut ref_element = nominal;
            let mut flagged = false;
            if los_path_of(scene, nominal)?.obstructed {
                flagged = true;
                let mut best: Option<usize> = None;
                for n in iv.start..=iv.end {
                    if !los_path_of(scene, n)?.obstructed
                        && best.map_or(true, |b| n.abs_diff(nominal) < b.abs_diff(nominal))
                    {
                        best = Some(n);
                    }
                }
                ref_element = best.unwrap_or(nominal);
            }
            let (r_ref, theta) = scene.true_geometry(ref_element, &scene.rx)?;
            let path = los_path_of(scene, ref_element)?;
            let gain_ref = scene.sweep.frequencies().map(|f| path.response(f)).collect();
            Ok(PlanarPatch {
                start: iv.start,
                end: iv.end,
                ref_element,
                theta,
                r_ref,
                gain_ref,
                flagged,
            })
        })
        .collect()
}

/// Patches from observed data: angle from the estimated AoD, distance from
/// the LOS delay and gain from the delay-gated LOS tap at the reference.
pub fn build_mw_model_observed(
    cfr: &ChannelFrequencyResponse,
    stats: &ChannelStats,
    partition: &StationaryPartition,
) -> Result<Vec<PlanarPatch>> {
    check_partition(partition, cfr.n_elements())?;
    if stats.n_elements() != cfr.n_elements() {
        return Err(Error::DimensionMismatch("stats and CFR disagree".into()));
    }
    partition
        .intervals
        .iter()
        .map(|iv| {
            let nominal = (iv.start + iv.end) / 2;
            let usable = |n: usize| !stats.phase_flagged[n - 1] && stats.aod[n - 1].is_finite();
            let ref_element = if usable(nominal) {
                nominal
            } else {
                (iv.start..=iv.end)
                    .filter(|&n| usable(n))
                    .min_by_key(|n| n.abs_diff(nominal))
                    .unwrap_or(nominal)
            };
            let tau = stats.tau_los[ref_element - 1];
            Ok(PlanarPatch {
                start: iv.start,
                end: iv.end,
                ref_element,
                theta: stats.aod[ref_element - 1],
                r_ref: tau * SPEED_OF_LIGHT,
                gain_ref: gated_los_response(cfr.row(ref_element), cfr.sweep(), tau)?,
                flagged: ref_element != nominal || !usable(ref_element),
            })
        })
        .collect()
}

fn check_partition(partition: &StationaryPartition, n: usize) -> Result<()> {
    if !partition.is_legal(n) {
        return Err(Error::invalid(
            "partition",
            format!("does not cover 1..={n} contiguously"),
        ));
    }
    Ok(())
}

/// `H(n, f) = gain_ref(f)·exp(+j2πf/c·(n − ref)·d·cos θ)` inside each patch,
/// the first-order planar expansion about the reference.
pub fn synthesize_mw_cfr(patches: &[PlanarPatch], scene: &Scene) -> Result<ChannelFrequencyResponse> {
    let n_el = scene.n_elements();
    let sweep = scene.sweep;
    let d = scene.array.spacing_d;
    let mut cfr = ChannelFrequencyResponse::zeros(n_el, sweep, d);
    let mut covered = vec![false; n_el];
    for patch in patches {
        if patch.end > n_el || patch.start < 1 || patch.gain_ref.len() != sweep.n_points {
            return Err(Error::DimensionMismatch(format!(
                "patch {}..={} does not fit the scene",
                patch.start, patch.end
            )));
        }
        let cos = patch.theta.cos();
        for n in patch.start..=patch.end {
            covered[n - 1] = true;
            let offset = (n as f64 - patch.ref_element as f64) * d * cos;
            for (k, (h, g)) in cfr.row_mut(n).iter_mut().zip(&patch.gain_ref).enumerate() {
                *h = if n == patch.ref_element {
                    *g
                } else {
                    let f = sweep.frequency(k);
                    g * Complex64::from_polar(1.0, 2.0 * PI * f / SPEED_OF_LIGHT * offset)
                };
            }
        }
    }
    if let Some(n) = covered.iter().position(|c| !c) {
        return Err(Error::invalid(
            "patches",
            format!("element {} is not covered", n + 1),
        ));
    }
    Ok(cfr)
}

/// Approximation quality of a reconstructed CFR.
#[derive(Debug, Clone, PartialEq)]
pub struct MwError {
    /// RMS of wrapped per-entry phase differences, radians.
    pub phase_rmse: f64,
    /// `|Σ conj(approx)·truth| / (‖approx‖·‖truth‖)`.
    pub correlation: f64,
    /// Per-element RMS wrapped phase deviation over the sweep, radians.
    pub deviation: Vec<f64>,
}

/// Compares `approx` with `truth`. Entries where either side is exactly
/// zero carry no phase and are skipped.
pub fn mw_error(truth: &ChannelFrequencyResponse, approx: &ChannelFrequencyResponse) -> Result<MwError> {
    if truth.n_elements() != approx.n_elements() || truth.sweep() != approx.sweep() {
        return Err(Error::DimensionMismatch(format!(
            "{}×{} vs {}×{}",
            truth.n_elements(),
            truth.n_points(),
            approx.n_elements(),
            approx.n_points()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    let mut deviation = Vec::with_capacity(truth.n_elements());
    for (t_row, a_row) in truth.rows().zip(approx.rows()) {
        let (mut s, mut c) = (0.0, 0usize);
        for (t, a) in t_row.iter().zip(a_row) {
            if t.norm_sqr() == 0.0 || a.norm_sqr() == 0.0 {
                continue;
            }
            let e = wrap((a * t.conj()).arg());
            s += e * e;
            c += 1;
        }
        deviation.push(if c > 0 { (s / c as f64).sqrt() } else { 0.0 });
        total += s;
        count += c;
    }
    let phase_rmse = if count > 0 { (total / count as f64).sqrt() } else { 0.0 };
    let inner: Complex64 = truth
        .values()
        .iter()
        .zip(approx.values())
        .map(|(t, a)| a.conj() * t)
        .sum();
    let nt = truth.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let na = approx.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let correlation = if nt > 0.0 && na > 0.0 {
        inner.norm() / (nt * na)
    } else {
        0.0
    };
    Ok(MwError {
        phase_rmse,
        correlation,
        deviation,
    })
}

/// One row of the error table.
#[derive(Debug, Clone, PartialEq)]
pub struct MwErrorRow {
    pub id: String,
    pub n_intervals: usize,
    pub phase_rmse: f64,
    pub correlation: f64,
}

/// Phase error against the noise-free LOS truth and correlation against
/// the full synthesized CFR, for one partition.
pub fn evaluate_partition(
    scene: &Scene,
    partition: &StationaryPartition,
    los_truth: &ChannelFrequencyResponse,
    full: &ChannelFrequencyResponse,
    id: impl Into<String>,
) -> Result<MwErrorRow> {
    let patches = build_mw_model(scene, partition)?;
    let approx = synthesize_mw_cfr(&patches, scene)?;
    let phase = mw_error(los_truth, &approx)?;
    let corr = mw_error(full, &approx)?;
    Ok(MwErrorRow {
        id: id.into(),
        n_intervals: partition.len(),
        phase_rmse: phase.phase_rmse,
        correlation: corr.correlation,
    })
}

/// Error rows for dyadic partitions into `2^k` equal intervals, `k` up to
/// `max_level` and never finer than one element per interval.
pub fn dyadic_errors(scene: &Scene, max_level: u32) -> Result<Vec<MwErrorRow>> {
    let los = synthesize_los(scene)?;
    let full = synthesize_cfr(scene)?;
    let n = scene.n_elements();
    (0..=max_level)
        .take_while(|&k| 1usize << k <= n)
        .map(|k| {
            let p = StationaryPartition::equal(n, 1 << k)?;
            evaluate_partition(scene, &p, &los, &full, format!("k{k}"))
        })
        .collect()
}

/// CSV with header `k_or_partition_id,n_intervals,phase_rmse_rad,correlation`.
pub fn write_error_csv<W: std::io::Write>(rows: &[MwErrorRow], mut out: W) -> Result<()> {
    writeln!(out, "k_or_partition_id,n_intervals,phase_rmse_rad,correlation")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.id, r.n_intervals, r.phase_rmse, r.correlation)?;
    }
    Ok(())
}
