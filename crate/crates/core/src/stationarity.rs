//! Stationary-interval division of the array by correlation matrix
//! distance and by characteristic slope with a uniform-power check.

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::analysis::ChannelStats;
use crate::synth::ChannelFrequencyResponse;
use crate::{Complex64, Error, Result};

/// Sample spatial correlation matrix of a window of consecutive elements.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub r: DMatrix<Complex64>,
    /// First element of the window, 1-based.
    pub start: usize,
    pub m: usize,
}

impl CorrelationMatrix {
    pub fn end(&self) -> usize {
        self.start + self.m - 1
    }

    pub fn frobenius(&self) -> f64 {
        self.r.norm()
    }
}

/// `R = (1/n_points)·Σ_f h_f·h_fᴴ` over elements `start..start+m`.
pub fn correlation_matrix(cfr: &ChannelFrequencyResponse, start: usize, m: usize) -> Result<CorrelationMatrix> {
    if m < 2 {
        return Err(Error::invalid("m", "window size must be at least 2"));
    }
    let end = start + m - 1;
    if start < 1 || end > cfr.n_elements() {
        return Err(Error::WindowOutOfBounds {
            start,
            end,
            len: cfr.n_elements(),
        });
    }
    let rows: Vec<&[Complex64]> = (start..=end).map(|n| cfr.row(n)).collect();
    let inv = 1.0 / cfr.n_points() as f64;
    let mut r = DMatrix::<Complex64>::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let s: Complex64 = rows[i]
                .iter()
                .zip(rows[j])
                .map(|(a, b)| a * b.conj())
                .sum::<Complex64>()
                * inv;
            r[(i, j)] = s;
            r[(j, i)] = s.conj();
        }
        r[(i, i)].im = 0.0;
    }
    Ok(CorrelationMatrix { r, start, m })
}

/// Correlation matrix distance `1 − Re tr(R1·R2)/(‖R1‖_F·‖R2‖_F)`,
/// clamped to [0, 1].
pub fn cmd(a: &CorrelationMatrix, b: &CorrelationMatrix) -> Result<f64> {
    cmd_matrices(&a.r, &b.r)
}

pub fn cmd_matrices(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<f64> {
    if a.shape() != b.shape() || a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let n = a.nrows();
    let mut trace = 0.0;
    for i in 0..n {
        for j in 0..n {
            trace += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    Ok((1.0 - trace / (na * nb)).clamp(0.0, 1.0))
}

/// Distance used by the partitioners: zero matrices are identical to each
/// other and maximally distant from anything else.
fn scan_distance(a: &CorrelationMatrix, b: &CorrelationMatrix) -> f64 {
    match cmd(a, b) {
        Ok(d) => d,
        Err(_) if a.frobenius() == 0.0 && b.frobenius() == 0.0 => 0.0,
        Err(_) => 1.0,
    }
}

/// Pearson correlation of two equal-length series; `None` when either has
/// zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation between the magnitude-over-frequency profiles of
/// every element pair; `None` marks undefined entries.
pub fn pearson_profiles(cfr: &ChannelFrequencyResponse) -> Result<Vec<Vec<Option<f64>>>> {
    if cfr.n_points() < 2 {
        return Err(Error::invalid("n_points", "needs at least 2 frequency points"));
    }
    let mags: Vec<Vec<f64>> = cfr
        .rows()
        .map(|r| r.iter().map(|h| h.norm()).collect())
        .collect();
    Ok(mags
        .par_iter()
        .map(|a| mags.iter().map(|b| pearson(a, b)).collect())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Cmd,
    Slope,
    UniformPower,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Cmd => "cmd",
            Criterion::Slope => "slope",
            Criterion::UniformPower => "uniform-power",
        })
    }
}

/// One stationary interval, 1-based inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
    /// Criterion that opened this interval.
    pub criterion: Criterion,
    /// Score at the opening boundary; `None` for the first interval.
    pub boundary_score: Option<f64>,
}

impl Interval {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Ordered, contiguous cover of the array by stationary intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPartition {
    pub intervals: Vec<Interval>,
    pub criterion: Criterion,
    /// Every threshold and default that produced the partition.
    pub thresholds: Vec<(String, f64)>,
    pub warning: Option<String>,
}

impl StationaryPartition {
    fn from_starts(
        n: usize,
        starts: &[(usize, Criterion, f64)],
        criterion: Criterion,
        thresholds: Vec<(String, f64)>,
        warning: Option<String>,
    ) -> Self {
        let mut intervals = Vec::with_capacity(starts.len() + 1);
        let mut begin = (1, criterion, None);
        for &(s, c, score) in starts {
            intervals.push(Interval {
                start: begin.0,
                end: s - 1,
                criterion: begin.1,
                boundary_score: begin.2,
            });
            begin = (s, c, Some(score));
        }
        intervals.push(Interval {
            start: begin.0,
            end: n,
            criterion: begin.1,
            boundary_score: begin.2,
        });
        Self {
            intervals,
            criterion,
            thresholds,
            warning,
        }
    }

    /// `count` near-equal intervals, the longer ones first.
    pub fn equal(n_elements: usize, count: usize) -> Result<Self> {
        if count < 1 || count > n_elements {
            return Err(Error::invalid(
                "count",
                format!("must lie in 1..={n_elements}"),
            ));
        }
        let base = n_elements / count;
        let extra = n_elements % count;
        let mut starts = Vec::new();
        let mut s = 1;
        for i in 0..count - 1 {
            s += base + usize::from(i < extra);
            starts.push((s, Criterion::Cmd, 0.0));
        }
        let mut p = Self::from_starts(n_elements, &starts, Criterion::Cmd, Vec::new(), None);
        for iv in &mut p.intervals {
            iv.boundary_score = None;
        }
        Ok(p)
    }

    pub fn n_elements(&self) -> usize {
        self.intervals.last().map_or(0, |i| i.end)
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// First element of every interval after the first.
    pub fn boundaries(&self) -> Vec<usize> {
        self.intervals.iter().skip(1).map(|i| i.start).collect()
    }

    /// Checks that the intervals are nonempty, ordered, contiguous and
    /// cover `1..=n_elements`.
    pub fn is_legal(&self, n_elements: usize) -> bool {
        let mut next = 1;
        for iv in &self.intervals {
            if iv.start != next || iv.end < iv.start {
                return false;
            }
            next = iv.end + 1;
        }
        next == n_elements + 1
    }

    /// CSV with header `interval_index,start,end,criterion,boundary_score`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "interval_index,start,end,criterion,boundary_score")?;
        self.write_rows(&mut out)
    }

    /// Data rows only, for appending several partitions to one file.
    pub fn write_rows<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        for (i, iv) in self.intervals.iter().enumerate() {
            let score = iv.boundary_score.map(|s| s.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{}",
                i + 1,
                iv.start,
                iv.end,
                iv.criterion,
                score
            )?;
        }
        Ok(())
    }
}

/// Settings of the correlation-matrix-distance scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmdConfig {
    /// Window size.
    pub m: usize,
    /// Distance threshold.
    pub tau: f64,
    /// Shortest interval.
    pub min_si: usize,
}

impl Default for CmdConfig {
    fn default() -> Self {
        Self {
            m: 4,
            tau: 0.2,
            min_si: 4,
        }
    }
}

impl CmdConfig {
    fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::invalid("m", "window size must be at least 2"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::invalid("tau", "threshold must lie in (0, 1)"));
        }
        if self.min_si < 1 {
            return Err(Error::invalid("min_si", "must be at least 1"));
        }
        Ok(())
    }
}

/// Greedy reference-anchored CMD scan.
///
/// The reference window is the first `m` elements of the current interval.
/// A test window slides one element at a time from the next position; the
/// first one whose distance to the reference exceeds `tau` closes the
/// interval and the newest element of that window opens the next. A
/// trailing interval shorter than `min_si` is merged into its predecessor.
pub fn partition_by_cmd(cfr: &ChannelFrequencyResponse, config: &CmdConfig) -> Result<StationaryPartition> {
    config.validate()?;
    let n = cfr.n_elements();
    let m = config.m;
    let thresholds = vec![
        ("cmd_window_m".to_string(), m as f64),
        ("cmd_threshold_tau".to_string(), config.tau),
        ("cmd_min_si".to_string(), config.min_si as f64),
    ];
    if n < 2 * m {
        return Ok(StationaryPartition::from_starts(
            n,
            &[],
            Criterion::Cmd,
            thresholds,
            Some(format!("array of {n} elements is shorter than 2m = {}", 2 * m)),
        ));
    }
    let windows: Vec<CorrelationMatrix> = (1..=n + 1 - m)
        .into_par_iter()
        .map(|s| correlation_matrix(cfr, s, m))
        .collect::<Result<_>>()?;
    let mut warning = None;
    let mut starts = Vec::new();
    let mut s = 1;
    'scan: while s + m - 1 <= n {
        let reference = &windows[s - 1];
        if reference.frobenius() == 0.0 && warning.is_none() {
            warning = Some(format!("zero correlation matrix at element {s}"));
        }
        for t in s + 1..=n + 1 - m {
            let newest = t + m - 1;
            if newest - s < config.min_si {
                continue;
            }
            let d = scan_distance(reference, &windows[t - 1]);
            if d > config.tau {
                starts.push((newest, Criterion::Cmd, d));
                s = newest;
                continue 'scan;
            }
        }
        break;
    }
    if let Some(&(last, _, _)) = starts.last() {
        if n + 1 - last < config.min_si {
            starts.pop();
        }
    }
    Ok(StationaryPartition::from_starts(
        n,
        &starts,
        Criterion::Cmd,
        thresholds,
        warning,
    ))
}

/// Distance between the windows starting at every pair of positions, as
/// `(i, j, D)` triples.
pub fn cmd_map(cfr: &ChannelFrequencyResponse, m: usize) -> Result<Vec<(usize, usize, f64)>> {
    if m < 2 || m > cfr.n_elements() {
        return Err(Error::WindowOutOfBounds {
            start: 1,
            end: m,
            len: cfr.n_elements(),
        });
    }
    let count = cfr.n_elements() + 1 - m;
    let windows: Vec<CorrelationMatrix> = (1..=count)
        .into_par_iter()
        .map(|s| correlation_matrix(cfr, s, m))
        .collect::<Result<_>>()?;
    Ok((0..count)
        .into_par_iter()
        .flat_map_iter(|i| {
            let windows = &windows;
            (0..count).map(move |j| (i + 1, j + 1, scan_distance(&windows[i], &windows[j])))
        })
        .collect())
}

/// Centered moving average of width `w` followed by a central difference,
/// one-sided at the ends. The averaging window shrinks symmetrically near
/// the ends so linear trends pass through unchanged.
pub fn characteristic_slope(s: &[f64], w: usize) -> Result<Vec<f64>> {
    let n = s.len();
    if n < 3 {
        return Err(Error::invalid("s", "needs at least 3 elements"));
    }
    if w % 2 == 0 {
        return Err(Error::invalid("w", "smoothing width must be odd"));
    }
    let half = w / 2;
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            s[i - h..=i + h].iter().sum::<f64>() / (2 * h + 1) as f64
        })
        .collect();
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                smooth[1] - smooth[0]
            } else if i == n - 1 {
                smooth[n - 1] - smooth[n - 2]
            } else {
                0.5 * (smooth[i + 1] - smooth[i - 1])
            }
        })
        .collect())
}

/// Characteristic tracked by the slope criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeParameter {
    /// Received power, dB.
    Power,
    /// RMS delay spread, ns.
    DelaySpread,
    /// LOS angle of departure, degrees.
    Angle,
}

impl SlopeParameter {
    /// Default slope threshold per element in the parameter's unit.
    pub fn default_threshold(self) -> f64 {
        match self {
            SlopeParameter::Power => 0.5,
            SlopeParameter::DelaySpread => 0.5,
            SlopeParameter::Angle => 1.0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            SlopeParameter::Power => "power_db",
            SlopeParameter::DelaySpread => "ds_ns",
            SlopeParameter::Angle => "aod_deg",
        }
    }

    /// Parameter values in the unit of [`Self::default_threshold`].
    pub fn values(self, stats: &ChannelStats) -> Result<Vec<f64>> {
        let v: Vec<f64> = match self {
            SlopeParameter::Power => stats.power_db.clone(),
            SlopeParameter::DelaySpread => stats
                .delay_spread
                .iter()
                .map(|d| d.map_or(f64::NAN, |x| x * 1e9))
                .collect(),
            SlopeParameter::Angle => stats.aod.iter().map(|a| a.to_degrees()).collect(),
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(
                self.name(),
                "parameter is not populated on every element",
            ));
        }
        Ok(v)
    }
}

/// Settings of the slope criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeConfig {
    /// Smoothing width, odd.
    pub w: usize,
    pub k_threshold: f64,
    /// Largest power spread allowed inside one interval, dB.
    pub gamma_db: f64,
    pub min_si: usize,
}

impl SlopeConfig {
    pub fn for_parameter(parameter: SlopeParameter) -> Self {
        Self {
            w: 5,
            k_threshold: parameter.default_threshold(),
            gamma_db: 3.0,
            min_si: 4,
        }
    }
}

/// Slope partition of one characteristic from `stats`, with the uniform
/// power check on received power.
pub fn partition_by_slope(
    stats: &ChannelStats,
    parameter: SlopeParameter,
    config: &SlopeConfig,
) -> Result<StationaryPartition> {
    let values = parameter.values(stats)?;
    let mut p = partition_by_slope_values(&values, &stats.power_db, config)?;
    p.thresholds.insert(
        0,
        (format!("slope_parameter_{}", parameter.name()), 1.0),
    );
    Ok(p)
}

/// Slope partition of `values` with the uniform-power check on `power_db`.
///
/// A boundary is placed in the middle of every run of at least two
/// consecutive elements whose smoothed slope magnitude exceeds the
/// threshold. Each interval is then scanned from its start; the first
/// element that pushes the running power max−min above `gamma_db` opens a
/// new interval.
pub fn partition_by_slope_values(
    values: &[f64],
    power_db: &[f64],
    config: &SlopeConfig,
) -> Result<StationaryPartition> {
    let n = values.len();
    if power_db.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} values vs {} powers",
            n,
            power_db.len()
        )));
    }
    if config.min_si < 1 {
        return Err(Error::invalid("min_si", "must be at least 1"));
    }
    let thresholds = vec![
        ("slope_smoothing_w".to_string(), config.w as f64),
        ("slope_k_threshold".to_string(), config.k_threshold),
        ("uniform_power_gamma_db".to_string(), config.gamma_db),
        ("slope_min_si".to_string(), config.min_si as f64),
    ];
    if n < 3 {
        return Ok(StationaryPartition::from_starts(
            n,
            &[],
            Criterion::Slope,
            thresholds,
            Some(format!("array of {n} elements is too short for slopes")),
        ));
    }
    let k = characteristic_slope(values, config.w)?;

    let mut candidates = Vec::new();
    let mut i = 0;
    while i < n {
        if k[i].abs() > config.k_threshold {
            let a = i;
            let mut peak = k[i].abs();
            while i + 1 < n && k[i + 1].abs() > config.k_threshold {
                i += 1;
                peak = peak.max(k[i].abs());
            }
            if i > a {
                // 1-based run a+1..=i+1, boundary at its upper middle
                candidates.push(((a + 1 + i + 1 + 1) / 2, peak));
            }
        }
        i += 1;
    }

    let mut starts: Vec<(usize, Criterion, f64)> = Vec::new();
    let mut last = 1;
    for (b, score) in candidates {
        if b - last >= config.min_si && n + 1 - b >= config.min_si {
            starts.push((b, Criterion::Slope, score));
            last = b;
        }
    }

    let mut edges: Vec<usize> = starts.iter().map(|s| s.0).collect();
    edges.push(n + 1);
    let mut all = Vec::new();
    let mut begin = 1;
    for (idx, &stop) in edges.iter().enumerate() {
        let mut s = begin;
        let (mut lo, mut hi) = (power_db[s - 1], power_db[s - 1]);
        let mut e = s + 1;
        while e < stop {
            let p = power_db[e - 1];
            lo = lo.min(p);
            hi = hi.max(p);
            if hi - lo > config.gamma_db && e - s >= config.min_si && stop - e >= config.min_si {
                all.push((e, Criterion::UniformPower, hi - lo));
                s = e;
                lo = p;
                hi = p;
            }
            e += 1;
        }
        if idx < starts.len() {
            all.push(starts[idx]);
        }
        begin = stop;
    }
    Ok(StationaryPartition::from_starts(
        n,
        &all,
        Criterion::Slope,
        thresholds,
        None,
    ))
}
