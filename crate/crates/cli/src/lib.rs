//! Pipeline driver behind the `nearfield` binary: scenario resolution, the
//! `run` command that writes every CSV artifact plus a text report, and the
//! `phase-check` table.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nearfield::analysis::{self, compute_stats, element_pdps, ChannelStats, Window};
use nearfield::mwmodel::{dyadic_errors, evaluate_partition, write_error_csv, MwErrorRow};
use nearfield::scene::{load_scene, presets, Scene};
use nearfield::stationarity::{
    cmd_map, partition_by_cmd, partition_by_slope, CmdConfig, SlopeConfig, SlopeParameter,
    StationaryPartition,
};
use nearfield::synth::{los_path_of, synthesize_cfr, synthesize_los};
use nearfield::wavefront::{model_input, near_field_phase, rayleigh_distance, signed_far_field_phase};
use nearfield::{stationarity, Error};

/// Finest dyadic level of the multiplanar error table.
pub const MW_MAX_LEVEL: u32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("unknown preset `{0}` (known: {known})", known = presets::NAMES.join(", "))]
    UnknownPreset(String),

    #[error("cannot load scenario: {0}")]
    Parse(#[source] Error),

    #[error("analysis failed: {0}")]
    Analysis(#[source] Error),

    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::UnknownPreset(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Analysis(_) | CliError::Io(_) => 4,
        }
    }
}

fn analysis_err(e: Error) -> CliError {
    match e {
        Error::Io(io) => CliError::Io(io),
        other => CliError::Analysis(other),
    }
}

/// Resolves a preset name or scenario path. Arguments that look like paths
/// (contain `.` or `/`) or exist on disk are loaded as files.
pub fn resolve_scene(arg: &str) -> Result<Scene, CliError> {
    if let Some(scene) = presets::by_name(arg) {
        return Ok(scene);
    }
    if Path::new(arg).exists() || arg.contains('.') || arg.contains('/') {
        return load_scene(arg).map_err(CliError::Parse);
    }
    Err(CliError::UnknownPreset(arg.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CriterionChoice {
    Cmd,
    Slope,
    #[default]
    Both,
}

/// Settings of the `run` command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub freq_points: Option<usize>,
    pub cmd_threshold: f64,
    pub window: usize,
    pub criterion: CriterionChoice,
    pub noise_floor: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        let cmd = CmdConfig::default();
        Self {
            out: PathBuf::from("out"),
            seed: None,
            freq_points: None,
            cmd_threshold: cmd.tau,
            window: cmd.m,
            criterion: CriterionChoice::default(),
            noise_floor: None,
        }
    }
}

/// One built-in observation check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Summary of a completed run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub scene_summary: String,
    pub stats: ChannelStats,
    pub partitions: Vec<StationaryPartition>,
    pub mw_errors: Vec<MwErrorRow>,
    pub checks: Vec<Check>,
    /// Every file written, in order.
    pub files: Vec<PathBuf>,
}

impl RunReport {
    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Applies the command-line overrides to a resolved scene.
pub fn apply_overrides(mut scene: Scene, opts: &RunOptions) -> Result<Scene, CliError> {
    if let Some(seed) = opts.seed {
        scene.seed = seed;
    }
    if let Some(n) = opts.freq_points {
        scene.sweep.n_points = n;
    }
    if let Some(floor) = opts.noise_floor {
        scene.noise_floor_dbm = Some(floor);
    }
    scene.validate().map_err(CliError::Parse)?;
    Ok(scene)
}

/// Runs synthesis, analysis, partitioning and the multiplanar error table
/// and writes all artifacts into `opts.out`.
pub fn cmd_run(arg: &str, opts: &RunOptions) -> Result<RunReport, CliError> {
    let scene = apply_overrides(resolve_scene(arg)?, opts)?;
    run_scene(&scene, opts)
}

pub fn run_scene(scene: &Scene, opts: &RunOptions) -> Result<RunReport, CliError> {
    let cmd_config = CmdConfig {
        m: opts.window,
        tau: opts.cmd_threshold,
        min_si: opts.window,
    };
    let slope_config = SlopeConfig::for_parameter(SlopeParameter::Power);

    let cfr = synthesize_cfr(scene).map_err(analysis_err)?;
    let stats = compute_stats(&cfr, Some(scene)).map_err(analysis_err)?;
    let pdps = element_pdps(&cfr, Window::Hann).map_err(analysis_err)?;

    let mut partitions = Vec::new();
    if opts.criterion != CriterionChoice::Slope {
        partitions.push(partition_by_cmd(&cfr, &cmd_config).map_err(analysis_err)?);
    }
    if opts.criterion != CriterionChoice::Cmd {
        partitions
            .push(partition_by_slope(&stats, SlopeParameter::Power, &slope_config).map_err(analysis_err)?);
    }
    let map = if scene.n_elements() >= cmd_config.m {
        cmd_map(&cfr, cmd_config.m).map_err(analysis_err)?
    } else {
        Vec::new()
    };

    let mut mw_errors = dyadic_errors(scene, MW_MAX_LEVEL).map_err(analysis_err)?;
    let los_truth = synthesize_los(scene).map_err(analysis_err)?;
    for p in &partitions {
        mw_errors.push(
            evaluate_partition(scene, p, &los_truth, &cfr, p.criterion.to_string())
                .map_err(analysis_err)?,
        );
    }

    let baseline = if scene.blockers.is_empty() {
        None
    } else {
        let mut clear = scene.clone();
        clear.blockers.clear();
        let clear_cfr = synthesize_cfr(&clear).map_err(analysis_err)?;
        Some(compute_stats(&clear_cfr, Some(&clear)).map_err(analysis_err)?)
    };
    let checks = build_checks(scene, &stats, baseline.as_ref(), &partitions).map_err(analysis_err)?;

    fs::create_dir_all(&opts.out)?;
    let mut files = Vec::new();
    let mut emit = |name: &str, write: &dyn Fn(&mut dyn Write) -> nearfield::Result<()>| -> Result<(), CliError> {
        let path = opts.out.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        write(&mut w).map_err(analysis_err)?;
        w.flush()?;
        files.push(path);
        Ok(())
    };
    emit("cfr.csv", &|w| cfr.write_csv(w))?;
    emit("stats.csv", &|w| stats.write_csv(w))?;
    emit("pdp.csv", &|w| analysis::write_pdp_csv(&pdps, w))?;
    emit("partition.csv", &|w| write_partitions(&partitions, w))?;
    emit("cmd_map.csv", &|w| {
        writeln!(w, "i,j,D")?;
        for (i, j, d) in &map {
            writeln!(w, "{i},{j},{d}")?;
        }
        Ok(())
    })?;
    emit("mw_error.csv", &|w| write_error_csv(&mw_errors, w))?;

    let scene_summary = summarize_scene(scene);
    let report = render_report(
        &scene_summary,
        scene,
        &cmd_config,
        &slope_config,
        &partitions,
        &mw_errors,
        &checks,
    );
    emit("report.txt", &|w| {
        w.write_all(report.as_bytes())?;
        Ok(())
    })?;

    Ok(RunReport {
        scene_summary,
        stats,
        partitions,
        mw_errors,
        checks,
        files,
    })
}

fn write_partitions(partitions: &[StationaryPartition], mut w: &mut dyn Write) -> nearfield::Result<()> {
    writeln!(w, "interval_index,start,end,criterion,boundary_score")?;
    for p in partitions {
        p.write_rows(&mut w)?;
    }
    Ok(())
}

fn summarize_scene(scene: &Scene) -> String {
    let (r1, t1) = scene.true_geometry(1, &scene.rx).unwrap_or((f64::NAN, f64::NAN));
    let rd = rayleigh_distance(scene.array.aperture(), scene.sweep.center_wavelength());
    format!(
        "elements: {} at {} m pitch (aperture {:.4} m)\n\
         sweep: {} to {} Hz, {} points (delay bin {:.4} ns)\n\
         rx: {}, {}, {} (distance {:.3} m, angle {:.2} deg from element 1; Rayleigh distance {:.2} m)\n\
         walls: {}, point scatterers: {}, blockers: {}\n\
         noise floor: {}, seed: {}\n",
        scene.n_elements(),
        scene.array.spacing_d,
        scene.array.aperture(),
        scene.sweep.f_start,
        scene.sweep.f_stop,
        scene.sweep.n_points,
        scene.sweep.delay_bin() * 1e9,
        scene.rx.x,
        scene.rx.y,
        scene.rx.z,
        r1,
        t1.to_degrees(),
        rd,
        scene.walls.len(),
        scene.point_scatterers.len(),
        scene.blockers.len(),
        scene
            .noise_floor_dbm
            .map_or("off".to_string(), |f| format!("{f} dBm")),
        scene.seed,
    )
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    max - min
}

/// Median of the finite entries; `None` when there are none.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().cloned().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

fn build_checks(
    scene: &Scene,
    stats: &ChannelStats,
    baseline: Option<&ChannelStats>,
    partitions: &[StationaryPartition],
) -> nearfield::Result<Vec<Check>> {
    let mut checks = Vec::new();
    let shadowed: Vec<usize> = (1..=scene.n_elements())
        .map(|n| los_path_of(scene, n).map(|p| (n, p.obstructed)))
        .collect::<nearfield::Result<Vec<_>>>()?
        .into_iter()
        .filter_map(|(n, blocked)| blocked.then_some(n))
        .collect();

    let ps = spread(&stats.power_db);
    if shadowed.is_empty() {
        checks.push(Check {
            name: "power spread across the array <= 0.5 dB".into(),
            passed: ps <= 0.5,
            detail: format!("{ps:.3} dB"),
        });
    } else {
        checks.push(Check {
            name: "power spread across the array (informational)".into(),
            passed: true,
            detail: format!("{ps:.3} dB"),
        });
    }

    let aod_deg: Vec<f64> = stats.aod.iter().map(|a| a.to_degrees()).collect();
    let span = spread(&aod_deg);
    checks.push(Check {
        name: "LOS AoD span (informational)".into(),
        passed: true,
        detail: format!("{span:.3} deg over {} elements", aod_deg.len()),
    });

    for p in partitions {
        checks.push(Check {
            name: format!("{} partition", p.criterion),
            passed: p.is_legal(scene.n_elements()),
            detail: format!(
                "{} interval(s), boundaries at {:?}{}",
                p.len(),
                p.boundaries(),
                p.warning
                    .as_ref()
                    .map_or(String::new(), |w| format!(" (warning: {w})"))
            ),
        });
    }

    if let (Some(base), Some(&first)) = (baseline, shadowed.first()) {
        let drops: Vec<f64> = shadowed
            .iter()
            .map(|&n| base.power_db[n - 1] - stats.power_db[n - 1])
            .collect();
        let mean_drop = drops.iter().sum::<f64>() / drops.len() as f64;
        checks.push(Check {
            name: "power drop on LOS-obstructed elements versus the scene without blockers".into(),
            passed: mean_drop > 0.0,
            detail: format!(
                "elements {}..={} obstructed ({} total), mean drop {:.2} dB, max drop {:.2} dB",
                first,
                shadowed.last().copied().unwrap_or(first),
                shadowed.len(),
                mean_drop,
                drops.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            ),
        });
        let ds = |s: &ChannelStats| -> Vec<f64> {
            shadowed
                .iter()
                .map(|&n| s.delay_spread[n - 1].map_or(f64::NAN, |d| d * 1e9))
                .collect()
        };
        let (m0, m1) = (median(&ds(base)), median(&ds(stats)));
        checks.push(Check {
            name: "median delay spread increase on LOS-obstructed elements".into(),
            passed: matches!((m0, m1), (Some(a), Some(b)) if b > a),
            detail: format!(
                "{} ns without blockers, {} ns with",
                m0.map_or("n/a".into(), |v| format!("{v:.3}")),
                m1.map_or("n/a".into(), |v| format!("{v:.3}"))
            ),
        });
        for p in partitions {
            let nearest = p
                .boundaries()
                .into_iter()
                .min_by_key(|b| b.abs_diff(first));
            checks.push(Check {
                name: format!("{} boundary within 2 elements of the shadow edge", p.criterion),
                passed: nearest.is_some_and(|b| b.abs_diff(first) <= 2),
                detail: format!(
                    "shadow starts at element {first}, nearest boundary {}",
                    nearest.map_or("none".into(), |b| b.to_string())
                ),
            });
        }
    }
    Ok(checks)
}

fn render_report(
    summary: &str,
    scene: &Scene,
    cmd: &CmdConfig,
    slope: &SlopeConfig,
    partitions: &[StationaryPartition],
    mw: &[MwErrorRow],
    checks: &[Check],
) -> String {
    let mut r = String::new();
    let _ = writeln!(r, "nearfield run report\n");
    let _ = writeln!(r, "[scene]\n{summary}");
    let _ = writeln!(r, "[thresholds and defaults]");
    let items: Vec<(&str, String)> = vec![
        ("pdp window", "hann, unit coherent gain".into()),
        ("pdp scaling", "unitary inverse DFT".into()),
        ("delay spread threshold", format!("{} dB below peak", analysis::DS_THRESHOLD_DB)),
        ("LOS gate half-width", format!("{} bins", analysis::LOS_GATE_BINS)),
        ("LOS phase frequency", format!("{} Hz", scene.sweep.center())),
        ("cmd window m", cmd.m.to_string()),
        ("cmd threshold tau", cmd.tau.to_string()),
        ("cmd min interval", cmd.min_si.to_string()),
        ("slope parameter", "received power".into()),
        ("slope smoothing w", slope.w.to_string()),
        ("slope threshold", format!("{} dB/element", slope.k_threshold)),
        ("slope threshold (delay spread)", format!("{} ns/element", SlopeParameter::DelaySpread.default_threshold())),
        ("slope threshold (angle)", format!("{} deg/element", SlopeParameter::Angle.default_threshold())),
        ("uniform-power gamma", format!("{} dB", slope.gamma_db)),
        ("slope min interval", slope.min_si.to_string()),
        ("full blockage", format!("{} dB", nearfield::synth::FULL_BLOCKAGE_DB)),
        ("mw dyadic levels", format!("0..={MW_MAX_LEVEL}")),
    ];
    for (k, v) in items {
        let _ = writeln!(r, "{k}: {v}");
    }
    let _ = writeln!(r, "\n[partitions]");
    for p in partitions {
        let ivs: Vec<String> = p
            .intervals
            .iter()
            .map(|i| format!("{}..={}", i.start, i.end))
            .collect();
        let _ = writeln!(r, "{}: {}", p.criterion, ivs.join(", "));
    }
    let _ = writeln!(r, "\n[multiplanar-wave error]");
    for row in mw {
        let _ = writeln!(
            r,
            "{}: {} interval(s), phase rmse {:.6} rad, correlation {:.6}",
            row.id, row.n_intervals, row.phase_rmse, row.correlation
        );
    }
    let _ = writeln!(r, "\n[checks]");
    for c in checks {
        let _ = writeln!(
            r,
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    r
}

/// One row of the phase-check table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRow {
    pub element: usize,
    pub measured: f64,
    pub spherical: f64,
    pub planar: f64,
}

/// Measured LOS phase against the spherical and planar closed forms.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCheck {
    pub distance: f64,
    pub rows: Vec<PhaseRow>,
    /// `None` when a column has zero variance.
    pub corr_measured_spherical: Option<f64>,
    pub corr_measured_planar: Option<f64>,
    pub max_spherical_minus_planar: f64,
    pub max_measured_minus_spherical: f64,
}

impl PhaseCheck {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "element,measured_phase,spherical_phase,planar_phase");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.element, r.measured, r.spherical, r.planar);
        }
        let fmt = |c: Option<f64>| c.map_or("undefined".to_string(), |v| v.to_string());
        let _ = writeln!(s, "# rx distance {} m", self.distance);
        let _ = writeln!(s, "# corr(measured, spherical) {}", fmt(self.corr_measured_spherical));
        let _ = writeln!(s, "# corr(measured, planar) {}", fmt(self.corr_measured_planar));
        let _ = writeln!(s, "# max |spherical - planar| {} rad", self.max_spherical_minus_planar);
        let _ = writeln!(s, "# max |measured - spherical| {} rad", self.max_measured_minus_spherical);
        s
    }
}

/// Phase table with the receiver moved along the element-1 ray to `k`
/// times its distance, or to `k` Rayleigh distances when `rayleigh` is set.
/// Away from the original position (`k ≠ 1` or `rayleigh`) walls and point
/// scatterers are dropped because the receiver leaves the room; blockers
/// stay.
pub fn phase_check(arg: &str, k: f64, rayleigh: bool) -> Result<PhaseCheck, CliError> {
    let scene = resolve_scene(arg)?;
    phase_check_scene(&scene, k, rayleigh)
}

pub fn phase_check_scene(scene: &Scene, k: f64, rayleigh: bool) -> Result<PhaseCheck, CliError> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(CliError::Parse(Error::Invalid {
            field: "k".into(),
            message: "distance multiplier must be at least 1".into(),
        }));
    }
    let wavelength = scene.sweep.center_wavelength();
    let (r1, _) = scene.true_geometry(1, &scene.rx).map_err(analysis_err)?;
    let distance = if rayleigh {
        k * rayleigh_distance(scene.array.aperture(), wavelength)
    } else {
        k * r1
    };
    let mut moved = scene.clone();
    moved.noise_floor_dbm = None;
    if rayleigh || k != 1.0 {
        moved.walls.clear();
        moved.point_scatterers.clear();
    }
    let moved = moved.with_rx_distance(distance).map_err(analysis_err)?;

    let cfr = synthesize_cfr(&moved).map_err(analysis_err)?;
    let measured = analysis::los_phase(&cfr, Some(&moved)).map_err(analysis_err)?;
    let (_, theta_1) = moved.true_geometry(1, &moved.rx).map_err(analysis_err)?;
    let mut rows = Vec::with_capacity(moved.n_elements());
    for n in 1..=moved.n_elements() {
        let input = model_input(&moved, n, &moved.rx, wavelength).map_err(analysis_err)?;
        rows.push(PhaseRow {
            element: n,
            measured: measured.phase[n - 1],
            spherical: near_field_phase(&input),
            planar: signed_far_field_phase(n, moved.array.spacing_d, wavelength, theta_1),
        });
    }
    let col = |f: fn(&PhaseRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    let (m, e4, e6) = (col(|r| r.measured), col(|r| r.spherical), col(|r| r.planar));
    let max_abs = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    Ok(PhaseCheck {
        distance,
        corr_measured_spherical: stationarity::pearson(&m, &e4),
        corr_measured_planar: stationarity::pearson(&m, &e6),
        max_spherical_minus_planar: max_abs(&e4, &e6),
        max_measured_minus_spherical: max_abs(&m, &e4),
        rows,
    })
}
