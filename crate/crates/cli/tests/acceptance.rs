//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! fails the process if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use nearfield::analysis::{
    compute_pdp, compute_stats, rms_delay_spread, wrap, ChannelStats, Window,
};
use nearfield::mwmodel::{build_mw_model, dyadic_errors, mw_error, synthesize_mw_cfr};
use nearfield::scene::{occludes, presets, Scene, Sweep};
use nearfield::stationarity::{cmd_matrices, partition_by_cmd, CmdConfig, StationaryPartition};
use nearfield::synth::{los_path_of, synthesize_cfr, synthesize_los};
use nearfield::wavefront::{
    exact_phase_oracle, model_input, near_field_phase, rayleigh_distance, signed_far_field_phase,
};
use nearfield::{Complex64, Vec3, SPEED_OF_LIGHT};
use nearfield_cli::{cmd_run, median, phase_check_scene, RunOptions};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 phase-model exactness", phase_model_exactness),
        ("2 far-field limit", far_field_limit),
        ("3 LOS phase vs spherical model", los_phase_correlation),
        ("4 power spread and AoD", power_and_aod),
        ("5 OLOS power loss and delay spread", olos_behavior),
        ("6 stationary interval recovery", si_recovery),
        ("7 CMD properties", cmd_properties),
        ("8 multiplanar refinement", mw_monotonicity),
        ("9 analysis oracles", analysis_oracles),
        ("10 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        println!(
            "criterion {name}: {} ({}; {secs:.2} s)",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn phase_model_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n_el = rng.random_range(2..=256);
        let d = rng.random_range(0.004..0.03);
        let r = rng.random_range(0.3..60.0);
        let theta: f64 = rng.random_range(0.05..PI - 0.05);
        let f = rng.random_range(11e9..15e9);
        let target = Vec3::new(r * theta.cos(), r * theta.sin(), 0.0);
        let mut scene = Scene::free_space(target);
        scene.array.n_elements = n_el;
        scene.array.spacing_d = d;
        scene.array.origin = Vec3::zeros();
        if scene.validate().is_err() {
            continue;
        }
        let n = rng.random_range(1..=n_el);
        let wavelength = SPEED_OF_LIGHT / f;
        let model = near_field_phase(&model_input(&scene, n, &target, wavelength).unwrap());
        let oracle = exact_phase_oracle(&scene, n, &target, f).unwrap();
        worst = worst.max((model - oracle).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-9 && secs < 1.0,
        format!("max error {worst:.3e} rad over 1000 geometries in {secs:.3} s"),
    )
}

fn far_field_error(scene: &Scene, k: f64) -> f64 {
    let wavelength = scene.sweep.center_wavelength();
    let rd = rayleigh_distance(scene.array.aperture(), wavelength);
    let moved = scene.with_rx_distance(k * rd).unwrap();
    let (_, theta_1) = moved.true_geometry(1, &moved.rx).unwrap();
    (1..=moved.n_elements())
        .map(|n| {
            let spherical = near_field_phase(&model_input(&moved, n, &moved.rx, wavelength).unwrap());
            let planar = signed_far_field_phase(n, moved.array.spacing_d, wavelength, theta_1);
            (spherical - planar).abs()
        })
        .fold(0.0, f64::max)
}

fn far_field_limit() -> Outcome {
    let scene = presets::los_lab();
    let errors: Vec<f64> = [1.0, 10.0, 100.0, 1000.0]
        .iter()
        .map(|&k| far_field_error(&scene, k))
        .collect();
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    outcome(
        monotone && errors[3] < 1e-3,
        format!(
            "max error at k = 1, 10, 100, 1000 Rayleigh distances: {:.3e}, {:.3e}, {:.3e}, {:.3e} rad",
            errors[0], errors[1], errors[2], errors[3]
        ),
    )
}

fn los_phase_correlation() -> Outcome {
    let scene = presets::los_lab();
    let check = phase_check_scene(&scene, 1.0, false).unwrap();
    let corr = check.corr_measured_spherical.unwrap_or(f64::NAN);
    let max_dev = check
        .rows
        .iter()
        .map(|r| wrap(r.measured - r.spherical).abs())
        .fold(0.0, f64::max);
    outcome(
        corr > 0.99 && max_dev < 1e-3,
        format!("Pearson {corr:.9}, max wrapped deviation {max_dev:.3e} rad"),
    )
}

fn stats_of(scene: &Scene) -> ChannelStats {
    let cfr = synthesize_cfr(scene).unwrap();
    compute_stats(&cfr, Some(scene)).unwrap()
}

fn power_and_aod() -> Outcome {
    let scene = presets::los_lab();
    let stats = stats_of(&scene);
    let max = stats.power_db.iter().cloned().fold(f64::MIN, f64::max);
    let min = stats.power_db.iter().cloned().fold(f64::MAX, f64::min);
    let spread = max - min;
    let aod: Vec<f64> = stats.aod.iter().map(|a| a.to_degrees()).collect();
    let increasing = aod.windows(2).all(|w| w[1] > w[0]);
    let decreasing = aod.windows(2).all(|w| w[1] < w[0]);
    let span = aod[aod.len() - 1] - aod[0];
    let geo = scene.rx_geometry();
    let true_span = (geo[geo.len() - 1].1 - geo[0].1).to_degrees();
    let flagged = stats.aod_flagged.iter().filter(|&&f| f).count();
    outcome(
        spread <= 0.5 && (increasing || decreasing) && (span - true_span).abs() <= 1.0 && flagged == 0,
        format!(
            "power spread {spread:.3} dB, AoD {:.2}..{:.2} deg strictly monotone: {}, span {span:.3} deg vs geometric {true_span:.3} deg",
            aod[0],
            aod[aod.len() - 1],
            increasing || decreasing
        ),
    )
}

fn olos_behavior() -> Outcome {
    let start = Instant::now();
    let los = presets::los_lab();
    let olos = presets::olos_baffle();
    let a = stats_of(&los);
    let b = stats_of(&olos);
    let lambda = olos.sweep.center_wavelength();
    let mut deep = Vec::new();
    let mut shadowed = Vec::new();
    for n in 1..=olos.n_elements() {
        let p = olos.element_position(n).unwrap();
        let nu = olos
            .blockers
            .iter()
            .map(|bl| occludes(bl, &p, &olos.rx, lambda).nu)
            .fold(f64::NEG_INFINITY, f64::max);
        if nu >= 1.0 {
            deep.push(n);
        }
        if los_path_of(&olos, n).unwrap().obstructed {
            shadowed.push(n);
        }
    }
    let min_loss = deep
        .iter()
        .map(|&n| a.power_db[n - 1] - b.power_db[n - 1])
        .fold(f64::INFINITY, f64::min);
    let ds = |s: &ChannelStats, idx: &[usize]| -> Vec<f64> {
        idx.iter()
            .map(|&n| s.delay_spread[n - 1].map_or(f64::NAN, |d| d * 1e9))
            .collect()
    };
    let all: Vec<usize> = (1..=los.n_elements()).collect();
    let los_median = median(&ds(&a, &all)).unwrap_or(f64::NAN);
    let shadow_median = median(&ds(&b, &shadowed)).unwrap_or(f64::NAN);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        !deep.is_empty() && min_loss >= 10.0 && shadow_median - los_median >= 2.0 && secs < 30.0,
        format!(
            "{} deeply shadowed elements ({}..={}), min power loss {min_loss:.2} dB; median DS {shadow_median:.3} ns shadowed vs {los_median:.3} ns LOS",
            deep.len(),
            deep.first().copied().unwrap_or(0),
            deep.last().copied().unwrap_or(0)
        ),
    )
}

/// Array of the preset with the receiver `r` meters from the array center
/// at `azimuth` degrees from broadside, in free space with noise.
fn splice_scene(r: f64, azimuth: f64, seed: u64) -> Scene {
    let base = presets::los_lab();
    let center = base.array.origin + 0.5 * base.array.aperture() * base.array.axis;
    let theta = (90.0 - azimuth).to_radians();
    let mut s = Scene::free_space(center + r * Vec3::new(theta.cos(), theta.sin(), 0.0));
    s.array = base.array.clone();
    s.sweep = base.sweep;
    s.noise_floor_dbm = Some(-90.0);
    s.seed = seed;
    s
}

fn si_recovery() -> Outcome {
    let olos = presets::olos_baffle();
    let p = partition_by_cmd(&synthesize_cfr(&olos).unwrap(), &CmdConfig::default()).unwrap();
    let olos_ok = p.boundaries().iter().any(|b| (24..=28).contains(b));

    let mut rng = StdRng::seed_from_u64(6);
    let mut hits = 0;
    for trial in 0..100u64 {
        let split = rng.random_range(16..=48);
        let ra = rng.random_range(3.0..10.0);
        let rb = rng.random_range(3.0..10.0);
        let a = synthesize_cfr(&splice_scene(ra, 60.0, 2 * trial)).unwrap();
        let b = synthesize_cfr(&splice_scene(rb, -60.0, 2 * trial + 1)).unwrap();
        let cfr = a.splice(&b, split).unwrap();
        let part = partition_by_cmd(&cfr, &CmdConfig::default()).unwrap();
        let bounds = part.boundaries();
        if bounds.len() == 1 && bounds[0].abs_diff(split) <= 2 {
            hits += 1;
        }
    }
    outcome(
        olos_ok && hits >= 95,
        format!(
            "olos_baffle boundaries {:?}; splice recovered in {hits}/100 trials",
            p.boundaries()
        ),
    )
}

fn random_psd(n: usize, rng: &mut StdRng) -> DMatrix<Complex64> {
    let rank = rng.random_range(1..=n);
    let a = DMatrix::from_fn(n, rank, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    &a * a.adjoint()
}

fn cmd_properties() -> Outcome {
    let tol = 1e-9;
    let mut rng = StdRng::seed_from_u64(7);
    let mut failures = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=8);
        let a = random_psd(n, &mut rng);
        let b = random_psd(n, &mut rng);
        let c = rng.random_range(0.001..1000.0);
        let d_ab = cmd_matrices(&a, &b).unwrap();
        let d_ba = cmd_matrices(&b, &a).unwrap();
        let ok = cmd_matrices(&a, &a).unwrap() <= tol
            && cmd_matrices(&a, &(a.clone() * Complex64::new(c, 0.0))).unwrap() <= tol
            && (d_ab - d_ba).abs() <= tol
            && (0.0..=1.0).contains(&d_ab);
        if !ok {
            failures += 1;
        }
    }
    let e1 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, 0.0),
    ]));
    let e2 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
    ]));
    let orth = cmd_matrices(&e1, &e2).unwrap();
    outcome(
        failures == 0 && (orth - 1.0).abs() <= tol,
        format!("{failures} failing pairs of 1000; D(diag(1,0), diag(0,1)) = {orth}"),
    )
}

fn mw_monotonicity() -> Outcome {
    let scene = presets::los_lab();
    let rows = dyadic_errors(&scene, 5).unwrap();
    let rmse: Vec<f64> = rows.iter().map(|r| r.phase_rmse).collect();
    let monotone = rmse.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    let singleton = StationaryPartition::equal(scene.n_elements(), scene.n_elements()).unwrap();
    let approx = synthesize_mw_cfr(&build_mw_model(&scene, &singleton).unwrap(), &scene).unwrap();
    let exact = mw_error(&synthesize_los(&scene).unwrap(), &approx).unwrap().phase_rmse;
    outcome(
        rows.len() == 6 && monotone && exact < 1e-9,
        format!(
            "phase rmse for 1..32 intervals: {}; singleton {exact:.3e} rad",
            rmse.iter()
                .map(|v| format!("{v:.4e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    )
}

fn tone(sweep: &Sweep, taps: &[(f64, f64)]) -> Vec<Complex64> {
    sweep
        .frequencies()
        .map(|f| {
            taps.iter()
                .map(|&(a, tau)| Complex64::from_polar(a, -2.0 * PI * f * tau))
                .sum()
        })
        .collect()
}

fn analysis_oracles() -> Outcome {
    let sweep = Sweep::default();
    let mut rng = StdRng::seed_from_u64(9);
    let row: Vec<Complex64> = (0..sweep.n_points)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let energy: f64 = row.iter().map(|h| h.norm_sqr()).sum();
    let pdp = compute_pdp(&row, &sweep, Window::Rectangular).unwrap();
    let parseval = (pdp.total_power() - energy).abs() / energy;

    let two = compute_pdp(&tone(&sweep, &[(1.0, 20e-9), (1.0, 30e-9)]), &sweep, Window::Hann).unwrap();
    let ds = rms_delay_spread(&two, 20.0).unwrap();
    let half_bin = 0.5 * sweep.delay_bin();

    let mut scene = Scene::free_space(Vec3::new(0.0, 5.0, 2.5));
    scene.array.n_elements = 1;
    let single = synthesize_cfr(&scene).unwrap();
    let peak = compute_pdp(single.row(1), &sweep, Window::Hann).unwrap().peak_bin();
    let expected = (5.0 / SPEED_OF_LIGHT / sweep.delay_bin()).round() as usize;

    outcome(
        parseval <= 1e-9 && (ds - 5e-9).abs() <= half_bin && peak == expected,
        format!(
            "Parseval relative error {parseval:.2e}; two-tap DS {:.4} ns (half bin {:.4} ns); single-path peak bin {peak} (geometric {expected})",
            ds * 1e9,
            half_bin * 1e9
        ),
    )
}

fn determinism() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let names = ["cfr.csv", "stats.csv", "pdp.csv", "partition.csv", "cmd_map.csv", "mw_error.csv"];
    for d in &dirs {
        let opts = RunOptions {
            out: d.path().to_path_buf(),
            seed: Some(7),
            ..RunOptions::default()
        };
        cmd_run("olos_baffle", &opts).unwrap();
    }
    let mut identical = 0;
    for name in names {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        if a == b && !a.is_empty() {
            identical += 1;
        }
    }
    outcome(
        identical == names.len(),
        format!("{identical}/{} CSV files byte-identical", names.len()),
    )
}
