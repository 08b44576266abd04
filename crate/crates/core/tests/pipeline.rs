//! End-to-end checks across synthesis, analysis, partitioning and the
//! multiplanar model.

use nearfield::analysis::compute_stats;
use nearfield::mwmodel::{build_mw_model, dyadic_errors, mw_error, synthesize_mw_cfr};
use nearfield::scene::{load_scene, parse_scene, serialize_scene};
use nearfield::scene::{presets, Scene};
use nearfield::stationarity::{
    partition_by_cmd, partition_by_slope, partition_by_slope_values, CmdConfig, SlopeConfig, SlopeParameter, StationaryPartition,
};
use nearfield::synth::{enumerate_paths, synthesize_cfr, synthesize_los, ChannelFrequencyResponse};

fn quiet(mut scene: Scene) -> Scene {
    scene.noise_floor_dbm = None;
    scene
}

#[test]
fn presets_survive_a_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["los_lab", "olos_baffle"] {
        let scene = presets::by_name(name).unwrap();
        let path = dir.path().join(format!("{name}.scn"));
        std::fs::write(&path, serialize_scene(&scene)).unwrap();
        let loaded = load_scene(&path).unwrap();
        assert_eq!(loaded, scene, "{name}");
        assert_eq!(parse_scene(presets::text(name).unwrap()).unwrap(), scene);
    }
}

#[test]
fn environment_contributions_superpose() {
    let full = quiet(presets::los_lab());
    let mut walls_only = full.clone();
    walls_only.point_scatterers.clear();
    let mut scatterers_only = full.clone();
    scatterers_only.walls.clear();
    let mut bare = full.clone();
    bare.walls.clear();
    bare.point_scatterers.clear();

    let h = synthesize_cfr(&full).unwrap();
    let sum = synthesize_cfr(&walls_only)
        .unwrap()
        .add(&synthesize_cfr(&scatterers_only).unwrap())
        .unwrap()
        .sub(&synthesize_cfr(&bare).unwrap())
        .unwrap();
    let scale = h.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (a, b) in h.values().iter().zip(sum.values()) {
        assert!((a - b).norm() <= 1e-12 * scale);
    }
}

#[test]
fn los_only_matches_bare_scene() {
    let scene = quiet(presets::olos_baffle());
    let mut bare = scene.clone();
    bare.walls.clear();
    bare.point_scatterers.clear();
    let a = synthesize_los(&scene).unwrap();
    let b = synthesize_cfr(&bare).unwrap();
    assert_eq!(a.values(), b.values());
}

#[test]
fn reflected_paths_are_longer_than_direct() {
    let scene = presets::los_lab();
    for n in [1, 17, 33, 64] {
        let paths = enumerate_paths(&scene, n).unwrap();
        let los = paths[0].length;
        assert!(paths[1..].iter().all(|p| p.length > los));
    }
}

#[test]
fn noisy_synthesis_is_independent_of_thread_count() {
    let mut scene = presets::olos_baffle();
    scene.noise_floor_dbm = Some(-70.0);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| synthesize_cfr(&scene).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.values(), b.values());
}

#[test]
fn cmd_interval_count_shrinks_with_threshold() {
    let cfr = synthesize_cfr(&presets::olos_baffle()).unwrap();
    let counts: Vec<usize> = [0.05, 0.1, 0.2, 0.3, 0.5, 0.8]
        .iter()
        .map(|&tau| {
            let p = partition_by_cmd(&cfr, &CmdConfig { tau, ..CmdConfig::default() }).unwrap();
            assert!(p.is_legal(cfr.n_elements()));
            p.len()
        })
        .collect();
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
}

#[test]
fn all_zero_response_gives_legal_partitions() {
    let scene = presets::los_lab();
    let cfr = ChannelFrequencyResponse::zeros(scene.n_elements(), scene.sweep, scene.array.spacing_d);
    let n = cfr.n_elements();
    let p = partition_by_cmd(&cfr, &CmdConfig::default()).unwrap();
    assert!(p.is_legal(n));
    assert_eq!(p.len(), 1);
    // no LOS energy to measure, so the statistics are refused
    assert!(compute_stats(&cfr, None).is_err());
    let flat = vec![0.0; n];
    let p = partition_by_slope_values(&flat, &flat, &SlopeConfig::for_parameter(SlopeParameter::Power)).unwrap();
    assert!(p.is_legal(n));
    assert_eq!(p.len(), 1);
}

#[test]
fn slope_partition_of_preset_is_legal() {
    let scene = presets::olos_baffle();
    let stats = compute_stats(&synthesize_cfr(&scene).unwrap(), Some(&scene)).unwrap();
    for param in [SlopeParameter::Power, SlopeParameter::DelaySpread, SlopeParameter::Angle] {
        let p = partition_by_slope(&stats, param, &SlopeConfig::for_parameter(param)).unwrap();
        assert!(p.is_legal(scene.n_elements()));
    }
}

#[test]
fn finer_partitions_track_the_wavefront_better() {
    let rows = dyadic_errors(&presets::los_lab(), 5).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.windows(2).all(|w| w[1].phase_rmse < w[0].phase_rmse));
    assert!(rows.iter().all(|r| r.correlation > 0.0 && r.correlation <= 1.0 + 1e-12));
}

#[test]
fn single_element_intervals_are_exact() {
    let scene = presets::los_lab();
    let n = scene.n_elements();
    let p = StationaryPartition::equal(n, n).unwrap();
    let approx = synthesize_mw_cfr(&build_mw_model(&scene, &p).unwrap(), &scene).unwrap();
    let err = mw_error(&synthesize_los(&scene).unwrap(), &approx).unwrap();
    assert!(err.phase_rmse < 1e-9, "{}", err.phase_rmse);
}
