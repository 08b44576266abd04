//! Plain-text scenario files.
//!
//! ```text
//! # comment
//! [array]
//! n_elements = 64
//! spacing_d = 0.011534
//! origin = 0, 0, 2.5
//! axis = 1, 0, 0
//!
//! [sweep]
//! f_start = 11e9
//! f_stop = 15e9
//! n_points = 801
//!
//! [rx]
//! position = -7.25, 8.25, 2.5
//!
//! [wall]          # repeatable
//! point = 0, 0, 0
//! normal = 0, 0, 1
//! gamma = 0.2
//!
//! [scatterer]     # repeatable
//! position = -1.5, -1.2, 1.0
//! amplitude = 0.12
//!
//! [blocker]       # repeatable
//! center = 0.6, 0.3, 2.5
//! width = 0.9
//! height = 0.6
//! normal = -0.685, 0.7285, 0
//!
//! [noise]
//! floor_dbm = -80
//! seed = 7
//! ```
//!
//! Units are meters, Hz and dBm. Vectors are comma-separated triples.
//! Missing sections and keys fall back to the defaults in [`super`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{ArraySpec, Blocker, PointScatterer, Scene, Sweep, Wall};
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Array,
    Sweep,
    Rx,
    Wall,
    Scatterer,
    Blocker,
    Noise,
}

impl Section {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "array" => Section::Array,
            "sweep" => Section::Sweep,
            "rx" => Section::Rx,
            "wall" => Section::Wall,
            "scatterer" => Section::Scatterer,
            "blocker" => Section::Blocker,
            "noise" => Section::Noise,
            _ => return None,
        })
    }

    fn keys(self) -> &'static [&'static str] {
        match self {
            Section::Array => &["n_elements", "spacing_d", "origin", "axis", "height"],
            Section::Sweep => &["f_start", "f_stop", "n_points"],
            Section::Rx => &["position"],
            Section::Wall => &["point", "normal", "gamma"],
            Section::Scatterer => &["position", "amplitude"],
            Section::Blocker => &["center", "width", "height", "normal"],
            Section::Noise => &["floor_dbm", "seed"],
        }
    }

    fn repeatable(self) -> bool {
        matches!(self, Section::Wall | Section::Scatterer | Section::Blocker)
    }
}

/// One parsed section: key → (value text, line number).
struct Block {
    kind: Section,
    line: usize,
    entries: BTreeMap<String, (String, usize)>,
}

impl Block {
    fn raw(&self, key: &str) -> Option<&(String, usize)> {
        self.entries.get(key)
    }

    fn required(&self, key: &str) -> Result<&(String, usize)> {
        self.raw(key).ok_or_else(|| Error::Parse {
            line: self.line,
            message: format!("missing key `{key}`"),
        })
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key).map(|(v, line)| parse_f64(v, *line)).transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.raw(key)
            .map(|(v, line)| {
                v.parse::<usize>().map_err(|_| Error::Parse {
                    line: *line,
                    message: format!("expected a non-negative integer, got `{v}`"),
                })
            })
            .transpose()
    }

    fn vec3(&self, key: &str) -> Result<Option<Vec3>> {
        self.raw(key).map(|(v, line)| parse_vec3(v, *line)).transpose()
    }

    fn req_f64(&self, key: &str) -> Result<f64> {
        let (v, line) = self.required(key)?;
        parse_f64(v, *line)
    }

    fn req_vec3(&self, key: &str) -> Result<Vec3> {
        let (v, line) = self.required(key)?;
        parse_vec3(v, *line)
    }
}

fn parse_f64(text: &str, line: usize) -> Result<f64> {
    let value: f64 = text.parse().map_err(|_| Error::Parse {
        line,
        message: format!("expected a number, got `{text}`"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite number `{text}`"),
        });
    }
    Ok(value)
}

fn parse_vec3(text: &str, line: usize) -> Result<Vec3> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Parse {
            line,
            message: format!("expected three comma-separated numbers, got `{text}`"),
        });
    }
    Ok(Vec3::new(
        parse_f64(parts[0], line)?,
        parse_f64(parts[1], line)?,
        parse_f64(parts[2], line)?,
    ))
}

fn tokenize(text: &str) -> Result<Vec<Block>> {
    let mut blocks: Vec<Block> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                line,
                message: format!("malformed section header `{content}`"),
            })?;
            let kind = Section::parse(name.trim()).ok_or_else(|| Error::Parse {
                line,
                message: format!("unknown section `{}`", name.trim()),
            })?;
            if !kind.repeatable() && blocks.iter().any(|b| b.kind == kind) {
                return Err(Error::Parse {
                    line,
                    message: format!("section `{}` given twice", name.trim()),
                });
            }
            blocks.push(Block {
                kind,
                line,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let block = blocks.last_mut().ok_or_else(|| Error::Parse {
            line,
            message: format!("key `{key}` outside of any section"),
        })?;
        if !block.kind.keys().contains(&key) {
            return Err(Error::Parse {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        if block
            .entries
            .insert(key.to_string(), (value.to_string(), line))
            .is_some()
        {
            return Err(Error::Parse {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(blocks)
}

fn unit_or_normalized(v: Vec3) -> Vec3 {
    let n = v.norm();
    if n > 0.0 && (n - 1.0).abs() > 1e-12 {
        v / n
    } else {
        v
    }
}

/// Parses and validates scenario text.
pub fn parse_scene(text: &str) -> Result<Scene> {
    let blocks = tokenize(text)?;
    let mut array = ArraySpec::default();
    let mut sweep = Sweep::default();
    let mut rx = None;
    let mut walls = Vec::new();
    let mut point_scatterers = Vec::new();
    let mut blockers = Vec::new();
    let mut noise_floor_dbm = None;
    let mut seed = 0;

    for block in &blocks {
        match block.kind {
            Section::Array => {
                if let Some(n) = block.usize("n_elements")? {
                    array.n_elements = n;
                }
                if let Some(d) = block.f64("spacing_d")? {
                    array.spacing_d = d;
                }
                if let Some(axis) = block.vec3("axis")? {
                    array.axis = unit_or_normalized(axis);
                }
                let height = block.f64("height")?;
                match (block.vec3("origin")?, height) {
                    (Some(origin), Some(h)) => {
                        if origin.z != h {
                            return Err(Error::invalid(
                                "height",
                                "disagrees with the z coordinate of origin",
                            ));
                        }
                        array.origin = origin;
                        array.height = h;
                    }
                    (Some(origin), None) => {
                        array.origin = origin;
                        array.height = origin.z;
                    }
                    (None, Some(h)) => {
                        array.origin = Vec3::new(0.0, 0.0, h);
                        array.height = h;
                    }
                    (None, None) => {}
                }
            }
            Section::Sweep => {
                if let Some(f) = block.f64("f_start")? {
                    sweep.f_start = f;
                }
                if let Some(f) = block.f64("f_stop")? {
                    sweep.f_stop = f;
                }
                if let Some(n) = block.usize("n_points")? {
                    sweep.n_points = n;
                }
            }
            Section::Rx => rx = Some(block.req_vec3("position")?),
            Section::Wall => walls.push(Wall {
                point: block.req_vec3("point")?,
                normal: {
                    let n = block.req_vec3("normal")?;
                    if n.norm() == 0.0 {
                        return Err(Error::invalid("normal", "wall normal must be nonzero"));
                    }
                    unit_or_normalized(n)
                },
                gamma: block.req_f64("gamma")?,
            }),
            Section::Scatterer => point_scatterers.push(PointScatterer {
                position: block.req_vec3("position")?,
                amplitude: block.req_f64("amplitude")?,
            }),
            Section::Blocker => blockers.push(Blocker::new(
                block.req_vec3("center")?,
                block.req_f64("width")?,
                block.req_f64("height")?,
                block.req_vec3("normal")?,
            )?),
            Section::Noise => {
                noise_floor_dbm = block.f64("floor_dbm")?;
                if let Some((v, line)) = block.raw("seed") {
                    seed = v.parse::<u64>().map_err(|_| Error::Parse {
                        line: *line,
                        message: format!("expected an unsigned 64-bit seed, got `{v}`"),
                    })?;
                }
            }
        }
    }

    let rx = rx.ok_or_else(|| Error::invalid("rx", "the [rx] section with `position` is required"))?;
    let scene = Scene {
        array,
        rx,
        walls,
        point_scatterers,
        blockers,
        sweep,
        noise_floor_dbm,
        seed,
    };
    scene.validate()?;
    Ok(scene)
}

/// Reads and validates a scenario file.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let text = std::fs::read_to_string(path)?;
    parse_scene(&text)
}

fn fmt_vec3(v: &Vec3) -> String {
    format!("{}, {}, {}", v.x, v.y, v.z)
}

/// Writes a scene in the scenario file format; parsing the result yields an
/// identical scene.
pub fn serialize_scene(scene: &Scene) -> String {
    let mut out = String::new();
    let a = &scene.array;
    let _ = writeln!(out, "[array]");
    let _ = writeln!(out, "n_elements = {}", a.n_elements);
    let _ = writeln!(out, "spacing_d = {}", a.spacing_d);
    let _ = writeln!(out, "origin = {}", fmt_vec3(&a.origin));
    let _ = writeln!(out, "axis = {}", fmt_vec3(&a.axis));
    let _ = writeln!(out, "height = {}", a.height);
    let s = &scene.sweep;
    let _ = writeln!(out, "\n[sweep]");
    let _ = writeln!(out, "f_start = {}", s.f_start);
    let _ = writeln!(out, "f_stop = {}", s.f_stop);
    let _ = writeln!(out, "n_points = {}", s.n_points);
    let _ = writeln!(out, "\n[rx]");
    let _ = writeln!(out, "position = {}", fmt_vec3(&scene.rx));
    for w in &scene.walls {
        let _ = writeln!(out, "\n[wall]");
        let _ = writeln!(out, "point = {}", fmt_vec3(&w.point));
        let _ = writeln!(out, "normal = {}", fmt_vec3(&w.normal));
        let _ = writeln!(out, "gamma = {}", w.gamma);
    }
    for p in &scene.point_scatterers {
        let _ = writeln!(out, "\n[scatterer]");
        let _ = writeln!(out, "position = {}", fmt_vec3(&p.position));
        let _ = writeln!(out, "amplitude = {}", p.amplitude);
    }
    for b in &scene.blockers {
        let _ = writeln!(out, "\n[blocker]");
        let _ = writeln!(out, "center = {}", fmt_vec3(b.center()));
        let _ = writeln!(out, "width = {}", b.width());
        let _ = writeln!(out, "height = {}", b.height());
        let _ = writeln!(out, "normal = {}", fmt_vec3(b.normal()));
    }
    let _ = writeln!(out, "\n[noise]");
    if let Some(f) = scene.noise_floor_dbm {
        let _ = writeln!(out, "floor_dbm = {f}");
    }
    let _ = writeln!(out, "seed = {}", scene.seed);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::presets;

    #[test]
    fn minimal_file_gets_defaults() {
        let s = parse_scene("[array]\nn_elements = 1\n[rx]\nposition = 0, 3, 2.5\n").unwrap();
        assert_eq!(s.array.n_elements, 1);
        assert_eq!(s.array.spacing_d, 0.011534);
        assert_eq!(s.array.origin, Vec3::new(0.0, 0.0, 2.5));
        assert_eq!(s.sweep, Sweep::default());
        assert!(s.walls.is_empty() && s.blockers.is_empty() && s.point_scatterers.is_empty());
        assert_eq!(s.noise_floor_dbm, None);
        assert_eq!(s.seed, 0);
    }

    #[test]
    fn negative_pitch_names_field() {
        let err = parse_scene("[array]\nspacing_d = -0.01\n[rx]\nposition = 0, 3, 2.5\n").unwrap_err();
        match err {
            Error::Invalid { field, .. } => assert_eq!(field, "spacing_d"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_scene("[array]\nn_elements = 4\n\nspacing_d = abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err:?}");
        let err = parse_scene("[rx]\nposition = 1, 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_scene("n_elements = 3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_scene("[rx]\nposition = 1, 2, 3\n[bogus]\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = parse_scene("[rx]\nposition = 1, 2, 3\ncolour = red\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn missing_rx_is_an_error() {
        let err = parse_scene("[array]\nn_elements = 4\n").unwrap_err();
        assert!(matches!(err, Error::Invalid { field, .. } if field == "rx"));
    }

    #[test]
    fn reflection_coefficient_bounds() {
        let text = "[rx]\nposition = 0, 3, 2.5\n[wall]\npoint = 0,0,0\nnormal = 0,0,1\ngamma = 1.5\n";
        assert!(matches!(parse_scene(text), Err(Error::Invalid { field, .. }) if field == "gamma"));
    }

    #[test]
    fn los_preset_shape() {
        let s = presets::los_lab();
        assert_eq!(s.n_elements(), 64);
        assert_eq!(s.sweep.f_start, 11e9);
        assert_eq!(s.sweep.f_stop, 15e9);
        assert!(s.blockers.is_empty());
    }

    #[test]
    fn presets_round_trip() {
        for name in presets::NAMES {
            let scene = presets::by_name(name).unwrap();
            let again = parse_scene(&serialize_scene(&scene)).unwrap();
            assert_eq!(scene, again, "{name}");
        }
    }

    #[test]
    fn load_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.scn");
        std::fs::write(&path, serialize_scene(&presets::olos_baffle())).unwrap();
        assert_eq!(load_scene(&path).unwrap(), presets::olos_baffle());
        assert!(matches!(load_scene(dir.path().join("missing.scn")), Err(Error::Io(_))));
    }
}
