//! Single-bounce path enumeration and channel frequency response synthesis.
//!
//! Every path is a polyline from an array element to the receiver. Walls
//! contribute one specular image path each, point scatterers one
//! element→scatterer→rx path each. Blockers attenuate any segment passing
//! through or near them with the single knife-edge loss of their nearest
//! edge, evaluated per frequency.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::scene::{occludes, KnifeEdge, Scene, Sweep};
use crate::{Complex64, Error, Result, Vec3, SPEED_OF_LIGHT};

/// Blockage above which a path counts as fully absorbed.
pub const FULL_BLOCKAGE_DB: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathKind {
    Los,
    WallReflection,
    Scatterer,
}

/// One propagation path from an element to the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPath {
    pub kind: PathKind,
    /// Polyline vertices, element first and receiver last.
    pub vertices: Vec<Vec3>,
    /// Total unfolded length, meters.
    pub length: f64,
    /// Γ for reflections, scattering amplitude for scatterers, 1 for LOS.
    pub interaction_gain: f64,
    /// Knife-edge geometry of every segment/blocker pair that diffracts.
    pub edges: Vec<KnifeEdge>,
    /// Summed knife-edge loss at the band center, dB.
    pub blockage_db: f64,
    /// Some segment passes through a blocker.
    pub obstructed: bool,
}

impl PropagationPath {
    fn new(kind: PathKind, vertices: Vec<Vec3>, interaction_gain: f64, scene: &Scene) -> Self {
        let length = vertices.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
        let wavelength = scene.sweep.center_wavelength();
        let mut edges = Vec::new();
        let mut obstructed = false;
        for w in vertices.windows(2) {
            for blocker in &scene.blockers {
                let occ = occludes(blocker, &w[0], &w[1], wavelength);
                obstructed |= occ.blocked;
                edges.extend(occ.edge);
            }
        }
        let mut path = Self {
            kind,
            vertices,
            length,
            interaction_gain,
            edges,
            blockage_db: 0.0,
            obstructed,
        };
        path.blockage_db = path.blockage_db_at(wavelength);
        path
    }

    /// Friis amplitude `λ/(4π·length)`.
    pub fn base_amplitude(&self, wavelength: f64) -> f64 {
        wavelength / (4.0 * PI * self.length)
    }

    /// Summed knife-edge loss at `wavelength`, dB.
    pub fn blockage_db_at(&self, wavelength: f64) -> f64 {
        self.edges
            .iter()
            .map(|e| knife_edge_loss(e.nu(wavelength)))
            .sum()
    }

    pub fn delay(&self) -> f64 {
        self.length / SPEED_OF_LIGHT
    }

    /// Complex contribution at `frequency`.
    pub fn response(&self, frequency: f64) -> Complex64 {
        let wavelength = SPEED_OF_LIGHT / frequency;
        let loss = self.blockage_db_at(wavelength);
        let amplitude =
            self.interaction_gain * self.base_amplitude(wavelength) * 10f64.powf(-loss / 20.0);
        Complex64::from_polar(amplitude, -2.0 * PI * frequency * self.length / SPEED_OF_LIGHT)
    }
}

/// Single knife-edge diffraction loss J(ν) in dB.
pub fn knife_edge_loss(nu: f64) -> f64 {
    if nu > -0.78 {
        let x = nu - 0.1;
        (6.9 + 20.0 * ((x * x + 1.0).sqrt() + x).log10()).max(0.0)
    } else {
        0.0
    }
}

/// All propagation paths from element `n` to the receiver, LOS first.
pub fn enumerate_paths(scene: &Scene, n: usize) -> Result<Vec<PropagationPath>> {
    let p = scene.element_position(n)?;
    let rx = scene.rx;
    let mut paths = vec![los_path(scene, &p)];
    for wall in &scene.walls {
        let sp = wall.signed_distance(&p);
        let sr = wall.signed_distance(&rx);
        if !(sp * sr > 0.0) {
            continue;
        }
        let image = wall.mirror(&rx);
        let t = sp / (sp - wall.signed_distance(&image));
        let hit = p + t * (image - p);
        paths.push(PropagationPath::new(
            PathKind::WallReflection,
            vec![p, hit, rx],
            wall.gamma,
            scene,
        ));
    }
    for s in &scene.point_scatterers {
        if (s.position - p).norm() == 0.0 || (s.position - rx).norm() == 0.0 {
            continue;
        }
        paths.push(PropagationPath::new(
            PathKind::Scatterer,
            vec![p, s.position, rx],
            s.amplitude,
            scene,
        ));
    }
    Ok(paths)
}

/// Direct path of element `n`.
pub fn los_path_of(scene: &Scene, n: usize) -> Result<PropagationPath> {
    Ok(los_path(scene, &scene.element_position(n)?))
}

fn los_path(scene: &Scene, p: &Vec3) -> PropagationPath {
    PropagationPath::new(PathKind::Los, vec![*p, scene.rx], 1.0, scene)
}

/// Complex channel response, element-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFrequencyResponse {
    n_elements: usize,
    sweep: Sweep,
    spacing_d: f64,
    values: Vec<Complex64>,
}

impl ChannelFrequencyResponse {
    /// Wraps `values` laid out as `n_elements` rows of `sweep.n_points`.
    pub fn new(n_elements: usize, sweep: Sweep, spacing_d: f64, values: Vec<Complex64>) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::invalid("n_elements", "must be at least 1"));
        }
        if values.len() != n_elements * sweep.n_points {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} elements × {} points",
                values.len(),
                n_elements,
                sweep.n_points
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("values", "entries must be finite"));
        }
        Ok(Self {
            n_elements,
            sweep,
            spacing_d,
            values,
        })
    }

    pub fn zeros(n_elements: usize, sweep: Sweep, spacing_d: f64) -> Self {
        Self {
            n_elements,
            sweep,
            spacing_d,
            values: vec![Complex64::new(0.0, 0.0); n_elements * sweep.n_points],
        }
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn n_points(&self) -> usize {
        self.sweep.n_points
    }

    pub fn sweep(&self) -> &Sweep {
        &self.sweep
    }

    pub fn spacing_d(&self) -> f64 {
        self.spacing_d
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Response of element `n` (1-based) over the sweep.
    ///
    /// Panics when `n` is out of range.
    pub fn row(&self, n: usize) -> &[Complex64] {
        assert!(n >= 1 && n <= self.n_elements, "element {n} out of range");
        let p = self.sweep.n_points;
        &self.values[(n - 1) * p..n * p]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [Complex64] {
        assert!(n >= 1 && n <= self.n_elements, "element {n} out of range");
        let p = self.sweep.n_points;
        &mut self.values[(n - 1) * p..n * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.values.chunks(self.sweep.n_points)
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.n_elements != other.n_elements || self.sweep != other.sweep {
            return Err(Error::DimensionMismatch(format!(
                "{}×{} vs {}×{}",
                self.n_elements,
                self.n_points(),
                other.n_elements,
                other.n_points()
            )));
        }
        Ok(())
    }

    /// Elements `1..split` from `self` and `split..=n` from `other`.
    pub fn splice(&self, other: &Self, split: usize) -> Result<Self> {
        self.check_same_shape(other)?;
        if split < 1 || split > self.n_elements + 1 {
            return Err(Error::IndexOutOfRange {
                index: split,
                len: self.n_elements,
            });
        }
        let cut = (split - 1) * self.n_points();
        let mut values = self.values[..cut].to_vec();
        values.extend_from_slice(&other.values[cut..]);
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
            ..self.clone()
        })
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
            ..self.clone()
        })
    }

    /// CSV with header `element,f_hz,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "element,f_hz,re,im")?;
        for (i, row) in self.rows().enumerate() {
            for (k, v) in row.iter().enumerate() {
                writeln!(out, "{},{},{},{}", i + 1, self.sweep.frequency(k), v.re, v.im)?;
            }
        }
        Ok(())
    }

    /// Lossless little-endian binary image.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&(self.n_elements as u64).to_le_bytes())?;
        out.write_all(&(self.sweep.n_points as u64).to_le_bytes())?;
        for x in [self.sweep.f_start, self.sweep.f_stop, self.spacing_d] {
            out.write_all(&x.to_le_bytes())?;
        }
        for v in &self.values {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Format("not a CFR binary file".into()));
        }
        let n_elements = read_u64(&mut input)? as usize;
        let n_points = read_u64(&mut input)? as usize;
        let f_start = read_f64(&mut input)?;
        let f_stop = read_f64(&mut input)?;
        let spacing_d = read_f64(&mut input)?;
        let sweep = Sweep::new(f_start, f_stop, n_points)?;
        let count = n_elements
            .checked_mul(n_points)
            .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
        let mut values = Vec::with_capacity(count);
        for _ in 0..count {
            let re = read_f64(&mut input)?;
            let im = read_f64(&mut input)?;
            values.push(Complex64::new(re, im));
        }
        Self::new(n_elements, sweep, spacing_d, values)
    }
}

const BINARY_MAGIC: &[u8; 8] = b"NFCFR\x00\x00\x01";

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    input.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Synthesizes the full multipath CFR, with noise when the scene sets a
/// noise floor.
pub fn synthesize_cfr(scene: &Scene) -> Result<ChannelFrequencyResponse> {
    synthesize(scene, false, scene.noise_power())
}

/// Noise-free CFR of the direct paths alone, blockage included.
pub fn synthesize_los(scene: &Scene) -> Result<ChannelFrequencyResponse> {
    synthesize(scene, true, None)
}

fn synthesize(scene: &Scene, los_only: bool, noise: Option<f64>) -> Result<ChannelFrequencyResponse> {
    scene.validate()?;
    let sweep = scene.sweep;
    let rows: Vec<Vec<Complex64>> = (1..=scene.n_elements())
        .into_par_iter()
        .map(|n| -> Result<Vec<Complex64>> {
            let mut paths = enumerate_paths(scene, n)?;
            if los_only {
                paths.truncate(1);
            }
            let mut row: Vec<Complex64> = sweep
                .frequencies()
                .map(|f| paths.iter().map(|p| p.response(f)).sum())
                .collect();
            if let Some(power) = noise {
                add_noise(&mut row, power, scene.seed, n);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let values = rows.into_iter().flatten().collect();
    ChannelFrequencyResponse::new(scene.n_elements(), sweep, scene.array.spacing_d, values)
}

/// Adds circular complex Gaussian noise of total variance `power`. The
/// generator stream is keyed by element so rows are independent of
/// evaluation order.
fn add_noise(row: &mut [Complex64], power: f64, seed: u64, element: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(element as u64);
    let sigma = (power / 2.0).sqrt();
    for v in row.iter_mut() {
        let u1 = 1.0 - unit(rng.next_u64());
        let u2 = unit(rng.next_u64());
        let radius = (-2.0 * u1.ln()).sqrt() * sigma;
        let angle = 2.0 * PI * u2;
        *v += Complex64::new(radius * angle.cos(), radius * angle.sin());
    }
}

/// Uniform in [0, 1) from the top 53 bits.
fn unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
