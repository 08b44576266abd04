//! Rectangular absorbing screens and single knife-edge clearance.

use crate::{Error, Result, Vec3};

/// Zero-thickness, perfectly absorbing rectangular screen.
///
/// The width runs horizontally (perpendicular to the normal and to +z) and
/// the height along the remaining in-plane direction. A horizontal screen
/// (normal along z) takes +x as its width direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocker {
    center: Vec3,
    width: f64,
    height: f64,
    normal: Vec3,
    width_axis: Vec3,
    height_axis: Vec3,
}

impl Blocker {
    pub fn new(center: Vec3, width: f64, height: f64, normal: Vec3) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::invalid("width", "must be positive"));
        }
        if !(height > 0.0) || !height.is_finite() {
            return Err(Error::invalid("height", "must be positive"));
        }
        let len = normal.norm();
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::invalid("normal", "must be a nonzero vector"));
        }
        let normal = if (len - 1.0).abs() > 1e-12 {
            normal / len
        } else {
            normal
        };
        let horizontal = normal.cross(&Vec3::z());
        let width_axis = if horizontal.norm() > 1e-9 {
            horizontal.normalize()
        } else {
            Vec3::x()
        };
        let height_axis = width_axis.cross(&normal);
        Ok(Self {
            center,
            width,
            height,
            normal,
            width_axis,
            height_axis,
        })
    }

    pub fn center(&self) -> &Vec3 {
        &self.center
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn normal(&self) -> &Vec3 {
        &self.normal
    }

    pub(crate) fn validate(&self) -> Result<()> {
        Blocker::new(self.center, self.width, self.height, self.normal).map(|_| ())
    }

    /// Corners in cyclic order.
    pub fn corners(&self) -> [Vec3; 4] {
        let w = 0.5 * self.width * self.width_axis;
        let h = 0.5 * self.height * self.height_axis;
        [
            self.center - w - h,
            self.center + w - h,
            self.center + w + h,
            self.center - w + h,
        ]
    }

    /// The four bounding segments.
    pub fn edges(&self) -> [(Vec3, Vec3); 4] {
        let c = self.corners();
        [(c[0], c[1]), (c[1], c[2]), (c[2], c[3]), (c[3], c[0])]
    }

    /// Parameter in (0, 1) and in-plane offset where segment a–b pierces the
    /// rectangle, if it does.
    fn pierce(&self, a: &Vec3, b: &Vec3) -> Option<(f64, f64, f64)> {
        let dir = b - a;
        let den = dir.dot(&self.normal);
        if den.abs() < 1e-300 {
            return None;
        }
        let t = (self.center - a).dot(&self.normal) / den;
        if !(t > 0.0 && t < 1.0) {
            return None;
        }
        let p = a + t * dir - self.center;
        let u = p.dot(&self.width_axis);
        let v = p.dot(&self.height_axis);
        if u.abs() <= 0.5 * self.width && v.abs() <= 0.5 * self.height {
            Some((t, u, v))
        } else {
            None
        }
    }
}

/// Knife-edge geometry of one path segment against its nearest screen edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnifeEdge {
    /// Signed clearance h: positive when the edge obstructs the segment.
    pub clearance: f64,
    /// Distance from the segment start to the diffraction point.
    pub d1: f64,
    /// Distance from the diffraction point to the segment end.
    pub d2: f64,
}

impl KnifeEdge {
    /// Fresnel–Kirchhoff parameter at `wavelength`.
    pub fn nu(&self, wavelength: f64) -> f64 {
        knife_edge_nu(self.clearance, self.d1, self.d2, wavelength)
    }
}

/// ν = h·sqrt(2(d1+d2)/(λ·d1·d2)).
pub fn knife_edge_nu(clearance: f64, d1: f64, d2: f64, wavelength: f64) -> f64 {
    clearance * (2.0 * (d1 + d2) / (wavelength * d1 * d2)).sqrt()
}

/// Outcome of an occlusion query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occlusion {
    /// Segment passes through the screen.
    pub blocked: bool,
    /// Fresnel parameter at the query wavelength; `-inf` when no edge lies
    /// between the segment endpoints.
    pub nu: f64,
    pub edge: Option<KnifeEdge>,
}

/// Tests segment a–b against `blocker` and computes the single knife-edge
/// Fresnel parameter of the closest screen edge at `wavelength`.
pub fn occludes(blocker: &Blocker, a: &Vec3, b: &Vec3, wavelength: f64) -> Occlusion {
    let length = (b - a).norm();
    let pierce = blocker.pierce(a, b);
    let blocked = pierce.is_some();

    let mut best: Option<(f64, f64)> = None;
    for (p, q) in blocker.edges() {
        let (dist, s) = segment_distance(a, b, &p, &q);
        if best.map_or(true, |(d, _)| dist < d) {
            best = Some((dist, s));
        }
    }
    let (dist, s) = best.expect("rectangle has four edges");
    let interior = s > 1e-12 && s < 1.0 - 1e-12;

    let edge = match (pierce, interior) {
        (_, true) if length > 0.0 => Some(KnifeEdge {
            clearance: if blocked { dist } else { -dist },
            d1: s * length,
            d2: (1.0 - s) * length,
        }),
        (Some((t, u, v)), _) if length > 0.0 && t > 0.0 && t < 1.0 => {
            // nearest edge lies beside an endpoint: diffract at the piercing point
            let inside = (0.5 * blocker.width - u.abs()).min(0.5 * blocker.height - v.abs());
            Some(KnifeEdge {
                clearance: inside,
                d1: t * length,
                d2: (1.0 - t) * length,
            })
        }
        _ => None,
    };
    Occlusion {
        blocked,
        nu: edge.map_or(f64::NEG_INFINITY, |e| e.nu(wavelength)),
        edge,
    }
}

/// Closest distance between segments a–b and p–q, and the parameter along
/// a–b of the closest point.
fn segment_distance(a: &Vec3, b: &Vec3, p: &Vec3, q: &Vec3) -> (f64, f64) {
    let d1 = b - a;
    let d2 = q - p;
    let r = a - p;
    let aa = d1.dot(&d1);
    let ee = d2.dot(&d2);
    let ff = d2.dot(&r);
    if aa <= f64::EPSILON && ee <= f64::EPSILON {
        return (r.norm(), 0.0);
    }
    let (s, t) = if aa <= f64::EPSILON {
        (0.0, (ff / ee).clamp(0.0, 1.0))
    } else {
        let cc = d1.dot(&r);
        if ee <= f64::EPSILON {
            ((-cc / aa).clamp(0.0, 1.0), 0.0)
        } else {
            let bb = d1.dot(&d2);
            let denom = aa * ee - bb * bb;
            let mut s = if denom > 1e-14 * aa * ee {
                ((bb * ff - cc * ee) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t = (bb * s + ff) / ee;
            if t < 0.0 {
                t = 0.0;
                s = (-cc / aa).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((bb - cc) / aa).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    let c1 = a + d1 * s;
    let c2 = p + d2 * t;
    ((c1 - c2).norm(), s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn screen() -> Blocker {
        // 1 m × 1 m screen in the plane x = 0 centered at the origin
        Blocker::new(Vec3::zeros(), 1.0, 1.0, Vec3::new(1.0, 0.0, 0.0)).unwrap()
    }

    const LAMBDA: f64 = 0.023;

    #[test]
    fn clear_path_far_above() {
        let o = occludes(
            &screen(),
            &Vec3::new(-5.0, 0.0, 10.0),
            &Vec3::new(5.0, 0.0, 10.0),
            LAMBDA,
        );
        assert!(!o.blocked);
        assert!(o.nu < -50.0, "nu = {}", o.nu);
    }

    #[test]
    fn direct_hit_is_blocked() {
        let o = occludes(
            &screen(),
            &Vec3::new(-5.0, 0.0, 0.0),
            &Vec3::new(5.0, 0.0, 0.0),
            LAMBDA,
        );
        assert!(o.blocked);
        assert!(o.nu > 0.0);
        let e = o.edge.unwrap();
        assert_relative_eq!(e.clearance, 0.5, epsilon = 1e-12);
        assert_relative_eq!(e.d1, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn grazing_gives_zero_nu() {
        let o = occludes(
            &screen(),
            &Vec3::new(-5.0, 0.0, 0.5),
            &Vec3::new(5.0, 0.0, 0.5),
            LAMBDA,
        );
        assert_eq!(o.nu, 0.0);
    }

    #[test]
    fn swap_invariance() {
        let a = Vec3::new(-3.0, 0.2, 0.61);
        let b = Vec3::new(4.0, -0.1, 0.55);
        let o1 = occludes(&screen(), &a, &b, LAMBDA);
        let o2 = occludes(&screen(), &b, &a, LAMBDA);
        assert_eq!(o1.blocked, o2.blocked);
        assert_relative_eq!(o1.nu, o2.nu, max_relative = 1e-12);
    }

    #[test]
    fn segment_ending_before_screen_has_no_edge() {
        let o = occludes(
            &screen(),
            &Vec3::new(-5.0, 0.0, 0.0),
            &Vec3::new(-1.0, 0.0, 0.0),
            LAMBDA,
        );
        assert!(!o.blocked);
        assert_eq!(o.nu, f64::NEG_INFINITY);
    }

    #[test]
    fn nu_formula() {
        let nu = knife_edge_nu(0.1, 2.0, 3.0, 0.02);
        assert_relative_eq!(nu, 0.1 * (2.0f64 * 5.0 / (0.02 * 6.0)).sqrt());
    }

    #[test]
    fn degenerate_sizes_rejected() {
        assert!(Blocker::new(Vec3::zeros(), 0.0, 1.0, Vec3::x()).is_err());
        assert!(Blocker::new(Vec3::zeros(), 1.0, -1.0, Vec3::x()).is_err());
        assert!(Blocker::new(Vec3::zeros(), 1.0, 1.0, Vec3::zeros()).is_err());
    }

    #[test]
    fn width_axis_is_horizontal() {
        let b = Blocker::new(Vec3::zeros(), 2.0, 1.0, Vec3::new(-0.6, 0.8, 0.0)).unwrap();
        for (p, q) in b.edges() {
            let len = (q - p).norm();
            assert!((len - 2.0).abs() < 1e-12 || (len - 1.0).abs() < 1e-12);
        }
        let c = b.corners();
        assert_relative_eq!((c[1] - c[0]).z, 0.0);
    }
}
